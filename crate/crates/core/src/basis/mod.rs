//! Orthonormal polynomial bases, truncation sets and regression matrices.

mod assemble;
mod poly;
mod truncation;

pub use assemble::{assemble, PolyBasis, RegressionMatrix};
pub use poly::{gauss_quadrature, PolyFamily};
pub use truncation::{MultiIndex, MultiIndexSet, TruncationSpec};
