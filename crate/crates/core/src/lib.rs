//! Sparse polynomial chaos expansions.
//!
//! Building blocks for regression-based PCE surrogates: input models,
//! orthonormal bases, experimental designs, sparse solvers and
//! cross-validation, plus a few analytical benchmark models.

pub mod basis;
pub mod design;
pub mod error;
pub mod inputs;
pub mod linalg;
pub mod models;
pub mod pce;
pub mod selection;
pub mod solvers;

pub use error::{PceError, Result};
