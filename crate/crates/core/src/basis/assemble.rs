use nalgebra::{DMatrix, DVector};

use super::{MultiIndexSet, PolyFamily};
use crate::error::{PceError, Result};

/// Tensor-product orthonormal basis over a truncated index set.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    families: Vec<PolyFamily>,
    set: MultiIndexSet,
    max_deg: Vec<usize>,
    /// Nonzero `(dim, degree)` pairs of each multi-index.
    factors: Vec<Vec<(usize, usize)>>,
}

impl PolyBasis {
    pub fn new(families: Vec<PolyFamily>, set: MultiIndexSet) -> Result<Self> {
        if families.len() != set.dim() {
            return Err(PceError::DimensionMismatch {
                expected: set.dim(),
                got: families.len(),
            });
        }
        let max_deg = set.max_degrees();
        let factors = set
            .indices()
            .iter()
            .map(|alpha| {
                alpha
                    .iter()
                    .enumerate()
                    .filter(|(_, &a)| a > 0)
                    .map(|(k, &a)| (k, a as usize))
                    .collect()
            })
            .collect();
        Ok(Self {
            families,
            set,
            max_deg,
            factors,
        })
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn families(&self) -> &[PolyFamily] {
        &self.families
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.set
    }

    fn tables(&self, u: &[f64]) -> Vec<Vec<f64>> {
        self.families
            .iter()
            .zip(u)
            .zip(&self.max_deg)
            .map(|((f, &x), &m)| {
                let mut t = vec![0.0; m + 1];
                f.eval_all(x, &mut t);
                t
            })
            .collect()
    }

    /// All basis values at one standardized point.
    pub fn eval_point(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(PceError::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        let tables = self.tables(u);
        for (o, fac) in out.iter_mut().zip(&self.factors) {
            *o = fac.iter().map(|&(k, a)| tables[k][a]).product();
        }
        Ok(())
    }

    /// `Psi[i, j] = psi_j(u_i)`, rows are standardized points.
    pub fn assemble(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if points.ncols() != self.dim() {
            return Err(PceError::DimensionMismatch {
                expected: self.dim(),
                got: points.ncols(),
            });
        }
        let n = points.nrows();
        let mut psi = DMatrix::zeros(n, self.len());
        let mut row = vec![0.0; self.len()];
        let mut u = vec![0.0; self.dim()];
        for i in 0..n {
            for (k, x) in u.iter_mut().enumerate() {
                *x = points[(i, k)];
            }
            self.eval_point(&u, &mut row)?;
            for (j, &v) in row.iter().enumerate() {
                psi[(i, j)] = v;
            }
        }
        Ok(psi)
    }

    /// Columns `cols` of [`PolyBasis::assemble`], in that order.
    pub fn assemble_columns(&self, points: &DMatrix<f64>, cols: &[usize]) -> Result<DMatrix<f64>> {
        if points.ncols() != self.dim() {
            return Err(PceError::DimensionMismatch {
                expected: self.dim(),
                got: points.ncols(),
            });
        }
        if let Some(&j) = cols.iter().find(|&&j| j >= self.len()) {
            return Err(PceError::InvalidParameter(format!(
                "basis index {j} out of range"
            )));
        }
        let mut psi = DMatrix::zeros(points.nrows(), cols.len());
        let mut u = vec![0.0; self.dim()];
        for i in 0..points.nrows() {
            for (k, x) in u.iter_mut().enumerate() {
                *x = points[(i, k)];
            }
            let tables = self.tables(&u);
            for (c, &j) in cols.iter().enumerate() {
                psi[(i, c)] = self.factors[j].iter().map(|&(k, a)| tables[k][a]).product();
            }
        }
        Ok(psi)
    }

    /// `B(u) = max_alpha |psi_alpha(u)|`.
    pub fn tight_bound(&self, u: &[f64]) -> Result<f64> {
        let mut row = vec![0.0; self.len()];
        self.eval_point(u, &mut row)?;
        Ok(row.iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    /// Max over rows of `B(u_i)^2`.
    pub fn empirical_coherence(&self, points: &DMatrix<f64>) -> Result<f64> {
        let psi = self.assemble(points)?;
        Ok(psi.iter().fold(0.0, |m, v| m.max(v * v)))
    }

    /// Max over rows of `(mean_alpha psi_alpha(u_i)^2)^(1/2)`, the
    /// Christoffel-type coherence diagnostic.
    pub fn christoffel_coherence(&self, points: &DMatrix<f64>) -> Result<f64> {
        let psi = self.assemble(points)?;
        let p = psi.ncols() as f64;
        Ok(psi
            .row_iter()
            .map(|r| (r.norm_squared() / p).sqrt())
            .fold(0.0, f64::max))
    }

    /// Upper bound of `B` from per-dimension sups; `None` when some
    /// family is unbounded at the degrees used.
    pub fn product_sup_bound(&self) -> Option<f64> {
        let mut best: f64 = 0.0;
        for fac in &self.factors {
            let mut v = 1.0;
            for &(k, a) in fac {
                v *= self.families[k].sup_abs(a)?;
            }
            best = best.max(v);
        }
        Some(best)
    }

    /// Per-index products of caller-supplied per-dimension sup tables.
    pub fn product_bound_with(&self, sups: &[Vec<f64>]) -> f64 {
        self.factors
            .iter()
            .map(|fac| fac.iter().map(|&(k, a)| sups[k][a]).product::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_degrees(&self) -> &[usize] {
        &self.max_deg
    }
}

/// Regression matrix with optional diagonal row weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionMatrix {
    pub values: DMatrix<f64>,
    pub weights: Option<DVector<f64>>,
}

impl RegressionMatrix {
    pub fn new(values: DMatrix<f64>, weights: Option<DVector<f64>>) -> Result<Self> {
        if let Some(w) = &weights {
            if w.len() != values.nrows() {
                return Err(PceError::DimensionMismatch {
                    expected: values.nrows(),
                    got: w.len(),
                });
            }
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(PceError::InvalidParameter(
                    "weights must be positive".into(),
                ));
            }
        }
        Ok(Self { values, weights })
    }

    /// `W Psi`.
    pub fn weighted(&self) -> DMatrix<f64> {
        match &self.weights {
            None => self.values.clone(),
            Some(w) => {
                let mut m = self.values.clone();
                for (i, mut row) in m.row_iter_mut().enumerate() {
                    row *= w[i];
                }
                m
            }
        }
    }
}

/// Free-function form of [`PolyBasis::assemble`].
pub fn assemble(
    families: &[PolyFamily],
    set: &MultiIndexSet,
    points: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    PolyBasis::new(families.to_vec(), set.clone())?.assemble(points)
}
