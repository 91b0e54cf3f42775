//! Sparse regression solvers for (weighted) PCE regression systems.

mod bcs;
mod hyper;
mod lars;
mod omp;
mod sp;
mod spgl1;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{PceError, Result};
use crate::linalg::{ols_fit, sample_variance};
use crate::selection::modified_loo_from_fit;

pub use bcs::bcs_fastlaplace;
pub use hyper::{
    hyperparameter_grid, solve_with_hyperparameters, Grid, SelectionSpec, NOISE_GRID_LEN,
};
pub use lars::lars;
pub use omp::{omp, OmpStop};
pub use sp::{sp_k_grid, sp_sweep, subspace_pursuit, SpCv};
pub use spgl1::{bpdn_spg, pareto_curve, pareto_value};

/// `W Psi c ~ W y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub psi: DMatrix<f64>,
    pub y: DVector<f64>,
    pub weights: Option<DVector<f64>>,
}

impl RegressionProblem {
    pub fn new(psi: DMatrix<f64>, y: DVector<f64>, weights: Option<DVector<f64>>) -> Result<Self> {
        if psi.nrows() != y.len() {
            return Err(PceError::DimensionMismatch {
                expected: psi.nrows(),
                got: y.len(),
            });
        }
        if let Some(w) = &weights {
            if w.len() != y.len() {
                return Err(PceError::DimensionMismatch {
                    expected: y.len(),
                    got: w.len(),
                });
            }
            if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(PceError::InvalidParameter(
                    "weights must be positive".into(),
                ));
            }
        }
        Ok(Self { psi, y, weights })
    }

    pub fn unweighted(psi: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::new(psi, y, None)
    }

    pub fn nrows(&self) -> usize {
        self.psi.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.psi.ncols()
    }

    /// `(W Psi, W y)`.
    pub fn weighted_system(&self) -> (DMatrix<f64>, DVector<f64>) {
        match &self.weights {
            None => (self.psi.clone(), self.y.clone()),
            Some(w) => {
                let mut a = self.psi.clone();
                for (i, mut row) in a.row_iter_mut().enumerate() {
                    row *= w[i];
                }
                (a, self.y.component_mul(w))
            }
        }
    }

    /// Sub-problem made of the given rows.
    pub fn rows(&self, rows: &[usize]) -> Self {
        Self {
            psi: self.psi.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
            weights: self
                .weights
                .as_ref()
                .map(|w| DVector::from_iterator(rows.len(), rows.iter().map(|&i| w[i]))),
        }
    }
}

/// Solver identifier as used in configuration and records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverId {
    Omp,
    /// Hybrid LARS.
    Lars,
    Sp,
    SpLoo,
    Bcs,
    Spgl1,
}

impl SolverId {
    pub const ALL: [SolverId; 6] = [
        SolverId::Omp,
        SolverId::Lars,
        SolverId::Sp,
        SolverId::SpLoo,
        SolverId::Bcs,
        SolverId::Spgl1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverId::Omp => "omp",
            SolverId::Lars => "lars",
            SolverId::Sp => "sp",
            SolverId::SpLoo => "sp_loo",
            SolverId::Bcs => "bcs",
            SolverId::Spgl1 => "spgl1",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverId {
    type Err = PceError;

    fn from_str(s: &str) -> Result<Self> {
        SolverId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PceError::InvalidParameter(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverMeta {
    pub name: String,
    /// Winning hyperparameter (sparsity `K` or noise level), if any.
    pub hyperparameter: Option<f64>,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl SolverMeta {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub(crate) fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{}: {msg}", self.name);
        self.warnings.push(msg);
    }
}

/// Coefficient vector with its support and error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub coefficients: DVector<f64>,
    pub active_set: Vec<usize>,
    pub cv_error: f64,
    pub meta: SolverMeta,
}

#[derive(Serialize, Deserialize)]
struct SparseSolutionRepr {
    n_basis: usize,
    coefficients: BTreeMap<usize, f64>,
    active_set: Vec<usize>,
    cv_error: f64,
    meta: SolverMeta,
}

impl Serialize for SparseSolution {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        SparseSolutionRepr {
            n_basis: self.coefficients.len(),
            coefficients: self
                .active_set
                .iter()
                .map(|&j| (j, self.coefficients[j]))
                .collect(),
            active_set: self.active_set.clone(),
            cv_error: self.cv_error,
            meta: self.meta.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SparseSolution {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let r = SparseSolutionRepr::deserialize(deserializer)?;
        let mut c = DVector::zeros(r.n_basis);
        for (j, v) in r.coefficients {
            if j >= r.n_basis {
                return Err(serde::de::Error::custom(format!(
                    "coefficient index {j} out of range"
                )));
            }
            c[j] = v;
        }
        Ok(Self {
            coefficients: c,
            active_set: r.active_set,
            cv_error: r.cv_error,
            meta: r.meta,
        })
    }
}

impl SparseSolution {
    /// Builds a solution from coefficients on `active` columns.
    pub fn from_active(
        p: usize,
        active: &[usize],
        values: &DVector<f64>,
        meta: SolverMeta,
    ) -> Self {
        let mut coefficients = DVector::zeros(p);
        for (k, &j) in active.iter().enumerate() {
            coefficients[j] = values[k];
        }
        let mut active_set: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&j| coefficients[j] != 0.0)
            .collect();
        active_set.sort_unstable();
        Self {
            coefficients,
            active_set,
            cv_error: f64::NAN,
            meta,
        }
    }

    pub fn zeros(p: usize, meta: SolverMeta) -> Self {
        Self {
            coefficients: DVector::zeros(p),
            active_set: Vec::new(),
            cv_error: f64::NAN,
            meta,
        }
    }

    pub fn n_active(&self) -> usize {
        self.active_set.len()
    }

    pub fn predict(&self, psi: &DMatrix<f64>) -> DVector<f64> {
        psi * &self.coefficients
    }
}

/// One model along a greedy path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub active: Vec<usize>,
    /// Coefficients on `active`, in the same order.
    pub coefficients: DVector<f64>,
    pub loo: Option<f64>,
}

/// Solution path together with the selected model.
#[derive(Debug, Clone)]
pub struct PathSolution {
    pub path: Vec<PathPoint>,
    pub best: SparseSolution,
}

/// Consecutive non-improving steps tolerated before a path stops.
pub fn early_stop_window(n: usize, p: usize) -> usize {
    ((0.1 * n.min(p) as f64).ceil() as usize).max(1)
}

/// Modified LOO of the OLS refit on `active`; the empty model scores its
/// mean squared response relative to the variance.
pub fn support_loo(a: &DMatrix<f64>, b: &DVector<f64>, active: &[usize]) -> f64 {
    if active.is_empty() {
        let var = sample_variance(b);
        return if var > 0.0 {
            b.norm_squared() / b.len() as f64 / var
        } else {
            f64::INFINITY
        };
    }
    if active.len() >= b.len() {
        return f64::INFINITY;
    }
    ols_fit(a, b, active)
        .and_then(|fit| modified_loo_from_fit(&fit, b))
        .unwrap_or(f64::INFINITY)
}

/// `|a_j^T r| / ||a_j||` for every column; zero columns score 0.
pub(crate) fn normalized_correlations(
    a: &DMatrix<f64>,
    norms: &[f64],
    r: &DVector<f64>,
) -> Vec<f64> {
    let c = a.tr_mul(r);
    c.iter()
        .zip(norms)
        .map(|(v, &n)| if n > 0.0 { v / n } else { 0.0 })
        .collect()
}

pub(crate) fn column_norms(a: &DMatrix<f64>) -> Vec<f64> {
    a.column_iter().map(|c| c.norm()).collect()
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_names_round_trip() {
        for id in SolverId::ALL {
            assert_eq!(id.name().parse::<SolverId>().unwrap(), id);
        }
        assert!("cosamp".parse::<SolverId>().is_err());
    }

    #[test]
    fn solution_json_is_sparse() {
        let mut c = DVector::zeros(5);
        c[3] = 1.5;
        let s = SparseSolution {
            coefficients: c,
            active_set: vec![3],
            cv_error: 0.25,
            meta: SolverMeta::new("omp"),
        };
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"coefficients\":{\"3\":1.5}"));
        let back: SparseSolution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn weighted_system_scales_rows() {
        let p = RegressionProblem::new(
            DMatrix::from_element(2, 1, 1.0),
            DVector::from_vec(vec![1.0, 2.0]),
            Some(DVector::from_vec(vec![2.0, 3.0])),
        )
        .unwrap();
        let (a, b) = p.weighted_system();
        assert_eq!(a.as_slice(), &[2.0, 3.0]);
        assert_eq!(b.as_slice(), &[2.0, 6.0]);
        assert!(RegressionProblem::new(DMatrix::zeros(2, 1), DVector::zeros(3), None).is_err());
    }

    #[test]
    fn window_size() {
        assert_eq!(early_stop_window(40, 21), 3);
        assert_eq!(early_stop_window(5, 100), 1);
    }
}
