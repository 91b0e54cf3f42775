use serde::{Deserialize, Serialize};

use super::bcs::bcs_fastlaplace;
use super::lars::lars;
use super::omp::{omp, OmpStop};
use super::sp::{sp_k_grid, sp_with_grid, SpCv};
use super::spgl1::bpdn_spg;
use super::{RegressionProblem, SolverId, SparseSolution};
use crate::error::{PceError, Result};
use crate::linalg::sample_variance;
use crate::selection::{kfold_cv, CvSpec};

pub const NOISE_GRID_LEN: usize = 16;
const NOISE_LO: f64 = 1e-16;
const NOISE_HI: f64 = 1e-1;

/// Cross-validation settings shared by the solvers that tune a hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionSpec {
    pub sp_folds: usize,
    pub noise_folds: usize,
    pub fold_seed: u64,
}

impl Default for SelectionSpec {
    fn default() -> Self {
        Self {
            sp_folds: 4,
            noise_folds: 5,
            fold_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// Path lengths explored by a greedy path.
    SparsityRange {
        min: usize,
        max: usize,
    },
    SparsityList(Vec<usize>),
    /// Total squared residual budgets `sigma^2`.
    NoiseVariance(Vec<f64>),
}

/// Candidate hyperparameters of `solver` for the given problem.
pub fn hyperparameter_grid(solver: SolverId, problem: &RegressionProblem) -> Result<Grid> {
    let (n, p) = (problem.nrows(), problem.ncols());
    Ok(match solver {
        SolverId::Omp | SolverId::Lars => Grid::SparsityRange {
            min: 1,
            max: p.min(n.saturating_sub(1)),
        },
        SolverId::Sp | SolverId::SpLoo => Grid::SparsityList(sp_k_grid(n, p)),
        SolverId::Bcs | SolverId::Spgl1 => {
            let (_, b) = problem.weighted_system();
            let var = sample_variance(&b);
            if !(var > 0.0) {
                return Err(PceError::ZeroVariance("responses"));
            }
            let scale = n as f64 * var;
            let (lo, hi) = (NOISE_LO.log10(), NOISE_HI.log10());
            Grid::NoiseVariance(
                (0..NOISE_GRID_LEN)
                    .map(|i| {
                        let t = i as f64 / (NOISE_GRID_LEN - 1) as f64;
                        scale * 10f64.powf(lo + t * (hi - lo))
                    })
                    .collect(),
            )
        }
    })
}

fn noise_fit(solver: SolverId, problem: &RegressionProblem, sigma2: f64) -> Result<SparseSolution> {
    let n = problem.nrows() as f64;
    match solver {
        SolverId::Bcs => bcs_fastlaplace(problem, n / sigma2),
        SolverId::Spgl1 => bpdn_spg(problem, sigma2.sqrt()),
        _ => unreachable!("not a noise-tuned solver"),
    }
}

fn select_noise(
    solver: SolverId,
    problem: &RegressionProblem,
    grid: &[f64],
    spec: &SelectionSpec,
) -> Result<SparseSolution> {
    let (a, b) = problem.weighted_system();
    let n = b.len();
    let plain = RegressionProblem {
        psi: a,
        y: b.clone(),
        weights: None,
    };
    let cv = CvSpec::kfold(spec.noise_folds, spec.fold_seed);
    let mut scores = Vec::with_capacity(grid.len());
    for &sigma2 in grid {
        let score = kfold_cv(&b, &cv, |train, test| {
            let sub = plain.rows(train);
            let sol = noise_fit(solver, &sub, sigma2 * train.len() as f64 / n as f64)?;
            Ok(plain.rows(test).psi * sol.coefficients)
        });
        scores.push(score.unwrap_or(f64::INFINITY));
    }
    let pos = argmin_first(&scores).ok_or_else(|| {
        PceError::InvalidParameter("no noise level in the grid could be cross-validated".into())
    })?;
    let mut sol = noise_fit(solver, problem, grid[pos])?;
    sol.cv_error = scores[pos];
    sol.meta.hyperparameter = Some(grid[pos]);
    Ok(sol)
}

fn argmin_first(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if x.is_finite() && best.is_none_or(|b| x < v[b]) {
            best = Some(i);
        }
    }
    best
}

/// Runs `solver` with its hyperparameter chosen by the rule attached to it:
/// modified LOO along the path for OMP and LARS, k-fold or LOO over the
/// sparsity grid for the SP variants, and k-fold over the noise grid for
/// BCS and SPGL1.
pub fn solve_with_hyperparameters(
    solver: SolverId,
    problem: &RegressionProblem,
    spec: &SelectionSpec,
) -> Result<SparseSolution> {
    let grid = hyperparameter_grid(solver, problem)?;
    match (solver, grid) {
        (SolverId::Omp, _) => Ok(omp(problem, OmpStop::Loo)?.best),
        (SolverId::Lars, _) => Ok(lars(problem, true)?.best),
        (SolverId::Sp, Grid::SparsityList(g)) => sp_with_grid(
            problem,
            &g,
            SpCv::Kfold {
                k: spec.sp_folds,
                seed: spec.fold_seed,
            },
        ),
        (SolverId::SpLoo, Grid::SparsityList(g)) => sp_with_grid(problem, &g, SpCv::Loo),
        (SolverId::Bcs | SolverId::Spgl1, Grid::NoiseVariance(g)) => {
            select_noise(solver, problem, &g, spec)
        }
        _ => unreachable!("grid kind matches solver"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::testutil::planted;

    #[test]
    fn noise_grid_endpoints() {
        let (prob, _) = planted(30, 60, 3, 1);
        let var = sample_variance(&prob.y);
        let Grid::NoiseVariance(g) = hyperparameter_grid(SolverId::Bcs, &prob).unwrap() else {
            panic!("wrong grid kind");
        };
        assert_eq!(g.len(), 16);
        assert!((g[0] / (30.0 * var) - 1e-16).abs() < 1e-28);
        assert!((g[15] / (30.0 * var) - 1e-1).abs() < 1e-13);
        for w in g.windows(2) {
            assert!((w[1] / w[0] - 10f64.powf(1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn sparsity_grids() {
        let (prob, _) = planted(30, 60, 3, 2);
        assert_eq!(
            hyperparameter_grid(SolverId::Omp, &prob).unwrap(),
            Grid::SparsityRange { min: 1, max: 29 }
        );
        assert_eq!(
            hyperparameter_grid(SolverId::SpLoo, &prob).unwrap(),
            Grid::SparsityList(sp_k_grid(30, 60))
        );
    }

    #[test]
    fn all_solvers_recover_noiseless_sparse_vector() {
        let (prob, truth) = planted(50, 90, 4, 3);
        for id in SolverId::ALL {
            let sol = solve_with_hyperparameters(id, &prob, &SelectionSpec::default()).unwrap();
            let err = (&sol.coefficients - &truth).amax();
            assert!(err < 1e-4, "{id}: {err}");
            assert!(sol.cv_error.is_finite(), "{id}");
        }
    }

    #[test]
    fn argmin_prefers_first() {
        assert_eq!(argmin_first(&[2.0, 1.0, 1.0, f64::NAN]), Some(1));
        assert_eq!(argmin_first(&[f64::INFINITY]), None);
    }
}
