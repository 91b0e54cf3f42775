use nalgebra::{DMatrix, DVector};

use super::{column_norms, RegressionProblem, SolverMeta, SparseSolution};
use crate::error::{PceError, Result};
use crate::linalg::{IncrementalQr, OlsFit};
use crate::selection::{kfold_cv, loo_from_fit, CvSpec};

const MAX_ITER_FACTOR: usize = 10;
const SWEEP_LEN: usize = 10;
const TIE_TOL: f64 = 1e-20;

/// How the sparsity level of [`sp_sweep`] is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpCv {
    /// Hat-matrix LOO of the OLS refit on the support.
    Loo,
    /// k-fold CV with seeded folds.
    Kfold { k: usize, seed: u64 },
}

impl Default for SpCv {
    fn default() -> Self {
        SpCv::Kfold { k: 4, seed: 0 }
    }
}

/// Least squares on `cols`, skipping columns that are collinear with the
/// ones before them.
fn ols_keep(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> (Vec<usize>, OlsFit) {
    let mut qr = IncrementalQr::new(a.nrows());
    let mut kept = Vec::with_capacity(cols.len());
    for &j in cols {
        if qr.push(&a.column(j).into_owned()).is_ok() {
            kept.push(j);
        }
    }
    let fit = OlsFit::from_qr(&qr, b);
    (kept, fit)
}

/// Indices of the `k` largest scores among `candidates`, lowest index first
/// on ties.
fn top_k(
    candidates: impl Iterator<Item = usize>,
    score: impl Fn(usize) -> f64,
    k: usize,
) -> Vec<usize> {
    let mut c: Vec<usize> = candidates.collect();
    c.sort_by(|&i, &j| score(j).total_cmp(&score(i)).then(i.cmp(&j)));
    c.truncate(k);
    c.sort_unstable();
    c
}

/// Subspace pursuit with fixed sparsity `k` on `W Psi c ~ W y`.
pub fn subspace_pursuit(problem: &RegressionProblem, k: usize) -> Result<SparseSolution> {
    let (a, b) = problem.weighted_system();
    let (n, p) = a.shape();
    if k == 0 || 2 * k > n.min(p) {
        return Err(PceError::InvalidParameter(format!(
            "subspace pursuit needs 1 <= K and 2K <= min(N, P) = {}, got K = {k}",
            n.min(p)
        )));
    }
    let mut meta = SolverMeta::new("sp");
    meta.hyperparameter = Some(k as f64);
    let norms = column_norms(&a);
    let usable = |j: usize| norms[j] > 0.0;
    let corr_score = |r: &DVector<f64>| -> Vec<f64> {
        let c = a.tr_mul(r);
        (0..p)
            .map(|j| {
                if usable(j) {
                    (c[j] / norms[j]).abs()
                } else {
                    0.0
                }
            })
            .collect()
    };

    let s0 = corr_score(&b);
    let init = top_k((0..p).filter(|&j| usable(j)), |j| s0[j], k);
    let (mut support, mut fit) = ols_keep(&a, &b, &init);
    let mut rnorm = fit.residual.norm();

    for it in 0..MAX_ITER_FACTOR * k {
        meta.iterations = it + 1;
        let score = corr_score(&fit.residual);
        let extra = top_k(
            (0..p).filter(|&j| usable(j) && !support.contains(&j)),
            |j| score[j],
            k,
        );
        let mut merged = support.clone();
        merged.extend(extra);
        merged.sort_unstable();
        let (kept, wide) = ols_keep(&a, &b, &merged);
        let mag = |pos: usize| wide.coefficients[pos].abs() * norms[kept[pos]];
        let pruned_pos = top_k(0..kept.len(), mag, k);
        let pruned: Vec<usize> = pruned_pos.iter().map(|&q| kept[q]).collect();
        let (new_support, new_fit) = ols_keep(&a, &b, &pruned);
        let new_norm = new_fit.residual.norm();
        if !(new_norm < rnorm) {
            break;
        }
        support = new_support;
        fit = new_fit;
        rnorm = new_norm;
        if it + 1 == MAX_ITER_FACTOR * k {
            meta.warn("iteration cap reached");
        }
    }
    if support.len() < k {
        meta.warn(format!(
            "only {} of {k} columns are linearly independent",
            support.len()
        ));
    }
    Ok(SparseSolution::from_active(
        p,
        &support,
        &fit.coefficients,
        meta,
    ))
}

/// Geometric sparsity grid on `[1, floor(min(N, P) / 2)]`.
pub fn sp_k_grid(n: usize, p: usize) -> Vec<usize> {
    let hi = n.min(p) / 2;
    if hi == 0 {
        return Vec::new();
    }
    let mut out: Vec<usize> = (0..SWEEP_LEN)
        .map(|i| {
            let t = i as f64 / (SWEEP_LEN - 1) as f64;
            ((hi as f64).powf(t).round() as usize).clamp(1, hi)
        })
        .collect();
    out.dedup();
    out
}

fn sp_score(problem: &RegressionProblem, k: usize, cv: SpCv) -> f64 {
    match cv {
        SpCv::Loo => {
            let Ok(sol) = subspace_pursuit(problem, k) else {
                return f64::INFINITY;
            };
            let (a, b) = problem.weighted_system();
            let (_, fit) = ols_keep(&a, &b, &sol.active_set);
            loo_from_fit(&fit, &b).unwrap_or(f64::INFINITY)
        }
        SpCv::Kfold { k: folds, seed } => {
            let (a, b) = problem.weighted_system();
            let plain = RegressionProblem {
                psi: a,
                y: b.clone(),
                weights: None,
            };
            kfold_cv(&b, &CvSpec::kfold(folds, seed), |train, test| {
                let sol = subspace_pursuit(&plain.rows(train), k)?;
                Ok(plain.rows(test).psi * sol.coefficients)
            })
            .unwrap_or(f64::INFINITY)
        }
    }
}

/// Subspace pursuit with the sparsity chosen from [`sp_k_grid`] by the
/// given cross-validation rule, refitted on all rows.
pub fn sp_sweep(problem: &RegressionProblem, cv: SpCv) -> Result<SparseSolution> {
    let grid = sp_k_grid(problem.nrows(), problem.ncols());
    sp_with_grid(problem, &grid, cv)
}

pub(crate) fn sp_with_grid(
    problem: &RegressionProblem,
    grid: &[usize],
    cv: SpCv,
) -> Result<SparseSolution> {
    if grid.is_empty() {
        return Err(PceError::InvalidParameter("empty sparsity grid".into()));
    }
    let scores: Vec<f64> = grid.iter().map(|&k| sp_score(problem, k, cv)).collect();
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(PceError::InvalidParameter(
            "no sparsity level in the grid could be cross-validated".into(),
        ));
    }
    let pos = scores.iter().position(|&s| s <= min + TIE_TOL).unwrap_or(0);
    let mut sol = subspace_pursuit(problem, grid[pos])?;
    sol.cv_error = scores[pos];
    sol.meta.name = match cv {
        SpCv::Loo => "sp_loo".into(),
        SpCv::Kfold { .. } => "sp".into(),
    };
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::testutil::{orthogonal, planted};

    #[test]
    fn grid_values() {
        assert_eq!(sp_k_grid(40, 200), vec![1, 2, 3, 4, 5, 7, 10, 14, 20]);
        assert_eq!(sp_k_grid(3, 10), vec![1]);
        assert!(sp_k_grid(1, 10).is_empty());
    }

    #[test]
    fn exact_recovery_orthogonal() {
        let a = orthogonal(32, 12, 31);
        let truth = DVector::from_fn(12, |j, _| match j {
            2 => 1.0,
            5 => -2.0,
            9 => 0.5,
            _ => 0.0,
        });
        let prob = RegressionProblem::unweighted(a.clone(), &a * &truth).unwrap();
        let sol = subspace_pursuit(&prob, 3).unwrap();
        assert_eq!(sol.active_set, vec![2, 5, 9]);
        assert!((sol.coefficients - truth).amax() < 1e-12);
    }

    #[test]
    fn recovers_planted_support() {
        let mut hits = 0;
        for seed in 0..20 {
            let (prob, truth) = planted(50, 120, 5, 400 + seed);
            let sol = subspace_pursuit(&prob, 5).unwrap();
            if (&sol.coefficients - &truth).amax() < 1e-8 {
                hits += 1;
            }
        }
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn precondition() {
        let (prob, _) = planted(10, 30, 2, 1);
        assert!(subspace_pursuit(&prob, 6).is_err());
        assert!(subspace_pursuit(&prob, 0).is_err());
        assert!(subspace_pursuit(&prob, 5).is_ok());
    }

    #[test]
    fn sweep_finds_sparsity() {
        let (prob, truth) = planted(60, 150, 4, 77);
        for cv in [SpCv::Loo, SpCv::default()] {
            let sol = sp_sweep(&prob, cv).unwrap();
            assert!((&sol.coefficients - &truth).amax() < 1e-8, "{cv:?}");
            assert!(sol.cv_error < 1e-12);
        }
    }

    #[test]
    fn weighted_equals_premultiplied() {
        let (prob, _) = planted(30, 50, 4, 23);
        let w = DVector::from_fn(30, |i, _| 0.5 + (i as f64 * 0.61).cos().abs());
        let weighted = RegressionProblem::new(prob.psi.clone(), prob.y.clone(), Some(w)).unwrap();
        let (a, b) = weighted.weighted_system();
        let plain = RegressionProblem::unweighted(a, b).unwrap();
        assert_eq!(
            sp_sweep(&weighted, SpCv::Loo).unwrap().coefficients,
            sp_sweep(&plain, SpCv::Loo).unwrap().coefficients
        );
    }
}
