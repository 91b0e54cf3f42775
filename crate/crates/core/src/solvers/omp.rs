use super::{
    column_norms, early_stop_window, normalized_correlations, PathPoint, PathSolution,
    RegressionProblem, SolverMeta, SparseSolution,
};
use crate::error::{PceError, Result};
use crate::linalg::{IncrementalQr, OlsFit};
use crate::selection::modified_loo_from_fit;

const RESIDUAL_TOL: f64 = 1e-12;

/// Path length rule for [`omp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmpStop {
    /// Exactly this many terms (fewer if the residual vanishes first);
    /// the last model is returned.
    MaxTerms(usize),
    /// Up to `min(N - 1, P)` terms with early stopping; the model with the
    /// smallest modified LOO error is returned.
    Loo,
}

/// Orthogonal matching pursuit.
pub fn omp(problem: &RegressionProblem, stop: OmpStop) -> Result<PathSolution> {
    let (a, b) = problem.weighted_system();
    let (n, p) = a.shape();
    if n == 0 {
        return Err(PceError::InvalidParameter(
            "empty regression problem".into(),
        ));
    }
    let max_terms = match stop {
        OmpStop::MaxTerms(k) => {
            if k > n.min(p) {
                return Err(PceError::InvalidParameter(format!(
                    "OMP can select at most min(N, P) = {} terms, asked for {k}",
                    n.min(p)
                )));
            }
            k
        }
        OmpStop::Loo => (n.saturating_sub(1)).min(p),
    };
    let use_loo = stop == OmpStop::Loo;
    let norms = column_norms(&a);
    let bnorm = b.norm();
    let mut meta = SolverMeta::new("omp");
    let mut qr = IncrementalQr::new(n);
    let mut active: Vec<usize> = Vec::new();
    let mut blocked = vec![false; p];
    let mut residual = b.clone();
    let mut path = Vec::new();
    let window = early_stop_window(n, p);
    let mut best_loo = f64::INFINITY;
    let mut best_idx: Option<usize> = None;
    let mut since_best = 0;

    while active.len() < max_terms && residual.norm() > RESIDUAL_TOL * bnorm {
        let corr = normalized_correlations(&a, &norms, &residual);
        let pick = (0..p)
            .filter(|&j| !blocked[j] && norms[j] > 0.0)
            .max_by(|&i, &j| corr[i].abs().total_cmp(&corr[j].abs()).then(j.cmp(&i)));
        let Some(j) = pick else { break };
        blocked[j] = true;
        if qr.push(&a.column(j).into_owned()).is_err() {
            meta.warn(format!(
                "column {j} is linearly dependent on the active set; skipped"
            ));
            continue;
        }
        active.push(j);
        meta.iterations += 1;
        let fit = OlsFit::from_qr(&qr, &b);
        residual = fit.residual.clone();
        let loo = if use_loo {
            Some(modified_loo_from_fit(&fit, &b).unwrap_or(f64::INFINITY))
        } else {
            None
        };
        path.push(PathPoint {
            active: active.clone(),
            coefficients: fit.coefficients,
            loo,
        });
        if let Some(e) = loo {
            if e < best_loo {
                best_loo = e;
                best_idx = Some(path.len() - 1);
                since_best = 0;
            } else if best_idx.is_some() {
                since_best += 1;
                if since_best >= window {
                    break;
                }
            }
        }
    }

    let chosen = if use_loo {
        best_idx
    } else {
        path.len().checked_sub(1)
    };
    let best = match chosen {
        None => {
            let mut s = SparseSolution::zeros(p, meta);
            s.cv_error = super::support_loo(&a, &b, &[]);
            s
        }
        Some(i) => {
            let pt = &path[i];
            meta.hyperparameter = Some(pt.active.len() as f64);
            let mut s = SparseSolution::from_active(p, &pt.active, &pt.coefficients, meta);
            s.cv_error = pt
                .loo
                .unwrap_or_else(|| super::support_loo(&a, &b, &pt.active));
            s
        }
    };
    Ok(PathSolution { path, best })
}
