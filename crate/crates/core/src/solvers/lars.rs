#[cfg(test)]
use nalgebra::DMatrix;
use nalgebra::DVector;

use super::{
    column_norms, early_stop_window, PathPoint, PathSolution, RegressionProblem, SolverMeta,
    SparseSolution,
};
use crate::error::{PceError, Result};
use crate::linalg::{IncrementalQr, OlsFit};
use crate::selection::modified_loo_from_fit;

const CORR_TOL: f64 = 1e-12;

/// Least angle regression on the normalized columns of `W Psi`.
///
/// Every path point is scored by the modified LOO error of the OLS refit on
/// its support. With `hybrid` the best point is returned with its OLS
/// coefficients, otherwise with the LARS coefficients.
pub fn lars(problem: &RegressionProblem, hybrid: bool) -> Result<PathSolution> {
    let (a, b) = problem.weighted_system();
    let (n, p) = a.shape();
    if n < 2 {
        return Err(PceError::InvalidParameter(
            "LARS needs at least two rows".into(),
        ));
    }
    let norms = column_norms(&a);
    let mut x = a.clone();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        if norms[j] > 0.0 {
            col /= norms[j];
        }
    }
    let max_steps = (n - 1).min(p);
    let window = early_stop_window(n, p);
    let mut meta = SolverMeta::new(if hybrid { "lars" } else { "lars_plain" });

    let mut path: Vec<PathPoint> = Vec::new();
    let mut refits: Vec<DVector<f64>> = Vec::new();
    let mut best_loo = f64::INFINITY;
    let mut best_idx: Option<usize> = None;
    let mut since_best = 0;

    let mut qr = IncrementalQr::new(n);
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut in_active = vec![false; p];
    let mut beta = DVector::<f64>::zeros(p);
    let mut mu = DVector::<f64>::zeros(n);

    let c0 = x.tr_mul(&b);
    let first = (0..p)
        .filter(|&j| norms[j] > 0.0)
        .max_by(|&i, &j| c0[i].abs().total_cmp(&c0[j].abs()).then(j.cmp(&i)));
    let c_init = first.map_or(0.0, |j| c0[j].abs());
    let mut entering = first.filter(|_| c_init > 0.0).map(|j| (j, c0[j].signum()));

    while let Some((j, s)) = entering.take() {
        let col = x.column(j) * s;
        if qr.push(&col).is_err() {
            meta.warn(format!(
                "column {j} is collinear with the active set; path truncated"
            ));
            break;
        }
        active.push(j);
        signs.push(s);
        in_active[j] = true;
        meta.iterations += 1;

        let c = x.tr_mul(&(&b - &mu));
        let big_c = active.iter().map(|&i| c[i].abs()).fold(0.0, f64::max);
        if big_c <= CORR_TOL * c_init {
            break;
        }
        let ones = DVector::from_element(active.len(), 1.0);
        let g = qr.r_inv_mul(&qr.r_inv_t_mul(&ones));
        let sum = g.sum();
        if !(sum > 0.0 && sum.is_finite()) {
            meta.warn("degenerate equiangular direction; path truncated");
            break;
        }
        let a_a = sum.powf(-0.5);
        let w = g * a_a;
        let mut u = DVector::zeros(n);
        for (k, &i) in active.iter().enumerate() {
            u.axpy(w[k] * signs[k], &x.column(i), 1.0);
        }

        let mut gamma = big_c / a_a;
        let mut next: Option<usize> = None;
        if active.len() < max_steps {
            let av = x.tr_mul(&u);
            for i in 0..p {
                if in_active[i] || norms[i] == 0.0 {
                    continue;
                }
                for cand in [
                    (big_c - c[i]) / (a_a - av[i]),
                    (big_c + c[i]) / (a_a + av[i]),
                ] {
                    if cand > 1e-14 * gamma && cand < gamma {
                        gamma = cand;
                        next = Some(i);
                    }
                }
            }
        }
        for (k, &i) in active.iter().enumerate() {
            beta[i] += gamma * w[k] * signs[k];
        }
        mu.axpy(gamma, &u, 1.0);

        let lars_coef =
            DVector::from_iterator(active.len(), active.iter().map(|&i| beta[i] / norms[i]));
        let fit = OlsFit::from_qr(&qr, &b);
        let refit = DVector::from_iterator(
            active.len(),
            active
                .iter()
                .enumerate()
                .map(|(k, &i)| fit.coefficients[k] * signs[k] / norms[i]),
        );
        let inv_diag = qr.inv_gram_diag();
        let trace = active
            .iter()
            .enumerate()
            .map(|(k, &i)| inv_diag[k] / (norms[i] * norms[i]))
            .sum();
        let fit = OlsFit {
            coefficients: refit.clone(),
            trace_inv_gram: trace,
            ..fit
        };
        let loo = modified_loo_from_fit(&fit, &b).unwrap_or(f64::INFINITY);
        path.push(PathPoint {
            active: active.clone(),
            coefficients: lars_coef,
            loo: Some(loo),
        });
        refits.push(refit);
        if loo < best_loo {
            best_loo = loo;
            best_idx = Some(path.len() - 1);
            since_best = 0;
        } else if best_idx.is_some() {
            since_best += 1;
            if since_best >= window {
                break;
            }
        }

        entering = next.map(|i| {
            let ci = x.column(i).dot(&(&b - &mu));
            (i, if ci < 0.0 { -1.0 } else { 1.0 })
        });
    }

    let best = match best_idx {
        None => {
            let mut s = SparseSolution::zeros(p, meta);
            s.cv_error = super::support_loo(&a, &b, &[]);
            s
        }
        Some(k) => {
            let pt = &path[k];
            meta.hyperparameter = Some(pt.active.len() as f64);
            let values = if hybrid { &refits[k] } else { &pt.coefficients };
            let mut s = SparseSolution::from_active(p, &pt.active, values, meta);
            s.cv_error = best_loo;
            s
        }
    };
    Ok(PathSolution { path, best })
}

/// Correlations `|x_j^T r|` of the normalized columns with the residual of
/// the given coefficients.
#[cfg(test)]
fn normalized_abs_correlations(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    coef: &DVector<f64>,
) -> Vec<f64> {
    let r = b - a * coef;
    a.column_iter()
        .map(|c| (c.dot(&r) / c.norm()).abs())
        .collect()
}
