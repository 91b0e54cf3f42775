//! Bayesian compressive sensing with a hierarchical Laplace prior, fitted by
//! greedy marginal-likelihood maximization one hyperparameter at a time.

use nalgebra::{DMatrix, DVector};

use super::{RegressionProblem, SolverMeta, SparseSolution};
use crate::error::{PceError, Result};

const MAX_ITER: usize = 1000;
const REL_GAIN_TOL: f64 = 1e-8;

/// Optimal prior variance for sparsity/quality factors `s`, `q` under rate
/// `lambda`, or `None` if the term should be excluded.
fn optimal_gamma(s: f64, q: f64, lambda: f64) -> Option<f64> {
    let q2 = q * q;
    if !(q2 - s > lambda) || !(s > 0.0) {
        return None;
    }
    let z = 2.0 * q2 / (s + (s * s + 4.0 * lambda * q2).sqrt());
    let g = (z - 1.0) / s;
    (g > 0.0 && g.is_finite()).then_some(g)
}

/// Contribution of one term to the log marginal likelihood.
fn ell(gamma: f64, s: f64, q: f64, lambda: f64) -> f64 {
    let d = 1.0 + gamma * s;
    0.5 * (-d.ln() + q * q * gamma / d) - 0.5 * lambda * gamma
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Add(usize, f64),
    Update(usize, f64),
    Delete(usize),
}

/// Posterior mean of the coefficients given noise precision `beta` on the
/// weighted system.
pub fn bcs_fastlaplace(problem: &RegressionProblem, beta: f64) -> Result<SparseSolution> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(PceError::InvalidParameter(format!(
            "noise precision must be positive, got {beta}"
        )));
    }
    let (a, b) = problem.weighted_system();
    let p = a.ncols();
    let mut meta = SolverMeta::new("bcs");
    meta.hyperparameter = Some(beta);
    let diag: Vec<f64> = a.column_iter().map(|c| c.norm_squared()).collect();
    let phi_t = a.tr_mul(&b);

    let init = (0..p)
        .filter(|&j| diag[j] > 0.0)
        .map(|j| (j, phi_t[j] * phi_t[j] / diag[j]))
        .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
    let Some((i0, score)) = init else {
        return Ok(SparseSolution::zeros(p, meta));
    };
    if score <= 1.0 / beta {
        return Ok(SparseSolution::zeros(p, meta));
    }
    let mut active = vec![i0];
    let mut gammas = vec![(score - 1.0 / beta) / diag[i0]];
    let mut gram_cols: Vec<DVector<f64>> = vec![a.tr_mul(&a.column(i0))];
    let mut position: Vec<Option<usize>> = vec![None; p];
    position[i0] = Some(0);

    let mut cumulative = 0.0;
    let mut converged = false;
    for iter in 0..MAX_ITER {
        meta.iterations = iter + 1;
        let k = active.len();
        let lambda = if k >= 2 {
            2.0 * (k - 1) as f64 / gammas.iter().sum::<f64>()
        } else {
            0.0
        };

        let mut m = DMatrix::from_fn(k, k, |r, c| beta * gram_cols[c][active[r]]);
        for r in 0..k {
            m[(r, r)] += 1.0 / gammas[r];
        }
        let Some(chol) = m.cholesky() else {
            meta.warn("posterior covariance is not positive definite; stopping");
            break;
        };
        let sigma = chol.inverse();
        let rhs = DVector::from_iterator(k, active.iter().map(|&j| phi_t[j]));
        let mu = &sigma * rhs * beta;

        let mut resid = b.clone();
        for (r, &j) in active.iter().enumerate() {
            resid.axpy(-mu[r], &a.column(j), 1.0);
        }
        let q_all = a.tr_mul(&resid) * beta;
        let gmat = DMatrix::from_fn(p, k, |i, c| gram_cols[c][i]);
        let gs = &gmat * &sigma;

        let mut best: Option<(f64, Action)> = None;
        let mut offer = |gain: f64, act: Action| {
            if gain.is_finite() && best.as_ref().is_none_or(|(g, _)| gain > *g) {
                best = Some((gain, act));
            }
        };
        for i in 0..p {
            if diag[i] == 0.0 {
                continue;
            }
            match position[i] {
                None => {
                    let s = beta * diag[i] - beta * beta * gs.row(i).dot(&gmat.row(i));
                    let q = q_all[i];
                    if let Some(g) = optimal_gamma(s, q, lambda) {
                        offer(ell(g, s, q, lambda), Action::Add(i, g));
                    }
                }
                Some(r) => {
                    let sii = sigma[(r, r)];
                    let s = 1.0 / sii - 1.0 / gammas[r];
                    let q = mu[r] / sii;
                    let old = ell(gammas[r], s, q, lambda);
                    match optimal_gamma(s, q, lambda) {
                        Some(g) => offer(ell(g, s, q, lambda) - old, Action::Update(i, g)),
                        None => offer(-old, Action::Delete(i)),
                    }
                }
            }
        }

        let Some((gain, action)) = best else {
            converged = true;
            break;
        };
        if !(gain > 0.0) || gain < REL_GAIN_TOL * cumulative {
            converged = true;
            break;
        }
        cumulative += gain;
        match action {
            Action::Add(i, g) => {
                position[i] = Some(active.len());
                active.push(i);
                gammas.push(g);
                gram_cols.push(a.tr_mul(&a.column(i)));
            }
            Action::Update(i, g) => {
                gammas[position[i].expect("active")] = g;
            }
            Action::Delete(i) => {
                let r = position[i].take().expect("active");
                active.remove(r);
                gammas.remove(r);
                gram_cols.remove(r);
                for (pos, &j) in active.iter().enumerate().skip(r) {
                    position[j] = Some(pos);
                }
            }
        }
        if active.is_empty() {
            converged = true;
            break;
        }
    }
    if !converged {
        meta.warn("maxiter");
    }
    let mu = posterior_mean(&b, &a, &active, &gammas, &gram_cols, beta).unwrap_or_else(|| {
        meta.warn("posterior covariance is not positive definite");
        DVector::zeros(active.len())
    });
    Ok(SparseSolution::from_active(p, &active, &mu, meta))
}

fn posterior_mean(
    b: &DVector<f64>,
    a: &DMatrix<f64>,
    active: &[usize],
    gammas: &[f64],
    gram_cols: &[DVector<f64>],
    beta: f64,
) -> Option<DVector<f64>> {
    let k = active.len();
    let mut m = DMatrix::from_fn(k, k, |r, c| beta * gram_cols[c][active[r]]);
    for r in 0..k {
        m[(r, r)] += 1.0 / gammas[r];
    }
    let rhs = DVector::from_iterator(k, active.iter().map(|&j| a.column(j).dot(b) * beta));
    m.cholesky().map(|c| c.solve(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sample_variance;
    use crate::solvers::testutil::{gaussian, orthogonal, planted};

    #[test]
    fn gamma_reduces_to_rvm_update() {
        let (s, q) = (2.0, 3.0);
        let g = optimal_gamma(s, q, 0.0).unwrap();
        assert!((g - (q * q - s) / (s * s)).abs() < 1e-15);
        assert!(optimal_gamma(2.0, 1.0, 0.0).is_none());
        assert!(optimal_gamma(2.0, 2.0, 2.5).is_none());
    }

    #[test]
    fn gamma_maximizes_ell() {
        for &(s, q, lambda) in &[(1.0, 3.0, 0.5), (0.2, 1.5, 2.0), (5.0, 10.0, 0.01)] {
            let g = optimal_gamma(s, q, lambda).unwrap();
            let f = ell(g, s, q, lambda);
            for scale in [0.5, 0.9, 0.99, 1.01, 1.1, 2.0] {
                assert!(ell(g * scale, s, q, lambda) < f);
            }
        }
    }

    #[test]
    fn recovers_planted_noiseless() {
        let (prob, truth) = planted(40, 100, 5, 61);
        let beta = 1e12 / sample_variance(&prob.y);
        let sol = bcs_fastlaplace(&prob, beta).unwrap();
        assert_eq!(
            sol.active_set,
            truth
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, _)| j)
                .collect::<Vec<_>>()
        );
        assert!((&sol.coefficients - &truth).amax() < 1e-4);
    }

    #[test]
    fn orthogonal_single_term() {
        let a = orthogonal(20, 8, 62);
        let y = a.column(6) * -1.25;
        let prob = RegressionProblem::unweighted(a, y.into_owned()).unwrap();
        let beta = 1e12 / sample_variance(&prob.y);
        let sol = bcs_fastlaplace(&prob, beta).unwrap();
        assert_eq!(sol.active_set, vec![6]);
        assert!((sol.coefficients[6] + 1.25).abs() < 1e-8);
    }

    #[test]
    fn pure_noise_with_low_precision_is_empty() {
        let a = gaussian(30, 40, 63);
        let y = DVector::from_fn(30, |i, _| ((i * 13 % 7) as f64 - 3.0) * 1e-3);
        let prob = RegressionProblem::unweighted(a, y).unwrap();
        let sol = bcs_fastlaplace(&prob, 1.0).unwrap();
        assert_eq!(sol.n_active(), 0);
        assert!(bcs_fastlaplace(&prob, 0.0).is_err());
    }

    #[test]
    fn weighted_equals_premultiplied() {
        let (prob, _) = planted(30, 50, 4, 23);
        let w = DVector::from_fn(30, |i, _| 0.5 + (i as f64 * 0.61).cos().abs());
        let weighted = RegressionProblem::new(prob.psi.clone(), prob.y.clone(), Some(w)).unwrap();
        let (a, b) = weighted.weighted_system();
        let plain = RegressionProblem::unweighted(a, b).unwrap();
        assert_eq!(
            bcs_fastlaplace(&weighted, 1e6).unwrap().coefficients,
            bcs_fastlaplace(&plain, 1e6).unwrap().coefficients
        );
    }
}
