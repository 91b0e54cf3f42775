//! Basis pursuit denoising by root finding on the Pareto curve
//! `phi(tau) = min { ||A x - b|| : ||x||_1 <= tau }`, with each LASSO
//! subproblem solved by spectral projected gradient.

use nalgebra::{DMatrix, DVector};

use super::{RegressionProblem, SolverMeta, SparseSolution};
use crate::error::{PceError, Result};
use crate::linalg::IncrementalQr;

const MAX_NEWTON: usize = 30;
const MAX_SPG: usize = 10_000;
const GLL_WINDOW: usize = 10;
const GLL_GAMMA: f64 = 1e-4;
const STEP_MIN: f64 = 1e-10;
const STEP_MAX: f64 = 1e10;
const GAP_TOL: f64 = 1e-6;
const FEAS_TOL: f64 = 1e-3;
const L1_TOL: f64 = 1e-6;

/// Euclidean projection onto `{ x : ||x||_1 <= tau }`.
pub(crate) fn project_l1(v: &DVector<f64>, tau: f64) -> DVector<f64> {
    if tau <= 0.0 {
        return DVector::zeros(v.len());
    }
    if v.lp_norm(1) <= tau {
        return v.clone();
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - tau) / (k + 1) as f64;
        if t < m {
            theta = t;
        } else {
            break;
        }
    }
    v.map(|x| x.signum() * (x.abs() - theta).max(0.0))
}

struct Lasso<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    iterations: usize,
}

struct LassoState {
    x: DVector<f64>,
    r: DVector<f64>,
    /// `||A^T r||_inf`
    dual_norm: f64,
}

impl Lasso<'_> {
    fn state(&self, x: DVector<f64>) -> LassoState {
        let r = self.b - self.a * &x;
        let dual_norm = self.a.tr_mul(&r).amax();
        LassoState { x, r, dual_norm }
    }

    /// SPG on the LASSO problem with budget `tau`, warm-started at `x0`.
    /// Stops early once the residual norm drops to `sigma`.
    fn solve(&mut self, tau: f64, x0: &DVector<f64>, sigma: f64) -> LassoState {
        let a = self.a;
        let mut x = project_l1(x0, tau);
        let mut r = self.b - a * &x;
        let mut g = -a.tr_mul(&r);
        let mut f = 0.5 * r.norm_squared();
        let mut hist = vec![f];
        let gmax = g.amax();
        let mut alpha = if gmax > 0.0 {
            (1.0 / gmax).clamp(STEP_MIN, STEP_MAX)
        } else {
            1.0
        };
        let floor = 1e-30 * self.b.norm_squared();
        while self.iterations < MAX_SPG {
            let rr = r.norm_squared();
            let gap = rr - self.b.dot(&r) + tau * g.amax();
            if gap <= GAP_TOL * rr.max(sigma * sigma) + floor || rr.sqrt() <= sigma {
                break;
            }
            self.iterations += 1;
            let d = project_l1(&(&x - &g * alpha), tau) - &x;
            let gtd = g.dot(&d);
            if !(gtd < 0.0) {
                break;
            }
            let fmax = hist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut lambda = 1.0;
            let (x_new, r_new, f_new) = loop {
                let xn = &x + &d * lambda;
                let rn = self.b - a * &xn;
                let fnew = 0.5 * rn.norm_squared();
                if fnew <= fmax + GLL_GAMMA * lambda * gtd || lambda < 1e-10 {
                    break (xn, rn, fnew);
                }
                lambda *= 0.5;
            };
            let g_new = -a.tr_mul(&r_new);
            let s = &x_new - &x;
            let y = &g_new - &g;
            let sty = s.dot(&y);
            alpha = if sty <= 0.0 {
                STEP_MAX
            } else {
                (s.norm_squared() / sty).clamp(STEP_MIN, STEP_MAX)
            };
            x = x_new;
            r = r_new;
            g = g_new;
            f = f_new;
            hist.push(f);
            if hist.len() > GLL_WINDOW {
                hist.remove(0);
            }
        }
        let dual_norm = g.amax();
        LassoState { x, r, dual_norm }
    }
}

/// OLS on the support of `x`, if it is well posed.
fn polish(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
    if support.is_empty() || support.len() >= a.nrows() {
        return None;
    }
    let mut qr = IncrementalQr::new(a.nrows());
    for &j in &support {
        qr.push(&a.column(j).into_owned()).ok()?;
    }
    let c = qr.solve(b);
    let mut out = DVector::zeros(x.len());
    for (k, &j) in support.iter().enumerate() {
        out[j] = c[k];
    }
    Some(out)
}

/// Minimum-l1 solution of `||W Psi c - W y|| <= sigma`.
pub fn bpdn_spg(problem: &RegressionProblem, sigma: f64) -> Result<SparseSolution> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(PceError::InvalidParameter(format!(
            "noise level must be non-negative, got {sigma}"
        )));
    }
    let (a, b) = problem.weighted_system();
    let p = a.ncols();
    let mut meta = SolverMeta::new("spgl1");
    meta.hyperparameter = Some(sigma);
    let bnorm = b.norm();
    if sigma >= bnorm {
        return Ok(SparseSolution::zeros(p, meta));
    }
    let feasible = |r: &DVector<f64>| r.norm() <= sigma * (1.0 + FEAS_TOL) + 1e-14 * bnorm;
    let mut lasso = Lasso {
        a: &a,
        b: &b,
        iterations: 0,
    };
    let mut best: Option<DVector<f64>> = None;
    let consider = |x: &DVector<f64>, best: &mut Option<DVector<f64>>| {
        if best.as_ref().is_none_or(|bx| x.lp_norm(1) < bx.lp_norm(1)) {
            *best = Some(x.clone());
        }
    };

    let mut tau = 0.0;
    let mut state = lasso.state(DVector::zeros(p));
    let mut converged = false;
    for step in 0..MAX_NEWTON {
        meta.iterations = step + 1;
        let rnorm = state.r.norm();
        if feasible(&state.r) {
            consider(&state.x, &mut best);
            converged = true;
            break;
        }
        if state.dual_norm <= 0.0 {
            break;
        }
        let tau_next = tau + (rnorm - sigma) * rnorm / state.dual_norm;
        if let Some(xp) = polish(&a, &b, &state.x) {
            let rp = &b - &a * &xp;
            if feasible(&rp) {
                consider(&xp, &mut best);
                if xp.lp_norm(1) <= tau_next * (1.0 + L1_TOL) {
                    converged = true;
                    break;
                }
            }
        }
        tau = tau_next;
        state = lasso.solve(tau, &state.x, sigma);
        if lasso.iterations >= MAX_SPG {
            break;
        }
    }
    if !converged {
        if feasible(&state.r) {
            consider(&state.x, &mut best);
        }
        meta.warn("maxiter");
    }
    let x = match best {
        Some(x) => x,
        None => {
            meta.warn("no feasible iterate; returning the last one");
            state.x
        }
    };
    meta.iterations = meta.iterations.max(lasso.iterations);
    let active: Vec<usize> = (0..p).filter(|&j| x[j] != 0.0).collect();
    let values = DVector::from_iterator(active.len(), active.iter().map(|&j| x[j]));
    let mut sol = SparseSolution::from_active(p, &active, &values, meta);
    sol.cv_error = f64::NAN;
    Ok(sol)
}

/// `phi(tau)` for each budget, warm-started in increasing order.
pub fn pareto_curve(problem: &RegressionProblem, taus: &[f64]) -> Result<Vec<f64>> {
    if taus.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(PceError::InvalidParameter(
            "l1 budgets must be non-negative".into(),
        ));
    }
    let (a, b) = problem.weighted_system();
    let mut order: Vec<usize> = (0..taus.len()).collect();
    order.sort_by(|&i, &j| taus[i].total_cmp(&taus[j]));
    let mut out = vec![0.0; taus.len()];
    let mut x = DVector::zeros(a.ncols());
    let mut best = f64::INFINITY;
    for i in order {
        let mut lasso = Lasso {
            a: &a,
            b: &b,
            iterations: 0,
        };
        let st = lasso.solve(taus[i], &x, 0.0);
        best = best.min(st.r.norm());
        out[i] = best;
        x = st.x;
    }
    Ok(out)
}

/// `phi(tau)` from a cold start.
pub fn pareto_value(problem: &RegressionProblem, tau: f64) -> Result<f64> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(PceError::InvalidParameter(
            "l1 budget must be non-negative".into(),
        ));
    }
    let (a, b) = problem.weighted_system();
    let mut lasso = Lasso {
        a: &a,
        b: &b,
        iterations: 0,
    };
    Ok(lasso.solve(tau, &DVector::zeros(a.ncols()), 0.0).r.norm())
}
