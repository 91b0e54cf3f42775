use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use serde_json::json;

use super::{Design, Sampler};
use crate::basis::PolyBasis;
use crate::error::{PceError, Result};
use crate::inputs::InputModel;

/// Draw size is `POOL_FACTOR * P`; the pool holds twice that.
pub const POOL_FACTOR: usize = 10;

const EXCHANGE_TOL: f64 = 1e-9;
const NEAROPT_WARN_OPS: f64 = 1e9;

/// Candidate set of size `2M` from which `M`-subsets are drawn.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub pool: Design,
    pub draw_size: usize,
}

impl CandidatePool {
    /// Pool of `2M` points from `sampler`, `M = 10 P` unless overridden.
    pub fn build<R: Rng + ?Sized>(
        sampler: &Sampler,
        input: &InputModel,
        basis: &PolyBasis,
        draw_size: Option<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        if sampler.is_subset() {
            return Err(PceError::InvalidParameter(
                "candidate pools must come from a direct sampler".into(),
            ));
        }
        let m = draw_size.unwrap_or(POOL_FACTOR * basis.len());
        let pool = sampler.sample(input, basis, 2 * m, rng)?;
        Ok(Self { pool, draw_size: m })
    }

    /// `M` distinct pool rows, in pool order.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Design {
        let mut rows = index::sample(rng, self.pool.len(), self.draw_size).into_vec();
        rows.sort_unstable();
        let mut prov = self.pool.provenance.clone();
        prov.params = json!({ "pool": self.pool.len(), "draw": self.draw_size });
        self.pool.subset(&rows, prov)
    }
}

fn check_size(n: usize, m: usize) -> Result<()> {
    if n == 0 || n > m {
        return Err(PceError::InvalidParameter(format!(
            "cannot select {n} of {m} candidates"
        )));
    }
    Ok(())
}

/// Column-pivoted Gram-Schmidt on `a` (k x M); returns `k` pivot columns.
fn pivoted_qr_columns(a: &DMatrix<f64>) -> Vec<usize> {
    let (k, m) = a.shape();
    let mut work = a.clone();
    let mut norms: Vec<f64> = (0..m).map(|j| work.column(j).norm_squared()).collect();
    let mut chosen = Vec::with_capacity(k);
    let mut used = vec![false; m];
    for _ in 0..k {
        let mut best = None;
        let mut best_norm = -1.0;
        for j in 0..m {
            if !used[j] && norms[j] > best_norm {
                best_norm = norms[j];
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        used[j] = true;
        chosen.push(j);
        let q = work.column(j).into_owned();
        let qn = q.norm();
        if qn == 0.0 {
            continue;
        }
        let q = q / qn;
        for l in 0..m {
            if !used[l] {
                let s = q.dot(&work.column(l));
                work.column_mut(l).axpy(-s, &q, 1.0);
                norms[l] = work.column(l).norm_squared();
            }
        }
    }
    chosen
}

/// Determinant-increasing swaps on `a` (k x M), starting from `sel`.
fn exchange_pass(a: &DMatrix<f64>, sel: &mut [usize], max_swaps: usize) {
    let k = sel.len();
    let a_s = a.select_columns(&*sel);
    let Some(inv) = a_s.try_inverse() else { return };
    let mut c = inv * a;
    for _ in 0..max_swaps {
        let mut best = (0, 0, 1.0 + EXCHANGE_TOL);
        for j in 0..c.ncols() {
            if sel.contains(&j) {
                continue;
            }
            for i in 0..k {
                let v = c[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (i, j, v) = best;
        if v <= 1.0 + EXCHANGE_TOL {
            break;
        }
        // C' = C - (c_j - e_i) C[i, :] / C[i, j]
        let mut u = c.column(j).into_owned();
        u[i] -= 1.0;
        let row = c.row(i).into_owned() / c[(i, j)];
        c -= u * row;
        sel[i] = j;
    }
}

/// D-optimal subset by SVD plus rank-revealing QR. Returns row indices of
/// `psi` (M x P), in selection order.
pub fn d_optimal_rrqr(psi: &DMatrix<f64>, n: usize, exchange: bool) -> Result<Vec<usize>> {
    let (m, p) = psi.shape();
    check_size(n, m)?;
    let svd = psi.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > smax * 1e-12 * m.max(p) as f64)
        .count();
    let k = n.min(rank);
    // singular values are sorted in decreasing order
    let uk = u.columns(0, k).into_owned();
    let a = uk.transpose();
    let mut sel = pivoted_qr_columns(&a);
    if exchange && k > 0 {
        exchange_pass(&a, &mut sel, 2 * p);
    }
    if n > sel.len() {
        fill_by_leverage(&u.columns(0, rank).into_owned(), &mut sel, n);
    }
    Ok(sel)
}

/// Greedy D-optimal augmentation: repeatedly add the row with the
/// largest leverage `x^T G^{-1} x` w.r.t. the current information matrix.
fn fill_by_leverage(rows: &DMatrix<f64>, sel: &mut Vec<usize>, n: usize) {
    let (m, r) = rows.shape();
    let mut g = DMatrix::<f64>::zeros(r, r);
    for &i in sel.iter() {
        let x = rows.row(i).transpose();
        g += &x * x.transpose();
    }
    let mut g_inv = g.try_inverse().unwrap_or_else(|| DMatrix::identity(r, r));
    let mut used = vec![false; m];
    for &i in sel.iter() {
        used[i] = true;
    }
    while sel.len() < n {
        let mut best = None;
        let mut best_lev = f64::NEG_INFINITY;
        for j in 0..m {
            if used[j] {
                continue;
            }
            let x = rows.row(j).transpose();
            let lev = (x.transpose() * &g_inv * &x)[(0, 0)];
            if lev > best_lev {
                best_lev = lev;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        used[j] = true;
        sel.push(j);
        let x: DVector<f64> = rows.row(j).transpose();
        let gx = &g_inv * &x;
        g_inv -= &gx * gx.transpose() / (1.0 + best_lev);
    }
}

fn normalized(value: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (value - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Greedy near-optimal selection minimizing mutual coherence and average
/// cross-correlation jointly. Returns row indices in selection order.
pub fn near_optimal_greedy<R: Rng + ?Sized>(
    psi: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let (m, p) = psi.shape();
    check_size(n, m)?;
    let ops = n as f64 * m as f64 * (p * p) as f64;
    if ops > NEAROPT_WARN_OPS {
        log::warn!("near-optimal selection needs about {ops:.1e} operations");
    }
    let first = rng.random_range(0..m);
    let mut sel = vec![first];
    let mut used = vec![false; m];
    used[first] = true;
    let mut g = DMatrix::<f64>::zeros(p, p);
    let x0 = psi.row(first);
    g.ger(1.0, &x0.transpose(), &x0.transpose(), 0.0);

    let mut mu = vec![0.0; m];
    let mut gamma = vec![0.0; m];
    let mut diag = vec![0.0; p];
    while sel.len() < n {
        for j in 0..m {
            if used[j] {
                continue;
            }
            let x = psi.row(j);
            for (a, d) in diag.iter_mut().enumerate() {
                *d = g[(a, a)] + x[a] * x[a];
            }
            let mut worst: f64 = 0.0;
            let mut sum = 0.0;
            for b in 1..p {
                for a in 0..b {
                    let den = diag[a] * diag[b];
                    if den > 0.0 {
                        let c2 = (g[(a, b)] + x[a] * x[b]).powi(2) / den;
                        worst = worst.max(c2);
                        sum += c2;
                    }
                }
            }
            mu[j] = worst.sqrt();
            gamma[j] = if p > 1 {
                2.0 * sum / (p * (p - 1)) as f64
            } else {
                0.0
            };
        }
        let range = |v: &[f64]| {
            v.iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &x)| {
                    (lo.min(x), hi.max(x))
                })
        };
        let (mu_lo, mu_hi) = range(&mu);
        let (ga_lo, ga_hi) = range(&gamma);
        let mut best = None;
        let mut best_score = f64::INFINITY;
        for j in 0..m {
            if used[j] {
                continue;
            }
            let score = normalized(mu[j], mu_lo, mu_hi).powi(2)
                + normalized(gamma[j], ga_lo, ga_hi).powi(2);
            if score < best_score {
                best_score = score;
                best = Some(j);
            }
        }
        let j = best.expect("unselected candidates remain while n <= M");
        used[j] = true;
        sel.push(j);
        let x = psi.row(j).transpose();
        g.ger(1.0, &x, &x, 1.0);
    }
    Ok(sel)
}
