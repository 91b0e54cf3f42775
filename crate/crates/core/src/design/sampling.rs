use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde_json::json;
use std::f64::consts::PI;

use super::{Design, Provenance};
use crate::basis::PolyFamily;
use crate::error::{PceError, Result};
use crate::inputs::InputModel;

pub const DEFAULT_LHS_TRIES: usize = 20;

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(PceError::InvalidParameter(
            "design size must be at least 1".into(),
        ));
    }
    Ok(())
}

/// I.i.d. sample from the input distribution.
pub fn mc_design<R: Rng + ?Sized>(input: &InputModel, n: usize, rng: &mut R) -> Result<Design> {
    check_n(n)?;
    let x = input.sample_iid(n, rng);
    Design::from_physical(input, x, None, Provenance::new("mc", json!({ "n": n })))
}

/// Smallest pairwise Euclidean distance between rows.
pub fn maximin_distance(q: &DMatrix<f64>) -> f64 {
    let n = q.nrows();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in 0..i {
            let mut s = 0.0;
            for k in 0..q.ncols() {
                s += (q[(i, k)] - q[(j, k)]).powi(2);
            }
            best = best.min(s);
        }
    }
    best.sqrt()
}

fn lhs_quantiles<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, d);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..d {
        perm.shuffle(rng);
        for (i, &bin) in perm.iter().enumerate() {
            let jitter: f64 = rng.sample(Open01);
            q[(i, k)] = (bin as f64 + jitter) / n as f64;
        }
    }
    q
}

/// Best of `n_tries` Latin hypercube designs under the maximin criterion
/// in quantile space.
pub fn lhs_maximin<R: Rng + ?Sized>(
    input: &InputModel,
    n: usize,
    n_tries: usize,
    rng: &mut R,
) -> Result<Design> {
    check_n(n)?;
    if n_tries == 0 {
        return Err(PceError::InvalidParameter(
            "n_tries must be at least 1".into(),
        ));
    }
    let d = input.dim();
    let mut best = lhs_quantiles(n, d, rng);
    let mut best_dist = maximin_distance(&best);
    for _ in 1..n_tries {
        let q = lhs_quantiles(n, d, rng);
        let dist = maximin_distance(&q);
        if dist > best_dist {
            best = q;
            best_dist = dist;
        }
    }
    let mut x = DMatrix::zeros(n, d);
    for (k, m) in input.marginals().iter().enumerate() {
        for i in 0..n {
            x[(i, k)] = m.quantile(best[(i, k)]);
        }
    }
    Design::from_physical(
        input,
        x,
        None,
        Provenance::new(
            "lhs",
            json!({ "n": n, "n_tries": n_tries, "maximin": best_dist }),
        ),
    )
}

/// Uniform point in the `d`-ball of radius `r`.
pub(crate) fn uniform_ball<R: Rng + ?Sized>(d: usize, r: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.sample(Open01);
        let rho = r * u.powf(1.0 / d as f64);
        return z.into_iter().map(|v| v * rho / norm).collect();
    }
}

/// Radius of the asymptotic Hermite sampling ball, `sqrt(2) sqrt(2p + 1)`.
pub(crate) fn asymptotic_radius(p: u32) -> f64 {
    2f64.sqrt() * (2.0 * p as f64 + 1.0).sqrt()
}

/// Weighted design from the asymptotic measure: Chebyshev for Legendre
/// inputs, uniform on a degree-dependent ball for Hermite inputs.
pub fn asymptotic_design<R: Rng + ?Sized>(
    input: &InputModel,
    p: u32,
    n: usize,
    rng: &mut R,
) -> Result<Design> {
    check_n(n)?;
    let families = input.families();
    let d = input.dim();
    let mut u = DMatrix::zeros(n, d);
    let mut w = DVector::zeros(n);
    if families.iter().all(|&f| f == PolyFamily::Legendre) {
        // weight is 1 at the origin and vanishes at the faces
        for i in 0..n {
            let mut weight = 1.0;
            for k in 0..d {
                let t: f64 = rng.sample(Open01);
                let v = (PI * t).cos();
                u[(i, k)] = v;
                weight *= (1.0 - v * v).powf(0.25);
            }
            w[i] = weight;
        }
    } else if families.iter().all(|&f| f == PolyFamily::Hermite) {
        let r = asymptotic_radius(p);
        for i in 0..n {
            let point = uniform_ball(d, r, rng);
            let sq: f64 = point.iter().map(|v| v * v).sum();
            for (k, v) in point.into_iter().enumerate() {
                u[(i, k)] = v;
            }
            w[i] = (-0.25 * sq).exp();
        }
    } else {
        return Err(PceError::Unsupported(
            "asymptotic sampling needs all-uniform or all-Gaussian inputs".into(),
        ));
    }
    Design::from_standard(
        input,
        u,
        Some(w),
        Provenance::new("asymptotic", json!({ "n": n, "p": p })),
    )
}
