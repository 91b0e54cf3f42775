use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use super::sampling::uniform_ball;
use super::{Design, Provenance};
use crate::basis::{PolyBasis, PolyFamily};
use crate::error::{PceError, Result};
use crate::inputs::InputModel;

const SAFETY: f64 = 1.1;
const MIN_ACCEPTANCE: f64 = 1e-6;
const CHECK_EVERY: u64 = 1_000_000;
const GRID_1D: usize = 4001;
const GRID_2D: usize = 301;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HermiteProposal {
    Gaussian,
    Ball,
}

/// Rejection sampler for the density proportional to `B(u)^2 f(u)`, with
/// Hermite coordinates restricted to a ball of radius `sqrt(2) sqrt(2p + 2)`.
#[derive(Debug, Clone)]
pub struct CohOptSampler {
    input: InputModel,
    basis: PolyBasis,
    hermite_dims: Vec<usize>,
    proposal: HermiteProposal,
    radius: f64,
    gamma: f64,
}

impl CohOptSampler {
    pub fn new(input: &InputModel, basis: &PolyBasis) -> Result<Self> {
        if input.families() != basis.families() {
            return Err(PceError::InvalidParameter(
                "basis families do not match the input model".into(),
            ));
        }
        let d = input.dim();
        let p = basis.index_set().max_total_degree();
        let hermite_dims: Vec<usize> = (0..d)
            .filter(|&k| basis.families()[k] == PolyFamily::Hermite)
            .collect();
        let proposal = if d >= p as usize {
            HermiteProposal::Gaussian
        } else {
            HermiteProposal::Ball
        };
        let radius = 2f64.sqrt() * (2.0 * p as f64 + 2.0).sqrt();
        let mut s = Self {
            input: input.clone(),
            basis: basis.clone(),
            hermite_dims,
            proposal,
            radius,
            gamma: 1.0,
        };
        s.gamma = s.acceptance_bound()?;
        Ok(s)
    }

    /// Acceptance constant: an upper bound of [`CohOptSampler::ratio`].
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn hermite_envelope(&self, u: f64) -> f64 {
        match self.proposal {
            HermiteProposal::Gaussian => 1.0,
            HermiteProposal::Ball => (-0.25 * u * u).exp(),
        }
    }

    fn in_ball(&self, u: &[f64]) -> bool {
        self.hermite_dims.iter().map(|&k| u[k] * u[k]).sum::<f64>() <= self.radius * self.radius
    }

    /// Target over proposal density, up to a constant.
    pub fn ratio(&self, u: &[f64]) -> Result<f64> {
        if !self.in_ball(u) {
            return Ok(0.0);
        }
        let b = self.basis.tight_bound(u)?;
        let env: f64 = self
            .hermite_dims
            .iter()
            .map(|&k| self.hermite_envelope(u[k]))
            .product();
        Ok(b * b * env * env)
    }

    fn acceptance_bound(&self) -> Result<f64> {
        let d = self.input.dim();
        let sups: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let m = self.basis.max_degrees()[k];
                match self.basis.families()[k] {
                    PolyFamily::Legendre => (0..=m)
                        .map(|a| PolyFamily::Legendre.sup_abs(a).unwrap())
                        .collect(),
                    PolyFamily::Hermite => {
                        let mut best = vec![0.0f64; m + 1];
                        let mut vals = vec![0.0; m + 1];
                        for i in 0..GRID_1D {
                            let u =
                                -self.radius + 2.0 * self.radius * i as f64 / (GRID_1D - 1) as f64;
                            PolyFamily::Hermite.eval_all(u, &mut vals);
                            let env = self.hermite_envelope(u);
                            for (b, v) in best.iter_mut().zip(&vals) {
                                *b = b.max(v.abs() * env);
                            }
                        }
                        best.into_iter().map(|b| SAFETY * b).collect()
                    }
                }
            })
            .collect();
        // Legendre factors are exact sups, so the bound is tight there.
        let product = self.basis.product_bound_with(&sups).powi(2);
        if d > 2 {
            return Ok(product);
        }
        let lo_hi: Vec<(f64, f64)> = (0..d)
            .map(|k| match self.basis.families()[k] {
                PolyFamily::Legendre => (-1.0, 1.0),
                PolyFamily::Hermite => (-self.radius, self.radius),
            })
            .collect();
        let m = if d == 1 { GRID_1D } else { GRID_2D };
        let mut grid_max: f64 = 0.0;
        let mut u = vec![0.0; d];
        let total = m.pow(d as u32);
        for flat in 0..total {
            let mut rest = flat;
            for (k, (lo, hi)) in lo_hi.iter().enumerate() {
                let i = rest % m;
                rest /= m;
                u[k] = lo + (hi - lo) * i as f64 / (m - 1) as f64;
            }
            grid_max = grid_max.max(self.ratio(&u)?);
        }
        Ok(product.min(SAFETY * grid_max))
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R, u: &mut [f64]) {
        for (k, f) in self.basis.families().iter().enumerate() {
            if *f == PolyFamily::Legendre {
                u[k] = rng.random_range(-1.0..=1.0);
            }
        }
        match self.proposal {
            HermiteProposal::Gaussian => {
                for &k in &self.hermite_dims {
                    u[k] = rng.sample(StandardNormal);
                }
            }
            HermiteProposal::Ball => {
                if !self.hermite_dims.is_empty() {
                    let b = uniform_ball(self.hermite_dims.len(), self.radius, rng);
                    for (&k, v) in self.hermite_dims.iter().zip(b) {
                        u[k] = v;
                    }
                }
            }
        }
    }

    /// `n` accepted points with weights `1 / B(u)`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Design> {
        if n == 0 {
            return Err(PceError::InvalidParameter(
                "design size must be at least 1".into(),
            ));
        }
        let d = self.input.dim();
        let mut pts = DMatrix::zeros(n, d);
        let mut w = DVector::zeros(n);
        let mut u = vec![0.0; d];
        let mut accepted = 0usize;
        let mut proposals = 0u64;
        while accepted < n {
            self.propose(rng, &mut u);
            proposals += 1;
            let h = self.ratio(&u)?;
            let t: f64 = rng.random();
            if t * self.gamma <= h && h > 0.0 {
                for (k, &v) in u.iter().enumerate() {
                    pts[(accepted, k)] = v;
                }
                w[accepted] = 1.0 / self.basis.tight_bound(&u)?;
                accepted += 1;
            }
            if proposals % CHECK_EVERY == 0 {
                let rate = accepted as f64 / proposals as f64;
                if rate < MIN_ACCEPTANCE {
                    return Err(PceError::AcceptanceRate { rate, proposals });
                }
            }
        }
        log::debug!("coherence-optimal sampler accepted {accepted} of {proposals} proposals");
        Design::from_standard(
            &self.input,
            pts,
            Some(w),
            Provenance::new(
                "coh-opt",
                json!({ "n": n, "gamma": self.gamma, "proposals": proposals }),
            ),
        )
    }
}

/// One-shot form of [`CohOptSampler::sample`].
pub fn coherence_optimal_design<R: Rng + ?Sized>(
    input: &InputModel,
    basis: &PolyBasis,
    n: usize,
    rng: &mut R,
) -> Result<Design> {
    CohOptSampler::new(input, basis)?.sample(n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{gauss_quadrature, MultiIndexSet, TruncationSpec};
    use crate::inputs::Marginal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn legendre(d: usize, p: u32) -> (InputModel, PolyBasis) {
        let input = InputModel::iid(Marginal::uniform(-1.0, 1.0).unwrap(), d).unwrap();
        let set = MultiIndexSet::enumerate(d, TruncationSpec::total_degree(p)).unwrap();
        (
            input,
            PolyBasis::new(vec![PolyFamily::Legendre; d], set).unwrap(),
        )
    }

    #[test]
    fn constant_basis_accepts_everything() {
        let input = InputModel::iid(Marginal::uniform(0.0, 1.0).unwrap(), 2).unwrap();
        let basis = PolyBasis::new(
            vec![PolyFamily::Legendre; 2],
            MultiIndexSet::from_indices(2, vec![vec![0, 0]]).unwrap(),
        )
        .unwrap();
        let s = CohOptSampler::new(&input, &basis).unwrap();
        assert_eq!(s.gamma(), 1.0);
        let d = s.sample(50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(d.provenance.params["proposals"], 50);
        assert!(d.weights.unwrap().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn weights_positive_and_bounded() {
        let (input, basis) = legendre(2, 4);
        let d = coherence_optimal_design(&input, &basis, 200, &mut ChaCha8Rng::seed_from_u64(2))
            .unwrap();
        let w = d.weights.unwrap();
        let max = w.max();
        assert!(w.iter().all(|&v| v > 0.0 && v / max <= 1.0));
        assert!(w.iter().all(|&v| v <= 1.0));
    }

    #[test]
    fn legendre_bound_is_exact_sup() {
        let (input, basis) = legendre(1, 3);
        let s = CohOptSampler::new(&input, &basis).unwrap();
        assert!((s.gamma() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_dominates_ratio_for_hermite() {
        for (d, p) in [(1usize, 4u32), (2, 3), (3, 2)] {
            let input = InputModel::iid(Marginal::gaussian(0.0, 1.0).unwrap(), d).unwrap();
            let set = MultiIndexSet::enumerate(d, TruncationSpec::total_degree(p)).unwrap();
            let basis = PolyBasis::new(vec![PolyFamily::Hermite; d], set).unwrap();
            let s = CohOptSampler::new(&input, &basis).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut u = vec![0.0; d];
            for _ in 0..20_000 {
                for v in u.iter_mut() {
                    *v = rng.random_range(-s.radius()..s.radius());
                }
                assert!(s.ratio(&u).unwrap() <= s.gamma());
            }
            let design = s.sample(100, &mut rng).unwrap();
            for row in design.standard.row_iter() {
                assert!(row.norm() <= s.radius() + 1e-12);
            }
        }
    }

    #[test]
    fn mixed_inputs_supported() {
        let input = InputModel::new(vec![
            Marginal::uniform(0.0, 1.0).unwrap(),
            Marginal::lognormal(0.0, 0.5).unwrap(),
        ])
        .unwrap();
        let set = MultiIndexSet::enumerate(2, TruncationSpec::total_degree(3)).unwrap();
        let basis = PolyBasis::new(input.families(), set).unwrap();
        let d = coherence_optimal_design(&input, &basis, 30, &mut ChaCha8Rng::seed_from_u64(4))
            .unwrap();
        assert!(d.physical.column(1).iter().all(|&x| x > 0.0));
    }

    #[test]
    fn histogram_matches_target() {
        // sampled density is proportional to B(u)^2 on [-1, 1]
        let (input, basis) = legendre(1, 3);
        let n = 20_000;
        let d =
            coherence_optimal_design(&input, &basis, n, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let bins = 10;
        let (nodes, weights) = gauss_quadrature(PolyFamily::Legendre, 20);
        let mut mass = vec![0.0; bins];
        for (b, m) in mass.iter_mut().enumerate() {
            let lo = -1.0 + 2.0 * b as f64 / bins as f64;
            let half = 1.0 / bins as f64;
            for (&t, &w) in nodes.iter().zip(&weights) {
                let u = lo + half * (t + 1.0);
                *m += w * basis.tight_bound(&[u]).unwrap().powi(2);
            }
        }
        let total: f64 = mass.iter().sum();
        let mut counts = vec![0usize; bins];
        for &u in d.standard.iter() {
            counts[(((u + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&mass)
            .map(|(&c, &m)| {
                let e = n as f64 * m / total;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 99th percentile of chi-squared with 9 degrees of freedom
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }
}
