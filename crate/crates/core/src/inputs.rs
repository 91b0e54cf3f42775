//! Probabilistic input models.
//!
//! An [`InputModel`] is an ordered list of independent [`Marginal`]s. Every
//! marginal has an isoprobabilistic map to a standardized variable whose
//! orthonormal polynomial family is known: uniform marginals map affinely to
//! `[-1, 1]` (Legendre), Gaussian and lognormal marginals map to the standard
//! normal (Hermite).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

use crate::basis::PolyFamily;
use crate::error::{PceError, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A univariate marginal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarginalSpec", into = "MarginalSpec")]
pub enum Marginal {
    Uniform {
        a: f64,
        b: f64,
    },
    Gaussian {
        mu: f64,
        sigma: f64,
    },
    /// `ln X ~ N(lambda, zeta^2)`.
    Lognormal {
        lambda: f64,
        zeta: f64,
    },
}

/// Config-file form of a marginal: `{ family = "uniform", params = [a, b] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub family: String,
    pub params: Vec<f64>,
}

impl TryFrom<MarginalSpec> for Marginal {
    type Error = PceError;

    fn try_from(spec: MarginalSpec) -> Result<Self> {
        let [p0, p1] = spec.params[..] else {
            return Err(PceError::InvalidParameter(format!(
                "marginal '{}' needs exactly two parameters, got {}",
                spec.family,
                spec.params.len()
            )));
        };
        match spec.family.to_ascii_lowercase().as_str() {
            "uniform" => Marginal::uniform(p0, p1),
            "gaussian" | "normal" => Marginal::gaussian(p0, p1),
            "lognormal" => Marginal::lognormal(p0, p1),
            other => Err(PceError::InvalidParameter(format!(
                "unknown marginal family '{other}'"
            ))),
        }
    }
}

impl From<Marginal> for MarginalSpec {
    fn from(m: Marginal) -> Self {
        let (family, params) = match m {
            Marginal::Uniform { a, b } => ("uniform", vec![a, b]),
            Marginal::Gaussian { mu, sigma } => ("gaussian", vec![mu, sigma]),
            Marginal::Lognormal { lambda, zeta } => ("lognormal", vec![lambda, zeta]),
        };
        MarginalSpec {
            family: family.to_string(),
            params,
        }
    }
}

fn finite(vals: &[f64]) -> bool {
    vals.iter().all(|v| v.is_finite())
}

fn std_normal_cdf(u: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-u / std::f64::consts::SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    let x = Normal::standard().inverse_cdf(p);
    if !x.is_finite() {
        return x;
    }
    // One Newton step against the CDF used everywhere else.
    let dens = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if dens > 0.0 {
        x + (p - std_normal_cdf(x)) / dens
    } else {
        x
    }
}

impl Marginal {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !finite(&[a, b]) || a >= b {
            return Err(PceError::InvalidParameter(format!(
                "uniform requires a < b, got ({a}, {b})"
            )));
        }
        Ok(Marginal::Uniform { a, b })
    }

    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        if !finite(&[mu, sigma]) || sigma <= 0.0 {
            return Err(PceError::InvalidParameter(format!(
                "gaussian requires sigma > 0, got {sigma}"
            )));
        }
        Ok(Marginal::Gaussian { mu, sigma })
    }

    pub fn lognormal(lambda: f64, zeta: f64) -> Result<Self> {
        if !finite(&[lambda, zeta]) || zeta <= 0.0 {
            return Err(PceError::InvalidParameter(format!(
                "lognormal requires zeta > 0, got {zeta}"
            )));
        }
        Ok(Marginal::Lognormal { lambda, zeta })
    }

    /// Polynomial family orthonormal w.r.t. the standardized variable.
    pub fn family(&self) -> PolyFamily {
        match self {
            Marginal::Uniform { .. } => PolyFamily::Legendre,
            Marginal::Gaussian { .. } | Marginal::Lognormal { .. } => PolyFamily::Hermite,
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        match *self {
            Marginal::Uniform { a, b } => x >= a && x <= b,
            Marginal::Gaussian { .. } => x.is_finite(),
            Marginal::Lognormal { .. } => x > 0.0 && x.is_finite(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => {
                if x >= a && x <= b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Marginal::Gaussian { mu, sigma } => {
                let z = (x - mu) / sigma;
                INV_SQRT_2PI / sigma * (-0.5 * z * z).exp()
            }
            Marginal::Lognormal { lambda, zeta } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let z = (x.ln() - lambda) / zeta;
                INV_SQRT_2PI / (zeta * x) * (-0.5 * z * z).exp()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Marginal::Gaussian { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            Marginal::Lognormal { lambda, zeta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - lambda) / zeta)
                }
            }
        }
    }

    /// Inverse CDF for `p` in `(0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => a + p * (b - a),
            Marginal::Gaussian { mu, sigma } => mu + sigma * std_normal_quantile(p),
            Marginal::Lognormal { lambda, zeta } => (lambda + zeta * std_normal_quantile(p)).exp(),
        }
    }

    pub fn median(&self) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => 0.5 * (a + b),
            Marginal::Gaussian { mu, .. } => mu,
            Marginal::Lognormal { lambda, .. } => lambda.exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            Marginal::Gaussian { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            }
            Marginal::Lognormal { lambda, zeta } => {
                let z: f64 = rng.sample(StandardNormal);
                (lambda + zeta * z).exp()
            }
        }
    }

    pub fn to_standard(&self, x: f64) -> Option<f64> {
        if !self.in_support(x) {
            return None;
        }
        Some(match *self {
            Marginal::Uniform { a, b } => (2.0 * x - a - b) / (b - a),
            Marginal::Gaussian { mu, sigma } => (x - mu) / sigma,
            Marginal::Lognormal { lambda, zeta } => (x.ln() - lambda) / zeta,
        })
    }

    pub fn from_standard(&self, u: f64) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => 0.5 * (a + b) + 0.5 * (b - a) * u,
            Marginal::Gaussian { mu, sigma } => mu + sigma * u,
            Marginal::Lognormal { lambda, zeta } => (lambda + zeta * u).exp(),
        }
    }
}

/// Density of the standardized variable of the given family.
pub fn standard_pdf(family: PolyFamily, u: f64) -> f64 {
    match family {
        PolyFamily::Legendre => {
            if (-1.0..=1.0).contains(&u) {
                0.5
            } else {
                0.0
            }
        }
        PolyFamily::Hermite => INV_SQRT_2PI * (-0.5 * u * u).exp(),
    }
}

/// Independent joint input distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputModel {
    marginals: Vec<Marginal>,
}

impl InputModel {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(PceError::InvalidParameter(
                "input model needs at least one marginal".into(),
            ));
        }
        Ok(Self { marginals })
    }

    pub fn iid(marginal: Marginal, d: usize) -> Result<Self> {
        Self::new(vec![marginal; d])
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn families(&self) -> Vec<PolyFamily> {
        self.marginals.iter().map(Marginal::family).collect()
    }

    /// `n` i.i.d. points in physical space, one per row.
    pub fn sample_iid<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let d = self.dim();
        let mut x = DMatrix::zeros(n, d);
        for i in 0..n {
            for (k, m) in self.marginals.iter().enumerate() {
                x[(i, k)] = m.sample(rng);
            }
        }
        x
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(PceError::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn to_standard(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        self.marginals
            .iter()
            .zip(x)
            .enumerate()
            .map(|(dim, (m, &v))| m.to_standard(v).ok_or(PceError::Domain { dim, value: v }))
            .collect()
    }

    pub fn from_standard(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u.len())?;
        Ok(self
            .marginals
            .iter()
            .zip(u)
            .map(|(m, &v)| m.from_standard(v))
            .collect())
    }

    pub fn joint_pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self
            .marginals
            .iter()
            .zip(x)
            .map(|(m, &v)| m.pdf(v))
            .product())
    }

    /// Row-wise [`InputModel::to_standard`].
    pub fn to_standard_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x.ncols())?;
        let mut u = DMatrix::zeros(x.nrows(), x.ncols());
        for i in 0..x.nrows() {
            for (k, m) in self.marginals.iter().enumerate() {
                let v = x[(i, k)];
                u[(i, k)] = m
                    .to_standard(v)
                    .ok_or(PceError::Domain { dim: k, value: v })?;
            }
        }
        Ok(u)
    }

    pub fn from_standard_matrix(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(u.ncols())?;
        let mut x = DMatrix::zeros(u.nrows(), u.ncols());
        for i in 0..u.nrows() {
            for (k, m) in self.marginals.iter().enumerate() {
                x[(i, k)] = m.from_standard(u[(i, k)]);
            }
        }
        Ok(x)
    }
}

/// Chebyshev (arcsine) CDF on `[-1, 1]`.
pub fn chebyshev_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        1.0 - u.acos() / PI
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn uniform_mean_within_lln_bound() {
        let input = InputModel::iid(Marginal::uniform(0.0, 1.0).unwrap(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = input.sample_iid(10_000, &mut rng);
        let bound = 3.0 * (1.0 / 12f64.sqrt()) / 100.0;
        assert!((x.mean() - 0.5).abs() < bound);
    }

    #[test]
    fn sampling_is_reproducible() {
        let input = InputModel::iid(Marginal::gaussian(0.0, 1.0).unwrap(), 1).unwrap();
        let a = input.sample_iid(1, &mut ChaCha8Rng::seed_from_u64(42));
        let b = input.sample_iid(1, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn borehole_radius_samples_positive() {
        let m = Marginal::lognormal(7.71, 1.0056).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..10_000).all(|_| m.sample(&mut rng) > 0.0));
    }

    #[test]
    fn standard_transforms() {
        let u = Marginal::uniform(-PI, PI).unwrap();
        assert_eq!(u.to_standard(0.0), Some(0.0));
        let g = Marginal::gaussian(2.0, 3.0).unwrap();
        assert_eq!(g.to_standard(5.0), Some(1.0));
        let l = Marginal::lognormal(0.0, 1.0).unwrap();
        assert!((l.to_standard(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);

        assert_eq!(
            Marginal::uniform(0.0, 2.0).unwrap().from_standard(-1.0),
            0.0
        );
        assert_eq!(
            Marginal::gaussian(0.0, 1.0).unwrap().from_standard(0.0),
            0.0
        );
        let e = Marginal::lognormal(1.0, 2.0).unwrap().from_standard(0.0);
        assert!((e - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn out_of_support_is_domain_error() {
        let input = InputModel::iid(Marginal::uniform(0.0, 1.0).unwrap(), 1).unwrap();
        assert!(matches!(
            input.to_standard(&[2.0]),
            Err(PceError::Domain { dim: 0, .. })
        ));
        let l = InputModel::iid(Marginal::lognormal(0.0, 1.0).unwrap(), 1).unwrap();
        assert!(l.to_standard(&[-1.0]).is_err());
    }

    #[test]
    fn joint_pdf_examples() {
        let u2 = InputModel::iid(Marginal::uniform(0.0, 1.0).unwrap(), 2).unwrap();
        assert_eq!(u2.joint_pdf(&[0.3, 0.7]).unwrap(), 1.0);
        let u1 = InputModel::iid(Marginal::uniform(0.0, 1.0).unwrap(), 1).unwrap();
        assert_eq!(u1.joint_pdf(&[2.0]).unwrap(), 0.0);
        let g = InputModel::iid(Marginal::gaussian(0.0, 1.0).unwrap(), 1).unwrap();
        let expect = 1.0 / (2.0 * PI).sqrt();
        assert!((g.joint_pdf(&[0.0]).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Marginal::uniform(1.0, 1.0).is_err());
        assert!(Marginal::gaussian(0.0, 0.0).is_err());
        assert!(Marginal::lognormal(0.0, -1.0).is_err());
        assert!(InputModel::new(vec![]).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        let cases = [
            (Marginal::uniform(-2.0, 3.0).unwrap(), -2.0, 3.0),
            (Marginal::gaussian(1.0, 0.5).unwrap(), -9.0, 11.0),
            (Marginal::lognormal(0.2, 0.4).unwrap(), 1e-9, 60.0),
        ];
        for (m, lo, hi) in cases {
            // composite Simpson on a fine grid
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let mut s = m.pdf(lo) + m.pdf(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * m.pdf(lo + i as f64 * h);
            }
            let integral = s * h / 3.0;
            assert!((integral - 1.0).abs() < 1e-6, "{m:?}: {integral}");
        }
    }

    #[test]
    fn ks_statistic_small_for_each_family() {
        let families = [
            Marginal::uniform(-1.0, 4.0).unwrap(),
            Marginal::gaussian(0.1, 0.0161812).unwrap(),
            Marginal::lognormal(7.71, 1.0056).unwrap(),
        ];
        for (seed, m) in families.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed as u64);
            let xs: Vec<f64> = (0..10_000).map(|_| m.sample(&mut rng)).collect();
            let ks = ks_statistic(xs, |x| m.cdf(x));
            assert!(ks < 0.02, "{m:?}: KS = {ks}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for m in [
            Marginal::uniform(-1.0, 4.0).unwrap(),
            Marginal::gaussian(3.0, 2.0).unwrap(),
            Marginal::lognormal(0.5, 0.3).unwrap(),
        ] {
            for p in [0.01, 0.3, 0.5, 0.77, 0.999] {
                assert!((m.cdf(m.quantile(p)) - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_block_round_trip() {
        let json = r#"[{"family":"uniform","params":[0,1]},{"family":"lognormal","params":[7.71,1.0056]}]"#;
        let input: InputModel = serde_json::from_str(json).unwrap();
        assert_eq!(input.dim(), 2);
        assert_eq!(
            input.marginals()[1],
            Marginal::Lognormal {
                lambda: 7.71,
                zeta: 1.0056
            }
        );
        let back: InputModel =
            serde_json::from_str(&serde_json::to_string(&input).unwrap()).unwrap();
        assert_eq!(back, input);
        let bad = r#"[{"family":"uniform","params":[1,0]}]"#;
        assert!(serde_json::from_str::<InputModel>(bad).is_err());
    }

    fn arb_marginal() -> impl Strategy<Value = Marginal> {
        prop_oneof![
            (-1e3..1e3f64, 1e-3..1e3f64).prop_map(|(a, w)| Marginal::uniform(a, a + w).unwrap()),
            (-1e3..1e3f64, 1e-3..1e3f64).prop_map(|(m, s)| Marginal::gaussian(m, s).unwrap()),
            (-5.0..5.0f64, 0.05..2.0f64).prop_map(|(l, z)| Marginal::lognormal(l, z).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn round_trip_identity(m in arb_marginal(), p in 0.001..0.999f64) {
            let x = m.quantile(p);
            let back = m.from_standard(m.to_standard(x).unwrap());
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0), "x={x} back={back}");
        }
    }
}
