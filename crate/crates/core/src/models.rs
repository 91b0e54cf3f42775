//! Analytical benchmark models and the registry used by the harness.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::{MultiIndexSet, PolyBasis, TruncationSpec};
use crate::error::{PceError, Result};
use crate::inputs::{InputModel, Marginal};

pub const ISHIGAMI_A: f64 = 7.0;
pub const ISHIGAMI_B: f64 = 0.1;
pub const HUNDRED_D_DIM: usize = 100;

/// Default basis settings and largest design size of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelDefaults {
    pub p: u32,
    pub q: f64,
    pub n_max: usize,
    /// Degree of the reduced basis used with the subset samplers.
    pub small_p: Option<u32>,
}

type PointFn = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;

#[derive(Clone)]
enum Evaluator {
    Point(Arc<PointFn>),
    External(ExternalModel),
}

#[derive(Clone)]
pub struct BenchmarkModel {
    name: String,
    input: InputModel,
    defaults: ModelDefaults,
    eval: Evaluator,
}

impl fmt::Debug for BenchmarkModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkModel")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("defaults", &self.defaults)
            .finish()
    }
}

impl BenchmarkModel {
    pub fn new<F>(name: &str, input: InputModel, defaults: ModelDefaults, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            input,
            defaults,
            eval: Evaluator::Point(Arc::new(f)),
        }
    }

    pub fn external(
        name: &str,
        input: InputModel,
        defaults: ModelDefaults,
        model: ExternalModel,
    ) -> Self {
        Self {
            name: name.to_string(),
            input,
            defaults,
            eval: Evaluator::External(model),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    pub fn input(&self) -> &InputModel {
        &self.input
    }

    pub fn defaults(&self) -> ModelDefaults {
        self.defaults
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(PceError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        match &self.eval {
            Evaluator::Point(f) => f(x),
            Evaluator::External(m) => {
                let row = DMatrix::from_row_slice(1, x.len(), x);
                Ok(m.evaluate_batch(&row)?[0])
            }
        }
    }

    /// Evaluates every row of `x`.
    pub fn evaluate_batch(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.dim() {
            return Err(PceError::DimensionMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        match &self.eval {
            Evaluator::Point(f) => {
                let mut out = DVector::zeros(x.nrows());
                let mut buf = vec![0.0; x.ncols()];
                for (i, row) in x.row_iter().enumerate() {
                    for (b, v) in buf.iter_mut().zip(row.iter()) {
                        *b = *v;
                    }
                    out[i] = f(&buf)?;
                }
                Ok(out)
            }
            Evaluator::External(m) => m.evaluate_batch(x),
        }
    }

    pub fn truncation(&self, small: bool) -> Result<TruncationSpec> {
        let p = if small {
            self.defaults.small_p.ok_or_else(|| {
                PceError::InvalidParameter(format!(
                    "model '{}' has no small-basis preset",
                    self.name
                ))
            })?
        } else {
            self.defaults.p
        };
        TruncationSpec::new(p, self.defaults.q, None)
    }

    /// Default candidate basis.
    pub fn basis(&self, small: bool) -> Result<PolyBasis> {
        let set = MultiIndexSet::enumerate(self.dim(), self.truncation(small)?)?;
        PolyBasis::new(self.input.families(), set)
    }
}

/// `sin x1 + a sin^2 x2 + b x3^4 sin x1` with `a = 7`, `b = 0.1`.
pub fn ishigami(x: &[f64]) -> f64 {
    let s1 = x[0].sin();
    let s2 = x[1].sin();
    s1 + ISHIGAMI_A * s2 * s2 + ISHIGAMI_B * x[2].powi(4) * s1
}

/// Water flow through a borehole. Inputs in order
/// `(r_w, L, K_w, T_u, T_l, H_u, H_l, r)`.
pub fn borehole(x: &[f64]) -> Result<f64> {
    let [rw, l, kw, tu, tl, hu, hl, r] =
        <[f64; 8]>::try_from(x).map_err(|_| PceError::DimensionMismatch {
            expected: 8,
            got: x.len(),
        })?;
    if !(rw > 0.0) {
        return Err(PceError::Domain { dim: 0, value: rw });
    }
    if !(r > rw) {
        return Err(PceError::Domain { dim: 7, value: r });
    }
    for (dim, v) in [(1, l), (2, kw), (3, tu), (4, tl)] {
        if !(v > 0.0) {
            return Err(PceError::Domain { dim, value: v });
        }
    }
    let lr = (r / rw).ln();
    Ok(2.0 * PI * tu * (hu - hl) / (lr * (1.0 + 2.0 * l * tu / (lr * rw * rw * kw) + tu / tl)))
}

/// Sensitivity test function in 100 dimensions.
pub fn hundred_d(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let mut lin = 0.0;
    let mut cub = 0.0;
    let mut lg = 0.0;
    for (k, &v) in x.iter().enumerate() {
        let i = (k + 1) as f64;
        lin += i * v;
        cub += i * v.powi(3);
        lg += i * (v * v + v.powi(4)).ln();
    }
    3.0 - 5.0 / d * lin + cub / d + lg / (3.0 * d) + x[0] * x[1] * x[1] + x[1] * x[3] - x[2] * x[4]
        + x[50]
        + x[49] * x[53] * x[53]
}

pub fn ishigami_model() -> BenchmarkModel {
    let input = InputModel::iid(Marginal::Uniform { a: -PI, b: PI }, 3).expect("valid marginal");
    BenchmarkModel::new(
        "ishigami",
        input,
        ModelDefaults {
            p: 14,
            q: 1.0,
            n_max: 200,
            small_p: Some(12),
        },
        |x| Ok(ishigami(x)),
    )
}

/// Borehole marginals. The Gaussian's second parameter is read as a
/// standard deviation and the lognormal's as the underlying Gaussian's.
pub fn borehole_input() -> InputModel {
    InputModel::new(vec![
        Marginal::Gaussian {
            mu: 0.10,
            sigma: 0.0161812,
        },
        Marginal::Uniform {
            a: 1120.0,
            b: 1680.0,
        },
        Marginal::Uniform {
            a: 9855.0,
            b: 12045.0,
        },
        Marginal::Uniform {
            a: 63070.0,
            b: 115600.0,
        },
        Marginal::Uniform { a: 63.1, b: 116.0 },
        Marginal::Uniform {
            a: 990.0,
            b: 1110.0,
        },
        Marginal::Uniform { a: 700.0, b: 820.0 },
        Marginal::Lognormal {
            lambda: 7.71,
            zeta: 1.0056,
        },
    ])
    .expect("valid marginals")
}

pub fn borehole_model() -> BenchmarkModel {
    BenchmarkModel::new(
        "borehole",
        borehole_input(),
        ModelDefaults {
            p: 5,
            q: 1.0,
            n_max: 300,
            small_p: Some(4),
        },
        borehole,
    )
}

pub fn hundred_d_model() -> BenchmarkModel {
    let mut marginals = vec![Marginal::Uniform { a: 1.0, b: 2.0 }; HUNDRED_D_DIM];
    marginals[19] = Marginal::Uniform { a: 1.0, b: 3.0 };
    BenchmarkModel::new(
        "hundred_d",
        InputModel::new(marginals).expect("valid marginals"),
        ModelDefaults {
            p: 4,
            q: 0.5,
            n_max: 1400,
            small_p: None,
        },
        |x| Ok(hundred_d(x)),
    )
}

/// Named collection of benchmark models.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    models: Vec<BenchmarkModel>,
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Adds a model, replacing any model with the same name.
    pub fn register(&mut self, model: BenchmarkModel) {
        match self.models.iter_mut().find(|m| m.name == model.name) {
            Some(slot) => *slot = model,
            None => self.models.push(model),
        }
    }

    pub fn register_fn<F>(&mut self, name: &str, input: InputModel, defaults: ModelDefaults, f: F)
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        self.register(BenchmarkModel::new(name, input, defaults, f));
    }

    pub fn get(&self, name: &str) -> Option<&BenchmarkModel> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.models.iter().map(|m| m.name.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BenchmarkModel> {
        self.models.iter()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// The built-in models.
pub fn registry() -> Registry {
    let mut r = Registry::empty();
    r.register(ishigami_model());
    r.register(borehole_model());
    r.register(hundred_d_model());
    r
}

/// Model evaluated by an external program. Input points are written to its
/// stdin as CSV rows; it must print one number per line on stdout, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalModel {
    pub command: String,
    pub args: Vec<String>,
}

impl ExternalModel {
    pub fn new(command: &str, args: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn evaluate_batch(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let io = |e: std::io::Error| PceError::Model(format!("{}: {e}", self.command));
        let mut child = Command::new(&self.command)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(io)?;
        let mut input = String::new();
        for row in x.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            input.push_str(&cells.join(","));
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let stdout = child.stdout.take().expect("piped stdout");
        let mut values = Vec::with_capacity(x.nrows());
        for line in BufReader::new(stdout).lines() {
            let line = line.map_err(io)?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t.parse().map_err(|_| {
                PceError::Model(format!("{}: cannot parse output line '{t}'", self.command))
            })?;
            values.push(v);
        }
        writer
            .join()
            .map_err(|_| PceError::Model("stdin writer panicked".into()))?
            .map_err(io)?;
        let status = child.wait().map_err(io)?;
        if !status.success() {
            return Err(PceError::Model(format!(
                "{} exited with {status}",
                self.command
            )));
        }
        if values.len() != x.nrows() {
            return Err(PceError::Model(format!(
                "{} returned {} values for {} points",
                self.command,
                values.len(),
                x.nrows()
            )));
        }
        Ok(DVector::from_vec(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ishigami_examples() {
        assert_eq!(ishigami(&[0.0, 0.0, 0.0]), 0.0);
        assert!((ishigami(&[PI / 2.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((ishigami(&[PI / 2.0, PI / 2.0, 1.0]) - 8.1).abs() < 1e-14);
    }

    #[test]
    fn hundred_d_at_ones() {
        let x = vec![1.0; 100];
        let expected = 3.0 - 5.0 * 50.5 + 50.5 + 50.5 / 3.0 * 2f64.ln() + 3.0;
        assert!((hundred_d(&x) - expected).abs() < 1e-12);
        assert!((hundred_d(&x) + 184.332).abs() < 1e-3);
    }

    #[test]
    fn hundred_d_finite_on_support() {
        let m = hundred_d_model();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = m.input().sample_iid(10_000, &mut rng);
        let y = m.evaluate_batch(&x).unwrap();
        assert!(y.iter().all(|v| v.is_finite()));
        for k in 0..100 {
            let hi = if k == 19 { 3.0 } else { 2.0 };
            assert!(x.column(k).iter().all(|&v| (1.0..=hi).contains(&v)));
        }
    }

    const CENTRAL: [f64; 8] = [0.10, 1400.0, 10950.0, 89335.0, 89.55, 1050.0, 760.0, 0.0];

    fn central() -> Vec<f64> {
        let mut x = CENTRAL.to_vec();
        x[7] = 7.71f64.exp();
        x
    }

    #[test]
    fn borehole_central_value() {
        // Independent 40-digit evaluation at the marginal medians.
        let frozen = 70.947_519_440_979_06;
        let x = central();
        let medians: Vec<f64> = borehole_input()
            .marginals()
            .iter()
            .map(|m| m.median())
            .collect();
        for (a, b) in medians.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
        assert!((borehole(&x).unwrap() - frozen).abs() < 1e-12 * frozen);
    }

    #[test]
    fn borehole_head_difference() {
        let base = central();
        let mut prev = f64::NEG_INFINITY;
        for hu in [1000.0, 1050.0, 1100.0] {
            let mut x = base.clone();
            x[5] = hu;
            let v = borehole(&x).unwrap();
            assert!(v > prev);
            prev = v;
        }
        let mut doubled = base.clone();
        doubled[5] = base[6] + 2.0 * (base[5] - base[6]);
        let ratio = borehole(&doubled).unwrap() / borehole(&base).unwrap();
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn borehole_validation() {
        let mut x = central();
        x[0] = -0.01;
        assert!(borehole(&x).is_err());
        let mut x = central();
        x[7] = 0.05;
        assert!(borehole(&x).is_err());
        assert!(borehole(&[1.0; 3]).is_err());
    }

    #[test]
    fn borehole_positive_on_random_probes() {
        let m = borehole_model();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = m.input().sample_iid(100_000, &mut rng);
        for row in x.row_iter() {
            let v: Vec<f64> = row.iter().copied().collect();
            if let Ok(y) = borehole(&v) {
                assert!(y > 0.0);
            }
        }
    }

    #[test]
    fn registry_contents() {
        let r = registry();
        assert_eq!(r.names(), vec!["ishigami", "borehole", "hundred_d"]);
        assert_eq!(r.get("ishigami").unwrap().basis(false).unwrap().len(), 680);
        // Enumerated once and frozen: 1 + 100 + 100 + 4950 + 100 + 100.
        assert_eq!(
            r.get("hundred_d").unwrap().basis(false).unwrap().len(),
            5351
        );
        assert!(r.get("hundred_d").unwrap().truncation(true).is_err());
        assert!(r.get("wingweight").is_none());
    }

    #[test]
    fn closure_registration() {
        let mut r = registry();
        let input = InputModel::iid(Marginal::Uniform { a: 0.0, b: 1.0 }, 2).unwrap();
        let d = ModelDefaults {
            p: 3,
            q: 1.0,
            n_max: 20,
            small_p: None,
        };
        r.register_fn("sum", input, d, |x| Ok(x[0] + x[1]));
        assert_eq!(r.len(), 4);
        assert_eq!(r.get("sum").unwrap().evaluate(&[0.25, 0.5]).unwrap(), 0.75);
        assert!(r.get("sum").unwrap().evaluate(&[0.25]).is_err());
    }

    #[test]
    fn evaluation_is_pure() {
        let m = ishigami_model();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = m.input().sample_iid(100, &mut rng);
        assert_eq!(m.evaluate_batch(&x).unwrap(), m.evaluate_batch(&x).unwrap());
    }

    #[cfg(unix)]
    #[test]
    fn external_adapter_round_trip() {
        let ext = ExternalModel::new("sh", &["-c", "awk -F, '{ print $1 * $2 }'"]);
        let input = InputModel::iid(Marginal::Uniform { a: 0.0, b: 1.0 }, 2).unwrap();
        let d = ModelDefaults {
            p: 2,
            q: 1.0,
            n_max: 10,
            small_p: None,
        };
        let m = BenchmarkModel::external("product", input, d, ext);
        let x = DMatrix::from_row_slice(3, 2, &[0.5, 0.5, 0.25, 1.0, 0.1, 0.3]);
        let y = m.evaluate_batch(&x).unwrap();
        assert!((y[0] - 0.25).abs() < 1e-12);
        assert!((y[1] - 0.25).abs() < 1e-12);
        assert!((y[2] - 0.03).abs() < 1e-12);
        assert!((m.evaluate(&[0.5, 0.5]).unwrap() - 0.25).abs() < 1e-12);

        let bad = ExternalModel::new("sh", &["-c", "cat >/dev/null; echo 1"]);
        assert!(bad.evaluate_batch(&x).is_err());
    }
}
