//! Error estimators used for model selection.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PceError, Result};
use crate::inputs::InputModel;
use crate::linalg::{ols_fit, sample_variance, OlsFit};

const LEVERAGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvKind {
    Loo,
    Kfold(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvSpec {
    pub kind: CvKind,
    #[serde(default)]
    pub fold_seed: u64,
}

impl CvSpec {
    pub fn loo() -> Self {
        Self {
            kind: CvKind::Loo,
            fold_seed: 0,
        }
    }

    pub fn kfold(k: usize, fold_seed: u64) -> Self {
        Self {
            kind: CvKind::Kfold(k),
            fold_seed,
        }
    }

    /// Number of folds for `n` observations.
    pub fn n_folds(&self, n: usize) -> usize {
        match self.kind {
            CvKind::Loo => n,
            CvKind::Kfold(k) => k,
        }
    }
}

fn response_variance(y: &DVector<f64>) -> Result<f64> {
    let v = sample_variance(y);
    if !(v > 0.0) {
        return Err(PceError::ZeroVariance("responses"));
    }
    Ok(v)
}

/// Relative LOO error from a fitted OLS model via the hat-matrix identity.
pub fn loo_from_fit(fit: &OlsFit, y: &DVector<f64>) -> Result<f64> {
    let var = response_variance(y)?;
    let n = y.len();
    let mut acc = 0.0;
    for i in 0..n {
        let c = fit.leverage_complements[i];
        if c <= LEVERAGE_TOL {
            return Err(PceError::DegenerateLeverage {
                row: i,
                leverage: 1.0 - c,
            });
        }
        let e = fit.residual[i] / c;
        acc += e * e;
    }
    Ok(acc / n as f64 / var)
}

/// Small-sample correction `N / (N - P_a) * (1 + tr((Psi^T Psi)^{-1}))`.
pub fn correction_factor(n: usize, n_active: usize, trace_inv_gram: f64) -> Result<f64> {
    if n <= n_active {
        return Err(PceError::InvalidParameter(format!(
            "modified LOO needs N > P_a, got N = {n}, P_a = {n_active}"
        )));
    }
    Ok(n as f64 / (n - n_active) as f64 * (1.0 + trace_inv_gram))
}

pub fn modified_loo_from_fit(fit: &OlsFit, y: &DVector<f64>) -> Result<f64> {
    let t = correction_factor(y.len(), fit.coefficients.len(), fit.trace_inv_gram)?;
    Ok(loo_from_fit(fit, y)? * t)
}

fn all_columns(psi: &DMatrix<f64>) -> Vec<usize> {
    (0..psi.ncols()).collect()
}

/// Relative LOO error of the OLS fit on all columns of `psi_active`.
pub fn loo_ols(psi_active: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let fit = ols_fit(psi_active, y, &all_columns(psi_active))?;
    loo_from_fit(&fit, y)
}

pub fn modified_loo(psi_active: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let n_active = psi_active.ncols();
    if y.len() <= n_active {
        return Err(PceError::InvalidParameter(format!(
            "modified LOO needs N > P_a, got N = {}, P_a = {n_active}",
            y.len()
        )));
    }
    let fit = ols_fit(psi_active, y, &all_columns(psi_active))?;
    modified_loo_from_fit(&fit, y)
}

/// Seeded random partition of `0..n` into `k` near-equal blocks.
pub fn folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(PceError::InvalidParameter(format!(
            "need 2 <= k <= N for k-fold CV, got k = {k}, N = {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut block = perm[start..start + len].to_vec();
        block.sort_unstable();
        out.push(block);
        start += len;
    }
    Ok(out)
}

/// Complement of a sorted fold within `0..n`.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - fold.len());
    let mut it = fold.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Relative k-fold CV error. `fit_predict(train, test)` must return
/// predictions for the `test` rows after fitting on the `train` rows.
pub fn kfold_cv<F>(y: &DVector<f64>, spec: &CvSpec, mut fit_predict: F) -> Result<f64>
where
    F: FnMut(&[usize], &[usize]) -> Result<DVector<f64>>,
{
    let n = y.len();
    let var = response_variance(y)?;
    let blocks = folds(n, spec.n_folds(n), spec.fold_seed)?;
    let mut total = 0.0;
    for test in &blocks {
        let train = complement(n, test);
        let pred = fit_predict(&train, test)?;
        if pred.len() != test.len() {
            return Err(PceError::DimensionMismatch {
                expected: test.len(),
                got: pred.len(),
            });
        }
        let mse = test
            .iter()
            .zip(pred.iter())
            .map(|(&i, p)| (y[i] - p).powi(2))
            .sum::<f64>()
            / test.len() as f64;
        total += mse;
    }
    Ok(total / blocks.len() as f64 / var)
}

/// `sum (y - yhat)^2 / sum (y - mean(y))^2`.
pub fn relmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(PceError::DimensionMismatch {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.len() < 2 {
        return Err(PceError::InvalidParameter(
            "validation needs at least two points".into(),
        ));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let den: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if !(den > 0.0) {
        return Err(PceError::ZeroVariance("validation responses"));
    }
    let num: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(num / den)
}

/// RelMSE of `surrogate` against `model` on a fresh i.i.d. validation set.
pub fn relmse_validation<S, M, R>(
    surrogate: S,
    model: M,
    input: &InputModel,
    n_val: usize,
    rng: &mut R,
) -> Result<f64>
where
    S: Fn(&DMatrix<f64>) -> Result<DVector<f64>>,
    M: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let x = input.sample_iid(n_val, rng);
    let y: Vec<f64> = x
        .row_iter()
        .map(|r| model(r.iter().copied().collect::<Vec<_>>().as_slice()))
        .collect();
    let yhat = surrogate(&x)?;
    relmse(&y, yhat.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ols, select_rows};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    fn brute_loo(a: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        let n = y.len();
        let cols: Vec<usize> = (0..a.ncols()).collect();
        let mut acc = 0.0;
        for i in 0..n {
            let train = complement(n, &[i]);
            let at = select_rows(a, &train);
            let yt = DVector::from_iterator(train.len(), train.iter().map(|&r| y[r]));
            let c = ols(&at, &yt, &cols).unwrap();
            let pred = a.row(i).transpose().dot(&c);
            acc += (y[i] - pred).powi(2);
        }
        acc / n as f64 / sample_variance(y)
    }

    #[test]
    fn intercept_only_residuals() {
        let y = DVector::from_vec(vec![1.0, 4.0, 2.0, 8.0, 5.0]);
        let ones = DMatrix::from_element(5, 1, 1.0);
        let n: f64 = 5.0;
        // e_i = (y_i - mean) * N / (N - 1)
        let mean = y.mean();
        let expect = y
            .iter()
            .map(|v| ((v - mean) * n / (n - 1.0)).powi(2))
            .sum::<f64>()
            / n
            / sample_variance(&y);
        assert!((loo_ols(&ones, &y).unwrap() - expect).abs() < 1e-14);
        assert!((expect - n / (n - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn interpolation_is_degenerate() {
        let a = gaussian(4, 4, 1);
        let y = gaussian(4, 1, 2).column(0).into_owned();
        assert!(matches!(
            loo_ols(&a, &y),
            Err(PceError::DegenerateLeverage { .. })
        ));
        assert!(modified_loo(&a, &y).is_err());
    }

    #[test]
    fn random_12x3_matches_refits() {
        let a = gaussian(12, 3, 3);
        let y = gaussian(12, 1, 4).column(0).into_owned();
        let fast = loo_ols(&a, &y).unwrap();
        let slow = brute_loo(&a, &y);
        assert!((fast - slow).abs() <= 1e-10 * slow);
    }

    #[test]
    fn orthonormal_design_correction() {
        // columns scaled so that Psi^T Psi = N I
        let n = 8;
        let mut a = DMatrix::zeros(n, 3);
        for i in 0..n {
            a[(i, 0)] = 1.0;
            a[(i, 1)] = if i % 2 == 0 { 1.0 } else { -1.0 };
            a[(i, 2)] = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
        }
        let y = gaussian(n, 1, 5).column(0).into_owned();
        let fit = ols_fit(&a, &y, &[0, 1, 2]).unwrap();
        let t = correction_factor(n, 3, fit.trace_inv_gram).unwrap();
        let expect = n as f64 / (n as f64 - 3.0) * (1.0 + 3.0 / n as f64);
        assert!((t - expect).abs() < 1e-14);
    }

    #[test]
    fn constant_model_correction_exceeds_one() {
        let a = DMatrix::from_element(10, 1, 1.0);
        let y = gaussian(10, 1, 6).column(0).into_owned();
        let fit = ols_fit(&a, &y, &[0]).unwrap();
        assert!(correction_factor(10, 1, fit.trace_inv_gram).unwrap() > 1.0);
    }

    #[test]
    fn correction_tends_to_one() {
        let mut last = f64::INFINITY;
        for n in [10usize, 100, 1000, 10_000] {
            let a = gaussian(n, 3, 7);
            let fit = ols_fit(&a, &DVector::from_element(n, 1.0), &[0, 1, 2]).unwrap();
            let t = correction_factor(n, 3, fit.trace_inv_gram).unwrap();
            assert!(t < last);
            last = t;
        }
        assert!(last - 1.0 < 2e-3);
    }

    #[test]
    fn folds_partition_rows() {
        let f = folds(11, 3, 9).unwrap();
        let sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 3]);
        let mut all: Vec<usize> = f.concat();
        all.sort();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert_eq!(f, folds(11, 3, 9).unwrap());
        assert!(folds(5, 1, 0).is_err());
        assert!(folds(5, 6, 0).is_err());
    }

    #[test]
    fn kfold_with_n_folds_is_loo() {
        let a = gaussian(15, 3, 10);
        let y = gaussian(15, 1, 11).column(0).into_owned();
        let cols = [0, 1, 2];
        let closure = |train: &[usize], test: &[usize]| {
            let c = ols(
                &select_rows(&a, train),
                &DVector::from_iterator(train.len(), train.iter().map(|&i| y[i])),
                &cols,
            )?;
            Ok(select_rows(&a, test) * c)
        };
        let cv = kfold_cv(&y, &CvSpec::kfold(15, 3), closure).unwrap();
        let loo = kfold_cv(&y, &CvSpec::loo(), closure).unwrap();
        assert!((cv - loo).abs() < 1e-14);
        assert!((cv - loo_ols(&a, &y).unwrap()).abs() < 1e-10 * cv);
    }

    #[test]
    fn constant_closure_cv_error() {
        let y = gaussian(12, 1, 12).column(0).into_owned();
        let mean_closure = |train: &[usize], test: &[usize]| {
            let m = train.iter().map(|&i| y[i]).sum::<f64>() / train.len() as f64;
            Ok(DVector::from_element(test.len(), m))
        };
        let e = kfold_cv(&y, &CvSpec::loo(), mean_closure).unwrap();
        assert!((e - 12.0 / 11.0).abs() < 1e-12);
        let e4 = kfold_cv(&y, &CvSpec::kfold(4, 1), mean_closure).unwrap();
        assert!(e4 > 0.5 && e4 < 2.0);
    }

    #[test]
    fn relmse_examples() {
        assert_eq!(relmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert_eq!(relmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(relmse(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 1.0);
        assert!(relmse(&[1.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(relmse(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn validation_against_model() {
        use crate::inputs::Marginal;
        let input = InputModel::iid(Marginal::uniform(0.0, 1.0).unwrap(), 2).unwrap();
        let model = |x: &[f64]| x[0] + 2.0 * x[1];
        let exact = |x: &DMatrix<f64>| {
            Ok(DVector::from_iterator(
                x.nrows(),
                x.row_iter().map(|r| r[0] + 2.0 * r[1]),
            ))
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            relmse_validation(exact, model, &input, 100, &mut rng).unwrap(),
            0.0
        );
    }

    #[test]
    fn near_unit_leverage_matches_refits() {
        // one row has leverage 1 - 4e-6
        let a = gaussian(6, 5, 7531);
        let y = gaussian(6, 1, 7531 ^ 0xabcdef).column(0).into_owned();
        let (fast, slow) = (loo_ols(&a, &y).unwrap(), brute_loo(&a, &y));
        assert!((fast - slow).abs() <= 1e-12 * slow);
    }

    proptest! {
        #[test]
        fn loo_matches_refits(seed in 0u64..10_000, n in 6usize..=20, p in 1usize..=5) {
            let a = gaussian(n, p, seed);
            let y = gaussian(n, 1, seed ^ 0xabcdef).column(0).into_owned();
            let fast = loo_ols(&a, &y).unwrap();
            let slow = brute_loo(&a, &y);
            prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn modified_at_least_plain(seed in 0u64..10_000, p in 1usize..=5) {
            let a = gaussian(20, p, seed);
            let y = gaussian(20, 1, seed + 7).column(0).into_owned();
            prop_assert!(modified_loo(&a, &y).unwrap() >= loo_ols(&a, &y).unwrap());
        }

        #[test]
        fn relmse_affine_invariant(s in 0.1..10.0f64, t in -5.0..5.0f64, seed in 0u64..1000) {
            let y = gaussian(10, 1, seed).column(0).into_owned();
            let yh = gaussian(10, 1, seed + 1).column(0).into_owned() * 0.1 + &y;
            let base = relmse(y.as_slice(), yh.as_slice()).unwrap();
            let y2: Vec<f64> = y.iter().map(|v| s * v + t).collect();
            let yh2: Vec<f64> = yh.iter().map(|v| s * v + t).collect();
            prop_assert!((relmse(&y2, &yh2).unwrap() - base).abs() < 1e-9 * base.max(1e-12));
        }
    }
}
