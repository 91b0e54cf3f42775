//! Scalar quality measures of a regression matrix.

use nalgebra::DMatrix;

/// Diagonal entries of `R` smaller than this, relative to the largest,
/// count as numerically zero.
const DET_RANK_TOL: f64 = 1e-12;

fn r_diagonal(psi: &DMatrix<f64>) -> Vec<f64> {
    let r = psi.clone().qr().r();
    (0..psi.ncols()).map(|i| r[(i, i)].abs()).collect()
}

fn numerically_singular(diag: &[f64]) -> bool {
    let max = diag.iter().copied().fold(0.0, f64::max);
    max == 0.0 || diag.iter().any(|&v| v <= DET_RANK_TOL * max)
}

/// `det(Psi^T Psi / N)^(1/P)`, zero when `N < P` or rank deficient.
pub fn d_value(psi: &DMatrix<f64>) -> f64 {
    let (n, p) = psi.shape();
    if n < p || p == 0 {
        return 0.0;
    }
    let diag = r_diagonal(psi);
    if numerically_singular(&diag) {
        return 0.0;
    }
    let log_det = 2.0 * diag.iter().map(|v| v.ln()).sum::<f64>() - p as f64 * (n as f64).ln();
    (log_det / p as f64).exp()
}

/// `(sqrt(det Psi^T Psi) / prod ||Psi_i||)^(1/P)`, zero when `N < P`.
pub fn s_value(psi: &DMatrix<f64>) -> f64 {
    let (n, p) = psi.shape();
    if n < p || p == 0 {
        return 0.0;
    }
    let diag = r_diagonal(psi);
    if numerically_singular(&diag) {
        return 0.0;
    }
    let log_num: f64 = diag.iter().map(|v| v.ln()).sum();
    let log_den: f64 = psi.column_iter().map(|c| c.norm().ln()).sum();
    ((log_num - log_den) / p as f64).exp()
}

/// Column-normalized Gram matrix; zero columns give zero correlations.
fn normalized_gram(psi: &DMatrix<f64>) -> DMatrix<f64> {
    let g = psi.tr_mul(psi);
    normalize_gram(&g)
}

pub(crate) fn normalize_gram(g: &DMatrix<f64>) -> DMatrix<f64> {
    let p = g.nrows();
    let s: Vec<f64> = (0..p).map(|i| g[(i, i)].sqrt()).collect();
    DMatrix::from_fn(p, p, |i, j| {
        let d = s[i] * s[j];
        if d > 0.0 {
            g[(i, j)] / d
        } else {
            0.0
        }
    })
}

/// Largest absolute correlation between two distinct columns.
pub fn mutual_coherence(psi: &DMatrix<f64>) -> f64 {
    let c = normalized_gram(psi);
    let p = c.nrows();
    let mut m: f64 = 0.0;
    for j in 0..p {
        for i in 0..j {
            m = m.max(c[(i, j)].abs());
        }
    }
    m
}

/// Mean squared correlation over ordered pairs of distinct columns.
pub fn avg_cross_correlation(psi: &DMatrix<f64>) -> f64 {
    let c = normalized_gram(psi);
    let p = c.nrows();
    if p < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for j in 0..p {
        for i in 0..j {
            s += 2.0 * c[(i, j)].powi(2);
        }
    }
    s / (p * (p - 1)) as f64
}
