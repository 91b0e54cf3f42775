//! Least-squares kernel: Householder QR with column appends.

use nalgebra::{DMatrix, DVector};

use crate::error::{PceError, Result};

/// Relative size of a new diagonal entry of `R` below which the appended
/// column is treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Thin QR factorization `A = Q R` grown one column at a time.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    nrows: usize,
    reflectors: Vec<(DVector<f64>, f64)>,
    /// Columns of `R`; column `k` has length `k + 1`.
    r: Vec<Vec<f64>>,
    /// Columns of `R^{-1}`, same layout as `r`.
    r_inv: Vec<Vec<f64>>,
    q: Vec<DVector<f64>>,
}

impl IncrementalQr {
    pub fn new(nrows: usize) -> Self {
        Self {
            nrows,
            reflectors: Vec::new(),
            r: Vec::new(),
            r_inv: Vec::new(),
            q: Vec::new(),
        }
    }

    pub fn from_columns(a: &DMatrix<f64>, cols: &[usize]) -> Result<Self> {
        let mut qr = Self::new(a.nrows());
        for (pos, &j) in cols.iter().enumerate() {
            qr.push(&a.column(j).into_owned())
                .map_err(|_| PceError::Singular { column: cols[pos] })?;
        }
        Ok(qr)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.r.len()
    }

    fn apply_reflectors(&self, x: &mut DVector<f64>) {
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            let s = *beta * v.rows(k, self.nrows - k).dot(&x.rows(k, self.nrows - k));
            x.rows_mut(k, self.nrows - k)
                .axpy(-s, &v.rows(k, self.nrows - k), 1.0);
        }
    }

    /// Appends a column. On rank deficiency the factorization is left
    /// unchanged and `Singular` is returned with the would-be position.
    pub fn push(&mut self, col: &DVector<f64>) -> Result<()> {
        let n = self.nrows;
        let k = self.ncols();
        if col.len() != n {
            return Err(PceError::DimensionMismatch {
                expected: n,
                got: col.len(),
            });
        }
        if k >= n {
            return Err(PceError::Singular { column: k });
        }
        let scale = col.norm();
        let mut x = col.clone();
        self.apply_reflectors(&mut x);
        let tail_norm = x.rows(k, n - k).norm();
        if !(tail_norm > RANK_TOL * scale) {
            return Err(PceError::Singular { column: k });
        }
        let x0 = x[k];
        let alpha = if x0 >= 0.0 { -tail_norm } else { tail_norm };
        let mut v = DVector::zeros(n);
        v.rows_mut(k, n - k).copy_from(&x.rows(k, n - k));
        v[k] -= alpha;
        let vnorm2 = v.norm_squared();
        let beta = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };

        let mut rcol: Vec<f64> = x.rows(0, k).iter().copied().collect();
        rcol.push(alpha);

        // R^{-1} = [Ri, -Ri r / alpha; 0, 1 / alpha]
        let mut inv = vec![0.0; k + 1];
        for (i, slot) in inv.iter_mut().enumerate().take(k) {
            let mut s = 0.0;
            for j in i..k {
                s += self.r_inv[j][i] * rcol[j];
            }
            *slot = -s / alpha;
        }
        inv[k] = 1.0 / alpha;

        self.reflectors.push((v, beta));
        self.r.push(rcol);
        self.r_inv.push(inv);

        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        for (j, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            let s = *beta * v.rows(j, n - j).dot(&e.rows(j, n - j));
            e.rows_mut(j, n - j).axpy(-s, &v.rows(j, n - j), 1.0);
        }
        self.q.push(e);
        Ok(())
    }

    /// Thin `Q` column `k`.
    pub fn q_col(&self, k: usize) -> &DVector<f64> {
        &self.q[k]
    }

    /// `Q^T y` restricted to the current columns.
    pub fn qt_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.ncols(), self.q.iter().map(|q| q.dot(y)))
    }

    /// Least-squares coefficients `R^{-1} Q^T y`.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let z = self.qt_mul(y);
        self.r_inv_mul(&z)
    }

    pub fn r_inv_mul(&self, z: &DVector<f64>) -> DVector<f64> {
        let k = self.ncols();
        let mut c = DVector::zeros(k);
        for (j, col) in self.r_inv.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                c[i] += v * z[j];
            }
        }
        c
    }

    /// `y - Q Q^T y`.
    pub fn residual(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut r = y.clone();
        for q in &self.q {
            let s = q.dot(y);
            r.axpy(-s, q, 1.0);
        }
        r
    }

    /// Diagonal of the hat matrix `Q Q^T`.
    pub fn leverages(&self) -> DVector<f64> {
        let mut h = DVector::zeros(self.nrows);
        for q in &self.q {
            h.zip_apply(q, |hi, qi| *hi += qi * qi);
        }
        h
    }

    /// `1 - h_i` for every row. Rows with large leverage use
    /// `||e_i - Q Q^T e_i||^2`, which avoids cancellation near `h_i = 1`.
    pub fn leverage_complements(&self) -> DVector<f64> {
        let h = self.leverages();
        let mut out = h.map(|v| 1.0 - v);
        let mut v = DVector::zeros(self.nrows);
        for i in (0..self.nrows).filter(|&i| h[i] > 0.5) {
            v.fill(0.0);
            v[i] = 1.0;
            for q in &self.q {
                v.axpy(-q[i], q, 1.0);
            }
            out[i] = v.norm_squared();
        }
        out
    }

    /// `tr((A^T A)^{-1}) = ||R^{-1}||_F^2`.
    pub fn trace_inv_gram(&self) -> f64 {
        self.r_inv.iter().flatten().map(|v| v * v).sum()
    }

    /// `R^{-T} v`.
    pub fn r_inv_t_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.ncols(),
            self.r_inv
                .iter()
                .map(|col| col.iter().zip(v.iter()).map(|(a, b)| a * b).sum()),
        )
    }

    /// Diagonal of `(A^T A)^{-1}`.
    pub fn inv_gram_diag(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.ncols());
        for col in &self.r_inv {
            for (i, v) in col.iter().enumerate() {
                d[i] += v * v;
            }
        }
        d
    }

    pub fn r_diag(&self, k: usize) -> f64 {
        self.r[k][k]
    }
}

/// Least-squares fit on a column subset with the quantities needed for
/// cross-validation.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub residual: DVector<f64>,
    /// `1 - h_i`, accurate also for leverages close to one.
    pub leverage_complements: DVector<f64>,
    pub trace_inv_gram: f64,
}

impl OlsFit {
    pub fn from_qr(qr: &IncrementalQr, y: &DVector<f64>) -> Self {
        Self {
            coefficients: qr.solve(y),
            residual: qr.residual(y),
            leverage_complements: qr.leverage_complements(),
            trace_inv_gram: qr.trace_inv_gram(),
        }
    }
}

/// Least squares on the columns `active` of `a`.
pub fn ols(a: &DMatrix<f64>, y: &DVector<f64>, active: &[usize]) -> Result<DVector<f64>> {
    Ok(ols_fit(a, y, active)?.coefficients)
}

pub fn ols_fit(a: &DMatrix<f64>, y: &DVector<f64>, active: &[usize]) -> Result<OlsFit> {
    if y.len() != a.nrows() {
        return Err(PceError::DimensionMismatch {
            expected: a.nrows(),
            got: y.len(),
        });
    }
    let qr = IncrementalQr::from_columns(a, active)?;
    Ok(OlsFit::from_qr(&qr, y))
}

/// Submatrix made of the listed columns.
pub fn select_columns(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    a.select_columns(cols)
}

/// Submatrix made of the listed rows.
pub fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    a.select_rows(rows)
}

pub fn sample_variance(y: &DVector<f64>) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let m = y.mean();
    y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
}
