use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Univariate orthonormal polynomial family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyFamily {
    /// Orthonormal w.r.t. the uniform probability measure on `[-1, 1]`.
    Legendre,
    /// Probabilists' Hermite, orthonormal w.r.t. the standard normal.
    Hermite,
}

impl PolyFamily {
    /// Off-diagonal coefficient `b_n` of the orthonormal recurrence
    /// `b_{n+1} psi_{n+1} = u psi_n - b_n psi_{n-1}`.
    #[inline]
    fn b(self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        match self {
            PolyFamily::Legendre => n / (4.0 * n * n - 1.0).sqrt(),
            PolyFamily::Hermite => n.sqrt(),
        }
    }

    /// Value of the degree-`k` orthonormal polynomial at `u`.
    pub fn eval(self, k: usize, u: f64) -> f64 {
        let mut prev = 0.0;
        let mut cur = 1.0;
        for n in 0..k {
            let next = (u * cur - self.b(n) * prev) / self.b(n + 1);
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Fills `out[k]` with the degree-`k` value for `k < out.len()`.
    pub fn eval_all(self, u: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() > 1 {
            out[1] = u / self.b(1);
        }
        for n in 1..out.len().saturating_sub(1) {
            out[n + 1] = (u * out[n] - self.b(n) * out[n - 1]) / self.b(n + 1);
        }
    }

    /// `sup |psi_k|` over the standardized domain, when finite.
    pub fn sup_abs(self, k: usize) -> Option<f64> {
        match self {
            PolyFamily::Legendre => Some((2.0 * k as f64 + 1.0).sqrt()),
            PolyFamily::Hermite => (k == 0).then_some(1.0),
        }
    }
}

/// Gauss quadrature with `n` nodes for the family's probability measure
/// (Golub-Welsch). Weights sum to one.
pub fn gauss_quadrature(family: PolyFamily, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut jacobi = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = family.b(i);
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| (eig.eigenvalues[j], eig.eigenvectors[(0, j)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
