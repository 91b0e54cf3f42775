use serde::{Deserialize, Serialize, Serializer};
use std::collections::HashMap;

use crate::error::{PceError, Result};

/// Degree per input dimension.
pub type MultiIndex = Vec<u32>;

const QNORM_TOL: f64 = 1e-12;

/// Hyperbolic truncation `||alpha||_q <= p` with optional interaction limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub p: u32,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Maximal number of nonzero entries; `None` is unbounded.
    #[serde(default)]
    pub r: Option<usize>,
}

fn default_q() -> f64 {
    1.0
}

impl TruncationSpec {
    pub fn new(p: u32, q: f64, r: Option<usize>) -> Result<Self> {
        let spec = Self { p, q, r };
        spec.validate()?;
        Ok(spec)
    }

    pub fn total_degree(p: u32) -> Self {
        Self { p, q: 1.0, r: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(PceError::InvalidParameter(format!(
                "q must lie in (0, 1], got {}",
                self.q
            )));
        }
        if self.r == Some(0) {
            return Err(PceError::InvalidParameter(
                "interaction order must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn threshold(&self) -> f64 {
        (self.p as f64 + QNORM_TOL).powf(self.q)
    }

    pub fn admits(&self, alpha: &[u32]) -> bool {
        let nnz = alpha.iter().filter(|&&a| a != 0).count();
        if self.r.is_some_and(|r| nnz > r) {
            return false;
        }
        let s: f64 = alpha.iter().map(|&a| (a as f64).powf(self.q)).sum();
        s <= self.threshold()
    }
}

/// Ordered, duplicate-free set of multi-indices containing the zero index.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndexSet {
    d: usize,
    indices: Vec<MultiIndex>,
    spec: Option<TruncationSpec>,
}

impl Serialize for MultiIndexSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.indices.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MultiIndexSet {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let indices = Vec::<MultiIndex>::deserialize(deserializer)?;
        let d = indices.first().map_or(0, Vec::len);
        MultiIndexSet::from_indices(d, indices).map_err(serde::de::Error::custom)
    }
}

impl MultiIndexSet {
    /// Graded enumeration: by total degree, then first component descending.
    pub fn enumerate(d: usize, spec: TruncationSpec) -> Result<Self> {
        spec.validate()?;
        if d == 0 {
            return Err(PceError::InvalidParameter(
                "dimension must be at least 1".into(),
            ));
        }
        let thr = spec.threshold();
        let mut indices = Vec::new();
        let mut alpha = vec![0u32; d];
        for total in 0..=spec.p {
            fill(&spec, thr, &mut alpha, 0, total, 0.0, 0, &mut indices);
        }
        Ok(Self {
            d,
            indices,
            spec: Some(spec),
        })
    }

    /// Arbitrary set; the zero index must be present and entries unique.
    pub fn from_indices(d: usize, indices: Vec<MultiIndex>) -> Result<Self> {
        if d == 0 {
            return Err(PceError::InvalidParameter(
                "dimension must be at least 1".into(),
            ));
        }
        let mut seen = HashMap::with_capacity(indices.len());
        for (j, alpha) in indices.iter().enumerate() {
            if alpha.len() != d {
                return Err(PceError::DimensionMismatch {
                    expected: d,
                    got: alpha.len(),
                });
            }
            if seen.insert(alpha.clone(), j).is_some() {
                return Err(PceError::InvalidParameter(format!(
                    "duplicate index {alpha:?}"
                )));
            }
        }
        if !seen.contains_key(&vec![0; d]) {
            return Err(PceError::InvalidParameter("zero index missing".into()));
        }
        Ok(Self {
            d,
            indices,
            spec: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn spec(&self) -> Option<&TruncationSpec> {
        self.spec.as_ref()
    }

    pub fn contains(&self, alpha: &[u32]) -> bool {
        self.indices.iter().any(|a| a == alpha)
    }

    /// Largest degree used in each dimension.
    pub fn max_degrees(&self) -> Vec<usize> {
        let mut m = vec![0usize; self.d];
        for alpha in &self.indices {
            for (mk, &a) in m.iter_mut().zip(alpha) {
                *mk = (*mk).max(a as usize);
            }
        }
        m
    }

    pub fn max_total_degree(&self) -> u32 {
        self.indices
            .iter()
            .map(|a| a.iter().sum())
            .max()
            .unwrap_or(0)
    }
}

#[allow(clippy::too_many_arguments)]
fn fill(
    spec: &TruncationSpec,
    thr: f64,
    alpha: &mut [u32],
    pos: usize,
    remaining: u32,
    qsum: f64,
    nnz: usize,
    out: &mut Vec<MultiIndex>,
) {
    let d = alpha.len();
    if pos == d - 1 {
        let nnz_last = nnz + usize::from(remaining > 0);
        if spec.r.is_some_and(|r| nnz_last > r) {
            return;
        }
        if qsum + (remaining as f64).powf(spec.q) <= thr {
            alpha[pos] = remaining;
            out.push(alpha.to_vec());
            alpha[pos] = 0;
        }
        return;
    }
    for a in (0..=remaining).rev() {
        let s = qsum + (a as f64).powf(spec.q);
        let rest = remaining - a;
        // concentrating the rest in one entry minimizes its q-sum for q <= 1
        if s + (rest as f64).powf(spec.q) > thr {
            continue;
        }
        let k = nnz + usize::from(a > 0);
        if spec.r.is_some_and(|r| k + usize::from(rest > 0) > r) {
            continue;
        }
        alpha[pos] = a;
        fill(spec, thr, alpha, pos + 1, rest, s, k, out);
    }
    alpha[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    fn brute_force(d: usize, spec: TruncationSpec) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut alpha = vec![0u32; d];
        loop {
            if spec.admits(&alpha) {
                out.push(alpha.clone());
            }
            let mut k = 0;
            loop {
                if k == d {
                    return out;
                }
                alpha[k] += 1;
                if alpha[k] <= spec.p {
                    break;
                }
                alpha[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn total_degree_two_in_2d() {
        let set = MultiIndexSet::enumerate(2, TruncationSpec::total_degree(2)).unwrap();
        let expect: Vec<MultiIndex> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(set.indices(), &expect[..]);
    }

    #[test]
    fn hyperbolic_excludes_mixed_term() {
        let set = MultiIndexSet::enumerate(2, TruncationSpec::new(2, 0.5, None).unwrap()).unwrap();
        assert_eq!(set.len(), 5);
        assert!(!set.contains(&[1, 1]));
    }

    #[test]
    fn ishigami_basis_size() {
        let set = MultiIndexSet::enumerate(3, TruncationSpec::total_degree(14)).unwrap();
        assert_eq!(set.len(), 680);
    }

    #[test]
    fn boundary_index_kept_under_q_norm() {
        // (1,1) has q-norm exactly 4 for q = 1/2
        let spec = TruncationSpec::new(4, 0.5, None).unwrap();
        let set = MultiIndexSet::enumerate(2, spec).unwrap();
        assert!(set.contains(&[1, 1]));
        assert!(!set.contains(&[2, 1]));
    }

    #[test]
    fn interaction_order_limit() {
        let spec = TruncationSpec::new(3, 1.0, Some(1)).unwrap();
        let set = MultiIndexSet::enumerate(3, spec).unwrap();
        assert_eq!(set.len(), 1 + 3 * 3);
        assert!(set
            .indices()
            .iter()
            .all(|a| a.iter().filter(|&&x| x > 0).count() <= 1));
    }

    #[test]
    fn matches_brute_force_for_fractional_q() {
        for (d, p, q, r) in [(3, 5, 0.4, None), (4, 4, 0.75, Some(2)), (2, 7, 0.5, None)] {
            let spec = TruncationSpec::new(p, q, r).unwrap();
            let mut fast = MultiIndexSet::enumerate(d, spec)
                .unwrap()
                .indices()
                .to_vec();
            let mut slow = brute_force(d, spec);
            fast.sort();
            slow.sort();
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(TruncationSpec::new(3, 0.0, None).is_err());
        assert!(TruncationSpec::new(3, 1.5, None).is_err());
        assert!(TruncationSpec::new(3, 1.0, Some(0)).is_err());
    }

    #[test]
    fn json_array_of_arrays() {
        let set = MultiIndexSet::enumerate(2, TruncationSpec::total_degree(1)).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        assert_eq!(json, "[[0,0],[1,0],[0,1]]");
        let back: MultiIndexSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back.indices(), set.indices());
    }

    #[test]
    fn from_indices_requires_zero_and_uniqueness() {
        assert!(MultiIndexSet::from_indices(1, vec![vec![1]]).is_err());
        assert!(MultiIndexSet::from_indices(1, vec![vec![0], vec![0]]).is_err());
        assert!(MultiIndexSet::from_indices(1, vec![vec![0], vec![2]]).is_ok());
    }

    proptest! {
        #[test]
        fn total_degree_cardinality(d in 1usize..=8, p in 0u32..=8) {
            let set = MultiIndexSet::enumerate(d, TruncationSpec::total_degree(p)).unwrap();
            prop_assert_eq!(set.len() as u64, binomial(d as u64 + p as u64, p as u64));
        }

        #[test]
        fn q_and_p_monotone(d in 1usize..=4, p in 0u32..=6, q1 in 0.2..1.0f64, dq in 0.0..0.5f64) {
            let q2 = (q1 + dq).min(1.0);
            let small = MultiIndexSet::enumerate(d, TruncationSpec::new(p, q1, None).unwrap()).unwrap();
            let wide = MultiIndexSet::enumerate(d, TruncationSpec::new(p, q2, None).unwrap()).unwrap();
            let higher = MultiIndexSet::enumerate(d, TruncationSpec::new(p + 1, q1, None).unwrap()).unwrap();
            for a in small.indices() {
                prop_assert!(wide.contains(a));
                prop_assert!(higher.contains(a));
            }
        }

        #[test]
        fn every_index_admitted_and_unique(d in 1usize..=5, p in 0u32..=6, q in 0.3..=1.0f64, r in 1usize..=5) {
            let spec = TruncationSpec::new(p, q, Some(r)).unwrap();
            let set = MultiIndexSet::enumerate(d, spec).unwrap();
            prop_assert_eq!(&set.indices()[0], &vec![0u32; d]);
            let mut sorted = set.indices().to_vec();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), set.len());
            for a in set.indices() {
                prop_assert!(spec.admits(a));
            }
        }
    }
}
