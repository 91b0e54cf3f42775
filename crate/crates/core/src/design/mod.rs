//! Experimental designs: random samplers, subset selection from candidate
//! pools, and regression-matrix criteria.

mod cohopt;
pub mod criteria;
mod sampling;
mod subset;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::basis::PolyBasis;
use crate::error::{PceError, Result};
use crate::inputs::InputModel;

pub use cohopt::{coherence_optimal_design, CohOptSampler};
pub use criteria::{avg_cross_correlation, d_value, mutual_coherence, s_value};
pub use sampling::{
    asymptotic_design, lhs_maximin, maximin_distance, mc_design, DEFAULT_LHS_TRIES,
};
pub use subset::{d_optimal_rrqr, near_optimal_greedy, CandidatePool, POOL_FACTOR};

/// Where a design came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sampler: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(sampler: &str, params: serde_json::Value) -> Self {
        Self {
            sampler: sampler.to_string(),
            params,
            seed: None,
        }
    }
}

/// `N` points in physical and standardized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub physical: DMatrix<f64>,
    pub standard: DMatrix<f64>,
    pub weights: Option<DVector<f64>>,
    pub provenance: Provenance,
}

impl Design {
    pub fn from_standard(
        input: &InputModel,
        standard: DMatrix<f64>,
        weights: Option<DVector<f64>>,
        provenance: Provenance,
    ) -> Result<Self> {
        let physical = input.from_standard_matrix(&standard)?;
        Ok(Self {
            physical,
            standard,
            weights,
            provenance,
        })
    }

    pub fn from_physical(
        input: &InputModel,
        physical: DMatrix<f64>,
        weights: Option<DVector<f64>>,
        provenance: Provenance,
    ) -> Result<Self> {
        let standard = input.to_standard_matrix(&physical)?;
        Ok(Self {
            physical,
            standard,
            weights,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.physical.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.physical.ncols()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Rows `rows` in the given order; weights carried over unchanged.
    pub fn subset(&self, rows: &[usize], provenance: Provenance) -> Design {
        Design {
            physical: self.physical.select_rows(rows),
            standard: self.standard.select_rows(rows),
            weights: self
                .weights
                .as_ref()
                .map(|w| DVector::from_iterator(rows.len(), rows.iter().map(|&i| w[i]))),
            provenance,
        }
    }

    /// Regression matrix `Psi` (unweighted) at the design points.
    pub fn regression_matrix(&self, basis: &PolyBasis) -> Result<DMatrix<f64>> {
        basis.assemble(&self.standard)
    }

    /// `W Psi`, or `Psi` for unweighted designs.
    pub fn weighted_matrix(&self, basis: &PolyBasis) -> Result<DMatrix<f64>> {
        let mut psi = self.regression_matrix(basis)?;
        if let Some(w) = &self.weights {
            for (i, mut row) in psi.row_iter_mut().enumerate() {
                row *= w[i];
            }
        }
        Ok(psi)
    }

    /// CSV with columns `dim_0..dim_{d-1}` (physical) and `weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.dim();
        let header: Vec<String> = (0..d)
            .map(|k| format!("dim_{k}"))
            .chain(["weight".into()])
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut fields: Vec<String> = (0..d)
                .map(|k| format!("{:?}", self.physical[(i, k)]))
                .collect();
            fields.push(format!("{:?}", self.weights.as_ref().map_or(1.0, |w| w[i])));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn provenance_json(&self) -> String {
        serde_json::to_string_pretty(&self.provenance).expect("provenance is plain data")
    }
}

/// Sampling scheme selectable from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sampler {
    Mc,
    Lhs {
        #[serde(default = "default_lhs_tries")]
        n_tries: usize,
    },
    Asymptotic,
    CohOpt,
    /// D-optimal subset of a pool drawn by `base`.
    DOpt {
        base: Box<Sampler>,
    },
    /// Near-optimal subset of a pool drawn by `base`.
    NearOpt {
        base: Box<Sampler>,
    },
}

fn default_lhs_tries() -> usize {
    DEFAULT_LHS_TRIES
}

impl Sampler {
    /// Short name such as `lhs` or `dopt(coh-opt)`.
    pub fn name(&self) -> String {
        match self {
            Sampler::Mc => "mc".into(),
            Sampler::Lhs { .. } => "lhs".into(),
            Sampler::Asymptotic => "asymptotic".into(),
            Sampler::CohOpt => "coh-opt".into(),
            Sampler::DOpt { base } => format!("dopt({})", base.name()),
            Sampler::NearOpt { base } => format!("nearopt({})", base.name()),
        }
    }

    /// Parses names produced by [`Sampler::name`].
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let inner = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
        };
        if let Some(b) = inner("dopt") {
            return Ok(Sampler::DOpt {
                base: Box::new(Sampler::parse(b)?),
            });
        }
        if let Some(b) = inner("nearopt") {
            return Ok(Sampler::NearOpt {
                base: Box::new(Sampler::parse(b)?),
            });
        }
        match s {
            "mc" => Ok(Sampler::Mc),
            "lhs" => Ok(Sampler::Lhs {
                n_tries: DEFAULT_LHS_TRIES,
            }),
            "asymptotic" => Ok(Sampler::Asymptotic),
            "coh-opt" | "cohopt" => Ok(Sampler::CohOpt),
            other => Err(PceError::InvalidParameter(format!(
                "unknown sampler '{other}'"
            ))),
        }
    }

    pub fn is_subset(&self) -> bool {
        matches!(self, Sampler::DOpt { .. } | Sampler::NearOpt { .. })
    }

    /// Draws a design of `n` points directly (no candidate pool).
    pub fn sample<R: Rng + ?Sized>(
        &self,
        input: &InputModel,
        basis: &PolyBasis,
        n: usize,
        rng: &mut R,
    ) -> Result<Design> {
        match self {
            Sampler::Mc => mc_design(input, n, rng),
            Sampler::Lhs { n_tries } => lhs_maximin(input, n, *n_tries, rng),
            Sampler::Asymptotic => {
                asymptotic_design(input, basis.index_set().max_total_degree(), n, rng)
            }
            Sampler::CohOpt => CohOptSampler::new(input, basis)?.sample(n, rng),
            Sampler::DOpt { .. } | Sampler::NearOpt { .. } => {
                let pool = CandidatePool::build(self.base(), input, basis, None, rng)?;
                self.select(&pool.draw(rng), basis, n, rng)
            }
        }
    }

    fn base(&self) -> &Sampler {
        match self {
            Sampler::DOpt { base } | Sampler::NearOpt { base } => base,
            other => other,
        }
    }

    /// Pool-generating sampler for subset schemes, `self` otherwise.
    pub fn pool_sampler(&self) -> &Sampler {
        self.base()
    }

    /// Applies the subset rule to a candidate draw.
    pub fn select<R: Rng + ?Sized>(
        &self,
        candidates: &Design,
        basis: &PolyBasis,
        n: usize,
        rng: &mut R,
    ) -> Result<Design> {
        let psi = candidates.weighted_matrix(basis)?;
        let rows = match self {
            Sampler::DOpt { .. } => d_optimal_rrqr(&psi, n, true)?,
            Sampler::NearOpt { .. } => near_optimal_greedy(&psi, n, rng)?,
            other => {
                return Err(PceError::InvalidParameter(format!(
                    "sampler {} does not select subsets",
                    other.name()
                )))
            }
        };
        let mut prov = candidates.provenance.clone();
        prov.sampler = self.name();
        prov.params = serde_json::json!({ "n": n, "candidates": candidates.len() });
        Ok(candidates.subset(&rows, prov))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inputs::Marginal;

    #[test]
    fn sampler_names_round_trip() {
        for s in [
            "mc",
            "lhs",
            "asymptotic",
            "coh-opt",
            "dopt(coh-opt)",
            "nearopt(lhs)",
        ] {
            assert_eq!(Sampler::parse(s).unwrap().name(), s);
        }
        assert!(Sampler::parse("sobol").is_err());
    }

    #[test]
    fn csv_export() {
        let input = InputModel::iid(Marginal::uniform(0.0, 2.0).unwrap(), 2).unwrap();
        let u = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.5]);
        let d = Design::from_standard(
            &input,
            u,
            None,
            Provenance::new("mc", serde_json::Value::Null),
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "dim_0,dim_1,weight\n1.0,2.0,1.0\n0.0,1.5,1.0\n");
        assert!(d.provenance_json().contains("\"sampler\": \"mc\""));
    }

    #[test]
    fn subset_inherits_weights() {
        let input = InputModel::iid(Marginal::uniform(-1.0, 1.0).unwrap(), 1).unwrap();
        let u = DMatrix::from_column_slice(3, 1, &[0.1, 0.2, 0.3]);
        let w = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let d = Design::from_standard(
            &input,
            u,
            Some(w),
            Provenance::new("x", serde_json::Value::Null),
        )
        .unwrap();
        let s = d.subset(&[2, 0], d.provenance.clone());
        assert_eq!(s.weights.unwrap().as_slice(), &[3.0, 1.0]);
        assert_eq!(s.standard[(0, 0)], 0.3);
    }
}
