//! Benchmark configuration, read from TOML.
//!
//! ```toml
//! master_seed = 1
//! replications = 10
//! validation_size = 10000
//! samplers = ["lhs", "coh-opt", "dopt(coh-opt)"]
//! solvers = ["omp", "sp_loo"]
//!
//! [[models]]
//! name = "ishigami"
//! ed_sizes = [70, 100, 150, 200]
//!
//! [[models]]
//! name = "my-model"
//! ed_sizes = [20, 40]
//! degree = 3
//! external = { command = "python3", args = ["model.py"] }
//! inputs = [{ family = "uniform", params = [0.0, 1.0] }]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparse_pce::basis::{MultiIndexSet, PolyBasis, TruncationSpec};
use sparse_pce::design::Sampler;
use sparse_pce::inputs::{InputModel, Marginal};
use sparse_pce::models::{registry, BenchmarkModel, ExternalModel, ModelDefaults};
use sparse_pce::solvers::{SelectionSpec, SolverId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn default_validation_size() -> usize {
    10_000
}

fn default_replications() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
}

/// One model of the grid and its design sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub ed_sizes: Vec<usize>,
    /// Use the model's reduced-degree preset.
    #[serde(default)]
    pub small_basis: bool,
    /// Overrides the preset degree.
    pub degree: Option<u32>,
    /// Overrides the preset q-norm.
    pub q_norm: Option<f64>,
    /// Maximal interaction order.
    pub interaction: Option<usize>,
    /// Evaluate an external program instead of a built-in model.
    pub external: Option<ExternalSpec>,
    /// Marginals of an external model, in dimension order.
    pub inputs: Option<Vec<Marginal>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub models: Vec<ModelEntry>,
    pub samplers: Vec<String>,
    pub solvers: Vec<String>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_validation_size")]
    pub validation_size: usize,
    /// Draw size `M` of candidate pools; `10 P` when absent.
    pub pool_size: Option<usize>,
    /// Worker threads; all cores when absent.
    pub jobs: Option<usize>,
    #[serde(default)]
    pub selection: SelectionSpec,
}

/// A model ready to run: evaluator plus candidate basis.
#[derive(Debug, Clone)]
pub struct ResolvedModel {
    pub model: BenchmarkModel,
    pub basis: PolyBasis,
    pub ed_sizes: Vec<usize>,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.replications == 0 {
            return invalid("replications must be at least 1".into());
        }
        if self.validation_size < 2 {
            return invalid("validation_size must be at least 2".into());
        }
        if self.jobs == Some(0) {
            return invalid("jobs must be at least 1".into());
        }
        if self.models.is_empty() || self.samplers.is_empty() || self.solvers.is_empty() {
            return invalid("models, samplers and solvers must all be non-empty".into());
        }
        for m in &self.models {
            if m.ed_sizes.is_empty() {
                return invalid(format!("model '{}' has no ED sizes", m.name));
            }
            if m.ed_sizes.windows(2).any(|w| w[0] >= w[1]) {
                return invalid(format!(
                    "ED sizes of model '{}' must be strictly increasing",
                    m.name
                ));
            }
            if m.ed_sizes[0] < 2 {
                return invalid(format!("ED sizes of model '{}' must be at least 2", m.name));
            }
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return invalid("model names must be unique".into());
        }
        self.parsed_samplers()?;
        self.parsed_solvers()?;
        self.resolve_models()?;
        Ok(())
    }

    pub fn parsed_samplers(&self) -> Result<Vec<Sampler>, ConfigError> {
        self.samplers
            .iter()
            .map(|s| Sampler::parse(s).map_err(|e| ConfigError::Invalid(e.to_string())))
            .collect()
    }

    pub fn parsed_solvers(&self) -> Result<Vec<SolverId>, ConfigError> {
        self.solvers
            .iter()
            .map(|s| {
                s.parse::<SolverId>()
                    .map_err(|e| ConfigError::Invalid(e.to_string()))
            })
            .collect()
    }

    pub fn resolve_models(&self) -> Result<Vec<ResolvedModel>, ConfigError> {
        let reg = registry();
        let err = |e: sparse_pce::PceError| ConfigError::Invalid(e.to_string());
        self.models
            .iter()
            .map(|entry| {
                let model = match (&entry.external, reg.get(&entry.name)) {
                    (Some(ext), _) => {
                        let inputs = entry.inputs.clone().ok_or_else(|| {
                            ConfigError::Invalid(format!(
                                "external model '{}' needs inputs",
                                entry.name
                            ))
                        })?;
                        let degree = entry.degree.ok_or_else(|| {
                            ConfigError::Invalid(format!(
                                "external model '{}' needs a degree",
                                entry.name
                            ))
                        })?;
                        let defaults = ModelDefaults {
                            p: degree,
                            q: entry.q_norm.unwrap_or(1.0),
                            n_max: *entry.ed_sizes.last().expect("validated"),
                            small_p: None,
                        };
                        let args: Vec<&str> = ext.args.iter().map(String::as_str).collect();
                        BenchmarkModel::external(
                            &entry.name,
                            InputModel::new(inputs).map_err(err)?,
                            defaults,
                            ExternalModel::new(&ext.command, &args),
                        )
                    }
                    (None, Some(m)) => {
                        if entry.inputs.is_some() {
                            return Err(ConfigError::Invalid(format!(
                                "built-in model '{}' does not take inputs",
                                entry.name
                            )));
                        }
                        m.clone()
                    }
                    (None, None) => {
                        return Err(ConfigError::Invalid(format!(
                            "unknown model '{}' (built-in: {})",
                            entry.name,
                            reg.names().join(", ")
                        )))
                    }
                };
                let preset = model.truncation(entry.small_basis).map_err(err)?;
                let spec = TruncationSpec::new(
                    entry.degree.unwrap_or(preset.p),
                    entry.q_norm.unwrap_or(preset.q),
                    entry.interaction.or(preset.r),
                )
                .map_err(err)?;
                let set = MultiIndexSet::enumerate(model.dim(), spec).map_err(err)?;
                let basis = PolyBasis::new(model.input().families(), set).map_err(err)?;
                Ok(ResolvedModel {
                    model,
                    basis,
                    ed_sizes: entry.ed_sizes.clone(),
                })
            })
            .collect()
    }
}
