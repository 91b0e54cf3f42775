//! Execution of the benchmark grid.

use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sparse_pce::design::{CandidatePool, Design, Sampler};
use sparse_pce::pce::SparsePceModel;
use sparse_pce::selection::relmse;
use sparse_pce::solvers::SolverId;

use crate::config::{BenchConfig, ConfigError, ResolvedModel};

/// Outcome of one solver on one experimental design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub model: String,
    pub sampler: String,
    pub solver: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub replication: usize,
    /// Validation RelMSE; infinite for failed runs.
    pub relmse: f64,
    pub n_active: usize,
    pub cv_error: f64,
    pub wall_ms: f64,
    /// Seed of the experimental design.
    pub seed: u64,
}

impl BenchRecord {
    pub fn is_error(&self) -> bool {
        !self.relmse.is_finite()
    }
}

/// Fingerprint of one generated design, shared by all solvers of the cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub model: String,
    pub sampler: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub checksum: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub records: Vec<BenchRecord>,
    pub designs: Vec<DesignRecord>,
    pub errors: Vec<String>,
}

/// Seed of the design for one grid cell: the first eight bytes of
/// SHA-256 over `"master|model|sampler|N|rep"`.
pub fn ed_seed(master: u64, model: &str, sampler: &str, n: usize, rep: usize) -> u64 {
    let digest = Sha256::digest(format!("{master}|{model}|{sampler}|{n}|{rep}").as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(head)
}

/// SHA-256 of the standardized points and weights.
pub fn design_checksum(design: &Design) -> String {
    let mut h = Sha256::new();
    for v in design.standard.iter() {
        h.update(v.to_le_bytes());
    }
    if let Some(w) = &design.weights {
        for v in w.iter() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct Cell<'a> {
    model: &'a ResolvedModel,
    sampler: &'a Sampler,
    sampler_name: String,
    n: usize,
    rep: usize,
}

struct CellOutput {
    records: Vec<BenchRecord>,
    design: Option<DesignRecord>,
    errors: Vec<String>,
}

fn draw_design(
    cell: &Cell,
    pool_size: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> sparse_pce::Result<Design> {
    let input = cell.model.model.input();
    let basis = &cell.model.basis;
    if cell.sampler.is_subset() {
        let pool = CandidatePool::build(cell.sampler.pool_sampler(), input, basis, pool_size, rng)?;
        cell.sampler.select(&pool.draw(rng), basis, cell.n, rng)
    } else {
        cell.sampler.sample(input, basis, cell.n, rng)
    }
}

fn run_cell(cfg: &BenchConfig, cell: &Cell, solvers: &[SolverId]) -> CellOutput {
    let name = cell.model.model.name();
    let seed = ed_seed(cfg.master_seed, name, &cell.sampler_name, cell.n, cell.rep);
    let tag = format!("{name}/{}/N={}/rep={}", cell.sampler_name, cell.n, cell.rep);
    let record = |solver: SolverId| BenchRecord {
        model: name.to_string(),
        sampler: cell.sampler_name.clone(),
        solver: solver.name().to_string(),
        n: cell.n,
        replication: cell.rep,
        relmse: f64::INFINITY,
        n_active: 0,
        cv_error: f64::NAN,
        wall_ms: 0.0,
        seed,
    };
    let fail_all = |msg: String| CellOutput {
        records: solvers.iter().map(|&s| record(s)).collect(),
        design: None,
        errors: vec![format!("{tag}: {msg}")],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = match draw_design(cell, cfg.pool_size, &mut rng) {
        Ok(d) => d,
        Err(e) => return fail_all(format!("design: {e}")),
    };
    let model = &cell.model.model;
    let y = match model.evaluate_batch(&design.physical) {
        Ok(y) => y,
        Err(e) => return fail_all(format!("model: {e}")),
    };
    let mut val_rng = ChaCha8Rng::seed_from_u64(seed);
    val_rng.set_stream(1);
    let x_val = model.input().sample_iid(cfg.validation_size, &mut val_rng);
    let y_val = match model.evaluate_batch(&x_val) {
        Ok(y) => y,
        Err(e) => return fail_all(format!("validation: {e}")),
    };

    let mut out = CellOutput {
        records: Vec::with_capacity(solvers.len()),
        design: Some(DesignRecord {
            model: name.to_string(),
            sampler: cell.sampler_name.clone(),
            n: cell.n,
            replication: cell.rep,
            seed,
            checksum: design_checksum(&design),
        }),
        errors: Vec::new(),
    };
    for &solver in solvers {
        let mut rec = record(solver);
        let start = Instant::now();
        let fitted = SparsePceModel::fit(
            model.input(),
            &cell.model.basis,
            &design,
            &y,
            solver,
            &cfg.selection,
        )
        .and_then(|pce| {
            let pred = pce.predict(&x_val)?;
            Ok((pce, relmse(y_val.as_slice(), pred.as_slice())?))
        });
        rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        match fitted {
            Ok((pce, err)) if err.is_finite() => {
                rec.relmse = err;
                rec.n_active = pce.n_active();
                rec.cv_error = pce.cv_error();
            }
            Ok(_) => out
                .errors
                .push(format!("{tag}/{solver}: non-finite validation error")),
            Err(e) => out.errors.push(format!("{tag}/{solver}: {e}")),
        }
        out.records.push(rec);
    }
    out
}

/// Runs every cell of the grid. Solver failures become error records and
/// do not stop the run; only configuration errors are returned as `Err`.
pub fn run(cfg: &BenchConfig) -> Result<RunOutput, ConfigError> {
    cfg.validate()?;
    let models = cfg.resolve_models()?;
    let samplers = cfg.parsed_samplers()?;
    let solvers = cfg.parsed_solvers()?;

    let mut cells = Vec::new();
    for m in &models {
        for s in &samplers {
            for &n in &m.ed_sizes {
                for rep in 0..cfg.replications {
                    cells.push(Cell {
                        model: m,
                        sampler: s,
                        sampler_name: s.name(),
                        n,
                        rep,
                    });
                }
            }
        }
    }
    info!("running {} cells x {} solvers", cells.len(), solvers.len());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    let results: Vec<CellOutput> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| run_cell(cfg, c, &solvers))
            .collect()
    });

    let mut out = RunOutput::default();
    for r in results {
        out.records.extend(r.records);
        out.designs.extend(r.design);
        out.errors.extend(r.errors);
    }
    for e in &out.errors {
        warn!("{e}");
    }
    Ok(out)
}
