use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use pce_bench::aggregate::{aggregate, Mode};
use pce_bench::config::BenchConfig;
use pce_bench::output::{self, load_records, write_aggregates, write_run};
use pce_bench::plot::write_plots;

#[derive(Parser)]
#[command(
    name = "bench",
    version,
    about = "Sparse PCE solver and sampler benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the grid described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (overrides the config).
        #[arg(long)]
        jobs: Option<usize>,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print rank and robustness tables for a records file.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "same-ed")]
        mode: Mode,
        /// Seed of the random pairing in paired mode.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the tables as JSON to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Render SVG charts for a records file.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output directory; defaults to the directory of the records file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "same-ed")]
        mode: Mode,
    },
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            jobs,
            seed,
        } => {
            let mut cfg = BenchConfig::load(&config)?;
            if let Some(j) = jobs {
                cfg.jobs = Some(j);
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let result = pce_bench::run(&cfg)?;
            write_run(&out, &result)?;
            let tables = aggregate(&result.records, Mode::SameEd, cfg.master_seed);
            write_aggregates(&out, &tables)?;
            write_plots(&out, &result.records, &tables)?;
            info!(
                "{} records ({} failed) written to {}",
                result.records.len(),
                result.records.iter().filter(|r| r.is_error()).count(),
                out.join(output::RECORDS_FILE).display()
            );
            print!("{}", tables.to_text());
        }
        Command::Aggregate {
            input,
            mode,
            seed,
            json,
        } => {
            let records = load_records(&input)?;
            let tables = aggregate(&records, mode, seed);
            if let Some(path) = json {
                let f = std::fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                serde_json::to_writer_pretty(f, &tables)?;
            }
            print!("{}", tables.to_text());
        }
        Command::Plot { input, out, mode } => {
            let records = load_records(&input)?;
            let tables = aggregate(&records, mode, 0);
            let dir = out.unwrap_or_else(|| parent_dir(&input));
            for p in write_plots(&dir, &records, &tables)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
