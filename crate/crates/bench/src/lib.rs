//! Benchmark harness for sparse PCE samplers and solvers.
//!
//! Runs a grid of (model, sampler, solver, ED size, replication) cells with
//! shared experimental designs, then ranks solvers or samplers per cell and
//! renders the results as CSV, JSON and SVG.

pub mod aggregate;
pub mod config;
pub mod output;
pub mod plot;
pub mod run;

pub use aggregate::{aggregate, AggregateTables, Mode};
pub use config::BenchConfig;
pub use run::{ed_seed, run, BenchRecord, RunOutput};
