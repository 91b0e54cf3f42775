//! Files written by a benchmark run.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::aggregate::AggregateTables;
use crate::run::{BenchRecord, DesignRecord, RunOutput};

pub const RECORDS_FILE: &str = "records.csv";
pub const DESIGNS_FILE: &str = "designs.csv";
pub const ERRORS_FILE: &str = "errors.log";
pub const AGGREGATES_FILE: &str = "aggregates.json";

const RECORD_HEADER: [&str; 10] = [
    "model",
    "sampler",
    "solver",
    "N",
    "replication",
    "relmse",
    "n_active",
    "cv_error",
    "wall_ms",
    "seed",
];

/// Writes records as CSV. The header is written even without records.
pub fn write_records<W: Write>(out: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != RECORD_HEADER {
        anyhow::bail!("unexpected records header: {}", header.join(","));
    }
    rd.deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("record {}", i + 1)))
        .collect()
}

pub fn load_records(path: &Path) -> Result<Vec<BenchRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_records(f).with_context(|| format!("reading {}", path.display()))
}

pub fn write_designs<W: Write>(out: W, designs: &[DesignRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for d in designs {
        w.serialize(d)?;
    }
    w.flush()?;
    Ok(())
}

/// SHA-256 of the records CSV with the timing column removed.
pub fn records_digest(records: &[BenchRecord]) -> String {
    let timeless: Vec<BenchRecord> = records
        .iter()
        .map(|r| BenchRecord {
            wall_ms: 0.0,
            ..r.clone()
        })
        .collect();
    let mut buf = Vec::new();
    write_records(&mut buf, &timeless).expect("writing to memory");
    Sha256::digest(&buf)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_aggregates(dir: &Path, tables: &AggregateTables) -> Result<()> {
    let mut f = create(dir, AGGREGATES_FILE)?;
    serde_json::to_writer_pretty(&mut f, tables)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// Writes records, design checksums and the error log into `dir`.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_records(create(dir, RECORDS_FILE)?, &run.records)?;
    write_designs(create(dir, DESIGNS_FILE)?, &run.designs)?;
    let mut log = create(dir, ERRORS_FILE)?;
    for e in &run.errors {
        writeln!(log, "{e}")?;
    }
    log.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_records_give_header_only() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "model,sampler,solver,N,replication,relmse,n_active,cv_error,wall_ms,seed\n"
        );
        assert!(read_records(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_records(&b"a,b\n1,2\n"[..]).is_err());
    }
}
