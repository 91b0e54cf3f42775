//! Rank and robustness tables.
//!
//! In `same-ed` mode the competitors are solvers, compared on identical
//! designs: a cell is one (model, sampler, N, replication). In `paired`
//! mode the competitors are samplers; their designs differ, so replications
//! are matched at random within each (model, solver, N) and the matching is
//! bootstrapped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::run::BenchRecord;

pub const ROBUSTNESS_FACTORS: [f64; 3] = [2.0, 5.0, 10.0];
pub const BOOTSTRAP_ROUNDS: usize = 4;
/// Label of the table pooled over all groups.
pub const POOLED: &str = "all";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SameEd,
    Paired,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::SameEd => "same-ed",
            Mode::Paired => "paired",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "same-ed" => Ok(Mode::SameEd),
            "paired" => Ok(Mode::Paired),
            other => Err(format!(
                "unknown mode '{other}', expected same-ed or paired"
            )),
        }
    }
}

/// Percentages for one subset of cells, each model weighted equally.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub cells: usize,
    /// `rank_percent[c][r]`: share of cells where `c` has rank `r + 1`.
    pub rank_percent: BTreeMap<String, Vec<f64>>,
    /// `robustness[c][k]`: share of cells where `c` is within factor
    /// `ROBUSTNESS_FACTORS[k]` of the best.
    pub robustness: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Sampler (same-ed) or solver (paired) the cells belong to, or `all`.
    pub group: String,
    pub all: Summary,
    pub small: Summary,
    pub large: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub model: String,
    pub sampler: String,
    pub solver: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub count: usize,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTables {
    pub mode: Mode,
    pub competitors: Vec<String>,
    pub robustness_factors: Vec<f64>,
    pub comparisons: Vec<Comparison>,
    pub medians: Vec<MedianRow>,
    pub excluded_cells: usize,
}

/// Linear-interpolation quantile of sorted values; infinite values sort last.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let pos = prob.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    if t == 0.0 || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + t * (sorted[hi] - sorted[lo])
    }
}

/// Errors with NaN mapped to infinity, sorted ascending.
pub fn sorted_errors(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values
        .into_iter()
        .map(|x| if x.is_nan() { f64::INFINITY } else { x })
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    quantile_sorted(&sorted_errors(values), 0.5)
}

/// Competition ranks: one plus the number of strictly smaller errors.
pub fn ranks(errors: &[f64]) -> Vec<usize> {
    let e: Vec<f64> = errors
        .iter()
        .map(|&x| if x.is_nan() { f64::INFINITY } else { x })
        .collect();
    e.iter()
        .map(|&x| 1 + e.iter().filter(|&&y| y < x).count())
        .collect()
}

/// Per-cell errors of every competitor, tagged with model, size and group.
struct Cell {
    model: String,
    n: usize,
    group: String,
    errors: Vec<f64>,
}

fn same_ed_cells(records: &[BenchRecord], competitors: &[String]) -> (Vec<Cell>, usize) {
    let mut by_cell: BTreeMap<(&str, &str, usize, usize), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in records {
        by_cell
            .entry((&r.model, &r.sampler, r.n, r.replication))
            .or_default()
            .insert(&r.solver, r.relmse);
    }
    let mut cells = Vec::new();
    let mut excluded = 0;
    for ((model, sampler, n, rep), errs) in by_cell {
        let row: Option<Vec<f64>> = competitors
            .iter()
            .map(|c| errs.get(c.as_str()).copied())
            .collect();
        match row {
            Some(errors) => cells.push(Cell {
                model: model.to_string(),
                n,
                group: sampler.to_string(),
                errors,
            }),
            None => {
                warn!("excluding incomplete cell {model}/{sampler}/N={n}/rep={rep}");
                excluded += 1;
            }
        }
    }
    (cells, excluded)
}

fn paired_cells(records: &[BenchRecord], competitors: &[String], seed: u64) -> (Vec<Cell>, usize) {
    type Key<'a> = (&'a str, &'a str, usize);
    let mut by_key: BTreeMap<Key, BTreeMap<&str, BTreeMap<usize, f64>>> = BTreeMap::new();
    for r in records {
        by_key
            .entry((&r.model, &r.solver, r.n))
            .or_default()
            .entry(&r.sampler)
            .or_default()
            .insert(r.replication, r.relmse);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::new();
    let mut excluded = 0;
    for ((model, solver, n), per_sampler) in by_key {
        let lists: Option<Vec<Vec<f64>>> = competitors
            .iter()
            .map(|c| {
                per_sampler
                    .get(c.as_str())
                    .map(|reps| reps.values().copied().collect())
            })
            .collect();
        let Some(mut lists) = lists else {
            warn!("excluding {model}/{solver}/N={n}: not every sampler has records");
            excluded += 1;
            continue;
        };
        let m = lists.iter().map(Vec::len).min().unwrap_or(0);
        if lists.iter().any(|l| l.len() != m) {
            warn!("{model}/{solver}/N={n}: unequal replication counts, pairing the first {m} of each permutation");
        }
        for _ in 0..BOOTSTRAP_ROUNDS {
            for l in lists.iter_mut() {
                l.shuffle(&mut rng);
            }
            for i in 0..m {
                cells.push(Cell {
                    model: model.to_string(),
                    n,
                    group: solver.to_string(),
                    errors: lists.iter().map(|l| l[i]).collect(),
                });
            }
        }
    }
    (cells, excluded)
}

fn summarize<'a>(cells: impl Iterator<Item = &'a Cell>, competitors: &[String]) -> Summary {
    let s = competitors.len();
    // per model: cell count, rank counts, robustness counts
    let mut per_model: BTreeMap<&str, (usize, Vec<Vec<usize>>, Vec<Vec<usize>>)> = BTreeMap::new();
    let mut total = 0;
    for cell in cells {
        total += 1;
        let entry = per_model.entry(&cell.model).or_insert_with(|| {
            (
                0,
                vec![vec![0; s]; s],
                vec![vec![0; ROBUSTNESS_FACTORS.len()]; s],
            )
        });
        entry.0 += 1;
        let r = ranks(&cell.errors);
        let best = cell
            .errors
            .iter()
            .copied()
            .filter(|x| !x.is_nan())
            .fold(f64::INFINITY, f64::min);
        for c in 0..s {
            entry.1[c][r[c] - 1] += 1;
            for (k, &f) in ROBUSTNESS_FACTORS.iter().enumerate() {
                if best.is_finite() && cell.errors[c] <= f * best {
                    entry.2[c][k] += 1;
                }
            }
        }
    }
    let mut out = Summary {
        cells: total,
        ..Default::default()
    };
    let n_models = per_model.len() as f64;
    for (c, name) in competitors.iter().enumerate() {
        let mut rank = vec![0.0; s];
        let mut rob = vec![0.0; ROBUSTNESS_FACTORS.len()];
        for (count, rc, bc) in per_model.values() {
            let w = 100.0 / (*count as f64 * n_models);
            for (acc, &v) in rank.iter_mut().zip(&rc[c]) {
                *acc += w * v as f64;
            }
            for (acc, &v) in rob.iter_mut().zip(&bc[c]) {
                *acc += w * v as f64;
            }
        }
        out.rank_percent.insert(name.clone(), rank);
        out.robustness.insert(name.clone(), rob);
    }
    out
}

/// ED sizes counted as small for each model: the first half of its sorted
/// sizes, rounded up.
pub fn small_sizes(records: &[BenchRecord]) -> BTreeMap<String, BTreeSet<usize>> {
    let mut sizes: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for r in records {
        sizes.entry(r.model.clone()).or_default().insert(r.n);
    }
    sizes
        .into_iter()
        .map(|(m, s)| {
            let k = s.len().div_ceil(2);
            (m, s.into_iter().take(k).collect())
        })
        .collect()
}

/// Median RelMSE per (model, sampler, solver, N).
pub fn medians(records: &[BenchRecord]) -> Vec<MedianRow> {
    let mut groups: BTreeMap<(&str, &str, &str, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((&r.model, &r.sampler, &r.solver, r.n))
            .or_default()
            .push(r.relmse);
    }
    groups
        .into_iter()
        .map(|((model, sampler, solver, n), v)| MedianRow {
            model: model.into(),
            sampler: sampler.into(),
            solver: solver.into(),
            n,
            count: v.len(),
            median: median(v),
        })
        .collect()
}

/// Rank and robustness tables for `records`. `seed` drives the random
/// matching of paired mode and is ignored in same-ED mode.
pub fn aggregate(records: &[BenchRecord], mode: Mode, seed: u64) -> AggregateTables {
    let competitors: Vec<String> = records
        .iter()
        .map(|r| match mode {
            Mode::SameEd => r.solver.clone(),
            Mode::Paired => r.sampler.clone(),
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let (cells, excluded_cells) = match mode {
        Mode::SameEd => same_ed_cells(records, &competitors),
        Mode::Paired => paired_cells(records, &competitors, seed),
    };
    let small = small_sizes(records);
    let is_small = |c: &Cell| small.get(&c.model).is_some_and(|s| s.contains(&c.n));

    let groups: BTreeSet<&str> = cells.iter().map(|c| c.group.as_str()).collect();
    let mut labels: Vec<Option<&str>> = groups.into_iter().map(Some).collect();
    labels.push(None);
    let comparisons = labels
        .into_iter()
        .map(|g| {
            let in_group = |c: &&Cell| g.is_none_or(|g| c.group == g);
            Comparison {
                group: g.unwrap_or(POOLED).to_string(),
                all: summarize(cells.iter().filter(in_group), &competitors),
                small: summarize(
                    cells.iter().filter(in_group).filter(|c| is_small(c)),
                    &competitors,
                ),
                large: summarize(
                    cells.iter().filter(in_group).filter(|c| !is_small(c)),
                    &competitors,
                ),
            }
        })
        .collect();
    AggregateTables {
        mode,
        competitors,
        robustness_factors: ROBUSTNESS_FACTORS.to_vec(),
        comparisons,
        medians: medians(records),
        excluded_cells,
    }
}

impl AggregateTables {
    pub fn pooled(&self) -> &Comparison {
        self.comparisons
            .last()
            .expect("pooled comparison is always present")
    }

    /// Plain-text rendering of the pooled table.
    pub fn to_text(&self) -> String {
        let mut s = format!("mode: {}\n", self.mode);
        for cmp in &self.comparisons {
            s.push_str(&format!("\n[{}] {} cells\n", cmp.group, cmp.all.cells));
            let width = self
                .competitors
                .iter()
                .map(String::len)
                .max()
                .unwrap_or(0)
                .max(10);
            s.push_str(&format!("{:width$}", "", width = width));
            for r in 1..=self.competitors.len() {
                s.push_str(&format!(" {:>7}", format!("rank{r}")));
            }
            for f in ROBUSTNESS_FACTORS {
                s.push_str(&format!(" {:>7}", format!("<={f}x")));
            }
            s.push('\n');
            for c in &self.competitors {
                s.push_str(&format!("{c:width$}", width = width));
                for v in &cmp.all.rank_percent[c] {
                    s.push_str(&format!(" {v:>7.1}"));
                }
                for v in &cmp.all.robustness[c] {
                    s.push_str(&format!(" {v:>7.1}"));
                }
                s.push('\n');
            }
        }
        s
    }
}
