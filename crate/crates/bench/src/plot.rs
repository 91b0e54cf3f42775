//! Static SVG charts: RelMSE boxplots and stacked rank bars.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::aggregate::{
    quantile_sorted, sorted_errors, AggregateTables, Comparison, ROBUSTNESS_FACTORS,
};
use crate::run::BenchRecord;

const PALETTE: [&str; 8] = [
    "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb", "#000000",
];
const FAILED_LOG10: f64 = 1.0;

/// Five-number summary of one box, on the raw RelMSE scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub solver: String,
    pub n: usize,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    pub fn from_values(solver: &str, n: usize, values: &[f64]) -> Self {
        let s = sorted_errors(values.iter().copied());
        Self {
            solver: solver.to_string(),
            n,
            count: s.len(),
            min: s[0],
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
            max: s[s.len() - 1],
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Box statistics for one (model, sampler), ordered by N then solver.
pub fn box_stats(records: &[BenchRecord], model: &str, sampler: &str) -> Vec<BoxStats> {
    let mut groups: BTreeMap<(usize, &str), Vec<f64>> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.model == model && r.sampler == sampler)
    {
        groups.entry((r.n, &r.solver)).or_default().push(r.relmse);
    }
    groups
        .into_iter()
        .map(|((n, solver), v)| BoxStats::from_values(solver, n, &v))
        .collect()
}

/// Boxplot of log10 RelMSE against N, one box per solver. Failed runs are
/// drawn at the top edge.
pub fn boxplot_svg(stats: &[BoxStats], title: &str) -> String {
    let sizes: Vec<usize> = stats
        .iter()
        .map(|b| b.n)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let solvers: Vec<&str> = stats
        .iter()
        .map(|b| b.solver.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let finite_logs = stats
        .iter()
        .flat_map(|b| [b.min, b.max])
        .filter(|v| v.is_finite() && *v > 0.0)
        .map(f64::log10);
    let (mut lo, mut hi) = finite_logs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        lo = -2.0;
        hi = 0.0;
    }
    lo = lo.floor();
    hi = hi.ceil().max(lo + 1.0);
    let has_failures = stats.iter().any(|b| !b.max.is_finite());
    if has_failures {
        hi = hi.max(FAILED_LOG10);
    }
    let zero_floor = lo;

    let box_w = 14.0;
    let group_w = box_w * (solvers.len() as f64 + 1.0);
    let (left, top, plot_h) = (70.0, 40.0, 300.0);
    let width = left + group_w * sizes.len().max(1) as f64 + 140.0;
    let height = top + plot_h + 60.0;
    let y_of = |v: f64| -> f64 {
        let l = if v.is_infinite() {
            hi
        } else if v <= 0.0 {
            zero_floor
        } else {
            v.log10()
        };
        top + plot_h * (hi - l) / (hi - lo)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20" font-size="13">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{:.1}" height="{plot_h}" fill="none" stroke="black"/>"#,
        group_w * sizes.len().max(1) as f64
    );
    let mut tick = lo;
    while tick <= hi + 1e-9 {
        let y = top + plot_h * (hi - tick) / (hi - lo);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" x2="{left}" y1="{y:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{tick:.0}</text>"#,
            left - 4.0,
            left - 6.0,
            y + 4.0
        );
        tick += 1.0;
    }
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" transform="rotate(-90 15 {:.1})" text-anchor="middle">RelMSE</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (g, n) in sizes.iter().enumerate() {
        let x0 = left + g as f64 * group_w;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">N={n}</text>"#,
            x0 + group_w / 2.0,
            top + plot_h + 18.0
        );
        for b in stats.iter().filter(|b| b.n == *n) {
            let k = solvers.iter().position(|&v| v == b.solver).unwrap_or(0);
            let color = PALETTE[k % PALETTE.len()];
            let cx = x0 + box_w * (k as f64 + 1.0);
            let (y1, ym, y3) = (y_of(b.q1), y_of(b.median), y_of(b.q3));
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.1}" x2="{cx:.1}" y1="{:.1}" y2="{:.1}" stroke="{color}"/>"#,
                y_of(b.min),
                y_of(b.max)
            );
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{y3:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.5" stroke="{color}"><title>{} N={} median={:e}</title></rect>"#,
                cx - box_w * 0.4,
                box_w * 0.8,
                (y1 - y3).max(0.5),
                escape(&b.solver),
                b.n,
                b.median
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" x2="{:.1}" y1="{ym:.1}" y2="{ym:.1}" stroke="black" stroke-width="2"/>"#,
                cx - box_w * 0.4,
                cx + box_w * 0.4
            );
        }
    }
    let lx = left + group_w * sizes.len().max(1) as f64 + 15.0;
    for (k, solver) in solvers.iter().enumerate() {
        let y = top + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{y:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            PALETTE[k % PALETTE.len()],
            lx + 14.0,
            y + 9.0,
            escape(solver)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Stacked bars of rank percentages, one bar per competitor, with
/// triangles marking the robustness percentages.
pub fn rank_chart_svg(competitors: &[String], cmp: &Comparison, title: &str) -> String {
    let summary = &cmp.all;
    let s_len = competitors.len();
    let bar_w = 36.0;
    let (left, top, plot_h) = (60.0, 40.0, 300.0);
    let width = left + (bar_w * 1.6) * s_len.max(1) as f64 + 150.0;
    let height = top + plot_h + 70.0;
    let y_of = |pct: f64| top + plot_h * (1.0 - pct / 100.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20" font-size="13">{} ({} cells)</text>"#,
        escape(title),
        summary.cells
    );
    for pct in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let y = y_of(pct);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" x2="{:.1}" y1="{y:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{pct:.0}%</text>"##,
            left + bar_w * 1.6 * s_len as f64,
            left - 6.0,
            y + 4.0
        );
    }
    for (c, name) in competitors.iter().enumerate() {
        let x = left + bar_w * (0.3 + 1.6 * c as f64);
        let mut acc = 0.0;
        for (r, pct) in summary.rank_percent[name].iter().enumerate() {
            let (ya, yb) = (y_of(acc + pct), y_of(acc));
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{ya:.1}" width="{bar_w}" height="{:.2}" fill="{}"><title>{} rank {}: {pct:.1}%</title></rect>"#,
                yb - ya,
                PALETTE[r % PALETTE.len()],
                escape(name),
                r + 1
            );
            acc += pct;
        }
        for (k, (f, pct)) in ROBUSTNESS_FACTORS
            .iter()
            .zip(&summary.robustness[name])
            .enumerate()
        {
            let y = y_of(*pct);
            let cx = x + bar_w + 2.0;
            let _ = writeln!(
                s,
                r#"<path d="M {cx:.1} {y:.1} l 5 -4 l 0 8 z" fill="black" fill-opacity="{:.2}"><title>{} within {f}x: {pct:.1}%</title></path>"#,
                0.3 + 0.35 * k as f64,
                escape(name)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" transform="rotate(-40 {:.1} {:.1})">{}</text>"#,
            x + bar_w / 2.0,
            top + plot_h + 14.0,
            x + bar_w / 2.0,
            top + plot_h + 14.0,
            escape(name)
        );
    }
    let lx = left + bar_w * 1.6 * s_len.max(1) as f64 + 20.0;
    for r in 0..s_len {
        let y = top + 16.0 * r as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{y:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">rank {}</text>"#,
            PALETTE[r % PALETTE.len()],
            lx + 14.0,
            y + 9.0,
            r + 1
        );
    }
    let y = top + 16.0 * s_len as f64 + 10.0;
    let factors: Vec<String> = ROBUSTNESS_FACTORS.iter().map(|f| format!("{f}x")).collect();
    let _ = writeln!(
        s,
        r#"<text x="{lx:.1}" y="{y:.1}">triangles: within {}</text>"#,
        factors.join("/")
    );
    s.push_str("</svg>\n");
    s
}

/// Writes one boxplot per (model, sampler) and one rank chart per
/// comparison group. Returns the written paths.
pub fn write_plots(
    dir: &Path,
    records: &[BenchRecord],
    tables: &AggregateTables,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    let pairs: BTreeSet<(&str, &str)> = records
        .iter()
        .map(|r| (r.model.as_str(), r.sampler.as_str()))
        .collect();
    for (model, sampler) in pairs {
        let stats = box_stats(records, model, sampler);
        write(
            format!("boxplot_{}_{}.svg", file_stem(model), file_stem(sampler)),
            boxplot_svg(&stats, &format!("{model} / {sampler}")),
        )?;
    }
    for cmp in &tables.comparisons {
        write(
            format!("ranks_{}_{}.svg", tables.mode, file_stem(&cmp.group)),
            rank_chart_svg(
                &tables.competitors,
                cmp,
                &format!("{} ranks: {}", tables.mode, cmp.group),
            ),
        )?;
    }
    Ok(written)
}
