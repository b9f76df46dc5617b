//! Accuracy and timing comparison of several runs against one baseline.

use std::fmt::Write as _;

use smc_core::{metrics, Metrics};

use crate::error::{Error, Result};
use crate::experiment::{Surface, Timings};
use crate::simulation::Baseline;

/// One method's surface and timings.
#[derive(Debug, Clone)]
pub struct NamedRun {
    pub name: String,
    pub surface: Surface,
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub name: String,
    pub metrics: Metrics,
    pub timings: Timings,
}

const GRID_TOLERANCE: f64 = 1e-9;

/// Metrics of every run against `baseline` over the points where the
/// baseline exceeds `threshold`.
pub fn compare_report(runs: &[NamedRun], baseline: &Baseline, threshold: f64) -> Result<Vec<ComparisonRow>> {
    if runs.is_empty() {
        return Err(Error::Config("no reports to compare".into()));
    }
    runs.iter()
        .map(|r| {
            let same_grid = r.surface.points.len() == baseline.points.len()
                && r
                    .surface
                    .points
                    .iter()
                    .zip(&baseline.points)
                    .all(|(a, b)| {
                        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= GRID_TOLERANCE)
                    });
            if !same_grid {
                return Err(Error::Config(format!(
                    "surface of `{}` is not on the baseline grid",
                    r.name
                )));
            }
            let m = metrics(&r.surface.mean, &baseline.estimate, threshold)?;
            Ok(ComparisonRow {
                name: r.name.clone(),
                metrics: m,
                timings: r.timings,
            })
        })
        .collect()
}

const COLUMNS: [&str; 9] = [
    "method", "error_mean", "error_std", "error_max", "rmse", "ssa_s", "inference_s", "query_s", "total_s",
];

fn fields(r: &ComparisonRow) -> [String; 9] {
    let m = &r.metrics;
    let t = &r.timings;
    [
        r.name.clone(),
        format!("{:.4}", m.error_mean),
        format!("{:.4}", m.error_std),
        format!("{:.4}", m.error_max),
        format!("{:.4}", m.rmse),
        format!("{:.2}", t.simulation),
        format!("{:.2}", t.inference),
        format!("{:.2}", t.query),
        format!("{:.2}", t.total),
    ]
}

/// Aligned plain-text table.
pub fn format_table(rows: &[ComparisonRow]) -> String {
    let cells: Vec<[String; 9]> = rows.iter().map(fields).collect();
    let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[String]| {
        for (i, (c, w)) in row.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(&mut out, &COLUMNS.map(String::from));
    for row in &cells {
        line(&mut out, row);
    }
    out
}

/// CSV with full-precision values.
pub fn format_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Runtime(e.to_string());
    w.write_record(COLUMNS).map_err(err)?;
    for r in rows {
        let m = &r.metrics;
        let t = &r.timings;
        w.write_record([
            r.name.clone(),
            m.error_mean.to_string(),
            m.error_std.to_string(),
            m.error_max.to_string(),
            m.rmse.to_string(),
            t.simulation.to_string(),
            t.inference.to_string(),
            t.query.to_string(),
            t.total.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Runtime(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
