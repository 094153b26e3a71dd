use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

/// Accuracy of one trained configuration on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub name: String,
    pub split_id: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    /// One entry per report column; `None` where the run is missing.
    pub accuracies: Vec<Option<f64>>,
    pub mean: Option<f64>,
    /// Population standard deviation over the present entries.
    pub std: Option<f64>,
    /// Summed over the present runs.
    pub confusion: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `(split_id, seed)` of each column.
    pub columns: Vec<(usize, u64)>,
    pub rows: Vec<ReportRow>,
    pub classes: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
}

/// Mean and population standard deviation.
pub fn population_stats(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, libm::sqrt(var)))
}

/// Aggregates runs into rows (in `row_names` order, then any unlisted names)
/// and columns (sorted `(split, seed)` pairs). Missing cells stay empty.
pub fn cross_split_report(runs: &[RunResult], row_names: &[&str], classes: &[String], config_hash: &str, seed: u64) -> MetricsReport {
    let mut columns: Vec<(usize, u64)> = runs.iter().map(|r| (r.split_id, r.seed)).collect();
    columns.sort_unstable();
    columns.dedup();
    let mut names: Vec<String> = row_names.iter().map(|s| String::from(*s)).collect();
    for r in runs {
        if !names.contains(&r.name) {
            names.push(r.name.clone());
        }
    }
    let rows = names
        .into_iter()
        .map(|name| {
            let accuracies: Vec<Option<f64>> = columns
                .iter()
                .map(|&(s, sd)| runs.iter().find(|r| r.name == name && r.split_id == s && r.seed == sd).map(|r| r.accuracy))
                .collect();
            let present: Vec<f64> = accuracies.iter().flatten().copied().collect();
            let stats = population_stats(&present);
            let mut confusion: Option<Vec<Vec<usize>>> = None;
            for r in runs.iter().filter(|r| r.name == name) {
                match confusion.as_mut() {
                    None => confusion = Some(r.confusion.clone()),
                    Some(c) => {
                        for (row, add) in c.iter_mut().zip(&r.confusion) {
                            for (x, y) in row.iter_mut().zip(add) {
                                *x += y;
                            }
                        }
                    }
                }
            }
            ReportRow { name, accuracies, mean: stats.map(|s| s.0), std: stats.map(|s| s.1), confusion }
        })
        .collect();
    MetricsReport { columns, rows, classes: classes.to_vec(), config_hash: config_hash.into(), seed }
}

impl MetricsReport {
    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Aligned plain-text table, accuracies in percent.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "method");
        for (s, sd) in &self.columns {
            let _ = write!(out, "  {:>12}", format!("split{s}/seed{sd}"));
        }
        let _ = writeln!(out, "  {:>15}", "mean ± std");
        for r in &self.rows {
            let _ = write!(out, "{:<width$}", r.name);
            for a in &r.accuracies {
                match a {
                    Some(a) => {
                        let _ = write!(out, "  {:>12.2}", a * 100.0);
                    }
                    None => {
                        let _ = write!(out, "  {:>12}", "-");
                    }
                }
            }
            match (r.mean, r.std) {
                (Some(m), Some(s)) => {
                    let _ = writeln!(out, "  {:>7.2} ± {:<5.2}", m * 100.0, s * 100.0);
                }
                _ => {
                    let _ = writeln!(out, "  {:>15}", "absent");
                }
            }
        }
        let _ = writeln!(out, "config {} seed {}", self.config_hash, self.seed);
        out
    }
}
