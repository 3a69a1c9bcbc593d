use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{ExperimentError, Result};
use crate::sweep::{read_rows, summarize};

/// Mean throughput of one (scheme, axis value) cell across several result files.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scheme: String,
    pub axis_value: f64,
    /// One entry per file; `None` when the file lacks the cell.
    pub means: Vec<Option<f64>>,
}

impl ComparisonRow {
    /// Largest relative spread among the files that have the cell.
    pub fn spread(&self) -> f64 {
        let present: Vec<f64> = self.means.iter().flatten().copied().collect();
        let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
        if present.len() < 2 || hi <= 0.0 {
            0.0
        } else {
            (hi - lo) / hi
        }
    }
}

pub fn compare_files(paths: &[PathBuf]) -> Result<Vec<ComparisonRow>> {
    if paths.is_empty() {
        return Err(ExperimentError::Spec("no result files given".into()));
    }
    let mut cells: BTreeMap<(String, u64), Vec<Option<f64>>> = BTreeMap::new();
    let mut order = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        for s in summarize(&read_rows(p)?) {
            let key = (s.scheme.clone(), s.axis_value.to_bits());
            let entry = cells.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                vec![None; paths.len()]
            });
            entry[i] = Some(s.throughput_mean);
        }
    }
    Ok(order
        .into_iter()
        .map(|key| ComparisonRow {
            axis_value: f64::from_bits(key.1),
            means: cells[&key].clone(),
            scheme: key.0,
        })
        .collect())
}

pub fn render(paths: &[PathBuf], rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<18} {:>10}", "scheme", "axis");
    for (i, _) in paths.iter().enumerate() {
        let _ = write!(out, " {:>12}", format!("file{i}"));
    }
    let _ = writeln!(out, " {:>9}", "spread");
    for r in rows {
        let _ = write!(out, "{:<18} {:>10.3}", r.scheme, r.axis_value);
        for m in &r.means {
            match m {
                Some(x) => {
                    let _ = write!(out, " {x:>12.6}");
                }
                None => {
                    let _ = write!(out, " {:>12}", "-");
                }
            }
        }
        let _ = writeln!(out, " {:>8.3}%", 100.0 * r.spread());
    }
    for (i, p) in paths.iter().enumerate() {
        let _ = writeln!(out, "file{i}: {}", p.display());
    }
    out
}
