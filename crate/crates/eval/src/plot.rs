//! Plot-ready growth curves: one column per run, their pointwise mean, and
//! the 1 + m·t upper bound.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::expand::GrowthRow;
use crate::EvalError;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub iteration: u32,
    /// One value per run, in `run_ids` order.
    pub values: Vec<usize>,
    pub mean: f64,
    pub upper_bound: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub language: String,
    pub run_ids: Vec<String>,
    pub rows: Vec<CurveRow>,
}

/// Builds one table per language, from iteration 0 (the start word alone)
/// to the longest run. A run that stopped early keeps its last size.
pub fn curve_tables(rows: &[GrowthRow], max_candidates: usize) -> Vec<CurveTable> {
    let mut by_language: BTreeMap<&str, BTreeMap<&str, BTreeMap<u32, usize>>> = BTreeMap::new();
    for r in rows {
        by_language
            .entry(&r.language)
            .or_default()
            .entry(&r.run_id)
            .or_default()
            .insert(r.iteration, r.vocab_size);
    }
    by_language
        .into_iter()
        .map(|(language, runs)| {
            let last = runs
                .values()
                .filter_map(|c| c.keys().next_back().copied())
                .max()
                .unwrap_or(0);
            let mut current: Vec<usize> = vec![1; runs.len()];
            let curves: Vec<&BTreeMap<u32, usize>> = runs.values().collect();
            let mut table_rows = Vec::with_capacity(last as usize + 1);
            for t in 0..=last {
                for (slot, curve) in current.iter_mut().zip(&curves) {
                    if let Some(&v) = curve.get(&t) {
                        *slot = v;
                    }
                }
                let mean = current.iter().sum::<usize>() as f64 / current.len() as f64;
                table_rows.push(CurveRow {
                    iteration: t,
                    values: current.clone(),
                    mean,
                    upper_bound: 1 + max_candidates as u64 * u64::from(t),
                });
            }
            CurveTable {
                language: language.to_string(),
                run_ids: runs.keys().map(|s| s.to_string()).collect(),
                rows: table_rows,
            }
        })
        .collect()
}

/// Writes `<dir>/<language>_curves.csv` for every language.
pub fn emit_plot_data(
    rows: &[GrowthRow],
    max_candidates: usize,
    dir: &Path,
) -> Result<Vec<PathBuf>, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::InvalidConfig("no growth records to plot".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for table in curve_tables(rows, max_candidates) {
        let path = dir.join(format!("{}_curves.csv", table.language));
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["iteration".to_string()];
        header.extend(table.run_ids.iter().cloned());
        header.extend(["mean".to_string(), "upper_bound".to_string()]);
        w.write_record(&header)?;
        for row in &table.rows {
            let mut record = vec![row.iteration.to_string()];
            record.extend(row.values.iter().map(|v| v.to_string()));
            record.push(row.mean.to_string());
            record.push(row.upper_bound.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}
