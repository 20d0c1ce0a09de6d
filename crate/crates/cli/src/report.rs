//! Friedman / Bonferroni-Dunn report over a splits-by-methods accuracy CSV.

use std::io::Read;
use std::path::Path;

use lcc_core::stats::{compute_ranks, friedman_analysis, FriedmanReport};
use ndarray::Array2;

use crate::error::{CliError, Result, StageExt};

/// The accuracy table: a header row of method names, then one row per split.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTable {
    pub method_names: Vec<String>,
    pub scores: Array2<f64>,
}

pub fn read_accuracy_csv<R: Read>(input: R) -> Result<AccuracyTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let parse_err = |line: usize, message: String| CliError::Parse { line, message };
    let method_names: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut flat = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("bad accuracy value {field:?}")))?;
            flat.push(v);
        }
        rows += 1;
    }
    let scores = Array2::from_shape_vec((rows, method_names.len()), flat)
        .map_err(|e| parse_err(0, e.to_string()))?;
    Ok(AccuracyTable { method_names, scores })
}

pub fn stats_report_from_table(table: AccuracyTable, q_alpha: f64) -> Result<FriedmanReport> {
    let ranks = compute_ranks(table.scores, table.method_names).stage("ranks")?;
    Ok(friedman_analysis(&ranks, q_alpha))
}

pub fn stats_report(accuracy_csv: &Path, q_alpha: f64) -> Result<FriedmanReport> {
    let file = std::fs::File::open(accuracy_csv).map_err(|e| CliError::io(accuracy_csv, e))?;
    stats_report_from_table(read_accuracy_csv(file)?, q_alpha)
}
