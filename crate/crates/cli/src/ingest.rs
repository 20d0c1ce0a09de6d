//! CSV datasets: one sample per row, `label,f1,...,fd`, optional header.

use std::io::{Read, Write};
use std::path::Path;

use lcc_core::LabeledDataset;

use crate::error::{CliError, Result};

/// Label lookup while reading. `Dense` grows in first-appearance order,
/// `Fixed` only accepts known names.
enum LabelTable<'a> {
    Dense(Vec<String>),
    Fixed(&'a [String]),
}

impl LabelTable<'_> {
    fn index(&mut self, name: &str, line: usize) -> Result<usize> {
        match self {
            LabelTable::Dense(names) => Ok(match names.iter().position(|n| n == name) {
                Some(i) => i,
                None => {
                    names.push(name.to_string());
                    names.len() - 1
                }
            }),
            LabelTable::Fixed(names) => names.iter().position(|n| n == name).ok_or_else(|| CliError::Parse {
                line,
                message: format!("unknown label {name:?}"),
            }),
        }
    }

    fn into_names(self) -> Vec<String> {
        match self {
            LabelTable::Dense(names) => names,
            LabelTable::Fixed(names) => names.to_vec(),
        }
    }
}

pub fn ingest_csv(path: &Path) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    ingest_reader(file)
}

/// Reads a split that must use the label names of an already loaded dataset.
pub fn ingest_csv_with_labels(path: &Path, label_names: &[String]) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read(file, LabelTable::Fixed(label_names))
}

pub fn ingest_reader<R: Read>(input: R) -> Result<LabeledDataset> {
    read(input, LabelTable::Dense(Vec::new()))
}

fn read<R: Read>(input: R, mut table: LabelTable<'_>) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| CliError::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(CliError::Parse {
                line,
                message: "need a label and at least one feature".into(),
            });
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().skip(1).map(str::parse::<f64>).collect();
        let features = match parsed {
            Ok(f) => f,
            Err(_) if line == 1 => continue,
            Err(e) => {
                return Err(CliError::Parse {
                    line,
                    message: format!("bad feature value: {e}"),
                })
            }
        };
        if let Some(first) = samples.first() {
            if first.len() != features.len() {
                return Err(CliError::RaggedFeatures {
                    line,
                    expected: first.len(),
                    found: features.len(),
                });
            }
        }
        labels.push(table.index(&record[0], line)?);
        samples.push(features);
    }
    Ok(LabeledDataset::new(samples, labels, table.into_names())?)
}

/// Writes `ds` with a `label,f1,...` header, labels by name.
pub fn write_dataset_csv<W: Write>(out: W, ds: &LabeledDataset) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Parse {
        line: 0,
        message: e.to_string(),
    };
    let mut header = vec!["label".to_string()];
    header.extend((1..=ds.dimension()).map(|k| format!("f{k}")));
    writer.write_record(&header).map_err(io)?;
    for (row, &y) in ds.features().rows().into_iter().zip(ds.labels()) {
        let mut record = vec![ds.label_names()[y].clone()];
        record.extend(row.iter().map(f64::to_string));
        writer.write_record(&record).map_err(io)?;
    }
    writer.flush().map_err(|e| CliError::Parse {
        line: 0,
        message: e.to_string(),
    })
}
