//! Comma-separated input with a header row.
//!
//! Every column other than the target and the dropped ones becomes a
//! feature, in header order. Numeric columns pass through unchanged.
//! A categorical column expands in place into one indicator column per
//! distinct level, levels sorted by byte order and named `column=level`.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub target: String,
    pub categorical: Vec<String>,
    pub drop: Vec<String>,
    pub task: Task,
}

impl CsvSchema {
    pub fn new(target: impl Into<String>, task: Task) -> Self {
        CsvSchema {
            target: target.into(),
            categorical: Vec::new(),
            drop: Vec::new(),
            task,
        }
    }
}

enum Column {
    Numeric { src: usize },
    Categorical { src: usize, levels: Vec<String> },
}

pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: Read>(input: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(&e, "header"))?
        .iter()
        .map(str::to_owned)
        .collect();
    let find = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_owned()));

    let target_col = find(&schema.target)?;
    for name in schema.categorical.iter().chain(&schema.drop) {
        find(name)?;
    }
    if schema.categorical.contains(&schema.target) {
        return Err(Error::InvalidConfig(format!("target column `{}` cannot be categorical", schema.target)));
    }

    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(&e, ""))?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, cell) in record.iter().enumerate() {
            if cell.is_empty() && !schema.drop.contains(&header[col]) {
                return Err(Error::Parse {
                    line,
                    column: header[col].clone(),
                    message: format!("missing value in data row {}", records.len() + 1),
                });
            }
        }
        records.push((line, record));
    }

    let mut columns = Vec::new();
    let mut names = Vec::new();
    for (src, name) in header.iter().enumerate() {
        if src == target_col || schema.drop.contains(name) {
            continue;
        }
        if schema.categorical.contains(name) {
            let levels: BTreeSet<&str> = records.iter().map(|(_, r)| &r[src]).collect();
            let levels: Vec<String> = levels.into_iter().map(str::to_owned).collect();
            names.extend(levels.iter().map(|l| format!("{name}={l}")));
            columns.push(Column::Categorical { src, levels });
        } else {
            names.push(name.clone());
            columns.push(Column::Numeric { src });
        }
    }

    let p = names.len();
    let mut features = Vec::with_capacity(records.len() * p);
    let mut targets = Vec::with_capacity(records.len());
    for (line, record) in &records {
        for column in &columns {
            match column {
                Column::Numeric { src } => features.push(parse_number(&record[*src], *line, &header[*src])?),
                Column::Categorical { src, levels } => {
                    let cell = &record[*src];
                    features.extend(levels.iter().map(|l| f64::from(l == cell)));
                }
            }
        }
        let cell = &record[target_col];
        let y = parse_number(cell, *line, &schema.target)?;
        if schema.task == Task::Binary && y != 0.0 && y != 1.0 {
            return Err(Error::NonBinaryTarget {
                column: schema.target.clone(),
                line: *line,
                value: cell.to_owned(),
            });
        }
        targets.push(y);
    }

    Dataset::new(features, p, targets, schema.task)?.with_feature_names(names)
}

/// Writes a dataset as comma-separated text, features first and the target
/// last. Values use the shortest representation that parses back to the
/// same `f64`.
pub fn write_dataset<W: Write>(data: &Dataset, target: &str, out: W) -> Result<()> {
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = match data.feature_names() {
        Some(names) => names.to_vec(),
        None => (0..data.p()).map(|j| format!("x{j}")).collect(),
    };
    header.push(target.to_owned());
    w.write_record(&header).map_err(ser)?;
    for i in 0..data.n() {
        let row = data.row(i).iter().chain(std::iter::once(&data.targets()[i]));
        w.write_record(row.map(|v| v.to_string())).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))
}

fn parse_number(cell: &str, line: u64, column: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            column: column.to_owned(),
            message: format!("`{cell}` is not a finite number"),
        }),
    }
}

fn parse_error(e: &csv::Error, column: &str) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        column: column.to_owned(),
        message: match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                format!("expected {expected_len} fields, found {len}")
            }
            _ => e.to_string(),
        },
    }
}
