//! Dataset CSV: UTF-8, header row, empty cell = missing.

use std::collections::BTreeSet;
use std::path::Path;

use runlens_core::model::{Column, ColumnData, Dataset, Frame};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Optional per-column declaration; undeclared columns are numeric when
/// every non-empty cell parses as a finite number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvLayout<'a> {
    pub target: &'a str,
    pub class_labels: Option<&'a [String]>,
    pub columns: Option<&'a [ColumnSpec]>,
}

fn csv_error(file: &Path, message: impl Into<String>) -> Error {
    Error::Csv {
        file: file.to_path_buf(),
        message: message.into(),
    }
}

pub fn read_dataset(path: &Path, layout: &CsvLayout<'_>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path, layout)
}

/// Parses CSV text; `file` only labels errors.
pub fn parse_dataset(text: &str, file: &Path, layout: &CsvLayout<'_>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(file, e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(file, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(csv_error(file, format!("row {}: {} cells, expected {}", i + 1, rec.len(), header.len())));
        }
        for (col, v) in cells.iter_mut().zip(rec.iter()) {
            col.push(v.to_string());
        }
    }
    let target_idx = header
        .iter()
        .position(|h| h == layout.target)
        .ok_or_else(|| csv_error(file, format!("target column `{}` not in header", layout.target)))?;
    if let Some(specs) = layout.columns {
        for s in specs {
            if !header.contains(&s.name) {
                return Err(csv_error(file, format!("declared column `{}` not in header", s.name)));
            }
        }
    }

    let target_cells = &cells[target_idx];
    let class_labels: Vec<String> = match layout.class_labels {
        Some(l) => l.to_vec(),
        None => target_cells
            .iter()
            .filter(|v| !v.is_empty())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let mut target = Vec::with_capacity(target_cells.len());
    for (r, v) in target_cells.iter().enumerate() {
        let idx = class_labels
            .iter()
            .position(|l| l == v)
            .ok_or_else(|| csv_error(file, format!("row {}: target value `{v}` is not a class label", r + 1)))?;
        target.push(idx);
    }

    let mut columns = Vec::with_capacity(header.len() - 1);
    for (c, name) in header.iter().enumerate() {
        if c == target_idx {
            continue;
        }
        let spec = layout.columns.and_then(|s| s.iter().find(|s| &s.name == name));
        let values = &cells[c];
        let kind = spec.map(|s| s.kind).unwrap_or_else(|| {
            if values.iter().all(|v| v.is_empty() || v.parse::<f64>().is_ok_and(f64::is_finite)) {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            }
        });
        let data = match kind {
            ColumnKind::Numeric => {
                let mut out = Vec::with_capacity(values.len());
                for (r, v) in values.iter().enumerate() {
                    if v.is_empty() {
                        out.push(f64::NAN);
                    } else {
                        let x = v
                            .parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| csv_error(file, format!("row {}, column `{name}`: `{v}` is not a number", r + 1)))?;
                        out.push(x);
                    }
                }
                ColumnData::Numeric(out)
            }
            ColumnKind::Categorical => match spec.and_then(|s| s.vocabulary.as_ref()) {
                Some(vocab) => {
                    let mut codes = Vec::with_capacity(values.len());
                    for (r, v) in values.iter().enumerate() {
                        if v.is_empty() {
                            codes.push(None);
                        } else {
                            let code = vocab.iter().position(|x| x == v).ok_or_else(|| {
                                csv_error(file, format!("row {}, column `{name}`: `{v}` is not in the vocabulary", r + 1))
                            })?;
                            codes.push(Some(code as u32));
                        }
                    }
                    ColumnData::Categorical {
                        vocabulary: vocab.clone(),
                        codes,
                    }
                }
                None => {
                    let opts: Vec<Option<&str>> = values.iter().map(|v| (!v.is_empty()).then_some(v.as_str())).collect();
                    Column::categorical(name, &opts).data
                }
            },
        };
        columns.push(Column { name: name.clone(), data });
    }
    let mut ds = Dataset::new(Frame::new(columns)?, layout.target, target, class_labels)?;
    ds.target_position = target_idx;
    Ok(ds)
}

/// Declarations that reproduce `data` exactly on reload.
pub fn column_specs(data: &Dataset) -> Vec<ColumnSpec> {
    data.frame
        .columns
        .iter()
        .map(|c| match &c.data {
            ColumnData::Numeric(_) => ColumnSpec {
                name: c.name.clone(),
                kind: ColumnKind::Numeric,
                vocabulary: None,
            },
            ColumnData::Categorical { vocabulary, .. } => ColumnSpec {
                name: c.name.clone(),
                kind: ColumnKind::Categorical,
                vocabulary: Some(vocabulary.clone()),
            },
        })
        .collect()
}

fn cell(data: &ColumnData, row: usize) -> String {
    match data {
        ColumnData::Numeric(v) if v[row].is_nan() => String::new(),
        ColumnData::Numeric(v) => format!("{}", v[row]),
        ColumnData::Categorical { vocabulary, codes } => codes[row].map_or(String::new(), |c| vocabulary[c as usize].clone()),
    }
}

/// Feature table as CSV; numbers use their shortest round-trip form.
pub fn write_frame(frame: &Frame) -> String {
    write_table(
        frame.columns.iter().map(|c| c.name.clone()).collect(),
        frame.n_rows(),
        |r| frame.columns.iter().map(|c| cell(&c.data, r)).collect(),
    )
}

/// Dataset as CSV with the target column back at its original position.
pub fn write_dataset(data: &Dataset) -> String {
    let pos = data.target_position.min(data.frame.n_cols());
    let mut header: Vec<String> = data.frame.columns.iter().map(|c| c.name.clone()).collect();
    header.insert(pos, data.target_name.clone());
    write_table(header, data.n_rows(), |r| {
        let mut row: Vec<String> = data.frame.columns.iter().map(|c| cell(&c.data, r)).collect();
        row.insert(pos, data.class_labels[data.target[r]].clone());
        row
    })
}

/// Generic CSV writer with `\n` line endings.
pub fn write_table(header: Vec<String>, n_rows: usize, row: impl Fn(usize) -> Vec<String>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in 0..n_rows {
        w.write_record(row(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
