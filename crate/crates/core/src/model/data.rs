//! Column-oriented tabular data with missing values.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{validation, Error, Result};

/// Values of one column. Missing numerics are `NaN`; missing categoricals
/// are `None`.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical {
        vocabulary: Vec<String>,
        codes: Vec<Option<u32>>,
    },
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnData::Numeric(_))
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Numeric(v) => v[row].is_nan(),
            ColumnData::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    /// Numeric encoding of one cell: the value itself, or the vocabulary
    /// code for categoricals. Missing cells encode as `NaN`.
    pub fn encoded(&self, row: usize) -> f64 {
        match self {
            ColumnData::Numeric(v) => v[row],
            ColumnData::Categorical { codes, .. } => codes[row].map_or(f64::NAN, |c| c as f64),
        }
    }

    pub fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { vocabulary, codes } => ColumnData::Categorical {
                vocabulary: vocabulary.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
        }
    }

    pub fn has_missing(&self) -> bool {
        (0..self.len()).any(|r| self.is_missing(r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: &str, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    /// Categorical column from optional string values; the vocabulary is the
    /// sorted set of observed values.
    pub fn categorical(name: &str, values: &[Option<&str>]) -> Self {
        let vocab: BTreeSet<&str> = values.iter().flatten().copied().collect();
        let vocabulary: Vec<String> = vocab.into_iter().map(String::from).collect();
        let codes = values
            .iter()
            .map(|v| v.and_then(|s| vocabulary.iter().position(|x| x == s).map(|p| p as u32)))
            .collect();
        Column {
            name: name.into(),
            data: ColumnData::Categorical { vocabulary, codes },
        }
    }
}

/// Feature table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    pub columns: Vec<Column>,
}

impl Frame {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let frame = Frame { columns };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_rows();
        for c in &self.columns {
            if c.data.len() != n {
                return Err(validation(
                    format!("column `{}`", c.name),
                    "length differs from the other columns",
                ));
            }
            if let ColumnData::Categorical { vocabulary, codes } = &c.data {
                if codes.iter().flatten().any(|&k| k as usize >= vocabulary.len()) {
                    return Err(validation(
                        format!("column `{}`", c.name),
                        "value outside the declared vocabulary",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Frame {
        Frame {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.select(rows),
                })
                .collect(),
        }
    }

    pub fn select_columns(&self, names: &[String]) -> Result<Frame> {
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            let idx = self
                .column_index(name)
                .ok_or_else(|| crate::error::not_found("column", name.as_str()))?;
            columns.push(self.columns[idx].clone());
        }
        Ok(Frame { columns })
    }

    /// Horizontal concatenation. All frames must have the same row count.
    pub fn hconcat(frames: Vec<Frame>) -> Result<Frame> {
        let mut columns = Vec::new();
        let mut rows = None;
        for f in frames {
            if f.n_cols() == 0 {
                continue;
            }
            match rows {
                None => rows = Some(f.n_rows()),
                Some(r) if r != f.n_rows() => {
                    return Err(Error::Contract("concatenated frames differ in row count".into()))
                }
                _ => {}
            }
            columns.extend(f.columns);
        }
        Ok(Frame { columns })
    }

    /// Row-major numeric encoding (see [`ColumnData::encoded`]).
    pub fn to_matrix(&self) -> Vec<f64> {
        let n = self.n_rows();
        let p = self.n_cols();
        let mut out = vec![0.0; n * p];
        for (j, c) in self.columns.iter().enumerate() {
            for r in 0..n {
                out[r * p + j] = c.data.encoded(r);
            }
        }
        out
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.data.has_missing())
    }

    pub fn all_numeric(&self) -> bool {
        self.columns.iter().all(|c| c.data.is_numeric())
    }
}

/// Features plus class-label target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub frame: Frame,
    pub target_name: String,
    /// Class index of every row, into `class_labels`.
    pub target: Vec<usize>,
    pub class_labels: Vec<String>,
    /// Position of the target column in the original file layout.
    pub target_position: usize,
}

impl Dataset {
    pub fn new(
        frame: Frame,
        target_name: &str,
        target: Vec<usize>,
        class_labels: Vec<String>,
    ) -> Result<Self> {
        let target_position = frame.n_cols();
        let ds = Dataset {
            frame,
            target_name: target_name.into(),
            target,
            class_labels,
            target_position,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if self.frame.column_index(&self.target_name).is_some() {
            return Err(validation("dataset", "target column appears among the features"));
        }
        if self.class_labels.len() < 2 {
            return Err(validation("dataset", "at least two class labels are required"));
        }
        if self.target.len() != self.frame.n_rows() && self.frame.n_cols() > 0 {
            return Err(validation("dataset", "target length differs from feature rows"));
        }
        if self.target.iter().any(|&t| t >= self.class_labels.len()) {
            return Err(validation("dataset", "target value outside the class labels"));
        }
        let mut seen = BTreeSet::new();
        for c in &self.frame.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(validation(format!("column `{}`", c.name), "duplicate column name"));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            frame: self.frame.select_rows(rows),
            target_name: self.target_name.clone(),
            target: rows.iter().map(|&r| self.target[r]).collect(),
            class_labels: self.class_labels.clone(),
            target_position: self.target_position,
        }
    }

    pub fn with_frame(&self, frame: Frame) -> Dataset {
        Dataset {
            target_position: self.target_position.min(frame.n_cols()),
            frame,
            target_name: self.target_name.clone(),
            target: self.target.clone(),
            class_labels: self.class_labels.clone(),
        }
    }
}
