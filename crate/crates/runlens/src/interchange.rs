//! Versioned JSON run-history documents.

use std::path::{Path, PathBuf};

use runlens_core::model::{Candidate, EnsembleSpec, RunHistory, SearchSpace, Task};
use serde::{Deserialize, Serialize};

use crate::dataset::{column_specs, read_dataset, ColumnSpec, CsvLayout};
use crate::error::{Error, Result};

pub const FORMAT_MAJOR: u64 = 1;
pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub id: String,
    pub metric: String,
    #[serde(default = "classification")]
    pub task: Task,
}

fn classification() -> Task {
    Task::Classification
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    /// Relative paths resolve against the document's directory.
    pub path: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<ColumnSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDocument {
    pub version: String,
    pub run: RunInfo,
    pub search_spaces: Vec<SearchSpace>,
    #[serde(default)]
    pub candidates: Vec<Candidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    pub dataset_ref: DatasetRef,
}

/// A validated run together with where it came from.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub history: RunHistory,
    pub document_path: PathBuf,
    pub dataset_path: PathBuf,
    /// Candidate configs exactly as written in the document.
    pub document: RunDocument,
}

fn check_version(file: &Path, value: &serde_json::Value) -> Result<()> {
    let version = match value.get("version") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(_) => {
            return Err(Error::Schema {
                file: file.into(),
                at: "version".into(),
                message: "expected a \"MAJOR.MINOR\" string".into(),
            })
        }
        None => {
            return Err(Error::Schema {
                file: file.into(),
                at: ".".into(),
                message: "missing field `version`".into(),
            })
        }
    };
    let major = version.split('.').next().and_then(|m| m.parse::<u64>().ok());
    if major != Some(FORMAT_MAJOR) {
        return Err(Error::Version {
            file: file.into(),
            version,
        });
    }
    Ok(())
}

/// Parses and schema-checks a document without touching the dataset.
pub fn parse_document(text: &str, file: &Path) -> Result<RunDocument> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema {
        file: file.into(),
        at: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    check_version(file, &value)?;
    serde_path_to_error::deserialize(value).map_err(|e| Error::Schema {
        file: file.into(),
        at: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn load_run_history(path: &Path) -> Result<LoadedRun> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let document = parse_document(&text, path)?;
    let dataset_path = path.parent().unwrap_or(Path::new(".")).join(&document.dataset_ref.path);
    let dataset = read_dataset(
        &dataset_path,
        &CsvLayout {
            target: &document.dataset_ref.target,
            class_labels: document.dataset_ref.class_labels.as_deref(),
            columns: document.dataset_ref.columns.as_deref(),
        },
    )?;
    let history = RunHistory::new(
        document.run.id.clone(),
        document.run.metric.clone(),
        document.search_spaces.clone(),
        document.candidates.clone(),
        document.ensemble.clone(),
        dataset,
    )?;
    Ok(LoadedRun {
        history,
        document_path: path.to_path_buf(),
        dataset_path,
        document,
    })
}

/// Document describing `history`, with its dataset stored at `dataset_path`.
/// Column kinds and vocabularies are declared so a reload is exact.
pub fn to_document(history: &RunHistory, dataset_path: &str) -> RunDocument {
    RunDocument {
        version: FORMAT_VERSION.into(),
        run: RunInfo {
            id: history.run_id.clone(),
            metric: history.metric_name.clone(),
            task: history.task,
        },
        search_spaces: history.search_spaces.clone(),
        candidates: history.candidates.clone(),
        ensemble: history.ensemble.clone(),
        dataset_ref: DatasetRef {
            path: dataset_path.into(),
            target: history.dataset.target_name.clone(),
            class_labels: Some(history.dataset.class_labels.clone()),
            columns: Some(column_specs(&history.dataset)),
        },
    }
}

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>.csv`; returns the JSON path.
pub fn save_run_history(history: &RunHistory, dir: &Path, stem: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_name = format!("{stem}.csv");
    let json_path = dir.join(format!("{stem}.json"));
    let doc = to_document(history, &csv_name);
    let csv_path = dir.join(&csv_name);
    std::fs::write(&csv_path, crate::dataset::write_dataset(&history.dataset)).map_err(|e| Error::io(&csv_path, e))?;
    let json = serde_json::to_string_pretty(&doc).expect("serializable document");
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(json_path)
}
