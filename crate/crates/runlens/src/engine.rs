//! Analysis engine shared by the service and the CLI: every request maps to
//! one serialized body, a pure function of the run, the parameters and the
//! run-level seed.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use runlens_core::coverage::{CoverageEmbedding, CoverageModel};
use runlens_core::cpc::{sampling_history, BrushPredicate, CpcModel};
use runlens_core::ensemble::{self, AnalysisOptions, EnsembleAnalysis, Split};
use runlens_core::explain::{
    feature_effects, global_surrogate, hp_importance, local_surrogate, FanovaOptions, LimeOptions,
};
use runlens_core::ml::{self, stratified_sample, stratified_split, FittedPipeline, PredictionOracle, SOURCE_NODE, VALIDATION_FRACTION};
use runlens_core::model::{ColumnData, Dataset, RunHistory};
use runlens_core::structure::{snapshot_after, MergedGraph};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::interchange::{load_run_history, LoadedRun};

/// Explainer and surface computations see at most this many rows.
pub const SAMPLE_ROW_CAP: usize = 5000;
pub const DEFAULT_MAX_LEAF_NODES: usize = 8;
pub const DEFAULT_PERMUTATION_REPEATS: usize = 5;
pub const DEFAULT_PREVIEW_ROWS: usize = 100;

/// One analysis request. Its JSON form is the cache parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "operation", rename_all = "kebab-case")]
pub enum Analysis {
    Overview,
    Leaderboard,
    /// `at` counts candidates in merge order; `None` means all.
    StructureGraph {
        at: Option<usize>,
    },
    Cpc {
        #[serde(default)]
        brush: Vec<BrushPredicate>,
    },
    Sampling {
        hyperparameter: String,
        bins: usize,
    },
    Coverage {
        at: Option<usize>,
    },
    HpImportance {
        structure: Option<String>,
    },
    Report {
        candidate: String,
    },
    Surrogate {
        candidate: String,
        node: Option<String>,
        max_leaf_nodes: usize,
    },
    LocalSurrogate {
        candidate: String,
        node: Option<String>,
        row: usize,
        n_samples: usize,
    },
    Effects {
        candidate: String,
        node: Option<String>,
        n_repeats: usize,
        grid_size: usize,
    },
    Config {
        candidate: String,
    },
    Intermediate {
        candidate: String,
        node: String,
        limit: usize,
    },
    Ensemble {
        split: Split,
    },
    EnsemblePredictions {
        split: Split,
    },
    EnsembleSurfaces {
        split: Split,
    },
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Overview => "overview",
            Analysis::Leaderboard => "leaderboard",
            Analysis::StructureGraph { .. } => "structure-graph",
            Analysis::Cpc { .. } => "cpc",
            Analysis::Sampling { .. } => "sampling",
            Analysis::Coverage { .. } => "coverage",
            Analysis::HpImportance { .. } => "hp-importance",
            Analysis::Report { .. } => "report",
            Analysis::Surrogate { .. } => "surrogate",
            Analysis::LocalSurrogate { .. } => "local-surrogate",
            Analysis::Effects { .. } => "effects",
            Analysis::Config { .. } => "config",
            Analysis::Intermediate { .. } => "intermediate",
            Analysis::Ensemble { .. } => "ensemble",
            Analysis::EnsemblePredictions { .. } => "ensemble-predictions",
            Analysis::EnsembleSurfaces { .. } => "ensemble-surfaces",
        }
    }

    pub fn candidate(&self) -> Option<&str> {
        match self {
            Analysis::Report { candidate }
            | Analysis::Surrogate { candidate, .. }
            | Analysis::LocalSurrogate { candidate, .. }
            | Analysis::Effects { candidate, .. }
            | Analysis::Config { candidate }
            | Analysis::Intermediate { candidate, .. } => Some(candidate),
            _ => None,
        }
    }
}

/// A loaded run plus lazily computed, reusable intermediate state.
pub struct RunEntry {
    pub loaded: LoadedRun,
    coverage: OnceLock<std::result::Result<Arc<CoverageModel>, String>>,
    fitted: Mutex<HashMap<String, Arc<FittedPipeline>>>,
    ensembles: Mutex<HashMap<Split, Arc<Option<EnsembleAnalysis>>>>,
}

impl RunEntry {
    pub fn new(loaded: LoadedRun) -> Self {
        RunEntry {
            loaded,
            coverage: OnceLock::new(),
            fitted: Mutex::new(HashMap::new()),
            ensembles: Mutex::new(HashMap::new()),
        }
    }

    pub fn history(&self) -> &RunHistory {
        &self.loaded.history
    }
}

pub struct Engine {
    runs: BTreeMap<String, Arc<RunEntry>>,
    seed: u64,
}

fn to_json(value: &impl Serialize) -> Vec<u8> {
    serde_json::to_vec(value).expect("serializable analysis result")
}

impl Engine {
    pub fn new(seed: u64) -> Self {
        Engine {
            runs: BTreeMap::new(),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add_run(&mut self, loaded: LoadedRun) -> Result<()> {
        let id = loaded.history.run_id.clone();
        if self.runs.contains_key(&id) {
            return Err(Error::BadRequest(format!("run `{id}` is loaded twice")));
        }
        self.runs.insert(id, Arc::new(RunEntry::new(loaded)));
        Ok(())
    }

    /// Loads one run file, or every `*.json` run in a directory.
    pub fn load_path(&mut self, path: &Path) -> Result<Vec<String>> {
        let mut files = Vec::new();
        if path.is_dir() {
            let rd = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
            for entry in rd {
                let p = entry.map_err(|e| Error::io(path, e))?.path();
                if p.extension().is_some_and(|e| e == "json") {
                    files.push(p);
                }
            }
            files.sort();
        } else {
            files.push(path.to_path_buf());
        }
        let mut ids = Vec::new();
        for f in files {
            let loaded = load_run_history(&f)?;
            ids.push(loaded.history.run_id.clone());
            self.add_run(loaded)?;
        }
        Ok(ids)
    }

    pub fn run_ids(&self) -> Vec<String> {
        self.runs.keys().cloned().collect()
    }

    pub fn run(&self, id: &str) -> Result<&Arc<RunEntry>> {
        self.runs.get(id).ok_or_else(|| Error::UnknownRun(id.into()))
    }

    /// Body of `GET /runs`.
    pub fn runs_listing(&self) -> Vec<u8> {
        let rows: Vec<Value> = self
            .runs
            .values()
            .map(|r| {
                let h = r.history();
                json!({
                    "run_id": h.run_id,
                    "metric": h.metric_name,
                    "n_candidates": h.candidates.len(),
                    "ensemble_available": h.ensemble.is_some(),
                })
            })
            .collect();
        to_json(&rows)
    }

    pub fn analyze(&self, run_id: &str, analysis: &Analysis) -> Result<Vec<u8>> {
        let entry = self.run(run_id)?;
        let h = entry.history();
        if let Some(c) = analysis.candidate() {
            if h.candidate(c).is_none() {
                return Err(Error::UnknownCandidate(c.into()));
            }
        }
        Ok(match analysis {
            Analysis::Overview => to_json(&overview(h)),
            Analysis::Leaderboard => to_json(&leaderboard(h)),
            Analysis::StructureGraph { at } => to_json(&graph_json(&structure_graph(h, *at), *at)),
            Analysis::Cpc { brush } => {
                let model = CpcModel::build(h);
                let selected = model.brush(brush);
                to_json(&json!({ "axes": model.axes, "polylines": model.polylines, "selected": selected }))
            }
            Analysis::Sampling { hyperparameter, bins } => to_json(&sampling_history(h, hyperparameter, *bins)?),
            Analysis::Coverage { at } => to_json(&self.coverage_frame(entry, *at)?),
            Analysis::HpImportance { structure } => to_json(&hp_importance(
                h,
                h.merged_space(),
                &FanovaOptions {
                    structure: structure.clone(),
                    seed: self.seed,
                    ..FanovaOptions::default()
                },
            )?),
            Analysis::Report { candidate } => {
                let fp = self.fitted(entry, candidate)?;
                to_json(&ml::report(&fp, &h.dataset)?)
            }
            Analysis::Surrogate {
                candidate,
                node,
                max_leaf_nodes,
            } => {
                let s = self.surrogate(entry, candidate, node.as_deref(), *max_leaf_nodes)?;
                to_json(&json!({
                    "candidate_id": candidate,
                    "node": node.as_deref().unwrap_or(SOURCE_NODE),
                    "max_leaf_nodes": s.max_leaf_nodes,
                    "n_leaves": s.n_leaves(),
                    "fidelity": s.fidelity,
                    "n_rows": s.n_rows,
                    "tree": s.to_nested(),
                }))
            }
            Analysis::LocalSurrogate {
                candidate,
                node,
                row,
                n_samples,
            } => {
                let fp = self.fitted(entry, candidate)?;
                let node = node.as_deref().unwrap_or(SOURCE_NODE);
                if *row >= h.dataset.n_rows() {
                    return Err(Error::BadRequest(format!("row {row} outside 0..{}", h.dataset.n_rows())));
                }
                let mut rows = self.sample_rows(&h.dataset);
                let pos = match rows.iter().position(|r| r == row) {
                    Some(p) => p,
                    None => {
                        rows.push(*row);
                        rows.len() - 1
                    }
                };
                let data = fp.transform_until(node, &h.dataset.select_rows(&rows))?;
                let oracle = fp.oracle_from(node)?;
                let mut e = local_surrogate(
                    &oracle,
                    &data.frame.select_columns(&oracle.input_columns())?,
                    pos,
                    LimeOptions {
                        n_samples: *n_samples,
                        seed: self.seed,
                        ..LimeOptions::default()
                    },
                )?;
                e.row = *row;
                to_json(&json!({ "candidate_id": candidate, "node": node, "explanation": e }))
            }
            Analysis::Effects {
                candidate,
                node,
                n_repeats,
                grid_size,
            } => {
                let fx = self.effects(entry, candidate, node.as_deref(), *n_repeats, *grid_size)?;
                to_json(&json!({ "candidate_id": candidate, "node": node.as_deref().unwrap_or(SOURCE_NODE), "effects": fx }))
            }
            Analysis::Config { candidate } => to_json(&config_of(entry, candidate)?),
            Analysis::Intermediate { candidate, node, limit } => {
                let data = self.intermediate(entry, candidate, node)?;
                to_json(&preview(&data, *limit))
            }
            Analysis::Ensemble { split } => {
                let a = self.ensemble(entry, *split)?;
                match a.as_ref() {
                    None => to_json(&json!({ "available": false })),
                    Some(a) => to_json(&json!({
                        "available": true,
                        "split": a.split,
                        "class_labels": a.class_labels,
                        "members": a.members,
                        "ensemble_accuracy": a.ensemble_accuracy,
                        "warnings": a.warnings,
                    })),
                }
            }
            Analysis::EnsemblePredictions { split } => {
                let a = self.ensemble(entry, *split)?;
                match a.as_ref() {
                    None => to_json(&json!({ "available": false })),
                    Some(a) => to_json(&json!({ "available": true, "predictions": a.predictions })),
                }
            }
            Analysis::EnsembleSurfaces { split } => {
                let a = self.ensemble(entry, *split)?;
                match a.as_ref() {
                    None => to_json(&json!({ "available": false })),
                    Some(a) => to_json(&json!({ "available": true, "surfaces": a.surfaces })),
                }
            }
        })
    }

    /// Stratified, seeded sample of the validation split.
    pub fn sample_rows(&self, data: &Dataset) -> Vec<usize> {
        let k = data.n_classes();
        let (_, validation) = stratified_split(&data.target, k, VALIDATION_FRACTION, self.seed);
        if validation.len() <= SAMPLE_ROW_CAP {
            return validation;
        }
        let labels: Vec<usize> = validation.iter().map(|&r| data.target[r]).collect();
        stratified_sample(&labels, k, SAMPLE_ROW_CAP, self.seed)
            .into_iter()
            .map(|i| validation[i])
            .collect()
    }

    pub fn fitted(&self, entry: &RunEntry, candidate: &str) -> Result<Arc<FittedPipeline>> {
        if let Some(fp) = entry.fitted.lock().expect("fit memo").get(candidate) {
            return Ok(fp.clone());
        }
        let h = entry.history();
        let c = h.candidate(candidate).ok_or_else(|| Error::UnknownCandidate(candidate.into()))?;
        let fp = Arc::new(ml::fit(c, &h.dataset, self.seed)?);
        entry
            .fitted
            .lock()
            .expect("fit memo")
            .insert(candidate.into(), fp.clone());
        Ok(fp)
    }

    pub fn intermediate(&self, entry: &RunEntry, candidate: &str, node: &str) -> Result<Dataset> {
        let fp = self.fitted(entry, candidate)?;
        Ok(fp.transform_until(node, &entry.history().dataset)?)
    }

    pub fn surrogate(
        &self,
        entry: &RunEntry,
        candidate: &str,
        node: Option<&str>,
        max_leaf_nodes: usize,
    ) -> Result<runlens_core::explain::SurrogateTree> {
        let h = entry.history();
        let fp = self.fitted(entry, candidate)?;
        let node = node.unwrap_or(SOURCE_NODE);
        let data = fp.transform_until(node, &h.dataset.select_rows(&self.sample_rows(&h.dataset)))?;
        let oracle = fp.oracle_from(node)?;
        Ok(global_surrogate(
            &oracle,
            &data.frame.select_columns(&oracle.input_columns())?,
            &h.dataset.class_labels,
            max_leaf_nodes,
        )?)
    }

    pub fn effects(
        &self,
        entry: &RunEntry,
        candidate: &str,
        node: Option<&str>,
        n_repeats: usize,
        grid_size: usize,
    ) -> Result<runlens_core::explain::FeatureEffects> {
        let h = entry.history();
        let fp = self.fitted(entry, candidate)?;
        let node = node.unwrap_or(SOURCE_NODE);
        let data = fp.transform_until(node, &h.dataset.select_rows(&self.sample_rows(&h.dataset)))?;
        let oracle = fp.oracle_from(node)?;
        Ok(feature_effects(&oracle, &data, n_repeats, grid_size, self.seed)?)
    }

    pub fn coverage_model(&self, entry: &RunEntry) -> Result<Arc<CoverageModel>> {
        entry
            .coverage
            .get_or_init(|| CoverageModel::build(entry.history()).map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(|m| Error::Core(runlens_core::Error::Degenerate(m)))
    }

    /// Coverage frame showing the first `at` candidates in merge order.
    pub fn coverage_frame(&self, entry: &RunEntry, at: Option<usize>) -> Result<CoverageEmbedding> {
        let model = self.coverage_model(entry)?;
        let ordered = entry.history().ordered_candidates();
        let count = at.unwrap_or(ordered.len()).min(ordered.len());
        let t = if count == 0 { f64::MIN } else { ordered[count - 1].timestamp };
        Ok(model.frame(t)?)
    }

    pub fn ensemble(&self, entry: &RunEntry, split: Split) -> Result<Arc<Option<EnsembleAnalysis>>> {
        if let Some(a) = entry.ensembles.lock().expect("ensemble memo").get(&split) {
            return Ok(a.clone());
        }
        let a = Arc::new(ensemble::analyze(
            entry.history(),
            AnalysisOptions {
                seed: self.seed,
                split,
                surface_rows: Some(SAMPLE_ROW_CAP),
                ..AnalysisOptions::default()
            },
        )?);
        entry.ensembles.lock().expect("ensemble memo").insert(split, a.clone());
        Ok(a)
    }
}

pub fn structure_graph(h: &RunHistory, at: Option<usize>) -> MergedGraph {
    snapshot_after(h, at.unwrap_or(h.candidates.len()))
}

pub fn graph_json(g: &MergedGraph, at: Option<usize>) -> Value {
    let layers = g.layers();
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .map(|n| {
            json!({
                "id": n.id,
                "primitive": n.primitive,
                "layer": layers[n.id],
                "occurrences": n.occurrences(),
                "members": n.members,
            })
        })
        .collect();
    json!({
        "at": at,
        "candidates": g.candidates,
        "longest_path": g.longest_path(),
        "nodes": nodes,
        "edges": g.edges,
    })
}

fn config_of(entry: &RunEntry, candidate: &str) -> Result<Value> {
    let c = entry
        .loaded
        .document
        .candidates
        .iter()
        .find(|c| c.id == candidate)
        .ok_or_else(|| Error::UnknownCandidate(candidate.into()))?;
    Ok(serde_json::to_value(&c.config).expect("serializable config"))
}

fn preview(data: &Dataset, limit: usize) -> Value {
    let columns: Vec<Value> = data
        .frame
        .columns
        .iter()
        .map(|c| json!({ "name": c.name, "kind": if c.data.is_numeric() { "numeric" } else { "categorical" } }))
        .collect();
    let rows: Vec<Value> = (0..data.n_rows().min(limit))
        .map(|r| {
            let cells: Vec<Value> = data
                .frame
                .columns
                .iter()
                .map(|c| match &c.data {
                    ColumnData::Numeric(v) if v[r].is_nan() => Value::Null,
                    ColumnData::Numeric(v) => json!(v[r]),
                    ColumnData::Categorical { vocabulary, codes } => {
                        codes[r].map_or(Value::Null, |k| json!(vocabulary[k as usize]))
                    }
                })
                .collect();
            json!({ "row": r, "values": cells, "target": data.class_labels[data.target[r]] })
        })
        .collect();
    json!({ "columns": columns, "n_rows": data.n_rows(), "target": data.target_name, "rows": rows })
}

pub fn overview(h: &RunHistory) -> Value {
    let ordered = h.ordered_candidates();
    let mut best: Option<(&str, f64)> = None;
    let timeline: Vec<Value> = ordered
        .iter()
        .map(|c| {
            if let Some(p) = c.validation_performance {
                if best.is_none_or(|(_, b)| p > b) {
                    best = Some((&c.id, p));
                }
            }
            json!({
                "candidate_id": c.id,
                "timestamp": c.timestamp,
                "validation_performance": c.validation_performance,
                "best_so_far": best.map(|b| b.1),
            })
        })
        .collect();
    let scored = h.scored().count();
    let mut class_counts = vec![0usize; h.dataset.n_classes()];
    for &t in &h.dataset.target {
        class_counts[t] += 1;
    }
    json!({
        "run_id": h.run_id,
        "metric": h.metric_name,
        "n_candidates": h.candidates.len(),
        "n_scored": scored,
        "n_failed": h.candidates.len() - scored,
        "best": best.map(|(id, p)| json!({ "candidate_id": id, "validation_performance": p })),
        "duration": ordered.last().map_or(0.0, |c| c.timestamp),
        "n_search_spaces": h.search_spaces.len(),
        "n_hyperparameters": h.merged_space().len(),
        "n_structures": ordered.iter().map(|c| c.pipeline.signature()).collect::<std::collections::BTreeSet<_>>().len(),
        "dataset": {
            "n_rows": h.dataset.n_rows(),
            "n_features": h.dataset.frame.n_cols(),
            "target": h.dataset.target_name,
            "class_labels": h.dataset.class_labels,
            "class_counts": class_counts,
        },
        "ensemble_available": h.ensemble.is_some(),
        "timeline": timeline,
    })
}

/// Candidates by validation performance, best first; crashed ones last.
/// Ties keep merge order.
pub fn leaderboard(h: &RunHistory) -> Vec<Value> {
    let mut rows = h.ordered_candidates();
    rows.sort_by(|a, b| match (a.validation_performance, b.validation_performance) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let weight = |id: &str| {
        h.ensemble
            .as_ref()
            .map(|e| e.members.iter().filter(|m| m.candidate_id == id).map(|m| m.weight).sum::<f64>())
    };
    rows.iter()
        .enumerate()
        .map(|(i, c)| {
            json!({
                "rank": i + 1,
                "candidate_id": c.id,
                "timestamp": c.timestamp,
                "validation_performance": c.validation_performance,
                "train_performance": c.train_performance,
                "fit_duration": c.fit_duration,
                "predict_duration": c.predict_duration,
                "structure": c.pipeline.signature(),
                "n_steps": c.pipeline.len(),
                "ensemble_weight": weight(&c.id),
                "supported": c.pipeline.nodes.iter().all(|n| ml::is_supported(&n.primitive)),
            })
        })
        .collect()
}

/// Request defaults used by both front ends.
pub mod defaults {
    pub use super::{DEFAULT_MAX_LEAF_NODES, DEFAULT_PERMUTATION_REPEATS, DEFAULT_PREVIEW_ROWS};
    pub use runlens_core::cpc::DEFAULT_BINS;
    pub use runlens_core::explain::{DEFAULT_GRID_SIZE, DEFAULT_LIME_SAMPLES};
}
