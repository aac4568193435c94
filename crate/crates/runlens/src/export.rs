//! File artifacts produced by `POST /export` and the CLI.

use serde::{Deserialize, Serialize};

use runlens_core::explain::ImportanceTable;
use runlens_core::coverage::CoverageEmbedding;
use runlens_core::ml::{self, SOURCE_NODE};
use runlens_core::explain::FeatureEffects;

use crate::dataset::{write_dataset, write_table};
use crate::dot::to_dot;
use crate::engine::{structure_graph, Engine, RunEntry, DEFAULT_MAX_LEAF_NODES, DEFAULT_PERMUTATION_REPEATS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "artifact", rename_all = "kebab-case")]
pub enum Artifact {
    IntermediateDataset {
        candidate: String,
        #[serde(default)]
        node: Option<String>,
    },
    SurrogateTree {
        candidate: String,
        #[serde(default)]
        node: Option<String>,
        #[serde(default = "default_cap")]
        max_leaf_nodes: usize,
    },
    Config {
        candidate: String,
    },
    ImportanceTable {
        #[serde(default)]
        structure: Option<String>,
    },
    CoverageEmbedding {
        #[serde(default)]
        at: Option<usize>,
    },
    CoverageHeatmap {
        #[serde(default)]
        at: Option<usize>,
    },
    MergeGraph {
        #[serde(default)]
        at: Option<usize>,
    },
    PermutationImportance {
        candidate: String,
        #[serde(default)]
        node: Option<String>,
        #[serde(default = "default_repeats")]
        n_repeats: usize,
    },
}

fn default_cap() -> usize {
    DEFAULT_MAX_LEAF_NODES
}

fn default_repeats() -> usize {
    DEFAULT_PERMUTATION_REPEATS
}

/// One exported file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportFile {
    pub file_name: String,
    pub content_type: &'static str,
    pub bytes: Vec<u8>,
}

const CSV: &str = "text/csv";
const JSON: &str = "application/json";
const DOT: &str = "text/vnd.graphviz";

impl Artifact {
    fn candidate(&self) -> Option<&str> {
        match self {
            Artifact::IntermediateDataset { candidate, .. }
            | Artifact::SurrogateTree { candidate, .. }
            | Artifact::Config { candidate }
            | Artifact::PermutationImportance { candidate, .. } => Some(candidate),
            _ => None,
        }
    }

    fn needs_model(&self) -> bool {
        matches!(
            self,
            Artifact::IntermediateDataset { .. } | Artifact::SurrogateTree { .. } | Artifact::PermutationImportance { .. }
        )
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or(String::new(), num)
}

fn pretty(value: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable artifact");
    out.push(b'\n');
    out
}

pub fn importance_csv(table: &ImportanceTable) -> String {
    write_table(
        vec!["hyperparameters".into(), "order".into(), "importance".into(), "sd".into()],
        table.entries.len(),
        |r| {
            let e = &table.entries[r];
            vec![e.hyperparameters.join(" x "), e.hyperparameters.len().to_string(), num(e.importance), num(e.sd)]
        },
    )
}

pub fn embedding_csv(embedding: &CoverageEmbedding) -> String {
    write_table(
        vec![
            "candidate_id".into(),
            "kind".into(),
            "x".into(),
            "y".into(),
            "performance".into(),
            "timestamp".into(),
        ],
        embedding.points.len(),
        |r| {
            let p = &embedding.points[r];
            vec![
                p.candidate_id.clone().unwrap_or_default(),
                if p.is_boundary() { "boundary" } else { "candidate" }.into(),
                num(p.x),
                num(p.y),
                opt_num(p.performance),
                opt_num(p.timestamp),
            ]
        },
    )
}

pub fn permutation_csv(effects: &FeatureEffects) -> String {
    write_table(
        vec!["feature".into(), "importance".into(), "sd".into()],
        effects.features.len(),
        |r| {
            let f = &effects.features[r];
            vec![f.feature.clone(), num(f.importance), num(f.importance_sd)]
        },
    )
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn at_suffix(at: Option<usize>) -> String {
    at.map_or(String::new(), |a| format!("_at{a}"))
}

/// Builds the artifact, refusing model-backed exports for candidates whose
/// pipeline uses primitives the engine cannot execute.
pub fn export(engine: &Engine, run_id: &str, artifact: &Artifact) -> Result<ExportFile> {
    let entry: &RunEntry = engine.run(run_id)?;
    let h = entry.history();
    if let Some(cid) = artifact.candidate() {
        let c = h.candidate(cid).ok_or_else(|| Error::UnknownCandidate(cid.into()))?;
        if artifact.needs_model() {
            let bad: Vec<&str> = c
                .pipeline
                .nodes
                .iter()
                .map(|n| n.primitive.as_str())
                .filter(|p| !ml::is_supported(p))
                .collect();
            if !bad.is_empty() {
                return Err(runlens_core::Error::UnsupportedPrimitive(bad.join(", ")).into());
            }
        }
    }
    let run = slug(run_id);
    Ok(match artifact {
        Artifact::IntermediateDataset { candidate, node } => {
            let node = node.as_deref().unwrap_or(SOURCE_NODE);
            let data = engine.intermediate(entry, candidate, node)?;
            ExportFile {
                file_name: format!("{run}_{}_{}.csv", slug(candidate), slug(node)),
                content_type: CSV,
                bytes: write_dataset(&data).into_bytes(),
            }
        }
        Artifact::SurrogateTree {
            candidate,
            node,
            max_leaf_nodes,
        } => {
            let s = engine.surrogate(entry, candidate, node.as_deref(), *max_leaf_nodes)?;
            ExportFile {
                file_name: format!("{run}_{}_surrogate.json", slug(candidate)),
                content_type: JSON,
                bytes: pretty(&s.to_portable()),
            }
        }
        Artifact::Config { candidate } => {
            let c = entry
                .loaded
                .document
                .candidates
                .iter()
                .find(|c| &c.id == candidate)
                .ok_or_else(|| Error::UnknownCandidate(candidate.clone()))?;
            ExportFile {
                file_name: format!("{run}_{}_config.json", slug(candidate)),
                content_type: JSON,
                bytes: pretty(&c.config),
            }
        }
        Artifact::ImportanceTable { structure } => {
            let table = runlens_core::explain::hp_importance(
                h,
                h.merged_space(),
                &runlens_core::explain::FanovaOptions {
                    structure: structure.clone(),
                    seed: engine.seed(),
                    ..Default::default()
                },
            )?;
            ExportFile {
                file_name: format!("{run}_hp_importance.csv"),
                content_type: CSV,
                bytes: importance_csv(&table).into_bytes(),
            }
        }
        Artifact::CoverageEmbedding { at } => {
            let e = engine.coverage_frame(entry, *at)?;
            ExportFile {
                file_name: format!("{run}_coverage{}.csv", at_suffix(*at)),
                content_type: CSV,
                bytes: embedding_csv(&e).into_bytes(),
            }
        }
        Artifact::CoverageHeatmap { at } => {
            let e = engine.coverage_frame(entry, *at)?;
            ExportFile {
                file_name: format!("{run}_coverage_heatmap{}.json", at_suffix(*at)),
                content_type: JSON,
                bytes: pretty(&e.heatmap),
            }
        }
        Artifact::MergeGraph { at } => ExportFile {
            file_name: format!("{run}_merge_graph{}.dot", at_suffix(*at)),
            content_type: DOT,
            bytes: to_dot(&structure_graph(h, *at), run_id).into_bytes(),
        },
        Artifact::PermutationImportance {
            candidate,
            node,
            n_repeats,
        } => {
            let fx = engine.effects(entry, candidate, node.as_deref(), *n_repeats, 2)?;
            ExportFile {
                file_name: format!("{run}_{}_permutation_importance.csv", slug(candidate)),
                content_type: CSV,
                bytes: permutation_csv(&fx).into_bytes(),
            }
        }
    })
}
