use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::pipeline::PipelineGraph;
use super::space::{merge_search_spaces, SearchSpace};
use super::value::Config;
use crate::error::{validation, Result};

/// One evaluated pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub pipeline: PipelineGraph,
    #[serde(default)]
    pub config: Config,
    /// Seconds since the start of the run.
    pub timestamp: f64,
    #[serde(default)]
    pub train_performance: Option<f64>,
    /// `None` marks a crashed or timed-out evaluation.
    pub validation_performance: Option<f64>,
    #[serde(default)]
    pub fit_duration: f64,
    #[serde(default)]
    pub predict_duration: f64,
    /// Carried through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl Candidate {
    pub fn is_scored(&self) -> bool {
        self.validation_performance.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub candidate_id: String,
    pub weight: f64,
}

/// Weighted soft-vote ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<EnsembleMember>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
}

/// Immutable, validated record of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub run_id: String,
    pub metric_name: String,
    pub task: Task,
    pub search_spaces: Vec<SearchSpace>,
    pub candidates: Vec<Candidate>,
    pub ensemble: Option<EnsembleSpec>,
    pub dataset: Dataset,
    merged_space: SearchSpace,
}

impl RunHistory {
    pub fn new(
        run_id: String,
        metric_name: String,
        search_spaces: Vec<SearchSpace>,
        candidates: Vec<Candidate>,
        ensemble: Option<EnsembleSpec>,
        dataset: Dataset,
    ) -> Result<Self> {
        for (i, s) in search_spaces.iter().enumerate() {
            s.validate().map_err(|e| match e {
                crate::Error::Validation { context, message } => validation(
                    format!("search_spaces[{i}], {context}"),
                    message,
                ),
                other => other,
            })?;
        }
        let merged_space = merge_search_spaces(&search_spaces)?;
        dataset.validate()?;

        let mut ids = BTreeSet::new();
        let mut last_ts = f64::NEG_INFINITY;
        for c in &candidates {
            let ctx = format!("candidate `{}`", c.id);
            if !ids.insert(c.id.as_str()) {
                return Err(validation(ctx, "duplicate candidate id"));
            }
            if !c.timestamp.is_finite() || c.timestamp < 0.0 {
                return Err(validation(ctx, "timestamp must be a finite, non-negative number"));
            }
            if c.timestamp < last_ts {
                return Err(validation(ctx, "timestamps must be non-decreasing"));
            }
            last_ts = c.timestamp;
            for (name, perf) in [
                ("train_performance", c.train_performance),
                ("validation_performance", c.validation_performance),
            ] {
                if let Some(p) = perf {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(validation(ctx.clone(), format!("{name} {p} outside [0, 1]")));
                    }
                }
            }
            if c.fit_duration < 0.0 || c.predict_duration < 0.0 {
                return Err(validation(ctx.clone(), "durations must be non-negative"));
            }
            c.pipeline.validate(&ctx)?;
            merged_space.check_config(&ctx, &c.config)?;
        }
        if let Some(ens) = &ensemble {
            let mut total = 0.0;
            for m in &ens.members {
                if !ids.contains(m.candidate_id.as_str()) {
                    return Err(validation(
                        format!("ensemble member `{}`", m.candidate_id),
                        "unknown candidate id",
                    ));
                }
                if !(m.weight >= 0.0) {
                    return Err(validation(
                        format!("ensemble member `{}`", m.candidate_id),
                        "weight must be non-negative",
                    ));
                }
                total += m.weight;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(validation("ensemble", format!("weights sum to {total}, expected 1")));
            }
        }
        Ok(RunHistory {
            run_id,
            metric_name,
            task: Task::Classification,
            search_spaces,
            candidates,
            ensemble,
            dataset,
            merged_space,
        })
    }

    /// Union of all search spaces of the run.
    pub fn merged_space(&self) -> &SearchSpace {
        &self.merged_space
    }

    pub fn candidate(&self, id: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.id == id)
    }

    /// Candidates in merge order: timestamp, then id.
    pub fn ordered_candidates(&self) -> Vec<&Candidate> {
        let mut v: Vec<&Candidate> = self.candidates.iter().collect();
        v.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
        v
    }

    pub fn scored(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.is_scored())
    }
}
