use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{not_found, Error, Result};
use crate::math::{exp, floor, ln};
use crate::model::{Domain, HpValue, RunHistory};

/// Numeric histogram resolution.
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub candidate_id: String,
    pub timestamp: f64,
    pub value: HpValue,
    /// `None` for crashed candidates.
    pub performance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Histogram {
    /// `edges` has `counts.len() + 1` entries in raw units; with `log` set
    /// the bins are equal width in the log domain. The last bin is closed.
    Numeric {
        edges: Vec<f64>,
        counts: Vec<usize>,
        log: bool,
    },
    Categorical {
        choices: Vec<String>,
        counts: Vec<usize>,
    },
}

impl Histogram {
    pub fn counts(&self) -> &[usize] {
        match self {
            Histogram::Numeric { counts, .. } | Histogram::Categorical { counts, .. } => counts,
        }
    }

    pub fn total(&self) -> usize {
        self.counts().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSeries {
    pub hyperparameter: String,
    pub points: Vec<SamplePoint>,
    pub histogram: Histogram,
}

/// Every candidate that sampled `hp`, in timestamp order, with a histogram
/// over the hyperparameter's merged domain (`bins` equal-width bins for
/// numeric domains, one bin per choice otherwise).
pub fn sampling_history(history: &RunHistory, hp: &str, bins: usize) -> Result<SamplingSeries> {
    let space = history.merged_space();
    let def = space
        .get(hp)
        .ok_or_else(|| not_found("hyperparameter", hp))?;
    if bins == 0 {
        return Err(Error::Contract("histogram needs at least one bin".into()));
    }
    let points: Vec<SamplePoint> = history
        .ordered_candidates()
        .into_iter()
        .filter_map(|c| {
            let value = c.config.get(hp)?;
            space.is_active(hp, &c.config).then(|| SamplePoint {
                candidate_id: c.id.clone(),
                timestamp: c.timestamp,
                value: value.clone(),
                performance: c.validation_performance,
            })
        })
        .collect();

    let histogram = match &def.domain {
        Domain::Categorical { choices } => {
            let mut counts = vec![0; choices.len()];
            for p in &points {
                if let Some(i) = def.domain.choice_index(&p.value) {
                    counts[i] += 1;
                }
            }
            Histogram::Categorical {
                choices: choices.iter().map(HpValue::label).collect(),
                counts,
            }
        }
        domain => {
            let (lower, upper, log) = domain.bounds().expect("numeric domain");
            let warp = |v: f64| if log { ln(v) } else { v };
            let (lo, hi) = (warp(lower), warp(upper));
            let width = (hi - lo) / bins as f64;
            let edges = (0..=bins)
                .map(|i| {
                    let e = if i == bins { hi } else { lo + width * i as f64 };
                    if i == 0 {
                        lower
                    } else if i == bins {
                        upper
                    } else if log {
                        exp(e)
                    } else {
                        e
                    }
                })
                .collect();
            let mut counts = vec![0; bins];
            for p in &points {
                let Some(v) = p.value.as_f64() else { continue };
                let k = if hi > lo {
                    floor((warp(v) - lo) * bins as f64 / (hi - lo))
                } else {
                    0.0
                };
                counts[(k.max(0.0) as usize).min(bins - 1)] += 1;
            }
            Histogram::Numeric { edges, counts, log }
        }
    };
    Ok(SamplingSeries {
        hyperparameter: hp.into(),
        points,
        histogram,
    })
}
