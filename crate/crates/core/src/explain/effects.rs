//! Permutation feature importance and partial dependence with ICE curves.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{not_found, Error, Result};
use crate::math::{quantile_sorted, sample_sd, sorted_copy};
use crate::ml::metrics::accuracy;
use crate::ml::PredictionOracle;
use crate::model::{ColumnData, Dataset, Frame};

pub const DEFAULT_GRID_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    /// Raw value, or the vocabulary code for categorical features.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEffect {
    pub feature: String,
    /// Mean accuracy drop over the shuffles.
    pub importance: f64,
    pub importance_sd: f64,
    pub grid: Vec<GridPoint>,
    /// `pdp[class][g]`.
    pub pdp: Vec<Vec<f64>>,
    /// `ice[row][class][g]`.
    pub ice: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEffects {
    pub class_labels: Vec<String>,
    pub baseline_accuracy: f64,
    pub n_repeats: usize,
    pub features: Vec<FeatureEffect>,
}

impl FeatureEffects {
    pub fn feature(&self, name: &str) -> Option<&FeatureEffect> {
        self.features.iter().find(|f| f.feature == name)
    }
}

fn oracle_frame(oracle: &dyn PredictionOracle, frame: &Frame) -> Result<Frame> {
    frame.select_columns(&oracle.input_columns())
}

fn with_column(frame: &Frame, col: usize, data: ColumnData) -> Frame {
    let mut f = frame.clone();
    f.columns[col].data = data;
    f
}

fn forced(data: &ColumnData, value: f64) -> ColumnData {
    match data {
        ColumnData::Numeric(v) => ColumnData::Numeric(vec![value; v.len()]),
        ColumnData::Categorical { vocabulary, codes } => ColumnData::Categorical {
            vocabulary: vocabulary.clone(),
            codes: vec![Some(value as u32); codes.len()],
        },
    }
}

/// Accuracy drop per input column over `n_repeats` seeded shuffles, as
/// `(mean, sd)` pairs in column order, plus the unshuffled accuracy.
pub fn permutation_importance(
    oracle: &dyn PredictionOracle,
    data: &Dataset,
    n_repeats: usize,
    seed: u64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if n_repeats == 0 {
        return Err(Error::Contract("at least one repeat is required".into()));
    }
    let frame = oracle_frame(oracle, &data.frame)?;
    let base = accuracy(&data.target, &oracle.predict(&frame)?);
    let n = frame.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(frame.n_cols());
    for c in 0..frame.n_cols() {
        let mut drops = Vec::with_capacity(n_repeats);
        for _ in 0..n_repeats {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let shuffled = with_column(&frame, c, frame.columns[c].data.select(&perm));
            drops.push(base - accuracy(&data.target, &oracle.predict(&shuffled)?));
        }
        let mean = drops.iter().sum::<f64>() / n_repeats as f64;
        let sd = if n_repeats > 1 { sample_sd(&drops) } else { 0.0 };
        out.push((mean, sd));
    }
    Ok((base, out))
}

/// Pointwise mean `[class][g]` and ICE curves `[row][class][g]`.
pub type PartialDependence = (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>);

/// ICE curves `[row][class][g]` and their pointwise mean `[class][g]` with
/// `feature` forced to each of `values`.
pub fn partial_dependence(
    oracle: &dyn PredictionOracle,
    frame: &Frame,
    feature: &str,
    values: &[f64],
) -> Result<PartialDependence> {
    let frame = oracle_frame(oracle, frame)?;
    let col = frame.column_index(feature).ok_or_else(|| not_found("feature", feature))?;
    let n = frame.n_rows();
    let k = oracle.n_classes();
    let mut ice = vec![vec![vec![0.0; values.len()]; k]; n];
    for (g, &v) in values.iter().enumerate() {
        let proba = oracle.predict_proba(&with_column(&frame, col, forced(&frame.columns[col].data, v)))?;
        for (r, p) in proba.iter().enumerate() {
            for (c, x) in p.iter().enumerate().take(k) {
                ice[r][c][g] = *x;
            }
        }
    }
    let pdp = (0..k)
        .map(|c| {
            (0..values.len())
                .map(|g| {
                    if n == 0 {
                        0.0
                    } else {
                        ice.iter().map(|row| row[c][g]).sum::<f64>() / n as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok((pdp, ice))
}

fn grid(data: &ColumnData, size: usize) -> Vec<GridPoint> {
    match data {
        ColumnData::Categorical { vocabulary, .. } => vocabulary
            .iter()
            .enumerate()
            .map(|(i, l)| GridPoint {
                value: i as f64,
                label: Some(l.clone()),
            })
            .collect(),
        ColumnData::Numeric(v) => {
            let sorted = sorted_copy(v);
            if sorted.is_empty() {
                return Vec::new();
            }
            let size = size.max(1);
            let mut pts: Vec<f64> = (0..size)
                .map(|i| {
                    let q = if size == 1 { 0.5 } else { i as f64 / (size - 1) as f64 };
                    quantile_sorted(&sorted, q)
                })
                .collect();
            pts.dedup();
            pts.into_iter().map(|value| GridPoint { value, label: None }).collect()
        }
    }
}

/// Permutation importance plus PDP and ICE on a quantile grid (all
/// choices for categorical features) for every input column.
pub fn feature_effects(
    oracle: &dyn PredictionOracle,
    data: &Dataset,
    n_repeats: usize,
    grid_size: usize,
    seed: u64,
) -> Result<FeatureEffects> {
    let (baseline_accuracy, importances) = permutation_importance(oracle, data, n_repeats, seed)?;
    let frame = oracle_frame(oracle, &data.frame)?;
    let mut features = Vec::with_capacity(frame.n_cols());
    for (col, (importance, importance_sd)) in frame.columns.iter().zip(importances) {
        let grid = grid(&col.data, grid_size);
        let values: Vec<f64> = grid.iter().map(|g| g.value).collect();
        let (pdp, ice) = partial_dependence(oracle, &frame, &col.name, &values)?;
        features.push(FeatureEffect {
            feature: col.name.clone(),
            importance,
            importance_sd,
            grid,
            pdp,
            ice,
        });
    }
    Ok(FeatureEffects {
        class_labels: data.class_labels.clone(),
        baseline_accuracy,
        n_repeats,
        features,
    })
}
