//! Model- and process-level explanations: global and local surrogates,
//! hyperparameter importance and feature effects.

mod effects;
mod fanova;
mod lime;
mod surrogate;

pub use effects::{DEFAULT_GRID_SIZE, feature_effects, partial_dependence, permutation_importance, FeatureEffect, FeatureEffects, GridPoint, PartialDependence};
pub use fanova::{
    hp_importance, FanovaOptions, ImportanceEntry, ImportanceForest, ImportanceTable, Marginal, MIN_SCORED_CANDIDATES,
};
pub use lime::{local_surrogate, LimeOptions, LocalExplanation, DEFAULT_LIME_SAMPLES};
pub use surrogate::{global_surrogate, NestedNode, PortableTree, SurrogateTree};

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ml::PredictionOracle;
use crate::model::Frame;

/// Oracle backed by a closure over row-major encoded feature rows.
pub struct FnOracle<F> {
    pub columns: Vec<String>,
    pub n_classes: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> PredictionOracle for FnOracle<F> {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn input_columns(&self) -> Vec<String> {
        self.columns.clone()
    }

    fn predict_proba(&self, x: &Frame) -> Result<Vec<Vec<f64>>> {
        if x.n_cols() != self.columns.len() {
            return Err(Error::Contract("column count mismatch".into()));
        }
        let p = x.n_cols();
        let m = x.to_matrix();
        Ok((0..x.n_rows()).map(|r| (self.f)(&m[r * p..(r + 1) * p])).collect())
    }
}

/// Two-class probabilities from a class-1 probability.
pub fn binary(p1: f64) -> Vec<f64> {
    let p1 = p1.clamp(0.0, 1.0);
    alloc::vec![1.0 - p1, p1]
}

#[cfg(test)]
mod tests;
