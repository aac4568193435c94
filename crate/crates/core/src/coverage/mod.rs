//! Search-space coverage: heterogeneous config distance, boundary anchors,
//! a 2-D classical MDS embedding and a k-NN performance heatmap.

mod distance;
mod mds;
mod surface;

pub use distance::{
    boundary_candidates, distance, BoundaryCandidates, ConfigEncoder, DistanceMatrix,
    MAX_BOUNDARY_HYPERPARAMETERS,
};
pub use mds::embed;
pub use surface::{
    fit_surface, heatmap, Heatmap, KnnSurface, HEATMAP_PADDING, HEATMAP_RESOLUTION,
    SURFACE_NEIGHBOURS,
};

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Config, RunHistory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPoint {
    /// `None` for boundary candidates.
    pub candidate_id: Option<String>,
    pub x: f64,
    pub y: f64,
    pub performance: Option<f64>,
    pub timestamp: Option<f64>,
}

impl EmbeddedPoint {
    pub fn is_boundary(&self) -> bool {
        self.candidate_id.is_none()
    }
}

/// One frame of the coverage view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEmbedding {
    pub at: f64,
    pub points: Vec<EmbeddedPoint>,
    /// Absent while no scored candidate is visible.
    pub heatmap: Option<Heatmap>,
    pub boundary_skipped: bool,
}

impl CoverageEmbedding {
    pub fn candidates(&self) -> impl Iterator<Item = &EmbeddedPoint> {
        self.points.iter().filter(|p| !p.is_boundary())
    }

    pub fn boundaries(&self) -> impl Iterator<Item = &EmbeddedPoint> {
        self.points.iter().filter(|p| p.is_boundary())
    }
}

/// Embedding over every scored candidate of a run plus the boundary
/// candidates, computed once. Frames filter it by time so shared points keep
/// their coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageModel {
    candidates: Vec<EmbeddedPoint>,
    boundaries: Vec<EmbeddedPoint>,
    boundary_skipped: bool,
    all_coords: Vec<[f64; 2]>,
    resolution: usize,
}

impl CoverageModel {
    /// Crashed candidates have no performance and no place on the surface;
    /// they are left out of the embedding.
    pub fn build(history: &RunHistory) -> Result<Self> {
        let merged = history.merged_space();
        let encoder = ConfigEncoder::new(merged)?;
        let scored: Vec<_> = history
            .ordered_candidates()
            .into_iter()
            .filter(|c| c.is_scored())
            .collect();
        let boundary = boundary_candidates(merged);
        let configs: Vec<Config> = scored
            .iter()
            .map(|c| merged.pad_with_defaults(&c.config))
            .chain(boundary.configs.iter().cloned())
            .collect();
        let encoded = configs
            .iter()
            .map(|c| encoder.encode(c))
            .collect::<Result<Vec<_>>>()?;
        let coords = embed(&DistanceMatrix::from_encoded(&encoder, &encoded))?;
        let candidates = scored
            .iter()
            .zip(&coords)
            .map(|(c, p)| EmbeddedPoint {
                candidate_id: Some(c.id.clone()),
                x: p[0],
                y: p[1],
                performance: c.validation_performance,
                timestamp: Some(c.timestamp),
            })
            .collect();
        let boundaries = coords[scored.len()..]
            .iter()
            .map(|p| EmbeddedPoint {
                candidate_id: None,
                x: p[0],
                y: p[1],
                performance: None,
                timestamp: None,
            })
            .collect();
        Ok(CoverageModel {
            candidates,
            boundaries,
            boundary_skipped: boundary.skipped,
            all_coords: coords,
            resolution: HEATMAP_RESOLUTION,
        })
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution.max(1);
        self
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Frame with candidates whose timestamp is `<= at`. The heatmap spans
    /// the full embedding so its grid does not move between frames either.
    pub fn frame(&self, at: f64) -> Result<CoverageEmbedding> {
        let visible: Vec<&EmbeddedPoint> = self
            .candidates
            .iter()
            .filter(|p| p.timestamp.is_some_and(|t| t <= at))
            .collect();
        let heatmap = if visible.is_empty() {
            None
        } else {
            let pts: Vec<[f64; 2]> = visible.iter().map(|p| [p.x, p.y]).collect();
            let perf: Vec<f64> = visible.iter().filter_map(|p| p.performance).collect();
            let surface = fit_surface(&pts, &perf)?;
            Some(heatmap(&surface, &self.all_coords, self.resolution)?)
        };
        Ok(CoverageEmbedding {
            at,
            points: visible
                .into_iter()
                .chain(&self.boundaries)
                .cloned()
                .collect(),
            heatmap,
            boundary_skipped: self.boundary_skipped,
        })
    }
}

/// One-shot time-lapse frame; build a [`CoverageModel`] to scrub cheaply.
pub fn coverage_timelapse(history: &RunHistory, at: f64) -> Result<CoverageEmbedding> {
    CoverageModel::build(history)?.frame(at)
}
