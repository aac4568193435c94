//! Weighted soft-vote ensembles: per-record member comparison and decision
//! surfaces over a shared two-component PCA basis.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::argmax;
use crate::ml::metrics::accuracy;
use crate::ml::{fit, principal_axes, stratified_sample, stratified_split, PredictionOracle, VALIDATION_FRACTION};
use crate::model::{Column, ColumnData, Frame, RunHistory};

pub const SURFACE_RESOLUTION: usize = 64;
pub const SURFACE_PADDING: f64 = 0.05;
const WEIGHT_TOLERANCE: f64 = 1e-6;

/// One weighted ensemble member.
pub struct Member<'a> {
    pub candidate_id: String,
    pub weight: f64,
    pub oracle: &'a dyn PredictionOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    /// Per row, per class.
    pub probabilities: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Per member: weight after renormalization, zero when it failed.
    pub effective_weights: Vec<f64>,
    /// Indices of members whose evaluation failed.
    pub failed: Vec<usize>,
    pub warnings: Vec<String>,
    /// Per member, per row; `None` for failed members.
    #[serde(skip)]
    pub member_probabilities: Vec<Option<Vec<Vec<f64>>>>,
}

fn member_proba(m: &Member<'_>, frame: &Frame) -> Result<Vec<Vec<f64>>> {
    let x = frame.select_columns(&m.oracle.input_columns())?;
    let p = m.oracle.predict_proba(&x)?;
    if p.len() != frame.n_rows() {
        return Err(Error::Oracle(format!("{} rows returned for {}", p.len(), frame.n_rows())));
    }
    Ok(p)
}

/// Weighted soft vote. Weights must sum to one. A member that fails is
/// dropped, the remaining weights are renormalized and a warning is
/// attached; when every member fails the error is returned.
pub fn ensemble_predict(members: &[Member<'_>], frame: &Frame) -> Result<EnsemblePrediction> {
    if members.is_empty() {
        return Err(Error::Contract("an ensemble needs at least one member".into()));
    }
    let total: f64 = members.iter().map(|m| m.weight).sum();
    if members.iter().any(|m| !(m.weight >= 0.0)) || (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::Contract(format!("member weights sum to {total}, expected 1")));
    }
    let n_classes = members.iter().map(|m| m.oracle.n_classes()).max().unwrap_or(0);
    let mut failed = Vec::new();
    let mut warnings = Vec::new();
    let mut outputs = Vec::with_capacity(members.len());
    let mut last_error = None;
    for (i, m) in members.iter().enumerate() {
        match member_proba(m, frame) {
            Ok(p) => outputs.push(Some(p)),
            Err(e) => {
                warnings.push(format!("member `{}` failed: {e}", m.candidate_id));
                failed.push(i);
                outputs.push(None);
                last_error = Some(e);
            }
        }
    }
    let alive: f64 = members
        .iter()
        .zip(&outputs)
        .filter(|(_, o)| o.is_some())
        .map(|(m, _)| m.weight)
        .sum();
    if outputs.iter().all(Option::is_none) {
        return Err(last_error.expect("at least one member failed"));
    }
    if alive <= 0.0 {
        return Err(Error::Degenerate("all surviving members have zero weight".into()));
    }
    let effective_weights: Vec<f64> = members
        .iter()
        .zip(&outputs)
        .map(|(m, o)| if o.is_some() { m.weight / alive } else { 0.0 })
        .collect();
    let n = frame.n_rows();
    let mut probabilities = vec![vec![0.0; n_classes]; n];
    for (w, out) in effective_weights.iter().zip(&outputs) {
        if let Some(p) = out {
            for (acc, row) in probabilities.iter_mut().zip(p) {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += w * v;
                }
            }
        }
    }
    let labels = probabilities.iter().map(|p| argmax(p)).collect();
    Ok(EnsemblePrediction {
        probabilities,
        labels,
        effective_weights,
        failed,
        warnings,
        member_probabilities: outputs,
    })
}

/// Column-wise encoding used for the surface basis: numerics as is with
/// missing cells at the column mean, categoricals one-hot.
#[derive(Debug, Clone, PartialEq)]
struct Encoder {
    columns: Vec<(String, Encoded)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Encoded {
    Numeric { fill: f64 },
    OneHot { vocabulary: Vec<String> },
}

impl Encoder {
    fn fit(frame: &Frame) -> Self {
        let columns = frame
            .columns
            .iter()
            .map(|c| {
                let enc = match &c.data {
                    ColumnData::Numeric(v) => {
                        let real: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
                        Encoded::Numeric {
                            fill: if real.is_empty() { 0.0 } else { crate::math::mean(&real) },
                        }
                    }
                    ColumnData::Categorical { vocabulary, .. } => Encoded::OneHot {
                        vocabulary: vocabulary.clone(),
                    },
                };
                (c.name.clone(), enc)
            })
            .collect();
        Encoder { columns }
    }

    fn width(&self) -> usize {
        self.columns
            .iter()
            .map(|(_, e)| match e {
                Encoded::Numeric { .. } => 1,
                Encoded::OneHot { vocabulary } => vocabulary.len(),
            })
            .sum()
    }

    fn encode(&self, frame: &Frame) -> Vec<f64> {
        let (n, p) = (frame.n_rows(), self.width());
        let mut x = vec![0.0; n * p];
        let mut off = 0;
        for ((_, e), col) in self.columns.iter().zip(&frame.columns) {
            match (e, &col.data) {
                (Encoded::Numeric { fill }, ColumnData::Numeric(v)) => {
                    for r in 0..n {
                        x[r * p + off] = if v[r].is_nan() { *fill } else { v[r] };
                    }
                    off += 1;
                }
                (Encoded::OneHot { vocabulary }, ColumnData::Categorical { codes, .. }) => {
                    for r in 0..n {
                        if let Some(c) = codes[r] {
                            x[r * p + off + c as usize] = 1.0;
                        }
                    }
                    off += vocabulary.len();
                }
                _ => unreachable!("encoder fitted on this layout"),
            }
        }
        x
    }

    /// Back to a frame: numerics verbatim, categoricals by the largest
    /// one-hot coordinate.
    fn decode(&self, x: &[f64], n: usize) -> Frame {
        let p = self.width();
        let mut off = 0;
        let mut columns = Vec::with_capacity(self.columns.len());
        for (name, e) in &self.columns {
            let data = match e {
                Encoded::Numeric { .. } => {
                    off += 1;
                    ColumnData::Numeric((0..n).map(|r| x[r * p + off - 1]).collect())
                }
                Encoded::OneHot { vocabulary } => {
                    let k = vocabulary.len();
                    let codes = (0..n)
                        .map(|r| (k > 0).then(|| argmax(&x[r * p + off..r * p + off + k]) as u32))
                        .collect();
                    off += k;
                    ColumnData::Categorical {
                        vocabulary: vocabulary.clone(),
                        codes,
                    }
                }
            };
            columns.push(Column { name: name.clone(), data });
        }
        Frame { columns }
    }
}

/// Shared two-component projection of the encoded features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub encoded_columns: Vec<String>,
    pub means: Vec<f64>,
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
}

impl PcaBasis {
    pub fn project(&self, x: &[f64]) -> [f64; 2] {
        let mut z = [0.0; 2];
        for (k, c) in self.components.iter().enumerate() {
            z[k] = x.iter().zip(&self.means).zip(c).map(|((v, m), w)| (v - m) * w).sum();
        }
        z
    }

    pub fn inverse(&self, z: [f64; 2]) -> Vec<f64> {
        self.means
            .iter()
            .enumerate()
            .map(|(j, m)| m + z[0] * self.components[0][j] + z[1] * self.components[1][j])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSurface {
    /// Member candidate id, or `None` for the ensemble itself.
    pub candidate_id: Option<String>,
    /// `cells[iy][ix]` holds a class index; `None` when the member failed.
    pub cells: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSet {
    pub basis: PcaBasis,
    pub resolution: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Embedded data points.
    pub points: Vec<[f64; 2]>,
    /// One per member in order, then the ensemble.
    pub surfaces: Vec<DecisionSurface>,
    pub warnings: Vec<String>,
}

impl SurfaceSet {
    /// Cell centre of column `ix`, row `iy`.
    pub fn centre(&self, ix: usize, iy: usize) -> [f64; 2] {
        let r = self.resolution as f64;
        [
            self.x_min + (self.x_max - self.x_min) * (ix as f64 + 0.5) / r,
            self.y_min + (self.y_max - self.y_min) * (iy as f64 + 0.5) / r,
        ]
    }

    pub fn ensemble(&self) -> &DecisionSurface {
        self.surfaces.last().expect("ensemble surface")
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = (hi - lo) * SURFACE_PADDING;
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Decision surfaces of every member and of the ensemble on a
/// `resolution²` grid over the padded bounds of the projected data. Grid
/// centres are mapped back to feature space through the basis, which is
/// lossy beyond two encoded dimensions.
pub fn decision_surfaces(members: &[Member<'_>], data: &Frame, resolution: usize) -> Result<SurfaceSet> {
    if resolution == 0 {
        return Err(Error::Contract("surface resolution must be positive".into()));
    }
    let encoder = Encoder::fit(data);
    let p = encoder.width();
    let n = data.n_rows();
    if p < 2 {
        return Err(Error::Contract(format!("{p} encoded dimension(s), at least 2 are required")));
    }
    if n == 0 {
        return Err(Error::Degenerate("no rows to project".into()));
    }
    let x = encoder.encode(data);
    let (means, comps, values) = principal_axes(&x, n, p, 2);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if !(total > 1e-12) {
        return Err(Error::Degenerate("zero-variance data has no decision surface".into()));
    }
    let basis = PcaBasis {
        encoded_columns: encoded_names(&encoder),
        means,
        components: [comps[0].clone(), comps[1].clone()],
        explained_variance: [values[0].max(0.0), values[1].max(0.0)],
    };
    let points: Vec<[f64; 2]> = (0..n).map(|r| basis.project(&x[r * p..(r + 1) * p])).collect();
    let (x_min, x_max) = padded(
        points.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min),
        points.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y_min, y_max) = padded(
        points.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min),
        points.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max),
    );
    let mut set = SurfaceSet {
        basis,
        resolution,
        x_min,
        x_max,
        y_min,
        y_max,
        points,
        surfaces: Vec::new(),
        warnings: Vec::new(),
    };
    let cells = resolution * resolution;
    let mut grid = Vec::with_capacity(cells * p);
    for iy in 0..resolution {
        for ix in 0..resolution {
            grid.extend(set.basis.inverse(set.centre(ix, iy)));
        }
    }
    let grid = encoder.decode(&grid, cells);
    let pred = ensemble_predict(members, &grid)?;
    let to_cells = |labels: Vec<usize>| labels.chunks(resolution).map(<[usize]>::to_vec).collect();
    for (m, out) in members.iter().zip(&pred.member_probabilities) {
        set.surfaces.push(DecisionSurface {
            candidate_id: Some(m.candidate_id.clone()),
            cells: out.as_ref().map(|p| to_cells(p.iter().map(|r| argmax(r)).collect())),
        });
    }
    set.surfaces.push(DecisionSurface {
        candidate_id: None,
        cells: Some(to_cells(pred.labels)),
    });
    set.warnings = pred.warnings;
    Ok(set)
}

fn encoded_names(encoder: &Encoder) -> Vec<String> {
    encoder
        .columns
        .iter()
        .flat_map(|(name, e)| match e {
            Encoded::Numeric { .. } => vec![name.clone()],
            Encoded::OneHot { vocabulary } => vocabulary.iter().map(|v| format!("{name}={v}")).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    #[default]
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRow {
    pub candidate_id: String,
    pub weight: f64,
    pub effective_weight: f64,
    /// As recorded by the optimizer.
    pub validation_performance: Option<f64>,
    /// Recomputed on the analysed split; `None` when the member failed.
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    /// Dataset row indices.
    pub rows: Vec<usize>,
    pub truth: Vec<usize>,
    /// `members[row][member]`.
    pub members: Vec<Vec<Option<usize>>>,
    pub ensemble: Vec<usize>,
    pub ensemble_probabilities: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleAnalysis {
    pub split: Split,
    pub class_labels: Vec<String>,
    pub members: Vec<MemberRow>,
    pub ensemble_accuracy: f64,
    pub predictions: PredictionMatrix,
    pub surfaces: SurfaceSet,
    pub warnings: Vec<String>,
}

/// Oracle standing in for a member that could not be fitted.
struct Unavailable {
    message: String,
    n_classes: usize,
}

impl PredictionOracle for Unavailable {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn input_columns(&self) -> Vec<String> {
        Vec::new()
    }

    fn predict_proba(&self, _: &Frame) -> Result<Vec<Vec<f64>>> {
        Err(Error::Oracle(self.message.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub seed: u64,
    pub split: Split,
    /// Row cap for the surface projection.
    pub surface_rows: Option<usize>,
    pub resolution: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            seed: 0,
            split: Split::Validation,
            surface_rows: None,
            resolution: SURFACE_RESOLUTION,
        }
    }
}

/// Refits every member of the run's ensemble and compares them on the
/// chosen split. `Ok(None)` when the run records no ensemble.
pub fn analyze(history: &RunHistory, options: AnalysisOptions) -> Result<Option<EnsembleAnalysis>> {
    let Some(spec) = &history.ensemble else {
        return Ok(None);
    };
    let data = &history.dataset;
    let k = data.n_classes();
    let (train, validation) = stratified_split(&data.target, k, VALIDATION_FRACTION, options.seed);
    let rows = match options.split {
        Split::Train => train,
        Split::Validation => validation,
    };
    let subset = data.select_rows(&rows);

    let fitted: Vec<core::result::Result<_, Unavailable>> = spec
        .members
        .iter()
        .map(|m| {
            let cand = history.candidate(&m.candidate_id).expect("validated ensemble member");
            fit(cand, data, options.seed).map_err(|e| Unavailable {
                message: e.to_string(),
                n_classes: k,
            })
        })
        .collect();
    let members: Vec<Member<'_>> = spec
        .members
        .iter()
        .zip(&fitted)
        .map(|(m, f)| Member {
            candidate_id: m.candidate_id.clone(),
            weight: m.weight,
            oracle: match f {
                Ok(fp) => fp as &dyn PredictionOracle,
                Err(u) => u as &dyn PredictionOracle,
            },
        })
        .collect();

    let pred = ensemble_predict(&members, &subset.frame)?;
    let member_labels: Vec<Option<Vec<usize>>> = pred
        .member_probabilities
        .iter()
        .map(|o| o.as_ref().map(|p| p.iter().map(|r| argmax(r)).collect()))
        .collect();
    let table = spec
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| MemberRow {
            candidate_id: m.candidate_id.clone(),
            weight: m.weight,
            effective_weight: pred.effective_weights[i],
            validation_performance: history.candidate(&m.candidate_id).and_then(|c| c.validation_performance),
            accuracy: member_labels[i].as_ref().map(|l| accuracy(&subset.target, l)),
            error: pred
                .failed
                .contains(&i)
                .then(|| pred.warnings[pred.failed.iter().position(|&f| f == i).unwrap()].clone()),
        })
        .collect();
    let predictions = PredictionMatrix {
        truth: subset.target.clone(),
        members: (0..rows.len())
            .map(|r| member_labels.iter().map(|l| l.as_ref().map(|l| l[r])).collect())
            .collect(),
        ensemble: pred.labels.clone(),
        ensemble_probabilities: pred.probabilities.clone(),
        rows: rows.clone(),
    };
    let surface_frame = match options.surface_rows {
        Some(cap) if cap < subset.n_rows() => {
            let pick = stratified_sample(&subset.target, k, cap, options.seed);
            subset.frame.select_rows(&pick)
        }
        _ => subset.frame.clone(),
    };
    let surfaces = decision_surfaces(&members, &surface_frame, options.resolution)?;
    Ok(Some(EnsembleAnalysis {
        split: options.split,
        class_labels: data.class_labels.clone(),
        members: table,
        ensemble_accuracy: accuracy(&subset.target, &pred.labels),
        predictions,
        surfaces,
        warnings: pred.warnings,
    }))
}
