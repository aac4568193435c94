//! Fitted column transforms. Each keeps the column names it was fitted on
//! and refuses frames with a different layout.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::math::sqrt;
use crate::model::{Column, ColumnData, Frame};

#[derive(Debug, Clone, PartialEq)]
pub enum Fill {
    Numeric(f64),
    Categorical(String),
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    /// Numeric columns only; categoricals pass through.
    MeanImputer(Vec<Fill>),
    MostFrequentImputer(Vec<Fill>),
    /// `(offset, scale)` per numeric column.
    StandardScaler(Vec<Option<(f64, f64)>>),
    MinMaxScaler(Vec<Option<(f64, f64)>>),
    /// Vocabulary per categorical column.
    OneHot(Vec<Option<Vec<String>>>),
    Pca {
        means: Vec<f64>,
        /// `k` rows of `p` loadings.
        components: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedTransform {
    pub inputs: Vec<String>,
    pub kind: Transform,
}

fn finite(values: &[f64]) -> impl Iterator<Item = f64> + '_ {
    values.iter().copied().filter(|v| !v.is_nan())
}

fn most_frequent_numeric(values: &[f64]) -> Option<f64> {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for v in finite(values) {
        let v = if v == 0.0 { 0.0 } else { v };
        counts.entry(v.to_bits()).or_insert((v, 0)).1 += 1;
    }
    counts
        .values()
        .fold(None, |best: Option<(f64, usize)>, &(v, c)| match best {
            Some((bv, bc)) if bc > c || (bc == c && bv <= v) => Some((bv, bc)),
            _ => Some((v, c)),
        })
        .map(|(v, _)| v)
}

fn most_frequent_code(vocabulary: &[String], codes: &[Option<u32>]) -> Option<String> {
    let mut counts = vec![0usize; vocabulary.len()];
    for c in codes.iter().flatten() {
        counts[*c as usize] += 1;
    }
    let (best, &n) = counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    (n > 0).then(|| vocabulary[best].clone())
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = finite(values).count();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mean = finite(values).sum::<f64>() / n as f64;
    let var = finite(values).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let sd = sqrt(var);
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

impl FittedTransform {
    pub fn fit(primitive: &str, frame: &Frame, n_components: Option<usize>) -> Result<Self> {
        let per_column = |f: &dyn Fn(&ColumnData) -> Fill| frame.columns.iter().map(|c| f(&c.data)).collect();
        let kind = match primitive {
            "mean-imputer" => Transform::MeanImputer(per_column(&|d| match d {
                ColumnData::Numeric(v) => {
                    let n = finite(v).count();
                    Fill::Numeric(if n == 0 { 0.0 } else { finite(v).sum::<f64>() / n as f64 })
                }
                ColumnData::Categorical { .. } => Fill::Skip,
            })),
            "most-frequent-imputer" => Transform::MostFrequentImputer(per_column(&|d| match d {
                ColumnData::Numeric(v) => Fill::Numeric(most_frequent_numeric(v).unwrap_or(0.0)),
                ColumnData::Categorical { vocabulary, codes } => most_frequent_code(vocabulary, codes)
                    .map_or(Fill::Skip, Fill::Categorical),
            })),
            "standard-scaler" => Transform::StandardScaler(
                frame
                    .columns
                    .iter()
                    .map(|c| match &c.data {
                        ColumnData::Numeric(v) => Some(mean_sd(v)),
                        _ => None,
                    })
                    .collect(),
            ),
            "min-max-scaler" => Transform::MinMaxScaler(
                frame
                    .columns
                    .iter()
                    .map(|c| match &c.data {
                        ColumnData::Numeric(v) => {
                            let lo = finite(v).fold(f64::INFINITY, f64::min);
                            let hi = finite(v).fold(f64::NEG_INFINITY, f64::max);
                            if lo.is_finite() {
                                Some((lo, if hi > lo { hi - lo } else { 1.0 }))
                            } else {
                                Some((0.0, 1.0))
                            }
                        }
                        _ => None,
                    })
                    .collect(),
            ),
            "one-hot-encoder" => Transform::OneHot(
                frame
                    .columns
                    .iter()
                    .map(|c| match &c.data {
                        ColumnData::Categorical { vocabulary, .. } => Some(vocabulary.clone()),
                        _ => None,
                    })
                    .collect(),
            ),
            "pca" => fit_pca(frame, n_components)?,
            other => return Err(Error::UnsupportedPrimitive(other.into())),
        };
        Ok(FittedTransform {
            inputs: frame.names().into_iter().map(String::from).collect(),
            kind,
        })
    }

    fn check(&self, frame: &Frame) -> Result<()> {
        if frame.names() != self.inputs.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Contract(format!(
                "transform fitted on columns {:?} received {:?}",
                self.inputs,
                frame.names()
            )));
        }
        Ok(())
    }

    pub fn output_names(&self) -> Vec<String> {
        match &self.kind {
            Transform::OneHot(vocab) => self
                .inputs
                .iter()
                .zip(vocab)
                .flat_map(|(name, v)| match v {
                    Some(v) => v.iter().map(|x| format!("{name}={x}")).collect(),
                    None => vec![name.clone()],
                })
                .collect(),
            Transform::Pca { components, .. } => {
                (1..=components.len()).map(|k| format!("pc{k}")).collect()
            }
            _ => self.inputs.clone(),
        }
    }

    pub fn apply(&self, frame: &Frame) -> Result<Frame> {
        self.check(frame)?;
        let n = frame.n_rows();
        let columns = match &self.kind {
            Transform::MeanImputer(fills) | Transform::MostFrequentImputer(fills) => frame
                .columns
                .iter()
                .zip(fills)
                .map(|(c, fill)| {
                    let data = match (&c.data, fill) {
                        (ColumnData::Numeric(v), Fill::Numeric(f)) => {
                            ColumnData::Numeric(v.iter().map(|x| if x.is_nan() { *f } else { *x }).collect())
                        }
                        (ColumnData::Categorical { vocabulary, codes }, Fill::Categorical(label)) => {
                            let mut vocabulary = vocabulary.clone();
                            let code = match vocabulary.iter().position(|v| v == label) {
                                Some(p) => p as u32,
                                None => {
                                    vocabulary.push(label.clone());
                                    (vocabulary.len() - 1) as u32
                                }
                            };
                            ColumnData::Categorical {
                                codes: codes.iter().map(|c| Some(c.unwrap_or(code))).collect(),
                                vocabulary,
                            }
                        }
                        (d, _) => d.clone(),
                    };
                    Column {
                        name: c.name.clone(),
                        data,
                    }
                })
                .collect(),
            Transform::StandardScaler(stats) => scale(frame, stats, |v, (m, s)| (v - m) / s),
            Transform::MinMaxScaler(stats) => scale(frame, stats, |v, (lo, r)| (v - lo) / r),
            Transform::OneHot(vocab) => {
                let mut out = Vec::new();
                for (c, v) in frame.columns.iter().zip(vocab) {
                    match (&c.data, v) {
                        (ColumnData::Categorical { vocabulary, codes }, Some(fitted)) => {
                            for label in fitted {
                                let hit = vocabulary.iter().position(|x| x == label);
                                out.push(Column::numeric(
                                    &format!("{}={}", c.name, label),
                                    codes
                                        .iter()
                                        .map(|k| match (k, hit) {
                                            (Some(k), Some(h)) if *k as usize == h => 1.0,
                                            _ => 0.0,
                                        })
                                        .collect(),
                                ));
                            }
                        }
                        _ => out.push(c.clone()),
                    }
                }
                out
            }
            Transform::Pca { means, components } => {
                let x = frame.to_matrix();
                let p = means.len();
                if x.iter().any(|v| v.is_nan()) {
                    return Err(Error::Contract("pca input has missing values".into()));
                }
                components
                    .iter()
                    .enumerate()
                    .map(|(k, w)| {
                        Column::numeric(
                            &format!("pc{}", k + 1),
                            (0..n)
                                .map(|r| (0..p).map(|j| (x[r * p + j] - means[j]) * w[j]).sum())
                                .collect(),
                        )
                    })
                    .collect()
            }
        };
        Ok(Frame { columns })
    }
}

fn scale(frame: &Frame, stats: &[Option<(f64, f64)>], f: impl Fn(f64, (f64, f64)) -> f64) -> Vec<Column> {
    frame
        .columns
        .iter()
        .zip(stats)
        .map(|(c, s)| match (&c.data, s) {
            (ColumnData::Numeric(v), Some(s)) => Column::numeric(&c.name, v.iter().map(|x| f(*x, *s)).collect()),
            _ => c.clone(),
        })
        .collect()
}

/// Principal axes with the largest-magnitude loading made positive.
pub fn principal_axes(x: &[f64], n: usize, p: usize, k: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let means: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|r| x[r * p + j]).sum::<f64>() / n.max(1) as f64)
        .collect();
    let mut cov = vec![0.0; p * p];
    for r in 0..n {
        for a in 0..p {
            let da = x[r * p + a] - means[a];
            for b in a..p {
                cov[a * p + b] += da * (x[r * p + b] - means[b]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for a in 0..p {
        for b in a..p {
            cov[a * p + b] /= denom;
            cov[b * p + a] = cov[a * p + b];
        }
    }
    let eig = symmetric_eigen(&cov, p);
    let mut comps = Vec::with_capacity(k);
    for v in eig.vectors.into_iter().take(k) {
        let mut best = 0;
        for j in 1..p {
            if v[j].abs() > v[best].abs() + 1e-12 {
                best = j;
            }
        }
        let sign = if v[best] < 0.0 { -1.0 } else { 1.0 };
        comps.push(v.into_iter().map(|w| w * sign).collect());
    }
    (means, comps, eig.values.into_iter().take(k).collect())
}

fn fit_pca(frame: &Frame, n_components: Option<usize>) -> Result<Transform> {
    if frame.has_missing() {
        return Err(Error::Contract("pca input has missing values".into()));
    }
    let (n, p) = (frame.n_rows(), frame.n_cols());
    let k = n_components.unwrap_or(p).min(p).min(n.max(1));
    let (means, components, _) = principal_axes(&frame.to_matrix(), n, p, k);
    Ok(Transform::Pca { means, components })
}
