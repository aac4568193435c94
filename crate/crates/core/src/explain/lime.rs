use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve;
use crate::math::{argmax, exp, sqrt, variance};
use crate::ml::PredictionOracle;
use crate::model::{Column, ColumnData, Frame};

pub const DEFAULT_LIME_SAMPLES: usize = 1000;
/// Kernel width is this factor times `sqrt(p)`.
pub const KERNEL_WIDTH_FACTOR: f64 = 0.75;
const MAX_WIDENINGS: usize = 3;
const RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimeOptions {
    pub n_samples: usize,
    pub seed: u64,
    /// Defaults to the instance's predicted class.
    pub target_class: Option<usize>,
    /// Defaults to `0.75 * sqrt(p)`.
    pub kernel_width: Option<f64>,
}

impl Default for LimeOptions {
    fn default() -> Self {
        LimeOptions {
            n_samples: DEFAULT_LIME_SAMPLES,
            seed: 0,
            target_class: None,
            kernel_width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub row: usize,
    /// Oracle probabilities for the explained row.
    pub probabilities: Vec<f64>,
    pub target_class: usize,
    pub features: Vec<String>,
    /// Signed weight per feature: per standard deviation for numeric
    /// features, for "same category as the instance" otherwise.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub kernel_width: f64,
    pub n_samples: usize,
    /// Weighted R² of the local fit.
    pub score: f64,
}

/// Weighted linear fit to the oracle around `row` of `data`.
///
/// Numeric features are perturbed with Gaussian noise of the column's
/// standard deviation, categorical ones resampled from the column. Samples
/// are weighted by `sqrt(exp(-d² / w²))` of their standardized distance to
/// the instance. When fewer than `p + 1` samples carry effective weight the
/// width is doubled, at most three times.
pub fn local_surrogate(
    oracle: &dyn PredictionOracle,
    data: &Frame,
    row: usize,
    options: LimeOptions,
) -> Result<LocalExplanation> {
    let n = data.n_rows();
    if row >= n {
        return Err(crate::error::not_found("row", format!("{row}").as_str()));
    }
    if options.n_samples < 2 {
        return Err(Error::Contract("at least two samples are required".into()));
    }
    let p = data.n_cols();
    let instance = data.select_rows(&[row]);
    let probabilities = oracle.predict_proba(&instance)?.remove(0);
    let target = options.target_class.unwrap_or_else(|| argmax(&probabilities));
    if target >= probabilities.len() {
        return Err(Error::Contract(format!("target class {target} out of range")));
    }

    let sds: Vec<f64> = data
        .columns
        .iter()
        .map(|c| match &c.data {
            ColumnData::Numeric(v) => {
                let finite: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
                sqrt(variance(&finite))
            }
            ColumnData::Categorical { .. } => 0.0,
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let m = options.n_samples;
    // Interpretable representation, one row per sample; sample 0 is the
    // instance itself.
    let mut z = vec![0.0; m * p];
    let mut columns = Vec::with_capacity(p);
    for (j, c) in data.columns.iter().enumerate() {
        match &c.data {
            ColumnData::Numeric(v) => {
                let x0 = v[row];
                let sd = sds[j];
                let mut out = Vec::with_capacity(m);
                for s in 0..m {
                    let e: f64 = if s == 0 { 0.0 } else { StandardNormal.sample(&mut rng) };
                    out.push(if x0.is_nan() { x0 } else { x0 + e * sd });
                    z[s * p + j] = if sd > 0.0 { e } else { 0.0 };
                }
                columns.push(Column::numeric(&c.name, out));
            }
            ColumnData::Categorical { vocabulary, codes } => {
                let x0 = codes[row];
                let mut out = Vec::with_capacity(m);
                for s in 0..m {
                    let code = if s == 0 { x0 } else { codes[rng.random_range(0..n)] };
                    out.push(code);
                    z[s * p + j] = f64::from(u8::from(code == x0));
                }
                columns.push(Column {
                    name: c.name.clone(),
                    data: ColumnData::Categorical {
                        vocabulary: vocabulary.clone(),
                        codes: out,
                    },
                });
            }
        }
    }
    let samples = Frame { columns };
    let y: Vec<f64> = oracle.predict_proba(&samples)?.iter().map(|q| q[target]).collect();

    // Squared distance: numeric offsets are already in sd units;
    // categorical features count 1 when they differ.
    let dist2: Vec<f64> = (0..m)
        .map(|s| {
            data.columns
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let v = z[s * p + j];
                    if c.data.is_numeric() {
                        v * v
                    } else {
                        1.0 - v
                    }
                })
                .sum()
        })
        .collect();

    let mut width = options
        .kernel_width
        .unwrap_or(KERNEL_WIDTH_FACTOR * sqrt(p.max(1) as f64));
    let mut widenings = 0;
    let weights = loop {
        let w: Vec<f64> = dist2.iter().map(|d| sqrt(exp(-d / (width * width)))).collect();
        let total: f64 = w.iter().sum();
        let sq: f64 = w.iter().map(|v| v * v).sum();
        let effective = if sq > 0.0 { total * total / sq } else { 0.0 };
        if effective >= (p + 1) as f64 {
            break w;
        }
        if widenings == MAX_WIDENINGS {
            return Err(Error::Degenerate(format!(
                "kernel of width {width} leaves {effective:.2} effective samples"
            )));
        }
        width *= 2.0;
        widenings += 1;
    };

    // Weighted ridge with an unpenalized intercept (last coefficient).
    let q = p + 1;
    let mut a = vec![0.0; q * q];
    let mut b = vec![0.0; q];
    for s in 0..m {
        let w = weights[s];
        let row_z = |j: usize| if j < p { z[s * p + j] } else { 1.0 };
        for i in 0..q {
            let zi = row_z(i);
            b[i] += w * zi * y[s];
            for j in i..q {
                a[i * q + j] += w * zi * row_z(j);
            }
        }
    }
    for i in 0..q {
        for j in 0..i {
            a[i * q + j] = a[j * q + i];
        }
        if i < p {
            a[i * q + i] += RIDGE;
        }
    }
    let coef = solve(a, b, q).ok_or_else(|| Error::Degenerate("local design matrix is singular".into()))?;

    let total_w: f64 = weights.iter().sum();
    let y_mean = weights.iter().zip(&y).map(|(w, v)| w * v).sum::<f64>() / total_w;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for s in 0..m {
        let fit: f64 = (0..p).map(|j| coef[j] * z[s * p + j]).sum::<f64>() + coef[p];
        ss_res += weights[s] * (y[s] - fit) * (y[s] - fit);
        ss_tot += weights[s] * (y[s] - y_mean) * (y[s] - y_mean);
    }
    Ok(LocalExplanation {
        row,
        probabilities,
        target_class: target,
        features: data.names().into_iter().map(String::from).collect(),
        weights: coef[..p].to_vec(),
        intercept: coef[p],
        kernel_width: width,
        n_samples: m,
        score: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    })
}
