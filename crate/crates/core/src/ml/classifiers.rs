//! Classifier zoo. Categorical inputs are read as ordinal codes; only the
//! tree models accept missing values.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::Params;
use super::tree::{Tree, TreeParams, TreeTarget};
use crate::error::{Error, Result};
use crate::math::{exp, ln, powf, sqrt};
use crate::model::Frame;

pub const LOGISTIC_EPOCHS: usize = 500;
pub const LOGISTIC_LEARNING_RATE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Tree(Tree),
    Forest(Vec<Tree>),
    Knn {
        x: Vec<f64>,
        y: Vec<usize>,
        k: usize,
        by_distance: bool,
        manhattan: bool,
    },
    Logistic {
        means: Vec<f64>,
        scales: Vec<f64>,
        /// One row of `p + 1` weights per class, bias last.
        weights: Vec<Vec<f64>>,
    },
    NaiveBayes {
        log_priors: Vec<Option<f64>>,
        means: Vec<Vec<f64>>,
        vars: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedClassifier {
    pub inputs: Vec<String>,
    pub n_classes: usize,
    pub model: Classifier,
}

pub fn is_classifier(primitive: &str) -> bool {
    matches!(
        primitive,
        "decision-tree" | "random-forest" | "k-nearest-neighbors" | "logistic-regression" | "gaussian-naive-bayes"
    )
}

fn softmax(scores: &mut [f64]) {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = if s.is_finite() { exp(*s - m) } else { 0.0 };
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

fn tree_params(params: &Params) -> Result<TreeParams> {
    Ok(TreeParams {
        max_depth: params.opt_usize("max_depth")?,
        min_samples_leaf: params.usize_or("min_samples_leaf", 1)?,
        max_leaf_nodes: params.opt_usize("max_leaf_nodes")?,
        max_features: None,
    })
}

impl FittedClassifier {
    pub(crate) fn fit(
        primitive: &str,
        params: &Params,
        frame: &Frame,
        y: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        let n = frame.n_rows();
        let p = frame.n_cols();
        let x = frame.to_matrix();
        let failed = |m: &str| Error::FitFailed {
            candidate: params.candidate.to_string(),
            message: format!("{primitive}: {m}"),
        };
        if n == 0 {
            return Err(failed("no training rows"));
        }
        let tree_like = matches!(primitive, "decision-tree" | "random-forest");
        if !tree_like && x.iter().any(|v| v.is_nan()) {
            return Err(failed("input has missing values; add an imputer"));
        }
        let rows: Vec<usize> = (0..n).collect();
        let target = TreeTarget::Classes { y, n_classes };
        let model = match primitive {
            "decision-tree" => Classifier::Tree(Tree::fit(&x, p, &rows, target, tree_params(params)?, None)),
            "random-forest" => {
                let n_trees = params.usize_or("n_estimators", 10)?;
                let mut tp = tree_params(params)?;
                tp.max_leaf_nodes = None;
                tp.max_features = Some(((sqrt(p as f64)) as usize).max(1));
                let mut master = ChaCha8Rng::seed_from_u64(seed);
                let trees = (0..n_trees)
                    .map(|_| {
                        let mut rng = ChaCha8Rng::seed_from_u64(master.random());
                        let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                        Tree::fit(&x, p, &boot, target, tp, Some(&mut rng))
                    })
                    .collect();
                Classifier::Forest(trees)
            }
            "k-nearest-neighbors" => {
                let k = params.usize_or("n_neighbors", 5)?;
                let weights = params.str_or("weights", "uniform");
                let metric = params.usize_or("p", 2)?;
                if !matches!(weights.as_str(), "uniform" | "distance") || !matches!(metric, 1 | 2) {
                    return Err(failed("weights must be uniform|distance and p 1|2"));
                }
                Classifier::Knn {
                    x,
                    y: y.to_vec(),
                    k: k.min(n),
                    by_distance: weights == "distance",
                    manhattan: metric == 1,
                }
            }
            "logistic-regression" => {
                let c = params.f64_or("C", 1.0)?;
                if c <= 0.0 {
                    return Err(failed("C must be positive"));
                }
                fit_logistic(&x, n, p, y, n_classes, c)
            }
            "gaussian-naive-bayes" => {
                let smoothing = params.f64_or("var_smoothing", 1e-9)?;
                fit_naive_bayes(&x, n, p, y, n_classes, smoothing)
            }
            other => return Err(Error::UnsupportedPrimitive(other.into())),
        };
        Ok(FittedClassifier {
            inputs: frame.names().into_iter().map(String::from).collect(),
            n_classes,
            model,
        })
    }

    pub fn predict_proba(&self, frame: &Frame) -> Result<Vec<Vec<f64>>> {
        if frame.names() != self.inputs.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Contract(format!(
                "classifier fitted on columns {:?} received {:?}",
                self.inputs,
                frame.names()
            )));
        }
        let p = frame.n_cols();
        let x = frame.to_matrix();
        if !matches!(self.model, Classifier::Tree(_) | Classifier::Forest(_)) && x.iter().any(|v| v.is_nan()) {
            return Err(Error::Contract("classifier input has missing values".into()));
        }
        Ok((0..frame.n_rows())
            .map(|r| self.predict_row(&x[r * p..(r + 1) * p]))
            .collect())
    }

    fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let k = self.n_classes;
        let mut out = match &self.model {
            Classifier::Tree(t) => t.predict(row).to_vec(),
            Classifier::Forest(trees) => {
                let mut acc = vec![0.0; k];
                for t in trees {
                    for (a, v) in acc.iter_mut().zip(t.predict(row)) {
                        *a += v;
                    }
                }
                acc
            }
            Classifier::Knn {
                x,
                y,
                k: nn,
                by_distance,
                manhattan,
            } => {
                let p = row.len();
                let mut d: Vec<(f64, usize)> = y
                    .iter()
                    .enumerate()
                    .map(|(i, _)| {
                        let t = &x[i * p..(i + 1) * p];
                        let dist = if *manhattan {
                            t.iter().zip(row).map(|(a, b)| (a - b).abs()).sum()
                        } else {
                            sqrt(t.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum())
                        };
                        (dist, i)
                    })
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let near = &d[..*nn];
                let mut acc = vec![0.0; k];
                let exact = near.iter().any(|(dist, _)| *dist == 0.0);
                for &(dist, i) in near {
                    let w = match (*by_distance, exact) {
                        (false, _) => 1.0,
                        (true, true) => f64::from(u8::from(dist == 0.0)),
                        (true, false) => 1.0 / dist,
                    };
                    acc[y[i]] += w;
                }
                acc
            }
            Classifier::Logistic {
                means,
                scales,
                weights,
            } => {
                let z: Vec<f64> = row
                    .iter()
                    .zip(means.iter().zip(scales))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect();
                let mut s: Vec<f64> = weights.iter().map(|w| score(w, &z)).collect();
                softmax(&mut s);
                s
            }
            Classifier::NaiveBayes {
                log_priors,
                means,
                vars,
            } => {
                let mut s: Vec<f64> = (0..k)
                    .map(|c| match log_priors[c] {
                        None => f64::NEG_INFINITY,
                        Some(lp) => {
                            lp + row
                                .iter()
                                .zip(means[c].iter().zip(&vars[c]))
                                .map(|(v, (m, var))| {
                                    -0.5 * ln(2.0 * core::f64::consts::PI * var) - (v - m) * (v - m) / (2.0 * var)
                                })
                                .sum::<f64>()
                        }
                    })
                    .collect();
                softmax(&mut s);
                s
            }
        };
        let total: f64 = out.iter().sum();
        if total > 0.0 && total.is_finite() {
            for v in out.iter_mut() {
                *v /= total;
            }
        } else {
            out = vec![1.0 / k as f64; k];
        }
        out
    }
}

fn score(w: &[f64], z: &[f64]) -> f64 {
    let p = z.len();
    w[..p].iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + w[p]
}

fn fit_logistic(x: &[f64], n: usize, p: usize, y: &[usize], k: usize, c: f64) -> Classifier {
    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    for j in 0..p {
        let col: Vec<f64> = (0..n).map(|r| x[r * p + j]).collect();
        means[j] = crate::math::mean(&col);
        let sd = sqrt(crate::math::variance(&col));
        scales[j] = if sd > 0.0 { sd } else { 1.0 };
    }
    let z: Vec<f64> = (0..n * p).map(|i| (x[i] - means[i % p]) / scales[i % p]).collect();
    let mut weights = vec![vec![0.0; p + 1]; k];
    let lambda = 1.0 / (c * n as f64);
    let mut probs = vec![0.0; k];
    let mut grad = vec![vec![0.0; p + 1]; k];
    for _ in 0..LOGISTIC_EPOCHS {
        for g in grad.iter_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for r in 0..n {
            let row = &z[r * p..(r + 1) * p];
            for (cls, w) in weights.iter().enumerate() {
                probs[cls] = score(w, row);
            }
            softmax(&mut probs);
            for cls in 0..k {
                let err = probs[cls] - f64::from(u8::from(y[r] == cls));
                let g = &mut grad[cls];
                for j in 0..p {
                    g[j] += err * row[j];
                }
                g[p] += err;
            }
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            for j in 0..=p {
                let reg = if j < p { lambda * w[j] } else { 0.0 };
                w[j] -= LOGISTIC_LEARNING_RATE * (g[j] / n as f64 + reg);
            }
        }
    }
    Classifier::Logistic {
        means,
        scales,
        weights,
    }
}

fn fit_naive_bayes(x: &[f64], n: usize, p: usize, y: &[usize], k: usize, smoothing: f64) -> Classifier {
    let max_var = (0..p)
        .map(|j| crate::math::variance(&(0..n).map(|r| x[r * p + j]).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let eps = smoothing * if max_var > 0.0 { max_var } else { 1.0 };
    let mut log_priors = vec![None; k];
    let mut means = vec![vec![0.0; p]; k];
    let mut vars = vec![vec![eps; p]; k];
    for c in 0..k {
        let rows: Vec<usize> = (0..n).filter(|&r| y[r] == c).collect();
        if rows.is_empty() {
            continue;
        }
        log_priors[c] = Some(ln(rows.len() as f64 / n as f64));
        for j in 0..p {
            let col: Vec<f64> = rows.iter().map(|&r| x[r * p + j]).collect();
            means[c][j] = crate::math::mean(&col);
            vars[c][j] = crate::math::variance(&col) + eps;
        }
    }
    // Guard against an all-zero variance with zero smoothing.
    for v in vars.iter_mut().flatten() {
        if *v <= 0.0 {
            *v = powf(10.0, -12.0);
        }
    }
    Classifier::NaiveBayes {
        log_priors,
        means,
        vars,
    }
}
