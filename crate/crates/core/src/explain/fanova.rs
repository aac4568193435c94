//! Functional ANOVA over a random-forest regressor of configuration to
//! validation performance: single and pairwise variance shares computed
//! exactly from the tree partitions.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{exp, ln, sample_sd};
use crate::ml::tree::{Tree, TreeParams, TreeTarget};
use crate::model::{Config, Domain, HpValue, RunHistory, SearchSpace};

pub const MIN_SCORED_CANDIDATES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FanovaOptions {
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    /// Points per marginal axis (numeric hyperparameters).
    pub grid_points: usize,
    /// Restrict to candidates whose pipeline signature matches.
    pub structure: Option<String>,
    /// Pairs are formed among at most this many of the most important
    /// single hyperparameters.
    pub max_pair_hyperparameters: usize,
    pub seed: u64,
}

impl Default for FanovaOptions {
    fn default() -> Self {
        FanovaOptions {
            n_trees: 16,
            min_samples_leaf: 2,
            grid_points: 20,
            structure: None,
            max_pair_hyperparameters: 12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub hyperparameter: String,
    /// Raw values for numeric hyperparameters, choice indices otherwise.
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Marginal {
    /// Mean and across-tree sd of the marginal prediction per axis point.
    Curve { axis: Axis, mean: Vec<f64>, sd: Vec<f64> },
    /// `mean[i][j]` at `(x.values[i], y.values[j])`.
    Grid { x: Axis, y: Axis, mean: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    /// One name for single effects, two for interactions.
    pub hyperparameters: Vec<String>,
    pub importance: f64,
    /// Across-tree standard deviation.
    pub sd: f64,
    pub marginal: Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub entries: Vec<ImportanceEntry>,
    pub n_candidates: usize,
    /// Trees with non-zero total variance that entered the averages.
    pub n_trees: usize,
    pub structure: Option<String>,
}

impl ImportanceTable {
    pub fn single(&self, name: &str) -> Option<&ImportanceEntry> {
        self.entries
            .iter()
            .find(|e| e.hyperparameters.len() == 1 && e.hyperparameters[0] == name)
    }

    pub fn pair(&self, a: &str, b: &str) -> Option<&ImportanceEntry> {
        self.entries.iter().find(|e| {
            e.hyperparameters.len() == 2
                && ((e.hyperparameters[0] == a && e.hyperparameters[1] == b)
                    || (e.hyperparameters[0] == b && e.hyperparameters[1] == a))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoding {
    Linear,
    Log,
    Choice,
}

/// Regression forest over encoded configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceForest {
    pub trees: Vec<Tree>,
    pub names: Vec<String>,
    /// Encoded domain box per hyperparameter.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    encodings: Vec<Encoding>,
    domains: Vec<Domain>,
}

impl ImportanceForest {
    fn layout(space: &SearchSpace) -> (Vec<f64>, Vec<f64>, Vec<Encoding>) {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut enc = Vec::new();
        for hp in &space.hyperparameters {
            let (l, u, e) = match &hp.domain {
                Domain::Float { lower, upper, log } if *log => (ln(*lower), ln(*upper), Encoding::Log),
                Domain::Float { lower, upper, .. } => (*lower, *upper, Encoding::Linear),
                Domain::Integer { lower, upper, log } if *log => {
                    (ln(*lower as f64 - 0.5).max(ln(0.5)), ln(*upper as f64 + 0.5), Encoding::Log)
                }
                Domain::Integer { lower, upper, .. } => (*lower as f64 - 0.5, *upper as f64 + 0.5, Encoding::Linear),
                Domain::Categorical { choices } => (-0.5, choices.len() as f64 - 0.5, Encoding::Choice),
            };
            lower.push(l);
            upper.push(u);
            enc.push(e);
        }
        (lower, upper, enc)
    }

    /// Encodes a complete configuration (log-scaled values in log space,
    /// choices as indices).
    pub fn encode(&self, config: &Config) -> Vec<f64> {
        self.names
            .iter()
            .zip(self.encodings.iter().zip(&self.domains))
            .map(|(name, (e, d))| {
                let v = config.get(name);
                match e {
                    Encoding::Choice => v.and_then(|v| d.choice_index(v)).map_or(0.0, |i| i as f64),
                    Encoding::Linear => v.and_then(HpValue::as_f64).unwrap_or(0.0),
                    Encoding::Log => ln(v.and_then(HpValue::as_f64).unwrap_or(1.0)),
                }
            })
            .collect()
    }

    pub fn fit(space: &SearchSpace, configs: &[Config], performance: &[f64], options: &FanovaOptions) -> Self {
        let (lower, upper, encodings) = Self::layout(space);
        let mut forest = ImportanceForest {
            trees: Vec::new(),
            names: space.hyperparameters.iter().map(|h| h.name.clone()).collect(),
            lower,
            upper,
            encodings,
            domains: space.hyperparameters.iter().map(|h| h.domain.clone()).collect(),
        };
        let p = forest.names.len();
        let x: Vec<f64> = configs.iter().flat_map(|c| forest.encode(c)).collect();
        let n = configs.len();
        let params = TreeParams {
            min_samples_leaf: options.min_samples_leaf.max(1),
            ..TreeParams::new()
        };
        let mut master = ChaCha8Rng::seed_from_u64(options.seed);
        forest.trees = (0..options.n_trees)
            .map(|_| {
                let mut rng = ChaCha8Rng::seed_from_u64(master.random());
                let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                Tree::fit(&x, p, &boot, TreeTarget::Values(performance), params, None)
            })
            .collect();
        forest
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)[0]).sum::<f64>() / self.trees.len().max(1) as f64
    }

    /// Axis points in encoded units plus their reported values.
    fn axis(&self, d: usize, points: usize) -> (Vec<f64>, Axis) {
        let hyperparameter = self.names[d].clone();
        match (&self.domains[d], self.encodings[d]) {
            (Domain::Categorical { choices }, _) => {
                let enc: Vec<f64> = (0..choices.len()).map(|i| i as f64).collect();
                (
                    enc.clone(),
                    Axis {
                        hyperparameter,
                        values: enc,
                        labels: Some(choices.iter().map(HpValue::label).collect()),
                    },
                )
            }
            (domain, e) => {
                let (lo, hi, _) = domain.bounds().expect("numeric");
                let (a, b) = if e == Encoding::Log { (ln(lo), ln(hi)) } else { (lo, hi) };
                let k = points.max(2);
                let enc: Vec<f64> = (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect();
                let values = enc.iter().map(|v| if e == Encoding::Log { exp(*v) } else { *v }).collect();
                (
                    enc,
                    Axis {
                        hyperparameter,
                        values,
                        labels: None,
                    },
                )
            }
        }
    }
}

/// Per-tree exact decomposition.
struct Decomposition {
    /// Leaf value and per-dimension `[lo, hi]` in encoded units.
    leaves: Vec<(f64, Vec<(f64, f64)>)>,
    cuts: Vec<Vec<f64>>,
    /// Per leaf, per dimension: share of the domain covered.
    frac: Vec<Vec<f64>>,
    mean: f64,
    variance: f64,
}

impl Decomposition {
    fn new(tree: &Tree, lower: &[f64], upper: &[f64]) -> Self {
        let p = lower.len();
        let mut leaves = Vec::new();
        let mut stack = vec![(0usize, lower.iter().zip(upper).map(|(l, u)| (*l, *u)).collect::<Vec<_>>())];
        while let Some((i, bounds)) = stack.pop() {
            let node = &tree.nodes[i];
            match node.feature {
                None => leaves.push((node.value[0], bounds)),
                Some(f) => {
                    let t = node.threshold.clamp(bounds[f].0, bounds[f].1);
                    let mut l = bounds.clone();
                    l[f].1 = t;
                    let mut r = bounds;
                    r[f].0 = t;
                    stack.push((node.right, r));
                    stack.push((node.left, l));
                }
            }
        }
        let mut cuts: Vec<Vec<f64>> = (0..p).map(|d| vec![lower[d], upper[d]]).collect();
        for (_, b) in &leaves {
            for d in 0..p {
                cuts[d].push(b[d].0);
                cuts[d].push(b[d].1);
            }
        }
        for c in cuts.iter_mut() {
            c.sort_by(f64::total_cmp);
            c.dedup();
        }
        let frac: Vec<Vec<f64>> = leaves
            .iter()
            .map(|(_, b)| {
                (0..p)
                    .map(|d| {
                        let w = upper[d] - lower[d];
                        if w > 0.0 {
                            (b[d].1 - b[d].0) / w
                        } else {
                            1.0
                        }
                    })
                    .collect()
            })
            .collect();
        let vol: Vec<f64> = frac.iter().map(|f| f.iter().product()).collect();
        let mean: f64 = leaves.iter().zip(&vol).map(|((v, _), w)| v * w).sum();
        let variance = leaves
            .iter()
            .zip(&vol)
            .map(|((v, _), w)| w * (v - mean) * (v - mean))
            .sum();
        Decomposition {
            leaves,
            cuts,
            frac,
            mean,
            variance,
        }
    }

    fn cell_range(&self, d: usize, lo: f64, hi: f64) -> (usize, usize) {
        let c = &self.cuts[d];
        let a = c.partition_point(|v| *v < lo);
        let b = c.partition_point(|v| *v < hi);
        (a, b)
    }

    fn widths(&self, d: usize) -> Vec<f64> {
        let c = &self.cuts[d];
        let total = c[c.len() - 1] - c[0];
        c.windows(2)
            .map(|w| if total > 0.0 { (w[1] - w[0]) / total } else { 1.0 })
            .collect()
    }

    fn weight_without(&self, leaf: usize, skip: &[usize]) -> f64 {
        self.frac[leaf]
            .iter()
            .enumerate()
            .filter(|(d, _)| !skip.contains(d))
            .map(|(_, f)| f)
            .product()
    }

    /// Marginal prediction per cell of dimension `d`.
    fn single(&self, d: usize) -> Vec<f64> {
        let cells = self.cuts[d].len() - 1;
        let mut diff = vec![0.0; cells + 1];
        for (k, (v, b)) in self.leaves.iter().enumerate() {
            let (s, e) = self.cell_range(d, b[d].0, b[d].1);
            if s < e {
                let w = v * self.weight_without(k, &[d]);
                diff[s] += w;
                diff[e] -= w;
            }
        }
        let mut acc = 0.0;
        diff[..cells]
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect()
    }

    /// Marginal prediction per cell of dimensions `(d, e)`, row-major in `d`.
    fn pair(&self, d: usize, e: usize) -> Vec<f64> {
        let (nd, ne) = (self.cuts[d].len() - 1, self.cuts[e].len() - 1);
        let w = ne + 1;
        let mut diff = vec![0.0; (nd + 1) * w];
        for (k, (v, b)) in self.leaves.iter().enumerate() {
            let (s0, e0) = self.cell_range(d, b[d].0, b[d].1);
            let (s1, e1) = self.cell_range(e, b[e].0, b[e].1);
            if s0 < e0 && s1 < e1 {
                let x = v * self.weight_without(k, &[d, e]);
                diff[s0 * w + s1] += x;
                diff[s0 * w + e1] -= x;
                diff[e0 * w + s1] -= x;
                diff[e0 * w + e1] += x;
            }
        }
        for i in 0..=nd {
            for j in 1..=ne {
                diff[i * w + j] += diff[i * w + j - 1];
            }
        }
        for i in 1..=nd {
            for j in 0..=ne {
                diff[i * w + j] += diff[(i - 1) * w + j];
            }
        }
        (0..nd).flat_map(|i| (0..ne).map(move |j| (i, j))).map(|(i, j)| diff[i * w + j]).collect()
    }

    fn single_variance(&self, d: usize, marginal: &[f64]) -> f64 {
        self.widths(d)
            .iter()
            .zip(marginal)
            .map(|(w, a)| w * (a - self.mean) * (a - self.mean))
            .sum()
    }

    fn pair_variance(&self, d: usize, e: usize, marginal: &[f64]) -> f64 {
        let (wd, we) = (self.widths(d), self.widths(e));
        let ne = we.len();
        let mut total = 0.0;
        for (i, a) in wd.iter().enumerate() {
            for (j, b) in we.iter().enumerate() {
                let m = marginal[i * ne + j];
                total += a * b * (m - self.mean) * (m - self.mean);
            }
        }
        total
    }

    fn cell(&self, d: usize, x: f64) -> usize {
        let c = &self.cuts[d];
        let cells = c.len() - 1;
        c[1..cells].partition_point(|v| *v < x).min(cells - 1)
    }
}

/// Hyperparameter importance over the scored candidates of a run,
/// configurations padded with defaults of `merged`.
pub fn hp_importance(history: &RunHistory, merged: &SearchSpace, options: &FanovaOptions) -> Result<ImportanceTable> {
    let scored: Vec<_> = history
        .ordered_candidates()
        .into_iter()
        .filter(|c| c.is_scored())
        .filter(|c| options.structure.as_ref().is_none_or(|s| c.pipeline.signature() == *s))
        .collect();
    if scored.len() < MIN_SCORED_CANDIDATES {
        return Err(Error::InsufficientData(alloc::format!(
            "importance needs at least {MIN_SCORED_CANDIDATES} scored candidates, found {}",
            scored.len()
        )));
    }
    if options.n_trees == 0 {
        return Err(Error::Contract("at least one tree is required".into()));
    }
    let configs: Vec<Config> = scored.iter().map(|c| merged.pad_with_defaults(&c.config)).collect();
    let perf: Vec<f64> = scored.iter().map(|c| c.validation_performance.unwrap_or(0.0)).collect();
    let forest = ImportanceForest::fit(merged, &configs, &perf, options);
    let p = forest.names.len();

    let decomps: Vec<Decomposition> = forest
        .trees
        .iter()
        .map(|t| Decomposition::new(t, &forest.lower, &forest.upper))
        .collect();
    let informative_idx: Vec<usize> = (0..decomps.len())
        .filter(|&t| decomps[t].variance > 1e-14 * (1.0 + decomps[t].mean * decomps[t].mean))
        .collect();

    let singles: Vec<Vec<Vec<f64>>> = decomps.iter().map(|t| (0..p).map(|d| t.single(d)).collect()).collect();
    let axes: Vec<(Vec<f64>, Axis)> = (0..p).map(|d| forest.axis(d, options.grid_points)).collect();

    let summarize = |vals: Vec<f64>| -> (f64, f64) {
        if vals.is_empty() {
            (0.0, 0.0)
        } else {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            (m, if vals.len() > 1 { sample_sd(&vals) } else { 0.0 })
        }
    };
    let mut entries = Vec::new();
    let mut single_share = vec![vec![0.0; p]; decomps.len()];
    for (t, dec) in decomps.iter().enumerate() {
        for d in 0..p {
            single_share[t][d] = dec.single_variance(d, &singles[t][d]);
        }
    }
    for d in 0..p {
        let (importance, sd) = summarize(
            informative_idx
                .iter()
                .map(|&t| single_share[t][d] / decomps[t].variance)
                .collect(),
        );
        let (enc, axis) = &axes[d];
        let per_point: Vec<Vec<f64>> = enc
            .iter()
            .map(|x| {
                decomps
                    .iter()
                    .zip(&singles)
                    .map(|(dec, s)| s[d][dec.cell(d, *x)])
                    .collect()
            })
            .collect();
        let (mean, sds): (Vec<f64>, Vec<f64>) = per_point.into_iter().map(summarize).unzip();
        entries.push(ImportanceEntry {
            hyperparameters: vec![forest.names[d].clone()],
            importance,
            sd,
            marginal: Marginal::Curve {
                axis: axis.clone(),
                mean,
                sd: sds,
            },
        });
    }

    let mut ranked: Vec<usize> = (0..p).collect();
    ranked.sort_by(|&a, &b| entries[b].importance.total_cmp(&entries[a].importance).then(a.cmp(&b)));
    ranked.truncate(options.max_pair_hyperparameters);
    ranked.sort_unstable();
    for (i, &d) in ranked.iter().enumerate() {
        for &e in &ranked[i + 1..] {
            let pairs: Vec<Vec<f64>> = decomps.iter().map(|t| t.pair(d, e)).collect();
            let (importance, sd) = summarize(
                informative_idx
                    .iter()
                    .map(|&t| {
                        let dec = &decomps[t];
                        let joint = dec.pair_variance(d, e, &pairs[t]);
                        ((joint - single_share[t][d] - single_share[t][e]) / dec.variance).max(0.0)
                    })
                    .collect(),
            );
            let (ex, ax) = &axes[d];
            let (ey, ay) = &axes[e];
            let mean = ex
                .iter()
                .map(|x| {
                    ey.iter()
                        .map(|y| {
                            decomps
                                .iter()
                                .zip(&pairs)
                                .map(|(dec, g)| {
                                    let ne = dec.cuts[e].len() - 1;
                                    g[dec.cell(d, *x) * ne + dec.cell(e, *y)]
                                })
                                .sum::<f64>()
                                / decomps.len() as f64
                        })
                        .collect()
                })
                .collect();
            entries.push(ImportanceEntry {
                hyperparameters: vec![forest.names[d].clone(), forest.names[e].clone()],
                importance,
                sd,
                marginal: Marginal::Grid {
                    x: ax.clone(),
                    y: ay.clone(),
                    mean,
                },
            });
        }
    }
    Ok(ImportanceTable {
        entries,
        n_candidates: scored.len(),
        n_trees: informative_idx.len(),
        structure: options.structure.clone(),
    })
}
