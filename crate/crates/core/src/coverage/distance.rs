use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{validation, Result};
use crate::model::{Config, Domain, HpValue, SearchSpace};

/// Hyperparameter count above which boundary candidates are not generated.
pub const MAX_BOUNDARY_HYPERPARAMETERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Term {
    /// `value / ((max - min) · depth)` offset by `min`; `None` on a
    /// degenerate axis.
    Numeric { min: f64, denom: Option<f64> },
    Categorical { weight: f64 },
}

/// Precomputes per-hyperparameter normalization so configurations can be
/// encoded once and compared many times.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigEncoder {
    names: Vec<alloc::string::String>,
    domains: Vec<Domain>,
    terms: Vec<Term>,
}

impl ConfigEncoder {
    pub fn new(space: &SearchSpace) -> Result<Self> {
        let depths = space.depths()?;
        let mut terms = Vec::with_capacity(space.len());
        for (hp, depth) in space.hyperparameters.iter().zip(depths) {
            let depth = depth as f64;
            terms.push(match hp.domain.bounds() {
                Some((lo, hi, _)) => Term::Numeric {
                    min: lo,
                    denom: (hi > lo).then_some((hi - lo) * depth),
                },
                None => Term::Categorical {
                    weight: 1.0 / depth,
                },
            });
        }
        Ok(ConfigEncoder {
            names: space.hyperparameters.iter().map(|h| h.name.clone()).collect(),
            domains: space.hyperparameters.iter().map(|h| h.domain.clone()).collect(),
            terms,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Encodes a complete configuration: scaled numeric coordinates and
    /// categorical choice indices.
    pub fn encode(&self, config: &Config) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.terms.len()];
        for (k, ((name, domain), term)) in self
            .names
            .iter()
            .zip(&self.domains)
            .zip(&self.terms)
            .enumerate()
        {
            let value = config.get(name).ok_or_else(|| {
                validation(
                    format!("hyperparameter `{name}`"),
                    "configuration is not complete; pad it with defaults first",
                )
            })?;
            out[k] = match *term {
                Term::Numeric { min, denom } => {
                    let v = value.as_f64().ok_or_else(|| {
                        validation(format!("hyperparameter `{name}`"), "expected a number")
                    })?;
                    denom.map_or(0.0, |d| (v - min) / d)
                }
                Term::Categorical { .. } => domain.choice_index(value).ok_or_else(|| {
                    validation(
                        format!("hyperparameter `{name}`"),
                        format!("`{value}` is not a declared choice"),
                    )
                })? as f64,
            };
        }
        Ok(out)
    }

    /// Distance between two encoded configurations.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut total = 0.0;
        for ((term, x), y) in self.terms.iter().zip(a).zip(b) {
            total += match *term {
                Term::Numeric { .. } => (x - y).abs(),
                Term::Categorical { weight } => {
                    if x == y {
                        0.0
                    } else {
                        weight
                    }
                }
            };
        }
        total
    }
}

/// Depth-weighted heterogeneous distance between two complete configurations:
/// numeric terms compare min-max normalized values divided by the depth,
/// categorical terms contribute `1 / depth` when the choices differ.
pub fn distance(a: &Config, b: &Config, merged: &SearchSpace) -> Result<f64> {
    let enc = ConfigEncoder::new(merged)?;
    Ok(enc.distance(&enc.encode(a)?, &enc.encode(b)?))
}

/// Symmetric pairwise distance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_encoded(encoder: &ConfigEncoder, points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = encoder.distance(&points[i], &points[j]);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        DistanceMatrix { n, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Euclidean distances between 2-D points.
    pub fn euclidean(points: &[[f64; 2]]) -> Self {
        let n = points.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = crate::math::hypot(
                    points[i][0] - points[j][0],
                    points[i][1] - points[j][1],
                );
            }
        }
        DistanceMatrix { n, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCandidates {
    pub configs: Vec<Config>,
    /// Set when the space has more than [`MAX_BOUNDARY_HYPERPARAMETERS`]
    /// hyperparameters and generation was skipped.
    pub skipped: bool,
}

/// Corners of the merged space: `{min, max}` per numeric hyperparameter and
/// `{first, last}` choice per categorical one. The first hyperparameter
/// varies slowest.
pub fn boundary_candidates(merged: &SearchSpace) -> BoundaryCandidates {
    if merged.len() > MAX_BOUNDARY_HYPERPARAMETERS {
        return BoundaryCandidates {
            configs: Vec::new(),
            skipped: true,
        };
    }
    let mut configs = vec![Config::new()];
    for hp in &merged.hyperparameters {
        let extremes: Vec<HpValue> = match &hp.domain {
            Domain::Float { lower, upper, .. } => vec![HpValue::Float(*lower), HpValue::Float(*upper)],
            Domain::Integer { lower, upper, .. } => vec![HpValue::Int(*lower), HpValue::Int(*upper)],
            Domain::Categorical { choices } => {
                let first = choices[0].clone();
                let last = choices[choices.len() - 1].clone();
                if choices.len() == 1 {
                    vec![first]
                } else {
                    vec![first, last]
                }
            }
        };
        configs = configs
            .into_iter()
            .flat_map(|c| {
                extremes.iter().map(move |v| {
                    let mut next = c.clone();
                    next.insert(hp.name.clone(), v.clone());
                    next
                })
            })
            .collect();
    }
    if merged.is_empty() {
        configs.clear();
    }
    BoundaryCandidates {
        configs,
        skipped: false,
    }
}
