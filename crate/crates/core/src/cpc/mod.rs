//! Extended conditional parallel coordinates: expandable step axes, nested
//! hyperparameter axes, explicit missing values and parallel sub-lanes, plus
//! per-hyperparameter sampling histories.

mod sampling;

pub use sampling::{sampling_history, Histogram, SamplePoint, SamplingSeries, DEFAULT_BINS};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::math::ln;
use crate::model::{Candidate, Domain, HpValue, RunHistory, SearchSpace};
use crate::structure::{merge_all, MergedGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AxisKind {
    Numeric { lower: f64, upper: f64, log: bool },
    Categorical { choices: Vec<String> },
}

impl AxisKind {
    fn of(domain: &Domain) -> Self {
        match domain.bounds() {
            Some((lower, upper, log)) => AxisKind::Numeric { lower, upper, log },
            None => AxisKind::Categorical {
                choices: domain
                    .choices()
                    .unwrap_or_default()
                    .iter()
                    .map(HpValue::label)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpAxis {
    pub name: String,
    pub kind: AxisKind,
    /// Hyperparameters conditioned on this one within the same algorithm.
    pub children: Vec<HpAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmAxis {
    pub primitive: String,
    /// Config-key prefix used to house hyperparameters; may be empty.
    pub prefix: String,
    pub hyperparameters: Vec<HpAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAxis {
    /// Pipeline node id shared by every candidate using this step.
    pub step: String,
    pub algorithms: Vec<AlgorithmAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    /// Steps drawn side by side in this lane.
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelRegion {
    pub split_step: String,
    /// Ordered by the first candidate that used each lane.
    pub lanes: Vec<Lane>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpcAxisTree {
    pub steps: Vec<StepAxis>,
    /// Hyperparameters no algorithm prefix claims.
    pub global: Vec<HpAxis>,
    pub regions: Vec<ParallelRegion>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", content = "name", rename_all = "lowercase")]
pub enum AxisRef {
    Step(String),
    Hyperparameter(String),
}

impl CpcAxisTree {
    /// Every axis, depth first: each step followed by its algorithms'
    /// hyperparameters, then the global ones.
    pub fn flatten(&self) -> Vec<(AxisRef, Option<&AxisKind>)> {
        fn walk<'a>(hp: &'a HpAxis, out: &mut Vec<(AxisRef, Option<&'a AxisKind>)>) {
            out.push((AxisRef::Hyperparameter(hp.name.clone()), Some(&hp.kind)));
            for c in &hp.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        for s in &self.steps {
            out.push((AxisRef::Step(s.step.clone()), None));
            for a in &s.algorithms {
                for hp in &a.hyperparameters {
                    walk(hp, &mut out);
                }
            }
        }
        for hp in &self.global {
            walk(hp, &mut out);
        }
        out
    }

    pub fn step(&self, step: &str) -> Option<&StepAxis> {
        self.steps.iter().find(|s| s.step == step)
    }

    pub fn hyperparameter_count(&self) -> usize {
        self.flatten()
            .iter()
            .filter(|(a, _)| matches!(a, AxisRef::Hyperparameter(_)))
            .count()
    }
}

/// Builds the axis tree of a run. `merged` supplies step ordering and
/// parallel regions; `history` supplies per-node config prefixes.
pub fn build_axes(merged: &MergedGraph, history: &RunHistory) -> CpcAxisTree {
    let space = history.merged_space();
    let layers = merged.layers();
    let rank: BTreeMap<&str, usize> = history
        .ordered_candidates()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.as_str(), i))
        .collect();

    // step id -> (min layer, first seen), algorithms in first-seen order
    let mut order: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut algorithms: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    let mut seen = 0usize;
    for c in history.ordered_candidates() {
        for node in &c.pipeline.nodes {
            let layer = merged
                .locate(&c.id, &node.id)
                .map_or(usize::MAX, |m| layers[m]);
            let entry = order.entry(node.id.clone()).or_insert((layer, seen));
            entry.0 = entry.0.min(layer);
            seen += 1;
            let algos = algorithms.entry(node.id.clone()).or_default();
            if !algos.iter().any(|(p, _)| *p == node.primitive) {
                algos.push((node.primitive.clone(), node.config_prefix.clone()));
            }
        }
    }
    if let Some(template) = &space.structure_template {
        for t in template {
            let next = order.len();
            order
                .entry(t.step.clone())
                .or_insert((usize::MAX, seen + next));
            let algos = algorithms.entry(t.step.clone()).or_default();
            for choice in &t.choices {
                if !algos.iter().any(|(p, _)| p == choice) {
                    algos.push((choice.clone(), String::new()));
                }
            }
        }
    }
    let mut precedes: BTreeSet<(String, String)> = BTreeSet::new();
    for c in history.ordered_candidates() {
        for e in &c.pipeline.edges {
            if e.from != e.to {
                precedes.insert((e.from.clone(), e.to.clone()));
            }
        }
    }
    let step_ids = order_steps(&order, &precedes);

    // House each hyperparameter under the algorithm with the longest
    // matching non-empty prefix; first-seen algorithm wins ties.
    let mut owner: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (h, hp) in space.hyperparameters.iter().enumerate() {
        let mut best: Option<(usize, usize, usize)> = None;
        for (s, step) in step_ids.iter().enumerate() {
            for (a, (_, prefix)) in algorithms[step].iter().enumerate() {
                if !prefix.is_empty()
                    && hp.name.starts_with(prefix.as_str())
                    && best.is_none_or(|(len, _, _)| prefix.len() > len)
                {
                    best = Some((prefix.len(), s, a));
                }
            }
        }
        if let Some((_, s, a)) = best {
            owner.insert(h, (s, a));
        }
    }

    let steps = step_ids
        .iter()
        .enumerate()
        .map(|(s, step)| StepAxis {
            step: step.clone(),
            algorithms: algorithms[step]
                .iter()
                .enumerate()
                .map(|(a, (primitive, prefix))| {
                    let members: Vec<usize> = owner
                        .iter()
                        .filter(|(_, &o)| o == (s, a))
                        .map(|(&h, _)| h)
                        .collect();
                    AlgorithmAxis {
                        primitive: primitive.clone(),
                        prefix: prefix.clone(),
                        hyperparameters: nest(space, &members),
                    }
                })
                .collect(),
        })
        .collect();
    let unowned: Vec<usize> = (0..space.len()).filter(|h| !owner.contains_key(h)).collect();

    CpcAxisTree {
        steps,
        global: nest(space, &unowned),
        regions: parallel_regions(merged, &rank),
    }
}

/// Steps in pipeline order: Kahn over the step precedence relation with
/// `(min layer, first seen)` choosing among ready steps. Steps caught in a
/// precedence cycle (pipelines disagreeing on order) follow by key.
fn order_steps(
    key: &BTreeMap<String, (usize, usize)>,
    precedes: &BTreeSet<(String, String)>,
) -> Vec<String> {
    let mut indegree: BTreeMap<&str, usize> = key.keys().map(|k| (k.as_str(), 0)).collect();
    for (_, to) in precedes {
        if let Some(d) = indegree.get_mut(to.as_str()) {
            *d += 1;
        }
    }
    let mut out: Vec<String> = Vec::with_capacity(key.len());
    let mut done: BTreeSet<&str> = BTreeSet::new();
    loop {
        let ready = indegree
            .iter()
            .filter(|(k, d)| **d == 0 && !done.contains(*k))
            .map(|(k, _)| *k)
            .min_by_key(|k| key[*k]);
        let Some(next) = ready else { break };
        done.insert(next);
        out.push(next.into());
        for (from, to) in precedes {
            if from == next {
                if let Some(d) = indegree.get_mut(to.as_str()) {
                    *d -= 1;
                }
            }
        }
    }
    let mut rest: Vec<&String> = key.keys().filter(|k| !done.contains(k.as_str())).collect();
    rest.sort_by_key(|k| key[*k]);
    out.extend(rest.into_iter().cloned());
    out
}

/// Condition-tree nesting restricted to `members` (indices into `space`).
fn nest(space: &SearchSpace, members: &[usize]) -> Vec<HpAxis> {
    let names: BTreeSet<&str> = members
        .iter()
        .map(|&h| space.hyperparameters[h].name.as_str())
        .collect();
    fn build(space: &SearchSpace, members: &[usize], names: &BTreeSet<&str>, parent: Option<&str>) -> Vec<HpAxis> {
        members
            .iter()
            .map(|&h| &space.hyperparameters[h])
            .filter(|hp| {
                let p = hp
                    .condition
                    .as_ref()
                    .map(|c| c.parent.as_str())
                    .filter(|p| names.contains(p));
                p == parent
            })
            .map(|hp| HpAxis {
                name: hp.name.clone(),
                kind: AxisKind::of(&hp.domain),
                children: build(space, members, names, Some(hp.name.as_str())),
            })
            .collect()
    }
    build(space, members, &names, None)
}

fn parallel_regions(merged: &MergedGraph, rank: &BTreeMap<&str, usize>) -> Vec<ParallelRegion> {
    let n = merged.len();
    let mut succ = alloc::vec![Vec::new(); n];
    for e in &merged.edges {
        succ[e.from].push(e.to);
    }
    let reach = |start: usize| {
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![start];
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(succ[v].iter().copied());
            }
        }
        seen
    };
    let step_of = |id: usize| -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for m in &merged.nodes[id].members {
            if !out.contains(&m.node) {
                out.push(m.node.clone());
            }
        }
        out
    };
    let mut regions = Vec::new();
    for node in 0..n {
        let mut labelled: Vec<_> = merged
            .edges
            .iter()
            .filter(|e| e.from == node && e.columns.is_some())
            .collect();
        if merged.out_degree(node) < 2 || labelled.len() < 2 {
            continue;
        }
        let first = |e: &&crate::structure::MergedEdge| {
            e.candidates
                .iter()
                .filter_map(|c| rank.get(c.as_str()).copied())
                .min()
                .unwrap_or(usize::MAX)
        };
        labelled.sort_by(|a, b| first(a).cmp(&first(b)).then(a.columns.cmp(&b.columns)));
        let reaches: Vec<BTreeSet<usize>> = labelled.iter().map(|e| reach(e.to)).collect();
        let lanes = labelled
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let mut steps = Vec::new();
                for &m in &reaches[k] {
                    if reaches
                        .iter()
                        .enumerate()
                        .all(|(j, r)| j == k || !r.contains(&m))
                    {
                        for s in step_of(m) {
                            if !steps.contains(&s) {
                                steps.push(s);
                            }
                        }
                    }
                }
                Lane {
                    columns: e.columns.clone(),
                    steps,
                }
            })
            .collect();
        regions.push(ParallelRegion {
            split_step: step_of(node).into_iter().next().unwrap_or_default(),
            lanes,
        });
    }
    regions
}

/// One polyline coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum Coordinate {
    /// `normalized` is in `[0, 1]` (log domain for log-scaled axes).
    Numeric { raw: f64, normalized: f64 },
    Categorical { value: String, index: usize },
    Missing,
}

impl Coordinate {
    pub fn is_missing(&self) -> bool {
        matches!(self, Coordinate::Missing)
    }
}

impl Serialize for Coordinate {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        match self {
            Coordinate::Numeric { raw, normalized } => {
                m.serialize_entry("missing", &false)?;
                m.serialize_entry("raw", raw)?;
                m.serialize_entry("normalized", normalized)?;
            }
            Coordinate::Categorical { value, index } => {
                m.serialize_entry("missing", &false)?;
                m.serialize_entry("value", value)?;
                m.serialize_entry("index", index)?;
            }
            Coordinate::Missing => m.serialize_entry("missing", &true)?,
        }
        m.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisValue {
    pub axis: AxisRef,
    pub value: Coordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidatePolyline {
    pub candidate_id: String,
    pub performance: Option<f64>,
    pub coordinates: Vec<AxisValue>,
}

impl CandidatePolyline {
    pub fn get(&self, axis: &AxisRef) -> Option<&Coordinate> {
        self.coordinates
            .iter()
            .find(|c| c.axis == *axis)
            .map(|c| &c.value)
    }

    pub fn present(&self) -> usize {
        self.coordinates.iter().filter(|c| !c.value.is_missing()).count()
    }
}

fn normalize(v: f64, lower: f64, upper: f64, log: bool) -> f64 {
    let (v, lo, hi) = if log {
        (ln(v), ln(lower), ln(upper))
    } else {
        (v, lower, upper)
    };
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Places `candidate` on every axis of `axes`.
pub fn project(candidate: &Candidate, axes: &CpcAxisTree) -> CandidatePolyline {
    let coordinates = axes
        .flatten()
        .into_iter()
        .map(|(axis, kind)| {
            let value = match (&axis, kind) {
                (AxisRef::Step(step), _) => candidate
                    .pipeline
                    .node(step)
                    .and_then(|node| {
                        let algos = &axes.step(step)?.algorithms;
                        let index = algos.iter().position(|a| a.primitive == node.primitive)?;
                        Some(Coordinate::Categorical {
                            value: node.primitive.clone(),
                            index,
                        })
                    })
                    .unwrap_or(Coordinate::Missing),
                (AxisRef::Hyperparameter(name), Some(kind)) => match (candidate.config.get(name), kind) {
                    (None, _) => Coordinate::Missing,
                    (Some(v), AxisKind::Numeric { lower, upper, log }) => match v.as_f64() {
                        Some(raw) => Coordinate::Numeric {
                            raw,
                            normalized: normalize(raw, *lower, *upper, *log),
                        },
                        None => Coordinate::Missing,
                    },
                    (Some(v), AxisKind::Categorical { choices }) => {
                        let label = v.label();
                        match choices.iter().position(|c| *c == label) {
                            Some(index) => Coordinate::Categorical { value: label, index },
                            None => Coordinate::Missing,
                        }
                    }
                },
                (AxisRef::Hyperparameter(_), None) => Coordinate::Missing,
            };
            AxisValue { axis, value }
        })
        .collect();
    CandidatePolyline {
        candidate_id: candidate.id.clone(),
        performance: candidate.validation_performance,
        coordinates,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrushFilter {
    /// Inclusive range over raw values.
    Range { min: f64, max: f64 },
    Choices(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrushPredicate {
    pub axis: AxisRef,
    pub filter: BrushFilter,
}

impl BrushPredicate {
    pub fn accepts(&self, line: &CandidatePolyline) -> bool {
        match (line.get(&self.axis), &self.filter) {
            (Some(Coordinate::Numeric { raw, .. }), BrushFilter::Range { min, max }) => {
                *raw >= *min && *raw <= *max
            }
            (Some(Coordinate::Categorical { value, .. }), BrushFilter::Choices(set)) => {
                set.contains(value)
            }
            _ => false,
        }
    }
}

/// Candidate ids whose polyline satisfies every predicate, in input order.
pub fn brush(lines: &[CandidatePolyline], predicates: &[BrushPredicate]) -> Vec<String> {
    lines
        .iter()
        .filter(|l| predicates.iter().all(|p| p.accepts(l)))
        .map(|l| l.candidate_id.clone())
        .collect()
}

/// Axis tree and polylines of a whole run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpcModel {
    pub axes: CpcAxisTree,
    pub polylines: Vec<CandidatePolyline>,
}

impl CpcModel {
    pub fn build(history: &RunHistory) -> Self {
        let ordered = history.ordered_candidates();
        let merged = merge_all(ordered.iter().copied());
        let axes = build_axes(&merged, history);
        let polylines = ordered.iter().map(|c| project(c, &axes)).collect();
        CpcModel { axes, polylines }
    }

    pub fn brush(&self, predicates: &[BrushPredicate]) -> Vec<String> {
        brush(&self.polylines, predicates)
    }
}

#[cfg(test)]
mod tests;
