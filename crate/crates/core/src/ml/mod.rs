//! Deterministic pipeline fitting over a small primitive zoo, intermediate
//! datasets and performance reports.

mod classifiers;
pub mod metrics;
mod params;
mod preprocess;
mod split;
pub mod tree;

pub use classifiers::{is_classifier, Classifier, FittedClassifier, LOGISTIC_EPOCHS, LOGISTIC_LEARNING_RATE};
pub use preprocess::{principal_axes, Fill, FittedTransform, Transform};
pub use split::{stratified_sample, stratified_split, VALIDATION_FRACTION};

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{not_found, Error, Result};
use crate::math::argmax;
use crate::model::{Candidate, Column, ColumnData, Dataset, Frame, PipelineGraph};
use metrics::RocCurve;
use params::Params;

/// Id of the virtual data-source node every pipeline starts from.
pub const SOURCE_NODE: &str = "__source__";

pub const PRIMITIVES: [&str; 11] = [
    "mean-imputer",
    "most-frequent-imputer",
    "standard-scaler",
    "min-max-scaler",
    "one-hot-encoder",
    "pca",
    "decision-tree",
    "random-forest",
    "k-nearest-neighbors",
    "logistic-regression",
    "gaussian-naive-bayes",
];

pub fn is_supported(primitive: &str) -> bool {
    PRIMITIVES.contains(&primitive)
}

/// Anything that maps a feature frame to class probabilities.
pub trait PredictionOracle {
    fn n_classes(&self) -> usize;

    /// Column layout `predict_proba` expects.
    fn input_columns(&self) -> Vec<String>;

    /// One probability row per input row, each summing to 1.
    fn predict_proba(&self, x: &Frame) -> Result<Vec<Vec<f64>>>;

    fn predict(&self, x: &Frame) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.iter().map(|p| argmax(p)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedStep {
    Transform(FittedTransform),
    Classifier(FittedClassifier),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedNode {
    pub id: String,
    pub primitive: String,
    pub step: FittedStep,
}

/// A candidate pipeline refitted on the stratified training split.
/// Immutable after [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub candidate_id: String,
    pub pipeline: PipelineGraph,
    pub nodes: Vec<FittedNode>,
    pub class_labels: Vec<String>,
    pub input_columns: Vec<String>,
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub seed: u64,
    /// Durations as recorded by the optimizer.
    pub recorded_fit_duration: f64,
    pub recorded_predict_duration: f64,
}

fn probability_frame(proba: &[Vec<f64>], labels: &[String]) -> Frame {
    let mut columns: Vec<Column> = labels
        .iter()
        .enumerate()
        .map(|(c, l)| Column::numeric(&format!("p({l})"), proba.iter().map(|p| p[c]).collect()))
        .collect();
    columns.push(Column {
        name: "prediction".into(),
        data: ColumnData::Categorical {
            vocabulary: labels.to_vec(),
            codes: proba.iter().map(|p| Some(argmax(p) as u32)).collect(),
        },
    });
    Frame { columns }
}

/// Refits `candidate` on a seeded 75/25 stratified split of `data`.
pub fn fit(candidate: &Candidate, data: &Dataset, seed: u64) -> Result<FittedPipeline> {
    let pipeline = &candidate.pipeline;
    if let Some(bad) = pipeline.nodes.iter().find(|n| !is_supported(&n.primitive)) {
        return Err(Error::UnsupportedPrimitive(bad.primitive.clone()));
    }
    let failed = |m: String| Error::FitFailed {
        candidate: candidate.id.clone(),
        message: m,
    };
    pipeline
        .validate(&format!("candidate `{}`", candidate.id))
        .map_err(|e| failed(e.to_string()))?;
    let sink = pipeline.sink();
    for (i, n) in pipeline.nodes.iter().enumerate() {
        if (i == sink) != is_classifier(&n.primitive) {
            return Err(failed(format!(
                "node `{}` ({}): the sink must be the only classifier",
                n.id, n.primitive
            )));
        }
    }
    let (train, valid) = stratified_split(&data.target, data.n_classes(), VALIDATION_FRACTION, seed);
    let frame = data.frame.select_rows(&train);
    let y: Vec<usize> = train.iter().map(|&r| data.target[r]).collect();

    let order = pipeline.topo_order().expect("validated DAG");
    let mut outputs: Vec<Option<Frame>> = vec![None; pipeline.len()];
    let mut fitted: Vec<Option<FittedNode>> = vec![None; pipeline.len()];
    for &i in &order {
        let node = &pipeline.nodes[i];
        let input = route(pipeline, i, Some(&frame), &outputs).map_err(|e| failed(e.to_string()))?;
        let params = Params {
            config: &candidate.config,
            prefix: &node.config_prefix,
            candidate: &candidate.id,
        };
        let (step, out) = if is_classifier(&node.primitive) {
            let clf = FittedClassifier::fit(
                &node.primitive,
                &params,
                &input,
                &y,
                data.n_classes(),
                seed.wrapping_add(i as u64),
            )?;
            let out = probability_frame(&clf.predict_proba(&input)?, &data.class_labels);
            (FittedStep::Classifier(clf), out)
        } else {
            let k = params.opt_usize("n_components")?;
            let t = FittedTransform::fit(&node.primitive, &input, k).map_err(|e| match e {
                Error::UnsupportedPrimitive(p) => Error::UnsupportedPrimitive(p),
                other => failed(format!("{}: {other}", node.primitive)),
            })?;
            let out = t.apply(&input).map_err(|e| failed(e.to_string()))?;
            (FittedStep::Transform(t), out)
        };
        outputs[i] = Some(out);
        fitted[i] = Some(FittedNode {
            id: node.id.clone(),
            primitive: node.primitive.clone(),
            step,
        });
    }
    Ok(FittedPipeline {
        candidate_id: candidate.id.clone(),
        pipeline: pipeline.clone(),
        nodes: fitted.into_iter().map(|n| n.expect("all nodes fitted")).collect(),
        class_labels: data.class_labels.clone(),
        input_columns: data.frame.names().into_iter().map(String::from).collect(),
        train_rows: train,
        validation_rows: valid,
        seed,
        recorded_fit_duration: candidate.fit_duration,
        recorded_predict_duration: candidate.predict_duration,
    })
}

/// Input of node `i`: the source frame for the root, otherwise the routed
/// outputs of its predecessors concatenated in edge order.
fn route(pipeline: &PipelineGraph, i: usize, source: Option<&Frame>, outputs: &[Option<Frame>]) -> Result<Frame> {
    let incoming: Vec<_> = pipeline.incoming(i).collect();
    if incoming.is_empty() {
        return source
            .cloned()
            .ok_or_else(|| Error::Contract("source frame required".into()));
    }
    let mut parts = Vec::with_capacity(incoming.len());
    for e in incoming {
        let from = pipeline.index_of(&e.from).expect("validated edge");
        let out = outputs[from]
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("output of `{}` is not available", e.from)))?;
        parts.push(match &e.columns {
            Some(cols) => out.select_columns(cols)?,
            None => out.clone(),
        });
    }
    if parts.len() == 1 {
        return Ok(parts.pop().expect("one part"));
    }
    let mut seen = BTreeSet::new();
    for p in &parts {
        for c in &p.columns {
            if !seen.insert(c.name.clone()) {
                return Err(Error::Contract(format!(
                    "join into `{}` produces duplicate column `{}`",
                    pipeline.nodes[i].id, c.name
                )));
            }
        }
    }
    Frame::hconcat(parts)
}

impl FittedPipeline {
    fn index(&self, node_id: &str) -> Result<usize> {
        self.pipeline
            .index_of(node_id)
            .ok_or_else(|| not_found("pipeline node", node_id))
    }

    fn apply_node(&self, i: usize, input: &Frame) -> Result<Frame> {
        match &self.nodes[i].step {
            FittedStep::Transform(t) => t.apply(input),
            FittedStep::Classifier(c) => Ok(probability_frame(&c.predict_proba(input)?, &self.class_labels)),
        }
    }

    /// Evaluates every node in `wanted` (and their ancestors), starting
    /// either from the raw input or from a given node output.
    fn evaluate(&self, source: Option<&Frame>, given: Option<(usize, &Frame)>, wanted: usize) -> Result<Frame> {
        let order = self.pipeline.topo_order().expect("validated DAG");
        let needed = self.ancestors_of(wanted);
        let mut outputs: Vec<Option<Frame>> = vec![None; self.pipeline.len()];
        if let Some((g, f)) = given {
            outputs[g] = Some(f.clone());
        }
        for &i in &order {
            if !needed.contains(&i) || outputs[i].is_some() {
                continue;
            }
            let input = route(&self.pipeline, i, source, &outputs)?;
            outputs[i] = Some(self.apply_node(i, &input)?);
        }
        outputs[wanted]
            .take()
            .ok_or_else(|| Error::Contract("node output not computed".into()))
    }

    fn ancestors_of(&self, i: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![i];
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                for e in self.pipeline.incoming(v) {
                    stack.push(self.pipeline.index_of(&e.from).expect("validated edge"));
                }
            }
        }
        seen
    }

    /// Output of `node_id` on `data` (the node and all its ancestors
    /// applied). The virtual source returns `data` unchanged.
    pub fn transform_until(&self, node_id: &str, data: &Dataset) -> Result<Dataset> {
        if node_id == SOURCE_NODE {
            return Ok(data.clone());
        }
        let i = self.index(node_id)?;
        let frame = self.evaluate(Some(&data.frame), None, i)?;
        let mut out = data.with_frame(frame);
        out.target_position = out.frame.n_cols();
        Ok(out)
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    /// Whether every path from the pipeline root to the classifier passes
    /// through `node_id`, so its output alone determines predictions.
    pub fn dominates_sink(&self, node_id: &str) -> Result<bool> {
        if node_id == SOURCE_NODE {
            return Ok(true);
        }
        let x = self.index(node_id)?;
        let (source, sink) = (self.pipeline.source(), self.pipeline.sink());
        if x == source {
            return Ok(true);
        }
        let mut seen = BTreeSet::from([x]);
        let mut stack = vec![source];
        while let Some(v) = stack.pop() {
            if v == sink {
                return Ok(false);
            }
            if seen.insert(v) {
                for e in &self.pipeline.edges {
                    if e.from == self.pipeline.nodes[v].id {
                        stack.push(self.pipeline.index_of(&e.to).expect("validated edge"));
                    }
                }
            }
        }
        Ok(true)
    }

    /// Prediction oracle over the output of `node_id`. Requires the node to
    /// dominate the classifier and not be the classifier itself.
    pub fn oracle_from(&self, node_id: &str) -> Result<SuffixOracle<'_>> {
        if node_id == SOURCE_NODE {
            return Ok(SuffixOracle {
                pipeline: self,
                from: None,
                columns: self.input_columns.clone(),
            });
        }
        let i = self.index(node_id)?;
        if i == self.pipeline.sink() {
            return Err(Error::Contract(format!(
                "`{node_id}` is the classifier; explain its inputs instead"
            )));
        }
        if !self.dominates_sink(node_id)? {
            return Err(Error::Contract(format!(
                "predictions do not depend on `{node_id}` alone (parallel branch)"
            )));
        }
        let columns = match &self.nodes[i].step {
            FittedStep::Transform(t) => t.output_names(),
            FittedStep::Classifier(_) => unreachable!("only the sink classifies"),
        };
        Ok(SuffixOracle {
            pipeline: self,
            from: Some(i),
            columns,
        })
    }
}

impl PredictionOracle for FittedPipeline {
    fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    fn input_columns(&self) -> Vec<String> {
        self.input_columns.clone()
    }

    fn predict_proba(&self, x: &Frame) -> Result<Vec<Vec<f64>>> {
        let sink = self.pipeline.sink();
        let order = self.pipeline.topo_order().expect("validated DAG");
        let mut outputs: Vec<Option<Frame>> = vec![None; self.pipeline.len()];
        for &i in &order {
            let input = route(&self.pipeline, i, Some(x), &outputs)?;
            if i == sink {
                let FittedStep::Classifier(c) = &self.nodes[i].step else {
                    unreachable!("sink is a classifier")
                };
                return c.predict_proba(&input);
            }
            outputs[i] = Some(self.apply_node(i, &input)?);
        }
        unreachable!("sink is in the topological order")
    }
}

/// The part of a fitted pipeline downstream of one node.
pub struct SuffixOracle<'a> {
    pipeline: &'a FittedPipeline,
    from: Option<usize>,
    columns: Vec<String>,
}

impl PredictionOracle for SuffixOracle<'_> {
    fn n_classes(&self) -> usize {
        self.pipeline.n_classes()
    }

    fn input_columns(&self) -> Vec<String> {
        self.columns.clone()
    }

    fn predict_proba(&self, x: &Frame) -> Result<Vec<Vec<f64>>> {
        let Some(from) = self.from else {
            return self.pipeline.predict_proba(x);
        };
        let sink = self.pipeline.pipeline.sink();
        let order = self.pipeline.pipeline.topo_order().expect("validated DAG");
        let mut outputs: Vec<Option<Frame>> = vec![None; self.pipeline.pipeline.len()];
        outputs[from] = Some(x.clone());
        let graph = &self.pipeline.pipeline;
        let mut downstream = BTreeSet::from([from]);
        for &i in &order {
            if graph
                .incoming(i)
                .any(|e| downstream.contains(&graph.index_of(&e.from).expect("validated edge")))
            {
                downstream.insert(i);
            }
        }
        for &i in order.iter().filter(|&&i| i != from && downstream.contains(&i)) {
            let input = route(graph, i, None, &outputs)?;
            if i == sink {
                let FittedStep::Classifier(c) = &self.pipeline.nodes[i].step else {
                    unreachable!("sink is a classifier")
                };
                return c.predict_proba(&input);
            }
            outputs[i] = Some(self.pipeline.apply_node(i, &input)?);
        }
        Err(Error::Contract("classifier is not downstream of the oracle node".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub candidate_id: String,
    pub class_labels: Vec<String>,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    /// Validation-split class report.
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub support: Vec<usize>,
    pub confusion: Vec<Vec<usize>>,
    pub roc: Vec<RocCurve>,
    pub fit_duration: f64,
    pub predict_duration: f64,
}

/// Metrics of a fitted pipeline on its own train/validation split of
/// `data`.
pub fn report(fp: &FittedPipeline, data: &Dataset) -> Result<PerformanceReport> {
    let k = fp.n_classes();
    let eval = |rows: &[usize]| -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
        let proba = fp.predict_proba(&data.frame.select_rows(rows))?;
        Ok((rows.iter().map(|&r| data.target[r]).collect(), proba))
    };
    let (y_train, p_train) = eval(&fp.train_rows)?;
    let (y_valid, p_valid) = eval(&fp.validation_rows)?;
    let pred_valid = metrics::predictions(&p_valid);
    let confusion = metrics::confusion_matrix(&y_valid, &pred_valid, k);
    let (precision, recall) = metrics::precision_recall(&confusion);
    Ok(PerformanceReport {
        candidate_id: fp.candidate_id.clone(),
        class_labels: fp.class_labels.clone(),
        train_accuracy: metrics::accuracy(&y_train, &metrics::predictions(&p_train)),
        validation_accuracy: metrics::accuracy(&y_valid, &pred_valid),
        precision,
        recall,
        support: confusion.iter().map(|r| r.iter().sum()).collect(),
        roc: metrics::roc_curves(&y_valid, &p_valid, k),
        confusion,
        fit_duration: fp.recorded_fit_duration,
        predict_duration: fp.recorded_predict_duration,
    })
}

#[cfg(test)]
mod tests;
