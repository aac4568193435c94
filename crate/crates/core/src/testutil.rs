//! Small fixtures shared by unit tests.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    Candidate, Column, Config, Dataset, Frame, HpValue, Hyperparameter, PipelineGraph,
    RunHistory, SearchSpace,
};

/// Two gaussian-ish blobs in two numeric features, labels "a" / "b".
pub fn blobs(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x0 = Vec::with_capacity(n);
    let mut x1 = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let c = if class == 0 { -1.0 } else { 1.0 };
        x0.push(c + rng.random_range(-1.0..1.0));
        x1.push(0.5 * c + rng.random_range(-1.0..1.0));
        y.push(class);
    }
    let frame = Frame::new(vec![Column::numeric("x0", x0), Column::numeric("x1", x1)]).unwrap();
    Dataset::new(frame, "y", y, vec!["a".into(), "b".into()]).unwrap()
}

pub fn space() -> SearchSpace {
    SearchSpace::new(vec![
        Hyperparameter::float("clf:lr", 0.0, 10.0, 1.0),
        Hyperparameter::categorical("clf:kernel", &["a", "b", "c"], "a"),
    ])
    .unwrap()
}

pub fn candidate(id: &str, t: f64, perf: Option<f64>, config: Config) -> Candidate {
    Candidate {
        id: id.to_string(),
        pipeline: PipelineGraph::chain(&[("clf", "decision-tree")]),
        config,
        timestamp: t,
        train_performance: perf,
        validation_performance: perf,
        fit_duration: 0.1,
        predict_duration: 0.01,
        budget: None,
    }
}

pub fn config(pairs: &[(&str, HpValue)]) -> Config {
    pairs.iter().map(|(k, v)| (String::from(*k), v.clone())).collect()
}

pub fn history(space: SearchSpace, candidates: Vec<Candidate>) -> RunHistory {
    RunHistory::new(
        "run".into(),
        "accuracy".into(),
        vec![space],
        candidates,
        None,
        blobs(20, 0),
    )
    .unwrap()
}
