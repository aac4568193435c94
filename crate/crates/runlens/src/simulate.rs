//! Seeded random-search simulation producing a complete run history, used
//! for smoke tests and demos.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use runlens_core::ml;
use runlens_core::model::{
    Candidate, Column, Config, Dataset, EnsembleMember, EnsembleSpec, Frame, HpValue, Hyperparameter, PipelineEdge,
    PipelineGraph, PipelineNode, RunHistory, SearchSpace, TemplateStep,
};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    pub run_id: String,
    pub n_candidates: usize,
    pub n_rows: usize,
    pub seed: u64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            run_id: "simulated".into(),
            n_candidates: 30,
            n_rows: 500,
            seed: 0,
        }
    }
}

const STEPS: [(&str, &[&str]); 4] = [
    ("imputer", &["mean-imputer", "most-frequent-imputer"]),
    ("encoder", &["one-hot-encoder"]),
    ("scaler", &["standard-scaler", "min-max-scaler", "pca"]),
    (
        "classifier",
        &[
            "decision-tree",
            "random-forest",
            "k-nearest-neighbors",
            "logistic-regression",
            "gaussian-naive-bayes",
        ],
    ),
];

fn choice_key(step: &str) -> String {
    format!("{step}:__choice__")
}

fn prefix(step: &str, primitive: &str) -> String {
    format!("{step}:{primitive}:")
}

fn conditional(step: &str, primitive: &str, hp: Hyperparameter) -> Hyperparameter {
    let name = format!("{}{}", prefix(step, primitive), hp.name);
    Hyperparameter { name, ..hp }.with_condition(&choice_key(step), primitive)
}

/// Three-class problem in four numeric features (one with 5% missing values)
/// and one categorical feature.
pub fn synthetic_dataset(n_rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colors = ["red", "green", "blue"];
    let mut cols: [Vec<f64>; 4] = Default::default();
    let mut color = Vec::with_capacity(n_rows);
    let mut y = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let class = i % 3;
        let c = class as f64;
        cols[0].push(c + rng.random_range(-0.9..0.9));
        cols[1].push((c - 1.0) * 0.8 + rng.random_range(-1.0..1.0));
        let x2 = if rng.random_bool(0.05) {
            f64::NAN
        } else {
            rng.random_range(-1.0..1.0)
        };
        cols[2].push(x2);
        cols[3].push(rng.random_range(0.0..10.0));
        let k = if rng.random_bool(0.6) { class } else { rng.random_range(0..3) };
        color.push(Some(colors[k]));
        y.push(class);
    }
    let [x0, x1, x2, x3] = cols;
    let frame = Frame::new(vec![
        Column::numeric("x0", x0),
        Column::numeric("x1", x1),
        Column::numeric("x2", x2),
        Column::numeric("x3", x3),
        Column::categorical("color", &color),
    ])
    .expect("equal column lengths");
    Dataset::new(frame, "label", y, vec!["c0".into(), "c1".into(), "c2".into()]).expect("valid labels")
}

pub fn search_space() -> SearchSpace {
    let mut hps = Vec::new();
    for (step, choices) in STEPS {
        if choices.len() > 1 {
            hps.push(Hyperparameter::categorical(&choice_key(step), choices, choices[0]));
        }
    }
    hps.push(conditional("scaler", "pca", Hyperparameter::integer("n_components", 1, 6, 2)));
    let clf = |p: &str, hp: Hyperparameter| conditional("classifier", p, hp);
    hps.push(clf("decision-tree", Hyperparameter::integer("max_depth", 1, 12, 4)));
    hps.push(clf("decision-tree", Hyperparameter::integer("min_samples_leaf", 1, 20, 1)));
    hps.push(clf("random-forest", Hyperparameter::integer("n_estimators", 5, 30, 10)));
    hps.push(clf("random-forest", Hyperparameter::integer("max_depth", 2, 10, 5)));
    hps.push(clf("k-nearest-neighbors", Hyperparameter::integer("n_neighbors", 1, 30, 5).with_log()));
    hps.push(clf(
        "k-nearest-neighbors",
        Hyperparameter::categorical("weights", &["uniform", "distance"], "uniform"),
    ));
    hps.push(clf("logistic-regression", Hyperparameter::float("C", 0.01, 100.0, 1.0).with_log()));
    hps.push(clf(
        "gaussian-naive-bayes",
        Hyperparameter::float("var_smoothing", 1e-9, 1e-3, 1e-9).with_log(),
    ));
    let mut space = SearchSpace::new(hps).expect("valid simulated space");
    space.structure_template = Some(
        STEPS
            .iter()
            .map(|(step, choices)| TemplateStep {
                step: (*step).into(),
                choices: choices.iter().map(|c| (*c).into()).collect(),
            })
            .collect(),
    );
    space
}

fn sample_value(hp: &Hyperparameter, rng: &mut ChaCha8Rng) -> HpValue {
    use runlens_core::model::Domain;
    match &hp.domain {
        Domain::Float { lower, upper, log } => {
            let v = if *log {
                rng.random_range(lower.ln()..=upper.ln()).exp()
            } else {
                rng.random_range(*lower..=*upper)
            };
            HpValue::Float(v.clamp(*lower, *upper))
        }
        Domain::Integer { lower, upper, log } => {
            let v = if *log {
                let f: f64 = rng.random_range((*lower as f64).ln()..=(*upper as f64).ln());
                (f.exp().round() as i64).clamp(*lower, *upper)
            } else {
                rng.random_range(*lower..=*upper)
            };
            HpValue::Int(v)
        }
        Domain::Categorical { choices } => choices.choose(rng).expect("non-empty choices").clone(),
    }
}

fn sample_candidate(space: &SearchSpace, id: String, rng: &mut ChaCha8Rng) -> Candidate {
    let mut config = Config::new();
    // Parents precede their children in the declaration order.
    for hp in &space.hyperparameters {
        let active = hp
            .condition
            .as_ref()
            .is_none_or(|c| config.get(&c.parent).is_some_and(|v| v.matches(&c.value)));
        if active {
            config.insert(hp.name.clone(), sample_value(hp, rng));
        }
    }
    let nodes: Vec<PipelineNode> = STEPS
        .iter()
        .map(|(step, choices)| {
            let primitive = match config.get(&choice_key(step)) {
                Some(v) => v.label(),
                None => choices[0].to_string(),
            };
            PipelineNode {
                id: (*step).into(),
                config_prefix: prefix(step, &primitive),
                primitive,
            }
        })
        .collect();
    let edges = nodes
        .windows(2)
        .map(|w| PipelineEdge {
            from: w[0].id.clone(),
            to: w[1].id.clone(),
            columns: None,
        })
        .collect();
    Candidate {
        id,
        pipeline: PipelineGraph { nodes, edges },
        config,
        timestamp: 0.0,
        train_performance: None,
        validation_performance: None,
        fit_duration: 0.0,
        predict_duration: 0.0,
        budget: None,
    }
}

/// Samples and really fits every candidate; a fit failure is recorded as a
/// crashed evaluation. Timestamps accumulate simulated durations so the run
/// is reproducible. The three best candidates form a weighted ensemble.
pub fn simulate_run(options: &SimulationOptions) -> Result<RunHistory> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let data = synthetic_dataset(options.n_rows, options.seed);
    let space = search_space();
    let mut clock = 0.0;
    let mut candidates = Vec::with_capacity(options.n_candidates);
    for i in 0..options.n_candidates {
        let mut c = sample_candidate(&space, format!("c{:02}", i + 1), &mut rng);
        c.fit_duration = (rng.random_range(0.5..5.0f64) * 1000.0).round() / 1000.0;
        c.predict_duration = (rng.random_range(0.01..0.2f64) * 1000.0).round() / 1000.0;
        clock += c.fit_duration + c.predict_duration;
        c.timestamp = (clock * 1000.0).round() / 1000.0;
        if let Ok(fp) = ml::fit(&c, &data, options.seed) {
            if let Ok(r) = ml::report(&fp, &data) {
                c.train_performance = Some(r.train_accuracy);
                c.validation_performance = Some(r.validation_accuracy);
            }
        }
        candidates.push(c);
    }
    let mut ranked: Vec<&Candidate> = candidates.iter().filter(|c| c.is_scored()).collect();
    ranked.sort_by(|a, b| b.validation_performance.unwrap_or(0.0).total_cmp(&a.validation_performance.unwrap_or(0.0)));
    let ensemble = (ranked.len() >= 3).then(|| EnsembleSpec {
        members: ranked[..3]
            .iter()
            .zip([0.5, 0.3, 0.2])
            .map(|(c, w)| EnsembleMember {
                candidate_id: c.id.clone(),
                weight: w,
            })
            .collect(),
    });
    Ok(RunHistory::new(
        options.run_id.clone(),
        "accuracy".into(),
        vec![space],
        candidates,
        ensemble,
        data,
    )?)
}
