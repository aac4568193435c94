use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::model::{
    Candidate, Config, HpValue, Hyperparameter, PipelineEdge, PipelineGraph, PipelineNode,
    SearchSpace,
};
use crate::testutil::{config, history};

fn node(id: &str, primitive: &str, prefix: &str) -> PipelineNode {
    PipelineNode {
        id: id.into(),
        primitive: primitive.into(),
        config_prefix: prefix.into(),
    }
}

fn edge(from: &str, to: &str, columns: Option<&[&str]>) -> PipelineEdge {
    PipelineEdge {
        from: from.into(),
        to: to.into(),
        columns: columns.map(|c| c.iter().map(|s| s.to_string()).collect()),
    }
}

fn linear(nodes: Vec<PipelineNode>) -> PipelineGraph {
    let edges = nodes
        .windows(2)
        .map(|w| edge(&w[0].id, &w[1].id, None))
        .collect();
    PipelineGraph { nodes, edges }
}

fn cand(id: &str, t: f64, pipeline: PipelineGraph, config: Config) -> Candidate {
    Candidate {
        id: id.into(),
        pipeline,
        config,
        timestamp: t,
        train_performance: None,
        validation_performance: Some(0.5 + t / 100.0),
        fit_duration: 0.0,
        predict_duration: 0.0,
        budget: None,
    }
}

/// scaler? -> clf in {knn, tree}; knn has three hyperparameters.
fn flexible_space() -> SearchSpace {
    SearchSpace::new(vec![
        Hyperparameter::categorical("clf:__choice__", &["knn", "tree"], "knn"),
        Hyperparameter::integer("clf:knn:n_neighbors", 1, 20, 5)
            .with_condition("clf:__choice__", "knn"),
        Hyperparameter::categorical("clf:knn:weights", &["uniform", "distance"], "uniform")
            .with_condition("clf:__choice__", "knn"),
        Hyperparameter::integer("clf:knn:p", 1, 2, 2).with_condition("clf:__choice__", "knn"),
        Hyperparameter::integer("clf:tree:max_depth", 1, 10, 3)
            .with_condition("clf:__choice__", "tree"),
        Hyperparameter::float("scaler:quantile", 0.0, 10.0, 5.0),
        Hyperparameter::float("lr", 1e-4, 1.0, 0.01).with_log(),
    ])
    .unwrap()
}

fn knn_config(k: i64, scaler: Option<f64>) -> Config {
    let mut c = config(&[
        ("clf:__choice__", "knn".into()),
        ("clf:knn:n_neighbors", HpValue::Int(k)),
        ("clf:knn:weights", "distance".into()),
        ("clf:knn:p", HpValue::Int(1)),
    ]);
    if let Some(q) = scaler {
        c.insert("scaler:quantile".into(), q.into());
    }
    c
}

fn flexible_run() -> crate::model::RunHistory {
    let knn = |scaled: bool| {
        let mut nodes = vec![node("clf", "k-nearest-neighbors", "clf:knn:")];
        if scaled {
            nodes.insert(0, node("scaler", "standard-scaler", "scaler:"));
        }
        linear(nodes)
    };
    let tree = linear(vec![node("clf", "decision-tree", "clf:tree:")]);
    let mut tree_cfg = config(&[
        ("clf:__choice__", "tree".into()),
        ("clf:tree:max_depth", HpValue::Int(4)),
    ]);
    tree_cfg.insert("lr".into(), 0.01.into());
    history(
        flexible_space(),
        vec![
            cand("c0", 1.0, knn(false), knn_config(3, None)),
            cand("c1", 2.0, tree, tree_cfg),
            cand("c2", 3.0, knn(true), knn_config(7, Some(7.0))),
            cand("c3", 4.0, knn(true), knn_config(12, Some(2.0))),
        ],
    )
}

#[test]
fn linear_run_has_one_axis_per_step() {
    let space = SearchSpace::new(vec![]).unwrap();
    let p = || {
        linear(vec![
            node("imp", "mean-imputer", ""),
            node("scale", "standard-scaler", ""),
            node("clf", "decision-tree", ""),
        ])
    };
    let h = history(
        space,
        vec![cand("a", 1.0, p(), Config::new()), cand("b", 2.0, p(), Config::new())],
    );
    let m = CpcModel::build(&h);
    let steps: Vec<&str> = m.axes.steps.iter().map(|s| s.step.as_str()).collect();
    assert_eq!(steps, ["imp", "scale", "clf"]);
    assert!(m.axes.regions.is_empty());
    assert!(m.polylines.iter().all(|l| l.present() == 3));
}

#[test]
fn steps_follow_pipeline_order() {
    let m = CpcModel::build(&flexible_run());
    let steps: Vec<&str> = m.axes.steps.iter().map(|s| s.step.as_str()).collect();
    assert_eq!(steps, ["scaler", "clf"]);
    let algos: Vec<&str> = m.axes.steps[1]
        .algorithms
        .iter()
        .map(|a| a.primitive.as_str())
        .collect();
    assert_eq!(algos, ["k-nearest-neighbors", "decision-tree"]);
}

#[test]
fn knn_expands_to_three_children() {
    let m = CpcModel::build(&flexible_run());
    let knn = &m.axes.steps[1].algorithms[0];
    let names: Vec<&str> = knn.hyperparameters.iter().map(|h| h.name.as_str()).collect();
    assert_eq!(names, ["clf:knn:n_neighbors", "clf:knn:weights", "clf:knn:p"]);
    assert_eq!(m.axes.steps[1].algorithms[1].hyperparameters.len(), 1);
    // `clf:__choice__` and `lr` match no algorithm prefix.
    let global: BTreeSet<&str> = m.axes.global.iter().map(|h| h.name.as_str()).collect();
    assert_eq!(global, BTreeSet::from(["clf:__choice__", "lr"]));
    assert_eq!(m.axes.hyperparameter_count(), flexible_space().len());
}

#[test]
fn condition_children_nest_inside_an_algorithm() {
    let space = SearchSpace::new(vec![
        Hyperparameter::categorical("clf:kernel", &["rbf", "poly"], "rbf"),
        Hyperparameter::integer("clf:degree", 2, 5, 3).with_condition("clf:kernel", "poly"),
    ])
    .unwrap();
    let p = PipelineGraph::chain(&[("clf", "svm")]);
    let h = history(
        space,
        vec![cand(
            "a",
            1.0,
            p,
            config(&[("clf:kernel", "poly".into()), ("clf:degree", HpValue::Int(3))]),
        )],
    );
    let m = CpcModel::build(&h);
    let hps = &m.axes.steps[0].algorithms[0].hyperparameters;
    assert_eq!(hps.len(), 1);
    assert_eq!(hps[0].children[0].name, "clf:degree");
}

#[test]
fn missing_step_and_children_are_missing() {
    let m = CpcModel::build(&flexible_run());
    let c0 = &m.polylines[0];
    assert!(c0.get(&AxisRef::Step("scaler".into())).unwrap().is_missing());
    assert!(c0
        .get(&AxisRef::Hyperparameter("scaler:quantile".into()))
        .unwrap()
        .is_missing());
    let c2 = &m.polylines[2];
    assert_eq!(
        c2.get(&AxisRef::Hyperparameter("scaler:quantile".into())),
        Some(&Coordinate::Numeric {
            raw: 7.0,
            normalized: 0.7
        })
    );
    assert_eq!(
        c2.get(&AxisRef::Step("clf".into())),
        Some(&Coordinate::Categorical {
            value: "k-nearest-neighbors".into(),
            index: 0
        })
    );
}

#[test]
fn non_missing_count_is_steps_plus_active() {
    let h = flexible_run();
    let m = CpcModel::build(&h);
    for (line, c) in m.polylines.iter().zip(h.ordered_candidates()) {
        let active = c
            .config
            .keys()
            .filter(|k| h.merged_space().is_active(k, &c.config))
            .count();
        assert_eq!(line.present(), c.pipeline.len() + active, "{}", c.id);
        assert_eq!(line.coordinates.len(), 2 + flexible_space().len());
    }
}

#[test]
fn log_axis_normalizes_in_log_domain() {
    let m = CpcModel::build(&flexible_run());
    match m.polylines[1].get(&AxisRef::Hyperparameter("lr".into())).unwrap() {
        Coordinate::Numeric { normalized, .. } => assert!((normalized - 0.5).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_serializes_with_flag() {
    let m = CpcModel::build(&flexible_run());
    let json = serde_json::to_value(&m.polylines[0].coordinates[0]).unwrap();
    assert_eq!(json["value"]["missing"], true);
    assert_eq!(json["axis"]["type"], "step");
}

#[test]
fn brushing() {
    let h = flexible_run();
    let m = CpcModel::build(&h);
    assert_eq!(m.brush(&[]), ["c0", "c1", "c2", "c3"]);

    let knn = BrushPredicate {
        axis: AxisRef::Step("clf".into()),
        filter: BrushFilter::Choices(vec!["k-nearest-neighbors".into()]),
    };
    let scan: Vec<String> = h
        .ordered_candidates()
        .iter()
        .filter(|c| c.pipeline.nodes.iter().any(|n| n.primitive == "k-nearest-neighbors"))
        .map(|c| c.id.clone())
        .collect();
    assert_eq!(m.brush(core::slice::from_ref(&knn)), scan);

    let k = BrushPredicate {
        axis: AxisRef::Hyperparameter("clf:knn:n_neighbors".into()),
        filter: BrushFilter::Range { min: 5.0, max: 20.0 },
    };
    let both: BTreeSet<String> = m.brush(&[knn.clone(), k.clone()]).into_iter().collect();
    let a: BTreeSet<String> = m.brush(&[knn]).into_iter().collect();
    let b: BTreeSet<String> = m.brush(&[k]).into_iter().collect();
    assert_eq!(both, a.intersection(&b).cloned().collect());
    assert_eq!(both, BTreeSet::from(["c2".to_string(), "c3".to_string()]));

    // Missing never satisfies a predicate.
    let scaler = BrushPredicate {
        axis: AxisRef::Hyperparameter("scaler:quantile".into()),
        filter: BrushFilter::Range { min: 0.0, max: 10.0 },
    };
    assert_eq!(m.brush(&[scaler]), ["c2", "c3"]);
}

#[test]
fn parallel_split_yields_lanes() {
    let space = SearchSpace::new(vec![]).unwrap();
    let parallel = |t: f64, id: &str| {
        cand(
            id,
            t,
            PipelineGraph {
                nodes: vec![
                    node("imp", "mean-imputer", ""),
                    node("num", "standard-scaler", ""),
                    node("cat", "one-hot-encoder", ""),
                    node("clf", "decision-tree", ""),
                ],
                edges: vec![
                    edge("imp", "num", Some(&["x0"])),
                    edge("imp", "cat", Some(&["x1"])),
                    edge("num", "clf", None),
                    edge("cat", "clf", None),
                ],
            },
            Config::new(),
        )
    };
    let h = history(space, vec![parallel(1.0, "p0"), parallel(2.0, "p1")]);
    let m = CpcModel::build(&h);
    assert_eq!(m.axes.regions.len(), 1);
    let r = &m.axes.regions[0];
    assert_eq!(r.split_step, "imp");
    assert_eq!(r.lanes.len(), 2);
    assert_eq!(r.lanes[0].steps, ["num"]);
    assert_eq!(r.lanes[1].steps, ["cat"]);
    assert_eq!(m.axes.steps.len(), 4);
    assert_eq!(m.axes.steps[0].step, "imp");
    assert_eq!(m.axes.steps[3].step, "clf");
}

#[test]
fn diverging_structures_are_not_parallel() {
    let m = CpcModel::build(&flexible_run());
    assert!(m.axes.regions.is_empty());
}

fn numeric_run(values: &[f64], lower: f64, upper: f64) -> crate::model::RunHistory {
    let space = SearchSpace::new(vec![
        Hyperparameter::float("clf:x", lower, upper, lower),
        Hyperparameter::categorical("clf:k", &["a", "b"], "a"),
        Hyperparameter::float("clf:y", 0.0, 1.0, 0.5).with_condition("clf:k", "b"),
    ])
    .unwrap();
    let cands = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            cand(
                &alloc::format!("c{i}"),
                i as f64,
                PipelineGraph::chain(&[("clf", "decision-tree")]),
                config(&[("clf:x", (*v).into()), ("clf:k", "a".into())]),
            )
        })
        .collect();
    history(space, cands)
}

#[test]
fn uniform_samples_fill_bins_evenly() {
    let vals: Vec<f64> = (0..10).map(|v| v as f64).collect();
    let h = numeric_run(&vals, 0.0, 10.0);
    let s = sampling_history(&h, "clf:x", 5).unwrap();
    assert_eq!(s.histogram.counts(), [2, 2, 2, 2, 2]);
    assert_eq!(s.points.len(), 10);
    match &s.histogram {
        Histogram::Numeric { edges, .. } => assert_eq!(edges, &[0.0, 2.0, 4.0, 6.0, 8.0, 10.0]),
        other => panic!("{other:?}"),
    }
    for (p, c) in s.points.iter().zip(h.ordered_candidates()) {
        assert_eq!(p.performance, c.validation_performance);
    }
}

#[test]
fn inactive_hyperparameter_has_empty_series() {
    let h = numeric_run(&[1.0, 2.0], 0.0, 10.0);
    let s = sampling_history(&h, "clf:y", DEFAULT_BINS).unwrap();
    assert!(s.points.is_empty());
    assert_eq!(s.histogram.total(), 0);
    assert!(matches!(
        sampling_history(&h, "nope", 5),
        Err(crate::Error::NotFound { .. })
    ));
}

#[test]
fn grid_search_repeats_three_values() {
    let grid = [0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1, 0.2, 0.3];
    let h = numeric_run(&grid, 0.0, 1.0);
    let s = sampling_history(&h, "clf:x", DEFAULT_BINS).unwrap();
    let distinct: BTreeSet<String> = s.points.iter().map(|p| p.value.label()).collect();
    assert_eq!(distinct.len(), 3);
    assert_eq!(s.histogram.total(), 9);
    let cat = sampling_history(&h, "clf:k", DEFAULT_BINS).unwrap();
    assert_eq!(cat.histogram.counts(), [9, 0]);
}

proptest! {
    #[test]
    fn histogram_counts_sum_to_points(
        vals in proptest::collection::vec(0.0f64..=10.0, 0..40), bins in 1usize..30
    ) {
        let h = numeric_run(&vals, 0.0, 10.0);
        let s = sampling_history(&h, "clf:x", bins).unwrap();
        prop_assert_eq!(s.points.len(), vals.len());
        prop_assert_eq!(s.histogram.total(), vals.len());
        prop_assert_eq!(s.histogram.counts().len(), bins);
    }

    #[test]
    fn projection_is_total(ks in proptest::collection::vec((1i64..=20, proptest::option::of(0.0f64..10.0)), 1..8)) {
        let cands: Vec<Candidate> = ks.iter().enumerate().map(|(i, (k, q))| {
            let mut nodes = vec![node("clf", "k-nearest-neighbors", "clf:knn:")];
            if q.is_some() {
                nodes.insert(0, node("scaler", "standard-scaler", "scaler:"));
            }
            cand(&alloc::format!("c{i}"), i as f64, linear(nodes), knn_config(*k, *q))
        }).collect();
        let h = history(flexible_space(), cands);
        let m = CpcModel::build(&h);
        for (line, c) in m.polylines.iter().zip(h.ordered_candidates()) {
            prop_assert_eq!(line.present(), c.pipeline.len() + c.config.len());
            for k in c.config.keys() {
                let present = line
                    .get(&AxisRef::Hyperparameter(k.clone()))
                    .is_some_and(|v| !v.is_missing());
                prop_assert!(present);
            }
        }
    }
}
