use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::model::{Config, HpValue, PipelineEdge, PipelineNode};
use crate::testutil::{blobs, config};

fn cand(pipeline: PipelineGraph, config: Config) -> Candidate {
    Candidate {
        id: "c".into(),
        pipeline,
        config,
        timestamp: 0.0,
        train_performance: None,
        validation_performance: Some(0.5),
        fit_duration: 1.5,
        predict_duration: 0.25,
        budget: None,
    }
}

fn chain(steps: &[(&str, &str)]) -> PipelineGraph {
    PipelineGraph::chain(steps)
}

fn line_data() -> Dataset {
    let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
    let y: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
    Dataset::new(
        Frame::new(vec![Column::numeric("x", x)]).unwrap(),
        "y",
        y,
        vec!["lo".into(), "hi".into()],
    )
    .unwrap()
}

fn mixed_data() -> Dataset {
    let n = 60;
    let a: Vec<f64> = (0..n).map(|i| if i % 7 == 3 { f64::NAN } else { (i % 10) as f64 }).collect();
    let cats = ["u", "v", "w"];
    let c: Vec<Option<&str>> = (0..n).map(|i| if i % 11 == 5 { None } else { Some(cats[i % 3]) }).collect();
    let y: Vec<usize> = (0..n).map(|i| usize::from(i % 10 >= 5)).collect();
    Dataset::new(
        Frame::new(vec![Column::numeric("a", a), Column::categorical("c", &c)]).unwrap(),
        "y",
        y,
        vec!["no".into(), "yes".into()],
    )
    .unwrap()
}

#[test]
fn stump_separates_a_line() {
    let d = line_data();
    let c = cand(
        chain(&[("clf", "decision-tree")]),
        config(&[("clf:max_depth", HpValue::Int(1))]),
    );
    let fp = fit(&c, &d, 0).unwrap();
    let r = report(&fp, &d).unwrap();
    assert_eq!(r.train_accuracy, 1.0);
    assert_eq!(r.fit_duration, 1.5);
    assert_eq!(fp.train_rows.len(), 30);
}

#[test]
fn refit_is_deterministic() {
    let d = blobs(80, 3);
    for prim in ["random-forest", "logistic-regression", "k-nearest-neighbors", "gaussian-naive-bayes"] {
        let c = cand(chain(&[("s", "standard-scaler"), ("clf", prim)]), Config::new());
        let a = fit(&c, &d, 9).unwrap().predict_proba(&d.frame).unwrap();
        let b = fit(&c, &d, 9).unwrap().predict_proba(&d.frame).unwrap();
        assert_eq!(a, b, "{prim}");
    }
}

#[test]
fn one_neighbour_recalls_training_labels() {
    let d = blobs(50, 1);
    let c = cand(
        chain(&[("clf", "k-nearest-neighbors")]),
        config(&[("clf:n_neighbors", HpValue::Int(1))]),
    );
    let fp = fit(&c, &d, 0).unwrap();
    let train = d.select_rows(&fp.train_rows);
    assert_eq!(fp.predict(&train.frame).unwrap(), train.target);
}

#[test]
fn classifiers_learn_blobs() {
    let d = blobs(200, 5);
    for prim in [
        "decision-tree",
        "random-forest",
        "k-nearest-neighbors",
        "logistic-regression",
        "gaussian-naive-bayes",
    ] {
        let c = cand(chain(&[("clf", prim)]), Config::new());
        let r = report(&fit(&c, &d, 0).unwrap(), &d).unwrap();
        assert!(r.validation_accuracy > 0.7, "{prim}: {}", r.validation_accuracy);
        let support: usize = r.support.iter().sum();
        assert_eq!(support, 50);
        for curve in &r.roc {
            let auc = curve.auc.unwrap();
            assert!((0.0..=1.0).contains(&auc));
        }
    }
}

#[test]
fn source_is_verbatim_and_steps_compose() {
    let d = mixed_data();
    let c = cand(
        chain(&[
            ("imp", "mean-imputer"),
            ("mf", "most-frequent-imputer"),
            ("oh", "one-hot-encoder"),
            ("clf", "logistic-regression"),
        ]),
        Config::new(),
    );
    let fp = fit(&c, &d, 4).unwrap();
    // NaN cells: compare through Debug.
    assert_eq!(alloc::format!("{:?}", fp.transform_until(SOURCE_NODE, &d).unwrap()), alloc::format!("{d:?}"));

    // Oracle: compose the primitives by hand on the same training rows.
    let train = d.frame.select_rows(&fp.train_rows);
    let imp = FittedTransform::fit("mean-imputer", &train, None).unwrap();
    let t1 = imp.apply(&train).unwrap();
    let mf = FittedTransform::fit("most-frequent-imputer", &t1, None).unwrap();
    let t2 = mf.apply(&t1).unwrap();
    let oh = FittedTransform::fit("one-hot-encoder", &t2, None).unwrap();
    let manual = oh.apply(&mf.apply(&imp.apply(&d.frame).unwrap()).unwrap()).unwrap();
    let piped = fp.transform_until("oh", &d).unwrap();
    assert_eq!(piped.frame, manual);
    assert_eq!(piped.frame.names(), ["a", "c=u", "c=v", "c=w"]);
    assert_eq!(piped.target, d.target);

    let ColumnData::Numeric(a) = &fp.transform_until("imp", &d).unwrap().frame.columns[0].data else {
        panic!()
    };
    let train_a: Vec<f64> = fp
        .train_rows
        .iter()
        .map(|&r| d.frame.columns[0].data.encoded(r))
        .filter(|v| !v.is_nan())
        .collect();
    let mean = train_a.iter().sum::<f64>() / train_a.len() as f64;
    assert_eq!(a[3], mean);

    let out = fp.transform_until("clf", &d).unwrap();
    assert_eq!(out.frame.names(), ["p(no)", "p(yes)", "prediction"]);
    assert!(matches!(fp.transform_until("nope", &d), Err(Error::NotFound { .. })));
}

#[test]
fn missing_values_need_an_imputer() {
    let d = mixed_data();
    let c = cand(chain(&[("clf", "k-nearest-neighbors")]), Config::new());
    assert!(matches!(fit(&c, &d, 0), Err(Error::FitFailed { .. })));
    let tree = cand(chain(&[("clf", "decision-tree")]), Config::new());
    assert!(fit(&tree, &d, 0).is_ok());
}

#[test]
fn unsupported_primitive_is_named() {
    let c = cand(chain(&[("clf", "xgboost")]), Config::new());
    assert_eq!(fit(&c, &blobs(20, 0), 0), Err(Error::UnsupportedPrimitive("xgboost".into())));
}

#[test]
fn identity_step_leaves_predictions_unchanged() {
    let d = blobs(80, 2);
    let bare = cand(chain(&[("clf", "logistic-regression")]), Config::new());
    let imputed = cand(chain(&[("imp", "mean-imputer"), ("clf", "logistic-regression")]), Config::new());
    let a = fit(&bare, &d, 1).unwrap().predict_proba(&d.frame).unwrap();
    let b = fit(&imputed, &d, 1).unwrap().predict_proba(&d.frame).unwrap();
    assert_eq!(a, b);
}

fn parallel_pipeline() -> PipelineGraph {
    let node = |id: &str, p: &str| PipelineNode {
        id: id.into(),
        primitive: p.into(),
        config_prefix: String::new(),
    };
    let edge = |f: &str, t: &str, cols: Option<&[&str]>| PipelineEdge {
        from: f.into(),
        to: t.into(),
        columns: cols.map(|c| c.iter().map(|s| String::from(*s)).collect()),
    };
    PipelineGraph {
        nodes: vec![
            node("imp", "most-frequent-imputer"),
            node("num", "standard-scaler"),
            node("cat", "one-hot-encoder"),
            node("clf", "gaussian-naive-bayes"),
        ],
        edges: vec![
            edge("imp", "num", Some(&["a"])),
            edge("imp", "cat", Some(&["c"])),
            edge("num", "clf", None),
            edge("cat", "clf", None),
        ],
    }
}

#[test]
fn routing_follows_column_labels() {
    let d = mixed_data();
    let fp = fit(&cand(parallel_pipeline(), Config::new()), &d, 0).unwrap();
    assert_eq!(fp.transform_until("num", &d).unwrap().frame.names(), ["a"]);
    assert_eq!(fp.transform_until("cat", &d).unwrap().frame.names(), ["c=u", "c=v", "c=w"]);
    let FittedStep::Classifier(c) = &fp.nodes[3].step else { panic!() };
    assert_eq!(c.inputs, ["a", "c=u", "c=v", "c=w"]);

    assert!(fp.dominates_sink("imp").unwrap());
    assert!(!fp.dominates_sink("num").unwrap());
    assert!(fp.oracle_from("num").is_err());
    assert!(fp.oracle_from("clf").is_err());

    let suffix = fp.oracle_from("imp").unwrap();
    let mid = fp.transform_until("imp", &d).unwrap();
    assert_eq!(suffix.input_columns(), mid.frame.names());
    assert_eq!(suffix.predict_proba(&mid.frame).unwrap(), fp.predict_proba(&d.frame).unwrap());
}

#[test]
fn pca_and_min_max_run_in_a_pipeline() {
    let d = blobs(60, 8);
    let c = cand(
        chain(&[("mm", "min-max-scaler"), ("pca", "pca"), ("clf", "decision-tree")]),
        config(&[("pca:n_components", HpValue::Int(1))]),
    );
    let fp = fit(&c, &d, 0).unwrap();
    assert_eq!(fp.transform_until("pca", &d).unwrap().frame.names(), ["pc1"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn probabilities_are_normalised(seed in 0u64..1000, prim in 0usize..5) {
        let prims = ["decision-tree", "random-forest", "k-nearest-neighbors", "logistic-regression", "gaussian-naive-bayes"];
        let d = blobs(40, seed);
        let c = cand(chain(&[("clf", prims[prim])]), Config::new());
        let fp = fit(&c, &d, seed).unwrap();
        let proba = fp.predict_proba(&d.frame).unwrap();
        let pred = fp.predict(&d.frame).unwrap();
        for (p, y) in proba.iter().zip(pred) {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert_eq!(crate::math::argmax(p), y);
        }
    }
}
