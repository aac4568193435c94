use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::ml::tree::{Tree, TreeParams, TreeTarget};
use crate::model::{Column, Dataset, HpValue, Hyperparameter, SearchSpace};
use crate::testutil::{blobs, candidate, config, history};

fn labels() -> Vec<String> {
    vec!["a".into(), "b".into()]
}

fn uniform_frame(n: usize, p: usize, lo: f64, hi: f64, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = (0..p)
        .map(|j| {
            let v = (0..n).map(|_| rng.random_range(lo..hi)).collect();
            Column::numeric(&format!("x{j}"), v)
        })
        .collect();
    Frame::new(cols).unwrap()
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + crate::math::exp(-z))
}

#[test]
fn surrogate_of_in_family_tree_is_exact() {
    let data = blobs(200, 3);
    let x = data.frame.to_matrix();
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let params = TreeParams {
        max_depth: Some(2),
        ..TreeParams::new()
    };
    let bb = Tree::fit(&x, 2, &rows, TreeTarget::Classes { y: &data.target, n_classes: 2 }, params, None);
    let leaves = bb.n_leaves();
    let oracle = FnOracle {
        columns: names(2),
        n_classes: 2,
        f: move |r: &[f64]| bb.predict(r).to_vec(),
    };
    let frame = Frame::new(vec![
        Column {
            name: "x0".into(),
            data: data.frame.columns[0].data.clone(),
        },
        Column {
            name: "x1".into(),
            data: data.frame.columns[1].data.clone(),
        },
    ])
    .unwrap();
    let s = global_surrogate(&oracle, &frame, &labels(), leaves.max(2)).unwrap();
    assert_eq!(s.fidelity, 1.0);
    assert!(s.n_leaves() <= leaves.max(2));
}

#[test]
fn xor_with_two_leaves_caps_fidelity() {
    let frame = uniform_frame(400, 2, -1.0, 1.0, 5);
    let oracle = FnOracle {
        columns: names(2),
        n_classes: 2,
        f: |r: &[f64]| binary(if (r[0] > 0.0) != (r[1] > 0.0) { 1.0 } else { 0.0 }),
    };
    let s = global_surrogate(&oracle, &frame, &labels(), 2).unwrap();
    assert_eq!(s.n_leaves(), 2);
    assert!(s.fidelity <= 0.75 + 0.05, "fidelity {}", s.fidelity);
    let full = global_surrogate(&oracle, &frame, &labels(), 1000).unwrap();
    assert_eq!(full.fidelity, 1.0);
}

#[test]
fn xor_balanced_grid_two_leaves_at_most_three_quarters() {
    // Exactly balanced XOR: every axis split leaves both halves at 50/50 or
    // isolates one quadrant, so no stump exceeds 3/4.
    let mut x0 = Vec::new();
    let mut x1 = Vec::new();
    for i in 0..20 {
        for j in 0..20 {
            x0.push(i as f64 - 9.5);
            x1.push(j as f64 - 9.5);
        }
    }
    let frame = Frame::new(vec![Column::numeric("x0", x0), Column::numeric("x1", x1)]).unwrap();
    let oracle = FnOracle {
        columns: names(2),
        n_classes: 2,
        f: |r: &[f64]| binary(if (r[0] > 0.0) != (r[1] > 0.0) { 1.0 } else { 0.0 }),
    };
    let s = global_surrogate(&oracle, &frame, &labels(), 2).unwrap();
    assert!(s.fidelity <= 0.75 + 1e-12);
}

#[test]
fn fidelity_is_monotone_in_leaf_cap() {
    let frame = uniform_frame(300, 3, -2.0, 2.0, 9);
    let oracle = FnOracle {
        columns: names(3),
        n_classes: 2,
        f: |r: &[f64]| binary(if r[0] * r[0] + r[1] - 0.5 * r[2] > 0.7 { 1.0 } else { 0.0 }),
    };
    let mut last = 0.0;
    for cap in 2..=24 {
        let s = global_surrogate(&oracle, &frame, &labels(), cap).unwrap();
        assert!(s.n_leaves() <= cap);
        assert!((0.0..=1.0).contains(&s.fidelity));
        assert!(s.fidelity >= last - 1e-12, "cap {cap}: {} < {last}", s.fidelity);
        last = s.fidelity;
    }
    assert!(global_surrogate(&oracle, &frame, &labels(), 1).is_err());
}

#[test]
fn surrogate_nested_export_matches_leaf_count() {
    let frame = uniform_frame(100, 2, 0.0, 1.0, 2);
    let oracle = FnOracle {
        columns: names(2),
        n_classes: 2,
        f: |r: &[f64]| binary(if r[0] > 0.3 && r[1] > 0.6 { 1.0 } else { 0.0 }),
    };
    let s = global_surrogate(&oracle, &frame, &labels(), 8).unwrap();
    fn leaves(n: &NestedNode) -> usize {
        match n {
            NestedNode::Leaf { .. } => 1,
            NestedNode::Split { left, right, .. } => leaves(left) + leaves(right),
        }
    }
    assert_eq!(leaves(&s.to_nested()), s.n_leaves());
    let json = serde_json::to_string(&s.to_nested()).unwrap();
    assert!(json.contains("\"type\":\"split\""));
}

fn linear_oracle() -> FnOracle<impl Fn(&[f64]) -> Vec<f64>> {
    FnOracle {
        columns: names(3),
        n_classes: 2,
        f: |r: &[f64]| binary(sigmoid(3.0 * r[0] - 2.0 * r[1])),
    }
}

#[test]
fn lime_recovers_gradient_signs_for_ten_seeds() {
    let frame = uniform_frame(100, 3, -1.0, 1.0, 11);
    let oracle = linear_oracle();
    for seed in 0..10 {
        let e = local_surrogate(
            &oracle,
            &frame,
            (seed * 7) as usize,
            LimeOptions {
                seed,
                target_class: Some(1),
                ..LimeOptions::default()
            },
        )
        .unwrap();
        assert!(e.weights[0] > 0.0 && 0.0 > e.weights[1], "seed {seed}: {:?}", e.weights);
        let max = e.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        assert!(e.weights[2].abs() < 0.05 * max, "seed {seed}: {:?}", e.weights);
        assert_eq!(e.n_samples, DEFAULT_LIME_SAMPLES);
        assert_eq!(e.features, names(3));
    }
}

#[test]
fn lime_is_deterministic_per_seed() {
    let frame = uniform_frame(50, 3, -1.0, 1.0, 1);
    let oracle = linear_oracle();
    let o = LimeOptions {
        seed: 4,
        ..LimeOptions::default()
    };
    assert_eq!(
        local_surrogate(&oracle, &frame, 3, o).unwrap(),
        local_surrogate(&oracle, &frame, 3, o).unwrap()
    );
}

#[test]
fn lime_on_constant_oracle_is_flat() {
    let frame = uniform_frame(50, 3, -1.0, 1.0, 1);
    let oracle = FnOracle {
        columns: names(3),
        n_classes: 2,
        f: |_: &[f64]| binary(0.3),
    };
    let e = local_surrogate(
        &oracle,
        &frame,
        0,
        LimeOptions {
            target_class: Some(1),
            ..LimeOptions::default()
        },
    )
    .unwrap();
    assert!(e.weights.iter().all(|w| w.abs() < 1e-6), "{:?}", e.weights);
    assert!((e.intercept - 0.3).abs() < 1e-6);
}

#[test]
fn lime_rejects_missing_row_and_handles_categoricals() {
    let mut frame = uniform_frame(40, 2, -1.0, 1.0, 3);
    let cats: Vec<Option<&str>> = (0..40).map(|i| Some(if i % 2 == 0 { "u" } else { "v" })).collect();
    frame.columns.push(Column::categorical("c", &cats));
    let oracle = FnOracle {
        columns: vec!["x0".into(), "x1".into(), "c".into()],
        n_classes: 2,
        f: |r: &[f64]| binary(if r[2] == 0.0 { 0.9 } else { 0.1 }),
    };
    assert!(local_surrogate(&oracle, &frame, 40, LimeOptions::default()).is_err());
    let e = local_surrogate(
        &oracle,
        &frame,
        0,
        LimeOptions {
            target_class: Some(1),
            ..LimeOptions::default()
        },
    )
    .unwrap();
    // Row 0 is "u"; staying "u" keeps the class-1 probability at 0.9.
    assert!((e.weights[2] - 0.8).abs() < 1e-3, "{:?}", e.weights);
}

fn ab_space() -> SearchSpace {
    SearchSpace::new(vec![
        Hyperparameter::float("clf:a", 0.0, 1.0, 0.5),
        Hyperparameter::float("clf:b", 0.0, 1.0, 0.5),
    ])
    .unwrap()
}

fn synthetic(n: usize, seed: u64, perf: impl Fn(f64, f64) -> f64) -> crate::model::RunHistory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cands = (0..n)
        .map(|i| {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            candidate(
                &format!("c{i}"),
                i as f64,
                Some(perf(a, b)),
                config(&[("clf:a", HpValue::Float(a)), ("clf:b", HpValue::Float(b))]),
            )
        })
        .collect();
    history(ab_space(), cands)
}

/// Variance decomposition of one tree by exhaustive evaluation on a
/// uniform midpoint grid of the encoded box.
fn brute_force_tree(tree: &Tree, lower: &[f64], upper: &[f64], m: usize) -> (f64, f64) {
    let at = |d: usize, i: usize| lower[d] + (upper[d] - lower[d]) * (i as f64 + 0.5) / m as f64;
    let mut f = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            f[i * m + j] = tree.predict(&[at(0, i), at(1, j)])[0];
        }
    }
    let mean = f.iter().sum::<f64>() / (m * m) as f64;
    let total = f.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m * m) as f64;
    let ma: Vec<f64> = (0..m).map(|i| (0..m).map(|j| f[i * m + j]).sum::<f64>() / m as f64).collect();
    let mb: Vec<f64> = (0..m).map(|j| (0..m).map(|i| f[i * m + j]).sum::<f64>() / m as f64).collect();
    let va = ma.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
    let vb = mb.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
    if total <= 0.0 {
        (0.0, 0.0)
    } else {
        (va / total, vb / total)
    }
}

#[test]
fn importance_finds_the_driving_hyperparameter() {
    let h = synthetic(80, 1, |a, _| a);
    let space = ab_space();
    let opts = FanovaOptions::default();
    let t = hp_importance(&h, &space, &opts).unwrap();
    let a = t.single("clf:a").unwrap().importance;
    let b = t.single("clf:b").unwrap().importance;
    assert!(a >= 0.8, "a = {a}");
    assert!(b <= 0.1, "b = {b}");
    assert!(t.pair("clf:b", "clf:a").is_some());

    // Same forest, decomposed by brute force on a fine grid.
    let scored: Vec<_> = h.ordered_candidates();
    let configs: Vec<_> = scored.iter().map(|c| space.pad_with_defaults(&c.config)).collect();
    let perf: Vec<f64> = scored.iter().map(|c| c.validation_performance.unwrap()).collect();
    let forest = ImportanceForest::fit(&space, &configs, &perf, &opts);
    let (mut sa, mut sb) = (0.0, 0.0);
    for tree in &forest.trees {
        let (x, y) = brute_force_tree(tree, &forest.lower, &forest.upper, 400);
        sa += x;
        sb += y;
    }
    let k = forest.trees.len() as f64;
    assert!((sa / k - a).abs() < 0.02, "{} vs {a}", sa / k);
    assert!((sb / k - b).abs() < 0.02, "{} vs {b}", sb / k);
}

#[test]
fn importance_marginals_have_expected_shape() {
    let t = hp_importance(&synthetic(40, 2, |a, _| a), &ab_space(), &FanovaOptions::default()).unwrap();
    match &t.single("clf:a").unwrap().marginal {
        Marginal::Curve { axis, mean, sd } => {
            assert_eq!(axis.values.len(), 20);
            assert_eq!(mean.len(), 20);
            assert_eq!(sd.len(), 20);
            assert!(mean[19] > mean[0]);
        }
        other => panic!("{other:?}"),
    }
    match &t.pair("clf:a", "clf:b").unwrap().marginal {
        Marginal::Grid { mean, .. } => assert!(mean.len() == 20 && mean.iter().all(|r| r.len() == 20)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn constant_performance_gives_zero_table() {
    let t = hp_importance(&synthetic(30, 3, |_, _| 0.7), &ab_space(), &FanovaOptions::default()).unwrap();
    assert!(t.entries.iter().all(|e| e.importance == 0.0));
    assert_eq!(t.n_trees, 0);
}

#[test]
fn too_few_candidates_is_an_error() {
    let r = hp_importance(&synthetic(9, 3, |a, _| a), &ab_space(), &FanovaOptions::default());
    assert!(matches!(r, Err(Error::InsufficientData(_))));
}

#[test]
fn xor_interaction_dominates_singles() {
    let space = SearchSpace::new(vec![
        Hyperparameter::categorical("clf:p", &["0", "1"], "0"),
        Hyperparameter::categorical("clf:q", &["0", "1"], "0"),
    ])
    .unwrap();
    let cands = (0..40)
        .map(|i| {
            let (p, q) = (i % 2, (i / 2) % 2);
            candidate(
                &format!("c{i}"),
                i as f64,
                Some(if p != q { 1.0 } else { 0.0 }),
                config(&[
                    ("clf:p", HpValue::from(if p == 1 { "1" } else { "0" })),
                    ("clf:q", HpValue::from(if q == 1 { "1" } else { "0" })),
                ]),
            )
        })
        .collect();
    let t = hp_importance(&history(space, cands), &history_space_pq(), &FanovaOptions::default()).unwrap();
    let pair = t.pair("clf:p", "clf:q").unwrap().importance;
    let p = t.single("clf:p").unwrap().importance;
    let q = t.single("clf:q").unwrap().importance;
    assert!(pair > p && pair > q, "pair {pair}, p {p}, q {q}");
}

fn history_space_pq() -> SearchSpace {
    SearchSpace::new(vec![
        Hyperparameter::categorical("clf:p", &["0", "1"], "0"),
        Hyperparameter::categorical("clf:q", &["0", "1"], "0"),
    ])
    .unwrap()
}

#[test]
fn structure_filter_restricts_candidates() {
    let h = synthetic(20, 4, |a, _| a);
    let opts = FanovaOptions {
        structure: Some(String::from("no-such-structure")),
        ..FanovaOptions::default()
    };
    assert!(hp_importance(&h, &ab_space(), &opts).is_err());
    let sig = h.ordered_candidates()[0].pipeline.signature();
    let opts = FanovaOptions {
        structure: Some(sig),
        ..FanovaOptions::default()
    };
    assert_eq!(hp_importance(&h, &ab_space(), &opts).unwrap().n_candidates, 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn importance_is_affine_invariant(seed in 0u64..1000, scale in 0.1f64..1.05, shift in 0.0f64..0.05) {
        // Accuracy-like performances stay inside [0, 1].
        let f = |a: f64, b: f64| (a * a + 0.5 * b + 0.3 * a * b) / 2.0;
        let base = hp_importance(&synthetic(30, seed, f), &ab_space(), &FanovaOptions::default()).unwrap();
        let moved = hp_importance(&synthetic(30, seed, |a, b| scale * f(a, b) + shift), &ab_space(), &FanovaOptions::default()).unwrap();
        let singles: f64 = base.entries.iter().filter(|e| e.hyperparameters.len() == 1).map(|e| e.importance).sum();
        prop_assert!(singles <= 1.0 + 1e-6);
        for (x, y) in base.entries.iter().zip(&moved.entries) {
            prop_assert!(x.importance >= 0.0);
            prop_assert!((x.importance - y.importance).abs() < 1e-6, "{} vs {}", x.importance, y.importance);
        }
    }
}

fn ramp_oracle() -> FnOracle<impl Fn(&[f64]) -> Vec<f64>> {
    FnOracle {
        columns: names(3),
        n_classes: 2,
        f: |r: &[f64]| binary((0.1 * r[1]).clamp(0.0, 1.0)),
    }
}

#[test]
fn pdp_of_separable_oracle_equals_function() {
    let frame = uniform_frame(200, 3, 0.0, 10.0, 8);
    let (pdp, ice) = partial_dependence(&ramp_oracle(), &frame, "x1", &[0.0, 5.0, 10.0]).unwrap();
    assert!((pdp[1][1] - 0.5).abs() < 1e-12);
    assert!((pdp[1][0]).abs() < 1e-12 && (pdp[1][2] - 1.0).abs() < 1e-12);
    assert_eq!(ice.len(), 200);
    assert!(partial_dependence(&ramp_oracle(), &frame, "nope", &[0.0]).is_err());
}

fn effects_dataset(n: usize, seed: u64) -> Dataset {
    let frame = uniform_frame(n, 3, 0.0, 10.0, seed);
    let y = frame.columns[1]
        .data
        .clone();
    let target = match y {
        crate::model::ColumnData::Numeric(v) => v.iter().map(|x| usize::from(*x > 5.0)).collect(),
        _ => unreachable!(),
    };
    Dataset::new(frame, "y", target, labels()).unwrap()
}

#[test]
fn pdp_is_mean_of_ice_on_quantile_grid() {
    let data = effects_dataset(120, 4);
    let fx = feature_effects(&ramp_oracle(), &data, 3, DEFAULT_GRID_SIZE, 0).unwrap();
    assert_eq!(fx.features.len(), 3);
    for f in &fx.features {
        assert_eq!(f.grid.len(), DEFAULT_GRID_SIZE);
        assert!(f.grid.windows(2).all(|w| w[0].value < w[1].value));
        for c in 0..2 {
            for g in 0..f.grid.len() {
                let mean = f.ice.iter().map(|r| r[c][g]).sum::<f64>() / f.ice.len() as f64;
                assert!((mean - f.pdp[c][g]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn categorical_grid_uses_all_choices() {
    let mut data = effects_dataset(30, 1);
    let cats: Vec<Option<&str>> = (0..30).map(|i| Some(["p", "q", "r"][i % 3])).collect();
    data.frame.columns.push(Column::categorical("c", &cats));
    let oracle = FnOracle {
        columns: vec!["x1".into(), "c".into()],
        n_classes: 2,
        f: |r: &[f64]| binary(0.2 * r[1]),
    };
    let fx = feature_effects(&oracle, &data, 2, 5, 0).unwrap();
    let c = fx.feature("c").unwrap();
    let labels: Vec<_> = c.grid.iter().map(|g| g.label.clone().unwrap()).collect();
    assert_eq!(labels, ["p", "q", "r"]);
    assert!((c.pdp[1][2] - 0.4).abs() < 1e-12);
}

#[test]
fn unused_feature_has_zero_permutation_importance() {
    let data = effects_dataset(300, 6);
    let x = data.frame.to_matrix();
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let stump = Tree::fit(
        &x,
        3,
        &rows,
        TreeTarget::Classes { y: &data.target, n_classes: 2 },
        TreeParams {
            max_depth: Some(1),
            ..TreeParams::new()
        },
        None,
    );
    let used = stump.nodes[0].feature.unwrap();
    assert_eq!(used, 1);
    let oracle = FnOracle {
        columns: names(3),
        n_classes: 2,
        f: move |r: &[f64]| stump.predict(r).to_vec(),
    };
    let (base, imp) = permutation_importance(&oracle, &data, 5, 3).unwrap();
    assert_eq!(base, 1.0);
    for (j, (m, sd)) in imp.iter().enumerate() {
        if j == used {
            assert!(*m > 0.3);
        } else {
            assert!(m.abs() <= 0.01 && *sd <= 0.01);
        }
    }
    assert!(permutation_importance(&oracle, &data, 0, 3).is_err());
}

#[test]
fn portable_tree_round_trips_predictions() {
    let mut frame = uniform_frame(150, 2, 0.0, 1.0, 12);
    let cats: Vec<Option<&str>> = (0..150).map(|i| if i % 7 == 0 { None } else { Some(["u", "v", "w"][i % 3]) }).collect();
    frame.columns.push(Column::categorical("c", &cats));
    let oracle = FnOracle {
        columns: vec!["x0".into(), "x1".into(), "c".into()],
        n_classes: 2,
        f: |r: &[f64]| binary(if r[0] > 0.4 && r[2] != 1.0 { 1.0 } else { 0.0 }),
    };
    let s = global_surrogate(&oracle, &frame, &labels(), 6).unwrap();
    let json = serde_json::to_string(&s.to_portable()).unwrap();
    let back: PortableTree = serde_json::from_str(&json).unwrap();
    let direct: Vec<String> = (0..150)
        .map(|r| {
            let row: Vec<f64> = frame.columns.iter().map(|c| c.data.encoded(r)).collect();
            labels()[crate::math::argmax(s.tree.predict(&row))].clone()
        })
        .collect();
    assert_eq!(back.predict(&frame).unwrap(), direct);
}
