mod common;

use std::path::PathBuf;

use runlens::engine::{overview, Engine};
use runlens::interchange::{load_run_history, save_run_history};
use runlens::Error;
use runlens_core::model::HpValue;
use serde_json::{json, Value};

use common::{data_dir, load};

fn tiny_doc() -> Value {
    serde_json::from_str(&std::fs::read_to_string(data_dir().join("tiny_run.json")).unwrap()).unwrap()
}

/// Writes `doc` next to a copy of the tiny dataset and loads it.
fn load_variant(doc: &Value) -> (tempfile::TempDir, Result<runlens::interchange::LoadedRun, Error>) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(data_dir().join("tiny.csv"), dir.path().join("tiny.csv")).unwrap();
    let path: PathBuf = dir.path().join("run.json");
    std::fs::write(&path, serde_json::to_vec_pretty(doc).unwrap()).unwrap();
    let r = load_run_history(&path);
    (dir, r)
}

#[test]
fn tiny_run_fields() {
    let run = load("tiny_run.json");
    let h = &run.history;
    assert_eq!(h.run_id, "tiny");
    assert_eq!(h.metric_name, "accuracy");
    assert_eq!(h.search_spaces.len(), 1);
    assert_eq!(h.candidates.len(), 3);
    assert!(h.candidates.iter().all(|c| c.pipeline.len() == 2));
    let c2 = h.candidate("c2").unwrap();
    assert_eq!(c2.pipeline.nodes[1].primitive, "k-nearest-neighbors");
    assert_eq!(c2.config.get("clf:n_neighbors"), Some(&HpValue::Int(5)));
    assert_eq!(c2.validation_performance, Some(0.9));
    assert_eq!(c2.timestamp, 20.0);
    assert_eq!(h.dataset.n_rows(), 40);
    assert_eq!(h.dataset.target_name, "label");
    assert_eq!(h.dataset.class_labels, vec!["no".to_string(), "yes".to_string()]);
    assert_eq!(h.dataset.frame.names(), vec!["x0", "color", "x1"]);
    assert_eq!(h.ensemble.as_ref().unwrap().members.len(), 2);
}

#[test]
fn bound_violation_names_the_hyperparameter() {
    let mut doc = tiny_doc();
    doc["search_spaces"][0]["hyperparameters"][0] =
        json!({ "name": "clf:max_depth", "kind": "integer", "lower": 0, "upper": 10, "default": 3 });
    doc["candidates"][0]["config"]["clf:max_depth"] = json!(15);
    let (_dir, r) = load_variant(&doc);
    let msg = r.unwrap_err().to_string();
    assert!(msg.contains("clf:max_depth"), "{msg}");
    assert!(msg.contains("c1"), "{msg}");
}

#[test]
fn empty_candidate_list_is_valid() {
    let mut doc = tiny_doc();
    doc["candidates"] = json!([]);
    doc.as_object_mut().unwrap().remove("ensemble");
    let (_dir, r) = load_variant(&doc);
    let run = r.unwrap();
    assert!(run.history.candidates.is_empty());
    let o = overview(&run.history);
    assert_eq!(o["n_candidates"], 0);
    assert_eq!(o["n_scored"], 0);
    assert_eq!(o["best"], Value::Null);
}

#[test]
fn unknown_major_version_is_rejected() {
    let mut doc = tiny_doc();
    doc["version"] = json!("2.0");
    let (_dir, r) = load_variant(&doc);
    assert!(matches!(r, Err(Error::Version { .. })), "{r:?}");
    doc["version"] = json!("1.7");
    let (_dir, r) = load_variant(&doc);
    assert!(r.is_ok());
}

#[test]
fn schema_violation_names_the_path() {
    let mut doc = tiny_doc();
    doc["candidates"][1]["timestamp"] = json!("late");
    let (_dir, r) = load_variant(&doc);
    match r {
        Err(Error::Schema { at, .. }) => assert!(at.starts_with("candidates[1].timestamp"), "{at}"),
        other => panic!("expected schema error, got {other:?}"),
    }
    let mut doc = tiny_doc();
    doc["run"]["colour"] = json!("x");
    let (_dir, r) = load_variant(&doc);
    assert!(matches!(r, Err(Error::Schema { .. })));
}

#[test]
fn missing_dataset_is_an_io_error() {
    let mut doc = tiny_doc();
    doc["dataset_ref"]["path"] = json!("nowhere.csv");
    let (_dir, r) = load_variant(&doc);
    assert!(matches!(r, Err(Error::Io { .. })), "{r:?}");
}

#[test]
fn unknown_target_column_is_rejected() {
    let mut doc = tiny_doc();
    doc["dataset_ref"]["target"] = json!("nope");
    let (_dir, r) = load_variant(&doc);
    assert!(r.unwrap_err().to_string().contains("nope"));
}

#[test]
fn save_then_load_is_identity() {
    for name in ["tiny_run.json", "template_run.json", "flexible_run.json"] {
        let run = load(name);
        let dir = tempfile::tempdir().unwrap();
        let path = save_run_history(&run.history, dir.path(), "copy").unwrap();
        let again = load_run_history(&path).unwrap();
        assert_eq!(format!("{:?}", again.history), format!("{:?}", run.history), "{name}");
    }
}

#[test]
fn simulated_run_round_trips() {
    let h = runlens::simulate::simulate_run(&runlens::simulate::SimulationOptions {
        n_candidates: 6,
        n_rows: 90,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = save_run_history(&h, dir.path(), "sim").unwrap();
    let again = load_run_history(&path).unwrap();
    assert_eq!(format!("{:?}", again.history), format!("{h:?}"));
}

#[test]
fn directory_loading_and_duplicates() {
    let mut engine = Engine::new(0);
    let ids = engine.load_path(&data_dir()).unwrap();
    assert_eq!(ids, vec!["fixed", "flexible", "template", "tiny"]);
    assert!(matches!(engine.load_path(&data_dir().join("tiny_run.json")), Err(Error::BadRequest(_))));
}
