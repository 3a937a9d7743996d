use std::path::Path;
use std::process::{Command, Output};

use grammage_core::learners::TrainedModel;
use grammage_core::persist::load_model;
use grammage_core::{GeneratorConfig, Measurement};
use grammage_plcsim::{run_server, ServerConfig, SimState, TagAddress, TagClient, Tick};

fn grammage(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grammage"))
        .args(args)
        .current_dir(dir)
        .env_remove("GRAMMAGE_SIM_ADDR")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = grammage(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s.trim()).unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(grammage(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(grammage(d, &["gen", "--n", "10"]).status.code(), Some(1), "missing --seed");
    assert_eq!(grammage(d, &["gen", "--seed", "1", "--bogus"]).status.code(), Some(1));
    let help = grammage(d, &["split", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("[default: 0.7]"));
    let missing = grammage(d, &["filter", "nope.txt"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.txt"));
}

#[test]
fn help_documents_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let text = |args: &[&str]| String::from_utf8(grammage(dir.path(), args).stdout).unwrap();
    let filter = text(&["filter", "--help"]);
    assert!(filter.contains("[default: 0.2]"), "{filter}");
    let train = text(&["train", "--help"]);
    for want in ["[default: adaboost]", "[default: 10]", "[default: 1]", "[default: 5]"] {
        assert!(train.contains(want), "{want} missing:\n{train}");
    }
    let gen = text(&["gen", "--help"]);
    assert!(gen.contains("[default: 9589]"));
    let serve = text(&["serve", "--help"]);
    assert!(serve.contains("[default: 500]"));
}

#[test]
fn pipeline_counts_and_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--n", "9589", "--outlier-rate", "0.20", "--seed", "7", "-o", "raw.txt"]);
    let f = json(&ok(d, &["filter", "--contamination", "0.20", "raw.txt"]));
    assert_eq!(f, serde_json::json!({"total": 9589, "inliers": 7671, "outliers": 1918}));
    let s = json(&ok(d, &["split", "--ratio", "0.70", "--seed", "7", "inliers.txt", "--json"]));
    assert_eq!(s, serde_json::json!({"total": 7671, "train": 5370, "test": 2301}));

    let t = json(&ok(
        d,
        &["train", "--learner", "adaboost", "--stages", "10", "--lr", "1", "--seed", "7", "train.txt", "-o", "model.json", "--json"],
    ));
    assert_eq!(t["excluded_nonstandard"], 0);
    let bytes = std::fs::read(d.join("model.json")).unwrap();
    let saved = load_model::<f64>(&bytes).unwrap();
    let TrainedModel::Boost(b) = &saved.model else {
        panic!("expected a boosted model")
    };
    assert_eq!(b.params.n_stages, 10);
    assert_eq!(b.params.learning_rate, 1.0);
    assert_eq!(saved.seed, 7);
    assert!(saved.metrics.is_some());

    // same seed, same bytes
    ok(d, &["train", "--seed", "7", "train.txt", "-o", "again.json"]);
    assert_eq!(std::fs::read(d.join("again.json")).unwrap(), bytes);

    let e = json(&ok(d, &["eval", "--model", "model.json", "test.txt", "--json"]));
    assert_eq!(e["learner"], "adaboost");
    let ca = e["ca"].as_f64().unwrap();
    assert!((0.9..=1.0).contains(&ca), "{ca}");
    let total: u64 = e["confusion"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, 2301);

    let text = ok(d, &["eval", "--model", "model.json", "test.txt"]);
    assert!(text.contains(" %"));
}

#[test]
fn train_excludes_nonstandard_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--n", "400", "--outlier-rate", "0", "--seed", "3", "-o", "raw.txt"]);
    let mut text = std::fs::read_to_string(d.join("raw.txt")).unwrap();
    text.push_str("1000 1000 700 54\n1010 1000 705 54\n");
    std::fs::write(d.join("raw.txt"), text).unwrap();
    let t = json(&ok(d, &["train", "--learner", "tree", "--seed", "1", "raw.txt", "-o", "m.json", "--json"]));
    assert_eq!(t["excluded_nonstandard"], 2);
    assert_eq!(t["rows"], 400);
    let saved = load_model::<f64>(&std::fs::read(d.join("m.json")).unwrap()).unwrap();
    assert!(grammage_core::Classifier::classes(&saved.model).iter().all(|c| c.is_standard()));
    let kept = json(&ok(d, &["train", "--learner", "tree", "--seed", "1", "raw.txt", "-o", "k.json", "--json", "--keep-nonstandard"]));
    assert_eq!(kept["rows"], 402);
}

#[test]
fn compare_and_cv_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--n", "1500", "--outlier-rate", "0", "--seed", "5", "-o", "raw.txt"]);
    let a = ok(d, &["compare", "--seed", "5", "raw.txt", "--learners", "tree,knn", "--json"]);
    let b = ok(d, &["compare", "--seed", "5", "raw.txt", "--learners", "tree,knn", "--json"]);
    assert_eq!(a, b);
    let c = json(&a);
    assert_eq!(c["rows"].as_array().unwrap().len(), 2);
    for key in ["learner", "ca", "precision_macro", "recall_macro", "precision_weighted", "recall_weighted", "confusion"] {
        assert!(c["rows"][0].get(key).is_some(), "{key}");
    }
    let cv = json(&ok(d, &["cv", "--learner", "tree", "--folds", "3", "--seed", "5", "raw.txt", "--json"]));
    assert_eq!(cv["folds"].as_array().unwrap().len(), 3);
}

#[test]
fn gen_config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--n", "50", "--seed", "9", "--write-config", "cfg.kv", "-o", "a.txt"]);
    ok(d, &["gen", "--config", "cfg.kv", "--seed", "9", "-o", "b.txt"]);
    assert_eq!(std::fs::read(d.join("a.txt")).unwrap(), std::fs::read(d.join("b.txt")).unwrap());
    let cfg = GeneratorConfig::from_kv(&std::fs::read_to_string(d.join("cfg.kv")).unwrap()).unwrap();
    assert_eq!(cfg.n_instances, 50);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn predict_once_prints_listing_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_path_buf();
    let sim = run_server(
        ServerConfig {
            listen: "127.0.0.1:0".into(),
            tick: Tick::Manual,
        },
        SimState::new(GeneratorConfig::default(), 0.0, 0).unwrap(),
    )
    .await
    .unwrap();
    let addr = sim.local_addr().to_string();

    let d2 = d.clone();
    let a2 = addr.clone();
    let empty = tokio::task::spawn_blocking(move || {
        ok(&d2, &["gen", "--n", "3000", "--outlier-rate", "0", "--seed", "2", "-o", "raw.txt"]);
        ok(&d2, &["train", "--seed", "2", "raw.txt", "-o", "model.json"]);
        grammage(&d2, &["predict-once", "--model", "model.json", "--sim", &a2])
    })
    .await
    .unwrap();
    assert_eq!(empty.status.code(), Some(2), "no roll yet");

    sim.with_state(|s| s.load_roll(&Measurement::from_features([1000.0, 820.0, 564.0]), 1));
    let mut c = TagClient::connect(sim.local_addr()).await.unwrap();
    c.write_tag(TagAddress::MANUAL, 70).await.unwrap();

    let out = tokio::task::spawn_blocking(move || {
        Command::new(env!("CARGO_BIN_EXE_grammage"))
            .args(["predict-once", "--model", "model.json"])
            .current_dir(&d)
            .env("GRAMMAGE_SIM_ADDR", &addr)
            .output()
            .unwrap()
    })
    .await
    .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines, ["diameter width weight predicted_grammage manual_grammage", "1000 820 564 70 70"]);

    let unreachable = grammage(dir.path(), &["predict-once", "--model", "model.json", "--sim", "127.0.0.1:1"]);
    assert_eq!(unreachable.status.code(), Some(2));
}
