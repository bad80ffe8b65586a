use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn rescast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rescast"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Synthetic inputs plus a config small enough for debug builds.
fn workspace(test_end: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = rescast(dir.path(), &["synth", "--out", ".", "--years", "2", "--seed", "9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = json!({
        "generation_csv": "generation.csv",
        "weather_csv": "weather.csv",
        "artifact_dir": "artifacts",
        "energy_type": "solar",
        "split": { "train_end": "2018-10-01T00:00:00Z", "test_end": test_end },
        "seed": 11,
        "model": {
            "rfe_k": 30,
            "rfe_step": 60,
            "grid": { "n_estimators": [6], "max_depth": [8], "min_samples_split": [5] },
            "trees": { "k_features": 10 }
        }
    });
    fs::write(dir.path().join("run.json"), cfg.to_string()).unwrap();
    dir
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = rescast(dir, args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn ingest_writes_dataset_and_reports_gaps() {
    let w = workspace("2018-10-15T00:00:00Z");
    let out = ok(w.path(), &["ingest", "--config", "run.json"]);
    assert!(out.contains("17520 hours"));
    assert!(out.contains("visibility"));
    let csv = fs::read_to_string(w.path().join("artifacts/solar/dataset.csv")).unwrap();
    assert!(csv.starts_with("timestamp,solar_mw,temperature,humidity,visibility,wind_speed\n"));
    assert!(!w.path().join("artifacts/.rescast.lock").exists());
}

#[test]
fn ingest_failures_map_to_exit_codes() {
    let w = workspace("2018-10-15T00:00:00Z");
    fs::rename(w.path().join("weather.csv"), w.path().join("w.csv")).unwrap();
    assert_eq!(code(&rescast(w.path(), &["ingest", "--config", "run.json"])), 1);

    fs::write(
        w.path().join("weather.csv"),
        "timestamp,temperature,humidity,visibility,wind_speed\n2030-01-01T00:00:00Z,1,2,3,4\n",
    )
    .unwrap();
    assert_eq!(code(&rescast(w.path(), &["ingest", "--config", "run.json"])), 2);

    fs::write(w.path().join("weather.csv"), "timestamp,temperature\n2017-01-01T00:00:00Z,1\n").unwrap();
    assert_eq!(code(&rescast(w.path(), &["ingest", "--config", "run.json"])), 2);

    fs::write(w.path().join("weather.csv"), "timestamp,temperature\nnot-a-time,1\n").unwrap();
    assert_eq!(code(&rescast(w.path(), &["ingest", "--config", "run.json"])), 1);
}

#[test]
fn train_needs_a_dataset() {
    let w = workspace("2018-10-15T00:00:00Z");
    let o = rescast(w.path(), &["train", "--config", "run.json", "--model", "ml"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ingest"));
}

#[test]
fn held_lock_refuses_writers() {
    let w = workspace("2018-10-15T00:00:00Z");
    fs::create_dir_all(w.path().join("artifacts")).unwrap();
    fs::write(w.path().join("artifacts/.rescast.lock"), "").unwrap();
    let o = rescast(w.path(), &["ingest", "--config", "run.json"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("locked"));
}

#[test]
fn full_pipeline() {
    let w = workspace("2018-10-15T00:00:00Z");
    let d = w.path();
    ok(d, &["ingest", "--config", "run.json"]);
    ok(d, &["train", "--config", "run.json", "--model", "persistence", "--n-days", "7"]);
    for m in ["ml", "stad", "hybrid"] {
        ok(d, &["train", "--config", "run.json", "--model", m]);
    }
    let models = d.join("artifacts/solar/models");
    let bundle = models.join("hybrid");
    for f in ["manifest.json", "forest.json", "stad.json", "selection.json", "train_log.json"] {
        assert!(bundle.join(f).is_file(), "{f}");
    }
    assert!(models.join("persistence_t-7/manifest.json").is_file());
    let log: Value = serde_json::from_str(&fs::read_to_string(bundle.join("train_log.json")).unwrap()).unwrap();
    let stages: Vec<&str> = log["stages"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["scale", "decompose", "features", "rfe", "grid_search", "ext_fit"]);

    // Same seed, same forest bytes.
    let first = fs::read(bundle.join("forest.json")).unwrap();
    ok(d, &["ingest", "--config", "run.json", "--out", "again"]);
    ok(d, &["train", "--config", "run.json", "--model", "hybrid", "--out", "again"]);
    assert_eq!(first, fs::read(d.join("again/solar/models/hybrid/forest.json")).unwrap());

    let fc = ok(d, &["forecast", "--config", "run.json", "--model", "stad"]);
    assert!(fc.contains("stad_direct"));
    let csv = fs::read_to_string(d.join("artifacts/solar/forecasts/stad_direct.csv")).unwrap();
    assert!(csv.starts_with("timestamp,actual,predicted\n"));
    assert_eq!(csv.lines().count(), 1 + 14 * 24);

    let table = ok(d, &["evaluate", "--config", "run.json"]);
    assert_eq!(table.lines().count(), 5);
    let reports = d.join("artifacts/solar/reports");
    let cmp = fs::read_to_string(reports.join("comparison.csv")).unwrap();
    assert_eq!(cmp.lines().count(), 5);
    assert!(cmp.starts_with("model_id,energy_type,mae,rmse,under_10,between_10_15,over_15,n_hours\n"));
    let maes: Vec<f64> = cmp.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(maes.windows(2).all(|w| w[0] <= w[1]));

    let r: Value = serde_json::from_str(&fs::read_to_string(reports.join("hybrid.json")).unwrap()).unwrap();
    for key in ["model_id", "energy_type", "mae", "rmse", "interval_pcts", "n_hours"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    let p = &r["interval_pcts"];
    let total: f64 = ["under_10", "between_10_15", "over_15"].iter().map(|k| p[k].as_f64().unwrap()).sum();
    assert!((total - 100.0).abs() < 1e-9);
    let heat = fs::read_to_string(reports.join("heatmap_actual.csv")).unwrap();
    assert_eq!(heat.lines().count(), 13);

    ok(d, &["report", "--config", "run.json"]);
    let svg = fs::read_to_string(reports.join("heatmap_hybrid.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn test_span_outside_dataset_fails_evaluation() {
    let w = workspace("2030-01-01T00:00:00Z");
    let d = w.path();
    ok(d, &["ingest", "--config", "run.json"]);
    ok(d, &["train", "--config", "run.json", "--model", "persistence"]);
    assert_eq!(code(&rescast(d, &["evaluate", "--config", "run.json"])), 4);
    assert_eq!(code(&rescast(d, &["report", "--config", "run.json"])), 1);
}

#[test]
fn evaluate_without_models_fails() {
    let w = workspace("2018-10-15T00:00:00Z");
    ok(w.path(), &["ingest", "--config", "run.json"]);
    assert_eq!(code(&rescast(w.path(), &["evaluate", "--config", "run.json"])), 4);
}
