use std::path::Path;
use std::process::{Command, Output};

use appraisal::pipeline::Manifest;

fn appraisal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_appraisal")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&appraisal(dir.path(), &["bogus"])), 1);
    assert_eq!(code(&appraisal(dir.path(), &["--workers", "0", "schema"])), 1);
    assert_eq!(code(&appraisal(dir.path(), &["--config", "missing.json", "run"])), 1);

    std::fs::write(dir.path().join("bad.json"), r#"{"segmnt":"flat"}"#).unwrap();
    let o = appraisal(dir.path(), &["--config", "bad.json", "run"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("segmnt"), "{}", stderr(&o));

    std::fs::write(dir.path().join("bad.json"), r#"{"evaluation":{"train_fraction":1.5}}"#).unwrap();
    assert_eq!(code(&appraisal(dir.path(), &["--config", "bad.json", "run"])), 1);
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let o = appraisal(dir.path(), &["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in ["ingest", "synth", "clean", "features", "select", "fit-ols", "fit-rk", "fit-rulefit", "fit-forest", "predict", "evaluate", "report", "run", "schema"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    assert_eq!(code(&appraisal(dir.path(), &["--version"])), 0);
}

#[test]
fn schema_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = appraisal(dir.path(), &["schema"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["properties"]["segment"].is_object());
}

#[test]
fn missing_input_is_a_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = appraisal(dir.path(), &["--out", "run", "run"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("collect"), "{}", stderr(&o));
    let m = Manifest::from_file(&dir.path().join("run/manifest.json")).unwrap();
    assert_eq!(m.failed_stage.as_deref(), Some("collect"));
    assert!(m.completed.is_empty());
}

#[test]
fn stagewise_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = appraisal(d, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    };
    ok(&["synth", "--segment", "flat", "--n", "600", "--seed", "3", "--out", "data"]);
    assert!(d.join("data/records.csv").exists());
    assert!(d.join("data/truth.json").exists());

    std::fs::write(d.join("cfg.json"), r#"{"segment":"flat","seed":4,"evaluation":{"cv_folds":3}}"#).unwrap();
    fn with<'a>(extra: &[&'a str]) -> Vec<&'a str> {
        [&["--config", "cfg.json"][..], extra].concat()
    }

    ok(&with(&["ingest", "--input", "data/records.csv", "--out", "s1"]));
    assert!(d.join("s1/01_collect/records.csv").exists());
    ok(&with(&["clean", "--input", "data/records.csv", "--out", "s2"]));
    assert!(d.join("s2/02_outliers/removed.csv").exists());
    ok(&with(&["features", "--input", "s2/02_outliers/clean_records.csv", "--out", "s3"]));
    let features = "s3/03_features/features.csv";
    assert!(d.join(features).exists());
    ok(&with(&["select", "--features", features, "--out", "s4"]));
    let selected = "s4/04_selection/selected.json";
    ok(&with(&["fit-ols", "--features", features, "--selected", selected, "--out", "s5"]));
    ok(&with(&["fit-rulefit", "--features", features, "--out", "s6"]));
    ok(&with(&["fit-forest", "--features", features, "--out", "s7"]));

    // flats use the raw target, so regression-kriging is refused up front
    assert_eq!(code(&appraisal(d, &with(&["fit-rk", "--features", features, "--out", "s8"]))), 1);

    ok(&with(&["predict", "--model", "s6/05_model/rulefit/model.json", "--features", features, "--out", "s9"]));
    let preds = std::fs::read_to_string(d.join("s9/predictions.csv")).unwrap();
    assert!(preds.starts_with("id,actual,predicted,split\n"));
    let fitted = std::fs::read_to_string(d.join("s6/05_model/rulefit/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), fitted.lines().count());

    ok(&with(&["evaluate", "--features", features, "--selected", selected, "--out", "s10"]));
    assert!(d.join("s10/06_evaluate/metrics.csv").exists());
    ok(&with(&["report", "--bundle", "s10/bundle.json", "--format", "csv", "--out", "s11"]));
    assert!(d.join("s11/report/metrics.csv").exists());
    assert!(!d.join("s11/report/metrics.txt").exists());

    for s in ["s1", "s5", "s9", "s11"] {
        let m = Manifest::from_file(&d.join(s).join("manifest.json")).unwrap();
        assert!(m.failed_stage.is_none());
        assert!(!m.files.is_empty());
    }
}

#[test]
fn run_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&appraisal(d, &["synth", "--segment", "flat", "--n", "500", "--out", "data"])), 0);
    std::fs::write(d.join("cfg.json"), r#"{"segment":"flat","input":{"records":"data/records.csv"},"evaluation":{"cv_folds":3}}"#).unwrap();
    for (w, out) in [("1", "a"), ("3", "b")] {
        let o = appraisal(d, &["--config", "cfg.json", "--workers", w, "--seed", "9", "--out", out, "run"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = std::fs::read(d.join("a/manifest.json")).unwrap();
    let b = std::fs::read(d.join("b/manifest.json")).unwrap();
    assert_eq!(a, b);
}
