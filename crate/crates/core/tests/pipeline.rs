use std::path::Path;

use appraisal::config::{InputConfig, PipelineConfig, StageToggles};
use appraisal::dataset::Segment;
use appraisal::evaluation::ModelRecipe;
use appraisal::pipeline::{load_table, run_pipeline, sha256_hex, Manifest, SavedModel};
use appraisal::synth::{synth_generate, SynthSpec};

fn land_config(data: &Path, out: &Path) -> PipelineConfig {
    PipelineConfig {
        segment: Segment::LandParcel,
        seed: 21,
        input: InputConfig {
            records: data.join("records.csv"),
            pois: Some(data.join("pois.csv")),
            nodes: Some(data.join("nodes.csv")),
            edges: Some(data.join("edges.csv")),
            ..Default::default()
        },
        output: out.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn land_run_writes_consistent_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_generate(&SynthSpec::land(700), 20).unwrap().write_to_dir(&data).unwrap();
    let out = dir.path().join("run");
    let m = run_pipeline(&land_config(&data, &out)).unwrap();

    assert_eq!(m.completed, ["collect", "outliers", "features", "selection", "model", "evaluate", "report"]);
    assert!(m.failed_stage.is_none());
    let paths: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    let mut sorted = paths.clone();
    sorted.sort();
    assert_eq!(paths, sorted);
    for f in &m.files {
        let bytes = std::fs::read(out.join(&f.path)).unwrap();
        assert_eq!(bytes.len() as u64, f.bytes, "{}", f.path);
        assert_eq!(sha256_hex(&bytes), f.sha256, "{}", f.path);
    }
    for p in ["05_model/rk/variogram_fit.json", "05_model/rk/variogram.csv", "05_model/ols/summary.txt", "06_evaluate/metrics.csv", "report/variogram.csv"] {
        assert!(paths.contains(&p), "{p} missing");
    }
    let on_disk = Manifest::from_file(&out.join("manifest.json")).unwrap();
    assert_eq!(on_disk.files.len(), m.files.len());

    let metrics = std::fs::read_to_string(out.join("06_evaluate/metrics.csv")).unwrap();
    assert!(metrics.lines().any(|l| l.contains("rk")));
    assert!(metrics.lines().any(|l| l.contains("ols")));
}

#[test]
fn saved_model_reproduces_its_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_generate(&SynthSpec::flats(600), 30).unwrap().write_to_dir(&data).unwrap();
    let out = dir.path().join("run");
    let config = PipelineConfig {
        segment: Segment::Flat,
        seed: 31,
        input: InputConfig { records: data.join("records.csv"), ..Default::default() },
        output: out.clone(),
        stages: StageToggles { evaluate: false, ..Default::default() },
        models: vec![ModelRecipe::Ols, ModelRecipe::Rulefit { config: Default::default() }],
        ..Default::default()
    };
    let m = run_pipeline(&config).unwrap();
    assert!(!m.files.iter().any(|f| f.path.starts_with("06_evaluate")));

    let table = load_table(&out.join("03_features/features.csv")).unwrap();
    for name in ["ols", "rulefit"] {
        let model = SavedModel::from_file(&out.join(format!("05_model/{name}/model.json"))).unwrap();
        let pred = model.predict_psmp(&table).unwrap();
        let mut rdr = csv::Reader::from_path(out.join(format!("05_model/{name}/predictions.csv"))).unwrap();
        let written: std::collections::HashMap<String, f64> = rdr
            .records()
            .map(|r| {
                let r = r.unwrap();
                (r[0].to_string(), r[2].parse().unwrap())
            })
            .collect();
        assert_eq!(written.len(), table.ids.len());
        for (id, p) in table.ids.iter().zip(&pred) {
            let w = written[id];
            assert!((w - p).abs() <= 1e-9 * w.abs().max(1.0), "{name} {id}: {w} vs {p}");
        }
    }
}

#[test]
fn failure_leaves_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_generate(&SynthSpec::land(300), 40).unwrap().write_to_dir(&data).unwrap();
    let out = dir.path().join("run");
    let mut config = land_config(&data, &out);
    config.input.edges = Some(data.join("no_such_edges.csv"));
    let err = run_pipeline(&config).unwrap_err();
    assert!(err.to_string().contains("no_such_edges"), "{err}");

    let m = Manifest::from_file(&out.join("manifest.json")).unwrap();
    assert_eq!(m.failed_stage.as_deref(), Some("collect"));
    assert!(m.error.is_some());
}

#[test]
fn segment_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_generate(&SynthSpec::flats(200), 50).unwrap().write_to_dir(&data).unwrap();
    let config = PipelineConfig {
        segment: Segment::LandParcel,
        input: InputConfig { records: data.join("records.csv"), ..Default::default() },
        output: dir.path().join("run"),
        ..Default::default()
    };
    assert!(run_pipeline(&config).is_err());
}
