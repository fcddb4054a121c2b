//! Stage driver: collect, outliers, features, selection, model, evaluate.
//!
//! Each stage writes into its own numbered directory under the output root.
//! `manifest.json` lists every written file with its SHA-256; it carries no
//! timestamps or absolute paths, so identical inputs give identical bytes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::dataset::{self, ColumnMeta, ParsedRecords, PropertyRecord, SpatialTable};
use crate::error::{Error, Result};
use crate::evaluation::{fit_model, kfold_cv, write_reports_csv, FittedModel, MetricReport, ModelRecipe};
use crate::features::{self, build_features, FeatureInputs, Poi, RoadGraph, TargetKind};
use crate::geostat::correlogram;
use crate::linmodel::{ols_fit, vif, OlsFit};
use crate::outliers::{clean_pipeline, OutlierReport};
use crate::report::{self, Bundle, ModelPredictions, PredictionRow, ReportFormat, VariogramReport};
use crate::rng::derive_seed;
use crate::rulefit::RuleFitModel;
use crate::selection::{self, SelectionTrace};

pub const STAGES: [&str; 7] = ["collect", "outliers", "features", "selection", "model", "evaluate", "report"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output root, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub completed: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::File { path: path.to_path_buf(), source: e })?;
        Ok(serde_json::from_str(&s)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes files under a root directory and remembers their hashes.
#[derive(Debug)]
pub struct Outputs {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Outputs {
    pub fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::File { path: root.to_path_buf(), source: e })?;
        Ok(Outputs { root: root.to_path_buf(), entries: vec![] })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::File { path: dir.to_path_buf(), source: e })?;
        }
        std::fs::write(&p, bytes).map_err(|e| Error::File { path: p.clone(), source: e })?;
        self.record(rel, bytes);
        Ok(p)
    }

    pub fn write_with(&mut self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(rel, s.as_bytes())
    }

    /// Hashes a file some other writer put under the root.
    pub fn adopt(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::File { path: path.to_path_buf(), source: e })?;
        let rel = path
            .strip_prefix(&self.root)
            .map_err(|_| Error::invalid(format!("{} is outside the output root", path.display())))?;
        let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        self.record(&rel.join("/"), &bytes);
        Ok(())
    }

    fn record(&mut self, rel: &str, bytes: &[u8]) {
        self.entries.retain(|e| e.path != rel);
        self.entries.push(ManifestEntry { path: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }

    pub fn manifest(&self, completed: Vec<String>, failure: Option<(&str, &Error)>) -> Manifest {
        let mut files = self.entries.clone();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        Manifest {
            completed,
            failed_stage: failure.map(|(s, _)| s.to_string()),
            error: failure.map(|(_, e)| e.to_string()),
            files,
        }
    }

    /// Writes `manifest.json` (not listed in itself).
    pub fn write_manifest(&self, manifest: &Manifest) -> Result<PathBuf> {
        let p = self.root.join("manifest.json");
        let mut s = serde_json::to_string_pretty(manifest)?;
        s.push('\n');
        std::fs::write(&p, s).map_err(|e| Error::File { path: p.clone(), source: e })?;
        Ok(p)
    }
}

/// A model persisted for the `predict` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Ols { target: TargetKind, fit: OlsFit },
    Rulefit { target: TargetKind, model: RuleFitModel },
}

impl SavedModel {
    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::File { path: path.to_path_buf(), source: e })?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn predict_psmp(&self, data: &SpatialTable) -> Result<Vec<f64>> {
        match self {
            SavedModel::Ols { target, fit } => FittedModel::Ols(fit.clone()).predict_psmp(data, *target),
            SavedModel::Rulefit { target, model } => FittedModel::Rulefit(model.clone()).predict_psmp(data, *target),
        }
    }
}

fn is_geojson(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("geojson" | "json"))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::File { path: path.to_path_buf(), source: e })
}

pub fn load_records(path: &Path, schema: &dataset::SchemaConfig) -> Result<ParsedRecords> {
    let bytes = read(path)?;
    if is_geojson(path) {
        dataset::parse_geojson(&bytes, schema)
    } else {
        dataset::parse_records(&bytes, schema)
    }
}

pub fn load_pois(path: &Path) -> Result<Vec<Poi>> {
    let bytes = read(path)?;
    if is_geojson(path) {
        features::builder::parse_pois_geojson(&bytes)
    } else {
        features::builder::parse_pois_csv(&bytes)
    }
}

/// Reads `features.csv` with its companion `columns.json`.
pub fn load_table(features_csv: &Path) -> Result<SpatialTable> {
    let cols_path = features_csv.with_file_name("columns.json");
    let columns: Vec<ColumnMeta> = if cols_path.exists() {
        serde_json::from_slice(&read(&cols_path)?)?
    } else {
        vec![]
    };
    features::builder::read_table(&read(features_csv)?, &columns)
}

pub struct Collected {
    pub records: Vec<PropertyRecord>,
    pub pois: Vec<Poi>,
    pub graph: Option<RoadGraph>,
}

/// Loads the configured inputs, keeping records of the configured segment.
pub fn stage_collect(config: &PipelineConfig, out: &mut Outputs) -> Result<Collected> {
    let parsed = load_records(&config.input.records, &config.input.schema)?;
    let total = parsed.records.len();
    let records: Vec<PropertyRecord> = parsed.records.into_iter().filter(|r| r.segment == config.segment).collect();
    if records.len() < total {
        log::info!("collect: skipped {} records of other segments", total - records.len());
    }
    log::info!("collect: {} records, {} rejects", records.len(), parsed.rejects.len());
    out.write_with("01_collect/records.csv", |b| dataset::write_records(&records, b))?;
    out.write_with("01_collect/rejects.csv", |b| dataset::write_rejects(&parsed.rejects, b))?;
    let pois = match &config.input.pois {
        Some(p) => load_pois(p)?,
        None => vec![],
    };
    let graph = match (&config.input.nodes, &config.input.edges) {
        (Some(n), Some(e)) => Some(RoadGraph::from_csv_files(n, e)?),
        (None, None) => None,
        _ => return Err(Error::Config("road graph needs both input.nodes and input.edges".into())),
    };
    if records.is_empty() {
        return Err(Error::invalid(format!("no {} records in {}", config.segment.as_str(), config.input.records.display())));
    }
    Ok(Collected { records, pois, graph })
}

pub fn stage_outliers(records: &[PropertyRecord], config: &PipelineConfig, out: &mut Outputs) -> Result<(Vec<PropertyRecord>, OutlierReport)> {
    let (kept, report) = clean_pipeline(records, &config.outliers, derive_seed(config.seed, 1))?;
    log::info!("outliers: removed {} of {}", report.entries.len(), records.len());
    for w in &report.warnings {
        log::warn!("outliers: {w}");
    }
    out.write_with("02_outliers/removed.csv", |b| report.write_csv(b))?;
    out.write_with("02_outliers/clusters.csv", |b| report.write_clusters_csv(b))?;
    out.write_with("02_outliers/clean_records.csv", |b| dataset::write_records(&kept, b))?;
    out.write("02_outliers/outliers.txt", report::outlier_table(&report).as_bytes())?;
    Ok((kept, report))
}

pub fn stage_features(records: &[PropertyRecord], collected: &Collected, config: &PipelineConfig, out: &mut Outputs) -> Result<SpatialTable> {
    let inputs = FeatureInputs { pois: &collected.pois, graph: collected.graph.as_ref() };
    let table = build_features(records, &inputs, &config.feature_config(), derive_seed(config.seed, 2))?;
    log::info!("features: {} rows x {} columns", table.len(), table.table.n_cols());
    write_feature_table(&table, "03_features", out)?;
    Ok(table)
}

pub fn write_feature_table(table: &SpatialTable, dir: &str, out: &mut Outputs) -> Result<()> {
    out.write_with(&format!("{dir}/features.csv"), |b| features::builder::write_table(table, b))?;
    out.write_json(&format!("{dir}/columns.json"), &table.table.columns)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    /// Survivors of the multicollinearity screen.
    pub screened: Vec<String>,
    /// Features for the linear models: the RFE choice, or the screened
    /// set when no subset passed every gate.
    pub chosen: Vec<String>,
    pub trace: SelectionTrace,
}

pub fn stage_selection(data: &SpatialTable, config: &PipelineConfig, out: &mut Outputs) -> Result<SelectionOutcome> {
    let table = &data.table;
    let corr = selection::correlation_matrix(table)?;
    out.write_with("04_selection/correlation.csv", |b| corr.write_csv(b))?;
    let scores = selection::univariate_f_scores(table, config.selection.f_cap)?;
    out.write_with("04_selection/f_scores.csv", |b| {
        let mut wr = csv::Writer::from_writer(b);
        wr.write_record(["feature", "f", "p_value"])?;
        for (c, s) in table.columns.iter().zip(&scores) {
            wr.write_record([c.name.clone(), s.f.to_string(), s.p.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    let (screened, trace) = selection::select_features(table, config.selection.corr_threshold, &config.selection.gates)?;
    out.write_with("04_selection/rfe_trace.csv", |b| trace.write_csv(b))?;
    out.write("04_selection/selection.txt", report::selection_table(&trace).as_bytes())?;
    let chosen = match &trace.chosen {
        Some(c) => c.clone(),
        None => {
            log::warn!("selection: no subset passed every gate; linear models use the screened set");
            screened.clone()
        }
    };
    let outcome = SelectionOutcome { screened, chosen, trace };
    out.write_json("04_selection/selected.json", &outcome)?;
    Ok(outcome)
}

/// Features a recipe is fitted on: linear models get the selected set,
/// tree models every column.
pub fn recipe_table(recipe: &ModelRecipe, data: &SpatialTable, linear: Option<&[String]>) -> Result<SpatialTable> {
    match (recipe, linear) {
        (ModelRecipe::Ols | ModelRecipe::Rk { .. }, Some(names)) => data.select(names),
        _ => Ok(data.clone()),
    }
}

fn model_names(recipes: &[ModelRecipe]) -> Vec<String> {
    recipes
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if recipes.iter().filter(|o| o.tag() == r.tag()).count() > 1 {
                format!("{}{}", r.tag(), i + 1)
            } else {
                r.tag().to_string()
            }
        })
        .collect()
}

fn prediction_rows(data: &SpatialTable, kind: TargetKind, pred: &[f64], split: &str) -> Vec<PredictionRow> {
    let actual = crate::evaluation::to_psmp(&data.table.target, kind);
    data.ids
        .iter()
        .zip(actual)
        .zip(pred)
        .map(|((id, a), p)| PredictionRow { id: id.clone(), actual: a, predicted: *p, split: split.into() })
        .collect()
}

/// Fits one recipe on `train`, writes its artifacts under `05_model/<name>/`
/// and fills the matching parts of the bundle.
#[allow(clippy::too_many_arguments)]
pub fn fit_and_write(
    recipe: &ModelRecipe,
    name: &str,
    train: &SpatialTable,
    test: &SpatialTable,
    kind: TargetKind,
    seed: u64,
    config: &PipelineConfig,
    out: &mut Outputs,
    bundle: &mut Bundle,
) -> Result<usize> {
    let dir = format!("05_model/{name}");
    let fitted = fit_model(recipe, train, kind, seed)?;
    match &fitted {
        FittedModel::Ols(fit) => {
            out.write_json(&format!("{dir}/model.json"), &SavedModel::Ols { target: kind, fit: fit.clone() })?;
            let (std_fit, v) = standardized_summary(train)?;
            out.write(&format!("{dir}/summary.txt"), std_fit.summary(&bundle.dataset).as_bytes())?;
            if let Some(v) = &v {
                out.write(&format!("{dir}/vif.txt"), report::vif_table(&std_fit.names, v).as_bytes())?;
            }
            bundle.ols = Some(std_fit);
            bundle.vif = v;
        }
        FittedModel::Rk(m) => {
            out.write_json(&format!("{dir}/trend.json"), &SavedModel::Ols { target: kind, fit: m.ols.clone() })?;
            out.write_json(&format!("{dir}/variogram_fit.json"), &m.variogram)?;
            out.write_json(&format!("{dir}/stationarity.json"), &m.stationarity)?;
            let corr = correlogram(&train.xy, &m.ols.residuals, config.report.correlogram_bins, Some(m.empirical.max_dist))?;
            let vr = VariogramReport { empirical: m.empirical.clone(), model: m.variogram.model, correlogram: corr };
            out.write_with(&format!("{dir}/variogram.csv"), |b| {
                report::write_variogram_csv(Some(&vr.empirical), Some(&vr.model), b)
            })?;
            out.write_with(&format!("{dir}/correlogram.csv"), |b| report::write_correlogram_csv(&vr.correlogram, b))?;
            out.write_with(&format!("{dir}/residual_histogram.csv"), |b| {
                report::write_histogram_csv(&m.stationarity.histogram, b)
            })?;
            bundle.variogram = Some(vr);
        }
        FittedModel::Rulefit(m) => {
            out.write_json(&format!("{dir}/model.json"), &SavedModel::Rulefit { target: kind, model: m.clone() })?;
            out.write_with(&format!("{dir}/card.csv"), |b| m.write_card_csv(b))?;
            out.write(&format!("{dir}/rules.txt"), report::rules_table(m).as_bytes())?;
            log::info!("rulefit: {} rules, {} linear terms kept", m.n_rules(), m.n_linear());
            bundle.rulefit = Some(m.clone());
        }
        FittedModel::Forest(m) => {
            let leaves: usize = m.forest.trees.iter().map(|t| t.n_leaves()).sum();
            out.write_json(
                &format!("{dir}/forest.json"),
                &serde_json::json!({ "features": m.features, "n_trees": m.forest.trees.len(), "n_leaves": leaves }),
            )?;
        }
    }
    let mut rows = prediction_rows(train, kind, &fitted.predict_psmp(train, kind)?, "train");
    rows.extend(prediction_rows(test, kind, &fitted.predict_psmp(test, kind)?, "test"));
    out.write_with(&format!("{dir}/predictions.csv"), |b| report::write_predictions_csv(&rows, b))?;
    bundle.predictions.push(ModelPredictions { model: name.to_string(), rows });
    Ok(fitted.n_params())
}

/// OLS on standardized features for the coefficient table, with VIF.
/// Falls back to raw units when a column cannot be standardized.
fn standardized_summary(train: &SpatialTable) -> Result<(OlsFit, Option<Vec<f64>>)> {
    let t = match dataset::standardize(&train.table) {
        Ok((s, _)) => s,
        Err(e) => {
            log::warn!("summary in raw units: {e}");
            train.table.clone()
        }
    };
    let fit = ols_fit(&t.matrix, &t.target, &t.names())?;
    let v = if t.n_cols() >= 2 { vif(&t.matrix).ok() } else { None };
    Ok((fit, v))
}

pub fn train_test(data: &SpatialTable, config: &PipelineConfig) -> Result<(SpatialTable, SpatialTable)> {
    let (tr, te) = dataset::split_indices(data.len(), config.evaluation.train_fraction, derive_seed(config.seed, 3))?;
    Ok((data.rows(&tr), data.rows(&te)))
}

/// Fits every configured model on the training split. Returns the number
/// of regressors per model, in configuration order.
pub fn stage_model(data: &SpatialTable, linear: Option<&[String]>, config: &PipelineConfig, out: &mut Outputs, bundle: &mut Bundle) -> Result<Vec<usize>> {
    let kind = config.target();
    let recipes = config.models();
    let names = model_names(&recipes);
    let (train, test) = train_test(data, config)?;
    let mut params = Vec::new();
    for (i, (recipe, name)) in recipes.iter().zip(&names).enumerate() {
        let tr = recipe_table(recipe, &train, linear)?;
        let te = recipe_table(recipe, &test, linear)?;
        log::info!("model: fitting {name} on {} rows x {} features", tr.len(), tr.table.n_cols());
        let p = fit_and_write(recipe, name, &tr, &te, kind, derive_seed(config.seed, 100 + i as u64), config, out, bundle)
            .map_err(|e| Error::invalid(format!("{name}: {e}")))?;
        params.push(p);
    }
    Ok(params)
}

/// Hold-out metrics from the model stage's predictions, plus k-fold CV when
/// configured.
pub fn stage_evaluate(data: &SpatialTable, linear: Option<&[String]>, params: &[usize], config: &PipelineConfig, out: &mut Outputs, bundle: &mut Bundle) -> Result<()> {
    let dataset = bundle.dataset.clone();
    let mut metrics = Vec::new();
    for (preds, p) in bundle.predictions.iter().zip(params) {
        for split in ["train", "test"] {
            let rows: Vec<&PredictionRow> = preds.rows.iter().filter(|r| r.split == split).collect();
            if rows.is_empty() {
                continue;
            }
            let y: Vec<f64> = rows.iter().map(|r| r.actual).collect();
            let f: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
            metrics.push(MetricReport::compute(&preds.model, &dataset, split, &y, &f, *p)?);
        }
    }
    let mut cv = Vec::new();
    if let Some(k) = config.evaluation.cv_folds {
        let recipes = config.models();
        for (i, (recipe, name)) in recipes.iter().zip(model_names(&recipes)).enumerate() {
            let t = recipe_table(recipe, data, linear)?;
            let rep = kfold_cv(recipe, &t, config.target(), k, derive_seed(config.seed, 200 + i as u64), &dataset)
                .map_err(|e| Error::invalid(format!("{name}: {e}")))?;
            for mut m in rep.folds.into_iter().chain([rep.mean]) {
                m.model = name.clone();
                cv.push(m);
            }
        }
    }
    out.write_with("06_evaluate/metrics.csv", |b| write_reports_csv(&metrics, b))?;
    out.write_with("06_evaluate/cv_metrics.csv", |b| write_reports_csv(&cv, b))?;
    let mut text = report::metrics_table(&metrics);
    if !cv.is_empty() {
        let means: Vec<MetricReport> = cv.iter().filter(|m| m.split == "cv-mean").cloned().collect();
        text.push_str("\ncross-validation means\n");
        text.push_str(&report::metrics_table(&means));
    }
    out.write("06_evaluate/metrics.txt", text.as_bytes())?;
    bundle.metrics = metrics;
    bundle.cv_metrics = cv;
    Ok(())
}

/// Writes the bundle and renders every report from it.
pub fn write_bundle_and_report(bundle: &Bundle, config: &PipelineConfig, out: &mut Outputs) -> Result<()> {
    out.write_json("bundle.json", bundle)?;
    let dir = out.root().join("report");
    for f in report::emit_report(bundle, &dir, ReportFormat::All, config.report.histogram_bins)? {
        out.adopt(&f)?;
    }
    Ok(())
}

/// Runs every stage in order. On failure the manifest is still written,
/// naming the failed stage, and the stage error is returned.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Manifest> {
    config.validate()?;
    let mut out = Outputs::new(&config.output)?;
    let mut completed: Vec<String> = Vec::new();
    match run_stages(config, &mut out, &mut completed) {
        Ok(()) => {
            let m = out.manifest(completed, None);
            out.write_manifest(&m)?;
            Ok(m)
        }
        Err((stage, e)) => {
            let m = out.manifest(completed, Some((stage, &e)));
            out.write_manifest(&m)?;
            Err(e.in_stage(stage))
        }
    }
}

fn run_stages(config: &PipelineConfig, out: &mut Outputs, completed: &mut Vec<String>) -> std::result::Result<(), (&'static str, Error)> {
    let mut done = |s: &str| completed.push(s.to_string());
    let at = |stage: &'static str| move |e: Error| (stage, e);

    let mut canonical = config.clone();
    canonical.output = PathBuf::from(".");
    out.write_json("config.json", &canonical).map_err(at("collect"))?;

    let collected = stage_collect(config, out).map_err(at("collect"))?;
    done("collect");

    let mut bundle = Bundle { dataset: config.segment.as_str().to_string(), ..Default::default() };
    let records = if config.stages.outliers {
        let (kept, rep) = stage_outliers(&collected.records, config, out).map_err(at("outliers"))?;
        bundle.outliers = Some(rep);
        done("outliers");
        kept
    } else {
        collected.records.clone()
    };

    let table = stage_features(&records, &collected, config, out).map_err(at("features"))?;
    done("features");

    let linear = if config.stages.selection {
        let sel = stage_selection(&table, config, out).map_err(at("selection"))?;
        bundle.selection = Some(sel.trace.clone());
        done("selection");
        Some(sel.chosen)
    } else {
        None
    };

    let params = stage_model(&table, linear.as_deref(), config, out, &mut bundle).map_err(at("model"))?;
    done("model");

    if config.stages.evaluate {
        stage_evaluate(&table, linear.as_deref(), &params, config, out, &mut bundle).map_err(at("evaluate"))?;
        done("evaluate");
    }

    write_bundle_and_report(&bundle, config, out).map_err(at("report"))?;
    done("report");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn outputs_track_files_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path()).unwrap();
        out.write("b/x.txt", b"1").unwrap();
        out.write("a.txt", b"2").unwrap();
        out.write("b/x.txt", b"3").unwrap();
        let m = out.manifest(vec!["collect".into()], None);
        let paths: Vec<_> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["a.txt", "b/x.txt"]);
        assert_eq!(m.files[1].sha256, sha256_hex(b"3"));
        assert_eq!(std::fs::read(dir.path().join("b/x.txt")).unwrap(), b"3");
    }

    #[test]
    fn missing_input_names_collect_stage() {
        let dir = tempfile::tempdir().unwrap();
        let config = PipelineConfig {
            input: crate::config::InputConfig { records: dir.path().join("nope.csv"), ..Default::default() },
            output: dir.path().join("out"),
            ..Default::default()
        };
        let err = run_pipeline(&config).unwrap_err();
        assert!(matches!(&err, Error::Stage { stage, .. } if stage == "collect"), "{err}");
        let m = Manifest::from_file(&dir.path().join("out/manifest.json")).unwrap();
        assert_eq!(m.failed_stage.as_deref(), Some("collect"));
        assert!(m.completed.is_empty());
        assert_eq!(m.files.len(), 1);
    }
}
