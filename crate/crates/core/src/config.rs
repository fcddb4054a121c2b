//! Pipeline configuration. JSON only; unknown keys are rejected and every
//! field has a default, so `{}` is a valid land-parcel configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{SchemaConfig, Segment};
use crate::error::{Error, Result};
use crate::evaluation::ModelRecipe;
use crate::features::{FeatureConfig, TargetKind};
use crate::outliers::OutlierConfig;
use crate::selection::RfeGates;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// CSV, or GeoJSON when the extension is `.geojson` / `.json`.
    pub records: PathBuf,
    pub schema: SchemaConfig,
    /// Points of interest (`category,lon,lat`).
    pub pois: Option<PathBuf>,
    /// Road graph nodes (`id,lon,lat`) and edges (`from_id,to_id,length_m,oneway`).
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            records: PathBuf::from("records.csv"),
            schema: SchemaConfig::default(),
            pois: None,
            nodes: None,
            edges: None,
        }
    }
}

/// Stage switches. Collection, features and modelling always run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub outliers: bool,
    pub selection: bool,
    pub evaluate: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles { outliers: true, selection: true, evaluate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Pairs of features correlated above this lose the member less
    /// correlated with the target.
    pub corr_threshold: f64,
    /// Ceiling for univariate F statistics.
    pub f_cap: f64,
    pub gates: RfeGates,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { corr_threshold: 0.8, f_cap: crate::selection::F_CAP, gates: RfeGates::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub train_fraction: f64,
    /// K-fold cross-validation on the cleaned table; skipped when unset.
    pub cv_folds: Option<usize>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { train_fraction: 0.7, cv_folds: Some(5) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub histogram_bins: usize,
    pub correlogram_bins: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { histogram_bins: 30, correlogram_bins: 15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub segment: Segment,
    pub seed: u64,
    pub input: InputConfig,
    pub output: PathBuf,
    pub stages: StageToggles,
    pub outliers: OutlierConfig,
    /// Empty definitions pick the segment's default feature set.
    pub features: FeatureConfig,
    pub selection: SelectionConfig,
    /// Empty picks the segment default: OLS and regression kriging for
    /// land parcels, OLS, RuleFit and the forest for flats.
    pub models: Vec<ModelRecipe>,
    pub evaluation: EvaluationConfig,
    pub report: ReportConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            segment: Segment::LandParcel,
            seed: 0,
            input: InputConfig::default(),
            output: PathBuf::from("out"),
            stages: StageToggles::default(),
            outliers: OutlierConfig::default(),
            features: FeatureConfig::default(),
            selection: SelectionConfig::default(),
            models: vec![],
            evaluation: EvaluationConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: PipelineConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::File { path: path.to_path_buf(), source: e })?;
        PipelineConfig::from_json(&s)
    }

    /// Canonical form: pretty JSON with every default spelled out.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.evaluation.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("evaluation.train_fraction must be in (0, 1), got {f}")));
        }
        if let Some(k) = self.evaluation.cv_folds {
            if k < 2 {
                return Err(Error::Config(format!("evaluation.cv_folds must be at least 2, got {k}")));
            }
        }
        if self.target() == TargetKind::Psmp && self.models().iter().any(|m| matches!(m, ModelRecipe::Rk { .. })) {
            return Err(Error::Config("regression kriging needs the log_psmp target".into()));
        }
        Ok(())
    }

    /// Rebases relative input and output paths onto `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input.records);
        fix(&mut self.output);
        for p in [&mut self.input.pois, &mut self.input.nodes, &mut self.input.edges].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        if !self.features.definitions.is_empty() {
            return self.features.clone();
        }
        let mut c = match self.segment {
            Segment::LandParcel => FeatureConfig::land_default(),
            Segment::Flat => FeatureConfig::flat_default(),
        };
        c.origin = self.features.origin;
        if self.features.target.is_some() {
            c.target = self.features.target;
        }
        c
    }

    pub fn target(&self) -> TargetKind {
        self.feature_config().target.unwrap_or_else(|| TargetKind::default_for(self.segment))
    }

    pub fn models(&self) -> Vec<ModelRecipe> {
        if !self.models.is_empty() {
            return self.models.clone();
        }
        match self.segment {
            Segment::LandParcel => vec![ModelRecipe::Ols, ModelRecipe::Rk { config: Default::default() }],
            Segment::Flat => vec![
                ModelRecipe::Ols,
                ModelRecipe::Rulefit { config: Default::default() },
                ModelRecipe::Forest { params: crate::rulefit::baseline_forest_params() },
            ],
        }
    }
}

/// JSON schema of [`PipelineConfig`].
pub fn config_schema() -> Result<String> {
    Ok(serde_json::to_string_pretty(&schemars::schema_for!(PipelineConfig))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(PipelineConfig::from_json("{}").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_json(r#"{"sed": 1}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"outliers": {"kmeans": {"kk": 3}}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"models": [{"model": "lasso"}]}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"models": [{"model": "rk", "config": {"lags": 3}}]}"#).is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let c = PipelineConfig::from_json(
            r#"{"segment": "flat", "seed": 7, "models": [{"model": "rulefit", "config": {"rule_cap": 20}}],
                "evaluation": {"cv_folds": null}}"#,
        )
        .unwrap();
        let once = c.to_json().unwrap();
        let twice = PipelineConfig::from_json(&once).unwrap().to_json().unwrap();
        assert_eq!(once, twice);
        assert_eq!(PipelineConfig::from_json(&once).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_json(r#"{"evaluation": {"train_fraction": 1.0}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"evaluation": {"cv_folds": 1}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"segment": "flat", "models": [{"model": "rk"}]}"#).is_err());
    }

    #[test]
    fn segment_defaults() {
        let flat = PipelineConfig { segment: Segment::Flat, ..Default::default() };
        assert_eq!(flat.target(), TargetKind::Psmp);
        let tags: Vec<_> = flat.models().iter().map(|m| m.tag()).collect();
        assert_eq!(tags, ["ols", "rulefit", "forest"]);
        let land = PipelineConfig::default();
        assert_eq!(land.target(), TargetKind::LogPsmp);
        assert_eq!(land.feature_config(), FeatureConfig::land_default());
    }

    #[test]
    fn schema_mentions_every_section() {
        let s = config_schema().unwrap();
        for key in ["segment", "outliers", "features", "selection", "models", "evaluation", "report"] {
            assert!(s.contains(&format!("\"{key}\"")), "{key}");
        }
    }

    #[test]
    fn resolves_relative_paths() {
        let mut c = PipelineConfig::default();
        c.input.pois = Some("/abs/pois.csv".into());
        c.resolve_paths(Path::new("/data"));
        assert_eq!(c.input.records, Path::new("/data/records.csv"));
        assert_eq!(c.output, Path::new("/data/out"));
        assert_eq!(c.input.pois.as_deref(), Some(Path::new("/abs/pois.csv")));
    }
}
