//! Error metrics and k-fold cross-validation of the price models.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{fold_indices, SpatialTable};
use crate::error::{Error, Result};
use crate::features::TargetKind;
use crate::geostat::{rk_fit, rk_predict, RkConfig, RkModel};
use crate::linalg;
use crate::linmodel::{ols_fit, OlsFit};
use crate::rulefit::{rulefit_fit, ForestModel, ForestParams, RuleFitConfig, RuleFitModel};

fn check_lengths(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch { expected: y.len(), got: yhat.len() });
    }
    if y.is_empty() {
        return Err(Error::invalid("no observations to score"));
    }
    Ok(())
}

/// Mean absolute error in target units.
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Mean absolute percentage error, in percent. Actual values must be
/// positive.
pub fn mape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive { index, value });
    }
    Ok(100.0 * y.iter().zip(yhat).map(|(a, b)| (a - b).abs() / a).sum::<f64>() / y.len() as f64)
}

pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y, yhat)?;
    let m = linalg::mean(y);
    let tss: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
    if !(tss > 0.0) {
        return Err(Error::ZeroVariance("target".into()));
    }
    let rss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - rss / tss)
}

/// `1 − (1 − R²)(n − 1)/(n − p − 1)` for a model with `p` regressors.
pub fn r2_adj(y: &[f64], yhat: &[f64], p: usize) -> Result<f64> {
    let r = r2(y, yhat)?;
    let n = y.len();
    if n <= p + 1 {
        return Err(Error::invalid(format!("adjusted R² needs n > p + 1 (n = {n}, p = {p})")));
    }
    Ok(1.0 - (1.0 - r) * (n - 1) as f64 / (n - p - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub dataset: String,
    /// Which rows were scored: `train`, `test` or `fold-k`.
    pub split: String,
    pub n: usize,
    pub p: usize,
    pub mae: f64,
    pub mape: f64,
    #[serde(with = "crate::serde_ext")]
    pub r2_adj: f64,
}

impl MetricReport {
    pub fn compute(model: &str, dataset: &str, split: &str, y: &[f64], yhat: &[f64], p: usize) -> Result<Self> {
        Ok(MetricReport {
            model: model.into(),
            dataset: dataset.into(),
            split: split.into(),
            n: y.len(),
            p,
            mae: mae(y, yhat)?,
            mape: mape(y, yhat)?,
            // too few rows for the adjustment is not an error for a report
            r2_adj: r2_adj(y, yhat, p).unwrap_or(f64::NAN),
        })
    }
}

pub fn write_reports_csv<W: Write>(reports: &[MetricReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model", "dataset", "split", "n", "p", "mae", "mape", "r2_adj"])?;
    for r in reports {
        out.write_record([
            r.model.clone(),
            r.dataset.clone(),
            r.split.clone(),
            r.n.to_string(),
            r.p.to_string(),
            r.mae.to_string(),
            r.mape.to_string(),
            r.r2_adj.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// A fit-then-predict procedure scored on price per square meter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelRecipe {
    Ols,
    Rk {
        #[serde(default)]
        config: RkConfig,
    },
    Rulefit {
        #[serde(default)]
        config: RuleFitConfig,
    },
    Forest {
        #[serde(default = "crate::rulefit::baseline_forest_params")]
        params: ForestParams,
    },
}

impl ModelRecipe {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelRecipe::Ols => "ols",
            ModelRecipe::Rk { .. } => "rk",
            ModelRecipe::Rulefit { .. } => "rulefit",
            ModelRecipe::Forest { .. } => "forest",
        }
    }

    /// Smallest training set the recipe accepts.
    pub fn min_rows(&self, p: usize) -> usize {
        match self {
            ModelRecipe::Ols | ModelRecipe::Rk { .. } => p + 2,
            ModelRecipe::Rulefit { config } => (2 * config.forest.tree.min_leaf).max(config.n_folds).max(2),
            ModelRecipe::Forest { params } => 2 * params.tree.min_leaf,
        }
    }
}

/// Converts a model-scale target to price per square meter.
pub fn to_psmp(values: &[f64], kind: TargetKind) -> Vec<f64> {
    match kind {
        TargetKind::LogPsmp => values.iter().map(|v| v.exp()).collect(),
        TargetKind::Psmp => values.to_vec(),
    }
}

/// A model fitted by [`fit_model`].
#[derive(Debug, Clone)]
pub enum FittedModel {
    Ols(OlsFit),
    Rk(Box<RkModel>),
    Rulefit(RuleFitModel),
    Forest(ForestModel),
}

impl FittedModel {
    /// Number of regressors, as counted by adjusted R².
    pub fn n_params(&self) -> usize {
        match self {
            FittedModel::Ols(f) => f.n_features(),
            FittedModel::Rk(m) => m.ols.n_features(),
            FittedModel::Rulefit(m) => m.terms.len(),
            FittedModel::Forest(m) => m.features.len(),
        }
    }

    /// Price-per-square-meter predictions; columns are matched by name.
    pub fn predict_psmp(&self, data: &SpatialTable, kind: TargetKind) -> Result<Vec<f64>> {
        match self {
            FittedModel::Ols(f) => Ok(to_psmp(&f.predict(&data.table.select(&f.names)?.matrix)?, kind)),
            FittedModel::Rk(m) => {
                let x = data.table.select(&m.ols.names)?.matrix;
                Ok(rk_predict(m, &x, &data.xy)?.iter().map(|p| p.psmp).collect())
            }
            FittedModel::Rulefit(m) => {
                let t = data.table.select(&m.features)?;
                Ok(to_psmp(&m.predict(&t.matrix, &m.features)?, kind))
            }
            FittedModel::Forest(m) => {
                let t = data.table.select(&m.features)?;
                Ok(to_psmp(&m.predict(&t.matrix, &m.features)?, kind))
            }
        }
    }
}

pub fn fit_model(recipe: &ModelRecipe, train: &SpatialTable, kind: TargetKind, seed: u64) -> Result<FittedModel> {
    let names = train.table.names();
    Ok(match recipe {
        ModelRecipe::Ols => FittedModel::Ols(ols_fit(&train.table.matrix, &train.table.target, &names)?),
        ModelRecipe::Rk { config } => {
            if kind != TargetKind::LogPsmp {
                return Err(Error::invalid("regression kriging works on the log target"));
            }
            FittedModel::Rk(Box::new(rk_fit(&train.table.matrix, &train.table.target, &train.xy, &names, config)?))
        }
        ModelRecipe::Rulefit { config } => FittedModel::Rulefit(rulefit_fit(&train.table, config, seed)?),
        ModelRecipe::Forest { params } => FittedModel::Forest(ForestModel::fit(&train.table, params, seed)?),
    })
}

/// Fits on `train` and returns price-per-square-meter predictions for
/// `test` together with the number of regressors the fit used.
pub fn fit_predict(recipe: &ModelRecipe, train: &SpatialTable, test: &SpatialTable, kind: TargetKind, seed: u64) -> Result<(Vec<f64>, usize)> {
    let model = fit_model(recipe, train, kind, seed)?;
    Ok((model.predict_psmp(test, kind)?, model.n_params()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<MetricReport>,
    /// Fold-averaged metrics, `split = "cv-mean"`.
    pub mean: MetricReport,
}

/// K-fold cross-validation with folds drawn from `seed`; each fold's model
/// gets its own seed derived from it.
pub fn kfold_cv(recipe: &ModelRecipe, data: &SpatialTable, kind: TargetKind, k: usize, seed: u64, dataset: &str) -> Result<CvReport> {
    let n = data.len();
    let folds = fold_indices(n, k, seed)?;
    let smallest_train = n - n.div_ceil(k);
    let need = recipe.min_rows(data.table.n_cols());
    if smallest_train < need {
        return Err(Error::invalid(format!(
            "{} needs {need} training rows, {k}-fold split leaves {smallest_train}",
            recipe.tag()
        )));
    }
    let reports = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let (tr, te) = (data.rows(&train), data.rows(&test));
            let (pred, p) = fit_predict(recipe, &tr, &te, kind, crate::rng::derive_seed(seed, f as u64))?;
            MetricReport::compute(recipe.tag(), dataset, &format!("fold-{f}"), &to_psmp(&te.table.target, kind), &pred, p)
        })
        .collect::<Result<Vec<_>>>()?;
    let avg = |g: fn(&MetricReport) -> f64| reports.iter().map(g).sum::<f64>() / k as f64;
    let mean = MetricReport {
        model: recipe.tag().into(),
        dataset: dataset.into(),
        split: "cv-mean".into(),
        n,
        p: reports.iter().map(|r| r.p).max().unwrap_or(0),
        mae: avg(|r| r.mae),
        mape: avg(|r| r.mape),
        r2_adj: avg(|r| r.r2_adj),
    };
    Ok(CvReport { folds: reports, mean })
}
