use serde::{Deserialize, Serialize};

use super::kriging::{KrigingModel, KrigingOptions};
use super::stationarity::{stationarity_check, StationarityReport};
use super::variogram::{empirical_variogram, fit_exponential, EmpiricalVariogram, VariogramFit, VariogramModel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::linmodel::{ols_fit, OlsFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RkConfig {
    pub n_lags: usize,
    /// Variogram cutoff in meters; half the largest pairwise distance when unset.
    pub max_dist: Option<f64>,
    /// Bins with fewer pairs are excluded from the fit.
    pub min_pairs: usize,
    pub kriging: KrigingOptions,
    /// Adds half the kriging variance before exponentiating.
    pub lognormal_correction: bool,
}

impl Default for RkConfig {
    fn default() -> Self {
        RkConfig { n_lags: 15, max_dist: None, min_pairs: 30, kriging: KrigingOptions::default(), lognormal_correction: false }
    }
}

/// OLS trend on the log target plus ordinary kriging of its residuals.
#[derive(Debug, Clone)]
pub struct RkModel {
    pub ols: OlsFit,
    pub empirical: EmpiricalVariogram,
    pub variogram: VariogramFit,
    pub kriging: KrigingModel,
    pub stationarity: StationarityReport,
    pub lognormal_correction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RkPrediction {
    pub trend: f64,
    pub residual: f64,
    pub psmp: f64,
    pub kriging_variance: f64,
}

pub fn rk_fit(x: &Matrix, y_log: &[f64], xy: &[[f64; 2]], names: &[String], config: &RkConfig) -> Result<RkModel> {
    if xy.len() != y_log.len() {
        return Err(Error::LengthMismatch { expected: y_log.len(), got: xy.len() });
    }
    let ols = ols_fit(x, y_log, names)?;
    let stationarity = stationarity_check(&ols.residuals, 0.05, 30);
    if !stationarity.passed {
        log::warn!(
            "trend residuals fail the normality check (JB p = {:.3e}); kriging them anyway",
            stationarity.p_value
        );
    }
    let empirical = empirical_variogram(xy, &ols.residuals, config.n_lags, config.max_dist, config.min_pairs)?;
    let variogram = fit_exponential(&empirical)?;
    log::info!(
        "variogram: nugget {:.4e}, partial sill {:.4e}, range {:.1} m (effective {:.1} m)",
        variogram.model.nugget,
        variogram.model.partial_sill,
        variogram.model.range,
        variogram.model.effective_range()
    );
    let kriging = KrigingModel::new(xy, &ols.residuals, variogram.model, config.kriging)?;
    Ok(RkModel { ols, empirical, variogram, kriging, stationarity, lognormal_correction: config.lognormal_correction })
}

impl RkModel {
    pub fn variogram_model(&self) -> VariogramModel {
        self.variogram.model
    }
}

/// `exp(trend + kriged residual)` in price per square meter.
pub fn rk_predict(model: &RkModel, x: &Matrix, xy: &[[f64; 2]]) -> Result<Vec<RkPrediction>> {
    if x.nrows() != xy.len() {
        return Err(Error::LengthMismatch { expected: x.nrows(), got: xy.len() });
    }
    let trend = model.ols.predict(x)?;
    let kriged = model.kriging.krige(xy)?;
    Ok(trend
        .iter()
        .zip(&kriged)
        .map(|(t, k)| {
            let mut log_value = t + k.value;
            if model.lognormal_correction {
                log_value += 0.5 * k.variance;
            }
            RkPrediction { trend: *t, residual: k.value, psmp: log_value.exp(), kriging_variance: k.variance }
        })
        .collect())
}
