use serde::{Deserialize, Serialize};

use crate::linmodel::jarque_bera;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub jarque_bera: f64,
    pub p_value: f64,
    pub passed: bool,
    pub histogram: Vec<HistogramBin>,
    pub note: Option<String>,
}

/// Equal-width histogram over the data range.
pub fn histogram(values: &[f64], n_bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || n_bins == 0 {
        return vec![];
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; n_bins];
    for v in values {
        let b = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin { lower: lo + b as f64 * width, upper: lo + (b + 1) as f64 * width, count })
        .collect()
}

/// Normality of trend residuals as the stationarity proxy: passes when the
/// Jarque-Bera p-value exceeds `alpha`.
pub fn stationarity_check(residuals: &[f64], alpha: f64, n_bins: usize) -> StationarityReport {
    let histogram = histogram(residuals, n_bins);
    match jarque_bera(residuals) {
        Ok((jb, p)) => StationarityReport { jarque_bera: jb, p_value: p, passed: p > alpha, histogram, note: None },
        Err(e) => StationarityReport {
            jarque_bera: f64::NAN,
            p_value: f64::NAN,
            passed: false,
            histogram,
            note: Some(e.to_string()),
        },
    }
}
