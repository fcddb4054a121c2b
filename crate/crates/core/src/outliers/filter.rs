use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FilterMethod {
    /// Box-plot fences `[Q1 − t·IQR, Q3 + t·IQR]`.
    Iqr,
    /// `|v − mean| / stddev ≤ t`, population stddev.
    Zscore,
}

impl FilterMethod {
    pub fn default_threshold(self) -> f64 {
        match self {
            FilterMethod::Iqr => 1.5,
            FilterMethod::Zscore => 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub keep: Vec<bool>,
    pub lower: f64,
    pub upper: f64,
    pub warning: Option<String>,
}

pub fn robust_filter(values: &[f64], method: FilterMethod, threshold: f64) -> Result<FilterOutcome> {
    let n = values.len();
    let keep_all = |why: &str| FilterOutcome {
        keep: vec![true; n],
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        warning: Some(why.to_string()),
    };
    let (lower, upper) = match method {
        FilterMethod::Iqr => {
            if n < 4 {
                return Err(Error::invalid(format!("IQR filter needs at least 4 values, got {n}")));
            }
            let mut s = values.to_vec();
            s.sort_by(f64::total_cmp);
            let q1 = linalg::quantile_sorted(&s, 0.25);
            let q3 = linalg::quantile_sorted(&s, 0.75);
            let iqr = q3 - q1;
            if iqr <= 0.0 {
                log::warn!("zero interquartile range; keeping all {n} values");
                return Ok(keep_all("zero interquartile range"));
            }
            (q1 - threshold * iqr, q3 + threshold * iqr)
        }
        FilterMethod::Zscore => {
            if n == 0 {
                return Ok(keep_all("empty input"));
            }
            let m = linalg::mean(values);
            let sd = linalg::pop_std(values);
            if sd <= 0.0 {
                log::warn!("zero standard deviation; keeping all {n} values");
                return Ok(keep_all("zero standard deviation"));
            }
            (m - threshold * sd, m + threshold * sd)
        }
    };
    Ok(FilterOutcome {
        keep: values.iter().map(|v| *v >= lower && *v <= upper).collect(),
        lower,
        upper,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// PSMP of one building's offers and deals (RUB/m²).
    const BUILDING: [f64; 13] = [
        225_146.0, 194_805.0, 178_261.0, 255_882.0, 247_059.0, 227_545.0, 223_529.0, 257_485.0,
        178_261.0, 239_645.0, 53_571.0, 210_300.0, 227_545.0,
    ];

    #[test]
    fn iqr_flags_suspicious_deal() {
        // Q1 = 194805, Q3 = 239645 → fences [127545, 306905]
        let out = robust_filter(&BUILDING, FilterMethod::Iqr, 1.5).unwrap();
        assert_eq!(out.lower, 127_545.0);
        assert_eq!(out.upper, 306_905.0);
        for (v, k) in BUILDING.iter().zip(&out.keep) {
            assert_eq!(*k, *v != 53_571.0);
        }
    }

    #[test]
    fn constant_vector_kept() {
        for m in [FilterMethod::Iqr, FilterMethod::Zscore] {
            let out = robust_filter(&[5.0; 6], m, m.default_threshold()).unwrap();
            assert!(out.keep.iter().all(|k| *k));
            assert!(out.warning.is_some());
        }
    }

    #[test]
    fn small_sample_masking() {
        let v = [0.0, 0.0, 0.0, 100.0];
        let z = robust_filter(&v, FilterMethod::Zscore, 3.0).unwrap();
        assert!(z.keep.iter().all(|k| *k));
        let q = robust_filter(&v, FilterMethod::Iqr, 1.5).unwrap();
        assert_eq!(q.keep, vec![true, true, true, false]);
    }

    #[test]
    fn iqr_needs_four() {
        assert!(robust_filter(&[1.0, 2.0, 3.0], FilterMethod::Iqr, 1.5).is_err());
    }
}
