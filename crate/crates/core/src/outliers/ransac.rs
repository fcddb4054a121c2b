use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// How the inlier residual threshold is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ResidualThreshold {
    /// Median absolute deviation of the target, computed once.
    #[default]
    MadOfTarget,
    /// MAD of each candidate line's residuals, times a scale factor.
    MadOfResiduals(f64),
    Fixed(f64),
}

/// Robust line `y = slope·x + intercept`, refit by OLS on the inliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RansacFit {
    pub slope: f64,
    pub intercept: f64,
    pub inlier_mask: Vec<bool>,
    pub iterations_used: usize,
    pub threshold: f64,
}

impl RansacFit {
    pub fn n_inliers(&self) -> usize {
        self.inlier_mask.iter().filter(|m| **m).count()
    }
}

/// Plain least-squares line; `None` when all x are equal.
pub fn ols_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let mx = linalg::mean(x);
    let my = linalg::mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

const MAX_DRAWS_PER_ITER: usize = 100;

/// RANSAC with two-point minimal samples. Each iteration fits the exact line
/// through two points with distinct x, counts residuals within the
/// threshold, and the largest consensus set (ties: lower inlier SSE) wins.
pub fn ransac_line(
    x: &[f64],
    y: &[f64],
    n_iter: usize,
    seed: u64,
    min_inliers: usize,
    threshold: ResidualThreshold,
) -> Result<RansacFit> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    if n < 2 {
        return Err(Error::invalid("RANSAC needs at least 2 points"));
    }
    if n_iter == 0 {
        return Err(Error::invalid("RANSAC needs at least one iteration"));
    }
    let fixed_threshold = match threshold {
        ResidualThreshold::MadOfTarget => Some(linalg::mad(y)),
        ResidualThreshold::Fixed(t) => Some(t),
        ResidualThreshold::MadOfResiduals(_) => None,
    };
    let mut rng = rng::rng(seed);
    let mut best: Option<(usize, f64, Vec<bool>, f64, f64, f64)> = None;
    let mut used = 0;
    for _ in 0..n_iter {
        let mut sample = None;
        for _ in 0..MAX_DRAWS_PER_ITER {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            if x[i] != x[j] {
                sample = Some((i, j));
                break;
            }
        }
        let Some((i, j)) = sample else { continue };
        used += 1;
        let slope = (y[j] - y[i]) / (x[j] - x[i]);
        let intercept = y[i] - slope * x[i];
        let res: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
        let thr = match (fixed_threshold, threshold) {
            (Some(t), _) => t,
            (None, ResidualThreshold::MadOfResiduals(scale)) => scale * linalg::mad(&res),
            _ => unreachable!(),
        };
        let mask: Vec<bool> = res.iter().map(|r| r.abs() <= thr).collect();
        let count = mask.iter().filter(|m| **m).count();
        let sse: f64 = res.iter().zip(&mask).filter(|(_, m)| **m).map(|(r, _)| r * r).sum();
        let better = match &best {
            None => true,
            Some((bc, bsse, ..)) => count > *bc || (count == *bc && sse < *bsse),
        };
        if better {
            best = Some((count, sse, mask, slope, intercept, thr));
        }
    }
    let Some((count, _, mask, slope, intercept, thr)) = best else {
        return Err(Error::DegenerateRansac);
    };
    if count < min_inliers.max(2) {
        return Err(Error::invalid(format!(
            "best RANSAC consensus has {count} inliers, below the minimum {min_inliers}"
        )));
    }
    let (xi, yi): (Vec<f64>, Vec<f64>) =
        x.iter().zip(y).zip(&mask).filter(|(_, m)| **m).map(|((a, b), _)| (*a, *b)).unzip();
    let (slope, intercept) = ols_line(&xi, &yi).unwrap_or((slope, intercept));
    Ok(RansacFit { slope, intercept, inlier_mask: mask, iterations_used: used, threshold: thr })
}
