use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::variogram::default_max_dist;
use crate::error::{Error, Result};
use crate::features::projection::distance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelogramBin {
    pub lower: f64,
    pub upper: f64,
    #[serde(with = "crate::serde_ext")]
    pub h: f64,
    #[serde(with = "crate::serde_ext")]
    pub correlation: f64,
    pub pairs: usize,
    /// Fewer than two pairs or no variation among the paired values.
    pub flagged: bool,
}

#[derive(Clone, Default)]
struct Sums {
    n: usize,
    h: f64,
    s: f64,
    ss: f64,
    sxy: f64,
}

/// Pearson correlation between values at pairs of points, per distance
/// bin. Each unordered pair enters in both orders so the estimate is
/// symmetric.
pub fn correlogram(xy: &[[f64; 2]], values: &[f64], n_bins: usize, max_dist: Option<f64>) -> Result<Vec<CorrelogramBin>> {
    let n = xy.len();
    if values.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: values.len() });
    }
    if n_bins == 0 {
        return Err(Error::invalid("need at least one bin"));
    }
    let max_dist = max_dist.unwrap_or_else(|| default_max_dist(xy));
    if !(max_dist > 0.0) {
        return Err(Error::invalid("max_dist must be positive"));
    }
    let width = max_dist / n_bins as f64;
    let rows: Vec<Vec<Sums>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![Sums::default(); n_bins];
            for j in i + 1..n {
                let h = distance(xy[i], xy[j]);
                if h > max_dist {
                    continue;
                }
                let b = ((h / width).ceil() as usize).saturating_sub(1).min(n_bins - 1);
                let (a, c) = (values[i], values[j]);
                let s = &mut acc[b];
                s.n += 1;
                s.h += h;
                s.s += a + c;
                s.ss += a * a + c * c;
                s.sxy += 2.0 * a * c;
            }
            acc
        })
        .collect();
    let mut tot = vec![Sums::default(); n_bins];
    for r in &rows {
        for (t, s) in tot.iter_mut().zip(r) {
            t.n += s.n;
            t.h += s.h;
            t.s += s.s;
            t.ss += s.ss;
            t.sxy += s.sxy;
        }
    }
    Ok(tot
        .iter()
        .enumerate()
        .map(|(b, s)| {
            let m = 2.0 * s.n as f64;
            let mean = s.s / m;
            let var = s.ss / m - mean * mean;
            let cov = s.sxy / m - mean * mean;
            let flagged = s.n < 2 || !(var > 1e-12 * (s.ss / m).abs().max(f64::MIN_POSITIVE));
            CorrelogramBin {
                lower: b as f64 * width,
                upper: (b + 1) as f64 * width,
                h: if s.n > 0 { s.h / s.n as f64 } else { (b as f64 + 0.5) * width },
                correlation: if flagged { f64::NAN } else { (cov / var).clamp(-1.0, 1.0) },
                pairs: s.n,
                flagged,
            }
        })
        .collect())
}
