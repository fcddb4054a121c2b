use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::NelderMead;
use crate::error::{Error, Result};
use crate::features::projection::distance;
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagBin {
    pub lower: f64,
    pub upper: f64,
    /// Mean pair distance in the bin (bin midpoint when empty).
    #[serde(with = "crate::serde_ext")]
    pub h: f64,
    #[serde(with = "crate::serde_ext")]
    pub gamma: f64,
    pub pairs: usize,
    /// Excluded from fitting: empty or below the minimum pair count.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub bins: Vec<LagBin>,
    pub max_dist: f64,
    /// Population variance of the values.
    pub variance: f64,
}

/// Half the largest pairwise distance.
pub fn default_max_dist(xy: &[[f64; 2]]) -> f64 {
    let max = xy
        .par_iter()
        .enumerate()
        .map(|(i, p)| xy[i + 1..].iter().map(|q| distance(*p, *q)).fold(0.0, f64::max))
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max);
    max / 2.0
}

#[derive(Clone)]
struct Acc {
    sum: Vec<f64>,
    h: Vec<f64>,
    n: Vec<usize>,
}

impl Acc {
    fn new(k: usize) -> Self {
        Acc { sum: vec![0.0; k], h: vec![0.0; k], n: vec![0; k] }
    }

    fn add(&mut self, b: usize, h: f64, v: f64) {
        self.sum[b] += v;
        self.h[b] += h;
        self.n[b] += 1;
    }

    fn merge(&mut self, o: &Acc) {
        for b in 0..self.n.len() {
            self.sum[b] += o.sum[b];
            self.h[b] += o.h[b];
            self.n[b] += o.n[b];
        }
    }
}

fn bin_of(h: f64, width: f64, n_lags: usize) -> Option<usize> {
    if h > width * n_lags as f64 {
        return None;
    }
    Some(((h / width).ceil() as usize).saturating_sub(1).min(n_lags - 1))
}

impl EmpiricalVariogram {
    /// Bins `(h, ½(zᵢ − zⱼ)²)` samples into `n_lags` equal-width bins over
    /// `(0, max_dist]`; zero-distance pairs fall in the first bin.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (f64, f64)>,
        n_lags: usize,
        max_dist: f64,
        min_pairs: usize,
        variance: f64,
    ) -> Result<Self> {
        check_bins(n_lags, max_dist)?;
        let width = max_dist / n_lags as f64;
        let mut acc = Acc::new(n_lags);
        for (h, half_sq) in pairs {
            if let Some(b) = bin_of(h, width, n_lags) {
                acc.add(b, h, half_sq);
            }
        }
        Ok(Self::finish(acc, n_lags, max_dist, min_pairs, variance))
    }

    fn finish(acc: Acc, n_lags: usize, max_dist: f64, min_pairs: usize, variance: f64) -> Self {
        let width = max_dist / n_lags as f64;
        let bins = (0..n_lags)
            .map(|b| {
                let n = acc.n[b];
                LagBin {
                    lower: b as f64 * width,
                    upper: (b + 1) as f64 * width,
                    h: if n > 0 { acc.h[b] / n as f64 } else { (b as f64 + 0.5) * width },
                    gamma: if n > 0 { acc.sum[b] / n as f64 } else { f64::NAN },
                    pairs: n,
                    flagged: n == 0 || n < min_pairs,
                }
            })
            .collect();
        EmpiricalVariogram { bins, max_dist, variance }
    }

    pub fn valid_bins(&self) -> impl Iterator<Item = &LagBin> {
        self.bins.iter().filter(|b| !b.flagged)
    }
}

fn check_bins(n_lags: usize, max_dist: f64) -> Result<()> {
    if n_lags == 0 {
        return Err(Error::invalid("need at least one lag bin"));
    }
    if !(max_dist > 0.0) || !max_dist.is_finite() {
        return Err(Error::invalid(format!("max_dist must be positive, got {max_dist}")));
    }
    Ok(())
}

/// Matheron estimator `γ(h) = 1/(2N(h)) Σ (zᵢ − zⱼ)²` over equal-width bins.
pub fn empirical_variogram(
    xy: &[[f64; 2]],
    values: &[f64],
    n_lags: usize,
    max_dist: Option<f64>,
    min_pairs: usize,
) -> Result<EmpiricalVariogram> {
    let n = xy.len();
    if values.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: values.len() });
    }
    if n < 2 {
        return Err(Error::invalid("variogram needs at least 2 points"));
    }
    if n < 30 {
        log::warn!("empirical variogram from only {n} points");
    }
    let max_dist = match max_dist {
        Some(d) => d,
        None => {
            let d = default_max_dist(xy);
            if d > 0.0 {
                d
            } else {
                1.0
            }
        }
    };
    check_bins(n_lags, max_dist)?;
    let width = max_dist / n_lags as f64;
    // per-row accumulators merged in row order keep the sums independent of
    // the thread count
    let rows: Vec<Acc> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = Acc::new(n_lags);
            for j in i + 1..n {
                let h = distance(xy[i], xy[j]);
                if let Some(b) = bin_of(h, width, n_lags) {
                    let d = values[i] - values[j];
                    acc.add(b, h, 0.5 * d * d);
                }
            }
            acc
        })
        .collect();
    let mut acc = Acc::new(n_lags);
    for r in &rows {
        acc.merge(r);
    }
    let variance = linalg::pop_std(values).powi(2);
    Ok(EmpiricalVariogram::finish(acc, n_lags, max_dist, min_pairs, variance))
}

/// Exponential semivariogram `nugget + partial_sill·(1 − exp(−h/range))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub nugget: f64,
    pub partial_sill: f64,
    pub range: f64,
}

impl VariogramModel {
    pub fn gamma(&self, h: f64) -> f64 {
        self.nugget + self.partial_sill * (1.0 - (-h / self.range).exp())
    }

    pub fn sill(&self) -> f64 {
        self.nugget + self.partial_sill
    }

    /// Distance at which the model reaches 95% of the partial sill.
    pub fn effective_range(&self) -> f64 {
        3.0 * self.range
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub model: VariogramModel,
    /// Pair-weighted squared error at the optimum.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits the exponential model by pair-count-weighted least squares using a
/// bounded simplex search from (first-bin γ, variance, max_dist/3).
pub fn fit_exponential(emp: &EmpiricalVariogram) -> Result<VariogramFit> {
    let bins: Vec<&LagBin> = emp.valid_bins().collect();
    if bins.len() < 3 {
        return Err(Error::invalid(format!("variogram fit needs 3 valid bins, found {}", bins.len())));
    }
    let gmax = bins.iter().map(|b| b.gamma).fold(0.0, f64::max);
    let scale = gmax.max(emp.variance);
    if !(scale > 0.0) {
        // constant field
        return Ok(VariogramFit {
            model: VariogramModel { nugget: 0.0, partial_sill: 0.0, range: emp.max_dist / 3.0 },
            objective: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let total_pairs: f64 = bins.iter().map(|b| b.pairs as f64).sum();
    // parameters normalized to (nugget/scale, psill/scale, range/max_dist)
    let objective = |p: &[f64]| -> f64 {
        let m = VariogramModel { nugget: p[0] * scale, partial_sill: p[1] * scale, range: p[2] * emp.max_dist };
        bins.iter()
            .map(|b| {
                let e = (m.gamma(b.h) - b.gamma) / scale;
                b.pairs as f64 * e * e
            })
            .sum::<f64>()
            / total_pairs
    };
    let first = bins[0].gamma / scale;
    let start = [first, ((emp.variance / scale) - first).max(0.05), 1.0 / 3.0];
    let lower = [0.0, 0.0, 1e-3];
    let upper = [2.0, 4.0, 10.0];
    let m = NelderMead::default().minimize(objective, &start, &lower, &upper)?;
    if !m.value.is_finite() {
        return Err(Error::Optimizer(format!("variogram fit ended at non-finite objective after {} iterations", m.iterations)));
    }
    Ok(VariogramFit {
        model: VariogramModel { nugget: m.x[0] * scale, partial_sill: m.x[1] * scale, range: m.x[2] * emp.max_dist },
        objective: m.value * scale * scale * total_pairs,
        iterations: m.iterations,
        converged: m.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize, spacing: f64) -> Vec<[f64; 2]> {
        (0..n * n).map(|k| [(k % n) as f64 * spacing, (k / n) as f64 * spacing]).collect()
    }

    #[test]
    fn constant_field_has_zero_gamma() {
        let xy = grid(8, 10.0);
        let v = empirical_variogram(&xy, &vec![3.0; xy.len()], 6, None, 1).unwrap();
        assert!(v.valid_bins().all(|b| b.gamma == 0.0));
    }

    #[test]
    fn two_points() {
        let v = empirical_variogram(&[[0.0, 0.0], [3.0, 4.0]], &[1.0, 4.0], 4, Some(10.0), 1).unwrap();
        let populated: Vec<&LagBin> = v.valid_bins().collect();
        assert_eq!(populated.len(), 1);
        assert_eq!(populated[0].gamma, 4.5);
        assert_eq!(populated[0].h, 5.0);
        assert_eq!(v.bins.iter().filter(|b| b.flagged).count(), 3);
    }

    #[test]
    fn iid_noise_is_flat_at_variance() {
        let mut r = rng::rng(2);
        let xy: Vec<[f64; 2]> = (0..1500).map(|_| [r.random::<f64>() * 1000.0, r.random::<f64>() * 1000.0]).collect();
        let noise = Normal::new(0.0, 2.0).unwrap();
        let z: Vec<f64> = (0..xy.len()).map(|_| noise.sample(&mut r)).collect();
        let v = empirical_variogram(&xy, &z, 10, None, 30).unwrap();
        for b in v.valid_bins() {
            assert!((b.gamma - 4.0).abs() < 0.4, "{b:?}");
        }
    }

    fn exact_points(m: VariogramModel, n_lags: usize, max_dist: f64) -> EmpiricalVariogram {
        let width = max_dist / n_lags as f64;
        let bins = (0..n_lags)
            .map(|b| {
                let h = (b as f64 + 0.5) * width;
                LagBin { lower: b as f64 * width, upper: (b + 1) as f64 * width, h, gamma: m.gamma(h), pairs: 100, flagged: false }
            })
            .collect();
        EmpiricalVariogram { bins, max_dist, variance: m.sill() }
    }

    #[test]
    fn recovers_exact_model() {
        let truth = VariogramModel { nugget: 0.1, partial_sill: 0.9, range: 500.0 };
        let fit = fit_exponential(&exact_points(truth, 15, 2500.0)).unwrap().model;
        assert!((fit.nugget - 0.1).abs() <= 0.01, "{fit:?}");
        assert!((fit.partial_sill - 0.9).abs() <= 0.09, "{fit:?}");
        assert!((fit.range - 500.0).abs() <= 50.0, "{fit:?}");
        assert_eq!(fit.gamma(0.0), fit.nugget);
    }

    #[test]
    fn pure_nugget_fit_is_flat() {
        let truth = VariogramModel { nugget: 1.0, partial_sill: 0.0, range: 100.0 };
        let emp = exact_points(truth, 10, 1000.0);
        let fit = fit_exponential(&emp).unwrap().model;
        for b in &emp.bins {
            assert!((fit.gamma(b.h) - 1.0).abs() <= 0.05);
        }
    }

    proptest! {
        #[test]
        fn model_is_monotone(nugget in 0.0f64..5.0, ps in 0.0f64..5.0, range in 1e-3f64..1e4, h in 0.0f64..1e5, dh in 0.0f64..1e3) {
            let m = VariogramModel { nugget, partial_sill: ps, range };
            prop_assert!(m.gamma(h + dh) >= m.gamma(h));
            prop_assert_eq!(m.gamma(0.0), nugget);
        }
    }
}
