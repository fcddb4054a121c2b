use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::projection::distance;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Linear-kernel radial basis surface `Z(x) = c₀ + Σ cᵢ·B(|x − sᵢ|)` with
/// `B(h) = −h`. The constant term keeps the system solvable for any set of
/// distinct sites, including a single one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralitySurface {
    pub sites: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub constant: f64,
    /// Diagonal jitter that was needed for a stable solve.
    pub jitter: f64,
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;
const RESIDUAL_TOL: f64 = 1e-8;

pub fn kernel(h: f64) -> f64 {
    -h
}

fn lu_condition_estimate(a: &Matrix) -> f64 {
    let lu = a.clone().lu();
    let u = lu.u();
    let d: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Solves the interpolation system. Jitter starts at 1e-10 times the mean
/// off-diagonal kernel magnitude and grows tenfold until the solve's
/// relative residual is at most 1e-8.
pub fn rbf_fit(sites: &[[f64; 2]], values: &[f64]) -> Result<CentralitySurface> {
    let m = sites.len();
    if m == 0 {
        return Err(Error::invalid("rbf_fit needs at least one site"));
    }
    if values.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: values.len() });
    }
    let mut a = Matrix::zeros(m + 1, m + 1);
    let mut off_sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let k = kernel(distance(sites[i], sites[j]));
                a[(i, j)] = k;
                off_sum += k.abs();
            }
        }
        a[(i, m)] = 1.0;
        a[(m, i)] = 1.0;
    }
    let scale = if m > 1 { off_sum / (m * (m - 1)) as f64 } else { 1.0 };
    let mut b = Vector::zeros(m + 1);
    for (i, v) in values.iter().enumerate() {
        b[i] = *v;
    }
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut aj = a.clone();
        for i in 0..m {
            aj[(i, i)] = jitter;
        }
        if let Some(x) = linalg::lu_solve(&aj, &b) {
            if x.iter().all(|v| v.is_finite()) && linalg::relative_residual(&aj, &x, &b) <= RESIDUAL_TOL {
                return Ok(CentralitySurface {
                    sites: sites.to_vec(),
                    weights: x.as_slice()[..m].to_vec(),
                    constant: x[m],
                    jitter,
                });
            }
        }
        rel *= 10.0;
    }
    let mut aj = a;
    for i in 0..m {
        aj[(i, i)] = JITTER_MAX * scale;
    }
    Err(Error::Singular { context: "RBF interpolation system".into(), condition: lu_condition_estimate(&aj) })
}

impl CentralitySurface {
    pub fn eval_point(&self, q: [f64; 2]) -> f64 {
        self.constant
            + self.sites.iter().zip(&self.weights).map(|(s, c)| c * kernel(distance(q, *s))).sum::<f64>()
    }
}

pub fn rbf_eval(surface: &CentralitySurface, queries: &[[f64; 2]]) -> Vec<f64> {
    queries.par_iter().map(|q| surface.eval_point(*q)).collect()
}
