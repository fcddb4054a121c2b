use std::collections::BTreeMap;

use nalgebra::{Dyn, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::variogram::VariogramModel;
use crate::error::{Error, Result};
use crate::features::projection::distance;
use crate::linalg::{self, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct KrigingOptions {
    /// Nearest training points used per query.
    pub neighborhood: usize,
    /// Up to this many training points every query uses the full system,
    /// factored once.
    pub full_system_max: usize,
}

impl Default for KrigingOptions {
    fn default() -> Self {
        KrigingOptions { neighborhood: 32, full_system_max: 1000 }
    }
}

/// Ordinary kriging of a scalar field. Training points sharing coordinates
/// are merged and their values averaged.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    pub xy: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub variogram: VariogramModel,
    pub options: KrigingOptions,
    full: Option<LU<f64, Dyn, Dyn>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kriged {
    pub value: f64,
    pub variance: f64,
    pub weight_sum: f64,
}

/// Semivariance between two locations. Coincident points have γ = 0; the
/// nugget is a jump at any positive separation.
pub fn semivariance(m: &VariogramModel, h: f64) -> f64 {
    if h == 0.0 {
        0.0
    } else {
        m.gamma(h)
    }
}

fn degenerate(m: &VariogramModel) -> bool {
    !(m.sill() > 0.0)
}

/// Left-hand side `[Γ 1; 1ᵀ 0]` for the given points.
pub fn system_matrix(xy: &[[f64; 2]], m: &VariogramModel) -> Matrix {
    let k = xy.len();
    let mut a = Matrix::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in i + 1..k {
            let g = semivariance(m, distance(xy[i], xy[j]));
            a[(i, j)] = g;
            a[(j, i)] = g;
        }
        a[(i, k)] = 1.0;
        a[(k, i)] = 1.0;
    }
    a
}

fn rhs(xy: &[[f64; 2]], idx: impl Iterator<Item = usize>, q: [f64; 2], m: &VariogramModel, k: usize) -> Vector {
    let mut b = Vector::zeros(k + 1);
    for (r, i) in idx.enumerate() {
        b[r] = semivariance(m, distance(xy[i], q));
    }
    b[k] = 1.0;
    b
}

impl KrigingModel {
    pub fn new(xy: &[[f64; 2]], values: &[f64], variogram: VariogramModel, options: KrigingOptions) -> Result<Self> {
        if xy.is_empty() {
            return Err(Error::invalid("kriging needs at least one training point"));
        }
        if xy.len() != values.len() {
            return Err(Error::LengthMismatch { expected: xy.len(), got: values.len() });
        }
        if options.neighborhood == 0 {
            return Err(Error::invalid("kriging neighborhood must be positive"));
        }
        let mut merged: BTreeMap<(u64, u64), (usize, f64, usize)> = BTreeMap::new();
        for (i, (p, v)) in xy.iter().zip(values).enumerate() {
            let e = merged.entry((p[0].to_bits(), p[1].to_bits())).or_insert((0, 0.0, i));
            e.0 += 1;
            e.1 += v;
        }
        let (xy, values): (Vec<[f64; 2]>, Vec<f64>) = if merged.len() == xy.len() {
            (xy.to_vec(), values.to_vec())
        } else {
            log::info!("kriging: merged {} duplicate locations", xy.len() - merged.len());
            let mut rows: Vec<(usize, [f64; 2], f64)> =
                merged.into_values().map(|(c, s, first)| (first, xy[first], s / c as f64)).collect();
            rows.sort_by_key(|r| r.0);
            rows.into_iter().map(|r| (r.1, r.2)).unzip()
        };
        let mut model = KrigingModel { xy, values, variogram, options, full: None };
        if model.uses_full_system() && !degenerate(&variogram) {
            let lu = system_matrix(&model.xy, &variogram).lu();
            if !lu.is_invertible() {
                return Err(Error::Singular { context: "kriging system".into(), condition: f64::INFINITY });
            }
            model.full = Some(lu);
        }
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.xy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xy.is_empty()
    }

    fn uses_full_system(&self) -> bool {
        self.xy.len() <= self.options.full_system_max || self.options.neighborhood >= self.xy.len()
    }

    /// Indices of the `k` nearest training points (ties by index).
    fn neighbors(&self, q: [f64; 2]) -> Vec<usize> {
        let k = self.options.neighborhood.min(self.xy.len());
        let mut d: Vec<(f64, usize)> = self.xy.iter().enumerate().map(|(i, p)| (distance(*p, q), i)).collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_one(&self, q: [f64; 2]) -> Result<Kriged> {
        let m = &self.variogram;
        let (idx, solution) = if let Some(lu) = &self.full {
            let n = self.xy.len();
            let b = rhs(&self.xy, 0..n, q, m, n);
            let x = lu.solve(&b).ok_or_else(|| Error::Singular { context: "kriging system".into(), condition: f64::INFINITY })?;
            ((0..n).collect::<Vec<_>>(), Some((x, b)))
        } else {
            let idx = self.neighbors(q);
            if degenerate(m) {
                (idx, None)
            } else {
                let pts: Vec<[f64; 2]> = idx.iter().map(|&i| self.xy[i]).collect();
                let a = system_matrix(&pts, m);
                let b = rhs(&pts, 0..pts.len(), q, m, pts.len());
                let x = linalg::lu_solve(&a, &b).ok_or_else(|| Error::Singular {
                    context: "kriging neighborhood system".into(),
                    condition: f64::INFINITY,
                })?;
                (idx, Some((x, b)))
            }
        };
        let k = idx.len();
        match solution {
            None => {
                // no spatial structure: equal weights
                let value = idx.iter().map(|&i| self.values[i]).sum::<f64>() / k as f64;
                Ok(Kriged { value, variance: 0.0, weight_sum: 1.0 })
            }
            Some((x, b)) => {
                let w = x.rows(0, k);
                let value: f64 = idx.iter().zip(w.iter()).map(|(&i, wi)| wi * self.values[i]).sum();
                let weight_sum: f64 = w.iter().sum();
                let variance = (w.iter().zip(b.iter()).map(|(wi, g)| wi * g).sum::<f64>() + x[k]).max(0.0);
                Ok(Kriged { value, variance, weight_sum })
            }
        }
    }

    /// Kriged value and variance at every query; queries run in parallel.
    pub fn krige(&self, queries: &[[f64; 2]]) -> Result<Vec<Kriged>> {
        queries.par_iter().map(|q| self.predict_one(*q)).collect()
    }
}

/// Convenience wrapper: build the model and predict.
pub fn krige(model: &KrigingModel, queries: &[[f64; 2]]) -> Result<Vec<Kriged>> {
    model.krige(queries)
}
