//! LASSO by cyclic coordinate descent on the covariance form.
//!
//! Objective: `Σ(y − α₀ − Xω)² + λ·Σ|ω_j|` with the intercept unpenalized.
//! Columns and target are centered internally, so the coordinate update is
//! `ω_j = S(x_jᵀr_j, λ/2) / x_jᵀx_j` with `S` the soft-threshold and
//! `λ_max = 2·max_j |x_jᵀ(y − ȳ)|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::fold_indices;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct LassoParams {
    /// Stop when the largest coefficient change in a sweep is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoParams {
    fn default() -> Self {
        LassoParams { tol: 1e-8, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub lambda: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Objective after each full sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
    /// False when `max_iter` sweeps ran out before the tolerance was met.
    pub converged: bool,
}

impl LassoFit {
    pub fn n_nonzero(&self) -> usize {
        self.coefficients.iter().filter(|c| **c != 0.0).count()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| self.intercept + (0..x.ncols()).map(|j| x[(i, j)] * self.coefficients[j]).sum::<f64>())
            .collect()
    }
}

/// Centered cross products of a design.
struct Gram {
    xmean: Vec<f64>,
    ymean: f64,
    g: Matrix,
    c: Vec<f64>,
    yy: f64,
}

impl Gram {
    fn new(x: &Matrix, y: &[f64], rows: &[usize]) -> Gram {
        let p = x.ncols();
        let n = rows.len() as f64;
        let xmean: Vec<f64> = (0..p).map(|j| rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / n).collect();
        let ymean = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
        let xc = Matrix::from_fn(rows.len(), p, |r, j| x[(rows[r], j)] - xmean[j]);
        let yc: Vec<f64> = rows.iter().map(|&i| y[i] - ymean).collect();
        let g = xc.transpose() * &xc;
        let c = (0..p).map(|j| (0..rows.len()).map(|r| xc[(r, j)] * yc[r]).sum()).collect();
        let yy = yc.iter().map(|v| v * v).sum();
        Gram { xmean, ymean, g, c, yy }
    }

    fn lambda_max(&self) -> f64 {
        2.0 * self.c.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn objective(&self, w: &[f64], lambda: f64) -> f64 {
        let p = w.len();
        let mut quad = 0.0;
        for j in 0..p {
            if w[j] == 0.0 {
                continue;
            }
            for k in 0..p {
                quad += w[j] * self.g[(j, k)] * w[k];
            }
        }
        let lin: f64 = w.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        (self.yy - 2.0 * lin + quad).max(0.0) + lambda * l1
    }

    fn solve(&self, lambda: f64, start: &[f64], params: &LassoParams) -> LassoFit {
        let p = self.c.len();
        let mut w = start.to_vec();
        // gradient cache: grad[j] = c_j − Σ_k G_jk w_k
        let mut grad: Vec<f64> = (0..p).map(|j| self.c[j] - (0..p).map(|k| self.g[(j, k)] * w[k]).sum::<f64>()).collect();
        let mut trace = Vec::new();
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < params.max_iter {
            sweeps += 1;
            let mut max_change = 0.0f64;
            for j in 0..p {
                let gjj = self.g[(j, j)];
                if !(gjj > 0.0) {
                    w[j] = 0.0;
                    continue;
                }
                let rho = grad[j] + gjj * w[j];
                let new = soft_threshold(rho, lambda / 2.0) / gjj;
                let delta = new - w[j];
                if delta != 0.0 {
                    for k in 0..p {
                        grad[k] -= self.g[(k, j)] * delta;
                    }
                    w[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            trace.push(self.objective(&w, lambda));
            if max_change < params.tol {
                converged = true;
                break;
            }
        }
        let intercept = self.ymean - w.iter().zip(&self.xmean).map(|(a, m)| a * m).sum::<f64>();
        LassoFit { lambda, intercept, coefficients: w, objective_trace: trace, sweeps, converged }
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn check(x: &Matrix, y: &[f64], lambda: f64) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { expected: x.nrows(), got: y.len() });
    }
    if x.nrows() < 2 {
        return Err(Error::invalid("lasso needs at least 2 rows"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda {lambda} must be non-negative")));
    }
    Ok(())
}

/// Smallest λ at which every slope is zero.
pub fn lambda_max(x: &Matrix, y: &[f64]) -> Result<f64> {
    check(x, y, 0.0)?;
    let rows: Vec<usize> = (0..x.nrows()).collect();
    Ok(Gram::new(x, y, &rows).lambda_max())
}

/// `n` log-spaced values from `lambda_max` down to `lambda_max · ratio`.
pub fn lambda_grid(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n <= 1 || !(lambda_max > 0.0) {
        return vec![lambda_max.max(0.0)];
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * ratio).ln());
    (0..n).map(|i| (hi + (lo - hi) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn lasso_cd(x: &Matrix, y: &[f64], lambda: f64, params: &LassoParams) -> Result<LassoFit> {
    check(x, y, lambda)?;
    let rows: Vec<usize> = (0..x.nrows()).collect();
    Ok(Gram::new(x, y, &rows).solve(lambda, &vec![0.0; x.ncols()], params))
}

fn descending(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    if let Some(bad) = grid.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::invalid(format!("lambda {bad} must be non-negative")));
    }
    let mut g = grid.to_vec();
    g.sort_by(|a, b| b.total_cmp(a));
    g.dedup();
    Ok(g)
}

/// Fits along the grid (sorted descending) with warm starts.
pub fn lasso_path(x: &Matrix, y: &[f64], grid: &[f64], params: &LassoParams) -> Result<Vec<LassoFit>> {
    check(x, y, 0.0)?;
    let grid = descending(grid)?;
    let rows: Vec<usize> = (0..x.nrows()).collect();
    Ok(path(&Gram::new(x, y, &rows), &grid, params))
}

fn path(gram: &Gram, grid: &[f64], params: &LassoParams) -> Vec<LassoFit> {
    let mut w = vec![0.0; gram.c.len()];
    grid.iter()
        .map(|&l| {
            let fit = gram.solve(l, &w, params);
            w.clone_from(&fit.coefficients);
            fit
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    pub mean_mse: f64,
    /// Standard error of the fold MSEs.
    pub se_mse: f64,
    /// Nonzero slopes of the full-data fit at this λ.
    pub nonzero: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_lambda: f64,
    pub best_index: usize,
    /// Largest λ whose mean MSE is within one standard error of the best.
    pub lambda_1se: f64,
    /// One point per λ, largest first.
    pub trace: Vec<CvPoint>,
    /// Number of fits that hit `max_iter`.
    pub unconverged: usize,
}

/// K-fold cross-validation over the grid. The best λ minimizes mean fold
/// MSE; ties go to the larger λ.
pub fn lasso_cv(x: &Matrix, y: &[f64], grid: &[f64], n_folds: usize, seed: u64, params: &LassoParams) -> Result<CvResult> {
    check(x, y, 0.0)?;
    let grid = descending(grid)?;
    let n = x.nrows();
    let folds = fold_indices(n, n_folds, seed)?;
    let per_fold: Vec<(Vec<f64>, usize)> = (0..n_folds)
        .into_par_iter()
        .map(|k| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != k).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == k).collect();
            let fits = path(&Gram::new(x, y, &train), &grid, params);
            let bad = fits.iter().filter(|f| !f.converged).count();
            let mses = fits
                .iter()
                .map(|f| {
                    test.iter()
                        .map(|&i| {
                            let pred = f.intercept + (0..x.ncols()).map(|j| x[(i, j)] * f.coefficients[j]).sum::<f64>();
                            (y[i] - pred).powi(2)
                        })
                        .sum::<f64>()
                        / test.len() as f64
                })
                .collect();
            (mses, bad)
        })
        .collect();
    let rows: Vec<usize> = (0..n).collect();
    let full = path(&Gram::new(x, y, &rows), &grid, params);
    let mut unconverged: usize = per_fold.iter().map(|(_, b)| b).sum();
    unconverged += full.iter().filter(|f| !f.converged).count();
    let trace: Vec<CvPoint> = grid
        .iter()
        .enumerate()
        .map(|(g, &lambda)| {
            let m: Vec<f64> = per_fold.iter().map(|(mses, _)| mses[g]).collect();
            CvPoint {
                lambda,
                mean_mse: linalg::mean(&m),
                se_mse: linalg::pop_std(&m) / ((n_folds - 1) as f64).sqrt(),
                nonzero: full[g].n_nonzero(),
            }
        })
        .collect();
    let mut best_index = 0;
    for (g, pt) in trace.iter().enumerate() {
        if pt.mean_mse < trace[best_index].mean_mse {
            best_index = g;
        }
    }
    let bound = trace[best_index].mean_mse + trace[best_index].se_mse;
    let lambda_1se = trace.iter().find(|t| t.mean_mse <= bound).map_or(trace[best_index].lambda, |t| t.lambda);
    Ok(CvResult { best_lambda: trace[best_index].lambda, best_index, lambda_1se, trace, unconverged })
}
