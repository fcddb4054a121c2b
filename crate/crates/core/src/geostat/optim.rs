//! Bounded Nelder-Mead simplex search.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Stop once the spread of simplex values falls below this.
    pub f_tol: f64,
    pub x_tol: f64,
    /// Relative size of the initial simplex edges.
    pub step: f64,
    /// Restarts from the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { max_iter: 5000, f_tol: 1e-14, x_tol: 1e-10, step: 0.2, restarts: 2 }
    }
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

impl NelderMead {
    /// Minimizes `f` over the box `[lower, upper]`; trial points are
    /// projected onto the box before evaluation.
    pub fn minimize<F: Fn(&[f64]) -> f64>(&self, f: F, start: &[f64], lower: &[f64], upper: &[f64]) -> Result<Minimum> {
        let mut x0 = start.to_vec();
        clamp(&mut x0, lower, upper);
        let mut total = 0;
        let mut best = self.run(&f, &x0, lower, upper)?;
        total += best.iterations;
        for _ in 0..self.restarts {
            let again = self.run(&f, &best.x, lower, upper)?;
            total += again.iterations;
            let improved = again.value < best.value - self.f_tol * best.value.abs().max(1e-300);
            if again.value <= best.value {
                best = again;
            }
            if !improved {
                break;
            }
        }
        best.iterations = total;
        Ok(best)
    }

    fn run<F: Fn(&[f64]) -> f64>(&self, f: &F, x0: &[f64], lower: &[f64], upper: &[f64]) -> Result<Minimum> {
        let d = x0.len();
        let eval = |x: &[f64]| -> Result<f64> {
            let v = f(x);
            if v.is_nan() {
                Err(Error::Optimizer(format!("objective is NaN at {x:?}")))
            } else {
                Ok(v)
            }
        };
        let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
        for i in 0..d {
            let mut p = x0.to_vec();
            let width = upper[i] - lower[i];
            let mut h = self.step * if p[i] != 0.0 { p[i].abs() } else { 0.1 * width.min(1.0) };
            if p[i] + h > upper[i] {
                h = -h;
            }
            p[i] += h;
            clamp(&mut p, lower, upper);
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect::<Result<_>>()?;
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iter = 0;
        let mut converged = false;
        while iter < self.max_iter {
            iter += 1;
            let mut order: Vec<usize> = (0..=d).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[d] - values[0];
            let size = simplex[1..]
                .iter()
                .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread <= self.f_tol * values[0].abs().max(1e-300) + f64::MIN_POSITIVE && size <= self.x_tol {
                converged = true;
                break;
            }
            if size <= self.x_tol * 1e-3 {
                converged = true;
                break;
            }

            let centroid: Vec<f64> =
                (0..d).map(|j| simplex[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64).collect();
            let toward = |coef: f64| -> Vec<f64> {
                let mut p: Vec<f64> = (0..d).map(|j| centroid[j] + coef * (simplex[d][j] - centroid[j])).collect();
                clamp(&mut p, lower, upper);
                p
            };
            let xr = toward(-alpha);
            let fr = eval(&xr)?;
            if fr < values[0] {
                let xe = toward(-gamma);
                let fe = eval(&xe)?;
                if fe < fr {
                    simplex[d] = xe;
                    values[d] = fe;
                } else {
                    simplex[d] = xr;
                    values[d] = fr;
                }
                continue;
            }
            if fr < values[d - 1] {
                simplex[d] = xr;
                values[d] = fr;
                continue;
            }
            let (xc, fc) = if fr < values[d] {
                let xc = toward(-rho);
                let fc = eval(&xc)?;
                (xc, fc)
            } else {
                let xc = toward(rho);
                let fc = eval(&xc)?;
                (xc, fc)
            };
            if fc < values[d].min(fr) {
                simplex[d] = xc;
                values[d] = fc;
                continue;
            }
            for i in 1..=d {
                let mut p: Vec<f64> =
                    (0..d).map(|j| simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j])).collect();
                clamp(&mut p, lower, upper);
                values[i] = eval(&p)?;
                simplex[i] = p;
            }
        }
        let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
        Ok(Minimum { x: simplex[best].clone(), value: values[best], iterations: iter, converged })
    }
}
