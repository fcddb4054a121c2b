//! Dense linear algebra helpers over `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Builds a row-major `n × p` matrix from rows.
pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    Matrix::from_fn(n, p, |i, j| rows[i][j])
}

/// Builds a matrix whose columns are the given slices.
pub fn from_columns(cols: &[&[f64]]) -> Matrix {
    let p = cols.len();
    let n = cols.first().map_or(0, |c| c.len());
    Matrix::from_fn(n, p, |i, j| cols[j][i])
}

/// Prepends a column of ones.
pub fn with_intercept(x: &Matrix) -> Matrix {
    let n = x.nrows();
    let mut a = Matrix::from_element(n, x.ncols() + 1, 1.0);
    a.view_mut((0, 1), (n, x.ncols())).copy_from(x);
    a
}

/// Least-squares solution through the SVD (minimum-norm when rank deficient).
pub fn lstsq(a: &Matrix, b: &Vector) -> Result<Vector> {
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * 1e-12 * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, eps).map_err(|e| Error::invalid(e.to_string()))
}

/// Solves a square system with partial-pivot LU; returns `None` when the
/// factorization is singular or the solution is not finite.
pub fn lu_solve(a: &Matrix, b: &Vector) -> Option<Vector> {
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Relative residual ‖Ax − b‖ / max(‖b‖, tiny).
pub fn relative_residual(a: &Matrix, x: &Vector, b: &Vector) -> f64 {
    let r = a * x - b;
    r.norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population (divide-by-n) standard deviation.
pub fn pop_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Quantile with linear interpolation between order statistics (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

/// Median absolute deviation around the median (unscaled).
pub fn mad(v: &[f64]) -> f64 {
    let m = median(v);
    let dev: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    median(&dev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_type7() {
        let s = [0.0, 0.0, 0.0, 100.0];
        assert_eq!(quantile_sorted(&s, 0.25), 0.0);
        assert_eq!(quantile_sorted(&s, 0.75), 25.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn mad_of_simple_vector() {
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 100.0]), 1.0);
    }

    #[test]
    fn pearson_degenerate() {
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_none());
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]), Some(-1.0));
    }
}
