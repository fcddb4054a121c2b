//! Ordinary least squares with the classical diagnostic block.

use std::fmt::Write as _;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::special;

/// A fitted linear model `y = intercept + X·coefficients`.
///
/// `std_errors`, `t_stats` and `p_values` are indexed like `[const, x_1, ..]`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OlsFit {
    pub names: Vec<String>,
    #[serde(with = "crate::serde_ext")]
    pub intercept: f64,
    #[serde(with = "crate::serde_ext::vec")]
    pub coefficients: Vec<f64>,
    #[serde(with = "crate::serde_ext::vec")]
    pub std_errors: Vec<f64>,
    #[serde(with = "crate::serde_ext::vec")]
    pub t_stats: Vec<f64>,
    #[serde(with = "crate::serde_ext::vec")]
    pub p_values: Vec<f64>,
    pub n: usize,
    #[serde(with = "crate::serde_ext")]
    pub r2: f64,
    #[serde(with = "crate::serde_ext")]
    pub r2_adj: f64,
    #[serde(with = "crate::serde_ext")]
    pub f_stat: f64,
    #[serde(with = "crate::serde_ext")]
    pub f_pvalue: f64,
    #[serde(with = "crate::serde_ext")]
    pub durbin_watson: f64,
    #[serde(with = "crate::serde_ext")]
    pub jarque_bera: f64,
    #[serde(with = "crate::serde_ext")]
    pub jb_pvalue: f64,
    #[serde(with = "crate::serde_ext")]
    pub condition_number: f64,
    #[serde(with = "crate::serde_ext::vec")]
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn df_resid(&self) -> usize {
        self.n - self.n_features() - 1
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        predict(self, x)
    }

    /// Text table laid out like a statsmodels summary.
    pub fn summary(&self, dep_var: &str) -> String {
        let mut s = String::new();
        let rule = "=".repeat(72);
        let thin = "-".repeat(72);
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "{:^72}", "OLS Regression Results");
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "Dep. variable:            {dep_var}");
        let _ = writeln!(s, "No. observations:         {}", self.n);
        let _ = writeln!(s, "R-squared:                {:.3}", self.r2);
        let _ = writeln!(s, "Adj. R-squared:           {:.3}", self.r2_adj);
        let _ = writeln!(s, "F-statistic:              {:.1}", self.f_stat);
        let _ = writeln!(s, "Prob (F-statistic):       {}", fmt_p(self.f_pvalue));
        let _ = writeln!(s, "{thin}");
        let _ = writeln!(
            s,
            "{:<20}{:>14}{:>12}{:>12}{:>14}",
            "", "coef", "std err", "t", "P>|t|"
        );
        let _ = writeln!(s, "{thin}");
        let mut names = vec!["const".to_string()];
        names.extend(self.names.iter().cloned());
        let mut coefs = vec![self.intercept];
        coefs.extend(&self.coefficients);
        for i in 0..names.len() {
            let _ = writeln!(
                s,
                "{:<20}{:>14.4}{:>12.3}{:>12.3}{:>14}",
                truncate(&names[i], 19),
                coefs[i],
                self.std_errors[i],
                self.t_stats[i],
                fmt_p(self.p_values[i])
            );
        }
        let _ = writeln!(s, "{thin}");
        let _ = writeln!(s, "Durbin-Watson:            {:.3}", self.durbin_watson);
        let _ = writeln!(s, "Jarque-Bera (JB):         {:.3}", self.jarque_bera);
        let _ = writeln!(s, "Prob(JB):                 {}", fmt_p(self.jb_pvalue));
        let _ = writeln!(s, "Cond. No.:                {:.2}", self.condition_number);
        let _ = writeln!(s, "{rule}");
        s
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn fmt_p(p: f64) -> String {
    if p.is_nan() {
        "nan".into()
    } else if p < 0.001 {
        "<< 0.001".into()
    } else {
        format!("{p:.3}")
    }
}

/// Fits OLS with an intercept. `x` is `n × p` without the constant column.
pub fn ols_fit(x: &Matrix, y: &[f64], names: &[String]) -> Result<OlsFit> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    if names.len() != p {
        return Err(Error::LengthMismatch { expected: p, got: names.len() });
    }
    if n <= p + 1 {
        return Err(Error::invalid(format!(
            "OLS needs n > p + 1 (n = {n}, p = {p})"
        )));
    }
    let a = linalg::with_intercept(x);
    let yv = Vector::from_column_slice(y);

    let qr = a.clone().qr();
    let r = qr.r();
    check_rank(&a, &r, names)?;
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular { context: "OLS".into(), condition: f64::INFINITY })?;

    let fitted = &a * &beta;
    let residuals: Vec<f64> = yv.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let y_mean = linalg::mean(y);
    let tss: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();

    let df = (n - p - 1) as f64;
    let s2 = rss / df;
    // (AᵀA)⁻¹ = R⁻¹R⁻ᵀ
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular { context: "OLS".into(), condition: f64::INFINITY })?;
    let cov_unscaled = &r_inv * r_inv.transpose();
    let std_errors: Vec<f64> = (0..=p).map(|j| (s2 * cov_unscaled[(j, j)]).sqrt()).collect();
    let t_stats: Vec<f64> = (0..=p)
        .map(|j| {
            if std_errors[j] == 0.0 {
                if beta[j] == 0.0 { 0.0 } else { beta[j].signum() * f64::INFINITY }
            } else {
                beta[j] / std_errors[j]
            }
        })
        .collect();
    let p_values: Vec<f64> = t_stats.iter().map(|&t| special::t_two_sided_p(t, df)).collect();

    let (r2, r2_adj) = if tss > 0.0 {
        let r2 = 1.0 - rss / tss;
        (r2, 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df)
    } else {
        (f64::NAN, f64::NAN)
    };
    let (f_stat, f_pvalue) = if p == 0 {
        (0.0, 1.0)
    } else if rss == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = ((tss - rss) / p as f64) / s2;
        (f, special::f_sf(f, p as f64, df))
    };

    let (dw, jb, jb_p) = if rss > 0.0 {
        let dw = durbin_watson(&residuals).unwrap_or(f64::NAN);
        let (jb, jb_p) = jarque_bera(&residuals).unwrap_or((f64::NAN, f64::NAN));
        (dw, jb, jb_p)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };

    Ok(OlsFit {
        names: names.to_vec(),
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        std_errors,
        t_stats,
        p_values,
        n,
        r2,
        r2_adj,
        f_stat,
        f_pvalue,
        durbin_watson: dw,
        jarque_bera: jb,
        jb_pvalue: jb_p,
        condition_number: condition_number(&linalg::with_intercept(&zscore_columns(x))),
        residuals,
    })
}

/// Reports the first column whose QR pivot collapses, together with the
/// earlier columns it is a combination of.
fn check_rank(a: &Matrix, r: &Matrix, names: &[String]) -> Result<()> {
    let label = |j: usize| if j == 0 { "const".to_string() } else { names[j - 1].clone() };
    for j in 0..r.ncols() {
        let col_norm = a.column(j).norm();
        if col_norm == 0.0 || r[(j, j)].abs() <= 1e-10 * col_norm {
            let mut cols = vec![label(j)];
            if j > 0 && col_norm > 0.0 {
                let upper = r.view((0, 0), (j, j)).into_owned();
                let rhs = r.view((0, j), (j, 1)).column(0).into_owned();
                if let Some(coef) = upper.solve_upper_triangular(&rhs) {
                    let scale = coef.amax();
                    for (i, c) in coef.iter().enumerate() {
                        if c.abs() > 1e-8 * scale {
                            cols.push(label(i));
                        }
                    }
                }
            }
            return Err(Error::RankDeficient { columns: cols });
        }
    }
    Ok(())
}

fn zscore_columns(x: &Matrix) -> Matrix {
    let mut z = x.clone();
    for mut col in z.column_iter_mut() {
        let v: Vec<f64> = col.iter().copied().collect();
        let m = linalg::mean(&v);
        let sd = linalg::pop_std(&v);
        for e in col.iter_mut() {
            *e = if sd > 0.0 { (*e - m) / sd } else { 0.0 };
        }
    }
    z
}

/// `intercept + X·coefficients`.
pub fn predict(fit: &OlsFit, x: &Matrix) -> Result<Vec<f64>> {
    if x.ncols() != fit.coefficients.len() {
        return Err(Error::LengthMismatch { expected: fit.coefficients.len(), got: x.ncols() });
    }
    let beta = Vector::from_column_slice(&fit.coefficients);
    Ok((x * beta).iter().map(|v| v + fit.intercept).collect())
}

/// Σ(e_t − e_{t−1})² / Σe_t² in the given order.
pub fn durbin_watson(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::invalid("Durbin-Watson needs at least 2 residuals"));
    }
    let den: f64 = residuals.iter().map(|e| e * e).sum();
    if den == 0.0 {
        return Err(Error::invalid("Durbin-Watson of all-zero residuals"));
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(num / den)
}

/// Population skewness and kurtosis (not excess).
pub fn moments(v: &[f64]) -> Option<(f64, f64)> {
    let n = v.len() as f64;
    let m = linalg::mean(v);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in v {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        return None;
    }
    Some((m3 / m2.powf(1.5), m4 / (m2 * m2)))
}

/// Jarque-Bera statistic and its χ²(2) p-value `exp(−JB/2)`.
pub fn jarque_bera(residuals: &[f64]) -> Result<(f64, f64)> {
    if residuals.len() < 8 {
        return Err(Error::invalid("Jarque-Bera needs at least 8 values"));
    }
    let (s, k) = moments(residuals).ok_or_else(|| Error::ZeroVariance("residuals".into()))?;
    let jb = residuals.len() as f64 / 6.0 * (s * s + (k - 3.0).powi(2) / 4.0);
    Ok((jb, special::chi2_2df_sf(jb)))
}

/// Variance inflation factors; perfectly collinear columns get `+∞`.
pub fn vif(x: &Matrix) -> Result<Vec<f64>> {
    let p = x.ncols();
    if p < 2 {
        return Err(Error::invalid("VIF needs at least 2 features"));
    }
    let n = x.nrows();
    (0..p)
        .map(|j| {
            let others = Matrix::from_fn(n, p - 1, |i, k| x[(i, if k < j { k } else { k + 1 })]);
            let a = linalg::with_intercept(&others);
            let yj = x.column(j).into_owned();
            let beta = linalg::lstsq(&a, &yj)?;
            let fitted = &a * beta;
            let ym = yj.mean();
            let tss: f64 = yj.iter().map(|v| (v - ym).powi(2)).sum();
            if tss == 0.0 {
                return Ok(f64::INFINITY);
            }
            let rss: f64 = yj.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
            let r2 = 1.0 - rss / tss;
            Ok(if 1.0 - r2 <= 1e-12 { f64::INFINITY } else { 1.0 / (1.0 - r2) })
        })
        .collect()
}

/// Ratio of extreme singular values, via the eigenvalues of XᵀX.
pub fn condition_number(x: &Matrix) -> f64 {
    let xtx = x.transpose() * x;
    let eig = SymmetricEigen::new(xtx);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if max <= 0.0 || min <= max * 1e-14 {
        return f64::INFINITY;
    }
    (max / min).sqrt()
}

/// `(row index, residual)` in dataset order, for residual-vs-order plots.
pub fn homoscedasticity_data(fit: &OlsFit) -> Vec<(usize, f64)> {
    fit.residuals.iter().copied().enumerate().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (1..=p).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn exact_line() {
        let x = Matrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let y: Vec<f64> = (0..5).map(|i| 3.0 + 2.0 * i as f64).collect();
        let fit = ols_fit(&x, &y, &names(1)).unwrap();
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));
        let pred = fit.predict(&Matrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        assert!((pred[0] - 3.0).abs() < 1e-12 && (pred[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn predict_checks_columns() {
        let x = Matrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let fit = ols_fit(&x, &[1.0, 2.0, 2.5, 4.0], &names(1)).unwrap();
        assert!(matches!(
            fit.predict(&Matrix::zeros(2, 2)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let x = Matrix::from_fn(10, 3, |i, j| match j {
            0 => i as f64,
            1 => (i * i) as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        match ols_fit(&x, &y, &names(3)) {
            Err(Error::RankDeficient { columns }) => {
                assert_eq!(columns[0], "x3");
                assert!(columns.contains(&"x1".to_string()));
                assert!(columns.contains(&"const".to_string()));
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn durbin_watson_examples() {
        assert_eq!(durbin_watson(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(durbin_watson(&[1.0, -1.0, 1.0, -1.0]).unwrap(), 3.0);
        assert!(durbin_watson(&[0.0, 0.0]).is_err());
        let e = [0.3, -1.2, 0.5, 2.0, -0.7];
        let mut rev = e;
        rev.reverse();
        assert!((durbin_watson(&e).unwrap() - durbin_watson(&rev).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn jarque_bera_symmetric_mesokurtic() {
        // ±1 with four zeros per pair: m2 = m4 = 1/3, so K = 3 and S = 0.
        let v = [-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let (jb, p) = jarque_bera(&v).unwrap();
        assert!(jb.abs() < 1e-12);
        assert!((p - 1.0).abs() < 1e-12);
        assert!(jarque_bera(&[1.0; 10]).is_err());
    }

    #[test]
    fn jb_pvalue_closed_form() {
        let v = [0.1, 2.0, -0.3, 0.7, 5.0, -1.0, 0.0, 0.2, 0.4];
        let (jb, p) = jarque_bera(&v).unwrap();
        assert_eq!(p, (-jb / 2.0).exp());
    }

    #[test]
    fn vif_orthogonal_and_collinear() {
        let x = Matrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        for v in vif(&x).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let dup = Matrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 5.0, 10.0]);
        assert!(vif(&dup).unwrap().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn condition_numbers() {
        let q = Matrix::from_row_slice(4, 2, &[0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5]);
        assert!((condition_number(&q) - 1.0).abs() < 1e-12);
        let dup = Matrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        assert!(condition_number(&dup).is_infinite());
    }

    #[test]
    fn summary_has_table_rows() {
        let x = Matrix::from_column_slice(6, 1, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let fit = ols_fit(&x, &[0.1, 1.9, 4.2, 5.8, 8.1, 9.9], &names(1)).unwrap();
        let s = fit.summary("y");
        assert!(s.contains("OLS Regression Results"));
        assert!(s.contains("Durbin-Watson"));
        assert!(s.contains("const"));
        let json = serde_json::to_string(&fit).unwrap();
        let back: OlsFit = serde_json::from_str(&json).unwrap();
        assert_eq!(back.coefficients, fit.coefficients);
    }
}
