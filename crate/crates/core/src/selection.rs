//! Feature selection: correlation screening, univariate F scores and
//! recursive elimination gated by regression diagnostics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureTable;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::linmodel::ols_fit;
use crate::special;

/// Pearson correlations over features followed by the target (last row).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Matrix,
}

impl CorrelationMatrix {
    /// Correlation of each feature with the target.
    pub fn target_corr(&self) -> Vec<f64> {
        let t = self.names.len() - 1;
        (0..t).map(|j| self.values[(j, t)]).collect()
    }

    /// Feature-by-feature block.
    pub fn features(&self) -> Matrix {
        let t = self.names.len() - 1;
        self.values.view((0, 0), (t, t)).into_owned()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header)?;
        for (i, name) in self.names.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend((0..self.names.len()).map(|j| self.values[(i, j)].to_string()));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn correlation_matrix(table: &FeatureTable) -> Result<CorrelationMatrix> {
    if table.n_rows() < 2 {
        return Err(Error::invalid("correlation needs at least 2 rows"));
    }
    let mut names = table.names();
    names.push("target".into());
    let mut cols: Vec<Vec<f64>> = (0..table.n_cols()).map(|j| table.column(j)).collect();
    cols.push(table.target.clone());
    for (c, name) in cols.iter().zip(&names) {
        if !(linalg::pop_std(c) > 0.0) {
            return Err(Error::ZeroVariance(name.clone()));
        }
    }
    let k = cols.len();
    let mut values = Matrix::identity(k, k);
    for i in 0..k {
        for j in i + 1..k {
            let r = linalg::pearson(&cols[i], &cols[j]).unwrap_or(0.0).clamp(-1.0, 1.0);
            values[(i, j)] = r;
            values[(j, i)] = r;
        }
    }
    Ok(CorrelationMatrix { names, values })
}

/// Greedy multicollinearity screen. Pairs with `|r| ≥ threshold` are
/// visited in descending `|r|`; from each pair whose members are both still
/// kept, the one less correlated with the target is dropped (the later
/// column on ties). Returns the kept column indices in ascending order.
pub fn drop_multicollinear(corr: &Matrix, target_corr: &[f64], threshold: f64) -> Vec<usize> {
    let p = corr.nrows();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let r = corr[(i, j)].abs();
            if r >= threshold {
                pairs.push((r, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut kept = vec![true; p];
    for (_, i, j) in pairs {
        if !(kept[i] && kept[j]) {
            continue;
        }
        let drop = if target_corr[i].abs() < target_corr[j].abs() { i } else { j };
        kept[drop] = false;
    }
    (0..p).filter(|&j| kept[j]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    pub f: f64,
    pub p: f64,
}

/// Default cap reported for F when a feature is perfectly correlated.
pub const F_CAP: f64 = 1e12;

/// F statistic of each single-regressor fit, `F = r²(n−2)/(1−r²)`.
pub fn univariate_f_scores(table: &FeatureTable, f_cap: f64) -> Result<Vec<FScore>> {
    let n = table.n_rows();
    if n <= 2 {
        return Err(Error::invalid("univariate F scores need n > 2"));
    }
    let df = (n - 2) as f64;
    (0..table.n_cols())
        .map(|j| {
            let r = linalg::pearson(&table.column(j), &table.target)
                .ok_or_else(|| Error::ZeroVariance(table.columns[j].name.clone()))?;
            let r2 = r * r;
            let f = if r2 >= 1.0 { f_cap } else { (r2 * df / (1.0 - r2)).min(f_cap) };
            if f >= f_cap {
                return Ok(FScore { f: f_cap, p: 0.0 });
            }
            Ok(FScore { f, p: special::f_sf(f, 1.0, df) })
        })
        .collect()
}

/// Acceptance gates for an elimination step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RfeGates {
    /// Every slope p-value must be below this.
    pub coef_p: f64,
    pub f_p: f64,
    pub dw_min: f64,
    pub dw_max: f64,
    /// p(JB) must exceed this.
    pub jb_p: f64,
    pub check_signs: bool,
}

impl Default for RfeGates {
    fn default() -> Self {
        RfeGates { coef_p: 0.05, f_p: 0.01, dw_min: 1.5, dw_max: 2.5, jb_p: 0.05, check_signs: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeStep {
    pub features: Vec<String>,
    pub r2_adj: f64,
    pub durbin_watson: f64,
    pub jb_pvalue: f64,
    pub f_pvalue: f64,
    pub coef_p_ok: bool,
    pub f_ok: bool,
    pub dw_ok: bool,
    pub jb_ok: bool,
    pub signs_ok: bool,
    /// Feature eliminated after this step.
    pub removed: Option<String>,
    pub note: Option<String>,
}

impl RfeStep {
    pub fn valid(&self) -> bool {
        self.note.is_none() && self.coef_p_ok && self.f_ok && self.dw_ok && self.jb_ok && self.signs_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<RfeStep>,
    /// Largest gate-satisfying subset, if any.
    pub chosen: Option<Vec<String>>,
}

impl SelectionTrace {
    pub fn no_valid_model(&self) -> bool {
        self.chosen.is_none()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "n_features", "features", "r2_adj", "durbin_watson", "jb_pvalue", "f_pvalue", "coef_p_ok", "f_ok",
            "dw_ok", "jb_ok", "signs_ok", "valid", "removed", "note",
        ])?;
        for s in &self.steps {
            let flag = |b: bool| if b { "1" } else { "0" }.to_string();
            wr.write_record([
                s.features.len().to_string(),
                s.features.join(";"),
                s.r2_adj.to_string(),
                s.durbin_watson.to_string(),
                s.jb_pvalue.to_string(),
                s.f_pvalue.to_string(),
                flag(s.coef_p_ok),
                flag(s.f_ok),
                flag(s.dw_ok),
                flag(s.jb_ok),
                flag(s.signs_ok),
                flag(s.valid()),
                s.removed.clone().unwrap_or_default(),
                s.note.clone().unwrap_or_default(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Recursive feature elimination by coefficient significance. Each step
/// fits OLS on the remaining columns, records its diagnostics and drops the
/// column with the largest p-value. A failed fit is noted and the last
/// column of the reported dependent set is dropped instead.
pub fn rfe(table: &FeatureTable, gates: &RfeGates) -> Result<SelectionTrace> {
    if table.n_cols() == 0 {
        return Err(Error::invalid("RFE needs at least one feature"));
    }
    let mut remaining: Vec<usize> = (0..table.n_cols()).collect();
    let mut steps = Vec::new();
    while !remaining.is_empty() {
        let sub = table.select_indices(&remaining);
        let names = sub.names();
        let nan = f64::NAN;
        let mut step = RfeStep {
            features: names.clone(),
            r2_adj: nan,
            durbin_watson: nan,
            jb_pvalue: nan,
            f_pvalue: nan,
            coef_p_ok: false,
            f_ok: false,
            dw_ok: false,
            jb_ok: false,
            signs_ok: false,
            removed: None,
            note: None,
        };
        let drop_pos = match ols_fit(&sub.matrix, &sub.target, &names) {
            Ok(fit) => {
                let slope_p = &fit.p_values[1..];
                step.r2_adj = fit.r2_adj;
                step.durbin_watson = fit.durbin_watson;
                step.jb_pvalue = fit.jb_pvalue;
                step.f_pvalue = fit.f_pvalue;
                step.coef_p_ok = slope_p.iter().all(|p| *p < gates.coef_p);
                step.f_ok = fit.f_pvalue < gates.f_p;
                step.dw_ok = fit.durbin_watson >= gates.dw_min && fit.durbin_watson <= gates.dw_max;
                step.jb_ok = fit.jb_pvalue > gates.jb_p;
                step.signs_ok = !gates.check_signs
                    || sub.columns.iter().zip(&fit.coefficients).all(|(m, c)| m.expected_sign.admits(*c));
                // largest p-value; NaN counts as largest, ties go to the later column
                let mut worst = 0;
                for (k, p) in slope_p.iter().enumerate() {
                    let w = slope_p[worst];
                    if p.is_nan() || (!w.is_nan() && *p >= w) {
                        worst = k;
                    }
                }
                worst
            }
            Err(e) => {
                step.note = Some(e.to_string());
                match &e {
                    Error::RankDeficient { columns } => columns
                        .iter()
                        .rev()
                        .find_map(|c| names.iter().position(|n| n == c))
                        .unwrap_or(names.len() - 1),
                    _ => names.len() - 1,
                }
            }
        };
        step.removed = Some(names[drop_pos].clone());
        steps.push(step);
        remaining.remove(drop_pos);
    }
    let chosen = steps.iter().find(|s| s.valid()).map(|s| s.features.clone());
    Ok(SelectionTrace { steps, chosen })
}

/// Screens multicollinear columns and runs RFE on the survivors.
pub fn select_features(table: &FeatureTable, corr_threshold: f64, gates: &RfeGates) -> Result<(Vec<String>, SelectionTrace)> {
    let corr = correlation_matrix(table)?;
    let kept = drop_multicollinear(&corr.features(), &corr.target_corr(), corr_threshold);
    let screened = table.select_indices(&kept);
    let trace = rfe(&screened, gates)?;
    Ok((screened.names(), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnMeta, ExpectedSign};
    use crate::linalg::from_columns;
    use crate::rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal, StandardNormal, StudentT};

    fn table(cols: &[Vec<f64>], y: Vec<f64>) -> FeatureTable {
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let meta = (0..cols.len()).map(|i| ColumnMeta::continuous(format!("x{i}"))).collect();
        FeatureTable::new(from_columns(&refs), y, meta).unwrap()
    }

    #[test]
    fn correlation_basics() {
        let x = vec![1.0, 2.0, 4.0, 3.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let c = correlation_matrix(&table(&[x.clone(), neg], x.clone())).unwrap();
        assert_eq!(c.values[(0, 0)], 1.0);
        assert!((c.values[(0, 1)] + 1.0).abs() < 1e-15);
        assert!((c.values[(0, 2)] - 1.0).abs() < 1e-15);
        let flat = table(&[vec![1.0; 4]], x);
        assert!(matches!(correlation_matrix(&flat), Err(Error::ZeroVariance(n)) if n == "x0"));

        let mut r = rng::rng(1);
        let x: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut r)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 0.01 * Distribution::<f64>::sample(&StandardNormal, &mut r)).collect();
        assert!(correlation_matrix(&table(&[x], y)).unwrap().values[(0, 1)] > 0.99);
    }

    #[test]
    fn multicollinear_examples() {
        let dup = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(drop_multicollinear(&dup, &[0.3, 0.3], 0.7), vec![0]);
        let low = Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        assert_eq!(drop_multicollinear(&low, &[0.1, 0.9], 0.7), vec![0, 1]);
        let tri = Matrix::from_row_slice(3, 3, &[1.0, 0.9, 0.9, 0.9, 1.0, 0.9, 0.9, 0.9, 1.0]);
        assert_eq!(drop_multicollinear(&tri, &[0.5, 0.4, 0.3], 0.7), vec![0]);
        assert_eq!(drop_multicollinear(&tri, &[0.3, 0.4, 0.5], 0.7), vec![2]);
    }

    #[test]
    fn f_score_examples() {
        // r = 0 exactly
        let x = vec![-1.0, 0.0, 1.0, 0.0];
        let y = vec![1.0, -2.0, 1.0, 3.0];
        let s = univariate_f_scores(&table(&[x], y), F_CAP).unwrap();
        assert!(s[0].f.abs() < 1e-12 && (s[0].p - 1.0).abs() < 1e-12);
        // perfect fit
        let s = univariate_f_scores(&table(&[vec![1.0, 2.0, 3.0]], vec![2.0, 4.0, 6.0]), 1e9).unwrap();
        assert_eq!(s[0], FScore { f: 1e9, p: 0.0 });
    }

    #[test]
    fn f_is_100_for_half_variance_at_n_102() {
        // r² = 0.5 exactly: y = x + z with z ⟂ x, |z| = |x|
        let n = 102;
        let x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        // period-4 pattern over the first 100 rows is orthogonal to x and to 1
        let c = (102.0f64 / 100.0).sqrt();
        let z: Vec<f64> = (0..n).map(|i| if i >= 100 { 0.0 } else if (i / 2) % 2 == 0 { c } else { -c }).collect();
        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
        let r = linalg::pearson(&x, &y).unwrap();
        assert!((r * r - 0.5).abs() < 1e-12);
        let s = univariate_f_scores(&table(&[x], y), F_CAP).unwrap();
        assert!((s[0].f - 100.0).abs() < 1e-9, "{}", s[0].f);
    }

    #[test]
    fn noise_features_go_first() {
        let mut r = rng::rng(7);
        let n = 400;
        let signal: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        let noise = Normal::new(0.0, 0.1).unwrap();
        let y: Vec<f64> = signal.iter().map(|s| 1.0 + 3.0 * s + noise.sample(&mut r)).collect();
        let mut cols = vec![signal];
        for _ in 0..4 {
            cols.push((0..n).map(|_| StandardNormal.sample(&mut r)).collect());
        }
        let trace = rfe(&table(&cols, y), &RfeGates::default()).unwrap();
        assert_eq!(trace.steps.iter().map(|s| s.features.len()).collect::<Vec<_>>(), vec![5, 4, 3, 2, 1]);
        assert_eq!(trace.steps.last().unwrap().features, vec!["x0".to_string()]);
        assert!(trace.steps[..4].iter().all(|s| s.removed.as_deref() != Some("x0")));
        assert_eq!(trace.chosen, Some(vec!["x0".to_string()]));
    }

    #[test]
    fn heavy_tails_leave_no_valid_model() {
        let mut r = rng::rng(8);
        let n = 3000;
        let t3 = StudentT::new(3.0).unwrap();
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| StandardNormal.sample(&mut r)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|i| cols[0][i] - cols[1][i] + 0.5 * cols[2][i] + t3.sample(&mut r)).collect();
        let trace = rfe(&table(&cols, y), &RfeGates::default()).unwrap();
        assert!(trace.no_valid_model());
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn sign_gate_rejects_wrong_sign() {
        let mut r = rng::rng(9);
        let n = 300;
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut r)).collect();
        let mut t = table(&[x], y);
        t.columns[0] = t.columns[0].clone().with_sign(ExpectedSign::Negative);
        let trace = rfe(&t, &RfeGates::default()).unwrap();
        assert!(!trace.steps[0].signs_ok);
        assert!(trace.no_valid_model());
    }

    #[test]
    fn rank_deficiency_is_annotated() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 6.0, 9.0, 8.0, 10.0];
        let b = vec![2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0, 10.0, 9.0];
        let c = a.clone();
        let y: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + 0.5 * v).collect();
        let trace = rfe(&table(&[a, b, c], y), &RfeGates::default()).unwrap();
        assert!(trace.steps[0].note.is_some());
        assert_eq!(trace.steps.len(), 3);
    }

    proptest! {
        #[test]
        fn screen_leaves_no_correlated_pair(seed in any::<u64>(), thr in 0.3f64..0.95) {
            let mut r = rng::rng(seed);
            let n = 60;
            let base: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
            let cols: Vec<Vec<f64>> = (0..6)
                .map(|k| base.iter().map(|b| b * k as f64 * 0.4 + Distribution::<f64>::sample(&StandardNormal, &mut r)).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
            let c = correlation_matrix(&table(&cols, y)).unwrap();
            let kept = drop_multicollinear(&c.features(), &c.target_corr(), thr);
            for &i in &kept {
                for &j in &kept {
                    prop_assert!(i == j || c.values[(i, j)].abs() < thr);
                }
            }
        }

        #[test]
        fn f_ranking_matches_abs_r(seed in any::<u64>()) {
            let mut r = rng::rng(seed);
            let n = 50;
            let cols: Vec<Vec<f64>> = (0..5).map(|_| (0..n).map(|_| StandardNormal.sample(&mut r)).collect()).collect();
            let y: Vec<f64> = (0..n).map(|i| cols[0][i] + 0.5 * cols[1][i] + Distribution::<f64>::sample(&StandardNormal, &mut r)).collect();
            let t = table(&cols, y.clone());
            let f = univariate_f_scores(&t, F_CAP).unwrap();
            let absr: Vec<f64> = cols.iter().map(|c| linalg::pearson(c, &y).unwrap().abs()).collect();
            let mut by_f: Vec<usize> = (0..5).collect();
            by_f.sort_by(|&a, &b| f[b].f.total_cmp(&f[a].f));
            let mut by_r: Vec<usize> = (0..5).collect();
            by_r.sort_by(|&a, &b| absr[b].total_cmp(&absr[a]));
            prop_assert_eq!(by_f, by_r);
        }
    }
}
