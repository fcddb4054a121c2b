use std::io::Write;

use serde::{Deserialize, Serialize};

use super::lasso::{lambda_grid, lambda_max, lasso_cd, lasso_cv, CvResult, LassoParams};
use super::rules::{extract_rules, rule_matrix, Rule};
use super::tree::{fit_forest, ForestParams};
use crate::dataset::{ColumnKind, FeatureTable};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RuleFitConfig {
    /// Continuous features need at least this |r| with the target.
    pub min_abs_corr: f64,
    /// Binary features admitted regardless of correlation; all of them when
    /// unset.
    pub binary_features: Option<Vec<String>>,
    pub forest: ForestParams,
    pub rule_cap: usize,
    pub n_folds: usize,
    pub n_lambdas: usize,
    /// Smallest grid λ as a fraction of `λ_max`.
    pub lambda_ratio: f64,
    pub lasso: LassoParams,
    pub lambda_rule: LambdaRule,
    /// Z-score rule indicators before the LASSO instead of leaving them 0/1.
    pub standardize_rules: bool,
}

impl Default for RuleFitConfig {
    fn default() -> Self {
        RuleFitConfig {
            min_abs_corr: 0.15,
            binary_features: None,
            forest: ForestParams::default(),
            rule_cap: 50,
            n_folds: 5,
            n_lambdas: 50,
            lambda_ratio: 1e-4,
            lasso: LassoParams::default(),
            lambda_rule: LambdaRule::MinMse,
            standardize_rules: false,
        }
    }
}

/// Which cross-validated λ the final fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// Smallest mean fold MSE.
    #[default]
    MinMse,
    /// Largest λ within one standard error of the minimum.
    OneSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TermKind {
    Linear { feature: String },
    Rule { rule: Rule },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    #[serde(flatten)]
    pub kind: TermKind,
    /// Coefficient on the raw feature value or on the 0/1 indicator.
    pub coefficient: f64,
    /// Coefficient on the design column the LASSO saw.
    pub fit_coefficient: f64,
    pub center: f64,
    pub scale: f64,
}

impl Term {
    pub fn type_name(&self) -> &'static str {
        match self.kind {
            TermKind::Linear { .. } => "linear",
            TermKind::Rule { .. } => "rule",
        }
    }

    pub fn definition(&self) -> String {
        match &self.kind {
            TermKind::Linear { feature } => feature.clone(),
            TermKind::Rule { rule } => rule.to_string(),
        }
    }

    fn raw_value(&self, row: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        match &self.kind {
            TermKind::Linear { feature } => row(feature).ok_or_else(|| Error::MissingFeature(feature.clone())),
            TermKind::Rule { rule } => Ok(if rule.holds(row)? { 1.0 } else { 0.0 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFitModel {
    pub intercept: f64,
    /// Intercept on the design scale.
    pub fit_intercept: f64,
    pub terms: Vec<Term>,
    /// Features offered to the forest and the linear part.
    pub features: Vec<String>,
    pub lambda: f64,
    pub cv: CvResult,
    /// Rules extracted before the LASSO.
    pub n_candidate_rules: usize,
    pub converged: bool,
}

impl RuleFitModel {
    pub fn n_rules(&self) -> usize {
        self.terms.iter().filter(|t| matches!(t.kind, TermKind::Rule { .. })).count()
    }

    pub fn n_linear(&self) -> usize {
        self.terms.len() - self.n_rules()
    }

    /// Model card: one row for the intercept, then one per term.
    pub fn write_card_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["no", "term", "type", "coefficient"])?;
        out.write_record(["0", "intercept", "intercept", &self.intercept.to_string()])?;
        for (i, t) in self.terms.iter().enumerate() {
            out.write_record([&(i + 1).to_string(), &t.definition(), t.type_name(), &t.coefficient.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Evaluates `α₀ + Σ α_i f_i(x)` with raw-unit coefficients.
    pub fn predict(&self, x: &Matrix, names: &[String]) -> Result<Vec<f64>> {
        self.eval(x, names, false)
    }

    /// Same prediction through the design-scale coefficients; agrees with
    /// [`RuleFitModel::predict`] up to rounding.
    pub fn predict_standardized(&self, x: &Matrix, names: &[String]) -> Result<Vec<f64>> {
        self.eval(x, names, true)
    }

    fn eval(&self, x: &Matrix, names: &[String], design_scale: bool) -> Result<Vec<f64>> {
        if names.len() != x.ncols() {
            return Err(Error::LengthMismatch { expected: x.ncols(), got: names.len() });
        }
        (0..x.nrows())
            .map(|i| {
                let row = |f: &str| names.iter().position(|n| n == f).map(|j| x[(i, j)]);
                let mut acc = if design_scale { self.fit_intercept } else { self.intercept };
                for t in &self.terms {
                    let v = t.raw_value(&row)?;
                    acc += if design_scale { t.fit_coefficient * (v - t.center) / t.scale } else { t.coefficient * v };
                }
                Ok(acc)
            })
            .collect()
    }
}

pub fn rulefit_predict(model: &RuleFitModel, table: &FeatureTable) -> Result<Vec<f64>> {
    model.predict(&table.matrix, &table.names())
}

/// Indices of the columns admitted to the model.
pub fn screen_features(table: &FeatureTable, config: &RuleFitConfig) -> Vec<usize> {
    (0..table.n_cols())
        .filter(|&j| {
            let meta = &table.columns[j];
            match meta.kind {
                ColumnKind::Binary => config.binary_features.as_ref().is_none_or(|b| b.contains(&meta.name)),
                ColumnKind::Continuous => linalg::pearson(&table.column(j), &table.target)
                    .is_some_and(|r| r.abs() >= config.min_abs_corr),
            }
        })
        .collect()
}

pub fn rulefit_fit(table: &FeatureTable, config: &RuleFitConfig, seed: u64) -> Result<RuleFitModel> {
    let idx = screen_features(table, config);
    if idx.is_empty() {
        return Err(Error::invalid("no feature passes the correlation screen"));
    }
    let sub = table.select_indices(&idx);
    let names = sub.names();
    let y = &sub.target;
    let n = sub.n_rows();

    let rules = if config.rule_cap > 0 {
        let forest = fit_forest(&sub.matrix, y, &config.forest, derive_seed(seed, 0))?;
        extract_rules(&forest, &sub.matrix, &names, config.rule_cap)?
    } else {
        Vec::new()
    };
    let indicators = rule_matrix(&rules, &sub.matrix, &names)?;

    let mut centers = Vec::new();
    let mut scales = Vec::new();
    for (j, meta) in sub.columns.iter().enumerate() {
        match meta.kind {
            ColumnKind::Binary => {
                centers.push(0.0);
                scales.push(1.0);
            }
            ColumnKind::Continuous => {
                let col = sub.column(j);
                let sd = linalg::pop_std(&col);
                if !(sd > 0.0) {
                    return Err(Error::ZeroVariance(meta.name.clone()));
                }
                centers.push(linalg::mean(&col));
                scales.push(sd);
            }
        }
    }
    for r in &rules {
        if config.standardize_rules {
            centers.push(r.support);
            scales.push((r.support * (1.0 - r.support)).sqrt());
        } else {
            centers.push(0.0);
            scales.push(1.0);
        }
    }
    let p_lin = names.len();
    let design = Matrix::from_fn(n, p_lin + rules.len(), |i, j| {
        let raw = if j < p_lin { sub.matrix[(i, j)] } else { indicators[(i, j - p_lin)] };
        (raw - centers[j]) / scales[j]
    });

    let lmax = lambda_max(&design, y)?;
    let grid = lambda_grid(lmax, config.n_lambdas, config.lambda_ratio);
    let cv = lasso_cv(&design, y, &grid, config.n_folds, derive_seed(seed, 1), &config.lasso)?;
    let lambda = match config.lambda_rule {
        LambdaRule::MinMse => cv.best_lambda,
        LambdaRule::OneSe => cv.lambda_1se,
    };
    let fit = lasso_cd(&design, y, lambda, &config.lasso)?;
    if !fit.converged || cv.unconverged > 0 {
        log::warn!("coordinate descent hit its iteration limit ({} cv fits)", cv.unconverged);
    }

    let mut terms = Vec::new();
    let mut intercept = fit.intercept;
    for (j, &w) in fit.coefficients.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let coefficient = w / scales[j];
        intercept -= coefficient * centers[j];
        let kind = if j < p_lin {
            TermKind::Linear { feature: names[j].clone() }
        } else {
            TermKind::Rule { rule: rules[j - p_lin].clone() }
        };
        terms.push(Term { kind, coefficient, fit_coefficient: w, center: centers[j], scale: scales[j] });
    }
    Ok(RuleFitModel {
        intercept,
        fit_intercept: fit.intercept,
        terms,
        features: names,
        lambda,
        converged: fit.converged,
        n_candidate_rules: rules.len(),
        cv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnMeta;
    use crate::linmodel::ols_fit;
    use crate::rng;
    use crate::rulefit::rules::Condition;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn rule(feature: &str, gt: Option<f64>, le: Option<f64>) -> Rule {
        Rule { conditions: vec![Condition { feature: feature.into(), greater_than: gt, at_most: le }], support: 0.5, score: 1.0 }
    }

    fn hand_model() -> RuleFitModel {
        RuleFitModel {
            intercept: 100.0,
            fit_intercept: 100.0,
            terms: vec![
                Term { kind: TermKind::Linear { feature: "a".into() }, coefficient: -3.0, fit_coefficient: -3.0, center: 0.0, scale: 1.0 },
                Term { kind: TermKind::Rule { rule: rule("b", Some(2.0), None) }, coefficient: 7.5, fit_coefficient: 7.5, center: 0.0, scale: 1.0 },
            ],
            features: vec!["a".into(), "b".into()],
            lambda: 0.0,
            cv: CvResult { best_lambda: 0.0, best_index: 0, lambda_1se: 0.0, trace: vec![], unconverged: 0 },
            n_candidate_rules: 1,
            converged: true,
        }
    }

    #[test]
    fn hand_built_model() {
        let m = hand_model();
        let names = vec!["b".to_string(), "a".to_string()];
        let x = Matrix::from_row_slice(3, 2, &[0.0, 0.0, 3.0, 2.0, 2.0, -1.0]);
        let got = m.predict(&x, &names).unwrap();
        assert_eq!(got, vec![100.0, 100.0 - 6.0 + 7.5, 100.0 + 3.0]);
        assert!(matches!(m.predict(&x, &["b".into(), "c".into()]), Err(Error::MissingFeature(f)) if f == "a"));
    }

    #[test]
    fn card_csv_layout() {
        let mut buf = Vec::new();
        hand_model().write_card_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "no,term,type,coefficient\n0,intercept,intercept,100\n1,a,linear,-3\n2,b > 2,rule,7.5\n");
    }

    fn table(cols: Vec<Vec<f64>>, y: Vec<f64>, binary: &[bool]) -> FeatureTable {
        let n = y.len();
        let p = cols.len();
        let m = Matrix::from_fn(n, p, |i, j| cols[j][i]);
        let metas = (0..p)
            .map(|j| if binary[j] { ColumnMeta::binary(format!("x{j}")) } else { ColumnMeta::continuous(format!("x{j}")) })
            .collect();
        FeatureTable::new(m, y, metas).unwrap()
    }

    fn normal_cols(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::rng(seed);
        (0..p).map(|_| (0..n).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut r)).collect()).collect()
    }

    #[test]
    fn linear_target_zeroes_rules() {
        let n = 600;
        let cols: Vec<Vec<f64>> = normal_cols(n, 3, 1).into_iter().enumerate().map(|(j, c)| c.iter().map(|v| 10.0 * (j + 1) as f64 * v + 50.0).collect()).collect();
        let y: Vec<f64> = (0..n).map(|i| 5.0 + 0.3 * cols[0][i] - 0.2 * cols[1][i] + 0.1 * cols[2][i]).collect();
        let t = table(cols.clone(), y.clone(), &[false; 3]);
        let cfg = RuleFitConfig { forest: ForestParams { n_trees: 20, ..Default::default() }, ..Default::default() };
        let m = rulefit_fit(&t, &cfg, 3).unwrap();
        assert!(m.n_candidate_rules > 0);
        assert_eq!(m.n_rules(), 0, "{:?}", m.terms);
        let names: Vec<String> = (0..3).map(|j| format!("x{j}")).collect();
        let ols = ols_fit(&t.matrix, &y, &names).unwrap();
        for (t, b) in m.terms.iter().zip(&ols.coefficients) {
            assert!((t.coefficient - b).abs() < 1e-3 * b.abs(), "{} vs {b}", t.coefficient);
        }
        assert!((m.intercept - ols.intercept).abs() < 1e-2);
    }

    #[test]
    fn step_target_keeps_a_rule() {
        let n = 800;
        let mut r = rng::rng(4);
        let cols = normal_cols(n, 4, 5);
        let y: Vec<f64> = (0..n).map(|i| if cols[2][i] > 0.3 { 10.0 } else { 0.0 } + 0.3 * r.random::<f64>()).collect();
        let t = table(cols, y, &[false; 4]);
        let m = rulefit_fit(&t, &RuleFitConfig::default(), 9).unwrap();
        let on_x2 = m.terms.iter().any(|t| match &t.kind {
            TermKind::Rule { rule } => t.coefficient != 0.0 && rule.conditions.iter().any(|c| c.feature == "x2"),
            _ => false,
        });
        assert!(on_x2, "{:?}", m.terms.iter().map(Term::definition).collect::<Vec<_>>());
        assert!(m.n_rules() <= 50);
        for t in &m.terms {
            if let TermKind::Rule { rule } = &t.kind {
                assert!(rule.support > 0.0 && rule.support < 1.0);
            }
        }
    }

    #[test]
    fn raw_and_standardized_paths_agree_and_json_reloads() {
        let n = 500;
        let mut cols = normal_cols(n, 3, 7);
        cols[0].iter_mut().for_each(|v| *v = 40.0 + 12.0 * *v);
        let flag: Vec<f64> = (0..n).map(|i| (i % 3 == 0) as u8 as f64).collect();
        cols.push(flag);
        let y: Vec<f64> = (0..n)
            .map(|i| 1000.0 - 8.0 * cols[0][i] + if cols[1][i] > 0.0 { 150.0 } else { 0.0 } + 40.0 * cols[3][i] + 20.0 * cols[2][i])
            .collect();
        let t = table(cols, y, &[false, false, false, true]);
        for standardize_rules in [false, true] {
            let cfg = RuleFitConfig { standardize_rules, ..Default::default() };
            let m = rulefit_fit(&t, &cfg, 2).unwrap();
            let a = rulefit_predict(&m, &t).unwrap();
            let b = m.predict_standardized(&t.matrix, &t.names()).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-8 * p.abs().max(1.0));
            }
            let back = RuleFitModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m);
            let c = rulefit_predict(&back, &t).unwrap();
            assert!(a.iter().zip(&c).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn zero_cap_is_plain_lasso() {
        let n = 300;
        let cols = normal_cols(n, 3, 8);
        let y: Vec<f64> = (0..n).map(|i| 2.0 * cols[0][i] + cols[1][i].abs()).collect();
        let t = table(cols, y.clone(), &[false; 3]);
        let cfg = RuleFitConfig { rule_cap: 0, ..Default::default() };
        let m = rulefit_fit(&t, &cfg, 1).unwrap();
        assert_eq!(m.n_candidate_rules, 0);
        assert_eq!(m.n_rules(), 0);
        // same λ on the standardized design directly
        let idx = screen_features(&t, &cfg);
        let (std_t, _) = crate::dataset::standardize(&t.select_indices(&idx)).unwrap();
        let direct = lasso_cd(&std_t.matrix, &y, m.lambda, &cfg.lasso).unwrap();
        let nz: Vec<f64> = direct.coefficients.iter().copied().filter(|c| *c != 0.0).collect();
        assert_eq!(nz.len(), m.terms.len());
        for (t, w) in m.terms.iter().zip(&nz) {
            assert!((t.fit_coefficient - w).abs() < 1e-12);
        }
    }

    #[test]
    fn screen_respects_threshold_and_binary_list() {
        let n = 200;
        let cols = normal_cols(n, 2, 3);
        let flag: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let y: Vec<f64> = cols[0].clone();
        let t = table(vec![cols[0].clone(), cols[1].clone(), flag], y, &[false, false, true]);
        let all = screen_features(&t, &RuleFitConfig::default());
        assert_eq!(all, vec![0, 2]);
        let none = screen_features(&t, &RuleFitConfig { binary_features: Some(vec![]), ..Default::default() });
        assert_eq!(none, vec![0]);
    }
}
