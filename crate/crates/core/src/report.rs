//! Text tables and plot-ready CSVs.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{write_reports_csv, MetricReport};
use crate::geostat::{CorrelogramBin, EmpiricalVariogram, HistogramBin, VariogramModel};
use crate::linmodel::OlsFit;
use crate::outliers::OutlierReport;
use crate::rulefit::RuleFitModel;
use crate::selection::SelectionTrace;
use crate::special::normal_quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub actual: f64,
    pub predicted: f64,
    /// `train` or `test`.
    pub split: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPredictions {
    pub model: String,
    pub rows: Vec<PredictionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramReport {
    pub empirical: EmpiricalVariogram,
    pub model: VariogramModel,
    pub correlogram: Vec<CorrelogramBin>,
}

/// Everything a run produced that reports are rendered from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub dataset: String,
    pub outliers: Option<OutlierReport>,
    pub selection: Option<SelectionTrace>,
    pub ols: Option<OlsFit>,
    pub vif: Option<Vec<f64>>,
    pub variogram: Option<VariogramReport>,
    pub rulefit: Option<RuleFitModel>,
    pub predictions: Vec<ModelPredictions>,
    pub metrics: Vec<MetricReport>,
    pub cv_metrics: Vec<MetricReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Csv,
    All,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn write_predictions_csv<W: Write>(rows: &[PredictionRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["id", "actual", "predicted", "split"])?;
    for r in rows {
        wr.write_record([r.id.as_str(), &num(r.actual), &num(r.predicted), &r.split])?;
    }
    wr.flush()?;
    Ok(())
}

/// Sorted residuals paired with standard normal quantiles at `(i − 0.5)/n`,
/// as `(theoretical, sample)`.
pub fn qq_data(residuals: &[f64]) -> Vec<(f64, f64)> {
    let mut s = residuals.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.into_iter()
        .enumerate()
        .map(|(i, r)| (normal_quantile((i as f64 + 0.5) / n), r))
        .collect()
}

pub fn write_qq_csv<W: Write>(residuals: &[f64], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["theoretical", "sample"])?;
    for (t, s) in qq_data(residuals) {
        wr.write_record([num(t), num(s)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["lower", "upper", "count"])?;
    for b in bins {
        wr.write_record([num(b.lower), num(b.upper), b.count.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Empirical bins with the fitted model evaluated at each bin distance.
pub fn write_variogram_csv<W: Write>(emp: Option<&EmpiricalVariogram>, model: Option<&VariogramModel>, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["lower", "upper", "h", "gamma", "pairs", "flagged", "model_gamma"])?;
    for b in emp.map(|e| e.bins.as_slice()).unwrap_or_default() {
        wr.write_record([
            num(b.lower),
            num(b.upper),
            num(b.h),
            num(b.gamma),
            b.pairs.to_string(),
            u8::from(b.flagged).to_string(),
            model.map(|m| num(m.gamma(b.h))).unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_correlogram_csv<W: Write>(bins: &[CorrelogramBin], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["lower", "upper", "h", "correlation", "pairs", "flagged"])?;
    for b in bins {
        wr.write_record([
            num(b.lower),
            num(b.upper),
            num(b.h),
            num(b.correlation),
            b.pairs.to_string(),
            u8::from(b.flagged).to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Fixed-width table; the first column is left aligned, the rest right.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (j, c) in cells.iter().enumerate() {
            if j > 0 {
                s.push_str("  ");
            }
            if j == 0 {
                let _ = write!(s, "{c:<w$}", w = width[j]);
            } else {
                let _ = write!(s, "{c:>w$}", w = width[j]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let total = width.iter().sum::<usize>() + 2 * width.len().saturating_sub(1);
    let mut out = line(header.to_vec());
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

pub fn metrics_table(reports: &[MetricReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.split.clone(),
                r.n.to_string(),
                r.p.to_string(),
                format!("{:.2}", r.mae),
                format!("{:.2}", r.mape),
                format!("{:.3}", r.r2_adj),
            ]
        })
        .collect();
    text_table(&["model", "split", "n", "p", "MAE", "MAPE, %", "R2 adj"], &rows)
}

pub fn rules_table(model: &RuleFitModel) -> String {
    let mut rows = vec![vec!["0".to_string(), "intercept".into(), "intercept".into(), format!("{:.4}", model.intercept)]];
    for (i, t) in model.terms.iter().enumerate() {
        rows.push(vec![(i + 1).to_string(), t.definition(), t.type_name().into(), format!("{:.4}", t.coefficient)]);
    }
    text_table(&["no", "term", "type", "coefficient"], &rows)
}

pub fn selection_table(trace: &SelectionTrace) -> String {
    let rows: Vec<Vec<String>> = trace
        .steps
        .iter()
        .map(|s| {
            vec![
                s.features.len().to_string(),
                format!("{:.3}", s.r2_adj),
                format!("{:.3}", s.durbin_watson),
                format!("{:.3e}", s.jb_pvalue),
                if s.valid() { "yes" } else { "no" }.into(),
                s.removed.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let mut s = text_table(&["features", "R2 adj", "DW", "p(JB)", "valid", "removed"], &rows);
    match &trace.chosen {
        Some(c) => {
            let _ = writeln!(s, "\nchosen: {}", c.join(", "));
        }
        None => s.push_str("\nno subset passed every gate\n"),
    }
    s
}

pub fn vif_table(names: &[String], vif: &[f64]) -> String {
    let rows: Vec<Vec<String>> = names.iter().zip(vif).map(|(n, v)| vec![n.clone(), format!("{v:.3}")]).collect();
    text_table(&["feature", "VIF"], &rows)
}

pub fn outlier_table(report: &OutlierReport) -> String {
    let mut by_stage: std::collections::BTreeMap<&str, usize> = Default::default();
    for e in &report.entries {
        *by_stage.entry(e.stage.as_str()).or_default() += 1;
    }
    let rows: Vec<Vec<String>> = by_stage.into_iter().map(|(s, n)| vec![s.to_string(), n.to_string()]).collect();
    let mut s = text_table(&["stage", "removed"], &rows);
    for w in &report.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

fn residuals_of(rows: &[PredictionRow], split: &str) -> Vec<f64> {
    rows.iter().filter(|r| r.split == split).map(|r| r.actual - r.predicted).collect()
}

/// Renders the bundle into `dir`. Absent parts still produce their files
/// with headers only (CSV) or an explanatory line (text).
pub fn emit_report(bundle: &Bundle, dir: &Path, format: ReportFormat, histogram_bins: usize) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::File { path: dir.to_path_buf(), source: e })?;
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::File { path: p.clone(), source: e })?;
        files.push(p);
        Ok(())
    };
    let csv = |f: &dyn Fn(&mut Vec<u8>) -> Result<()>| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        Ok(buf)
    };

    if matches!(format, ReportFormat::Text | ReportFormat::All) {
        let none = |what: &str| format!("no {what} in this run\n");
        put("metrics.txt", {
            let mut s = metrics_table(&bundle.metrics);
            if !bundle.cv_metrics.is_empty() {
                s.push_str("\ncross-validation\n");
                s.push_str(&metrics_table(&bundle.cv_metrics));
            }
            s.into_bytes()
        })?;
        put("ols_summary.txt", {
            let mut s = bundle.ols.as_ref().map(|f| f.summary(&bundle.dataset)).unwrap_or_else(|| none("OLS fit"));
            if let (Some(f), Some(v)) = (&bundle.ols, &bundle.vif) {
                s.push('\n');
                s.push_str(&vif_table(&f.names, v));
            }
            s.into_bytes()
        })?;
        put("selection.txt", bundle.selection.as_ref().map(selection_table).unwrap_or_else(|| none("feature selection")).into_bytes())?;
        put("rules.txt", bundle.rulefit.as_ref().map(rules_table).unwrap_or_else(|| none("RuleFit model")).into_bytes())?;
        put("outliers.txt", bundle.outliers.as_ref().map(outlier_table).unwrap_or_else(|| none("outlier cleaning")).into_bytes())?;
    }

    if matches!(format, ReportFormat::Csv | ReportFormat::All) {
        put("metrics.csv", csv(&|b| write_reports_csv(&bundle.metrics, b))?)?;
        put("cv_metrics.csv", csv(&|b| write_reports_csv(&bundle.cv_metrics, b))?)?;
        for m in &bundle.predictions {
            put(&format!("predictions_{}.csv", m.model), csv(&|b| write_predictions_csv(&m.rows, b))?)?;
            let test = residuals_of(&m.rows, "test");
            put(&format!("qq_{}.csv", m.model), csv(&|b| write_qq_csv(&test, b))?)?;
            let hist = crate::geostat::histogram(&test, histogram_bins);
            put(&format!("residual_histogram_{}.csv", m.model), csv(&|b| write_histogram_csv(&hist, b))?)?;
        }
        if bundle.predictions.is_empty() {
            put("predictions.csv", csv(&|b| write_predictions_csv(&[], b))?)?;
            put("qq.csv", csv(&|b| write_qq_csv(&[], b))?)?;
            put("residual_histogram.csv", csv(&|b| write_histogram_csv(&[], b))?)?;
        }
        let v = bundle.variogram.as_ref();
        put("variogram.csv", csv(&|b| write_variogram_csv(v.map(|v| &v.empirical), v.map(|v| &v.model), b))?)?;
        put("correlogram.csv", csv(&|b| write_correlogram_csv(v.map(|v| v.correlogram.as_slice()).unwrap_or_default(), b))?)?;
    }
    Ok(files)
}
