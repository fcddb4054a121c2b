use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dbscan::{dbscan, NOISE};
use super::filter::{robust_filter, FilterMethod};
use super::kmeans::{default_k, kmeans};
use super::ransac::{ransac_line, ResidualThreshold};
use crate::dataset::{PropertyRecord, Segment, Source};
use crate::error::{Error, Result};
use crate::features::projection;
use crate::linalg;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansStage {
    pub enabled: bool,
    /// Number of territorial clusters; `max(2, round(n/500))` when unset.
    pub k: Option<usize>,
    pub max_iter: usize,
}

impl Default for KmeansStage {
    fn default() -> Self {
        KmeansStage { enabled: true, k: None, max_iter: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FilterStage {
    pub enabled: bool,
    pub method: FilterMethod,
    /// Defaults to 1.5 for `iqr` and 3 for `zscore`.
    pub threshold: Option<f64>,
}

impl Default for FilterStage {
    fn default() -> Self {
        FilterStage { enabled: true, method: FilterMethod::Iqr, threshold: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct DbscanStage {
    pub enabled: bool,
    pub eps: f64,
    pub min_pts: usize,
    /// One-hot encoded building attributes.
    pub categorical: Vec<String>,
    /// Standardized numeric building attributes.
    pub numeric: Vec<String>,
    /// Remove records DBSCAN labels as noise.
    pub drop_noise: bool,
}

impl Default for DbscanStage {
    fn default() -> Self {
        DbscanStage {
            enabled: true,
            eps: 0.5,
            min_pts: 5,
            categorical: vec!["wall_material".into()],
            numeric: vec!["storeys_total".into(), "year_built".into()],
            drop_noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RansacStage {
    pub enabled: bool,
    pub n_iter: usize,
    pub min_inliers: usize,
    /// Subclusters smaller than this are passed through untouched.
    pub min_group_size: usize,
    pub threshold: ResidualThreshold,
}

impl Default for RansacStage {
    fn default() -> Self {
        RansacStage {
            enabled: true,
            n_iter: 100,
            min_inliers: 3,
            min_group_size: 10,
            threshold: ResidualThreshold::MadOfTarget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierConfig {
    pub kmeans: KmeansStage,
    /// Land parcels: per-cluster filter on PSMP.
    pub filter: FilterStage,
    /// Optional extra stage: drop records whose PSMP differs from their
    /// cluster median by more than this factor in either direction.
    pub cluster_median_ratio: Option<f64>,
    /// Flats: deals whose PSMP falls inside `[lo, hi]` are removed for review.
    pub deal_price_band: Option<[f64; 2]>,
    pub dbscan: DbscanStage,
    pub ransac: RansacStage,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        OutlierConfig {
            kmeans: KmeansStage::default(),
            filter: FilterStage::default(),
            cluster_median_ratio: None,
            deal_price_band: Some([50_000.0, 100_000.0]),
            dbscan: DbscanStage::default(),
            ransac: RansacStage::default(),
        }
    }
}

impl OutlierConfig {
    /// Every stage switched off; cleaning becomes the identity.
    pub fn disabled() -> Self {
        let mut c = OutlierConfig::default();
        c.kmeans.enabled = false;
        c.filter.enabled = false;
        c.deal_price_band = None;
        c.dbscan.enabled = false;
        c.ransac.enabled = false;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub id: String,
    pub stage: String,
    pub reason: String,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: i32,
    pub n: usize,
    pub removed: usize,
    pub median_psmp: f64,
    pub mean_psmp: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub entries: Vec<ReportEntry>,
    pub clusters: Vec<ClusterSummary>,
    pub warnings: Vec<String>,
}

impl OutlierReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["id", "stage", "reason", "statistic"])?;
        for e in &self.entries {
            wr.write_record([e.id.as_str(), &e.stage, &e.reason, &fmt_stat(e.statistic)])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_clusters_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["cluster", "n", "removed", "median_psmp", "mean_psmp"])?;
        for c in &self.clusters {
            wr.write_record([
                c.cluster.to_string(),
                c.n.to_string(),
                c.removed.to_string(),
                fmt_stat(c.median_psmp),
                fmt_stat(c.mean_psmp),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn fmt_stat(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

struct Removal {
    index: usize,
    stage: &'static str,
    reason: String,
    statistic: f64,
}

/// Runs the cleaning stages for one segment. Returns the kept records in
/// input order and a report with one entry per removed record.
pub fn clean_pipeline(
    records: &[PropertyRecord],
    config: &OutlierConfig,
    seed: u64,
) -> Result<(Vec<PropertyRecord>, OutlierReport)> {
    let Some(first) = records.first() else {
        return Ok((vec![], OutlierReport::default()));
    };
    let segment = first.segment;
    if records.iter().any(|r| r.segment != segment) {
        return Err(Error::invalid("clean_pipeline expects records of a single segment"));
    }
    let mut report = OutlierReport::default();
    let mut alive = vec![true; records.len()];
    let mut removals = Vec::new();

    if segment == Segment::Flat {
        if let Some([lo, hi]) = config.deal_price_band {
            for (i, r) in records.iter().enumerate() {
                let p = r.psmp();
                if r.source == Source::Deal && p >= lo && p <= hi {
                    alive[i] = false;
                    removals.push(Removal {
                        index: i,
                        stage: "price_band",
                        reason: format!("deal PSMP inside [{lo}, {hi}]"),
                        statistic: p,
                    });
                }
            }
        }
    }

    let live: Vec<usize> = (0..records.len()).filter(|&i| alive[i]).collect();
    let clusters = territorial_clusters(records, &live, &config.kmeans, seed)
        .map_err(|e| e.in_stage("kmeans"))?;

    let stage_removals: Vec<Vec<Removal>> = match segment {
        Segment::LandParcel => clusters
            .par_iter()
            .map(|members| land_cluster(records, members, config))
            .collect::<Result<_>>()?,
        Segment::Flat => clusters
            .par_iter()
            .enumerate()
            .map(|(c, members)| flat_cluster(records, members, config, derive_seed(seed, c as u64)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(|(rem, warn)| {
                report.warnings.extend(warn);
                rem
            })
            .collect(),
    };
    for rem in stage_removals.into_iter().flatten() {
        alive[rem.index] = false;
        removals.push(rem);
    }

    for (c, members) in clusters.iter().enumerate() {
        let psmp: Vec<f64> = members.iter().map(|&i| records[i].psmp()).collect();
        report.clusters.push(ClusterSummary {
            cluster: c as i32,
            n: members.len(),
            removed: members.iter().filter(|&&i| !alive[i]).count(),
            median_psmp: if psmp.is_empty() { f64::NAN } else { linalg::median(&psmp) },
            mean_psmp: if psmp.is_empty() { f64::NAN } else { linalg::mean(&psmp) },
        });
    }

    removals.sort_by_key(|r| r.index);
    report.entries = removals
        .into_iter()
        .map(|r| ReportEntry {
            id: records[r.index].id.clone(),
            stage: r.stage.to_string(),
            reason: r.reason,
            statistic: r.statistic,
        })
        .collect();
    let kept = records.iter().zip(&alive).filter(|(_, a)| **a).map(|(r, _)| r.clone()).collect();
    Ok((kept, report))
}

/// Groups record indices by territorial k-means cluster. With the stage
/// disabled everything lands in one group.
fn territorial_clusters(
    records: &[PropertyRecord],
    live: &[usize],
    stage: &KmeansStage,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if !stage.enabled || live.is_empty() {
        return Ok(vec![live.to_vec()]);
    }
    let lonlat: Vec<[f64; 2]> = live.iter().map(|&i| [records[i].lon, records[i].lat]).collect();
    let origin = projection::centroid(&lonlat);
    let xy = projection::project(&lonlat, origin);
    let k = stage.k.unwrap_or_else(|| default_k(live.len())).min(live.len());
    let assignment = kmeans(&xy, k, derive_seed(seed, u64::MAX), stage.max_iter)?;
    let mut groups = vec![Vec::new(); k];
    for (pos, &i) in live.iter().enumerate() {
        groups[assignment.labels[pos] as usize].push(i);
    }
    Ok(groups)
}

fn land_cluster(records: &[PropertyRecord], members: &[usize], config: &OutlierConfig) -> Result<Vec<Removal>> {
    let mut out = Vec::new();
    let psmp: Vec<f64> = members.iter().map(|&i| records[i].psmp()).collect();
    let mut keep = vec![true; members.len()];
    if let Some(ratio) = config.cluster_median_ratio {
        if !psmp.is_empty() {
            let med = linalg::median(&psmp);
            for (pos, &p) in psmp.iter().enumerate() {
                let r = p / med;
                if r > ratio || r < 1.0 / ratio {
                    keep[pos] = false;
                    out.push(Removal {
                        index: members[pos],
                        stage: "cluster_median",
                        reason: format!("PSMP / cluster median outside [1/{ratio}, {ratio}]"),
                        statistic: r,
                    });
                }
            }
        }
    }
    if config.filter.enabled {
        let pos: Vec<usize> = (0..members.len()).filter(|&p| keep[p]).collect();
        let method = config.filter.method;
        let threshold = config.filter.threshold.unwrap_or(method.default_threshold());
        let min_n = if method == FilterMethod::Iqr { 4 } else { 1 };
        if pos.len() >= min_n {
            let values: Vec<f64> = pos.iter().map(|&p| psmp[p]).collect();
            let outcome = robust_filter(&values, method, threshold)?;
            for (k, &p) in pos.iter().enumerate() {
                if !outcome.keep[k] {
                    let stage = match method {
                        FilterMethod::Iqr => "iqr",
                        FilterMethod::Zscore => "zscore",
                    };
                    out.push(Removal {
                        index: members[p],
                        stage,
                        reason: format!("PSMP outside [{:.2}, {:.2}]", outcome.lower, outcome.upper),
                        statistic: psmp[p],
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Standardized building-characteristics matrix for DBSCAN.
fn characteristics(records: &[PropertyRecord], members: &[usize], stage: &DbscanStage) -> Result<Vec<Vec<f64>>> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for name in &stage.categorical {
        let mut levels = BTreeMap::new();
        let mut values = Vec::with_capacity(members.len());
        for &i in members {
            let v = records[i]
                .attributes
                .get(name)
                .ok_or_else(|| Error::MissingFeature(format!("{name} (record {})", records[i].id)))?
                .as_text();
            let next = levels.len();
            levels.entry(v.clone()).or_insert(next);
            values.push(v);
        }
        // order levels alphabetically so the encoding ignores row order
        let names: Vec<String> = levels.into_keys().collect();
        for level in names {
            cols.push(values.iter().map(|v| if *v == level { 1.0 } else { 0.0 }).collect());
        }
    }
    for name in &stage.numeric {
        let mut values = Vec::with_capacity(members.len());
        for &i in members {
            values.push(records[i].attr_f64(name).ok_or_else(|| {
                Error::MissingFeature(format!("{name} (record {})", records[i].id))
            })?);
        }
        let m = linalg::mean(&values);
        let s = linalg::pop_std(&values);
        cols.push(values.iter().map(|v| if s > 0.0 { (v - m) / s } else { 0.0 }).collect());
    }
    Ok((0..members.len()).map(|r| cols.iter().map(|c| c[r]).collect()).collect())
}

fn flat_cluster(
    records: &[PropertyRecord],
    members: &[usize],
    config: &OutlierConfig,
    seed: u64,
) -> Result<(Vec<Removal>, Vec<String>)> {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    if members.is_empty() {
        return Ok((out, warnings));
    }
    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    if config.dbscan.enabled {
        let x = characteristics(records, members, &config.dbscan).map_err(|e| e.in_stage("dbscan"))?;
        let labels = dbscan(&x, config.dbscan.eps, config.dbscan.min_pts)?;
        for (pos, &l) in labels.iter().enumerate() {
            if l == NOISE && config.dbscan.drop_noise {
                out.push(Removal {
                    index: members[pos],
                    stage: "dbscan",
                    reason: "noise in building-characteristics space".into(),
                    statistic: f64::NAN,
                });
            } else {
                groups.entry(l).or_default().push(members[pos]);
            }
        }
    } else {
        groups.insert(0, members.to_vec());
    }
    if !config.ransac.enabled {
        return Ok((out, warnings));
    }
    let rc = &config.ransac;
    for (label, group) in groups {
        if label == NOISE || group.len() < rc.min_group_size.max(2) {
            continue;
        }
        let x: Vec<f64> = group.iter().map(|&i| records[i].area).collect();
        let y: Vec<f64> = group.iter().map(|&i| records[i].psmp().ln()).collect();
        let sub_seed = derive_seed(seed, label as u64);
        match ransac_line(&x, &y, rc.n_iter, sub_seed, rc.min_inliers, rc.threshold) {
            Ok(fit) => {
                for (k, &inlier) in fit.inlier_mask.iter().enumerate() {
                    if !inlier {
                        let residual = y[k] - (fit.slope * x[k] + fit.intercept);
                        out.push(Removal {
                            index: group[k],
                            stage: "ransac",
                            reason: format!("|residual| above threshold {:.4}", fit.threshold),
                            statistic: residual,
                        });
                    }
                }
            }
            Err(Error::DegenerateRansac) => {
                warnings.push(format!("subcluster {label}: all areas equal, RANSAC skipped"));
            }
            Err(e) => warnings.push(format!("subcluster {label}: {e}")),
        }
    }
    Ok((out, warnings))
}
