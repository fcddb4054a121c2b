//! Synthetic markets with planted structure, written next to a truth file so
//! the modelling stages can be checked against known answers.
//!
//! Land parcels: `ln PSMP = trend(attributes) + Gaussian field + noise`, the
//! field having exponential covariance `sd²·exp(−h/range)` and simulated by
//! random Fourier features. Flats: buildings grouped in districts around a
//! town hall; price per square meter declines exponentially with area and
//! carries a premium for new buildings near the town hall.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{write_records, AttrValue, PropertyRecord, Segment, Source};
use crate::error::{Error, Result};
use crate::features::builder::write_pois_csv;
use crate::features::projection::unproject_point;
use crate::features::Poi;
use crate::rng::{self, derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    /// Standard deviation of the field (square root of the partial sill).
    pub sd: f64,
    /// Range parameter `a` of `exp(−h/a)`, meters.
    pub range_m: f64,
    pub n_features: usize,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec { sd: 0.3, range_m: 2000.0, n_features: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct LandSpec {
    /// Side of the square study area, meters.
    pub extent_m: f64,
    pub intercept: f64,
    /// Trend coefficients on the log scale, keyed by attribute.
    pub coefficients: BTreeMap<String, f64>,
    pub field: FieldSpec,
    pub noise_sd: f64,
    pub area_range: [f64; 2],
    pub n_settlements: usize,
    pub n_lakes: usize,
    /// Road nodes per side of the grid.
    pub road_grid: usize,
}

impl Default for LandSpec {
    fn default() -> Self {
        let coefficients = [
            ("area", -1e-4),
            ("dist_coast_m", -2.5e-5),
            ("dist_water_m", -1.5e-5),
            ("dist_town_hall_m", -3e-5),
            ("dist_school_m", -1e-5),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        LandSpec {
            extent_m: 20_000.0,
            intercept: 8.5,
            coefficients,
            field: FieldSpec::default(),
            noise_sd: 0.15,
            area_range: [600.0, 3000.0],
            n_settlements: 8,
            n_lakes: 5,
            road_grid: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Era {
    pub year: u32,
    pub storeys: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FlatSpec {
    /// Districts sit on two rings around the town hall, half on each.
    pub n_districts: usize,
    pub inner_ring_m: f64,
    pub outer_ring_m: f64,
    pub district_sd_m: f64,
    /// Buildings are kept within this distance of their district center.
    pub district_radius_m: f64,
    pub flats_per_building: usize,
    pub area_range: [f64; 2],
    pub base_psmp: f64,
    /// Log-price change per m² of area above the smallest flat.
    pub area_slope: f64,
    pub district_effect: f64,
    pub town_hall_slope: f64,
    pub coast_slope: f64,
    pub year_slope: f64,
    pub eras: Vec<Era>,
    pub wall_premium: BTreeMap<String, f64>,
    pub first_floor: f64,
    pub last_floor: f64,
    /// Premium for buildings within `step_distance_m` of the town hall and
    /// built after `step_year`.
    pub step_premium: f64,
    pub step_distance_m: f64,
    pub step_year: u32,
    pub noise_sd: f64,
}

impl Default for FlatSpec {
    fn default() -> Self {
        FlatSpec {
            n_districts: 10,
            inner_ring_m: 3000.0,
            outer_ring_m: 9000.0,
            district_sd_m: 300.0,
            district_radius_m: 900.0,
            flats_per_building: 11,
            area_range: [25.0, 120.0],
            base_psmp: 450_000.0,
            area_slope: -0.01,
            district_effect: 0.05,
            town_hall_slope: -1e-5,
            coast_slope: -5e-6,
            year_slope: 0.004,
            eras: vec![
                Era { year: 1962, storeys: 5 },
                Era { year: 1978, storeys: 9 },
                Era { year: 1992, storeys: 10 },
                Era { year: 2008, storeys: 17 },
                Era { year: 2019, storeys: 24 },
            ],
            wall_premium: [("brick", 0.05), ("monolith", 0.1), ("panel", 0.0)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            first_floor: -0.05,
            last_floor: -0.03,
            step_premium: 0.5,
            step_distance_m: 6000.0,
            step_year: 2000,
            noise_sd: 0.04,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub segment: Segment,
    pub n: usize,
    /// Study-area center (lon, lat).
    pub origin: [f64; 2],
    /// Share of records turned into planted outliers.
    pub outlier_fraction: f64,
    /// Price multiplier of a planted outlier; flats outliers are also
    /// marked as deals.
    pub outlier_factor: f64,
    pub land: LandSpec,
    pub flats: FlatSpec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            segment: Segment::LandParcel,
            n: 3000,
            origin: [131.9, 43.1],
            outlier_fraction: 0.03,
            outlier_factor: 0.25,
            land: LandSpec::default(),
            flats: FlatSpec::default(),
        }
    }
}

impl SynthSpec {
    pub fn land(n: usize) -> Self {
        SynthSpec { n, ..Default::default() }
    }

    pub fn flats(n: usize) -> Self {
        SynthSpec { segment: Segment::Flat, n, outlier_fraction: 0.05, ..Default::default() }
    }
}

/// Planted components of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTruth {
    pub id: String,
    pub outlier: bool,
    /// Price per square meter before any outlier distortion.
    pub clean_psmp: f64,
    /// Gaussian-field value (land) on the log scale.
    pub field: f64,
    /// Whether the step premium applies (flats).
    pub step: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub spec: SynthSpec,
    pub seed: u64,
    pub outlier_ids: Vec<String>,
    pub records: Vec<RecordTruth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadEdge {
    pub from: usize,
    pub to: usize,
    pub length_m: f64,
    pub oneway: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Roads {
    pub nodes: Vec<[f64; 2]>,
    pub edges: Vec<RoadEdge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub records: Vec<PropertyRecord>,
    pub pois: Vec<Poi>,
    pub roads: Roads,
    pub truth: Truth,
}

impl SynthData {
    /// Writes `records.csv`, `truth.json` and, when present, `pois.csv`,
    /// `nodes.csv` and `edges.csv`. Returns the written paths.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let file_err = |p: &Path| {
            let p = p.to_path_buf();
            move |e| Error::File { path: p, source: e }
        };
        std::fs::create_dir_all(dir).map_err(file_err(dir))?;
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, bytes).map_err(file_err(&p))?;
            written.push(p);
            Ok(())
        };
        let mut buf = Vec::new();
        write_records(&self.records, &mut buf)?;
        put("records.csv", buf)?;
        if !self.pois.is_empty() {
            let mut buf = Vec::new();
            write_pois_csv(&self.pois, &mut buf)?;
            put("pois.csv", buf)?;
        }
        if !self.roads.nodes.is_empty() {
            let (nodes, edges) = self.roads_csv(self.truth.spec.origin)?;
            put("nodes.csv", nodes)?;
            put("edges.csv", edges)?;
        }
        put("truth.json", serde_json::to_vec_pretty(&self.truth)?)?;
        Ok(written)
    }

    fn roads_csv(&self, origin: [f64; 2]) -> Result<(Vec<u8>, Vec<u8>)> {
        let mut nodes = csv::Writer::from_writer(Vec::new());
        nodes.write_record(["id", "lon", "lat"])?;
        for (i, xy) in self.roads.nodes.iter().enumerate() {
            let ll = unproject_point(*xy, origin);
            nodes.write_record([format!("n{i}"), ll[0].to_string(), ll[1].to_string()])?;
        }
        let mut edges = csv::Writer::from_writer(Vec::new());
        edges.write_record(["from_id", "to_id", "length_m", "oneway"])?;
        for e in &self.roads.edges {
            edges.write_record([format!("n{}", e.from), format!("n{}", e.to), e.length_m.to_string(), e.oneway.to_string()])?;
        }
        let inner = |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| Error::invalid(e.to_string()));
        Ok((inner(nodes)?, inner(edges)?))
    }
}

/// Stationary Gaussian field with covariance `sd²·exp(−h/range)`, built
/// from random Fourier features. For the exponential kernel in 2-D the
/// spectral measure is a bivariate Cauchy law, sampled as `g / (a·|g'|)`.
pub struct GaussianField {
    omega: Vec<[f64; 2]>,
    phase: Vec<f64>,
    amp: f64,
}

impl GaussianField {
    pub fn new(spec: &FieldSpec, seed: u64) -> GaussianField {
        let mut r = rng::rng(seed);
        let m = spec.n_features.max(1);
        let mut omega = Vec::with_capacity(m);
        let mut phase = Vec::with_capacity(m);
        for _ in 0..m {
            let g: [f64; 2] = [StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)];
            let w: f64 = StandardNormal.sample(&mut r);
            let s = 1.0 / (spec.range_m * w.abs().max(1e-300));
            omega.push([g[0] * s, g[1] * s]);
            phase.push(r.random::<f64>() * std::f64::consts::TAU);
        }
        GaussianField { omega, phase, amp: spec.sd * (2.0 / m as f64).sqrt() }
    }

    pub fn at(&self, xy: [f64; 2]) -> f64 {
        self.amp
            * self
                .omega
                .iter()
                .zip(&self.phase)
                .map(|(w, b)| (w[0] * xy[0] + w[1] * xy[1] + b).cos())
                .sum::<f64>()
    }
}

fn nearest(p: [f64; 2], sites: &[[f64; 2]]) -> (usize, f64) {
    sites
        .iter()
        .enumerate()
        .map(|(i, s)| (i, (p[0] - s[0]).hypot(p[1] - s[1])))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

fn uniform_point(r: &mut Rng, half: f64) -> [f64; 2] {
    [r.random_range(-half..half), r.random_range(-half..half)]
}

fn record(id: String, segment: Segment, source: Source, xy: [f64; 2], origin: [f64; 2], area: f64, psmp: f64) -> PropertyRecord {
    let ll = unproject_point(xy, origin);
    PropertyRecord {
        id,
        segment,
        source,
        lon: ll[0],
        lat: ll[1],
        area,
        total_price: psmp * area,
        attributes: BTreeMap::new(),
    }
}

fn outlier_set(n: usize, fraction: f64, r: &mut Rng) -> Vec<bool> {
    let k = ((n as f64 * fraction).round() as usize).min(n);
    let mut mask = vec![false; n];
    for i in sample(r, n, k) {
        mask[i] = true;
    }
    mask
}

fn validate(spec: &SynthSpec) -> Result<()> {
    if spec.n == 0 {
        return Err(Error::invalid("synthetic data needs n ≥ 1"));
    }
    if !(0.0..=1.0).contains(&spec.outlier_fraction) {
        return Err(Error::invalid("outlier_fraction must lie in [0, 1]"));
    }
    if !(spec.outlier_factor > 0.0) {
        return Err(Error::invalid("outlier_factor must be positive"));
    }
    if spec.segment == Segment::Flat && (spec.flats.eras.is_empty() || spec.flats.wall_premium.is_empty()) {
        return Err(Error::invalid("flats need at least one era and one wall material"));
    }
    Ok(())
}

pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<SynthData> {
    validate(spec)?;
    match spec.segment {
        Segment::LandParcel => land(spec, seed),
        Segment::Flat => flats(spec, seed),
    }
}

fn land(spec: &SynthSpec, seed: u64) -> Result<SynthData> {
    let ls = &spec.land;
    let half = ls.extent_m / 2.0;
    let mut geo = rng::stream(seed, 0);

    let settlements: Vec<[f64; 2]> = std::iter::once([0.0, 0.0])
        .chain((1..ls.n_settlements.max(1)).map(|_| uniform_point(&mut geo, half * 0.9)))
        .collect();
    let population: Vec<f64> = settlements
        .iter()
        .enumerate()
        .map(|(i, _)| if i == 0 { 600_000.0 } else { (geo.random_range(7.0f64..11.0)).exp().round() })
        .collect();
    let city = settlements[0];
    let lakes: Vec<[f64; 2]> = (0..ls.n_lakes.max(1)).map(|_| uniform_point(&mut geo, half)).collect();

    let mut pois = Vec::new();
    let mut poi_xy: BTreeMap<&str, Vec<[f64; 2]>> = BTreeMap::new();
    for (category, per_settlement, spread) in [("cafe", 12, 1500.0), ("hospital", 1, 2000.0), ("school", 3, 2500.0), ("nursery", 3, 2500.0)] {
        let spread = Normal::new(0.0, spread).map_err(|e| Error::invalid(e.to_string()))?;
        for s in &settlements {
            for _ in 0..per_settlement {
                let xy = [s[0] + spread.sample(&mut geo), s[1] + spread.sample(&mut geo)];
                poi_xy.entry(category).or_default().push(xy);
                let ll = unproject_point(xy, spec.origin);
                pois.push(Poi { category: category.to_string(), lon: ll[0], lat: ll[1] });
            }
        }
    }

    let roads = road_grid(ls, &mut rng::stream(seed, 1));
    let field = GaussianField::new(&ls.field, derive_seed(seed, 2));
    let mut r = rng::stream(seed, 3);
    let noise = Normal::new(0.0, ls.noise_sd.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let outliers = outlier_set(spec.n, spec.outlier_fraction, &mut rng::stream(seed, 4));

    let mut records = Vec::with_capacity(spec.n);
    let mut truth = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let xy = uniform_point(&mut r, half);
        let area = (r.random_range(ls.area_range[0]..=ls.area_range[1]) * 10.0).round() / 10.0;
        let (s, d_town) = nearest(xy, &settlements);
        let mut attrs: BTreeMap<String, f64> = BTreeMap::new();
        attrs.insert("area".into(), area);
        attrs.insert("dist_coast_m".into(), xy[1] + half);
        attrs.insert("dist_water_m".into(), nearest(xy, &lakes).1);
        attrs.insert("dist_town_hall_m".into(), d_town);
        attrs.insert("dist_city_m".into(), (xy[0] - city[0]).hypot(xy[1] - city[1]));
        attrs.insert("settlement_population".into(), population[s]);
        for (cat, name) in [("hospital", "dist_hospital_m"), ("school", "dist_school_m"), ("nursery", "dist_nursery_m")] {
            attrs.insert(name.into(), nearest(xy, &poi_xy[cat]).1);
        }
        let mut log_psmp = ls.intercept;
        for (k, c) in &ls.coefficients {
            let v = attrs.get(k).ok_or_else(|| Error::invalid(format!("trend attribute {k} is not generated")))?;
            log_psmp += c * v;
        }
        let f = if ls.field.sd > 0.0 { field.at(xy) } else { 0.0 };
        log_psmp += f + if ls.noise_sd > 0.0 { noise.sample(&mut r) } else { 0.0 };
        let clean = log_psmp.exp();
        let psmp = if outliers[i] { clean * spec.outlier_factor } else { clean };
        let id = format!("L{i:05}");
        let mut rec = record(id.clone(), Segment::LandParcel, if r.random_bool(0.5) { Source::Deal } else { Source::Offer }, xy, spec.origin, area, psmp);
        rec.attributes = attrs.into_iter().filter(|(k, _)| k != "area").map(|(k, v)| (k, AttrValue::Num(v))).collect();
        records.push(rec);
        truth.push(RecordTruth { id, outlier: outliers[i], clean_psmp: clean, field: f, step: false });
    }
    Ok(finish(spec, seed, records, pois, roads, truth))
}

fn road_grid(ls: &LandSpec, r: &mut Rng) -> Roads {
    let g = ls.road_grid;
    if g < 2 {
        return Roads::default();
    }
    let step = ls.extent_m / (g - 1) as f64;
    let half = ls.extent_m / 2.0;
    let jitter = step * 0.15;
    let mut nodes = Vec::with_capacity(g * g);
    for j in 0..g {
        for i in 0..g {
            nodes.push([
                -half + i as f64 * step + r.random_range(-jitter..jitter),
                -half + j as f64 * step + r.random_range(-jitter..jitter),
            ]);
        }
    }
    let mut edges = Vec::new();
    for j in 0..g {
        for i in 0..g {
            let a = j * g + i;
            for b in [(i + 1 < g).then(|| a + 1), (j + 1 < g).then(|| a + g)].into_iter().flatten() {
                // a few missing links and one-way streets
                if r.random_bool(0.05) {
                    continue;
                }
                let straight = (nodes[a][0] - nodes[b][0]).hypot(nodes[a][1] - nodes[b][1]);
                let length_m = straight * r.random_range(1.0..1.25);
                let oneway = r.random_bool(0.1);
                let (from, to) = if oneway && r.random_bool(0.5) { (b, a) } else { (a, b) };
                edges.push(RoadEdge { from, to, length_m, oneway });
            }
        }
    }
    Roads { nodes, edges }
}

fn flats(spec: &SynthSpec, seed: u64) -> Result<SynthData> {
    let fs = &spec.flats;
    let mut geo = rng::stream(seed, 0);
    let nd = fs.n_districts.max(1);
    let n_inner = nd.div_ceil(2);
    let centers: Vec<[f64; 2]> = (0..nd)
        .map(|d| {
            let (ring, k, count, offset) = if d < n_inner {
                (fs.inner_ring_m, d, n_inner, 0.0)
            } else {
                (fs.outer_ring_m, d - n_inner, nd - n_inner, 0.5)
            };
            let angle = std::f64::consts::TAU * (k as f64 + offset) / count.max(1) as f64;
            [ring * angle.cos(), ring * angle.sin()]
        })
        .collect();
    let district_effect: Vec<f64> = (0..nd).map(|_| geo.random_range(-1.0..=1.0) * fs.district_effect).collect();
    let coast_y = -(fs.outer_ring_m + 3.0 * fs.district_radius_m);
    let walls: Vec<(&String, &f64)> = fs.wall_premium.iter().collect();

    struct Building {
        district: usize,
        xy: [f64; 2],
        wall: usize,
        year: u32,
        storeys: u32,
    }
    let per = fs.flats_per_building.max(1);
    let n_buildings = (spec.n / per).max(1);
    let pos = Normal::new(0.0, fs.district_sd_m).map_err(|e| Error::invalid(e.to_string()))?;
    let buildings: Vec<Building> = (0..n_buildings)
        .map(|b| {
            let district = b % nd;
            let c = centers[district];
            let xy = loop {
                let dx: f64 = pos.sample(&mut geo);
                let dy: f64 = pos.sample(&mut geo);
                if dx.hypot(dy) <= fs.district_radius_m {
                    break [c[0] + dx, c[1] + dy];
                }
            };
            let era = fs.eras[geo.random_range(0..fs.eras.len())];
            Building { district, xy, wall: geo.random_range(0..walls.len()), year: era.year + geo.random_range(0..=2), storeys: era.storeys }
        })
        .collect();

    let mut r = rng::stream(seed, 3);
    let noise = Normal::new(0.0, fs.noise_sd.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let outliers = outlier_set(spec.n, spec.outlier_fraction, &mut rng::stream(seed, 4));
    let mut records = Vec::with_capacity(spec.n);
    let mut truth = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let b = &buildings[i % n_buildings];
        let area = (r.random_range(fs.area_range[0]..=fs.area_range[1]) * 10.0).round() / 10.0;
        let storey = r.random_range(1..=b.storeys);
        let d_hall = b.xy[0].hypot(b.xy[1]);
        let d_coast = b.xy[1] - coast_y;
        let step = d_hall <= fs.step_distance_m && b.year > fs.step_year;
        let mut log_psmp = fs.base_psmp.ln()
            + district_effect[b.district]
            + fs.area_slope * (area - fs.area_range[0])
            + fs.town_hall_slope * d_hall
            + fs.coast_slope * d_coast
            + fs.year_slope * (b.year as f64 - 1990.0)
            + walls[b.wall].1;
        if storey == 1 {
            log_psmp += fs.first_floor;
        } else if storey == b.storeys {
            log_psmp += fs.last_floor;
        }
        if step {
            log_psmp += fs.step_premium;
        }
        if fs.noise_sd > 0.0 {
            log_psmp += noise.sample(&mut r);
        }
        let clean = log_psmp.exp();
        let mut source = if r.random_bool(0.5) { Source::Deal } else { Source::Offer };
        let psmp = if outliers[i] {
            source = Source::Deal;
            clean * spec.outlier_factor
        } else {
            clean
        };
        let id = format!("F{i:05}");
        let mut rec = record(id.clone(), Segment::Flat, source, b.xy, spec.origin, area, psmp);
        let num = |v: f64| AttrValue::Num(v);
        rec.attributes.insert("wall_material".into(), AttrValue::Text(walls[b.wall].0.clone()));
        rec.attributes.insert("storeys_total".into(), num(b.storeys as f64));
        rec.attributes.insert("storey".into(), num(storey as f64));
        rec.attributes.insert("year_built".into(), num(b.year as f64));
        rec.attributes.insert("dist_town_hall_m".into(), num(d_hall));
        rec.attributes.insert("dist_coast_m".into(), num(d_coast));
        rec.attributes.insert("district".into(), num(b.district as f64));
        records.push(rec);
        truth.push(RecordTruth { id, outlier: outliers[i], clean_psmp: clean, field: 0.0, step });
    }
    Ok(finish(spec, seed, records, Vec::new(), Roads::default(), truth))
}

fn finish(spec: &SynthSpec, seed: u64, records: Vec<PropertyRecord>, pois: Vec<Poi>, roads: Roads, truth: Vec<RecordTruth>) -> SynthData {
    let outlier_ids = truth.iter().filter(|t| t.outlier).map(|t| t.id.clone()).collect();
    SynthData { records, pois, roads, truth: Truth { spec: spec.clone(), seed, outlier_ids, records: truth } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_columns, pop_std};
    use crate::linmodel::ols_fit;

    #[test]
    fn no_outliers_means_empty_truth_list() {
        let spec = SynthSpec { outlier_fraction: 0.0, ..SynthSpec::land(200) };
        let d = synth_generate(&spec, 1).unwrap();
        assert!(d.truth.outlier_ids.is_empty());
        let spec = SynthSpec { outlier_fraction: 0.0, ..SynthSpec::flats(200) };
        assert!(synth_generate(&spec, 1).unwrap().truth.outlier_ids.is_empty());
        let planted = synth_generate(&SynthSpec::flats(1000), 1).unwrap();
        assert_eq!(planted.truth.outlier_ids.len(), 50);
    }

    #[test]
    fn noiseless_land_trend_is_recovered_by_ols() {
        let mut spec = SynthSpec::land(400);
        spec.outlier_fraction = 0.0;
        spec.land.noise_sd = 0.0;
        spec.land.field.sd = 0.0;
        let d = synth_generate(&spec, 5).unwrap();
        let names: Vec<String> = spec.land.coefficients.keys().cloned().collect();
        let cols: Vec<Vec<f64>> = names
            .iter()
            .map(|k| d.records.iter().map(|r| if k == "area" { r.area } else { r.attr_f64(k).unwrap() }).collect())
            .collect();
        let y: Vec<f64> = d.records.iter().map(|r| r.psmp().ln()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let fit = ols_fit(&from_columns(&refs), &y, &names).unwrap();
        assert!((fit.intercept - spec.land.intercept).abs() < 1e-6 * spec.land.intercept);
        for (k, b) in names.iter().zip(&fit.coefficients) {
            let truth = spec.land.coefficients[k];
            assert!((b - truth).abs() < 1e-6 * truth.abs(), "{k}: {b} vs {truth}");
        }
    }

    #[test]
    fn same_seed_same_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec::land(150);
        let a = synth_generate(&spec, 9).unwrap();
        let b = synth_generate(&spec, 9).unwrap();
        assert_eq!(a, b);
        let pa = a.write_to_dir(&dir.path().join("a")).unwrap();
        let pb = b.write_to_dir(&dir.path().join("b")).unwrap();
        assert_eq!(pa.len(), 5);
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
        assert_ne!(synth_generate(&spec, 10).unwrap().records, a.records);
    }

    #[test]
    fn field_has_requested_spread_and_correlation() {
        let spec = FieldSpec { sd: 0.3, range_m: 2000.0, n_features: 2000 };
        let mut r = rng::rng(3);
        let pts: Vec<[f64; 2]> = (0..4000).map(|_| uniform_point(&mut r, 50_000.0)).collect();
        let mut sds = Vec::new();
        let mut corr_near = Vec::new();
        for s in 0..6 {
            let f = GaussianField::new(&spec, s);
            let v: Vec<f64> = pts.iter().map(|p| f.at(*p)).collect();
            sds.push(pop_std(&v));
            // correlation at lag = range should be near exp(−1)
            let a: Vec<f64> = pts.iter().map(|p| f.at(*p)).collect();
            let b: Vec<f64> = pts.iter().map(|p| f.at([p[0] + 2000.0, p[1]])).collect();
            corr_near.push(crate::linalg::pearson(&a, &b).unwrap());
        }
        let sd = sds.iter().sum::<f64>() / 6.0;
        let c = corr_near.iter().sum::<f64>() / 6.0;
        assert!((sd - 0.3).abs() < 0.05, "sd {sd}");
        assert!((c - (-1.0f64).exp()).abs() < 0.1, "corr {c}");
    }

    #[test]
    fn flats_structure() {
        let d = synth_generate(&SynthSpec { outlier_fraction: 0.0, ..SynthSpec::flats(2000) }, 2).unwrap();
        let genuine_min = d.records.iter().map(|r| r.psmp()).fold(f64::INFINITY, f64::min);
        assert!(genuine_min > 100_000.0, "{genuine_min}");
        let steps = d.truth.records.iter().filter(|t| t.step).count();
        assert!(steps > 200 && steps < 800, "{steps}");
        // the step is constant within a district and era
        let mut by_group: BTreeMap<(i64, i64), bool> = BTreeMap::new();
        for (r, t) in d.records.iter().zip(&d.truth.records) {
            let key = (r.attr_f64("district").unwrap() as i64, r.attr_f64("year_built").unwrap() as i64 / 10);
            assert_eq!(*by_group.entry(key).or_insert(t.step), t.step);
        }
    }
}
