use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::graph::RoadGraph;
use super::network::{development_of_road_network, SurfaceOptions};
use super::pca::pca_first_component;
use super::projection::{centroid, project};
use super::spatial::{count_within_radius, nearest_distance, ratio_feature};
use crate::dataset::{ColumnKind, ColumnMeta, ExpectedSign, FeatureTable, PropertyRecord, Segment, SpatialTable};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Point of interest with a category label (cafe, school, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub category: String,
    pub lon: f64,
    pub lat: f64,
}

pub fn parse_pois_csv(bytes: &[u8]) -> Result<Vec<Poi>> {
    csv::Reader::from_reader(bytes).deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// GeoJSON FeatureCollection of Points with a `category` property.
pub fn parse_pois_geojson(bytes: &[u8]) -> Result<Vec<Poi>> {
    let doc: serde_json::Value = serde_json::from_slice(bytes)?;
    let features = doc
        .get("features")
        .and_then(|f| f.as_array())
        .ok_or_else(|| Error::invalid("GeoJSON without a features array"))?;
    features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let coords = f
                .pointer("/geometry/coordinates")
                .and_then(|c| c.as_array())
                .filter(|c| c.len() >= 2)
                .ok_or_else(|| Error::invalid(format!("feature {i}: not a point")))?;
            let category = f
                .pointer("/properties/category")
                .and_then(|c| c.as_str())
                .ok_or_else(|| Error::invalid(format!("feature {i}: missing category")))?;
            Ok(Poi {
                category: category.to_string(),
                lon: coords[0].as_f64().unwrap_or(f64::NAN),
                lat: coords[1].as_f64().unwrap_or(f64::NAN),
            })
        })
        .collect()
}

pub fn write_pois_csv<W: Write>(pois: &[Poi], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for p in pois {
        wr.serialize(p)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Natural log of price per square meter.
    LogPsmp,
    Psmp,
}

impl TargetKind {
    pub fn default_for(segment: Segment) -> Self {
        match segment {
            Segment::LandParcel => TargetKind::LogPsmp,
            Segment::Flat => TargetKind::Psmp,
        }
    }
}

/// One feature construction step. Later steps may refer to the names
/// produced by earlier ones, to record fields (`area`) or to attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureDef {
    /// Numeric attribute (or `area`) taken as is.
    Attribute {
        attribute: String,
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        sign: Option<ExpectedSign>,
    },
    /// Binary indicators for a categorical attribute; the reference level
    /// (first in sorted order unless given) gets no column.
    OneHot {
        attribute: String,
        #[serde(default)]
        reference: Option<String>,
    },
    /// First-floor and last-floor indicators.
    FloorPosition { storey: String, storeys_total: String },
    NearestPoi {
        name: String,
        category: String,
        #[serde(default)]
        sign: Option<ExpectedSign>,
    },
    PoiCount {
        name: String,
        category: String,
        radius_m: f64,
        #[serde(default)]
        sign: Option<ExpectedSign>,
    },
    Ratio {
        name: String,
        numerator: String,
        denominator: String,
        #[serde(default)]
        sign: Option<ExpectedSign>,
    },
    /// First principal component of the standardized inputs, which are
    /// then dropped from the table unless `keep_inputs`.
    Pca {
        name: String,
        inputs: Vec<String>,
        #[serde(default)]
        keep_inputs: bool,
        #[serde(default)]
        sign: Option<ExpectedSign>,
    },
    RoadNetwork {
        name: String,
        #[serde(default)]
        surface: SurfaceOptions,
        #[serde(default)]
        sign: Option<ExpectedSign>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub target: Option<TargetKind>,
    /// Projection origin (lon, lat); the record centroid when unset.
    pub origin: Option<[f64; 2]>,
    pub definitions: Vec<FeatureDef>,
}

fn attr(name: &str, sign: ExpectedSign) -> FeatureDef {
    FeatureDef::Attribute { attribute: name.into(), name: None, sign: Some(sign) }
}

impl FeatureConfig {
    /// Feature set used for land parcels by the synthetic generator.
    pub fn land_default() -> Self {
        use ExpectedSign::*;
        FeatureConfig {
            target: Some(TargetKind::LogPsmp),
            origin: None,
            definitions: vec![
                attr("area", Negative),
                attr("dist_water_m", Negative),
                attr("dist_coast_m", Negative),
                FeatureDef::Pca {
                    name: "social_infrastructure".into(),
                    inputs: vec!["dist_hospital_m".into(), "dist_school_m".into(), "dist_nursery_m".into()],
                    keep_inputs: false,
                    sign: Some(Negative),
                },
                FeatureDef::Ratio {
                    name: "population_to_city_distance".into(),
                    numerator: "settlement_population".into(),
                    denominator: "dist_city_m".into(),
                    sign: Some(Positive),
                },
                FeatureDef::PoiCount {
                    name: "cafes_1km".into(),
                    category: "cafe".into(),
                    radius_m: 1000.0,
                    sign: Some(Positive),
                },
                FeatureDef::RoadNetwork {
                    name: "road_network_development".into(),
                    surface: SurfaceOptions::default(),
                    sign: Some(Positive),
                },
            ],
        }
    }

    /// Feature set used for flats by the synthetic generator.
    pub fn flat_default() -> Self {
        use ExpectedSign::*;
        FeatureConfig {
            target: Some(TargetKind::Psmp),
            origin: None,
            definitions: vec![
                attr("area", Negative),
                attr("year_built", Positive),
                attr("storeys_total", Unconstrained),
                attr("dist_town_hall_m", Negative),
                attr("dist_coast_m", Negative),
                FeatureDef::FloorPosition { storey: "storey".into(), storeys_total: "storeys_total".into() },
                FeatureDef::OneHot { attribute: "wall_material".into(), reference: None },
            ],
        }
    }
}

/// Auxiliary layers feature construction may draw on.
#[derive(Debug, Clone, Default)]
pub struct FeatureInputs<'a> {
    pub pois: &'a [Poi],
    pub graph: Option<&'a RoadGraph>,
}

struct Column {
    meta: ColumnMeta,
    values: Vec<f64>,
}

fn lookup(records: &[PropertyRecord], built: &[Column], name: &str) -> Result<Vec<f64>> {
    if let Some(c) = built.iter().find(|c| c.meta.name == name) {
        return Ok(c.values.clone());
    }
    if name == "area" {
        return Ok(records.iter().map(|r| r.area).collect());
    }
    records
        .iter()
        .map(|r| {
            r.attr_f64(name)
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MissingFeature(format!("{name} (record {})", r.id)))
        })
        .collect()
}

fn poi_xy(pois: &[Poi], category: &str, origin: [f64; 2]) -> Vec<[f64; 2]> {
    let ll: Vec<[f64; 2]> = pois.iter().filter(|p| p.category == category).map(|p| [p.lon, p.lat]).collect();
    project(&ll, origin)
}

fn meta(name: &str, kind: ColumnKind, sign: Option<ExpectedSign>) -> ColumnMeta {
    ColumnMeta {
        name: name.to_string(),
        kind,
        expected_sign: sign.unwrap_or(ExpectedSign::Unconstrained),
        mean: None,
        stddev: None,
    }
}

/// Builds the feature table for one segment. Returns raw (unstandardized)
/// columns in definition order together with ids and projected coordinates.
pub fn build_features(
    records: &[PropertyRecord],
    inputs: &FeatureInputs,
    config: &FeatureConfig,
    seed: u64,
) -> Result<SpatialTable> {
    let segment = records.first().map(|r| r.segment).unwrap_or(Segment::LandParcel);
    let lonlat: Vec<[f64; 2]> = records.iter().map(|r| [r.lon, r.lat]).collect();
    let origin = config.origin.unwrap_or_else(|| centroid(&lonlat));
    let xy = project(&lonlat, origin);
    let mut cols: Vec<Column> = Vec::new();
    let mut dropped: BTreeSet<String> = BTreeSet::new();

    for def in &config.definitions {
        match def {
            FeatureDef::Attribute { attribute, name, sign } => {
                let values = lookup(records, &cols, attribute)?;
                let name = name.as_deref().unwrap_or(attribute);
                cols.push(Column { meta: meta(name, ColumnKind::Continuous, *sign), values });
            }
            FeatureDef::OneHot { attribute, reference } => {
                let text: Vec<String> = records
                    .iter()
                    .map(|r| {
                        r.attributes
                            .get(attribute)
                            .map(|v| v.as_text())
                            .ok_or_else(|| Error::MissingFeature(format!("{attribute} (record {})", r.id)))
                    })
                    .collect::<Result<_>>()?;
                let levels: BTreeSet<&str> = text.iter().map(String::as_str).collect();
                let reference = reference.clone().or_else(|| levels.iter().next().map(|s| s.to_string()));
                for level in levels {
                    if Some(level) == reference.as_deref() {
                        continue;
                    }
                    let values = text.iter().map(|t| if t == level { 1.0 } else { 0.0 }).collect();
                    let name = format!("{attribute}={level}");
                    cols.push(Column { meta: meta(&name, ColumnKind::Binary, None), values });
                }
            }
            FeatureDef::FloorPosition { storey, storeys_total } => {
                let s = lookup(records, &cols, storey)?;
                let t = lookup(records, &cols, storeys_total)?;
                let first = s.iter().map(|v| if *v <= 1.0 { 1.0 } else { 0.0 }).collect();
                let last = s.iter().zip(&t).map(|(a, b)| if a >= b { 1.0 } else { 0.0 }).collect();
                cols.push(Column { meta: meta("first_floor", ColumnKind::Binary, Some(ExpectedSign::Negative)), values: first });
                cols.push(Column { meta: meta("last_floor", ColumnKind::Binary, Some(ExpectedSign::Negative)), values: last });
            }
            FeatureDef::NearestPoi { name, category, sign } => {
                let values = nearest_distance(&xy, &poi_xy(inputs.pois, category, origin))
                    .map_err(|e| Error::invalid(format!("{name}: {e}")))?;
                cols.push(Column { meta: meta(name, ColumnKind::Continuous, *sign), values });
            }
            FeatureDef::PoiCount { name, category, radius_m, sign } => {
                let values = count_within_radius(&xy, &poi_xy(inputs.pois, category, origin), *radius_m)?
                    .into_iter()
                    .map(|c| c as f64)
                    .collect();
                cols.push(Column { meta: meta(name, ColumnKind::Continuous, *sign), values });
            }
            FeatureDef::Ratio { name, numerator, denominator, sign } => {
                let values = ratio_feature(&lookup(records, &cols, numerator)?, &lookup(records, &cols, denominator)?)?;
                cols.push(Column { meta: meta(name, ColumnKind::Continuous, *sign), values });
            }
            FeatureDef::Pca { name, inputs: names, keep_inputs, sign } => {
                let raw: Vec<Vec<f64>> = names.iter().map(|n| lookup(records, &cols, n)).collect::<Result<_>>()?;
                let z = Matrix::from_fn(records.len(), raw.len(), |i, j| {
                    let c = &raw[j];
                    let sd = linalg::pop_std(c);
                    if sd > 0.0 {
                        (c[i] - linalg::mean(c)) / sd
                    } else {
                        0.0
                    }
                });
                let pc = pca_first_component(&z)?;
                log::info!(
                    "{name}: PCA over {} inputs explains {:.3} of variance",
                    names.len(),
                    pc.explained_variance_ratio
                );
                if !keep_inputs {
                    dropped.extend(names.iter().cloned());
                }
                cols.push(Column { meta: meta(name, ColumnKind::Continuous, *sign), values: pc.scores });
            }
            FeatureDef::RoadNetwork { name, surface, sign } => {
                let graph = inputs.graph.ok_or_else(|| Error::invalid(format!("{name}: no road graph supplied")))?;
                let values = development_of_road_network(graph, &xy, origin, surface, seed)?;
                cols.push(Column { meta: meta(name, ColumnKind::Continuous, *sign), values });
            }
        }
    }
    cols.retain(|c| !dropped.contains(&c.meta.name));
    let mut seen = BTreeSet::new();
    for c in &cols {
        if !seen.insert(c.meta.name.clone()) {
            return Err(Error::invalid(format!("feature `{}` defined twice", c.meta.name)));
        }
    }
    let target_kind = config.target.unwrap_or(TargetKind::default_for(segment));
    let target: Vec<f64> = records
        .iter()
        .map(|r| match target_kind {
            TargetKind::LogPsmp => r.psmp().ln(),
            TargetKind::Psmp => r.psmp(),
        })
        .collect();
    let matrix = Matrix::from_fn(records.len(), cols.len(), |i, j| cols[j].values[i]);
    let table = FeatureTable::new(matrix, target, cols.into_iter().map(|c| c.meta).collect())?;
    Ok(SpatialTable { ids: records.iter().map(|r| r.id.clone()).collect(), xy, table })
}

/// Writes `id,x,y,target,<features...>`.
pub fn write_table<W: Write>(t: &SpatialTable, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string(), "x".into(), "y".into(), "target".into()];
    header.extend(t.table.names());
    wr.write_record(&header)?;
    for i in 0..t.len() {
        let mut row = vec![t.ids[i].clone(), t.xy[i][0].to_string(), t.xy[i][1].to_string(), t.table.target[i].to_string()];
        row.extend((0..t.table.n_cols()).map(|j| t.table.matrix[(i, j)].to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table`]; column metadata comes from the
/// companion JSON, matched by name.
pub fn read_table(csv_bytes: &[u8], columns: &[ColumnMeta]) -> Result<SpatialTable> {
    let mut rd = csv::Reader::from_reader(csv_bytes);
    let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
    if header.len() < 4 || header[..4] != ["id", "x", "y", "target"] {
        return Err(Error::MalformedHeader("feature table must start with id,x,y,target".into()));
    }
    let by_name: BTreeMap<&str, &ColumnMeta> = columns.iter().map(|c| (c.name.as_str(), c)).collect();
    let metas: Vec<ColumnMeta> = header[4..]
        .iter()
        .map(|h| by_name.get(h.as_str()).map(|m| (*m).clone()).unwrap_or_else(|| ColumnMeta::continuous(h.clone())))
        .collect();
    let (mut ids, mut xy, mut target, mut rows) = (vec![], vec![], vec![], vec![]);
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::invalid(format!("feature table line {}: bad value in `{}`", line + 2, header[k])))
        };
        ids.push(rec.get(0).unwrap_or_default().to_string());
        xy.push([num(1)?, num(2)?]);
        target.push(num(3)?);
        rows.push((4..header.len()).map(num).collect::<Result<Vec<f64>>>()?);
    }
    let matrix = Matrix::from_fn(rows.len(), metas.len(), |i, j| rows[i][j]);
    Ok(SpatialTable { ids, xy, table: FeatureTable::new(matrix, target, metas)? })
}
