//! Record ingest, the price-per-square-meter target, feature tables,
//! standardization and train/test splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    LandParcel,
    Flat,
}

impl Segment {
    pub fn as_str(self) -> &'static str {
        match self {
            Segment::LandParcel => "land_parcel",
            Segment::Flat => "flat",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "land_parcel" | "land" => Some(Segment::LandParcel),
            "flat" | "flats" => Some(Segment::Flat),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Offer,
    Deal,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Offer => "offer",
            Source::Deal => "deal",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "offer" => Some(Source::Offer),
            "deal" => Some(Source::Deal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Num(f64),
    Text(String),
}

impl AttrValue {
    fn parse(s: &str) -> Self {
        let t = s.trim();
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => AttrValue::Num(v),
            _ => AttrValue::Text(t.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Num(v) => Some(*v),
            AttrValue::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> String {
        match self {
            AttrValue::Num(v) => format!("{v}"),
            AttrValue::Text(s) => s.clone(),
        }
    }
}

/// One offer or deal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub id: String,
    pub segment: Segment,
    pub source: Source,
    pub lon: f64,
    pub lat: f64,
    /// m²
    pub area: f64,
    /// RUB
    pub total_price: f64,
    pub attributes: BTreeMap<String, AttrValue>,
}

impl PropertyRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.area > 0.0) {
            return Err(format!("area must be positive, got {}", self.area));
        }
        if !(self.total_price > 0.0) {
            return Err(format!("total_price must be positive, got {}", self.total_price));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(format!("lat {} out of range", self.lat));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(format!("lon {} out of range", self.lon));
        }
        Ok(())
    }

    pub fn attr_f64(&self, name: &str) -> Option<f64> {
        self.attributes.get(name).and_then(AttrValue::as_f64)
    }

    pub fn psmp(&self) -> f64 {
        compute_psmp(self)
    }
}

/// Maps input column names onto record fields.
///
/// Keys: `id`, `segment`, `source`, `lon`, `lat`, `area`, `total_price`
/// (each the name of the input column), `attributes` (input columns copied
/// into the attribute map; empty means every unmapped column), and optional
/// `default_segment` / `default_source` used when the corresponding column is
/// absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaConfig {
    pub id: String,
    pub segment: String,
    pub source: String,
    pub lon: String,
    pub lat: String,
    pub area: String,
    pub total_price: String,
    pub attributes: Vec<String>,
    pub default_segment: Option<Segment>,
    pub default_source: Option<Source>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            id: "id".into(),
            segment: "segment".into(),
            source: "source".into(),
            lon: "lon".into(),
            lat: "lat".into(),
            area: "area".into(),
            total_price: "total_price".into(),
            attributes: Vec::new(),
            default_segment: None,
            default_source: None,
        }
    }
}

/// A row that could not become a record. `line` is 1-based in the input
/// file (the header is line 1); for GeoJSON it is the feature's 1-based index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedRecords {
    pub records: Vec<PropertyRecord>,
    pub rejects: Vec<Rejection>,
}

struct FieldLookup<'a> {
    get: Box<dyn Fn(&str) -> Option<String> + 'a>,
}

fn build_record(
    f: &FieldLookup<'_>,
    schema: &SchemaConfig,
    attribute_keys: &[String],
) -> std::result::Result<PropertyRecord, String> {
    let req = |col: &str| -> std::result::Result<String, String> {
        match (f.get)(col) {
            Some(v) if !v.trim().is_empty() => Ok(v),
            _ => Err(format!("missing value for `{col}`")),
        }
    };
    let num = |col: &str| -> std::result::Result<f64, String> {
        let raw = req(col)?;
        raw.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("cannot parse `{col}` value `{raw}` as a number"))
    };
    let segment = match (f.get)(&schema.segment) {
        Some(s) if !s.trim().is_empty() => {
            Segment::parse(&s).ok_or_else(|| format!("unknown segment `{s}`"))?
        }
        _ => schema.default_segment.ok_or("missing segment")?,
    };
    let source = match (f.get)(&schema.source) {
        Some(s) if !s.trim().is_empty() => {
            Source::parse(&s).ok_or_else(|| format!("unknown source `{s}`"))?
        }
        _ => schema.default_source.ok_or("missing source")?,
    };
    let mut attributes = BTreeMap::new();
    for key in attribute_keys {
        if let Some(v) = (f.get)(key) {
            if !v.trim().is_empty() {
                attributes.insert(key.clone(), AttrValue::parse(&v));
            }
        }
    }
    let rec = PropertyRecord {
        id: req(&schema.id)?.trim().to_string(),
        segment,
        source,
        lon: num(&schema.lon)?,
        lat: num(&schema.lat)?,
        area: num(&schema.area)?,
        total_price: num(&schema.total_price)?,
        attributes,
    };
    rec.validate()?;
    Ok(rec)
}

impl SchemaConfig {
    fn core_columns(&self) -> [&str; 7] {
        [
            &self.id,
            &self.segment,
            &self.source,
            &self.lon,
            &self.lat,
            &self.area,
            &self.total_price,
        ]
    }

    fn attribute_keys(&self, available: &[String]) -> Vec<String> {
        if self.attributes.is_empty() {
            let core = self.core_columns();
            available
                .iter()
                .filter(|c| !core.contains(&c.as_str()))
                .cloned()
                .collect()
        } else {
            self.attributes.clone()
        }
    }
}

/// Parses a headed CSV into records. Rows that fail are reported with their
/// line number; a header missing required columns is fatal.
pub fn parse_records(csv_bytes: &[u8], schema: &SchemaConfig) -> Result<ParsedRecords> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(csv_bytes);
    let headers: Vec<String> = match rdr.headers() {
        Ok(h) => h.iter().map(|s| s.trim().to_string()).collect(),
        Err(e) => return Err(Error::MalformedHeader(e.to_string())),
    };
    if headers.iter().all(String::is_empty) {
        if csv_bytes.iter().all(u8::is_ascii_whitespace) {
            return Ok(ParsedRecords::default());
        }
        return Err(Error::MalformedHeader("empty header row".into()));
    }
    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(h) {
            return Err(Error::MalformedHeader(format!("duplicate column `{h}`")));
        }
    }
    for (col, optional) in [
        (&schema.id, false),
        (&schema.lon, false),
        (&schema.lat, false),
        (&schema.area, false),
        (&schema.total_price, false),
        (&schema.segment, schema.default_segment.is_some()),
        (&schema.source, schema.default_source.is_some()),
    ] {
        if !optional && !headers.contains(col) {
            return Err(Error::MalformedHeader(format!("required column `{col}` not found")));
        }
    }
    let attribute_keys = schema.attribute_keys(&headers);
    for key in &attribute_keys {
        if !headers.contains(key) {
            return Err(Error::MalformedHeader(format!("attribute column `{key}` not found")));
        }
    }
    let index: BTreeMap<&str, usize> =
        headers.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();

    let mut out = ParsedRecords::default();
    for (row_no, row) in rdr.records().enumerate() {
        let line = row
            .as_ref()
            .ok()
            .and_then(|r| r.position().map(|p| p.line() as usize))
            .unwrap_or(row_no + 2);
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.rejects.push(Rejection { line, reason: e.to_string() });
                continue;
            }
        };
        let lookup = FieldLookup {
            get: Box::new(|col: &str| index.get(col).and_then(|&i| row.get(i)).map(str::to_string)),
        };
        match build_record(&lookup, schema, &attribute_keys) {
            Ok(r) => out.records.push(r),
            Err(reason) => out.rejects.push(Rejection { line, reason }),
        }
    }
    Ok(out)
}

/// Parses a GeoJSON FeatureCollection of Points; `lon`/`lat` come from the
/// geometry and the remaining fields from `properties` via the schema.
pub fn parse_geojson(bytes: &[u8], schema: &SchemaConfig) -> Result<ParsedRecords> {
    let doc: serde_json::Value = serde_json::from_slice(bytes)?;
    if doc.get("type").and_then(|t| t.as_str()) != Some("FeatureCollection") {
        return Err(Error::MalformedHeader("expected a GeoJSON FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(|f| f.as_array())
        .ok_or_else(|| Error::MalformedHeader("FeatureCollection without `features`".into()))?;
    let mut out = ParsedRecords::default();
    for (i, feat) in features.iter().enumerate() {
        let line = i + 1;
        let coords = feat
            .get("geometry")
            .filter(|g| g.get("type").and_then(|t| t.as_str()) == Some("Point"))
            .and_then(|g| g.get("coordinates"))
            .and_then(|c| c.as_array());
        let Some(coords) = coords.filter(|c| c.len() >= 2) else {
            out.rejects.push(Rejection { line, reason: "geometry is not a Point".into() });
            continue;
        };
        let empty = serde_json::Map::new();
        let props = feat.get("properties").and_then(|p| p.as_object()).unwrap_or(&empty);
        let keys: Vec<String> = props.keys().cloned().collect();
        let attribute_keys = schema.attribute_keys(&keys);
        let lon = coords[0].as_f64();
        let lat = coords[1].as_f64();
        let lookup = FieldLookup {
            get: Box::new(|col: &str| {
                if col == schema.lon {
                    return lon.map(|v| v.to_string());
                }
                if col == schema.lat {
                    return lat.map(|v| v.to_string());
                }
                props.get(col).and_then(|v| match v {
                    serde_json::Value::String(s) => Some(s.clone()),
                    serde_json::Value::Number(n) => Some(n.to_string()),
                    serde_json::Value::Bool(b) => Some(b.to_string()),
                    _ => None,
                })
            }),
        };
        match build_record(&lookup, schema, &attribute_keys) {
            Ok(r) => out.records.push(r),
            Err(reason) => out.rejects.push(Rejection { line, reason }),
        }
    }
    Ok(out)
}

/// Writes records in the canonical column layout: the seven core fields
/// followed by the sorted union of attribute names.
pub fn write_records<W: Write>(records: &[PropertyRecord], w: W) -> Result<()> {
    let attrs: BTreeSet<&String> = records.iter().flat_map(|r| r.attributes.keys()).collect();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["id", "segment", "source", "lon", "lat", "area", "total_price"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(attrs.iter().map(|s| s.to_string()));
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.id.clone(),
            r.segment.as_str().to_string(),
            r.source.as_str().to_string(),
            format!("{}", r.lon),
            format!("{}", r.lat),
            format!("{}", r.area),
            format!("{}", r.total_price),
        ];
        for a in &attrs {
            row.push(r.attributes.get(*a).map(AttrValue::as_text).unwrap_or_default());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_rejects<W: Write>(rejects: &[Rejection], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["line", "reason"])?;
    for r in rejects {
        wtr.write_record([r.line.to_string(), r.reason.clone()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Price per square meter: total price over area.
pub fn compute_psmp(record: &PropertyRecord) -> f64 {
    record.total_price / record.area
}

/// Elementwise natural log; the first non-positive value is an error.
pub fn log_transform(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| if v > 0.0 { Ok(v.ln()) } else { Err(Error::NonPositive { index: i, value: v }) })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedSign {
    Positive,
    Negative,
    Unconstrained,
}

impl ExpectedSign {
    pub fn admits(self, coef: f64) -> bool {
        match self {
            ExpectedSign::Positive => coef > 0.0,
            ExpectedSign::Negative => coef < 0.0,
            ExpectedSign::Unconstrained => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    pub expected_sign: ExpectedSign,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnMeta {
            name: name.into(),
            kind: ColumnKind::Continuous,
            expected_sign: ExpectedSign::Unconstrained,
            mean: None,
            stddev: None,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        ColumnMeta { kind: ColumnKind::Binary, ..ColumnMeta::continuous(name) }
    }

    pub fn with_sign(mut self, sign: ExpectedSign) -> Self {
        self.expected_sign = sign;
        self
    }
}

/// Aligned feature matrix, target and per-column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub matrix: Matrix,
    pub target: Vec<f64>,
    pub columns: Vec<ColumnMeta>,
}

impl FeatureTable {
    pub fn new(matrix: Matrix, target: Vec<f64>, columns: Vec<ColumnMeta>) -> Result<Self> {
        if matrix.nrows() != target.len() {
            return Err(Error::LengthMismatch { expected: matrix.nrows(), got: target.len() });
        }
        if matrix.ncols() != columns.len() {
            return Err(Error::LengthMismatch { expected: matrix.ncols(), got: columns.len() });
        }
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("target row {i} is not finite")));
        }
        for (j, meta) in columns.iter().enumerate() {
            for (i, v) in matrix.column(j).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("missing value in `{}` row {i}", meta.name)));
                }
                if meta.kind == ColumnKind::Binary && *v != 0.0 && *v != 1.0 {
                    return Err(Error::invalid(format!(
                        "binary column `{}` has value {v} at row {i}",
                        meta.name
                    )));
                }
            }
        }
        Ok(FeatureTable { matrix, target, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.column(j).iter().copied().collect()
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureTable> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::MissingFeature(n.clone())))
            .collect::<Result<_>>()?;
        Ok(self.select_indices(&idx))
    }

    pub fn select_indices(&self, idx: &[usize]) -> FeatureTable {
        let matrix = Matrix::from_fn(self.n_rows(), idx.len(), |i, k| self.matrix[(i, idx[k])]);
        let columns = idx.iter().map(|&j| self.columns[j].clone()).collect();
        FeatureTable { matrix, target: self.target.clone(), columns }
    }

    pub fn rows(&self, rows: &[usize]) -> FeatureTable {
        let matrix = Matrix::from_fn(rows.len(), self.n_cols(), |i, j| self.matrix[(rows[i], j)]);
        let target = rows.iter().map(|&i| self.target[i]).collect();
        FeatureTable { matrix, target, columns: self.columns.clone() }
    }

    pub fn with_target(&self, target: Vec<f64>) -> Result<FeatureTable> {
        FeatureTable::new(self.matrix.clone(), target, self.columns.clone())
    }
}

/// Per-column affine map `z = (x − mean) / stddev`. Binary columns carry
/// mean 0 and stddev 1 so the map is the identity on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

impl Scaler {
    pub fn apply(&self, x: &Matrix) -> Matrix {
        Matrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.means[j]) / self.stddevs[j])
    }

    pub fn inverse(&self, z: &Matrix) -> Matrix {
        Matrix::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] * self.stddevs[j] + self.means[j])
    }
}

/// Z-scores continuous columns with the population standard deviation;
/// binary columns pass through.
pub fn standardize(table: &FeatureTable) -> Result<(FeatureTable, Scaler)> {
    let mut means = Vec::with_capacity(table.n_cols());
    let mut stddevs = Vec::with_capacity(table.n_cols());
    let mut columns = table.columns.clone();
    for (j, meta) in columns.iter_mut().enumerate() {
        match meta.kind {
            ColumnKind::Binary => {
                means.push(0.0);
                stddevs.push(1.0);
            }
            ColumnKind::Continuous => {
                let col = table.column(j);
                let m = linalg::mean(&col);
                let sd = linalg::pop_std(&col);
                if !(sd > 0.0) {
                    return Err(Error::ZeroVariance(meta.name.clone()));
                }
                meta.mean = Some(m);
                meta.stddev = Some(sd);
                means.push(m);
                stddevs.push(sd);
            }
        }
    }
    let scaler = Scaler { names: table.names(), means, stddevs };
    let matrix = scaler.apply(&table.matrix);
    Ok((FeatureTable { matrix, target: table.target.clone(), columns }, scaler))
}

/// Random disjoint partition of `0..n` into sorted train and test index
/// lists of sizes `round(n·f)` and `n − round(n·f)`.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::invalid("split needs at least 2 rows"));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::rng(seed));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Fold label in `0..k` for each of `n` rows; fold sizes differ by at most
/// one.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!("cannot make {k} folds from {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::rng(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

pub fn split(table: &FeatureTable, train_fraction: f64, seed: u64) -> Result<(FeatureTable, FeatureTable)> {
    let (tr, te) = split_indices(table.n_rows(), train_fraction, seed)?;
    Ok((table.rows(&tr), table.rows(&te)))
}

/// A feature table tied to record ids and projected coordinates (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialTable {
    pub ids: Vec<String>,
    pub xy: Vec<[f64; 2]>,
    pub table: FeatureTable,
}

impl SpatialTable {
    pub fn rows(&self, rows: &[usize]) -> SpatialTable {
        SpatialTable {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            xy: rows.iter().map(|&i| self.xy[i]).collect(),
            table: self.table.rows(rows),
        }
    }

    pub fn select(&self, names: &[String]) -> Result<SpatialTable> {
        Ok(SpatialTable { ids: self.ids.clone(), xy: self.xy.clone(), table: self.table.select(names)? })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,segment,source,lon,lat,area,total_price\n";

    #[test]
    fn parses_table_row() {
        let csv = format!("{HEADER}f1,flat,offer,131.9,43.1,17.1,3850000\n");
        let out = parse_records(csv.as_bytes(), &SchemaConfig::default()).unwrap();
        assert!(out.rejects.is_empty());
        let r = &out.records[0];
        assert_eq!(r.area, 17.1);
        assert_eq!(r.total_price, 3_850_000.0);
        assert_eq!(r.segment, Segment::Flat);
        assert_eq!(r.source, Source::Offer);
    }

    #[test]
    fn empty_body_and_bad_cells() {
        let out = parse_records(HEADER.as_bytes(), &SchemaConfig::default()).unwrap();
        assert!(out.records.is_empty() && out.rejects.is_empty());

        let csv = format!("{HEADER}a,flat,deal,131.9,43.1,17.1,100\nb,flat,deal,131.9,43.1,abc,100\n");
        let out = parse_records(csv.as_bytes(), &SchemaConfig::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejects.len(), 1);
        assert_eq!(out.rejects[0].line, 3);
        assert!(out.rejects[0].reason.contains("area"));
    }

    #[test]
    fn invariant_violations_are_rejected() {
        let csv = format!("{HEADER}a,flat,deal,131.9,95,17.1,100\nb,flat,deal,131.9,43,0,100\n");
        let out = parse_records(csv.as_bytes(), &SchemaConfig::default()).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.rejects.len(), 2);
    }

    #[test]
    fn malformed_header_is_fatal() {
        let csv = "id,lon,lat\n1,2,3\n";
        assert!(matches!(
            parse_records(csv.as_bytes(), &SchemaConfig::default()),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn schema_maps_columns_and_attributes() {
        let schema: SchemaConfig = serde_json::from_str(
            r#"{"id":"ID","total_price":"price","attributes":["wall_material","storey"],
                "default_segment":"flat","source":"kind"}"#,
        )
        .unwrap();
        let csv = "ID,kind,lon,lat,area,price,wall_material,storey,ignored\n\
                   x,deal,131.9,43.1,16.8,900000,brick,4,zz\n";
        let out = parse_records(csv.as_bytes(), &schema).unwrap();
        let r = &out.records[0];
        assert_eq!(r.segment, Segment::Flat);
        assert_eq!(r.attributes["wall_material"], AttrValue::Text("brick".into()));
        assert_eq!(r.attr_f64("storey"), Some(4.0));
        assert!(!r.attributes.contains_key("ignored"));
    }

    #[test]
    fn geojson_points() {
        let doc = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","geometry":{"type":"Point","coordinates":[131.9,43.1]},
             "properties":{"id":"g1","segment":"land_parcel","source":"offer","area":600,"total_price":1200000,"zone":"A"}},
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]},"properties":{}}
        ]}"#;
        let out = parse_geojson(doc.as_bytes(), &SchemaConfig::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].lon, 131.9);
        assert_eq!(out.records[0].attributes["zone"], AttrValue::Text("A".into()));
        assert_eq!(out.rejects[0].line, 2);
    }

    #[test]
    fn records_roundtrip_through_canonical_csv() {
        let csv = format!("{HEADER}f1,flat,offer,131.9,43.1,17.1,3850000\n");
        let mut schema = SchemaConfig::default();
        let out = parse_records(csv.as_bytes(), &schema).unwrap();
        let mut buf = Vec::new();
        write_records(&out.records, &mut buf).unwrap();
        schema.attributes.clear();
        let back = parse_records(&buf, &schema).unwrap();
        assert_eq!(back.records, out.records);
    }

    fn rec(price: f64, area: f64) -> PropertyRecord {
        PropertyRecord {
            id: "r".into(),
            segment: Segment::Flat,
            source: Source::Deal,
            lon: 0.0,
            lat: 0.0,
            area,
            total_price: price,
            attributes: BTreeMap::new(),
        }
    }

    #[test]
    fn psmp_examples() {
        assert_eq!(compute_psmp(&rec(3_850_000.0, 17.1)).round(), 225_146.0);
        assert_eq!(compute_psmp(&rec(900_000.0, 16.8)).round(), 53_571.0);
        assert_eq!(compute_psmp(&rec(42.5, 42.5)), 1.0);
    }

    #[test]
    fn log_examples() {
        assert_eq!(log_transform(&[1.0]).unwrap(), vec![0.0]);
        assert!((log_transform(&[std::f64::consts::E]).unwrap()[0] - 1.0).abs() < 1e-15);
        // ln(225146) from a 30-digit reference computation
        let v = log_transform(&[225_146.0]).unwrap()[0];
        assert!((v - 12.324_504_359_638_08).abs() < 1e-12);
        assert!(matches!(
            log_transform(&[1.0, -2.0]),
            Err(Error::NonPositive { index: 1, .. })
        ));
    }

    fn table(cols: Vec<(ColumnMeta, Vec<f64>)>) -> FeatureTable {
        let n = cols[0].1.len();
        let m = Matrix::from_fn(n, cols.len(), |i, j| cols[j].1[i]);
        FeatureTable::new(m, vec![0.0; n], cols.into_iter().map(|c| c.0).collect()).unwrap()
    }

    #[test]
    fn standardize_examples() {
        let t = table(vec![
            (ColumnMeta::continuous("a"), vec![1.0, 2.0, 3.0]),
            (ColumnMeta::binary("b"), vec![0.0, 1.0, 1.0]),
        ]);
        let (z, scaler) = standardize(&t).unwrap();
        let expected = 1.5f64.sqrt();
        assert!((z.matrix[(0, 0)] + expected).abs() < 1e-12);
        assert!(z.matrix[(1, 0)].abs() < 1e-12);
        assert!((z.matrix[(2, 0)] - expected).abs() < 1e-12);
        assert_eq!(z.column(1), vec![0.0, 1.0, 1.0]);
        let back = scaler.inverse(&z.matrix);
        assert!((back - &t.matrix).amax() < 1e-12);

        let (z2, _) = standardize(&z).unwrap();
        assert!((&z2.matrix - &z.matrix).amax() < 1e-10);

        let flat = table(vec![(ColumnMeta::continuous("c"), vec![2.0, 2.0])]);
        assert!(matches!(standardize(&flat), Err(Error::ZeroVariance(c)) if c == "c"));
    }

    #[test]
    fn binary_validation() {
        let m = Matrix::from_column_slice(2, 1, &[0.0, 2.0]);
        assert!(FeatureTable::new(m, vec![0.0; 2], vec![ColumnMeta::binary("b")]).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (tr, te) = split_indices(10, 0.7, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (7, 3));
        assert_eq!(split_indices(10, 0.7, 1).unwrap(), (tr.clone(), te.clone()));
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split_indices(10, 1.0, 1).is_err());
        assert!(split_indices(1, 0.5, 1).is_err());
    }

    #[test]
    fn folds_are_balanced() {
        let f = fold_indices(11, 5, 3).unwrap();
        let mut counts = [0; 5];
        for &k in &f {
            counts[k] += 1;
        }
        assert_eq!(counts.iter().max().unwrap() - counts.iter().min().unwrap(), 1);
        assert_eq!(f, fold_indices(11, 5, 3).unwrap());
        assert!(fold_indices(3, 5, 0).is_err());
    }
}
