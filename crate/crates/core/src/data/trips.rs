use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One raw trip row. `pickup_time` is UTC seconds since the epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub pickup_time: i64,
    pub pickup_lat: f64,
    pub pickup_lon: f64,
    pub dropoff_lat: f64,
    pub dropoff_lon: f64,
    pub passengers: u32,
}

impl TripRecord {
    /// UTC calendar date of the pickup; this decides the demand day.
    pub fn pickup_date(&self) -> NaiveDate {
        DateTime::<Utc>::from_timestamp(self.pickup_time, 0)
            .map(|t| t.date_naive())
            .unwrap_or(NaiveDate::MIN)
    }
}

/// Column names for each required trip field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripSchema {
    pub pickup_time: String,
    pub pickup_lat: String,
    pub pickup_lon: String,
    pub dropoff_lat: String,
    pub dropoff_lon: String,
    pub passengers: String,
}

impl Default for TripSchema {
    fn default() -> Self {
        TripSchema {
            pickup_time: "pickup_datetime".into(),
            pickup_lat: "pickup_latitude".into(),
            pickup_lon: "pickup_longitude".into(),
            dropoff_lat: "dropoff_latitude".into(),
            dropoff_lon: "dropoff_longitude".into(),
            passengers: "passenger_count".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total_rows: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Rejection reason -> row count.
    pub reasons: BTreeMap<String, usize>,
}

impl IngestReport {
    fn reject(&mut self, reason: &str) {
        self.rejected += 1;
        *self.reasons.entry(reason.to_string()).or_default() += 1;
    }
}

/// Accepts epoch seconds, RFC 3339, and a few common naive layouts (read as UTC).
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.timestamp());
    }
    let naive = raw.strip_suffix('Z').unwrap_or(raw);
    const LAYOUTS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ];
    LAYOUTS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(naive, f).ok())
        .map(|t| t.and_utc().timestamp())
}

struct Columns {
    time: usize,
    plat: usize,
    plon: usize,
    dlat: usize,
    dlon: usize,
    pax: usize,
}

impl Columns {
    fn resolve(header: &csv::StringRecord, schema: &TripSchema) -> Result<Self> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        Ok(Columns {
            time: find(&schema.pickup_time)?,
            plat: find(&schema.pickup_lat)?,
            plon: find(&schema.pickup_lon)?,
            dlat: find(&schema.dropoff_lat)?,
            dlon: find(&schema.dropoff_lon)?,
            pax: find(&schema.passengers)?,
        })
    }
}

fn parse_row(row: &csv::StringRecord, cols: &Columns) -> std::result::Result<TripRecord, &'static str> {
    let field = |i: usize| row.get(i).map(str::trim).ok_or("missing field");
    let coord = |i: usize| -> std::result::Result<f64, &'static str> {
        field(i)?
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or("unparseable coordinate")
    };
    let pickup_time = parse_timestamp(field(cols.time)?).ok_or("unparseable timestamp")?;
    let rec = TripRecord {
        pickup_time,
        pickup_lat: coord(cols.plat)?,
        pickup_lon: coord(cols.plon)?,
        dropoff_lat: coord(cols.dlat)?,
        dropoff_lon: coord(cols.dlon)?,
        passengers: field(cols.pax)?
            .parse::<u32>()
            .map_err(|_| "invalid passenger count")?,
    };
    if !(-90.0..=90.0).contains(&rec.pickup_lat) || !(-90.0..=90.0).contains(&rec.dropoff_lat) {
        return Err("latitude out of range");
    }
    if !(-180.0..=180.0).contains(&rec.pickup_lon) || !(-180.0..=180.0).contains(&rec.dropoff_lon)
    {
        return Err("longitude out of range");
    }
    Ok(rec)
}

/// Reads trip rows from a headed CSV file. Malformed rows are skipped and
/// counted; only an unreadable file or a missing required column is fatal.
/// Output is sorted by pickup time (stable), so row order in the file does
/// not leak into downstream results.
pub fn ingest_trips(path: &Path, schema: &TripSchema) -> Result<(Vec<TripRecord>, IngestReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema).map_err(|e| match e {
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn ingest_reader<R: std::io::Read>(
    reader: R,
    schema: &TripSchema,
) -> Result<(Vec<TripRecord>, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let csv_err = |source| Error::Csv {
        path: "<reader>".into(),
        source,
    };
    let header = rdr.headers().map_err(csv_err)?.clone();
    let mut report = IngestReport::default();
    let mut trips = Vec::new();
    if header.is_empty() {
        return Ok((trips, report));
    }
    let cols = Columns::resolve(&header, schema)?;

    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                report.total_rows += 1;
                match parse_row(&row, &cols) {
                    Ok(t) => {
                        report.accepted += 1;
                        trips.push(t);
                    }
                    Err(reason) => report.reject(reason),
                }
            }
            // A row that is not even valid CSV (e.g. bad UTF-8) is skipped too.
            Err(e) if !matches!(e.kind(), csv::ErrorKind::Io(_)) => {
                report.total_rows += 1;
                report.reject("malformed csv row");
            }
            Err(e) => return Err(csv_err(e)),
        }
    }
    trips.sort_by_key(|t| t.pickup_time);
    Ok((trips, report))
}

/// Writes trips with the default schema's column names (used by the
/// synthetic generator and tests).
pub fn write_trips_csv<W: std::io::Write>(writer: W, trips: &[TripRecord]) -> Result<()> {
    let schema = TripSchema::default();
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |source| Error::Csv {
        path: "<writer>".into(),
        source,
    };
    w.write_record([
        &schema.pickup_time,
        &schema.pickup_lat,
        &schema.pickup_lon,
        &schema.dropoff_lat,
        &schema.dropoff_lon,
        &schema.passengers,
    ])
    .map_err(csv_err)?;
    for t in trips {
        let stamp = DateTime::<Utc>::from_timestamp(t.pickup_time, 0)
            .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
            .unwrap_or_default();
        w.write_record([
            stamp,
            format!("{:.6}", t.pickup_lat),
            format!("{:.6}", t.pickup_lon),
            format!("{:.6}", t.dropoff_lat),
            format!("{:.6}", t.dropoff_lon),
            t.passengers.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}
