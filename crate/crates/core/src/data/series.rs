use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::trips::TripRecord;
use super::zones::ZoneMap;
use crate::error::{Error, Result};

/// What a demand unit counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandUnit {
    #[default]
    Trips,
    Passengers,
}

/// Gap-free daily demand per zone. `values[z][d]` is the demand of zone `z`
/// on `index[d]`; `filled[d]` marks days that had no records and were
/// zero-filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSeries {
    pub zones: Vec<String>,
    pub index: Vec<NaiveDate>,
    pub values: Vec<Vec<f64>>,
    pub filled: Vec<bool>,
}

impl DemandSeries {
    /// Builds a series from day-major rows (`rows[d][z]`), validating
    /// that the index is consecutive and demand nonnegative.
    pub fn from_rows(zones: Vec<String>, index: Vec<NaiveDate>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != index.len() {
            return Err(Error::Shape {
                context: "demand rows vs index",
                expected: index.len(),
                actual: rows.len(),
            });
        }
        let mut values = vec![Vec::with_capacity(index.len()); zones.len()];
        for row in rows {
            if row.len() != zones.len() {
                return Err(Error::Shape {
                    context: "demand row width",
                    expected: zones.len(),
                    actual: row.len(),
                });
            }
            for (z, &v) in row.iter().enumerate() {
                values[z].push(v);
            }
        }
        let series = DemandSeries {
            filled: vec![false; index.len()],
            zones,
            index,
            values,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.index.windows(2) {
            if w[0].succ_opt() != Some(w[1]) {
                return Err(Error::invalid(format!(
                    "demand index is not consecutive between {} and {}",
                    w[0], w[1]
                )));
            }
        }
        if self.values.len() != self.zones.len() || self.filled.len() != self.index.len() {
            return Err(Error::invalid("demand series dimensions disagree"));
        }
        for (z, col) in self.values.iter().enumerate() {
            if col.len() != self.index.len() {
                return Err(Error::invalid(format!("zone {z} has {} days", col.len())));
            }
            if let Some(v) = col.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::invalid(format!("zone {z} has invalid demand {v}")));
            }
        }
        Ok(())
    }

    pub fn zone_count(&self) -> usize {
        self.zones.len()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Demand vector across zones for day position `d`.
    pub fn day(&self, d: usize) -> Vec<f64> {
        self.values.iter().map(|col| col[d]).collect()
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        let first = *self.index.first()?;
        let off = (date - first).num_days();
        (off >= 0 && (off as usize) < self.len()).then_some(off as usize)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().flatten().sum()
    }

    /// Sub-series over positions `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> DemandSeries {
        DemandSeries {
            zones: self.zones.clone(),
            index: self.index[start..end].to_vec(),
            values: self.values.iter().map(|c| c[start..end].to_vec()).collect(),
            filled: self.filled[start..end].to_vec(),
        }
    }

    /// Appends `later`, which must start the day after `self` ends.
    pub fn concat(&self, later: &DemandSeries) -> Result<DemandSeries> {
        if self.zones != later.zones {
            return Err(Error::invalid("cannot concatenate series over different zones"));
        }
        if let (Some(a), Some(b)) = (self.index.last(), later.index.first()) {
            if a.succ_opt() != Some(*b) {
                return Err(Error::invalid(format!("series gap between {a} and {b}")));
            }
        }
        let mut out = self.clone();
        out.index.extend_from_slice(&later.index);
        out.filled.extend_from_slice(&later.filled);
        for (c, l) in out.values.iter_mut().zip(&later.values) {
            c.extend_from_slice(l);
        }
        Ok(out)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let err = |source| Error::Csv {
            path: "<writer>".into(),
            source,
        };
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.zones.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (d, date) in self.index.iter().enumerate() {
            let mut rec = vec![date.format("%Y-%m-%d").to_string()];
            rec.extend(self.values.iter().map(|c| format_value(c[d])));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let err = |source| Error::Csv {
            path: "<reader>".into(),
            source,
        };
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers().map_err(err)?.clone();
        if header.get(0).map(str::trim) != Some("date") {
            return Err(Error::MissingColumn("date".into()));
        }
        let zones: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut index = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(err)?;
            let date = NaiveDate::parse_from_str(rec.get(0).unwrap_or("").trim(), "%Y-%m-%d")
                .map_err(|e| Error::invalid(format!("bad date in demand csv: {e}")))?;
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid(format!("bad demand value on {date}: {e}")))?;
            index.push(date);
            rows.push(row);
        }
        DemandSeries::from_rows(zones, index, &rows)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f)).map_err(|e| match e {
            Error::Csv { source, .. } => Error::Csv {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Result of bucketing trips into zone-days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub series: DemandSeries,
    pub matched_trips: usize,
    pub unmatched_trips: usize,
    pub zero_filled_days: Vec<NaiveDate>,
}

/// Counts trips per (zone, UTC pickup date). The index runs from the first
/// to the last pickup date with missing days zero-filled and flagged.
pub fn aggregate_demand(trips: &[TripRecord], zones: &ZoneMap, unit: DemandUnit) -> Aggregation {
    let mut counts: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    let mut matched = 0;
    let mut unmatched = 0;
    for t in trips {
        let Some(z) = zones.locate(t.pickup_lat, t.pickup_lon) else {
            unmatched += 1;
            continue;
        };
        matched += 1;
        let inc = match unit {
            DemandUnit::Trips => 1.0,
            DemandUnit::Passengers => t.passengers as f64,
        };
        counts
            .entry(t.pickup_date())
            .or_insert_with(|| vec![0.0; zones.len()])[z] += inc;
    }

    let ids = zones.ids();
    let (Some(&first), Some(&last)) = (counts.keys().next(), counts.keys().next_back()) else {
        return Aggregation {
            series: DemandSeries {
                values: vec![Vec::new(); ids.len()],
                zones: ids,
                index: Vec::new(),
                filled: Vec::new(),
            },
            matched_trips: 0,
            unmatched_trips: unmatched,
            zero_filled_days: Vec::new(),
        };
    };

    let mut index = Vec::new();
    let mut values = vec![Vec::new(); ids.len()];
    let mut filled = Vec::new();
    let mut zero_filled_days = Vec::new();
    let mut day = first;
    while day <= last {
        index.push(day);
        match counts.get(&day) {
            Some(row) => {
                filled.push(false);
                for (c, v) in values.iter_mut().zip(row) {
                    c.push(*v);
                }
            }
            None => {
                filled.push(true);
                zero_filled_days.push(day);
                values.iter_mut().for_each(|c| c.push(0.0));
            }
        }
        day = day.succ_opt().expect("date overflow");
    }
    Aggregation {
        series: DemandSeries {
            zones: ids,
            index,
            values,
            filled,
        },
        matched_trips: matched,
        unmatched_trips: unmatched,
        zero_filled_days,
    }
}

/// Splits into days `<= train_end` and days in `(train_end, test_end]`.
pub fn chronological_split(
    series: &DemandSeries,
    train_end: NaiveDate,
    test_end: NaiveDate,
) -> Result<(DemandSeries, DemandSeries)> {
    if train_end >= test_end {
        return Err(Error::SplitOrder { train_end, test_end });
    }
    let train_len = series.index.iter().take_while(|d| **d <= train_end).count();
    let test_len = series.index[train_len..]
        .iter()
        .take_while(|d| **d <= test_end)
        .count();
    if train_len == 0 {
        return Err(Error::EmptyPartition {
            which: "train",
            bound: train_end,
        });
    }
    if test_len == 0 {
        return Err(Error::EmptyPartition {
            which: "test",
            bound: train_end,
        });
    }
    Ok((
        series.slice(0, train_len),
        series.slice(train_len, train_len + test_len),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::zones::Zone;
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn daily(start: NaiveDate, days: usize, zones: usize) -> DemandSeries {
        let index: Vec<_> = start.iter_days().take(days).collect();
        let rows: Vec<Vec<f64>> = (0..days)
            .map(|d| (0..zones).map(|z| (d * 10 + z) as f64).collect())
            .collect();
        let names = (0..zones).map(|z| format!("z{z}")).collect();
        DemandSeries::from_rows(names, index, &rows).unwrap()
    }

    fn two_zones() -> ZoneMap {
        ZoneMap::new(vec![
            Zone {
                id: "A".into(),
                lat_min: 0.0,
                lat_max: 1.0,
                lon_min: 0.0,
                lon_max: 1.0,
            },
            Zone {
                id: "B".into(),
                lat_min: 2.0,
                lat_max: 3.0,
                lon_min: 2.0,
                lon_max: 3.0,
            },
        ])
        .unwrap()
    }

    fn trip(secs: i64, lat: f64, lon: f64, pax: u32) -> TripRecord {
        TripRecord {
            pickup_time: secs,
            pickup_lat: lat,
            pickup_lon: lon,
            dropoff_lat: 0.0,
            dropoff_lon: 0.0,
            passengers: pax,
        }
    }

    #[test]
    fn counts_per_zone_day() {
        let day = 18_000 * 86_400;
        let trips = vec![
            trip(day + 10, 0.5, 0.5, 1),
            trip(day + 20, 0.5, 0.5, 3),
            trip(day + 86_399, 0.5, 0.5, 1),
            trip(day + 30, 9.0, 9.0, 1),
        ];
        let agg = aggregate_demand(&trips, &two_zones(), DemandUnit::Trips);
        assert_eq!(agg.series.len(), 1);
        assert_eq!(agg.series.values[0][0], 3.0);
        assert_eq!(agg.series.values[1][0], 0.0);
        assert_eq!((agg.matched_trips, agg.unmatched_trips), (3, 1));

        let agg = aggregate_demand(&trips, &two_zones(), DemandUnit::Passengers);
        assert_eq!(agg.series.values[0][0], 5.0);
    }

    #[test]
    fn gaps_are_zero_filled_and_flagged() {
        let d0 = 18_000 * 86_400;
        let trips = vec![trip(d0, 0.5, 0.5, 1), trip(d0 + 3 * 86_400, 2.5, 2.5, 1)];
        let agg = aggregate_demand(&trips, &two_zones(), DemandUnit::Trips);
        assert_eq!(agg.series.len(), 4);
        assert_eq!(agg.series.filled, vec![false, true, true, false]);
        assert_eq!(agg.zero_filled_days.len(), 2);
        agg.series.validate().unwrap();
    }

    #[test]
    fn empty_trips_give_empty_index() {
        let agg = aggregate_demand(&[], &two_zones(), DemandUnit::Trips);
        assert!(agg.series.is_empty());
        assert_eq!(agg.series.zone_count(), 2);
    }

    #[test]
    fn split_quarter_has_91_days() {
        let s = daily(date(2017, 1, 1), 911, 1);
        let (train, test) = chronological_split(&s, date(2019, 3, 31), date(2019, 6, 30)).unwrap();
        assert_eq!(test.len(), 91);
        assert_eq!(test.index[0], date(2019, 4, 1));
        assert_eq!(*train.index.last().unwrap(), date(2019, 3, 31));
    }

    #[test]
    fn split_errors() {
        let s = daily(date(2020, 1, 1), 10, 1);
        let last = date(2020, 1, 10);
        let err = chronological_split(&s, last, date(2020, 2, 1)).unwrap_err();
        assert_eq!(err.to_string(), "empty test partition (bound 2020-01-10)");
        let err = chronological_split(&s, date(2019, 1, 1), date(2020, 1, 5)).unwrap_err();
        assert!(err.to_string().starts_with("empty train partition"));
        assert!(chronological_split(&s, last, last).is_err());
    }

    #[test]
    fn split_counts() {
        let s = daily(date(2020, 1, 1), 10, 2);
        let (a, b) = chronological_split(&s, date(2020, 1, 7), date(2020, 1, 10)).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
    }

    #[test]
    fn csv_round_trip() {
        let s = daily(date(2020, 1, 1), 5, 3);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("date,z0,z1,z2\n2020-01-01,0,1,2\n"));
        assert_eq!(DemandSeries::read_csv(buf.as_slice()).unwrap(), s);
    }

    proptest! {
        #[test]
        fn split_concat_restores(days in 2usize..60, cut in 1usize..59, extra in 0usize..5) {
            prop_assume!(cut < days);
            let s = daily(date(2021, 3, 1), days, 2);
            let train_end = s.index[cut - 1];
            let test_end = s.index[days - 1] + chrono::Days::new(extra as u64);
            let (a, b) = chronological_split(&s, train_end, test_end).unwrap();
            prop_assert_eq!(a.concat(&b).unwrap(), s);
        }
    }
}
