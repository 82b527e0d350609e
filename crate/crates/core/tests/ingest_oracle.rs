use std::collections::HashMap;

use chrono::DateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddsp_core::data::{aggregate_demand, ingest_reader, DemandUnit, TripSchema, Zone, ZoneMap};

struct Row {
    time: i64,
    lat: f64,
    lon: f64,
    passengers: u32,
}

fn zone_map() -> ZoneMap {
    ZoneMap::new(vec![
        Zone { id: "west".into(), lat_min: 40.70, lat_max: 40.75, lon_min: -74.02, lon_max: -73.97 },
        Zone { id: "east".into(), lat_min: 40.70, lat_max: 40.75, lon_min: -73.97 + 1e-9, lon_max: -73.92 },
    ])
    .unwrap()
}

/// 100 rows over five days; rows 3, 17, 31, 45, 59, 73, 87 carry an
/// impossible latitude and some valid rows fall outside every zone.
fn rows() -> Vec<Row> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let start = 1_483_228_800; // 2017-01-01T00:00:00Z
    (0..100)
        .map(|i| {
            let lat = if i % 14 == 3 { [93.5, -91.0][i % 2] } else { rng.random_range(40.69..40.76) };
            Row {
                time: start + rng.random_range(0..5 * 86_400),
                lat,
                lon: rng.random_range(-74.03..-73.91),
                passengers: rng.random_range(1..=4),
            }
        })
        .collect()
}

fn csv_text(rows: &[Row]) -> String {
    let mut s = String::from("pickup_datetime,pickup_longitude,pickup_latitude,dropoff_longitude,dropoff_latitude,passenger_count\n");
    for r in rows {
        let t = DateTime::from_timestamp(r.time, 0).unwrap().format("%Y-%m-%d %H:%M:%S");
        s.push_str(&format!("{t},{},{},-73.95,40.72,{}\n", r.lon, r.lat, r.passengers));
    }
    s
}

/// Direct count keyed by (day offset, zone) from the raw rows.
fn oracle(rows: &[Row], passengers: bool) -> HashMap<(i64, usize), f64> {
    let mut out = HashMap::new();
    for r in rows {
        if !(-90.0..=90.0).contains(&r.lat) {
            continue;
        }
        if !(40.70..=40.75).contains(&r.lat) {
            continue;
        }
        let zone = if (-74.02..=-73.97).contains(&r.lon) {
            0
        } else if r.lon > -73.97 && r.lon <= -73.92 {
            1
        } else {
            continue;
        };
        let day = (r.time - 1_483_228_800) / 86_400;
        *out.entry((day, zone)).or_default() += if passengers { r.passengers as f64 } else { 1.0 };
    }
    out
}

#[test]
fn ingest_rejects_bad_latitudes_and_counts_match_oracle() {
    let rows = rows();
    let (trips, report) = ingest_reader(csv_text(&rows).as_bytes(), &TripSchema::default()).unwrap();
    assert_eq!(report.total_rows, 100);
    assert_eq!(report.accepted, 93);
    assert_eq!(report.rejected, 7);
    assert_eq!(report.reasons.get("latitude out of range"), Some(&7));

    for (unit, passengers) in [(DemandUnit::Trips, false), (DemandUnit::Passengers, true)] {
        let agg = aggregate_demand(&trips, &zone_map(), unit);
        let expected = oracle(&rows, passengers);
        let epoch = chrono::NaiveDate::from_ymd_opt(2017, 1, 1).unwrap();
        for (d, date) in agg.series.index.iter().enumerate() {
            let offset = (*date - epoch).num_days();
            for z in 0..2 {
                let want = expected.get(&(offset, z)).copied().unwrap_or(0.0);
                assert_eq!(agg.series.values[z][d], want, "day {date} zone {z}");
            }
        }
        let total: f64 = expected.values().sum();
        assert_eq!(agg.series.total(), total);
        if !passengers {
            assert_eq!(agg.matched_trips + agg.unmatched_trips, 93);
            assert_eq!(agg.matched_trips as f64, total);
        }
    }
}
