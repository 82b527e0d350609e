//! Regime-switching bimodal daily demand, plus matching trip records, so
//! the whole pipeline runs without external data.
//!
//! Zone 0 alternates between a low and a high demand regime through a
//! two-state Markov chain; every other zone is unimodal around `base`.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DemandSeries, TripRecord, Zone, ZoneMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub zones: usize,
    pub days: usize,
    pub start: NaiveDate,
    pub seed: u64,
    /// Zone 0 regime means.
    pub low: f64,
    pub high: f64,
    /// Mean demand of the remaining zones.
    pub base: f64,
    pub noise: f64,
    /// Probability that zone 0 keeps yesterday's regime.
    pub persistence: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            zones: 2,
            days: 200,
            start: NaiveDate::from_ymd_opt(2017, 1, 1).expect("valid date"),
            seed: 7,
            low: 20.0,
            high: 80.0,
            base: 40.0,
            noise: 5.0,
            persistence: 0.6,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.zones == 0 || self.days == 0 {
            return Err(Error::config("synth", "zones and days must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.persistence) {
            return Err(Error::config("synth.persistence", "must be in [0, 1]"));
        }
        if !(self.noise >= 0.0) || [self.low, self.high, self.base].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("synth", "means must be >= 0 and noise >= 0"));
        }
        Ok(())
    }
}

/// Daily whole-number demand, `zone0, zone1, ...`.
pub fn generate_series(cfg: &SynthConfig) -> Result<DemandSeries> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut high = rng.random_bool(0.5);
    let mut rows = Vec::with_capacity(cfg.days);
    for _ in 0..cfg.days {
        if !rng.random_bool(cfg.persistence) {
            high = !high;
        }
        let row: Vec<f64> = (0..cfg.zones)
            .map(|z| {
                let mean = match (z, high) {
                    (0, true) => cfg.high,
                    (0, false) => cfg.low,
                    _ => cfg.base,
                };
                (mean + noise.sample(&mut rng)).round().max(0.0)
            })
            .collect();
        rows.push(row);
    }
    let zones = (0..cfg.zones).map(|z| format!("z{z}")).collect();
    let index = cfg.start.iter_days().take(cfg.days).collect();
    DemandSeries::from_rows(zones, index, &rows)
}

/// Side-by-side rectangular zones of 0.05° x 0.05°.
pub fn zone_map(zones: usize) -> ZoneMap {
    let list = (0..zones)
        .map(|z| Zone {
            id: format!("z{z}"),
            lat_min: 40.70,
            lat_max: 40.75,
            lon_min: -74.00 + 0.05 * z as f64,
            lon_max: -74.00 + 0.05 * z as f64 + 0.0499,
        })
        .collect();
    ZoneMap::new(list).expect("generated zones are valid")
}

/// One trip per demand unit, with pickups uniformly placed inside the zone
/// and during the day; dropoffs anywhere in the map.
pub fn trips_for_series(series: &DemandSeries, zones: &ZoneMap, seed: u64) -> Vec<TripRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7472_6970);
    let boxes = zones.zones();
    let mut out = Vec::new();
    for (d, date) in series.index.iter().enumerate() {
        let midnight = date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp();
        for (z, zone) in boxes.iter().enumerate() {
            for _ in 0..series.values[z][d] as usize {
                let other = &boxes[rng.random_range(0..boxes.len())];
                out.push(TripRecord {
                    pickup_time: midnight + rng.random_range(0..Duration::days(1).num_seconds()),
                    pickup_lat: rng.random_range(zone.lat_min..zone.lat_max),
                    pickup_lon: rng.random_range(zone.lon_min..zone.lon_max),
                    dropoff_lat: rng.random_range(other.lat_min..other.lat_max),
                    dropoff_lon: rng.random_range(other.lon_min..other.lon_max),
                    passengers: rng.random_range(1..=4),
                });
            }
        }
    }
    out.sort_by_key(|t| t.pickup_time);
    out
}
