use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned bounding box in degrees, bounds inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: String,
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Zone {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }
}

/// Ordered zone list; a point belongs to the first zone that contains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Zone>", into = "Vec<Zone>")]
pub struct ZoneMap {
    zones: Vec<Zone>,
}

impl ZoneMap {
    pub fn new(zones: Vec<Zone>) -> Result<Self> {
        if zones.is_empty() {
            return Err(Error::invalid("zone map must contain at least one zone"));
        }
        let mut seen = HashSet::new();
        for z in &zones {
            if !seen.insert(z.id.as_str()) {
                return Err(Error::invalid(format!("duplicate zone id `{}`", z.id)));
            }
            if !(z.lat_min <= z.lat_max && z.lon_min <= z.lon_max) {
                return Err(Error::invalid(format!("zone `{}` has inverted bounds", z.id)));
            }
        }
        Ok(ZoneMap { zones })
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn ids(&self) -> Vec<String> {
        self.zones.iter().map(|z| z.id.clone()).collect()
    }

    pub fn locate(&self, lat: f64, lon: f64) -> Option<usize> {
        self.zones.iter().position(|z| z.contains(lat, lon))
    }
}

impl TryFrom<Vec<Zone>> for ZoneMap {
    type Error = Error;
    fn try_from(zones: Vec<Zone>) -> Result<Self> {
        ZoneMap::new(zones)
    }
}

impl From<ZoneMap> for Vec<Zone> {
    fn from(m: ZoneMap) -> Self {
        m.zones
    }
}
