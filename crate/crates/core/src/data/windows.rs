use serde::{Deserialize, Serialize};

use super::series::DemandSeries;

/// `inputs[t]` is the zone vector of day `start + t`; `target` is the zone
/// vector of day `start + ws`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub inputs: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub ws: usize,
    pub pairs: Vec<Window>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Sliding windows over day-major vectors: `max(D - ws, 0)` pairs.
pub fn windows_from_days(days: &[Vec<f64>], ws: usize) -> WindowSet {
    assert!(ws >= 1, "window size must be positive");
    let pairs = (0..days.len().saturating_sub(ws))
        .map(|i| Window {
            start: i,
            inputs: days[i..i + ws].to_vec(),
            target: days[i + ws].clone(),
        })
        .collect();
    WindowSet { ws, pairs }
}

pub fn make_windows(series: &DemandSeries, ws: usize) -> WindowSet {
    let days: Vec<Vec<f64>> = (0..series.len()).map(|d| series.day(d)).collect();
    windows_from_days(&days, ws)
}
