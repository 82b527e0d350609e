use serde::{Deserialize, Serialize};

use super::series::DemandSeries;

/// Per-zone standardization fitted on the training partition only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(zones: usize) -> Self {
        Standardizer {
            mean: vec![0.0; zones],
            std: vec![1.0; zones],
        }
    }

    /// Population moments per zone; a constant zone gets std 1.
    pub fn fit(train: &DemandSeries) -> Self {
        let n = train.len().max(1) as f64;
        let mut mean = Vec::with_capacity(train.zone_count());
        let mut std = Vec::with_capacity(train.zone_count());
        for col in &train.values {
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            mean.push(m);
            std.push(if v > 1e-12 { v.sqrt() } else { 1.0 });
        }
        Standardizer { mean, std }
    }

    pub fn forward(&self, day: &[f64]) -> Vec<f64> {
        day.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn inverse(&self, day: &[f64]) -> Vec<f64> {
        day.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| x * s + m)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn round_trips_and_centers() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = DemandSeries::from_rows(
            vec!["a".into(), "b".into()],
            start.iter_days().take(2).collect(),
            &rows,
        )
        .unwrap();
        let sc = Standardizer::fit(&s);
        assert_eq!(sc.mean, vec![2.0, 5.0]);
        assert_eq!(sc.std, vec![1.0, 1.0]);
        let z = sc.forward(&[3.0, 7.0]);
        assert_eq!(z, vec![1.0, 2.0]);
        assert_eq!(sc.inverse(&z), vec![3.0, 7.0]);
    }
}
