//! Next-day forecasters. Each one only sees the `ws` days preceding the
//! target day (in original demand units).

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{windows_from_days, DemandSeries, Standardizer};
use crate::em::{em_fit_restarts, EmConfig, FitRecord};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::mdn::GmmParams;
use crate::nn::{train, HeadLoss, HeadSpec, ModelSpec, RecurrentModel, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "zones")]
pub enum Forecast {
    /// One mixture per zone.
    Distribution(Vec<GmmParams>),
    Point(Vec<f64>),
}

impl Forecast {
    /// Point summary: the mixture mean for a distribution.
    pub fn point(&self) -> Vec<f64> {
        match self {
            Forecast::Distribution(ms) => ms.iter().map(GmmParams::mean).collect(),
            Forecast::Point(p) => p.clone(),
        }
    }

    pub fn zones(&self) -> usize {
        match self {
            Forecast::Distribution(ms) => ms.len(),
            Forecast::Point(p) => p.len(),
        }
    }
}

pub trait Forecaster: Sync {
    fn name(&self) -> String;

    fn window_size(&self) -> usize;

    /// Forecast for `target` given the `window_size()` days before it.
    fn forecast(&self, target: NaiveDate, window: &[Vec<f64>]) -> Result<Forecast>;
}

fn check_window(window: &[Vec<f64>], ws: usize, zones: usize) -> Result<()> {
    if window.len() != ws {
        return Err(Error::Shape {
            context: "forecast window days",
            expected: ws,
            actual: window.len(),
        });
    }
    if let Some(bad) = window.iter().find(|d| d.len() != zones) {
        return Err(Error::Shape {
            context: "forecast window zones",
            expected: zones,
            actual: bad.len(),
        });
    }
    Ok(())
}

/// Recurrent network over standardized demand. A mixture head yields a
/// distribution forecast, a point head a point forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralForecaster {
    pub label: String,
    pub model: RecurrentModel,
    pub scaler: Standardizer,
    pub ws: usize,
}

impl NeuralForecaster {
    /// Standardizes with moments of `train_series`, builds sliding windows
    /// and trains a freshly initialized model.
    pub fn fit(
        label: &str,
        spec: ModelSpec,
        train_series: &DemandSeries,
        ws: usize,
        cfg: &TrainConfig,
        exec: ExecMode,
    ) -> Result<(Self, Vec<f64>)> {
        if ws == 0 {
            return Err(Error::config("data.ws", "must be >= 1"));
        }
        let scaler = Standardizer::fit(train_series);
        let days: Vec<Vec<f64>> = (0..train_series.len()).map(|d| scaler.forward(&train_series.day(d))).collect();
        let windows = windows_from_days(&days, ws);
        if windows.is_empty() {
            return Err(Error::invalid(format!(
                "training partition has {} days; need more than ws = {ws}",
                train_series.len()
            )));
        }
        let loss = HeadLoss::for_head(spec.head);
        let model = RecurrentModel::new(spec, cfg.seed)?;
        let (model, history) = train(model, &windows.pairs, cfg, loss, exec)?;
        Ok((
            NeuralForecaster {
                label: label.to_string(),
                model,
                scaler,
                ws,
            },
            history,
        ))
    }

    fn raw_output(&self, window: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_window(window, self.ws, self.model.spec.zones)?;
        let scaled: Vec<Vec<f64>> = window.iter().map(|d| self.scaler.forward(d)).collect();
        Ok(self.model.forward(&scaled)?.output)
    }

    /// Point forecast in original units regardless of the head type.
    pub fn point(&self, window: &[Vec<f64>]) -> Result<Vec<f64>> {
        let out = self.raw_output(window)?;
        match self.model.spec.head {
            HeadSpec::Point => Ok(self.scaler.inverse(&self.model.points(&out)?)),
            HeadSpec::Mdn { .. } => Ok(self.destandardize(self.model.mixtures(&out)?).iter().map(GmmParams::mean).collect()),
        }
    }

    fn destandardize(&self, mixtures: Vec<GmmParams>) -> Vec<GmmParams> {
        mixtures
            .iter()
            .zip(self.scaler.mean.iter().zip(&self.scaler.std))
            .map(|(g, (m, s))| g.affine(*s, *m))
            .collect()
    }
}

impl Forecaster for NeuralForecaster {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn window_size(&self) -> usize {
        self.ws
    }

    fn forecast(&self, _target: NaiveDate, window: &[Vec<f64>]) -> Result<Forecast> {
        let out = self.raw_output(window)?;
        match self.model.spec.head {
            HeadSpec::Mdn { .. } => Ok(Forecast::Distribution(self.destandardize(self.model.mixtures(&out)?))),
            HeadSpec::Point => Ok(Forecast::Point(self.scaler.inverse(&self.model.points(&out)?))),
        }
    }
}

/// Point network plus a per-zone residual mixture fitted by EM afterwards:
/// the forecast for zone `z` is the residual mixture shifted by the point
/// forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostHocForecaster {
    pub base: NeuralForecaster,
    pub residuals: Vec<GmmParams>,
}

impl PostHocForecaster {
    /// Residuals are collected on every target day of `validation` that has
    /// `ws` preceding days inside `validation`.
    pub fn fit(
        base: NeuralForecaster,
        validation: &DemandSeries,
        em: &EmConfig,
        exec: ExecMode,
    ) -> Result<(Self, Vec<FitRecord>)> {
        let days: Vec<Vec<f64>> = (0..validation.len()).map(|d| validation.day(d)).collect();
        let windows = windows_from_days(&days, base.ws);
        if windows.len() < em.k.max(2) {
            return Err(Error::invalid(format!(
                "{} residuals are too few for a {}-component fit",
                windows.len(),
                em.k
            )));
        }
        let points = exec.map(&windows.pairs, |w| base.point(&w.inputs));
        let zones = validation.zone_count();
        let mut per_zone = vec![Vec::with_capacity(windows.len()); zones];
        for (w, p) in windows.pairs.iter().zip(points) {
            let p = p?;
            for z in 0..zones {
                per_zone[z].push(w.target[z] - p[z]);
            }
        }
        let mut residuals = Vec::with_capacity(zones);
        let mut records = Vec::with_capacity(zones);
        for data in &per_zone {
            let (state, record) = em_fit_restarts(data, em, exec)?;
            residuals.push(state.params);
            records.push(record);
        }
        Ok((PostHocForecaster { base, residuals }, records))
    }
}

impl Forecaster for PostHocForecaster {
    fn name(&self) -> String {
        format!("{} + EM", self.base.label)
    }

    fn window_size(&self) -> usize {
        self.base.ws
    }

    fn forecast(&self, _target: NaiveDate, window: &[Vec<f64>]) -> Result<Forecast> {
        let point = self.base.point(window)?;
        Ok(Forecast::Distribution(
            self.residuals.iter().zip(point).map(|(g, p)| g.affine(1.0, p)).collect(),
        ))
    }
}

/// Perfect-information forecaster returning the realized demand.
pub struct OracleForecaster {
    pub series: DemandSeries,
    pub ws: usize,
}

impl Forecaster for OracleForecaster {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn window_size(&self) -> usize {
        self.ws
    }

    fn forecast(&self, target: NaiveDate, _window: &[Vec<f64>]) -> Result<Forecast> {
        let d = self
            .series
            .position(target)
            .ok_or_else(|| Error::invalid(format!("oracle has no demand for {target}")))?;
        Ok(Forecast::Point(self.series.day(d)))
    }
}
