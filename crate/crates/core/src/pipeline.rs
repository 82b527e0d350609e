//! End-to-end steps shared by the command line and the tests: partitioning,
//! training, checkpoint I/O for forecasters, post-hoc fitting, evaluation,
//! and artifact manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ForecasterKind, PipelineConfig};
use crate::data::{chronological_split, DemandSeries, Standardizer};
use crate::em::FitRecord;
use crate::error::{Error, Result};
use crate::eval::{compare, rolling_evaluate, ComparisonReport, EvaluationReport, OptimizerMode};
use crate::forecast::{Forecaster, NeuralForecaster, PostHocForecaster};
use crate::mdn::GmmParams;
use crate::nn::{checkpoint, mean_loss, CellKind, HeadLoss, HeadSpec, ModelSpec};
use crate::synth::generate_series;

/// Origin record attached to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Input file names with the SHA-256 of their contents.
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

impl ArtifactManifest {
    pub fn new(command: &str, cfg: &PipelineConfig, inputs: &[&Path]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
                Ok(InputDigest {
                    name: p.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<_>>()?;
        Ok(ArtifactManifest {
            command: command.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            inputs,
        })
    }
}

/// Artifact file names inside the artifacts directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn demand(&self) -> PathBuf {
        self.root.join("demand.csv")
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("models").join(format!("{name}.json"))
    }

    pub fn posthoc(&self, name: &str) -> PathBuf {
        self.root.join("models").join(format!("{name}.residuals.json"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(format!("{name}.json"))
    }
}

/// `path` must exist; otherwise the error names the command producing it.
pub fn require(path: &Path, producer: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            producer,
        })
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, producer: &'static str) -> Result<T> {
    require(path, producer)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_demand(path: &Path) -> Result<DemandSeries> {
    require(path, "synth` or `ddsp ingest")?;
    DemandSeries::load_csv(path)
}

/// Training and test partitions per the `data` section.
pub fn partition(cfg: &PipelineConfig, series: &DemandSeries) -> Result<(DemandSeries, DemandSeries)> {
    match cfg.data.train_end {
        Some(train_end) => {
            let test_end = match cfg.data.test_end {
                Some(d) => d,
                None => train_end + chrono::Duration::days(cfg.data.test_days as i64),
            };
            chronological_split(series, train_end, test_end)
        }
        None => {
            let n = series.len();
            if n <= cfg.data.test_days {
                return Err(Error::config(
                    "data.test_days",
                    format!("{} test days leave no training data in a {n}-day series", cfg.data.test_days),
                ));
            }
            Ok((series.slice(0, n - cfg.data.test_days), series.slice(n - cfg.data.test_days, n)))
        }
    }
}

/// Network fitting part and held-out validation part of the training
/// partition. The validation part keeps `ws` days of leading context.
pub fn fit_validation_split(cfg: &PipelineConfig, train: &DemandSeries) -> Result<(DemandSeries, DemandSeries)> {
    let v = cfg.data.validation_days;
    let ws = cfg.data.ws;
    if v == 0 {
        return Ok((train.clone(), train.slice(train.len(), train.len())));
    }
    if train.len() <= v + ws {
        return Err(Error::config(
            "data.validation_days",
            format!("{v} validation days leave fewer than ws + 1 fitting days out of {}", train.len()),
        ));
    }
    let cut = train.len() - v;
    Ok((train.slice(0, cut), train.slice(cut - ws, train.len())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Mdn,
    Point,
}

pub fn model_spec(cfg: &PipelineConfig, head: HeadKind, cell: CellKind, zones: usize) -> ModelSpec {
    ModelSpec {
        cell,
        zones,
        hidden: cfg.model.hidden,
        dense: cfg.model.dense.clone(),
        head: match head {
            HeadKind::Mdn => HeadSpec::Mdn {
                k: cfg.model.k,
                aux: cfg.model.aux,
            },
            HeadKind::Point => HeadSpec::Point,
        },
        sigma_floor: cfg.model.sigma_floor,
    }
}

pub fn default_label(head: HeadKind, cell: CellKind) -> String {
    let cell = match cell {
        CellKind::Gru => "GRU",
        CellKind::Lstm => "LSTM",
    };
    match head {
        HeadKind::Mdn => format!("{cell}-MDN"),
        HeadKind::Point => cell.to_string(),
    }
}

/// Metadata stored in a forecaster checkpoint next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub label: String,
    pub ws: usize,
    pub scaler: Standardizer,
    pub history: Vec<f64>,
    pub validation_loss: Option<f64>,
    pub manifest: ArtifactManifest,
}

/// Trains on the fitting part of the training partition and reports the
/// loss on the validation part.
pub fn train_forecaster(
    cfg: &PipelineConfig,
    series: &DemandSeries,
    head: HeadKind,
    cell: CellKind,
    label: &str,
) -> Result<(NeuralForecaster, Vec<f64>, Option<f64>)> {
    let (train, _) = partition(cfg, series)?;
    let (fit, validation) = fit_validation_split(cfg, &train)?;
    let spec = model_spec(cfg, head, cell, series.zone_count());
    let (f, history) = NeuralForecaster::fit(label, spec, &fit, cfg.data.ws, &cfg.train_config(), cfg.exec)?;
    let validation_loss = if validation.len() > cfg.data.ws {
        let days: Vec<Vec<f64>> = (0..validation.len()).map(|d| f.scaler.forward(&validation.day(d))).collect();
        let w = crate::data::windows_from_days(&days, cfg.data.ws);
        Some(mean_loss(&f.model, HeadLoss::for_head(f.model.spec.head), &w.pairs, cfg.exec)?)
    } else {
        None
    };
    Ok((f, history, validation_loss))
}

pub fn save_forecaster(f: &NeuralForecaster, meta: &TrainingMeta, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    checkpoint::save(&f.model, serde_json::to_value(meta)?, path)
}

pub fn load_forecaster(path: &Path) -> Result<(NeuralForecaster, TrainingMeta)> {
    require(path, "train")?;
    let (model, manifest) = checkpoint::load(path)?;
    let meta: TrainingMeta = serde_json::from_value(manifest.meta)?;
    Ok((
        NeuralForecaster {
            label: meta.label.clone(),
            model,
            scaler: meta.scaler.clone(),
            ws: meta.ws,
        },
        meta,
    ))
}

/// Residual mixtures of a point forecaster, as persisted by `fit-gmm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualArtifact {
    pub residuals: Vec<GmmParams>,
    pub fits: Vec<FitRecord>,
    pub manifest: ArtifactManifest,
}

pub fn fit_residuals(cfg: &PipelineConfig, base: NeuralForecaster, series: &DemandSeries) -> Result<(PostHocForecaster, Vec<FitRecord>)> {
    if !matches!(base.model.spec.head, HeadSpec::Point) {
        return Err(Error::invalid("post-hoc residual fitting needs a point-head checkpoint"));
    }
    let (train, _) = partition(cfg, series)?;
    let (_, validation) = fit_validation_split(cfg, &train)?;
    if validation.is_empty() {
        return Err(Error::config("data.validation_days", "must be >= 1 for residual fitting"));
    }
    PostHocForecaster::fit(base, &validation, &cfg.em_config(), cfg.exec)
}

pub fn evaluate(
    cfg: &PipelineConfig,
    forecaster: &dyn Forecaster,
    mode: OptimizerMode,
    series: &DemandSeries,
) -> Result<EvaluationReport> {
    let (train, test) = partition(cfg, series)?;
    let instance = cfg.instance_for(&series.zones)?;
    rolling_evaluate(forecaster, mode, &train, &test, &instance, &cfg.eval_config(), cfg.exec)
}

/// Everything the synthetic benchmark produces.
pub struct BenchmarkOutcome {
    pub series: DemandSeries,
    pub mdn: NeuralForecaster,
    pub point: NeuralForecaster,
    pub stochastic: EvaluationReport,
    pub baseline: EvaluationReport,
    pub comparison: ComparisonReport,
}

/// Synthetic data, mixture network + stochastic program against point
/// network + deterministic program, all in memory.
pub fn run_benchmark(cfg: &PipelineConfig) -> Result<BenchmarkOutcome> {
    let series = generate_series(&cfg.synth)?;
    let (mdn, _, _) = train_forecaster(cfg, &series, HeadKind::Mdn, cfg.model.cell, &default_label(HeadKind::Mdn, cfg.model.cell))?;
    let (point, _, _) = train_forecaster(
        cfg,
        &series,
        HeadKind::Point,
        cfg.model.point_cell,
        &default_label(HeadKind::Point, cfg.model.point_cell),
    )?;
    let stochastic = evaluate(cfg, &mdn, OptimizerMode::Stochastic, &series)?;
    let baseline = evaluate(cfg, &point, OptimizerMode::Deterministic, &series)?;
    let comparison = compare(&stochastic, &baseline);
    Ok(BenchmarkOutcome {
        series,
        mdn,
        point,
        stochastic,
        baseline,
        comparison,
    })
}

/// Forecaster selected by `eval.forecaster`, loaded from the artifacts.
pub fn load_configured_forecaster(cfg: &PipelineConfig, layout: &Layout) -> Result<Box<dyn Forecaster>> {
    match cfg.eval.forecaster {
        ForecasterKind::Mdn => Ok(Box::new(load_forecaster(&layout.checkpoint("mdn"))?.0)),
        ForecasterKind::Point => Ok(Box::new(load_forecaster(&layout.checkpoint("point"))?.0)),
        ForecasterKind::PostHoc => {
            let (base, _) = load_forecaster(&layout.checkpoint("point"))?;
            let art: ResidualArtifact = read_json(&layout.posthoc("point"), "fit-gmm")?;
            Ok(Box::new(PostHocForecaster {
                base,
                residuals: art.residuals,
            }))
        }
    }
}
