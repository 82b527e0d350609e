//! Experiment configuration: one TOML file of key/value sections, with
//! `section.key=value` overrides applied on top.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DemandUnit, TripSchema};
use crate::em::EmConfig;
use crate::error::{Error, Result};
use crate::eval::{EvalConfig, OptimizerMode, PlanMode};
use crate::exec::ExecMode;
use crate::mdn::SIGMA_FLOOR;
use crate::nn::{CellKind, OptimizerKind, TrainConfig};
use crate::relocation::RelocationInstance;
use crate::synth::SynthConfig;

/// Environment variable naming the configuration file.
pub const CONFIG_ENV: &str = "DDSP_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; training, EM and scenario seeds derive from it.
    pub seed: u64,
    /// Worker threads for parallel sections (0 = all cores).
    pub threads: usize,
    pub exec: ExecMode,
    pub paths: PathsConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub em: EmSection,
    pub instance: InstanceConfig,
    pub eval: EvalSection,
    pub synth: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Raw trip CSV read by `ingest`.
    pub trips: PathBuf,
    /// Zone map JSON read by `ingest`.
    pub zones: PathBuf,
    /// Directory holding every artifact.
    pub artifacts: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub unit: DemandUnit,
    pub ws: usize,
    /// Last training day; when absent the final `test_days` days are the
    /// test partition.
    pub train_end: Option<NaiveDate>,
    pub test_end: Option<NaiveDate>,
    pub test_days: usize,
    /// Trailing training days held out from network fitting and used for
    /// post-hoc residual fitting.
    pub validation_days: usize,
    pub schema: TripSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub cell: CellKind,
    /// Recurrent cell of the point-forecast baseline.
    pub point_cell: CellKind,
    pub hidden: usize,
    pub dense: Vec<usize>,
    pub k: usize,
    pub aux: bool,
    pub sigma_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_norm: f64,
    pub optimizer: OptimizerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmSection {
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
}

/// Relocation instance. An empty `stock` spreads `fleet` evenly; an empty
/// `cost` uses `unit_cost` between every pair of distinct zones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceConfig {
    pub stock: Vec<f64>,
    pub fleet: f64,
    pub cost: Vec<Vec<f64>>,
    pub unit_cost: f64,
    pub price: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForecasterKind {
    /// Recurrent mixture-density network.
    #[default]
    Mdn,
    /// Point network with EM-fitted residual mixtures.
    PostHoc,
    /// Point network only.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub forecaster: ForecasterKind,
    pub optimizer: OptimizerMode,
    pub plan: PlanMode,
    pub scenarios: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 7,
            threads: 0,
            exec: ExecMode::Parallel,
            paths: PathsConfig::default(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            em: EmSection::default(),
            instance: InstanceConfig::default(),
            eval: EvalSection::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            trips: "trips.csv".into(),
            zones: "zones.json".into(),
            artifacts: "artifacts".into(),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            unit: DemandUnit::Trips,
            ws: 10,
            train_end: None,
            test_end: None,
            test_days: 91,
            validation_days: 60,
            schema: TripSchema::default(),
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            cell: CellKind::Gru,
            point_cell: CellKind::Lstm,
            hidden: 32,
            dense: vec![256, 128],
            k: 3,
            aux: false,
            sigma_floor: SIGMA_FLOOR,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            clip_norm: t.clip_norm,
            optimizer: t.optimizer,
        }
    }
}

impl Default for EmSection {
    fn default() -> Self {
        let e = EmConfig::default();
        EmSection {
            tol: e.tol,
            max_iter: e.max_iter,
            restarts: e.restarts,
        }
    }
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            stock: Vec::new(),
            fleet: 100.0,
            cost: Vec::new(),
            unit_cost: 1.0,
            price: 10.0,
            penalty: 5.0,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            forecaster: ForecasterKind::Mdn,
            optimizer: OptimizerMode::Stochastic,
            plan: PlanMode::Replan,
            scenarios: 200,
        }
    }
}

/// Parses `value` as a TOML literal, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like `section.key=value`"))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl PipelineConfig {
    /// Parses TOML text, applies overrides, and validates ranges. Unknown
    /// or ill-typed keys are reported with their full path.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: PipelineConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (or defaults when `None`) and applies overrides.
    /// Relative paths inside the file are resolved against its directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let Some(path) = path else {
            return Self::from_toml_str("", overrides);
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            for p in [&mut cfg.paths.trips, &mut cfg.paths.zones, &mut cfg.paths.artifacts] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.ws == 0 {
            return Err(Error::config("data.ws", "must be >= 1"));
        }
        if d.train_end.is_none() && d.test_days == 0 {
            return Err(Error::config("data.test_days", "must be >= 1"));
        }
        if let (Some(a), Some(b)) = (d.train_end, d.test_end) {
            if a >= b {
                return Err(Error::config("data.test_end", "must be after data.train_end"));
            }
        }
        let m = &self.model;
        if m.hidden == 0 {
            return Err(Error::config("model.hidden", "must be >= 1"));
        }
        if m.dense.contains(&0) {
            return Err(Error::config("model.dense", "layer widths must be >= 1"));
        }
        if m.k == 0 {
            return Err(Error::config("model.k", "must be >= 1"));
        }
        if !(m.sigma_floor > 0.0 && m.sigma_floor.is_finite()) {
            return Err(Error::config("model.sigma_floor", "must be > 0"));
        }
        self.train_config().validate()?;
        if !(self.em.tol > 0.0) {
            return Err(Error::config("em.tol", "must be > 0"));
        }
        if self.em.max_iter == 0 || self.em.restarts == 0 {
            return Err(Error::config("em.max_iter", "max_iter and restarts must be >= 1"));
        }
        if self.eval.scenarios == 0 {
            return Err(Error::config("eval.scenarios", "must be >= 1"));
        }
        let i = &self.instance;
        if !(i.fleet >= 0.0 && i.fleet.is_finite()) {
            return Err(Error::config("instance.fleet", "must be finite and >= 0"));
        }
        for (field, v) in [("instance.unit_cost", i.unit_cost), ("instance.price", i.price), ("instance.penalty", i.penalty)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be finite and >= 0"));
            }
        }
        self.synth.validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            clip_norm: self.train.clip_norm,
            seed: self.seed,
            optimizer: self.train.optimizer,
        }
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            k: self.model.k,
            tol: self.em.tol,
            max_iter: self.em.max_iter,
            restarts: self.em.restarts,
            seed: self.seed.wrapping_add(1),
            sigma_floor: self.model.sigma_floor,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            scenarios: self.eval.scenarios,
            seed: self.seed.wrapping_add(2),
            plan: self.eval.plan,
        }
    }

    /// Instance over `zones`, checked against the zone count.
    pub fn instance_for(&self, zones: &[String]) -> Result<RelocationInstance> {
        let z = zones.len();
        let i = &self.instance;
        let stock = if i.stock.is_empty() {
            // even split, remainder to the first zones
            let whole = i.fleet.floor() as u64;
            (0..z as u64)
                .map(|k| (whole / z as u64 + u64::from(k < whole % z as u64)) as f64)
                .collect()
        } else if i.stock.len() == z {
            i.stock.clone()
        } else {
            return Err(Error::config("instance.stock", format!("has {} entries for {z} zones", i.stock.len())));
        };
        let cost = if i.cost.is_empty() {
            (0..z)
                .map(|a| (0..z).map(|b| if a == b { 0.0 } else { i.unit_cost }).collect())
                .collect()
        } else {
            i.cost.clone()
        };
        let inst = RelocationInstance {
            zones: zones.to_vec(),
            stock,
            cost,
            price: i.price,
            penalty: i.penalty,
        };
        inst.validate().map_err(|e| Error::config("instance", e.to_string()))?;
        Ok(inst)
    }

    /// Hex SHA-256 of the canonical JSON form.
    /// Digest of the settings that affect results. File locations and the
    /// thread count are excluded; inputs are digested separately.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("paths");
            map.remove("threads");
        }
        let json = serde_json::to_vec(&value).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
