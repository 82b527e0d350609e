use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{HeadLoss, RecurrentModel};
use crate::data::Window;
use crate::error::{Error, Result};
use crate::exec::ExecMode;

pub const MOMENTUM: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Stochastic gradient descent with momentum 0.9.
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global gradient norm cap; 0 disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 50,
            clip_norm: 5.0,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be finite and >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(Error::config("train.clip_norm", "must be >= 0"));
        }
        Ok(())
    }
}

enum OptState {
    Sgd { velocity: Vec<f64> },
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl OptState {
    fn new(kind: OptimizerKind, n: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => OptState::Sgd { velocity: vec![0.0; n] },
            OptimizerKind::Adam => OptState::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            OptState::Sgd { velocity } => {
                for ((p, g), v) in params.iter_mut().zip(grad).zip(velocity.iter_mut()) {
                    *v = MOMENTUM * *v + g;
                    *p -= lr * *v;
                }
            }
            OptState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                for (i, (p, g)) in params.iter_mut().zip(grad).enumerate() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Mean loss and mean flat gradient over a batch. Per-window gradients are
/// computed under `exec` and summed in window order.
pub fn batch_loss_and_grad(
    model: &RecurrentModel,
    loss: HeadLoss,
    batch: &[&Window],
    exec: ExecMode,
) -> Result<(f64, Vec<f64>)> {
    let per = exec.map(batch, |w| {
        model
            .loss_and_grad(loss, &w.inputs, &w.target)
            .map(|(l, g)| (l, g.flat_params()))
    });
    let mut total = 0.0;
    let mut grad = vec![0.0; model.param_count()];
    for item in per {
        let (l, g) = item?;
        total += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let n = batch.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

/// Mean loss over windows without gradients.
pub fn mean_loss(model: &RecurrentModel, loss: HeadLoss, windows: &[Window], exec: ExecMode) -> Result<f64> {
    let per = exec.map(windows, |w| model.loss(loss, &w.inputs, &w.target));
    let mut total = 0.0;
    for l in per {
        total += l?;
    }
    Ok(total / windows.len().max(1) as f64)
}

pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Minibatch training. Windows are reshuffled every epoch by a generator
/// seeded from `cfg.seed`; the returned history holds the mean training
/// loss seen during each epoch.
pub fn train(
    mut model: RecurrentModel,
    windows: &[Window],
    cfg: &TrainConfig,
    loss: HeadLoss,
    exec: ExecMode,
) -> Result<(RecurrentModel, Vec<f64>)> {
    cfg.validate()?;
    if windows.is_empty() {
        return Err(Error::invalid("cannot train on an empty window set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut params = model.flat_params();
    let mut opt = OptState::new(cfg.optimizer, params.len());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Window> = chunk.iter().map(|i| &windows[*i]).collect();
            let (l, mut grad) = batch_loss_and_grad(&model, loss, &batch, exec)?;
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, batch: batch_no });
            }
            epoch_total += l * batch.len() as f64;
            clip_global_norm(&mut grad, cfg.clip_norm);
            opt.step(&mut params, &grad, cfg.learning_rate);
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch, batch: batch_no });
            }
            model.set_flat_params(&params)?;
        }
        history.push(epoch_total / windows.len() as f64);
    }
    Ok((model, history))
}
