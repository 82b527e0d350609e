use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gru::{gru_cell_backward, gru_cell_forward, GruStep, GruWeights};
use super::lstm::{lstm_cell_backward, lstm_cell_forward, LstmStep, LstmWeights};
use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::mdn::{mdn_transform, nll_and_grad_raw, GmmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Gru,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// Output head. `Mdn` emits `3K` raw mixture parameters per zone
/// (plus one auxiliary point forecast per zone when `aux` is set);
/// `Point` emits one value per zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HeadSpec {
    Mdn { k: usize, aux: bool },
    Point,
}

impl HeadSpec {
    pub fn output_size(&self, zones: usize) -> usize {
        match *self {
            HeadSpec::Mdn { k, aux } => zones * 3 * k + if aux { zones } else { 0 },
            HeadSpec::Point => zones,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub cell: CellKind,
    /// Number of zones; both the per-step input width and the number of
    /// forecast targets.
    pub zones: usize,
    pub hidden: usize,
    /// Rectified dense layer widths between the recurrent state and the head.
    pub dense: Vec<usize>,
    pub head: HeadSpec,
    pub sigma_floor: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.zones == 0 || self.hidden == 0 {
            return Err(Error::invalid("model needs at least one zone and one hidden unit"));
        }
        if self.dense.contains(&0) {
            return Err(Error::invalid("dense layer widths must be positive"));
        }
        if let HeadSpec::Mdn { k: 0, .. } = self.head {
            return Err(Error::invalid("mixture head needs K >= 1"));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::invalid("sigma_floor must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Gru(GruWeights),
    Lstm(LstmWeights),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentModel {
    pub spec: ModelSpec,
    pub cell: Cell,
    pub dense: Vec<DenseLayer>,
}

#[derive(Debug, Clone)]
enum StepCache {
    Gru(GruStep),
    Lstm(LstmStep),
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    steps: Vec<StepCache>,
    /// Input to each dense layer (the first is the final hidden state).
    layer_inputs: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Loss applied to the head output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadLoss {
    /// Per zone mixture NLL, summed over zones; plus the squared error of
    /// the auxiliary outputs when present.
    Nll,
    /// Mean squared error over zones.
    Mse,
    /// Constant zero loss; used to check that gradients vanish.
    Zero,
}

impl HeadLoss {
    pub fn for_head(head: HeadSpec) -> Self {
        match head {
            HeadSpec::Mdn { .. } => HeadLoss::Nll,
            HeadSpec::Point => HeadLoss::Mse,
        }
    }
}

impl RecurrentModel {
    /// Seeded initialization: recurrent matrices uniform in `±1/√H`, dense
    /// weights uniform in `±1/√fan_in`, all biases zero.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = match spec.cell {
            CellKind::Gru => Cell::Gru(GruWeights::init(spec.zones, spec.hidden, &mut rng)),
            CellKind::Lstm => Cell::Lstm(LstmWeights::init(spec.zones, spec.hidden, &mut rng)),
        };
        let mut dense = Vec::new();
        let mut fan_in = spec.hidden;
        let out = spec.head.output_size(spec.zones);
        for (width, act) in spec
            .dense
            .iter()
            .map(|w| (*w, Activation::Relu))
            .chain(std::iter::once((out, Activation::Identity)))
        {
            let bound = 1.0 / (fan_in as f64).sqrt();
            dense.push(DenseLayer {
                weights: Matrix::uniform(width, fan_in, bound, &mut rng),
                bias: vec![0.0; width],
                activation: act,
            });
            fan_in = width;
        }
        Ok(RecurrentModel { spec, cell, dense })
    }

    /// Same shapes, every parameter zero.
    pub fn zeros_like(&self) -> Self {
        let mut m = self.clone();
        m.tensors_mut().into_iter().for_each(|t| t.iter_mut().for_each(|v| *v = 0.0));
        m
    }

    pub fn output_size(&self) -> usize {
        self.spec.head.output_size(self.spec.zones)
    }

    /// Named parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = match &self.cell {
            Cell::Gru(w) => w.tensors().into_iter().map(|(n, t)| (n.to_string(), t)).collect(),
            Cell::Lstm(w) => w.tensors().into_iter().map(|(n, t)| (n.to_string(), t)).collect(),
        };
        for (i, l) in self.dense.iter().enumerate() {
            out.push((format!("dense{i}.weights"), &l.weights.data));
            out.push((format!("dense{i}.bias"), &l.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = match &mut self.cell {
            Cell::Gru(w) => w.tensors_mut(),
            Cell::Lstm(w) => w.tensors_mut(),
        };
        for l in &mut self.dense {
            out.push(&mut l.weights.data);
            out.push(&mut l.bias);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, t)| t.iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.param_count();
        if flat.len() != n {
            return Err(Error::Shape {
                context: "flat parameter vector",
                expected: n,
                actual: flat.len(),
            });
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.spec.hidden
    }

    /// Runs the recurrent cell from a zero state over `window` (oldest day
    /// first) and the dense stack over the final hidden state.
    pub fn forward(&self, window: &[Vec<f64>]) -> Result<ForwardCache> {
        if window.is_empty() {
            return Err(Error::invalid("empty input window"));
        }
        let hsize = self.hidden();
        let mut h = vec![0.0; hsize];
        let mut c = vec![0.0; hsize];
        let mut steps = Vec::with_capacity(window.len());
        for x in window {
            match &self.cell {
                Cell::Gru(w) => {
                    let s = gru_cell_forward(x, &h, w)?;
                    h = s.h.clone();
                    steps.push(StepCache::Gru(s));
                }
                Cell::Lstm(w) => {
                    let s = lstm_cell_forward(x, &h, &c, w)?;
                    h = s.h.clone();
                    c = s.c.clone();
                    steps.push(StepCache::Lstm(s));
                }
            }
        }
        let mut layer_inputs = Vec::with_capacity(self.dense.len());
        let mut a = h;
        for layer in &self.dense {
            let mut out = layer.bias.clone();
            layer.weights.matvec_acc(&a, &mut out);
            if layer.activation == Activation::Relu {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            layer_inputs.push(std::mem::replace(&mut a, out));
        }
        Ok(ForwardCache {
            inputs: window.to_vec(),
            steps,
            layer_inputs,
            output: a,
        })
    }

    /// Forward pass that enforces a fixed window length.
    pub fn sequence_forward(&self, window: &[Vec<f64>], ws: usize) -> Result<Vec<f64>> {
        if window.len() != ws {
            return Err(Error::Shape {
                context: "input window length",
                expected: ws,
                actual: window.len(),
            });
        }
        Ok(self.forward(window)?.output)
    }

    /// Exact gradients of a scalar loss w.r.t. every parameter, given the
    /// loss gradient `d_output` at the head output.
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64]) -> RecurrentModel {
        let mut grad = self.zeros_like();
        let mut delta = d_output.to_vec();
        for (li, layer) in self.dense.iter().enumerate().rev() {
            let input = &cache.layer_inputs[li];
            if layer.activation == Activation::Relu {
                // output of a relu layer is the next layer's input
                let out = cache
                    .layer_inputs
                    .get(li + 1)
                    .unwrap_or(&cache.output);
                for (d, o) in delta.iter_mut().zip(out) {
                    if *o <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let g = &mut grad.dense[li];
            g.weights.outer_acc(&delta, input);
            for (b, d) in g.bias.iter_mut().zip(&delta) {
                *b += d;
            }
            let mut prev = vec![0.0; input.len()];
            layer.weights.matvec_t_acc(&delta, &mut prev);
            delta = prev;
        }

        let hsize = self.hidden();
        let zero = vec![0.0; hsize];
        let mut dh = delta;
        let mut dc = vec![0.0; hsize];
        for t in (0..cache.steps.len()).rev() {
            let x = &cache.inputs[t];
            match (&self.cell, &mut grad.cell, &cache.steps[t]) {
                (Cell::Gru(w), Cell::Gru(gw), StepCache::Gru(step)) => {
                    let h_prev = match t {
                        0 => &zero,
                        _ => match &cache.steps[t - 1] {
                            StepCache::Gru(p) => &p.h,
                            StepCache::Lstm(_) => unreachable!(),
                        },
                    };
                    dh = gru_cell_backward(x, h_prev, step, &dh, w, gw);
                }
                (Cell::Lstm(w), Cell::Lstm(gw), StepCache::Lstm(step)) => {
                    let (h_prev, c_prev) = match t {
                        0 => (&zero, &zero),
                        _ => match &cache.steps[t - 1] {
                            StepCache::Lstm(p) => (&p.h, &p.c),
                            StepCache::Gru(_) => unreachable!(),
                        },
                    };
                    let (a, b) = lstm_cell_backward(x, h_prev, c_prev, step, &dh, &dc, w, gw);
                    dh = a;
                    dc = b;
                }
                _ => unreachable!("cache and model cell kinds differ"),
            }
        }
        grad
    }

    /// Mixture forecast per zone from a raw head output.
    pub fn mixtures(&self, output: &[f64]) -> Result<Vec<GmmParams>> {
        let HeadSpec::Mdn { k, .. } = self.spec.head else {
            return Err(Error::invalid("model does not have a mixture head"));
        };
        (0..self.spec.zones)
            .map(|z| mdn_transform(&output[z * 3 * k..(z + 1) * 3 * k], k, self.spec.sigma_floor))
            .collect()
    }

    /// Point forecast per zone (the auxiliary outputs for an MDN head
    /// with `aux`, the mixture mean otherwise).
    pub fn points(&self, output: &[f64]) -> Result<Vec<f64>> {
        let z = self.spec.zones;
        match self.spec.head {
            HeadSpec::Point => Ok(output[..z].to_vec()),
            HeadSpec::Mdn { k, aux: true } => Ok(output[z * 3 * k..z * 3 * k + z].to_vec()),
            HeadSpec::Mdn { aux: false, .. } => Ok(self.mixtures(output)?.iter().map(GmmParams::mean).collect()),
        }
    }

    /// Loss of one head output against a target zone vector, and its
    /// gradient w.r.t. the output.
    pub fn head_loss(&self, loss: HeadLoss, output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        let zones = self.spec.zones;
        if target.len() != zones {
            return Err(Error::Shape {
                context: "target vector",
                expected: zones,
                actual: target.len(),
            });
        }
        let mut grad = vec![0.0; output.len()];
        let value = match (loss, self.spec.head) {
            (HeadLoss::Zero, _) => 0.0,
            (HeadLoss::Nll, HeadSpec::Mdn { k, aux }) => {
                let mut total = 0.0;
                for z in 0..zones {
                    let span = z * 3 * k..(z + 1) * 3 * k;
                    let (l, g) = nll_and_grad_raw(&output[span.clone()], k, self.spec.sigma_floor, target[z])?;
                    total += l;
                    grad[span].copy_from_slice(&g);
                }
                if aux {
                    let base = zones * 3 * k;
                    total += mse(&output[base..base + zones], target, &mut grad[base..base + zones]);
                }
                total
            }
            (HeadLoss::Mse, HeadSpec::Point) => mse(output, target, &mut grad),
            (HeadLoss::Mse, HeadSpec::Mdn { .. }) | (HeadLoss::Nll, HeadSpec::Point) => {
                return Err(Error::invalid("loss does not match the model head"))
            }
        };
        Ok((value, grad))
    }

    /// Loss and parameter gradient for one (window, target) pair.
    pub fn loss_and_grad(&self, loss: HeadLoss, window: &[Vec<f64>], target: &[f64]) -> Result<(f64, RecurrentModel)> {
        let cache = self.forward(window)?;
        let (value, d_out) = self.head_loss(loss, &cache.output, target)?;
        Ok((value, self.backward(&cache, &d_out)))
    }

    pub fn loss(&self, loss: HeadLoss, window: &[Vec<f64>], target: &[f64]) -> Result<f64> {
        let cache = self.forward(window)?;
        Ok(self.head_loss(loss, &cache.output, target)?.0)
    }
}

fn mse(pred: &[f64], target: &[f64], grad: &mut [f64]) -> f64 {
    let n = pred.len() as f64;
    let mut total = 0.0;
    for ((p, t), g) in pred.iter().zip(target).zip(grad.iter_mut()) {
        let e = p - t;
        total += e * e;
        *g = 2.0 * e / n;
    }
    total / n
}
