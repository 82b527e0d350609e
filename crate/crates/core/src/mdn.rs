//! Univariate Gaussian mixture parameters and the mixture-density head:
//! link functions from raw network outputs, density, and the negative
//! log-likelihood loss with its gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound on component standard deviations (standardized units).
pub const SIGMA_FLOOR: f64 = 1e-3;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmRecord", into = "GmmRecord")]
pub struct GmmParams {
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmRecord {
    #[serde(rename = "K")]
    k: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl TryFrom<GmmRecord> for GmmParams {
    type Error = Error;
    fn try_from(r: GmmRecord) -> Result<Self> {
        if r.weights.len() != r.k {
            return Err(Error::Shape {
                context: "gmm weights vs K",
                expected: r.k,
                actual: r.weights.len(),
            });
        }
        GmmParams::new(r.weights, r.means, r.stds)
    }
}

impl From<GmmParams> for GmmRecord {
    fn from(p: GmmParams) -> Self {
        GmmRecord {
            k: p.k(),
            weights: p.weights,
            means: p.means,
            stds: p.stds,
        }
    }
}

impl GmmParams {
    /// Validates shapes, the weight simplex (tolerance 1e-9) and positive
    /// finite standard deviations.
    pub fn new(weights: Vec<f64>, means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        for (name, len) in [("gmm means", means.len()), ("gmm stds", stds.len())] {
            if len != k {
                return Err(Error::Shape {
                    context: name,
                    expected: k,
                    actual: len,
                });
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("mixture weights must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mixture weights sum to {sum}, not 1")));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("mixture means must be finite"));
        }
        if stds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("mixture stds must be finite and positive"));
        }
        Ok(GmmParams {
            weights,
            means,
            stds,
        })
    }

    pub fn single(mean: f64, std: f64) -> Result<Self> {
        GmmParams::new(vec![1.0], vec![mean], vec![std])
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// `Σ w_i μ_i`
    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    /// `Σ w_i (σ_i² + μ_i²) − (Σ w_i μ_i)²`
    pub fn variance(&self) -> f64 {
        let second: f64 = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(w, (m, s))| w * (s * s + m * m))
            .sum();
        let m = self.mean();
        (second - m * m).max(0.0)
    }

    /// Applies `x -> x * scale + shift` to the random variable.
    pub fn affine(&self, scale: f64, shift: f64) -> GmmParams {
        GmmParams {
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| m * scale + shift).collect(),
            stds: self.stds.iter().map(|s| s * scale.abs()).collect(),
        }
    }

    /// Per-component `ln w_i + ln N(x | μ_i, σ_i²)`.
    pub fn component_log_terms(&self, x: f64) -> Vec<f64> {
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(w, (m, s))| w.ln() + normal_log_pdf(x, *m, *s))
            .collect()
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        log_sum_exp(&self.component_log_terms(x))
    }
}

pub fn normal_log_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -LN_SQRT_2PI - std.ln() - 0.5 * z * z
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Maps a raw `3K` vector `[logits | means | std pre-activations]` to a
/// valid mixture: softmax weights, identity means, softplus stds plus
/// `sigma_floor`.
pub fn mdn_transform(raw: &[f64], k: usize, sigma_floor: f64) -> Result<GmmParams> {
    if raw.len() != 3 * k || k == 0 {
        return Err(Error::Shape {
            context: "mdn raw output",
            expected: 3 * k,
            actual: raw.len(),
        });
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("mdn raw output is not finite"));
    }
    let mut weights = softmax(&raw[..k]);
    // renormalize once more so the simplex holds to rounding
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(GmmParams {
        weights,
        means: raw[k..2 * k].to_vec(),
        stds: raw[2 * k..].iter().map(|s| softplus(*s) + sigma_floor).collect(),
    })
}

/// Mixture density, evaluated through log-sum-exp.
pub fn gmm_pdf(x: f64, p: &GmmParams) -> f64 {
    p.log_pdf(x).exp()
}

/// Mean negative log-likelihood of aligned targets and mixtures.
pub fn gmm_nll(targets: &[f64], params: &[GmmParams]) -> Result<f64> {
    if targets.len() != params.len() {
        return Err(Error::Shape {
            context: "nll batch",
            expected: targets.len(),
            actual: params.len(),
        });
    }
    if targets.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = targets.iter().zip(params).map(|(x, p)| -p.log_pdf(*x)).sum();
    Ok(total / targets.len() as f64)
}

/// Negative log-likelihood of one target under `mdn_transform(raw)` and its
/// gradient with respect to `raw`.
pub fn nll_and_grad_raw(raw: &[f64], k: usize, sigma_floor: f64, target: f64) -> Result<(f64, Vec<f64>)> {
    let p = mdn_transform(raw, k, sigma_floor)?;
    let terms = p.component_log_terms(target);
    let lse = log_sum_exp(&terms);
    let mut grad = vec![0.0; 3 * k];
    for i in 0..k {
        let resp = (terms[i] - lse).exp();
        let (mu, sd) = (p.means[i], p.stds[i]);
        let z = (target - mu) / sd;
        grad[i] = p.weights[i] - resp;
        grad[k + i] = -resp * z / sd;
        let d_sd = resp * (1.0 - z * z) / sd;
        grad[2 * k + i] = d_sd * sigmoid(raw[2 * k + i]);
    }
    Ok((-lse, grad))
}
