use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::mdn::sigmoid;

/// Gated recurrent unit parameters. `w_*` map the input, `u_*` the
/// previous hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruWeights {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_h: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_h: Matrix,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
}

/// Values kept from one forward step for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStep {
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    /// `tanh(W_h x + U_h (r ⊙ h_prev) + b_h)`
    pub cand: Vec<f64>,
    /// `r ⊙ h_prev`
    pub rh: Vec<f64>,
}

impl GruWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruWeights {
            w_z: Matrix::zeros(hidden, input),
            w_r: Matrix::zeros(hidden, input),
            w_h: Matrix::zeros(hidden, input),
            u_z: Matrix::zeros(hidden, hidden),
            u_r: Matrix::zeros(hidden, hidden),
            u_h: Matrix::zeros(hidden, hidden),
            b_z: vec![0.0; hidden],
            b_r: vec![0.0; hidden],
            b_h: vec![0.0; hidden],
        }
    }

    /// Matrices uniform in `±1/√H`, biases zero.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let b = 1.0 / (hidden as f64).sqrt();
        GruWeights {
            w_z: Matrix::uniform(hidden, input, b, rng),
            w_r: Matrix::uniform(hidden, input, b, rng),
            w_h: Matrix::uniform(hidden, input, b, rng),
            u_z: Matrix::uniform(hidden, hidden, b, rng),
            u_r: Matrix::uniform(hidden, hidden, b, rng),
            u_h: Matrix::uniform(hidden, hidden, b, rng),
            b_z: vec![0.0; hidden],
            b_r: vec![0.0; hidden],
            b_h: vec![0.0; hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_z.len()
    }

    pub fn input(&self) -> usize {
        self.w_z.cols
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("gru.w_z", &self.w_z.data),
            ("gru.w_r", &self.w_r.data),
            ("gru.w_h", &self.w_h.data),
            ("gru.u_z", &self.u_z.data),
            ("gru.u_r", &self.u_r.data),
            ("gru.u_h", &self.u_h.data),
            ("gru.b_z", &self.b_z),
            ("gru.b_r", &self.b_r),
            ("gru.b_h", &self.b_h),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        vec![
            &mut self.w_z.data,
            &mut self.w_r.data,
            &mut self.w_h.data,
            &mut self.u_z.data,
            &mut self.u_r.data,
            &mut self.u_h.data,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    fn check(&self, x: &[f64], h_prev: &[f64]) -> Result<()> {
        let h = self.hidden();
        let shapes = [
            (self.w_r.rows, h),
            (self.w_h.rows, h),
            (self.u_z.rows, h),
            (self.u_z.cols, h),
            (self.u_r.rows, h),
            (self.u_r.cols, h),
            (self.u_h.rows, h),
            (self.u_h.cols, h),
            (self.b_r.len(), h),
            (self.b_h.len(), h),
            (self.w_z.rows, h),
            (self.w_r.cols, self.input()),
            (self.w_h.cols, self.input()),
        ];
        if let Some((actual, expected)) = shapes.iter().find(|(a, e)| a != e) {
            return Err(Error::Shape {
                context: "gru weights",
                expected: *expected,
                actual: *actual,
            });
        }
        if x.len() != self.input() {
            return Err(Error::Shape {
                context: "gru input",
                expected: self.input(),
                actual: x.len(),
            });
        }
        if h_prev.len() != h {
            return Err(Error::Shape {
                context: "gru hidden state",
                expected: h,
                actual: h_prev.len(),
            });
        }
        Ok(())
    }
}

/// One GRU step:
/// `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
/// `h' = z ⊙ h + (1 − z) ⊙ tanh(W_h x + U_h (r ⊙ h) + b_h)`.
pub fn gru_cell_forward(x: &[f64], h_prev: &[f64], w: &GruWeights) -> Result<GruStep> {
    w.check(x, h_prev)?;
    let mut z = w.b_z.clone();
    w.w_z.matvec_acc(x, &mut z);
    w.u_z.matvec_acc(h_prev, &mut z);
    z.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut r = w.b_r.clone();
    w.w_r.matvec_acc(x, &mut r);
    w.u_r.matvec_acc(h_prev, &mut r);
    r.iter_mut().for_each(|v| *v = sigmoid(*v));

    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let mut cand = w.b_h.clone();
    w.w_h.matvec_acc(x, &mut cand);
    w.u_h.matvec_acc(&rh, &mut cand);
    cand.iter_mut().for_each(|v| *v = v.tanh());

    let h = z
        .iter()
        .zip(h_prev.iter().zip(&cand))
        .map(|(zi, (hp, c))| zi * hp + (1.0 - zi) * c)
        .collect();
    Ok(GruStep { h, z, r, cand, rh })
}

/// Backpropagates `dh` (gradient of the loss w.r.t. this step's output)
/// through one step, accumulating into `grad` and returning the gradient
/// w.r.t. `h_prev`.
pub fn gru_cell_backward(
    x: &[f64],
    h_prev: &[f64],
    step: &GruStep,
    dh: &[f64],
    w: &GruWeights,
    grad: &mut GruWeights,
) -> Vec<f64> {
    let n = dh.len();
    let mut da_z = vec![0.0; n];
    let mut da_h = vec![0.0; n];
    let mut dh_prev = vec![0.0; n];
    for i in 0..n {
        let (z, c) = (step.z[i], step.cand[i]);
        da_z[i] = dh[i] * (h_prev[i] - c) * z * (1.0 - z);
        da_h[i] = dh[i] * (1.0 - z) * (1.0 - c * c);
        dh_prev[i] = dh[i] * z;
    }
    let mut d_rh = vec![0.0; n];
    w.u_h.matvec_t_acc(&da_h, &mut d_rh);
    let mut da_r = vec![0.0; n];
    for i in 0..n {
        let r = step.r[i];
        da_r[i] = d_rh[i] * h_prev[i] * r * (1.0 - r);
        dh_prev[i] += d_rh[i] * r;
    }
    w.u_z.matvec_t_acc(&da_z, &mut dh_prev);
    w.u_r.matvec_t_acc(&da_r, &mut dh_prev);

    grad.w_z.outer_acc(&da_z, x);
    grad.w_r.outer_acc(&da_r, x);
    grad.w_h.outer_acc(&da_h, x);
    grad.u_z.outer_acc(&da_z, h_prev);
    grad.u_r.outer_acc(&da_r, h_prev);
    grad.u_h.outer_acc(&da_h, &step.rh);
    for i in 0..n {
        grad.b_z[i] += da_z[i];
        grad.b_r[i] += da_r[i];
        grad.b_h[i] += da_h[i];
    }
    dh_prev
}
