use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::mdn::sigmoid;

/// Standard LSTM cell (input, forget, output gates and tanh candidate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights {
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_o: Matrix,
    pub w_g: Matrix,
    pub u_i: Matrix,
    pub u_f: Matrix,
    pub u_o: Matrix,
    pub u_g: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl LstmWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let wm = || Matrix::zeros(hidden, input);
        let um = || Matrix::zeros(hidden, hidden);
        LstmWeights {
            w_i: wm(),
            w_f: wm(),
            w_o: wm(),
            w_g: wm(),
            u_i: um(),
            u_f: um(),
            u_o: um(),
            u_g: um(),
            b_i: vec![0.0; hidden],
            b_f: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
            b_g: vec![0.0; hidden],
        }
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let b = 1.0 / (hidden as f64).sqrt();
        let mut w = LstmWeights::zeros(input, hidden);
        for m in [&mut w.w_i, &mut w.w_f, &mut w.w_o, &mut w.w_g] {
            *m = Matrix::uniform(hidden, input, b, rng);
        }
        for m in [&mut w.u_i, &mut w.u_f, &mut w.u_o, &mut w.u_g] {
            *m = Matrix::uniform(hidden, hidden, b, rng);
        }
        w
    }

    pub fn hidden(&self) -> usize {
        self.b_i.len()
    }

    pub fn input(&self) -> usize {
        self.w_i.cols
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("lstm.w_i", &self.w_i.data),
            ("lstm.w_f", &self.w_f.data),
            ("lstm.w_o", &self.w_o.data),
            ("lstm.w_g", &self.w_g.data),
            ("lstm.u_i", &self.u_i.data),
            ("lstm.u_f", &self.u_f.data),
            ("lstm.u_o", &self.u_o.data),
            ("lstm.u_g", &self.u_g.data),
            ("lstm.b_i", &self.b_i),
            ("lstm.b_f", &self.b_f),
            ("lstm.b_o", &self.b_o),
            ("lstm.b_g", &self.b_g),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        vec![
            &mut self.w_i.data,
            &mut self.w_f.data,
            &mut self.w_o.data,
            &mut self.w_g.data,
            &mut self.u_i.data,
            &mut self.u_f.data,
            &mut self.u_o.data,
            &mut self.u_g.data,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_g,
        ]
    }

    fn check(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<()> {
        let h = self.hidden();
        let (inp, hid) = (self.input(), h);
        let ws = [&self.w_i, &self.w_f, &self.w_o, &self.w_g];
        let us = [&self.u_i, &self.u_f, &self.u_o, &self.u_g];
        let bs = [&self.b_i, &self.b_f, &self.b_o, &self.b_g];
        let bad = ws.iter().any(|m| m.rows != hid || m.cols != inp)
            || us.iter().any(|m| m.rows != hid || m.cols != hid)
            || bs.iter().any(|b| b.len() != hid);
        if bad {
            return Err(Error::invalid("lstm weight shapes are inconsistent"));
        }
        for (context, expected, actual) in [
            ("lstm input", inp, x.len()),
            ("lstm hidden state", hid, h_prev.len()),
            ("lstm cell state", hid, c_prev.len()),
        ] {
            if expected != actual {
                return Err(Error::Shape {
                    context,
                    expected,
                    actual,
                });
            }
        }
        Ok(())
    }
}

fn gate(w: &Matrix, u: &Matrix, b: &[f64], x: &[f64], h: &[f64], act: fn(f64) -> f64) -> Vec<f64> {
    let mut a = b.to_vec();
    w.matvec_acc(x, &mut a);
    u.matvec_acc(h, &mut a);
    a.into_iter().map(act).collect()
}

/// `c = f ⊙ c_prev + i ⊙ g`, `h = o ⊙ tanh(c)`.
pub fn lstm_cell_forward(x: &[f64], h_prev: &[f64], c_prev: &[f64], w: &LstmWeights) -> Result<LstmStep> {
    w.check(x, h_prev, c_prev)?;
    let i = gate(&w.w_i, &w.u_i, &w.b_i, x, h_prev, sigmoid);
    let f = gate(&w.w_f, &w.u_f, &w.b_f, x, h_prev, sigmoid);
    let o = gate(&w.w_o, &w.u_o, &w.b_o, x, h_prev, sigmoid);
    let g = gate(&w.w_g, &w.u_g, &w.b_g, x, h_prev, f64::tanh);
    let c: Vec<f64> = (0..i.len()).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
    Ok(LstmStep {
        h,
        c,
        i,
        f,
        o,
        g,
        tanh_c,
    })
}

/// Returns `(dh_prev, dc_prev)` given the gradients flowing into this
/// step's `h` and `c`.
#[allow(clippy::too_many_arguments)]
pub fn lstm_cell_backward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    step: &LstmStep,
    dh: &[f64],
    dc_next: &[f64],
    w: &LstmWeights,
    grad: &mut LstmWeights,
) -> (Vec<f64>, Vec<f64>) {
    let n = dh.len();
    let mut da_i = vec![0.0; n];
    let mut da_f = vec![0.0; n];
    let mut da_o = vec![0.0; n];
    let mut da_g = vec![0.0; n];
    let mut dc_prev = vec![0.0; n];
    for k in 0..n {
        let (i, f, o, g, tc) = (step.i[k], step.f[k], step.o[k], step.g[k], step.tanh_c[k]);
        let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
        da_o[k] = dh[k] * tc * o * (1.0 - o);
        da_f[k] = dc * c_prev[k] * f * (1.0 - f);
        da_i[k] = dc * g * i * (1.0 - i);
        da_g[k] = dc * i * (1.0 - g * g);
        dc_prev[k] = dc * f;
    }
    let mut dh_prev = vec![0.0; n];
    for (u, da) in [(&w.u_i, &da_i), (&w.u_f, &da_f), (&w.u_o, &da_o), (&w.u_g, &da_g)] {
        u.matvec_t_acc(da, &mut dh_prev);
    }
    grad.w_i.outer_acc(&da_i, x);
    grad.w_f.outer_acc(&da_f, x);
    grad.w_o.outer_acc(&da_o, x);
    grad.w_g.outer_acc(&da_g, x);
    grad.u_i.outer_acc(&da_i, h_prev);
    grad.u_f.outer_acc(&da_f, h_prev);
    grad.u_o.outer_acc(&da_o, h_prev);
    grad.u_g.outer_acc(&da_g, h_prev);
    for k in 0..n {
        grad.b_i[k] += da_i[k];
        grad.b_f[k] += da_f[k];
        grad.b_o[k] += da_o[k];
        grad.b_g[k] += da_g[k];
    }
    (dh_prev, dc_prev)
}
