//! Expectation-Maximization for univariate Gaussian mixtures.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::mdn::{log_sum_exp, GmmParams, SIGMA_FLOOR};

/// Components whose effective count falls below this fraction of N are
/// re-seeded.
const EMPTY_COMPONENT_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmState {
    pub params: GmmParams,
    /// `responsibilities[n][j]`
    pub responsibilities: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub iteration: usize,
    /// Log-likelihood of the initial parameters followed by one entry per iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum EmInit {
    Seed(u64),
    Params(GmmParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub sigma_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            k: 3,
            tol: 1e-6,
            max_iter: 500,
            restarts: 5,
            seed: 0,
            sigma_floor: SIGMA_FLOOR,
        }
    }
}

/// Persisted outcome of a multi-restart fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub params: GmmParams,
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub best_restart: usize,
    pub seed: u64,
}

/// `γ_nj = π_j N(ξ_n|μ_j,σ_j²) / Σ_i π_i N(ξ_n|μ_i,σ_i²)`, in log space.
pub fn e_step(data: &[f64], params: &GmmParams) -> Vec<Vec<f64>> {
    data.iter()
        .map(|x| {
            let terms = params.component_log_terms(*x);
            let lse = log_sum_exp(&terms);
            terms.iter().map(|t| (t - lse).exp()).collect()
        })
        .collect()
}

/// Weighted moments per component. A component with (near) zero effective
/// count is re-seeded at the least confidently assigned point, with the
/// global standard deviation and weight `1/N`.
pub fn m_step(data: &[f64], gamma: &[Vec<f64>], sigma_floor: f64) -> Result<GmmParams> {
    let n = data.len();
    if n == 0 || gamma.len() != n {
        return Err(Error::Shape {
            context: "m-step responsibilities",
            expected: n,
            actual: gamma.len(),
        });
    }
    let k = gamma[0].len();
    let nf = n as f64;
    let mut weights = vec![0.0; k];
    let mut means = vec![0.0; k];
    let mut stds = vec![0.0; k];
    let mut empty = Vec::new();
    for j in 0..k {
        let nj: f64 = gamma.iter().map(|g| g[j]).sum();
        if nj < EMPTY_COMPONENT_FRACTION * nf {
            empty.push(j);
            continue;
        }
        let mu = gamma.iter().zip(data).map(|(g, x)| g[j] * x).sum::<f64>() / nj;
        let var = gamma
            .iter()
            .zip(data)
            .map(|(g, x)| g[j] * (x - mu) * (x - mu))
            .sum::<f64>()
            / nj;
        weights[j] = nj / nf;
        means[j] = mu;
        stds[j] = var.max(sigma_floor * sigma_floor).sqrt();
    }
    if !empty.is_empty() {
        let global_mean = data.iter().sum::<f64>() / nf;
        let global_sd = (data.iter().map(|x| (x - global_mean).powi(2)).sum::<f64>() / nf)
            .sqrt()
            .max(sigma_floor);
        let mut order: Vec<usize> = (0..n).collect();
        let confidence = |i: usize| gamma[i].iter().copied().fold(0.0, f64::max);
        order.sort_by(|a, b| confidence(*a).total_cmp(&confidence(*b)).then(a.cmp(b)));
        for (slot, j) in empty.into_iter().enumerate() {
            means[j] = data[order[slot % n]];
            stds[j] = global_sd;
            weights[j] = 1.0 / nf;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }
    GmmParams::new(weights, means, stds)
}

/// `Σ_n log Σ_k π_k N(x_n | μ_k, σ_k²)`
pub fn log_likelihood(data: &[f64], params: &GmmParams) -> f64 {
    data.iter().map(|x| params.log_pdf(*x)).sum()
}

fn check_data(data: &[f64], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("EM needs K >= 1"));
    }
    if data.len() < k {
        return Err(Error::invalid(format!(
            "EM needs at least K={k} data points, got {}",
            data.len()
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("EM data contains non-finite values"));
    }
    Ok(())
}

/// K distinct data points as means, the global variance for every
/// component, uniform weights.
pub fn init_params(data: &[f64], k: usize, seed: u64, sigma_floor: f64) -> Result<GmmParams> {
    check_data(data, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, data.len(), k);
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
        .sqrt()
        .max(sigma_floor);
    GmmParams::new(
        vec![1.0 / k as f64; k],
        picks.iter().map(|i| data[i]).collect(),
        vec![sd; k],
    )
}

/// Single EM run from `init`, iterating until the absolute log-likelihood
/// change drops below `tol` or `max_iter` iterations have run.
pub fn em_fit(data: &[f64], k: usize, init: EmInit, tol: f64, max_iter: usize, sigma_floor: f64) -> Result<EmState> {
    check_data(data, k)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("EM tolerance must be positive"));
    }
    let mut params = match init {
        EmInit::Seed(seed) => init_params(data, k, seed, sigma_floor)?,
        EmInit::Params(p) if p.k() == k => p,
        EmInit::Params(p) => {
            return Err(Error::Shape {
                context: "EM initial params",
                expected: k,
                actual: p.k(),
            })
        }
    };
    let mut ll = log_likelihood(data, &params);
    let mut trace = vec![ll];
    let mut iteration = 0;
    while iteration < max_iter {
        let gamma = e_step(data, &params);
        params = m_step(data, &gamma, sigma_floor)?;
        let next = log_likelihood(data, &params);
        iteration += 1;
        trace.push(next);
        let delta = (next - ll).abs();
        ll = next;
        if delta < tol {
            break;
        }
    }
    Ok(EmState {
        responsibilities: e_step(data, &params),
        params,
        log_likelihood: ll,
        iteration,
        trace,
    })
}

/// Runs `cfg.restarts` seeded fits (seeds `cfg.seed + r`) and keeps the one
/// with the highest final log-likelihood; ties go to the earliest restart.
pub fn em_fit_restarts(data: &[f64], cfg: &EmConfig, exec: ExecMode) -> Result<(EmState, FitRecord)> {
    check_data(data, cfg.k)?;
    let restarts = cfg.restarts.max(1);
    let runs = exec.map_range(restarts, |r| {
        em_fit(
            data,
            cfg.k,
            EmInit::Seed(cfg.seed.wrapping_add(r as u64)),
            cfg.tol,
            cfg.max_iter,
            cfg.sigma_floor,
        )
    });
    let mut best: Option<(usize, EmState)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let run = run?;
        if best.as_ref().is_none_or(|(_, b)| run.log_likelihood > b.log_likelihood) {
            best = Some((r, run));
        }
    }
    let (best_restart, state) = best.expect("at least one restart");
    let record = FitRecord {
        params: state.params.clone(),
        log_likelihood_trace: state.trace.clone(),
        iterations: state.iteration,
        restarts,
        best_restart,
        seed: cfg.seed,
    };
    Ok((state, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdn::gmm_nll;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, Normal};

    fn normal_pdf(x: f64, m: f64, s: f64) -> f64 {
        (-0.5 * ((x - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    fn bimodal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Normal::new(-5.0, 1.0).unwrap();
        let b = Normal::new(5.0, 1.0).unwrap();
        (0..n)
            .map(|i| if i % 2 == 0 { a.sample(&mut rng) } else { b.sample(&mut rng) })
            .collect()
    }

    #[test]
    fn single_component_responsibilities_are_one() {
        let p = GmmParams::single(1.0, 2.0).unwrap();
        for row in e_step(&[-3.0, 0.0, 10.0], &p) {
            assert_eq!(row, vec![1.0]);
        }
    }

    #[test]
    fn identical_components_give_prior_weights() {
        let p = GmmParams::new(vec![0.2, 0.8], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        for row in e_step(&[-1.0, 0.3, 4.0], &p) {
            assert_relative_eq!(row[0], 0.2, epsilon = 1e-12);
            assert_relative_eq!(row[1], 0.8, epsilon = 1e-12);
        }
    }

    #[test]
    fn e_step_matches_direct_formula() {
        let data = [-1.0, 0.0, 0.5, 2.0, 3.5];
        let p = GmmParams::new(vec![0.3, 0.7], vec![0.0, 2.0], vec![1.0, 0.8]).unwrap();
        let g = e_step(&data, &p);
        for (n, x) in data.iter().enumerate() {
            let a = 0.3 * normal_pdf(*x, 0.0, 1.0);
            let b = 0.7 * normal_pdf(*x, 2.0, 0.8);
            assert_relative_eq!(g[n][0], a / (a + b), max_relative = 1e-12);
            assert_relative_eq!(g[n][1], b / (a + b), max_relative = 1e-12);
        }
    }

    #[test]
    fn m_step_single_component_closed_form() {
        let data = [1.0, 2.0, 4.0, 9.0];
        let gamma = vec![vec![1.0]; 4];
        let p = m_step(&data, &gamma, SIGMA_FLOOR).unwrap();
        assert_relative_eq!(p.means()[0], 4.0);
        assert_relative_eq!(p.stds()[0].powi(2), (9.0 + 4.0 + 0.0 + 25.0) / 4.0, max_relative = 1e-12);
        assert_eq!(p.weights(), &[1.0]);
    }

    #[test]
    fn m_step_hard_assignment_partitions() {
        let data = [0.0, 1.0, 2.0, 10.0, 14.0];
        let gamma: Vec<Vec<f64>> = data
            .iter()
            .map(|x| if *x < 5.0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
            .collect();
        let p = m_step(&data, &gamma, SIGMA_FLOOR).unwrap();
        assert_relative_eq!(p.means()[0], 1.0);
        assert_relative_eq!(p.means()[1], 12.0);
        assert_relative_eq!(p.stds()[0].powi(2), 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(p.stds()[1].powi(2), 4.0, max_relative = 1e-12);
        assert_relative_eq!(p.weights()[0], 0.6);
    }

    #[test]
    fn m_step_matches_weighted_moments() {
        let data = [0.1, -0.4, 1.3, 2.2, 2.9, 3.3, -1.0, 0.7, 4.1, 2.5];
        let gamma: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let a = (i as f64 + 1.0) / 11.0;
                vec![a, 1.0 - a]
            })
            .collect();
        let p = m_step(&data, &gamma, SIGMA_FLOOR).unwrap();
        for j in 0..2 {
            let w: Vec<f64> = gamma.iter().map(|g| g[j]).collect();
            let nj: f64 = w.iter().sum();
            let mu: f64 = w.iter().zip(&data).map(|(a, b)| a * b).sum::<f64>() / nj;
            let var: f64 = w.iter().zip(&data).map(|(a, b)| a * (b - mu).powi(2)).sum::<f64>() / nj;
            assert_relative_eq!(p.means()[j], mu, max_relative = 1e-12);
            assert_relative_eq!(p.stds()[j], var.sqrt(), max_relative = 1e-12);
            assert_relative_eq!(p.weights()[j], nj / 10.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn empty_component_is_reseeded() {
        let data = [0.0, 0.1, 0.2, 5.0];
        let gamma = vec![vec![1.0, 0.0]; 4];
        let p = m_step(&data, &gamma, SIGMA_FLOOR).unwrap();
        assert!(p.weights()[1] > 0.0);
        assert!(p.stds().iter().all(|s| s.is_finite() && *s > 0.0));
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_cases() {
        let p = GmmParams::single(0.0, 1.0).unwrap();
        assert_relative_eq!(log_likelihood(&[0.0], &p), -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-15);

        let data = [-1.0, 0.0, 0.5, 2.0, 3.5];
        let q = GmmParams::new(vec![0.4, 0.6], vec![0.0, 2.5], vec![1.2, 0.6]).unwrap();
        let direct: f64 = data
            .iter()
            .map(|x| (0.4 * normal_pdf(*x, 0.0, 1.2) + 0.6 * normal_pdf(*x, 2.5, 0.6)).ln())
            .sum();
        assert_relative_eq!(log_likelihood(&data, &q), direct, max_relative = 1e-12);
        let nll = gmm_nll(&data, &vec![q.clone(); 5]).unwrap();
        assert_relative_eq!(log_likelihood(&data, &q), -5.0 * nll, max_relative = 1e-12);
    }

    #[test]
    fn single_gaussian_converges_to_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dist = Normal::new(3.0, 2.0).unwrap();
        let data: Vec<f64> = (0..500).map(|_| dist.sample(&mut rng)).collect();
        let st = em_fit(&data, 1, EmInit::Seed(0), 1e-6, 500, SIGMA_FLOOR).unwrap();
        let mean = data.iter().sum::<f64>() / 500.0;
        let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 500.0;
        assert!(st.iteration <= 2);
        assert_relative_eq!(st.params.means()[0], mean, max_relative = 1e-12);
        assert_relative_eq!(st.params.stds()[0], var.sqrt(), max_relative = 1e-12);
        let one = em_fit(&data, 1, EmInit::Seed(0), 1e-6, 1, SIGMA_FLOOR).unwrap();
        assert_relative_eq!(one.params.means()[0], mean, max_relative = 1e-12);
    }

    #[test]
    fn zero_budget_returns_init() {
        let data = bimodal(50, 2);
        let init = init_params(&data, 2, 9, SIGMA_FLOOR).unwrap();
        let st = em_fit(&data, 2, EmInit::Seed(9), 1e-6, 0, SIGMA_FLOOR).unwrap();
        assert_eq!(st.iteration, 0);
        assert_eq!(st.params, init);
        assert_eq!(st.trace.len(), 1);
    }

    #[test]
    fn errors() {
        assert!(em_fit(&[1.0], 2, EmInit::Seed(0), 1e-6, 10, SIGMA_FLOOR).is_err());
        assert!(em_fit(&[1.0, f64::NAN], 1, EmInit::Seed(0), 1e-6, 10, SIGMA_FLOOR).is_err());
        assert!(em_fit(&[1.0, 2.0], 1, EmInit::Seed(0), 0.0, 10, SIGMA_FLOOR).is_err());
    }

    #[test]
    fn recovers_bimodal_and_is_monotone() {
        let data = bimodal(2000, 17);
        let cfg = EmConfig {
            k: 2,
            seed: 4,
            ..EmConfig::default()
        };
        let (state, record) = em_fit_restarts(&data, &cfg, ExecMode::Parallel).unwrap();
        for w in state.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        let mut comps: Vec<(f64, f64)> = state
            .params
            .means()
            .iter()
            .copied()
            .zip(state.params.weights().iter().copied())
            .collect();
        comps.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((comps[0].0 + 5.0).abs() < 0.15 && (comps[1].0 - 5.0).abs() < 0.15);
        assert!((comps[0].1 - 0.5).abs() < 0.05);
        assert_eq!(record.restarts, 5);
        for row in &state.responsibilities {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let (seq, _) = em_fit_restarts(&data, &cfg, ExecMode::Sequential).unwrap();
        assert_eq!(seq, state);
    }

    #[test]
    fn converged_state_is_fixed_point() {
        let data = bimodal(400, 8);
        let st = em_fit(&data, 2, EmInit::Seed(1), 1e-10, 2000, SIGMA_FLOOR).unwrap();
        let again = em_fit(&data, 2, EmInit::Params(st.params.clone()), 1e-10, 1, SIGMA_FLOOR).unwrap();
        for (a, b) in st.params.means().iter().zip(again.params.means()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn permuted_initializations_agree() {
        let data = bimodal(600, 21);
        let a = GmmParams::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![3.0, 3.0]).unwrap();
        let b = GmmParams::new(vec![0.5, 0.5], vec![1.0, -1.0], vec![3.0, 3.0]).unwrap();
        let fa = em_fit(&data, 2, EmInit::Params(a), 1e-10, 1000, SIGMA_FLOOR).unwrap();
        let fb = em_fit(&data, 2, EmInit::Params(b), 1e-10, 1000, SIGMA_FLOOR).unwrap();
        let sorted = |p: &GmmParams| {
            let mut v: Vec<(f64, f64, f64)> = (0..p.k())
                .map(|i| (p.means()[i], p.stds()[i], p.weights()[i]))
                .collect();
            v.sort_by(|x, y| x.0.total_cmp(&y.0));
            v
        };
        for (x, y) in sorted(&fa.params).iter().zip(sorted(&fb.params)) {
            assert!((x.0 - y.0).abs() < 1e-6 && (x.1 - y.1).abs() < 1e-6 && (x.2 - y.2).abs() < 1e-6);
        }
    }
}
