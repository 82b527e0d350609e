//! Sequential vs parallel execution of the data-parallel sections.

use std::hint::black_box;

use chrono::NaiveDate;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ddsp_core::data::windows_from_days;
use ddsp_core::em::{em_fit_restarts, EmConfig};
use ddsp_core::eval::{rolling_evaluate, EvalConfig, OptimizerMode};
use ddsp_core::forecast::{Forecast, Forecaster};
use ddsp_core::mdn::GmmParams;
use ddsp_core::nn::{batch_loss_and_grad, CellKind, HeadLoss, HeadSpec, ModelSpec, RecurrentModel};
use ddsp_core::relocation::RelocationInstance;
use ddsp_core::scenario::sample_scenarios;
use ddsp_core::synth::{generate_series, SynthConfig};
use ddsp_core::ExecMode;

const MODES: [ExecMode; 2] = [ExecMode::Sequential, ExecMode::Parallel];

fn label(mode: ExecMode) -> &'static str {
    match mode {
        ExecMode::Sequential => "sequential",
        ExecMode::Parallel => "parallel",
    }
}

fn scenario_sampling(c: &mut Criterion) {
    let forecasts: Vec<GmmParams> = (0..5)
        .map(|z| GmmParams::new(vec![0.3, 0.5, 0.2], vec![10.0 + z as f64, 40.0, 80.0], vec![3.0, 5.0, 8.0]).unwrap())
        .collect();
    let mut g = c.benchmark_group("scenario_sampling_20k");
    for mode in MODES {
        g.bench_function(BenchmarkId::from_parameter(label(mode)), |b| {
            b.iter(|| sample_scenarios(black_box(&forecasts), 20_000, 1, mode).unwrap())
        });
    }
    g.finish();
}

fn batch_gradient(c: &mut Criterion) {
    let series = generate_series(&SynthConfig {
        days: 200,
        ..Default::default()
    })
    .unwrap();
    let days: Vec<Vec<f64>> = (0..series.len()).map(|d| series.day(d).iter().map(|v| v / 50.0).collect()).collect();
    let windows = windows_from_days(&days, 10);
    let batch: Vec<_> = windows.pairs.iter().take(64).collect();
    let model = RecurrentModel::new(
        ModelSpec {
            cell: CellKind::Gru,
            zones: 2,
            hidden: 32,
            dense: vec![256, 128],
            head: HeadSpec::Mdn { k: 3, aux: false },
            sigma_floor: 1e-3,
        },
        0,
    )
    .unwrap();
    let mut g = c.benchmark_group("gru_mdn_batch_gradient_64");
    for mode in MODES {
        g.bench_function(BenchmarkId::from_parameter(label(mode)), |b| {
            b.iter(|| batch_loss_and_grad(black_box(&model), HeadLoss::Nll, &batch, mode).unwrap())
        });
    }
    g.finish();
}

fn em_restarts(c: &mut Criterion) {
    let series = generate_series(&SynthConfig {
        days: 2000,
        ..Default::default()
    })
    .unwrap();
    let data = series.values[0].clone();
    let cfg = EmConfig {
        restarts: 8,
        ..Default::default()
    };
    let mut g = c.benchmark_group("em_8_restarts");
    g.sample_size(20);
    for mode in MODES {
        g.bench_function(BenchmarkId::from_parameter(label(mode)), |b| {
            b.iter(|| em_fit_restarts(black_box(&data), &cfg, mode).unwrap())
        });
    }
    g.finish();
}

/// Same mixture forecast every day.
struct Climatology {
    mixtures: Vec<GmmParams>,
}

impl Forecaster for Climatology {
    fn name(&self) -> String {
        "climatology".into()
    }

    fn window_size(&self) -> usize {
        5
    }

    fn forecast(&self, _target: NaiveDate, _window: &[Vec<f64>]) -> ddsp_core::Result<Forecast> {
        Ok(Forecast::Distribution(self.mixtures.clone()))
    }
}

fn rolling_evaluation(c: &mut Criterion) {
    let series = generate_series(&SynthConfig {
        days: 120,
        zones: 3,
        ..Default::default()
    })
    .unwrap();
    let forecaster = Climatology {
        mixtures: vec![
            GmmParams::new(vec![0.5, 0.5], vec![20.0, 80.0], vec![5.0, 5.0]).unwrap(),
            GmmParams::single(40.0, 5.0).unwrap(),
            GmmParams::single(40.0, 5.0).unwrap(),
        ],
    };
    let instance = RelocationInstance {
        zones: series.zones.clone(),
        stock: vec![50.0, 50.0, 50.0],
        cost: vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]],
        price: 10.0,
        penalty: 5.0,
    };
    let (hist, test) = (series.slice(0, 90), series.slice(90, 120));
    let cfg = EvalConfig {
        scenarios: 100,
        ..Default::default()
    };
    let mut g = c.benchmark_group("stochastic_rolling_evaluation_30_days");
    g.sample_size(10);
    for mode in MODES {
        g.bench_function(BenchmarkId::from_parameter(label(mode)), |b| {
            b.iter(|| rolling_evaluate(&forecaster, OptimizerMode::Stochastic, &hist, &test, &instance, &cfg, mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, scenario_sampling, batch_gradient, em_restarts, rolling_evaluation);
criterion_main!(benches);
