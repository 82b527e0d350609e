mod common;

use std::time::Instant;

use common::relocation_oracle::{grid_search, random_instance};
use ddsp_core::lp::certify;
use ddsp_core::mdn::GmmParams;
use ddsp_core::relocation::{
    build_two_stage, deterministic_model, expected_objective, solve_deterministic, solve_model, solve_stochastic,
};
use ddsp_core::scenario::{sample_scenarios, ScenarioSet};
use ddsp_core::ExecMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn two_zones_two_scenarios_match_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..25 {
        let inst = random_instance(&mut rng, 2, 8);
        let scen: Vec<Vec<f64>> = (0..2).map(|_| (0..2).map(|_| rng.random_range(0..=10) as f64).collect()).collect();
        let max_flow = inst.fleet() as usize;
        let oracle = grid_search(&inst, &scen, max_flow);
        let s = solve_stochastic(&inst, &ScenarioSet::from_vectors(scen).unwrap()).unwrap();
        assert!((s.objective - oracle).abs() <= 1e-6, "{} vs {oracle}", s.objective);
    }
}

#[test]
fn three_zone_deterministic_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..8 {
        let inst = random_instance(&mut rng, 3, 4);
        let demand: Vec<f64> = (0..3).map(|_| rng.random_range(0..=6) as f64).collect();
        let oracle = grid_search(&inst, &[demand.clone()], inst.fleet() as usize);
        let s = solve_deterministic(&inst, &demand).unwrap();
        assert!((s.objective - oracle).abs() <= 1e-6, "{} vs {oracle}", s.objective);
    }
}

#[test]
fn stochastic_plan_dominates_in_sample_at_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(79);
    let started = Instant::now();
    for case in 0..5 {
        let z = 5;
        let inst = random_instance(&mut rng, z, 40);
        let forecasts: Vec<GmmParams> = (0..z)
            .map(|_| {
                GmmParams::new(
                    vec![0.5, 0.5],
                    vec![rng.random_range(0.0..20.0), rng.random_range(10.0..50.0)],
                    vec![rng.random_range(1.0..5.0), rng.random_range(1.0..5.0)],
                )
                .unwrap()
            })
            .collect();
        let scen = sample_scenarios(&forecasts, 200, case, ExecMode::Sequential).unwrap();
        let (lp, idx) = build_two_stage(&inst, &scen).unwrap();
        let sp = solve_model(&inst, &lp, &idx).unwrap();
        assert!(sp.certificate.is_certified());
        let det = solve_deterministic(&inst, &scen.mean()).unwrap();
        let det_value = expected_objective(&inst, &det.plan, &scen).unwrap();
        assert!(sp.objective >= det_value - 1e-7);
        let (dlp, _) = deterministic_model(&inst, &scen.mean()).unwrap();
        assert!(certify(&dlp, &ddsp_core::lp::solve_lp(&dlp).unwrap()).is_certified());
    }
    eprintln!("5 stochastic solves: {:?}", started.elapsed());
}
