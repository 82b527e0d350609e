//! Single-period fleet relocation.
//!
//! First stage: move `r_ij >= 0` vehicles from zone `i` to zone `j` at cost
//! `c_ij`, giving post-move stock `s'_z = s_z − Σ_j r_zj + Σ_i r_iz`.
//! Second stage, per demand scenario `ω`: serve `y_zω <= min(s'_z, d_zω)`
//! at price `p`; every unserved unit costs the penalty `ℓ`. The
//! deterministic equivalent maximizes
//!
//! ```text
//! −Σ c_ij r_ij + (1/N) Σ_ω Σ_z [ p·y_zω − ℓ·(d_zω − y_zω) ]
//! ```
//!
//! Flows are continuous (LP relaxation); [`round_plan`] gives an integer
//! plan and the resulting gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::lp::{certify, solve_lp, Certificate, LinearProgram, LpStatus, Relation};
use crate::mdn::GmmParams;
use crate::scenario::{sample_scenarios, ScenarioSet};

const CONSERVATION_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelocationInstance {
    pub zones: Vec<String>,
    /// Vehicles in each zone before relocation.
    pub stock: Vec<f64>,
    /// `cost[i][j]`: cost of moving one vehicle from `i` to `j`.
    pub cost: Vec<Vec<f64>>,
    /// Revenue per served demand unit.
    pub price: f64,
    /// Penalty per unmet demand unit.
    pub penalty: f64,
}

impl RelocationInstance {
    pub fn zone_count(&self) -> usize {
        self.zones.len()
    }

    pub fn fleet(&self) -> f64 {
        self.stock.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let z = self.zones.len();
        if z == 0 {
            return Err(Error::invalid("relocation instance has no zones"));
        }
        if self.stock.len() != z {
            return Err(Error::Shape {
                context: "instance stock",
                expected: z,
                actual: self.stock.len(),
            });
        }
        if self.cost.len() != z || self.cost.iter().any(|r| r.len() != z) {
            return Err(Error::invalid(format!("cost matrix must be {z}x{z}")));
        }
        if self.stock.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("initial stock must be finite and >= 0"));
        }
        for (i, row) in self.cost.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(Error::invalid(format!("cost[{i}][{i}] must be 0")));
            }
            if row.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(Error::invalid("relocation costs must be finite and >= 0"));
            }
        }
        if !(self.price.is_finite() && self.price >= 0.0 && self.penalty.is_finite() && self.penalty >= 0.0) {
            return Err(Error::invalid("price and penalty must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Column layout of the deterministic-equivalent LP: `Z²` flow columns
/// `r_ij` (row-major), then `N·Z` served-demand columns `y_zω`
/// (scenario-major).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarIndex {
    pub zones: usize,
    pub scenarios: usize,
}

impl VarIndex {
    pub fn flow(&self, i: usize, j: usize) -> usize {
        i * self.zones + j
    }

    pub fn served(&self, scenario: usize, zone: usize) -> usize {
        self.zones * self.zones + scenario * self.zones + zone
    }

    pub fn num_vars(&self) -> usize {
        self.zones * self.zones + self.scenarios * self.zones
    }

    /// Human-readable description of column `v`.
    pub fn describe(&self, v: usize) -> String {
        let zz = self.zones * self.zones;
        if v < zz {
            format!("r_{}_{}: vehicles moved from zone {} to zone {}", v / self.zones, v % self.zones, v / self.zones, v % self.zones)
        } else {
            let (w, z) = ((v - zz) / self.zones, (v - zz) % self.zones);
            format!("y_{w}_{z}: demand served in zone {z} under scenario {w}")
        }
    }
}

/// First-stage decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDecision {
    /// `flows[i][j]`, zero on the diagonal.
    pub flows: Vec<Vec<f64>>,
    pub post_stock: Vec<f64>,
}

impl PlanDecision {
    pub fn idle(instance: &RelocationInstance) -> Self {
        let z = instance.zone_count();
        PlanDecision {
            flows: vec![vec![0.0; z]; z],
            post_stock: instance.stock.clone(),
        }
    }

    /// Builds the plan and its post-move stock from explicit flows.
    pub fn from_flows(instance: &RelocationInstance, flows: Vec<Vec<f64>>) -> Result<Self> {
        let z = instance.zone_count();
        if flows.len() != z || flows.iter().any(|r| r.len() != z) {
            return Err(Error::invalid(format!("flow matrix must be {z}x{z}")));
        }
        let mut post = instance.stock.clone();
        for i in 0..z {
            for j in 0..z {
                if i != j {
                    post[i] -= flows[i][j];
                    post[j] += flows[i][j];
                }
            }
        }
        Ok(PlanDecision { flows, post_stock: post })
    }

    /// Total relocated vehicles, `Σ_{i≠j} r_ij`.
    pub fn moving(&self) -> f64 {
        self.flows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum::<f64>())
            .sum()
    }

    pub fn move_cost(&self, instance: &RelocationInstance) -> f64 {
        self.flows
            .iter()
            .zip(&instance.cost)
            .map(|(r, c)| r.iter().zip(c).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    /// Checks flow conservation, nonnegativity and fleet size within `1e-7`.
    pub fn check(&self, instance: &RelocationInstance) -> Result<()> {
        let rebuilt = PlanDecision::from_flows(instance, self.flows.clone())?;
        let bad = self.flows.iter().flatten().any(|v| *v < -CONSERVATION_TOL)
            || self.post_stock.iter().any(|v| *v < -CONSERVATION_TOL)
            || rebuilt
                .post_stock
                .iter()
                .zip(&self.post_stock)
                .any(|(a, b)| (a - b).abs() > CONSERVATION_TOL)
            || (self.post_stock.iter().sum::<f64>() - instance.fleet()).abs() > CONSERVATION_TOL;
        if bad {
            return Err(Error::invalid("plan violates flow conservation or nonnegativity"));
        }
        Ok(())
    }
}

/// Realized one-day metrics of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DayOutcome {
    pub revenue: f64,
    /// Relocation cost plus lost-sales penalty.
    pub cost: f64,
    pub moving: f64,
    pub lost_sales: f64,
}

impl DayOutcome {
    pub fn profit(&self) -> f64 {
        self.revenue - self.cost
    }
}

pub fn evaluate_decision(instance: &RelocationInstance, plan: &PlanDecision, realized: &[f64]) -> Result<DayOutcome> {
    if realized.len() != instance.zone_count() {
        return Err(Error::Shape {
            context: "realized demand",
            expected: instance.zone_count(),
            actual: realized.len(),
        });
    }
    let mut served = 0.0;
    let mut lost = 0.0;
    for (s, d) in plan.post_stock.iter().zip(realized) {
        let s = s.max(0.0);
        served += s.min(*d);
        lost += (d - s).max(0.0);
    }
    Ok(DayOutcome {
        revenue: instance.price * served,
        cost: plan.move_cost(instance) + instance.penalty * lost,
        moving: plan.moving(),
        lost_sales: lost,
    })
}

/// Exact expected profit of `plan` over the scenarios (recourse solved in
/// closed form).
pub fn expected_objective(instance: &RelocationInstance, plan: &PlanDecision, scenarios: &ScenarioSet) -> Result<f64> {
    let mut total = 0.0;
    for d in &scenarios.scenarios {
        total += evaluate_decision(instance, plan, d)?.profit();
    }
    Ok(total * scenarios.probability())
}

/// Deterministic equivalent over `scenarios`.
pub fn build_two_stage(instance: &RelocationInstance, scenarios: &ScenarioSet) -> Result<(LinearProgram, VarIndex)> {
    instance.validate()?;
    scenarios.validate()?;
    let z = instance.zone_count();
    if scenarios.zones() != z {
        return Err(Error::Shape {
            context: "scenario zones",
            expected: z,
            actual: scenarios.zones(),
        });
    }
    let n = scenarios.len();
    let idx = VarIndex { zones: z, scenarios: n };
    let mut lp = LinearProgram::new(idx.num_vars());
    let prob = scenarios.probability();
    let gain = (instance.price + instance.penalty) * prob;
    let mut total_demand = 0.0;
    for i in 0..z {
        for j in 0..z {
            let v = idx.flow(i, j);
            lp.objective[v] = -instance.cost[i][j];
            lp.names[v] = format!("r_{i}_{j}");
        }
        lp.upper[idx.flow(i, i)] = 0.0;
    }
    for (w, d) in scenarios.scenarios.iter().enumerate() {
        for (zz, dz) in d.iter().enumerate() {
            let v = idx.served(w, zz);
            lp.objective[v] = gain;
            lp.upper[v] = *dz;
            lp.names[v] = format!("y_{w}_{zz}");
            total_demand += dz;
        }
    }
    lp.objective_constant = -instance.penalty * prob * total_demand;

    // net outflow of zone zz: Σ_j r_zj − Σ_i r_iz
    let net_out = |zz: usize| -> Vec<(usize, f64)> {
        (0..z)
            .filter(|j| *j != zz)
            .flat_map(|j| [(idx.flow(zz, j), 1.0), (idx.flow(j, zz), -1.0)])
            .collect()
    };
    for zz in 0..z {
        // s'_z >= 0
        lp.add_constraint(net_out(zz), Relation::Le, instance.stock[zz]);
    }
    for w in 0..n {
        for zz in 0..z {
            // y_zω <= s'_z
            let mut row = vec![(idx.served(w, zz), 1.0)];
            row.extend(net_out(zz));
            lp.add_constraint(row, Relation::Le, instance.stock[zz]);
        }
    }
    Ok((lp, idx))
}

/// Same model with the single scenario `point_demand`.
pub fn deterministic_model(instance: &RelocationInstance, point_demand: &[f64]) -> Result<(LinearProgram, VarIndex)> {
    let demand = point_demand.iter().map(|v| v.max(0.0)).collect();
    build_two_stage(instance, &ScenarioSet::from_vectors(vec![demand])?)
}

/// Optimal plan of a relocation LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedPlan {
    pub plan: PlanDecision,
    /// Optimal LP objective (expected profit over the model's scenarios).
    pub objective: f64,
    pub iterations: usize,
    pub certificate: Certificate,
}

pub fn extract_plan(instance: &RelocationInstance, idx: &VarIndex, x: &[f64]) -> Result<PlanDecision> {
    let z = idx.zones;
    let flows = (0..z)
        .map(|i| {
            (0..z)
                .map(|j| if i == j { 0.0 } else { x[idx.flow(i, j)].max(0.0) })
                .collect()
        })
        .collect();
    PlanDecision::from_flows(instance, flows)
}

pub fn solve_model(instance: &RelocationInstance, lp: &LinearProgram, idx: &VarIndex) -> Result<SolvedPlan> {
    let sol = solve_lp(lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::invalid(format!("relocation LP ended with status {:?}", sol.status)));
    }
    let plan = extract_plan(instance, idx, &sol.x)?;
    plan.check(instance)?;
    Ok(SolvedPlan {
        plan,
        objective: sol.objective,
        iterations: sol.iterations,
        certificate: certify(lp, &sol),
    })
}

pub fn solve_stochastic(instance: &RelocationInstance, scenarios: &ScenarioSet) -> Result<SolvedPlan> {
    let (lp, idx) = build_two_stage(instance, scenarios)?;
    solve_model(instance, &lp, &idx)
}

pub fn solve_deterministic(instance: &RelocationInstance, point_demand: &[f64]) -> Result<SolvedPlan> {
    let (lp, idx) = deterministic_model(instance, point_demand)?;
    solve_model(instance, &lp, &idx)
}

/// Integer plan obtained by flooring every flow, then trimming outflows of
/// any zone whose post-move stock would go negative.
pub fn round_plan(instance: &RelocationInstance, plan: &PlanDecision) -> Result<PlanDecision> {
    let z = instance.zone_count();
    let mut flows: Vec<Vec<f64>> = plan.flows.iter().map(|r| r.iter().map(|v| (v + 1e-9).floor().max(0.0)).collect()).collect();
    loop {
        let cur = PlanDecision::from_flows(instance, flows.clone())?;
        let Some(zz) = (0..z).find(|i| cur.post_stock[*i] < -CONSERVATION_TOL) else {
            return Ok(cur);
        };
        let j = (0..z)
            .filter(|j| *j != zz)
            .max_by(|a, b| flows[zz][*a].total_cmp(&flows[zz][*b]))
            .expect("negative stock implies an outflow");
        flows[zz][j] -= (-cur.post_stock[zz]).ceil().min(flows[zz][j]);
    }
}

/// Rounded plan with its expected objective and the gap to the LP value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedPlan {
    pub plan: PlanDecision,
    pub objective: f64,
    pub integrality_gap: f64,
}

pub fn rounded_with_gap(instance: &RelocationInstance, solved: &SolvedPlan, scenarios: &ScenarioSet) -> Result<RoundedPlan> {
    let plan = round_plan(instance, &solved.plan)?;
    let objective = expected_objective(instance, &plan, scenarios)?;
    Ok(RoundedPlan {
        plan,
        objective,
        integrality_gap: solved.objective - objective,
    })
}

/// Stochastic optimum for a growing number of scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaaRow {
    pub scenarios: usize,
    pub objective: f64,
    pub moving: f64,
    pub iterations: usize,
}

pub fn saa_convergence(
    instance: &RelocationInstance,
    forecasts: &[GmmParams],
    counts: &[usize],
    seed: u64,
    exec: ExecMode,
) -> Result<Vec<SaaRow>> {
    exec.map(counts, |n| {
        let scen = sample_scenarios(forecasts, *n, seed, ExecMode::Sequential)?;
        let s = solve_stochastic(instance, &scen)?;
        Ok(SaaRow {
            scenarios: *n,
            objective: s.objective,
            moving: s.plan.moving(),
            iterations: s.iterations,
        })
    })
    .into_iter()
    .collect()
}

pub fn format_saa_table(rows: &[SaaRow]) -> String {
    let mut out = format!("{:>10}  {:>14}  {:>10}  {:>10}\n", "scenarios", "objective", "moving", "pivots");
    for r in rows {
        out.push_str(&format!("{:>10}  {:>14.4}  {:>10.4}  {:>10}\n", r.scenarios, r.objective, r.moving, r.iterations));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_zone(stock: [f64; 2]) -> RelocationInstance {
        RelocationInstance {
            zones: vec!["a".into(), "b".into()],
            stock: stock.to_vec(),
            cost: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            price: 10.0,
            penalty: 5.0,
        }
    }

    #[test]
    fn zero_demand_means_no_moves() {
        let inst = two_zone([4.0, 6.0]);
        let scen = ScenarioSet::from_vectors(vec![vec![0.0, 0.0]; 3]).unwrap();
        let s = solve_stochastic(&inst, &scen).unwrap();
        assert_eq!(s.plan.moving(), 0.0);
        assert!(s.objective.abs() < 1e-12);
    }

    #[test]
    fn point_equal_to_stock_needs_no_moves() {
        let inst = two_zone([4.0, 6.0]);
        let s = solve_deterministic(&inst, &[4.0, 6.0]).unwrap();
        assert_eq!(s.plan.moving(), 0.0);
        assert!((s.objective - 100.0).abs() < 1e-9);
        assert!(s.certificate.is_certified());
    }

    #[test]
    fn mirrored_demand_gives_mirrored_plan() {
        let inst = two_zone([5.0, 5.0]);
        let a = solve_deterministic(&inst, &[8.0, 2.0]).unwrap();
        let b = solve_deterministic(&inst, &[2.0, 8.0]).unwrap();
        assert!((a.plan.flows[1][0] - 3.0).abs() < 1e-9);
        assert!((a.plan.flows[1][0] - b.plan.flows[0][1]).abs() < 1e-9);
        assert!((a.plan.flows[0][1] - b.plan.flows[1][0]).abs() < 1e-9);
        assert!((a.objective - b.objective).abs() < 1e-9);
    }

    #[test]
    fn single_scenario_collapses_to_deterministic() {
        let inst = two_zone([3.0, 9.0]);
        let d = vec![7.5, 2.25];
        let a = solve_stochastic(&inst, &ScenarioSet::from_vectors(vec![d.clone()]).unwrap()).unwrap();
        let b = solve_deterministic(&inst, &d).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-9);
    }

    #[test]
    fn lp_objective_matches_closed_form_recourse() {
        let inst = two_zone([5.0, 5.0]);
        let scen = ScenarioSet::from_vectors(vec![vec![9.0, 1.0], vec![2.0, 7.0], vec![6.0, 6.0]]).unwrap();
        let s = solve_stochastic(&inst, &scen).unwrap();
        let direct = expected_objective(&inst, &s.plan, &scen).unwrap();
        assert!((s.objective - direct).abs() < 1e-9);
        s.plan.check(&inst).unwrap();
    }

    #[test]
    fn hand_evaluation() {
        let inst = RelocationInstance {
            zones: vec!["a".into(), "b".into(), "c".into()],
            stock: vec![10.0, 0.0, 5.0],
            cost: vec![vec![0.0, 2.0, 3.0], vec![2.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]],
            price: 4.0,
            penalty: 1.5,
        };
        let plan = PlanDecision::from_flows(&inst, vec![vec![0.0, 4.0, 0.0], vec![0.0; 3], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(plan.post_stock, vec![6.0, 5.0, 4.0]);
        let out = evaluate_decision(&inst, &plan, &[3.0, 8.0, 4.0]).unwrap();
        // served 3 + 5 + 4 = 12; lost 3; move cost 4*2 + 1*1 = 9
        assert_eq!(out.revenue, 48.0);
        assert_eq!(out.lost_sales, 3.0);
        assert_eq!(out.cost, 9.0 + 4.5);
        assert_eq!(out.moving, 5.0);
        let idle = evaluate_decision(&inst, &PlanDecision::idle(&inst), &[10.0, 0.0, 5.0]).unwrap();
        assert_eq!(idle.moving, 0.0);
        assert_eq!(idle.lost_sales, 0.0);
        assert_eq!(idle.revenue, 60.0);
        assert_eq!(idle.cost, 0.0);
    }

    #[test]
    fn rounding_keeps_plan_feasible() {
        let inst = two_zone([5.0, 5.0]);
        let plan = PlanDecision::from_flows(&inst, vec![vec![0.0, 2.7], vec![0.4, 0.0]]).unwrap();
        let r = round_plan(&inst, &plan).unwrap();
        assert_eq!(r.flows, vec![vec![0.0, 2.0], vec![0.0, 0.0]]);
        r.check(&inst).unwrap();
    }

    #[test]
    fn var_index_layout() {
        let idx = VarIndex { zones: 3, scenarios: 2 };
        assert_eq!(idx.num_vars(), 15);
        assert_eq!(idx.flow(2, 1), 7);
        assert_eq!(idx.served(1, 2), 14);
        assert!(idx.describe(14).starts_with("y_1_2"));
        assert!(idx.describe(1).starts_with("r_0_1"));
    }

    #[test]
    fn instance_validation() {
        let mut inst = two_zone([1.0, 1.0]);
        inst.cost[0][0] = 1.0;
        assert!(inst.validate().is_err());
        let mut inst = two_zone([1.0, 1.0]);
        inst.stock[0] = -1.0;
        assert!(inst.validate().is_err());
    }
}
