//! Rolling out-of-sample evaluation and report comparison.

use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::DemandSeries;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::forecast::{Forecast, Forecaster};
use crate::relocation::{evaluate_decision, solve_deterministic, solve_stochastic, DayOutcome, PlanDecision, RelocationInstance};
use crate::scenario::{sample_scenarios, ScenarioSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerMode {
    /// Two-stage program over Monte Carlo scenarios of the forecast.
    #[default]
    Stochastic,
    /// Single-scenario program on the point forecast.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    /// Re-forecast and re-solve every test day.
    #[default]
    Replan,
    /// Solve once for the first evaluable test day and apply that plan to
    /// every day.
    SinglePlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub scenarios: usize,
    pub seed: u64,
    pub plan: PlanMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            scenarios: 200,
            seed: 0,
            plan: PlanMode::Replan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRow {
    pub date: NaiveDate,
    pub realized: Vec<f64>,
    pub forecast_mean: Vec<f64>,
    pub post_stock: Vec<f64>,
    pub outcome: DayOutcome,
    pub profit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Averages {
    pub revenue: f64,
    pub cost: f64,
    pub moving: f64,
    pub profit: f64,
    pub lost_sales: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub optimizer: OptimizerMode,
    pub plan: PlanMode,
    pub days: Vec<DayRow>,
    /// Test days without `ws` days of history.
    pub skipped: Vec<NaiveDate>,
    pub averages: Averages,
    pub day_count: usize,
}

impl EvaluationReport {
    pub fn recompute_averages(days: &[DayRow]) -> Averages {
        let n = days.len().max(1) as f64;
        let mut a = Averages::default();
        for d in days {
            a.revenue += d.outcome.revenue;
            a.cost += d.outcome.cost;
            a.moving += d.outcome.moving;
            a.profit += d.profit;
            a.lost_sales += d.outcome.lost_sales;
        }
        Averages {
            revenue: a.revenue / n,
            cost: a.cost / n,
            moving: a.moving / n,
            profit: a.profit / n,
            lost_sales: a.lost_sales / n,
        }
    }

    /// One-row aligned table of the averages.
    pub fn to_table(&self) -> String {
        let label = report_label(self);
        let width = label.len().max(6);
        let mut out = format!(
            "{:<width$}  {:>16}  {:>16}  {:>16}  {:>16}  {:>6}\n",
            "Method", "Average Revenue", "Average Cost", "Average Moving", "Average Profit", "Days"
        );
        let a = &self.averages;
        let _ = writeln!(
            out,
            "{label:<width$}  {:>16.4}  {:>16.4}  {:>16.4}  {:>16.4}  {:>6}",
            a.revenue, a.cost, a.moving, a.profit, self.day_count
        );
        if !self.skipped.is_empty() {
            let _ = writeln!(out, "skipped {} day(s) without enough history", self.skipped.len());
        }
        out
    }

    /// Per-day rows as CSV.
    pub fn days_csv(&self) -> String {
        let zones = self.days.first().map_or(0, |d| d.realized.len());
        let mut out = String::from("date,revenue,cost,moving,lost_sales,profit");
        for z in 0..zones {
            let _ = write!(out, ",realized_{z},forecast_{z},stock_{z}");
        }
        out.push('\n');
        for d in &self.days {
            let o = &d.outcome;
            let _ = write!(out, "{},{},{},{},{},{}", d.date, o.revenue, o.cost, o.moving, o.lost_sales, d.profit);
            for z in 0..zones {
                let _ = write!(out, ",{},{},{}", d.realized[z], d.forecast_mean[z], d.post_stock[z]);
            }
            out.push('\n');
        }
        out
    }
}

fn plan_for(
    forecaster: &dyn Forecaster,
    mode: OptimizerMode,
    instance: &RelocationInstance,
    cfg: &EvalConfig,
    date: NaiveDate,
    window: &[Vec<f64>],
    day_seed: u64,
) -> Result<(PlanDecision, Vec<f64>)> {
    let forecast = forecaster.forecast(date, window)?;
    let mean = forecast.point();
    let plan = match (mode, &forecast) {
        (OptimizerMode::Deterministic, _) => solve_deterministic(instance, &mean)?.plan,
        (OptimizerMode::Stochastic, Forecast::Distribution(ms)) => {
            let scen = sample_scenarios(ms, cfg.scenarios, day_seed, ExecMode::Sequential)?;
            solve_stochastic(instance, &scen)?.plan
        }
        (OptimizerMode::Stochastic, Forecast::Point(p)) => {
            let d = p.iter().map(|v| v.max(0.0)).collect();
            solve_stochastic(instance, &ScenarioSet::from_vectors(vec![d])?)?.plan
        }
    };
    Ok((plan, mean))
}

/// Scenario seed of test day `d`; distinct per day, fixed per run.
fn day_seed(seed: u64, d: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(d as u64)
}

/// For each day of `test`, forecasts from the `ws` days before it (taken
/// from `history` followed by earlier test days), plans, and scores the
/// plan on the realized demand. Every day starts from the instance's
/// initial stock.
pub fn rolling_evaluate(
    forecaster: &dyn Forecaster,
    mode: OptimizerMode,
    history: &DemandSeries,
    test: &DemandSeries,
    instance: &RelocationInstance,
    cfg: &EvalConfig,
    exec: ExecMode,
) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::invalid("test partition is empty"));
    }
    instance.validate()?;
    if test.zone_count() != instance.zone_count() || history.zone_count() != test.zone_count() {
        return Err(Error::Shape {
            context: "evaluation zones",
            expected: instance.zone_count(),
            actual: test.zone_count(),
        });
    }
    if cfg.scenarios == 0 {
        return Err(Error::config("eval.scenarios", "must be >= 1"));
    }
    let ws = forecaster.window_size();
    let all = history.concat(test)?;
    let offset = history.len();
    let evaluable: Vec<usize> = (0..test.len()).filter(|t| offset + t >= ws).collect();
    let skipped = (0..test.len())
        .filter(|t| offset + t < ws)
        .map(|t| test.index[t])
        .collect();
    let window_of = |t: usize| -> Vec<Vec<f64>> { (offset + t - ws..offset + t).map(|d| all.day(d)).collect() };

    let fixed = match (cfg.plan, evaluable.first()) {
        (PlanMode::SinglePlan, Some(&t)) => Some(plan_for(
            forecaster,
            mode,
            instance,
            cfg,
            test.index[t],
            &window_of(t),
            day_seed(cfg.seed, t),
        )?),
        _ => None,
    };

    let rows = exec.map(&evaluable, |&t| -> Result<DayRow> {
        let (plan, mean) = match &fixed {
            Some(p) => p.clone(),
            None => plan_for(forecaster, mode, instance, cfg, test.index[t], &window_of(t), day_seed(cfg.seed, t))?,
        };
        let realized = test.day(t);
        let outcome = evaluate_decision(instance, &plan, &realized)?;
        Ok(DayRow {
            date: test.index[t],
            realized,
            forecast_mean: mean,
            post_stock: plan.post_stock,
            profit: outcome.profit(),
            outcome,
        })
    });
    let days = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        method: forecaster.name(),
        optimizer: mode,
        plan: cfg.plan,
        averages: EvaluationReport::recompute_averages(&days),
        day_count: days.len(),
        days,
        skipped,
    })
}

/// `(a − b) / b`, the relative position of `a` against the reference `b`.
pub fn relative_difference(a: f64, b: f64) -> Option<f64> {
    if b == 0.0 {
        None
    } else {
        Some((a - b) / b)
    }
}

/// "A is 6.94% lower than B" with the percentage to two decimals.
pub fn describe_difference(a_name: &str, b_name: &str, a: f64, b: f64) -> String {
    match relative_difference(a, b) {
        None => format!("{a_name} cannot be compared with {b_name} (reference is 0)"),
        Some(r) => {
            let pct = format!("{:.2}", (r * 100.0).abs());
            if pct == "0.00" {
                format!("{a_name} is 0.00% different from {b_name}")
            } else if r < 0.0 {
                format!("{a_name} is {pct}% lower than {b_name}")
            } else {
                format!("{a_name} is {pct}% higher than {b_name}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDiff {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    /// `a − b`.
    pub absolute: f64,
    /// `(a − b) / b` in percent; absent when `b == 0`.
    pub percent: Option<f64>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub a: EvaluationReport,
    pub b: EvaluationReport,
    pub metrics: Vec<MetricDiff>,
}

pub fn report_label(r: &EvaluationReport) -> String {
    let mode = match r.optimizer {
        OptimizerMode::Stochastic => "SP",
        OptimizerMode::Deterministic => "deterministic",
    };
    format!("{} + {mode}", r.method)
}

pub fn compare(a: &EvaluationReport, b: &EvaluationReport) -> ComparisonReport {
    let (an, bn) = (report_label(a), report_label(b));
    let metric = |name: &str, x: f64, y: f64| MetricDiff {
        metric: name.to_string(),
        a: x,
        b: y,
        absolute: x - y,
        percent: relative_difference(x, y).map(|r| r * 100.0),
        summary: describe_difference(&an, &bn, x, y),
    };
    let (x, y) = (&a.averages, &b.averages);
    ComparisonReport {
        metrics: vec![
            metric("Average Revenue", x.revenue, y.revenue),
            metric("Average Cost", x.cost, y.cost),
            metric("Average Moving", x.moving, y.moving),
            metric("Average Profit", x.profit, y.profit),
        ],
        a: a.clone(),
        b: b.clone(),
    }
}

impl ComparisonReport {
    /// Aligned text table: one row per method, then the differences.
    pub fn to_table(&self) -> String {
        let labels = [report_label(&self.a), report_label(&self.b)];
        let width = labels.iter().map(String::len).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$}", "Method");
        for m in &self.metrics {
            let _ = write!(out, "  {:>16}", m.metric);
        }
        out.push('\n');
        for (i, label) in labels.iter().enumerate() {
            let _ = write!(out, "{label:<width$}");
            for m in &self.metrics {
                let _ = write!(out, "  {:>16.4}", if i == 0 { m.a } else { m.b });
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<width$}", "Difference");
        for m in &self.metrics {
            let _ = write!(out, "  {:>16.4}", m.absolute);
        }
        out.push('\n');
        let _ = write!(out, "{:<width$}", "Percent");
        for m in &self.metrics {
            let cell = m.percent.map_or("n/a".to_string(), |p| format!("{p:.2}%"));
            let _ = write!(out, "  {cell:>16}");
        }
        out.push_str("\n\n");
        for m in &self.metrics {
            let _ = writeln!(out, "{}: {}", m.metric, m.summary);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::OracleForecaster;
    use crate::synth::{generate_series, SynthConfig};

    fn instance() -> RelocationInstance {
        RelocationInstance {
            zones: vec!["z0".into(), "z1".into()],
            stock: vec![50.0, 50.0],
            cost: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            price: 10.0,
            penalty: 5.0,
        }
    }

    fn report(revenue: f64, cost: f64, moving: f64) -> EvaluationReport {
        let outcome = DayOutcome {
            revenue,
            cost,
            moving,
            lost_sales: 0.0,
        };
        let days = vec![DayRow {
            date: NaiveDate::from_ymd_opt(2019, 4, 1).unwrap(),
            realized: vec![1.0],
            forecast_mean: vec![1.0],
            post_stock: vec![1.0],
            outcome,
            profit: outcome.profit(),
        }];
        EvaluationReport {
            method: "m".into(),
            optimizer: OptimizerMode::Stochastic,
            plan: PlanMode::Replan,
            averages: EvaluationReport::recompute_averages(&days),
            day_count: 1,
            days,
            skipped: vec![],
        }
    }

    #[test]
    fn percent_convention() {
        assert_eq!(describe_difference("A", "B", 231.4615, 248.7143), "A is 6.94% lower than B");
        assert_eq!(describe_difference("A", "B", 100.0, 80.0), "A is 25.00% higher than B");
        assert_eq!(describe_difference("A", "B", 5.0, 5.0), "A is 0.00% different from B");
        assert!(relative_difference(1.0, 0.0).is_none());
    }

    #[test]
    fn identical_reports_have_zero_differences() {
        let r = report(100.0, 20.0, 3.0);
        let c = compare(&r, &r);
        assert!(c.metrics.iter().all(|m| m.absolute == 0.0 && m.percent == Some(0.0)));
        let table = c.to_table();
        assert!(table.contains("Average Revenue") && table.contains("Average Cost") && table.contains("Average Moving"));
    }

    #[test]
    fn oracle_deterministic_has_no_lost_sales() {
        let series = generate_series(&SynthConfig {
            days: 60,
            ..Default::default()
        })
        .unwrap();
        let (hist, test) = (series.slice(0, 40), series.slice(40, 60));
        let oracle = OracleForecaster { series: series.clone(), ws: 5 };
        // fleet covers every day's total demand
        let mut inst = instance();
        inst.stock = vec![90.0, 90.0];
        let r = rolling_evaluate(&oracle, OptimizerMode::Deterministic, &hist, &test, &inst, &EvalConfig::default(), ExecMode::Parallel).unwrap();
        assert_eq!(r.day_count, 20);
        assert!(r.days.iter().all(|d| d.outcome.lost_sales <= 1e-9));
        assert_eq!(r.averages, EvaluationReport::recompute_averages(&r.days));
    }

    #[test]
    fn single_day_and_skipped_days() {
        let series = generate_series(&SynthConfig {
            days: 12,
            ..Default::default()
        })
        .unwrap();
        let oracle = OracleForecaster { series: series.clone(), ws: 3 };
        let r = rolling_evaluate(&oracle, OptimizerMode::Stochastic, &series.slice(0, 11), &series.slice(11, 12), &instance(), &EvalConfig::default(), ExecMode::Sequential).unwrap();
        assert_eq!(r.day_count, 1);
        assert_eq!(r.averages.revenue, r.days[0].outcome.revenue);
        assert_eq!(r.averages.profit, r.days[0].profit);

        let r = rolling_evaluate(&oracle, OptimizerMode::Stochastic, &series.slice(0, 1), &series.slice(1, 12), &instance(), &EvalConfig::default(), ExecMode::Sequential).unwrap();
        assert_eq!(r.skipped, series.index[1..3].to_vec());
        assert_eq!(r.day_count, 9);
    }

    #[test]
    fn single_plan_reuses_first_plan() {
        let series = generate_series(&SynthConfig {
            days: 30,
            ..Default::default()
        })
        .unwrap();
        let oracle = OracleForecaster { series: series.clone(), ws: 2 };
        let cfg = EvalConfig {
            plan: PlanMode::SinglePlan,
            ..Default::default()
        };
        let r = rolling_evaluate(&oracle, OptimizerMode::Deterministic, &series.slice(0, 20), &series.slice(20, 30), &instance(), &cfg, ExecMode::Parallel).unwrap();
        assert!(r.days.iter().all(|d| d.post_stock == r.days[0].post_stock));
    }
}
