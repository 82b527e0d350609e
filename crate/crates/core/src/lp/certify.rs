use serde::{Deserialize, Serialize};

use super::{LinearProgram, LpSolution, LpStatus, Relation};

pub const PRIMAL_TOL: f64 = 1e-7;
pub const DUAL_TOL: f64 = 1e-6;
pub const SLACKNESS_TOL: f64 = 1e-6;

/// Optimality evidence recomputed from the original program data and the
/// reported primal/dual pair, independently of the solver's tableau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Largest row or bound violation of the primal point.
    pub primal_residual: f64,
    /// Largest dual sign violation (row multipliers, and reduced costs of
    /// variables without a finite upper bound).
    pub dual_residual: f64,
    /// Largest complementary-slackness product.
    pub slackness_residual: f64,
    /// `|dual objective − primal objective|`.
    pub duality_gap: f64,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        self.primal_residual <= PRIMAL_TOL
            && self.dual_residual <= DUAL_TOL
            && self.slackness_residual <= SLACKNESS_TOL
    }
}

/// For `max cᵀx, Ax (rel) b, l <= x <= u` with multipliers `y`, the reduced
/// cost `r = c − Aᵀy` splits into an upper-bound multiplier `max(r, 0)` and
/// a lower-bound multiplier `max(−r, 0)`.
pub fn certify(lp: &LinearProgram, sol: &LpSolution) -> Certificate {
    if sol.status != LpStatus::Optimal || sol.x.len() != lp.num_vars() || sol.duals.len() != lp.constraints.len() {
        return Certificate {
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            slackness_residual: f64::INFINITY,
            duality_gap: f64::INFINITY,
        };
    }
    let x = &sol.x;
    let y = &sol.duals;
    let mut primal: f64 = 0.0;
    let mut dual: f64 = 0.0;
    let mut slack_res: f64 = 0.0;
    let mut reduced = lp.objective.clone();
    let mut dual_obj = lp.objective_constant;

    for (row, yi) in lp.constraints.iter().zip(y) {
        let act = lp.row_activity(row, x);
        let slack = row.rhs - act;
        let viol = match row.relation {
            Relation::Le => (-slack).max(0.0),
            Relation::Ge => slack.max(0.0),
            Relation::Eq => slack.abs(),
        };
        primal = primal.max(viol);
        let sign_viol = match row.relation {
            Relation::Le => (-yi).max(0.0),
            Relation::Ge => yi.max(0.0),
            Relation::Eq => 0.0,
        };
        dual = dual.max(sign_viol);
        if row.relation != Relation::Eq {
            slack_res = slack_res.max((yi * slack).abs());
        }
        for (j, a) in &row.coeffs {
            reduced[*j] -= yi * a;
        }
        dual_obj += yi * row.rhs;
    }
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        primal = primal.max((l - x[j]).max(0.0)).max((x[j] - u).max(0.0));
        let r = reduced[j];
        let up_mult = r.max(0.0);
        let low_mult = (-r).max(0.0);
        if u.is_infinite() {
            dual = dual.max(up_mult);
        } else {
            slack_res = slack_res.max(up_mult * (u - x[j]));
            dual_obj += up_mult * u;
        }
        slack_res = slack_res.max(low_mult * (x[j] - l));
        dual_obj -= low_mult * l;
    }
    Certificate {
        primal_residual: primal,
        dual_residual: dual,
        slackness_residual: slack_res,
        duality_gap: (dual_obj - sol.objective).abs(),
    }
}
