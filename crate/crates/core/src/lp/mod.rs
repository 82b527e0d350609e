//! Linear programs in maximization form, a dense bounded-variable simplex,
//! optimality certificates, and CPLEX-LP text export.

mod certify;
mod simplex;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use certify::{certify, Certificate};
pub use simplex::{solve_lp, solve_lp_with, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

/// Sparse row `Σ coeffs · x  (relation)  rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective · x + objective_constant` subject to the
/// constraints and `lower <= x <= upper`. Lower bounds must be finite;
/// upper bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective including the constant term (meaningful when a primal
    /// point is present).
    pub objective: f64,
    /// Primal point; empty when infeasible. For an iteration limit in the
    /// optimization phase this is the best feasible incumbent.
    pub x: Vec<f64>,
    /// Row multipliers in the original row orientation (`>= 0` for `<=`
    /// rows, `<= 0` for `>=` rows at optimality).
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; num_vars],
            objective_constant: 0.0,
            constraints: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            names: (0..num_vars).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        for (what, len) in [("lower", self.lower.len()), ("upper", self.upper.len()), ("names", self.names.len())] {
            if len != n {
                return Err(Error::invalid(format!("lp {what} has {len} entries for {n} variables")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.objective_constant.is_finite() {
            return Err(Error::invalid("lp objective must be finite"));
        }
        for (j, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !l.is_finite() || u.is_nan() || l > u {
                return Err(Error::invalid(format!("lp variable {j} has invalid bounds [{l}, {u}]")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() || c.coeffs.iter().any(|(j, a)| *j >= n || !a.is_finite()) {
                return Err(Error::invalid(format!("lp constraint {i} is malformed")));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn row_activity(&self, row: &Constraint, x: &[f64]) -> f64 {
        row.coeffs.iter().map(|(j, a)| a * x[*j]).sum()
    }

    /// CPLEX LP text. The objective constant is carried as a comment since
    /// not every reader accepts constants in the objective.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        let term = |out: &mut String, first: bool, a: f64, name: &str| {
            let sign = if a < 0.0 { " -" } else if first { "" } else { " +" };
            let mag = a.abs();
            let _ = if mag == 1.0 {
                write!(out, "{sign} {name}")
            } else {
                write!(out, "{sign} {mag} {name}")
            };
        };
        let _ = writeln!(out, "\\ objective constant: {}", self.objective_constant);
        out.push_str("Maximize\n obj:");
        let mut first = true;
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                term(&mut out, first, *c, &self.names[j]);
                first = false;
            }
        }
        if first {
            out.push_str(" 0 ");
            out.push_str(self.names.first().map_or("x0", String::as_str));
        }
        out.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{i}:");
            let mut first = true;
            for (j, a) in &c.coeffs {
                if *a != 0.0 {
                    term(&mut out, first, *a, &self.names[*j]);
                    first = false;
                }
            }
            if first {
                out.push_str(" 0 ");
                out.push_str(&self.names[0]);
            }
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {rel} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            if u.is_infinite() {
                if l != 0.0 {
                    let _ = writeln!(out, " {} >= {l}", self.names[j]);
                }
            } else {
                let _ = writeln!(out, " {l} <= {} <= {u}", self.names[j]);
            }
        }
        out.push_str("End\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_text_export() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, -1.0];
        lp.upper[1] = 4.0;
        lp.add_constraint(vec![(0, 1.0), (1, 2.5)], Relation::Le, 10.0);
        lp.add_constraint(vec![(0, -1.0)], Relation::Ge, -8.0);
        let text = lp.to_lp_format();
        assert!(text.contains("Maximize\n obj: 3 x0 - x1\n"));
        assert!(text.contains(" c0: x0 + 2.5 x1 <= 10\n"));
        assert!(text.contains(" c1: - x0 >= -8\n"));
        assert!(text.contains(" 0 <= x1 <= 4\n"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn validation() {
        let mut lp = LinearProgram::new(1);
        assert!(lp.validate().is_ok());
        lp.lower[0] = f64::NEG_INFINITY;
        assert!(lp.validate().is_err());
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![(3, 1.0)], Relation::Le, 1.0);
        assert!(lp.validate().is_err());
    }
}
