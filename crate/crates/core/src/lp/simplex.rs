use super::{LinearProgram, LpSolution, LpStatus, Relation};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Pricing, ratio-test and feasibility tolerance.
    pub tol: f64,
    /// Consecutive degenerate pivots after which pricing switches to
    /// Bland's rule (smallest index) until progress resumes.
    pub degenerate_switch: usize,
    /// Use Bland's rule throughout.
    pub bland_only: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: 200_000,
            tol: 1e-9,
            degenerate_switch: 25,
            bland_only: false,
        }
    }
}

const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, PartialEq)]
enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

/// Dense tableau over shifted variables `x' = x - lower`, all columns with
/// bounds `[0, upper]`. Nonbasic columns sit at 0 or at their upper bound.
struct Tableau {
    m: usize,
    cols: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    barred: Vec<bool>,
    is_basic: Vec<bool>,
    iterations: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn value_of_nonbasic(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn recompute_reduced_costs(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
    }

    fn choose_entering(&self, bland: bool, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if self.is_basic[j] || self.barred[j] {
                continue;
            }
            let dj = self.d[j];
            let improving = if self.at_upper[j] {
                dj < -tol
            } else {
                dj > tol && self.upper[j] > 0.0
            };
            if !improving {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, b)| dj.abs() > b) {
                best = Some((j, dj.abs()));
            }
        }
        best.map(|(j, _)| j)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let piv = self.at(r, j);
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            row.iter_mut().for_each(|v| *v /= piv);
            row[j] = 1.0;
        }
        let nz: Vec<(usize, f64)> = self.t[r * cols..(r + 1) * cols]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| (k, *v))
            .collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * cols..(i + 1) * cols];
            for &(k, v) in &nz {
                row[k] -= f * v;
            }
            row[j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for &(k, v) in &nz {
                self.d[k] -= f * v;
            }
            self.d[j] = 0.0;
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
    }

    fn run(&mut self, opts: &SimplexOptions) -> Outcome {
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= opts.max_iterations {
                return Outcome::IterationLimit;
            }
            let bland = opts.bland_only || degenerate >= opts.degenerate_switch;
            let Some(j) = self.choose_entering(bland, opts.tol) else {
                return Outcome::Optimal;
            };
            self.iterations += 1;
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };

            // ratio test: (limit, row, leaving goes to upper)
            let mut best: Option<(f64, usize, bool)> = None;
            for i in 0..self.m {
                let a = dir * self.at(i, j);
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let (limit, to_upper) = if a > 0.0 {
                    (self.beta[i].max(0.0) / a, false)
                } else {
                    let ub = self.upper[self.basis[i]];
                    if ub.is_infinite() {
                        continue;
                    }
                    ((ub - self.beta[i]).max(0.0) / -a, true)
                };
                let better = match best {
                    None => true,
                    Some((bl, bi, _)) => {
                        if limit < bl - opts.tol {
                            true
                        } else if limit <= bl + opts.tol {
                            if bland {
                                self.basis[i] < self.basis[bi]
                            } else {
                                self.at(i, j).abs() > self.at(bi, j).abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((limit, i, to_upper));
                }
            }

            let flip_len = self.upper[j];
            let step = match best {
                Some((l, _, _)) => l.min(flip_len),
                None => flip_len,
            };
            if step.is_infinite() {
                return Outcome::Unbounded;
            }
            if step > opts.tol {
                degenerate = 0;
            } else {
                degenerate += 1;
            }
            if step != 0.0 {
                for i in 0..self.m {
                    let a = self.at(i, j);
                    if a != 0.0 {
                        self.beta[i] -= dir * step * a;
                    }
                }
            }
            match best {
                Some((limit, r, to_upper)) if limit < flip_len => {
                    let entering_value = if dir > 0.0 { step } else { self.upper[j] - step };
                    let leaving = self.basis[r];
                    self.at_upper[leaving] = to_upper;
                    self.pivot(r, j);
                    self.at_upper[j] = false;
                    self.beta[r] = entering_value;
                }
                _ => {
                    self.at_upper[j] = !self.at_upper[j];
                }
            }
        }
    }

    fn column_value(&self, j: usize) -> f64 {
        if self.is_basic[j] {
            let r = self.basis.iter().position(|b| *b == j).expect("basic column in basis");
            self.beta[r]
        } else {
            self.value_of_nonbasic(j)
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &SimplexOptions::default())
}

/// Two-phase primal simplex. Phase one minimizes the sum of artificial
/// variables; phase two optimizes the objective with artificials held at
/// zero. Duals are read off the reduced costs of each row's unit column.
pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.constraints.len();

    // shifted, sign-normalized rows
    let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64, f64)> = Vec::with_capacity(m);
    for c in &lp.constraints {
        let shift: f64 = c.coeffs.iter().map(|(j, a)| a * lp.lower[*j]).sum();
        let mut rhs = c.rhs - shift;
        let mut rel = c.relation;
        let mut sign = 1.0;
        let mut coeffs = c.coeffs.clone();
        if rhs < 0.0 {
            sign = -1.0;
            rhs = -rhs;
            coeffs.iter_mut().for_each(|(_, a)| *a = -*a);
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rows.push((coeffs, rel, rhs, sign));
    }

    let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let art_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n + slack_count + art_count;
    let mut t = vec![0.0; m * cols];
    let mut unit_col = vec![0; m];
    let mut upper: Vec<f64> = (0..n).map(|j| lp.upper[j] - lp.lower[j]).collect();
    upper.resize(cols, f64::INFINITY);
    let mut is_art = vec![false; cols];
    let mut next_slack = n;
    let mut next_art = n + slack_count;
    let mut beta = vec![0.0; m];
    for (i, (coeffs, rel, rhs, _)) in rows.iter().enumerate() {
        for (j, a) in coeffs {
            t[i * cols + j] += a;
        }
        beta[i] = *rhs;
        match rel {
            Relation::Le => {
                t[i * cols + next_slack] = 1.0;
                unit_col[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                t[i * cols + next_slack] = -1.0;
                next_slack += 1;
                t[i * cols + next_art] = 1.0;
                unit_col[i] = next_art;
                is_art[next_art] = true;
                next_art += 1;
            }
            Relation::Eq => {
                t[i * cols + next_art] = 1.0;
                unit_col[i] = next_art;
                is_art[next_art] = true;
                next_art += 1;
            }
        }
    }
    let mut is_basic = vec![false; cols];
    for &u in &unit_col {
        is_basic[u] = true;
    }
    let mut tab = Tableau {
        m,
        cols,
        t,
        beta,
        basis: unit_col.clone(),
        at_upper: vec![false; cols],
        upper,
        cost: vec![0.0; cols],
        d: vec![0.0; cols],
        barred: vec![false; cols],
        is_basic,
        iterations: 0,
    };

    let infeasible = |iterations| LpSolution {
        status: LpStatus::Infeasible,
        objective: f64::NAN,
        x: Vec::new(),
        duals: Vec::new(),
        iterations,
    };

    if art_count > 0 {
        for j in 0..cols {
            if is_art[j] {
                tab.cost[j] = -1.0;
            }
        }
        tab.recompute_reduced_costs();
        match tab.run(opts) {
            Outcome::Optimal => {}
            Outcome::IterationLimit => {
                return Ok(LpSolution {
                    status: LpStatus::IterationLimit,
                    objective: f64::NAN,
                    x: Vec::new(),
                    duals: Vec::new(),
                    iterations: tab.iterations,
                })
            }
            // phase one is bounded below by zero
            Outcome::Unbounded => unreachable!("phase one cannot be unbounded"),
        }
        let residual: f64 = (0..cols).filter(|j| is_art[*j]).map(|j| tab.column_value(j)).sum();
        let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if residual > 1e-7 * scale {
            return Ok(infeasible(tab.iterations));
        }
        // drive artificials out of the basis where possible
        for r in 0..m {
            let b = tab.basis[r];
            if !is_art[b] {
                continue;
            }
            let candidate = (0..cols).find(|&j| !is_art[j] && !tab.is_basic[j] && tab.at(r, j).abs() > 1e-7);
            if let Some(j) = candidate {
                let value = tab.value_of_nonbasic(j);
                tab.at_upper[b] = false;
                tab.pivot(r, j);
                tab.at_upper[j] = false;
                tab.beta[r] = value;
            }
        }
        for j in 0..cols {
            if is_art[j] {
                tab.barred[j] = true;
                tab.upper[j] = 0.0;
                tab.cost[j] = 0.0;
            }
        }
    }

    tab.cost.iter_mut().for_each(|c| *c = 0.0);
    tab.cost[..n].copy_from_slice(&lp.objective);
    tab.recompute_reduced_costs();
    let outcome = tab.run(opts);

    let x: Vec<f64> = (0..n)
        .map(|j| {
            let v = tab.column_value(j) + lp.lower[j];
            v.clamp(lp.lower[j], lp.upper[j])
        })
        .collect();
    let duals: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let y = -tab.d[unit_col[i]];
            // -0.0 -> 0.0
            r.3 * y + 0.0
        })
        .collect();
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::IterationLimit => LpStatus::IterationLimit,
    };
    Ok(LpSolution {
        status,
        objective: lp.evaluate(&x),
        x,
        duals,
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::certify;

    #[test]
    fn single_variable_upper_row() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.add_constraint(vec![(0, 1.0)], Relation::Le, 3.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.add_constraint(vec![(0, 1.0)], Relation::Le, 1.0);
        lp.add_constraint(vec![(0, 1.0)], Relation::Ge, 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.add_constraint(vec![(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn bounds_equalities_and_shifts() {
        // max 2a + 3b - c, a + b + c = 10, a - b >= -2, 1 <= a <= 4, b <= 5, c >= 2
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![2.0, 3.0, -1.0];
        lp.lower = vec![1.0, 0.0, 2.0];
        lp.upper = vec![4.0, 5.0, f64::INFINITY];
        lp.add_constraint(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Eq, 10.0);
        lp.add_constraint(vec![(0, 1.0), (1, -1.0)], Relation::Ge, -2.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // b = 5, a = 3 (from a - b >= -2 and a <= 4, c = 10 - a - b >= 2)
        assert!((s.x[0] - 3.0).abs() < 1e-9 && (s.x[1] - 5.0).abs() < 1e-9 && (s.x[2] - 2.0).abs() < 1e-9);
        assert!((s.objective - (6.0 + 15.0 - 2.0)).abs() < 1e-9);
        let cert = certify(&lp, &s);
        assert!(cert.is_certified(), "{cert:?}");
    }

    #[test]
    fn degenerate_problem_terminates_under_bland() {
        // a classic cycling example for Dantzig's rule with naive tie breaks
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.75, -150.0, 0.02, -6.0];
        lp.add_constraint(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Relation::Le, 0.0);
        lp.add_constraint(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Relation::Le, 0.0);
        lp.add_constraint(vec![(2, 1.0)], Relation::Le, 1.0);
        for bland_only in [false, true] {
            let opts = SimplexOptions {
                bland_only,
                ..SimplexOptions::default()
            };
            let s = solve_lp_with(&lp, &opts).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.objective - 0.05).abs() < 1e-9, "{}", s.objective);
            assert!(certify(&lp, &s).is_certified());
        }
    }

    #[test]
    fn iteration_cap_reports_limit() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![1.0, 1.0, 1.0];
        for j in 0..3 {
            lp.add_constraint(vec![(j, 1.0)], Relation::Le, 1.0);
        }
        let opts = SimplexOptions {
            max_iterations: 1,
            ..SimplexOptions::default()
        };
        let s = solve_lp_with(&lp, &opts).unwrap();
        assert_eq!(s.status, LpStatus::IterationLimit);
        assert_eq!(s.x.len(), 3);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 4.0);
        lp.add_constraint(vec![(0, 2.0), (1, 2.0)], Relation::Eq, 8.0);
        lp.add_constraint(vec![(1, 1.0)], Relation::Le, 3.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 7.0).abs() < 1e-9);
        assert!(certify(&lp, &s).is_certified(), "{:?}", certify(&lp, &s));
    }
}
