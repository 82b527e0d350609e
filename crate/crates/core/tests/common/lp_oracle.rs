use ddsp_core::lp::{LinearProgram, Relation};
use rand::Rng;

struct Plane {
    a: Vec<f64>,
    b: f64,
    /// `a·x <= b` when false, `a·x == b` when true.
    equality: bool,
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[r][k] -= f * a[col][k];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Best objective over all basic feasible solutions, or `None` when no
/// vertex is feasible. Valid for programs whose feasible set is bounded.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes = Vec::new();
    for c in &lp.constraints {
        let mut a = vec![0.0; n];
        for (j, v) in &c.coeffs {
            a[*j] += v;
        }
        match c.relation {
            Relation::Le => planes.push(Plane { a, b: c.rhs, equality: false }),
            Relation::Ge => planes.push(Plane {
                a: a.iter().map(|v| -v).collect(),
                b: -c.rhs,
                equality: false,
            }),
            Relation::Eq => planes.push(Plane { a, b: c.rhs, equality: true }),
        }
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = -1.0;
        planes.push(Plane { a, b: -lp.lower[j], equality: false });
        if lp.upper[j].is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            planes.push(Plane { a, b: lp.upper[j], equality: false });
        }
    }
    let eq: Vec<usize> = (0..planes.len()).filter(|i| planes[*i].equality).collect();
    let free: Vec<usize> = (0..planes.len()).filter(|i| !planes[*i].equality).collect();
    if eq.len() > n {
        // redundant equalities are not generated by the test corpus
        return None;
    }
    let mut best: Option<f64> = None;
    combinations(free.len(), n - eq.len(), &mut |pick| {
        let active: Vec<usize> = eq.iter().copied().chain(pick.iter().map(|i| free[*i])).collect();
        let a: Vec<Vec<f64>> = active.iter().map(|i| planes[*i].a.clone()).collect();
        let b: Vec<f64> = active.iter().map(|i| planes[*i].b).collect();
        let Some(x) = solve_square(a, b) else { return };
        let feasible = planes.iter().all(|p| {
            let act: f64 = p.a.iter().zip(&x).map(|(a, v)| a * v).sum();
            if p.equality {
                (act - p.b).abs() <= 1e-8
            } else {
                act <= p.b + 1e-8
            }
        });
        if feasible {
            let v = lp.evaluate(&x);
            if best.is_none_or(|b| v > b) {
                best = Some(v);
            }
        }
    });
    best
}

/// Random bounded program with up to `max_dim` variables and rows. Row
/// right-hand sides are built around a random nonnegative point so most
/// instances are feasible; `make_infeasible` adds a contradictory pair.
pub fn random_lp<R: Rng>(rng: &mut R, max_dim: usize, make_infeasible: bool) -> LinearProgram {
    let n = rng.random_range(2..=max_dim);
    let m = rng.random_range(2..=max_dim);
    let mut lp = LinearProgram::new(n);
    lp.objective = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    if rng.random_bool(0.3) {
        let j = rng.random_range(0..n);
        lp.upper[j] = x0[j] + rng.random_range(0.0..2.0);
    }
    // bounding row
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let cap = w.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(0.5..5.0);
    lp.add_constraint(w.into_iter().enumerate().collect(), Relation::Le, cap);
    let mut eqs = 0;
    for _ in 1..m {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let act: f64 = a.iter().zip(&x0).map(|(p, q)| p * q).sum();
        let roll: f64 = rng.random();
        let coeffs: Vec<(usize, f64)> = a.into_iter().enumerate().collect();
        if roll < 0.6 {
            lp.add_constraint(coeffs, Relation::Le, act + rng.random_range(0.0..2.0));
        } else if roll < 0.9 || eqs >= n / 2 {
            lp.add_constraint(coeffs, Relation::Ge, act - rng.random_range(0.0..2.0));
        } else {
            eqs += 1;
            lp.add_constraint(coeffs, Relation::Eq, act);
        }
    }
    if make_infeasible {
        lp.add_constraint(vec![(0, 1.0)], Relation::Le, 1.0);
        lp.add_constraint(vec![(0, 1.0)], Relation::Ge, 2.0);
    }
    lp
}
