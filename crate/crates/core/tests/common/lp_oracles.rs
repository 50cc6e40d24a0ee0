//! Independent LP oracles: exhaustive vertex enumeration for tiny problems
//! and the `minilp` reference solver for larger ones.

use wdp::lp::LpProblem;

/// Solves the square system by Gaussian elimination; `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(piv, col);
        b.swap(piv, col);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (x, p) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                        *x -= f * p;
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Maximum of the objective over all basic feasible points.
pub fn vertex_enumeration(p: &LpProblem) -> f64 {
    let n = p.num_vars();
    if n == 0 {
        return 0.0;
    }
    // every constraint as (row, rhs) with row.x <= rhs
    let mut cons: Vec<(Vec<f64>, f64)> = p
        .matrix
        .iter()
        .zip(&p.rhs)
        .map(|(r, &b)| (r.clone(), b))
        .collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        cons.push((e.clone(), 1.0));
        e[i] = -1.0;
        cons.push((e, 0.0));
    }
    let mut best = f64::NEG_INFINITY;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a = pick.iter().map(|&c| cons[c].0.clone()).collect();
        let b = pick.iter().map(|&c| cons[c].1).collect();
        if let Some(x) = solve_square(a, b) {
            let feasible = cons
                .iter()
                .all(|(row, rhs)| row.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() <= rhs + 1e-9);
            if feasible {
                best = best.max(p.evaluate(&x));
            }
        }
        // next combination
        let total = cons.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - n + i {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn minilp_optimum(p: &LpProblem) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = p.objective.iter().map(|&c| lp.add_var(c, (0.0, 1.0))).collect();
    for (row, &b) in p.matrix.iter().zip(&p.rhs) {
        let expr: Vec<_> = vars
            .iter()
            .zip(row)
            .filter(|(_, &a)| a != 0.0)
            .map(|(&v, &a)| (v, a))
            .collect();
        if !expr.is_empty() {
            lp.add_constraint(&expr[..], ComparisonOp::Le, b);
        }
    }
    lp.solve().expect("reference LP solve").objective()
}
