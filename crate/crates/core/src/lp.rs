//! Fractional relaxation of winner determination and its solver.
//!
//! The relaxation of a node `(remaining stock, active bids)` is
//!
//! ```text
//! maximize   sum_i p_i x_i
//! subject to sum_i q_ij x_i <= k_j   for every good j
//!            0 <= x_i <= 1
//! ```
//!
//! All data are non-negative, so the all-slack basis at `x = 0` is feasible
//! and the bounded-variable revised simplex below needs no phase one.

use thiserror::Error;

use crate::model::Auction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("simplex exceeded its iteration limit after {iterations} iterations")]
    IterationLimit { iterations: usize },

    #[error("basis matrix became singular during refactorization")]
    SingularBasis,

    #[error("malformed LP: {0}")]
    Malformed(String),
}

/// `maximize c.x  s.t.  A x <= b, 0 <= x <= 1`, stored densely by row.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    /// One row per good, one column per active bid.
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        if self.matrix.len() != self.rhs.len() {
            return Err(LpError::Malformed(format!(
                "{} matrix rows for {} right-hand sides",
                self.matrix.len(),
                self.rhs.len()
            )));
        }
        for (j, row) in self.matrix.iter().enumerate() {
            if row.len() != self.objective.len() {
                return Err(LpError::Malformed(format!(
                    "row {j} has {} entries for {} variables",
                    row.len(),
                    self.objective.len()
                )));
            }
            if row.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
                return Err(LpError::Malformed(format!("row {j} has a negative entry")));
            }
        }
        if self.rhs.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(LpError::Malformed("negative right-hand side".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("non-finite objective".into()));
        }
        Ok(())
    }

    /// Objective value of `x`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest positive violation of `A x <= b`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.matrix
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    /// The final primal point violated the feasibility tolerance; the
    /// objective was replaced by a weak-duality bound so it stays an upper
    /// bound.
    InfeasibleGuard,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub objective_value: f64,
    /// Per-variable values, clamped to `[0, 1]`.
    pub coefficients: Vec<f64>,
    pub status: LpStatus,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// `|x| <= zero_tol` counts as a zero coefficient.
    pub zero_tol: f64,
    /// Consecutive non-improving pivots before switching to Bland's rule.
    pub stall_threshold: usize,
    /// Hard cap on iterations; `None` derives one from the problem size.
    pub max_iterations: Option<usize>,
    pub refactor_interval: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            zero_tol: 1e-6,
            stall_threshold: 1000,
            max_iterations: None,
            refactor_interval: 64,
        }
    }
}

/// The relaxation of the subproblem left after granting some bids.
pub fn build_relaxation(auction: &Auction, remaining_stock: &[u32], active_bids: &[usize]) -> LpProblem {
    let objective = active_bids.iter().map(|&i| auction.price_f64(i)).collect();
    let matrix = (0..auction.num_goods())
        .map(|j| {
            active_bids
                .iter()
                .map(|&i| auction.bid(i).quantities[j] as f64)
                .collect()
        })
        .collect();
    let rhs = remaining_stock.iter().map(|&k| k as f64).collect();
    LpProblem {
        objective,
        matrix,
        rhs,
    }
}

/// Solves with default options.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    Simplex::new(LpOptions::default()).solve(problem)
}

/// Cheap upper bound that is never below the LP bound.
///
/// Each good `j` is charged the best price share any active bid assigns to
/// one unit of it, where bid `i` spreads its price over its bundle as
/// `p_i q_ij / sum_l q_il^2`. These shares form a feasible dual point, so
/// `sum_j k_j y_j` bounds the relaxation; the result is also capped by the
/// sum of active prices.
pub fn extended_norm_bound(auction: &Auction, remaining_stock: &[u32], active_bids: &[usize]) -> f64 {
    let mut share = vec![0.0f64; auction.num_goods()];
    let mut total_price = 0.0;
    for &i in active_bids {
        let bid = auction.bid(i);
        let price = auction.price_f64(i);
        total_price += price;
        let norm_sq: f64 = bid.quantities.iter().map(|&q| (q as f64) * (q as f64)).sum();
        for (s, &q) in share.iter_mut().zip(&bid.quantities) {
            if q > 0 {
                *s = s.max(price * q as f64 / norm_sq);
            }
        }
    }
    let norm_bound: f64 = share
        .iter()
        .zip(remaining_stock)
        .map(|(s, &k)| s * k as f64)
        .sum();
    norm_bound.min(total_price)
}

/// Weak-duality bound `b.y + sum_i max(0, c_i - y.A_i)` for any `y >= 0`.
fn dual_bound(problem: &LpProblem, y: &[f64]) -> f64 {
    let y: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    let mut bound: f64 = problem.rhs.iter().zip(&y).map(|(b, v)| b * v).sum();
    for (i, &c) in problem.objective.iter().enumerate() {
        let priced: f64 = problem.matrix.iter().zip(&y).map(|(row, v)| row[i] * v).sum();
        bound += (c - priced).max(0.0);
    }
    bound
}

/// Dense bounded-variable revised simplex with an explicit basis inverse.
///
/// Pricing is Dantzig's largest reduced cost; after `stall_threshold`
/// consecutive degenerate pivots it switches to Bland's smallest-index rule
/// for the rest of the solve, which guarantees termination.
#[derive(Clone, Debug, Default)]
pub struct Simplex {
    options: LpOptions,
}

const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;

impl Simplex {
    pub fn new(options: LpOptions) -> Self {
        Simplex { options }
    }

    pub fn options(&self) -> &LpOptions {
        &self.options
    }

    pub fn solve(&self, problem: &LpProblem) -> Result<LpSolution, LpError> {
        problem.validate()?;
        let mut state = State::new(problem);
        let iterations = state.run(&self.options)?;

        let n = problem.num_vars();
        let coefficients: Vec<f64> = state.x[..n].iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let violation = problem.max_violation(&coefficients);
        let scale = problem.rhs.iter().fold(1.0f64, |a, &b| a.max(b));
        let (objective_value, status) = if violation <= self.options.feasibility_tol * scale {
            (problem.evaluate(&coefficients), LpStatus::Optimal)
        } else {
            (dual_bound(problem, &state.duals()), LpStatus::InfeasibleGuard)
        };
        Ok(LpSolution {
            objective_value,
            coefficients,
            status,
            iterations,
        })
    }
}

struct State<'a> {
    problem: &'a LpProblem,
    n: usize,
    m: usize,
    /// Sparse structural columns as (row, value).
    columns: Vec<Vec<(usize, f64)>>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    at_upper: Vec<bool>,
    x: Vec<f64>,
    /// Row-major m x m inverse of the basis matrix.
    binv: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(problem: &'a LpProblem) -> Self {
        let n = problem.num_vars();
        let m = problem.num_rows();
        let mut columns = vec![Vec::new(); n];
        for (r, row) in problem.matrix.iter().enumerate() {
            for (c, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    columns[c].push((r, a));
                }
            }
        }
        let mut x = vec![0.0; n + m];
        x[n..].copy_from_slice(&problem.rhs);
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        let mut in_basis = vec![false; n + m];
        in_basis[n..].iter_mut().for_each(|b| *b = true);
        State {
            problem,
            n,
            m,
            columns,
            basis: (n..n + m).collect(),
            in_basis,
            at_upper: vec![false; n + m],
            x,
            binv,
        }
    }

    fn cost(&self, var: usize) -> f64 {
        if var < self.n {
            self.problem.objective[var]
        } else {
            0.0
        }
    }

    fn upper(&self, var: usize) -> f64 {
        if var < self.n {
            1.0
        } else {
            f64::INFINITY
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &var) in self.basis.iter().enumerate() {
            let c = self.cost(var);
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yk, &b) in y.iter_mut().zip(row) {
                    *yk += c * b;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, var: usize, y: &[f64]) -> f64 {
        if var < self.n {
            self.problem.objective[var]
                - self.columns[var].iter().map(|&(r, a)| y[r] * a).sum::<f64>()
        } else {
            -y[var - self.n]
        }
    }

    /// `B^{-1} a_var`.
    fn column(&self, var: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        if var < self.n {
            for &(r, a) in &self.columns[var] {
                for (i, al) in alpha.iter_mut().enumerate() {
                    *al += self.binv[i * m + r] * a;
                }
            }
        } else {
            let r = var - self.n;
            for (i, al) in alpha.iter_mut().enumerate() {
                *al = self.binv[i * m + r];
            }
        }
        alpha
    }

    fn run(&mut self, options: &LpOptions) -> Result<usize, LpError> {
        let limit = options
            .max_iterations
            .unwrap_or(10_000 + 50 * (self.n + self.m));
        let mut bland = false;
        let mut stalled = 0usize;
        let mut since_refactor = 0usize;
        let mut iterations = 0usize;

        loop {
            if iterations >= limit {
                return Err(LpError::IterationLimit { iterations });
            }
            let y = self.duals();

            // pricing
            let mut entering: Option<(usize, f64)> = None;
            for var in 0..self.n + self.m {
                if self.in_basis[var] {
                    continue;
                }
                let d = self.reduced_cost(var, &y);
                let eligible = if self.at_upper[var] {
                    d < -options.optimality_tol
                } else {
                    d > options.optimality_tol
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((var, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    entering = Some((var, d));
                }
            }

            let Some((q, d_q)) = entering else {
                if since_refactor == 0 {
                    return Ok(iterations);
                }
                // confirm optimality on freshly recomputed values
                self.refactor()?;
                since_refactor = 0;
                continue;
            };
            iterations += 1;

            let alpha = self.column(q);
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

            // ratio test; `None` means the entering variable flips bounds
            let mut step = self.upper(q);
            let mut leaving: Option<(usize, f64)> = None;
            for (r, &a) in alpha.iter().enumerate() {
                let delta = dir * a;
                let var = self.basis[r];
                let t = if delta > PIVOT_TOL {
                    (self.x[var] / delta).max(0.0)
                } else if delta < -PIVOT_TOL {
                    let ub = self.upper(var);
                    if ub.is_infinite() {
                        continue;
                    }
                    ((ub - self.x[var]) / -delta).max(0.0)
                } else {
                    continue;
                };
                if t < step - RATIO_TIE {
                    step = t;
                    leaving = Some((r, delta));
                } else if t <= step + RATIO_TIE {
                    // ties with a bound flip keep the flip
                    let Some((lr, _)) = leaving else { continue };
                    let wins = if bland {
                        var < self.basis[lr]
                    } else {
                        let current = alpha[lr].abs();
                        a.abs() > current || (a.abs() == current && var < self.basis[lr])
                    };
                    if wins {
                        step = step.min(t);
                        leaving = Some((r, delta));
                    }
                }
            }
            if step.is_infinite() {
                return Err(LpError::Malformed("relaxation is unbounded".into()));
            }

            for (r, &a) in alpha.iter().enumerate() {
                let var = self.basis[r];
                self.x[var] -= dir * a * step;
            }
            self.x[q] += dir * step;

            match leaving {
                None => {
                    self.at_upper[q] = !self.at_upper[q];
                    self.x[q] = if self.at_upper[q] { 1.0 } else { 0.0 };
                }
                Some((r, delta)) => {
                    let out = self.basis[r];
                    let to_upper = delta < 0.0;
                    self.x[out] = if to_upper { self.upper(out) } else { 0.0 };
                    self.at_upper[out] = to_upper;
                    self.in_basis[out] = false;
                    self.in_basis[q] = true;
                    self.at_upper[q] = false;
                    self.basis[r] = q;
                    self.pivot(r, &alpha);
                    since_refactor += 1;
                    if since_refactor >= options.refactor_interval {
                        self.refactor()?;
                        since_refactor = 0;
                    }
                }
            }

            if d_q.abs() * step <= 1e-12 {
                stalled += 1;
                if stalled >= options.stall_threshold {
                    bland = true;
                }
            } else {
                stalled = 0;
            }
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= p;
        }
        for (i, &f) in alpha.iter().enumerate().take(m) {
            if i == r || f == 0.0 {
                continue;
            }
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
    }

    /// Recomputes `B^{-1}` by Gauss-Jordan elimination and the basic values
    /// from the nonbasic ones.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (c, &var) in self.basis.iter().enumerate() {
            if var < self.n {
                for &(r, a) in &self.columns[var] {
                    b[r * m + c] = a;
                }
            } else {
                b[(var - self.n) * m + c] = 1.0;
            }
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for col in 0..m {
            let pivot_row = (col..m)
                .max_by(|&a, &b2| {
                    b[a * m + col]
                        .abs()
                        .partial_cmp(&b[b2 * m + col].abs())
                        .unwrap()
                        .then(b2.cmp(&a))
                })
                .unwrap();
            if b[pivot_row * m + col].abs() < 1e-12 {
                return Err(LpError::SingularBasis);
            }
            if pivot_row != col {
                for k in 0..m {
                    b.swap(pivot_row * m + k, col * m + k);
                    inv.swap(pivot_row * m + k, col * m + k);
                }
            }
            let p = b[col * m + col];
            for k in 0..m {
                b[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = b[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    b[r * m + k] -= f * b[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
        self.binv = inv;

        // x_B = B^{-1} (b - N x_N); only structurals at their upper bound
        // contribute to N x_N
        let mut residual = self.problem.rhs.clone();
        for var in 0..self.n {
            if !self.in_basis[var] && self.at_upper[var] {
                for &(r, a) in &self.columns[var] {
                    residual[r] -= a;
                }
            }
        }
        for (i, &var) in self.basis.iter().enumerate() {
            let row = &self.binv[i * m..(i + 1) * m];
            self.x[var] = row.iter().zip(&residual).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }
}
