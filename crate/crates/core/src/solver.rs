//! Depth-first branch and bound for winner determination.
//!
//! Each node holds a partial allocation, the stock it leaves, and the bids
//! that still fit. Visiting a node runs, in order:
//!
//! 1. **Update**: adopt the partial allocation if it beats the incumbent.
//! 2. **Stop**: return if no bid is left.
//! 3. **Bound**: solve the relaxation over the remaining bids (or reuse the
//!    parent's, see below).
//! 4. **Prune**: return if `partial + bound` cannot beat the incumbent.
//! 5. **Choose** a bid by the branching criterion.
//! 6. **Left**: grant it, shrink the stock, drop bids that stop fitting.
//! 7. **Right**: deny it.
//!
//! When the chosen bid's coefficient in the node's relaxation is zero, the
//! same LP point stays optimal once that bid is removed, so the right child
//! inherits the bound instead of solving again.
//!
//! Bounds are real numbers but every allocation value is a whole number of
//! price ticks, so the prune test snaps `bound + slack` down to the tick grid
//! and then compares exactly.

use std::rc::Rc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::heuristics::{argmax_coefficient, default_portfolio, initialize_with, Criterion, Initialization};
use crate::lp::{build_relaxation, extended_norm_bound, LpOptions, LpStatus, Simplex};
use crate::model::{subtract_demand, Allocation, Auction, Money, PriceScale};

/// Upper bound used in the Bound step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Lp,
    ExtendedNorm,
}

impl std::str::FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lp" => Ok(BoundKind::Lp),
            "extnorm" | "extended-norm" => Ok(BoundKind::ExtendedNorm),
            other => Err(Error::Config(format!("unknown bound `{other}`"))),
        }
    }
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundKind::Lp => write!(f, "lp"),
            BoundKind::ExtendedNorm => write!(f, "extnorm"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub branching: Criterion,
    pub bound: BoundKind,
    /// Greedy criteria run before the search to seed the incumbent.
    pub portfolio: Vec<Criterion>,
    pub lp: LpOptions,
    /// Maximum nodes to visit; 0 means unlimited.
    pub node_limit: u64,
    /// Wall-clock limit in seconds; 0 means unlimited.
    pub time_limit: f64,
    /// Added to every bound before the prune comparison. Must be at least
    /// the LP optimality tolerance.
    pub prune_slack: f64,
    /// Let the right child inherit the parent's bound when the chosen bid
    /// has a zero coefficient.
    pub reuse_zero_coefficients: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            branching: Criterion::SquareRoot,
            bound: BoundKind::Lp,
            portfolio: default_portfolio(true),
            lp: LpOptions::default(),
            node_limit: 0,
            time_limit: 0.0,
            prune_slack: 1e-6,
            reuse_zero_coefficients: true,
        }
    }
}

impl SolverConfig {
    pub fn with_branching(branching: Criterion) -> Self {
        SolverConfig {
            branching,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prune_slack.is_nan() || self.prune_slack < self.lp.optimality_tol {
            return Err(Error::Config(format!(
                "prune slack {} is below the LP optimality tolerance {}",
                self.prune_slack, self.lp.optimality_tol
            )));
        }
        if self.branching.uses_lp() && self.bound != BoundKind::Lp {
            return Err(Error::Config(format!(
                "branching `{}` needs the LP bound",
                self.branching
            )));
        }
        if self.time_limit.is_nan() || self.time_limit < 0.0 {
            return Err(Error::Config("time limit must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchStats {
    /// Invocations of the node routine, pruned ones included.
    pub nodes_visited: u64,
    /// Bound steps executed (nodes that had bids left).
    pub bound_steps: u64,
    pub lp_calls: u64,
    /// Bound steps that inherited the parent's LP instead of solving.
    pub lp_calls_saved: u64,
    /// Bound steps that evaluated the extended norm bound.
    pub norm_bound_calls: u64,
    pub prunes: u64,
    /// `(nodes visited so far, incumbent value)` each time the incumbent
    /// improves; the first entry is the initialization value at node 0.
    pub best_value_trace: Vec<(u64, Money)>,
    /// Seconds spent in the search, initialization excluded.
    pub wall_time: f64,
    pub init_time: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub allocation: Allocation,
    pub stats: SearchStats,
    /// A node or time limit stopped the search: the allocation is only a
    /// lower bound on the optimum.
    pub limit_hit: bool,
    pub initialization: Initialization,
    /// Bound computed at the root, if the root reached the Bound step.
    pub root_bound: Option<f64>,
}

impl SolveOutcome {
    pub fn is_optimal(&self) -> bool {
        !self.limit_hit
    }
}

/// Relaxation solved at some node, keyed by bid index.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeRelaxation {
    /// Active bids of the node, ascending.
    pub bids: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
}

impl NodeRelaxation {
    pub fn coefficient(&self, bid: usize) -> Option<f64> {
        self.bids
            .binary_search(&bid)
            .ok()
            .map(|pos| self.coefficients[pos])
    }
}

/// Bound for the right child after branching on `chosen`: the parent's
/// objective if `chosen` had a zero coefficient, otherwise nothing.
pub fn maybe_reuse_bound(parent: &NodeRelaxation, chosen: usize, zero_tol: f64) -> Option<f64> {
    if parent.status != LpStatus::Optimal {
        return None;
    }
    match parent.coefficient(chosen) {
        Some(c) if c.abs() <= zero_tol => Some(parent.objective),
        _ => None,
    }
}

/// Prune test: the subtree cannot beat `best` when
/// `partial + floor_grid(bound + slack) <= best`.
pub fn should_prune(partial: Money, bound: f64, slack: f64, best: Money, scale: PriceScale) -> bool {
    partial.ticks().saturating_add(scale.floor_ticks(bound + slack)) <= best.ticks()
}

/// Picks the bid to branch on among `active` (non-empty). Static criteria
/// take the highest score; LP criteria take the largest coefficient in the
/// node relaxation. Ties go to the lowest index.
pub fn choose_bid(
    auction: &Auction,
    active: &[usize],
    branching: Criterion,
    relaxation: Option<&NodeRelaxation>,
) -> usize {
    let scores = branching.scores(auction);
    choose_with(active, scores.as_deref(), relaxation)
}

fn choose_with(active: &[usize], scores: Option<&[f64]>, relaxation: Option<&NodeRelaxation>) -> usize {
    assert!(!active.is_empty(), "choose needs an active bid");
    match scores {
        Some(scores) => {
            let mut best = active[0];
            for &i in &active[1..] {
                if scores[i] > scores[best] {
                    best = i;
                }
            }
            best
        }
        None => {
            let lp = relaxation.expect("LP branching needs the node relaxation");
            let coefficients: Vec<f64> = active
                .iter()
                .map(|&i| lp.coefficient(i).unwrap_or(0.0))
                .collect();
            active[argmax_coefficient(&coefficients)]
        }
    }
}

/// Persistent list of granted bids shared between a node and its children.
struct Granted {
    bid: usize,
    rest: Option<Rc<Granted>>,
}

fn collect_granted(mut list: &Option<Rc<Granted>>) -> Vec<usize> {
    let mut out = Vec::new();
    while let Some(cell) = list {
        out.push(cell.bid);
        list = &cell.rest;
    }
    out
}

struct Inherited {
    relaxation: Rc<NodeRelaxation>,
    best_at_parent: Money,
}

struct NodeState {
    granted: Option<Rc<Granted>>,
    partial: Money,
    remaining_stock: Vec<u32>,
    /// Ascending; every entry fits `remaining_stock`.
    active_bids: Vec<usize>,
    inherited: Option<Inherited>,
    is_root: bool,
}

/// Solves `auction` to optimality (unless a limit is hit).
pub fn solve(auction: &Auction, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let simplex = Simplex::new(config.lp);

    let init_start = Instant::now();
    let initialization = if config.portfolio.is_empty() {
        Initialization {
            best: Allocation::empty(),
            values: Vec::new(),
        }
    } else {
        initialize_with(auction, &config.portfolio, &simplex)?
    };
    let init_time = init_start.elapsed().as_secs_f64();

    let mut search = Search {
        auction,
        config,
        simplex,
        scores: config.branching.scores(auction),
        best: initialization.best.clone(),
        stats: SearchStats {
            init_time,
            ..SearchStats::default()
        },
        root_bound: None,
    };
    search
        .stats
        .best_value_trace
        .push((0, search.best.value()));

    let start = Instant::now();
    let limit_hit = search.run(start)?;
    search.stats.wall_time = start.elapsed().as_secs_f64();

    Ok(SolveOutcome {
        allocation: search.best,
        stats: search.stats,
        limit_hit,
        initialization,
        root_bound: search.root_bound,
    })
}

struct Search<'a> {
    auction: &'a Auction,
    config: &'a SolverConfig,
    simplex: Simplex,
    scores: Option<Vec<f64>>,
    best: Allocation,
    stats: SearchStats,
    root_bound: Option<f64>,
}

impl Search<'_> {
    /// Returns whether a limit stopped the search.
    fn run(&mut self, start: Instant) -> Result<bool> {
        let mut stack = vec![NodeState {
            granted: None,
            partial: Money::ZERO,
            remaining_stock: self.auction.stock().to_vec(),
            active_bids: (0..self.auction.num_bids()).collect(),
            inherited: None,
            is_root: true,
        }];

        while let Some(node) = stack.pop() {
            if self.config.node_limit > 0 && self.stats.nodes_visited >= self.config.node_limit {
                return Ok(true);
            }
            if self.config.time_limit > 0.0 && start.elapsed().as_secs_f64() >= self.config.time_limit {
                return Ok(true);
            }
            if let Some((right, left)) = self.visit(node)? {
                stack.push(right);
                stack.push(left);
            }
        }
        Ok(false)
    }

    /// One invocation of the node routine; returns the (right, left)
    /// children when the node branches.
    fn visit(&mut self, node: NodeState) -> Result<Option<(NodeState, NodeState)>> {
        self.stats.nodes_visited += 1;

        // Update runs before Stop so that leaves are credited
        if node.partial > self.best.value() {
            self.best = self.auction.allocation(collect_granted(&node.granted))?;
            self.stats
                .best_value_trace
                .push((self.stats.nodes_visited, self.best.value()));
        }

        if node.active_bids.is_empty() {
            return Ok(None);
        }

        self.stats.bound_steps += 1;
        let (bound, relaxation, skip_prune) = match node.inherited {
            Some(inherited) => {
                self.stats.lp_calls_saved += 1;
                let unchanged = inherited.best_at_parent == self.best.value();
                (inherited.relaxation.objective, Some(inherited.relaxation), unchanged)
            }
            None => match self.config.bound {
                BoundKind::Lp => {
                    let problem = build_relaxation(self.auction, &node.remaining_stock, &node.active_bids);
                    let solution = self.simplex.solve(&problem)?;
                    self.stats.lp_calls += 1;
                    let relaxation = NodeRelaxation {
                        bids: node.active_bids.clone(),
                        coefficients: solution.coefficients,
                        objective: solution.objective_value,
                        status: solution.status,
                    };
                    (relaxation.objective, Some(Rc::new(relaxation)), false)
                }
                BoundKind::ExtendedNorm => {
                    self.stats.norm_bound_calls += 1;
                    let bound = extended_norm_bound(self.auction, &node.remaining_stock, &node.active_bids);
                    (bound, None, false)
                }
            },
        };
        if node.is_root {
            self.root_bound = Some(bound);
        }

        // an inherited bound cannot prune unless the incumbent moved since
        // the parent compared against it
        if !skip_prune
            && should_prune(
                node.partial,
                bound,
                self.config.prune_slack,
                self.best.value(),
                self.auction.scale(),
            )
        {
            self.stats.prunes += 1;
            return Ok(None);
        }

        let chosen = choose_with(&node.active_bids, self.scores.as_deref(), relaxation.as_deref());
        let bid = self.auction.bid(chosen);

        let inherited = match (&relaxation, self.config.reuse_zero_coefficients) {
            (Some(lp), true) => maybe_reuse_bound(lp, chosen, self.config.lp.zero_tol).map(|_| Inherited {
                relaxation: Rc::clone(lp),
                best_at_parent: self.best.value(),
            }),
            _ => None,
        };

        let left_stock = subtract_demand(&node.remaining_stock, bid);
        let left_active: Vec<usize> = node
            .active_bids
            .iter()
            .copied()
            .filter(|&i| i != chosen && self.auction.bid(i).fits(&left_stock))
            .collect();
        let left = NodeState {
            granted: Some(Rc::new(Granted {
                bid: chosen,
                rest: node.granted.clone(),
            })),
            partial: node.partial + bid.price,
            remaining_stock: left_stock,
            active_bids: left_active,
            inherited: None,
            is_root: false,
        };

        let mut right_active = node.active_bids;
        right_active.retain(|&i| i != chosen);
        let right = NodeState {
            granted: node.granted,
            partial: node.partial,
            remaining_stock: node.remaining_stock,
            active_bids: right_active,
            inherited,
            is_root: false,
        };
        Ok(Some((right, left)))
    }
}
