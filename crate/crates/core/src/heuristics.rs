//! Greedy allocations used to seed the search with a good incumbent.
//!
//! Every heuristic repeatedly grants the most attractive bid that still
//! fits, removes what it consumed from stock, and drops the bids that no
//! longer fit. They differ only in the ordering [`Criterion`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lp::{build_relaxation, Simplex};
use crate::model::{subtract_demand, Allocation, Auction, Money};
use crate::rng::SeededRng;

/// Bid-ordering rule. Higher score means granted (or branched on) earlier;
/// ties always go to the lower bid index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// `p / sqrt(sum_j q_j)`
    SquareRoot,
    Price,
    /// `p / sum_j q_j`
    PricePerUnit,
    /// `p / sum_j (q_j / k_j)`, quantities measured as shares of stock.
    NormalizedPricePerUnit,
    /// `p * sqrt(sum_j q_j)`: favours large bundles.
    PriceTimesSqrtUnits,
    GivenOrder,
    ReverseGivenOrder,
    /// A fixed pseudo-random priority derived from the seed.
    Random(u64),
    InversePrice,
    InverseSquareRoot,
    InversePricePerUnit,
    /// Descending coefficient in the LP relaxation of the whole auction.
    LpCoefficient,
    /// Re-solves the relaxation over the surviving bids before every pick.
    LpAdaptive,
}

impl Criterion {
    /// True for criteria whose ordering needs an LP solve.
    pub fn uses_lp(self) -> bool {
        matches!(self, Criterion::LpCoefficient | Criterion::LpAdaptive)
    }

    /// Score of one bid, or `None` for LP-based criteria (whose order
    /// depends on an LP solution rather than the bid alone).
    pub fn score(self, auction: &Auction, bid: usize) -> Option<f64> {
        let b = auction.bid(bid);
        let price = auction.price_f64(bid);
        let units = b.total_units() as f64;
        let score = match self {
            Criterion::SquareRoot => price / units.sqrt(),
            Criterion::Price => price,
            Criterion::PricePerUnit => price / units,
            Criterion::NormalizedPricePerUnit => {
                let share: f64 = b
                    .quantities
                    .iter()
                    .zip(auction.stock())
                    .map(|(&q, &k)| q as f64 / k as f64)
                    .sum();
                price / share
            }
            Criterion::PriceTimesSqrtUnits => price * units.sqrt(),
            Criterion::GivenOrder => -(bid as f64),
            Criterion::ReverseGivenOrder => bid as f64,
            Criterion::Random(seed) => -(random_rank(seed, auction.num_bids())[bid] as f64),
            Criterion::InversePrice => -price,
            Criterion::InverseSquareRoot => -(price / units.sqrt()),
            Criterion::InversePricePerUnit => -(price / units),
            Criterion::LpCoefficient | Criterion::LpAdaptive => return None,
        };
        Some(score)
    }

    /// Scores of all bids, or `None` for LP-based criteria.
    pub fn scores(self, auction: &Auction) -> Option<Vec<f64>> {
        if self.uses_lp() {
            return None;
        }
        if let Criterion::Random(seed) = self {
            let rank = random_rank(seed, auction.num_bids());
            return Some(rank.into_iter().map(|r| -(r as f64)).collect());
        }
        (0..auction.num_bids()).map(|i| self.score(auction, i)).collect()
    }
}

/// Position of each bid in a seeded random permutation.
fn random_rank(seed: u64, len: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    SeededRng::new(seed).shuffle(&mut order);
    let mut rank = vec![0; len];
    for (pos, &bid) in order.iter().enumerate() {
        rank[bid] = pos;
    }
    rank
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::SquareRoot => write!(f, "sqrt"),
            Criterion::Price => write!(f, "price"),
            Criterion::PricePerUnit => write!(f, "price-per-unit"),
            Criterion::NormalizedPricePerUnit => write!(f, "normalized-price-per-unit"),
            Criterion::PriceTimesSqrtUnits => write!(f, "price-times-sqrt-units"),
            Criterion::GivenOrder => write!(f, "given-order"),
            Criterion::ReverseGivenOrder => write!(f, "reverse-given-order"),
            Criterion::Random(seed) => write!(f, "random:{seed}"),
            Criterion::InversePrice => write!(f, "inverse-price"),
            Criterion::InverseSquareRoot => write!(f, "inverse-sqrt"),
            Criterion::InversePricePerUnit => write!(f, "inverse-price-per-unit"),
            Criterion::LpCoefficient => write!(f, "lp-coefficient"),
            Criterion::LpAdaptive => write!(f, "lp-adaptive"),
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(seed) = s.strip_prefix("random:") {
            return seed
                .parse()
                .map(Criterion::Random)
                .map_err(|_| Error::Config(format!("bad random seed `{seed}`")));
        }
        Ok(match s.as_str() {
            "sqrt" | "square-root" => Criterion::SquareRoot,
            "price" => Criterion::Price,
            "price-per-unit" => Criterion::PricePerUnit,
            "normalized-price-per-unit" => Criterion::NormalizedPricePerUnit,
            "price-times-sqrt-units" => Criterion::PriceTimesSqrtUnits,
            "given-order" => Criterion::GivenOrder,
            "reverse-given-order" => Criterion::ReverseGivenOrder,
            "random" => Criterion::Random(0),
            "inverse-price" => Criterion::InversePrice,
            "inverse-sqrt" | "inverse-square-root" => Criterion::InverseSquareRoot,
            "inverse-price-per-unit" => Criterion::InversePricePerUnit,
            "lp-coefficient" | "lp" => Criterion::LpCoefficient,
            "lp-adaptive" => Criterion::LpAdaptive,
            other => return Err(Error::Config(format!("unknown criterion `{other}`"))),
        })
    }
}

/// The 16-member initialization portfolio: attractive criteria, the two
/// uninformed orderings (random and given order), and deliberately
/// unattractive ones. `LpAdaptive` costs one LP per granted bid and can be
/// left out for very large auctions.
pub fn default_portfolio(include_adaptive: bool) -> Vec<Criterion> {
    let mut portfolio = vec![
        Criterion::SquareRoot,
        Criterion::Price,
        Criterion::PricePerUnit,
        Criterion::NormalizedPricePerUnit,
        Criterion::LpCoefficient,
        Criterion::LpAdaptive,
        Criterion::GivenOrder,
        Criterion::Random(1),
        Criterion::Random(2),
        Criterion::Random(3),
        Criterion::Random(4),
        Criterion::InversePrice,
        Criterion::InverseSquareRoot,
        Criterion::InversePricePerUnit,
        Criterion::ReverseGivenOrder,
        Criterion::PriceTimesSqrtUnits,
    ];
    if !include_adaptive {
        portfolio.retain(|&c| c != Criterion::LpAdaptive);
    }
    portfolio
}

/// LP coefficients are compared on a 1e-6 grid so float noise does not
/// break index tie-breaking.
pub(crate) fn coefficient_key(c: f64) -> i64 {
    (c * 1e6).round() as i64
}

/// Bid indices sorted by descending score, ties by ascending index.
fn order_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Bids sorted by their coefficient in the root relaxation, descending.
pub fn lp_coefficient_order(auction: &Auction) -> Result<Vec<usize>> {
    lp_coefficient_order_with(auction, &Simplex::default())
}

pub fn lp_coefficient_order_with(auction: &Auction, simplex: &Simplex) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..auction.num_bids()).collect();
    let solution = simplex.solve(&build_relaxation(auction, auction.stock(), &all))?;
    let keys: Vec<i64> = solution.coefficients.iter().map(|&c| coefficient_key(c)).collect();
    let mut order = all;
    order.sort_by(|&a, &b| keys[b].cmp(&keys[a]).then(a.cmp(&b)));
    Ok(order)
}

/// Grants bids in `order`, skipping those that no longer fit.
fn grant_in_order(auction: &Auction, order: &[usize]) -> Allocation {
    let mut stock = auction.stock().to_vec();
    let mut granted = Vec::new();
    for &i in order {
        let bid = auction.bid(i);
        if bid.fits(&stock) {
            stock = subtract_demand(&stock, bid);
            granted.push(i);
        }
    }
    auction
        .allocation(granted)
        .expect("greedy grants only fitting bids")
}

pub fn greedy(auction: &Auction, criterion: Criterion) -> Result<Allocation> {
    greedy_with(auction, criterion, &Simplex::default())
}

pub fn greedy_with(auction: &Auction, criterion: Criterion, simplex: &Simplex) -> Result<Allocation> {
    match criterion {
        Criterion::LpCoefficient => {
            let order = lp_coefficient_order_with(auction, simplex)?;
            Ok(grant_in_order(auction, &order))
        }
        Criterion::LpAdaptive => lp_adaptive(auction, simplex),
        _ => {
            let scores = criterion.scores(auction).expect("static criterion");
            Ok(grant_in_order(auction, &order_by_scores(&scores)))
        }
    }
}

fn lp_adaptive(auction: &Auction, simplex: &Simplex) -> Result<Allocation> {
    let mut stock = auction.stock().to_vec();
    let mut active: Vec<usize> = (0..auction.num_bids()).collect();
    let mut granted = Vec::new();
    while !active.is_empty() {
        let solution = simplex.solve(&build_relaxation(auction, &stock, &active))?;
        let pos = argmax_coefficient(&solution.coefficients);
        let chosen = active[pos];
        stock = subtract_demand(&stock, auction.bid(chosen));
        granted.push(chosen);
        active.retain(|&i| i != chosen && auction.bid(i).fits(&stock));
    }
    auction.allocation(granted)
}

/// Position of the largest coefficient, first one on ties.
pub(crate) fn argmax_coefficient(coefficients: &[f64]) -> usize {
    let mut best = 0;
    let mut best_key = i64::MIN;
    for (pos, &c) in coefficients.iter().enumerate() {
        let key = coefficient_key(c);
        if key > best_key {
            best = pos;
            best_key = key;
        }
    }
    best
}

/// Outcome of the initialization phase.
#[derive(Clone, Debug)]
pub struct Initialization {
    pub best: Allocation,
    /// Value reached by each criterion, in portfolio order.
    pub values: Vec<(Criterion, Money)>,
}

pub fn initialize(auction: &Auction, portfolio: &[Criterion]) -> Result<Initialization> {
    initialize_with(auction, portfolio, &Simplex::default())
}

/// Runs every criterion and keeps the best allocation. Among equal values
/// the lexicographically smallest granted set wins, so the result does not
/// depend on portfolio order.
pub fn initialize_with(auction: &Auction, portfolio: &[Criterion], simplex: &Simplex) -> Result<Initialization> {
    if portfolio.is_empty() {
        return Err(Error::Config("initialization portfolio is empty".into()));
    }
    let mut best: Option<Allocation> = None;
    let mut values = Vec::with_capacity(portfolio.len());
    for &criterion in portfolio {
        let allocation = greedy_with(auction, criterion, simplex)?;
        values.push((criterion, allocation.value()));
        let better = match &best {
            None => true,
            Some(b) => {
                allocation.value() > b.value()
                    || (allocation.value() == b.value() && allocation.granted() < b.granted())
            }
        };
        if better {
            best = Some(allocation);
        }
    }
    Ok(Initialization {
        best: best.expect("non-empty portfolio"),
        values,
    })
}
