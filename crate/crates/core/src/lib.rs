//! Exact winner determination for multi-unit combinatorial auctions.
//!
//! Depth-first branch and bound over grant/deny decisions, bounded at every
//! node by the fractional LP relaxation, seeded with a portfolio of greedy
//! allocations, plus seeded instance generators and an experiment harness.

pub mod bench;
pub mod error;
pub mod generators;
pub mod heuristics;
pub mod instance;
pub mod lp;
pub mod model;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Allocation, Auction, Bid, Money, PriceScale};
