use thiserror::Error;

use crate::lp::LpError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("bid {bid} requests {requested} units of good {good} but only {available} exist")]
    BidExceedsStock {
        bid: usize,
        good: usize,
        requested: u32,
        available: u32,
    },

    #[error("bid {bid} requests no units of any good")]
    EmptyBid { bid: usize },

    #[error("bid {bid} has a non-positive price")]
    NonPositivePrice { bid: usize },

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("bid index {index} out of range ({len} bids)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("bid subset is not conflict-free (good {good} oversubscribed)")]
    NotConflictFree { good: usize },

    #[error("brute-force oracle refuses {bids} bids (cap is {cap})")]
    OracleTooLarge { bids: usize, cap: usize },

    #[error("invalid generator spec: {0}")]
    Spec(String),

    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
