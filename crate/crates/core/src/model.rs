//! Multi-unit combinatorial auctions: goods with unit inventories, bids on
//! bundles of units, and conflict-free allocations.
//!
//! Prices are held as fixed-point integers ([`Money`]) at a per-auction
//! decimal scale, so incumbent comparisons during search are exact. Only the
//! LP relaxation works in floating point.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

use crate::error::{Error, Result};

/// Default number of decimal digits kept for prices (ticks of 10^-4).
pub const DEFAULT_DECIMALS: u32 = 4;

/// Largest bid count the brute-force oracle accepts by default.
pub const DEFAULT_ORACLE_CAP: usize = 24;

/// A monetary amount in integer ticks of the owning auction's [`PriceScale`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(pub i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn ticks(self) -> i64 {
        self.0
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

/// Decimal fixed-point scale: one monetary unit is `10^decimals` ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PriceScale {
    decimals: u32,
}

impl Default for PriceScale {
    fn default() -> Self {
        PriceScale {
            decimals: DEFAULT_DECIMALS,
        }
    }
}

impl PriceScale {
    pub fn new(decimals: u32) -> Result<Self> {
        if decimals > 9 {
            return Err(Error::Instance(format!(
                "price scale of {decimals} decimals is too fine"
            )));
        }
        Ok(PriceScale { decimals })
    }

    pub fn decimals(self) -> u32 {
        self.decimals
    }

    pub fn ticks_per_unit(self) -> i64 {
        10i64.pow(self.decimals)
    }

    pub fn to_f64(self, money: Money) -> f64 {
        money.0 as f64 / self.ticks_per_unit() as f64
    }

    /// Rounds a real amount to the nearest tick.
    pub fn from_f64(self, value: f64) -> Money {
        Money((value * self.ticks_per_unit() as f64).round() as i64)
    }

    /// Largest tick count not exceeding `value` (used to snap real-valued
    /// upper bounds onto the price grid).
    pub fn floor_ticks(self, value: f64) -> i64 {
        (value * self.ticks_per_unit() as f64).floor() as i64
    }

    /// Parses a plain decimal such as `12`, `12.5` or `-0.25`. Digits beyond
    /// the scale must be zero.
    pub fn parse(self, text: &str) -> std::result::Result<Money, String> {
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(format!("`{text}` is not a decimal number"));
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(format!("`{text}` is not a decimal number"));
        }
        let decimals = self.decimals as usize;
        if frac_part.len() > decimals && frac_part[decimals..].bytes().any(|b| b != b'0') {
            return Err(format!(
                "`{text}` has more than {decimals} significant decimal places"
            ));
        }
        let whole: i64 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|_| format!("`{text}` is out of range"))?
        };
        let mut frac: i64 = 0;
        for i in 0..decimals {
            let digit = frac_part.as_bytes().get(i).map_or(0, |b| (b - b'0') as i64);
            frac = frac * 10 + digit;
        }
        let ticks = whole
            .checked_mul(self.ticks_per_unit())
            .and_then(|t| t.checked_add(frac))
            .ok_or_else(|| format!("`{text}` is out of range"))?;
        Ok(Money(if negative { -ticks } else { ticks }))
    }

    /// Shortest exact decimal rendering of `money` (trailing zeros trimmed).
    pub fn format(self, money: Money) -> String {
        let per = self.ticks_per_unit();
        let sign = if money.0 < 0 { "-" } else { "" };
        let abs = money.0.unsigned_abs();
        let whole = abs / per as u64;
        let frac = abs % per as u64;
        if frac == 0 {
            return format!("{sign}{whole}");
        }
        let digits = format!("{:0width$}", frac, width = self.decimals as usize);
        format!("{sign}{whole}.{}", digits.trim_end_matches('0'))
    }
}

/// One bid: a bundle of units and the price offered for all of it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bid {
    pub quantities: Vec<u32>,
    pub price: Money,
}

impl Bid {
    pub fn new(quantities: Vec<u32>, price: Money) -> Self {
        Bid { quantities, price }
    }

    /// Total number of units requested across goods.
    pub fn total_units(&self) -> u64 {
        self.quantities.iter().map(|&q| q as u64).sum()
    }

    pub fn fits(&self, stock: &[u32]) -> bool {
        self.quantities.iter().zip(stock).all(|(&q, &k)| q <= k)
    }
}

/// A validated auction instance. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Auction {
    stock: Vec<u32>,
    bids: Vec<Bid>,
    scale: PriceScale,
}

impl Auction {
    /// Validates and builds an auction at the default price scale.
    pub fn new(stock: Vec<u32>, bids: Vec<Bid>) -> Result<Self> {
        Self::with_scale(stock, bids, PriceScale::default())
    }

    pub fn with_scale(stock: Vec<u32>, bids: Vec<Bid>, scale: PriceScale) -> Result<Self> {
        if stock.is_empty() {
            return Err(Error::Instance("an auction needs at least one good".into()));
        }
        if let Some(j) = stock.iter().position(|&k| k == 0) {
            return Err(Error::Instance(format!("good {j} has zero units for sale")));
        }
        for (i, bid) in bids.iter().enumerate() {
            if bid.quantities.len() != stock.len() {
                return Err(Error::Instance(format!(
                    "bid {i} lists {} quantities for {} goods",
                    bid.quantities.len(),
                    stock.len()
                )));
            }
            if bid.price.0 <= 0 {
                return Err(Error::NonPositivePrice { bid: i });
            }
            if bid.quantities.iter().all(|&q| q == 0) {
                return Err(Error::EmptyBid { bid: i });
            }
            for (j, (&q, &k)) in bid.quantities.iter().zip(&stock).enumerate() {
                if q > k {
                    return Err(Error::BidExceedsStock {
                        bid: i,
                        good: j,
                        requested: q,
                        available: k,
                    });
                }
            }
        }
        Ok(Auction { stock, bids, scale })
    }

    pub fn num_goods(&self) -> usize {
        self.stock.len()
    }

    pub fn num_bids(&self) -> usize {
        self.bids.len()
    }

    pub fn stock(&self) -> &[u32] {
        &self.stock
    }

    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    pub fn bid(&self, index: usize) -> &Bid {
        &self.bids[index]
    }

    pub fn scale(&self) -> PriceScale {
        self.scale
    }

    /// Price of bid `index` in monetary units.
    pub fn price_f64(&self, index: usize) -> f64 {
        self.scale.to_f64(self.bids[index].price)
    }

    pub fn to_f64(&self, money: Money) -> f64 {
        self.scale.to_f64(money)
    }

    fn check_indices(&self, subset: &[usize]) -> Result<()> {
        match subset.iter().find(|&&i| i >= self.bids.len()) {
            Some(&index) => Err(Error::IndexOutOfRange {
                index,
                len: self.bids.len(),
            }),
            None => Ok(()),
        }
    }

    fn first_oversubscribed(&self, subset: &[usize]) -> Option<usize> {
        let mut demand = vec![0u64; self.stock.len()];
        for &i in subset {
            for (d, &q) in demand.iter_mut().zip(&self.bids[i].quantities) {
                *d += q as u64;
            }
        }
        demand
            .iter()
            .zip(&self.stock)
            .position(|(&d, &k)| d > k as u64)
    }

    /// True iff the summed demand of `subset` fits the stock of every good.
    pub fn is_conflict_free(&self, subset: &[usize]) -> Result<bool> {
        self.check_indices(subset)?;
        Ok(self.first_oversubscribed(subset).is_none())
    }

    /// Exact total price of a conflict-free subset.
    pub fn allocation_value(&self, subset: &[usize]) -> Result<Money> {
        self.check_indices(subset)?;
        if let Some(good) = self.first_oversubscribed(subset) {
            return Err(Error::NotConflictFree { good });
        }
        Ok(subset.iter().map(|&i| self.bids[i].price).sum())
    }

    /// Builds a checked [`Allocation`] from a set of bid indices.
    pub fn allocation(&self, granted: impl IntoIterator<Item = usize>) -> Result<Allocation> {
        let mut granted: Vec<usize> = granted.into_iter().collect();
        granted.sort_unstable();
        granted.dedup();
        let value = self.allocation_value(&granted)?;
        Ok(Allocation { granted, value })
    }

    /// Exhaustive optimum, for use as a test oracle. Refuses more than
    /// [`DEFAULT_ORACLE_CAP`] bids.
    pub fn brute_force_optimum(&self) -> Result<Allocation> {
        self.brute_force_optimum_capped(DEFAULT_ORACLE_CAP)
    }

    /// Enumerates index sets in lexicographic order and keeps the first one
    /// of maximum value, so ties resolve to the lexicographically smallest set.
    pub fn brute_force_optimum_capped(&self, cap: usize) -> Result<Allocation> {
        if self.bids.len() > cap {
            return Err(Error::OracleTooLarge {
                bids: self.bids.len(),
                cap,
            });
        }
        let mut search = Enumeration {
            auction: self,
            current: Vec::new(),
            current_value: Money::ZERO,
            best: Vec::new(),
            best_value: Money::ZERO,
        };
        let mut stock = self.stock.clone();
        search.extend(0, &mut stock);
        Ok(Allocation {
            granted: search.best,
            value: search.best_value,
        })
    }
}

struct Enumeration<'a> {
    auction: &'a Auction,
    current: Vec<usize>,
    current_value: Money,
    best: Vec<usize>,
    best_value: Money,
}

impl Enumeration<'_> {
    // Preorder over increasing extensions visits sorted index sets in
    // lexicographic order. Infeasible sets are skipped together with all of
    // their supersets (downward closure).
    fn extend(&mut self, from: usize, stock: &mut [u32]) {
        if self.current_value > self.best_value {
            self.best_value = self.current_value;
            self.best = self.current.clone();
        }
        for i in from..self.auction.bids.len() {
            let bid = &self.auction.bids[i];
            if !bid.fits(stock) {
                continue;
            }
            for (k, &q) in stock.iter_mut().zip(&bid.quantities) {
                *k -= q;
            }
            self.current.push(i);
            self.current_value += bid.price;
            self.extend(i + 1, stock);
            self.current_value = self.current_value - bid.price;
            self.current.pop();
            for (k, &q) in stock.iter_mut().zip(&bid.quantities) {
                *k += q;
            }
        }
    }
}

/// A set of granted bids together with its exact value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Allocation {
    granted: Vec<usize>,
    value: Money,
}

impl Allocation {
    pub fn empty() -> Self {
        Allocation::default()
    }

    /// Sorted indices of the granted bids.
    pub fn granted(&self) -> &[usize] {
        &self.granted
    }

    pub fn value(&self) -> Money {
        self.value
    }

    pub fn len(&self) -> usize {
        self.granted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.granted.is_empty()
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.granted.iter().enumerate() {
            if n > 0 {
                write!(f, " ")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Componentwise `stock - demand`; caller guarantees the bid fits.
pub(crate) fn subtract_demand(stock: &[u32], bid: &Bid) -> Vec<u32> {
    stock
        .iter()
        .zip(&bid.quantities)
        .map(|(&k, &q)| k - q)
        .collect()
}
