//! Seeded random auction generators.
//!
//! Every parameter that shapes a distribution lives in [`GeneratorSpec`] and
//! is written into the instance header, so a file records how it was made.
//! Output is a pure function of the spec (see [`crate::rng`] for the PRNG).

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::fmt;

use crate::error::{Error, Result};
use crate::instance::write_instance;
use crate::model::{Auction, Bid, Money, PriceScale};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// Multi-unit goods; bids take a few units of a random set of goods and
    /// are priced superadditively in their unit count.
    CamusMultiUnit,
    /// Uniformly sized random bundle, uniform price.
    SandholmRandom,
    /// Random bundle, price proportional to bundle size.
    SandholmWeightedRandom,
    /// Bundles of exactly `set_size` goods.
    SandholmUniform { set_size: usize },
    /// Start from one good, keep adding one with probability `alpha`.
    SandholmDecay { alpha: f64 },
    /// Goods are edges of a random geometric graph; bids are paths.
    CatsMultipaths,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::CamusMultiUnit => "camus",
            Family::SandholmRandom => "random",
            Family::SandholmWeightedRandom => "weighted-random",
            Family::SandholmUniform { .. } => "uniform",
            Family::SandholmDecay { .. } => "decay",
            Family::CatsMultipaths => "multipaths",
        }
    }

    pub fn is_multi_unit(&self) -> bool {
        matches!(self, Family::CamusMultiUnit)
    }

    /// Parses a family name with its defaults (`set_size` 3, `alpha` 0.55).
    pub fn parse(name: &str) -> Result<Family> {
        Ok(match name.trim().to_ascii_lowercase().as_str() {
            "camus" | "camus-multi-unit" => Family::CamusMultiUnit,
            "random" | "sandholm-random" => Family::SandholmRandom,
            "weighted-random" | "sandholm-weighted-random" => Family::SandholmWeightedRandom,
            "uniform" | "sandholm-uniform" => Family::SandholmUniform { set_size: 3 },
            "decay" | "sandholm-decay" => Family::SandholmDecay { alpha: 0.55 },
            "multipaths" | "cats-multipaths" => Family::CatsMultipaths,
            other => return Err(Error::Spec(format!("unknown family `{other}`"))),
        })
    }

    pub fn all_defaults() -> [Family; 6] {
        [
            Family::CamusMultiUnit,
            Family::SandholmRandom,
            Family::SandholmWeightedRandom,
            Family::SandholmUniform { set_size: 3 },
            Family::SandholmDecay { alpha: 0.55 },
            Family::CatsMultipaths,
        ]
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Full description of a random instance.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub family: Family,
    pub num_goods: usize,
    pub num_bids: usize,
    pub seed: u64,
    /// Uniform price range for the single-unit families (weighted random
    /// multiplies it by bundle size).
    pub price_low: f64,
    pub price_high: f64,
    /// Units per good, drawn uniformly in this range (multi-unit only).
    pub units_low: u32,
    pub units_high: u32,
    /// Largest quantity one bid requests of a single good (multi-unit only).
    pub max_quantity: u32,
    /// Probability of adding one more good to a multi-unit bundle.
    pub bundle_alpha: f64,
    /// Superadditivity exponent: price = units^beta * U(0.5, 1.5).
    pub beta: f64,
    /// Graph vertices for multipaths; 0 derives it from the edge count.
    pub vertices: usize,
    /// Alternative path bids per source/sink pair (multipaths).
    pub alternatives: usize,
    /// Edge lengths are jittered by U(1, 1 + detour) when routing
    /// alternatives (multipaths).
    pub detour: f64,
    /// Pair value = Euclidean source/sink distance * U(1, price_deviation).
    pub price_deviation: f64,
    /// Draws allowed per bid before the spec is declared unsatisfiable.
    pub max_attempts: u32,
}

impl GeneratorSpec {
    pub fn new(family: Family, num_goods: usize, num_bids: usize, seed: u64) -> Self {
        GeneratorSpec {
            family,
            num_goods,
            num_bids,
            seed,
            price_low: 1.0,
            price_high: 100.0,
            units_low: 1,
            units_high: 5,
            max_quantity: 3,
            bundle_alpha: 0.5,
            beta: 1.2,
            vertices: 0,
            alternatives: 5,
            detour: 0.5,
            price_deviation: 1.5,
            max_attempts: 1000,
        }
    }

    /// Sets one parameter by its metadata key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Spec(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "family" => {
                let parsed = Family::parse(value)?;
                // keep family parameters already set
                self.family = match (parsed, self.family) {
                    (Family::SandholmUniform { .. }, f @ Family::SandholmUniform { .. }) => f,
                    (Family::SandholmDecay { .. }, f @ Family::SandholmDecay { .. }) => f,
                    (p, _) => p,
                };
            }
            "goods" => self.num_goods = num(key, value)?,
            "bids" => self.num_bids = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "set_size" => match &mut self.family {
                Family::SandholmUniform { set_size } => *set_size = num(key, value)?,
                _ => return Err(Error::Spec("`set_size` applies to the uniform family".into())),
            },
            "alpha" => match &mut self.family {
                Family::SandholmDecay { alpha } => *alpha = num(key, value)?,
                _ => return Err(Error::Spec("`alpha` applies to the decay family".into())),
            },
            "price_low" => self.price_low = num(key, value)?,
            "price_high" => self.price_high = num(key, value)?,
            "units_low" => self.units_low = num(key, value)?,
            "units_high" => self.units_high = num(key, value)?,
            "max_quantity" => self.max_quantity = num(key, value)?,
            "bundle_alpha" => self.bundle_alpha = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "vertices" => self.vertices = num(key, value)?,
            "alternatives" => self.alternatives = num(key, value)?,
            "detour" => self.detour = num(key, value)?,
            "price_deviation" => self.price_deviation = num(key, value)?,
            "max_attempts" => self.max_attempts = num(key, value)?,
            other => return Err(Error::Spec(format!("unknown generator parameter `{other}`"))),
        }
        Ok(())
    }

    /// The parameters that matter for this family, as header key/values.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = vec![
            ("family".into(), self.family.name().into()),
            ("goods".into(), self.num_goods.to_string()),
            ("bids".into(), self.num_bids.to_string()),
            ("seed".into(), self.seed.to_string()),
        ];
        let mut push = |k: &str, v: String| out.push((k.into(), v));
        match self.family {
            Family::CamusMultiUnit => {
                push("units_low", self.units_low.to_string());
                push("units_high", self.units_high.to_string());
                push("max_quantity", self.max_quantity.to_string());
                push("bundle_alpha", self.bundle_alpha.to_string());
                push("beta", self.beta.to_string());
            }
            Family::CatsMultipaths => {
                push("vertices", self.effective_vertices().to_string());
                push("alternatives", self.alternatives.to_string());
                push("detour", self.detour.to_string());
                push("price_deviation", self.price_deviation.to_string());
            }
            Family::SandholmUniform { set_size } => {
                push("set_size", set_size.to_string());
                push("price_low", self.price_low.to_string());
                push("price_high", self.price_high.to_string());
            }
            Family::SandholmDecay { alpha } => {
                push("alpha", alpha.to_string());
                push("price_low", self.price_low.to_string());
                push("price_high", self.price_high.to_string());
            }
            Family::SandholmRandom | Family::SandholmWeightedRandom => {
                push("price_low", self.price_low.to_string());
                push("price_high", self.price_high.to_string());
            }
        }
        push("max_attempts", self.max_attempts.to_string());
        out
    }

    fn min_vertices(&self) -> usize {
        let mut v = 2;
        while v * (v - 1) / 2 < self.num_goods {
            v += 1;
        }
        v
    }

    /// Vertex count used for multipaths: the configured one, or about half
    /// the edge count (a sparse, road-like graph).
    pub fn effective_vertices(&self) -> usize {
        if self.vertices > 0 {
            return self.vertices;
        }
        (self.num_goods / 2 + 1).clamp(self.min_vertices(), self.num_goods + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Spec(msg));
        if self.num_goods == 0 {
            return bad("num_goods must be positive".into());
        }
        if self.num_bids == 0 {
            return bad("num_bids must be positive".into());
        }
        if !(self.price_low > 0.0 && self.price_low <= self.price_high && self.price_high.is_finite()) {
            return bad(format!("bad price range [{}, {}]", self.price_low, self.price_high));
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive".into());
        }
        match self.family {
            Family::SandholmUniform { set_size } => {
                if set_size == 0 || set_size > self.num_goods {
                    return bad(format!(
                        "set_size {set_size} must lie in 1..={}",
                        self.num_goods
                    ));
                }
            }
            Family::SandholmDecay { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return bad(format!("alpha {alpha} must lie in (0, 1)"));
                }
            }
            Family::CamusMultiUnit => {
                if self.units_low == 0 || self.units_low > self.units_high {
                    return bad(format!("bad unit range [{}, {}]", self.units_low, self.units_high));
                }
                if self.max_quantity == 0 {
                    return bad("max_quantity must be positive".into());
                }
                if !(0.0..1.0).contains(&self.bundle_alpha) {
                    return bad(format!("bundle_alpha {} must lie in [0, 1)", self.bundle_alpha));
                }
                if !(self.beta > 0.0 && self.beta.is_finite()) {
                    return bad(format!("beta {} must be positive", self.beta));
                }
            }
            Family::CatsMultipaths => {
                let v = self.effective_vertices();
                if v < 2 || v - 1 > self.num_goods || v * (v - 1) / 2 < self.num_goods {
                    return bad(format!(
                        "{v} vertices cannot carry a connected graph with {} edges",
                        self.num_goods
                    ));
                }
                if self.alternatives == 0 {
                    return bad("alternatives must be positive".into());
                }
                if self.detour.is_nan() || self.detour < 0.0 || self.price_deviation.is_nan() || self.price_deviation < 1.0 {
                    return bad("detour must be >= 0 and price_deviation >= 1".into());
                }
            }
            Family::SandholmRandom | Family::SandholmWeightedRandom => {}
        }
        Ok(())
    }
}

/// Builds the auction described by `spec`.
pub fn generate(spec: &GeneratorSpec) -> Result<Auction> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let scale = PriceScale::default();
    let (stock, bids) = match spec.family {
        Family::CatsMultipaths => multipaths(spec, &mut rng, scale)?,
        Family::CamusMultiUnit => {
            let stock: Vec<u32> = (0..spec.num_goods)
                .map(|_| rng.between(spec.units_low, spec.units_high))
                .collect();
            let bids = draw_bids(spec, &stock, |rng| camus_bid(spec, &stock, rng, scale), &mut rng)?;
            (stock, bids)
        }
        _ => {
            let stock = vec![1; spec.num_goods];
            let bids = draw_bids(spec, &stock, |rng| single_unit_bid(spec, rng, scale), &mut rng)?;
            (stock, bids)
        }
    };
    Auction::with_scale(stock, bids, scale)
}

/// Writes a generated auction with its spec as header metadata.
pub fn generate_to<W: std::io::Write>(spec: &GeneratorSpec, out: &mut W) -> Result<Auction> {
    let auction = generate(spec)?;
    write_instance(&auction, out, &spec.metadata())?;
    Ok(auction)
}

/// Edge endpoints of the multipaths network drawn for `spec`; edge `e` is
/// good `e` of the generated auction.
pub fn network(spec: &GeneratorSpec) -> Result<Vec<(usize, usize)>> {
    if spec.family != Family::CatsMultipaths {
        return Err(Error::Spec("only the multipaths family has a network".into()));
    }
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let graph = random_graph(spec, &mut rng);
    Ok(graph.edges.iter().map(|&(u, v, _)| (u, v)).collect())
}

/// Draws `num_bids` bids, resampling any that does not fit the stock.
fn draw_bids(
    spec: &GeneratorSpec,
    stock: &[u32],
    mut draw: impl FnMut(&mut SeededRng) -> Bid,
    rng: &mut SeededRng,
) -> Result<Vec<Bid>> {
    let mut bids = Vec::with_capacity(spec.num_bids);
    for index in 0..spec.num_bids {
        let mut attempts = 0;
        let bid = loop {
            attempts += 1;
            let bid = draw(rng);
            if bid.fits(stock) && bid.quantities.iter().any(|&q| q > 0) && bid.price.0 > 0 {
                break bid;
            }
            if attempts >= spec.max_attempts {
                return Err(Error::Spec(format!(
                    "bid {index}: no valid draw in {} attempts",
                    spec.max_attempts
                )));
            }
        };
        bids.push(bid);
    }
    Ok(bids)
}

fn price_from(value: f64, scale: PriceScale) -> Money {
    Money(scale.from_f64(value).0.max(1))
}

fn single_unit_bid(spec: &GeneratorSpec, rng: &mut SeededRng, scale: PriceScale) -> Bid {
    let n = spec.num_goods;
    let goods: Vec<usize> = match spec.family {
        Family::SandholmRandom | Family::SandholmWeightedRandom => {
            let size = 1 + rng.below(n as u64) as usize;
            rng.distinct(n, size)
        }
        Family::SandholmUniform { set_size } => rng.distinct(n, set_size),
        Family::SandholmDecay { alpha } => {
            let mut size = 1;
            while size < n && rng.chance(alpha) {
                size += 1;
            }
            rng.distinct(n, size)
        }
        Family::CamusMultiUnit | Family::CatsMultipaths => unreachable!("not a single-unit family"),
    };
    let mut quantities = vec![0; n];
    for &g in &goods {
        quantities[g] = 1;
    }
    let base = rng.uniform_range(spec.price_low, spec.price_high);
    let price = match spec.family {
        Family::SandholmWeightedRandom => base * goods.len() as f64,
        _ => base,
    };
    Bid::new(quantities, price_from(price, scale))
}

fn camus_bid(spec: &GeneratorSpec, stock: &[u32], rng: &mut SeededRng, scale: PriceScale) -> Bid {
    let n = spec.num_goods;
    let mut size = 1;
    while size < n && rng.chance(spec.bundle_alpha) {
        size += 1;
    }
    let mut quantities = vec![0; n];
    for g in rng.distinct(n, size) {
        let cap = spec.max_quantity.min(stock[g]);
        quantities[g] = rng.between(1, cap);
    }
    let units: u32 = quantities.iter().sum();
    let price = (units as f64).powf(spec.beta) * rng.uniform_range(0.5, 1.5);
    Bid::new(quantities, price_from(price, scale))
}

struct Graph {
    points: Vec<(f64, f64)>,
    /// (u, v, length) per edge; the edge index is the good index.
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Random points in the unit square, joined by a nearest-earlier-vertex
/// spanning tree plus the shortest remaining vertex pairs until the graph
/// has `num_goods` edges.
fn random_graph(spec: &GeneratorSpec, rng: &mut SeededRng) -> Graph {
    let v = spec.effective_vertices();
    let points: Vec<(f64, f64)> = (0..v).map(|_| (rng.uniform(), rng.uniform())).collect();
    let mut present = vec![vec![false; v]; v];
    let mut edges = Vec::with_capacity(spec.num_goods);
    for i in 1..v {
        let j = (0..i)
            .min_by(|&a, &b| {
                distance(points[i], points[a])
                    .total_cmp(&distance(points[i], points[b]))
                    .then(a.cmp(&b))
            })
            .expect("earlier vertex exists");
        present[i][j] = true;
        present[j][i] = true;
        edges.push((j, i, distance(points[i], points[j])));
    }
    let mut candidates: Vec<(f64, usize, usize)> = (0..v)
        .flat_map(|a| (a + 1..v).map(move |b| (a, b)))
        .filter(|&(a, b)| !present[a][b])
        .map(|(a, b)| (distance(points[a], points[b]), a, b))
        .collect();
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    for (len, a, b) in candidates.into_iter().take(spec.num_goods - edges.len()) {
        edges.push((a, b, len));
    }
    let mut adjacency = vec![Vec::new(); v];
    for (e, &(a, b, _)) in edges.iter().enumerate() {
        adjacency[a].push((b, e));
        adjacency[b].push((a, e));
    }
    Graph {
        points,
        edges,
        adjacency,
    }
}

/// Shortest path from `source` to `target` under per-edge `weights`,
/// returned as edge indices.
fn shortest_path(graph: &Graph, weights: &[f64], source: usize, target: usize) -> Option<Vec<usize>> {
    let v = graph.points.len();
    let mut dist = vec![f64::INFINITY; v];
    let mut via: Vec<Option<(usize, usize)>> = vec![None; v];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((OrderedDist(0.0), source)));
    while let Some(Reverse((OrderedDist(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == target {
            break;
        }
        for &(w, e) in &graph.adjacency[u] {
            let nd = d + weights[e];
            if nd < dist[w] {
                dist[w] = nd;
                via[w] = Some((u, e));
                heap.push(Reverse((OrderedDist(nd), w)));
            }
        }
    }
    if dist[target].is_infinite() {
        return None;
    }
    let mut path = Vec::new();
    let mut at = target;
    while let Some((prev, e)) = via[at] {
        path.push(e);
        at = prev;
    }
    path.reverse();
    Some(path)
}

#[derive(Clone, Copy, PartialEq)]
struct OrderedDist(f64);

impl Eq for OrderedDist {}

impl PartialOrd for OrderedDist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedDist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Path bids on a random road network. Each source/sink pair gets a value
/// from the straight-line distance between its endpoints, and offers it for
/// several alternative routes found on randomly jittered edge lengths.
fn multipaths(spec: &GeneratorSpec, rng: &mut SeededRng, scale: PriceScale) -> Result<(Vec<u32>, Vec<Bid>)> {
    let graph = random_graph(spec, rng);
    let v = graph.points.len();
    let mut bids = Vec::with_capacity(spec.num_bids);
    let mut failures = 0u32;
    while bids.len() < spec.num_bids {
        let source = rng.below(v as u64) as usize;
        let mut target = rng.below(v as u64 - 1) as usize;
        if target >= source {
            target += 1;
        }
        let value = distance(graph.points[source], graph.points[target])
            * rng.uniform_range(1.0, spec.price_deviation);
        for _ in 0..spec.alternatives {
            if bids.len() == spec.num_bids {
                break;
            }
            let weights: Vec<f64> = graph
                .edges
                .iter()
                .map(|&(_, _, len)| len * rng.uniform_range(1.0, 1.0 + spec.detour))
                .collect();
            let Some(path) = shortest_path(&graph, &weights, source, target) else {
                failures += 1;
                if failures >= spec.max_attempts {
                    return Err(Error::Spec("multipaths graph is disconnected".into()));
                }
                continue;
            };
            let mut quantities = vec![0; spec.num_goods];
            for e in path {
                quantities[e] = 1;
            }
            bids.push(Bid::new(quantities, price_from(value, scale)));
        }
    }
    Ok((vec![1; spec.num_goods], bids))
}
