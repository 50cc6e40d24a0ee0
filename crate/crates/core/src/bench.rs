//! Experiment harness: run solver configurations over grids of generated
//! auctions and collect nodes, LP calls, bounds and timings.
//!
//! Plans are flat `key = value` files:
//!
//! ```text
//! # comments start with '#'
//! name = bounds
//! family = camus            # any generator family name
//! goods = 10                # one value or a comma-separated list
//! bids = 250, 500, 750
//! replications = 15
//! master_seed = 2001
//! configs = sqrt/lp, sqrt/extnorm, lp-coefficient/lp   # branching/bound
//! portfolio = default       # default | no-adaptive | comma list of criteria
//! node_limit = 0
//! time_limit = 0
//! reuse = true
//! param.units_high = 5      # generator parameter overrides
//! ```
//!
//! Seeds are derived from `(master_seed, goods, bids, replication)`, so a
//! plan always regenerates the same auctions.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{generate, Family, GeneratorSpec};
use crate::heuristics::{default_portfolio, Criterion};
use crate::lp::{build_relaxation, extended_norm_bound, solve_lp};
use crate::model::Auction;
use crate::rng::derive_seed;
use crate::solver::{solve, BoundKind, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Relative slack allowed in the init <= opt <= LP <= norm chain.
pub const DOMINANCE_SLACK: f64 = 1e-6;

/// One solver variant compared by a plan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfigSpec {
    pub branching: Criterion,
    pub bound: BoundKind,
}

impl ConfigSpec {
    pub fn label(&self) -> String {
        format!("{}/{}", self.branching, self.bound)
    }
}

impl FromStr for ConfigSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (branching, bound) = match s.trim().split_once('/') {
            Some((b, k)) => (b.parse()?, k.parse()?),
            None => (s.parse()?, BoundKind::Lp),
        };
        Ok(ConfigSpec { branching, bound })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub name: String,
    /// Family and generator parameters; goods, bids and seed are overridden
    /// per cell and replication.
    pub generator: GeneratorSpec,
    pub goods: Vec<usize>,
    pub bids: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    pub configs: Vec<ConfigSpec>,
    pub portfolio: Vec<Criterion>,
    pub node_limit: u64,
    pub time_limit: f64,
    pub reuse_zero_coefficients: bool,
}

impl ExperimentPlan {
    pub fn new(family: Family, goods: Vec<usize>, bids: Vec<usize>) -> Self {
        ExperimentPlan {
            name: "plan".into(),
            generator: GeneratorSpec::new(family, 1, 1, 0),
            goods,
            bids,
            replications: 15,
            master_seed: 2001,
            configs: vec![ConfigSpec {
                branching: Criterion::SquareRoot,
                bound: BoundKind::Lp,
            }],
            portfolio: default_portfolio(true),
            node_limit: 0,
            time_limit: 0.0,
            reuse_zero_coefficients: true,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut plan = ExperimentPlan::new(Family::CamusMultiUnit, vec![], vec![]);
        let mut params: Vec<(String, String)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Plan(format!("line {}: expected `key = value`", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let fail = |what: &str| Error::Plan(format!("line {}: bad {what} `{value}`", n + 1));
            match key {
                "name" => plan.name = value.to_string(),
                "family" => plan.generator.family = Family::parse(value)?,
                "goods" => plan.goods = parse_list(value).map_err(|_| fail("goods"))?,
                "bids" => plan.bids = parse_list(value).map_err(|_| fail("bids"))?,
                "replications" => plan.replications = value.parse().map_err(|_| fail("replications"))?,
                "master_seed" => plan.master_seed = value.parse().map_err(|_| fail("master_seed"))?,
                "configs" => {
                    plan.configs = value
                        .split(',')
                        .map(ConfigSpec::from_str)
                        .collect::<Result<_>>()?
                }
                "portfolio" => {
                    plan.portfolio = match value {
                        "default" => default_portfolio(true),
                        "no-adaptive" => default_portfolio(false),
                        "none" => Vec::new(),
                        list => list
                            .split(',')
                            .map(Criterion::from_str)
                            .collect::<Result<_>>()?,
                    }
                }
                "node_limit" => plan.node_limit = value.parse().map_err(|_| fail("node_limit"))?,
                "time_limit" => plan.time_limit = value.parse().map_err(|_| fail("time_limit"))?,
                "reuse" => plan.reuse_zero_coefficients = value.parse().map_err(|_| fail("reuse"))?,
                _ => match key.strip_prefix("param.") {
                    Some(param) => params.push((param.to_string(), value.to_string())),
                    None => return Err(Error::Plan(format!("line {}: unknown key `{key}`", n + 1))),
                },
            }
        }
        // family-specific parameters need the final family in place
        for (k, v) in params {
            plan.generator.set(&k, &v)?;
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Plan("replications must be at least 1".into()));
        }
        if self.goods.is_empty() || self.bids.is_empty() {
            return Err(Error::Plan("goods and bids must each list at least one value".into()));
        }
        if self.configs.is_empty() {
            return Err(Error::Plan("at least one solver config is required".into()));
        }
        for cell in self.cells() {
            self.spec_for(cell, 0).validate()?;
        }
        for config in &self.configs {
            self.solver_config(config).validate()?;
        }
        Ok(())
    }

    /// `(goods, bids)` grid cells in plan order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.goods
            .iter()
            .flat_map(|&g| self.bids.iter().map(move |&b| (g, b)))
            .collect()
    }

    pub fn seed_for(&self, cell: (usize, usize), replication: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[cell.0 as u64, cell.1 as u64, replication as u64],
        )
    }

    pub fn spec_for(&self, cell: (usize, usize), replication: usize) -> GeneratorSpec {
        GeneratorSpec {
            num_goods: cell.0,
            num_bids: cell.1,
            seed: self.seed_for(cell, replication),
            ..self.generator.clone()
        }
    }

    pub fn solver_config(&self, config: &ConfigSpec) -> SolverConfig {
        SolverConfig {
            branching: config.branching,
            bound: config.bound,
            portfolio: self.portfolio.clone(),
            node_limit: self.node_limit,
            time_limit: self.time_limit,
            reuse_zero_coefficients: self.reuse_zero_coefficients,
            ..SolverConfig::default()
        }
    }
}

fn parse_list(value: &str) -> std::result::Result<Vec<usize>, std::num::ParseIntError> {
    value.split(',').map(|v| v.trim().parse()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Optimal,
    LimitHit,
    Failed,
}

impl RunStatus {
    fn as_str(self) -> &'static str {
        match self {
            RunStatus::Optimal => "optimal",
            RunStatus::LimitHit => "limit",
            RunStatus::Failed => "error",
        }
    }
}

/// One solver run on one generated auction. Values are in monetary units.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub family: String,
    pub goods: usize,
    pub bids: usize,
    pub replication: usize,
    pub seed: u64,
    pub config: String,
    pub status: RunStatus,
    /// Best value found: the optimum when `status` is optimal.
    pub optimum: f64,
    pub init_value: f64,
    pub root_lp: f64,
    pub root_extnorm: f64,
    pub nodes: u64,
    pub lp_calls: u64,
    pub lp_calls_saved: u64,
    pub prunes: u64,
    pub wall_time: f64,
    pub limit_hit: bool,
    pub dominance_ok: bool,
    pub error: String,
}

impl ResultRow {
    /// `(root LP - init) / opt`.
    pub fn relative_gap(&self) -> f64 {
        if self.optimum > 0.0 {
            (self.root_lp - self.init_value) / self.optimum
        } else {
            0.0
        }
    }
}

/// Whether `init <= opt <= lp <= norm`, each step within relative `slack`.
pub fn dominance_holds(init: f64, opt: f64, lp: f64, norm: f64, slack: f64) -> bool {
    let le = |a: f64, b: f64| a <= b + slack * b.abs().max(a.abs()).max(1.0);
    le(init, opt) && le(opt, lp) && le(lp, norm)
}

/// Greedy value of one criterion on one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicRow {
    pub goods: usize,
    pub bids: usize,
    pub replication: usize,
    pub criterion: String,
    pub value: f64,
    /// `100 * value / optimum`; empty when the optimum is unknown.
    pub percent_of_optimum: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stddev: f64,
}

/// Sample mean and (n - 1) standard deviation.
pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            mean: f64::NAN,
            stddev: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stddev = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary { mean, stddev }
}

/// Per (cell, config) aggregate over replications.
#[derive(Clone, Debug, PartialEq)]
pub struct CellAggregate {
    pub goods: usize,
    pub bids: usize,
    pub config: String,
    pub runs: usize,
    pub completed: usize,
    pub limit_hits: usize,
    pub failures: usize,
    pub nodes: Summary,
    pub lp_calls: Summary,
    pub lp_calls_saved: Summary,
    pub prunes: Summary,
    pub wall_time: Summary,
    pub optimum: Summary,
    pub init_value: Summary,
    pub root_lp: Summary,
    pub root_extnorm: Summary,
    pub relative_gap: Summary,
    /// Fraction of runs that needed a single LP call.
    pub single_lp_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub plan_name: String,
    pub rows: Vec<ResultRow>,
    pub heuristics: Vec<HeuristicRow>,
    pub aggregates: Vec<CellAggregate>,
}

impl PlanResult {
    pub fn dominance_violations(&self) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| !r.dominance_ok).collect()
    }

    pub fn aggregate(&self, goods: usize, bids: usize, config: &str) -> Option<&CellAggregate> {
        self.aggregates
            .iter()
            .find(|a| a.goods == goods && a.bids == bids && a.config == config)
    }
}

struct InstanceRuns {
    rows: Vec<ResultRow>,
    heuristics: Vec<HeuristicRow>,
}

fn run_instance(plan: &ExperimentPlan, cell: (usize, usize), replication: usize) -> InstanceRuns {
    let spec = plan.spec_for(cell, replication);
    let template = ResultRow {
        family: spec.family.name().to_string(),
        goods: cell.0,
        bids: cell.1,
        replication,
        seed: spec.seed,
        config: String::new(),
        status: RunStatus::Failed,
        optimum: f64::NAN,
        init_value: f64::NAN,
        root_lp: f64::NAN,
        root_extnorm: f64::NAN,
        nodes: 0,
        lp_calls: 0,
        lp_calls_saved: 0,
        prunes: 0,
        wall_time: 0.0,
        limit_hit: false,
        dominance_ok: false,
        error: String::new(),
    };
    let failed = |message: String| InstanceRuns {
        rows: plan
            .configs
            .iter()
            .map(|c| ResultRow {
                config: c.label(),
                error: message.clone(),
                ..template.clone()
            })
            .collect(),
        heuristics: Vec::new(),
    };

    let auction = match generate(&spec) {
        Ok(a) => a,
        Err(e) => return failed(e.to_string()),
    };
    let (root_lp, root_extnorm) = match root_bounds(&auction) {
        Ok(b) => b,
        Err(e) => return failed(e.to_string()),
    };

    let mut rows = Vec::with_capacity(plan.configs.len());
    let mut heuristics = Vec::new();
    for (k, config) in plan.configs.iter().enumerate() {
        let mut row = ResultRow {
            config: config.label(),
            root_lp,
            root_extnorm,
            ..template.clone()
        };
        match solve(&auction, &plan.solver_config(config)) {
            Ok(out) => {
                row.status = if out.limit_hit {
                    RunStatus::LimitHit
                } else {
                    RunStatus::Optimal
                };
                row.optimum = auction.to_f64(out.allocation.value());
                row.init_value = auction.to_f64(out.initialization.best.value());
                row.nodes = out.stats.nodes_visited;
                row.lp_calls = out.stats.lp_calls;
                row.lp_calls_saved = out.stats.lp_calls_saved;
                row.prunes = out.stats.prunes;
                row.wall_time = out.stats.wall_time + out.stats.init_time;
                row.limit_hit = out.limit_hit;
                row.dominance_ok = out.limit_hit
                    || dominance_holds(row.init_value, row.optimum, root_lp, root_extnorm, DOMINANCE_SLACK);
                if k == 0 {
                    heuristics = out
                        .initialization
                        .values
                        .iter()
                        .map(|(c, v)| {
                            let value = auction.to_f64(*v);
                            HeuristicRow {
                                goods: cell.0,
                                bids: cell.1,
                                replication,
                                criterion: c.to_string(),
                                value,
                                percent_of_optimum: (!out.limit_hit && row.optimum > 0.0)
                                    .then(|| 100.0 * value / row.optimum),
                            }
                        })
                        .collect();
                }
            }
            Err(e) => row.error = e.to_string(),
        }
        rows.push(row);
    }
    InstanceRuns { rows, heuristics }
}

/// Root LP bound and root extended-norm bound of the whole auction.
pub fn root_bounds(auction: &Auction) -> Result<(f64, f64)> {
    let all: Vec<usize> = (0..auction.num_bids()).collect();
    let lp = solve_lp(&build_relaxation(auction, auction.stock(), &all))?;
    Ok((lp.objective_value, extended_norm_bound(auction, auction.stock(), &all)))
}

/// Runs every (cell, replication, config) of the plan. Runs execute in
/// parallel; the result is sorted and independent of scheduling.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanResult> {
    plan.validate()?;
    let jobs: Vec<((usize, usize), usize)> = plan
        .cells()
        .into_iter()
        .flat_map(|cell| (0..plan.replications).map(move |r| (cell, r)))
        .collect();
    let runs: Vec<InstanceRuns> = jobs
        .par_iter()
        .map(|&(cell, r)| run_instance(plan, cell, r))
        .collect();

    let mut rows = Vec::new();
    let mut heuristics = Vec::new();
    for run in runs {
        rows.extend(run.rows);
        heuristics.extend(run.heuristics);
    }
    let config_rank = |label: &str| plan.configs.iter().position(|c| c.label() == label);
    rows.sort_by(|a, b| {
        (a.goods, a.bids, a.replication, config_rank(&a.config))
            .cmp(&(b.goods, b.bids, b.replication, config_rank(&b.config)))
    });
    heuristics.sort_by(|a, b| {
        (a.goods, a.bids, a.replication).cmp(&(b.goods, b.bids, b.replication))
    });

    let mut aggregates = Vec::new();
    for cell in plan.cells() {
        for config in &plan.configs {
            let label = config.label();
            let cell_rows: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| (r.goods, r.bids) == cell && r.config == label)
                .collect();
            aggregates.push(aggregate(cell, &label, &cell_rows));
        }
    }
    Ok(PlanResult {
        plan_name: plan.name.clone(),
        rows,
        heuristics,
        aggregates,
    })
}

fn aggregate(cell: (usize, usize), config: &str, rows: &[&ResultRow]) -> CellAggregate {
    let ran: Vec<&&ResultRow> = rows.iter().filter(|r| r.status != RunStatus::Failed).collect();
    let done: Vec<&&ResultRow> = ran.iter().copied().filter(|r| r.status == RunStatus::Optimal).collect();
    let over = |rs: &[&&ResultRow], f: &dyn Fn(&ResultRow) -> f64| -> Summary {
        summarize(&rs.iter().map(|r| f(r)).collect::<Vec<_>>())
    };
    let single = done.iter().filter(|r| r.lp_calls == 1).count();
    CellAggregate {
        goods: cell.0,
        bids: cell.1,
        config: config.to_string(),
        runs: rows.len(),
        completed: done.len(),
        limit_hits: ran.len() - done.len(),
        failures: rows.len() - ran.len(),
        nodes: over(&ran, &|r| r.nodes as f64),
        lp_calls: over(&ran, &|r| r.lp_calls as f64),
        lp_calls_saved: over(&ran, &|r| r.lp_calls_saved as f64),
        prunes: over(&ran, &|r| r.prunes as f64),
        wall_time: over(&ran, &|r| r.wall_time),
        optimum: over(&done, &|r| r.optimum),
        init_value: over(&ran, &|r| r.init_value),
        root_lp: over(&ran, &|r| r.root_lp),
        root_extnorm: over(&ran, &|r| r.root_extnorm),
        relative_gap: over(&done, &|r| r.relative_gap()),
        single_lp_fraction: if rows.is_empty() {
            0.0
        } else {
            single as f64 / rows.len() as f64
        },
    }
}

const ROW_HEADER: [&str; 21] = [
    "schema", "family", "goods", "bids", "replication", "seed", "config", "status", "optimum",
    "init_value", "root_lp", "root_extnorm", "nodes", "lp_calls", "lp_calls_saved", "prunes",
    "wall_time", "limit_hit", "dominance", "relative_gap", "error",
];

/// Column of `wall_time` in the results CSV.
pub const WALL_TIME_COLUMN: usize = 16;

pub fn rows_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ROW_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            format!("v{SCHEMA_VERSION}"),
            r.family.clone(),
            r.goods.to_string(),
            r.bids.to_string(),
            r.replication.to_string(),
            r.seed.to_string(),
            r.config.clone(),
            r.status.as_str().to_string(),
            r.optimum.to_string(),
            r.init_value.to_string(),
            r.root_lp.to_string(),
            r.root_extnorm.to_string(),
            r.nodes.to_string(),
            r.lp_calls.to_string(),
            r.lp_calls_saved.to_string(),
            r.prunes.to_string(),
            r.wall_time.to_string(),
            r.limit_hit.to_string(),
            if r.dominance_ok { "ok" } else { "violated" }.to_string(),
            r.relative_gap().to_string(),
            r.error.clone(),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

pub fn heuristics_csv(rows: &[HeuristicRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["schema", "goods", "bids", "replication", "criterion", "value", "percent_of_optimum"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            format!("v{SCHEMA_VERSION}"),
            r.goods.to_string(),
            r.bids.to_string(),
            r.replication.to_string(),
            r.criterion.clone(),
            r.value.to_string(),
            r.percent_of_optimum.map(|p| p.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

pub fn aggregates_csv(aggregates: &[CellAggregate]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "schema".to_string(),
        "goods".into(),
        "bids".into(),
        "config".into(),
        "runs".into(),
        "completed".into(),
        "limit_hits".into(),
        "failures".into(),
    ];
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_stddev"));
    }
    header.push("single_lp_fraction".into());
    w.write_record(&header).map_err(csv_err)?;
    for a in aggregates {
        let mut record = vec![
            format!("v{SCHEMA_VERSION}"),
            a.goods.to_string(),
            a.bids.to_string(),
            a.config.clone(),
            a.runs.to_string(),
            a.completed.to_string(),
            a.limit_hits.to_string(),
            a.failures.to_string(),
        ];
        for m in METRICS {
            let s = metric(a, m);
            record.push(s.mean.to_string());
            record.push(s.stddev.to_string());
        }
        record.push(a.single_lp_fraction.to_string());
        w.write_record(&record).map_err(csv_err)?;
    }
    into_string(w)
}

const METRICS: [&str; 10] = [
    "nodes",
    "lp_calls",
    "lp_calls_saved",
    "prunes",
    "wall_time",
    "optimum",
    "init_value",
    "root_lp",
    "root_extnorm",
    "relative_gap",
];

fn metric<'a>(a: &'a CellAggregate, name: &str) -> &'a Summary {
    match name {
        "nodes" => &a.nodes,
        "lp_calls" => &a.lp_calls,
        "lp_calls_saved" => &a.lp_calls_saved,
        "prunes" => &a.prunes,
        "wall_time" => &a.wall_time,
        "optimum" => &a.optimum,
        "init_value" => &a.init_value,
        "root_lp" => &a.root_lp,
        "root_extnorm" => &a.root_extnorm,
        "relative_gap" => &a.relative_gap,
        _ => unreachable!("unknown metric {name}"),
    }
}

/// `x mean stddev` series per (config, metric). The x axis is the bid
/// count, one block per goods value; when the plan fixes bids and varies
/// goods, the x axis is the goods count instead.
pub fn plot_data(plan: &ExperimentPlan, result: &PlanResult) -> Vec<(String, String)> {
    let by_goods = plan.bids.len() == 1 && plan.goods.len() > 1;
    let blocks: Vec<Vec<(usize, (usize, usize))>> = if by_goods {
        vec![plan.goods.iter().map(|&g| (g, (g, plan.bids[0]))).collect()]
    } else {
        plan.goods
            .iter()
            .map(|&g| plan.bids.iter().map(|&b| (b, (g, b))).collect())
            .collect()
    };
    let mut files = Vec::new();
    for config in &plan.configs {
        let label = config.label();
        let file_label = label.replace(['/', ':'], "_");
        for m in METRICS {
            let mut text = String::new();
            let axis = if by_goods { "goods" } else { "bids" };
            let _ = writeln!(text, "# {m} for {label}; x = {axis}");
            for block in &blocks {
                if !by_goods {
                    let _ = writeln!(text, "# goods = {}", block[0].1 .0);
                }
                for &(x, cell) in block {
                    if let Some(a) = result.aggregate(cell.0, cell.1, &label) {
                        let s = metric(a, m);
                        let _ = writeln!(text, "{x} {} {}", s.mean, s.stddev);
                    }
                }
            }
            files.push((format!("plot_{m}_{file_label}.dat"), text));
        }
    }
    files
}

/// Writes `results.csv`, `heuristics.csv`, `aggregates.csv` and the plot
/// data files into `dir`.
pub fn write_outputs(plan: &ExperimentPlan, result: &PlanResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), rows_csv(&result.rows)?)?;
    std::fs::write(dir.join("heuristics.csv"), heuristics_csv(&result.heuristics)?)?;
    std::fs::write(dir.join("aggregates.csv"), aggregates_csv(&result.aggregates)?)?;
    for (name, text) in plot_data(plan, result) {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}

/// The results CSV with the timing column blanked, for reproducibility
/// comparisons.
pub fn without_timing(results_csv: &str) -> Result<String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(results_csv.as_bytes());
    let mut w = csv::Writer::from_writer(Vec::new());
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let fields: Vec<&str> = record
            .iter()
            .enumerate()
            .map(|(i, f)| if i == WALL_TIME_COLUMN { "" } else { f })
            .collect();
        w.write_record(&fields).map_err(csv_err)?;
    }
    into_string(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = "\
name = tiny
family = decay
param.alpha = 0.4
goods = 6
bids = 8, 10
replications = 2
master_seed = 7
configs = sqrt/lp, price/extnorm
portfolio = no-adaptive
";

    #[test]
    fn parses_plan_file() {
        let plan = ExperimentPlan::parse(PLAN).unwrap();
        assert_eq!(plan.name, "tiny");
        assert_eq!(plan.generator.family, Family::SandholmDecay { alpha: 0.4 });
        assert_eq!(plan.bids, vec![8, 10]);
        assert_eq!(plan.configs.len(), 2);
        assert_eq!(plan.configs[1].bound, BoundKind::ExtendedNorm);
        assert_eq!(plan.portfolio.len(), 15);
    }

    #[test]
    fn rejects_bad_plans() {
        assert!(ExperimentPlan::parse("goods = 5\nbids = 5\nreplications = 0\n").is_err());
        assert!(ExperimentPlan::parse("goods = 5\n").is_err());
        assert!(ExperimentPlan::parse("goods = 5\nbids = 5\nwhatever = 1\n").is_err());
        assert!(ExperimentPlan::parse("goods = 5\nbids = 5\nconfigs = nope/lp\n").is_err());
        assert!(ExperimentPlan::parse("goods = 5\nbids = 5\nconfigs = lp-coefficient/extnorm\n").is_err());
    }

    #[test]
    fn one_cell_one_replication_one_row() {
        let mut plan = ExperimentPlan::new(Family::SandholmRandom, vec![5], vec![8]);
        plan.replications = 1;
        let result = run_plan(&plan).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.aggregates.len(), 1);
        assert_eq!(result.rows[0].status, RunStatus::Optimal);
        assert!(result.rows[0].dominance_ok);
    }

    #[test]
    fn rows_are_sorted_and_complete() {
        let plan = ExperimentPlan::parse(PLAN).unwrap();
        let result = run_plan(&plan).unwrap();
        assert_eq!(result.rows.len(), 2 * 2 * 2);
        assert!(result.dominance_violations().is_empty());
        // both configs agree on the optimum
        for pair in result.rows.chunks(2) {
            assert_eq!(pair[0].optimum, pair[1].optimum);
            assert_eq!(pair[0].seed, pair[1].seed);
        }
        let csv = rows_csv(&result.rows).unwrap();
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("schema,family,goods"));
    }

    #[test]
    fn heuristic_percentages_are_in_range() {
        let plan = ExperimentPlan::parse(PLAN).unwrap();
        let result = run_plan(&plan).unwrap();
        assert_eq!(result.heuristics.len(), 2 * 2 * plan.portfolio.len());
        for row in &result.rows {
            if row.config != plan.configs[0].label() {
                continue;
            }
            let pct: Vec<f64> = result
                .heuristics
                .iter()
                .filter(|h| (h.goods, h.bids, h.replication) == (row.goods, row.bids, row.replication))
                .map(|h| h.percent_of_optimum.unwrap())
                .collect();
            assert!(pct.iter().all(|&p| p > 0.0 && p <= 100.0 + 1e-9));
            let best = pct.iter().cloned().fold(0.0, f64::max);
            assert!((best - 100.0 * row.init_value / row.optimum).abs() < 1e-9);
        }
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.stddev, 1.0);
        assert_eq!(summarize(&[4.0]).stddev, 0.0);
    }

    #[test]
    fn dominance_check() {
        assert!(dominance_holds(1.0, 1.0, 1.5, 2.0, 1e-6));
        assert!(dominance_holds(1.0, 1.0, 0.9999999999, 1.0, 1e-6));
        assert!(!dominance_holds(1.0, 1.2, 1.1, 2.0, 1e-6));
    }

    #[test]
    fn timing_column_is_blanked() {
        let line = (0..21).map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        let stripped = without_timing(&line).unwrap();
        assert!(!stripped.contains(",16,"));
        assert!(stripped.contains(",15,,17,"));
    }
}
