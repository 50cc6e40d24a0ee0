use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use wdp::bench::{run_plan, write_outputs, ExperimentPlan};
use wdp::generators::{generate_to, Family, GeneratorSpec};
use wdp::heuristics::{default_portfolio, Criterion};
use wdp::instance::read_instance_file;
use wdp::model::DEFAULT_ORACLE_CAP;
use wdp::solver::{solve, BoundKind, SolveOutcome, SolverConfig};
use wdp::{Auction, Error, PriceScale, Result};

/// Exact winner determination for multi-unit combinatorial auctions.
#[derive(Parser, Debug)]
#[command(name = "wdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random auction instance.
    Generate {
        /// camus, random, weighted-random, uniform, decay or multipaths
        #[arg(long)]
        family: String,
        #[arg(long)]
        goods: usize,
        #[arg(long)]
        bids: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Bundle size of the uniform family
        #[arg(long)]
        set_size: Option<usize>,
        /// Continuation probability of the decay family
        #[arg(long)]
        alpha: Option<f64>,
        /// Any other generator parameter, as key=value
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
    /// Solve an instance to optimality (or until a limit).
    Solve {
        path: PathBuf,
        /// Branching criterion, e.g. sqrt, price, lp-coefficient, random:7
        #[arg(long, default_value = "sqrt")]
        branching: String,
        /// Upper bound: lp or extnorm
        #[arg(long, default_value = "lp")]
        bound: String,
        /// Stop after this many nodes (0 = no limit)
        #[arg(long, default_value_t = 0)]
        node_limit: u64,
        /// Stop after this many seconds (0 = no limit)
        #[arg(long, default_value_t = 0.0)]
        time_limit: f64,
        /// Initialization portfolio: default, no-adaptive or a comma list
        #[arg(long, default_value = "default")]
        portfolio: String,
        /// Always re-solve the LP instead of reusing the parent's bound
        #[arg(long)]
        no_reuse: bool,
        /// Decimal places of the price grid
        #[arg(long, default_value_t = wdp::model::DEFAULT_DECIMALS)]
        decimals: u32,
        /// Write search statistics to this file
        #[arg(long)]
        stats_out: Option<PathBuf>,
    },
    /// Run an experiment plan and write CSV and plot data.
    Bench {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a small instance by exhaustive enumeration.
    Oracle {
        path: PathBuf,
        /// Largest bid count accepted
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        cap: usize,
        #[arg(long, default_value_t = wdp::model::DEFAULT_DECIMALS)]
        decimals: u32,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Generate {
            family,
            goods,
            bids,
            seed,
            out,
            set_size,
            alpha,
            params,
        } => {
            let mut spec = GeneratorSpec::new(Family::parse(&family)?, goods, bids, seed);
            if let Some(k) = set_size {
                spec.set("set_size", &k.to_string())?;
            }
            if let Some(a) = alpha {
                spec.set("alpha", &a.to_string())?;
            }
            for p in &params {
                let (k, v) = p
                    .split_once('=')
                    .ok_or_else(|| Error::Spec(format!("expected key=value, got `{p}`")))?;
                spec.set(k.trim(), v.trim())?;
            }
            match out {
                Some(path) => {
                    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
                    generate_to(&spec, &mut file)?;
                    file.flush()?;
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    generate_to(&spec, &mut stdout)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve {
            path,
            branching,
            bound,
            node_limit,
            time_limit,
            portfolio,
            no_reuse,
            decimals,
            stats_out,
        } => {
            let auction = read_instance_file(&path, PriceScale::new(decimals)?)?;
            let config = SolverConfig {
                branching: branching.parse()?,
                bound: BoundKind::from_str(&bound)?,
                portfolio: parse_portfolio(&portfolio)?,
                node_limit,
                time_limit,
                reuse_zero_coefficients: !no_reuse,
                ..SolverConfig::default()
            };
            let outcome = solve(&auction, &config)?;
            print!("{}", solution_report(&auction, &outcome));
            if let Some(path) = stats_out {
                std::fs::write(path, stats_report(&auction, &config, &outcome))?;
            }
            Ok(if outcome.limit_hit {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Bench { plan, out } => {
            let plan = ExperimentPlan::from_file(&plan)?;
            let result = run_plan(&plan)?;
            write_outputs(&plan, &result, &out)?;
            let failures = result.rows.iter().filter(|r| !r.error.is_empty()).count();
            let violations = result.dominance_violations().len();
            println!(
                "{} runs written to {} ({failures} failed, {violations} bound-order violations)",
                result.rows.len(),
                out.display()
            );
            if violations > 0 {
                return Err(Error::Instance(format!(
                    "{violations} runs violate init <= optimum <= LP bound <= norm bound"
                )));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            path,
            cap,
            decimals,
        } => {
            let auction = read_instance_file(&path, PriceScale::new(decimals)?)?;
            let best = auction.brute_force_optimum_capped(cap)?;
            println!("value: {}", auction.scale().format(best.value()));
            println!("granted: {}", join(best.granted()));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_portfolio(text: &str) -> Result<Vec<Criterion>> {
    match text {
        "default" => Ok(default_portfolio(true)),
        "no-adaptive" => Ok(default_portfolio(false)),
        list => list.split(',').map(|c| c.trim().parse()).collect(),
    }
}

fn join(items: &[usize]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn solution_report(auction: &Auction, outcome: &SolveOutcome) -> String {
    let mut s = String::new();
    let status = if outcome.limit_hit { "limit" } else { "optimal" };
    let _ = writeln!(s, "status: {status}");
    let _ = writeln!(s, "value: {}", auction.scale().format(outcome.allocation.value()));
    let _ = writeln!(s, "granted: {}", join(outcome.allocation.granted()));
    let _ = writeln!(s, "nodes: {}", outcome.stats.nodes_visited);
    let _ = writeln!(s, "lp_calls: {}", outcome.stats.lp_calls);
    s
}

fn stats_report(auction: &Auction, config: &SolverConfig, outcome: &SolveOutcome) -> String {
    let st = &outcome.stats;
    let scale = auction.scale();
    let mut s = String::new();
    let _ = writeln!(s, "status = {}", if outcome.limit_hit { "limit" } else { "optimal" });
    let _ = writeln!(s, "branching = {}", config.branching);
    let _ = writeln!(s, "bound = {}", config.bound);
    let _ = writeln!(s, "value = {}", scale.format(outcome.allocation.value()));
    let _ = writeln!(s, "init_value = {}", scale.format(outcome.initialization.best.value()));
    if let Some(b) = outcome.root_bound {
        let _ = writeln!(s, "root_bound = {b}");
    }
    let _ = writeln!(s, "nodes_visited = {}", st.nodes_visited);
    let _ = writeln!(s, "bound_steps = {}", st.bound_steps);
    let _ = writeln!(s, "lp_calls = {}", st.lp_calls);
    let _ = writeln!(s, "lp_calls_saved = {}", st.lp_calls_saved);
    let _ = writeln!(s, "norm_bound_calls = {}", st.norm_bound_calls);
    let _ = writeln!(s, "prunes = {}", st.prunes);
    let _ = writeln!(s, "init_time = {}", st.init_time);
    let _ = writeln!(s, "wall_time = {}", st.wall_time);
    let trace: Vec<String> = st
        .best_value_trace
        .iter()
        .map(|(node, v)| format!("{node}:{}", scale.format(*v)))
        .collect();
    let _ = writeln!(s, "best_value_trace = {}", trace.join(" "));
    for (criterion, value) in &outcome.initialization.values {
        let _ = writeln!(s, "heuristic.{criterion} = {}", scale.format(*value));
    }
    s
}
