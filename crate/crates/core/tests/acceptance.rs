//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::lp_oracles::{minilp_optimum, vertex_enumeration};
use wdp::bench::{self, run_plan, ConfigSpec, ExperimentPlan, PlanResult, ResultRow, RunStatus};
use wdp::generators::{generate, Family, GeneratorSpec};
use wdp::heuristics::Criterion;
use wdp::lp::{build_relaxation, solve_lp, LpStatus};
use wdp::rng::{derive_seed, SeededRng};
use wdp::solver::{solve, BoundKind, SolverConfig};
use wdp::{Auction, Bid, Money};

const MASTER_SEED: u64 = 20_011_023;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Check; 8] = [
        ("exactness against exhaustive search", exactness),
        ("bound dominance and initialization gap", bound_dominance),
        ("LP-call saving", lp_call_saving),
        ("LP bound prunes more than the norm bound", lp_versus_norm_bound),
        ("branching criterion ordering", branching_ordering),
        ("root integrality on path auctions", root_integrality),
        ("LP solver against independent oracles", lp_solver),
        ("bench determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.1}s] {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1}s] {detail}", n + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn cell_rows<'a>(result: &'a PlanResult, bids: usize, config: &str) -> Vec<&'a ResultRow> {
    result
        .rows
        .iter()
        .filter(|r| r.bids == bids && r.config == config)
        .collect()
}

fn config(branching: Criterion, bound: BoundKind) -> ConfigSpec {
    ConfigSpec { branching, bound }
}

fn plan(family: Family, goods: usize, bids: Vec<usize>, configs: Vec<ConfigSpec>) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(family, vec![goods], bids);
    plan.replications = 15;
    plan.master_seed = MASTER_SEED;
    plan.configs = configs;
    plan
}

fn exactness() -> Outcome {
    let branchings = [
        Criterion::SquareRoot,
        Criterion::Price,
        Criterion::LpCoefficient,
        Criterion::Random(0),
        Criterion::GivenOrder,
    ];
    let mut families: BTreeMap<&str, usize> = BTreeMap::new();
    let mut mismatches = Vec::new();
    let mut count = 0;
    let mut seed = derive_seed(MASTER_SEED, &[1]);
    while count < 200 {
        seed = seed.wrapping_add(1);
        let Some(spec) = common::small_spec(seed) else { continue };
        let Ok(auction) = generate(&spec) else { continue };
        assert!(auction.num_bids() <= 12 && auction.num_goods() <= 5);
        assert!(auction.stock().iter().all(|&k| k <= 3));
        count += 1;
        *families.entry(spec.family.name()).or_default() += 1;
        let best = auction.brute_force_optimum().map_err(|e| e.to_string())?.value();
        for &b in &branchings {
            let out = solve(&auction, &SolverConfig::with_branching(b)).map_err(|e| e.to_string())?;
            if out.allocation.value() != best || !out.is_optimal() {
                mismatches.push(format!("seed {seed} {b}: {} vs {}", out.allocation.value().ticks(), best.ticks()));
            }
        }
    }
    let all_families = families.len() == Family::all_defaults().len();
    check(
        mismatches.is_empty() && all_families,
        format!(
            "{count} instances x {} branchings, families {families:?}, mismatches {}: {:?}",
            branchings.len(),
            mismatches.len(),
            mismatches.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn camus_suite() -> Result<PlanResult, String> {
    let p = plan(
        Family::CamusMultiUnit,
        10,
        vec![250, 500, 750],
        vec![config(Criterion::SquareRoot, BoundKind::Lp)],
    );
    run_plan(&p).map_err(|e| e.to_string())
}

fn bound_dominance() -> Outcome {
    let result = camus_suite()?;
    let label = config(Criterion::SquareRoot, BoundKind::Lp).label();
    let incomplete = result.rows.iter().filter(|r| r.status != RunStatus::Optimal).count();
    let violations = result.dominance_violations().len();
    let mut gaps = Vec::new();
    for bids in [250, 500, 750] {
        gaps.push((bids, mean(cell_rows(&result, bids, &label).iter().map(|r| r.relative_gap()))));
    }
    let overall = mean(result.rows.iter().map(|r| r.relative_gap()));
    let gaps_ok = gaps.iter().all(|&(_, g)| g < 0.10);
    check(
        incomplete == 0 && violations == 0 && gaps_ok,
        format!(
            "{} runs, {violations} chain violations, {incomplete} incomplete, mean gap per bid count {:?}, overall {:.4}",
            result.rows.len(),
            gaps.iter().map(|(b, g)| format!("{b}: {g:.4}")).collect::<Vec<_>>(),
            overall
        ),
    )
}

fn lp_call_saving() -> Outcome {
    let result = camus_suite()?;
    let branching: Vec<&ResultRow> = result.rows.iter().filter(|r| r.nodes > 1).collect();
    let offenders: Vec<String> = branching
        .iter()
        .filter(|r| r.lp_calls >= r.nodes)
        .map(|r| format!("bids {} rep {}: {} nodes, {} LP calls", r.bids, r.replication, r.nodes, r.lp_calls))
        .collect();
    let nodes: u64 = result.rows.iter().map(|r| r.nodes).sum();
    let calls: u64 = result.rows.iter().map(|r| r.lp_calls).sum();

    // differential test: the reuse rule must never change the optimum
    let mut value_changes = 0;
    let mut call_changes = 0;
    let (mut with_total, mut without_total) = (0, 0);
    for i in 0..50u64 {
        let bids = [250, 500, 750][i as usize % 3];
        let spec = GeneratorSpec::new(Family::CamusMultiUnit, 10, bids, derive_seed(MASTER_SEED, &[3, i]));
        let auction = generate(&spec).map_err(|e| e.to_string())?;
        let with = solve(&auction, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let off = SolverConfig {
            reuse_zero_coefficients: false,
            ..SolverConfig::default()
        };
        let without = solve(&auction, &off).map_err(|e| e.to_string())?;
        value_changes += usize::from(with.allocation.value() != without.allocation.value());
        call_changes += usize::from(with.stats.lp_calls != without.stats.lp_calls);
        with_total += with.stats.lp_calls;
        without_total += without.stats.lp_calls;
    }
    check(
        offenders.is_empty() && value_changes == 0 && call_changes > 0,
        format!(
            "suite: {} of {} branching runs have lp_calls >= nodes {:?}, totals {calls} LP calls over {nodes} nodes; \
             reuse on/off over 50 instances: {value_changes} value changes, {call_changes} runs with different LP calls ({with_total} vs {without_total})",
            offenders.len(),
            branching.len(),
            offenders
        ),
    )
}

fn lp_versus_norm_bound() -> Outcome {
    let lp = config(Criterion::SquareRoot, BoundKind::Lp);
    let norm = config(Criterion::SquareRoot, BoundKind::ExtendedNorm);
    let mut p = plan(Family::CamusMultiUnit, 10, vec![100, 200, 400], vec![lp, norm]);
    p.node_limit = 5_000_000;
    let result = run_plan(&p).map_err(|e| e.to_string())?;
    let mut ok = result.rows.iter().all(|r| r.status == RunStatus::Optimal);
    let mut ratios = Vec::new();
    let mut cells = Vec::new();
    for bids in [100, 200, 400] {
        let lp_nodes = mean(cell_rows(&result, bids, &lp.label()).iter().map(|r| r.nodes as f64));
        let norm_nodes = mean(cell_rows(&result, bids, &norm.label()).iter().map(|r| r.nodes as f64));
        ok &= lp_nodes <= norm_nodes;
        ratios.push(norm_nodes / lp_nodes);
        cells.push(format!("{bids}: lp {lp_nodes:.1} norm {norm_nodes:.1} ratio {:.2}", norm_nodes / lp_nodes));
    }
    ok &= ratios.windows(2).all(|w| w[0] < w[1]);
    check(ok, format!("mean nodes {cells:?}"))
}

fn branching_ordering() -> Outcome {
    let good = [Criterion::SquareRoot, Criterion::LpCoefficient];
    let bad = [Criterion::Random(0), Criterion::InversePrice];
    let configs: Vec<ConfigSpec> = good.iter().chain(&bad).map(|&c| config(c, BoundKind::Lp)).collect();
    let mut p = plan(Family::CamusMultiUnit, 10, vec![100, 250, 500], configs);
    // a cap only lowers the means of the weak criteria, so it cannot
    // manufacture the ordering; the strong criteria must finish uncapped
    p.node_limit = 20_000;
    let result = run_plan(&p).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut cells = Vec::new();
    for bids in [100, 250, 500] {
        let mut means = Vec::new();
        for c in good.iter().chain(&bad) {
            let rows = cell_rows(&result, bids, &config(*c, BoundKind::Lp).label());
            let capped = rows.iter().filter(|r| r.limit_hit).count();
            if good.contains(c) && capped > 0 {
                ok = false;
            }
            means.push((*c, mean(rows.iter().map(|r| r.nodes as f64)), capped));
        }
        for g in &means[..2] {
            for b in &means[2..] {
                ok &= g.1 < b.1;
            }
        }
        cells.push(format!(
            "{bids}: {}",
            means
                .iter()
                .map(|(c, m, capped)| format!("{c} {m:.1} ({capped} capped)"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    check(ok, format!("mean nodes {cells:?}"))
}

fn root_integrality() -> Outcome {
    let mut p = plan(
        Family::CatsMultipaths,
        50,
        vec![2000, 5000],
        vec![config(Criterion::SquareRoot, BoundKind::Lp)],
    );
    // runs stopped by the cap count as needing more than one LP call
    p.node_limit = 2_000;
    let result = run_plan(&p).map_err(|e| e.to_string())?;
    let label = p.configs[0].label();
    let mut ok = true;
    let mut cells = Vec::new();
    for bids in [2000, 5000] {
        let rows = cell_rows(&result, bids, &label);
        let single = rows
            .iter()
            .filter(|r| r.lp_calls == 1 && r.status == RunStatus::Optimal)
            .count();
        let fraction = single as f64 / rows.len() as f64;
        ok &= fraction >= 0.60;
        cells.push(format!("{bids} bids: {single}/{} runs with one LP call ({:.0}%)", rows.len(), 100.0 * fraction));
    }
    check(ok, cells.join(", "))
}

/// Random node state: a random conflict-free partial allocation, the stock
/// it leaves, and a random subset of the bids that still fit.
fn random_node(auction: &Auction, rng: &mut SeededRng, max_active: usize) -> (Vec<u32>, Vec<usize>) {
    let mut stock = auction.stock().to_vec();
    let mut order: Vec<usize> = (0..auction.num_bids()).collect();
    rng.shuffle(&mut order);
    let mut granted = Vec::new();
    for &i in &order {
        if rng.chance(0.3) && auction.bid(i).fits(&stock) {
            for (s, q) in stock.iter_mut().zip(&auction.bid(i).quantities) {
                *s -= q;
            }
            granted.push(i);
        }
    }
    let mut active: Vec<usize> = (0..auction.num_bids())
        .filter(|i| !granted.contains(i) && auction.bid(*i).fits(&stock) && rng.chance(0.8))
        .collect();
    active.truncate(max_active);
    (stock, active)
}

fn lp_solver() -> Outcome {
    let third = Money(10_000);
    let triangle = Auction::new(
        vec![1, 1, 1],
        vec![
            Bid::new(vec![1, 1, 0], third),
            Bid::new(vec![0, 1, 1], third),
            Bid::new(vec![1, 0, 1], third),
        ],
    )
    .map_err(|e| e.to_string())?;
    let t = solve_lp(&build_relaxation(&triangle, triangle.stock(), &[0, 1, 2])).map_err(|e| e.to_string())?;
    let triangle_ok =
        (t.objective_value - 1.5).abs() <= 1e-7 && t.coefficients.iter().all(|c| (c - 0.5).abs() <= 1e-6);

    let mut rng = SeededRng::new(derive_seed(MASTER_SEED, &[7]));
    let families = Family::all_defaults();
    let (mut worst, mut by_vertices, mut by_reference, mut failures) = (0.0f64, 0, 0, Vec::new());
    for k in 0..500u64 {
        let tiny = k % 2 == 0;
        let family = families[rng.below(families.len() as u64) as usize];
        let goods = if tiny { rng.between(1, 4) } else { rng.between(3, 10) } as usize;
        let bids = if tiny { rng.between(3, 10) } else { rng.between(10, 60) } as usize;
        let mut spec = GeneratorSpec::new(family, goods, bids, rng.next_u64());
        if let Family::SandholmUniform { .. } = family {
            spec.family = Family::SandholmUniform { set_size: goods.min(3) };
        }
        let Ok(auction) = generate(&spec) else { continue };
        let (stock, active) = random_node(&auction, &mut rng, if tiny { 7 } else { usize::MAX });
        let problem = build_relaxation(&auction, &stock, &active);
        let solution = solve_lp(&problem).map_err(|e| e.to_string())?;
        let reference = if tiny {
            by_vertices += 1;
            vertex_enumeration(&problem)
        } else {
            by_reference += 1;
            minilp_optimum(&problem)
        };
        let err = (solution.objective_value - reference).abs();
        worst = worst.max(err);
        if err > 1e-6 || solution.status != LpStatus::Optimal {
            failures.push(format!("{} {goods}x{bids}: {} vs {reference}", family.name(), solution.objective_value));
        }
    }
    let checked = by_vertices + by_reference;
    check(
        triangle_ok && failures.is_empty() && checked == 500,
        format!(
            "triangle {:.9} with coefficients {:?}; {checked} node LPs ({by_vertices} by vertex enumeration, \
             {by_reference} by reference solver), worst error {worst:.2e}, failures {:?}",
            t.objective_value,
            t.coefficients,
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn strip_timing_columns(text: &str) -> String {
    let mut lines = text.lines();
    let Some(header) = lines.next() else { return String::new() };
    let keep: Vec<bool> = header.split(',').map(|h| !h.starts_with("wall_time")).collect();
    std::iter::once(header)
        .chain(lines)
        .map(|line| {
            line.split(',')
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(f, _)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn comparable_outputs(dir: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("plot_wall_time") {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let text = match name.as_str() {
            "results.csv" => bench::without_timing(&text).map_err(|e| e.to_string())?,
            "aggregates.csv" => strip_timing_columns(&text),
            _ => text,
        };
        files.insert(name, text);
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let text = "\
name = determinism
family = camus
goods = 6, 8
bids = 30, 60
replications = 3
master_seed = 99
configs = sqrt/lp, random:3/lp, price/extnorm, lp-coefficient/lp
";
    let plan = ExperimentPlan::parse(text).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let result = pool.install(|| run_plan(&plan)).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        bench::write_outputs(&plan, &result, dir.path()).map_err(|e| e.to_string())?;
        outputs.push(comparable_outputs(dir.path())?);
    }
    let differing: Vec<&String> = outputs[0]
        .iter()
        .filter(|(name, text)| outputs[1].get(*name) != Some(text))
        .map(|(name, _)| name)
        .collect();
    let rows = outputs[0]["results.csv"].lines().count() - 1;
    check(
        differing.is_empty() && outputs[0].len() == outputs[1].len() && rows == 2 * 2 * 3 * 4,
        format!(
            "{} output files, {rows} result rows, identical apart from wall time across 1 and 3 worker threads; differing {differing:?}",
            outputs[0].len()
        ),
    )
}
