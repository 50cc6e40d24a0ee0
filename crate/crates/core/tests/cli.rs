use std::path::Path;
use std::process::{Command, Output};

fn wdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wdp"))
        .args(args)
        .output()
        .expect("run wdp")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .map(str::trim)
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
}

fn generate(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let mut all = vec!["generate"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", &path]);
    let out = wdp(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--family", "decay", "--goods", "8", "--bids", "30", "--seed", "4", "--alpha", "0.6"];
    let a = generate(dir.path(), "a.txt", &args);
    let b = generate(dir.path(), "b.txt", &args);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.contains("# alpha: 0.6"));
}

#[test]
fn oracle_and_solve_agree_on_a_small_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(
        dir.path(),
        "small.txt",
        &["--family", "camus", "--goods", "4", "--bids", "12", "--seed", "21", "--param", "units_high=3"],
    );
    let solved = wdp(&["solve", &path]);
    assert_eq!(solved.status.code(), Some(0));
    let oracle = wdp(&["oracle", &path]);
    assert_eq!(oracle.status.code(), Some(0));
    assert_eq!(field(&stdout(&solved), "value:"), field(&stdout(&oracle), "value:"));
}

#[test]
fn oracle_refuses_large_instances() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "big.txt", &["--family", "random", "--goods", "5", "--bids", "30"]);
    let out = wdp(&["oracle", &path]);
    assert_eq!(out.status.code(), Some(1));
    let out = wdp(&["oracle", &path, "--cap", "10"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn node_limit_exits_with_two_and_writes_stats() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "c.txt", &["--family", "camus", "--goods", "10", "--bids", "300", "--seed", "2"]);
    let stats = dir.path().join("stats.txt");
    let out = wdp(&[
        "solve",
        &path,
        "--branching",
        "inverse-price",
        "--portfolio",
        "given-order",
        "--node-limit",
        "5",
        "--stats-out",
        stats.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(field(&stdout(&out), "status:"), "limit");
    let text = std::fs::read_to_string(stats).unwrap();
    assert_eq!(field(&text, "nodes_visited ="), "5");
    assert!(text.contains("best_value_trace = 0:"));
}

#[test]
fn lp_bound_visits_no_more_nodes_than_norm_bound() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "c.txt", &["--family", "camus", "--goods", "10", "--bids", "500", "--seed", "8"]);
    let nodes = |bound: &str| -> u64 {
        let out = wdp(&["solve", &path, "--bound", bound]);
        assert_eq!(out.status.code(), Some(0));
        field(&stdout(&out), "nodes:").parse().unwrap()
    };
    assert!(nodes("lp") <= nodes("extnorm"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(wdp(&["solve", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(wdp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        wdp(&["generate", "--family", "nope", "--goods", "3", "--bids", "3"]).status.code(),
        Some(1)
    );
    assert_eq!(wdp(&["solve", "/no/such/file"]).status.code(), Some(1));
    assert_eq!(wdp(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_instance_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "goods 2\nunits 1 1\nbids 1\n3 1\n").unwrap();
    let out = wdp(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn bench_writes_results_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    std::fs::write(
        &plan,
        "name = smoke\nfamily = random\ngoods = 6\nbids = 10, 20\nreplications = 2\nconfigs = sqrt/lp, sqrt/extnorm\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = wdp(&["bench", "--plan", plan.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 2);
    assert!(out_dir.join("aggregates.csv").exists());
    assert!(out_dir.join("heuristics.csv").exists());
    let plot = std::fs::read_to_string(out_dir.join("plot_nodes_sqrt_lp.dat")).unwrap();
    assert_eq!(plot.lines().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn shipped_plans_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../plans");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        wdp::bench::ExperimentPlan::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 5);
}
