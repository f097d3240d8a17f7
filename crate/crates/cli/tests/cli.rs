use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gridtrade::engine::trace::TRACE_HEADER;
use gridtrade::experiments::output::STATS_HEADER;
use gridtrade::experiments::reference_spec;

fn gridtrade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridtrade"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridtrade(&["run", "--seed", "3", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("fixed point: true"));
    assert!(stdout.contains("equilibrium check: passed"));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
    assert_eq!(lines.count() % 5, 0);
}

#[test]
fn sweep_follows_the_scenario_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = reference_spec(1, 2, vec![5, 10]);
    spec.p_values = vec![150.0, 185.0, 220.0];
    let scenario = dir.path().join("s.toml");
    fs::write(&scenario, spec.to_toml().unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = gridtrade(&[
        "sweep",
        "--scenario",
        path(&scenario),
        "--replicates",
        "3",
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("stats.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], STATS_HEADER.join(","));
    assert_eq!(lines.len(), 1 + 6);
    let replicates = STATS_HEADER.iter().position(|&h| h == "replicates").unwrap();
    assert!(lines[1..].iter().all(|l| l.split(',').nth(replicates) == Some("3")));
}

#[test]
fn sweep_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.toml");
    let text = reference_spec(1, 1, vec![5]).to_toml().unwrap() + "\nbogus = 1\n";
    fs::write(&scenario, text).unwrap();
    let out = gridtrade(&["sweep", "--scenario", path(&scenario), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    assert!(!dir.path().join("stats.csv").exists());
}

#[test]
fn missing_scenario_file_is_an_error() {
    let out = gridtrade(&["sweep", "--scenario", "/nonexistent/s.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn figures_writes_every_panel() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridtrade(&["figures", "--replicates", "1", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "fig1a_utility.csv",
            "fig1b_energy.csv",
            "fig1c_price.csv",
            "fig2a_utility_vs_deficiency.csv",
            "fig2b_cost_vs_consumers.csv",
            "fig3_cost_vs_price_cap.csv",
            "fig4a_utility_vs_consumers.csv",
            "fig4b_cost_vs_budget.csv",
        ]
    );
}

#[test]
fn verify_reports_each_suite() {
    let out = gridtrade(&["verify", "--replicates", "20"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let verdicts = stdout
        .lines()
        .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
        .count();
    assert_eq!(verdicts, 7, "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("PASS oracle")));
    // exit status follows the verdicts
    assert_eq!(out.status.success(), !stdout.contains("FAIL"));
}

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let spec = gridtrade::experiments::ScenarioSpec::from_toml(&text).unwrap();
        spec.validate().unwrap();
        count += 1;
    }
    assert!(count >= 2);
}
