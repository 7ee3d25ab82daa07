//! End-to-end checks of the command-line interface: exit codes, output
//! files, and environment plumbing.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_performative"))
}

const QUICK_PLAN: &str = "\
[plan]
methods = plugin, sgd
budgets = 50, 100
reps = 2
eval_m = 500
oracle_budget = 20000

[scenario.coin_quick]
kind = coin
mu = 0.3
eta = 0.2
";

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("plan.conf");
    std::fs::write(&path, QUICK_PLAN).expect("write config");
    path
}

#[test]
fn run_writes_results_csv_and_oracle_cache() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let output = bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .args(["--jobs", "2"])
        .arg("--out")
        .arg(&out)
        .output()
        .expect("spawn");
    assert_eq!(
        output.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let text = std::fs::read_to_string(out.join("results.csv")).expect("results.csv");
    assert!(text.starts_with("experiment,scenario_hash,method,n,rep,seed,excess_risk,"));
    assert_eq!(
        text.lines().count(),
        1 + 2 * 2 * 2,
        "header plus methods x budgets x reps"
    );
    assert!(out.join("oracle_cache.csv").exists());
}

#[test]
fn plot_renders_svg_files_from_run_output() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let status = bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .expect("spawn");
    assert!(status.success());
    let plots = dir.path().join("plots");
    let output = bin()
        .arg("plot")
        .arg("--csv")
        .arg(out.join("results.csv"))
        .arg("--out")
        .arg(&plots)
        .output()
        .expect("spawn");
    assert_eq!(output.status.code(), Some(0));
    let svgs: Vec<_> = std::fs::read_dir(&plots)
        .expect("plot dir")
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert!(!svgs.is_empty(), "at least one rendered plot");
}

#[test]
fn oracle_resolves_and_caches() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let output = bin()
        .arg("oracle")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .expect("spawn");
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("coin_quick"), "stdout: {stdout}");
    assert!(out.join("oracle_cache.csv").exists());
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "[plan]\nbudgets = 100, 50\n\n[scenario.c]\nkind = coin\nmu = 0.3\n")
        .expect("write config");
    let output = bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .output()
        .expect("spawn");
    assert_eq!(output.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());
}

#[test]
fn missing_config_exits_with_one() {
    let output = bin()
        .arg("run")
        .args(["--config", "/nonexistent/plan.conf"])
        .output()
        .expect("spawn");
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn missing_csv_exits_with_two() {
    let dir = tempfile::tempdir().expect("tempdir");
    let output = bin()
        .arg("plot")
        .args(["--csv", "/nonexistent/results.csv"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .expect("spawn");
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn jobs_environment_variable_is_honored() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let status = bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .env("PERFORMATIVE_JOBS", "2")
        .status()
        .expect("spawn");
    assert!(status.success());
    assert!(out.join("results.csv").exists());
}

#[test]
fn selftest_passes_and_reports_every_check() {
    let output = bin().arg("selftest").output().expect("spawn");
    assert_eq!(
        output.status.code(),
        Some(0),
        "stdout: {}",
        String::from_utf8_lossy(&output.stdout)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 8);
    assert!(stdout.contains("8/8 checks passed"));
}
