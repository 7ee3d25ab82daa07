//! Command-line front end: sweep runner, oracle precomputation, plotting,
//! and the built-in verification battery.
//!
//! Exit codes: 0 on success, 1 on configuration errors (unreadable or
//! invalid config, bad flags), 2 on runtime failures (I/O, method errors,
//! failed verification).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use performative::error::HarnessError;
use performative::harness::{
    emit_csv, load_config, read_records, resolve_jobs, resolve_oracles, run_all, run_plan,
    write_plots, ParsedConfig, PlotOptions,
};
use performative::optimize::oracle::OracleCache;

#[derive(Parser)]
#[command(
    name = "performative",
    about = "Simulation and optimization laboratory for performative prediction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario in a config file and write one CSV of records.
    Run {
        /// Plan and scenario definitions (flat key = value sections).
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; overrides the config and the environment.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory (results.csv, oracle_cache.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolve and cache the true-optimum oracle for each scenario.
    Oracle {
        /// Plan and scenario definitions (flat key = value sections).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the oracle cache.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render per-experiment SVG plots from a results CSV.
    Plot {
        /// A results.csv produced by `run`.
        #[arg(long)]
        csv: PathBuf,
        /// Directory for the rendered SVG files.
        #[arg(long)]
        out: PathBuf,
        /// Log-axis floor for nonpositive means.
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Run the built-in verification battery and report each check.
    Selftest,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, jobs, out } => run_command(&config, jobs, out),
        Command::Oracle { config, out } => oracle_command(&config, out),
        Command::Plot { csv, out, floor } => plot_command(&csv, &out, floor),
        Command::Selftest => selftest_command(),
    }
}

/// Config problems exit with 1; everything past a valid config is a
/// runtime failure and exits with 2.
fn exit_for(err: &HarnessError) -> ExitCode {
    match err {
        HarnessError::Config { .. } | HarnessError::InvalidPlan(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn load_or_exit(path: &PathBuf) -> Result<ParsedConfig, ExitCode> {
    load_config(path).map_err(|err| {
        eprintln!("{err}");
        ExitCode::from(1)
    })
}

fn resolve_out_dir(flag: Option<PathBuf>, parsed: &ParsedConfig) -> PathBuf {
    flag.or_else(|| parsed.plan.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn ensure_dir(dir: &PathBuf) -> Result<(), ExitCode> {
    std::fs::create_dir_all(dir).map_err(|err| {
        eprintln!("cannot create {}: {err}", dir.display());
        ExitCode::from(2)
    })
}

fn run_command(config: &PathBuf, jobs: Option<usize>, out: Option<PathBuf>) -> ExitCode {
    let parsed = match load_or_exit(config) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let out_dir = resolve_out_dir(out, &parsed);
    if let Err(code) = ensure_dir(&out_dir) {
        return code;
    }
    let cache = OracleCache::new(out_dir.join("oracle_cache.csv"));
    let workers = resolve_jobs(jobs, parsed.plan.jobs);
    let records = match run_plan(&parsed, workers, Some(&cache)) {
        Ok(r) => r,
        Err(err) => {
            eprintln!("{err}");
            return exit_for(&err);
        }
    };
    let csv_path = out_dir.join("results.csv");
    if let Err(err) = emit_csv(&records, &csv_path) {
        eprintln!("{err}");
        return exit_for(&err);
    }
    println!(
        "wrote {} records for {} scenario(s) to {}",
        records.len(),
        parsed.scenarios.len(),
        csv_path.display()
    );
    ExitCode::SUCCESS
}

fn oracle_command(config: &PathBuf, out: Option<PathBuf>) -> ExitCode {
    let parsed = match load_or_exit(config) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let out_dir = resolve_out_dir(out, &parsed);
    if let Err(code) = ensure_dir(&out_dir) {
        return code;
    }
    let cache = OracleCache::new(out_dir.join("oracle_cache.csv"));
    match resolve_oracles(&parsed, Some(&cache)) {
        Ok(entries) => {
            for (name, oracle) in &entries {
                println!(
                    "{name}: risk {:.9e} at theta {:?} ({}; {} draws)",
                    oracle.pr, oracle.theta, oracle.mode, oracle.budget_used
                );
            }
            println!("cache: {}", cache.path().display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{err}");
            exit_for(&err)
        }
    }
}

fn plot_command(csv: &PathBuf, out: &PathBuf, floor: Option<f64>) -> ExitCode {
    let records = match read_records(csv) {
        Ok(r) => r,
        Err(err) => {
            eprintln!("{err}");
            return exit_for(&err);
        }
    };
    let mut options = PlotOptions::default();
    if let Some(f) = floor {
        options.floor = f;
    }
    match write_plots(&records, out, &options) {
        Ok(files) => {
            for f in &files {
                println!("{}", f.display());
            }
            println!("{} plot(s) written", files.len());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{err}");
            exit_for(&err)
        }
    }
}

fn selftest_command() -> ExitCode {
    let reports = run_all();
    let mut all_pass = true;
    let mut total = 0u64;
    for report in &reports {
        println!("{}", report.line());
        all_pass = all_pass && report.pass;
        total += report.millis;
    }
    println!(
        "{}/{} checks passed in {total} ms",
        reports.iter().filter(|r| r.pass).count(),
        reports.len()
    );
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
