//! Experiment orchestration: scenarios, method sweeps, repetition
//! management, CSV emission, SVG plots, and the self-test suite.
//!
//! A run is a grid of independent cells — one per (method, budget,
//! repetition) — each executed under a child seed derived from the master
//! seed and the cell's coordinates, so results are reproducible bit for
//! bit regardless of worker count or interleaving. Every cell charges its
//! ground-truth draws to a per-cell ledger that must land exactly on the
//! allotted budget; scoring draws use separate evaluation streams.

pub mod config;
pub mod csv_io;
pub mod plot;
pub mod scenario;
pub mod selftest;

pub use config::{
    load_config, parse_config, Method, ParsedConfig, PlanConfig, ScenarioConfig, Tuning,
};
pub use csv_io::{emit_csv, read_records, sort_records, ExperimentRecord, CSV_HEADER};
pub use plot::{write_plots, PlotOptions};
pub use scenario::{
    beta_distance, classification_accuracy, sphere_minimize, strat_class_finite_risk, Scenario,
    PROXY_DRAWS,
};
pub use selftest::{run_all, CriterionReport, MASTER_SEED, TOTAL_BUDGET_MS};

use crate::baselines::{
    dfo_hyper_grid, dfo_run, greedy_sgd_run, perfgd_run, sgd_hyper_grid, DfoOptions,
    PerfGdOptions, SgdOptions,
};
use crate::core::{
    deploy_and_collect, derive_seed, hash_tag, CountingMap, Dataset, RngStream, SampleCounter,
    TrueMap,
};
use crate::error::HarnessError;
use crate::mapfit::{BetaHat, FitResult};
use crate::metrics::performative_risk_mc;
use crate::optimize::oracle::{OracleCache, OracleResult};
use rayon::prelude::*;
use std::time::Instant;

/// Environment variable supplying the default worker count.
pub const JOBS_ENV: &str = "PERFORMATIVE_JOBS";

/// Fresh post-response draws behind each accuracy estimate.
const ACCURACY_DRAWS: usize = 10_000;

/// Fresh draws scoring each hyperparameter combination during tuning.
const TUNING_EVAL_DRAWS: usize = 10_000;

/// Worker-count resolution: explicit CLI flag, then the config file,
/// then [`JOBS_ENV`], then 0 (let the pool pick). Unparseable
/// environment values are ignored rather than fatal.
pub fn resolve_jobs(cli: Option<usize>, config_jobs: usize) -> usize {
    if let Some(k) = cli {
        return k;
    }
    if config_jobs > 0 {
        return config_jobs;
    }
    if let Ok(raw) = std::env::var(JOBS_ENV) {
        if let Ok(k) = raw.trim().parse::<usize>() {
            return k;
        }
    }
    0
}

/// Hyperparameters selected by grid tuning for one (method, budget).
#[derive(Clone, Copy, Debug)]
enum TunedHypers {
    Dfo { c0: f64, m: usize, delta: f64 },
    /// Greedy SGD and the performative-gradient method share a
    /// (step constant, batch size) grid.
    FirstOrder { c0: f64, m: usize },
}

/// One unit of work in the sweep.
struct Cell {
    /// Method column value; `_tuned` suffix marks grid-tuned variants.
    label: String,
    method: Method,
    hypers: Option<TunedHypers>,
    n: usize,
    rep: usize,
}

/// Run every scenario in a parsed config under one worker pool and
/// return the merged, sorted records.
pub fn run_plan(
    parsed: &ParsedConfig,
    jobs: usize,
    cache: Option<&OracleCache>,
) -> Result<Vec<ExperimentRecord>, HarnessError> {
    parsed.plan.validate()?;
    if parsed.scenarios.is_empty() {
        return Err(HarnessError::InvalidPlan(
            "config declares no scenarios".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::InvalidPlan(format!("worker pool: {e}")))?;
    let mut all = Vec::new();
    for (name, sc) in &parsed.scenarios {
        let records = pool.install(|| run_experiment(name, sc, &parsed.plan, cache))?;
        all.extend(records);
    }
    sort_records(&mut all);
    Ok(all)
}

/// Resolve (and cache) the true-optimum oracle for every scenario in a
/// config, in file order. This is the `oracle` subcommand's workhorse
/// and the warm-up path before a large run.
pub fn resolve_oracles(
    parsed: &ParsedConfig,
    cache: Option<&OracleCache>,
) -> Result<Vec<(String, OracleResult)>, HarnessError> {
    if parsed.scenarios.is_empty() {
        return Err(HarnessError::InvalidPlan(
            "config declares no scenarios".into(),
        ));
    }
    let mut out = Vec::new();
    for (name, sc) in &parsed.scenarios {
        let scenario = Scenario::build(name, sc)?;
        let oracle = scenario.resolve_oracle(
            parsed.plan.master_seed,
            parsed.plan.oracle_budget,
            cache,
        )?;
        out.push((name.clone(), oracle));
    }
    Ok(out)
}

/// Run one scenario through the full (method, budget, repetition) grid.
///
/// Cells execute in parallel on the ambient worker pool; the output
/// order is a deterministic sort, independent of scheduling. A failing
/// cell yields a record with `excess_risk = NaN` and the failure in its
/// diagnostics — one bad cell never aborts a sweep.
pub fn run_experiment(
    name: &str,
    scenario_config: &ScenarioConfig,
    plan: &PlanConfig,
    cache: Option<&OracleCache>,
) -> Result<Vec<ExperimentRecord>, HarnessError> {
    plan.validate()?;
    let scenario = Scenario::build(name, scenario_config)?;
    let oracle = scenario.resolve_oracle(plan.master_seed, plan.oracle_budget, cache)?;
    let proxy = if plan.methods.contains(&Method::Plugin) {
        Some(scenario.beta_star_proxy(plan.master_seed)?)
    } else {
        None
    };

    let mut cells = Vec::new();
    for &method in &plan.methods {
        for &n in &plan.budgets {
            for rep in 0..plan.reps {
                cells.push(Cell {
                    label: method.name().to_string(),
                    method,
                    hypers: None,
                    n,
                    rep,
                });
            }
        }
    }
    if plan.tuning == Tuning::Grid {
        for &method in &plan.methods {
            if method == Method::Plugin {
                continue; // the plug-in pipeline has no hyperparameter grid
            }
            let label = format!("{}_tuned", method.name());
            for &n in &plan.budgets {
                let hypers = tune_baseline(&scenario, plan, method, &label, n);
                for rep in 0..plan.reps {
                    cells.push(Cell {
                        label: label.clone(),
                        method,
                        hypers: Some(hypers),
                        n,
                        rep,
                    });
                }
            }
        }
    }

    let mut records: Vec<ExperimentRecord> = cells
        .par_iter()
        .map(|cell| run_cell(&scenario, &oracle, proxy.as_ref(), plan, cell))
        .collect();
    sort_records(&mut records);
    Ok(records)
}

/// Pick the grid combination with the lowest final Monte-Carlo
/// performative risk at budget `n`, on a dedicated tuning repetition.
/// Tuning draws live on their own ledger and are not charged to `n`;
/// combinations that fail rank last, ties go to the lower grid index.
fn tune_baseline(
    scenario: &Scenario,
    plan: &PlanConfig,
    method: Method,
    label: &str,
    n: usize,
) -> TunedHypers {
    let combos: Vec<TunedHypers> = match method {
        Method::Dfo => dfo_hyper_grid()
            .into_iter()
            .map(|(c0, m, delta)| TunedHypers::Dfo { c0, m, delta })
            .collect(),
        _ => sgd_hyper_grid()
            .into_iter()
            .map(|(c0, m)| TunedHypers::FirstOrder { c0, m })
            .collect(),
    };
    let scored: Vec<f64> = combos
        .par_iter()
        .enumerate()
        .map(|(idx, hypers)| {
            let seed = derive_seed(
                plan.master_seed,
                &[hash_tag("tuning"), hash_tag(label), n as u64, idx as u64],
            );
            let mut method_rng = RngStream::new(seed, 0);
            let theta = match run_baseline(scenario, method, Some(*hypers), n, &mut method_rng)
            {
                Ok((theta, _)) => theta,
                Err(_) => return f64::INFINITY,
            };
            let mut eval_rng = RngStream::new(seed, 1);
            match performative_risk_mc(
                scenario.map.as_ref(),
                &theta,
                scenario.loss.as_ref(),
                TUNING_EVAL_DRAWS,
                &mut eval_rng,
            ) {
                Ok((risk, _)) if risk.is_finite() => risk,
                _ => f64::INFINITY,
            }
        })
        .collect();
    let best = scored
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.partial_cmp(b).unwrap().then(ia.cmp(ib)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    combos[best]
}

/// Execute one baseline under its exact sample budget: `floor(n / m)`
/// iterations, then the leftover draws spent (and discarded) at the
/// final iterate so the ledger lands on `n`.
///
/// Returns the final iterate and diagnostics entries.
fn run_baseline(
    scenario: &Scenario,
    method: Method,
    hypers: Option<TunedHypers>,
    n: usize,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<String>), String> {
    let counter = SampleCounter::new();
    let counting = CountingMap::new(scenario.map.as_ref(), &counter);
    let mut notes = Vec::new();
    let batch = match (method, hypers) {
        (Method::Dfo, Some(TunedHypers::Dfo { m, .. })) => m,
        (Method::Dfo, None) => DfoOptions::default().m,
        (Method::Sgd, Some(TunedHypers::FirstOrder { m, .. })) => m,
        (Method::Sgd, None) => SgdOptions::default().m,
        (Method::PerfGd, Some(TunedHypers::FirstOrder { m, .. })) => m,
        (Method::PerfGd, None) => PerfGdOptions::default().m,
        (Method::Plugin, _) => return Err("plug-in is not a baseline".into()),
        (m, h) => return Err(format!("hyperparameters {h:?} do not fit method {}", m.name())),
    };
    let iters = n / batch;
    if iters == 0 {
        return Err(format!("budget {n} is below one batch of {batch}"));
    }
    let trace = match method {
        Method::Dfo => {
            let defaults = DfoOptions::default();
            let (c0, delta) = match hypers {
                Some(TunedHypers::Dfo { c0, delta, .. }) => (c0, delta),
                _ => (defaults.c0, defaults.delta),
            };
            let opts = DfoOptions {
                c0,
                m: batch,
                delta,
                iters,
            };
            dfo_run(&counting, scenario.loss.as_ref(), &scenario.theta_set, &opts, rng)
        }
        Method::Sgd => {
            let c0 = match hypers {
                Some(TunedHypers::FirstOrder { c0, .. }) => c0,
                _ => SgdOptions::default().c0,
            };
            let opts = SgdOptions {
                c0,
                m: batch,
                iters,
            };
            greedy_sgd_run(&counting, scenario.loss.as_ref(), &scenario.theta_set, &opts, rng)
        }
        Method::PerfGd => {
            let defaults = PerfGdOptions::default();
            let c0 = match hypers {
                Some(TunedHypers::FirstOrder { c0, .. }) => c0,
                _ => defaults.c0,
            };
            let opts = PerfGdOptions {
                c0,
                m: batch,
                iters,
                sigma_est: defaults.sigma_est,
            };
            perfgd_run(&counting, scenario.loss.as_ref(), &scenario.theta_set, &opts, rng)
        }
        Method::Plugin => unreachable!("rejected above"),
    }
    .map_err(|e| e.to_string())?;
    notes.push(format!("iters={iters}"));
    notes.push(format!("batch={batch}"));
    if trace.fallback_count > 0 {
        notes.push(format!("fallbacks={}", trace.fallback_count));
    }
    let consumed = counter.count() as usize;
    if consumed > n {
        return Err(format!(
            "ledger overdraft: consumed {consumed} of {n}"
        ));
    }
    for _ in consumed..n {
        counting
            .sample(&trace.final_theta, rng)
            .map_err(|e| format!("leftover draw failed: {e}"))?;
    }
    notes.push(format!("discarded={}", n - consumed));
    notes.push(format!("ledger={}", counter.count()));
    Ok((trace.final_theta, notes))
}

/// Run the plug-in pipeline under its exact sample budget: deploy and
/// collect `n` draws, fit the scenario's atlas, minimize the modeled
/// risk (synthetic draws only).
/// The plug-in protocol backbone: collect a deployment dataset, fit the
/// response model on it, then optimize the fitted modeled risk — in that
/// order, with each step consuming the previous step's output. The steps
/// are injected as closures so tests can instrument call order and data
/// flow; [`run_experiment`] wires in the scenario's sampler, fitter, and
/// optimizer.
pub fn plug_in_pipeline(
    n: usize,
    collect: &mut dyn FnMut(usize) -> Result<Dataset, String>,
    fit: &mut dyn FnMut(&Dataset) -> Result<FitResult, String>,
    optimize: &mut dyn FnMut(&FitResult) -> Result<Vec<f64>, String>,
) -> Result<(FitResult, Vec<f64>), String> {
    let data = collect(n)?;
    let fitted = fit(&data)?;
    let theta = optimize(&fitted)?;
    Ok((fitted, theta))
}

fn run_plugin(
    scenario: &Scenario,
    proxy: Option<&BetaHat>,
    n: usize,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Option<f64>, Vec<String>), String> {
    let counter = SampleCounter::new();
    let counting = CountingMap::new(scenario.map.as_ref(), &counter);
    let rng = std::cell::RefCell::new(rng);
    let mut opt_path = "";
    let mut opt_iters = 0u64;
    let (fitted, theta) = plug_in_pipeline(
        n,
        &mut |want| {
            deploy_and_collect(
                &counting,
                &scenario.exploration,
                want,
                &mut **rng.borrow_mut(),
            )
            .map_err(|e| e.to_string())
        },
        &mut |data| scenario.fit(data).map_err(|e| e.to_string()),
        &mut |fit| {
            let (theta, path, iters) = scenario
                .optimize_plugin(&fit.beta, &mut **rng.borrow_mut())
                .map_err(|e| e.to_string())?;
            opt_path = path;
            opt_iters = iters;
            Ok(theta)
        },
    )?;
    let beta_err = proxy.and_then(|p| beta_distance(&fitted.beta, p));
    let mut notes = vec![format!("fit_iterations={}", fitted.iterations)];
    if fitted.clamped {
        notes.push("fit_clamped=true".into());
    }
    notes.push(format!("opt_path={opt_path}"));
    if opt_iters > 0 {
        notes.push(format!("opt_iterations={opt_iters}"));
    }
    notes.push(format!("ledger={}", counter.count()));
    Ok((theta, beta_err, notes))
}

/// Execute one cell: run the method under its budget and seed, then
/// score it on fresh evaluation streams. Failures become NaN records
/// with the cause in the diagnostics.
fn run_cell(
    scenario: &Scenario,
    oracle: &OracleResult,
    proxy: Option<&BetaHat>,
    plan: &PlanConfig,
    cell: &Cell,
) -> ExperimentRecord {
    let child = derive_seed(
        plan.master_seed,
        &[hash_tag(&cell.label), cell.n as u64, cell.rep as u64],
    );
    let start = Instant::now();
    let mut method_rng = RngStream::new(child, 0);
    let mut notes: Vec<String> = Vec::new();
    if let Some(h) = cell.hypers {
        match h {
            TunedHypers::Dfo { c0, m, delta } => {
                notes.push(format!("tuned_c0={c0}"));
                notes.push(format!("tuned_m={m}"));
                notes.push(format!("tuned_delta={delta}"));
            }
            TunedHypers::FirstOrder { c0, m } => {
                notes.push(format!("tuned_c0={c0}"));
                notes.push(format!("tuned_m={m}"));
            }
        }
    }

    let mut beta_err = None;
    let outcome: Result<Vec<f64>, String> = match cell.method {
        Method::Plugin => run_plugin(scenario, proxy, cell.n, &mut method_rng).map(
            |(theta, be, plugin_notes)| {
                beta_err = be;
                notes.extend(plugin_notes);
                theta
            },
        ),
        _ => run_baseline(scenario, cell.method, cell.hypers, cell.n, &mut method_rng).map(
            |(theta, baseline_notes)| {
                notes.extend(baseline_notes);
                theta
            },
        ),
    };

    let mut excess_risk = f64::NAN;
    let mut accuracy = None;
    match outcome {
        Ok(theta) => {
            let mut eval_rng = RngStream::new(child, 1);
            match performative_risk_mc(
                scenario.map.as_ref(),
                &theta,
                scenario.loss.as_ref(),
                plan.eval_m,
                &mut eval_rng,
            ) {
                Ok((pr, se)) => {
                    excess_risk = pr - oracle.pr;
                    notes.push(format!("pr_se={se:.3e}"));
                }
                Err(e) => notes.push(format!("error=evaluation failed: {e}")),
            }
            if let Some(threshold) = scenario.accuracy_threshold {
                let mut acc_rng = RngStream::new(child, 2);
                match classification_accuracy(
                    scenario.map.as_ref(),
                    &theta,
                    threshold,
                    scenario.x_dim,
                    ACCURACY_DRAWS,
                    &mut acc_rng,
                ) {
                    Ok(a) => accuracy = Some(a),
                    Err(e) => notes.push(format!("error=accuracy failed: {e}")),
                }
            }
        }
        Err(message) => {
            notes.push(format!("error={message}"));
        }
    }

    ExperimentRecord {
        experiment: scenario.name.clone(),
        scenario_hash: scenario.hash.clone(),
        method: cell.label.clone(),
        n: cell.n as u64,
        rep: cell.rep as u64,
        seed: child,
        excess_risk,
        accuracy,
        beta_err,
        elapsed_ms: start.elapsed().as_millis() as u64,
        diagnostics: notes.join("; "),
    }
}
