//! Integration checks on the experiment pipeline: protocol step order,
//! budget fairness, record-grid shape, CSV determinism, and hyperparameter
//! tuning bookkeeping.

use std::cell::RefCell;
use std::collections::BTreeMap;

use performative::core::Dataset;
use performative::harness::{
    emit_csv, plug_in_pipeline, run_experiment, sort_records, ExperimentRecord, Method,
    PlanConfig, ScenarioConfig, Tuning, CSV_HEADER,
};
use performative::mapfit::{BetaHat, FitResult};

fn ledger_of(record: &ExperimentRecord) -> u64 {
    record
        .diagnostics
        .split("; ")
        .find_map(|note| note.strip_prefix("ledger=").map(|v| v.parse().unwrap()))
        .unwrap_or_else(|| panic!("no ledger note in '{}'", record.diagnostics))
}

#[test]
fn plug_in_protocol_runs_collect_then_fit_then_optimize() {
    let order: RefCell<Vec<&'static str>> = RefCell::new(Vec::new());
    let (fitted, theta) = plug_in_pipeline(
        7,
        &mut |n| {
            order.borrow_mut().push("collect");
            assert_eq!(n, 7, "the budget flows into the collection step");
            Ok(Dataset {
                pairs: vec![(vec![0.25], vec![1.0]), (vec![0.75], vec![0.0])],
                seed: 99,
                stream: 3,
                theta_dim: 1,
                obs_dim: 1,
            })
        },
        &mut |data| {
            order.borrow_mut().push("fit");
            assert_eq!(data.seed, 99, "the fitter sees the collected dataset");
            assert_eq!(data.len(), 2);
            assert_eq!(data.pairs[0].0, vec![0.25]);
            Ok(FitResult {
                beta: BetaHat::Vector(vec![0.42]),
                objective: 0.0,
                iterations: 5,
                clamped: false,
                diagnostics: BTreeMap::new(),
            })
        },
        &mut |fit| {
            order.borrow_mut().push("optimize");
            assert_eq!(
                fit.beta.scalar(),
                Some(0.42),
                "the optimizer sees the fitted coefficient"
            );
            Ok(vec![0.9])
        },
    )
    .expect("pipeline");
    assert_eq!(*order.borrow(), ["collect", "fit", "optimize"]);
    assert_eq!(theta, vec![0.9]);
    assert_eq!(fitted.iterations, 5);
}

#[test]
fn plug_in_protocol_stops_at_the_first_failure() {
    let optimizer_called = RefCell::new(false);
    let err = plug_in_pipeline(
        3,
        &mut |_| {
            Ok(Dataset {
                pairs: vec![(vec![0.5], vec![1.0])],
                seed: 1,
                stream: 0,
                theta_dim: 1,
                obs_dim: 1,
            })
        },
        &mut |_| Err("fit failed".into()),
        &mut |_| {
            *optimizer_called.borrow_mut() = true;
            Ok(vec![0.0])
        },
    )
    .unwrap_err();
    assert_eq!(err, "fit failed");
    assert!(
        !*optimizer_called.borrow(),
        "a failed fit must not reach the optimizer"
    );
}

#[test]
fn every_method_charges_exactly_its_budget() {
    let scenarios = [
        ("coin", ScenarioConfig::Coin { mu: 0.3, eta: 0.2 }),
        (
            "location",
            ScenarioConfig::Location {
                d: 2,
                s: 0.5,
                sigma: 0.5,
                b_seed: 11,
                m1_seed: 12,
                m2_seed: 13,
                theta_radius: 1.0,
                intercept: true,
            },
        ),
    ];
    let plan = PlanConfig {
        methods: vec![Method::Plugin, Method::Dfo, Method::Sgd, Method::PerfGd],
        budgets: vec![40, 90],
        reps: 2,
        eval_m: 200,
        ..PlanConfig::default()
    };
    for (name, config) in scenarios {
        let records = run_experiment(name, &config, &plan, None).expect("sweep");
        assert_eq!(records.len(), 4 * 2 * 2);
        for r in &records {
            assert!(
                !r.diagnostics.contains("error="),
                "{} {} failed: {}",
                r.method,
                r.n,
                r.diagnostics
            );
            assert_eq!(ledger_of(r), r.n, "{} at n={}", r.method, r.n);
        }
    }
}

#[test]
fn a_three_method_six_budget_ten_rep_plan_yields_180_records() {
    let plan = PlanConfig {
        methods: vec![Method::Plugin, Method::Dfo, Method::Sgd],
        budgets: vec![20, 40, 60, 80, 100, 120],
        reps: 10,
        eval_m: 100,
        ..PlanConfig::default()
    };
    let config = ScenarioConfig::Coin { mu: 0.3, eta: 0.2 };
    let records = run_experiment("coin", &config, &plan, None).expect("sweep");
    assert_eq!(records.len(), 180);
    let mut resorted = records.clone();
    sort_records(&mut resorted);
    assert_eq!(records, resorted, "records arrive already sorted");
}

#[test]
fn rerun_csv_is_byte_identical_after_masking_elapsed_time() {
    let plan = PlanConfig {
        methods: vec![Method::Plugin, Method::Sgd],
        budgets: vec![50, 100],
        reps: 2,
        eval_m: 500,
        ..PlanConfig::default()
    };
    let config = ScenarioConfig::Coin { mu: 0.25, eta: 0.1 };
    let dir = tempfile::tempdir().expect("tempdir");
    let mut bytes = Vec::new();
    for pass in 0..2 {
        let mut records = run_experiment("coin", &config, &plan, None).expect("sweep");
        for r in &mut records {
            r.elapsed_ms = 0;
        }
        let path = dir.path().join(format!("pass{pass}.csv"));
        emit_csv(&records, &path).expect("csv");
        bytes.push(std::fs::read(&path).expect("read csv"));
    }
    assert_eq!(bytes[0], bytes[1], "same master seed, same bytes");
    let text = String::from_utf8(bytes[0].clone()).expect("utf8");
    assert!(text.starts_with(CSV_HEADER));
}

#[test]
fn grid_tuning_reports_tuned_and_untuned_methods_separately() {
    let plan = PlanConfig {
        methods: vec![Method::Sgd],
        budgets: vec![100],
        reps: 2,
        eval_m: 200,
        tuning: Tuning::Grid,
        ..PlanConfig::default()
    };
    let config = ScenarioConfig::Coin { mu: 0.3, eta: 0.0 };
    let records = run_experiment("coin", &config, &plan, None).expect("sweep");
    assert_eq!(records.len(), 4, "two untuned reps plus two tuned reps");
    let untuned: Vec<_> = records.iter().filter(|r| r.method == "sgd").collect();
    let tuned: Vec<_> = records.iter().filter(|r| r.method == "sgd_tuned").collect();
    assert_eq!(untuned.len(), 2);
    assert_eq!(tuned.len(), 2);
    for r in tuned {
        assert!(
            r.diagnostics.contains("tuned_c0="),
            "tuned records carry their hyperparameters: {}",
            r.diagnostics
        );
        assert_eq!(
            ledger_of(r),
            100,
            "tuning draws live on a separate ledger, not the cell budget"
        );
        assert!(r.excess_risk.is_finite());
    }
}
