//! Experiment records and their CSV form.
//!
//! Emission is hand-rolled so reruns are byte-identical: fixed header,
//! floats printed with nine significant digits in scientific notation,
//! `nan` spelled literally, rows sorted by (method, n, rep) with the
//! experiment name as tie-break. Reading goes through the `csv` crate
//! and reports malformed rows with their line number.

use crate::error::HarnessError;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Column header of every results file.
pub const CSV_HEADER: &str =
    "experiment,scenario_hash,method,n,rep,seed,excess_risk,accuracy,beta_err,elapsed_ms,diagnostics";

/// One scored (method, n, rep) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    /// Config section name of the scenario.
    pub experiment: String,
    /// Canonical-serialization hash of the scenario config.
    pub scenario_hash: String,
    /// Method label; tuned variants carry a `_tuned` suffix.
    pub method: String,
    /// True-sample budget the cell was allotted (and consumed exactly).
    pub n: u64,
    /// Repetition index, `0..reps`.
    pub rep: u64,
    /// Child seed the cell ran under.
    pub seed: u64,
    /// Monte-Carlo performative risk at the returned parameter minus the
    /// oracle optimum; `NaN` when the method failed.
    pub excess_risk: f64,
    /// Hard-threshold classification accuracy on fresh post-response
    /// draws; strategic scenarios only.
    pub accuracy: Option<f64>,
    /// Distance between the fitted parameter and its large-sample proxy;
    /// plug-in records only.
    pub beta_err: Option<f64>,
    /// Wall-clock time of the cell.
    pub elapsed_ms: u64,
    /// Free-form `key=value; ...` notes (iterations, ledgers, failures).
    pub diagnostics: String,
}

/// Sort key shared by the emitter and the orchestrator: (method, n, rep),
/// then experiment name for multi-scenario files.
pub fn sort_records(records: &mut [ExperimentRecord]) {
    records.sort_by(|a, b| {
        (&a.method, a.n, a.rep, &a.experiment).cmp(&(&b.method, b.n, b.rep, &b.experiment))
    });
}

/// Nine significant digits, scientific notation, lowercase special
/// values — the one float format every emitted file uses.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.8e}")
    }
}

/// Keep a free-text field inside one unquoted CSV cell.
fn sanitize_text(s: &str) -> String {
    s.replace(',', ";").replace(['\n', '\r'], " ").replace('"', "'")
}

fn format_record(r: &ExperimentRecord) -> String {
    let opt = |v: &Option<f64>| v.map(format_float).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        sanitize_text(&r.experiment),
        sanitize_text(&r.scenario_hash),
        sanitize_text(&r.method),
        r.n,
        r.rep,
        r.seed,
        format_float(r.excess_risk),
        opt(&r.accuracy),
        opt(&r.beta_err),
        r.elapsed_ms,
        sanitize_text(&r.diagnostics),
    )
}

/// Write `records` to `path` as CSV, sorted by (method, n, rep).
///
/// An empty record list is rejected: it means the plan produced nothing,
/// which is a configuration problem, not an empty result.
pub fn emit_csv(records: &[ExperimentRecord], path: &Path) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::InvalidPlan(
            "no records to write; the plan produced no cells".into(),
        ));
    }
    let mut sorted: Vec<&ExperimentRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.method, a.n, a.rep, &a.experiment).cmp(&(&b.method, b.n, b.rep, &b.experiment))
    });
    let io_err = |source: std::io::Error| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{CSV_HEADER}").map_err(io_err)?;
    for r in sorted {
        writeln!(out, "{}", format_record(r)).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Read a results file back, validating the header and typing every
/// field; malformed content is reported with its line number.
pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>, HarnessError> {
    let file = File::open(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    {
        let headers = reader.headers().map_err(|e| HarnessError::Records {
            line: 1,
            detail: format!("unreadable header: {e}"),
        })?;
        let expect: Vec<&str> = CSV_HEADER.split(',').collect();
        let got: Vec<&str> = headers.iter().collect();
        if got != expect {
            return Err(HarnessError::Records {
                line: 1,
                detail: format!("header mismatch: expected `{CSV_HEADER}`, got `{}`", got.join(",")),
            });
        }
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| HarnessError::Records {
            line: e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(0),
            detail: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let parse_u64 = |i: usize, name: &str| -> Result<u64, HarnessError> {
            field(i).parse::<u64>().map_err(|e| HarnessError::Records {
                line,
                detail: format!("column `{name}`: {e}"),
            })
        };
        let parse_f64 = |i: usize, name: &str| -> Result<f64, HarnessError> {
            field(i).parse::<f64>().map_err(|e| HarnessError::Records {
                line,
                detail: format!("column `{name}`: {e}"),
            })
        };
        let parse_opt = |i: usize, name: &str| -> Result<Option<f64>, HarnessError> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                parse_f64(i, name).map(Some)
            }
        };
        records.push(ExperimentRecord {
            experiment: field(0).to_string(),
            scenario_hash: field(1).to_string(),
            method: field(2).to_string(),
            n: parse_u64(3, "n")?,
            rep: parse_u64(4, "rep")?,
            seed: parse_u64(5, "seed")?,
            excess_risk: parse_f64(6, "excess_risk")?,
            accuracy: parse_opt(7, "accuracy")?,
            beta_err: parse_opt(8, "beta_err")?,
            elapsed_ms: parse_u64(9, "elapsed_ms")?,
            diagnostics: field(10).to_string(),
        });
    }
    Ok(records)
}
