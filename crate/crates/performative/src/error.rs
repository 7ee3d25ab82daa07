//! Error types shared across the crate.
//!
//! Each pipeline stage has its own enum so callers can match on what went
//! wrong without string-parsing; the harness folds any of them into a
//! failure record rather than aborting a whole experiment.

use thiserror::Error;

/// Construction and geometry errors from [`crate::core`].
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("radius must be finite and nonnegative, got {0}")]
    BadRadius(f64),
    #[error("box bounds must satisfy lo <= hi in every coordinate (coordinate {index}: {lo} > {hi})")]
    BadBox { index: usize, lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Errors from distribution maps and atlases (sampling and closed forms).
#[derive(Debug, Error)]
pub enum MapError {
    #[error("deployed parameter has dimension {got}, map expects {expected}")]
    ThetaDimension { expected: usize, got: usize },
    #[error("parameter outside the map's domain: {0}")]
    DomainViolation(String),
    #[error("invalid map configuration: {0}")]
    InvalidConfig(String),
    #[error("best response failed to converge within {max_iters} iterations (residual {residual:.3e})")]
    ResponseNonConvergence { max_iters: usize, residual: f64 },
}

/// Errors from the deploy-and-collect step.
#[derive(Debug, Error)]
pub enum CollectError {
    #[error("requested sample count must be at least 1")]
    EmptyRequest,
    #[error("exploration dimension {exploration} does not match map parameter dimension {map}")]
    DimensionMismatch { exploration: usize, map: usize },
    #[error("map failed at pair {index}: {source}")]
    MapFailure {
        index: usize,
        #[source]
        source: MapError,
    },
}

/// Errors from atlas-parameter estimators.
#[derive(Debug, Error)]
pub enum FitError {
    #[error("empty dataset")]
    EmptyData,
    #[error("dataset unsuitable for this fitter: {0}")]
    BadData(String),
    #[error("singular design: {0}")]
    SingularDesign(String),
    #[error("band probability must be nondecreasing with value 0 at budget 0: {0}")]
    InvalidBandProb(String),
    #[error("non-finite {what} at iteration {iteration} (iterate {iterate:?})")]
    NonFinite {
        what: &'static str,
        iteration: usize,
        iterate: Vec<f64>,
    },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
}

/// Errors from plug-in optimizers.
#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("atlas '{0}' has no closed-form risk for this loss; use the sampled optimizer")]
    NoClosedForm(&'static str),
    #[error("non-finite {what} during descent at iteration {iteration}")]
    NonFinite {
        what: &'static str,
        iteration: usize,
    },
    #[error("atlas draw failed: {0}")]
    Atlas(#[from] MapError),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
}

/// Errors from the ground-truth oracle.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid mode supports at most 2 parameter dimensions, got {0}")]
    GridDimension(usize),
    #[error("true map failed during oracle search: {0}")]
    Map(#[from] MapError),
    #[error("oracle cache i/o failed: {0}")]
    CacheIo(#[from] std::io::Error),
    #[error("malformed oracle cache record at line {line}: {detail}")]
    CacheParse { line: usize, detail: String },
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
}

/// Errors from baseline optimizers.
#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("{method} requires {what}")]
    Unsupported {
        method: &'static str,
        what: &'static str,
    },
    #[error("non-finite gradient estimate at iteration {iteration} of {method}")]
    NonFinite {
        method: &'static str,
        iteration: usize,
        /// Iterates up to the failure, for post-mortem diagnostics.
        trace: Box<crate::baselines::IterateTrace>,
    },
    #[error("true map failed during {method} at iteration {iteration}: {source}")]
    Map {
        method: &'static str,
        iteration: usize,
        #[source]
        source: MapError,
    },
    #[error("invalid baseline configuration: {0}")]
    InvalidConfig(String),
}

/// Errors from distance and risk metrics.
#[derive(Debug, Error)]
pub enum MetricError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("sample lists must have equal length: {a} vs {b}")]
    UnequalLengths { a: usize, b: usize },
    #[error("empty sample list")]
    EmptyInput,
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("risk evaluator returned a non-finite value at grid point {point:?}")]
    EvaluatorFailure { point: Vec<f64> },
    #[error("map failure during risk estimation: {0}")]
    Map(#[from] MapError),
}

/// Errors from the experiment harness: configuration, orchestration, and
/// artifact emission.
///
/// `Config` and `InvalidPlan` are user-input problems (CLI exit code 1);
/// everything else is a runtime failure (exit code 2).
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at line {line}: {detail}")]
    Config { line: usize, detail: String },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("i/o failed on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed records at line {line}: {detail}")]
    Records { line: usize, detail: String },
    #[error("oracle failed: {0}")]
    Oracle(#[from] OracleError),
    #[error("scenario construction failed: {0}")]
    Scenario(#[from] MapError),
}
