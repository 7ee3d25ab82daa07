//! Model-agnostic baseline optimizers: DFO, greedy SGD, and PerfGD.
//!
//! These methods query the ground truth directly instead of fitting a
//! model, so every iteration consumes true samples. Each run returns an
//! [`IterateTrace`] recording the iterates, the cumulative sample count,
//! and the per-step mode, which makes budget audits and burn-in checks
//! mechanical.
//!
//! - [`dfo_run`]: derivative-free optimization with the one-point
//!   sphere-smoothed gradient estimator.
//! - [`greedy_sgd_run`]: projected SGD on the loss gradient in `theta`,
//!   ignoring the distribution's dependence on `theta` — converges to the
//!   stable point of retraining, not the optimum.
//! - [`perfgd_run`]: greedy burn-in, then gradient steps that add a
//!   finite-difference estimate of the map's mean-shift Jacobian.

mod grids;

pub use grids::{dfo_hyper_grid, log_grid, log_grid_usize, sgd_hyper_grid};

use crate::core::{unit_sphere_direction, Loss, RngStream, ThetaSet, TrueMap};
use crate::error::BaselineError;
use crate::linalg::norm2;
use nalgebra::{Cholesky, DMatrix, DVector};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

/// What produced a given iterate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    /// Plain loss-gradient step (SGD always; PerfGD during burn-in).
    Greedy,
    /// Step that accounts for the distribution's dependence on `theta`
    /// (DFO probes; PerfGD with an estimated Jacobian).
    Performative,
    /// PerfGD step that fell back to greedy because the regression
    /// window was degenerate.
    FallbackGreedy,
}

/// One recorded iterate.
#[derive(Clone, Debug)]
pub struct TraceStep {
    pub t: usize,
    /// Iterate after the step's update (always inside the parameter set).
    pub theta: Vec<f64>,
    /// True samples consumed so far, including this step's batch.
    pub samples: u64,
    pub mode: StepMode,
}

/// Full history of a baseline run.
#[derive(Clone, Debug, Default)]
pub struct IterateTrace {
    pub steps: Vec<TraceStep>,
    pub final_theta: Vec<f64>,
    pub hyperparams: BTreeMap<String, String>,
    /// Number of [`StepMode::FallbackGreedy`] steps.
    pub fallback_count: usize,
}

impl IterateTrace {
    pub fn samples_consumed(&self) -> u64 {
        self.steps.last().map_or(0, |s| s.samples)
    }

    /// Dump the trace as CSV: `t,theta_0,...,theta_{d-1},samples,mode`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        let d = self.final_theta.len();
        let coords: Vec<String> = (0..d).map(|j| format!("theta_{j}")).collect();
        writeln!(file, "t,{},samples,mode", coords.join(","))?;
        for step in &self.steps {
            let coords: Vec<String> = step.theta.iter().map(|v| format!("{v}")).collect();
            let mode = match step.mode {
                StepMode::Greedy => "greedy",
                StepMode::Performative => "performative",
                StepMode::FallbackGreedy => "fallback_greedy",
            };
            writeln!(file, "{},{},{},{}", step.t, coords.join(","), step.samples, mode)?;
        }
        Ok(())
    }
}

/// The shared starting point `1_d / sqrt(d)`, projected into the set.
fn start_point(theta_set: &ThetaSet) -> Vec<f64> {
    let d = theta_set.dim();
    let v = 1.0 / (d as f64).sqrt();
    theta_set.project(&vec![v; d])
}

fn check_common(
    map: &dyn TrueMap,
    theta_set: &ThetaSet,
    c0: f64,
    m: usize,
    iters: usize,
) -> Result<(), BaselineError> {
    if theta_set.dim() != map.theta_dim() {
        return Err(BaselineError::InvalidConfig(format!(
            "parameter set dimension {} does not match map dimension {}",
            theta_set.dim(),
            map.theta_dim()
        )));
    }
    if !(c0 >= 0.0 && c0.is_finite()) {
        return Err(BaselineError::InvalidConfig(format!(
            "step constant must be finite and nonnegative, got {c0}"
        )));
    }
    if m == 0 {
        return Err(BaselineError::InvalidConfig("batch size must be >= 1".into()));
    }
    if iters == 0 {
        return Err(BaselineError::InvalidConfig(
            "iteration count must be >= 1".into(),
        ));
    }
    Ok(())
}

/// Controls for [`dfo_run`].
#[derive(Clone, Copy, Debug)]
pub struct DfoOptions {
    /// Step constant; the step at iteration `t` is `c0 / (t + 1)`.
    pub c0: f64,
    /// Probe pairs per iteration (each consumes one true sample).
    pub m: usize,
    /// Probe radius.
    pub delta: f64,
    pub iters: usize,
}

impl Default for DfoOptions {
    fn default() -> Self {
        DfoOptions {
            c0: 0.01,
            m: 10,
            delta: 0.5,
            iters: 1_000,
        }
    }
}

/// One-point sphere-smoothed gradient estimate at `theta`: the average
/// over `m` fresh pairs `(u, z)` of `u * loss(z; probe) * d / delta`,
/// where `probe = project(theta + delta u)` and `z ~ D(probe)`.
///
/// This is the estimator [`dfo_run`] uses at every iterate; it is public
/// so its unbiasedness can be checked in isolation. Consumes `m` true
/// samples.
pub fn dfo_gradient_estimate(
    map: &dyn TrueMap,
    loss: &dyn Loss,
    theta: &[f64],
    delta: f64,
    m: usize,
    theta_set: &ThetaSet,
    rng: &mut RngStream,
) -> Result<Vec<f64>, BaselineError> {
    let d = theta.len();
    let mut g = vec![0.0; d];
    for _ in 0..m {
        let u = unit_sphere_direction(d, rng);
        let probe: Vec<f64> = theta.iter().zip(&u).map(|(x, ui)| x + delta * ui).collect();
        let probe = theta_set.project(&probe);
        let z = map.sample(&probe, rng).map_err(|source| BaselineError::Map {
            method: "dfo",
            iteration: 0,
            source,
        })?;
        let scale = loss.value(&z, &probe) * d as f64 / delta;
        for (gj, uj) in g.iter_mut().zip(&u) {
            *gj += scale * uj;
        }
    }
    g.iter_mut().for_each(|gj| *gj /= m as f64);
    Ok(g)
}

/// Derivative-free optimization with one-point gradient estimates.
///
/// Consumes exactly `opts.m * opts.iters` true samples.
pub fn dfo_run(
    map: &dyn TrueMap,
    loss: &dyn Loss,
    theta_set: &ThetaSet,
    opts: &DfoOptions,
    rng: &mut RngStream,
) -> Result<IterateTrace, BaselineError> {
    check_common(map, theta_set, opts.c0, opts.m, opts.iters)?;
    if !(opts.delta > 0.0 && opts.delta.is_finite()) {
        return Err(BaselineError::InvalidConfig(format!(
            "probe radius must be positive and finite, got {}",
            opts.delta
        )));
    }
    let mut trace = IterateTrace {
        hyperparams: BTreeMap::from([
            ("method".into(), "dfo".into()),
            ("c0".into(), format!("{}", opts.c0)),
            ("m".into(), format!("{}", opts.m)),
            ("delta".into(), format!("{}", opts.delta)),
            ("iters".into(), format!("{}", opts.iters)),
        ]),
        ..IterateTrace::default()
    };
    let mut theta = start_point(theta_set);
    for t in 0..opts.iters {
        let g = match dfo_gradient_estimate(
            map, loss, &theta, opts.delta, opts.m, theta_set, rng,
        ) {
            Ok(g) => g,
            Err(BaselineError::Map { method, source, .. }) => {
                return Err(BaselineError::Map {
                    method,
                    iteration: t,
                    source,
                })
            }
            Err(other) => return Err(other),
        };
        if g.iter().any(|v| !v.is_finite()) {
            trace.final_theta = theta;
            return Err(BaselineError::NonFinite {
                method: "dfo",
                iteration: t,
                trace: Box::new(trace),
            });
        }
        let eta = opts.c0 / (t + 1) as f64;
        let next: Vec<f64> = theta.iter().zip(&g).map(|(x, gj)| x - eta * gj).collect();
        theta = theta_set.project(&next);
        trace.steps.push(TraceStep {
            t,
            theta: theta.clone(),
            samples: ((t + 1) * opts.m) as u64,
            mode: StepMode::Performative,
        });
    }
    trace.final_theta = theta;
    Ok(trace)
}

/// Controls for [`greedy_sgd_run`].
#[derive(Clone, Copy, Debug)]
pub struct SgdOptions {
    pub c0: f64,
    pub m: usize,
    pub iters: usize,
}

impl Default for SgdOptions {
    fn default() -> Self {
        SgdOptions {
            c0: 1.0,
            m: 10,
            iters: 1_000,
        }
    }
}

/// Projected SGD on the loss gradient in `theta`, ignoring the
/// distribution's dependence on `theta` ("retraining"). Converges to the
/// performatively stable point rather than the optimum.
///
/// Consumes exactly `opts.m * opts.iters` true samples.
pub fn greedy_sgd_run(
    map: &dyn TrueMap,
    loss: &dyn Loss,
    theta_set: &ThetaSet,
    opts: &SgdOptions,
    rng: &mut RngStream,
) -> Result<IterateTrace, BaselineError> {
    check_common(map, theta_set, opts.c0, opts.m, opts.iters)?;
    let mut trace = IterateTrace {
        hyperparams: BTreeMap::from([
            ("method".into(), "greedy_sgd".into()),
            ("c0".into(), format!("{}", opts.c0)),
            ("m".into(), format!("{}", opts.m)),
            ("iters".into(), format!("{}", opts.iters)),
        ]),
        ..IterateTrace::default()
    };
    let mut theta = start_point(theta_set);
    for t in 0..opts.iters {
        let g = batch_theta_gradient(map, loss, &theta, opts.m, "greedy_sgd", t, rng)?;
        if g.iter().any(|v| !v.is_finite()) {
            trace.final_theta = theta;
            return Err(BaselineError::NonFinite {
                method: "greedy_sgd",
                iteration: t,
                trace: Box::new(trace),
            });
        }
        let eta = opts.c0 / (t + 1) as f64;
        let next: Vec<f64> = theta.iter().zip(&g).map(|(x, gj)| x - eta * gj).collect();
        theta = theta_set.project(&next);
        trace.steps.push(TraceStep {
            t,
            theta: theta.clone(),
            samples: ((t + 1) * opts.m) as u64,
            mode: StepMode::Greedy,
        });
    }
    trace.final_theta = theta;
    Ok(trace)
}

/// Mean loss gradient in `theta` over a fresh batch at `theta`.
fn batch_theta_gradient(
    map: &dyn TrueMap,
    loss: &dyn Loss,
    theta: &[f64],
    m: usize,
    method: &'static str,
    iteration: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>, BaselineError> {
    let mut acc = vec![0.0; theta.len()];
    for _ in 0..m {
        let z = map.sample(theta, rng).map_err(|source| BaselineError::Map {
            method,
            iteration,
            source,
        })?;
        let g = loss.grad_theta(&z, theta).ok_or(BaselineError::Unsupported {
            method,
            what: "a loss gradient in theta",
        })?;
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a += gi;
        }
    }
    acc.iter_mut().for_each(|a| *a /= m as f64);
    Ok(acc)
}

/// Controls for [`perfgd_run`].
#[derive(Clone, Copy, Debug)]
pub struct PerfGdOptions {
    pub c0: f64,
    pub m: usize,
    pub iters: usize,
    /// Noise scale used by the score-form performative term when the
    /// loss has no gradient in `z`.
    pub sigma_est: f64,
}

impl Default for PerfGdOptions {
    fn default() -> Self {
        PerfGdOptions {
            c0: 1.0,
            m: 10,
            iters: 1_000,
            sigma_est: 1.0,
        }
    }
}

/// PerfGD: greedy burn-in, then gradient steps augmented with a
/// finite-difference estimate of the map's mean-shift Jacobian.
///
/// The first `10 * d_theta` iterations are greedy SGD steps that seed a
/// history of `(theta_t, batch mean z_t)` pairs. Afterwards each step
/// regresses recent mean differences on parameter differences over a
/// sliding window of the last `d_theta + 1` distinct deployments (ridge
/// 1e-6) to estimate `J = df/dtheta`, and steps along
/// `E[grad_theta loss] + J^T E[grad_z loss]`. When the loss has no
/// gradient in `z`, the performative term uses the Gaussian score form
/// `E[loss * J^T (z - mean)] / sigma_est^2` instead. Windows whose
/// parameter differences are all tiny trigger a greedy fallback step,
/// flagged in the trace.
///
/// Consumes exactly `opts.m * opts.iters` true samples.
pub fn perfgd_run(
    map: &dyn TrueMap,
    loss: &dyn Loss,
    theta_set: &ThetaSet,
    opts: &PerfGdOptions,
    rng: &mut RngStream,
) -> Result<IterateTrace, BaselineError> {
    check_common(map, theta_set, opts.c0, opts.m, opts.iters)?;
    if !(opts.sigma_est > 0.0 && opts.sigma_est.is_finite()) {
        return Err(BaselineError::InvalidConfig(format!(
            "noise scale must be positive and finite, got {}",
            opts.sigma_est
        )));
    }
    let d = theta_set.dim();
    let d_z = map.obs_dim();
    let burn_in = 10 * d;
    let window = d + 1;
    let mut trace = IterateTrace {
        hyperparams: BTreeMap::from([
            ("method".into(), "perfgd".into()),
            ("c0".into(), format!("{}", opts.c0)),
            ("m".into(), format!("{}", opts.m)),
            ("iters".into(), format!("{}", opts.iters)),
            ("sigma_est".into(), format!("{}", opts.sigma_est)),
            ("burn_in".into(), format!("{burn_in}")),
            ("window".into(), format!("{window}")),
        ]),
        ..IterateTrace::default()
    };
    let mut theta = start_point(theta_set);
    // Deployment history: (theta, batch mean of z).
    let mut history: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();

    for t in 0..opts.iters {
        // One fresh batch at the current iterate, reused for every term.
        let mut batch = Vec::with_capacity(opts.m);
        for _ in 0..opts.m {
            let z = map.sample(&theta, rng).map_err(|source| BaselineError::Map {
                method: "perfgd",
                iteration: t,
                source,
            })?;
            batch.push(z);
        }
        let mut z_bar = vec![0.0; d_z];
        for z in &batch {
            for (a, zi) in z_bar.iter_mut().zip(z) {
                *a += zi;
            }
        }
        z_bar.iter_mut().for_each(|a| *a /= opts.m as f64);

        let mut grad_theta_mean = vec![0.0; d];
        for z in &batch {
            let g = loss
                .grad_theta(z, &theta)
                .ok_or(BaselineError::Unsupported {
                    method: "perfgd",
                    what: "a loss gradient in theta",
                })?;
            for (a, gi) in grad_theta_mean.iter_mut().zip(&g) {
                *a += gi;
            }
        }
        grad_theta_mean.iter_mut().for_each(|a| *a /= opts.m as f64);

        let mode;
        let mut g = grad_theta_mean;
        if t < burn_in {
            mode = StepMode::Greedy;
        } else {
            match estimate_jacobian(&history, window, d, d_z) {
                Some(jac) => {
                    add_performative_term(&mut g, &jac, &batch, &z_bar, loss, &theta, opts);
                    mode = StepMode::Performative;
                }
                None => {
                    mode = StepMode::FallbackGreedy;
                    trace.fallback_count += 1;
                }
            }
        }
        if g.iter().any(|v| !v.is_finite()) {
            trace.final_theta = theta;
            return Err(BaselineError::NonFinite {
                method: "perfgd",
                iteration: t,
                trace: Box::new(trace),
            });
        }
        history.push((theta.clone(), z_bar));
        let eta = opts.c0 / (t + 1) as f64;
        let next: Vec<f64> = theta.iter().zip(&g).map(|(x, gj)| x - eta * gj).collect();
        theta = theta_set.project(&next);
        trace.steps.push(TraceStep {
            t,
            theta: theta.clone(),
            samples: ((t + 1) * opts.m) as u64,
            mode,
        });
    }
    trace.final_theta = theta;
    Ok(trace)
}

/// Ridge regression of mean differences on parameter differences over
/// the last `window` distinct deployments. Returns the estimated
/// `d_z x d` Jacobian, or `None` when the differences cannot identify
/// one (too little history, or every difference tiny).
fn estimate_jacobian(
    history: &[(Vec<f64>, Vec<f64>)],
    window: usize,
    d: usize,
    d_z: usize,
) -> Option<DMatrix<f64>> {
    // Walk backwards collecting distinct deployments (newest first).
    let mut picked: Vec<&(Vec<f64>, Vec<f64>)> = Vec::with_capacity(window);
    for entry in history.iter().rev() {
        if picked
            .last()
            .is_none_or(|prev| prev.0 != entry.0)
        {
            picked.push(entry);
        }
        if picked.len() == window {
            break;
        }
    }
    if picked.len() < 2 {
        return None;
    }
    picked.reverse(); // chronological
    let mut a = DMatrix::<f64>::identity(d, d) * 1e-6;
    let mut b = DMatrix::<f64>::zeros(d_z, d);
    let mut max_dtheta = 0.0f64;
    for w in picked.windows(2) {
        let dtheta: Vec<f64> = w[1].0.iter().zip(&w[0].0).map(|(x, y)| x - y).collect();
        let dz: Vec<f64> = w[1].1.iter().zip(&w[0].1).map(|(x, y)| x - y).collect();
        max_dtheta = max_dtheta.max(norm2(&dtheta));
        let dt = DVector::from_column_slice(&dtheta);
        let dzv = DVector::from_column_slice(&dz);
        a.ger(1.0, &dt, &dt, 1.0);
        b.ger(1.0, &dzv, &dt, 1.0);
    }
    if max_dtheta < 1e-9 {
        return None;
    }
    // J = B A^{-1}; A is SPD thanks to the ridge.
    let chol = Cholesky::new(a)?;
    let solved = chol.solve(&b.transpose()); // d x d_z
    Some(solved.transpose())
}

/// Add the performative term to `g`: chain rule through the Jacobian
/// when the loss has a `z`-gradient, Gaussian score form otherwise.
fn add_performative_term(
    g: &mut [f64],
    jac: &DMatrix<f64>,
    batch: &[Vec<f64>],
    z_bar: &[f64],
    loss: &dyn Loss,
    theta: &[f64],
    opts: &PerfGdOptions,
) {
    let m = batch.len() as f64;
    let d_z = z_bar.len();
    let mut carrier = vec![0.0; d_z];
    let mut have_grad_z = true;
    for z in batch {
        match loss.grad_z(z, theta) {
            Some(gz) => {
                for (a, v) in carrier.iter_mut().zip(&gz) {
                    *a += v / m;
                }
            }
            None => {
                have_grad_z = false;
                break;
            }
        }
    }
    if !have_grad_z {
        // Score form: E[loss * (z - mean)] / sigma^2 estimates
        // J^T-carrier under the Gaussian location model.
        carrier.iter_mut().for_each(|a| *a = 0.0);
        for z in batch {
            let l = loss.value(z, theta);
            for (a, (zi, zb)) in carrier.iter_mut().zip(z.iter().zip(z_bar)) {
                *a += l * (zi - zb) / m;
            }
        }
        let s2 = opts.sigma_est * opts.sigma_est;
        carrier.iter_mut().for_each(|a| *a /= s2);
    }
    // g += J^T carrier.
    for (j, gj) in g.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, c) in carrier.iter().enumerate() {
            acc += jac[(i, j)] * c;
        }
        *gj += acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{LossKind, ParamBox, SquaredDistance};
    use crate::error::MapError;
    use crate::maps::CoinMap;
    use rand::Rng as _;

    /// Deterministic map: the observation is the deployed parameter.
    struct EchoMap {
        dim: usize,
    }

    impl TrueMap for EchoMap {
        fn theta_dim(&self) -> usize {
            self.dim
        }
        fn obs_dim(&self) -> usize {
            self.dim
        }
        fn sample(&self, theta: &[f64], _rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
            Ok(theta.to_vec())
        }
    }

    /// Loss `|z|^2`, independent of `theta`.
    struct NormSq;

    impl Loss for NormSq {
        fn value(&self, z: &[f64], _theta: &[f64]) -> f64 {
            z.iter().map(|v| v * v).sum()
        }
        fn kind(&self) -> LossKind {
            LossKind::Custom
        }
    }

    /// Static Gaussian map centered at a constant (no performativity).
    struct StaticGauss {
        center: f64,
        sigma: f64,
    }

    impl TrueMap for StaticGauss {
        fn theta_dim(&self) -> usize {
            1
        }
        fn obs_dim(&self) -> usize {
            1
        }
        fn sample(&self, _theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
            let n: f64 = rng.sample(rand_distr::StandardNormal);
            Ok(vec![self.center + self.sigma * n])
        }
    }

    /// Location map z ~ N(slope * theta, sigma^2), one-dimensional.
    struct ScalarLocation {
        slope: f64,
        sigma: f64,
    }

    impl TrueMap for ScalarLocation {
        fn theta_dim(&self) -> usize {
            1
        }
        fn obs_dim(&self) -> usize {
            1
        }
        fn sample(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
            let n: f64 = rng.sample(rand_distr::StandardNormal);
            Ok(vec![self.slope * theta[0] + self.sigma * n])
        }
    }

    #[test]
    fn one_point_estimator_is_unbiased_for_smoothed_quadratic() {
        // Risk |theta|^2 realized through a deterministic echo map; the
        // smoothed gradient at (0.5, 0) is (1, 0).
        let map = EchoMap { dim: 2 };
        let set = ThetaSet::unit_ball(2);
        let mut rng = RngStream::new(31, 0);
        let m = 1_000_000;
        let g = dfo_gradient_estimate(&map, &NormSq, &[0.5, 0.0], 0.01, m, &set, &mut rng)
            .unwrap();
        // Per-coordinate standard error of the estimator mean, measured
        // from the term magnitude: |term| <= (|theta|+delta)^2 * d/delta.
        // A direct bound: SE <= max|term| / sqrt(m) ~ 52/1000 = 0.052.
        let se = 52.0 / (m as f64).sqrt();
        assert!((g[0] - 1.0).abs() < 3.0 * se, "g = {g:?}");
        assert!(g[1].abs() < 3.0 * se, "g = {g:?}");
    }

    #[test]
    fn dfo_budget_is_exactly_m_times_iters() {
        let map = CoinMap::new(0.3, 0.1).unwrap();
        let counter = crate::core::SampleCounter::new();
        let counted = crate::core::CountingMap::new(&map, &counter);
        let set = ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap());
        let mut rng = RngStream::new(3, 0);
        let opts = DfoOptions {
            c0: 0.01,
            m: 7,
            delta: 0.1,
            iters: 23,
        };
        let trace = dfo_run(&counted, &SquaredDistance::new(), &set, &opts, &mut rng).unwrap();
        assert_eq!(counter.count(), 7 * 23);
        assert_eq!(trace.samples_consumed(), 7 * 23);
        assert!(trace
            .steps
            .windows(2)
            .all(|w| w[0].samples <= w[1].samples));
    }

    #[test]
    fn constant_loss_keeps_dfo_near_start() {
        // Constant loss: the estimator is mean-zero, so theta hovers
        // near the start point.
        struct ConstLoss;
        impl Loss for ConstLoss {
            fn value(&self, _z: &[f64], _theta: &[f64]) -> f64 {
                1.0
            }
            fn kind(&self) -> LossKind {
                LossKind::Custom
            }
        }
        let map = EchoMap { dim: 2 };
        let set = ThetaSet::unit_ball(2);
        let mut rng = RngStream::new(8, 0);
        let opts = DfoOptions {
            c0: 0.001,
            m: 5,
            delta: 0.5,
            iters: 500,
        };
        let trace = dfo_run(&map, &ConstLoss, &set, &opts, &mut rng).unwrap();
        let start = 1.0 / 2f64.sqrt();
        let drift = ((trace.final_theta[0] - start).powi(2)
            + (trace.final_theta[1] - start).powi(2))
        .sqrt();
        assert!(drift < 0.05, "drift = {drift}");
        assert!(trace
            .steps
            .iter()
            .all(|s| set.contains(&s.theta)));
    }

    #[test]
    fn sgd_converges_to_static_erm() {
        // No performativity: SGD minimizes E (z - theta)^2 at theta = c.
        let map = StaticGauss {
            center: 0.8,
            sigma: 0.3,
        };
        let set = ThetaSet::unit_ball(1);
        let mut rng = RngStream::new(21, 0);
        let opts = SgdOptions {
            c0: 1.0,
            m: 10,
            iters: 5_000,
        };
        let trace = greedy_sgd_run(&map, &SquaredDistance::new(), &set, &opts, &mut rng).unwrap();
        assert!(
            (trace.final_theta[0] - 0.8).abs() < 0.02,
            "theta = {}",
            trace.final_theta[0]
        );
    }

    #[test]
    fn sgd_on_coin_finds_the_stable_point_not_the_optimum() {
        // Retraining fixed point: theta = p(theta) -> 0.5/(1-0.3) = 5/7.
        let map = CoinMap::new(0.3, 0.0).unwrap();
        let set = ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap());
        let mut rng = RngStream::new(4, 0);
        let opts = SgdOptions {
            c0: 1.0,
            m: 10,
            iters: 10_000,
        };
        let trace = greedy_sgd_run(&map, &SquaredDistance::new(), &set, &opts, &mut rng).unwrap();
        let stable = 5.0 / 7.0;
        assert!(
            (trace.final_theta[0] - stable).abs() < 0.02,
            "theta = {} vs stable {stable}",
            trace.final_theta[0]
        );
        // Emphatically not the optimum 0.875.
        assert!((trace.final_theta[0] - 0.875).abs() > 0.1);
    }

    #[test]
    fn zero_step_constant_freezes_the_iterate() {
        let map = CoinMap::new(0.3, 0.0).unwrap();
        let set = ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap());
        let mut rng = RngStream::new(4, 0);
        let opts = SgdOptions {
            c0: 0.0,
            m: 2,
            iters: 50,
        };
        let trace = greedy_sgd_run(&map, &SquaredDistance::new(), &set, &opts, &mut rng).unwrap();
        assert!(trace.steps.iter().all(|s| s.theta == vec![1.0]));
        assert_eq!(trace.final_theta, vec![1.0]);
    }

    #[test]
    fn sgd_requires_a_theta_gradient() {
        let map = EchoMap { dim: 1 };
        let set = ThetaSet::unit_ball(1);
        let mut rng = RngStream::new(1, 0);
        let opts = SgdOptions::default();
        assert!(matches!(
            greedy_sgd_run(&map, &NormSq, &set, &opts, &mut rng),
            Err(BaselineError::Unsupported { what, .. }) if what.contains("theta")
        ));
    }

    #[test]
    fn perfgd_finds_the_optimum_of_a_scalar_location_map() {
        // z ~ N(0.5 theta, sigma^2): PR(theta) = 0.25 theta^2 + sigma^2,
        // minimized at theta* = 0.
        let map = ScalarLocation {
            slope: 0.5,
            sigma: 0.3,
        };
        let set = ThetaSet::unit_ball(1);
        let mut rng = RngStream::new(12, 0);
        let opts = PerfGdOptions {
            c0: 1.0,
            m: 20,
            iters: 4_000,
            sigma_est: 0.3,
        };
        let trace = perfgd_run(&map, &SquaredDistance::new(), &set, &opts, &mut rng).unwrap();
        assert!(
            trace.final_theta[0].abs() < 0.05,
            "theta = {}",
            trace.final_theta[0]
        );
        assert_eq!(trace.samples_consumed(), 20 * 4_000);
    }

    #[test]
    fn perfgd_burn_in_uses_greedy_steps() {
        let map = ScalarLocation {
            slope: 0.5,
            sigma: 0.3,
        };
        let set = ThetaSet::unit_ball(1);
        let mut rng = RngStream::new(13, 0);
        let opts = PerfGdOptions {
            c0: 0.5,
            m: 5,
            iters: 30,
            sigma_est: 0.3,
        };
        let trace = perfgd_run(&map, &SquaredDistance::new(), &set, &opts, &mut rng).unwrap();
        let burn_in = 10; // 10 * d_theta with d_theta = 1
        for step in &trace.steps[..burn_in] {
            assert_eq!(step.mode, StepMode::Greedy, "step {}", step.t);
        }
        assert!(trace.steps[burn_in..]
            .iter()
            .all(|s| s.mode != StepMode::Greedy));
    }

    #[test]
    fn perfgd_on_constant_map_tracks_greedy_sgd() {
        // f(theta) constant: the estimated Jacobian is MC noise around 0,
        // so PerfGD's iterates land where greedy SGD's do.
        let map = StaticGauss {
            center: 0.4,
            sigma: 0.2,
        };
        let set = ThetaSet::unit_ball(1);
        let loss = SquaredDistance::new();
        let mut rng = RngStream::new(30, 0);
        let p_opts = PerfGdOptions {
            c0: 1.0,
            m: 20,
            iters: 2_000,
            sigma_est: 0.2,
        };
        let perf = perfgd_run(&map, &loss, &set, &p_opts, &mut rng).unwrap();
        let mut rng = RngStream::new(30, 1);
        let s_opts = SgdOptions {
            c0: 1.0,
            m: 20,
            iters: 2_000,
        };
        let greedy = greedy_sgd_run(&map, &loss, &set, &s_opts, &mut rng).unwrap();
        assert!(
            (perf.final_theta[0] - greedy.final_theta[0]).abs() < 0.02,
            "perfgd {} vs greedy {}",
            perf.final_theta[0],
            greedy.final_theta[0]
        );
        assert!((perf.final_theta[0] - 0.4).abs() < 0.02);
        assert_eq!(perf.fallback_count, 0);
    }

    #[test]
    fn frozen_deployment_forces_greedy_fallback() {
        // c0 = 0 freezes theta, so every post-burn-in window is
        // degenerate and each step falls back to greedy.
        let map = StaticGauss {
            center: 0.4,
            sigma: 0.2,
        };
        let set = ThetaSet::unit_ball(1);
        let mut rng = RngStream::new(2, 0);
        let opts = PerfGdOptions {
            c0: 0.0,
            m: 2,
            iters: 25,
            sigma_est: 0.2,
        };
        let trace = perfgd_run(&map, &SquaredDistance::new(), &set, &opts, &mut rng).unwrap();
        assert_eq!(trace.fallback_count, 15, "25 iters minus 10 burn-in");
        assert!(trace.steps[10..]
            .iter()
            .all(|s| s.mode == StepMode::FallbackGreedy));
    }

    #[test]
    fn trace_csv_roundtrips_through_disk() {
        let map = CoinMap::new(0.3, 0.0).unwrap();
        let set = ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap());
        let mut rng = RngStream::new(4, 0);
        let opts = SgdOptions {
            c0: 1.0,
            m: 2,
            iters: 5,
        };
        let trace = greedy_sgd_run(&map, &SquaredDistance::new(), &set, &opts, &mut rng).unwrap();
        let path = std::env::temp_dir().join(format!("trace-{}.csv", std::process::id()));
        trace.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,theta_0,samples,mode\n"));
        assert_eq!(text.lines().count(), 6, "header plus five steps");
        std::fs::remove_file(&path).unwrap();
    }
}
