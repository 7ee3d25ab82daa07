//! The optimize step: minimizing the modeled risk over the parameter set.
//!
//! [`plug_in_optimize_gd`] descends the atlas's closed-form modeled risk
//! with multi-start projected gradient descent — zero ground-truth
//! samples, since the model is a formula. [`plug_in_optimize_sampled`]
//! covers atlases without a closed form by zeroth-order search over
//! synthetic atlas draws, still free of ground-truth cost.
//! [`oracle`] holds the reference optimizer for the *true* map, used only
//! for scoring.

pub mod oracle;

use crate::atlas::{atlas_plug_in_risk_mc, Atlas};
use crate::baselines::{dfo_run, DfoOptions};
use crate::core::{Loss, RngStream, ThetaSet, TrueMap};
use crate::descent::{projected_descent, DescentOptions, StopReason};
use crate::error::{BaselineError, MapError, OptimizeError};

/// Controls for the closed-form plug-in optimizer.
#[derive(Clone, Copy, Debug)]
pub struct GdOptions {
    /// Extra uniform starts beyond the set's center.
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub armijo: f64,
}

impl Default for GdOptions {
    fn default() -> Self {
        GdOptions {
            restarts: 5,
            max_iters: 10_000,
            tol: 1e-8,
            armijo: 1e-4,
        }
    }
}

/// Outcome of a plug-in optimization run.
#[derive(Clone, Debug)]
pub struct OptimizeReport {
    /// Minimizer of the modeled risk over the parameter set.
    pub theta: Vec<f64>,
    /// Modeled risk at `theta` (exact for the closed-form path, a fresh
    /// Monte-Carlo estimate for the sampled path).
    pub risk: f64,
    /// Total descent/search iterations across all starts.
    pub iterations: usize,
    /// Projected-gradient displacement at the winning iterate
    /// (`None` for the sampled path, which has no gradient).
    pub stationarity: Option<f64>,
    /// Whether the winning start passed the stationarity test.
    pub converged: bool,
    /// Extra starts actually used.
    pub restarts: usize,
}

/// Minimize the atlas's closed-form modeled risk at `beta` over
/// `theta_set` by projected gradient descent from the set center plus
/// `opts.restarts` uniform starts.
///
/// Starts are drawn sequentially from `rng`, so a run with more restarts
/// explores a superset of the starts of a run with fewer (same stream),
/// and its best value can only be at least as good.
pub fn plug_in_optimize_gd(
    atlas: &dyn Atlas,
    beta: &[f64],
    loss: &dyn Loss,
    theta_set: &ThetaSet,
    opts: &GdOptions,
    rng: &mut RngStream,
) -> Result<OptimizeReport, OptimizeError> {
    if opts.max_iters == 0 || !(opts.tol > 0.0) {
        return Err(OptimizeError::InvalidConfig(
            "need max_iters >= 1 and tol > 0".into(),
        ));
    }
    if theta_set.dim() != atlas.theta_dim() {
        return Err(OptimizeError::InvalidConfig(format!(
            "parameter set dimension {} does not match atlas dimension {}",
            theta_set.dim(),
            atlas.theta_dim()
        )));
    }
    let probe = theta_set.center();
    if atlas.closed_form_risk(beta, &probe, loss).is_none()
        || atlas.closed_form_risk_grad(beta, &probe, loss).is_none()
    {
        return Err(OptimizeError::NoClosedForm(atlas.name()));
    }
    // Availability is static in (atlas, loss); a `None` after the probe
    // check would be a broken atlas, surfaced as a non-finite value.
    let d = theta_set.dim();
    let f = |theta: &[f64]| {
        atlas
            .closed_form_risk(beta, theta, loss)
            .unwrap_or(f64::NAN)
    };
    let grad = |theta: &[f64]| {
        atlas
            .closed_form_risk_grad(beta, theta, loss)
            .unwrap_or_else(|| vec![f64::NAN; d])
    };
    let project = |theta: &[f64]| theta_set.project(theta);
    let descent_opts = DescentOptions {
        tol: opts.tol,
        max_iters: opts.max_iters,
        armijo: opts.armijo,
    };

    let mut starts = vec![theta_set.center()];
    for _ in 0..opts.restarts {
        starts.push(theta_set.sample_uniform(rng));
    }

    let mut best: Option<OptimizeReport> = None;
    let mut total_iterations = 0;
    for start in &starts {
        let report = projected_descent(&f, &grad, &project, start, &descent_opts).map_err(
            |e| OptimizeError::NonFinite {
                what: e.what,
                iteration: e.iteration,
            },
        )?;
        total_iterations += report.iterations;
        let better = best.as_ref().is_none_or(|b| report.value < b.risk);
        if better {
            best = Some(OptimizeReport {
                theta: report.x,
                risk: report.value,
                iterations: 0,
                stationarity: Some(report.stationarity),
                converged: report.reason == StopReason::Stationary,
                restarts: opts.restarts,
            });
        }
    }
    let mut best = best.expect("at least the center start ran");
    best.iterations = total_iterations;
    Ok(best)
}

/// Controls for the sampling-based plug-in optimizer.
#[derive(Clone, Copy, Debug)]
pub struct SampledOptions {
    /// Zeroth-order search iterations.
    pub iters: usize,
    /// Synthetic atlas draws per probe.
    pub m_synthetic: usize,
    /// Step-size constant; the step at iteration `t` is `c0 / (t + 1)`,
    /// scaled by the parameter set's extent.
    pub c0: f64,
    /// Probe radius, scaled by the parameter set's extent.
    pub delta: f64,
    /// Synthetic draws for the final risk estimate.
    pub m_final: usize,
}

impl Default for SampledOptions {
    fn default() -> Self {
        SampledOptions {
            iters: 2_000,
            m_synthetic: 20,
            c0: 0.1,
            delta: 0.1,
            m_final: 10_000,
        }
    }
}

/// The atlas at a fixed `beta`, viewed as a distribution map. Lets the
/// shared zeroth-order routine search the *modeled* risk; every draw it
/// makes is synthetic, so the ground-truth sample ledger is untouched.
struct ModeledMap<'a> {
    atlas: &'a dyn Atlas,
    beta: &'a [f64],
}

impl TrueMap for ModeledMap<'_> {
    fn theta_dim(&self) -> usize {
        self.atlas.theta_dim()
    }

    fn obs_dim(&self) -> usize {
        self.atlas.obs_dim()
    }

    fn sample(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
        self.atlas.sample(self.beta, theta, rng)
    }
}

/// Minimize the modeled risk by running the one-point zeroth-order
/// routine (`baselines::dfo_run`) against synthetic atlas draws — for
/// atlases without a closed form.
///
/// Step and probe scales are `opts.c0` and `opts.delta` times the
/// parameter set's extent; the search spends `iters * m_synthetic`
/// synthetic draws plus `m_final` for the fresh risk estimate at the
/// winner. The ground-truth ledger is untouched throughout.
pub fn plug_in_optimize_sampled(
    atlas: &dyn Atlas,
    beta: &[f64],
    loss: &dyn Loss,
    theta_set: &ThetaSet,
    opts: &SampledOptions,
    rng: &mut RngStream,
) -> Result<OptimizeReport, OptimizeError> {
    if opts.iters == 0 || opts.m_synthetic == 0 || opts.m_final < 2 {
        return Err(OptimizeError::InvalidConfig(
            "need iters >= 1, m_synthetic >= 1, m_final >= 2".into(),
        ));
    }
    if !(opts.c0 > 0.0 && opts.delta > 0.0) {
        return Err(OptimizeError::InvalidConfig(
            "step and probe scales must be positive".into(),
        ));
    }
    if theta_set.dim() != atlas.theta_dim() {
        return Err(OptimizeError::InvalidConfig(format!(
            "parameter set dimension {} does not match atlas dimension {}",
            theta_set.dim(),
            atlas.theta_dim()
        )));
    }
    let scale = theta_set.scale();
    let modeled = ModeledMap { atlas, beta };
    let dfo_opts = DfoOptions {
        c0: opts.c0 * scale,
        m: opts.m_synthetic,
        delta: opts.delta * scale,
        iters: opts.iters,
    };
    let trace = dfo_run(&modeled, loss, theta_set, &dfo_opts, rng).map_err(|e| match e {
        BaselineError::Map { source, .. } => OptimizeError::Atlas(source),
        BaselineError::NonFinite { iteration, .. } => OptimizeError::NonFinite {
            what: "synthetic risk probe",
            iteration,
        },
        BaselineError::InvalidConfig(msg) => OptimizeError::InvalidConfig(msg),
        BaselineError::Unsupported { .. } => OptimizeError::InvalidConfig(e.to_string()),
    })?;
    let theta = trace.final_theta;
    let (risk, _se) = atlas_plug_in_risk_mc(atlas, beta, &theta, loss, opts.m_final, rng)
        .map_err(|e| match e {
            crate::error::MetricError::Map(m) => OptimizeError::Atlas(m),
            _ => OptimizeError::InvalidConfig("final risk estimate failed".into()),
        })?;
    Ok(OptimizeReport {
        theta,
        risk,
        iterations: opts.iters,
        stationarity: None,
        converged: false,
        restarts: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{coin_plug_in_argmin, CoinAtlas, LocationAtlas};
    use crate::core::SquaredDistance;
    use crate::core::{ParamBox, RngStream, ThetaSet};

    #[test]
    fn coin_gd_matches_closed_form_argmin() {
        let atlas = CoinAtlas;
        let loss = SquaredDistance::new();
        let set = ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap());
        for &beta in &[0.1, 0.2, 0.3, 0.45] {
            let mut rng = RngStream::new(11, 0);
            let report = plug_in_optimize_gd(
                &atlas,
                &[beta],
                &loss,
                &set,
                &GdOptions::default(),
                &mut rng,
            )
            .unwrap();
            let exact = coin_plug_in_argmin(beta).unwrap();
            assert!(
                (report.theta[0] - exact).abs() < 1e-6,
                "beta {beta}: gd {} vs exact {exact}",
                report.theta[0]
            );
            assert!(report.converged);
        }
    }

    #[test]
    fn more_restarts_never_worse_on_shared_stream() {
        // Starts are drawn sequentially, so the start set grows with the
        // restart count and the best value is monotone.
        let atlas = CoinAtlas;
        let loss = SquaredDistance::new();
        let set = ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap());
        let mut last = f64::INFINITY;
        for restarts in [0usize, 1, 2, 5] {
            let mut rng = RngStream::new(77, 3);
            let opts = GdOptions {
                restarts,
                ..GdOptions::default()
            };
            let report =
                plug_in_optimize_gd(&atlas, &[0.3], &loss, &set, &opts, &mut rng).unwrap();
            assert!(
                report.risk <= last + 1e-15,
                "restarts {restarts}: {} > {last}",
                report.risk
            );
            last = report.risk;
        }
    }

    #[test]
    fn location_gd_finds_unconstrained_fixed_point_inside_ball() {
        // Modeled risk |b + M theta - theta|^2 with M = 0.5 I, b = (0.2, 0.1):
        // minimized where (M - I) theta = -b, i.e. theta = (0.4, 0.2).
        let atlas = LocationAtlas::new(2, 2, None, true, 0.0).unwrap();
        let beta = vec![0.5, 0.0, 0.0, 0.5, 0.2, 0.1]; // M column-major, then b
        let loss = SquaredDistance::new();
        let set = ThetaSet::unit_ball(2);
        let mut rng = RngStream::new(5, 0);
        let report =
            plug_in_optimize_gd(&atlas, &beta, &loss, &set, &GdOptions::default(), &mut rng)
                .unwrap();
        assert!((report.theta[0] - 0.4).abs() < 1e-6, "{:?}", report.theta);
        assert!((report.theta[1] - 0.2).abs() < 1e-6);
        assert!(report.risk.abs() < 1e-10);
    }

    #[test]
    fn gd_requires_a_closed_form() {
        // Logistic loss has no closed form under the coin atlas.
        let atlas = CoinAtlas;
        let loss = crate::core::LogisticRidge::new(0.1);
        let set = ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap());
        let mut rng = RngStream::new(1, 0);
        match plug_in_optimize_gd(
            &atlas,
            &[0.3],
            &loss,
            &set,
            &GdOptions::default(),
            &mut rng,
        ) {
            Err(OptimizeError::NoClosedForm(name)) => assert_eq!(name, "coin"),
            other => panic!("expected NoClosedForm, got {other:?}"),
        }
    }

    #[test]
    fn sampled_optimizer_approaches_coin_argmin() {
        // Synthetic draws are free, so the budget is generous: 20k search
        // iterations at 50 draws each. The step constant (2.0 x extent
        // 0.5 = 1.0) clears the stability threshold 1/(2 f'') = 0.625 for
        // the modeled risk's curvature f'' = 0.8, and the probe radius
        // 0.1 keeps one-point noise small without touching the boundary.
        let atlas = CoinAtlas;
        let loss = SquaredDistance::new();
        let set = ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap());
        let mut rng = RngStream::new(2024, 0);
        let opts = SampledOptions {
            iters: 20_000,
            m_synthetic: 50,
            c0: 2.0,
            delta: 0.2,
            ..SampledOptions::default()
        };
        let report =
            plug_in_optimize_sampled(&atlas, &[0.3], &loss, &set, &opts, &mut rng).unwrap();
        let exact = coin_plug_in_argmin(0.3).unwrap();
        assert!(
            (report.theta[0] - exact).abs() < 0.02,
            "sampled {} vs exact {exact}",
            report.theta[0]
        );
        assert!(report.stationarity.is_none());
        assert!(report.risk.is_finite());
    }

    #[test]
    fn bad_options_rejected() {
        let atlas = CoinAtlas;
        let loss = SquaredDistance::new();
        let set = ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap());
        let mut rng = RngStream::new(1, 0);
        let opts = GdOptions {
            max_iters: 0,
            ..GdOptions::default()
        };
        assert!(matches!(
            plug_in_optimize_gd(&atlas, &[0.3], &loss, &set, &opts, &mut rng),
            Err(OptimizeError::InvalidConfig(_))
        ));
        let opts = SampledOptions {
            m_final: 1,
            ..SampledOptions::default()
        };
        assert!(matches!(
            plug_in_optimize_sampled(&atlas, &[0.3], &loss, &set, &opts, &mut rng),
            Err(OptimizeError::InvalidConfig(_))
        ));
    }
}
