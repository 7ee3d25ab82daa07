//! Empirical risk minimization for atlases without a closed-form fit.
//!
//! An [`ErmObjective`] scores one (parameter, observation) pair at a
//! candidate atlas parameter; [`fit_erm_projected_gd`] minimizes the
//! sample mean of that score over the atlas's feasible box by projected
//! gradient descent. [`AffineMomentObjective`] covers the common case
//! where a moment of the observation is affine in a scalar atlas
//! parameter (mixture weights, label-flip rates, outcome shifts).

use crate::core::{Dataset, ParamBox};
use crate::descent::{projected_descent, DescentOptions, StopReason};
use crate::error::FitError;
use crate::linalg::dot;
use crate::mapfit::{BetaHat, FitResult};

/// Per-pair fitting objective, differentiable in the atlas parameter.
pub trait ErmObjective: Send + Sync {
    /// Dimension of the atlas parameter being fitted.
    fn beta_dim(&self) -> usize;

    /// Score of one (deployed parameter, observation) pair at `beta`.
    fn value(&self, theta: &[f64], z: &[f64], beta: &[f64]) -> f64;

    /// Gradient of [`ErmObjective::value`] in `beta`.
    fn grad_beta(&self, theta: &[f64], z: &[f64], beta: &[f64]) -> Vec<f64>;
}

/// Stopping controls for the ERM descent.
#[derive(Clone, Copy, Debug)]
pub struct ErmOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub armijo: f64,
}

impl Default for ErmOptions {
    fn default() -> Self {
        ErmOptions {
            tol: 1e-8,
            max_iters: 10_000,
            armijo: 1e-4,
        }
    }
}

/// Fit an atlas parameter by minimizing the mean objective over `data`
/// with projected gradient descent on `beta_box`, starting from the box
/// center.
pub fn fit_erm_projected_gd(
    data: &Dataset,
    objective: &dyn ErmObjective,
    beta_box: &ParamBox,
    opts: &ErmOptions,
) -> Result<FitResult, FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    if beta_box.dim() != objective.beta_dim() {
        return Err(FitError::InvalidConfig(format!(
            "feasible box has dimension {}, objective expects {}",
            beta_box.dim(),
            objective.beta_dim()
        )));
    }
    // Box midpoint, which degrades gracefully for half-open or unbounded
    // boxes (finite bound, or 0).
    let start = beta_box.center();
    let n = data.len() as f64;
    let mean_value = |beta: &[f64]| -> f64 {
        data.pairs
            .iter()
            .map(|(t, z)| objective.value(t, z, beta))
            .sum::<f64>()
            / n
    };
    let mean_grad = |beta: &[f64]| -> Vec<f64> {
        let mut acc = vec![0.0; beta.len()];
        for (t, z) in &data.pairs {
            let g = objective.grad_beta(t, z, beta);
            for (a, gi) in acc.iter_mut().zip(&g) {
                *a += gi;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    };
    let project = |beta: &[f64]| beta_box.project(beta);
    let descent_opts = DescentOptions {
        tol: opts.tol,
        max_iters: opts.max_iters,
        armijo: opts.armijo,
    };
    let report = projected_descent(&mean_value, &mean_grad, &project, &start, &descent_opts)
        .map_err(|e| FitError::NonFinite {
            what: e.what,
            iteration: e.iteration,
            iterate: e.iterate,
        })?;
    let clamped = report
        .x
        .iter()
        .zip(beta_box.lo().iter().zip(beta_box.hi()))
        .any(|(b, (lo, hi))| b <= lo || b >= hi);
    let mut result = FitResult {
        beta: BetaHat::Vector(report.x),
        objective: report.value,
        iterations: report.iterations,
        clamped,
        diagnostics: Default::default(),
    };
    result.diagnostics.insert(
        "stop_reason".into(),
        match report.reason {
            StopReason::Stationary => "stationary".into(),
            StopReason::Stalled => "stalled".into(),
            StopReason::MaxIters => "max_iters".into(),
        },
    );
    result
        .diagnostics
        .insert("stationarity".into(), format!("{:.3e}", report.stationarity));
    result.diagnostics.insert("n".into(), format!("{}", data.len()));
    Ok(result)
}

/// Squared-residual objective for moments that are affine in a scalar
/// atlas parameter: the model says
/// `target(theta, z) ~= offset(theta, z) + beta * slope(theta, z)`,
/// and the pair score is the squared residual norm.
///
/// The three closures and matching use cases:
/// mixture weight (target = observed features, offset = second
/// component's mean, slope = mean difference), label-flip rate (target =
/// observed label, offset = base label mean, slope = predictor minus base
/// mean), outcome shift (target = observed outcome, offset = base
/// outcome, slope = predictor score).
pub struct AffineMomentObjective {
    pub target: Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
    pub offset: Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
    pub slope: Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
}

impl AffineMomentObjective {
    fn residual(&self, theta: &[f64], z: &[f64], beta: f64) -> Vec<f64> {
        let t = (self.target)(theta, z);
        let o = (self.offset)(theta, z);
        let s = (self.slope)(theta, z);
        t.iter()
            .zip(o.iter().zip(&s))
            .map(|(ti, (oi, si))| ti - oi - beta * si)
            .collect()
    }
}

impl ErmObjective for AffineMomentObjective {
    fn beta_dim(&self) -> usize {
        1
    }

    fn value(&self, theta: &[f64], z: &[f64], beta: &[f64]) -> f64 {
        let r = self.residual(theta, z, beta[0]);
        dot(&r, &r)
    }

    fn grad_beta(&self, theta: &[f64], z: &[f64], beta: &[f64]) -> Vec<f64> {
        let r = self.residual(theta, z, beta[0]);
        let s = (self.slope)(theta, z);
        vec![-2.0 * dot(&r, &s)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{deploy_and_collect, Exploration, RngStream, ThetaSet};
    use crate::mapfit::fit_coin_ls;
    use crate::maps::CoinMap;

    fn coin_objective() -> AffineMomentObjective {
        AffineMomentObjective {
            target: Box::new(|_t, z| vec![z[0]]),
            offset: Box::new(|_t, _z| vec![0.5]),
            slope: Box::new(|t, _z| vec![t[0]]),
        }
    }

    #[test]
    fn erm_agrees_with_closed_form_coin_fit() {
        let map = CoinMap::new(0.3, 0.1).unwrap();
        let expl = Exploration::Uniform(ThetaSet::Box(
            crate::core::ParamBox::interval(0.0, 1.0).unwrap(),
        ));
        let mut rng = RngStream::new(42, 0);
        let data = deploy_and_collect(&map, &expl, 5_000, &mut rng).unwrap();
        let closed = fit_coin_ls(&data).unwrap().beta.scalar().unwrap();
        let beta_box =
            ParamBox::interval(0.0, crate::atlas::COIN_BETA_MAX).unwrap();
        let erm = fit_erm_projected_gd(
            &data,
            &coin_objective(),
            &beta_box,
            &ErmOptions::default(),
        )
        .unwrap();
        let beta = erm.beta.scalar().unwrap();
        assert!((beta - closed).abs() < 1e-6, "erm {beta} vs closed {closed}");
        assert_eq!(erm.diagnostics["stop_reason"], "stationary");
    }

    #[test]
    fn affine_moment_fit_recovers_planted_coefficient() {
        // Noiseless affine moment: target = 1 + 0.3 * slope, slope = theta.
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (1..=40)
            .map(|i| {
                let t = i as f64 / 40.0;
                (vec![t], vec![1.0 + 0.3 * t])
            })
            .collect();
        let data = Dataset {
            pairs,
            seed: 0,
            stream: 0,
            theta_dim: 1,
            obs_dim: 1,
        };
        let objective = AffineMomentObjective {
            target: Box::new(|_t, z| vec![z[0]]),
            offset: Box::new(|_t, _z| vec![1.0]),
            slope: Box::new(|t, _z| vec![t[0]]),
        };
        let beta_box = ParamBox::interval(0.0, 1.0).unwrap();
        let fit =
            fit_erm_projected_gd(&data, &objective, &beta_box, &ErmOptions::default()).unwrap();
        let beta = fit.beta.scalar().unwrap();
        assert!((beta - 0.3).abs() < 1e-7, "beta = {beta}");
        assert!(fit.objective < 1e-14);
        assert!(!fit.clamped);
    }

    #[test]
    fn erm_handles_unbounded_boxes_and_rejects_dim_mismatch() {
        // One pair (theta = 0.5, z = 1): residual (0.5 - 0.5 beta)^2 is
        // minimized at beta = 1, reachable from the unbounded box's
        // fallback start at 0.
        let data = Dataset {
            pairs: vec![(vec![0.5], vec![1.0])],
            seed: 0,
            stream: 0,
            theta_dim: 1,
            obs_dim: 1,
        };
        let unbounded =
            ParamBox::new(vec![f64::NEG_INFINITY], vec![f64::INFINITY]).unwrap();
        let fit =
            fit_erm_projected_gd(&data, &coin_objective(), &unbounded, &ErmOptions::default())
                .unwrap();
        assert!((fit.beta.scalar().unwrap() - 1.0).abs() < 1e-6);
        let wrong_dim = ParamBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            fit_erm_projected_gd(&data, &coin_objective(), &wrong_dim, &ErmOptions::default()),
            Err(FitError::InvalidConfig(_))
        ));
    }
}
