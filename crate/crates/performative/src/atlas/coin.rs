//! Linear-bias atlas for the coin: `D_beta(theta) = Bernoulli(1/2 + beta theta)`.
//!
//! This is the one-parameter family a learner would naturally posit for a
//! coin whose bias drifts with the deployed parameter. Against the
//! quadratic ground truth it is misspecified unless the quadratic
//! coefficient vanishes, which is exactly what makes the coin scenario a
//! sharp test of the plug-in approach. Under squared loss everything is
//! closed form, including the exact argmin of the modeled risk.

use crate::atlas::Atlas;
use crate::core::{Loss, LossKind, ParamBox, RngStream};
use crate::error::MapError;
use rand::Rng;

/// Largest admissible atlas coefficient: keeps `1/2 + beta * theta` a
/// probability on [0, 1] with a margin, and keeps the modeled risk's
/// stationary-point formula well defined.
pub const COIN_BETA_MAX: f64 = 0.5 - 1e-6;

fn validate_beta(beta: f64) -> Result<(), MapError> {
    if !(0.0..=COIN_BETA_MAX).contains(&beta) {
        return Err(MapError::DomainViolation(format!(
            "coin atlas coefficient must lie in [0, {COIN_BETA_MAX}], got {beta}"
        )));
    }
    Ok(())
}

fn validate_theta(theta: f64) -> Result<(), MapError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(MapError::DomainViolation(format!(
            "coin parameter must lie in [0, 1], got {theta}"
        )));
    }
    Ok(())
}

fn risk_unchecked(beta: f64, theta: f64) -> f64 {
    let p = 0.5 + beta * theta;
    p * (1.0 - 2.0 * theta) + theta * theta
}

/// Modeled performative risk of the linear-bias coin atlas under squared
/// loss: `p (1 - 2 theta) + theta^2` with `p = 1/2 + beta theta`.
pub fn coin_plug_in_risk(beta: f64, theta: f64) -> Result<f64, MapError> {
    validate_beta(beta)?;
    validate_theta(theta)?;
    Ok(risk_unchecked(beta, theta))
}

/// Exact minimizer over `theta in [0, 1]` of the modeled risk.
///
/// The risk is a convex parabola in `theta` with stationary point
/// `(1 - beta) / (2 - 4 beta)`. When that point lies in [0, 1] it is the
/// argmin; otherwise the better endpoint wins (ties go to 0).
pub fn coin_plug_in_argmin(beta: f64) -> Result<f64, MapError> {
    validate_beta(beta)?;
    let stationary = (1.0 - beta) / (2.0 - 4.0 * beta);
    if (0.0..=1.0).contains(&stationary) {
        return Ok(stationary);
    }
    let at_zero = risk_unchecked(beta, 0.0);
    let at_one = risk_unchecked(beta, 1.0);
    Ok(if at_one < at_zero { 1.0 } else { 0.0 })
}

/// The linear-bias coin atlas.
#[derive(Clone, Copy, Debug, Default)]
pub struct CoinAtlas;

impl CoinAtlas {
    pub fn new() -> Self {
        CoinAtlas
    }
}

impl Atlas for CoinAtlas {
    fn beta_dim(&self) -> usize {
        1
    }

    fn theta_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn beta_box(&self) -> ParamBox {
        ParamBox::interval(0.0, COIN_BETA_MAX).expect("static bounds")
    }

    fn sample(
        &self,
        beta: &[f64],
        theta: &[f64],
        rng: &mut RngStream,
    ) -> Result<Vec<f64>, MapError> {
        if beta.len() != 1 || theta.len() != 1 {
            return Err(MapError::ThetaDimension {
                expected: 1,
                got: theta.len().max(beta.len()),
            });
        }
        validate_beta(beta[0])?;
        validate_theta(theta[0])?;
        let p = 0.5 + beta[0] * theta[0];
        let u: f64 = rng.gen();
        Ok(vec![if u < p { 1.0 } else { 0.0 }])
    }

    fn closed_form_risk(&self, beta: &[f64], theta: &[f64], loss: &dyn Loss) -> Option<f64> {
        if loss.kind() != LossKind::SquaredDistance {
            return None;
        }
        Some(risk_unchecked(beta[0], theta[0]))
    }

    fn closed_form_risk_grad(
        &self,
        beta: &[f64],
        theta: &[f64],
        loss: &dyn Loss,
    ) -> Option<Vec<f64>> {
        if loss.kind() != LossKind::SquaredDistance {
            return None;
        }
        let (b, t) = (beta[0], theta[0]);
        Some(vec![b - 4.0 * b * t + 2.0 * t - 1.0])
    }

    fn name(&self) -> &'static str {
        "coin"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::SquaredDistance;
    use crate::linalg::{fd_grad, grad_rel_err};
    use rand::Rng;

    #[test]
    fn risk_known_value() {
        // beta = 0.3, theta = 0.875: p = 0.7625, risk = 0.19375.
        let r = coin_plug_in_risk(0.3, 0.875).unwrap();
        assert!((r - 0.19375).abs() < 1e-15);
    }

    #[test]
    fn risk_rejects_out_of_domain() {
        assert!(coin_plug_in_risk(0.5, 0.5).is_err());
        assert!(coin_plug_in_risk(-0.01, 0.5).is_err());
        assert!(coin_plug_in_risk(0.3, 1.01).is_err());
    }

    #[test]
    fn argmin_interior_case() {
        // beta = 0.3: stationary point 0.7 / 0.8 = 0.875, inside [0, 1].
        let t = coin_plug_in_argmin(0.3).unwrap();
        assert!((t - 0.875).abs() < 1e-15);
    }

    #[test]
    fn argmin_endpoint_case() {
        // beta = 0.45: stationary point 2.75 is outside [0, 1]; the risk
        // decreases across the interval, so the argmin is 1.
        let t = coin_plug_in_argmin(0.45).unwrap();
        assert_eq!(t, 1.0);
    }

    #[test]
    fn argmin_beats_fine_grid() {
        for k in 0..50 {
            let beta = k as f64 / 50.0 * COIN_BETA_MAX;
            let t = coin_plug_in_argmin(beta).unwrap();
            let best = coin_plug_in_risk(beta, t).unwrap();
            for j in 0..=1000 {
                let u = j as f64 / 1000.0;
                assert!(coin_plug_in_risk(beta, u).unwrap() >= best - 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_grad_matches_fd() {
        let atlas = CoinAtlas::new();
        let loss = SquaredDistance::new();
        let mut rng = RngStream::new(6, 0);
        for _ in 0..100 {
            let beta = rng.gen_range(0.0..COIN_BETA_MAX);
            let theta = rng.gen_range(0.05..0.95);
            let g = atlas
                .closed_form_risk_grad(&[beta], &[theta], &loss)
                .unwrap();
            let f = |t: &[f64]| risk_unchecked(beta, t[0]);
            let fd = fd_grad(&f, &[theta], 1e-6);
            assert!(grad_rel_err(&g, &fd) <= 1e-5);
        }
    }

    #[test]
    fn sample_law_matches_bias() {
        let atlas = CoinAtlas::new();
        let mut rng = RngStream::new(13, 0);
        let n = 20_000;
        let mean = (0..n)
            .map(|_| atlas.sample(&[0.4], &[0.5], &mut rng).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.7).abs() < 0.015, "mean = {mean}");
    }
}
