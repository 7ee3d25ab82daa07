//! Atlases: parametric families of candidate distribution maps.
//!
//! An atlas is the learner's model class for the unknown map — a family
//! `{ D_beta(theta) }` indexed by a finite-dimensional parameter `beta`.
//! The plug-in pipeline fits `beta` from deployment data and then
//! minimizes the *modeled* risk `theta -> E_{z ~ D_beta(theta)} l(z; theta)`,
//! never touching the ground truth again.
//!
//! Every atlas can sample; where the modeled risk has a closed form for a
//! given loss (coin, location, linear-response regression) it is exposed
//! through [`Atlas::closed_form_risk`] so optimizers can descend exactly.
//! [`atlas_plug_in_risk_mc`] is the sampling fallback for everything else.

mod aux;
mod coin;
mod location;
mod strat_class;
mod strat_reg;

pub use aux::{LinearScore, MixtureAtlas, OutcomesAtlas, Predictor, ProphecyAtlas, ThresholdScore};
pub use coin::{coin_plug_in_argmin, coin_plug_in_risk, CoinAtlas, COIN_BETA_MAX};
pub use location::{location_atlas_risk, location_atlas_risk_grad, LocationAtlas};
pub use strat_class::StratClassAtlas;
pub use strat_reg::{strat_reg_atlas_response, LinearUtility, StratRegAtlas, Utility};

use crate::core::{Loss, ParamBox, RngStream};
use crate::error::{MapError, MetricError};

/// A fitted-map family: sampler plus optional closed-form modeled risk.
pub trait Atlas: Send + Sync {
    /// Dimension of the atlas parameter `beta`.
    fn beta_dim(&self) -> usize;

    /// Dimension of the deployable parameter.
    fn theta_dim(&self) -> usize;

    /// Dimension of one observation.
    fn obs_dim(&self) -> usize;

    /// Feasible domain for `beta`; fitters clamp into this box.
    fn beta_box(&self) -> ParamBox;

    /// Draw one observation from the modeled map `D_beta(theta)`.
    fn sample(&self, beta: &[f64], theta: &[f64], rng: &mut RngStream)
        -> Result<Vec<f64>, MapError>;

    /// Modeled performative risk at `(beta, theta)`, when a closed form
    /// exists for this loss. `None` means "use Monte Carlo".
    fn closed_form_risk(&self, _beta: &[f64], _theta: &[f64], _loss: &dyn Loss) -> Option<f64> {
        None
    }

    /// Gradient in `theta` of the closed-form modeled risk, when available.
    fn closed_form_risk_grad(
        &self,
        _beta: &[f64],
        _theta: &[f64],
        _loss: &dyn Loss,
    ) -> Option<Vec<f64>> {
        None
    }

    /// Short identifier used in errors and diagnostics.
    fn name(&self) -> &'static str;
}

/// Monte-Carlo estimate of the modeled risk: mean loss over `m >= 2`
/// synthetic draws, with its standard error.
pub fn atlas_plug_in_risk_mc(
    atlas: &dyn Atlas,
    beta: &[f64],
    theta: &[f64],
    loss: &dyn Loss,
    m: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64), MetricError> {
    if m < 2 {
        return Err(MetricError::TooFewSamples { need: 2, got: m });
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..m {
        let z = atlas.sample(beta, theta, rng)?;
        let v = loss.value(&z, theta);
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (m - 1) as f64;
    Ok((mean, (var / m as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::SquaredDistance;

    #[test]
    fn mc_risk_needs_two_draws() {
        let atlas = CoinAtlas::new();
        let loss = SquaredDistance::new();
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(
            atlas_plug_in_risk_mc(&atlas, &[0.3], &[0.5], &loss, 1, &mut rng),
            Err(MetricError::TooFewSamples { .. })
        ));
        let (mean, se) =
            atlas_plug_in_risk_mc(&atlas, &[0.3], &[0.5], &loss, 2, &mut rng).unwrap();
        assert!(mean.is_finite() && se.is_finite());
    }

    #[test]
    fn mc_risk_agrees_with_closed_form() {
        let atlas = CoinAtlas::new();
        let loss = SquaredDistance::new();
        let mut rng = RngStream::new(40, 0);
        for &(beta, theta) in &[(0.1, 0.2), (0.3, 0.875), (0.45, 1.0), (0.0, 0.6)] {
            let exact = atlas.closed_form_risk(&[beta], &[theta], &loss).unwrap();
            let (mc, se) =
                atlas_plug_in_risk_mc(&atlas, &[beta], &[theta], &loss, 40_000, &mut rng)
                    .unwrap();
            assert!(
                (mc - exact).abs() <= 3.0 * se + 1e-12,
                "beta={beta} theta={theta}: mc={mc} exact={exact} se={se}"
            );
        }
    }
}
