//! Budgeted-response atlas for strategic classification.
//!
//! Same response rule as the ground truth — agents within budget `beta`
//! of the published threshold move exactly onto it — but over the model's
//! own budget parameter. There is no closed-form risk here (the post-
//! response loss is a step-function mixture); the sampled optimizer and
//! the band-mass fitter carry the scenario instead.

use crate::atlas::Atlas;
use crate::core::{ParamBox, RngStream};
use crate::error::MapError;
use crate::linalg::norm2;
use crate::maps::{strat_class_response, StrategicBase};
use std::sync::Arc;

pub struct StratClassAtlas {
    base: Arc<StrategicBase>,
    threshold: f64,
    beta_max: f64,
}

impl StratClassAtlas {
    pub fn new(
        base: Arc<StrategicBase>,
        threshold: f64,
        beta_max: f64,
    ) -> Result<Self, MapError> {
        if !threshold.is_finite() {
            return Err(MapError::InvalidConfig(format!(
                "threshold must be finite, got {threshold}"
            )));
        }
        if !(beta_max.is_finite() && beta_max >= 0.0) {
            return Err(MapError::InvalidConfig(format!(
                "budget bound must be finite and >= 0, got {beta_max}"
            )));
        }
        Ok(StratClassAtlas {
            base,
            threshold,
            beta_max,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Atlas for StratClassAtlas {
    fn beta_dim(&self) -> usize {
        1
    }

    fn theta_dim(&self) -> usize {
        self.base.feature_dim()
    }

    fn obs_dim(&self) -> usize {
        self.base.feature_dim() + 1
    }

    fn beta_box(&self) -> ParamBox {
        ParamBox::interval(0.0, self.beta_max).expect("validated bounds")
    }

    fn sample(
        &self,
        beta: &[f64],
        theta: &[f64],
        rng: &mut RngStream,
    ) -> Result<Vec<f64>, MapError> {
        if theta.len() != self.theta_dim() {
            return Err(MapError::ThetaDimension {
                expected: self.theta_dim(),
                got: theta.len(),
            });
        }
        if (norm2(theta) - 1.0).abs() > 1e-9 {
            return Err(MapError::DomainViolation(format!(
                "scorer must have unit norm, got |theta| = {}",
                norm2(theta)
            )));
        }
        let b = beta[0];
        if !(0.0..=self.beta_max).contains(&b) {
            return Err(MapError::DomainViolation(format!(
                "modeled budget {b} outside [0, {}]",
                self.beta_max
            )));
        }
        let (x0, y) = &self.base.points()[self.base.draw_index(rng)];
        let mut z = strat_class_response(x0, theta, b, self.threshold);
        z.push(*y);
        Ok(z)
    }

    fn name(&self) -> &'static str {
        "strat_class"
    }
}
