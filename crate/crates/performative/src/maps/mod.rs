//! Ground-truth distribution maps.
//!
//! These are the simulators an experiment treats as the real world: each
//! implements [`TrueMap`](crate::core::TrueMap) and is only ever sampled.
//! Closed-form risks and optima are exposed alongside, but exclusively for
//! scoring and oracle construction — no fitting code may touch them.
//!
//! * [`CoinMap`] — a biased coin whose heads probability responds
//!   quadratically to the deployed parameter.
//! * [`LocationQuadMap`] — a Gaussian location family whose mean shifts
//!   linearly and (optionally) quadratically with the parameter.
//! * [`StrategicRhoMap`] / [`StratClassMap`] — agents with power-rho or
//!   budgeted best responses to a published linear model.
//! * [`contaminate`] — mixes any map with an off-model contaminant, for
//!   studying robustness to misspecification.

mod coin;
mod location;
mod strategic;

pub use coin::CoinMap;
pub use location::LocationQuadMap;
pub use strategic::{
    strat_class_response, strategic_rho_response, StratClassMap, StrategicBase, StrategicRhoMap,
};

use crate::core::{RngStream, TrueMap};
use crate::error::MapError;
use rand::Rng;
use std::sync::Arc;

/// A map that draws from `alt` with probability `p`, else from `primary`.
pub struct ContaminatedMap {
    primary: Arc<dyn TrueMap>,
    alt: Arc<dyn TrueMap>,
    p: f64,
}

/// Contaminate `primary` with draws from `alt` at rate `p in [0, 1]`.
///
/// The two maps must agree on both dimensions. With `p = 0` the result is
/// distributionally identical to `primary` (one extra uniform draw per
/// sample is still consumed for the mixing decision).
pub fn contaminate(
    primary: Arc<dyn TrueMap>,
    p: f64,
    alt: Arc<dyn TrueMap>,
) -> Result<ContaminatedMap, MapError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(MapError::InvalidConfig(format!(
            "contamination rate must be in [0, 1], got {p}"
        )));
    }
    if primary.theta_dim() != alt.theta_dim() || primary.obs_dim() != alt.obs_dim() {
        return Err(MapError::InvalidConfig(format!(
            "contaminant dimensions ({}, {}) do not match primary ({}, {})",
            alt.theta_dim(),
            alt.obs_dim(),
            primary.theta_dim(),
            primary.obs_dim()
        )));
    }
    Ok(ContaminatedMap { primary, alt, p })
}

impl TrueMap for ContaminatedMap {
    fn theta_dim(&self) -> usize {
        self.primary.theta_dim()
    }

    fn obs_dim(&self) -> usize {
        self.primary.obs_dim()
    }

    fn sample(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
        let u: f64 = rng.gen();
        if u < self.p {
            self.alt.sample(theta, rng)
        } else {
            self.primary.sample(theta, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{Exploration, RngStream};

    /// Point mass at a constant observation, for mixing tests.
    struct ConstMap(f64);

    impl TrueMap for ConstMap {
        fn theta_dim(&self) -> usize {
            1
        }
        fn obs_dim(&self) -> usize {
            1
        }
        fn sample(&self, _theta: &[f64], _rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
            Ok(vec![self.0])
        }
    }

    #[test]
    fn contamination_rate_realized() {
        // Primary emits 0, contaminant emits 1: the mean estimates p.
        let mixed = contaminate(Arc::new(ConstMap(0.0)), 0.1, Arc::new(ConstMap(1.0))).unwrap();
        let expl = Exploration::Degenerate(vec![0.0]);
        let mut rng = RngStream::new(4, 0);
        let data =
            crate::core::deploy_and_collect(&mixed, &expl, 10_000, &mut rng).unwrap();
        let mean = data.observations().map(|z| z[0]).sum::<f64>() / data.len() as f64;
        assert!((mean - 0.1).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn zero_rate_matches_primary_in_law() {
        let mixed = contaminate(Arc::new(ConstMap(0.0)), 0.0, Arc::new(ConstMap(1.0))).unwrap();
        let mut rng = RngStream::new(4, 0);
        for _ in 0..1000 {
            assert_eq!(mixed.sample(&[0.0], &mut rng).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn invalid_rate_and_dims_rejected() {
        assert!(contaminate(Arc::new(ConstMap(0.0)), 1.5, Arc::new(ConstMap(1.0))).is_err());
        let coin = Arc::new(CoinMap::new(0.3, 0.0).unwrap());
        let wide = Arc::new(LocationQuadMap::generate(2, 0.0, 1.0, 1, 2, 3));
        assert!(contaminate(coin, 0.1, wide).is_err());
    }
}
