//! Auxiliary atlases: mixtures, self-fulfilling labels, and parameter-
//! dependent outcomes.
//!
//! These model qualitatively different channels through which a deployment
//! can bend the data distribution:
//!
//! * [`MixtureAtlas`] — `beta` lives on the simplex and mixes fixed,
//!   known component maps; only the weights are learned.
//! * [`ProphecyAtlas`] — with probability `beta` the label is replaced by
//!   the deployed model's own prediction (a self-fulfilling prophecy);
//!   otherwise the base label survives.
//! * [`OutcomesAtlas`] — the real-valued outcome shifts additively with a
//!   score of the deployed model: `y = y0 + beta * f_theta(x)`.
//!
//! None of these has a closed-form risk; they are fitted by ERM on
//! squared-moment objectives and optimized via sampling.

use crate::atlas::Atlas;
use crate::core::{ParamBox, RngStream, TrueMap};
use crate::error::MapError;
use crate::linalg::dot;
use crate::maps::StrategicBase;
use rand::Rng;
use std::sync::Arc;

/// A deterministic score of the deployed model at a feature vector.
pub trait Predictor: Send + Sync {
    fn predict(&self, theta: &[f64], x: &[f64]) -> f64;
}

/// Hard prediction `1{theta . x >= threshold}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ThresholdScore {
    pub threshold: f64,
}

impl Predictor for ThresholdScore {
    fn predict(&self, theta: &[f64], x: &[f64]) -> f64 {
        if dot(theta, x) >= self.threshold {
            1.0
        } else {
            0.0
        }
    }
}

/// Raw linear score `theta . x`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LinearScore;

impl Predictor for LinearScore {
    fn predict(&self, theta: &[f64], x: &[f64]) -> f64 {
        dot(theta, x)
    }
}

/// Simplex-weighted mixture of fixed component maps.
pub struct MixtureAtlas {
    components: Vec<Arc<dyn TrueMap>>,
}

impl MixtureAtlas {
    pub fn new(components: Vec<Arc<dyn TrueMap>>) -> Result<Self, MapError> {
        let first = components
            .first()
            .ok_or_else(|| MapError::InvalidConfig("mixture needs at least one component".into()))?;
        let (td, od) = (first.theta_dim(), first.obs_dim());
        if components
            .iter()
            .any(|c| c.theta_dim() != td || c.obs_dim() != od)
        {
            return Err(MapError::InvalidConfig(
                "mixture components must agree on dimensions".into(),
            ));
        }
        Ok(MixtureAtlas { components })
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }
}

impl Atlas for MixtureAtlas {
    fn beta_dim(&self) -> usize {
        self.components.len()
    }

    fn theta_dim(&self) -> usize {
        self.components[0].theta_dim()
    }

    fn obs_dim(&self) -> usize {
        self.components[0].obs_dim()
    }

    fn beta_box(&self) -> ParamBox {
        ParamBox::new(vec![0.0; self.beta_dim()], vec![1.0; self.beta_dim()])
            .expect("static bounds")
    }

    fn sample(
        &self,
        beta: &[f64],
        theta: &[f64],
        rng: &mut RngStream,
    ) -> Result<Vec<f64>, MapError> {
        if beta.len() != self.beta_dim() {
            return Err(MapError::InvalidConfig(format!(
                "mixture weights have length {}, expected {}",
                beta.len(),
                self.beta_dim()
            )));
        }
        let total: f64 = beta.iter().sum();
        if beta.iter().any(|&w| w < -1e-9) || (total - 1.0).abs() > 1e-9 {
            return Err(MapError::DomainViolation(format!(
                "mixture weights must lie on the simplex (sum = {total})"
            )));
        }
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = self.components.len() - 1;
        for (i, &w) in beta.iter().enumerate() {
            acc += w.max(0.0);
            if u < acc {
                chosen = i;
                break;
            }
        }
        self.components[chosen].sample(theta, rng)
    }

    fn name(&self) -> &'static str {
        "mixture"
    }
}

/// Self-fulfilling-label atlas over a finite base.
pub struct ProphecyAtlas {
    base: Arc<StrategicBase>,
    predictor: Arc<dyn Predictor>,
}

impl ProphecyAtlas {
    pub fn new(base: Arc<StrategicBase>, predictor: Arc<dyn Predictor>) -> Self {
        ProphecyAtlas { base, predictor }
    }

    /// Default predictor: the hard classifier `1{theta . x >= 0}`.
    pub fn with_default_predictor(base: Arc<StrategicBase>) -> Self {
        ProphecyAtlas::new(base, Arc::new(ThresholdScore { threshold: 0.0 }))
    }
}

impl Atlas for ProphecyAtlas {
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
        ParamBox::interval(0.0, 1.0).expect("static bounds")
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
        let b = beta[0];
        if !(0.0..=1.0).contains(&b) {
            return Err(MapError::DomainViolation(format!(
                "prophecy strength must lie in [0, 1], got {b}"
            )));
        }
        let (x0, y0) = &self.base.points()[self.base.draw_index(rng)];
        let mut z = x0.clone();
        let label = if rng.gen::<f64>() < b {
            self.predictor.predict(theta, x0)
        } else {
            *y0
        };
        z.push(label);
        Ok(z)
    }

    fn name(&self) -> &'static str {
        "prophecy"
    }
}

/// Parameter-dependent-outcome atlas over a finite base.
pub struct OutcomesAtlas {
    base: Arc<StrategicBase>,
    predictor: Arc<dyn Predictor>,
    beta_lo: f64,
    beta_hi: f64,
}

impl OutcomesAtlas {
    pub fn new(
        base: Arc<StrategicBase>,
        predictor: Arc<dyn Predictor>,
        beta_lo: f64,
        beta_hi: f64,
    ) -> Result<Self, MapError> {
        if !(beta_lo.is_finite() && beta_hi.is_finite()) || beta_lo > beta_hi {
            return Err(MapError::InvalidConfig(format!(
                "need beta_lo <= beta_hi finite, got [{beta_lo}, {beta_hi}]"
            )));
        }
        Ok(OutcomesAtlas {
            base,
            predictor,
            beta_lo,
            beta_hi,
        })
    }

    /// Default predictor: the raw linear score `theta . x`.
    pub fn with_default_predictor(
        base: Arc<StrategicBase>,
        beta_lo: f64,
        beta_hi: f64,
    ) -> Result<Self, MapError> {
        OutcomesAtlas::new(base, Arc::new(LinearScore), beta_lo, beta_hi)
    }
}

impl Atlas for OutcomesAtlas {
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
        ParamBox::interval(self.beta_lo, self.beta_hi).expect("validated bounds")
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
        let b = beta[0];
        if !(self.beta_lo..=self.beta_hi).contains(&b) {
            return Err(MapError::DomainViolation(format!(
                "outcome coefficient {b} outside [{}, {}]",
                self.beta_lo, self.beta_hi
            )));
        }
        let (x0, y0) = &self.base.points()[self.base.draw_index(rng)];
        let mut z = x0.clone();
        z.push(y0 + b * self.predictor.predict(theta, x0));
        Ok(z)
    }

    fn name(&self) -> &'static str {
        "outcomes"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::CoinMap;

    /// Point mass at a constant, used to identify mixture routing.
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
    fn unit_weight_routes_to_first_component() {
        // beta = e1 reproduces component 1's law exactly.
        let atlas = MixtureAtlas::new(vec![
            Arc::new(ConstMap(7.0)) as Arc<dyn TrueMap>,
            Arc::new(ConstMap(-7.0)),
        ])
        .unwrap();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..500 {
            assert_eq!(
                atlas.sample(&[1.0, 0.0], &[0.3], &mut rng).unwrap(),
                vec![7.0]
            );
        }
    }

    #[test]
    fn mixture_weights_realized() {
        let atlas = MixtureAtlas::new(vec![
            Arc::new(ConstMap(0.0)) as Arc<dyn TrueMap>,
            Arc::new(ConstMap(1.0)),
        ])
        .unwrap();
        let mut rng = RngStream::new(3, 0);
        let n = 20_000;
        let mean = (0..n)
            .map(|_| atlas.sample(&[0.3, 0.7], &[0.0], &mut rng).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.7).abs() < 0.012, "mean = {mean}");
    }

    #[test]
    fn off_simplex_weights_rejected() {
        let atlas = MixtureAtlas::new(vec![
            Arc::new(ConstMap(0.0)) as Arc<dyn TrueMap>,
            Arc::new(ConstMap(1.0)),
        ])
        .unwrap();
        let mut rng = RngStream::new(3, 0);
        assert!(atlas.sample(&[0.6, 0.6], &[0.0], &mut rng).is_err());
        assert!(atlas.sample(&[1.2, -0.2], &[0.0], &mut rng).is_err());
    }

    #[test]
    fn mixture_dimension_agreement_enforced() {
        let coin = Arc::new(CoinMap::new(0.3, 0.0).unwrap()) as Arc<dyn TrueMap>;
        let wide =
            Arc::new(crate::maps::LocationQuadMap::generate(2, 0.0, 1.0, 1, 2, 3)) as Arc<dyn TrueMap>;
        assert!(MixtureAtlas::new(vec![coin, wide]).is_err());
        assert!(MixtureAtlas::new(vec![]).is_err());
    }

    #[test]
    fn prophecy_at_full_strength_always_predicts() {
        let base = Arc::new(StrategicBase::generate(2, 200, 8));
        let atlas = ProphecyAtlas::with_default_predictor(base);
        let theta = [0.5, -0.5];
        let mut rng = RngStream::new(4, 0);
        for _ in 0..300 {
            let z = atlas.sample(&[1.0], &theta, &mut rng).unwrap();
            let expected = if dot(&theta, &z[..2]) >= 0.0 { 1.0 } else { 0.0 };
            assert_eq!(z[2], expected);
        }
    }

    #[test]
    fn prophecy_at_zero_strength_keeps_base_labels() {
        let base = Arc::new(StrategicBase::generate(2, 50, 9));
        let atlas = ProphecyAtlas::with_default_predictor(base.clone());
        let mut rng = RngStream::new(5, 0);
        for _ in 0..300 {
            let z = atlas.sample(&[0.0], &[1.0, 0.0], &mut rng).unwrap();
            // Label must be one of the base labels for these features.
            let found = base
                .points()
                .iter()
                .any(|(x, y)| x[..] == z[..2] && *y == z[2]);
            assert!(found);
        }
    }

    #[test]
    fn outcomes_shift_is_exact_per_draw() {
        let base = Arc::new(StrategicBase::generate(2, 60, 10));
        let atlas = OutcomesAtlas::with_default_predictor(base.clone(), -1.0, 1.0).unwrap();
        let theta = [0.3, 0.4];
        let mut rng = RngStream::new(6, 0);
        for _ in 0..300 {
            let z = atlas.sample(&[0.5], &theta, &mut rng).unwrap();
            let (x, y) = (&z[..2], z[2]);
            let base_match = base
                .points()
                .iter()
                .find(|(bx, _)| bx[..] == x[..])
                .expect("features come from the base");
            assert!((y - (base_match.1 + 0.5 * dot(&theta, x))).abs() < 1e-12);
        }
    }
}
