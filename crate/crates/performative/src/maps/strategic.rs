//! Strategic-response maps: a finite population of agents reacts to the
//! published model before being observed.
//!
//! Both maps share a [`StrategicBase`] — the pre-response population of
//! (features, label) pairs. Deployment publishes `theta`; a uniformly drawn
//! agent then games its features and is observed post-response:
//!
//! * [`StrategicRhoMap`] — agents improve their score `theta . x` against a
//!   power-`rho` manipulation cost, moving each manipulable coordinate by
//!   `sign(theta_j) * (2 beta~ |theta_j| / rho)^(1/(rho-1))`. At `rho = 2`
//!   the response is exactly linear, `x0 + beta~ theta`, so a linear-response
//!   atlas is well-specified there and misspecified for every other `rho`.
//! * [`StratClassMap`] — agents within manipulation budget `beta` of a
//!   published decision threshold move just over it: whenever
//!   `threshold - beta <= theta . x0 < threshold`, features shift along
//!   `theta` to land exactly on the threshold. Labels never change.

use crate::core::{RngStream, TrueMap};
use crate::error::MapError;
use crate::linalg::{dot, norm2};
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

/// Pre-response population: finite list of (features, label) pairs.
#[derive(Clone, Debug)]
pub struct StrategicBase {
    points: Vec<(Vec<f64>, f64)>,
    feature_dim: usize,
}

impl StrategicBase {
    pub fn from_points(points: Vec<(Vec<f64>, f64)>) -> Result<Self, MapError> {
        let feature_dim = match points.first() {
            Some((x, _)) if !x.is_empty() => x.len(),
            _ => {
                return Err(MapError::InvalidConfig(
                    "base population must be nonempty with nonempty features".into(),
                ))
            }
        };
        if points.iter().any(|(x, _)| x.len() != feature_dim) {
            return Err(MapError::InvalidConfig(
                "all base points must share one feature dimension".into(),
            ));
        }
        Ok(StrategicBase { points, feature_dim })
    }

    /// Synthetic population: `x0 ~ N(0, I_d)` and binary labels from a
    /// logistic model with a random unit coefficient vector.
    pub fn generate(feature_dim: usize, size: usize, seed: u64) -> Self {
        assert!(feature_dim >= 1 && size >= 1);
        let mut rng = RngStream::new(seed, 0);
        let mut w: Vec<f64> = (0..feature_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = norm2(&w).max(f64::MIN_POSITIVE);
        for v in &mut w {
            *v /= n;
        }
        let points = (0..size)
            .map(|_| {
                let x: Vec<f64> = (0..feature_dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let p = crate::core::sigmoid(dot(&w, &x));
                let y = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
                (x, y)
            })
            .collect();
        StrategicBase { points, feature_dim }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn points(&self) -> &[(Vec<f64>, f64)] {
        &self.points
    }

    /// Uniform agent draw. Every map and atlas over this base routes
    /// through here, so coupled samplers consume identical randomness.
    pub fn draw_index(&self, rng: &mut RngStream) -> usize {
        rng.gen_range(0..self.points.len())
    }
}

/// Best response against a power-`rho` cost: each manipulable coordinate
/// moves by `sign(theta_j) * (2 beta~ |theta_j| / rho)^(1/(rho-1))`.
///
/// `manipulable = None` means every coordinate may move. At `rho = 2` the
/// move is computed as `beta~ * theta_j` directly, making the response
/// bit-identical to a linear-response model with coefficient `beta~`.
pub fn strategic_rho_response(
    x0: &[f64],
    theta: &[f64],
    beta_tilde: f64,
    rho: f64,
    manipulable: Option<&[usize]>,
) -> Vec<f64> {
    debug_assert_eq!(x0.len(), theta.len());
    debug_assert!(rho > 1.0 && beta_tilde >= 0.0);
    let mut x = x0.to_vec();
    let move_coord = |j: usize, x: &mut [f64]| {
        let t = theta[j];
        if t == 0.0 {
            return;
        }
        let step = if rho == 2.0 {
            beta_tilde * t
        } else {
            let mag = (2.0 * beta_tilde * t.abs() / rho).powf(1.0 / (rho - 1.0));
            t.signum() * mag
        };
        x[j] = x0[j] + step;
    };
    match manipulable {
        Some(indices) => {
            for &j in indices {
                move_coord(j, &mut x);
            }
        }
        None => {
            for j in 0..x0.len() {
                move_coord(j, &mut x);
            }
        }
    }
    x
}

/// Strategic-regression ground truth: power-`rho` feature gaming on a
/// finite base, labels untouched. Observations are `(x, y)` flattened.
pub struct StrategicRhoMap {
    base: Arc<StrategicBase>,
    beta_tilde: f64,
    rho: f64,
    manipulable: Option<Vec<usize>>,
}

impl StrategicRhoMap {
    pub fn new(
        base: Arc<StrategicBase>,
        beta_tilde: f64,
        rho: f64,
        manipulable: Option<Vec<usize>>,
    ) -> Result<Self, MapError> {
        if !(rho.is_finite() && rho > 1.0) {
            return Err(MapError::InvalidConfig(format!(
                "rho must be finite and > 1, got {rho}"
            )));
        }
        if !(beta_tilde.is_finite() && beta_tilde >= 0.0) {
            return Err(MapError::InvalidConfig(format!(
                "beta~ must be finite and >= 0, got {beta_tilde}"
            )));
        }
        if let Some(ref idx) = manipulable {
            if idx.iter().any(|&j| j >= base.feature_dim()) {
                return Err(MapError::InvalidConfig(
                    "manipulable index out of feature range".into(),
                ));
            }
        }
        Ok(StrategicRhoMap {
            base,
            beta_tilde,
            rho,
            manipulable,
        })
    }

    pub fn base(&self) -> &Arc<StrategicBase> {
        &self.base
    }

    pub fn beta_tilde(&self) -> f64 {
        self.beta_tilde
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl TrueMap for StrategicRhoMap {
    fn theta_dim(&self) -> usize {
        self.base.feature_dim()
    }

    fn obs_dim(&self) -> usize {
        self.base.feature_dim() + 1
    }

    fn sample(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
        if theta.len() != self.theta_dim() {
            return Err(MapError::ThetaDimension {
                expected: self.theta_dim(),
                got: theta.len(),
            });
        }
        let (x0, y) = &self.base.points()[self.base.draw_index(rng)];
        let mut z = strategic_rho_response(
            x0,
            theta,
            self.beta_tilde,
            self.rho,
            self.manipulable.as_deref(),
        );
        z.push(*y);
        Ok(z)
    }
}

/// Budgeted threshold response: if `threshold - beta <= theta . x0 <
/// threshold`, features move along `theta` to score exactly `threshold`.
pub fn strat_class_response(x0: &[f64], theta: &[f64], beta: f64, threshold: f64) -> Vec<f64> {
    debug_assert_eq!(x0.len(), theta.len());
    let t = dot(x0, theta);
    if t >= threshold - beta && t < threshold {
        let gap = threshold - t;
        x0.iter().zip(theta).map(|(x, th)| x + th * gap).collect()
    } else {
        x0.to_vec()
    }
}

/// Strategic-classification ground truth: budgeted gaming against a unit-
/// norm scorer. Deployed parameters must satisfy `|theta| = 1` (within
/// 1e-9); only the decision boundary matters, so scale is fixed.
pub struct StratClassMap {
    base: Arc<StrategicBase>,
    beta_true: f64,
    threshold: f64,
}

impl StratClassMap {
    pub fn new(base: Arc<StrategicBase>, beta_true: f64, threshold: f64) -> Result<Self, MapError> {
        if !(beta_true.is_finite() && beta_true >= 0.0) {
            return Err(MapError::InvalidConfig(format!(
                "budget must be finite and >= 0, got {beta_true}"
            )));
        }
        if !threshold.is_finite() {
            return Err(MapError::InvalidConfig(format!(
                "threshold must be finite, got {threshold}"
            )));
        }
        Ok(StratClassMap {
            base,
            beta_true,
            threshold,
        })
    }

    pub fn base(&self) -> &Arc<StrategicBase> {
        &self.base
    }

    pub fn beta_true(&self) -> f64 {
        self.beta_true
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl TrueMap for StratClassMap {
    fn theta_dim(&self) -> usize {
        self.base.feature_dim()
    }

    fn obs_dim(&self) -> usize {
        self.base.feature_dim() + 1
    }

    fn sample(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
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
        let (x0, y) = &self.base.points()[self.base.draw_index(rng)];
        let mut z = strat_class_response(x0, theta, self.beta_true, self.threshold);
        z.push(*y);
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_response_example() {
        // rho = 3, beta~ = 2, theta_j = 0.375, x0_j = 0:
        // (2 * 2 * 0.375 / 3)^(1/2) = sqrt(0.5).
        let x = strategic_rho_response(&[0.0], &[0.375], 2.0, 3.0, None);
        assert!((x[0] - 0.5_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rho_two_is_exactly_linear() {
        let x0 = [0.4, -1.2, 0.0];
        let theta = [0.3, -0.7, 0.2];
        let bt = 1.7;
        let x = strategic_rho_response(&x0, &theta, bt, 2.0, None);
        for j in 0..3 {
            // Bit-level equality with the direct linear form.
            assert_eq!(x[j], x0[j] + bt * theta[j]);
        }
    }

    #[test]
    fn rho_response_sign_symmetry_and_zero() {
        let xp = strategic_rho_response(&[0.0], &[0.5], 1.0, 3.0, None);
        let xn = strategic_rho_response(&[0.0], &[-0.5], 1.0, 3.0, None);
        assert!((xp[0] + xn[0]).abs() < 1e-15);
        let still = strategic_rho_response(&[0.3], &[0.0], 1.0, 3.0, None);
        assert_eq!(still[0], 0.3);
    }

    #[test]
    fn manipulable_subset_restricts_movement() {
        let x0 = [1.0, 2.0, 3.0];
        let theta = [0.5, 0.5, 0.5];
        let x = strategic_rho_response(&x0, &theta, 1.0, 2.0, Some(&[2]));
        assert_eq!(x[0], 1.0);
        assert_eq!(x[1], 2.0);
        assert_eq!(x[2], 3.5);
    }

    #[test]
    fn class_response_band_and_landing() {
        let theta = [1.0];
        // In band: lands exactly on the threshold.
        let moved = strat_class_response(&[0.45], &theta, 0.2, 0.5);
        assert_eq!(dot(&moved, &theta), 0.5);
        // Band edge is inclusive below.
        let edge = strat_class_response(&[0.3], &theta, 0.2, 0.5);
        assert_eq!(dot(&edge, &theta), 0.5);
        // Already at or above the threshold: no move.
        assert_eq!(strat_class_response(&[0.5], &theta, 0.2, 0.5), vec![0.5]);
        assert_eq!(strat_class_response(&[0.9], &theta, 0.2, 0.5), vec![0.9]);
        // Below the band: out of budget, no move.
        assert_eq!(strat_class_response(&[0.29], &theta, 0.2, 0.5), vec![0.29]);
    }

    #[test]
    fn class_map_rejects_non_unit_scorer() {
        let base = Arc::new(StrategicBase::generate(3, 100, 5));
        let map = StratClassMap::new(base, 0.2, 0.5).unwrap();
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(
            map.sample(&[1.0, 1.0, 0.0], &mut rng),
            Err(MapError::DomainViolation(_))
        ));
    }

    #[test]
    fn class_map_moves_band_mass_to_threshold() {
        // Uniform grid base on [0, 1], theta = 1, T = 0.5, budget 0.1:
        // one tenth of the population lands exactly on the threshold.
        let points: Vec<(Vec<f64>, f64)> = (0..10_000)
            .map(|i| (vec![(i as f64 + 0.5) / 10_000.0], 0.0))
            .collect();
        let base = Arc::new(StrategicBase::from_points(points).unwrap());
        let map = StratClassMap::new(base, 0.1, 0.5).unwrap();
        let mut rng = RngStream::new(2, 0);
        let n = 20_000;
        let mut at_threshold = 0usize;
        for _ in 0..n {
            let z = map.sample(&[1.0], &mut rng).unwrap();
            if z[0] == 0.5 {
                at_threshold += 1;
            }
        }
        let frac = at_threshold as f64 / n as f64;
        assert!((frac - 0.1).abs() < 0.01, "frac = {frac}");
    }

    #[test]
    fn base_generation_is_deterministic_and_labeled() {
        let a = StrategicBase::generate(4, 500, 77);
        let b = StrategicBase::generate(4, 500, 77);
        assert_eq!(a.points()[17], b.points()[17]);
        assert!(a.points().iter().all(|(_, y)| *y == 0.0 || *y == 1.0));
        // Both classes present in a population this large.
        let ones: usize = a.points().iter().filter(|(_, y)| *y == 1.0).count();
        assert!(ones > 50 && ones < 450, "ones = {ones}");
    }

    #[test]
    fn rho_map_appends_label() {
        let base = Arc::new(StrategicBase::generate(3, 50, 9));
        let map = StrategicRhoMap::new(base.clone(), 2.0, 2.0, None).unwrap();
        let mut rng = RngStream::new(3, 0);
        let z = map.sample(&[0.1, 0.2, -0.1], &mut rng).unwrap();
        assert_eq!(z.len(), 4);
        assert!(z[3] == 0.0 || z[3] == 1.0);
    }
}
