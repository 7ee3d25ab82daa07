//! Linear-response atlas for strategic regression.
//!
//! The modeled response moves an agent's features toward the gradient of a
//! concave utility: `x = x0 + beta * grad_x u_theta(x)`, solved by fixed-
//! point iteration (a contraction when `beta * L_u < 1`). With the linear
//! utility `u_theta(x) = theta . x` the response is exactly `x0 + beta
//! theta` — matching the power-2 ground truth bit for bit — and the modeled
//! logistic-ridge risk over the finite base has a closed form that the
//! plug-in optimizer can descend directly.

use crate::atlas::Atlas;
use crate::core::{sigmoid, softplus, Loss, LossKind, ParamBox, RngStream};
use crate::error::MapError;
use crate::linalg::{dist2, dot};
use crate::maps::StrategicBase;
use std::sync::Arc;

/// A concave agent utility, known through its feature gradient.
pub trait Utility: Send + Sync {
    /// `grad_x u_theta(x)`.
    fn grad_x(&self, theta: &[f64], x: &[f64]) -> Vec<f64>;

    /// Lipschitz constant of `x -> grad_x u_theta(x)` (0 when the gradient
    /// does not depend on `x`). Contraction of the response iteration
    /// requires `beta * L < 1`.
    fn grad_lipschitz(&self) -> f64;

    /// Linear utilities get the exact fast path in the response.
    fn is_linear(&self) -> bool {
        false
    }
}

/// `u_theta(x) = theta . x`: the canonical improvement utility.
#[derive(Clone, Copy, Debug, Default)]
pub struct LinearUtility;

impl Utility for LinearUtility {
    fn grad_x(&self, theta: &[f64], _x: &[f64]) -> Vec<f64> {
        theta.to_vec()
    }

    fn grad_lipschitz(&self) -> f64 {
        0.0
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// Modeled best response: solve `x = x0 + beta * grad_x u_theta(x)` on the
/// manipulable coordinates (all of them when `None`).
///
/// Linear utilities return `x0 + beta theta` exactly. Otherwise the fixed
/// point is iterated from `x0` to an l2 residual of 1e-10 (at most 100
/// iterations); non-contractive configurations (`beta * L_u >= 1`) are
/// rejected up front.
pub fn strat_reg_atlas_response(
    x0: &[f64],
    theta: &[f64],
    beta: f64,
    utility: &dyn Utility,
    manipulable: Option<&[usize]>,
) -> Result<Vec<f64>, MapError> {
    debug_assert_eq!(x0.len(), theta.len());
    if beta < 0.0 || !beta.is_finite() {
        return Err(MapError::DomainViolation(format!(
            "response coefficient must be finite and >= 0, got {beta}"
        )));
    }
    if utility.is_linear() {
        let mut x = x0.to_vec();
        match manipulable {
            Some(indices) => {
                for &j in indices {
                    x[j] = x0[j] + beta * theta[j];
                }
            }
            None => {
                for j in 0..x.len() {
                    x[j] = x0[j] + beta * theta[j];
                }
            }
        }
        return Ok(x);
    }
    if beta * utility.grad_lipschitz() >= 1.0 {
        return Err(MapError::InvalidConfig(format!(
            "response iteration is not a contraction: beta * L_u = {} >= 1",
            beta * utility.grad_lipschitz()
        )));
    }
    const TOL: f64 = 1e-10;
    const MAX_ITERS: usize = 100;
    let mut x = x0.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let g = utility.grad_x(theta, &x);
        let mut next = x0.to_vec();
        match manipulable {
            Some(indices) => {
                for &j in indices {
                    next[j] = x0[j] + beta * g[j];
                }
            }
            None => {
                for j in 0..next.len() {
                    next[j] = x0[j] + beta * g[j];
                }
            }
        }
        residual = dist2(&next, &x);
        x = next;
        if residual <= TOL {
            return Ok(x);
        }
    }
    Err(MapError::ResponseNonConvergence {
        max_iters: MAX_ITERS,
        residual,
    })
}

/// Strategic-regression atlas over a finite base population.
pub struct StratRegAtlas {
    base: Arc<StrategicBase>,
    utility: Arc<dyn Utility>,
    beta_lo: f64,
    beta_hi: f64,
    manipulable: Option<Vec<usize>>,
}

impl StratRegAtlas {
    pub fn new(
        base: Arc<StrategicBase>,
        utility: Arc<dyn Utility>,
        beta_lo: f64,
        beta_hi: f64,
        manipulable: Option<Vec<usize>>,
    ) -> Result<Self, MapError> {
        if !(beta_lo.is_finite() && beta_hi.is_finite()) || beta_lo < 0.0 || beta_lo > beta_hi {
            return Err(MapError::InvalidConfig(format!(
                "need 0 <= beta_lo <= beta_hi finite, got [{beta_lo}, {beta_hi}]"
            )));
        }
        if !utility.is_linear() && beta_hi * utility.grad_lipschitz() >= 1.0 {
            return Err(MapError::InvalidConfig(
                "largest admissible beta breaks the response contraction".into(),
            ));
        }
        if let Some(ref idx) = manipulable {
            if idx.iter().any(|&j| j >= base.feature_dim()) {
                return Err(MapError::InvalidConfig(
                    "manipulable index out of feature range".into(),
                ));
            }
        }
        Ok(StratRegAtlas {
            base,
            utility,
            beta_lo,
            beta_hi,
            manipulable,
        })
    }

    /// Score margin `theta . x(beta, theta)` for base point `x0` under the
    /// linear utility: `theta . x0 + beta |theta_S|^2`.
    fn linear_margin(&self, beta: f64, theta: &[f64], x0: &[f64]) -> f64 {
        let masked_sq = match &self.manipulable {
            Some(indices) => indices.iter().map(|&j| theta[j] * theta[j]).sum::<f64>(),
            None => dot(theta, theta),
        };
        dot(theta, x0) + beta * masked_sq
    }
}

impl Atlas for StratRegAtlas {
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
                "atlas coefficient {b} outside [{}, {}]",
                self.beta_lo, self.beta_hi
            )));
        }
        let (x0, y) = &self.base.points()[self.base.draw_index(rng)];
        let mut z = strat_reg_atlas_response(
            x0,
            theta,
            b,
            self.utility.as_ref(),
            self.manipulable.as_deref(),
        )?;
        z.push(*y);
        Ok(z)
    }

    fn closed_form_risk(&self, beta: &[f64], theta: &[f64], loss: &dyn Loss) -> Option<f64> {
        let LossKind::LogisticRidge { lambda } = loss.kind() else {
            return None;
        };
        if !self.utility.is_linear() {
            return None;
        }
        let b = beta[0];
        let n = self.base.len() as f64;
        let mut total = 0.0;
        for (x0, y) in self.base.points() {
            let m = self.linear_margin(b, theta, x0);
            total += softplus(m) - y * m;
        }
        Some(total / n + 0.5 * lambda * dot(theta, theta))
    }

    fn closed_form_risk_grad(
        &self,
        beta: &[f64],
        theta: &[f64],
        loss: &dyn Loss,
    ) -> Option<Vec<f64>> {
        let LossKind::LogisticRidge { lambda } = loss.kind() else {
            return None;
        };
        if !self.utility.is_linear() {
            return None;
        }
        let b = beta[0];
        let n = self.base.len() as f64;
        let d = theta.len();
        let mut grad = vec![0.0; d];
        // dm/dtheta_j = x0_j + 2 b theta_j on manipulable coordinates,
        // x0_j elsewhere (m = theta.x0 + b |theta_S|^2).
        let mask: Vec<f64> = match &self.manipulable {
            Some(indices) => {
                let mut v = vec![0.0; d];
                for &j in indices {
                    v[j] = 1.0;
                }
                v
            }
            None => vec![1.0; d],
        };
        for (x0, y) in self.base.points() {
            let m = self.linear_margin(b, theta, x0);
            let s = sigmoid(m) - y;
            for j in 0..d {
                grad[j] += s * (x0[j] + 2.0 * b * theta[j] * mask[j]);
            }
        }
        for j in 0..d {
            grad[j] = grad[j] / n + lambda * theta[j];
        }
        Some(grad)
    }

    fn name(&self) -> &'static str {
        "strat_reg"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::LogisticRidge;
    use crate::linalg::{fd_grad, grad_rel_err};
    use crate::maps::StrategicRhoMap;
    use rand::Rng;

    #[test]
    fn linear_response_is_exact() {
        let x = strat_reg_atlas_response(&[1.0, -2.0], &[0.5, 0.25], 2.0, &LinearUtility, None)
            .unwrap();
        assert_eq!(x, vec![2.0, -1.5]);
    }

    /// Quadratic utility `u = theta . x - (kappa/2) |x|^2`, whose gradient
    /// depends on `x` (Lipschitz constant kappa).
    struct QuadraticUtility {
        kappa: f64,
    }

    impl Utility for QuadraticUtility {
        fn grad_x(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
            theta.iter().zip(x).map(|(t, v)| t - self.kappa * v).collect()
        }
        fn grad_lipschitz(&self) -> f64 {
            self.kappa
        }
    }

    #[test]
    fn fixed_point_solves_quadratic_utility() {
        // x = x0 + beta (theta - kappa x) has the explicit solution
        // x = (x0 + beta theta) / (1 + beta kappa).
        let u = QuadraticUtility { kappa: 0.5 };
        let (x0, theta, beta) = ([1.0, 0.0], [0.4, -0.8], 0.9);
        let x = strat_reg_atlas_response(&x0, &theta, beta, &u, None).unwrap();
        for j in 0..2 {
            let exact = (x0[j] + beta * theta[j]) / (1.0 + beta * u.kappa);
            assert!((x[j] - exact).abs() < 1e-9, "coord {j}: {} vs {exact}", x[j]);
        }
    }

    #[test]
    fn non_contractive_rejected() {
        let u = QuadraticUtility { kappa: 2.0 };
        assert!(matches!(
            strat_reg_atlas_response(&[0.0], &[1.0], 0.6, &u, None),
            Err(MapError::InvalidConfig(_))
        ));
    }

    #[test]
    fn atlas_matches_rho_two_ground_truth_bitwise() {
        // Same base, same rng stream: the linear atlas at beta and the
        // power-2 map at beta~ = beta produce identical observations.
        let base = Arc::new(StrategicBase::generate(4, 300, 50));
        let map = StrategicRhoMap::new(base.clone(), 1.3, 2.0, None).unwrap();
        let atlas =
            StratRegAtlas::new(base, Arc::new(LinearUtility), 0.0, 2.0, None).unwrap();
        let theta = [0.2, -0.4, 0.1, 0.3];
        let mut rng_map = RngStream::new(77, 0);
        let mut rng_atlas = RngStream::new(77, 0);
        for _ in 0..200 {
            let zm = crate::core::TrueMap::sample(&map, &theta, &mut rng_map).unwrap();
            let za = atlas.sample(&[1.3], &theta, &mut rng_atlas).unwrap();
            assert_eq!(zm, za);
        }
    }

    #[test]
    fn closed_form_risk_matches_explicit_base_sum() {
        let base = Arc::new(StrategicBase::generate(3, 100, 51));
        let atlas =
            StratRegAtlas::new(base.clone(), Arc::new(LinearUtility), 0.0, 2.0, None).unwrap();
        let loss = LogisticRidge::new(0.05);
        let theta = [0.3, -0.2, 0.5];
        let beta = 0.8;
        let exact = atlas.closed_form_risk(&[beta], &theta, &loss).unwrap();
        // Enumerate the base through the sampler's own response path.
        let mut total = 0.0;
        for (x0, y) in base.points() {
            let mut z =
                strat_reg_atlas_response(x0, &theta, beta, &LinearUtility, None).unwrap();
            z.push(*y);
            total += crate::core::Loss::value(&loss, &z, &theta);
        }
        assert!((exact - total / base.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn closed_form_grad_matches_fd_with_and_without_subset() {
        let base = Arc::new(StrategicBase::generate(3, 80, 52));
        let loss = LogisticRidge::new(0.1);
        let mut rng = RngStream::new(5, 0);
        for manip in [None, Some(vec![0, 2])] {
            let atlas = StratRegAtlas::new(
                base.clone(),
                Arc::new(LinearUtility),
                0.0,
                2.0,
                manip,
            )
            .unwrap();
            for _ in 0..25 {
                let theta: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.8..0.8)).collect();
                let beta = rng.gen_range(0.0..1.5);
                let g = atlas
                    .closed_form_risk_grad(&[beta], &theta, &loss)
                    .unwrap();
                let f =
                    |t: &[f64]| atlas.closed_form_risk(&[beta], t, &loss).unwrap();
                let fd = fd_grad(&f, &theta, 1e-6);
                assert!(grad_rel_err(&g, &fd) <= 1e-5);
            }
        }
    }
}
