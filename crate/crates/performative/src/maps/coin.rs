//! A biased coin whose bias responds to the deployed parameter.
//!
//! Deploying `theta in [0, 1]` makes the coin land heads with probability
//!
//! ```text
//! p(theta) = 1/2 + mu * theta + eta * theta^2,
//! ```
//!
//! so the ground truth is *quadratic* in the parameter while the natural
//! one-parameter atlas for it (`1/2 + beta * theta`) is linear — the
//! smallest interesting misspecification study. Under squared loss the
//! performative risk and its minimizer have closed forms, which makes this
//! the scenario of choice for exact end-to-end checks.

use crate::core::{RngStream, TrueMap};
use crate::error::MapError;
use rand::Rng;

/// Coin map with linear coefficient `mu` and quadratic coefficient `eta`.
#[derive(Clone, Copy, Debug)]
pub struct CoinMap {
    mu: f64,
    eta: f64,
}

impl CoinMap {
    /// Requires `0 < mu < 1/2` and `0 <= eta <= 1/2 - mu`, which keeps
    /// `p(theta)` a valid probability on all of [0, 1] (touching 1 at
    /// `theta = 1` when the bound is met with equality).
    pub fn new(mu: f64, eta: f64) -> Result<Self, MapError> {
        if !(mu.is_finite() && eta.is_finite()) || mu <= 0.0 || mu >= 0.5 {
            return Err(MapError::InvalidConfig(format!(
                "mu must lie in (0, 0.5), got {mu}"
            )));
        }
        if eta < 0.0 || eta > 0.5 - mu {
            return Err(MapError::InvalidConfig(format!(
                "eta must lie in [0, 0.5 - mu], got {eta} with mu = {mu}"
            )));
        }
        Ok(CoinMap { mu, eta })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Heads probability at a deployed parameter.
    pub fn success_prob(&self, theta: f64) -> f64 {
        0.5 + self.mu * theta + self.eta * theta * theta
    }

    /// Closed-form performative risk under squared loss:
    /// `E (z - theta)^2 = p(theta) (1 - 2 theta) + theta^2`.
    pub fn true_risk(&self, theta: f64) -> f64 {
        let p = self.success_prob(theta);
        p * (1.0 - 2.0 * theta) + theta * theta
    }

    /// Exact minimizer of [`CoinMap::true_risk`] over [0, 1], with the
    /// risk value at the minimizer.
    ///
    /// The derivative of the true risk is the quadratic
    /// `-6 eta theta^2 + 2 (1 - 2 mu + eta) theta + (mu - 1)`; the minimum
    /// is at one of its real roots inside [0, 1] or at an endpoint.
    pub fn true_optimum(&self) -> (f64, f64) {
        let mut candidates = vec![0.0, 1.0];
        let a = -6.0 * self.eta;
        let b = 2.0 * (1.0 - 2.0 * self.mu + self.eta);
        let c = self.mu - 1.0;
        if a == 0.0 {
            // eta = 0: the derivative is linear in theta.
            let root = -c / b;
            if (0.0..=1.0).contains(&root) {
                candidates.push(root);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                for root in [(-b + s) / (2.0 * a), (-b - s) / (2.0 * a)] {
                    if (0.0..=1.0).contains(&root) {
                        candidates.push(root);
                    }
                }
            }
        }
        let mut best = (0.0, self.true_risk(0.0));
        for &t in &candidates[1..] {
            let r = self.true_risk(t);
            if r < best.1 {
                best = (t, r);
            }
        }
        best
    }
}

impl TrueMap for CoinMap {
    fn theta_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn sample(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
        if theta.len() != 1 {
            return Err(MapError::ThetaDimension {
                expected: 1,
                got: theta.len(),
            });
        }
        let t = theta[0];
        if !(0.0..=1.0).contains(&t) {
            return Err(MapError::DomainViolation(format!(
                "coin parameter must lie in [0, 1], got {t}"
            )));
        }
        let p = self.success_prob(t);
        let u: f64 = rng.gen();
        Ok(vec![if u < p { 1.0 } else { 0.0 }])
    }
}
