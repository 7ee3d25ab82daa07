//! Loss functions `l(z; theta)`.
//!
//! Losses are evaluated on observations drawn from a deployed distribution,
//! at the deployed parameter. The two shipped losses are the ones the
//! simulation scenarios need: squared distance (coin, location family) and
//! logistic log-loss with a ridge term (strategic scenarios). Atlases probe
//! [`Loss::kind`] to decide whether a closed-form plug-in risk applies;
//! gradient-based optimizers probe the optional gradients.

use crate::linalg::dot;

/// Structural identity of a loss, used by atlases to offer closed forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    /// `|z - theta|^2` (observation and parameter dimensions equal).
    SquaredDistance,
    /// Logistic log-loss on `z = (x, y)` plus `lambda/2 |theta|^2`.
    LogisticRidge { lambda: f64 },
    /// Anything else; no closed forms will be offered.
    Custom,
}

/// A loss function together with optional analytic structure.
pub trait Loss: Send + Sync {
    fn value(&self, z: &[f64], theta: &[f64]) -> f64;

    /// Gradient in the deployed parameter, if available.
    fn grad_theta(&self, _z: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Gradient in the observation, if available.
    fn grad_z(&self, _z: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn kind(&self) -> LossKind {
        LossKind::Custom
    }

    /// Uniform bound `sup |l|` over the scenario's domain, when known.
    fn bound(&self) -> Option<f64> {
        None
    }

    /// Lipschitz constant of `z -> l(z; theta)` over the scenario's domain,
    /// when known.
    fn lipschitz_z(&self) -> Option<f64> {
        None
    }
}

/// Squared Euclidean distance `|z - theta|^2`.
///
/// Optional `bound`/`lipschitz_z` metadata describes the scenario's domain
/// (e.g. on the coin, both observation and parameter live in [0,1], so the
/// loss is bounded by 1); the loss itself is domain-agnostic.
#[derive(Clone, Debug, Default)]
pub struct SquaredDistance {
    bound: Option<f64>,
    lipschitz_z: Option<f64>,
}

impl SquaredDistance {
    pub fn new() -> Self {
        SquaredDistance::default()
    }

    pub fn with_domain_metadata(bound: f64, lipschitz_z: f64) -> Self {
        SquaredDistance {
            bound: Some(bound),
            lipschitz_z: Some(lipschitz_z),
        }
    }
}

impl Loss for SquaredDistance {
    fn value(&self, z: &[f64], theta: &[f64]) -> f64 {
        assert_eq!(
            z.len(),
            theta.len(),
            "squared distance needs matching dimensions"
        );
        z.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn grad_theta(&self, z: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
        Some(theta.iter().zip(z).map(|(t, v)| 2.0 * (t - v)).collect())
    }

    fn grad_z(&self, z: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
        Some(z.iter().zip(theta).map(|(v, t)| 2.0 * (v - t)).collect())
    }

    fn kind(&self) -> LossKind {
        LossKind::SquaredDistance
    }

    fn bound(&self) -> Option<f64> {
        self.bound
    }

    fn lipschitz_z(&self) -> Option<f64> {
        self.lipschitz_z
    }
}

/// Numerically stable `log(1 + exp(m))`.
pub(crate) fn softplus(m: f64) -> f64 {
    m.max(0.0) + (-m.abs()).exp().ln_1p()
}

/// Numerically stable logistic sigmoid.
pub(crate) fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// Logistic log-loss with ridge penalty.
///
/// The observation is `z = (x, y)` with features `x` of the parameter's
/// dimension and a final label coordinate `y` (0 or 1 for classification;
/// real labels are accepted):
///
/// ```text
/// l(z; theta) = log(1 + exp(theta.x)) - y * theta.x + lambda/2 |theta|^2
/// ```
#[derive(Clone, Debug)]
pub struct LogisticRidge {
    lambda: f64,
}

impl LogisticRidge {
    pub fn new(lambda: f64) -> Self {
        assert!(lambda >= 0.0 && lambda.is_finite(), "ridge weight must be >= 0");
        LogisticRidge { lambda }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn split<'a>(&self, z: &'a [f64], theta: &[f64]) -> (&'a [f64], f64) {
        assert_eq!(
            z.len(),
            theta.len() + 1,
            "logistic observation must be features plus one label"
        );
        (&z[..theta.len()], z[theta.len()])
    }
}

impl Loss for LogisticRidge {
    fn value(&self, z: &[f64], theta: &[f64]) -> f64 {
        let (x, y) = self.split(z, theta);
        let m = dot(theta, x);
        softplus(m) - y * m + 0.5 * self.lambda * dot(theta, theta)
    }

    fn grad_theta(&self, z: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
        let (x, y) = self.split(z, theta);
        let s = sigmoid(dot(theta, x)) - y;
        Some(
            x.iter()
                .zip(theta)
                .map(|(xi, ti)| s * xi + self.lambda * ti)
                .collect(),
        )
    }

    fn grad_z(&self, z: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
        let (x, y) = self.split(z, theta);
        let m = dot(theta, x);
        let s = sigmoid(m) - y;
        let mut g: Vec<f64> = theta.iter().map(|ti| s * ti).collect();
        g.push(-m);
        Some(g)
    }

    fn kind(&self) -> LossKind {
        LossKind::LogisticRidge { lambda: self.lambda }
    }
}
