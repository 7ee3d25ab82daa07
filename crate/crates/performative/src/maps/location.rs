//! Gaussian location family with a quadratic mean response.
//!
//! Deploying `theta` shifts the observation's mean linearly through `M1`
//! and quadratically (coordinatewise square) through `M2`:
//!
//! ```text
//! z = b + M1 theta + s * M2 (theta . theta) + sigma * eps,   eps ~ N(0, I).
//! ```
//!
//! With `s = 0` the family is exactly the linear location model a
//! linear-in-parameters atlas assumes; `s > 0` dials in controlled
//! misspecification without changing the noise or the geometry.

use crate::core::{RngStream, TrueMap};
use crate::error::MapError;
use crate::linalg::operator_norm;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug)]
pub struct LocationQuadMap {
    b: DVector<f64>,
    m1: DMatrix<f64>,
    m2: DMatrix<f64>,
    s: f64,
    sigma: f64,
}

impl LocationQuadMap {
    pub fn new(
        b: DVector<f64>,
        m1: DMatrix<f64>,
        m2: DMatrix<f64>,
        s: f64,
        sigma: f64,
    ) -> Result<Self, MapError> {
        if m1.nrows() != b.len() || m2.nrows() != b.len() || m1.ncols() != m2.ncols() {
            return Err(MapError::InvalidConfig(format!(
                "inconsistent shapes: b is {}, M1 is {}x{}, M2 is {}x{}",
                b.len(),
                m1.nrows(),
                m1.ncols(),
                m2.nrows(),
                m2.ncols()
            )));
        }
        if m1.ncols() == 0 || b.is_empty() {
            return Err(MapError::InvalidConfig("dimensions must be at least 1".into()));
        }
        if !s.is_finite() {
            return Err(MapError::InvalidConfig(format!("s must be finite, got {s}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(MapError::InvalidConfig(format!(
                "sigma must be finite and nonnegative, got {sigma}"
            )));
        }
        Ok(LocationQuadMap { b, m1, m2, s, sigma })
    }

    /// Random square instance of dimension `d`: `M1`, `M2` have iid
    /// standard-normal entries rescaled to unit operator norm, and
    /// `b ~ N(0, I_d)`. Fully determined by the three seeds.
    pub fn generate(d: usize, s: f64, sigma: f64, b_seed: u64, m1_seed: u64, m2_seed: u64) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        let draw_matrix = |seed: u64| -> DMatrix<f64> {
            let mut rng = RngStream::new(seed, 0);
            let mut m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = operator_norm(&m);
            if norm > 0.0 {
                m /= norm;
            }
            m
        };
        let m1 = draw_matrix(m1_seed);
        let m2 = draw_matrix(m2_seed);
        let mut rng = RngStream::new(b_seed, 0);
        let b = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        LocationQuadMap::new(b, m1, m2, s, sigma).expect("generated shapes are consistent")
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn m1(&self) -> &DMatrix<f64> {
        &self.m1
    }

    pub fn m2(&self) -> &DMatrix<f64> {
        &self.m2
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Mean of `D(theta)`: `b + M1 theta + s M2 (theta . theta)`.
    pub fn mean(&self, theta: &[f64]) -> DVector<f64> {
        let t = DVector::from_column_slice(theta);
        let tsq = DVector::from_iterator(theta.len(), theta.iter().map(|v| v * v));
        &self.b + &self.m1 * t + self.s * (&self.m2 * tsq)
    }

    /// Jacobian of the mean: `M1 + 2 s M2 diag(theta)`.
    pub fn mean_jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        let mut j = self.m1.clone();
        for (c, &t) in theta.iter().enumerate() {
            let col = 2.0 * self.s * t;
            for r in 0..j.nrows() {
                j[(r, c)] += col * self.m2[(r, c)];
            }
        }
        j
    }

    /// Closed-form performative risk under squared distance (requires the
    /// observation and parameter dimensions to match):
    /// `|mean(theta) - theta|^2 + d * sigma^2`.
    pub fn true_risk_sq(&self, theta: &[f64]) -> f64 {
        assert_eq!(
            self.b.len(),
            theta.len(),
            "squared-distance risk needs matching dimensions"
        );
        let r = self.mean(theta) - DVector::from_column_slice(theta);
        r.norm_squared() + self.b.len() as f64 * self.sigma * self.sigma
    }
}

impl TrueMap for LocationQuadMap {
    fn theta_dim(&self) -> usize {
        self.m1.ncols()
    }

    fn obs_dim(&self) -> usize {
        self.b.len()
    }

    fn sample(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>, MapError> {
        if theta.len() != self.theta_dim() {
            return Err(MapError::ThetaDimension {
                expected: self.theta_dim(),
                got: theta.len(),
            });
        }
        let mean = self.mean(theta);
        let mut z = Vec::with_capacity(self.obs_dim());
        for i in 0..self.obs_dim() {
            let noise: f64 = if self.sigma > 0.0 {
                self.sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            z.push(mean[i] + noise);
        }
        Ok(z)
    }
}
