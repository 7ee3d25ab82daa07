//! Linear location atlas: `D_beta(theta) = N(b + M theta_I, sigma^2 I)`.
//!
//! The atlas mean is affine in a selected subset `I` of the deployed
//! parameter's coordinates (the full set by default); `beta` packs the
//! matrix `M` and, when enabled, the intercept `b`. Omitting coordinates
//! from `I` deliberately under-specifies the model — the omitted-variable
//! study — while `sigma` is a modeling choice that shifts the squared-loss
//! risk by a constant and never moves its argmin (the default is 0).

use crate::atlas::Atlas;
use crate::core::{Loss, LossKind, ParamBox, RngStream};
use crate::error::MapError;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug)]
pub struct LocationAtlas {
    theta_dim: usize,
    obs_dim: usize,
    i_prime: Vec<usize>,
    intercept: bool,
    noise_sigma: f64,
}

impl LocationAtlas {
    /// `i_prime = None` selects every parameter coordinate. Indices must be
    /// strictly increasing and in range.
    pub fn new(
        theta_dim: usize,
        obs_dim: usize,
        i_prime: Option<Vec<usize>>,
        intercept: bool,
        noise_sigma: f64,
    ) -> Result<Self, MapError> {
        if theta_dim == 0 || obs_dim == 0 {
            return Err(MapError::InvalidConfig("dimensions must be at least 1".into()));
        }
        let i_prime = i_prime.unwrap_or_else(|| (0..theta_dim).collect());
        if i_prime.is_empty() && !intercept {
            return Err(MapError::InvalidConfig(
                "need at least one selected coordinate or an intercept".into(),
            ));
        }
        if i_prime.windows(2).any(|w| w[0] >= w[1]) || i_prime.iter().any(|&j| j >= theta_dim) {
            return Err(MapError::InvalidConfig(
                "selected coordinates must be strictly increasing and in range".into(),
            ));
        }
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(MapError::InvalidConfig(format!(
                "noise sigma must be finite and >= 0, got {noise_sigma}"
            )));
        }
        Ok(LocationAtlas {
            theta_dim,
            obs_dim,
            i_prime,
            intercept,
            noise_sigma,
        })
    }

    pub fn i_prime(&self) -> &[usize] {
        &self.i_prime
    }

    pub fn intercept(&self) -> bool {
        self.intercept
    }

    /// Flat parameter layout: `M` column-major (`obs_dim x |I|`), then the
    /// intercept when enabled.
    pub fn pack(&self, m: &DMatrix<f64>, b: Option<&DVector<f64>>) -> Vec<f64> {
        assert_eq!(m.nrows(), self.obs_dim);
        assert_eq!(m.ncols(), self.i_prime.len());
        assert_eq!(b.is_some(), self.intercept);
        let mut flat: Vec<f64> = m.as_slice().to_vec();
        if let Some(b) = b {
            assert_eq!(b.len(), self.obs_dim);
            flat.extend_from_slice(b.as_slice());
        }
        flat
    }

    pub fn unpack(&self, beta: &[f64]) -> (DMatrix<f64>, Option<DVector<f64>>) {
        let k = self.i_prime.len();
        assert_eq!(beta.len(), self.beta_dim(), "flat parameter length");
        let m = DMatrix::from_column_slice(self.obs_dim, k, &beta[..self.obs_dim * k]);
        let b = self
            .intercept
            .then(|| DVector::from_column_slice(&beta[self.obs_dim * k..]));
        (m, b)
    }

    fn mean(&self, beta: &[f64], theta: &[f64]) -> DVector<f64> {
        let (m, b) = self.unpack(beta);
        let sel = DVector::from_iterator(self.i_prime.len(), self.i_prime.iter().map(|&j| theta[j]));
        let mut mean = m * sel;
        if let Some(b) = b {
            mean += b;
        }
        mean
    }
}

/// Closed-form modeled risk under squared distance, for an atlas whose
/// observation dimension matches the parameter's:
/// `|b + M theta_I - theta|^2` (the noise constant is dropped — it never
/// moves the argmin).
pub fn location_atlas_risk(
    m: &DMatrix<f64>,
    b: Option<&DVector<f64>>,
    theta: &[f64],
    i_prime: &[usize],
) -> f64 {
    assert_eq!(m.nrows(), theta.len(), "risk needs matching dimensions");
    assert_eq!(m.ncols(), i_prime.len());
    let mut r = DVector::from_column_slice(theta);
    r = -r;
    if let Some(b) = b {
        r += b;
    }
    for (c, &j) in i_prime.iter().enumerate() {
        let t = theta[j];
        for row in 0..m.nrows() {
            r[row] += m[(row, c)] * t;
        }
    }
    r.norm_squared()
}

/// Gradient in `theta` of [`location_atlas_risk`].
pub fn location_atlas_risk_grad(
    m: &DMatrix<f64>,
    b: Option<&DVector<f64>>,
    theta: &[f64],
    i_prime: &[usize],
) -> Vec<f64> {
    assert_eq!(m.nrows(), theta.len());
    let mut r = DVector::from_column_slice(theta);
    r = -r;
    if let Some(b) = b {
        r += b;
    }
    for (c, &j) in i_prime.iter().enumerate() {
        let t = theta[j];
        for row in 0..m.nrows() {
            r[row] += m[(row, c)] * t;
        }
    }
    // d|r|^2 = 2 r . dr, with dr/dtheta_j = M e_c - e_j on selected
    // coordinates and -e_j elsewhere.
    let mut grad: Vec<f64> = (0..theta.len()).map(|j| -2.0 * r[j]).collect();
    for (c, &j) in i_prime.iter().enumerate() {
        let mut col_dot = 0.0;
        for row in 0..m.nrows() {
            col_dot += m[(row, c)] * r[row];
        }
        grad[j] += 2.0 * col_dot;
    }
    grad
}

impl Atlas for LocationAtlas {
    fn beta_dim(&self) -> usize {
        self.obs_dim * self.i_prime.len() + if self.intercept { self.obs_dim } else { 0 }
    }

    fn theta_dim(&self) -> usize {
        self.theta_dim
    }

    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn beta_box(&self) -> ParamBox {
        ParamBox::new(
            vec![f64::NEG_INFINITY; self.beta_dim()],
            vec![f64::INFINITY; self.beta_dim()],
        )
        .expect("unbounded box")
    }

    fn sample(
        &self,
        beta: &[f64],
        theta: &[f64],
        rng: &mut RngStream,
    ) -> Result<Vec<f64>, MapError> {
        if theta.len() != self.theta_dim {
            return Err(MapError::ThetaDimension {
                expected: self.theta_dim,
                got: theta.len(),
            });
        }
        if beta.len() != self.beta_dim() {
            return Err(MapError::InvalidConfig(format!(
                "atlas parameter length {} does not match expected {}",
                beta.len(),
                self.beta_dim()
            )));
        }
        let mean = self.mean(beta, theta);
        let mut z = Vec::with_capacity(self.obs_dim);
        for i in 0..self.obs_dim {
            let noise: f64 = if self.noise_sigma > 0.0 {
                self.noise_sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            z.push(mean[i] + noise);
        }
        Ok(z)
    }

    fn closed_form_risk(&self, beta: &[f64], theta: &[f64], loss: &dyn Loss) -> Option<f64> {
        if loss.kind() != LossKind::SquaredDistance || self.obs_dim != self.theta_dim {
            return None;
        }
        let (m, b) = self.unpack(beta);
        Some(location_atlas_risk(&m, b.as_ref(), theta, &self.i_prime))
    }

    fn closed_form_risk_grad(
        &self,
        beta: &[f64],
        theta: &[f64],
        loss: &dyn Loss,
    ) -> Option<Vec<f64>> {
        if loss.kind() != LossKind::SquaredDistance || self.obs_dim != self.theta_dim {
            return None;
        }
        let (m, b) = self.unpack(beta);
        Some(location_atlas_risk_grad(&m, b.as_ref(), theta, &self.i_prime))
    }

    fn name(&self) -> &'static str {
        "location"
    }
}
