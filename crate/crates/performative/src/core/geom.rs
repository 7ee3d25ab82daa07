//! Parameter-space geometry: balls, boxes, spheres, projections, and
//! uniform sampling.
//!
//! Feasible sets show up in three shapes here: Euclidean balls (location
//! and strategic-regression scenarios), axis-aligned boxes (the coin's
//! [0,1] interval, atlas-parameter domains), and the unit sphere
//! (strategic classification, where only the decision boundary matters).
//! [`ThetaSet`] unifies them behind one projection/sampling interface.

use crate::core::rng::RngStream;
use crate::error::CoreError;
use crate::linalg::norm2;
use rand::Rng;
use rand_distr::StandardNormal;

/// Closed Euclidean ball of a given dimension and radius, centered at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBall {
    dim: usize,
    radius: f64,
}

impl ParamBall {
    pub fn new(dim: usize, radius: f64) -> Result<Self, CoreError> {
        if dim == 0 {
            return Err(CoreError::ZeroDimension);
        }
        if !radius.is_finite() || radius < 0.0 {
            return Err(CoreError::BadRadius(radius));
        }
        Ok(ParamBall { dim, radius })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && norm2(x) <= self.radius
    }
}

/// Euclidean projection of `x` onto the ball of the given radius.
///
/// The result satisfies membership *exactly* (`norm2(y) <= radius` as
/// floating-point predicates): after the rescale, the point is shrunk by
/// one epsilon-step at a time until rounding can no longer push it outside.
pub fn project_ball(x: &[f64], radius: f64) -> Vec<f64> {
    debug_assert!(radius >= 0.0 && radius.is_finite());
    let n = norm2(x);
    if n <= radius {
        return x.to_vec();
    }
    let scale = radius / n;
    let mut y: Vec<f64> = x.iter().map(|v| v * scale).collect();
    while norm2(&y) > radius {
        for v in &mut y {
            *v *= 1.0 - f64::EPSILON;
        }
    }
    y
}

/// Uniform direction on the unit sphere in `dim` dimensions (normalized
/// Gaussian, redrawn on the measure-zero chance of a zero vector).
pub fn unit_sphere_direction(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    debug_assert!(dim >= 1);
    let mut dir = vec![0.0; dim];
    let mut n = 0.0;
    while n == 0.0 {
        for v in dir.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        n = norm2(&dir);
    }
    dir.iter_mut().for_each(|v| *v /= n);
    dir
}

/// Uniform draw from a ball: Gaussian direction, radius `R * U^{1/d}`.
///
/// The returned point satisfies ball membership exactly (same epsilon
/// nudge as [`project_ball`]).
pub fn sample_uniform_ball(ball: &ParamBall, rng: &mut RngStream) -> Vec<f64> {
    let d = ball.dim();
    let dir = unit_sphere_direction(d, rng);
    let u: f64 = rng.gen();
    let r = ball.radius() * u.powf(1.0 / d as f64);
    let mut point: Vec<f64> = dir.iter().map(|v| v * r).collect();
    while norm2(&point) > ball.radius() {
        for v in &mut point {
            *v *= 1.0 - f64::EPSILON;
        }
    }
    point
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
///
/// Bounds may be infinite (used for unconstrained atlas parameters), but
/// never NaN, and `lo <= hi` coordinatewise.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, CoreError> {
        if lo.is_empty() {
            return Err(CoreError::ZeroDimension);
        }
        if lo.len() != hi.len() {
            return Err(CoreError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(CoreError::BadBox { index: i, lo: l, hi: h });
            }
        }
        Ok(ParamBox { lo, hi })
    }

    /// Scalar interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self, CoreError> {
        ParamBox::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| v >= l && v <= h)
    }

    /// Coordinatewise clamp onto the box.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| v.clamp(l, h))
            .collect()
    }

    /// Box midpoint; unbounded coordinates fall back to the finite bound,
    /// or 0 when both sides are infinite.
    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| match (l.is_finite(), h.is_finite()) {
                (true, true) => 0.5 * (l + h),
                (true, false) => l,
                (false, true) => h,
                (false, false) => 0.0,
            })
            .collect()
    }

    /// Uniform draw; requires finite bounds.
    pub fn sample_uniform(&self, rng: &mut RngStream) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| {
                assert!(
                    l.is_finite() && h.is_finite(),
                    "uniform sampling needs finite box bounds"
                );
                if l == h {
                    l
                } else {
                    rng.gen_range(l..=h)
                }
            })
            .collect()
    }
}

/// A feasible parameter set: ball, box, or unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub enum ThetaSet {
    Ball(ParamBall),
    Box(ParamBox),
    /// Unit sphere `{theta : |theta| = 1}`; membership up to 1e-9.
    Sphere { dim: usize },
}

impl ThetaSet {
    pub fn unit_ball(dim: usize) -> Self {
        ThetaSet::Ball(ParamBall::new(dim, 1.0).expect("dim >= 1"))
    }

    pub fn dim(&self) -> usize {
        match self {
            ThetaSet::Ball(b) => b.dim(),
            ThetaSet::Box(b) => b.dim(),
            ThetaSet::Sphere { dim } => *dim,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            ThetaSet::Ball(b) => b.contains(x),
            ThetaSet::Box(b) => b.contains(x),
            ThetaSet::Sphere { dim } => x.len() == *dim && (norm2(x) - 1.0).abs() <= 1e-9,
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ThetaSet::Ball(b) => project_ball(x, b.radius()),
            ThetaSet::Box(b) => b.project(x),
            ThetaSet::Sphere { dim } => {
                let n = norm2(x);
                if n == 0.0 {
                    // No nearest point is defined at the origin; return the
                    // diagonal unit vector for determinism.
                    let v = 1.0 / (*dim as f64).sqrt();
                    return vec![v; *dim];
                }
                x.iter().map(|v| v / n).collect()
            }
        }
    }

    pub fn sample_uniform(&self, rng: &mut RngStream) -> Vec<f64> {
        match self {
            ThetaSet::Ball(b) => sample_uniform_ball(b, rng),
            ThetaSet::Box(b) => b.sample_uniform(rng),
            ThetaSet::Sphere { dim } => unit_sphere_direction(*dim, rng),
        }
    }

    /// A canonical interior point used to start descents.
    pub fn center(&self) -> Vec<f64> {
        match self {
            ThetaSet::Ball(b) => vec![0.0; b.dim()],
            ThetaSet::Box(b) => b.center(),
            ThetaSet::Sphere { dim } => {
                let v = 1.0 / (*dim as f64).sqrt();
                vec![v; *dim]
            }
        }
    }

    /// Axis-aligned bounding box, for grid construction.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ThetaSet::Ball(b) => (vec![-b.radius(); b.dim()], vec![b.radius(); b.dim()]),
            ThetaSet::Box(b) => (b.lo().to_vec(), b.hi().to_vec()),
            ThetaSet::Sphere { dim } => (vec![-1.0; *dim], vec![1.0; *dim]),
        }
    }

    /// Characteristic length scale, used to default step sizes.
    pub fn scale(&self) -> f64 {
        match self {
            ThetaSet::Ball(b) => b.radius().max(f64::MIN_POSITIVE),
            ThetaSet::Box(b) => {
                let mut m: f64 = 0.0;
                for (&l, &h) in b.lo().iter().zip(b.hi()) {
                    if l.is_finite() && h.is_finite() {
                        m = m.max(0.5 * (h - l));
                    }
                }
                if m == 0.0 {
                    1.0
                } else {
                    m
                }
            }
            ThetaSet::Sphere { .. } => 1.0,
        }
    }
}
