//! Risk estimation, distributional distances, and the quantities behind
//! the excess-risk decomposition.
//!
//! [`performative_risk_mc`] and [`excess_risk`] score deployed parameters
//! against the ground truth. [`wasserstein1_empirical`] and
//! [`tv_empirical`] measure how far two sample clouds sit apart — the
//! distances in which map smoothness and misspecification are stated.
//! [`sup_gap_on_grid`] estimates the sup-norm gap between two risk
//! surfaces, which is how misspecification and estimation error enter the
//! excess-risk bound.

use crate::core::{Loss, RngStream, ThetaSet, TrueMap};
use crate::error::MetricError;

/// Monte-Carlo estimate of the performative risk `PR(theta)` with its
/// standard error, from `m >= 2` fresh draws of `map` at `theta`.
///
/// Pass a counting wrapper charged to the *evaluation* ledger: scoring
/// draws must never be billed to a method's sample budget.
pub fn performative_risk_mc(
    map: &dyn TrueMap,
    theta: &[f64],
    loss: &dyn Loss,
    m: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64), MetricError> {
    if m < 2 {
        return Err(MetricError::TooFewSamples { need: 2, got: m });
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..m {
        let z = map.sample(theta, rng)?;
        let v = loss.value(&z, theta);
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (m - 1) as f64;
    Ok((mean, (var / m as f64).sqrt()))
}

/// Excess performative risk of `theta_hat` over a precomputed optimum:
/// `PR_mc(theta_hat) - oracle.1`, where `oracle = (theta_po, pr_at_po)`.
///
/// The estimate is reported raw — Monte Carlo noise can push it slightly
/// negative, and clipping would bias averages across repetitions.
pub fn excess_risk(
    map: &dyn TrueMap,
    loss: &dyn Loss,
    theta_hat: &[f64],
    oracle: (&[f64], f64),
    m: usize,
    rng: &mut RngStream,
) -> Result<f64, MetricError> {
    let (theta_po, pr_star) = oracle;
    if theta_po.len() != theta_hat.len() {
        return Err(MetricError::UnequalLengths {
            a: theta_po.len(),
            b: theta_hat.len(),
        });
    }
    let (estimate, _se) = performative_risk_mc(map, theta_hat, loss, m, rng)?;
    Ok(estimate - pr_star)
}

/// Exact 1-Wasserstein distance between the empirical laws of two
/// equal-length scalar sample lists: sort both and average the absolute
/// differences of order statistics.
///
/// Multivariate clouds are compared along caller-chosen projection
/// directions; this keeps the distance one-dimensional, which is all the
/// coupled-smoothness checks need.
pub fn wasserstein1_empirical(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::UnequalLengths {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let sum: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.len() as f64)
}

/// Histogram binning rule for [`tv_empirical`].
#[derive(Clone, Copy, Debug)]
pub enum BinSpec {
    /// Freedman–Diaconis width `2 IQR / n^(1/3)` on the pooled samples,
    /// capped to between 2 and 512 bins. Zero-width degenerate cases use
    /// the cap, which separates point masses as finely as allowed.
    FreedmanDiaconis,
    /// A fixed bin count (at least 2).
    Fixed(usize),
}

/// Total-variation distance between the empirical laws of two sample
/// lists: half the L1 distance between histograms normalized on a shared
/// range. Histogram TV underestimates the true TV by the mass that
/// binning merges, so disjoint-support clouds read 1 only up to binning.
pub fn tv_empirical(a: &[f64], b: &[f64], bins: BinSpec) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let k = match bins {
        BinSpec::Fixed(k) => {
            if k < 2 {
                return Err(MetricError::TooFewBins(k));
            }
            k
        }
        BinSpec::FreedmanDiaconis => freedman_diaconis_bins(a, b),
    };
    let lo = a
        .iter()
        .chain(b)
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = a
        .iter()
        .chain(b)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        // Both clouds sit on one point: identical empirical laws.
        return Ok(0.0);
    }
    let mut ha = vec![0.0f64; k];
    let mut hb = vec![0.0f64; k];
    let bin_of = |x: f64| (((x - lo) / range * k as f64) as usize).min(k - 1);
    for &x in a {
        ha[bin_of(x)] += 1.0 / a.len() as f64;
    }
    for &x in b {
        hb[bin_of(x)] += 1.0 / b.len() as f64;
    }
    let l1: f64 = ha.iter().zip(&hb).map(|(p, q)| (p - q).abs()).sum();
    // Rounding in the histogram weights can push the sum a few ulps past
    // the mathematical range [0, 1].
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

/// Freedman–Diaconis bin count on the pooled samples, capped to [2, 512].
fn freedman_diaconis_bins(a: &[f64], b: &[f64]) -> usize {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let n = pooled.len();
    let range = pooled[n - 1] - pooled[0];
    let iqr = percentile(&pooled, 0.75) - percentile(&pooled, 0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    if !(width > 0.0) || !(range > 0.0) {
        return 512;
    }
    ((range / width).ceil() as usize).clamp(2, 512)
}

/// Linear-interpolation percentile of an already sorted list.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Grid resolution for [`sup_gap_on_grid`].
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    /// Uniform points for one-dimensional parameter sets.
    pub line_points: usize,
    /// Quasi-random ball points for higher-dimensional sets.
    pub ball_points: usize,
    /// Start offset into the low-discrepancy sequence; fixed by default
    /// so every caller sees the same grid.
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            line_points: 401,
            ball_points: 512,
            seed: 0,
        }
    }
}

/// A sup-norm gap estimate, with the resolution that produced it.
///
/// Grid sups *undershoot* the true sup; consumers that feed this into an
/// inequality add explicit grid slack.
#[derive(Clone, Debug)]
pub struct SupGapReport {
    /// Largest absolute gap seen on the grid.
    pub gap: f64,
    /// Grid point attaining it.
    pub argmax: Vec<f64>,
    /// Number of grid points evaluated.
    pub grid_points: usize,
}

/// Maximum of `|risk_a(theta) - risk_b(theta)|` over a deterministic grid
/// on `theta_set`: uniform points in one dimension, low-discrepancy
/// points in the set's circumscribed ball (projected into the set) above.
///
/// Any non-finite evaluator value aborts with the offending point.
pub fn sup_gap_on_grid(
    risk_a: &dyn Fn(&[f64]) -> f64,
    risk_b: &dyn Fn(&[f64]) -> f64,
    theta_set: &ThetaSet,
    grid: &GridSpec,
) -> Result<SupGapReport, MetricError> {
    if grid.line_points < 2 || grid.ball_points < 2 {
        return Err(MetricError::TooFewSamples {
            need: 2,
            got: grid.line_points.min(grid.ball_points),
        });
    }
    let points = sup_grid_points(theta_set, grid);
    let mut best = f64::NEG_INFINITY;
    let mut argmax = points[0].clone();
    for p in &points {
        let va = risk_a(p);
        let vb = risk_b(p);
        if !va.is_finite() || !vb.is_finite() {
            return Err(MetricError::EvaluatorFailure { point: p.clone() });
        }
        let gap = (va - vb).abs();
        if gap > best {
            best = gap;
            argmax = p.clone();
        }
    }
    Ok(SupGapReport {
        gap: best,
        argmax,
        grid_points: points.len(),
    })
}

/// Deterministic evaluation grid on `theta_set`.
fn sup_grid_points(theta_set: &ThetaSet, grid: &GridSpec) -> Vec<Vec<f64>> {
    let d = theta_set.dim();
    let center = theta_set.center();
    let (lo, hi) = theta_set.bounding_box();
    if d == 1 {
        // Infinite bounds fall back to one extent around the center.
        let scale = theta_set.scale();
        let l = if lo[0].is_finite() { lo[0] } else { center[0] - scale };
        let h = if hi[0].is_finite() { hi[0] } else { center[0] + scale };
        let n = grid.line_points;
        return (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                theta_set.project(&[l + t * (h - l)])
            })
            .collect();
    }
    // Ball and sphere sets fill their own ball; boxes use the
    // circumscribed ball (center of the bounding box, radius to its
    // farthest corner, extent-limited where bounds are infinite) and
    // projection pulls exterior points onto the faces.
    let (c, radius) = match theta_set {
        ThetaSet::Ball(b) => (vec![0.0; d], b.radius()),
        ThetaSet::Sphere { .. } => (vec![0.0; d], 1.0),
        ThetaSet::Box(_) => {
            let scale = theta_set.scale();
            let mut radius2 = 0.0;
            let mut c = vec![0.0; d];
            for j in 0..d {
                let l = if lo[j].is_finite() { lo[j] } else { center[j] - scale };
                let h = if hi[j].is_finite() { hi[j] } else { center[j] + scale };
                c[j] = 0.5 * (l + h);
                radius2 += (h - c[j]) * (h - c[j]);
            }
            (c, radius2.sqrt())
        }
    };
    let radius = radius.max(f64::MIN_POSITIVE);
    (0..grid.ball_points)
        .map(|i| {
            let p = quasi_ball_point(grid.seed + 1 + i as u64, d, &c, radius);
            theta_set.project(&p)
        })
        .collect()
}

/// Point `index` of a low-discrepancy sequence filling the ball
/// `center + radius * B_d`: Halton coordinates pushed through Box–Muller
/// for the direction and a radial `u^(1/d)` transform for the distance.
fn quasi_ball_point(index: u64, d: usize, center: &[f64], radius: f64) -> Vec<f64> {
    let pairs = d.div_ceil(2);
    let bases = first_primes(2 * pairs + 1);
    let mut gauss = Vec::with_capacity(2 * pairs);
    for j in 0..pairs {
        let u = halton(index, bases[2 * j]).max(1e-12);
        let v = halton(index, bases[2 * j + 1]);
        let r = (-2.0 * u.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * v;
        gauss.push(r * phi.cos());
        gauss.push(r * phi.sin());
    }
    gauss.truncate(d);
    let norm = gauss.iter().map(|g| g * g).sum::<f64>().sqrt().max(1e-300);
    let u_r = halton(index, bases[2 * pairs]);
    let rad = radius * u_r.powf(1.0 / d as f64);
    (0..d)
        .map(|j| center[j] + rad * gauss[j] / norm)
        .collect()
}

/// Van der Corput radical inverse of `index` in the given base.
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// First `k` primes, by trial division (k stays tiny: one per dimension).
fn first_primes(k: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(k);
    let mut n = 2u64;
    while primes.len() < k {
        if primes.iter().take_while(|&&p| p * p <= n).all(|&p| n % p != 0) {
            primes.push(n);
        }
        n += 1;
    }
    primes
}
