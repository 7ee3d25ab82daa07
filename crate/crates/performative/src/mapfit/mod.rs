//! Fitting the atlas parameter from deployment data.
//!
//! Every fitter consumes a [`Dataset`] of (deployed parameter,
//! observation) pairs and returns a [`FitResult`] whose estimate is
//! already clamped into the atlas's feasible box. Closed-form least
//! squares is used wherever the atlas structure allows it (coin,
//! scalar-response, location); the budgeted-response scenario gets a
//! band-mass matching estimator, and everything else routes through
//! projected-gradient ERM in [`fit_erm_projected_gd`].

mod erm;

pub use erm::{fit_erm_projected_gd, AffineMomentObjective, ErmObjective, ErmOptions};

use crate::core::Dataset;
use crate::error::FitError;
use crate::linalg::dot;
use nalgebra::{Cholesky, DMatrix, DVector};
use std::collections::BTreeMap;

/// A fitted atlas parameter.
#[derive(Clone, Debug)]
pub enum BetaHat {
    /// Flat parameter vector (scalar fits use length 1).
    Vector(Vec<f64>),
    /// Linear-map estimate with optional intercept (location atlas).
    Affine {
        m: DMatrix<f64>,
        b: Option<DVector<f64>>,
    },
}

impl BetaHat {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            BetaHat::Vector(v) if v.len() == 1 => Some(v[0]),
            _ => None,
        }
    }

    pub fn vector(&self) -> Option<&[f64]> {
        match self {
            BetaHat::Vector(v) => Some(v),
            _ => None,
        }
    }

    /// Flat layout shared with the atlases: vectors pass through; affine
    /// estimates pack `M` column-major with the intercept appended, the
    /// layout `LocationAtlas` unpacks.
    pub fn flatten(&self) -> Vec<f64> {
        match self {
            BetaHat::Vector(v) => v.clone(),
            BetaHat::Affine { m, b } => {
                let mut flat: Vec<f64> = m.as_slice().to_vec();
                if let Some(b) = b {
                    flat.extend_from_slice(b.as_slice());
                }
                flat
            }
        }
    }
}

/// Outcome of a fit: the estimate plus bookkeeping for diagnostics.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub beta: BetaHat,
    /// Final value of the fitter's own objective.
    pub objective: f64,
    /// Iterations consumed (0 for closed forms).
    pub iterations: usize,
    /// Whether clamping into the feasible box moved the raw estimate.
    pub clamped: bool,
    pub diagnostics: BTreeMap<String, String>,
}

impl FitResult {
    fn new(beta: BetaHat, objective: f64) -> Self {
        FitResult {
            beta,
            objective,
            iterations: 0,
            clamped: false,
            diagnostics: BTreeMap::new(),
        }
    }

    /// Compact `key=value; ...` rendering of the diagnostics, stable in
    /// key order.
    pub fn diagnostics_blob(&self) -> String {
        self.diagnostics
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Least-squares fit of the coin atlas coefficient.
///
/// The atlas mean is `1/2 + beta theta`, so regressing `z - 1/2` on
/// `theta` through the origin gives
/// `beta^ = sum theta_i (z_i - 1/2) / sum theta_i^2`, clamped into
/// `[0, COIN_BETA_MAX]`.
pub fn fit_coin_ls(data: &Dataset) -> Result<FitResult, FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    if data.theta_dim != 1 || data.obs_dim != 1 {
        return Err(FitError::BadData(format!(
            "coin fitter needs scalar pairs, got dims ({}, {})",
            data.theta_dim, data.obs_dim
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (theta, z) in &data.pairs {
        num += theta[0] * (z[0] - 0.5);
        den += theta[0] * theta[0];
    }
    if den == 0.0 {
        return Err(FitError::SingularDesign(
            "all deployed parameters are zero".into(),
        ));
    }
    let raw = num / den;
    let beta = raw.clamp(0.0, crate::atlas::COIN_BETA_MAX);
    let objective = data
        .pairs
        .iter()
        .map(|(t, z)| {
            let r = z[0] - 0.5 - beta * t[0];
            r * r
        })
        .sum::<f64>()
        / data.len() as f64;
    let mut result = FitResult::new(BetaHat::Vector(vec![beta]), objective);
    result.clamped = beta != raw;
    result.diagnostics.insert("raw_beta".into(), format!("{raw}"));
    result.diagnostics.insert("n".into(), format!("{}", data.len()));
    Ok(result)
}

/// Least-squares fit of a scalar response coefficient for models of the
/// form `x = x0 + beta * grad_u(theta, x)` with a centered base:
/// `beta^ = sum <x_i, g_i> / sum |g_i|^2`, clamped into `[lo, hi]`.
///
/// `x` is the first `x_dim` coordinates of each observation (trailing
/// coordinates — e.g. labels — are ignored); `g_i = grad_u(theta_i, x_i)`.
pub fn fit_scalar_beta_ls(
    data: &Dataset,
    grad_u: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
    x_dim: usize,
    beta_lo: f64,
    beta_hi: f64,
) -> Result<FitResult, FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    if x_dim == 0 || x_dim > data.obs_dim {
        return Err(FitError::BadData(format!(
            "feature length {x_dim} incompatible with observation dim {}",
            data.obs_dim
        )));
    }
    if !(beta_lo <= beta_hi) {
        return Err(FitError::InvalidConfig(format!(
            "need beta_lo <= beta_hi, got [{beta_lo}, {beta_hi}]"
        )));
    }
    let mut sxg = 0.0;
    let mut sgg = 0.0;
    for (theta, z) in &data.pairs {
        let x = &z[..x_dim];
        let g = grad_u(theta, x);
        sxg += dot(x, &g);
        sgg += dot(&g, &g);
    }
    if sgg == 0.0 {
        return Err(FitError::SingularDesign(
            "utility gradient vanished on every pair".into(),
        ));
    }
    let raw = sxg / sgg;
    let beta = raw.clamp(beta_lo, beta_hi);
    let objective = data
        .pairs
        .iter()
        .map(|(theta, z)| {
            let x = &z[..x_dim];
            let g = grad_u(theta, x);
            x.iter()
                .zip(&g)
                .map(|(xi, gi)| (xi - beta * gi) * (xi - beta * gi))
                .sum::<f64>()
        })
        .sum::<f64>()
        / data.len() as f64;
    let mut result = FitResult::new(BetaHat::Vector(vec![beta]), objective);
    result.clamped = beta != raw;
    result.diagnostics.insert("raw_beta".into(), format!("{raw}"));
    result.diagnostics.insert("n".into(), format!("{}", data.len()));
    Ok(result)
}

/// Least-squares fit of the location atlas: regress observations on the
/// selected parameter coordinates (plus an optional intercept) via the
/// normal equations. A rank-deficient design is an error, not a silent
/// pseudo-inverse.
pub fn fit_location_ls(
    data: &Dataset,
    i_prime: &[usize],
    intercept: bool,
) -> Result<FitResult, FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    if i_prime.is_empty() && !intercept {
        return Err(FitError::InvalidConfig(
            "need at least one regressor coordinate or an intercept".into(),
        ));
    }
    if i_prime.windows(2).any(|w| w[0] >= w[1])
        || i_prime.iter().any(|&j| j >= data.theta_dim)
    {
        return Err(FitError::InvalidConfig(
            "selected coordinates must be strictly increasing and in range".into(),
        ));
    }
    let k = i_prime.len();
    let p = k + usize::from(intercept);
    let d_z = data.obs_dim;
    let phi = |theta: &[f64]| -> DVector<f64> {
        let mut v = DVector::zeros(p);
        for (c, &j) in i_prime.iter().enumerate() {
            v[c] = theta[j];
        }
        if intercept {
            v[k] = 1.0;
        }
        v
    };
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DMatrix::<f64>::zeros(p, d_z);
    for (theta, z) in &data.pairs {
        let f = phi(theta);
        gram.ger(1.0, &f, &f, 1.0);
        for (col, &zv) in z.iter().enumerate() {
            for row in 0..p {
                rhs[(row, col)] += f[row] * zv;
            }
        }
    }
    let chol = Cholesky::new(gram).ok_or_else(|| {
        FitError::SingularDesign(format!(
            "normal equations are rank deficient ({} pairs for {p} regressors)",
            data.len()
        ))
    })?;
    let solution = chol.solve(&rhs); // p x d_z
    let m = DMatrix::from_fn(d_z, k, |r, c| solution[(c, r)]);
    let b = intercept.then(|| DVector::from_fn(d_z, |r, _| solution[(k, r)]));
    let mut sse = 0.0;
    for (theta, z) in &data.pairs {
        let f = phi(theta);
        for (col, &zv) in z.iter().enumerate() {
            let mut pred = 0.0;
            for row in 0..p {
                pred += f[row] * solution[(row, col)];
            }
            sse += (zv - pred) * (zv - pred);
        }
    }
    let mut result = FitResult::new(BetaHat::Affine { m, b }, sse / data.len() as f64);
    result.diagnostics.insert("n".into(), format!("{}", data.len()));
    result
        .diagnostics
        .insert("regressors".into(), format!("{p}"));
    Ok(result)
}

/// Budget estimator for the threshold-response scenario: match the
/// empirical mass in the band `|x . theta - threshold| <= epsilon` to the
/// base population's band probability.
///
/// `band_prob(beta)` must be the base-population probability
/// `P{ threshold - beta <= x0 . theta~ <= threshold }` — nondecreasing in
/// `beta` with `band_prob(0) = 0`; both properties are verified on a grid
/// before the monotone bisection runs. The estimate is clamped to
/// `[0, beta_max]` when the observed mass falls outside the band
/// probability's range. `epsilon` is always recorded in the diagnostics.
pub fn fit_budget_boundary_mass(
    data: &Dataset,
    band_prob: &dyn Fn(f64) -> f64,
    beta_max: f64,
    threshold: f64,
    epsilon: f64,
) -> Result<FitResult, FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(FitError::InvalidConfig(format!(
            "band half-width must be positive and finite, got {epsilon}"
        )));
    }
    if !(beta_max > 0.0 && beta_max.is_finite()) {
        return Err(FitError::InvalidConfig(format!(
            "budget bound must be positive and finite, got {beta_max}"
        )));
    }
    if data.obs_dim < data.theta_dim {
        return Err(FitError::BadData(format!(
            "observations ({}) must carry at least the feature block ({})",
            data.obs_dim, data.theta_dim
        )));
    }
    // Structural checks on the supplied band probability.
    let f0 = band_prob(0.0);
    if !f0.is_finite() || f0.abs() > 1e-9 {
        return Err(FitError::InvalidBandProb(format!(
            "band_prob(0) = {f0}, expected 0"
        )));
    }
    let mut prev = f0;
    for step in 1..=64 {
        let b = beta_max * step as f64 / 64.0;
        let v = band_prob(b);
        if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
            return Err(FitError::InvalidBandProb(format!(
                "band_prob({b}) = {v} is not a probability"
            )));
        }
        if v < prev - 1e-12 {
            return Err(FitError::InvalidBandProb(format!(
                "band_prob decreases at {b}: {v} < {prev}"
            )));
        }
        prev = v;
    }

    let d = data.theta_dim;
    let in_band = data
        .pairs
        .iter()
        .filter(|(theta, z)| (dot(&z[..d], theta) - threshold).abs() <= epsilon)
        .count();
    let q_hat = in_band as f64 / data.len() as f64;

    let (beta, iterations, clamped) = if q_hat <= band_prob(0.0) {
        (0.0, 0, false)
    } else if q_hat >= band_prob(beta_max) {
        (beta_max, 0, true)
    } else {
        let mut lo = 0.0;
        let mut hi = beta_max;
        let mut iters = 0;
        while hi - lo > 1e-10 && iters < 200 {
            let mid = 0.5 * (lo + hi);
            if band_prob(mid) < q_hat {
                lo = mid;
            } else {
                hi = mid;
            }
            iters += 1;
        }
        (0.5 * (lo + hi), iters, false)
    };

    let mut result = FitResult::new(
        BetaHat::Vector(vec![beta]),
        (band_prob(beta) - q_hat).abs(),
    );
    result.iterations = iterations;
    result.clamped = clamped;
    result
        .diagnostics
        .insert("epsilon".into(), format!("{epsilon}"));
    result.diagnostics.insert("q_hat".into(), format!("{q_hat}"));
    result.diagnostics.insert("n".into(), format!("{}", data.len()));
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{
        deploy_and_collect, Exploration, ParamBox, RngStream, ThetaSet,
    };
    use crate::maps::CoinMap;

    fn dataset(pairs: Vec<(Vec<f64>, Vec<f64>)>) -> Dataset {
        let theta_dim = pairs[0].0.len();
        let obs_dim = pairs[0].1.len();
        Dataset {
            pairs,
            seed: 0,
            stream: 0,
            theta_dim,
            obs_dim,
        }
    }

    #[test]
    fn coin_fit_balanced_data_gives_zero() {
        let data = dataset(vec![
            (vec![1.0], vec![1.0]),
            (vec![1.0], vec![0.0]),
            (vec![0.5], vec![1.0]),
            (vec![0.5], vec![0.0]),
        ]);
        let fit = fit_coin_ls(&data).unwrap();
        assert_eq!(fit.beta.scalar().unwrap(), 0.0);
        assert!(!fit.clamped);
    }

    #[test]
    fn coin_fit_clamps_at_upper_bound() {
        // All heads at theta = 1: raw estimate 0.5, clamped just below.
        let data = dataset(vec![(vec![1.0], vec![1.0]); 10]);
        let fit = fit_coin_ls(&data).unwrap();
        assert_eq!(fit.beta.scalar().unwrap(), crate::atlas::COIN_BETA_MAX);
        assert!(fit.clamped);
        assert_eq!(fit.diagnostics["raw_beta"], "0.5");
    }

    #[test]
    fn coin_fit_recovers_effective_coefficient() {
        // Uniform exploration on the quadratic coin: the least-squares
        // limit is mu + 3 eta / 4.
        let map = CoinMap::new(0.3, 0.2).unwrap();
        let expl = Exploration::Uniform(ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap()));
        let mut rng = RngStream::new(123, 0);
        let data = deploy_and_collect(&map, &expl, 200_000, &mut rng).unwrap();
        let fit = fit_coin_ls(&data).unwrap();
        let beta = fit.beta.scalar().unwrap();
        assert!((beta - 0.45).abs() < 0.02, "beta = {beta}");
    }

    #[test]
    fn coin_fit_rejects_degenerate_designs() {
        assert!(matches!(
            fit_coin_ls(&dataset(vec![(vec![0.0], vec![1.0])])),
            Err(FitError::SingularDesign(_))
        ));
        let wide = dataset(vec![(vec![0.5, 0.5], vec![1.0])]);
        assert!(matches!(fit_coin_ls(&wide), Err(FitError::BadData(_))));
    }

    #[test]
    fn scalar_beta_fit_exact_on_noiseless_response() {
        // x = 2 * theta and grad_u = theta: the estimate is exactly 2.
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (1..=20)
            .map(|i| {
                let t = i as f64 / 20.0;
                (vec![t, -t], vec![2.0 * t, -2.0 * t, 1.0])
            })
            .collect();
        let data = dataset(pairs);
        let fit =
            fit_scalar_beta_ls(&data, &|theta, _x| theta.to_vec(), 2, 0.0, 10.0).unwrap();
        assert!((fit.beta.scalar().unwrap() - 2.0).abs() < 1e-12);
        assert!(fit.objective < 1e-24);
    }

    #[test]
    fn scalar_beta_fit_clamps_into_box() {
        let data = dataset(vec![(vec![1.0], vec![5.0, 0.0])]);
        let fit = fit_scalar_beta_ls(&data, &|theta, _| theta.to_vec(), 1, 0.0, 2.0).unwrap();
        assert_eq!(fit.beta.scalar().unwrap(), 2.0);
        assert!(fit.clamped);
    }

    #[test]
    fn scalar_beta_fit_rejects_vanishing_gradients() {
        let data = dataset(vec![(vec![0.0], vec![1.0, 0.0])]);
        assert!(matches!(
            fit_scalar_beta_ls(&data, &|theta, _| theta.to_vec(), 1, 0.0, 2.0),
            Err(FitError::SingularDesign(_))
        ));
    }

    #[test]
    fn location_fit_recovers_noiseless_linear_map() {
        // z = diag(2, 3) theta + (1, -1), recovered to 1e-8.
        let mut rng = RngStream::new(9, 0);
        let expl = ThetaSet::unit_ball(2);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..50)
            .map(|_| {
                let t = expl.sample_uniform(&mut rng);
                let z = vec![2.0 * t[0] + 1.0, 3.0 * t[1] - 1.0];
                (t, z)
            })
            .collect();
        let data = dataset(pairs);
        let fit = fit_location_ls(&data, &[0, 1], true).unwrap();
        let BetaHat::Affine { m, b } = &fit.beta else {
            panic!("expected affine estimate");
        };
        let b = b.as_ref().unwrap();
        assert!((m[(0, 0)] - 2.0).abs() < 1e-8);
        assert!((m[(1, 1)] - 3.0).abs() < 1e-8);
        assert!(m[(0, 1)].abs() < 1e-8 && m[(1, 0)].abs() < 1e-8);
        assert!((b[0] - 1.0).abs() < 1e-8 && (b[1] + 1.0).abs() < 1e-8);
        assert!(fit.objective < 1e-16);
    }

    #[test]
    fn location_fit_singular_design_rejected() {
        // One pair cannot identify two regressors plus intercept.
        let data = dataset(vec![(vec![0.5, 0.5], vec![1.0, 1.0])]);
        assert!(matches!(
            fit_location_ls(&data, &[0, 1], true),
            Err(FitError::SingularDesign(_))
        ));
    }

    #[test]
    fn location_fit_subset_ignores_omitted_coordinates() {
        // Only coordinate 0 is selected; the fit regresses on it alone.
        let mut rng = RngStream::new(10, 0);
        let expl = ThetaSet::unit_ball(2);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..200)
            .map(|_| {
                let t = expl.sample_uniform(&mut rng);
                (t.clone(), vec![4.0 * t[0]])
            })
            .collect();
        let data = dataset(pairs);
        let fit = fit_location_ls(&data, &[0], false).unwrap();
        let flat = fit.beta.flatten();
        assert_eq!(flat.len(), 1);
        assert!((flat[0] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn budget_fit_uniform_base_example() {
        // Analytic uniform-projection band: band_prob(beta) = beta (for
        // beta <= 1/2). Build data with exactly 20% of scores inside the
        // epsilon-band around the threshold.
        let mut pairs = Vec::new();
        for i in 0..1000 {
            let score = if i < 200 { 0.5 } else { 0.1 };
            pairs.push((vec![1.0], vec![score, 0.0]));
        }
        let data = dataset(pairs);
        let fit = fit_budget_boundary_mass(&data, &|b| b.min(0.5), 0.5, 0.5, 0.01).unwrap();
        let beta = fit.beta.scalar().unwrap();
        assert!((beta - 0.2).abs() < 1e-9, "beta = {beta}");
        assert_eq!(fit.diagnostics["epsilon"], "0.01");
        assert_eq!(fit.diagnostics["q_hat"], "0.2");
    }

    #[test]
    fn budget_fit_clamps_when_mass_exceeds_range() {
        let pairs = vec![(vec![1.0], vec![0.5, 0.0]); 10];
        let data = dataset(pairs);
        // All mass at the threshold but band_prob tops out at 0.3.
        let fit =
            fit_budget_boundary_mass(&data, &|b| (b * 0.6).min(0.3), 0.5, 0.5, 0.01).unwrap();
        assert_eq!(fit.beta.scalar().unwrap(), 0.5);
        assert!(fit.clamped);
    }

    #[test]
    fn budget_fit_rejects_bad_band_probabilities() {
        let data = dataset(vec![(vec![1.0], vec![0.5, 0.0])]);
        // Nonzero at 0.
        assert!(matches!(
            fit_budget_boundary_mass(&data, &|_| 0.1, 0.5, 0.5, 0.01),
            Err(FitError::InvalidBandProb(_))
        ));
        // Decreasing.
        assert!(matches!(
            fit_budget_boundary_mass(&data, &|b| 0.5 - b, 0.5, 0.5, 0.01),
            Err(FitError::InvalidBandProb(_))
        ));
        // Not a probability.
        assert!(matches!(
            fit_budget_boundary_mass(&data, &|b| 3.0 * b, 0.5, 0.5, 0.01),
            Err(FitError::InvalidBandProb(_))
        ));
        // Bad epsilon.
        assert!(matches!(
            fit_budget_boundary_mass(&data, &|b| b, 0.5, 0.5, 0.0),
            Err(FitError::InvalidConfig(_))
        ));
    }

    #[test]
    fn coin_fit_error_shrinks_like_root_n() {
        // log-log slope of the fit error against the budget stays near
        // -1/2 for sqrt(n)-consistent estimators.
        let map = CoinMap::new(0.3, 0.2).unwrap();
        let beta_star = 0.3 + 0.75 * 0.2;
        let expl = Exploration::Uniform(ThetaSet::Box(ParamBox::interval(0.0, 1.0).unwrap()));
        let budgets = [100usize, 1000, 10_000, 100_000];
        let reps = 20;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (bi, &n) in budgets.iter().enumerate() {
            let mut mean_err = 0.0;
            for rep in 0..reps {
                let mut rng = RngStream::new(7000 + rep as u64, bi as u64);
                let data = deploy_and_collect(&map, &expl, n, &mut rng).unwrap();
                let fit = fit_coin_ls(&data).unwrap();
                mean_err += (fit.beta.scalar().unwrap() - beta_star).abs();
            }
            mean_err /= reps as f64;
            xs.push((n as f64).ln());
            ys.push(mean_err.ln());
        }
        let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
        let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - xbar) * (y - ybar))
            .sum::<f64>()
            / xs.iter().map(|x| (x - xbar) * (x - xbar)).sum::<f64>();
        assert!(
            (-0.65..=-0.35).contains(&slope),
            "slope = {slope}, errors = {ys:?}"
        );
    }
}
