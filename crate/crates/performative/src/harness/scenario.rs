//! Scenario assembly: turning a config entry into runnable parts.
//!
//! A [`Scenario`] bundles everything one experiment needs — the
//! ground-truth map, the atlas the learner fits, the loss, the parameter
//! set, the exploration policy, and the fit recipe matching the atlas —
//! plus the reference quantities used for scoring: the true optimum
//! (exact where the scenario admits it, brute-force otherwise) and a
//! large-sample proxy for the atlas parameter the fitter converges to.

use super::config::ScenarioConfig;
use crate::atlas::{
    Atlas, CoinAtlas, LinearUtility, LocationAtlas, StratClassAtlas, StratRegAtlas,
};
use crate::core::{
    deploy_and_collect, derive_seed, hash_tag, softplus, unit_sphere_direction, Exploration,
    LogisticRidge, Loss, ParamBall, ParamBox, RngStream, SquaredDistance, ThetaSet, TrueMap,
};
use crate::descent::{projected_descent, DescentOptions};
use crate::error::{FitError, HarnessError, OptimizeError, OracleError};
use crate::linalg::{dot, operator_norm};
use crate::mapfit::{
    fit_budget_boundary_mass, fit_coin_ls, fit_location_ls, fit_scalar_beta_ls, BetaHat,
    FitResult,
};
use crate::maps::{
    strat_class_response, strategic_rho_response, CoinMap, LocationQuadMap, StratClassMap,
    StrategicBase, StrategicRhoMap,
};
use crate::optimize::oracle::{
    true_optimum_oracle, OracleCache, OracleMode, OracleOptions, OracleResult,
};
use nalgebra::DVector;
use std::sync::Arc;

/// Ground-truth draws behind the large-sample fit proxy.
pub const PROXY_DRAWS: usize = 1_000_000;

/// Concrete handles the type-erased interfaces hide, kept for the exact
/// risk formulas each scenario admits.
enum Concrete {
    Coin(CoinMap),
    Location(Arc<LocationQuadMap>),
    StratReg {
        map: Arc<StrategicRhoMap>,
        manipulable: Option<Vec<usize>>,
        lambda: f64,
    },
    StratClass {
        map: Arc<StratClassMap>,
        lambda: f64,
    },
}

/// How the atlas parameter is estimated from deployment data.
enum FitRecipe {
    /// Origin-through least squares of `z - 1/2` on `theta`.
    Coin,
    /// Normal-equation regression of observations on the parameter.
    Location { i_prime: Vec<usize>, intercept: bool },
    /// Scalar response coefficient: center the feature block by the known
    /// base mean, regress on the (masked) utility gradient.
    ScalarResponse {
        x_dim: usize,
        beta_hi: f64,
        manipulable: Option<Vec<usize>>,
        base_mean: Vec<f64>,
    },
    /// Budget from band-mass matching against the base score distribution
    /// under the published scorer.
    BandMass {
        threshold: f64,
        epsilon: f64,
        beta_max: f64,
        /// Base scores `x0 . theta~`, ascending.
        sorted_scores: Vec<f64>,
    },
}

/// One runnable experiment: ground truth, model class, loss, geometry,
/// exploration, and the matching fit recipe.
pub struct Scenario {
    pub name: String,
    /// Identity for oracle caching and CSV records.
    pub hash: String,
    pub config: ScenarioConfig,
    pub map: Arc<dyn TrueMap>,
    pub atlas: Arc<dyn Atlas>,
    pub loss: Arc<dyn Loss>,
    pub theta_set: ThetaSet,
    pub exploration: Exploration,
    /// Width of the feature block inside an observation.
    pub x_dim: usize,
    /// `Some(t)`: score post-response observations with the hard
    /// classifier `1{theta . x >= t}` against the trailing label.
    pub accuracy_threshold: Option<f64>,
    concrete: Concrete,
    fit: FitRecipe,
}

impl Scenario {
    /// Assemble the parts for one config entry.
    pub fn build(name: &str, config: &ScenarioConfig) -> Result<Scenario, HarnessError> {
        let hash = config.hash();
        match config {
            ScenarioConfig::Coin { mu, eta } => {
                let map = CoinMap::new(*mu, *eta)?;
                let theta_set = ThetaSet::Box(
                    ParamBox::interval(0.0, 1.0).expect("unit interval is a valid box"),
                );
                Ok(Scenario {
                    name: name.to_string(),
                    hash,
                    config: config.clone(),
                    map: Arc::new(map),
                    atlas: Arc::new(CoinAtlas::new()),
                    // On {0,1} x [0,1] the squared loss is bounded by 1
                    // and 2-Lipschitz in the observation.
                    loss: Arc::new(SquaredDistance::with_domain_metadata(1.0, 2.0)),
                    exploration: Exploration::Uniform(theta_set.clone()),
                    theta_set,
                    x_dim: 1,
                    accuracy_threshold: None,
                    concrete: Concrete::Coin(map),
                    fit: FitRecipe::Coin,
                })
            }
            ScenarioConfig::Location {
                d,
                s,
                sigma,
                b_seed,
                m1_seed,
                m2_seed,
                theta_radius,
                intercept,
            } => {
                if *d == 0 {
                    return Err(HarnessError::InvalidPlan(format!(
                        "scenario '{name}': dimension must be at least 1"
                    )));
                }
                if !(theta_radius.is_finite() && *theta_radius > 0.0) {
                    return Err(HarnessError::InvalidPlan(format!(
                        "scenario '{name}': parameter radius must be positive, got {theta_radius}"
                    )));
                }
                let map = Arc::new(LocationQuadMap::generate(
                    *d, *s, *sigma, *b_seed, *m1_seed, *m2_seed,
                ));
                let atlas = LocationAtlas::new(*d, *d, None, *intercept, 0.0)?;
                let theta_set = ThetaSet::Ball(
                    ParamBall::new(*d, *theta_radius).expect("validated radius"),
                );
                Ok(Scenario {
                    name: name.to_string(),
                    hash,
                    config: config.clone(),
                    map: map.clone(),
                    atlas: Arc::new(atlas),
                    loss: Arc::new(SquaredDistance::new()),
                    exploration: Exploration::Uniform(theta_set.clone()),
                    theta_set,
                    x_dim: *d,
                    accuracy_threshold: None,
                    concrete: Concrete::Location(map),
                    fit: FitRecipe::Location {
                        i_prime: (0..*d).collect(),
                        intercept: *intercept,
                    },
                })
            }
            ScenarioConfig::StratReg {
                d_x,
                beta_tilde,
                rho,
                base_size,
                base_seed,
                ridge_lambda,
                beta_max,
                theta_radius,
                manipulable,
            } => {
                if *d_x == 0 || *base_size == 0 {
                    return Err(HarnessError::InvalidPlan(format!(
                        "scenario '{name}': feature dimension and base size must be at least 1"
                    )));
                }
                if !(theta_radius.is_finite() && *theta_radius > 0.0) {
                    return Err(HarnessError::InvalidPlan(format!(
                        "scenario '{name}': parameter radius must be positive, got {theta_radius}"
                    )));
                }
                let base = Arc::new(StrategicBase::generate(*d_x, *base_size, *base_seed));
                let map = Arc::new(StrategicRhoMap::new(
                    base.clone(),
                    *beta_tilde,
                    *rho,
                    manipulable.clone(),
                )?);
                let atlas = StratRegAtlas::new(
                    base.clone(),
                    Arc::new(LinearUtility),
                    0.0,
                    *beta_max,
                    manipulable.clone(),
                )?;
                let theta_set = ThetaSet::Ball(
                    ParamBall::new(*d_x, *theta_radius).expect("validated radius"),
                );
                let base_mean = population_mean(&base);
                Ok(Scenario {
                    name: name.to_string(),
                    hash,
                    config: config.clone(),
                    map: map.clone(),
                    atlas: Arc::new(atlas),
                    loss: Arc::new(LogisticRidge::new(*ridge_lambda)),
                    exploration: Exploration::Uniform(theta_set.clone()),
                    theta_set,
                    x_dim: *d_x,
                    accuracy_threshold: Some(0.0),
                    concrete: Concrete::StratReg {
                        map,
                        manipulable: manipulable.clone(),
                        lambda: *ridge_lambda,
                    },
                    fit: FitRecipe::ScalarResponse {
                        x_dim: *d_x,
                        beta_hi: *beta_max,
                        manipulable: manipulable.clone(),
                        base_mean,
                    },
                })
            }
            ScenarioConfig::StratClass {
                d_x,
                beta_true,
                threshold,
                base_size,
                base_seed,
                beta_max,
                epsilon,
                ridge_lambda,
            } => {
                if *d_x == 0 || *base_size == 0 {
                    return Err(HarnessError::InvalidPlan(format!(
                        "scenario '{name}': feature dimension and base size must be at least 1"
                    )));
                }
                let base = Arc::new(StrategicBase::generate(*d_x, *base_size, *base_seed));
                let map = Arc::new(StratClassMap::new(base.clone(), *beta_true, *threshold)?);
                let atlas = StratClassAtlas::new(base.clone(), *threshold, *beta_max)?;
                // Fixed published scorer: the diagonal unit vector. The
                // budget is identified from band mass at one scorer, so
                // exploration deploys it for every draw.
                let v = 1.0 / (*d_x as f64).sqrt();
                let theta_tilde = vec![v; *d_x];
                let mut sorted_scores: Vec<f64> = base
                    .points()
                    .iter()
                    .map(|(x0, _)| dot(x0, &theta_tilde))
                    .collect();
                sorted_scores.sort_by(|a, b| a.total_cmp(b));
                Ok(Scenario {
                    name: name.to_string(),
                    hash,
                    config: config.clone(),
                    map: map.clone(),
                    atlas: Arc::new(atlas),
                    loss: Arc::new(LogisticRidge::new(*ridge_lambda)),
                    exploration: Exploration::Degenerate(theta_tilde),
                    theta_set: ThetaSet::Sphere { dim: *d_x },
                    x_dim: *d_x,
                    accuracy_threshold: Some(*threshold),
                    concrete: Concrete::StratClass {
                        map,
                        lambda: *ridge_lambda,
                    },
                    fit: FitRecipe::BandMass {
                        threshold: *threshold,
                        epsilon: *epsilon,
                        beta_max: *beta_max,
                        sorted_scores,
                    },
                })
            }
        }
    }

    /// Estimate the atlas parameter from deployment data with the recipe
    /// matching this scenario's atlas.
    pub fn fit(&self, data: &crate::core::Dataset) -> Result<FitResult, FitError> {
        match &self.fit {
            FitRecipe::Coin => fit_coin_ls(data),
            FitRecipe::Location { i_prime, intercept } => {
                fit_location_ls(data, i_prime, *intercept)
            }
            FitRecipe::ScalarResponse {
                x_dim,
                beta_hi,
                manipulable,
                base_mean,
            } => {
                // The modeled response is `x = x0 + beta theta_S`; with the
                // base population known, centering by its mean reduces the
                // fit to scalar least squares on the utility gradient.
                let mut centered = data.clone();
                for (_, z) in &mut centered.pairs {
                    for (zj, mj) in z[..*x_dim].iter_mut().zip(base_mean) {
                        *zj -= mj;
                    }
                }
                let mask = manipulable.clone();
                let grad_u = move |theta: &[f64], _x: &[f64]| -> Vec<f64> {
                    match &mask {
                        Some(indices) => {
                            let mut g = vec![0.0; theta.len()];
                            for &j in indices {
                                g[j] = theta[j];
                            }
                            g
                        }
                        None => theta.to_vec(),
                    }
                };
                fit_scalar_beta_ls(&centered, &grad_u, *x_dim, 0.0, *beta_hi)
            }
            FitRecipe::BandMass {
                threshold,
                epsilon,
                beta_max,
                sorted_scores,
            } => {
                let t = *threshold;
                let scores = sorted_scores.clone();
                let band_prob = move |beta: f64| -> f64 {
                    let hi = scores.partition_point(|&s| s <= t);
                    let lo = scores.partition_point(|&s| s < t - beta);
                    (hi.saturating_sub(lo)) as f64 / scores.len() as f64
                };
                fit_budget_boundary_mass(data, &band_prob, *beta_max, t, *epsilon)
            }
        }
    }

    /// Exact performative risk. Every built-in scenario admits one: the
    /// coin and location closed forms, and deterministic base-population
    /// sums for both strategic scenarios (agent responses are
    /// deterministic functions of the base point).
    pub fn exact_risk(&self, theta: &[f64]) -> Option<f64> {
        match &self.concrete {
            Concrete::Coin(map) => Some(map.true_risk(theta[0])),
            Concrete::Location(map) => Some(map.true_risk_sq(theta)),
            Concrete::StratReg {
                map,
                manipulable,
                lambda,
            } => {
                let base = map.base();
                let n = base.len() as f64;
                let mut total = 0.0;
                for (x0, y) in base.points() {
                    let x = strategic_rho_response(
                        x0,
                        theta,
                        map.beta_tilde(),
                        map.rho(),
                        manipulable.as_deref(),
                    );
                    let m = dot(theta, &x);
                    total += softplus(m) - y * m;
                }
                Some(total / n + 0.5 * lambda * dot(theta, theta))
            }
            Concrete::StratClass { map, lambda } => Some(strat_class_finite_risk(
                map.base(),
                map.beta_true(),
                map.threshold(),
                *lambda,
                theta,
            )),
        }
    }

    /// Exact plug-in (modeled) risk at a fitted parameter, where the
    /// atlas admits one: closed forms for coin / location / strategic
    /// regression, the deterministic base sum for strategic
    /// classification.
    pub fn modeled_risk_exact(&self, beta: &BetaHat, theta: &[f64]) -> Option<f64> {
        if let Concrete::StratClass { map, lambda } = &self.concrete {
            let b = beta.scalar()?;
            return Some(strat_class_finite_risk(
                map.base(),
                b,
                map.threshold(),
                *lambda,
                theta,
            ));
        }
        self.atlas
            .closed_form_risk(&beta.flatten(), theta, self.loss.as_ref())
    }

    /// Minimize the modeled risk at a fitted parameter: projected
    /// gradient descent where the atlas has a closed form, exact direct
    /// search on the sphere for strategic classification, and the
    /// synthetic-draw optimizer otherwise. Returns the chosen parameter
    /// with a label for the path taken and its iteration count.
    pub fn optimize_plugin(
        &self,
        beta: &BetaHat,
        rng: &mut RngStream,
    ) -> Result<(Vec<f64>, &'static str, u64), OptimizeError> {
        if let Concrete::StratClass { .. } = &self.concrete {
            let f = |theta: &[f64]| {
                self.modeled_risk_exact(beta, theta)
                    .expect("strat_class modeled risk is exact")
            };
            let start = match &self.exploration {
                Exploration::Degenerate(t) => t.clone(),
                _ => self.theta_set.center(),
            };
            let (theta, _) = sphere_minimize(&f, &start, 256, rng);
            return Ok((theta, "exact_search", 0));
        }
        let flat = beta.flatten();
        let probe = self.atlas.closed_form_risk(
            &flat,
            &self.theta_set.center(),
            self.loss.as_ref(),
        );
        if probe.is_some() {
            let report = crate::optimize::plug_in_optimize_gd(
                self.atlas.as_ref(),
                &flat,
                self.loss.as_ref(),
                &self.theta_set,
                &crate::optimize::GdOptions::default(),
                rng,
            )?;
            Ok((report.theta, "gd", report.iterations as u64))
        } else {
            let report = crate::optimize::plug_in_optimize_sampled(
                self.atlas.as_ref(),
                &flat,
                self.loss.as_ref(),
                &self.theta_set,
                &crate::optimize::SampledOptions::default(),
                rng,
            )?;
            Ok((report.theta, "sampled", report.iterations as u64))
        }
    }

    /// True optimum for scoring: cache lookup first, then the exact
    /// computation where [`Scenario::exact_risk`] exists (multi-start
    /// descent, zero ground-truth draws), then the brute-force oracle.
    /// Fresh results are stored back into the cache.
    pub fn resolve_oracle(
        &self,
        master_seed: u64,
        oracle_budget: u64,
        cache: Option<&OracleCache>,
    ) -> Result<OracleResult, HarnessError> {
        if let Some(cache) = cache {
            if let Some(hit) = cache.lookup(&self.hash)? {
                return Ok(hit);
            }
        }
        let seed = derive_seed(master_seed, &[hash_tag("oracle"), hash_tag(&self.hash)]);
        let result = match &self.concrete {
            Concrete::Coin(map) => {
                let (theta, pr) = map.true_optimum();
                OracleResult {
                    theta: vec![theta],
                    pr,
                    pr_se: 0.0,
                    mode: "closed_form".into(),
                    budget_used: 0,
                    seed,
                    exhausted: false,
                }
            }
            Concrete::Location(map) => {
                let f = |theta: &[f64]| map.true_risk_sq(theta);
                let grad = |theta: &[f64]| -> Vec<f64> {
                    // d|mean - theta|^2 = 2 (J - I)^T (mean - theta).
                    let r = map.mean(theta) - DVector::from_column_slice(theta);
                    let j = map.mean_jacobian(theta);
                    let mut jtr = j.transpose() * &r;
                    jtr -= &r;
                    (2.0 * jtr).as_slice().to_vec()
                };
                self.exact_descent_oracle(&f, &grad, seed, oracle_budget)?
            }
            Concrete::StratReg { .. } => {
                let f = |theta: &[f64]| {
                    self.exact_risk(theta).expect("strat_reg risk is exact")
                };
                let grad =
                    |theta: &[f64]| -> Vec<f64> { crate::linalg::fd_grad(&f, theta, 1e-6) };
                self.exact_descent_oracle(&f, &grad, seed, oracle_budget)?
            }
            Concrete::StratClass { .. } => {
                // The risk jumps where base points cross the budget band,
                // so descent is useless; the exact finite sum makes a
                // seeded direct search over the sphere both cheap and
                // reproducible.
                let f = |theta: &[f64]| {
                    self.exact_risk(theta).expect("strat_class risk is exact")
                };
                let mut rng = RngStream::new(seed, 0);
                let start = self.theta_set.center();
                let (theta, pr) = sphere_minimize(&f, &start, 512, &mut rng);
                OracleResult {
                    theta,
                    pr,
                    pr_se: 0.0,
                    mode: "exact_search".into(),
                    budget_used: 0,
                    seed,
                    exhausted: false,
                }
            }
        };
        if let Some(cache) = cache {
            cache.store(&self.hash, &result).map_err(HarnessError::Oracle)?;
        }
        Ok(result)
    }

    /// Multi-start projected descent on an exact risk formula, falling
    /// back to the brute-force oracle if every start fails numerically.
    fn exact_descent_oracle(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        grad: &dyn Fn(&[f64]) -> Vec<f64>,
        seed: u64,
        oracle_budget: u64,
    ) -> Result<OracleResult, HarnessError> {
        let opts = DescentOptions {
            tol: 1e-10,
            max_iters: 20_000,
            armijo: 1e-4,
        };
        let project = |x: &[f64]| self.theta_set.project(x);
        let mut rng = RngStream::new(seed, 0);
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut starts = vec![self.theta_set.center()];
        starts.extend((0..16).map(|_| self.theta_set.sample_uniform(&mut rng)));
        for x0 in starts {
            if let Ok(report) = projected_descent(f, grad, &project, &x0, &opts) {
                if best.as_ref().is_none_or(|(_, v)| report.value < *v) {
                    best = Some((report.x, report.value));
                }
            }
        }
        match best {
            Some((theta, pr)) => Ok(OracleResult {
                theta,
                pr,
                pr_se: 0.0,
                mode: "closed_form".into(),
                budget_used: 0,
                seed,
                exhausted: false,
            }),
            None => {
                let opts = OracleOptions {
                    budget: oracle_budget,
                    ..OracleOptions::default()
                };
                let mode = if self.theta_set.dim() <= 2 {
                    OracleMode::Grid
                } else {
                    OracleMode::Dfo
                };
                true_optimum_oracle(
                    self.map.as_ref(),
                    self.loss.as_ref(),
                    &self.theta_set,
                    mode,
                    &opts,
                    seed,
                )
                .map_err(HarnessError::Oracle)
            }
        }
    }

    /// Large-sample proxy for the atlas parameter the fitter converges
    /// to: the same fit recipe on [`PROXY_DRAWS`] fresh exploration
    /// draws (excluded from every method's ledger).
    pub fn beta_star_proxy(&self, master_seed: u64) -> Result<BetaHat, HarnessError> {
        let seed = derive_seed(master_seed, &[hash_tag("proxy"), hash_tag(&self.hash)]);
        let mut rng = RngStream::new(seed, 0);
        let data = deploy_and_collect(self.map.as_ref(), &self.exploration, PROXY_DRAWS, &mut rng)
            .map_err(|e| {
                HarnessError::Oracle(OracleError::InvalidConfig(format!(
                    "proxy collection failed: {e}"
                )))
            })?;
        let fit = self.fit(&data).map_err(|e| {
            HarnessError::Oracle(OracleError::InvalidConfig(format!("proxy fit failed: {e}")))
        })?;
        Ok(fit.beta)
    }
}

/// Distance between two fitted parameters of the same shape: Euclidean
/// for flat vectors, operator norm of the matrix-block difference for
/// affine estimates.
pub fn beta_distance(a: &BetaHat, b: &BetaHat) -> Option<f64> {
    match (a, b) {
        (BetaHat::Vector(va), BetaHat::Vector(vb)) if va.len() == vb.len() => Some(
            va.iter()
                .zip(vb)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        ),
        (BetaHat::Affine { m: ma, .. }, BetaHat::Affine { m: mb, .. })
            if ma.shape() == mb.shape() =>
        {
            Some(operator_norm(&(ma - mb)))
        }
        _ => None,
    }
}

/// Exact logistic-ridge performative risk of a scorer against a finite
/// base under the budgeted threshold response: an average over base
/// points, each moved deterministically by the published scorer.
pub fn strat_class_finite_risk(
    base: &StrategicBase,
    beta: f64,
    threshold: f64,
    lambda: f64,
    theta: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (x0, y) in base.points() {
        let x = strat_class_response(x0, theta, beta, threshold);
        let m = dot(theta, &x);
        total += softplus(m) - y * m;
    }
    total / base.len() as f64 + 0.5 * lambda * dot(theta, theta)
}

/// Deterministic direct search for a minimizer of `f` on the unit
/// sphere: the start point, its antipode, and `candidates` seeded
/// uniform directions, then an axis pattern search around the best
/// (renormalizing each trial) with the step halved from 0.5 down to
/// 1e-7. Built for the exact but discontinuous strategic-classification
/// risks, where gradients do not exist.
pub fn sphere_minimize(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    candidates: usize,
    rng: &mut RngStream,
) -> (Vec<f64>, f64) {
    let d = start.len();
    let normalize = |v: &[f64]| -> Option<Vec<f64>> {
        let n = dot(v, v).sqrt();
        if n > 1e-12 {
            Some(v.iter().map(|x| x / n).collect())
        } else {
            None
        }
    };
    let mut best = normalize(start).unwrap_or_else(|| {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    });
    let mut best_val = f(&best);
    let consider = |cand: Vec<f64>, best: &mut Vec<f64>, best_val: &mut f64| {
        let v = f(&cand);
        if v < *best_val {
            *best = cand;
            *best_val = v;
        }
    };
    let antipode: Vec<f64> = best.iter().map(|x| -x).collect();
    consider(antipode, &mut best, &mut best_val);
    for _ in 0..candidates {
        consider(unit_sphere_direction(d, rng), &mut best, &mut best_val);
    }
    let mut h = 0.5;
    while h > 1e-7 {
        let mut improved = false;
        for j in 0..d {
            for sign in [1.0, -1.0] {
                let mut trial = best.clone();
                trial[j] += sign * h;
                if let Some(cand) = normalize(&trial) {
                    let v = f(&cand);
                    if v < best_val {
                        best = cand;
                        best_val = v;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (best, best_val)
}

/// Mean feature vector of a finite base population.
fn population_mean(base: &StrategicBase) -> Vec<f64> {
    let d = base.feature_dim();
    let mut mean = vec![0.0; d];
    for (x0, _) in base.points() {
        for (m, x) in mean.iter_mut().zip(x0) {
            *m += x;
        }
    }
    let n = base.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    mean
}

/// Fraction of correct hard-threshold predictions `1{theta . x >= t}`
/// against the trailing label, over fresh post-response draws.
pub fn classification_accuracy(
    map: &dyn TrueMap,
    theta: &[f64],
    threshold: f64,
    x_dim: usize,
    m: usize,
    rng: &mut RngStream,
) -> Result<f64, crate::error::MapError> {
    let mut correct = 0usize;
    for _ in 0..m {
        let z = map.sample(theta, rng)?;
        let pred = if dot(&z[..x_dim], theta) >= threshold {
            1.0
        } else {
            0.0
        };
        if pred == z[x_dim] {
            correct += 1;
        }
    }
    Ok(correct as f64 / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Dataset;

    fn coin_scenario() -> Scenario {
        Scenario::build("c", &ScenarioConfig::Coin { mu: 0.3, eta: 0.2 }).unwrap()
    }

    #[test]
    fn coin_parts_are_consistent() {
        let s = coin_scenario();
        assert_eq!(s.map.theta_dim(), 1);
        assert_eq!(s.atlas.theta_dim(), 1);
        assert_eq!(s.theta_set.dim(), 1);
        assert!(s.accuracy_threshold.is_none());
        // Exact risk matches the map's closed form.
        assert!((s.exact_risk(&[0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((s.exact_risk(&[1.0]).unwrap() - 0.0).abs() < 1e-15);
    }

    #[test]
    fn coin_oracle_is_exact_without_draws() {
        let s = coin_scenario();
        let oracle = s.resolve_oracle(7, 1000, None).unwrap();
        // mu = 0.3, eta = 0.2: the cubic's minimum sits at the right
        // endpoint with risk 0.
        assert!((oracle.theta[0] - 1.0).abs() < 1e-12);
        assert!(oracle.pr.abs() < 1e-12);
        assert_eq!(oracle.budget_used, 0);
        assert_eq!(oracle.mode, "closed_form");
    }

    #[test]
    fn location_oracle_beats_a_grid() {
        let config = ScenarioConfig::Location {
            d: 2,
            s: 0.5,
            sigma: 0.3,
            b_seed: 11,
            m1_seed: 12,
            m2_seed: 13,
            theta_radius: 1.0,
            intercept: true,
        };
        let s = Scenario::build("loc", &config).unwrap();
        let oracle = s.resolve_oracle(7, 1000, None).unwrap();
        assert_eq!(oracle.budget_used, 0);
        let pr_star = oracle.pr;
        // No grid point on a fine lattice does better.
        let mut best_grid = f64::INFINITY;
        for i in 0..=60 {
            for j in 0..=60 {
                let p = s
                    .theta_set
                    .project(&[i as f64 / 30.0 - 1.0, j as f64 / 30.0 - 1.0]);
                best_grid = best_grid.min(s.exact_risk(&p).unwrap());
            }
        }
        assert!(
            pr_star <= best_grid + 1e-9,
            "descent {pr_star} vs grid {best_grid}"
        );
    }

    #[test]
    fn strat_reg_exact_risk_matches_monte_carlo() {
        let config = ScenarioConfig::StratReg {
            d_x: 3,
            beta_tilde: 2.0,
            rho: 2.0,
            base_size: 500,
            base_seed: 17,
            ridge_lambda: 0.001,
            beta_max: 4.0,
            theta_radius: 1.0,
            manipulable: None,
        };
        let s = Scenario::build("sr", &config).unwrap();
        let theta = [0.4, -0.2, 0.5];
        let exact = s.exact_risk(&theta).unwrap();
        let mut rng = RngStream::new(3, 0);
        let (mc, se) = crate::metrics::performative_risk_mc(
            s.map.as_ref(),
            &theta,
            s.loss.as_ref(),
            40_000,
            &mut rng,
        )
        .unwrap();
        assert!(
            (mc - exact).abs() <= 4.0 * se + 1e-9,
            "mc {mc} vs exact {exact} (se {se})"
        );
    }

    #[test]
    fn strat_reg_fit_recovers_the_gaming_coefficient() {
        // rho = 2 ground truth is linear response with coefficient 2; the
        // centered scalar fit should land on it.
        let config = ScenarioConfig::StratReg {
            d_x: 3,
            beta_tilde: 2.0,
            rho: 2.0,
            base_size: 800,
            base_seed: 17,
            ridge_lambda: 0.001,
            beta_max: 4.0,
            theta_radius: 1.0,
            manipulable: None,
        };
        let s = Scenario::build("sr", &config).unwrap();
        let mut rng = RngStream::new(11, 0);
        let data =
            deploy_and_collect(s.map.as_ref(), &s.exploration, 50_000, &mut rng).unwrap();
        let fit = s.fit(&data).unwrap();
        let beta = fit.beta.scalar().unwrap();
        assert!((beta - 2.0).abs() < 0.05, "beta = {beta}");
    }

    #[test]
    fn strat_class_fit_tracks_band_mass() {
        let config = ScenarioConfig::StratClass {
            d_x: 3,
            beta_true: 0.2,
            threshold: 0.5,
            base_size: 20_000,
            base_seed: 19,
            beta_max: 1.0,
            epsilon: 0.01,
            ridge_lambda: 0.001,
        };
        let s = Scenario::build("sc", &config).unwrap();
        let mut rng = RngStream::new(13, 0);
        let data =
            deploy_and_collect(s.map.as_ref(), &s.exploration, 50_000, &mut rng).unwrap();
        let fit = s.fit(&data).unwrap();
        let beta = fit.beta.scalar().unwrap();
        // Band-mass matching recovers the budget up to the epsilon-band
        // offset plus sampling noise.
        assert!(
            (beta - 0.2).abs() < 0.05,
            "beta = {beta}, diagnostics {:?}",
            fit.diagnostics
        );
    }

    #[test]
    fn strat_class_exact_risk_matches_monte_carlo() {
        let config = ScenarioConfig::StratClass {
            d_x: 3,
            beta_true: 0.2,
            threshold: 0.5,
            base_size: 2_000,
            base_seed: 19,
            beta_max: 1.0,
            epsilon: 0.01,
            ridge_lambda: 0.001,
        };
        let s = Scenario::build("sc", &config).unwrap();
        let theta = s.theta_set.project(&[0.8, -0.3, 0.6]);
        let exact = s.exact_risk(&theta).unwrap();
        let mut rng = RngStream::new(5, 0);
        let (mc, se) = crate::metrics::performative_risk_mc(
            s.map.as_ref(),
            &theta,
            s.loss.as_ref(),
            40_000,
            &mut rng,
        )
        .unwrap();
        assert!(
            (mc - exact).abs() <= 4.0 * se + 1e-9,
            "mc {mc} vs exact {exact} (se {se})"
        );
    }

    #[test]
    fn strat_class_oracle_beats_random_scorers() {
        let config = ScenarioConfig::StratClass {
            d_x: 3,
            beta_true: 0.2,
            threshold: 0.5,
            base_size: 1_000,
            base_seed: 19,
            beta_max: 1.0,
            epsilon: 0.01,
            ridge_lambda: 0.001,
        };
        let s = Scenario::build("sc", &config).unwrap();
        let oracle = s.resolve_oracle(7, 1000, None).unwrap();
        assert_eq!(oracle.budget_used, 0);
        assert!((dot(&oracle.theta, &oracle.theta).sqrt() - 1.0).abs() < 1e-9);
        let mut rng = RngStream::new(21, 0);
        for _ in 0..50 {
            let cand = unit_sphere_direction(3, &mut rng);
            assert!(oracle.pr <= s.exact_risk(&cand).unwrap() + 1e-12);
        }
    }

    #[test]
    fn plugin_optimizer_dispatch_matches_closed_forms() {
        // Coin: gd path, argmin formula through the endpoint rule.
        let s = coin_scenario();
        let mut rng = RngStream::new(3, 0);
        let beta = BetaHat::Vector(vec![0.3]);
        let (theta, path, _) = s.optimize_plugin(&beta, &mut rng).unwrap();
        assert_eq!(path, "gd");
        assert!((theta[0] - 0.875).abs() < 1e-6);
        // Strategic classification: exact search stays on the sphere.
        let config = ScenarioConfig::StratClass {
            d_x: 3,
            beta_true: 0.2,
            threshold: 0.5,
            base_size: 500,
            base_seed: 19,
            beta_max: 1.0,
            epsilon: 0.01,
            ridge_lambda: 0.001,
        };
        let sc = Scenario::build("sc", &config).unwrap();
        let b = BetaHat::Vector(vec![0.21]);
        let (theta, path, _) = sc.optimize_plugin(&b, &mut rng).unwrap();
        assert_eq!(path, "exact_search");
        assert!((dot(&theta, &theta).sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn beta_distance_shapes() {
        let a = BetaHat::Vector(vec![0.3, 0.1]);
        let b = BetaHat::Vector(vec![0.0, 0.5]);
        let d = beta_distance(&a, &b).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        let ma = BetaHat::Affine {
            m: nalgebra::DMatrix::from_diagonal_element(2, 2, 2.0),
            b: None,
        };
        let mb = BetaHat::Affine {
            m: nalgebra::DMatrix::from_diagonal_element(2, 2, 1.0),
            b: None,
        };
        assert!((beta_distance(&ma, &mb).unwrap() - 1.0).abs() < 1e-12);
        assert!(beta_distance(&a, &ma).is_none());
    }

    #[test]
    fn fit_dispatch_rejects_mismatched_data() {
        let s = coin_scenario();
        let data = Dataset {
            pairs: vec![(vec![0.5, 0.5], vec![1.0])],
            seed: 0,
            stream: 0,
            theta_dim: 2,
            obs_dim: 1,
        };
        assert!(s.fit(&data).is_err());
    }
}
