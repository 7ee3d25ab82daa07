//! Reference optimizer for the *true* performative risk.
//!
//! Scoring a method needs the true optimum `min_theta PR(theta)`, which
//! no learner sees. [`true_optimum_oracle`] estimates it by brute force —
//! dense grid search in low dimension, zeroth-order search plus
//! common-random-number pattern polish otherwise — and reports the Monte
//! Carlo budget it consumed. [`OracleCache`] persists results keyed by a
//! scenario hash so expensive oracles are computed once.

use crate::core::{unit_sphere_direction, Loss, RngStream, ThetaSet, TrueMap};
use crate::error::OracleError;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Search strategy for the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMode {
    /// Dense grid over the parameter set (dimension 2 at most), fresh
    /// re-evaluation at the winner to kill selection bias.
    Grid,
    /// Zeroth-order search for half the budget, then pattern-search
    /// polish with common random numbers, then a fresh final estimate.
    Dfo,
}

/// Oracle tuning knobs; the defaults match the reference protocol.
#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    /// Total ground-truth draws for the dfo mode.
    pub budget: u64,
    /// Grid resolution per dimension (grid mode).
    pub grid_points: usize,
    /// Draws per grid point (grid mode).
    pub grid_mc: usize,
    /// Polish restarts (dfo mode).
    pub polish_restarts: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            budget: 1_000_000,
            grid_points: 401,
            grid_mc: 100_000,
            polish_restarts: 3,
        }
    }
}

/// The oracle's answer: an estimated true optimum with its provenance.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub theta: Vec<f64>,
    /// True performative risk at `theta`, from a fresh final estimate.
    pub pr: f64,
    /// Standard error of that final estimate (0 for cached results).
    pub pr_se: f64,
    /// How the result was produced ("grid", "dfo", or a free-form tag
    /// such as "closed_form" for externally seeded cache entries).
    pub mode: String,
    /// Ground-truth draws consumed.
    pub budget_used: u64,
    pub seed: u64,
    /// Whether the search ran out of budget before its convergence
    /// criterion was met.
    pub exhausted: bool,
}

/// Mean loss at `theta` over `m` fresh draws, with standard error.
fn risk_estimate(
    map: &dyn TrueMap,
    loss: &dyn Loss,
    theta: &[f64],
    m: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64), OracleError> {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..m {
        let z = map.sample(theta, rng)?;
        let v = loss.value(&z, theta);
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let se = if m > 1 {
        (m2 / (m - 1) as f64 / m as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok((mean, se))
}

/// Enumerate the search grid for [`OracleMode::Grid`].
fn grid_candidates(set: &ThetaSet, points: usize) -> Result<Vec<Vec<f64>>, OracleError> {
    let d = set.dim();
    match set {
        ThetaSet::Sphere { dim } => match dim {
            1 => Ok(vec![vec![-1.0], vec![1.0]]),
            2 => {
                // The circle is one-dimensional: grid the angle.
                Ok((0..points)
                    .map(|i| {
                        let phi = 2.0 * std::f64::consts::PI * i as f64 / points as f64;
                        vec![phi.cos(), phi.sin()]
                    })
                    .collect())
            }
            _ => Err(OracleError::GridDimension(*dim)),
        },
        _ => {
            let (lo, hi) = set.bounding_box();
            let axis = |k: usize| -> Vec<f64> {
                (0..points)
                    .map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / (points - 1) as f64)
                    .collect()
            };
            match d {
                1 => Ok(axis(0).into_iter().map(|x| vec![x]).collect()),
                2 => {
                    let xs = axis(0);
                    let ys = axis(1);
                    let mut grid = Vec::with_capacity(points * points);
                    for &x in &xs {
                        for &y in &ys {
                            let p = vec![x, y];
                            if set.contains(&p) {
                                grid.push(p);
                            }
                        }
                    }
                    Ok(grid)
                }
                _ => Err(OracleError::GridDimension(d)),
            }
        }
    }
}

/// Estimate `argmin_theta PR(theta)` over `theta_set` by brute force.
///
/// Grid mode evaluates every candidate with `grid_mc` draws on its own
/// substream, takes the strict minimum (ties resolve to the lowest
/// index), and re-estimates the winner fresh with ten times the draws so
/// the reported risk carries no winner's-curse bias. Dfo mode spends half
/// the budget on one-point zeroth-order descent and half on pattern
/// search with common random numbers across candidates, then prices the
/// final iterate with a fresh estimate.
pub fn true_optimum_oracle(
    map: &dyn TrueMap,
    loss: &dyn Loss,
    theta_set: &ThetaSet,
    mode: OracleMode,
    opts: &OracleOptions,
    seed: u64,
) -> Result<OracleResult, OracleError> {
    let base = RngStream::new(seed, 0);
    match mode {
        OracleMode::Grid => {
            if opts.grid_points < 2 || opts.grid_mc < 2 {
                return Err(OracleError::InvalidConfig(
                    "grid oracle needs grid_points >= 2 and grid_mc >= 2".into(),
                ));
            }
            let grid = grid_candidates(theta_set, opts.grid_points)?;
            let mut best_idx = 0;
            let mut best_val = f64::INFINITY;
            for (i, point) in grid.iter().enumerate() {
                let mut rng = base.substream(i as u64);
                let (mean, _) = risk_estimate(map, loss, point, opts.grid_mc, &mut rng)?;
                if mean < best_val {
                    best_val = mean;
                    best_idx = i;
                }
            }
            // Fresh re-evaluation at the winner on an untouched substream.
            let mut rng = base.substream(grid.len() as u64);
            let final_draws = opts.grid_mc * 10;
            let (pr, pr_se) =
                risk_estimate(map, loss, &grid[best_idx], final_draws, &mut rng)?;
            Ok(OracleResult {
                theta: grid[best_idx].clone(),
                pr,
                pr_se,
                mode: "grid".into(),
                budget_used: (grid.len() * opts.grid_mc + final_draws) as u64,
                seed,
                exhausted: false,
            })
        }
        OracleMode::Dfo => {
            let d = theta_set.dim();
            let scale = theta_set.scale();
            let mut used: u64 = 0;

            // Phase 1: one-point zeroth-order descent, half the budget.
            let m_probe = 20usize;
            let iters = (opts.budget / 2 / m_probe as u64).max(1);
            let c0 = 0.05 * scale;
            let delta = 0.05 * scale;
            let mut rng = base.substream(u64::MAX); // search stream, distinct from eval tags
            let mut theta = theta_set.center();
            for t in 0..iters {
                let u = unit_sphere_direction(d, &mut rng);
                let probe: Vec<f64> =
                    theta.iter().zip(&u).map(|(x, ui)| x + delta * ui).collect();
                let probe = theta_set.project(&probe);
                let (mean, _) = risk_estimate(map, loss, &probe, m_probe, &mut rng)?;
                used += m_probe as u64;
                let eta = c0 / (t + 1) as f64;
                let g = mean * d as f64 / delta;
                let next: Vec<f64> = theta
                    .iter()
                    .zip(&u)
                    .map(|(x, ui)| x - eta * g * ui)
                    .collect();
                theta = theta_set.project(&next);
            }

            // Phase 2: pattern-search polish with common random numbers.
            // Candidates within a round share a substream so their noise
            // cancels in the comparison.
            let restarts = opts.polish_restarts.max(1);
            let polish_budget = opts.budget - used.min(opts.budget);
            let per_restart = polish_budget / restarts as u64;
            let m_eval = 500usize;
            let round_cost = ((2 * d + 1) * m_eval) as u64;
            let mut finalists: Vec<Vec<f64>> = Vec::with_capacity(restarts);
            let mut exhausted = false;
            let mut round_tag: u64 = 0;
            for r in 0..restarts {
                let mut x = if r == 0 {
                    theta.clone()
                } else {
                    let dir = unit_sphere_direction(d, &mut rng);
                    let jittered: Vec<f64> = theta
                        .iter()
                        .zip(&dir)
                        .map(|(t, u)| t + 0.05 * scale * u)
                        .collect();
                    theta_set.project(&jittered)
                };
                let mut h = 0.1 * scale;
                let mut spent: u64 = 0;
                while h > 1e-6 * scale {
                    if spent + round_cost > per_restart {
                        exhausted = true;
                        break;
                    }
                    let mut candidates = vec![x.clone()];
                    for j in 0..d {
                        for sign in [-1.0, 1.0] {
                            let mut c = x.clone();
                            c[j] += sign * h;
                            candidates.push(theta_set.project(&c));
                        }
                    }
                    let mut best_c = 0;
                    let mut best_v = f64::INFINITY;
                    for (ci, cand) in candidates.iter().enumerate() {
                        // Identical substream per candidate: common random
                        // numbers within the round.
                        let mut crn = base.substream(round_tag);
                        let (mean, _) = risk_estimate(map, loss, cand, m_eval, &mut crn)?;
                        if mean < best_v {
                            best_v = mean;
                            best_c = ci;
                        }
                    }
                    spent += round_cost;
                    round_tag += 1;
                    if best_c == 0 {
                        h *= 0.5;
                    } else {
                        x = candidates[best_c].clone();
                    }
                }
                used += spent;
                finalists.push(x);
            }

            // Pick among finalists with one shared fresh substream, then
            // price the winner with an untouched final estimate.
            let m_final = (opts.budget / 10).clamp(100_000, 1_000_000) as usize;
            let mut best = finalists[0].clone();
            if finalists.len() > 1 {
                let select_tag = round_tag + 1;
                let m_select = m_eval * 10;
                let mut best_v = f64::INFINITY;
                for cand in &finalists {
                    let mut crn = base.substream(select_tag);
                    let (mean, _) = risk_estimate(map, loss, cand, m_select, &mut crn)?;
                    used += m_select as u64;
                    if mean < best_v {
                        best_v = mean;
                        best = cand.clone();
                    }
                }
            }
            let mut fresh = base.substream(round_tag + 2);
            let (pr, pr_se) = risk_estimate(map, loss, &best, m_final, &mut fresh)?;
            used += m_final as u64;
            Ok(OracleResult {
                theta: best,
                pr,
                pr_se,
                mode: "dfo".into(),
                budget_used: used,
                seed,
                exhausted,
            })
        }
    }
}

/// Append-only cache of oracle results, keyed by an opaque hash string.
///
/// Each line is `hash,theta_1,...,theta_d,pr,mode,budget,seed`. Re-stored
/// keys append a new line and the *last* match wins on lookup, so refined
/// oracles supersede older ones without rewriting the file.
pub struct OracleCache {
    path: PathBuf,
}

impl OracleCache {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        OracleCache { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Find the most recent entry for `key`; `Ok(None)` when the cache
    /// file does not exist or holds no match.
    pub fn lookup(&self, key: &str) -> Result<Option<OracleResult>, OracleError> {
        if !self.path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&self.path)?;
        let mut found = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 6 {
                return Err(OracleError::CacheParse {
                    line: lineno + 1,
                    detail: format!("expected at least 6 fields, got {}", fields.len()),
                });
            }
            let d = fields.len() - 5;
            let parse_f64 = |s: &str, what: &str| -> Result<f64, OracleError> {
                s.parse::<f64>().map_err(|e| OracleError::CacheParse {
                    line: lineno + 1,
                    detail: format!("bad {what} '{s}': {e}"),
                })
            };
            let parse_u64 = |s: &str, what: &str| -> Result<u64, OracleError> {
                s.parse::<u64>().map_err(|e| OracleError::CacheParse {
                    line: lineno + 1,
                    detail: format!("bad {what} '{s}': {e}"),
                })
            };
            let theta = fields[1..1 + d]
                .iter()
                .map(|s| parse_f64(s, "coordinate"))
                .collect::<Result<Vec<f64>, _>>()?;
            let pr = parse_f64(fields[1 + d], "risk")?;
            let mode = fields[2 + d].to_string();
            if mode.is_empty() {
                return Err(OracleError::CacheParse {
                    line: lineno + 1,
                    detail: "empty mode field".into(),
                });
            }
            let budget_used = parse_u64(fields[3 + d], "budget")?;
            let seed = parse_u64(fields[4 + d], "seed")?;
            if fields[0] == key {
                found = Some(OracleResult {
                    theta,
                    pr,
                    pr_se: 0.0,
                    mode,
                    budget_used,
                    seed,
                    exhausted: false,
                });
            }
        }
        Ok(found)
    }

    /// Append an entry for `key`.
    pub fn store(&self, key: &str, result: &OracleResult) -> Result<(), OracleError> {
        if key.is_empty() || key.contains(',') || key.contains('\n') {
            return Err(OracleError::InvalidConfig(format!(
                "cache key '{key}' must be nonempty and comma-free"
            )));
        }
        if result.mode.is_empty() || result.mode.contains(',') || result.mode.contains('\n') {
            return Err(OracleError::InvalidConfig(format!(
                "mode '{}' must be nonempty and comma-free",
                result.mode
            )));
        }
        let mut line = String::from(key);
        for t in &result.theta {
            line.push(',');
            line.push_str(&format!("{t}"));
        }
        line.push_str(&format!(
            ",{},{},{},{}\n",
            result.pr, result.mode, result.budget_used, result.seed
        ));
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        file.write_all(line.as_bytes())?;
        Ok(())
    }
}
