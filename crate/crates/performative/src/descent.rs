//! Projected gradient descent with Armijo backtracking.
//!
//! One implementation serves both the ERM atlas fitter (descending in
//! `beta` over a box) and the plug-in optimizer (descending in `theta`
//! over a ball, box, or sphere). Objective and projection come in as
//! closures; the routine tracks the best iterate seen and stops on a
//! projected-gradient stationarity test.

/// Why the descent stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum StopReason {
    /// Projected-gradient displacement fell below tolerance.
    Stationary,
    /// Backtracking could not find any decrease (numerical floor).
    Stalled,
    /// Iteration budget exhausted.
    MaxIters,
}

#[derive(Clone, Debug)]
pub(crate) struct DescentReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Norm of the final projected-gradient displacement `x - P(x - g)`.
    pub stationarity: f64,
    pub reason: StopReason,
}

#[derive(Clone, Debug)]
pub(crate) struct DescentError {
    pub what: &'static str,
    pub iteration: usize,
    pub iterate: Vec<f64>,
}

pub(crate) struct DescentOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease coefficient.
    pub armijo: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            tol: 1e-8,
            max_iters: 10_000,
            armijo: 1e-4,
        }
    }
}

fn sub_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Minimize `f` over the set given by `project`, starting from `x0`
/// (projected before use).
///
/// Each iteration backtracks `eta` from the last accepted step until the
/// projected trial point satisfies the Armijo condition
/// `f(x+) <= f(x) - (armijo / eta) |x+ - x|^2`. Non-finite objective or
/// gradient values abort with the offending iterate.
pub(crate) fn projected_descent(
    f: &dyn Fn(&[f64]) -> f64,
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
    project: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    opts: &DescentOptions,
) -> Result<DescentReport, DescentError> {
    let mut x = project(x0);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(DescentError {
            what: "objective",
            iteration: 0,
            iterate: x,
        });
    }
    let mut best_x = x.clone();
    let mut best_f = fx;
    let mut eta = 1.0_f64;
    let mut reason = StopReason::MaxIters;
    let mut stationarity = f64::INFINITY;
    let mut iterations = 0;

    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        let g = grad(&x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(DescentError {
                what: "gradient",
                iteration: iter,
                iterate: x,
            });
        }
        // Stationarity: displacement of a unit-step projected move.
        let trial_full: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gi).collect();
        stationarity = sub_norm(&project(&trial_full), &x);
        if stationarity <= opts.tol {
            reason = StopReason::Stationary;
            break;
        }

        // Backtracking line search on the projected arc.
        eta = (eta * 2.0).min(1.0);
        let mut accepted = false;
        for _ in 0..60 {
            let candidate: Vec<f64> = x
                .iter()
                .zip(&g)
                .map(|(xi, gi)| xi - eta * gi)
                .collect();
            let xp = project(&candidate);
            let step = sub_norm(&xp, &x);
            if step == 0.0 {
                break;
            }
            let fp = f(&xp);
            if !fp.is_finite() {
                return Err(DescentError {
                    what: "objective",
                    iteration: iter,
                    iterate: xp,
                });
            }
            if fp <= fx - (opts.armijo / eta) * step * step {
                x = xp;
                fx = fp;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if fx < best_f {
            best_f = fx;
            best_x = x.clone();
        }
        if !accepted {
            reason = StopReason::Stalled;
            break;
        }
    }

    Ok(DescentReport {
        x: best_x,
        value: best_f,
        iterations,
        stationarity,
        reason,
    })
}
