//! Logarithmic hyperparameter grids for the budget-matched baselines.
//!
//! Tuning sweeps each knob over a geometric grid with a fixed number of
//! points per knob; the Cartesian product forms the candidate set. The
//! iteration count is never a knob: it is derived from the sample budget as
//! `floor(n / m)` so every candidate spends the same number of draws.

/// Geometric grid of `points` values from `lo` to `hi` inclusive.
///
/// Both endpoints are returned exactly. `points == 1` yields `[lo]`.
///
/// # Panics
///
/// Panics if `lo` or `hi` is not a finite positive number, if `hi < lo`, or
/// if `points == 0`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo.is_finite() && lo > 0.0, "log grid needs lo > 0, got {lo}");
    assert!(hi.is_finite() && hi >= lo, "log grid needs hi >= lo, got {hi}");
    assert!(points > 0, "log grid needs at least one point");
    if points == 1 {
        return vec![lo];
    }
    let log_lo = lo.ln();
    let log_hi = hi.ln();
    let mut grid = Vec::with_capacity(points);
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        grid.push((log_lo + t * (log_hi - log_lo)).exp());
    }
    // Pin the endpoints so round-tripping through logs cannot smear them.
    grid[0] = lo;
    grid[points - 1] = hi;
    grid
}

/// Geometric grid of integers from `lo` to `hi` inclusive.
///
/// Values are rounded to the nearest integer and deduplicated while keeping
/// their increasing order, so the result may hold fewer than `points`
/// entries when the range is narrow.
///
/// # Panics
///
/// Panics if `lo == 0`, `hi < lo`, or `points == 0`.
pub fn log_grid_usize(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    assert!(lo > 0, "integer log grid needs lo >= 1");
    let raw = log_grid(lo as f64, hi as f64, points);
    let mut grid: Vec<usize> = raw
        .into_iter()
        .map(|v| (v.round() as usize).clamp(lo, hi))
        .collect();
    grid.dedup();
    grid
}

/// Candidate `(c0, m, delta)` triples for tuning the one-point zeroth-order
/// method: step scale `c0` over `[1e-4, 1e-1]`, batch size `m` over
/// `[1, 500]`, and smoothing radius `delta` over `[0.1, 100]`, five
/// logarithmic points per knob.
pub fn dfo_hyper_grid() -> Vec<(f64, usize, f64)> {
    let c0s = log_grid(1e-4, 1e-1, 5);
    let ms = log_grid_usize(1, 500, 5);
    let deltas = log_grid(1e-1, 1e2, 5);
    let mut combos = Vec::with_capacity(c0s.len() * ms.len() * deltas.len());
    for &c0 in &c0s {
        for &m in &ms {
            for &delta in &deltas {
                combos.push((c0, m, delta));
            }
        }
    }
    combos
}

/// Candidate `(c0, m)` pairs for tuning the gradient-based baselines:
/// step scale `c0` over `[1e-4, 10]` and batch size `m` over `[1, 500]`,
/// five logarithmic points per knob.
pub fn sgd_hyper_grid() -> Vec<(f64, usize)> {
    let c0s = log_grid(1e-4, 1e1, 5);
    let ms = log_grid_usize(1, 500, 5);
    let mut combos = Vec::with_capacity(c0s.len() * ms.len());
    for &c0 in &c0s {
        for &m in &ms {
            combos.push((c0, m));
        }
    }
    combos
}
