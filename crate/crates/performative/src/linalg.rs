//! Small vector/matrix helpers used throughout the crate.

use nalgebra::DMatrix;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Largest singular value.
pub(crate) fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Central-difference gradient of `f` at `x` with per-coordinate step `h`.
pub(crate) fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Relative disagreement between two gradients, floored so that near-zero
/// gradients compare absolutely.
pub(crate) fn grad_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = norm2(a).max(norm2(b)).max(1.0);
    dist2(a, b) / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_matches_analytic_quadratic() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1];
        let g = fd_grad(&f, &[1.0, 2.0], 1e-6);
        assert!((g[0] - 8.0).abs() < 1e-6);
        assert!((g[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -4.0, 2.0]));
        assert!((operator_norm(&m) - 4.0).abs() < 1e-12);
    }
}
