//! Central finite differences for verifying analytic gradients.
//!
//! The checks here evaluate the loss as a pure function of a perturbed
//! input, so they are independent of the backward-pass code they validate.
//! Run them on `f64` networks; 32-bit arithmetic drowns the comparison.

/// Central difference `(f(x+h) - f(x-h)) / 2h` for every coordinate of a
/// buffer, where `f` evaluates a scalar loss from the full buffer.
pub fn central_diff(base: &[f64], mut f: impl FnMut(&[f64]) -> f64, h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(base.len());
    let mut probe = base.to_vec();
    for i in 0..base.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

/// Relative error between an analytic and a finite-difference gradient,
/// floored so near-zero pairs compare absolutely.
pub fn relative_error(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6)
}

/// Largest relative error over two gradient buffers.
pub fn max_relative_error(analytic: &[f64], fd: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(fd)
        .map(|(&a, &b)| relative_error(a, b))
        .fold(0.0, f64::max)
}
