//! One-dimensional adaptive quadrature.

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (m - a) <= f64::EPSILON * a.abs().max(1.0) {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson split at the given interior breakpoints.
pub fn adaptive_simpson_pieces<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    let pieces = breaks.iter().copied().filter(|&x| x > a && x < b);
    for x in pieces {
        total += adaptive_simpson(f, lo, x, tol);
        lo = x;
    }
    total + adaptive_simpson(f, lo, b, tol)
}

/// Composite trapezoid rule on uniform samples with spacing `dx`.
pub fn trapezoid(samples: &[f64], dx: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => dx * (samples[1..n - 1].iter().sum::<f64>() + 0.5 * (samples[0] + samples[n - 1])),
    }
}

/// Trapezoid rule on arbitrary abscissae.
pub fn trapezoid_xy(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    #[test]
    fn simpson_exp() {
        let v = adaptive_simpson(&math::exp, 0.0, 1.0, 1e-13);
        assert!((v - (math::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn simpson_with_kink() {
        let f = |x: f64| (x - 0.3).abs();
        let v = adaptive_simpson_pieces(&f, 0.0, 1.0, &[0.3], 1e-12);
        assert!((v - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let y: alloc::vec::Vec<f64> = (0..11).map(|k| 2.0 * k as f64 * 0.1 + 1.0).collect();
        assert!((trapezoid(&y, 0.1) - 2.0).abs() < 1e-14);
    }
}
