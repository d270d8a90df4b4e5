//! Thin wrappers over `libm` so the crate builds without `std`.

pub use libm::{cos, exp, expm1, fabs, floor, log, log1p, pow, sin, sqrt};

pub const PI: f64 = core::f64::consts::PI;
pub const E: f64 = core::f64::consts::E;

/// Integer power by repeated squaring.
pub fn powi(mut base: f64, exp: i32) -> f64 {
    let mut e = exp.unsigned_abs();
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    if exp < 0 {
        1.0 / acc
    } else {
        acc
    }
}

/// `x^(1/n)` for `x >= 0`.
pub fn root(x: f64, n: usize) -> f64 {
    match n {
        1 => x,
        2 => sqrt(x),
        _ => pow(x, 1.0 / n as f64),
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + log1p(exp(-(a - b).abs()))
}

/// Volume of the unit ball in C^n (real dimension 2n): pi^n / n!.
pub fn ball_volume(n: usize) -> f64 {
    let mut v = 1.0;
    for k in 1..=n {
        v *= PI / k as f64;
    }
    v
}

/// Area of the unit sphere S^{2n-1} in R^{2n}: 2 pi^n / (n-1)!.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * n as f64 * ball_volume(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powi_matches_repeated_product() {
        assert_eq!(powi(3.0, 4), 81.0);
        assert_eq!(powi(2.0, -2), 0.25);
        assert_eq!(powi(7.5, 0), 1.0);
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(1) - PI).abs() < 1e-15);
        assert!((ball_volume(2) - PI * PI / 2.0).abs() < 1e-14);
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn log_add_exp_large_arguments() {
        let v = log_add_exp(1000.0, 1000.0);
        assert!((v - (1000.0 + log(2.0))).abs() < 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }
}
