//! Randomized checks of the elementary scalar inequalities used in the
//! estimates. Margins are `ln(rhs) - ln(lhs)` where magnitudes are large,
//! so a nonnegative margin means the inequality holds at that sample.

use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math;

/// Default samples per inequality.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Margins below `-ROUNDOFF * (1 + |ln lhs|)` count as violations.
const ROUNDOFF: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub samples: usize,
    pub worst_margin: f64,
    pub violations: usize,
    /// Smallest constant making the sampled inequality hold, where one is fitted.
    pub fitted_constant: Option<f64>,
    /// Closed-form upper bound for the fitted constant, where known.
    pub constant_bound: Option<f64>,
}

impl InequalityCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.constant_bound.is_none_or(|b| self.fitted_constant.unwrap_or(0.0) <= b)
    }
}

/// Growth of a fitted constant over nested sampling domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantGrowth {
    pub name: String,
    pub n: usize,
    pub domain_caps: Vec<f64>,
    /// Natural log of the fitted constant on each domain.
    pub log_fitted: Vec<f64>,
    /// False when the fitted constant keeps growing with the domain.
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalitySuite {
    pub seed: u64,
    pub checks: Vec<InequalityCheck>,
    pub growth: Vec<ConstantGrowth>,
}

impl InequalitySuite {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(InequalityCheck::holds)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let (a, b) = (math::log(lo), math::log(hi));
    math::exp(a + (b - a) * rng.random::<f64>())
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

struct Tally {
    worst: f64,
    violations: usize,
}

impl Tally {
    fn new() -> Self {
        Self { worst: f64::INFINITY, violations: 0 }
    }

    fn push(&mut self, margin: f64, lhs_scale: f64) {
        self.worst = self.worst.min(margin);
        if !(margin >= -ROUNDOFF * (1.0 + lhs_scale.abs())) {
            self.violations += 1;
        }
    }

    fn finish(self, name: &str, samples: usize, fitted: Option<f64>, bound: Option<f64>) -> InequalityCheck {
        InequalityCheck {
            name: name.into(),
            samples,
            worst_margin: self.worst,
            violations: self.violations,
            fitted_constant: fitted,
            constant_bound: bound,
        }
    }
}

/// `x y <= eps y (ln y)^t + x exp((x/eps)^{1/t})` for `x > 0, y > 1, t, eps > 0`.
pub fn young_log_margin(x: f64, y: f64, t: f64, eps: f64) -> f64 {
    let lny = math::log(y);
    let lhs = math::log(x) + lny;
    let a = math::log(eps) + lny + t * math::log(lny);
    let b = math::log(x) + math::pow(x / eps, 1.0 / t);
    math::log_add_exp(a, b) - lhs
}

/// `(x + y)^p <= 2^p x^p + 2^p y^p`.
pub fn power_sum_margin(x: f64, y: f64, p: f64) -> f64 {
    let ln2 = math::log(2.0);
    let lhs = p * math::log(x + y);
    let rhs = p * ln2 + math::log_add_exp(p * math::log(x), p * math::log(y));
    rhs - lhs
}

/// `ln(1 + xy) <= ln(1 + x) + ln(1 + y)`.
pub fn log_product_margin(x: f64, y: f64) -> f64 {
    math::log1p(x) + math::log1p(y) - math::log1p(x * y)
}

/// `ln(x + y) <= ln(1 + x) + ln(1 + y)`.
pub fn log_sum_margin(x: f64, y: f64) -> f64 {
    math::log1p(x) + math::log1p(y) - math::log(x + y)
}

/// `x + n y^{1/n} >= (n+1) (xy)^{1/(n+1)}`.
pub fn amgm_margin(x: f64, y: f64, n: usize) -> f64 {
    let nf = n as f64;
    let lhs = math::log(x + nf * math::root(y, n));
    let rhs = math::log(nf + 1.0) + (math::log(x) + math::log(y)) / (nf + 1.0);
    lhs - rhs
}

/// Natural log of the constant needed at `(x, y)` for
/// `x e^y <= e^y g(y) + C e^{2 x^{1/n}}`; `-inf` when none is needed.
fn log_needed_constant(x: f64, y: f64, n: usize, g: f64) -> f64 {
    let gap = x - g;
    if gap <= 0.0 {
        f64::NEG_INFINITY
    } else {
        y - 2.0 * math::root(x, n) + math::log(gap)
    }
}

/// Bound `(n/e)^n` on the constant in `x e^y <= e^y |y|^n + C e^{2x^{1/n}}`.
pub fn abs_power_constant_bound(n: usize) -> f64 {
    math::powi(n as f64 / math::E, n as i32)
}

/// Runs every check with `samples` draws each from a ChaCha stream seeded by `seed`.
pub fn scalar_inequality_suite(seed: u64, samples: usize) -> InequalitySuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let mut t = Tally::new();
    for _ in 0..samples {
        let x = log_uniform(&mut rng, 1e-3, 1e3);
        let y = 1.0 + log_uniform(&mut rng, 1e-6, 1e6);
        let tt = log_uniform(&mut rng, 0.05, 20.0);
        let eps = log_uniform(&mut rng, 1e-3, 1e3);
        t.push(young_log_margin(x, y, tt, eps), math::log(x * y));
    }
    checks.push(t.finish("young_log", samples, None, None));

    let mut t = Tally::new();
    for _ in 0..samples {
        let x = log_uniform(&mut rng, 1e-6, 1e6);
        let y = log_uniform(&mut rng, 1e-6, 1e6);
        let p = log_uniform(&mut rng, 0.01, 20.0);
        t.push(power_sum_margin(x, y, p), p * math::log(x + y));
    }
    checks.push(t.finish("power_sum", samples, None, None));

    let mut t = Tally::new();
    for _ in 0..samples {
        let x = log_uniform(&mut rng, 1e-6, 1e6);
        let y = log_uniform(&mut rng, 1e-6, 1e6);
        t.push(log_product_margin(x, y), math::log1p(x * y));
    }
    checks.push(t.finish("log_product", samples, None, None));

    let mut t = Tally::new();
    for _ in 0..samples {
        let x = log_uniform(&mut rng, 1e-6, 1e6);
        let y = log_uniform(&mut rng, 1e-6, 1e6);
        t.push(log_sum_margin(x, y), math::log(x + y));
    }
    checks.push(t.finish("log_sum", samples, None, None));

    for n in 1..=3usize {
        let mut t = Tally::new();
        for _ in 0..samples {
            let x = log_uniform(&mut rng, 1e-6, 1e6);
            let y = log_uniform(&mut rng, 1e-6, 1e6);
            t.push(amgm_margin(x, y, n), math::log(x * y));
        }
        checks.push(t.finish(&alloc::format!("amgm_n{n}"), samples, None, None));
    }

    for (label, eps) in [("log_growth_eps0.1", 0.1), ("log_growth_eps0.5", 0.5)] {
        let xs: Vec<f64> = (0..samples).map(|_| log_uniform(&mut rng, 1e-6, 1e30)).collect();
        let c = xs.iter().map(|&x| math::log1p(x) - math::pow(x, eps)).fold(0.0, f64::max);
        let mut t = Tally::new();
        for &x in &xs {
            t.push(math::pow(x, eps) + c - math::log1p(x), math::log1p(x));
        }
        checks.push(t.finish(label, samples, Some(c), None));
    }

    for n in 1..=2usize {
        let pts: Vec<(f64, f64)> = (0..samples)
            .map(|_| {
                let x = log_uniform(&mut rng, 1e-4, 1e4);
                let s = math::root(x, n);
                (x, uniform(&mut rng, -3.0 * s - 1.0, 3.0 * s + 1.0))
            })
            .collect();
        let log_c = pts
            .iter()
            .map(|&(x, y)| log_needed_constant(x, y, n, math::powi(y.abs(), n as i32)))
            .fold(f64::NEG_INFINITY, f64::max);
        let c = math::exp(log_c);
        let mut t = Tally::new();
        for &(x, y) in &pts {
            let lhs = math::log(x) + y;
            let rhs = math::log_add_exp(y + math::log(math::powi(y.abs(), n as i32)), log_c + 2.0 * math::root(x, n));
            t.push(rhs - lhs, lhs);
        }
        checks.push(t.finish(&alloc::format!("exp_abs_power_n{n}"), samples, Some(c), Some(abs_power_constant_bound(n))));
    }

    let mut growth = Vec::new();
    for n in 1..=2usize {
        let caps: Vec<f64> = [2.0, 4.0, 8.0, 16.0].iter().map(|c| math::powi(*c, n as i32)).collect();
        let mut log_fitted = Vec::new();
        for &cap in &caps {
            let top = math::exp(math::root(cap, n));
            let mut best = f64::NEG_INFINITY;
            for _ in 0..samples / caps.len() {
                let x = uniform(&mut rng, 0.0, cap);
                let y = uniform(&mut rng, 0.0, top);
                best = best.max(log_needed_constant(x, y, n, math::powi(math::log1p(y.abs()), n as i32)));
            }
            log_fitted.push(best);
        }
        let bounded = log_fitted[log_fitted.len() - 1] <= log_fitted[log_fitted.len() - 2] + 1.0;
        growth.push(ConstantGrowth {
            name: alloc::format!("exp_log_power_n{n}"),
            n,
            domain_caps: caps,
            log_fitted,
            bounded,
        });
    }

    InequalitySuite { seed, checks, growth }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        // x = 1, y = e, t = 1, eps = 1: e <= e + e.
        assert!((young_log_margin(1.0, math::E, 1.0, 1.0) - math::log(2.0)).abs() < 1e-14);
        // (1 + 1)^2 = 4 <= 8.
        assert!((power_sum_margin(1.0, 1.0, 2.0) - math::log(2.0)).abs() < 1e-14);
        // ln 10 <= 2 ln 4.
        assert!((log_product_margin(3.0, 3.0) - (2.0 * math::log(4.0) - math::log(10.0))).abs() < 1e-14);
        // AM-GM equality at x = y = 1.
        assert!(amgm_margin(1.0, 1.0, 2).abs() < 1e-15);
    }

    #[test]
    fn suite_passes_and_is_deterministic() {
        let a = scalar_inequality_suite(7, 20_000);
        let b = scalar_inequality_suite(7, 20_000);
        assert_eq!(a, b);
        assert!(a.all_hold(), "{:?}", a.checks);
        for c in &a.checks {
            assert_eq!(c.samples, 20_000);
        }
    }

    /// Independent dense maximization of `ln(1+x) - x^eps` over `ln x`.
    fn dense_log_growth_constant(eps: f64) -> f64 {
        let mut best: f64 = 0.0;
        for k in 0..=200_000 {
            let lx = -14.0 + k as f64 * (83.0 / 200_000.0);
            let x = math::exp(lx);
            best = best.max(math::log1p(x) - math::pow(x, eps));
        }
        best
    }

    #[test]
    fn fitted_log_growth_constants_are_regression_values() {
        let suite = scalar_inequality_suite(1, DEFAULT_SAMPLES);
        let get = |name: &str| suite.checks.iter().find(|c| c.name == name).unwrap().fitted_constant.unwrap();
        for (name, eps) in [("log_growth_eps0.1", 0.1), ("log_growth_eps0.5", 0.5)] {
            let dense = dense_log_growth_constant(eps);
            let fitted = get(name);
            assert!(fitted <= dense + 1e-12 && fitted >= dense - 1e-3, "{name}: {fitted} vs {dense}");
        }
        // Frozen values, three significant digits.
        assert!((get("log_growth_eps0.1") - 13.03).abs() < 5e-3);
        assert!((get("log_growth_eps0.5") - 0.0).abs() < 5e-3 || get("log_growth_eps0.5") < 0.01);
    }

    /// Dense grid supremum of `e^{y - 2 x^{1/n}} (x - |y|^n)`.
    fn dense_abs_power_constant(n: usize) -> f64 {
        let mut best: f64 = 0.0;
        for i in 1..=2000 {
            let x = 6.0 * i as f64 / 2000.0;
            for j in 0..=2000 {
                let y = -3.0 + 6.0 * j as f64 / 2000.0;
                let gap = x - math::powi(y.abs(), n as i32);
                if gap > 0.0 {
                    best = best.max(math::exp(y - 2.0 * math::root(x, n)) * gap);
                }
            }
        }
        best
    }

    #[test]
    fn abs_power_constant_within_closed_form_bound() {
        let suite = scalar_inequality_suite(3, DEFAULT_SAMPLES);
        for n in 1..=2usize {
            let c = suite.checks.iter().find(|c| c.name == alloc::format!("exp_abs_power_n{n}")).unwrap();
            let fitted = c.fitted_constant.unwrap();
            assert!(fitted <= abs_power_constant_bound(n) + 1e-12);
            let dense = dense_abs_power_constant(n);
            assert!((fitted - dense).abs() < 0.02 * dense, "n={n}: {fitted} vs {dense}");
        }
    }

    #[test]
    fn log_power_form_needs_growing_constant() {
        let suite = scalar_inequality_suite(5, 40_000);
        for g in &suite.growth {
            assert!(!g.bounded, "{g:?}");
            assert!(g.log_fitted.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
