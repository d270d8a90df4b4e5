//! Positive nondecreasing weights `Phi` and the tail integrals
//! `I(s) = int_s^inf Phi(t)^{-1/m} dt`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::quadrature::adaptive_simpson;

/// Named weight presets. `t+` denotes `max(t, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Weight {
    /// `Phi = value`.
    Constant { value: f64 },
    /// `Phi = (1 + t+)^exponent`.
    Power { exponent: f64 },
    /// `Phi = exp(rate t)`.
    Exp { rate: f64 },
    /// `Phi = (1 + t+)^exponent * ln(e + t+)^log_exponent`.
    LogPower { exponent: f64, log_exponent: f64 },
}

impl Weight {
    /// The experiments' default `(1 + t+)^{n+1}`.
    pub fn default_for(n: usize) -> Self {
        Weight::Power { exponent: n as f64 + 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Weight::Constant { value } => value.is_finite() && value > 0.0,
            Weight::Power { exponent } => exponent.is_finite() && exponent >= 0.0,
            Weight::Exp { rate } => rate.is_finite() && rate >= 0.0,
            Weight::LogPower { exponent, log_exponent } => {
                exponent.is_finite() && log_exponent.is_finite() && exponent >= 0.0 && log_exponent >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid!("weight {self:?} is not positive and nondecreasing"))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let tp = t.max(0.0);
        match *self {
            Weight::Constant { value } => value,
            Weight::Power { exponent } => math::pow(1.0 + tp, exponent),
            Weight::Exp { rate } => math::exp(rate * t),
            Weight::LogPower { exponent, log_exponent } => {
                math::pow(1.0 + tp, exponent) * math::pow(math::log(math::E + tp), log_exponent)
            }
        }
    }

    /// `Phi'(t)` (right derivative at the kink `t = 0`).
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Weight::Constant { .. } => 0.0,
            Weight::Power { exponent } => {
                if t < 0.0 {
                    0.0
                } else {
                    exponent * math::pow(1.0 + t, exponent - 1.0)
                }
            }
            Weight::Exp { rate } => rate * math::exp(rate * t),
            Weight::LogPower { exponent, log_exponent } => {
                if t < 0.0 {
                    return 0.0;
                }
                let l = math::log(math::E + t);
                exponent * math::pow(1.0 + t, exponent - 1.0) * math::pow(l, log_exponent)
                    + math::pow(1.0 + t, exponent) * log_exponent * math::pow(l, log_exponent - 1.0) / (math::E + t)
            }
        }
    }

    /// `int_0^inf Phi^{-1/m}` is finite.
    pub fn is_integrable(&self, m: usize) -> bool {
        let m = m as f64;
        match *self {
            Weight::Constant { .. } => false,
            Weight::Power { exponent } => exponent / m > 1.0,
            Weight::Exp { rate } => rate > 0.0,
            Weight::LogPower { exponent, log_exponent } => {
                exponent / m > 1.0 || (exponent / m == 1.0 && log_exponent / m > 1.0)
            }
        }
    }

    /// `Lambda = int_0^inf Phi^{-1/m}`, `+inf` when not integrable.
    pub fn lambda(&self, m: usize) -> f64 {
        self.tail(0.0, m)
    }

    /// Like [`Weight::lambda`] but an error when the integral diverges.
    pub fn require_lambda(&self, m: usize) -> Result<f64> {
        self.validate()?;
        if !self.is_integrable(m) {
            return Err(Error::NotIntegrable(alloc::format!("{self:?} with exponent 1/{m}")));
        }
        Ok(self.lambda(m))
    }

    /// `I(s) = int_s^inf Phi(t)^{-1/m} dt`, `+inf` when not integrable.
    pub fn tail(&self, s: f64, m: usize) -> f64 {
        if !self.is_integrable(m) {
            return f64::INFINITY;
        }
        let mf = m as f64;
        match *self {
            Weight::Exp { rate } => mf / rate * math::exp(-rate * s / mf),
            _ if s < 0.0 => -s + self.tail(0.0, m),
            Weight::Power { exponent } => {
                let k = exponent / mf - 1.0;
                math::pow(1.0 + s, -k) / k
            }
            Weight::LogPower { exponent, log_exponent } => log_power_tail(s, exponent / mf, log_exponent / mf),
            Weight::Constant { .. } => f64::INFINITY,
        }
    }
}

/// `int_s^inf (1+t)^{-a} ln(e+t)^{-b} dt` for `s >= 0`, integrated in
/// `x = ln(1+t)` with an asymptotic remainder.
fn log_power_tail(s: f64, a: f64, b: f64) -> f64 {
    let kappa = a - 1.0;
    let integrand = |x: f64| {
        let t = math::expm1(x);
        math::exp(-kappa * x) * math::pow(math::log(math::E + t), -b)
    };
    let x0 = math::log1p(s);
    if kappa > 0.0 {
        let x1 = x0 + 40.0 / kappa;
        adaptive_simpson(&integrand, x0, x1, 1e-14)
    } else {
        let x1 = x0.max(60.0);
        let head = adaptive_simpson(&integrand, x0, x1, 1e-14);
        head + math::pow(x1, 1.0 - b) / (b - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;

    /// Independent check: integrate `Phi^{-1/m}` in `t` on `[s, T]` plus a crude bound.
    fn brute_tail(w: &Weight, s: f64, m: usize, upper: f64) -> f64 {
        let f = |t: f64| math::pow(w.eval(t), -1.0 / m as f64);
        adaptive_simpson(&f, s, upper, 1e-12)
    }

    #[test]
    fn power_tail_closed_form() {
        let w = Weight::Power { exponent: 3.0 };
        assert!((w.tail(0.0, 2) - 2.0).abs() < 1e-14);
        assert!((w.tail(3.0, 2) - 1.0).abs() < 1e-14);
        assert!((w.tail(-1.5, 2) - 3.5).abs() < 1e-14);
        assert!(!Weight::Power { exponent: 2.0 }.is_integrable(2));
        assert!(Weight::Constant { value: 1.0 }.require_lambda(1).is_err());
    }

    #[test]
    fn exp_tail_closed_form() {
        let w = Weight::Exp { rate: 2.0 };
        assert!((w.tail(1.0, 2) - math::exp(-1.0)).abs() < 1e-15);
    }

    #[test]
    fn log_power_tail_matches_direct_quadrature() {
        let w = Weight::LogPower { exponent: 3.0, log_exponent: 2.0 };
        let direct = brute_tail(&w, 0.5, 2, 1e7) + 1e7f64.powf(-0.5) * 2.0;
        let got = w.tail(0.5, 2);
        assert!((got - direct).abs() < 2e-3 * got, "{got} vs {direct}");
        let w = Weight::LogPower { exponent: 2.0, log_exponent: 4.0 };
        assert!(w.is_integrable(2));
        let t0 = w.tail(0.0, 2);
        let t1 = w.tail(1.0, 2);
        assert!(t0 > t1 && t1 > 0.0 && t0.is_finite());
        let seg = brute_tail(&w, 0.0, 2, 1.0);
        assert!(((t0 - t1) - seg).abs() < 1e-9, "{} vs {seg}", t0 - t1);
    }

    #[test]
    fn derivative_matches_difference() {
        for w in [
            Weight::Power { exponent: 2.5 },
            Weight::Exp { rate: 1.5 },
            Weight::LogPower { exponent: 2.0, log_exponent: 1.5 },
        ] {
            for t in [0.3, 1.0, 4.0] {
                let fd = (w.eval(t + 1e-6) - w.eval(t - 1e-6)) / 2e-6;
                assert!((fd - w.derivative(t)).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn weights_are_monotone_on_samples() {
        for w in [
            Weight::Power { exponent: 3.0 },
            Weight::Exp { rate: 0.5 },
            Weight::LogPower { exponent: 2.0, log_exponent: 3.0 },
            Weight::Constant { value: 2.0 },
        ] {
            w.validate().unwrap();
            let mut prev = 0.0;
            for k in 0..400 {
                let t = -20.0 + 0.1 * k as f64;
                let v = w.eval(t);
                assert!(v > 0.0 && v >= prev);
                prev = v;
            }
        }
        assert!(Weight::Power { exponent: -1.0 }.validate().is_err());
    }
}
