//! Parabolic ABP bound `sup_Q u <= sup_{parabolic boundary} u + C1 + C2 N^{1/(n+1)}`
//! for `(-d_t + a^{i jbar} d_i d_jbar) u >= f`, with the space-time entropy
//! `N = int_Q Phi(log X) X`, `X = (f-)^{n+1} / ((n+1)^{n+1} det a)`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::abp::Mode;
use crate::calibrate::{lexicographic_fit, split_70_30, Split};
use crate::error::{invalid, Error, Result};
use crate::fields::{BallField, RadialField, RadialProfile};
use crate::linalg::HermitianMatrix;
use crate::math;
use crate::psh::{negative_part, LOG_DET_FLOOR};
use crate::weight::Weight;

/// Radial slices of `u` at increasing times.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    n: usize,
    times: Vec<f64>,
    slices: Vec<RadialField>,
}

impl SpaceTimeField {
    pub fn new(n: usize, times: Vec<f64>, slices: Vec<RadialProfile>) -> Result<Self> {
        if times.len() != slices.len() || times.len() < 3 {
            return Err(invalid!("need at least three slices with one time each"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid!("times must be strictly increasing"));
        }
        let len = slices[0].len();
        if slices.iter().any(|s| s.len() != len) {
            return Err(invalid!("all slices must share one radial mesh"));
        }
        let slices = slices.into_iter().map(|p| RadialField::new(p, n)).collect::<Result<Vec<_>>>()?;
        Ok(Self { n, times, slices })
    }

    /// Samples `u(r, t)` on `count` radial nodes at the given times.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(n: usize, times: Vec<f64>, count: usize, u: F) -> Result<Self> {
        let slices = times.iter().map(|&t| RadialProfile::from_fn(count, |r| u(r, t))).collect::<Result<Vec<_>>>()?;
        Self::new(n, times, slices)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slice(&self, k: usize) -> &RadialField {
        &self.slices[k]
    }

    pub fn nodes(&self) -> usize {
        self.slices[0].len()
    }

    /// Time derivative at `(k, j)`: three-point formulas on the (possibly
    /// nonuniform) time grid.
    pub fn time_derivative(&self, k: usize, j: usize) -> f64 {
        let t = &self.times;
        let u = |i: usize| self.slices[i].value(j);
        let m = t.len();
        let (a, b, c) = if k == 0 {
            (0, 1, 2)
        } else if k == m - 1 {
            (m - 3, m - 2, m - 1)
        } else {
            (k - 1, k, k + 1)
        };
        let x = t[k];
        // derivative of the quadratic through three points
        let la = ((x - t[b]) + (x - t[c])) / ((t[a] - t[b]) * (t[a] - t[c]));
        let lb = ((x - t[a]) + (x - t[c])) / ((t[b] - t[a]) * (t[b] - t[c]));
        let lc = ((x - t[a]) + (x - t[b])) / ((t[c] - t[a]) * (t[c] - t[b]));
        la * u(a) + lb * u(b) + lc * u(c)
    }

    /// Trapezoid weights in time.
    fn time_weights(&self) -> Vec<f64> {
        let t = &self.times;
        let m = t.len();
        (0..m)
            .map(|k| {
                let left = if k > 0 { t[k] - t[k - 1] } else { 0.0 };
                let right = if k + 1 < m { t[k + 1] - t[k] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicMeasurement {
    pub n: usize,
    pub sup: f64,
    pub sup_parabolic_boundary: f64,
    pub entropy: f64,
    /// `min (x + n y^{1/n} - (n+1)(x y)^{1/(n+1)})` with `x = u_t`, `y = det(a) det(-u)`.
    pub amgm_margin: f64,
    /// `min (f- - (n+1)(x y)^{1/(n+1)})` over the same nodes.
    pub chain_margin: f64,
    pub max_inequality_defect: f64,
    pub tolerance: f64,
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicReport {
    pub sup: f64,
    pub sup_parabolic_boundary: f64,
    pub entropy: f64,
    pub c1: f64,
    pub c2: f64,
    pub rhs: f64,
    pub slack: f64,
    pub amgm_margin: f64,
    pub chain_margin: f64,
    pub mode: Mode,
}

/// Verifies the differential inequality nodewise and measures the bound's ingredients.
pub fn parabolic_measure<A, G>(u: &SpaceTimeField, a: A, f: G, weight: &Weight) -> Result<ParabolicMeasurement>
where
    A: Fn(usize, usize) -> HermitianMatrix,
    G: Fn(usize, usize) -> f64,
{
    let n = u.dim();
    weight.require_lambda(n + 1)?;
    let m = u.times.len();
    let len = u.nodes();
    let last = len - 1;
    let h = u.slices[0].mesh();
    let dt = u.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut u_sup = f64::NEG_INFINITY;
    let mut u_abs: f64 = 0.0;
    let mut f_abs: f64 = 0.0;
    let mut bdy = f64::NEG_INFINITY;
    for k in 0..m {
        for j in 0..len {
            let v = u.slices[k].value(j);
            u_sup = u_sup.max(v);
            u_abs = u_abs.max(v.abs());
            f_abs = f_abs.max(f(k, j).abs());
            if k == 0 || j == last {
                bdy = bdy.max(v);
            }
        }
    }
    let tol = 10.0 * (h * h + dt * dt) * (u_abs + f_abs).max(1.0);
    let np1 = (n + 1) as f64;
    let norm = math::powi(np1, n as i32 + 1);
    let tw = u.time_weights();
    let mut entropy = 0.0;
    let mut degenerate = false;
    let mut defect = f64::NEG_INFINITY;
    let mut amgm = f64::INFINITY;
    let mut chain = f64::INFINITY;
    for k in 0..m {
        let slice = &u.slices[k];
        for j in 0..len {
            let fk = f(k, j);
            let ak = a(k, j);
            if ak.dim() != n {
                return Err(invalid!("coefficient matrix has dimension {}, expected {n}", ak.dim()));
            }
            let d = ak.det();
            let fm = negative_part(fk);
            if j < last {
                let hess = slice.complex_hessian_at(j)?;
                let ut = u.time_derivative(k, j);
                let lhs = -ut + ak.contract(&hess);
                let gap = fk - lhs;
                defect = defect.max(gap);
                if gap > tol {
                    return Err(Error::Rejected(alloc::format!(
                        "(-d_t + a d dbar) u = {lhs} falls below f = {fk} at time {}, node {j}",
                        u.times[k]
                    )));
                }
                let neg = hess.neg();
                if ut >= 0.0 && neg.eigenvalues().min() >= 0.0 {
                    let y = d.max(0.0) * neg.det().max(0.0);
                    let geo = np1 * math::pow(ut * y, 1.0 / np1);
                    amgm = amgm.min(ut + n as f64 * math::root(y, n) - geo);
                    chain = chain.min(fm - geo);
                }
            }
            if fm == 0.0 {
                continue;
            }
            if d <= 0.0 {
                degenerate = true;
                continue;
            }
            let x = math::powi(fm, n as i32 + 1) / (norm * d);
            let arg = math::log(x).max(LOG_DET_FLOOR);
            entropy += tw[k] * slice.weight(j) * x * weight.eval(arg);
        }
    }
    if degenerate {
        entropy = f64::INFINITY;
    }
    Ok(ParabolicMeasurement {
        n,
        sup: u_sup,
        sup_parabolic_boundary: bdy,
        entropy,
        amgm_margin: if amgm.is_finite() { amgm } else { 0.0 },
        chain_margin: if chain.is_finite() { chain } else { 0.0 },
        max_inequality_defect: defect,
        tolerance: tol,
        degenerate,
    })
}

pub fn parabolic_evaluate(m: &ParabolicMeasurement, c1: f64, c2: f64, mode: Mode) -> ParabolicReport {
    let rhs = m.sup_parabolic_boundary + c1 + c2 * math::pow(m.entropy, 1.0 / (m.n + 1) as f64);
    ParabolicReport {
        sup: m.sup,
        sup_parabolic_boundary: m.sup_parabolic_boundary,
        entropy: m.entropy,
        c1,
        c2,
        rhs,
        slack: rhs - m.sup,
        amgm_margin: m.amgm_margin,
        chain_margin: m.chain_margin,
        mode,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCalibration {
    pub c1: f64,
    pub c2: f64,
    pub split: Split,
    pub fit: Vec<ParabolicReport>,
    pub held_out: Vec<ParabolicReport>,
    /// Smallest held-out slack plus its tolerance.
    pub held_out_margin: f64,
}

impl ParabolicCalibration {
    pub fn passes(&self) -> bool {
        self.held_out_margin >= 0.0
    }
}

/// Fits `(C1, C2)` on the fit split: `C2` first with no constant term,
/// then the least `C1` covering what remains.
pub fn parabolic_calibrate(family: &[ParabolicMeasurement]) -> Result<ParabolicCalibration> {
    if family.len() < 2 {
        return Err(invalid!("calibration needs at least two members"));
    }
    let split = split_70_30(family.len());
    let x_of = |m: &ParabolicMeasurement| math::pow(m.entropy, 1.0 / (m.n + 1) as f64);
    let excess: Vec<f64> = split.fit.iter().map(|&i| family[i].sup - family[i].sup_parabolic_boundary).collect();
    let xs: Vec<f64> = split.fit.iter().map(|&i| x_of(&family[i])).collect();
    let (c1, c2) = lexicographic_fit(&excess, &alloc::vec![0.0; xs.len()], &xs);
    let fit = split.fit.iter().map(|&i| parabolic_evaluate(&family[i], c1, c2, Mode::Calibrated)).collect();
    let mut held_out = Vec::new();
    let mut margin = f64::INFINITY;
    for &i in &split.held_out {
        let r = parabolic_evaluate(&family[i], c1, c2, Mode::Fixed);
        margin = margin.min(r.slack + family[i].tolerance);
        held_out.push(r);
    }
    Ok(ParabolicCalibration { c1, c2, split, fit, held_out, held_out_margin: margin })
}

/// `u = (1 - |z|^2) mu(t)` with `mu(t) = amplitude (1 + rate t)` and `a = I`;
/// the source is the exact left side `-(1 - |z|^2) mu' - n mu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuMember {
    pub amplitude: f64,
    pub rate: f64,
}

impl MuMember {
    pub fn mu(&self, t: f64) -> f64 {
        self.amplitude * (1.0 + self.rate * t)
    }

    pub fn source(&self, n: usize, r: f64, t: f64) -> f64 {
        -(1.0 - r * r) * self.amplitude * self.rate - n as f64 * self.mu(t)
    }

    pub fn field(&self, n: usize, t_final: f64, steps: usize, count: usize) -> Result<SpaceTimeField> {
        let times = (0..=steps).map(|k| t_final * k as f64 / steps as f64).collect();
        SpaceTimeField::from_fn(n, times, count, |r, t| (1.0 - r * r) * self.mu(t))
    }

    pub fn measure(&self, n: usize, t_final: f64, steps: usize, count: usize, weight: &Weight) -> Result<ParabolicMeasurement> {
        let u = self.field(n, t_final, steps, count)?;
        let id = HermitianMatrix::identity(n);
        let dr = 1.0 / (count - 1) as f64;
        parabolic_measure(&u, |_, _| id, |k, j| self.source(n, j as f64 * dr, u.times()[k]), weight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;

    #[test]
    fn mu_member_closed_form_entropy() {
        for n in [1usize, 2] {
            let w = Weight::Power { exponent: (n + 3) as f64 };
            let m = MuMember { amplitude: 3.0, rate: 1.0 };
            let got = m.measure(n, 1.0, 64, 513, &w).unwrap();
            assert!((got.sup - 6.0).abs() < 1e-12);
            assert!((got.sup_parabolic_boundary - 3.0).abs() < 1e-12);
            assert!(got.amgm_margin >= -1e-9 && got.chain_margin >= -1e-9);
            let np1 = (n + 1) as f64;
            let norm = math::powi(np1, n as i32 + 1);
            let area = math::sphere_area(n);
            let inner = |t: f64| {
                adaptive_simpson(
                    &|r: f64| {
                        let fm = -m.source(n, r, t);
                        let x = math::powi(fm, n as i32 + 1) / norm;
                        area * math::powi(r, 2 * n as i32 - 1) * x * w.eval(math::log(x))
                    },
                    0.0,
                    1.0,
                    1e-10,
                )
            };
            let exact = adaptive_simpson(&inner, 0.0, 1.0, 1e-9);
            assert!((got.entropy - exact).abs() < 2e-3 * exact, "{} {exact}", got.entropy);
        }
    }

    #[test]
    fn nonnegative_source_gives_zero_entropy() {
        // u = -(1 + t)|z|^2 is decreasing in t with -u_t + Lap u / ... >= 0 for small n
        let u = SpaceTimeField::from_fn(1, (0..=10).map(|k| k as f64 * 0.1).collect(), 129, |r, t| -r * r * 0.5 - t * 2.0)
            .unwrap();
        let id = HermitianMatrix::identity(1);
        let m = parabolic_measure(&u, |_, _| id, |_, _| 1.0, &Weight::Power { exponent: 3.0 }).unwrap();
        assert_eq!(m.entropy, 0.0);
        let r = parabolic_evaluate(&m, 0.0, 5.0, Mode::Fixed);
        assert!(r.slack >= 0.0);
    }

    #[test]
    fn violated_inequality_rejected() {
        let m = MuMember { amplitude: 1.0, rate: 1.0 };
        let u = m.field(1, 1.0, 10, 129).unwrap();
        let id = HermitianMatrix::identity(1);
        let r = parabolic_measure(&u, |_, _| id, |_, _| 0.0, &Weight::Power { exponent: 3.0 });
        assert!(matches!(r, Err(Error::Rejected(_))));
        assert!(m.measure(1, 1.0, 10, 129, &Weight::Power { exponent: 1.5 }).is_err());
    }

    #[test]
    fn calibration_on_mu_family() {
        for n in [1usize, 2] {
            let w = Weight::Power { exponent: (n + 2) as f64 };
            let fam: Vec<ParabolicMeasurement> = (0..=10)
                .map(|k| MuMember { amplitude: (1u32 << k) as f64, rate: 1.0 }.measure(n, 1.0, 32, 257, &w).unwrap())
                .collect();
            let cal = parabolic_calibrate(&fam).unwrap();
            assert!(cal.passes(), "{cal:?}");
            assert!(fam.iter().all(|m| m.chain_margin >= -m.tolerance));
        }
    }

    #[test]
    fn time_rescaling_keeps_margin_sign() {
        let n = 2;
        let w = Weight::Power { exponent: 4.0 };
        let m = MuMember { amplitude: 2.0, rate: 1.0 };
        let base = m.measure(n, 1.0, 32, 129, &w).unwrap();
        let slow = MuMember { amplitude: 2.0, rate: 0.5 };
        let scaled = slow.measure(n, 2.0, 32, 129, &w).unwrap();
        assert_eq!(base.amgm_margin >= 0.0, scaled.amgm_margin >= 0.0);
        assert_eq!(base.chain_margin >= -base.tolerance, scaled.chain_margin >= -scaled.tolerance);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn amgm_margin_nonnegative(a in 0.1f64..50.0, rate in 0.0f64..3.0, n in 1usize..=2) {
            let m = MuMember { amplitude: a, rate }.measure(n, 1.0, 8, 65, &Weight::Power { exponent: (n + 2) as f64 }).unwrap();
            proptest::prop_assert!(m.amgm_margin >= -1e-9 * a);
            proptest::prop_assert!(m.chain_margin >= -m.tolerance);
        }
    }
}
