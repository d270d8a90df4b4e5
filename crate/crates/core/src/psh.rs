//! Contact sets, determinant entropies and Trudinger-type functionals.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{BallField, NodeClass};
use crate::linalg::{HermitianMatrix, SymMatrix};
use crate::math;
use crate::weight::Weight;

/// Lower clamp applied to `log det` before evaluating a weight.
pub const LOG_DET_FLOOR: f64 = -745.0;

/// `max(-f, 0)`.
pub fn negative_part(f: f64) -> f64 {
    (-f).max(0.0)
}

/// Default positive-definiteness threshold: `1e-8 * max |u|`.
pub fn default_eps_pd<F: BallField + ?Sized>(u: &F) -> f64 {
    1e-8 * u.sup_abs()
}

/// Contact set together with the measures integrated over it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    #[serde(skip)]
    pub mask: Vec<bool>,
    /// `int_{contact} det(-u_{i jbar}) dV`.
    pub mass: f64,
    /// `int_{contact} det Phi(log det) dV`.
    pub entropy: f64,
    /// Contact volume over ball volume.
    pub contact_fraction: f64,
    /// Boundary supremum used as the threshold.
    pub threshold: f64,
}

/// A contact node with `det(-u_{i jbar})` and the Hessian itself.
#[derive(Clone, Copy, Debug)]
pub struct ContactPoint {
    pub index: usize,
    pub det_neg: f64,
    pub hessian: HermitianMatrix,
}

/// Interior points where `-u_{i jbar}` has minimum eigenvalue above `eps_pd`
/// and `u` exceeds its boundary supremum.
pub fn contact_points<F: BallField + ?Sized>(u: &F, eps_pd: f64) -> Result<(f64, Vec<ContactPoint>)> {
    if !(eps_pd >= 0.0) {
        return Err(invalid!("eps_pd must be nonnegative, got {eps_pd}"));
    }
    let threshold = u.sup_boundary()?;
    let mut out = Vec::new();
    for k in 0..u.len() {
        if u.class(k) != NodeClass::Inside || !(u.value(k) > threshold) {
            continue;
        }
        let hess = u.complex_hessian_at(k)?;
        let neg = hess.neg();
        if neg.eigenvalues().min() > eps_pd {
            out.push(ContactPoint { index: k, det_neg: neg.det(), hessian: hess });
        }
    }
    Ok((threshold, out))
}

pub fn contact_set<F: BallField + ?Sized>(u: &F, eps_pd: f64) -> Result<Vec<bool>> {
    let (_, pts) = contact_points(u, eps_pd)?;
    let mut mask = vec![false; u.len()];
    for p in pts {
        mask[p.index] = true;
    }
    Ok(mask)
}

/// `det * Phi(log det)` with the log clamped below.
pub fn weighted_det(det: f64, weight: &Weight) -> f64 {
    if det <= 0.0 {
        return 0.0;
    }
    det * weight.eval(math::log(det).max(LOG_DET_FLOOR))
}

/// Mass and `Phi`-entropy of `det(-u_{i jbar})` over the contact set.
pub fn entropy<F: BallField>(u: &F, weight: &Weight, eps_pd: Option<f64>) -> Result<ContactReport> {
    weight.validate()?;
    let eps = eps_pd.unwrap_or_else(|| default_eps_pd(u));
    let (threshold, pts) = contact_points(u, eps)?;
    let mut mask = vec![false; u.len()];
    let mut mass = 0.0;
    let mut ent = 0.0;
    let mut contact_vol = 0.0;
    for p in &pts {
        mask[p.index] = true;
        let w = u.weight(p.index);
        if p.det_neg > 0.0 {
            mass += w * p.det_neg;
            ent += w * weighted_det(p.det_neg, weight);
        }
        contact_vol += w;
    }
    if !(mass.is_finite() && ent.is_finite()) {
        return Err(Error::NonFinite("contact-set entropy".into()));
    }
    let vol = u.integrate(|_| 1.0);
    Ok(ContactReport { mask, mass, entropy: ent, contact_fraction: contact_vol / vol, threshold })
}

/// Value of the drift entropy and whether a degenerate node forced `+inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEntropy {
    pub value: f64,
    pub degenerate: bool,
}

/// `int_mask (f-)^n / det a * Phi(log((f-)^n / (n^n det a))) dV`.
pub fn drift_entropy<F, Fs, As>(field: &F, f: Fs, a: As, weight: &Weight, mask: &[bool]) -> Result<DriftEntropy>
where
    F: BallField,
    Fs: Fn(usize) -> f64,
    As: Fn(usize) -> HermitianMatrix,
{
    weight.validate()?;
    if mask.len() != field.len() {
        return Err(invalid!("mask length {} does not match field length {}", mask.len(), field.len()));
    }
    let n = field.dim();
    let nn = math::powi(n as f64, n as i32);
    let mut value = 0.0;
    let mut degenerate = false;
    for k in 0..field.len() {
        if !mask[k] {
            continue;
        }
        let fm = negative_part(f(k));
        if fm == 0.0 {
            continue;
        }
        let w = field.weight(k);
        let det_a = a(k).det();
        if det_a <= 0.0 {
            degenerate = true;
            continue;
        }
        let top = math::powi(fm, n as i32);
        let arg = math::log(top / (nn * det_a)).max(LOG_DET_FLOOR);
        value += w * top / det_a * weight.eval(arg);
    }
    if degenerate {
        value = f64::INFINITY;
    }
    Ok(DriftEntropy { value, degenerate })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrudingerFunctionals {
    /// `int_{contact} det (log^2 det + 1)^{p/2} dV`.
    pub n_p: f64,
    /// `int_B exp(c1 ((u - c2)+ / N_p^{1/n})^{n/(n-p)}) dV`.
    pub exp_integral: f64,
    pub mass: f64,
}

/// Slack allowed on the zero-boundary precondition for grid fields, whose
/// boundary band sits up to one cell inside the sphere.
pub fn boundary_tolerance<F: BallField + ?Sized>(u: &F) -> f64 {
    2.0 * u.mesh() * u.sup_abs() + 1e-12
}

pub fn trudinger_functionals<F: BallField>(u: &F, p: f64, c1: f64, c2: f64) -> Result<TrudingerFunctionals> {
    let n = u.dim() as f64;
    if !(p > 0.0 && p < n) {
        return Err(invalid!("exponent p must lie in (0, {n}), got {p}"));
    }
    let sb = u.sup_boundary()?;
    if sb > boundary_tolerance(u) {
        return Err(invalid!("boundary supremum {sb} is positive"));
    }
    let (_, pts) = contact_points(u, default_eps_pd(u))?;
    let mut n_p = 0.0;
    let mut mass = 0.0;
    for pt in &pts {
        if pt.det_neg <= 0.0 {
            continue;
        }
        let w = u.weight(pt.index);
        let l = math::log(pt.det_neg).max(LOG_DET_FLOOR);
        n_p += w * pt.det_neg * math::pow(l * l + 1.0, 0.5 * p);
        mass += w * pt.det_neg;
    }
    let exponent = n / (n - p);
    let exp_integral = if n_p > 0.0 {
        let scale = math::pow(n_p, 1.0 / n);
        u.integrate(|k| {
            let excess = (u.value(k) - c2).max(0.0) / scale;
            math::exp(c1 * math::pow(excess, exponent))
        })
    } else {
        if (0..u.len()).any(|k| u.weight(k) > 0.0 && u.value(k) > c2) {
            return Err(Error::Rejected("N_p vanishes but u exceeds c2 somewhere".into()));
        }
        u.integrate(|_| 1.0)
    };
    Ok(TrudingerFunctionals { n_p, exp_integral, mass })
}

/// `2^{2n} det(-C)^2 - |det R|` for a complex Hessian `C` and real Hessian `R`.
pub fn determinant_comparison_margin(complex: &HermitianMatrix, real: &SymMatrix) -> f64 {
    let n = complex.dim() as i32;
    let d = complex.neg().det();
    math::powi(2.0, 2 * n) * d * d - real.det().abs()
}
