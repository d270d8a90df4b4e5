//! Radial Dirichlet problem for the complex Monge-Ampere operator, the
//! h-transform comparison construction, the pluricomplex energy and an
//! exponential-integrability probe.
//!
//! For `u = f(|z|)` one has `det(u_{i jbar}) r^{2n-1} = M'(r) / (2n)` with
//! `M = (r f' / 2)^n`, so `det = g` integrates to `f' = 2 M^{1/n} / r`,
//! `M(r) = 2n int_0^r rho^{2n-1} g`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{radial_det, radial_weights, RadialProfile};
use crate::math;
use crate::quadrature::adaptive_simpson_pieces;
use crate::weight::Weight;

/// Radial `psi` with `det(psi_{i jbar}) = g`, `psi(1) = 0`.
///
/// `g` is taken piecewise linear between samples and `M` is integrated
/// exactly; `psi` follows from the trapezoid rule on `f'`. Constant
/// densities are reproduced to rounding error.
pub fn solve_dirichlet_radial(density: &RadialProfile, n: usize) -> Result<RadialProfile> {
    if n == 0 || n > 2 {
        return Err(invalid!("complex dimension must be 1 or 2, got {n}"));
    }
    let g = density.samples();
    if let Some(k) = g.iter().position(|&v| v < 0.0) {
        return Err(invalid!("density is negative at sample {k} ({})", g[k]));
    }
    let count = g.len();
    let dr = density.spacing();
    let m = 2 * n as i32 - 1;
    let mut mass = vec![0.0; count];
    for j in 0..count - 1 {
        let a = j as f64 * dr;
        let b = a + dr;
        let slope = (g[j + 1] - g[j]) / dr;
        let offset = g[j] - slope * a;
        let p1 = (math::powi(b, m + 1) - math::powi(a, m + 1)) / (m + 1) as f64;
        let p2 = (math::powi(b, m + 2) - math::powi(a, m + 2)) / (m + 2) as f64;
        mass[j + 1] = mass[j] + (2 * n) as f64 * (offset * p1 + slope * p2).max(0.0);
    }
    let slope: Vec<f64> = (0..count)
        .map(|k| if k == 0 { 0.0 } else { 2.0 * math::root(mass[k], n) / (k as f64 * dr) })
        .collect();
    let mut psi = vec![0.0; count];
    for k in (0..count - 1).rev() {
        psi[k] = psi[k + 1] - 0.5 * dr * (slope[k] + slope[k + 1]);
    }
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("radial Dirichlet solution".into()));
    }
    RadialProfile::new(psi)
}

/// `det(psi_{i jbar})` at every profile node from finite differences.
pub fn radial_monge_ampere(psi: &RadialProfile, n: usize) -> Vec<f64> {
    (0..psi.len()).map(|k| radial_det(n, psi.hessian_eigs_at_node(k))).collect()
}

/// Relative sup-norm residual `max |det(psi) - g| / max |g|`.
pub fn monge_ampere_residual(psi: &RadialProfile, density: &RadialProfile, n: usize) -> f64 {
    let det = radial_monge_ampere(psi, n);
    let scale = density.samples().iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    det.iter().zip(density.samples()).map(|(d, g)| (d - g).abs()).fold(0.0, f64::max) / scale
}

/// Total Monge-Ampere mass `vol(B) (f'(1)/2)^n` of a radial function.
pub fn radial_mass(psi: &RadialProfile, n: usize) -> f64 {
    let (d1, _) = psi.derivatives(psi.len() - 1);
    math::ball_volume(n) * math::powi(0.5 * d1, n as i32)
}

/// Smallest complex-Hessian eigenvalue over the profile nodes.
pub fn min_hessian_eigenvalue(psi: &RadialProfile) -> f64 {
    (0..psi.len())
        .map(|k| {
            let (a, b) = psi.hessian_eigs_at_node(k);
            a.min(b)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `int (-psi) det(psi_{i jbar}) dV`, evaluated after integrating by parts
/// as `|S^{2n-1}|/(2n) int_0^1 f' (r f'/2)^n dr`.
pub fn energy(psi: &RadialProfile, n: usize) -> Result<f64> {
    let scale = psi.samples().iter().map(|v| v.abs()).fold(1.0, f64::max);
    if psi.boundary_value().abs() > 1e-8 * scale {
        return Err(invalid!("energy needs zero boundary value, got {}", psi.boundary_value()));
    }
    Ok(flux_energy(psi, n))
}

pub(crate) fn flux_energy(psi: &RadialProfile, n: usize) -> f64 {
    let dr = psi.spacing();
    let vals: Vec<f64> = (0..psi.len())
        .map(|k| {
            let (d1, _) = psi.derivatives(k);
            let r = k as f64 * dr;
            d1 * math::powi(0.5 * r * d1, n as i32)
        })
        .collect();
    math::sphere_area(n) / (2 * n) as f64 * crate::quadrature::trapezoid(&vals, dr)
}

/// `h(s) = -(q/alpha) N^{1/n} int_s^inf Phi^{-1/n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HTransform {
    pub weight: Weight,
    pub n: usize,
    pub q: f64,
    pub alpha: f64,
    pub entropy: f64,
    /// `(q/alpha) N^{1/n}`.
    pub scale: f64,
    /// `-h(0)`.
    pub s0: f64,
    pub s_max: f64,
    pub table_s: Vec<f64>,
    pub table_h: Vec<f64>,
}

const H_TABLE_SIZE: usize = 513;

pub fn build_h(weight: &Weight, n: usize, entropy: f64, q: f64, alpha: f64) -> Result<HTransform> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(invalid!("q must exceed 1, got {q}"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid!("alpha must be positive, got {alpha}"));
    }
    if !(entropy > 0.0 && entropy.is_finite()) {
        return Err(invalid!("entropy must be positive, got {entropy}"));
    }
    let lambda = weight.require_lambda(n)?;
    let scale = q / alpha * math::root(entropy, n);
    let mut s_max: f64 = 1.0;
    while weight.tail(s_max, n) > 1e-10 * lambda && s_max < 1e300 {
        s_max *= 2.0;
    }
    let top = math::log1p(s_max);
    let table_s: Vec<f64> =
        (0..H_TABLE_SIZE).map(|k| math::expm1(top * k as f64 / (H_TABLE_SIZE - 1) as f64)).collect();
    let table_h = table_s.iter().map(|&s| -scale * weight.tail(s, n)).collect();
    Ok(HTransform {
        weight: *weight,
        n,
        q,
        alpha,
        entropy,
        scale,
        s0: scale * lambda,
        s_max,
        table_s,
        table_h,
    })
}

impl HTransform {
    pub fn eval(&self, s: f64) -> f64 {
        -self.scale * self.weight.tail(s, self.n)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.scale * math::pow(self.weight.eval(s), -1.0 / self.n as f64)
    }

    /// Largest slope increase between consecutive table intervals
    /// (nonpositive up to rounding for a concave table).
    pub fn concavity_defect(&self) -> f64 {
        let slopes: Vec<f64> = self
            .table_s
            .windows(2)
            .zip(self.table_h.windows(2))
            .map(|(s, h)| (h[1] - h[0]) / (s[1] - s[0]))
            .collect();
        slopes.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_monotone(&self) -> bool {
        self.table_h.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Nodewise evaluation of `e^G <= det(psi) + F`, `F = min(e^{-(alpha/q) psi1}, e^G)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub nodes: usize,
    /// `min (det psi + F - e^G) / e^G`.
    pub worst_margin: f64,
    /// `min max((det psi - e^G)/e^G, s - G)`: either alternative of the dichotomy.
    pub worst_dichotomy: f64,
    /// Nodes where `e^G <= det psi` (up to the mesh tolerance).
    pub mass_case: usize,
    /// Nodes where `G <= -(alpha/q) psi1`.
    pub small_case: usize,
    pub entropy: f64,
    pub s0: f64,
}

/// `N = int e^G Phi(G) dV` in the radial representation.
pub fn radial_entropy_of(g: &RadialProfile, weight: &Weight, n: usize) -> f64 {
    radial_weights(n, g.len()).iter().zip(g.samples()).map(|(w, &v)| w * math::exp(v) * weight.eval(v)).sum()
}

/// `psi_1` and the h-transform for a radial exponent profile `G`.
pub struct ComparisonSetup {
    pub entropy: f64,
    pub psi1: RadialProfile,
    pub h: HTransform,
}

pub fn comparison_setup(g: &RadialProfile, weight: &Weight, n: usize, q: f64, alpha: f64) -> Result<ComparisonSetup> {
    let entropy = radial_entropy_of(g, weight, n);
    let density = RadialProfile::new(g.samples().iter().map(|&v| math::exp(v) * weight.eval(v) / entropy).collect())?;
    let psi1 = solve_dirichlet_radial(&density, n)?;
    let h = build_h(weight, n, entropy, q, alpha)?;
    Ok(ComparisonSetup { entropy, psi1, h })
}

/// Checks the comparison inequality with `psi = -h(-(alpha/q) psi1)`.
pub fn comparison_check(g: &RadialProfile, psi1: &RadialProfile, h: &HTransform, weight: &Weight) -> Result<ComparisonReport> {
    let entropy = radial_entropy_of(g, weight, h.n);
    if (entropy - h.entropy).abs() > 1e-8 * entropy {
        return Err(invalid!("transform built for entropy {} but G has entropy {entropy}", h.entropy));
    }
    if psi1.len() != g.len() {
        return Err(invalid!("psi1 and G sampled on different grids"));
    }
    let ratio = h.alpha / h.q;
    let psi = RadialProfile::new(psi1.samples().iter().map(|&p| -h.eval(-ratio * p)).collect())?;
    let mut rep = comparison_margins(g, psi1, &psi, h.q, h.alpha, h.n)?;
    rep.entropy = entropy;
    rep.s0 = h.s0;
    Ok(rep)
}

/// The comparison margins for an arbitrary candidate `psi` (used by falsification controls).
pub fn comparison_margins(
    g: &RadialProfile,
    psi1: &RadialProfile,
    psi: &RadialProfile,
    q: f64,
    alpha: f64,
    n: usize,
) -> Result<ComparisonReport> {
    let det = radial_monge_ampere(psi, n);
    let ratio = alpha / q;
    let tol = psi.spacing() * psi.spacing();
    let mut worst_margin = f64::INFINITY;
    let mut worst_dichotomy = f64::INFINITY;
    let (mut mass_case, mut small_case) = (0, 0);
    for k in 0..g.len() {
        let gk = g.samples()[k];
        let eg = math::exp(gk);
        let s = -ratio * psi1.samples()[k];
        let f = math::exp(s).min(eg);
        let m = (det[k] + f - eg) / eg;
        worst_margin = worst_margin.min(m);
        let first = (det[k] - eg) / eg;
        let second = s - gk;
        worst_dichotomy = worst_dichotomy.min(first.max(second));
        if first >= -tol {
            mass_case += 1;
        }
        if second >= 0.0 {
            small_case += 1;
        }
    }
    Ok(ComparisonReport {
        nodes: g.len(),
        worst_margin,
        worst_dichotomy,
        mass_case,
        small_case,
        entropy: 0.0,
        s0: 0.0,
    })
}

/// A radial plurisubharmonic function with zero boundary value, as consumed by the probe.
pub trait RadialMember {
    fn value(&self, r: f64) -> f64;
    /// `f'(1)`.
    fn boundary_slope(&self) -> f64;
    /// Kinks in `(0, 1)`.
    fn breakpoints(&self) -> Vec<f64>;
    /// The member is constant on `[0, core_radius]`.
    fn core_radius(&self) -> f64;
    fn boundary_value(&self) -> f64 {
        self.value(1.0)
    }
    /// Smallest complex-Hessian eigenvalue (away from kinks, where the
    /// member is a maximum of plurisubharmonic pieces).
    fn min_eigenvalue(&self) -> f64;
}

/// `c max(ln r, ln eps)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogMember {
    pub epsilon: f64,
    pub scale: f64,
}

impl LogMember {
    /// Scale with unit total Monge-Ampere mass in C^n: `vol (c/2)^n = 1`.
    pub fn unit_mass(n: usize, epsilon: f64) -> Self {
        Self { epsilon, scale: 2.0 / math::root(math::ball_volume(n), n) }
    }
}

impl RadialMember for LogMember {
    fn value(&self, r: f64) -> f64 {
        self.scale * math::log(r.max(self.epsilon))
    }

    fn boundary_slope(&self) -> f64 {
        self.scale
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.epsilon]
    }

    fn core_radius(&self) -> f64 {
        self.epsilon
    }

    fn min_eigenvalue(&self) -> f64 {
        0.0
    }
}

/// A sampled profile as a probe member.
impl RadialMember for RadialProfile {
    fn value(&self, r: f64) -> f64 {
        self.value_at(r)
    }

    fn boundary_slope(&self) -> f64 {
        self.derivatives(self.len() - 1).0
    }

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn core_radius(&self) -> f64 {
        0.0
    }

    fn min_eigenvalue(&self) -> f64 {
        min_hessian_eigenvalue(self)
    }
}

/// `int_B exp(-alpha psi) dV` for a radial member, by adaptive quadrature in `ln r`.
pub fn exp_integral(member: &dyn RadialMember, n: usize, alpha: f64) -> f64 {
    let area = math::sphere_area(n);
    let two_n = (2 * n) as f64;
    let core = member.core_radius().max(1e-14);
    let core_part = area * math::exp(-alpha * member.value(core)) * math::powi(core, 2 * n as i32) / two_n;
    let f = |x: f64| math::exp(-alpha * member.value(math::exp(x)) + two_n * x);
    let breaks: Vec<f64> = member.breakpoints().iter().filter(|&&b| b > core).map(|&b| math::log(b)).collect();
    let body = adaptive_simpson_pieces(&f, math::log(core), 0.0, &breaks, 1e-12 * (1.0 + core_part));
    core_part + area * body
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub family_param: f64,
    pub alpha: f64,
    pub integral: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub n: usize,
    pub cap: f64,
    pub rows: Vec<ProbeRow>,
    /// Parameters of members failing the mass, boundary or plurisubharmonicity checks.
    pub rejected: Vec<f64>,
    /// Largest grid `alpha` up to which every accepted member stays below the cap.
    pub alpha_star: Option<f64>,
}

/// Tolerance on unit-mass and zero-boundary checks.
pub const PROBE_TOL: f64 = 1e-6;

pub fn kolodziej_probe(
    n: usize,
    members: &[(f64, Box<dyn RadialMember>)],
    alphas: &[f64],
    cap: f64,
) -> Result<ProbeReport> {
    if alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(invalid!("alpha grid must be nonnegative"));
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    let mut accepted = Vec::new();
    for (param, m) in members {
        let mass = math::ball_volume(n) * math::powi(0.5 * m.boundary_slope(), n as i32);
        let ok = mass <= 1.0 + PROBE_TOL && m.boundary_value().abs() <= PROBE_TOL && m.min_eigenvalue() >= -PROBE_TOL;
        if !ok {
            rejected.push(*param);
            continue;
        }
        accepted.push((*param, mass, m));
    }
    let mut alpha_star = None;
    let mut still_bounded = true;
    for &alpha in &sorted {
        let mut bounded = true;
        for (param, mass, m) in &accepted {
            let integral = exp_integral(m.as_ref(), n, alpha);
            bounded &= integral <= cap;
            rows.push(ProbeRow { family_param: *param, alpha, integral, mass: *mass });
        }
        if still_bounded && bounded {
            alpha_star = Some(alpha);
        } else {
            still_bounded = false;
        }
    }
    Ok(ProbeReport { n, cap, rows, rejected, alpha_star })
}

/// Integrability threshold `2n / c` of `exp(-alpha c ln r)` over the ball.
pub fn log_threshold(n: usize, scale: f64) -> f64 {
    (2 * n) as f64 / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{radial_eigs, GridSpec, NodeClass};
    use crate::fields::BallField;
    use crate::math::PI;

    #[test]
    fn constant_density_is_exact() {
        for n in [1usize, 2] {
            let c = 2.5;
            let g = RadialProfile::from_fn(1025, |_| c).unwrap();
            let psi = solve_dirichlet_radial(&g, n).unwrap();
            let want = math::root(c, n);
            for (k, v) in psi.samples().iter().enumerate() {
                let r = psi.radius(k);
                assert!((v - want * (r * r - 1.0)).abs() < 1e-12);
            }
        }
        let zero = RadialProfile::from_fn(64, |_| 0.0).unwrap();
        assert!(solve_dirichlet_radial(&zero, 2).unwrap().samples().iter().all(|&v| v == 0.0));
        let neg = RadialProfile::from_fn(64, |r| r - 0.5).unwrap();
        assert!(solve_dirichlet_radial(&neg, 1).is_err());
    }

    #[test]
    fn residual_second_order() {
        for n in [1usize, 2] {
            let dens = |r: f64| 1.0 + r * r + 0.5 * math::cos(3.0 * r);
            let mut res = Vec::new();
            for count in [257usize, 513, 1025] {
                let g = RadialProfile::from_fn(count, dens).unwrap();
                let psi = solve_dirichlet_radial(&g, n).unwrap();
                res.push(monge_ampere_residual(&psi, &g, n));
            }
            assert!(res[2] < 5e-3);
            let order = math::log(res[1] / res[2]) / math::log(2.0);
            assert!(order >= 1.5, "n={n} residuals {res:?}");
        }
    }

    /// Density `r^2` in C^1: the grid complex Hessian of the solution reproduces it.
    #[test]
    fn nonconstant_density_grid_oracle() {
        let g = RadialProfile::from_fn(2049, |r| r * r).unwrap();
        let psi = solve_dirichlet_radial(&g, 1).unwrap();
        let mut errs = Vec::new();
        for res in [64usize, 128] {
            let s = GridSpec::new(1, res).unwrap();
            let u = psi.to_grid(s).unwrap();
            let mut worst: f64 = 0.0;
            for k in 0..u.len() {
                if u.class(k) != NodeClass::Inside {
                    continue;
                }
                let r = u.radius_of(k);
                let d = u.complex_hessian_at(k).unwrap().det();
                worst = worst.max((d - r * r).abs());
            }
            errs.push(worst);
        }
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
        assert!(errs[1] < 1e-3);
    }

    #[test]
    fn solution_is_plurisubharmonic() {
        let g = RadialProfile::from_fn(513, |r| math::exp(2.0 * r * r)).unwrap();
        let psi = solve_dirichlet_radial(&g, 2).unwrap();
        assert!(min_hessian_eigenvalue(&psi) >= -1e-9);
        assert_eq!(psi.boundary_value(), 0.0);
    }

    #[test]
    fn energy_examples() {
        let p = RadialProfile::from_fn(2049, |r| r * r - 1.0).unwrap();
        assert!((energy(&p, 1).unwrap() - PI / 2.0).abs() < 1e-5);
        let zero = RadialProfile::from_fn(64, |_| 0.0).unwrap();
        assert_eq!(energy(&zero, 2).unwrap(), 0.0);
        for n in [1usize, 2] {
            let q = RadialProfile::from_fn(1025, |r| math::cos(r) - math::cos(1.0)).unwrap();
            let q = q.scale(-1.0).unwrap();
            let base = energy(&q, n).unwrap();
            let scaled = energy(&q.scale(3.0).unwrap(), n).unwrap();
            assert!((scaled - math::powi(3.0, n as i32 + 1) * base).abs() < 1e-10 * scaled);
        }
        let shifted = RadialProfile::from_fn(64, |r| r * r).unwrap();
        assert!(energy(&shifted, 1).is_err());
    }

    #[test]
    fn energy_monotone_in_density() {
        for n in [1usize, 2] {
            let mut prev = 0.0;
            for c in [0.5, 1.0, 2.0, 4.0] {
                let g = RadialProfile::from_fn(513, |r| c * (1.0 + r)).unwrap();
                let e = energy(&solve_dirichlet_radial(&g, n).unwrap(), n).unwrap();
                assert!(e >= prev);
                prev = e;
            }
        }
    }

    #[test]
    fn h_transform_exp_weight() {
        let h = build_h(&Weight::Exp { rate: 2.0 }, 2, 1.0, 1.0 + 1e-300, 1.0);
        assert!(h.is_err());
        let h = build_h(&Weight::Exp { rate: 2.0 }, 2, 1.0, 2.0, 2.0).unwrap();
        for s in [0.0, 0.5, 3.0] {
            assert!((h.eval(s) + math::exp(-s)).abs() < 1e-15);
        }
        assert!((h.s0 - 1.0).abs() < 1e-15);
        assert!(build_h(&Weight::Constant { value: 1.0 }, 1, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn h_transform_invariants() {
        let w = Weight::default_for(2);
        let h = build_h(&w, 2, 3.0, 1.5, 0.7).unwrap();
        assert!(h.is_monotone());
        assert!(h.concavity_defect() <= 1e-12);
        assert!(h.s0 <= h.scale * w.lambda(2) * (1.0 + 1e-14));
        assert!(h.eval(h.s_max).abs() <= 1e-10 * h.s0 * 1.0001);
        let doubled = build_h(&w, 2, 12.0, 1.5, 0.7).unwrap();
        for s in [0.0, 1.0, 10.0] {
            assert!((doubled.eval(s) - 2.0 * h.eval(s)).abs() < 1e-12 * h.eval(s).abs());
        }
        for (s, v) in h.table_s.iter().zip(&h.table_h) {
            assert!((h.eval(*s) - v).abs() <= 1e-8 * v.abs());
        }
    }

    #[test]
    fn comparison_holds_for_flat_exponent() {
        for n in [1usize, 2] {
            let w = Weight::default_for(n);
            let g = RadialProfile::from_fn(1025, |_| 0.0).unwrap();
            let setup = comparison_setup(&g, &w, n, 2.0, 1.0).unwrap();
            let rep = comparison_check(&g, &setup.psi1, &setup.h, &w).unwrap();
            assert!(rep.worst_margin >= -1e-6, "{rep:?}");
            assert_eq!(rep.small_case, rep.nodes);
        }
    }

    #[test]
    fn comparison_dichotomy_on_profiles() {
        let profiles: [fn(f64) -> f64; 4] = [
            |r| 2.0 * (1.0 - r * r),
            |r| 4.0 * math::cos(1.5 * r),
            |r| -1.0 + 3.0 * r * r,
            |r| math::log(1.0 + 20.0 * (1.0 - r * r)),
        ];
        for n in [1usize, 2] {
            let w = Weight::default_for(n);
            for f in profiles {
                let g = RadialProfile::from_fn(1025, f).unwrap();
                let setup = comparison_setup(&g, &w, n, 2.0, 1.0).unwrap();
                let rep = comparison_check(&g, &setup.psi1, &setup.h, &w).unwrap();
                let tol = 10.0 * g.spacing() * g.spacing();
                assert!(rep.worst_margin >= -tol && rep.worst_dichotomy >= -tol, "{rep:?}");
            }
        }
    }

    #[test]
    fn comparison_detects_missing_transform() {
        let n = 2;
        let w = Weight::default_for(n);
        let g = RadialProfile::from_fn(513, |r| 3.0 * (1.0 - r * r)).unwrap();
        let setup = comparison_setup(&g, &w, n, 2.0, 1.0).unwrap();
        let zero = RadialProfile::from_fn(513, |_| 0.0).unwrap();
        let rep = comparison_margins(&g, &setup.psi1, &zero, 2.0, 1.0, n).unwrap();
        assert!(rep.worst_margin < -0.1, "{rep:?}");
        let other = RadialProfile::from_fn(513, |r| r).unwrap();
        assert!(comparison_check(&other, &setup.psi1, &setup.h, &w).is_err());
    }

    #[test]
    fn radial_eig_formula_matches_psi_chain_rule() {
        // psi = -h(-(a/q) psi1): compare finite differences to the chain rule at a node.
        let n = 2;
        let w = Weight::default_for(n);
        let g = RadialProfile::from_fn(2049, |r| 1.0 + 2.0 * r * r).unwrap();
        let setup = comparison_setup(&g, &w, n, 2.0, 1.0).unwrap();
        let ratio = 0.5;
        let psi = RadialProfile::new(setup.psi1.samples().iter().map(|&p| -setup.h.eval(-ratio * p)).collect()).unwrap();
        let k = 1000;
        let (p1, p2) = setup.psi1.derivatives(k);
        let s = -ratio * setup.psi1.samples()[k];
        let hp = setup.h.derivative(s);
        let hpp = -setup.h.scale / n as f64 * math::pow(w.eval(s), -1.0 / n as f64 - 1.0) * w.derivative(s);
        let d1 = ratio * hp * p1;
        let d2 = ratio * hp * p2 - ratio * ratio * hpp * p1 * p1;
        let r = psi.radius(k);
        let want = radial_eigs(r, d1, d2);
        let got = psi.hessian_eigs_at_node(k);
        assert!((want.0 - got.0).abs() < 1e-5 && (want.1 - got.1).abs() < 1e-4, "{want:?} {got:?}");
    }

    #[test]
    fn probe_unit_paraboloid_matches_polar_formula() {
        let n = 1;
        let c = 1.0 / PI;
        let p = RadialProfile::from_fn(4097, move |r| c * (r * r - 1.0)).unwrap();
        let members: Vec<(f64, Box<dyn RadialMember>)> = vec![(0.0, Box::new(p))];
        let rep = kolodziej_probe(n, &members, &[1.0], 1e3).unwrap();
        let want = PI * (math::exp(c) - 1.0) / c;
        assert!((rep.rows[0].mass - 1.0).abs() < 1e-6);
        assert!((rep.rows[0].integral - want).abs() < 1e-6 * want, "{} vs {want}", rep.rows[0].integral);
    }

    #[test]
    fn probe_zero_member_and_mass_cap() {
        let zero = RadialProfile::from_fn(65, |_| 0.0).unwrap();
        let heavy = RadialProfile::from_fn(65, |r| r * r - 1.0).unwrap();
        let members: Vec<(f64, Box<dyn RadialMember>)> = vec![(0.0, Box::new(zero)), (1.0, Box::new(heavy))];
        let rep = kolodziej_probe(1, &members, &[0.5, 2.0], 1e3).unwrap();
        assert_eq!(rep.rejected, vec![1.0]);
        for row in &rep.rows {
            assert!((row.integral - PI).abs() < 1e-9);
            assert_eq!(row.mass, 0.0);
        }
    }

    #[test]
    fn log_family_threshold() {
        for n in [1usize, 2] {
            let members: Vec<(f64, Box<dyn RadialMember>)> = (1..=6)
                .map(|k| {
                    let eps = math::powi(10.0, -2 * k);
                    (eps, Box::new(LogMember::unit_mass(n, eps)) as Box<dyn RadialMember>)
                })
                .collect();
            let closed = log_threshold(n, LogMember::unit_mass(n, 0.1).scale);
            let alphas: Vec<f64> = (1..=80).map(|k| closed * 0.025 * k as f64).collect();
            let rep = kolodziej_probe(n, &members, &alphas, 1e3).unwrap();
            let star = rep.alpha_star.unwrap();
            assert!((star - closed).abs() <= 0.1 * closed, "n={n}: {star} vs {closed}");
        }
        assert!((log_threshold(1, LogMember::unit_mass(1, 0.1).scale) - PI).abs() < 1e-12);
    }

    #[test]
    fn log_member_integral_closed_form() {
        let n = 1;
        let m = LogMember::unit_mass(n, 1e-3);
        let alpha = 1.0;
        let c = m.scale;
        let e = m.epsilon;
        // 2 pi [ e^{2 - a c}/2 + (1 - e^{2 - a c}) / (2 - a c) ]
        let k = 2.0 - alpha * c;
        let want = 2.0 * PI * (math::pow(e, k) / 2.0 + (1.0 - math::pow(e, k)) / k);
        let got = exp_integral(&m, n, alpha);
        assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
    }
}

