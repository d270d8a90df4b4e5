//! Gradient experiment on the flat torus `C^n / Z^{2n}`: pairs `(phi, F)`
//! with `det(I + phi_{i jbar}) = e^{F + c}` built nodewise, the quantities
//! entering the gradient bound `|grad phi|^2 <= C1 e^{C2 (phi - inf phi)}`,
//! and the differential inequality for `H = e^{-lambda phi} |grad phi|^2`.
//!
//! Norms use the flat metric `g_{i jbar} = delta_ij`, so
//! `|grad u|^2 = sum |u_{z_k}|^2 = |grad_R u|^2 / 4`.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibrate::{split_70_30, Split};
use crate::error::{invalid, Error, Result};
use crate::fields::complex_from_real;
use crate::inequalities::young_log_margin;
use crate::linalg::HermitianMatrix;
use crate::math;

/// Periodic grid with `resolution` points per real axis on `[0, 1)^{2n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
    resolution: usize,
}

impl TorusGrid {
    pub fn new(n: usize, resolution: usize) -> Result<Self> {
        if n == 0 || n > 2 {
            return Err(invalid!("complex dimension must be 1 or 2, got {n}"));
        }
        if resolution < 8 {
            return Err(invalid!("torus resolution must be at least 8, got {resolution}"));
        }
        Ok(Self { n, resolution })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn node_count(&self) -> usize {
        self.resolution.pow(2 * self.n as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        math::powi(self.spacing(), 2 * self.n as i32)
    }

    fn stride(&self, axis: usize) -> usize {
        self.resolution.pow(axis as u32)
    }

    fn coord(&self, k: usize, axis: usize) -> usize {
        (k / self.stride(axis)) % self.resolution
    }

    /// Real coordinates `(x1, y1, x2, y2)` of node `k`.
    pub fn point(&self, k: usize) -> [f64; 4] {
        let mut p = [0.0; 4];
        for (a, slot) in p.iter_mut().enumerate().take(2 * self.n) {
            *slot = self.coord(k, a) as f64 * self.spacing();
        }
        p
    }

    fn shift(&self, k: usize, axis: usize, by: isize) -> usize {
        let c = self.coord(k, axis) as isize;
        let m = self.resolution as isize;
        let nc = (c + by).rem_euclid(m) as usize;
        k - self.coord(k, axis) * self.stride(axis) + nc * self.stride(axis)
    }

    pub fn gradient(&self, u: &[f64], k: usize) -> [f64; 4] {
        let mut g = [0.0; 4];
        let h = self.spacing();
        for (a, slot) in g.iter_mut().enumerate().take(2 * self.n) {
            *slot = (u[self.shift(k, a, 1)] - u[self.shift(k, a, -1)]) / (2.0 * h);
        }
        g
    }

    pub fn second_differences(&self, u: &[f64], k: usize) -> [[f64; 4]; 4] {
        let h2 = self.spacing() * self.spacing();
        let d = 2 * self.n;
        let mut out = [[0.0; 4]; 4];
        for a in 0..d {
            out[a][a] = (u[self.shift(k, a, 1)] - 2.0 * u[k] + u[self.shift(k, a, -1)]) / h2;
            for b in a + 1..d {
                let p = self.shift(k, a, 1);
                let m = self.shift(k, a, -1);
                let v = (u[self.shift(p, b, 1)] - u[self.shift(p, b, -1)] - u[self.shift(m, b, 1)] + u[self.shift(m, b, -1)])
                    / (4.0 * h2);
                out[a][b] = v;
                out[b][a] = v;
            }
        }
        out
    }

    pub fn complex_hessian(&self, u: &[f64], k: usize) -> HermitianMatrix {
        complex_from_real(self.n, &self.second_differences(u, k))
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.node_count()).map(|k| f(&self.point(k)[..2 * self.n])).collect()
    }

    /// `int u dV` over the unit-volume torus.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        u.iter().sum::<f64>() * self.cell_volume()
    }
}

/// Flat-metric `|grad u|^2` from real partials.
fn grad_norm2(g: &[f64; 4]) -> f64 {
    0.25 * g.iter().map(|v| v * v).sum::<f64>()
}

/// `Re <grad a, grad b>` from real partials.
fn grad_dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    0.25 * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

#[derive(Clone, Debug)]
pub struct TorusPair {
    grid: TorusGrid,
    phi: Vec<f64>,
    metric: Vec<HermitianMatrix>,
    f: Vec<f64>,
    offset: f64,
}

impl TorusPair {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// `c` in `det(I + phi_{i jbar}) = e^{F + c}`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn metric(&self, k: usize) -> &HermitianMatrix {
        &self.metric[k]
    }

    /// `max |det(I + phi_{i jbar}) - e^{F + c}| / det`.
    pub fn monge_ampere_defect(&self) -> f64 {
        self.metric
            .iter()
            .zip(&self.f)
            .map(|(g, f)| {
                let d = g.det();
                (d - math::exp(f + self.offset)).abs() / d
            })
            .fold(0.0, f64::max)
    }
}

/// Builds `F = log det(I + phi_{i jbar}) - c` with `int e^F = 1`.
pub fn make_pair(grid: TorusGrid, phi: Vec<f64>) -> Result<TorusPair> {
    if phi.len() != grid.node_count() {
        return Err(invalid!("field has {} values, grid has {}", phi.len(), grid.node_count()));
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("torus potential".into()));
    }
    let id = HermitianMatrix::identity(grid.dim());
    let mut metric = Vec::with_capacity(phi.len());
    let mut worst = (f64::INFINITY, 0usize);
    for k in 0..phi.len() {
        let g = id.add(&grid.complex_hessian(&phi, k));
        let lo = g.eigenvalues().min();
        if lo < worst.0 {
            worst = (lo, k);
        }
        metric.push(g);
    }
    if !(worst.0 > 0.0) {
        let p = grid.point(worst.1);
        return Err(Error::Domain(alloc::format!(
            "metric I + complex Hessian is not positive definite: eigenvalue {} at node {} ({:?})",
            worst.0,
            worst.1,
            &p[..2 * grid.dim()]
        )));
    }
    let raw: Vec<f64> = metric.iter().map(|g| math::log(g.det())).collect();
    let mut acc = f64::NEG_INFINITY;
    for v in &raw {
        acc = math::log_add_exp(acc, *v);
    }
    let offset = acc + math::log(grid.cell_volume());
    let f = raw.iter().map(|v| v - offset).collect();
    Ok(TorusPair { grid, phi, metric, f, offset })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub lambda: f64,
    /// Curvature lower bound `-B`; zero on the flat torus.
    pub b: f64,
    /// Cutoff constant; unused on a closed manifold.
    pub a: f64,
    pub h_max: f64,
    pub entropy_f: f64,
    #[serde(rename = "eF_Lq")]
    pub ef_lq: f64,
    #[serde(rename = "H_L1")]
    pub h_l1: f64,
    pub ratio: f64,
    pub c2: f64,
    pub p: f64,
    pub q: f64,
    /// `min (Delta_phi H - rhs)` over nodes.
    pub lemma_margin: f64,
    pub lemma_scale: f64,
    pub lemma_tolerance: f64,
    pub ma_defect: f64,
    pub young_violations: usize,
}

impl GradientReport {
    pub fn lemma_holds(&self) -> bool {
        self.lemma_margin >= -self.lemma_tolerance
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientParams {
    pub c2: f64,
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    /// Highest wavenumber present; sets the finite-difference tolerance.
    pub k_max: f64,
}

pub fn gradient_report(pair: &TorusPair, params: &GradientParams) -> Result<GradientReport> {
    let grid = pair.grid;
    let n = grid.dim();
    let GradientParams { c2, p, q, lambda, k_max } = *params;
    if !(p > n as f64) || !(q > 1.0) {
        return Err(invalid!("need p > n and q > 1, got p = {p}, q = {q}"));
    }
    let phi = &pair.phi;
    let f = &pair.f;
    let inf_phi = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let count = phi.len();
    let mut grad_phi = Vec::with_capacity(count);
    let mut h = Vec::with_capacity(count);
    for k in 0..count {
        let g = grid.gradient(phi, k);
        h.push(math::exp(-lambda * phi[k]) * grad_norm2(&g));
        grad_phi.push(g);
    }
    let vol = grid.cell_volume();
    let (mut h_max, mut ratio, mut ent, mut lq, mut h_l1): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut margin = f64::INFINITY;
    let mut scale: f64 = 0.0;
    let mut young_violations = 0usize;
    for k in 0..count {
        let gf = grid.gradient(f, k);
        let gnorm = math::sqrt(grad_norm2(&gf));
        let ef = math::exp(f[k]);
        h_max = h_max.max(h[k]);
        h_l1 += h[k] * vol;
        ratio = ratio.max(grad_norm2(&grad_phi[k]) * math::exp(-c2 * (phi[k] - inf_phi)));
        ent += vol * math::powi(gnorm, n as i32) * math::pow(math::log1p(gnorm), p) * ef;
        lq += vol * math::exp(q * f[k]);

        let inv = pair.metric[k].inverse().ok_or_else(|| Error::Domain("degenerate metric".into()))?;
        let lhs = inv.contract(&grid.complex_hessian(&h, k));
        let drift = 2.0 * math::exp(-lambda * phi[k]) * grad_dot(&gf, &grad_phi[k]);
        let trace = lambda * h[k] * inv.trace();
        let sink = lambda * (n + 2) as f64 * h[k];
        margin = margin.min(lhs - (drift + trace - sink));
        scale = scale.max(lhs.abs() + drift.abs() + trace + sink);

        let x = math::pow(f[k].abs(), p) + f64::MIN_POSITIVE;
        let y = math::E + math::powi(gnorm, n as i32);
        if young_log_margin(x, y, q, 1.0) < -1e-12 {
            young_violations += 1;
        }
    }
    let hh = 2.0 * math::PI * k_max.max(1.0) * grid.spacing();
    Ok(GradientReport {
        lambda,
        b: 0.0,
        a: 0.0,
        h_max,
        entropy_f: ent,
        ef_lq: math::pow(lq, 1.0 / q),
        h_l1,
        ratio,
        c2,
        p,
        q,
        lemma_margin: margin,
        lemma_scale: scale,
        lemma_tolerance: hh * hh * scale,
        ma_defect: pair.monge_ampere_defect(),
        young_violations,
    })
}

/// Shapes for the amplitude sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TorusFamily {
    /// `cos(2 pi x1)`.
    SingleMode,
    /// `cos(2 pi x1) + 0.5 sin(2 pi (x1 + 2 y1))`, plus `0.5 cos(2 pi (x2 - y1))` when `n = 2`.
    TwoMode,
    /// Eight random modes with wavevector entries in `[-2, 2]`.
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Mode {
    wave: [i32; 4],
    amplitude: f64,
    phase: f64,
}

impl TorusFamily {
    fn modes(&self, n: usize) -> Vec<Mode> {
        match *self {
            TorusFamily::SingleMode => vec![Mode { wave: [1, 0, 0, 0], amplitude: 1.0, phase: 0.0 }],
            TorusFamily::TwoMode => {
                let mut m = vec![
                    Mode { wave: [1, 0, 0, 0], amplitude: 1.0, phase: 0.0 },
                    Mode { wave: [1, 2, 0, 0], amplitude: 0.5, phase: -0.5 * math::PI },
                ];
                if n == 2 {
                    m.push(Mode { wave: [0, -1, 1, 0], amplitude: 0.5, phase: 0.0 });
                }
                m
            }
            TorusFamily::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut out = Vec::with_capacity(8);
                while out.len() < 8 {
                    let mut wave = [0i32; 4];
                    for w in wave.iter_mut().take(2 * n) {
                        *w = rng.random_range(-2..=2);
                    }
                    if wave.iter().all(|&w| w == 0) {
                        continue;
                    }
                    let k2: i32 = wave.iter().map(|w| w * w).sum();
                    out.push(Mode {
                        wave,
                        amplitude: rng.random_range(0.5..1.0) / k2 as f64,
                        phase: rng.random_range(0.0..2.0 * math::PI),
                    });
                }
                out
            }
        }
    }

    pub fn k_max(&self, n: usize) -> f64 {
        self.modes(n)
            .iter()
            .map(|m| math::sqrt(m.wave.iter().map(|w| (w * w) as f64).sum()))
            .fold(0.0, f64::max)
    }

    pub fn shape(&self, grid: &TorusGrid) -> Vec<f64> {
        let modes = self.modes(grid.dim());
        grid.sample(|x| {
            modes
                .iter()
                .map(|m| {
                    let arg: f64 = x.iter().zip(&m.wave).map(|(xi, w)| xi * *w as f64).sum();
                    m.amplitude * math::cos(2.0 * math::PI * arg + m.phase)
                })
                .sum()
        })
    }
}

/// Largest amplitude `eps` keeping `I + eps psi_{i jbar}` positive definite on the grid.
pub fn positivity_threshold(grid: &TorusGrid, psi: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..psi.len() {
        worst = worst.max(-grid.complex_hessian(psi, k).eigenvalues().min());
    }
    if worst > 0.0 {
        1.0 / worst
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMember {
    pub amplitude: f64,
    pub report: GradientReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusSweep {
    pub family: TorusFamily,
    pub n: usize,
    pub resolution: usize,
    pub threshold: f64,
    pub members: Vec<SweepMember>,
    pub split: Split,
    /// Smallest `C1` covering the fit split for the given `C2`.
    pub c1: f64,
    pub held_out_max_ratio: f64,
}

impl TorusSweep {
    pub fn held_out_bounded(&self) -> bool {
        self.held_out_max_ratio <= self.c1 * (1.0 + 1e-12)
    }

    pub fn lemma_holds(&self) -> bool {
        self.members.iter().all(|m| m.report.lemma_holds())
    }
}

/// Amplitudes `0.9 threshold (k + 1) / members`, one report each, and `C1`
/// calibrated on the fit split.
pub fn sweep(family: TorusFamily, grid: TorusGrid, members: usize, params: &GradientParams) -> Result<TorusSweep> {
    if members < 2 {
        return Err(invalid!("a sweep needs at least two members"));
    }
    let psi = family.shape(&grid);
    let threshold = positivity_threshold(&grid, &psi);
    if !threshold.is_finite() {
        return Err(invalid!("shape has no positivity threshold"));
    }
    let params = GradientParams { k_max: family.k_max(grid.dim()), ..*params };
    let mut out = Vec::with_capacity(members);
    for k in 0..members {
        let eps = 0.9 * threshold * (k + 1) as f64 / members as f64;
        let pair = make_pair(grid, psi.iter().map(|v| eps * v).collect())?;
        out.push(SweepMember { amplitude: eps, report: gradient_report(&pair, &params)? });
    }
    let split = split_70_30(members);
    let c1 = split.fit.iter().map(|&i| out[i].report.ratio).fold(0.0, f64::max);
    let held = split.held_out.iter().map(|&i| out[i].report.ratio).fold(0.0, f64::max);
    Ok(TorusSweep {
        family,
        n: grid.dim(),
        resolution: grid.resolution(),
        threshold,
        members: out,
        split,
        c1,
        held_out_max_ratio: held,
    })
}

impl Default for GradientParams {
    fn default() -> Self {
        GradientParams { c2: 1.0, p: 3.0, q: 2.0, lambda: 1.0, k_max: 1.0 }
    }
}
