//! Inverse Monge-Ampere flow `(-u_t) det(u_{i jbar}) = f` on the unit ball
//! with `u(0) = |z|^2 - 1` and `u = -b(t)` on the sphere, solved by implicit
//! Euler in time, plus runtime monitors for its a priori bounds, the energy
//! inequality and exponential integrability along the flow.
//!
//! Radial data use a finite-volume form of `det = M'(r) / (2n r^{2n-1})`,
//! `M = (r u_r / 2)^n`; the full disc (n = 1) uses a Shortley-Weller
//! Laplacian with `det = Δu / 4`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{radial_weights, BallQuadrature, GridField, GridSpec, RadialProfile};
use crate::linalg::{solve_tridiagonal, BandMatrix};
use crate::math;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    #[default]
    Radial,
    Disc,
}

/// Source term `f(z, t) > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Source {
    Constant { value: f64 },
    /// `value (1 + amplitude (1 - |z|^2))`.
    Bump { value: f64, amplitude: f64 },
    /// `value (1 + amplitude (1 - |z|^2) x1)`; not radial.
    Tilted { value: f64, amplitude: f64 },
    /// `(rate + 2 accel t + kappa (1 - |z|^2)) (1 + kappa t)^n`, whose flow
    /// with `b = rate t + accel t^2` is `(1 + kappa t)(|z|^2 - 1) - b`.
    Manufactured { rate: f64, accel: f64, kappa: f64 },
}

impl Source {
    pub fn eval(&self, n: usize, r2: f64, x1: f64, t: f64) -> f64 {
        match *self {
            Source::Constant { value } => value,
            Source::Bump { value, amplitude } => value * (1.0 + amplitude * (1.0 - r2)),
            Source::Tilted { value, amplitude } => value * (1.0 + amplitude * (1.0 - r2) * x1),
            Source::Manufactured { rate, accel, kappa } => {
                (rate + 2.0 * accel * t + kappa * (1.0 - r2)) * math::powi(1.0 + kappa * t, n as i32)
            }
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, Source::Tilted { .. })
    }

    /// Same source multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Option<Self> {
        match *self {
            Source::Constant { value } => Some(Source::Constant { value: value * s }),
            Source::Bump { value, amplitude } => Some(Source::Bump { value: value * s, amplitude }),
            Source::Tilted { value, amplitude } => Some(Source::Tilted { value: value * s, amplitude }),
            Source::Manufactured { .. } => None,
        }
    }
}

/// Boundary schedule `b(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Boundary {
    Linear { rate: f64 },
    Quadratic { rate: f64, accel: f64 },
    /// `rate min(t, stop)`: the schedule stops moving at `stop`.
    Stalled { rate: f64, stop: f64 },
}

impl Boundary {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Boundary::Linear { rate } => rate * t,
            Boundary::Quadratic { rate, accel } => rate * t + accel * t * t,
            Boundary::Stalled { rate, stop } => rate * t.min(stop),
        }
    }

    pub fn slope(&self, t: f64) -> f64 {
        match *self {
            Boundary::Linear { rate } => rate,
            Boundary::Quadratic { rate, accel } => rate + 2.0 * accel * t,
            Boundary::Stalled { rate, stop } => {
                if t < stop {
                    rate
                } else {
                    0.0
                }
            }
        }
    }
}

fn default_record_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub n: usize,
    pub t_final: f64,
    pub dt: f64,
    /// Profile nodes (radial) or grid points per axis (disc).
    pub resolution: usize,
    #[serde(default)]
    pub geometry: Geometry,
    pub source: Source,
    pub boundary: Boundary,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Run even when the compatibility or monotonicity contract fails;
    /// the failures are logged in the state instead.
    #[serde(default)]
    pub control: bool,
}

impl FlowConfig {
    /// Radial run with `b(t) = f(boundary, 0) t` and `dt = 1e-3 T`.
    pub fn radial(n: usize, t_final: f64, resolution: usize, source: Source) -> Self {
        let rate = source.eval(n, 1.0, 0.0, 0.0);
        FlowConfig {
            n,
            t_final,
            dt: 1e-3 * t_final,
            resolution,
            geometry: Geometry::Radial,
            source,
            boundary: Boundary::Linear { rate },
            record_every: 1,
            control: false,
        }
    }

    pub fn steps(&self) -> usize {
        math::floor(self.t_final / self.dt + 0.5) as usize
    }

    /// Structural errors are returned as `Err`; contract failures as the list.
    pub fn contract_violations(&self) -> Result<Vec<String>> {
        if self.n == 0 || self.n > 2 {
            return Err(invalid!("complex dimension must be 1 or 2, got {}", self.n));
        }
        if !(self.t_final > 0.0 && self.dt > 0.0 && self.dt <= self.t_final) {
            return Err(invalid!("need 0 < dt <= T, got dt = {}, T = {}", self.dt, self.t_final));
        }
        if self.record_every == 0 {
            return Err(invalid!("record_every must be positive"));
        }
        match self.geometry {
            Geometry::Radial => {
                if !self.source.is_radial() {
                    return Err(invalid!("radial geometry needs a radial source"));
                }
                if self.resolution < 16 {
                    return Err(invalid!("radial resolution must be at least 16"));
                }
            }
            Geometry::Disc => {
                if self.n != 1 {
                    return Err(invalid!("disc geometry is only available for n = 1"));
                }
                if self.resolution < 16 {
                    return Err(invalid!("disc resolution must be at least 16"));
                }
            }
        }
        let mut out = Vec::new();
        if self.boundary.value(0.0) != 0.0 {
            out.push(format!("b(0) = {} is not zero", self.boundary.value(0.0)));
        }
        for i in 0..16 {
            let theta = 2.0 * math::PI * i as f64 / 16.0;
            let f0 = self.source.eval(self.n, 1.0, math::cos(theta), 0.0);
            let gap = self.boundary.slope(0.0) - f0;
            if gap.abs() > 1e-8 * f0.abs().max(1.0) {
                out.push(format!("compatibility b'(0) det(phi0) = f fails by {gap} on the sphere"));
                break;
            }
        }
        let steps = self.steps();
        let mut min_f = f64::INFINITY;
        let mut min_slope = f64::INFINITY;
        for k in 0..=steps {
            let t = k as f64 * self.dt;
            min_slope = min_slope.min(self.boundary.slope(t));
            for i in 0..=32 {
                let r = i as f64 / 32.0;
                min_f = min_f.min(self.source.eval(self.n, r * r, r, t)).min(self.source.eval(self.n, r * r, -r, t));
            }
        }
        if !(min_f > 0.0) {
            out.push(format!("source is not bounded away from zero (min {min_f})"));
        }
        if !(min_slope > 0.0) {
            out.push(format!("boundary schedule is not strictly increasing (min slope {min_slope})"));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub t: f64,
    pub b: f64,
    pub min_neg_ut: f64,
    pub max_neg_ut: f64,
    pub max_grad: f64,
    /// Largest second difference over `0.9 <= |z| < 1`.
    pub hessian_proxy: f64,
    pub energy: f64,
    pub rhs_energy: f64,
    /// Relative Newton residual of the step.
    pub residual: f64,
    /// `max |(-u_t) det - f| / f` over unknowns.
    pub equation_defect: f64,
    /// `min (u - lower barrier)`.
    pub lower_gap: f64,
    /// `max (u + b)`.
    pub upper_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub config: FlowConfig,
    /// Smallest `A` with `b'(t) A^n >= f` on the sampled space-time nodes.
    pub barrier_scale: f64,
    pub records: Vec<FlowRecord>,
    pub slice_times: Vec<f64>,
    /// Full node arrays: profile nodes (radial) or grid nodes (disc).
    pub slices: Vec<Vec<f64>>,
    pub violations: Vec<String>,
}

impl FlowState {
    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(1, self.config.resolution)
    }

    pub fn slice_profile(&self, k: usize) -> Result<RadialProfile> {
        if self.config.geometry != Geometry::Radial {
            return Err(invalid!("not a radial run"));
        }
        RadialProfile::new(self.slices[k].clone())
    }

    pub fn slice_grid(&self, k: usize) -> Result<GridField> {
        if self.config.geometry != Geometry::Disc {
            return Err(invalid!("not a disc run"));
        }
        GridField::from_values(self.grid_spec()?, self.slices[k].clone())
    }

    /// `(|z|^2, x1)` of each node of a stored slice.
    pub fn node_coords(&self) -> Result<Vec<(f64, f64)>> {
        match self.config.geometry {
            Geometry::Radial => {
                let count = self.config.resolution;
                Ok((0..count)
                    .map(|k| {
                        let r = k as f64 / (count - 1) as f64;
                        (r * r, r)
                    })
                    .collect())
            }
            Geometry::Disc => {
                let spec = self.grid_spec()?;
                Ok((0..spec.node_count())
                    .map(|k| {
                        let p = spec.point(&spec.unravel(k));
                        (p[0] * p[0] + p[1] * p[1], p[0])
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Nb {
    Node(usize),
    Wall,
}

#[derive(Clone, Copy, Debug)]
struct Arm {
    nb: Nb,
    dist: f64,
}

struct RadialMesh {
    n: usize,
    count: usize,
    dr: f64,
    /// `(rho_j / (2 dr))^n` at the face `rho_j = (j + 1/2) dr`.
    face: Vec<f64>,
    /// `rho_j^{2n} - rho_{j-1}^{2n}`.
    cell: Vec<f64>,
    weights: Vec<f64>,
}

struct DiscMesh {
    spec: GridSpec,
    quad: Arc<BallQuadrature>,
    /// Grid index of each unknown.
    nodes: Vec<usize>,
    coords: Vec<(f64, f64)>,
    arms: Vec<[[Arm; 2]; 2]>,
    band: usize,
}

enum Mesh {
    Radial(RadialMesh),
    Disc(DiscMesh),
}

const NEWTON_TOL: f64 = 1e-11;
const NEWTON_MAX_ITER: usize = 60;
const MAX_HALVINGS: usize = 20;

fn sgn_pow(d: f64, n: usize) -> f64 {
    if n == 1 {
        d
    } else {
        d * d.abs()
    }
}

fn second_diff(um: f64, u0: f64, up: f64, hl: f64, hr: f64) -> f64 {
    2.0 * ((up - u0) / hr - (u0 - um) / hl) / (hl + hr)
}

fn first_diff(um: f64, u0: f64, up: f64, hl: f64, hr: f64) -> f64 {
    (hl * hl * (up - u0) + hr * hr * (u0 - um)) / (hl * hr * (hl + hr))
}

impl RadialMesh {
    fn new(n: usize, count: usize) -> Self {
        let dr = 1.0 / (count - 1) as f64;
        let k = count - 1;
        let mut face = Vec::with_capacity(k);
        let mut cell = Vec::with_capacity(k);
        let mut prev = 0.0;
        for j in 0..k {
            let rho = (j as f64 + 0.5) * dr;
            face.push(math::powi(rho / (2.0 * dr), n as i32));
            let v = math::powi(rho, 2 * n as i32);
            cell.push(v - prev);
            prev = v;
        }
        RadialMesh { n, count, dr, face, cell, weights: radial_weights(n, count) }
    }

    fn unknowns(&self) -> usize {
        self.count - 1
    }

    fn flux(&self, u: &[f64], wall: f64) -> Vec<f64> {
        let k = self.unknowns();
        (0..k)
            .map(|j| {
                let next = if j + 1 < k { u[j + 1] } else { wall };
                self.face[j] * sgn_pow(next - u[j], self.n)
            })
            .collect()
    }

    fn det(&self, u: &[f64], wall: f64) -> Vec<f64> {
        let d = self.flux(u, wall);
        (0..d.len()).map(|j| (d[j] - if j > 0 { d[j - 1] } else { 0.0 }) / self.cell[j]).collect()
    }

    fn newton(&self, prev: &[f64], guess: Vec<f64>, fdt: &[f64], wall: f64) -> Result<(Vec<f64>, f64)> {
        let k = self.unknowns();
        let n = self.n;
        let mut u = guess;
        let residual = |u: &[f64]| -> (Vec<f64>, f64) {
            let d = self.flux(u, wall);
            let mut worst: f64 = 0.0;
            let r: Vec<f64> = (0..k)
                .map(|j| {
                    let src = self.cell[j] * fdt[j] / (prev[j] - u[j]);
                    let rj = d[j] - if j > 0 { d[j - 1] } else { 0.0 } - src;
                    worst = worst.max((rj / src).abs());
                    rj
                })
                .collect();
            (r, worst)
        };
        let (mut r, mut worst) = residual(&u);
        for _ in 0..NEWTON_MAX_ITER {
            if worst < NEWTON_TOL {
                return Ok((u, worst));
            }
            let mut lower = vec![0.0; k];
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for j in 0..k {
                let next = if j + 1 < k { u[j + 1] } else { wall };
                let dj = n as f64 * self.face[j] * math::powi((next - u[j]).abs(), n as i32 - 1);
                let gap = prev[j] - u[j];
                diag[j] -= dj + self.cell[j] * fdt[j] / (gap * gap);
                if j + 1 < k {
                    upper[j] = dj;
                }
                if j > 0 {
                    let prev_next = u[j];
                    let dm = n as f64 * self.face[j - 1] * math::powi((prev_next - u[j - 1]).abs(), n as i32 - 1);
                    lower[j] = dm;
                    diag[j] -= dm;
                }
            }
            let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
            solve_tridiagonal(&lower, &diag, &upper, &mut step)?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
                if trial.iter().zip(prev).all(|(a, p)| p - a > 0.0) {
                    let (rt, wt) = residual(&trial);
                    if wt.is_finite() && (wt < worst || lambda < 1e-3) {
                        u = trial;
                        r = rt;
                        worst = wt;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(Error::Convergence {
                    context: "step halving kept -u_t nonpositive after 20 halvings".into(),
                    residual: worst,
                });
            }
        }
        if worst < 1e-6 {
            return Ok((u, worst));
        }
        Err(Error::Convergence { context: "radial flow step".into(), residual: worst })
    }

    fn energy(&self, u: &[f64], wall: f64) -> f64 {
        let d = self.flux(u, wall);
        let mut acc = 0.0;
        for j in 0..d.len() {
            acc += -(u[j] - wall) * (d[j] - if j > 0 { d[j - 1] } else { 0.0 });
        }
        math::ball_volume(self.n) * acc
    }

    fn max_grad(&self, u: &[f64], wall: f64) -> f64 {
        let k = self.unknowns();
        (0..k)
            .map(|j| {
                let next = if j + 1 < k { u[j + 1] } else { wall };
                ((next - u[j]) / self.dr).abs()
            })
            .fold(0.0, f64::max)
    }

    fn hessian_proxy(&self, u: &[f64], wall: f64) -> f64 {
        let k = self.unknowns();
        let mut worst: f64 = 0.0;
        for j in 1..k {
            let r = j as f64 * self.dr;
            if r < 0.9 {
                continue;
            }
            let next = if j + 1 < k { u[j + 1] } else { wall };
            let d2 = (next - 2.0 * u[j] + u[j - 1]) / (self.dr * self.dr);
            let d1 = (next - u[j - 1]) / (2.0 * self.dr * r);
            worst = worst.max(d2.abs()).max(d1.abs());
        }
        worst
    }
}

impl DiscMesh {
    fn new(resolution: usize) -> Result<Self> {
        let spec = GridSpec::new(1, resolution)?;
        let quad = Arc::new(BallQuadrature::new(spec));
        let h = spec.spacing();
        let total = spec.node_count();
        let mut lookup = vec![usize::MAX; total];
        let mut nodes = Vec::new();
        let mut coords = Vec::new();
        for k in 0..total {
            let p = spec.point(&spec.unravel(k));
            if p[0] * p[0] + p[1] * p[1] < 1.0 {
                lookup[k] = nodes.len();
                nodes.push(k);
                coords.push((p[0], p[1]));
            }
        }
        let mut arms = Vec::with_capacity(nodes.len());
        let mut band = 0usize;
        for (j, &k) in nodes.iter().enumerate() {
            let idx = spec.unravel(k);
            let (x, y) = coords[j];
            let mut a = [[Arm { nb: Nb::Wall, dist: h }; 2]; 2];
            for axis in 0..2 {
                for side in 0..2 {
                    let mut nidx = idx;
                    nidx[axis] = if side == 0 { idx[axis] - 1 } else { idx[axis] + 1 };
                    let nk = spec.ravel(&nidx);
                    if lookup[nk] != usize::MAX {
                        band = band.max(lookup[nk].abs_diff(j));
                        a[axis][side] = Arm { nb: Nb::Node(lookup[nk]), dist: h };
                    } else {
                        // distance along the axis to the unit circle
                        let (along, across) = if axis == 0 { (x, y) } else { (y, x) };
                        let reach = math::sqrt((1.0 - across * across).max(0.0));
                        let d = if side == 0 { along + reach } else { reach - along };
                        a[axis][side] = Arm { nb: Nb::Wall, dist: d.clamp(1e-2 * h, h) };
                    }
                }
            }
            arms.push(a);
        }
        Ok(DiscMesh { spec, quad, nodes, coords, arms, band: band.max(1) })
    }

    fn value(u: &[f64], arm: &Arm, wall: f64) -> f64 {
        match arm.nb {
            Nb::Node(i) => u[i],
            Nb::Wall => wall,
        }
    }

    fn laplacian(&self, u: &[f64], wall: f64) -> Vec<f64> {
        (0..self.nodes.len())
            .map(|j| {
                let a = &self.arms[j];
                (0..2)
                    .map(|ax| {
                        let um = Self::value(u, &a[ax][0], wall);
                        let up = Self::value(u, &a[ax][1], wall);
                        second_diff(um, u[j], up, a[ax][0].dist, a[ax][1].dist)
                    })
                    .sum()
            })
            .collect()
    }

    fn det(&self, u: &[f64], wall: f64) -> Vec<f64> {
        self.laplacian(u, wall).iter().map(|l| 0.25 * l).collect()
    }

    fn newton(&self, prev: &[f64], guess: Vec<f64>, fdt: &[f64], wall: f64) -> Result<(Vec<f64>, f64)> {
        let m = self.nodes.len();
        let mut u = guess;
        let residual = |u: &[f64]| -> (Vec<f64>, f64) {
            let det = self.det(u, wall);
            let mut worst: f64 = 0.0;
            let r: Vec<f64> = (0..m)
                .map(|j| {
                    let rj = det[j] * (prev[j] - u[j]) - fdt[j];
                    worst = worst.max((rj / fdt[j]).abs());
                    rj
                })
                .collect();
            (r, worst)
        };
        let (mut r, mut worst) = residual(&u);
        for _ in 0..NEWTON_MAX_ITER {
            if worst < NEWTON_TOL {
                return Ok((u, worst));
            }
            let det = self.det(&u, wall);
            let mut jac = BandMatrix::zeros(m, self.band);
            for j in 0..m {
                let gap = prev[j] - u[j];
                jac.add(j, j, -det[j]);
                for ax in 0..2 {
                    let (hl, hr) = (self.arms[j][ax][0].dist, self.arms[j][ax][1].dist);
                    let cm = 2.0 / (hl * (hl + hr));
                    let cp = 2.0 / (hr * (hl + hr));
                    jac.add(j, j, -0.25 * gap * (cm + cp));
                    for (side, c) in [(0usize, cm), (1, cp)] {
                        if let Nb::Node(i) = self.arms[j][ax][side].nb {
                            jac.add(j, i, 0.25 * gap * c);
                        }
                    }
                }
            }
            let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
            jac.solve(&mut step)?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
                if trial.iter().zip(prev).all(|(a, p)| p - a > 0.0) {
                    let (rt, wt) = residual(&trial);
                    if wt.is_finite() && (wt < worst || lambda < 1e-3) {
                        u = trial;
                        r = rt;
                        worst = wt;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(Error::Convergence {
                    context: "step halving kept -u_t nonpositive after 20 halvings".into(),
                    residual: worst,
                });
            }
        }
        if worst < 1e-6 {
            return Ok((u, worst));
        }
        Err(Error::Convergence { context: "disc flow step".into(), residual: worst })
    }

    fn energy(&self, u: &[f64], wall: f64) -> f64 {
        let det = self.det(u, wall);
        (0..u.len()).map(|j| self.quad.weight(self.nodes[j]) * -(u[j] - wall) * det[j]).sum()
    }

    fn max_grad(&self, u: &[f64], wall: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..u.len() {
            let a = &self.arms[j];
            let mut g2 = 0.0;
            for ax in 0..2 {
                let um = Self::value(u, &a[ax][0], wall);
                let up = Self::value(u, &a[ax][1], wall);
                let g = first_diff(um, u[j], up, a[ax][0].dist, a[ax][1].dist);
                g2 += g * g;
            }
            worst = worst.max(math::sqrt(g2));
        }
        worst
    }

    fn hessian_proxy(&self, u: &[f64], wall: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..u.len() {
            let (x, y) = self.coords[j];
            if x * x + y * y < 0.81 {
                continue;
            }
            let a = &self.arms[j];
            for ax in 0..2 {
                let um = Self::value(u, &a[ax][0], wall);
                let up = Self::value(u, &a[ax][1], wall);
                worst = worst.max(second_diff(um, u[j], up, a[ax][0].dist, a[ax][1].dist).abs());
            }
        }
        worst
    }

    fn full(&self, u: &[f64], wall: f64) -> Vec<f64> {
        let mut out = vec![wall; self.spec.node_count()];
        for (j, &k) in self.nodes.iter().enumerate() {
            out[k] = u[j];
        }
        out
    }
}

impl Mesh {
    fn build(cfg: &FlowConfig) -> Result<Self> {
        Ok(match cfg.geometry {
            Geometry::Radial => Mesh::Radial(RadialMesh::new(cfg.n, cfg.resolution)),
            Geometry::Disc => Mesh::Disc(DiscMesh::new(cfg.resolution)?),
        })
    }

    /// `(|z|^2, x1)` of every unknown.
    fn coords(&self) -> Vec<(f64, f64)> {
        match self {
            Mesh::Radial(m) => (0..m.unknowns())
                .map(|j| {
                    let r = j as f64 * m.dr;
                    (r * r, r)
                })
                .collect(),
            Mesh::Disc(m) => m.coords.iter().map(|&(x, y)| (x * x + y * y, x)).collect(),
        }
    }

    fn det(&self, u: &[f64], wall: f64) -> Vec<f64> {
        match self {
            Mesh::Radial(m) => m.det(u, wall),
            Mesh::Disc(m) => m.det(u, wall),
        }
    }

    fn newton(&self, prev: &[f64], guess: Vec<f64>, fdt: &[f64], wall: f64) -> Result<(Vec<f64>, f64)> {
        match self {
            Mesh::Radial(m) => m.newton(prev, guess, fdt, wall),
            Mesh::Disc(m) => m.newton(prev, guess, fdt, wall),
        }
    }

    fn energy(&self, u: &[f64], wall: f64) -> f64 {
        match self {
            Mesh::Radial(m) => m.energy(u, wall),
            Mesh::Disc(m) => m.energy(u, wall),
        }
    }

    fn max_grad(&self, u: &[f64], wall: f64) -> f64 {
        match self {
            Mesh::Radial(m) => m.max_grad(u, wall),
            Mesh::Disc(m) => m.max_grad(u, wall),
        }
    }

    fn hessian_proxy(&self, u: &[f64], wall: f64) -> f64 {
        match self {
            Mesh::Radial(m) => m.hessian_proxy(u, wall),
            Mesh::Disc(m) => m.hessian_proxy(u, wall),
        }
    }

    fn full(&self, u: &[f64], wall: f64) -> Vec<f64> {
        match self {
            Mesh::Radial(_) => {
                let mut out = u.to_vec();
                out.push(wall);
                out
            }
            Mesh::Disc(m) => m.full(u, wall),
        }
    }

    /// Quadrature weights and `(|z|^2, x1)` over all nodes of a full slice.
    fn full_weights(&self) -> Vec<(f64, f64, f64)> {
        match self {
            Mesh::Radial(m) => (0..m.count)
                .map(|k| {
                    let r = k as f64 * m.dr;
                    (m.weights[k], r * r, r)
                })
                .collect(),
            Mesh::Disc(m) => (0..m.spec.node_count())
                .map(|k| {
                    let p = m.spec.point(&m.spec.unravel(k));
                    (m.quad.weight(k), p[0] * p[0] + p[1] * p[1], p[0])
                })
                .collect(),
        }
    }
}

fn integrate_source(cfg: &FlowConfig, weights: &[(f64, f64, f64)], t: f64) -> f64 {
    weights.iter().filter(|w| w.0 > 0.0).map(|&(w, r2, x1)| w * cfg.source.eval(cfg.n, r2, x1, t)).sum()
}

/// Smallest `A` with `b'(t) A^n >= f(z, t)` over the given nodes and step times;
/// infinite when the schedule stalls.
fn barrier_scale(cfg: &FlowConfig, coords: &[(f64, f64)]) -> f64 {
    let mut a: f64 = 0.0;
    for k in 0..=cfg.steps() {
        let t = k as f64 * cfg.dt;
        let slope = cfg.boundary.slope(t);
        for &(r2, x1) in coords.iter().chain([(1.0, 1.0), (1.0, -1.0)].iter()) {
            let f = cfg.source.eval(cfg.n, r2, x1, t);
            a = a.max(if slope > 0.0 { math::root(f / slope, cfg.n) } else { f64::INFINITY });
        }
    }
    a
}

struct Recorder<'a> {
    cfg: &'a FlowConfig,
    mesh: &'a Mesh,
    coords: Vec<(f64, f64)>,
    barrier: f64,
}

impl Recorder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn record(&self, t: f64, prev: &[f64], u: &[f64], dt: f64, residual: f64, rhs_energy: f64) -> FlowRecord {
        let wall = -self.cfg.boundary.value(t);
        let det = self.mesh.det(u, wall);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut eq: f64 = 0.0;
        let mut lower_gap = f64::INFINITY;
        let mut upper_gap = f64::NEG_INFINITY;
        for j in 0..u.len() {
            let (r2, x1) = self.coords[j];
            let speed = if dt > 0.0 { (prev[j] - u[j]) / dt } else { prev[j] };
            lo = lo.min(speed);
            hi = hi.max(speed);
            let f = self.cfg.source.eval(self.cfg.n, r2, x1, t);
            eq = eq.max((speed * det[j] - f).abs() / f);
            let barrier = wall + self.barrier * (r2 - 1.0);
            lower_gap = lower_gap.min(u[j] - barrier);
            upper_gap = upper_gap.max(u[j] - wall);
        }
        FlowRecord {
            t,
            b: -wall,
            min_neg_ut: lo,
            max_neg_ut: hi,
            max_grad: self.mesh.max_grad(u, wall),
            hessian_proxy: self.mesh.hessian_proxy(u, wall),
            energy: self.mesh.energy(u, wall),
            rhs_energy,
            residual,
            equation_defect: eq,
            lower_gap,
            upper_gap,
        }
    }
}

fn run(cfg: &FlowConfig, frozen: bool) -> Result<FlowState> {
    let violations = cfg.contract_violations()?;
    if !violations.is_empty() && !cfg.control {
        return Err(Error::Rejected(violations.join("; ")));
    }
    let mesh = Mesh::build(cfg)?;
    let coords = mesh.coords();
    let weights = mesh.full_weights();
    let rec = Recorder { cfg, mesh: &mesh, coords: coords.clone(), barrier: barrier_scale(cfg, &coords) };
    let n = cfg.n;
    let mut u: Vec<f64> = coords.iter().map(|&(r2, _)| r2 - 1.0).collect();
    let det0 = mesh.det(&u, 0.0);
    let mut speed: Vec<f64> =
        coords.iter().zip(&det0).map(|(&(r2, x1), d)| cfg.source.eval(n, r2, x1, 0.0) / d).collect();
    let e0 = mesh.energy(&u, 0.0);
    let mut rhs = e0;
    let mut f_prev = integrate_source(cfg, &weights, 0.0);
    let mut records = vec![rec.record(0.0, &speed, &u, 0.0, 0.0, rhs)];
    let mut slice_times = vec![0.0];
    let mut slices = vec![mesh.full(&u, 0.0)];
    let steps = cfg.steps();
    for k in 0..steps {
        let t = (k + 1) as f64 * cfg.dt;
        let wall = -cfg.boundary.value(t);
        let (next, residual) = if frozen {
            (coords.iter().map(|&(r2, _)| wall + r2 - 1.0).collect(), 0.0)
        } else {
            let fdt: Vec<f64> = coords.iter().map(|&(r2, x1)| cfg.source.eval(n, r2, x1, t) * cfg.dt).collect();
            let guess: Vec<f64> = u.iter().zip(&speed).map(|(a, v)| a - cfg.dt * v.max(1e-12)).collect();
            mesh.newton(&u, guess, &fdt, wall)?
        };
        let f_now = integrate_source(cfg, &weights, t);
        rhs += (n + 1) as f64 * 0.5 * cfg.dt * (f_prev + f_now);
        f_prev = f_now;
        records.push(rec.record(t, &u, &next, cfg.dt, residual, rhs));
        speed = u.iter().zip(&next).map(|(a, b)| (a - b) / cfg.dt).collect();
        u = next;
        if (k + 1) % cfg.record_every == 0 || k + 1 == steps {
            slice_times.push(t);
            slices.push(mesh.full(&u, wall));
        }
    }
    Ok(FlowState { config: cfg.clone(), barrier_scale: rec.barrier, records, slice_times, slices, violations })
}

/// Implicit Euler solve of the flow.
pub fn flow_solve(cfg: &FlowConfig) -> Result<FlowState> {
    run(cfg, false)
}

/// Traces of the frozen shape `-b(t) + |z|^2 - 1`, which is not a solution
/// unless `f = b'`; used as a falsification control for the monitors.
pub fn frozen_state(cfg: &FlowConfig) -> Result<FlowState> {
    let mut c = cfg.clone();
    c.control = true;
    run(&c, true)
}

/// Closed-form flow when the configuration admits one.
pub fn exact_flow(cfg: &FlowConfig, r2: f64, t: f64) -> Option<f64> {
    match (cfg.source, cfg.boundary) {
        (Source::Constant { value }, Boundary::Linear { rate }) if value == rate => Some(r2 - 1.0 - rate * t),
        (Source::Manufactured { rate, accel, kappa }, Boundary::Quadratic { rate: br, accel: ba })
            if rate == br && accel == ba =>
        {
            Some((1.0 + kappa * t) * (r2 - 1.0) - (rate * t + accel * t * t))
        }
        _ => None,
    }
}

/// Largest nodewise deviation of the stored slices from the closed form.
pub fn oracle_error(state: &FlowState) -> Result<f64> {
    let coords = state.node_coords()?;
    let mut worst: f64 = 0.0;
    for (t, slice) in state.slice_times.iter().zip(&state.slices) {
        for (&(r2, _), v) in coords.iter().zip(slice) {
            if r2 > 1.0 {
                continue;
            }
            let exact = exact_flow(&state.config, r2, *t).ok_or_else(|| invalid!("configuration has no closed form"))?;
            worst = worst.max((v - exact).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub barrier_scale: f64,
    /// `sup |d/dt log f|` used in the speed band.
    pub log_source_rate: f64,
    pub sandwich_worst: f64,
    /// Smallest relative margin of `-u_t` inside its band.
    pub speed_worst: f64,
    pub speed_band_lower: Vec<f64>,
    pub speed_band_upper: Vec<f64>,
    pub equation_worst: f64,
    pub gradient_bound: f64,
    pub gradient_max: f64,
    pub hessian_proxy_max: f64,
    pub flags: Vec<String>,
}

impl MonitorReport {
    pub fn passes(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Tolerances for the monitors; discretization budgets scale with `dt` and `h^2`.
fn monitor_tolerance(cfg: &FlowConfig) -> f64 {
    let h = match cfg.geometry {
        Geometry::Radial => 1.0 / (cfg.resolution - 1) as f64,
        Geometry::Disc => 2.0 / (cfg.resolution as f64 - 8.0),
    };
    1e-9 + 2.0 * cfg.dt + 10.0 * h * h
}

/// Checks the sandwich `lower <= u <= -b`, the speed band `M^{-1} <= -u_t <= M`
/// with `M` from the `(log f)_t` barrier, the flow equation itself and the
/// gradient bound `|grad u| <= max(2A, 2)`.
pub fn monitor_bounds(state: &FlowState) -> Result<MonitorReport> {
    let cfg = &state.config;
    let coords = state.node_coords()?;
    let inside: Vec<(f64, f64)> = coords.iter().copied().filter(|c| c.0 <= 1.0).collect();
    let tol = monitor_tolerance(cfg);
    let mut flags: Vec<String> = state.violations.clone();

    let steps = cfg.steps();
    let mut rate: f64 = 0.0;
    let mut f0_lo = f64::INFINITY;
    let mut f0_hi: f64 = 0.0;
    for &(r2, x1) in &inside {
        let f0 = cfg.source.eval(cfg.n, r2, x1, 0.0);
        f0_lo = f0_lo.min(f0);
        f0_hi = f0_hi.max(f0);
        for k in 0..steps {
            let (t0, t1) = (k as f64 * cfg.dt, (k + 1) as f64 * cfg.dt);
            let a = cfg.source.eval(cfg.n, r2, x1, t0);
            let b = cfg.source.eval(cfg.n, r2, x1, t1);
            if a > 0.0 && b > 0.0 {
                rate = rate.max((math::log(b) - math::log(a)).abs() / cfg.dt);
            }
        }
    }

    let mut lower = Vec::with_capacity(state.records.len());
    let mut upper = Vec::with_capacity(state.records.len());
    let (mut slope_lo, mut slope_hi) = (f64::INFINITY, 0.0f64);
    let mut speed_worst = f64::INFINITY;
    let mut sandwich_worst = f64::INFINITY;
    let mut equation_worst: f64 = 0.0;
    let mut grad_max: f64 = 0.0;
    let mut hess_max: f64 = 0.0;
    for (i, r) in state.records.iter().enumerate() {
        let s = cfg.boundary.slope(r.t);
        slope_lo = slope_lo.min(s * math::exp(rate * r.t));
        slope_hi = slope_hi.max(s * math::exp(-rate * r.t));
        let lo = f0_lo.min(slope_lo) * math::exp(-rate * r.t);
        let hi = f0_hi.max(slope_hi) * math::exp(rate * r.t);
        lower.push(lo);
        upper.push(hi);
        if i > 0 {
            let m = ((r.min_neg_ut - lo) / lo).min((hi - r.max_neg_ut) / hi);
            speed_worst = speed_worst.min(m);
            equation_worst = equation_worst.max(r.equation_defect);
        }
        let scale = 1.0 + r.b.abs();
        sandwich_worst = sandwich_worst.min(r.lower_gap / scale).min(-r.upper_gap / scale);
        grad_max = grad_max.max(r.max_grad);
        hess_max = hess_max.max(r.hessian_proxy);
    }
    if lower.iter().any(|&v| !(v > 0.0)) {
        flags.push("speed band lower bound is not positive".into());
    }
    if !(speed_worst >= -tol) {
        flags.push(format!("-u_t leaves its band (relative margin {speed_worst})"));
    }
    if !(equation_worst <= 1e-6) {
        flags.push(format!("flow equation residual {equation_worst} exceeds 1e-6"));
    }
    if !state.barrier_scale.is_finite() {
        flags.push("lower barrier undefined: b' vanishes".into());
    } else if !(sandwich_worst >= -tol) {
        flags.push(format!("sandwich lower <= u <= -b violated by {}", -sandwich_worst));
    }
    let gradient_bound = (2.0 * state.barrier_scale).max(2.0) * (1.0 + tol);
    if !(grad_max <= gradient_bound) {
        flags.push(format!("gradient {grad_max} exceeds bound {gradient_bound}"));
    }
    Ok(MonitorReport {
        barrier_scale: state.barrier_scale,
        log_source_rate: rate,
        sandwich_worst,
        speed_worst,
        speed_band_lower: lower,
        speed_band_upper: upper,
        equation_worst,
        gradient_bound,
        gradient_max: grad_max,
        hessian_proxy_max: hess_max,
        flags,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub rhs: Vec<f64>,
    pub min_slack: f64,
    pub scale: f64,
    pub tolerance: f64,
}

impl EnergyReport {
    pub fn passes(&self) -> bool {
        self.min_slack >= -self.tolerance
    }
}

/// `E(u(t) + b(t)) <= E(phi0) + (n + 1) int_0^t int f` at every step.
pub fn energy_monotonicity_check(state: &FlowState) -> EnergyReport {
    let times: Vec<f64> = state.records.iter().map(|r| r.t).collect();
    let energy: Vec<f64> = state.records.iter().map(|r| r.energy).collect();
    let rhs: Vec<f64> = state.records.iter().map(|r| r.rhs_energy).collect();
    let min_slack = energy.iter().zip(&rhs).map(|(e, r)| r - e).fold(f64::INFINITY, f64::min);
    let scale = rhs.iter().chain(&energy).map(|v| v.abs()).fold(1.0, f64::max);
    EnergyReport { times, energy, rhs, min_slack, scale, tolerance: 1e-3 * scale }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub alpha: f64,
    pub times: Vec<f64>,
    /// `int e^{-alpha u(t)} dV / e^{alpha b(t)}` per stored slice.
    pub ratios: Vec<f64>,
    pub max: f64,
    pub min: f64,
}

impl AlphaReport {
    pub fn spread(&self) -> f64 {
        self.max / self.min
    }
}

/// Exponential integrability along the flow, evaluated in log space.
pub fn parabolic_alpha_check(state: &FlowState, alpha: f64) -> Result<AlphaReport> {
    if !(alpha >= 0.0) {
        return Err(invalid!("alpha must be nonnegative"));
    }
    let mesh = Mesh::build(&state.config)?;
    let weights = mesh.full_weights();
    let mut ratios = Vec::with_capacity(state.slices.len());
    for (t, slice) in state.slice_times.iter().zip(&state.slices) {
        let b = state.config.boundary.value(*t);
        let mut acc = f64::NEG_INFINITY;
        for (&(w, _, _), v) in weights.iter().zip(slice) {
            if w > 0.0 {
                acc = math::log_add_exp(acc, math::log(w) - alpha * (v + b));
            }
        }
        ratios.push(math::exp(acc));
    }
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AlphaReport { alpha, times: state.slice_times.clone(), ratios, max, min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI;

    fn oracle(n: usize, k: usize, t: f64, dt: f64) -> FlowConfig {
        FlowConfig { dt, ..FlowConfig::radial(n, t, k, Source::Constant { value: 1.0 }) }
    }

    #[test]
    fn separable_oracle_radial() {
        for n in [1usize, 2] {
            let cfg = FlowConfig { record_every: 100, ..oracle(n, 512, 1.0, 1e-3) };
            let s = flow_solve(&cfg).unwrap();
            assert!(oracle_error(&s).unwrap() < 1e-4);
            let m = monitor_bounds(&s).unwrap();
            assert!(m.passes(), "{:?}", m.flags);
            assert!((m.barrier_scale - 1.0).abs() < 1e-12);
            // time-independent source: constant band
            assert!(m.speed_band_lower.iter().all(|&v| v == m.speed_band_lower[0]));
            let e = energy_monotonicity_check(&s);
            assert!(e.passes());
            assert!((e.energy[0] - math::ball_volume(n) / (n + 1) as f64).abs() < 1e-4);
            assert_eq!(e.energy[0], e.rhs[0]);
        }
    }

    #[test]
    fn energy_rhs_slope_and_linearity() {
        let s = flow_solve(&oracle(1, 256, 0.5, 5e-3)).unwrap();
        let e = energy_monotonicity_check(&s);
        let slope = (e.rhs[e.rhs.len() - 1] - e.rhs[0]) / 0.5;
        assert!((slope - 2.0 * PI).abs() < 1e-9);
        let c2 = FlowConfig { source: Source::Constant { value: 2.0 }, boundary: Boundary::Linear { rate: 2.0 }, ..s.config.clone() };
        let e2 = energy_monotonicity_check(&flow_solve(&c2).unwrap());
        let slope2 = (e2.rhs[e2.rhs.len() - 1] - e2.rhs[0]) / 0.5;
        assert!((slope2 - 2.0 * slope).abs() < 1e-9);
    }

    #[test]
    fn manufactured_first_order_in_time() {
        let src = Source::Manufactured { rate: 1.0, accel: 0.5, kappa: 0.5 };
        let mut errs = Vec::new();
        for dt in [0.02, 0.01, 0.005] {
            let cfg = FlowConfig {
                n: 2,
                t_final: 0.4,
                dt,
                resolution: 257,
                geometry: Geometry::Radial,
                source: src,
                boundary: Boundary::Quadratic { rate: 1.0, accel: 0.5 },
                record_every: 1000,
                control: false,
            };
            let s = flow_solve(&cfg).unwrap();
            assert!(monitor_bounds(&s).unwrap().passes());
            assert!(energy_monotonicity_check(&s).passes());
            errs.push(oracle_error(&s).unwrap());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 1.7 && ratio < 2.3, "{errs:?}");
        }
    }

    #[test]
    fn spatial_self_convergence() {
        let src = Source::Bump { value: 1.0, amplitude: 1.0 };
        let run = |k: usize| {
            let cfg = FlowConfig { dt: 0.01, record_every: 1000, ..FlowConfig::radial(2, 0.2, k, src) };
            flow_solve(&cfg).unwrap().slices.pop().unwrap()
        };
        let (a, b, c) = (run(65), run(129), run(257));
        let d1 = (0..65).map(|i| (a[i] - b[2 * i]).abs()).fold(0.0, f64::max);
        let d2 = (0..129).map(|i| (b[i] - c[2 * i]).abs()).fold(0.0, f64::max);
        assert!(d1 / d2 >= 2.5, "{d1} {d2}");
    }

    #[test]
    fn disc_matches_oracle_and_radial() {
        let cfg = FlowConfig {
            n: 1,
            t_final: 0.2,
            dt: 0.02,
            resolution: 48,
            geometry: Geometry::Disc,
            source: Source::Constant { value: 1.0 },
            boundary: Boundary::Linear { rate: 1.0 },
            record_every: 5,
            control: false,
        };
        let s = flow_solve(&cfg).unwrap();
        assert!(oracle_error(&s).unwrap() < 1e-9);
        assert!(monitor_bounds(&s).unwrap().passes());
        assert!(energy_monotonicity_check(&s).passes());
        let bump = FlowConfig { source: Source::Bump { value: 1.0, amplitude: 1.0 }, ..cfg.clone() };
        let disc = flow_solve(&bump).unwrap();
        let rad = flow_solve(&FlowConfig { geometry: Geometry::Radial, resolution: 513, ..bump }).unwrap();
        let g = disc.slice_grid(disc.slices.len() - 1).unwrap();
        let p = rad.slice_profile(rad.slices.len() - 1).unwrap();
        let spec = *g.spec();
        let mut worst: f64 = 0.0;
        for k in 0..spec.node_count() {
            let r = spec.radius(&spec.unravel(k));
            if r < 1.0 {
                worst = worst.max((g.values()[k] - p.value_at(r)).abs());
            }
        }
        assert!(worst < 5e-3, "{worst}");
        let tilted = FlowConfig { source: Source::Tilted { value: 1.0, amplitude: 0.5 }, ..cfg };
        let st = flow_solve(&tilted).unwrap();
        assert!(monitor_bounds(&st).unwrap().passes());
    }

    #[test]
    fn stalled_schedule_is_flagged() {
        let cfg = FlowConfig {
            boundary: Boundary::Stalled { rate: 1.0, stop: 0.1 },
            control: true,
            dt: 0.005,
            ..FlowConfig::radial(1, 0.3, 129, Source::Constant { value: 1.0 })
        };
        assert!(matches!(flow_solve(&FlowConfig { control: false, ..cfg.clone() }), Err(Error::Rejected(_))));
        let s = flow_solve(&cfg).unwrap();
        let m = monitor_bounds(&s).unwrap();
        assert!(!m.passes());
        assert!(m.flags.iter().any(|f| f.contains("lower bound")));
    }

    #[test]
    fn frozen_shape_is_flagged() {
        let cfg = FlowConfig {
            boundary: Boundary::Linear { rate: 1.0 },
            ..FlowConfig::radial(1, 0.2, 129, Source::Constant { value: 2.0 })
        };
        let s = frozen_state(&cfg).unwrap();
        let m = monitor_bounds(&s).unwrap();
        assert!(m.flags.iter().any(|f| f.contains("flow equation")), "{:?}", m.flags);
        let a = parabolic_alpha_check(&s, 1.5).unwrap();
        assert!(a.spread() - 1.0 < 1e-12);
    }

    #[test]
    fn alpha_ratio_on_oracle() {
        let s = flow_solve(&FlowConfig { record_every: 50, ..oracle(2, 257, 1.0, 1e-2) }).unwrap();
        let zero = parabolic_alpha_check(&s, 0.0).unwrap();
        for r in &zero.ratios {
            assert!((r - math::ball_volume(2)).abs() < 1e-12);
        }
        let a = parabolic_alpha_check(&s, 1.0).unwrap();
        assert!(a.spread() <= 3.0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]
        #[test]
        fn comparison_principle(a1 in 0.0f64..2.0, da in 0.0f64..2.0, n in 1usize..=2) {
            let base = |amp: f64| FlowConfig {
                dt: 0.01,
                record_every: 5,
                ..FlowConfig::radial(n, 0.2, 65, Source::Bump { value: 1.0, amplitude: amp })
            };
            let s1 = flow_solve(&base(a1)).unwrap();
            let s2 = flow_solve(&base(a1 + da)).unwrap();
            for (x, y) in s1.slices.iter().zip(&s2.slices) {
                for (u1, u2) in x.iter().zip(y) {
                    proptest::prop_assert!(u1 >= &(u2 - 1e-10));
                }
            }
        }
    }
}
