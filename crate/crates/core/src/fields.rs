//! Functions on the unit ball of C^n: Cartesian grid samples, closure-backed
//! samplers and radial profiles, with their complex and real Hessians.
//!
//! Coordinates are ordered `(x1, y1, x2, y2)` with `z_k = x_k + i y_k`.
//! Volumes are Lebesgue measure on R^{2n}.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{HermitianMatrix, SymMatrix, MAX_REAL_DIM};
use crate::math;

pub type MultiIndex = [usize; 4];
pub type Point = [f64; 4];

/// Role of a grid node relative to the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    /// `|z| < 1 - h`: full stencils available.
    Inside,
    /// `1 - h <= |z| <= 1`: boundary values are read here.
    Band,
    Outside,
}

/// Uniform cell-centred grid on the box `[-w, w]^{2n}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    resolution: usize,
    half_width: f64,
}

impl GridSpec {
    /// Grid whose half-width is `1 + 4h`.
    pub fn new(n: usize, resolution: usize) -> Result<Self> {
        if resolution <= 8 {
            return Err(invalid!("resolution must be at least 16, got {resolution}"));
        }
        let h = 2.0 / (resolution as f64 - 8.0);
        Self::with_half_width(n, resolution, 1.0 + 4.0 * h)
    }

    pub fn with_half_width(n: usize, resolution: usize, half_width: f64) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(invalid!("complex dimension must be 1 or 2, got {n}"));
        }
        if resolution < 16 {
            return Err(invalid!("resolution must be at least 16, got {resolution}"));
        }
        if !half_width.is_finite() {
            return Err(Error::NonFinite("half-width".into()));
        }
        let h = 2.0 * half_width / resolution as f64;
        if half_width < 1.0 + 2.0 * h - 1e-12 {
            return Err(invalid!(
                "half-width {half_width} leaves no stencil margin around the unit ball (need >= 1 + 2h = {})",
                1.0 + 2.0 * h
            ));
        }
        Ok(Self { n, resolution, half_width })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn real_dim(&self) -> usize {
        2 * self.n
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.resolution as f64
    }

    pub fn cell_volume(&self) -> f64 {
        math::powi(self.spacing(), self.real_dim() as i32)
    }

    pub fn node_count(&self) -> usize {
        self.resolution.pow(self.real_dim() as u32)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    pub fn point(&self, idx: &MultiIndex) -> Point {
        let mut p = [0.0; 4];
        for a in 0..self.real_dim() {
            p[a] = self.axis_coord(idx[a]);
        }
        p
    }

    pub fn radius(&self, idx: &MultiIndex) -> f64 {
        let p = self.point(idx);
        math::sqrt(p.iter().map(|x| x * x).sum())
    }

    pub fn ravel(&self, idx: &MultiIndex) -> usize {
        let mut k = 0;
        for a in 0..self.real_dim() {
            k = k * self.resolution + idx[a];
        }
        k
    }

    pub fn unravel(&self, mut k: usize) -> MultiIndex {
        let mut idx = [0; 4];
        for a in (0..self.real_dim()).rev() {
            idx[a] = k % self.resolution;
            k /= self.resolution;
        }
        idx
    }

    pub fn class(&self, idx: &MultiIndex) -> NodeClass {
        classify(self.radius(idx), self.spacing())
    }

    /// Multi-indices of every node, in storage order.
    pub fn indices(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.node_count()).map(move |k| self.unravel(k))
    }

    fn offset(&self, idx: &MultiIndex, axis: usize, step: isize) -> MultiIndex {
        let mut out = *idx;
        out[axis] = (idx[axis] as isize + step) as usize;
        out
    }
}

fn classify(r: f64, h: f64) -> NodeClass {
    if r < 1.0 - h {
        NodeClass::Inside
    } else if r <= 1.0 {
        NodeClass::Band
    } else {
        NodeClass::Outside
    }
}

/// Anything that can be sampled at grid nodes.
pub trait GridSampler {
    fn spec(&self) -> &GridSpec;
    fn sample(&self, idx: &MultiIndex) -> f64;
}

/// Overlap fractions of boundary cells with the unit ball.
#[derive(Clone, Debug)]
pub struct BallQuadrature {
    spec: GridSpec,
    partial: Vec<(usize, f64)>,
}

impl BallQuadrature {
    /// Cells straddling the sphere are subsampled at 4 points per axis.
    pub fn new(spec: GridSpec) -> Self {
        let d = spec.real_dim();
        let h = spec.spacing();
        let sub = 4usize;
        let total = sub.pow(d as u32);
        let offsets: Vec<f64> = (0..sub).map(|k| ((k as f64 + 0.5) / sub as f64 - 0.5) * h).collect();
        let mut partial = Vec::new();
        for k in 0..spec.node_count() {
            let idx = spec.unravel(k);
            let p = spec.point(&idx);
            let (near, far) = cell_extent(&p[..d], h);
            if far <= 1.0 || near >= 1.0 {
                continue;
            }
            let mut inside = 0usize;
            for s in 0..total {
                let mut rem = s;
                let mut r2 = 0.0;
                for a in 0..d {
                    let x = p[a] + offsets[rem % sub];
                    rem /= sub;
                    r2 += x * x;
                }
                if r2 <= 1.0 {
                    inside += 1;
                }
            }
            if inside > 0 {
                partial.push((k, inside as f64 / total as f64));
            }
        }
        Self { spec, partial }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Fraction of the cell around node `k` lying in the closed unit ball.
    pub fn fraction(&self, k: usize) -> f64 {
        let d = self.spec.real_dim();
        let p = self.spec.point(&self.spec.unravel(k));
        let (near, far) = cell_extent(&p[..d], self.spec.spacing());
        if far <= 1.0 {
            1.0
        } else if near >= 1.0 {
            0.0
        } else {
            match self.partial.binary_search_by(|(j, _)| j.cmp(&k)) {
                Ok(pos) => self.partial[pos].1,
                Err(_) => 0.0,
            }
        }
    }

    /// Quadrature weight (fraction times cell volume) of node `k`.
    pub fn weight(&self, k: usize) -> f64 {
        self.fraction(k) * self.spec.cell_volume()
    }

    /// `sum_k w_k g(k)`; `g` is only called where the weight is positive.
    pub fn integrate<G: FnMut(usize) -> f64>(&self, mut g: G) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.spec.node_count() {
            let w = self.fraction(k);
            if w > 0.0 {
                acc += w * g(k);
            }
        }
        acc * self.spec.cell_volume()
    }
}

/// Nearest and farthest distance from the origin over the cell centred at `p`.
fn cell_extent(p: &[f64], h: f64) -> (f64, f64) {
    let mut near = 0.0;
    let mut far = 0.0;
    for &x in p {
        let lo = x - 0.5 * h;
        let hi = x + 0.5 * h;
        let n = if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            -hi
        } else {
            0.0
        };
        let f = lo.abs().max(hi.abs());
        near += n * n;
        far += f * f;
    }
    (math::sqrt(near), math::sqrt(far))
}

/// Node values of a real function on a [`GridSpec`].
#[derive(Clone, Debug)]
pub struct GridField {
    spec: GridSpec,
    values: Vec<f64>,
    quadrature: Arc<BallQuadrature>,
}

impl GridField {
    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        Self::with_quadrature(Arc::new(BallQuadrature::new(spec)), values)
    }

    /// Shares a precomputed quadrature between fields on the same grid.
    pub fn with_quadrature(quadrature: Arc<BallQuadrature>, values: Vec<f64>) -> Result<Self> {
        let spec = quadrature.spec;
        if values.len() != spec.node_count() {
            return Err(invalid!("expected {} node values, got {}", spec.node_count(), values.len()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("grid value at node {k}")));
        }
        Ok(Self { spec, values, quadrature })
    }

    /// Samples `f` at every node; `f` receives the `2n` real coordinates.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(spec: GridSpec, f: F) -> Result<Self> {
        Self::from_fn_with(Arc::new(BallQuadrature::new(spec)), f)
    }

    pub fn from_fn_with<F: Fn(&[f64]) -> f64>(quadrature: Arc<BallQuadrature>, f: F) -> Result<Self> {
        let spec = quadrature.spec;
        let d = spec.real_dim();
        let values = (0..spec.node_count()).map(|k| f(&spec.point(&spec.unravel(k))[..d])).collect();
        Self::with_quadrature(quadrature, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn quadrature(&self) -> &Arc<BallQuadrature> {
        &self.quadrature
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, idx: &MultiIndex) -> f64 {
        self.values[self.spec.ravel(idx)]
    }

    pub fn inside_mask(&self) -> Vec<bool> {
        self.spec.indices().map(|i| self.spec.class(&i) == NodeClass::Inside).collect()
    }

    pub fn band_mask(&self) -> Vec<bool> {
        self.spec.indices().map(|i| self.spec.class(&i) == NodeClass::Band).collect()
    }

    pub fn complex_hessian(&self, idx: &MultiIndex) -> Result<HermitianMatrix> {
        complex_hessian(self, idx)
    }

    pub fn real_hessian(&self, idx: &MultiIndex) -> Result<SymMatrix> {
        real_hessian(self, idx)
    }

    /// Pointwise map keeping the grid and quadrature.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::with_quadrature(self.quadrature.clone(), self.values.iter().map(|&v| f(v)).collect())
    }
}

impl GridSampler for GridField {
    fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn sample(&self, idx: &MultiIndex) -> f64 {
        self.values[self.spec.ravel(idx)]
    }
}

/// A function evaluated on demand at grid nodes, for grids too large to store.
pub struct AnalyticField<F> {
    spec: GridSpec,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> AnalyticField<F> {
    pub fn new(spec: GridSpec, f: F) -> Self {
        Self { spec, f }
    }
}

impl<F: Fn(&[f64]) -> f64> GridSampler for AnalyticField<F> {
    fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn sample(&self, idx: &MultiIndex) -> f64 {
        let p = self.spec.point(idx);
        (self.f)(&p[..self.spec.real_dim()])
    }
}

/// Central second differences `D[a][b]`, each unordered pair computed once
/// so the result is exactly symmetric.
fn second_differences<S: GridSampler + ?Sized>(u: &S, idx: &MultiIndex) -> Result<[[f64; 4]; 4]> {
    let spec = *u.spec();
    if spec.class(idx) != NodeClass::Inside {
        return Err(Error::Domain(alloc::format!("node {:?} is not in the interior mask", &idx[..spec.real_dim()])));
    }
    let d = spec.real_dim();
    let h = spec.spacing();
    let h2 = h * h;
    let c = u.sample(idx);
    let mut out = [[0.0; 4]; 4];
    for a in 0..d {
        let plus = u.sample(&spec.offset(idx, a, 1));
        let minus = u.sample(&spec.offset(idx, a, -1));
        out[a][a] = (plus - 2.0 * c + minus) / h2;
        for b in a + 1..d {
            let pp = u.sample(&spec.offset(&spec.offset(idx, a, 1), b, 1));
            let pm = u.sample(&spec.offset(&spec.offset(idx, a, 1), b, -1));
            let mp = u.sample(&spec.offset(&spec.offset(idx, a, -1), b, 1));
            let mm = u.sample(&spec.offset(&spec.offset(idx, a, -1), b, -1));
            let v = (pp - pm - mp + mm) / (4.0 * h2);
            out[a][b] = v;
            out[b][a] = v;
        }
    }
    Ok(out)
}

/// Assembles `u_{z_i zbar_j}` from real second derivatives.
pub fn complex_from_real(n: usize, d: &[[f64; 4]; 4]) -> HermitianMatrix {
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..n {
        for j in i..n {
            let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            let re = 0.25 * (d[xi][xj] + d[yi][yj]);
            let im = 0.25 * (d[xi][yj] - d[yi][xj]);
            m[i][j] = Complex64::new(re, im);
        }
    }
    HermitianMatrix::from_upper(n, m)
}

/// Complex Hessian at an interior node by second-order central differences.
pub fn complex_hessian<S: GridSampler + ?Sized>(u: &S, idx: &MultiIndex) -> Result<HermitianMatrix> {
    let d = second_differences(u, idx)?;
    Ok(complex_from_real(u.spec().dim(), &d))
}

/// Real Hessian over the `2n` real coordinates at an interior node.
pub fn real_hessian<S: GridSampler + ?Sized>(u: &S, idx: &MultiIndex) -> Result<SymMatrix> {
    let d = second_differences(u, idx)?;
    let mut m = [[0.0; MAX_REAL_DIM]; MAX_REAL_DIM];
    let rd = u.spec().real_dim();
    for a in 0..rd {
        m[a][..rd].copy_from_slice(&d[a][..rd]);
    }
    Ok(SymMatrix::from_raw(rd, m))
}

/// Radially symmetric function `f(|z|)` sampled at `r_k = k / (K - 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    samples: Vec<f64>,
}

pub const MIN_PROFILE_SAMPLES: usize = 64;

impl RadialProfile {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < MIN_PROFILE_SAMPLES {
            return Err(invalid!("radial profile needs at least {MIN_PROFILE_SAMPLES} samples, got {}", samples.len()));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("profile sample {k}")));
        }
        Ok(Self { samples })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(count: usize, f: F) -> Result<Self> {
        if count < 2 {
            return Err(invalid!("radial profile needs at least {MIN_PROFILE_SAMPLES} samples, got {count}"));
        }
        let dr = 1.0 / (count - 1) as f64;
        Self::new((0..count).map(|k| f(k as f64 * dr)).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.samples.len() - 1) as f64
    }

    pub fn radius(&self, k: usize) -> f64 {
        k as f64 * self.spacing()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn boundary_value(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|v| s * v).collect())
    }

    /// Even reflection through the origin.
    fn at_signed(&self, k: isize) -> f64 {
        self.samples[k.unsigned_abs()]
    }

    /// `(f', f'')` at node `k`: central differences, even extension at 0,
    /// second-order one-sided differences at `r = 1`.
    pub fn derivatives(&self, k: usize) -> (f64, f64) {
        let dr = self.spacing();
        let last = self.samples.len() - 1;
        let f = &self.samples;
        if k == last {
            let d1 = (3.0 * f[k] - 4.0 * f[k - 1] + f[k - 2]) / (2.0 * dr);
            let d2 = (2.0 * f[k] - 5.0 * f[k - 1] + 4.0 * f[k - 2] - f[k - 3]) / (dr * dr);
            (d1, d2)
        } else {
            let ki = k as isize;
            let fp = self.at_signed(ki + 1);
            let fm = self.at_signed(ki - 1);
            ((fp - fm) / (2.0 * dr), (fp - 2.0 * f[k] + fm) / (dr * dr))
        }
    }

    /// Value at `r >= 0` by 4-point Lagrange interpolation; beyond `r = 1`
    /// the quadratic Taylor polynomial at the boundary is used.
    pub fn value_at(&self, r: f64) -> f64 {
        let last = self.samples.len() - 1;
        if r >= 1.0 {
            let (d1, d2) = self.derivatives(last);
            let t = r - 1.0;
            return self.boundary_value() + d1 * t + 0.5 * d2 * t * t;
        }
        let x = r.abs() / self.spacing();
        let base = (math::floor(x) as isize).clamp(0, last as isize - 1);
        let start = (base - 1).min(last as isize - 3);
        let mut acc = 0.0;
        for a in 0..4 {
            let ka = start + a;
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    let kb = start + b;
                    w *= (x - kb as f64) / (ka - kb) as f64;
                }
            }
            acc += w * self.at_signed(ka);
        }
        acc
    }

    /// Derivatives at arbitrary `r` by linear interpolation of nodal differences.
    pub fn derivatives_at(&self, r: f64) -> (f64, f64) {
        let last = self.samples.len() - 1;
        let x = (r / self.spacing()).clamp(0.0, last as f64);
        let k = (math::floor(x) as usize).min(last - 1);
        let t = x - k as f64;
        let (a1, a2) = self.derivatives(k);
        let (b1, b2) = self.derivatives(k + 1);
        (a1 + t * (b1 - a1), a2 + t * (b2 - a2))
    }

    /// Complex-Hessian eigenvalues `(tangential, radial)` at node `k`.
    pub fn hessian_eigs_at_node(&self, k: usize) -> (f64, f64) {
        let (d1, d2) = self.derivatives(k);
        radial_eigs(self.radius(k), d1, d2)
    }

    /// Samples onto a Cartesian grid.
    pub fn to_grid(&self, spec: GridSpec) -> Result<GridField> {
        GridField::from_fn(spec, |p| self.value_at(math::sqrt(p.iter().map(|x| x * x).sum())))
    }

    /// Reads a profile back from a grid field along the positive `x1` axis
    /// by multilinear interpolation.
    pub fn from_grid<S: GridSampler + ?Sized>(u: &S, count: usize) -> Result<Self> {
        let spec = *u.spec();
        let dr = 1.0 / (count.max(2) - 1) as f64;
        let samples = (0..count)
            .map(|k| {
                let mut p = [0.0; 4];
                p[0] = k as f64 * dr;
                interpolate_grid(u, &p)
            })
            .collect::<Vec<_>>();
        let _ = spec;
        Self::new(samples)
    }
}

/// Multilinear interpolation of grid samples at an arbitrary point of the box.
pub fn interpolate_grid<S: GridSampler + ?Sized>(u: &S, p: &Point) -> f64 {
    let spec = *u.spec();
    let d = spec.real_dim();
    let h = spec.spacing();
    let mut base = [0usize; 4];
    let mut frac = [0.0; 4];
    for a in 0..d {
        let x = (p[a] + spec.half_width()) / h - 0.5;
        let i = (math::floor(x) as isize).clamp(0, spec.resolution() as isize - 2) as usize;
        base[a] = i;
        frac[a] = x - i as f64;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut idx = base;
        let mut w = 1.0;
        for a in 0..d {
            if corner >> a & 1 == 1 {
                idx[a] += 1;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        acc += w * u.sample(&idx);
    }
    acc
}

/// Complex-Hessian eigenvalues of `u(z) = f(|z|)` from `f'` and `f''` at radius `r`.
/// The tangential value has multiplicity `n - 1`, the radial value multiplicity one.
pub fn radial_eigs(r: f64, d1: f64, d2: f64) -> (f64, f64) {
    if r <= 0.0 {
        (0.5 * d2, 0.5 * d2)
    } else {
        (d1 / (2.0 * r), 0.25 * (d2 + d1 / r))
    }
}

/// Product `lambda_tan^{n-1} lambda_rad`.
pub fn radial_det(n: usize, eigs: (f64, f64)) -> f64 {
    math::powi(eigs.0, n as i32 - 1) * eigs.1
}

/// Eigenvalues of the complex Hessian of a radial profile at radius `r` in `[0, 1]`.
pub fn radial_hessian_eigs(p: &RadialProfile, r: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(alloc::format!("radius {r} outside [0, 1]")));
    }
    let (d1, d2) = p.derivatives_at(r);
    if !(d1.is_finite() && d2.is_finite()) {
        return Err(Error::NonFinite("profile derivatives".into()));
    }
    Ok(radial_eigs(r, d1, d2))
}

/// Quadrature points on the closed unit ball carrying function values and
/// complex Hessians. Implemented by grid fields and radial profiles so the
/// contact-set machinery runs on either representation.
pub trait BallField {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn value(&self, k: usize) -> f64;
    fn class(&self, k: usize) -> NodeClass;
    /// `dV` weight of point `k` (zero off the ball).
    fn weight(&self, k: usize) -> f64;
    fn complex_hessian_at(&self, k: usize) -> Result<HermitianMatrix>;
    fn real_hessian_at(&self, k: usize) -> Result<SymMatrix>;
    /// Mesh size driving discretization tolerances.
    fn mesh(&self) -> f64;
    /// Distance of point `k` from the origin.
    fn radius_of(&self, k: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sup_interior(&self) -> Result<f64> {
        sup_over(self, NodeClass::Inside)
    }

    fn sup_boundary(&self) -> Result<f64> {
        sup_over(self, NodeClass::Band)
    }

    /// `max |u|` over all points with positive weight or in a mask.
    fn sup_abs(&self) -> f64 {
        (0..self.len())
            .filter(|&k| self.class(k) != NodeClass::Outside)
            .map(|k| self.value(k).abs())
            .fold(0.0, f64::max)
    }

    fn integrate<G: FnMut(usize) -> f64>(&self, mut g: G) -> f64
    where
        Self: Sized,
    {
        let mut acc = 0.0;
        for k in 0..self.len() {
            let w = self.weight(k);
            if w > 0.0 {
                acc += w * g(k);
            }
        }
        acc
    }
}

fn sup_over<F: BallField + ?Sized>(u: &F, class: NodeClass) -> Result<f64> {
    let mut best: Option<f64> = None;
    for k in 0..u.len() {
        if u.class(k) == class {
            let v = u.value(k);
            best = Some(best.map_or(v, |b| b.max(v)));
        }
    }
    best.ok_or_else(|| Error::Domain(alloc::format!("empty {class:?} mask")))
}

impl BallField for GridField {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    fn class(&self, k: usize) -> NodeClass {
        self.spec.class(&self.spec.unravel(k))
    }

    fn weight(&self, k: usize) -> f64 {
        self.quadrature.weight(k)
    }

    fn complex_hessian_at(&self, k: usize) -> Result<HermitianMatrix> {
        complex_hessian(self, &self.spec.unravel(k))
    }

    fn real_hessian_at(&self, k: usize) -> Result<SymMatrix> {
        real_hessian(self, &self.spec.unravel(k))
    }

    fn mesh(&self) -> f64 {
        self.spec.spacing()
    }

    fn radius_of(&self, k: usize) -> f64 {
        self.spec.radius(&self.spec.unravel(k))
    }

    fn integrate<G: FnMut(usize) -> f64>(&self, g: G) -> f64 {
        self.quadrature.integrate(g)
    }
}

/// A radial profile viewed as a function on the ball of C^n. Points are the
/// profile nodes; the sphere `r = 1` is resolved exactly, so the boundary
/// mask is the single node at `r = 1` and every other node is interior.
#[derive(Clone, Debug)]
pub struct RadialField {
    profile: RadialProfile,
    n: usize,
    weights: Vec<f64>,
}

impl RadialField {
    pub fn new(profile: RadialProfile, n: usize) -> Result<Self> {
        if n == 0 || n > 2 {
            return Err(invalid!("complex dimension must be 1 or 2, got {n}"));
        }
        let weights = radial_weights(n, profile.len());
        Ok(Self { profile, n, weights })
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn eigs(&self, k: usize) -> (f64, f64) {
        self.profile.hessian_eigs_at_node(k)
    }
}

/// Weights for `int_0^1 g(r) |S^{2n-1}| r^{2n-1} dr` on `count` uniform nodes.
/// Each interior node carries its hat function integrated exactly against
/// `r^{2n-1}`; the last interval is assigned wholly to the last interior
/// node so the sphere node has weight zero. Constants integrate exactly and
/// smooth integrands to `O(dr^2)`.
pub fn radial_weights(n: usize, count: usize) -> Vec<f64> {
    let dr = 1.0 / (count - 1) as f64;
    let area = math::sphere_area(n);
    let m = 2 * n as i32 - 1;
    // Three-point Gauss-Legendre on [0, 1].
    let g = math::sqrt(0.6);
    let nodes = [0.5 * (1.0 - g), 0.5, 0.5 * (1.0 + g)];
    let wts = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
    let mut w = vec![0.0; count];
    for j in 0..count - 1 {
        let a = j as f64 * dr;
        for (s, gw) in nodes.iter().zip(wts) {
            let rho = area * dr * gw * math::powi(a + s * dr, m);
            if j + 1 == count - 1 {
                w[j] += rho;
            } else {
                w[j] += rho * (1.0 - s);
                w[j + 1] += rho * s;
            }
        }
    }
    w
}

impl BallField for RadialField {
    fn dim(&self) -> usize {
        self.n
    }

    fn len(&self) -> usize {
        self.profile.len()
    }

    fn value(&self, k: usize) -> f64 {
        self.profile.samples[k]
    }

    fn class(&self, k: usize) -> NodeClass {
        if k + 1 == self.profile.len() {
            NodeClass::Band
        } else {
            NodeClass::Inside
        }
    }

    fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    fn complex_hessian_at(&self, k: usize) -> Result<HermitianMatrix> {
        let (tan, rad) = self.eigs(k);
        Ok(if self.n == 1 { HermitianMatrix::diagonal(&[rad]) } else { HermitianMatrix::diagonal(&[rad, tan]) })
    }

    fn real_hessian_at(&self, k: usize) -> Result<SymMatrix> {
        let (d1, d2) = self.profile.derivatives(k);
        let r = self.profile.radius(k);
        let t = if r > 0.0 { d1 / r } else { d2 };
        let mut diag = vec![t; 2 * self.n];
        diag[0] = d2;
        Ok(SymMatrix::diagonal(&diag))
    }

    fn mesh(&self) -> f64 {
        self.profile.spacing()
    }

    fn radius_of(&self, k: usize) -> f64 {
        self.profile.radius(k)
    }
}

/// Integral of a radial function over the unit ball: `|S^{2n-1}| int_0^1 g r^{2n-1} dr`.
pub fn integrate_radial(n: usize, profile: &RadialProfile) -> f64 {
    radial_weights(n, profile.len()).iter().zip(profile.samples()).map(|(w, v)| w * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI;
    use proptest::prelude::*;

    fn norm2(p: &[f64]) -> f64 {
        p.iter().map(|x| x * x).sum()
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(3, 32).is_err());
        assert!(GridSpec::new(1, 8).is_err());
        assert!(GridSpec::with_half_width(1, 32, 1.0).is_err());
        let s = GridSpec::new(2, 32).unwrap();
        assert!((s.half_width() - (1.0 + 4.0 * s.spacing())).abs() < 1e-14);
        let idx = [3, 7, 1, 30];
        assert_eq!(s.unravel(s.ravel(&idx)), idx);
    }

    #[test]
    fn masks_disjoint_and_nonempty() {
        let s = GridSpec::new(1, 16).unwrap();
        let u = GridField::from_fn(s, |_| 0.0).unwrap();
        let inside = u.inside_mask();
        let band = u.band_mask();
        assert!(inside.iter().any(|&b| b));
        assert!(band.iter().any(|&b| b));
        assert!(inside.iter().zip(&band).all(|(a, b)| !(a & b)));
    }

    #[test]
    fn identity_hessian_of_norm_squared() {
        let s = GridSpec::new(2, 20).unwrap();
        let u = GridField::from_fn(s, norm2).unwrap();
        for k in 0..s.node_count() {
            if u.class(k) != NodeClass::Inside {
                continue;
            }
            let m = u.complex_hessian_at(k).unwrap();
            assert!((m.get(0, 0).re - 1.0).abs() < 1e-9);
            assert!((m.get(1, 1).re - 1.0).abs() < 1e-9);
            assert!(m.get(0, 1).norm() < 1e-9);
            let r = u.real_hessian_at(k).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    let want = if a == b { 2.0 } else { 0.0 };
                    assert!((r.get(a, b) - want).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn pluriharmonic_kernel() {
        let s = GridSpec::new(2, 20).unwrap();
        let u = GridField::from_fn(s, |p| p[0] * p[0] - p[1] * p[1]).unwrap();
        let idx = [9, 11, 10, 8];
        let m = u.complex_hessian(&idx).unwrap();
        assert!(m.get(0, 0).norm() < 1e-9 && m.get(0, 1).norm() < 1e-9 && m.get(1, 1).norm() < 1e-9);
        let s1 = GridSpec::new(1, 32).unwrap();
        let v = GridField::from_fn(s1, |p| p[0] * p[0] - p[1] * p[1]).unwrap();
        let r = v.real_hessian(&[16, 16, 0, 0]).unwrap();
        assert!((r.get(0, 0) - 2.0).abs() < 1e-9 && (r.get(1, 1) + 2.0).abs() < 1e-9);
    }

    /// `|z1|^2 |z2|^2` has complex Hessian `[[|z2|^2, zbar1 z2], [z1 zbar2, |z1|^2]]`.
    #[test]
    fn product_of_moduli_hessian_converges() {
        let target = [0.5, 0.0, 0.5, 0.0];
        let mut errs = Vec::new();
        for res in [64usize, 128] {
            let s = GridSpec::new(2, res).unwrap();
            let u = AnalyticField::new(s, |p: &[f64]| (p[0] * p[0] + p[1] * p[1]) * (p[2] * p[2] + p[3] * p[3]));
            let mut idx = [0; 4];
            for a in 0..4 {
                idx[a] = ((target[a] + s.half_width()) / s.spacing() - 0.5).round() as usize;
            }
            let p = s.point(&idx);
            let z1 = Complex64::new(p[0], p[1]);
            let z2 = Complex64::new(p[2], p[3]);
            let m = complex_hessian(&u, &idx).unwrap();
            let e00 = (m.get(0, 0).re - z2.norm_sqr()).abs();
            let e11 = (m.get(1, 1).re - z1.norm_sqr()).abs();
            let e01 = (m.get(0, 1) - z1.conj() * z2).norm();
            errs.push(e00.max(e11).max(e01));
        }
        assert!(errs[0] < 1e-3);
        assert!(errs[1] <= errs[0] / 3.0 + 1e-12, "{errs:?}");
    }

    #[test]
    fn ball_volume_anchors() {
        let s1 = GridSpec::new(1, 128).unwrap();
        let v1 = BallQuadrature::new(s1).integrate(|_| 1.0);
        assert!((v1 - PI).abs() / PI < 0.01, "{v1}");
        let s2 = GridSpec::new(2, 32).unwrap();
        let v2 = BallQuadrature::new(s2).integrate(|_| 1.0);
        assert!((v2 - PI * PI / 2.0).abs() / (PI * PI / 2.0) < 0.02, "{v2}");
        assert_eq!(BallQuadrature::new(s1).integrate(|_| 0.0), 0.0);
    }

    #[test]
    fn sup_masks() {
        let s = GridSpec::new(1, 64).unwrap();
        let u = GridField::from_fn(s, |p| 1.0 - norm2(p)).unwrap();
        let h = s.spacing();
        assert!((u.sup_interior().unwrap() - 1.0).abs() < h);
        assert!(u.sup_boundary().unwrap().abs() < 2.0 * h + 1e-12);
        let a = GridField::from_fn(s, |p| 0.3 * p[0] - 0.7 * p[1] + 2.0).unwrap();
        assert!(a.sup_interior().unwrap() <= a.sup_boundary().unwrap() + h);
    }

    #[test]
    fn radial_eigs_known_profiles() {
        let p = RadialProfile::from_fn(257, |r| r * r).unwrap();
        for r in [0.0, 0.2, 0.5, 0.9] {
            let (t, rad) = radial_hessian_eigs(&p, r).unwrap();
            assert!((t - 1.0).abs() < 1e-9 && (rad - 1.0).abs() < 1e-9);
        }
        let c = RadialProfile::from_fn(64, |_| 3.0).unwrap();
        assert_eq!(radial_hessian_eigs(&c, 0.4).unwrap(), (0.0, 0.0));
        assert!(radial_hessian_eigs(&c, 1.5).is_err());
    }

    #[test]
    fn radial_quartic_matches_grid() {
        let p = RadialProfile::from_fn(1025, |r| r * r * r * r).unwrap();
        let s = GridSpec::new(2, 48).unwrap();
        let u = AnalyticField::new(s, |q: &[f64]| norm2(q) * norm2(q));
        let h = s.spacing();
        for k in (0..s.node_count()).step_by(97) {
            let idx = s.unravel(k);
            let r = s.radius(&idx);
            if !(0.1..=0.9).contains(&r) {
                continue;
            }
            let (t, rad) = radial_hessian_eigs(&p, r).unwrap();
            let m = complex_hessian(&u, &idx).unwrap().eigenvalues();
            let mut want = [t, rad];
            want.sort_by(|a, b| a.total_cmp(b));
            for (g, w) in m.as_slice().iter().zip(want) {
                assert!((g - w).abs() < 10.0 * h * h, "r={r} grid={g} radial={w}");
            }
        }
    }

    #[test]
    fn profile_grid_round_trip() {
        let f = |r: f64| math::cos(2.0 * r) - r * r * r;
        let p = RadialProfile::from_fn(513, f).unwrap();
        for res in [32usize, 64] {
            let s = GridSpec::new(1, res).unwrap();
            let g = p.to_grid(s).unwrap();
            let back = RadialProfile::from_grid(&g, 513).unwrap();
            let err = back.samples().iter().zip(p.samples()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 2.0 * s.spacing() * s.spacing(), "res {res}: {err}");
        }
    }

    #[test]
    fn radial_integral_of_one() {
        for n in [1usize, 2] {
            let one = RadialProfile::from_fn(1025, |_| 1.0).unwrap();
            let v = integrate_radial(n, &one);
            assert!((v - math::ball_volume(n)).abs() < 1e-12);
            let quad = RadialProfile::from_fn(1025, |r| r * r).unwrap();
            let want = math::sphere_area(n) / (2.0 * n as f64 + 2.0);
            assert!((integrate_radial(n, &quad) - want).abs() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn complex_hessian_is_hermitian(c in proptest::collection::vec(-2.0f64..2.0, 8), k in 0usize..20_000) {
            let s = GridSpec::new(2, 20).unwrap();
            let u = AnalyticField::new(s, |p: &[f64]| {
                c[0] * p[0] * p[1] * p[2] + c[1] * p[3] * p[3] * p[0] + c[2] * math::sin(p[1] + c[3] * p[2])
                    + c[4] * p[0] * p[3] + c[5] * math::exp(c[6] * p[2]) + c[7] * p[1] * p[1] * p[1] * p[1]
            });
            let idx = s.unravel(k % s.node_count());
            if s.class(&idx) == NodeClass::Inside {
                let m = complex_hessian(&u, &idx).unwrap();
                prop_assert!(m.hermitian_defect() <= 1e-12);
            }
        }

        #[test]
        fn trace_is_quarter_laplacian(c in proptest::collection::vec(-2.0f64..2.0, 4)) {
            let s = GridSpec::new(2, 24).unwrap();
            let u = AnalyticField::new(s, |p: &[f64]| c[0] * p[0] * p[0] * p[2] + c[1] * math::cos(p[1] * p[3]) + c[2] * p[3] * p[3] + c[3] * p[0] * p[1]);
            for k in (0..s.node_count()).step_by(4099) {
                let idx = s.unravel(k);
                if s.class(&idx) != NodeClass::Inside { continue; }
                let m = complex_hessian(&u, &idx).unwrap();
                let r = real_hessian(&u, &idx).unwrap();
                prop_assert!((m.trace() - 0.25 * r.trace()).abs() < 1e-9);
            }
        }
    }
}
