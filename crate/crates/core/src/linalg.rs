//! Small dense matrices: Hermitian (complex dimension <= 2), real symmetric
//! (real dimension <= 4), plus tridiagonal and banded solvers.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;

pub const MAX_COMPLEX_DIM: usize = 2;
pub const MAX_REAL_DIM: usize = 4;

/// Tolerance on `|A_ij - conj(A_ji)|` accepted by [`HermitianMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues in ascending order; only the first `len` entries are meaningful.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spectrum<const N: usize> {
    values: [f64; N],
    len: usize,
}

impl<const N: usize> Spectrum<N> {
    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.len]
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.len - 1]
    }

    pub fn product(&self) -> f64 {
        self.as_slice().iter().product()
    }
}

/// Hermitian matrix of complex dimension 1 or 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianMatrix {
    dim: usize,
    entries: [[Complex64; MAX_COMPLEX_DIM]; MAX_COMPLEX_DIM],
}

impl HermitianMatrix {
    /// Builds from row-major entries; the lower triangle must be the
    /// conjugate of the upper triangle to [`HERMITIAN_TOL`]. The stored
    /// matrix is symmetrized exactly.
    pub fn new(dim: usize, entries: &[Complex64]) -> Result<Self> {
        check_complex_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(invalid!("expected {} entries, got {}", dim * dim, entries.len()));
        }
        let mut m = [[Complex64::new(0.0, 0.0); MAX_COMPLEX_DIM]; MAX_COMPLEX_DIM];
        for i in 0..dim {
            for j in 0..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                if !(a.re.is_finite() && a.im.is_finite()) {
                    return Err(Error::NonFinite("matrix entry".into()));
                }
                if (a - b.conj()).norm() > HERMITIAN_TOL * (1.0 + a.norm()) {
                    return Err(invalid!("entry ({i},{j}) is not the conjugate of ({j},{i})"));
                }
                m[i][j] = if i == j {
                    Complex64::new(a.re, 0.0)
                } else if i < j {
                    a
                } else {
                    b.conj()
                };
            }
        }
        Ok(Self { dim, entries: m })
    }

    /// Trusted constructor: `upper[i][j]` for `i <= j` is used, the rest mirrored.
    pub(crate) fn from_upper(dim: usize, upper: [[Complex64; 2]; 2]) -> Self {
        let mut m = upper;
        for (i, row) in m.iter_mut().enumerate() {
            row[i].im = 0.0;
        }
        if dim == 2 {
            m[1][0] = m[0][1].conj();
        } else {
            m[0][1] = Complex64::new(0.0, 0.0);
            m[1][0] = Complex64::new(0.0, 0.0);
            m[1][1] = Complex64::new(0.0, 0.0);
        }
        Self { dim, entries: m }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&[1.0, 1.0][..dim])
    }

    pub fn zero(dim: usize) -> Self {
        Self::diagonal(&[0.0, 0.0][..dim])
    }

    /// Diagonal matrix; `diag.len()` is the dimension (1 or 2).
    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        assert!(dim == 1 || dim == 2, "complex dimension must be 1 or 2");
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, &d) in diag.iter().enumerate() {
            m[i][i] = Complex64::new(d, 0.0);
        }
        Self { dim, entries: m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        assert!(i < self.dim && j < self.dim);
        self.entries[i][j]
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for row in out.entries.iter_mut() {
            for e in row.iter_mut() {
                *e *= s;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.entries[i][j] += other.entries[i][j];
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[i][i].re).sum()
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.entries[0][0].re,
            _ => self.entries[0][0].re * self.entries[1][1].re - self.entries[0][1].norm_sqr(),
        }
    }

    pub fn eigenvalues(&self) -> Spectrum<2> {
        match self.dim {
            1 => Spectrum { values: [self.entries[0][0].re, 0.0], len: 1 },
            _ => {
                let a = self.entries[0][0].re;
                let d = self.entries[1][1].re;
                let mid = 0.5 * (a + d);
                let half = 0.5 * (a - d);
                let rad = math::sqrt(half * half + self.entries[0][1].norm_sqr());
                Spectrum { values: [mid - rad, mid + rad], len: 2 }
            }
        }
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        match self.dim {
            1 => m[0][0] = Complex64::new(1.0 / det, 0.0),
            _ => {
                m[0][0] = Complex64::new(self.entries[1][1].re / det, 0.0);
                m[1][1] = Complex64::new(self.entries[0][0].re / det, 0.0);
                m[0][1] = -self.entries[0][1] / det;
                m[1][0] = -self.entries[1][0] / det;
            }
        }
        Some(Self { dim: self.dim, entries: m })
    }

    /// `Re tr(A B) = sum_ij A_ij B_ji`, the contraction `a^{ij} u_{ij}` of two Hermitian matrices.
    pub fn contract(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += (self.entries[i][j] * other.entries[j][i]).re;
            }
        }
        acc
    }

    /// Largest entrywise deviation from Hermitian symmetry (zero by construction).
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.entries[i][j] - self.entries[j][i].conj()).norm());
            }
        }
        worst
    }
}

fn check_complex_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_COMPLEX_DIM {
        return Err(invalid!("complex dimension must be 1 or 2, got {dim}"));
    }
    Ok(())
}

/// Real symmetric matrix of dimension <= 4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    entries: [[f64; MAX_REAL_DIM]; MAX_REAL_DIM],
}

impl SymMatrix {
    /// Row-major entries; the matrix is symmetrized as `(A + A^T)/2`.
    pub fn new(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 || dim > MAX_REAL_DIM {
            return Err(invalid!("real dimension must be in 1..=4, got {dim}"));
        }
        if entries.len() != dim * dim {
            return Err(invalid!("expected {} entries, got {}", dim * dim, entries.len()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        let mut m = [[0.0; MAX_REAL_DIM]; MAX_REAL_DIM];
        for i in 0..dim {
            for j in 0..dim {
                m[i][j] = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
            }
        }
        Ok(Self { dim, entries: m })
    }

    pub(crate) fn from_raw(dim: usize, entries: [[f64; MAX_REAL_DIM]; MAX_REAL_DIM]) -> Self {
        Self { dim, entries }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        assert!((1..=MAX_REAL_DIM).contains(&dim));
        let mut m = [[0.0; MAX_REAL_DIM]; MAX_REAL_DIM];
        for (i, &d) in diag.iter().enumerate() {
            m[i][i] = d;
        }
        Self { dim, entries: m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim);
        self.entries[i][j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[i][i]).sum()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let d = self.dim;
        let mut a = self.entries;
        let mut det = 1.0;
        for col in 0..d {
            let mut piv = col;
            for row in col + 1..d {
                if a[row][col].abs() > a[piv][col].abs() {
                    piv = row;
                }
            }
            if a[piv][col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                a.swap(piv, col);
                det = -det;
            }
            det *= a[col][col];
            for row in col + 1..d {
                let factor = a[row][col] / a[col][col];
                for k in col..d {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
        det
    }

    /// Eigenvalues by cyclic Jacobi rotations, ascending.
    pub fn eigenvalues(&self) -> Spectrum<4> {
        let d = self.dim;
        let mut a = self.entries;
        for _sweep in 0..64 {
            let mut off = 0.0;
            let mut diag = 0.0;
            for i in 0..d {
                diag += a[i][i] * a[i][i];
                for j in i + 1..d {
                    off += a[i][j] * a[i][j];
                }
            }
            if off <= 1e-30 * diag.max(1e-300) {
                break;
            }
            for p in 0..d {
                for q in p + 1..d {
                    if a[p][q] == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / math::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut values = [0.0; MAX_REAL_DIM];
        for i in 0..d {
            values[i] = a[i][i];
        }
        values[..d].sort_by(|x, y| x.total_cmp(y));
        Spectrum { values, len: d }
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm).
/// `lower[0]` and `upper[last]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(invalid!("tridiagonal system with inconsistent lengths"));
    }
    let mut c = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::NonFinite("zero pivot in tridiagonal solve".into()));
    }
    c[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::NonFinite("zero pivot in tridiagonal solve".into()));
        }
        c[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Square banded matrix with equal lower and upper bandwidth, stored by rows.
/// Factorized without pivoting, which is stable for the diagonally dominant
/// systems produced by the disc discretization.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    size: usize,
    band: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(size: usize, band: usize) -> Self {
        Self { size, band, data: vec![0.0; size * (2 * band + 1)] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.band);
        i * (2 * self.band + 1) + (j + self.band - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.band {
            return 0.0;
        }
        self.data[self.slot(i, j)]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.band);
            let hi = (i + self.band).min(self.size - 1);
            for j in lo..=hi {
                *yi += self.data[self.slot(i, j)] * x[j];
            }
        }
        y
    }

    /// In-place LU factorization followed by the solve; consumes the matrix.
    pub fn solve(mut self, rhs: &mut [f64]) -> Result<()> {
        let n = self.size;
        let b = self.band;
        if rhs.len() != n {
            return Err(invalid!("banded solve with inconsistent lengths"));
        }
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::NonFinite("zero pivot in banded solve".into()));
            }
            let hi = (k + b).min(n - 1);
            for i in k + 1..=hi {
                let sik = self.slot(i, k);
                let factor = self.data[sik] / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.data[sik] = factor;
                for j in k + 1..=hi {
                    let skj = self.slot(k, j);
                    let sij = self.slot(i, j);
                    self.data[sij] -= factor * self.data[skj];
                }
                rhs[i] -= factor * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let hi = (k + b).min(n - 1);
            let mut acc = rhs[k];
            for j in k + 1..=hi {
                acc -= self.data[self.slot(k, j)] * rhs[j];
            }
            rhs[k] = acc / self.data[self.slot(k, k)];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hermitian_rejects_asymmetric_input() {
        let e = [c(1.0, 0.0), c(0.5, 0.1), c(0.5, 0.1), c(2.0, 0.0)];
        assert!(HermitianMatrix::new(2, &e).is_err());
        let e = [c(1.0, 0.0), c(0.5, 0.1), c(0.5, -0.1), c(2.0, 0.0)];
        let m = HermitianMatrix::new(2, &e).unwrap();
        assert!((m.det() - (2.0 - 0.26)).abs() < 1e-14);
    }

    #[test]
    fn hermitian_inverse_and_contraction() {
        let m = HermitianMatrix::new(2, &[c(2.0, 0.0), c(0.3, 0.4), c(0.3, -0.4), c(1.0, 0.0)]).unwrap();
        let inv = m.inverse().unwrap();
        assert!((inv.contract(&m) - 2.0).abs() < 1e-14);
        assert!((HermitianMatrix::identity(2).contract(&m) - m.trace()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_det_and_eigs_diagonal() {
        let m = SymMatrix::diagonal(&[2.0, -3.0, 0.5, 4.0]);
        assert!((m.det() - (-12.0)).abs() < 1e-12);
        assert_eq!(m.eigenvalues().as_slice(), &[-3.0, 0.5, 2.0, 4.0]);
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let lower = [0.0, 1.0, 1.0, 1.0];
        let diag = [-4.0, -4.0, -4.0, -4.0];
        let upper = [1.0, 1.0, 1.0, 0.0];
        let x = [1.0, -2.0, 3.0, 0.5];
        let mut rhs = [0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x[i]
                + if i > 0 { lower[i] * x[i - 1] } else { 0.0 }
                + if i < 3 { upper[i] * x[i + 1] } else { 0.0 };
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs).unwrap();
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn banded_solve_recovers_vector() {
        let n = 30;
        let band = 5;
        let mut m = BandMatrix::zeros(n, band);
        for i in 0..n {
            m.add(i, i, 12.0);
            for d in 1..=band {
                if i + d < n {
                    m.add(i, i + d, -1.0 / d as f64);
                    m.add(i + d, i, -0.5 / d as f64);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut rhs = m.mul_vec(&x);
        m.solve(&mut rhs).unwrap();
        for i in 0..n {
            assert!((rhs[i] - x[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn hermitian_eigs_multiply_to_det(a in -5.0f64..5.0, d in -5.0f64..5.0, br in -3.0f64..3.0, bi in -3.0f64..3.0) {
            let m = HermitianMatrix::new(2, &[c(a, 0.0), c(br, bi), c(br, -bi), c(d, 0.0)]).unwrap();
            let s = m.eigenvalues();
            prop_assert!((s.product() - m.det()).abs() < 1e-10 * (1.0 + m.det().abs() + a * a + d * d));
            prop_assert!((s.as_slice().iter().sum::<f64>() - m.trace()).abs() < 1e-12 * (1.0 + a.abs() + d.abs()));
            prop_assert_eq!(m.hermitian_defect(), 0.0);
        }

        #[test]
        fn jacobi_eigs_multiply_to_det(v in proptest::collection::vec(-3.0f64..3.0, 16)) {
            let m = SymMatrix::new(4, &v).unwrap();
            let s = m.eigenvalues();
            let scale = 1.0 + v.iter().map(|x| x.abs()).sum::<f64>().powi(4);
            prop_assert!((s.product() - m.det()).abs() < 1e-9 * scale);
            prop_assert!((s.as_slice().iter().sum::<f64>() - m.trace()).abs() < 1e-10 * scale);
        }
    }
}
