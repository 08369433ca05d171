//! Small dense complex linear algebra for per-bin spatial covariance work.
//!
//! Matrices here are a handful of microphones square (M = 5 for the default
//! array), and the frame loop touches them hundreds of thousands of times per
//! run, so the kernels are hand-rolled over flat buffers and the factorization
//! can be refreshed without allocating.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense M×M complex matrix in row-major order, used for per-bin spatial
/// covariance matrices. Constructors that build it from data (outer products,
/// smoothing updates, diagonal congruences) preserve Hermitian symmetry
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CovarianceMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex64::ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::ONE;
        }
        m
    }

    /// Builds the matrix entrywise; the caller is responsible for symmetry.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    /// Rank-1 outer product `v vᴴ`.
    pub fn outer(v: &[Complex64]) -> Self {
        let dim = v.len();
        Self::from_fn(dim, |i, j| v[i] * v[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Recursive smoothing step `R ← α R + (1 − α) y yᴴ`. The rank-1 term is
    /// formed as `(y_i conj(y_j)) · β` so Hermitian symmetry holds exactly in
    /// floating point.
    pub fn smooth_update(&mut self, alpha: f64, y: &[Complex64]) {
        debug_assert_eq!(y.len(), self.dim);
        let beta = 1.0 - alpha;
        for i in 0..self.dim {
            let yi = y[i];
            let row = &mut self.data[i * self.dim..(i + 1) * self.dim];
            for (j, r) in row.iter_mut().enumerate() {
                *r = *r * alpha + yi * y[j].conj() * beta;
            }
        }
    }

    /// Congruence with a diagonal matrix: `D R Dᴴ` where `d` holds the diagonal.
    pub fn transform_diag(&self, d: &[Complex64]) -> Self {
        debug_assert_eq!(d.len(), self.dim);
        Self::from_fn(self.dim, |i, j| d[i] * self.get(i, j) * d[j].conj())
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b * s;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= s;
        }
        m
    }

    pub fn trace_real(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    /// Adds `factor · (trace/M)` to the diagonal.
    pub fn load_diagonal(&mut self, factor: f64) {
        let load = factor * self.trace_real() / self.dim as f64;
        for i in 0..self.dim {
            self.data[i * self.dim + i] += load;
        }
    }

    /// Copy with diagonal loading applied.
    pub fn loaded(&self, factor: f64) -> Self {
        let mut m = self.clone();
        m.load_diagonal(factor);
        m
    }

    pub fn mul_vec(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let mut acc = Complex64::ZERO;
            for (r, xj) in row.iter().zip(x.iter()) {
                acc += r * xj;
            }
            out[i] = acc;
        }
    }

    /// Real part of the quadratic form `xᴴ R x`.
    pub fn quadratic_form(&self, x: &[Complex64]) -> f64 {
        let mut acc = Complex64::ZERO;
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let mut rx = Complex64::ZERO;
            for (r, xj) in row.iter().zip(x.iter()) {
                rx += r * xj;
            }
            acc += x[i].conj() * rx;
        }
        acc.re
    }

    /// Largest absolute deviation from Hermitian symmetry.
    pub fn hermitian_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                err = err.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        err
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn frobenius_dist(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        let mut f = CholeskyFactor::uninit(self.dim);
        f.refactor(self)?;
        Ok(f)
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᴴ = R`.
///
/// The buffer is reusable via [`CholeskyFactor::refactor`] so the frame loop
/// can refresh the factorization without allocating.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    l: Vec<Complex64>,
}

impl CholeskyFactor {
    pub fn uninit(dim: usize) -> Self {
        Self { dim, l: vec![Complex64::ZERO; dim * dim] }
    }

    /// Factors `m` into this buffer. Fails if a pivot is not strictly positive.
    pub fn refactor(&mut self, m: &CovarianceMatrix) -> Result<()> {
        let n = m.dim;
        debug_assert_eq!(self.dim, n);
        let l = &mut self.l;
        l.fill(Complex64::ZERO);
        for j in 0..n {
            let mut d = m.get(j, j).re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: d, index: j });
            }
            let ljj = d.sqrt();
            l[j * n + j] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `L x = b` (forward substitution).
    pub fn solve_lower(&self, b: &[Complex64], x: &mut [Complex64]) {
        let n = self.dim;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i].re;
        }
    }

    /// Solves `Lᴴ x = b` (backward substitution).
    pub fn solve_lower_adjoint(&self, b: &[Complex64], x: &mut [Complex64]) {
        let n = self.dim;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i].conj() * x[k];
            }
            x[i] = s / self.l[i * n + i].re;
        }
    }

    /// Solves `L Lᴴ x = b`, i.e. `x = R⁻¹ b`.
    pub fn solve(&self, b: &[Complex64], x: &mut [Complex64], tmp: &mut [Complex64]) {
        self.solve_lower(b, tmp);
        self.solve_lower_adjoint(tmp, x);
    }

    /// `out = L x`.
    pub fn mul_lower(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim;
        for i in (0..n).rev() {
            let mut s = Complex64::ZERO;
            for k in 0..=i {
                s += self.l[i * n + k] * x[k];
            }
            out[i] = s;
        }
    }
}

/// `Σ conj(x_i) y_i`.
pub fn dotc(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_is_finite(x: &[Complex64]) -> bool {
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hpd(dim: usize, seed: u64) -> CovarianceMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        // A Aᴴ + I is Hermitian positive definite.
        let a = CovarianceMatrix::from_fn(dim, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let mut m = CovarianceMatrix::from_fn(dim, |i, j| {
            let mut s = Complex64::ZERO;
            for k in 0..dim {
                s += a.get(i, k) * a.get(j, k).conj();
            }
            s
        });
        for i in 0..dim {
            m.set(i, i, m.get(i, i) + Complex64::ONE);
        }
        m
    }

    #[test]
    fn outer_is_hermitian_with_zero_diag_imag() {
        let v = [c(1.0, 2.0), c(-0.5, 0.25), c(0.0, -1.5)];
        let m = CovarianceMatrix::outer(&v);
        assert_eq!(m.hermitian_error(), 0.0);
        for i in 0..3 {
            assert_eq!(m.get(i, i).im, 0.0);
        }
        assert_eq!(m.get(0, 1), v[0] * v[1].conj());
    }

    #[test]
    fn smooth_update_preserves_hermitian_exactly() {
        let mut m = CovarianceMatrix::identity(4);
        let y = [c(0.3, -0.7), c(1.1, 0.2), c(-0.4, 0.9), c(0.05, -0.3)];
        for _ in 0..50 {
            m.smooth_update(0.95, &y);
        }
        assert_eq!(m.hermitian_error(), 0.0);
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = random_hpd(5, 7);
        let f = m.cholesky().unwrap();
        // L Lᴴ == m
        let n = 5;
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::ZERO;
                for k in 0..n {
                    s += f.l[i * n + k] * f.l[j * n + k].conj();
                }
                assert!((s - m.get(i, j)).norm() < 1e-12, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn cholesky_solve_inverts() {
        let m = random_hpd(5, 11);
        let f = m.cholesky().unwrap();
        let b = [c(1.0, 0.0), c(0.0, 1.0), c(-2.0, 0.5), c(0.7, 0.7), c(0.0, 0.0)];
        let mut x = [Complex64::ZERO; 5];
        let mut tmp = [Complex64::ZERO; 5];
        f.solve(&b, &mut x, &mut tmp);
        let mut back = [Complex64::ZERO; 5];
        m.mul_vec(&x, &mut back);
        for i in 0..5 {
            assert!((back[i] - b[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut m = CovarianceMatrix::identity(3);
        m.set(2, 2, c(-1.0, 0.0));
        assert!(matches!(
            m.cholesky(),
            Err(Error::NotPositiveDefinite { index: 2, .. })
        ));
    }

    #[test]
    fn diag_transform_matches_direct_product() {
        let m = random_hpd(4, 3);
        let d = [c(0.5, 0.1), Complex64::ONE, Complex64::ONE, Complex64::ONE];
        let t = m.transform_diag(&d);
        assert!(t.hermitian_error() < 1e-15);
        assert!((t.get(0, 0) - m.get(0, 0) * d[0].norm_sqr()).norm() < 1e-14);
        assert!((t.get(0, 2) - d[0] * m.get(0, 2)).norm() < 1e-14);
        assert_eq!(t.get(1, 3), m.get(1, 3));
    }

    #[test]
    fn diagonal_loading_shifts_trace() {
        let mut m = CovarianceMatrix::identity(4);
        m.load_diagonal(1e-2);
        assert!((m.trace_real() - 4.0 * 1.01).abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_is_real_for_hermitian() {
        let m = random_hpd(5, 23);
        let x = [c(1.0, 1.0), c(0.2, -0.4), c(0.0, 2.0), c(-1.0, 0.0), c(0.3, 0.3)];
        let q = m.quadratic_form(&x);
        assert!(q > 0.0);
        // Cross-check against mul_vec + dotc.
        let mut rx = [Complex64::ZERO; 5];
        m.mul_vec(&x, &mut rx);
        assert!((dotc(&x, &rx).re - q).abs() < 1e-12);
        assert!(dotc(&x, &rx).im.abs() < 1e-12);
    }
}
