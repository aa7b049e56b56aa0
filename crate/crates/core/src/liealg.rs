//! Small dense complex matrices specialised to `u(N)` and `U(N)`.
//!
//! Matrices are at most [`MAX_N`]×[`MAX_N`] and live inline (no heap), so
//! they are `Copy` and cheap to pass around in the inner loops of the
//! transport solver. Entries are stored row-major with stride `n`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::LinalgError;

/// Largest supported matrix size.
pub const MAX_N: usize = 4;

/// Default tolerance for the anti-Hermitian check (Frobenius norm of `M + M†`).
pub const ANTI_HERMITIAN_TOL: f64 = 1e-12;

/// Default tolerance for the unitarity check (Frobenius norm of `U†U - I`).
pub const UNITARY_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 64;

pub type C64 = Complex64;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense `n × n` complex matrix with `n <= MAX_N`.
#[derive(Clone, Copy)]
pub struct CMat {
    n: usize,
    e: [C64; MAX_N * MAX_N],
}

impl PartialEq for CMat {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries() == other.entries()
    }
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMat{}[", self.n)?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.n {
                let z = self[(i, j)];
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
            }
        }
        write!(f, "]")
    }
}

impl CMat {
    /// Zero matrix. Panics if `n` is 0 or exceeds [`MAX_N`].
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_N).contains(&n), "matrix size {n} outside 1..={MAX_N}");
        CMat { n, e: [C64::new(0.0, 0.0); MAX_N * MAX_N] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Scalar multiple of the identity.
    pub fn scalar(n: usize, z: C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = z;
        }
        m
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be a square.
    pub fn from_row_major(entries: &[C64]) -> Result<Self, LinalgError> {
        let n = (entries.len() as f64).sqrt().round() as usize;
        if n == 0 || n * n != entries.len() || n > MAX_N {
            return Err(LinalgError::InvalidInput(format!(
                "{} entries do not form a square matrix of size <= {MAX_N}",
                entries.len()
            )));
        }
        let mut m = Self::zeros(n);
        m.e[..n * n].copy_from_slice(entries);
        Ok(m)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row-major view of the `n²` live entries.
    #[inline]
    pub fn entries(&self) -> &[C64] {
        &self.e[..self.n * self.n]
    }

    #[inline]
    pub fn entries_mut(&mut self) -> &mut [C64] {
        let k = self.n * self.n;
        &mut self.e[..k]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.e[j * n + i] = self.e[i * n + j].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.e[i * self.n + i]).sum()
    }

    pub fn frob_norm_sqr(&self) -> f64 {
        self.entries().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sqr().sqrt()
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut m = *self;
        m.entries_mut().iter_mut().for_each(|z| *z *= a);
        m
    }

    pub fn scale_c(&self, a: C64) -> Self {
        let mut m = *self;
        m.entries_mut().iter_mut().for_each(|z| *z *= a);
        m
    }

    /// `self += a * x`.
    #[inline]
    pub fn axpy(&mut self, a: f64, x: &CMat) {
        debug_assert_eq!(self.n, x.n);
        let k = self.n * self.n;
        for (s, v) in self.e[..k].iter_mut().zip(&x.e[..k]) {
            *s += v * a;
        }
    }

    /// Matrix product without dimension checks beyond a debug assertion.
    #[inline]
    pub fn matmul(&self, rhs: &CMat) -> CMat {
        debug_assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = CMat { n, e: [C64::new(0.0, 0.0); MAX_N * MAX_N] };
        for i in 0..n {
            for k in 0..n {
                let a = self.e[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.e[i * n + j] += a * rhs.e[k * n + j];
                }
            }
        }
        out
    }

    /// `self += alpha · a · b`, in place.
    #[inline]
    pub fn add_scaled_matmul(&mut self, alpha: f64, a: &CMat, b: &CMat) {
        debug_assert!(self.n == a.n && a.n == b.n);
        let n = self.n;
        for i in 0..n {
            for k in 0..n {
                let x = a.e[i * n + k] * alpha;
                if x.re == 0.0 && x.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    self.e[i * n + j] += x * b.e[k * n + j];
                }
            }
        }
    }

    /// `XY - YX`, unchecked.
    #[inline]
    pub fn bracket(&self, rhs: &CMat) -> CMat {
        self.matmul(rhs) - rhs.matmul(self)
    }

    /// Frobenius norm of `M + M†`.
    pub fn anti_hermitian_defect(&self) -> f64 {
        (*self + self.adjoint()).frob_norm()
    }

    /// Frobenius norm of `M - M†`.
    pub fn hermitian_defect(&self) -> f64 {
        (*self - self.adjoint()).frob_norm()
    }

    /// Frobenius norm of `U†U - I`.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint().matmul(self) - CMat::identity(self.n)).frob_norm()
    }

    /// Anti-Hermitian part `(M - M†)/2`.
    pub fn anti_hermitian_part(&self) -> CMat {
        (*self - self.adjoint()).scale(0.5)
    }

    /// Largest entrywise distance; useful in tests.
    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Serialised as rows of `[re, im]` pairs.
impl serde::Serialize for CMat {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> =
            (0..self.n).map(|r| (0..self.n).map(|c| [self[(r, c)].re, self[(r, c)].im]).collect()).collect();
        serde::Serialize::serialize(&rows, serializer)
    }
}

impl<'de> serde::Deserialize<'de> for CMat {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = serde::Deserialize::deserialize(deserializer)?;
        let n = rows.len();
        if n == 0 || n > MAX_N || rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom(format!("expected a square matrix of size 1..={MAX_N}")));
        }
        Ok(CMat::from_fn(n, |r, c| c64(rows[r][c][0], rows[r][c][1])))
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.n && j < self.n);
        &self.e[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.n && j < self.n);
        &mut self.e[i * self.n + j]
    }
}

impl Add for CMat {
    type Output = CMat;
    #[inline]
    fn add(mut self, rhs: CMat) -> CMat {
        self += rhs;
        self
    }
}

impl AddAssign for CMat {
    #[inline]
    fn add_assign(&mut self, rhs: CMat) {
        debug_assert_eq!(self.n, rhs.n);
        let k = self.n * self.n;
        for (a, b) in self.e[..k].iter_mut().zip(&rhs.e[..k]) {
            *a += b;
        }
    }
}

impl Sub for CMat {
    type Output = CMat;
    #[inline]
    fn sub(mut self, rhs: CMat) -> CMat {
        self -= rhs;
        self
    }
}

impl SubAssign for CMat {
    #[inline]
    fn sub_assign(&mut self, rhs: CMat) {
        debug_assert_eq!(self.n, rhs.n);
        let k = self.n * self.n;
        for (a, b) in self.e[..k].iter_mut().zip(&rhs.e[..k]) {
            *a -= b;
        }
    }
}

impl Neg for CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.scale(-1.0)
    }
}

impl Mul for CMat {
    type Output = CMat;
    #[inline]
    fn mul(self, rhs: CMat) -> CMat {
        self.matmul(&rhs)
    }
}

impl Mul<f64> for CMat {
    type Output = CMat;
    #[inline]
    fn mul(self, a: f64) -> CMat {
        self.scale(a)
    }
}

impl MulAssign<f64> for CMat {
    fn mul_assign(&mut self, a: f64) {
        self.entries_mut().iter_mut().for_each(|z| *z *= a);
    }
}

impl Mul<C64> for CMat {
    type Output = CMat;
    fn mul(self, a: C64) -> CMat {
        self.scale_c(a)
    }
}

/// Element of `u(N)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AntiHermitian(CMat);

impl AntiHermitian {
    pub fn new(m: CMat) -> Result<Self, LinalgError> {
        Self::with_tolerance(m, ANTI_HERMITIAN_TOL)
    }

    pub fn with_tolerance(m: CMat, tol: f64) -> Result<Self, LinalgError> {
        if !m.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let defect = m.anti_hermitian_defect();
        if defect > tol * m.frob_norm().max(1.0) {
            return Err(LinalgError::NotAntiHermitian { defect });
        }
        Ok(AntiHermitian(m))
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_mat(self) -> CMat {
        self.0
    }
}

/// Element of `U(N)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary(CMat);

impl Unitary {
    pub fn new(m: CMat) -> Result<Self, LinalgError> {
        Self::with_tolerance(m, UNITARY_TOL)
    }

    pub fn with_tolerance(m: CMat, tol: f64) -> Result<Self, LinalgError> {
        if !m.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let defect = m.unitarity_defect();
        if defect > tol {
            return Err(LinalgError::NotUnitary { defect });
        }
        Ok(Unitary(m))
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_mat(self) -> CMat {
        self.0
    }

    pub fn inverse(&self) -> Unitary {
        Unitary(self.0.adjoint())
    }
}

/// `XY - YX`.
pub fn commutator(x: &CMat, y: &CMat) -> Result<CMat, LinalgError> {
    if x.dim() != y.dim() {
        return Err(LinalgError::DimensionMismatch { left: x.dim(), right: y.dim() });
    }
    Ok(x.bracket(y))
}

/// Matrix exponential of an anti-Hermitian matrix.
pub fn mat_exp(x: &AntiHermitian) -> Unitary {
    Unitary(exp_anti_hermitian(x.as_mat()))
}

/// Checked variant of [`mat_exp`] taking a raw matrix.
pub fn mat_exp_checked(x: &CMat) -> Result<Unitary, LinalgError> {
    AntiHermitian::new(*x).map(|a| mat_exp(&a))
}

/// Eigen-decomposition of a Hermitian matrix: `H = V diag(λ) V†`.
///
/// Cyclic complex Jacobi. Only the Hermitian part of `h` is used.
pub fn hermitian_eigen(h: &CMat) -> ([f64; MAX_N], CMat) {
    let n = h.dim();
    let mut a = (*h + h.adjoint()).scale(0.5);
    let mut v = CMat::identity(n);
    let mut w = [0.0; MAX_N];
    if n == 1 {
        w[0] = a[(0, 0)].re;
        return (w, v);
    }
    let scale = a.frob_norm();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let b = a[(p, q)];
                let babs = b.norm();
                if babs <= 1e-300 {
                    continue;
                }
                let phase = b / babs;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * babs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // W acts on the (p, q) plane: phase-rotate q, then real Jacobi rotation.
                let wpp = C64::new(c, 0.0);
                let wpq = C64::new(s, 0.0);
                let wqp = -phase.conj() * s;
                let wqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * wpp + akq * wqp;
                    a[(k, q)] = akp * wpq + akq * wqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = wpp.conj() * apk + wqp.conj() * aqk;
                    a[(q, k)] = wpq.conj() * apk + wqq.conj() * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * wpp + vkq * wqp;
                    v[(k, q)] = vkp * wpq + vkq * wqq;
                }
            }
        }
    }
    for (i, wi) in w.iter_mut().enumerate().take(n) {
        *wi = a[(i, i)].re;
    }
    (w, v)
}

/// Applies `f` to the spectrum of a Hermitian matrix: `V diag(f(λ)) V†`.
pub fn hermitian_function(h: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let n = h.dim();
    let (w, v) = hermitian_eigen(h);
    let mut out = CMat::zeros(n);
    for k in 0..n {
        let fk = f(w[k]);
        for i in 0..n {
            let vik = v[(i, k)] * fk;
            for j in 0..n {
                out[(i, j)] += vik * v[(j, k)].conj();
            }
        }
    }
    out
}

/// `exp(X)` for anti-Hermitian `X`, via diagonalisation of the Hermitian `-iX`.
pub fn exp_anti_hermitian(x: &CMat) -> CMat {
    if x.dim() == 1 {
        let z = x[(0, 0)];
        // Drop any real part so the result stays on U(1).
        return CMat::scalar(1, C64::from_polar(1.0, z.im));
    }
    let h = x.scale_c(C64::new(0.0, -1.0));
    hermitian_function(&h, |lam| C64::from_polar(1.0, lam))
}

/// Nearest unitary matrix in Frobenius norm: `M (M†M)^{-1/2}`.
pub fn polar_unitary(m: &CMat) -> CMat {
    let gram = m.adjoint().matmul(m);
    let inv_sqrt = hermitian_function(&gram, |lam| C64::new(1.0 / lam.max(1e-300).sqrt(), 0.0));
    m.matmul(&inv_sqrt)
}

/// Pauli matrices `σ₁, σ₂, σ₃`.
pub fn pauli() -> [CMat; 3] {
    let o = c64(0.0, 0.0);
    let one = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    [
        CMat::from_row_major(&[o, one, one, o]).unwrap(),
        CMat::from_row_major(&[o, -i, i, o]).unwrap(),
        CMat::from_row_major(&[one, o, o, -one]).unwrap(),
    ]
}

/// Anti-Hermitian `su(2)` basis `T_a = -(i/2) σ_a`, with `[T_a, T_b] = ε_abc T_c`.
pub fn su2_basis() -> [CMat; 3] {
    let s = pauli();
    let f = c64(0.0, -0.5);
    [s[0] * f, s[1] * f, s[2] * f]
}
