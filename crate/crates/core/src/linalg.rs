//! Dense complex vectors and matrices.
//!
//! Everything here is row-major and value-semantic. Dimensions stay at desk
//! scale (at most a few thousand), so the kernels are plain loops; the
//! circuit backends never materialize full-width gate matrices and instead
//! use the fiber kernels in [`crate::circuits`].
//!
//! Hermitian eigendecomposition and singular values are delegated to
//! `nalgebra`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Relative Frobenius tolerance below which a matrix counts as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (relative deviation {0:e})")]
    NotHermitian(f64),
    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Complex column vector.
#[derive(Clone, PartialEq)]
pub struct CVec(Vec<C64>);

impl CVec {
    pub fn new(data: Vec<C64>) -> Self {
        CVec(data)
    }

    pub fn zeros(dim: usize) -> Self {
        CVec(vec![ZERO; dim])
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = ONE;
        v
    }

    pub fn from_real(data: &[f64]) -> Self {
        CVec(data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &CVec) -> C64 {
        assert_eq!(self.len(), other.len(), "inner product of unequal lengths");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, s: C64) -> CVec {
        CVec(self.0.iter().map(|z| z * s).collect())
    }

    /// Unit vector in the same direction, or `None` for a (numerically) zero vector.
    pub fn normalized(&self) -> Option<CVec> {
        let n = self.norm();
        if n < 1e-300 {
            None
        } else {
            Some(self.scale(C64::new(1.0 / n, 0.0)))
        }
    }

    /// Outer product `|self⟩⟨other|`.
    pub fn outer(&self, other: &CVec) -> CMat {
        CMat::from_fn(self.len(), other.len(), |i, j| self.0[i] * other.0[j].conj())
    }

    pub fn projector(&self) -> CMat {
        self.outer(self)
    }

    /// Kronecker product of two vectors.
    pub fn tensor(&self, other: &CVec) -> CVec {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.0 {
            for b in &other.0 {
                out.push(a * b);
            }
        }
        CVec(out)
    }

    pub fn distance(&self, other: &CVec) -> f64 {
        (self - other).norm()
    }
}

impl fmt::Debug for CVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Index<usize> for CVec {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVec {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl Add for &CVec {
    type Output = CVec;
    fn add(self, rhs: &CVec) -> CVec {
        assert_eq!(self.len(), rhs.len());
        CVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &CVec {
    type Output = CVec;
    fn sub(self, rhs: &CVec) -> CVec {
        assert_eq!(self.len(), rhs.len());
        CVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        CMat { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diag(entries: &[C64]) -> Self {
        let d = entries.len();
        let mut m = Self::zeros(d, d);
        for (i, &z) in entries.iter().enumerate() {
            m.data[i * d + i] = z;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> CVec {
        CVec((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> CMat {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &CMat, tol: f64) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.max_abs_diff(other) <= tol
    }

    /// `‖M − M†‖_F / ‖M‖_F` (absolute when `M` is zero).
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                dev += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        let scale = self.frobenius_norm();
        if scale > 0.0 {
            dev.sqrt() / scale
        } else {
            dev.sqrt()
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && (&self.adjoint() * self).approx_eq(&CMat::identity(self.rows), tol)
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn mat_vec(&self, v: &CVec) -> CVec {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        CVec(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    pub fn matmul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `M^exponent` by repeated squaring; `M^0 = I`.
    pub fn pow(&self, mut exponent: u64) -> CMat {
        assert!(self.is_square(), "power of a non-square matrix");
        let mut result = CMat::identity(self.rows);
        let mut base = self.clone();
        while exponent > 0 {
            if exponent & 1 == 1 {
                result = &result * &base;
            }
            exponent >>= 1;
            if exponent > 0 {
                base = &base * &base;
            }
        }
        result
    }
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.scale_real(-1.0)
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        self.matmul(rhs)
    }
}

impl Mul<&CVec> for &CMat {
    type Output = CVec;
    fn mul(self, rhs: &CVec) -> CVec {
        self.mat_vec(rhs)
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.rows, a.cols, b.rows, b.cols);
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                let dst = (i * br + k) * out.cols + j * bc;
                for l in 0..bc {
                    out.data[dst + l] = s * b.data[k * bc + l];
                }
            }
        }
    }
    out
}

/// Kronecker product of a sequence of matrices, left to right.
pub fn tensor_all<'a>(mats: impl IntoIterator<Item = &'a CMat>) -> CMat {
    mats.into_iter()
        .fold(CMat::identity(1), |acc, m| tensor(&acc, m))
}

/// Traces out every subsystem not listed in `keep`.
///
/// `dims` lists subsystem dimensions with the first subsystem most
/// significant; `keep` must be strictly increasing. Kept subsystems retain
/// their relative order.
pub fn partial_trace(m: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare { rows: m.rows, cols: m.cols });
    }
    let total: usize = dims.iter().product();
    if total != m.rows {
        return Err(LinalgError::DimensionMismatch { expected: m.rows, found: total });
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(LinalgError::InvalidSubsystems(format!(
            "keep {keep:?} must be strictly increasing indices into {} subsystems",
            dims.len()
        )));
    }

    // Stride of each subsystem in the global index.
    let mut strides = vec![1usize; dims.len()];
    for s in (0..dims.len().saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * dims[s + 1];
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|s| !keep.contains(s)).collect();

    let offsets = |subsystems: &[usize]| -> Vec<usize> {
        let count: usize = subsystems.iter().map(|&s| dims[s]).product();
        (0..count)
            .map(|mut idx| {
                let mut off = 0;
                for &s in subsystems.iter().rev() {
                    off += (idx % dims[s]) * strides[s];
                    idx /= dims[s];
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(keep);
    let traced_off = offsets(&traced);

    let dk = kept_off.len();
    let mut out = CMat::zeros(dk, dk);
    for (r, &ro) in kept_off.iter().enumerate() {
        for (c, &co) in kept_off.iter().enumerate() {
            out.data[r * dk + c] = traced_off.iter().map(|&t| m[(ro + t, co + t)]).sum();
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors matching `values`.
    pub vectors: Vec<CVec>,
}

impl HermEigen {
    pub fn reconstruct(&self) -> CMat {
        let d = self.vectors.first().map_or(0, CVec::len);
        let mut out = CMat::zeros(d, d);
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            out = &out + &v.projector().scale_real(*lambda);
        }
        out
    }

    /// `Σ f(λ_i) v_i v_i†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d = self.vectors.first().map_or(0, CVec::len);
        let mut out = CMat::zeros(d, d);
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            let w = f(*lambda);
            if w != 0.0 {
                out = &out + &v.projector().scale_real(w);
            }
        }
        out
    }
}

fn to_nalgebra(m: &CMat) -> DMatrix<C64> {
    DMatrix::from_row_slice(m.rows, m.cols, &m.data)
}

/// Hermitian eigendecomposition. Inputs within [`HERMITIAN_TOL`] of
/// Hermitian are symmetrized first.
pub fn herm_eig(m: &CMat) -> Result<HermEigen> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare { rows: m.rows, cols: m.cols });
    }
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian(dev));
    }
    let d = m.rows;
    if d == 0 {
        return Ok(HermEigen { values: vec![], vectors: vec![] });
    }
    let eig = to_nalgebra(&m.hermitian_part()).symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| CVec((0..d).map(|i| eig.eigenvectors[(i, k)]).collect()))
        .collect();
    Ok(HermEigen { values, vectors })
}

/// Singular values, unordered.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    to_nalgebra(m).singular_values().iter().copied().collect()
}

/// Trace (nuclear) norm: the sum of singular values.
///
/// Hermitian inputs use `Σ|λ_i|` from [`herm_eig`]; everything else goes
/// through an SVD. Panics on a non-square input.
pub fn trace_norm(m: &CMat) -> f64 {
    assert!(m.is_square(), "trace norm of a non-square {}x{} matrix", m.rows, m.cols);
    match herm_eig(m) {
        Ok(eig) => eig.values.iter().map(|l| l.abs()).sum(),
        Err(_) => singular_values(m).iter().sum(),
    }
}

/// Eigenvalues of a 2×2 matrix from the characteristic polynomial.
pub fn eigvals_2x2(m: &CMat) -> [C64; 2] {
    assert!(m.nrows() == 2 && m.ncols() == 2, "eigvals_2x2 needs a 2x2 matrix");
    let half_tr = (m[(0, 0)] + m[(1, 1)]) * 0.5;
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (half_tr * half_tr - det).sqrt();
    [half_tr + disc, half_tr - disc]
}

/// Pauli and Hadamard matrices used throughout the tests and circuit builders.
pub mod gates {
    use super::*;

    pub fn pauli_x() -> CMat {
        CMat::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn pauli_y() -> CMat {
        CMat::from_vec(2, 2, vec![ZERO, -I, I, ZERO])
    }

    pub fn pauli_z() -> CMat {
        CMat::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
    }

    pub fn hadamard() -> CMat {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        CMat::from_real(2, 2, &[h, h, h, -h])
    }

    /// SWAP of two registers of dimension `d` each: `|a⟩|b⟩ ↦ |b⟩|a⟩`.
    pub fn swap(d: usize) -> CMat {
        let mut s = CMat::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                s[(b * d + a, a * d + b)] = ONE;
            }
        }
        s
    }

    /// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ u`.
    pub fn controlled(u: &CMat) -> CMat {
        let d = u.dim();
        let mut out = CMat::zeros(2 * d, 2 * d);
        for i in 0..d {
            out[(i, i)] = ONE;
            for j in 0..d {
                out[(d + i, d + j)] = u[(i, j)];
            }
        }
        out
    }

    /// `diag(1, e^{iθ})`-controlled phase on two qubits: `diag(1, 1, 1, e^{iθ})`.
    pub fn controlled_phase(theta: f64) -> CMat {
        CMat::diag(&[ONE, ONE, ONE, C64::from_polar(1.0, theta)])
    }
}
