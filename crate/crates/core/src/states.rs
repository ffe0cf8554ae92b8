//! Pure and mixed states plus the exact closeness measures that every
//! estimator is scored against.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{herm_eig, singular_values, trace_norm, CMat, CVec, LinalgError, C64};
use crate::rng::{rng_from_seed, SimRng};

/// Largest qubit count accepted by [`haar_random`] unless overridden.
pub const DEFAULT_MAX_QUBITS: usize = 3;

const NORM_TOL: f64 = 1e-12;
const DENSITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("dimension {0} is not a power of two >= 2")]
    BadDimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("trace is not 1 (got {0})")]
    BadTrace(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("non-finite amplitude")]
    NonFinite,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, StateError>;

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(StateError::BadDimension(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Unit vector on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: CVec,
    n_qubits: usize,
}

impl PureState {
    /// Validates length `2^n` and unit norm to `1e-12`.
    pub fn new(amplitudes: CVec) -> Result<Self> {
        let n_qubits = qubits_for_dim(amplitudes.len())?;
        if !amplitudes.is_finite() {
            return Err(StateError::NonFinite);
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(PureState { amplitudes, n_qubits })
    }

    pub fn from_unnormalized(amplitudes: CVec) -> Result<Self> {
        if !amplitudes.is_finite() {
            return Err(StateError::NonFinite);
        }
        let v = amplitudes.normalized().ok_or(StateError::NotNormalized(0.0))?;
        Self::new(v)
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(CVec::from_real(amplitudes))
    }

    /// Computational basis state `|index⟩` on `n` qubits.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 || index >= 1 << n_qubits {
            return Err(StateError::OutOfRange(format!("|{index}⟩ on {n_qubits} qubits")));
        }
        Ok(PureState { amplitudes: CVec::basis(1 << n_qubits, index), n_qubits })
    }

    pub fn zero() -> Self {
        PureState { amplitudes: CVec::basis(2, 0), n_qubits: 1 }
    }

    pub fn one() -> Self {
        PureState { amplitudes: CVec::basis(2, 1), n_qubits: 1 }
    }

    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        PureState { amplitudes: CVec::from_real(&[h, h]), n_qubits: 1 }
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(StateError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self.amplitudes.inner(&other.amplitudes))
    }

    pub fn with_global_phase(&self, theta: f64) -> PureState {
        PureState {
            amplitudes: self.amplitudes.scale(C64::from_polar(1.0, theta)),
            n_qubits: self.n_qubits,
        }
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        PureState {
            amplitudes: self.amplitudes.tensor(&other.amplitudes),
            n_qubits: self.n_qubits + other.n_qubits,
        }
    }

    pub fn projector(&self) -> CMat {
        self.amplitudes.projector()
    }

    pub fn density(&self) -> DensityOp {
        DensityOp { matrix: self.projector(), n_qubits: self.n_qubits }
    }

    /// Amplitudes as `[re, im]` pairs, the serialized form used in configs and dumps.
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.amplitudes.iter().map(|z| [z.re, z.im]).collect()
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        Self::new(CVec::new(pairs.iter().map(|p| C64::new(p[0], p[1])).collect()))
    }
}

impl Serialize for PureState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        PureState::from_pairs(&pairs).map_err(serde::de::Error::custom)
    }
}

/// `√(1−x²)|0⟩ + x|1⟩` for `x ∈ [0, 1]`.
pub fn psi_x(x: f64) -> Result<PureState> {
    if !(0.0..=1.0).contains(&x) {
        return Err(StateError::OutOfRange(format!("psi_x requires 0 <= x <= 1, got {x}")));
    }
    let c = (1.0 - x * x).max(0.0).sqrt();
    PureState::from_unnormalized(CVec::from_real(&[c, x]))
}

/// Haar-random `n`-qubit state from a fresh generator seeded with `seed`.
pub fn haar_random(n_qubits: usize, seed: u64) -> Result<PureState> {
    haar_random_with(n_qubits, DEFAULT_MAX_QUBITS, &mut rng_from_seed(seed))
}

/// Haar-random state drawn from a caller-owned generator: a normalized vector
/// of independent standard complex Gaussians.
pub fn haar_random_with(n_qubits: usize, max_qubits: usize, rng: &mut SimRng) -> Result<PureState> {
    if n_qubits == 0 || n_qubits > max_qubits {
        return Err(StateError::OutOfRange(format!(
            "haar_random supports 1..={max_qubits} qubits, got {n_qubits}"
        )));
    }
    let dim = 1usize << n_qubits;
    let v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    PureState::from_unnormalized(CVec::new(v))
}

/// Hermitian, PSD, unit-trace operator on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOp {
    matrix: CMat,
    n_qubits: usize,
}

impl DensityOp {
    /// Validates Hermiticity, unit trace and PSD, each to `1e-10`.
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() {
            return Err(LinalgError::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() }.into());
        }
        let n_qubits = qubits_for_dim(matrix.nrows())?;
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(StateError::BadTrace(tr.re));
        }
        let eig = herm_eig(&matrix)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -DENSITY_TOL {
            return Err(StateError::NotPsd(min));
        }
        Ok(DensityOp { matrix: matrix.hermitian_part(), n_qubits })
    }

    /// Wraps a simulator output without the eigenvalue check. The caller
    /// guarantees the matrix came from a CPTP evolution of a valid state.
    pub fn from_matrix_unchecked(matrix: CMat) -> Self {
        let n_qubits = matrix.nrows().trailing_zeros() as usize;
        DensityOp { matrix, n_qubits }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        DensityOp { matrix: CMat::identity(d).scale_real(1.0 / d as f64), n_qubits }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    /// The underlying ket when `ρ` is rank one (purity within `1e-10` of 1).
    pub fn pure_vector(&self) -> Option<CVec> {
        if (self.purity() - 1.0).abs() > DENSITY_TOL {
            return None;
        }
        herm_eig(&self.matrix).ok().map(|e| e.vectors[0].clone())
    }

    fn check_same_dim(&self, other: &DensityOp) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(StateError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }
}

impl From<&PureState> for DensityOp {
    fn from(p: &PureState) -> Self {
        p.density()
    }
}

/// `½ tr|ρ − σ|`.
pub fn trace_distance_exact(a: &DensityOp, b: &DensityOp) -> Result<f64> {
    a.check_same_dim(b)?;
    let diff = &a.matrix - &b.matrix;
    Ok((0.5 * trace_norm(&diff)).clamp(0.0, 1.0))
}

/// PSD square root with eigenvalues in `[-1e-10, 0)` clamped to zero.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let eig = herm_eig(m)?;
    if let Some(&min) = eig.values.last() {
        if min < -DENSITY_TOL {
            return Err(StateError::NotPsd(min));
        }
    }
    Ok(eig.map_values(|l| l.max(0.0).sqrt()))
}

/// Uhlmann fidelity `tr √(√σ ρ √σ)`, evaluated as `‖√ρ √σ‖_tr`.
///
/// When either argument is pure this reduces to `√⟨ψ|σ|ψ⟩`, which is used
/// directly to avoid square roots of round-off eigenvalues.
pub fn fidelity_exact(a: &DensityOp, b: &DensityOp) -> Result<f64> {
    a.check_same_dim(b)?;
    let f = if let Some(v) = a.pure_vector() {
        expectation(&b.matrix, &v).max(0.0).sqrt()
    } else if let Some(v) = b.pure_vector() {
        expectation(&a.matrix, &v).max(0.0).sqrt()
    } else {
        let prod = &psd_sqrt(&a.matrix)? * &psd_sqrt(&b.matrix)?;
        singular_values(&prod).iter().sum()
    };
    Ok(f.clamp(0.0, 1.0))
}

fn expectation(m: &CMat, v: &CVec) -> f64 {
    v.inner(&m.mat_vec(v)).re
}

/// Trace distance of two kets, `√(1 − |⟨φ|ψ⟩|²)`.
pub fn pure_trace_distance(phi: &PureState, psi: &PureState) -> Result<f64> {
    let f = phi.overlap(psi)?.norm().min(1.0);
    Ok((1.0 - f * f).max(0.0).sqrt())
}

/// Fidelity of two kets, `|⟨φ|ψ⟩|`.
pub fn pure_fidelity(phi: &PureState, psi: &PureState) -> Result<f64> {
    Ok(phi.overlap(psi)?.norm().min(1.0))
}

pub(crate) fn check_unit(v: &CVec) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(StateError::NotNormalized(n));
    }
    Ok(())
}
