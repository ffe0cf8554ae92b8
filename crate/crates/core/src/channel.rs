//! Quantum channels in Kraus or superoperator form.
//!
//! Superoperators act on row-major vectorized matrices: entry
//! `S[(i·d + j), (k·d + l)]` is the coefficient of `ρ[k][l]` in `E(ρ)[i][j]`,
//! so a Kraus family gives `S = Σ K ⊗ K̄`.

use thiserror::Error;

use crate::linalg::{herm_eig, tensor, trace_norm, CMat, CVec, LinalgError, C64, ONE, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("malformed channel: {0}")]
    Malformed(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ChannelError>;

#[derive(Clone, Debug, PartialEq)]
pub enum ChannelRepr {
    Kraus(Vec<CMat>),
    Superop(CMat),
}

/// A linear map on `d × d` matrices, normally CPTP.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    dim: usize,
    repr: ChannelRepr,
    label: String,
}

impl Channel {
    pub fn from_kraus(kraus: Vec<CMat>, label: impl Into<String>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| ChannelError::Malformed("no Kraus operators".into()))?;
        let dim = first.nrows();
        if kraus.iter().any(|k| k.nrows() != dim || k.ncols() != dim) {
            return Err(ChannelError::Malformed("Kraus operators must be square and equal-sized".into()));
        }
        Ok(Channel { dim, repr: ChannelRepr::Kraus(kraus), label: label.into() })
    }

    pub fn from_superop(superop: CMat, label: impl Into<String>) -> Result<Self> {
        let n = superop.nrows();
        let dim = (n as f64).sqrt().round() as usize;
        if !superop.is_square() || dim * dim != n {
            return Err(ChannelError::Malformed(format!(
                "superoperator must be d^2 x d^2, got {}x{}",
                superop.nrows(),
                superop.ncols()
            )));
        }
        Ok(Channel { dim, repr: ChannelRepr::Superop(superop), label: label.into() })
    }

    /// Conjugation by a unitary.
    pub fn unitary(u: CMat, label: impl Into<String>) -> Self {
        assert!(u.is_square(), "unitary channel needs a square matrix");
        Channel { dim: u.nrows(), repr: ChannelRepr::Kraus(vec![u]), label: label.into() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::unitary(CMat::identity(dim), "identity")
    }

    /// `ρ ↦ tr(ρ) I/d`.
    pub fn completely_depolarizing(dim: usize) -> Self {
        let s = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        let kraus = (0..dim)
            .flat_map(|i| {
                (0..dim).map(move |j| {
                    let mut k = CMat::zeros(dim, dim);
                    k[(i, j)] = s;
                    k
                })
            })
            .collect();
        Channel { dim, repr: ChannelRepr::Kraus(kraus), label: "depolarizing".into() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn repr(&self) -> &ChannelRepr {
        &self.repr
    }

    /// The single Kraus operator of a unitary channel.
    pub fn as_unitary(&self) -> Option<&CMat> {
        match &self.repr {
            ChannelRepr::Kraus(k) if k.len() == 1 => Some(&k[0]),
            _ => None,
        }
    }

    pub fn superop(&self) -> CMat {
        match &self.repr {
            ChannelRepr::Superop(s) => s.clone(),
            ChannelRepr::Kraus(kraus) => {
                let n = self.dim * self.dim;
                kraus.iter().fold(CMat::zeros(n, n), |acc, k| &acc + &tensor(k, &k.conj()))
            }
        }
    }

    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(ChannelError::DimensionMismatch(self.dim, rho.nrows()));
        }
        Ok(match &self.repr {
            ChannelRepr::Kraus(kraus) => kraus
                .iter()
                .fold(CMat::zeros(self.dim, self.dim), |acc, k| &acc + &(&(k * rho) * &k.adjoint())),
            ChannelRepr::Superop(s) => {
                let v = CVec::new(rho.as_slice().to_vec());
                CMat::from_vec(self.dim, self.dim, s.mat_vec(&v).into_inner())
            }
        })
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &Channel) -> Result<Channel> {
        if self.dim != next.dim {
            return Err(ChannelError::DimensionMismatch(self.dim, next.dim));
        }
        let label = format!("{}*{}", next.label, self.label);
        match (self.as_unitary(), next.as_unitary()) {
            (Some(a), Some(b)) => Ok(Channel::unitary(b * a, label)),
            _ => Channel::from_superop(&next.superop() * &self.superop(), label),
        }
    }

    /// Normalized Choi state `(1/d) Σ_{kl} |k⟩⟨l| ⊗ E(|k⟩⟨l|)`.
    pub fn choi_state(&self) -> CMat {
        let d = self.dim;
        let s = self.superop();
        let inv = 1.0 / d as f64;
        CMat::from_fn(d * d, d * d, |r, c| {
            let (k, i) = (r / d, r % d);
            let (l, j) = (c / d, c % d);
            s[(i * d + j, k * d + l)] * inv
        })
    }

    /// Largest entry of `Σ K†K − I`, i.e. the trace-preservation defect.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.dim;
        match &self.repr {
            ChannelRepr::Kraus(kraus) => {
                let sum = kraus.iter().fold(CMat::zeros(d, d), |acc, k| &acc + &(&k.adjoint() * k));
                sum.max_abs_diff(&CMat::identity(d))
            }
            ChannelRepr::Superop(s) => {
                let mut worst = 0.0f64;
                for k in 0..d {
                    for l in 0..d {
                        let tr: C64 = (0..d).map(|i| s[(i * d + i, k * d + l)]).sum();
                        let expected = if k == l { ONE } else { ZERO };
                        worst = worst.max((tr - expected).norm());
                    }
                }
                worst
            }
        }
    }

    /// Smallest eigenvalue of the (Hermitian part of the) Choi state.
    pub fn min_choi_eigenvalue(&self) -> Result<f64> {
        let eig = herm_eig(&self.choi_state().hermitian_part())?;
        Ok(eig.values.last().copied().unwrap_or(0.0))
    }

    /// Kraus decomposition recovered from the Choi eigenvectors; eigenvalues
    /// below `1e-14` are dropped.
    pub fn to_kraus(&self) -> Result<Vec<CMat>> {
        let d = self.dim;
        let eig = herm_eig(&self.choi_state().hermitian_part().scale_real(d as f64))?;
        Ok(eig
            .values
            .iter()
            .zip(&eig.vectors)
            .filter(|(l, _)| **l > 1e-14)
            .map(|(l, v)| {
                let s = l.sqrt();
                CMat::from_fn(d, d, |i, k| v[k * d + i] * s)
            })
            .collect())
    }
}

/// `½‖J(a) − J(b)‖_tr` between normalized Choi states.
///
/// This is a computable stand-in for the diamond distance:
/// `choi_distance ≤ ½‖a − b‖_◇ ≤ d · choi_distance`.
pub fn choi_distance(a: &Channel, b: &Channel) -> Result<f64> {
    if a.dim != b.dim {
        return Err(ChannelError::DimensionMismatch(a.dim, b.dim));
    }
    let diff = &a.choi_state() - &b.choi_state();
    Ok(0.5 * trace_norm(&diff.hermitian_part()))
}
