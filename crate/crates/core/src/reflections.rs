//! Householder reflections `R_ψ = I − 2|ψ⟩⟨ψ|` and the closed-form
//! spectrum of a product of two of them.
//!
//! For kets `φ, ψ` with `|⟨φ|ψ⟩| ≠ 1`, write `γ = arcsin|⟨φ|ψ⟩|` and let
//! `φ⊥` be the normalized component of `ψ` orthogonal to `φ`. On
//! `span{φ, φ⊥}` the unitary `R_φ R_ψ` has eigenvectors
//!
//! ```text
//! Φ± = (φ ± e^{i(θ⊥ − θ + π/2)} φ⊥) / √2,   θ = arg⟨φ|ψ⟩,  θ⊥ = arg⟨φ⊥|ψ⟩
//! ```
//!
//! with eigenvalues `e^{i(π ∓ 2γ)}`, and `φ = (Φ₊ + Φ₋)/√2`. Off that plane
//! both reflections act as the identity. This is what lets phase estimation
//! on input `φ` read out `γ`, hence `T = cos γ` and `F = sin γ`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

use crate::linalg::{eigvals_2x2, CMat, CVec, C64};
use crate::states::{check_unit, PureState, StateError};

/// Overlap magnitudes within this distance of 1 are treated as identical states.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReflectionError {
    #[error("states coincide up to a global phase (|<phi|psi>| = {0}); R_phi R_psi is the identity")]
    Degenerate(f64),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Principal argument in `(−π, π]`, with `arg(0) = 0`.
pub fn principal_arg(z: C64) -> f64 {
    if z.norm() == 0.0 {
        return 0.0;
    }
    let a = z.arg();
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// `R_ψ` together with the state it reflects about.
#[derive(Clone, Debug)]
pub struct Reflection {
    matrix: CMat,
    source: PureState,
}

impl Reflection {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn source(&self) -> &PureState {
        &self.source
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    /// `v − 2⟨ψ|v⟩ψ` without touching the matrix.
    pub fn apply(&self, v: &CVec) -> CVec {
        let psi = self.source.amplitudes();
        let c = psi.inner(v) * 2.0;
        v - &psi.scale(c)
    }
}

pub fn householder(psi: &PureState) -> Result<Reflection, ReflectionError> {
    check_unit(psi.amplitudes())?;
    let d = psi.dim();
    let matrix = &CMat::identity(d) - &psi.projector().scale_real(2.0);
    Ok(Reflection { matrix, source: psi.clone() })
}

/// Eigen-structure of `R_φ R_ψ` on the plane spanned by `φ` and `ψ`.
#[derive(Clone, Debug)]
pub struct ProductSpectrum {
    /// `arcsin|⟨φ|ψ⟩| ∈ [0, π/2)`.
    pub gamma: f64,
    pub phi_perp: PureState,
    pub theta: f64,
    pub theta_perp: f64,
    pub phi_plus: CVec,
    pub phi_minus: CVec,
    /// `π − 2γ`.
    pub eigenphase_plus: f64,
    /// `π + 2γ`, kept in `[0, 2π)` rather than as a negative angle.
    pub eigenphase_minus: f64,
}

impl ProductSpectrum {
    /// Phases normalized to `[0, 1)` turns, the values phase estimation targets.
    pub fn phase_turns(&self) -> (f64, f64) {
        (self.eigenphase_plus / (2.0 * PI), self.eigenphase_minus / (2.0 * PI))
    }

    pub fn eigenvalue_plus(&self) -> C64 {
        C64::from_polar(1.0, self.eigenphase_plus)
    }

    pub fn eigenvalue_minus(&self) -> C64 {
        C64::from_polar(1.0, self.eigenphase_minus)
    }
}

pub fn product_spectrum(phi: &PureState, psi: &PureState) -> Result<ProductSpectrum, ReflectionError> {
    check_unit(phi.amplitudes())?;
    check_unit(psi.amplitudes())?;
    let overlap = phi.overlap(psi)?;
    let mag = overlap.norm();
    if (1.0 - mag).abs() < DEGENERATE_TOL {
        return Err(ReflectionError::Degenerate(mag));
    }
    let gamma = mag.min(1.0).asin();

    let (phi_v, psi_v) = (phi.amplitudes(), psi.amplitudes());
    let residual = psi_v - &phi_v.scale(overlap);
    let phi_perp = PureState::from_unnormalized(residual)?;
    let theta = principal_arg(overlap);
    let theta_perp = principal_arg(phi_perp.amplitudes().inner(psi_v));

    let rel = C64::from_polar(1.0, theta_perp - theta + PI / 2.0);
    let rotated = phi_perp.amplitudes().scale(rel);
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let phi_plus = (phi_v + &rotated).scale(s);
    let phi_minus = (phi_v - &rotated).scale(s);

    Ok(ProductSpectrum {
        gamma,
        phi_perp,
        theta,
        theta_perp,
        phi_plus,
        phi_minus,
        eigenphase_plus: PI - 2.0 * gamma,
        eigenphase_minus: PI + 2.0 * gamma,
    })
}

/// `R_φ R_ψ` restricted to the orthonormal basis `{φ, φ⊥}`.
pub fn restricted_product(phi: &PureState, psi: &PureState) -> Result<CMat, ReflectionError> {
    let spec = product_spectrum(phi, psi)?;
    let (r_phi, r_psi) = (householder(phi)?, householder(psi)?);
    let basis = [phi.amplitudes().clone(), spec.phi_perp.amplitudes().clone()];
    let images: Vec<CVec> = basis.iter().map(|b| r_phi.apply(&r_psi.apply(b))).collect();
    Ok(CMat::from_fn(2, 2, |i, j| basis[i].inner(&images[j])))
}

/// Eigenphases of `R_φ R_ψ` on its invariant plane, in `[0, 2π)` ascending,
/// computed by diagonalizing the 2×2 restriction directly.
pub fn restricted_eigenphases(phi: &PureState, psi: &PureState) -> Result<[f64; 2], ReflectionError> {
    let m = restricted_product(phi, psi)?;
    let mut phases = eigvals_2x2(&m).map(|z| z.arg().rem_euclid(2.0 * PI));
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gates::pauli_x;
    use crate::states::{fidelity_exact, haar_random, trace_distance_exact};

    #[test]
    fn householder_of_zero_and_plus() {
        let r0 = householder(&PureState::zero()).unwrap();
        assert!(r0.matrix().approx_eq(&CMat::from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0]), 1e-15));
        let rp = householder(&PureState::plus()).unwrap();
        assert!(rp.matrix().approx_eq(&(-&pauli_x()), 1e-15));
    }

    #[test]
    fn householder_invariants() {
        for seed in 0..30 {
            let psi = haar_random(1 + (seed as usize % 3), seed).unwrap();
            let r = householder(&psi).unwrap();
            let m = r.matrix();
            let d = psi.dim();
            assert!((m * m).approx_eq(&CMat::identity(d), 1e-10));
            assert!(m.approx_eq(&m.adjoint(), 1e-12));
            let image = m.mat_vec(psi.amplitudes());
            assert!(image.distance(&psi.amplitudes().scale(C64::new(-1.0, 0.0))) < 1e-10);

            // fixes the orthogonal complement
            let other = haar_random(psi.n_qubits(), seed + 1000).unwrap();
            let ov = psi.overlap(&other).unwrap();
            let perp = other.amplitudes() - &psi.amplitudes().scale(ov);
            assert!(m.mat_vec(&perp).distance(&perp) < 1e-12);
            assert!(r.apply(&perp).distance(&perp) < 1e-12);
        }
    }

    #[test]
    fn zero_plus_spectrum() {
        let spec = product_spectrum(&PureState::zero(), &PureState::plus()).unwrap();
        assert!((spec.gamma - PI / 4.0).abs() < 1e-15);
        assert!((spec.eigenphase_plus - PI / 2.0).abs() < 1e-15);
        assert!((spec.eigenphase_minus - 3.0 * PI / 2.0).abs() < 1e-15);
        let direct = restricted_eigenphases(&PureState::zero(), &PureState::plus()).unwrap();
        assert!((direct[0] - PI / 2.0).abs() < 1e-12 && (direct[1] - 3.0 * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_spectrum_is_minus_identity() {
        let spec = product_spectrum(&PureState::zero(), &PureState::one()).unwrap();
        assert_eq!(spec.gamma, 0.0);
        assert!((spec.eigenphase_plus - PI).abs() < 1e-15);
        assert!((spec.eigenphase_minus - PI).abs() < 1e-15);
        assert_eq!(spec.theta, 0.0);
    }

    #[test]
    fn degenerate_inputs_error() {
        let psi = haar_random(2, 3).unwrap();
        assert!(matches!(product_spectrum(&psi, &psi), Err(ReflectionError::Degenerate(_))));
        assert!(matches!(
            product_spectrum(&psi, &psi.with_global_phase(1.1)),
            Err(ReflectionError::Degenerate(_))
        ));
    }

    #[test]
    fn eigenvectors_match_full_product() {
        for seed in 0..60u64 {
            let n = 1 + (seed % 3) as usize;
            let phi = haar_random(n, 2 * seed).unwrap();
            let psi = haar_random(n, 2 * seed + 1).unwrap();
            let spec = product_spectrum(&phi, &psi).unwrap();
            let prod = householder(&phi).unwrap().matrix() * householder(&psi).unwrap().matrix();
            for (v, lambda) in [
                (&spec.phi_plus, spec.eigenvalue_plus()),
                (&spec.phi_minus, spec.eigenvalue_minus()),
            ] {
                assert!((v.norm() - 1.0).abs() < 1e-12);
                assert!(prod.mat_vec(v).distance(&v.scale(lambda)) <= 1e-9);
            }
            assert!(spec.phi_plus.inner(&spec.phi_minus).norm() < 1e-10);
            assert!(spec.phi_perp.amplitudes().inner(phi.amplitudes()).norm() < 1e-10);
            let rebuilt = (&spec.phi_plus + &spec.phi_minus).scale(C64::new(FRAC_1_SQRT_2, 0.0));
            assert!(rebuilt.distance(phi.amplitudes()) <= 1e-10);

            let t = trace_distance_exact(&phi.density(), &psi.density()).unwrap();
            let f = fidelity_exact(&phi.density(), &psi.density()).unwrap();
            assert!((spec.gamma.sin() - f).abs() < 1e-10);
            assert!((spec.gamma.cos() - t).abs() < 1e-10);

            let direct = restricted_eigenphases(&phi, &psi).unwrap();
            let mut expected = [spec.eigenphase_plus, spec.eigenphase_minus];
            expected.sort_by(f64::total_cmp);
            assert!((direct[0] - expected[0]).abs() < 1e-9 && (direct[1] - expected[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn global_phase_invariance() {
        for seed in 0..20u64 {
            let phi = haar_random(2, 100 + seed).unwrap();
            let psi = haar_random(2, 200 + seed).unwrap();
            let a = product_spectrum(&phi, &psi).unwrap();
            let b = product_spectrum(&phi.with_global_phase(0.7 + seed as f64), &psi).unwrap();
            assert!((a.gamma - b.gamma).abs() < 1e-12);
            assert!((a.eigenphase_plus - b.eigenphase_plus).abs() < 1e-12);
            assert!((a.eigenphase_minus - b.eigenphase_minus).abs() < 1e-12);
        }
    }

    #[test]
    fn principal_arg_branch() {
        assert_eq!(principal_arg(C64::new(0.0, 0.0)), 0.0);
        assert!((principal_arg(C64::new(-1.0, 0.0)) - PI).abs() < 1e-15);
        assert!((principal_arg(C64::new(-1.0, -0.0)) - PI).abs() < 1e-15);
        assert!((principal_arg(C64::new(0.0, -1.0)) + PI / 2.0).abs() < 1e-15);
    }
}
