//! Trace-distance and fidelity estimators for a pair of pure states.
//!
//! * `folklore`: repeated SWAP tests estimate `F²`, then `T = √(1 − F²)`.
//! * `query`: phase estimation of `R_φ R_ψ` on input `φ` with exact
//!   reflection oracles.
//! * `samplized`: the same circuit with every oracle replaced by its LMR
//!   channel, run on density matrices.
//!
//! The phase-estimation methods read `γ̃ ∈ [0, 1)` and return
//! `T̂ = |cos(πγ̃ − π/2)|`, `F̂ = |sin(πγ̃ − π/2)|`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{qpe_ancillas, qpe_circuit, run_pure, sample_index, CircuitError, MeasurementOutcome, PrefixMarginal, PureBindings};
use crate::reflections::{householder, DEGENERATE_TOL};
use crate::rng::rng_from_seed;
use crate::samplizer::{samplize, Calibrator, SampleLedger, SamplizeError};
use crate::states::{pure_fidelity, pure_trace_distance, trace_distance_exact, DensityOp, PureState, StateError};

/// `C_f` in the SWAP-test count `N = ⌈C_f / ε⁴⌉`.
pub const FOLKLORE_CONSTANT: f64 = 2.0;
pub const SAMPLIZED_EPS_FLOOR: f64 = 0.05;
/// Failure probability of the phase estimation inside the samplized estimator.
pub const SAMPLIZED_EPS_FAIL: f64 = 0.1;
/// End-to-end channel budget of the samplized estimator.
pub const SAMPLIZED_DELTA: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("{name} must lie in (0, 1), got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("epsilon {eps} is below the floor {floor}")]
    BelowFloor { eps: f64, floor: f64 },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Samplize(#[from] SamplizeError),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(EstimatorError::OutOfRange { name, value })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Folklore,
    Query,
    Samplized,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Folklore, Method::Query, Method::Samplized];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Folklore => "folklore",
            Method::Query => "query",
            Method::Samplized => "samplized",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method '{s}' (expected folklore, query or samplized)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub method: Method,
    #[serde(rename = "T_hat")]
    pub t_hat: f64,
    #[serde(rename = "F_hat")]
    pub f_hat: f64,
    pub gamma_tilde: Option<f64>,
    pub ledger: SampleLedger,
    pub seed: u64,
    pub t: Option<usize>,
    pub rounds_per_query: Option<u64>,
    /// Queries to each oracle (`2^t − 1` for phase estimation).
    pub queries_per_oracle: Option<u64>,
}

/// `(T̂, F̂) = (|cos(πγ̃ − π/2)|, |sin(πγ̃ − π/2)|) = (|sin πγ̃|, |cos πγ̃|)`;
/// the second form is exact at `γ̃ = 0`.
pub fn postprocess(gamma_tilde: f64) -> (f64, f64) {
    let a = PI * gamma_tilde;
    (a.sin().abs(), a.cos().abs())
}

/// Exact `(T, F)` of two pure states.
pub fn exact_tf(phi: &PureState, psi: &PureState) -> Result<(f64, f64)> {
    Ok((pure_trace_distance(phi, psi)?, pure_fidelity(phi, psi)?))
}

/// Probability that the SWAP test outputs 0: `½ + ½|⟨φ|ψ⟩|²`.
pub fn swap_test_prob(phi: &PureState, psi: &PureState) -> Result<f64> {
    let f2 = phi.overlap(psi)?.norm_sqr().min(1.0);
    Ok(0.5 + 0.5 * f2)
}

pub fn folklore_runs(eps: f64, c_f: f64) -> u64 {
    (c_f / eps.powi(4)).ceil() as u64
}

pub fn folklore_estimate(phi: &PureState, psi: &PureState, eps: f64, seed: u64) -> Result<Estimate> {
    folklore_estimate_with(phi, psi, eps, FOLKLORE_CONSTANT, seed)
}

/// `N = ⌈C_f/ε⁴⌉` SWAP tests, each consuming one copy of both states.
pub fn folklore_estimate_with(phi: &PureState, psi: &PureState, eps: f64, c_f: f64, seed: u64) -> Result<Estimate> {
    check_unit_interval("epsilon", eps)?;
    let p = swap_test_prob(phi, psi)?;
    let n = folklore_runs(eps, c_f);
    let zeros = Binomial::new(n, p).expect("p lies in [1/2, 1]").sample(&mut rng_from_seed(seed));
    let p_hat = zeros as f64 / n as f64;
    let f2 = (2.0 * p_hat - 1.0).clamp(0.0, 1.0);
    let mut ledger = SampleLedger::new();
    ledger.record(1, n);
    ledger.record(2, n);
    Ok(Estimate {
        method: Method::Folklore,
        t_hat: (1.0 - f2).sqrt(),
        f_hat: f2.sqrt(),
        gamma_tilde: None,
        ledger,
        seed,
        t: None,
        rounds_per_query: None,
        queries_per_oracle: None,
    })
}

/// Outcome distribution of one phase-estimation estimator instance.
///
/// Preparing is the expensive part; [`QpePlan::sample`] then draws
/// independent estimates, each charged the full ledger.
#[derive(Clone, Debug)]
pub struct QpePlan {
    method: Method,
    t: usize,
    distribution: Vec<f64>,
    ledger: SampleLedger,
    rounds_per_query: Option<u64>,
    queries_per_oracle: u64,
}

fn reflection_bindings(phi: &PureState, psi: &PureState) -> Result<PureBindings> {
    let mut b = PureBindings::new();
    b.insert(1, householder(phi).map_err(|e| CircuitError::InvalidParameter(e.to_string()))?.into_matrix());
    b.insert(2, householder(psi).map_err(|e| CircuitError::InvalidParameter(e.to_string()))?.into_matrix());
    Ok(b)
}

impl QpePlan {
    /// Exact oracles, `t` from `eps_fail` and phase precision `delta_err/π`.
    /// States equal up to phase skip the circuit: `R_φR_ψ = I` yields `γ̃ = 0`.
    pub fn query(phi: &PureState, psi: &PureState, eps_fail: f64, delta_err: f64) -> Result<Self> {
        check_unit_interval("eps_fail", eps_fail)?;
        check_unit_interval("delta_err", delta_err)?;
        let t = qpe_ancillas(eps_fail, delta_err / PI)?;
        let c = qpe_circuit(t, phi.n_qubits(), 2)?;
        let overlap = phi.overlap(psi)?.norm();
        let q = c.query_count(1);
        let distribution = if overlap >= 1.0 - DEGENERATE_TOL {
            let mut d = vec![0.0; 1 << t];
            d[0] = 1.0;
            d
        } else {
            let input = PureState::basis(t, 0)?.tensor(phi);
            run_pure(&c, &reflection_bindings(phi, psi)?, &input)?.prefix_distribution(t)?
        };
        let mut ledger = SampleLedger::new();
        ledger.record(1, 0);
        ledger.record(2, 0);
        Ok(QpePlan {
            method: Method::Query,
            t,
            distribution,
            ledger,
            rounds_per_query: None,
            queries_per_oracle: q,
        })
    }

    /// LMR-samplized phase estimation with failure probability 1/10,
    /// phase precision `ε/π`, channel budget 1/10, and input `|0⟩^t ⊗ φ`.
    pub fn samplized(phi: &PureState, psi: &PureState, eps: f64, calibrator: &Calibrator) -> Result<Self> {
        check_unit_interval("epsilon", eps)?;
        if eps < SAMPLIZED_EPS_FLOOR {
            return Err(EstimatorError::BelowFloor { eps, floor: SAMPLIZED_EPS_FLOOR });
        }
        phi.overlap(psi)?;
        let t = qpe_ancillas(SAMPLIZED_EPS_FAIL, eps / PI)?;
        let c = qpe_circuit(t, phi.n_qubits(), 2)?;
        let s = samplize(&c, &[phi.clone(), psi.clone()], SAMPLIZED_DELTA, calibrator)?;
        let input = DensityOp::from(&PureState::basis(t, 0)?.tensor(phi));
        let distribution = s.run(&input)?.prefix_distribution(t)?;
        let mut ledger = s.ledger.clone();
        ledger.input_copies = 1;
        Ok(QpePlan {
            method: Method::Samplized,
            t,
            distribution,
            ledger,
            rounds_per_query: s.rounds.get(&(1, true)).copied(),
            queries_per_oracle: c.query_count(1),
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// `p(m)` over the `2^t` ancilla outcomes.
    pub fn distribution(&self) -> &[f64] {
        &self.distribution
    }

    pub fn ledger(&self) -> &SampleLedger {
        &self.ledger
    }

    /// Probability that both estimates land within `tol` of `(t_true, f_true)`.
    pub fn success_probability(&self, t_true: f64, f_true: f64, tol: f64) -> f64 {
        self.distribution
            .iter()
            .enumerate()
            .filter(|(m, _)| {
                let (th, fh) = postprocess(*m as f64 / (1u64 << self.t) as f64);
                (th - t_true).abs() <= tol && (fh - f_true).abs() <= tol
            })
            .map(|(_, p)| p.max(0.0))
            .sum()
    }

    pub fn sample(&self, seed: u64) -> Estimate {
        let m = sample_index(&self.distribution, &mut rng_from_seed(seed));
        let outcome = MeasurementOutcome::from_index(m, self.t);
        let (t_hat, f_hat) = postprocess(outcome.gamma_tilde);
        Estimate {
            method: self.method,
            t_hat,
            f_hat,
            gamma_tilde: Some(outcome.gamma_tilde),
            ledger: self.ledger.clone(),
            seed,
            t: Some(self.t),
            rounds_per_query: self.rounds_per_query,
            queries_per_oracle: Some(self.queries_per_oracle),
        }
    }
}

pub fn query_estimate(phi: &PureState, psi: &PureState, eps_fail: f64, delta_err: f64, seed: u64) -> Result<Estimate> {
    Ok(QpePlan::query(phi, psi, eps_fail, delta_err)?.sample(seed))
}

pub fn samplized_estimate(phi: &PureState, psi: &PureState, eps: f64, seed: u64, calibrator: &Calibrator) -> Result<Estimate> {
    Ok(QpePlan::samplized(phi, psi, eps, calibrator)?.sample(seed))
}

/// Optimal single-copy discrimination probability with equal priors.
pub fn helstrom_success(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(StateError::DimensionMismatch(rho.dim(), sigma.dim()).into());
    }
    Ok(0.5 + 0.5 * trace_distance_exact(rho, sigma)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{haar_random, psi_x};
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn swap_test_probabilities() {
        let plus = PureState::plus();
        assert!((swap_test_prob(&plus, &plus).unwrap() - 1.0).abs() < 1e-15);
        assert!((swap_test_prob(&PureState::zero(), &PureState::one()).unwrap() - 0.5).abs() < 1e-15);
        assert!((swap_test_prob(&PureState::zero(), &plus).unwrap() - 0.75).abs() < 1e-15);
        assert!(swap_test_prob(&PureState::zero(), &haar_random(2, 1).unwrap()).is_err());
    }

    #[test]
    fn folklore_identical_states_and_ledger() {
        let psi = haar_random(2, 4).unwrap();
        for seed in 0..5 {
            let e = folklore_estimate(&psi, &psi, 0.3, seed).unwrap();
            assert_eq!((e.t_hat, e.f_hat), (0.0, 1.0));
        }
        for eps in [0.4, 0.3, 0.2] {
            let e = folklore_estimate(&PureState::zero(), &PureState::plus(), eps, 1).unwrap();
            assert_eq!(e.ledger.total(), 2 * (2.0 / eps.powi(4)).ceil() as u64);
        }
        assert!(folklore_estimate(&psi, &psi, 1.0, 0).is_err());
    }

    #[test]
    fn folklore_accuracy() {
        let (phi, psi) = (PureState::zero(), psi_x(0.6).unwrap());
        let truth = trace_distance_exact(&phi.density(), &psi.density()).unwrap();
        let hits = (0..200)
            .filter(|&s| (folklore_estimate(&phi, &psi, 0.2, s).unwrap().t_hat - truth).abs() <= 0.2)
            .count();
        assert!(hits >= 180, "{hits}");
    }

    #[test]
    fn postprocess_identity() {
        for k in 0..=64 {
            let (t, f) = postprocess(k as f64 / 64.0);
            assert!((t * t + f * f - 1.0).abs() < 1e-15);
        }
        assert_eq!(postprocess(0.0), (0.0, 1.0));
        for g in [0.1, 0.37, 0.5, 0.93] {
            let a = PI * g - std::f64::consts::FRAC_PI_2;
            let (t, f) = postprocess(g);
            assert!((t - a.cos().abs()).abs() < 1e-15 && (f - a.sin().abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn query_equal_states_short_circuit() {
        let psi = haar_random(2, 8).unwrap();
        let e = query_estimate(&psi, &psi.with_global_phase(0.4), 0.1, 0.05, 3).unwrap();
        assert_eq!((e.t_hat, e.f_hat, e.gamma_tilde), (0.0, 1.0, Some(0.0)));
        assert_eq!(e.queries_per_oracle, Some((1 << e.t.unwrap()) - 1));
    }

    #[test]
    fn query_zero_plus_is_exact() {
        for seed in 0..20 {
            let e = query_estimate(&PureState::zero(), &PureState::plus(), 0.1, 0.05, seed).unwrap();
            let g = e.gamma_tilde.unwrap();
            assert!(g == 0.25 || g == 0.75);
            assert!((e.t_hat - FRAC_1_SQRT_2).abs() < 1e-10 && (e.f_hat - FRAC_1_SQRT_2).abs() < 1e-10);
            assert_eq!(e.t, Some(9));
            assert_eq!(e.ledger.total(), 0);
        }
    }

    #[test]
    fn exactly_representable_phase_is_deterministic() {
        // |⟨φ|ψ⟩| = sin(π/8): (½ − γ/π)·2^t = 3·2^{t−3}
        let s = (PI / 8.0).sin();
        let phi = PureState::zero();
        let psi = PureState::from_real(&[s, (1.0 - s * s).sqrt()]).unwrap();
        let plan = QpePlan::query(&phi, &psi, 0.2, 0.3).unwrap();
        let (t_true, f_true) = exact_tf(&phi, &psi).unwrap();
        assert!((plan.success_probability(t_true, f_true, 1e-12) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn query_success_probability_on_random_pairs() {
        for seed in 0..10 {
            let phi = haar_random(1 + seed as usize % 3, 100 + seed).unwrap();
            let psi = haar_random(phi.n_qubits(), 200 + seed).unwrap();
            let (t, f) = exact_tf(&phi, &psi).unwrap();
            let plan = QpePlan::query(&phi, &psi, 0.1, 0.05).unwrap();
            assert!(plan.success_probability(t, f, 0.05) >= 0.9, "seed {seed}");
            assert!((plan.distribution().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn samplized_plan_contracts() {
        let cal = Calibrator::default();
        let (phi, psi) = (PureState::zero(), PureState::plus());
        let plan = QpePlan::samplized(&phi, &psi, 0.25, &cal).unwrap();
        assert_eq!(plan.t(), 7);
        assert!(plan.success_probability(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.25) >= 2.0 / 3.0);
        let r = plan.sample(0).rounds_per_query.unwrap();
        let q = (1u64 << 7) - 1;
        assert_eq!(plan.ledger().oracle(1), r * q);
        assert_eq!(plan.ledger().oracle(2), r * q);
        assert_eq!(plan.ledger().total(), 2 * r * q + 1);

        let same = QpePlan::samplized(&phi, &phi, 0.3, &cal).unwrap();
        assert!(same.distribution()[0] >= 0.8);

        assert!(matches!(
            QpePlan::samplized(&phi, &psi, 0.04, &cal),
            Err(EstimatorError::BelowFloor { .. })
        ));
    }

    #[test]
    fn estimate_json_shape() {
        let cal = Calibrator::default();
        let e = samplized_estimate(&PureState::zero(), &PureState::plus(), 0.4, 7, &cal).unwrap();
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        for key in ["method", "T_hat", "F_hat", "gamma_tilde", "seed", "t", "rounds_per_query"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["method"], "samplized");
        assert_eq!(v["ledger"]["input_copies"], 1);
        assert!(v["ledger"]["S1"].as_u64().unwrap() > 0);
    }

    #[test]
    fn helstrom_values() {
        let zero = PureState::zero().density();
        assert!((helstrom_success(&zero, &zero).unwrap() - 0.5).abs() < 1e-12);
        assert!((helstrom_success(&zero, &PureState::one().density()).unwrap() - 1.0).abs() < 1e-12);
        for eps in [0.1, 0.5, 0.9] {
            let p = helstrom_success(&zero, &psi_x(eps).unwrap().density()).unwrap();
            assert!((p - (0.5 + eps / 2.0)).abs() < 1e-12);
        }
        assert!(helstrom_success(&zero, &DensityOp::maximally_mixed(2)).is_err());
    }

    #[test]
    fn method_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("swap".parse::<Method>().is_err());
    }
}
