//! Experiment configuration, read from TOML or JSON.

use std::fmt;
use std::path::{Path, PathBuf};

use samplize_core::circuits::qpe_ancillas;
use samplize_core::estimators::{Method, SAMPLIZED_EPS_FAIL, SAMPLIZED_EPS_FLOOR};
use samplize_core::rng::rng_from_seed;
use samplize_core::states::{haar_random_with, psi_x, PureState, DEFAULT_MAX_QUBITS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_QUBITS: usize = DEFAULT_MAX_QUBITS;
pub const MAX_ANCILLAS: usize = 10;
pub const MAX_DENSITY_WIRES: usize = 11;
pub const MAX_ROUND_CAP: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which pair of states an experiment estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSpec {
    /// `φ = |0⟩`, `ψ = √(1−x²)|0⟩ + x|1⟩`.
    PsiX { x: f64 },
    /// `φ = |0⟩`, `ψ = |+⟩`.
    ZeroPlus,
    /// Two Haar-random states drawn in order from one generator seeded with `seed`.
    Haar {
        seed: u64,
        #[serde(default = "one")]
        qubits: usize,
    },
    /// Amplitudes as `[re, im]` pairs.
    Explicit { phi: PureState, psi: PureState },
}

fn one() -> usize {
    1
}

impl PairSpec {
    pub fn states(&self) -> Result<(PureState, PureState), ConfigError> {
        let invalid = |e: &dyn fmt::Display| ConfigError::Invalid(e.to_string());
        match self {
            PairSpec::PsiX { x } => Ok((PureState::zero(), psi_x(*x).map_err(|e| invalid(&e))?)),
            PairSpec::ZeroPlus => Ok((PureState::zero(), PureState::plus())),
            PairSpec::Haar { seed, qubits } => {
                let mut rng = rng_from_seed(*seed);
                let phi = haar_random_with(*qubits, MAX_QUBITS, &mut rng).map_err(|e| invalid(&e))?;
                let psi = haar_random_with(*qubits, MAX_QUBITS, &mut rng).map_err(|e| invalid(&e))?;
                Ok((phi, psi))
            }
            PairSpec::Explicit { phi, psi } => {
                if phi.n_qubits() != psi.n_qubits() {
                    return Err(ConfigError::Invalid(format!(
                        "explicit states have {} and {} qubits",
                        phi.n_qubits(),
                        psi.n_qubits()
                    )));
                }
                Ok((phi.clone(), psi.clone()))
            }
        }
    }

    /// Value of the `x` column.
    pub fn label(&self) -> String {
        match self {
            PairSpec::PsiX { x } => format!("{x}"),
            PairSpec::ZeroPlus => "zero_plus".into(),
            PairSpec::Haar { seed, .. } => format!("haar:{seed}"),
            PairSpec::Explicit { .. } => "explicit".into(),
        }
    }
}

fn default_round_cap() -> u64 {
    MAX_ROUND_CAP
}

fn default_eps_fail() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub pair: PairSpec,
    /// Target accuracies; for `query` each is the allowed error `delta_err`.
    pub epsilons: Vec<f64>,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_round_cap")]
    pub r_cap: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Failure probability of phase estimation for the `query` method.
    #[serde(default = "default_eps_fail")]
    pub eps_fail: f64,
    /// Fill `wall_ms`; off by default so output bytes depend only on the config.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        Self::from_str_as(&text, json).map_err(|message| ConfigError::Parse { path: path.to_path_buf(), message })
    }

    pub fn from_str_as(text: &str, json: bool) -> Result<Self, String> {
        if json {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }

    /// Ancillas used at accuracy `eps`, or `None` for the SWAP-test baseline.
    pub fn ancillas(&self, eps: f64) -> Option<usize> {
        let eps_fail = match self.method {
            Method::Folklore => return None,
            Method::Query => self.eps_fail,
            Method::Samplized => SAMPLIZED_EPS_FAIL,
        };
        qpe_ancillas(eps_fail, eps / std::f64::consts::PI).ok()
    }

    /// Range checks and desk-scale guardrails.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.epsilons.is_empty() {
            return bad("epsilons must not be empty".into());
        }
        if self.r_cap == 0 || self.r_cap > MAX_ROUND_CAP {
            return bad(format!("r_cap must lie in 1..={MAX_ROUND_CAP}, got {}", self.r_cap));
        }
        if !(self.eps_fail > 0.0 && self.eps_fail < 1.0) {
            return bad(format!("eps_fail must lie in (0, 1), got {}", self.eps_fail));
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        let (phi, _) = self.pair.states()?;
        let n = phi.n_qubits();
        if n > MAX_QUBITS {
            return bad(format!("states have {n} qubits; at most {MAX_QUBITS} are supported"));
        }
        let floor = if self.method == Method::Samplized { SAMPLIZED_EPS_FLOOR } else { 0.0 };
        for &eps in &self.epsilons {
            if !(eps > 0.0 && eps < 1.0) || eps < floor {
                return bad(format!("epsilon {eps} outside [{floor}, 1) for method {}", self.method));
            }
            let Some(t) = self.ancillas(eps) else { continue };
            if t > MAX_ANCILLAS {
                return bad(format!(
                    "epsilon {eps} needs t = {t} ancillas (limit {MAX_ANCILLAS}); the state vector would hold 2^{} amplitudes",
                    t + n
                ));
            }
            if self.method == Method::Samplized && t + n > MAX_DENSITY_WIRES {
                let bytes = 16u128 << (2 * (t + n));
                return bad(format!(
                    "epsilon {eps} needs a {}-wire density matrix ({:.1} MiB per copy; limit {MAX_DENSITY_WIRES} wires)",
                    t + n,
                    bytes as f64 / (1u64 << 20) as f64
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
method = "samplized"
epsilons = [0.4, 0.2]
trials = 3
seed = 11

[pair]
family = "zero_plus"
"#;

    #[test]
    fn toml_and_json_agree() {
        let a = ExperimentConfig::from_str_as(BASE, false).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let b = ExperimentConfig::from_str_as(&json, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.r_cap, MAX_ROUND_CAP);
        assert!(!a.record_timing);
        a.validate().unwrap();
    }

    #[test]
    fn parse_errors_name_the_location() {
        let err = ExperimentConfig::from_str_as("method = \"samplized\"\ntrials = \"many\"\n", false).unwrap_err();
        assert!(err.contains("line 2") || err.contains("trials"), "{err}");
        let err = ExperimentConfig::from_str_as(&format!("bogus = 1\n{BASE}"), false).unwrap_err();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn pair_families() {
        let (phi, psi) = PairSpec::PsiX { x: 0.6 }.states().unwrap();
        assert!((phi.overlap(&psi).unwrap().norm() - 0.8).abs() < 1e-12);
        let h = PairSpec::Haar { seed: 3, qubits: 2 };
        let (a, b) = h.states().unwrap();
        assert_eq!(h.states().unwrap(), (a.clone(), b.clone()));
        assert_ne!(a, b);
        assert_eq!(h.label(), "haar:3");
        assert!(PairSpec::Haar { seed: 1, qubits: 4 }.states().is_err());
        let explicit = PairSpec::Explicit { phi: PureState::zero(), psi: PureState::basis(2, 0).unwrap() };
        assert!(explicit.states().is_err());
    }

    #[test]
    fn guardrails() {
        let mut c = ExperimentConfig::from_str_as(BASE, false).unwrap();
        c.epsilons = vec![0.04];
        assert!(c.validate().is_err());
        c.epsilons = vec![0.05];
        c.pair = PairSpec::Haar { seed: 0, qubits: 3 };
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("12-wire") && msg.contains("MiB"), "{msg}");
        c.method = Method::Query;
        c.epsilons = vec![0.005];
        assert!(c.validate().unwrap_err().to_string().contains("ancillas"));
        c.epsilons = vec![0.05];
        c.validate().unwrap();
        c.trials = 0;
        assert!(c.validate().is_err());
    }
}
