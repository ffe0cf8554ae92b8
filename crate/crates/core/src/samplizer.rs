//! Density-matrix exponentiation (LMR) channels standing in for reflection
//! oracles, their round calibration, and the circuit-level samplizer.
//!
//! One LMR round adjoins a fresh copy `σ = |ψ⟩⟨ψ|`, applies `e^{iSΔ}`
//! (that is `partial_swap(−Δ)`) and discards the copy:
//!
//! `E_Δ(ρ) = cos²Δ ρ + sin²Δ tr(ρ) σ + i cosΔ sinΔ [σ, ρ]`,
//!
//! which agrees with `e^{iΔσ} ρ e^{−iΔσ}` to first order. With `Δ = π/r`,
//! `r` rounds approximate `e^{iπσ} = R_ψ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use crate::channel::choi_distance;
use crate::channel::{Channel, ChannelError};
use crate::circuits::{run_density, CircuitError, DensityBindings, OracleCircuit};
use crate::linalg::{gates, partial_trace, tensor, CMat, C64, I};
use crate::reflections::householder;
use crate::states::{DensityOp, PureState};

pub const DEFAULT_ROUND_CAP: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplizeError {
    #[error("rounds must be at least 1")]
    ZeroRounds,
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("round cap {cap} reached with Choi distance {distance:.3e} above target {target:.3e}")]
    CapExceeded { cap: u64, distance: f64, target: f64 },
    #[error("oracle {0} has no state bound")]
    MissingState(usize),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

pub type Result<T> = std::result::Result<T, SamplizeError>;

/// `cos Δ · I − i sin Δ · S` on two `n`-qubit registers.
pub fn partial_swap(n_qubits: usize, delta: f64) -> CMat {
    let d = 1usize << n_qubits;
    let s = gates::swap(d);
    &CMat::identity(d * d).scale_real(delta.cos()) + &s.scale(-I * delta.sin())
}

/// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ e^{−iSΔ}`, control first.
pub fn controlled_partial_swap(n_qubits: usize, delta: f64) -> CMat {
    gates::controlled(&partial_swap(n_qubits, delta))
}

/// `r` rounds of step `Δ = π/r`, total evolution time π.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmrConfig {
    pub rounds: u64,
    pub delta_step: f64,
    pub controlled: bool,
}

impl LmrConfig {
    pub fn new(rounds: u64, controlled: bool) -> Result<Self> {
        if rounds == 0 {
            return Err(SamplizeError::ZeroRounds);
        }
        Ok(LmrConfig { rounds, delta_step: PI / rounds as f64, controlled })
    }
}

/// One round applied by brute force: tensor on the copy, conjugate by the
/// (controlled) partial swap on the full space, trace the copy out.
pub fn lmr_round_literal(rho: &CMat, psi: &PureState, delta: f64, controlled: bool) -> CMat {
    let n = psi.n_qubits();
    let d_copy = psi.dim();
    let d_local = rho.nrows();
    let v = if controlled { controlled_partial_swap(n, -delta) } else { partial_swap(n, -delta) };
    let joint = tensor(rho, &psi.projector());
    let evolved = &(&v * &joint) * &v.adjoint();
    partial_trace(&evolved, &[d_local, d_copy], &[0]).expect("dimensions are consistent by construction")
}

/// One round via the closed form; `ρ` lives on `[control,] system`.
fn lmr_round_closed(rho: &CMat, sigma: &CMat, delta: f64, controlled: bool) -> CMat {
    let (c, s) = (delta.cos(), delta.sin());
    let plain = |r: &CMat| -> CMat {
        let comm = &(sigma * r) - &(r * sigma);
        let mut out = &r.scale_real(c * c) + &sigma.scale(r.trace() * (s * s));
        out = &out + &comm.scale(I * (c * s));
        out
    };
    if !controlled {
        return plain(rho);
    }
    let d = sigma.nrows();
    let block = |bi: usize, bj: usize| CMat::from_fn(d, d, |i, j| rho[(bi * d + i, bj * d + j)]);
    let r01 = block(0, 1);
    let r10 = block(1, 0);
    let n01 = &r01.scale_real(c) - &(&r01 * sigma).scale(I * s);
    let n10 = &r10.scale_real(c) + &(sigma * &r10).scale(I * s);
    let n11 = plain(&block(1, 1));
    CMat::from_fn(2 * d, 2 * d, |i, j| match (i / d, j / d) {
        (0, 0) => rho[(i, j)],
        (0, 1) => n01[(i, j - d)],
        (1, 0) => n10[(i - d, j)],
        _ => n11[(i - d, j - d)],
    })
}

fn superop_of(dim: usize, f: impl Fn(&CMat) -> CMat) -> CMat {
    let n = dim * dim;
    let mut s = CMat::zeros(n, n);
    for k in 0..dim {
        for l in 0..dim {
            let mut e = CMat::zeros(dim, dim);
            e[(k, l)] = C64::new(1.0, 0.0);
            let out = f(&e);
            for i in 0..dim {
                for j in 0..dim {
                    s[(i * dim + j, k * dim + l)] = out[(i, j)];
                }
            }
        }
    }
    s
}

fn local_dim(psi: &PureState, controlled: bool) -> usize {
    if controlled { 2 * psi.dim() } else { psi.dim() }
}

/// Superoperator of a single round.
pub fn lmr_round_superop(psi: &PureState, delta: f64, controlled: bool) -> CMat {
    let sigma = psi.projector();
    superop_of(local_dim(psi, controlled), |e| lmr_round_closed(e, &sigma, delta, controlled))
}

/// Same superoperator assembled from [`lmr_round_literal`].
pub fn lmr_round_superop_literal(psi: &PureState, delta: f64, controlled: bool) -> CMat {
    superop_of(local_dim(psi, controlled), |e| lmr_round_literal(e, psi, delta, controlled))
}

/// The composed `r`-round channel and the number of copies it consumes (`r`).
pub fn lmr_channel(psi: &PureState, cfg: &LmrConfig) -> Result<(Channel, u64)> {
    if cfg.rounds == 0 {
        return Err(SamplizeError::ZeroRounds);
    }
    let round = lmr_round_superop(psi, cfg.delta_step, cfg.controlled);
    let label = format!("lmr(r={}{})", cfg.rounds, if cfg.controlled { ",controlled" } else { "" });
    Ok((Channel::from_superop(round.pow(cfg.rounds), label)?, cfg.rounds))
}

/// Conjugation by `R_ψ` or its controlled version.
pub fn exact_reflection_channel(psi: &PureState, controlled: bool) -> Channel {
    let r = householder(psi).expect("pure states are normalized").into_matrix();
    if controlled {
        Channel::unitary(gates::controlled(&r), "cR")
    } else {
        Channel::unitary(r, "R")
    }
}

pub fn lmr_error(psi: &PureState, rounds: u64, controlled: bool) -> Result<f64> {
    let (lmr, _) = lmr_channel(psi, &LmrConfig::new(rounds, controlled)?)?;
    Ok(choi_distance(&lmr, &exact_reflection_channel(psi, controlled))?)
}

/// Smallest power-of-two `r ≤ cap` whose LMR channel is within Choi
/// distance `delta/2` of the exact (controlled) reflection.
///
/// The error is non-increasing in `r`; the search starts from an
/// extrapolated guess and walks to the boundary.
pub fn calibrate_rounds(psi: &PureState, delta: f64, controlled: bool, cap: u64) -> Result<LmrConfig> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SamplizeError::InvalidDelta(delta));
    }
    let target = delta / 2.0;
    let max_exp = 63 - cap.max(1).leading_zeros();
    let mut seen: BTreeMap<u32, f64> = BTreeMap::new();
    let mut err_at = |e: u32| -> Result<f64> {
        if let Some(&v) = seen.get(&e) {
            return Ok(v);
        }
        let v = lmr_error(psi, 1 << e, controlled)?;
        seen.insert(e, v);
        Ok(v)
    };
    let probe = 4.min(max_exp);
    let probe_err = err_at(probe)?;
    let mut e = if probe_err <= target {
        probe
    } else {
        let guess = probe as f64 + (probe_err / target).log2().ceil();
        (guess as u32).clamp((probe + 1).min(max_exp), max_exp)
    };
    while err_at(e)? > target {
        if e == max_exp {
            return Err(SamplizeError::CapExceeded { cap, distance: err_at(e)?, target });
        }
        e += 1;
    }
    while e > 0 && err_at(e - 1)? <= target {
        e -= 1;
    }
    LmrConfig::new(1 << e, controlled)
}

/// Hex SHA-256 of the amplitudes as little-endian `(re, im)` pairs.
pub fn state_hash(psi: &PureState) -> String {
    let mut h = Sha256::new();
    for z in psi.amplitudes().iter() {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub state_hash: String,
    pub controlled: bool,
    pub delta: f64,
    pub rounds: u64,
}

/// Memoized calibration, safe to share between threads.
///
/// Both LMR and the exact reflection are covariant under `ψ ↦ Uψ`, and the
/// Choi distance is invariant under local unitaries, so the calibrated `r`
/// depends only on the qubit count, the control flag and `δ`. The memo is
/// keyed on those and computed for `|0…0⟩`.
#[derive(Debug)]
pub struct Calibrator {
    cap: u64,
    memo: Mutex<BTreeMap<(usize, bool, u64), u64>>,
    records: Mutex<BTreeMap<(String, bool, u64), u64>>,
}

impl Default for Calibrator {
    fn default() -> Self {
        Self::new(DEFAULT_ROUND_CAP)
    }
}

impl Calibrator {
    pub fn new(cap: u64) -> Self {
        Calibrator { cap, memo: Mutex::new(BTreeMap::new()), records: Mutex::new(BTreeMap::new()) }
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn calibrate(&self, psi: &PureState, delta: f64, controlled: bool) -> Result<LmrConfig> {
        let key = (psi.n_qubits(), controlled, delta.to_bits());
        let cached = self.memo.lock().expect("calibration memo poisoned").get(&key).copied();
        let rounds = match cached {
            Some(r) => r,
            None => {
                let canonical = PureState::basis(psi.n_qubits(), 0).expect("qubit count already validated");
                let r = calibrate_rounds(&canonical, delta, controlled, self.cap)?.rounds;
                *self.memo.lock().expect("calibration memo poisoned").entry(key).or_insert(r)
            }
        };
        self.records
            .lock()
            .expect("calibration log poisoned")
            .insert((state_hash(psi), controlled, delta.to_bits()), rounds);
        LmrConfig::new(rounds, controlled)
    }

    pub fn records(&self) -> Vec<CalibrationRecord> {
        self.records
            .lock()
            .expect("calibration log poisoned")
            .iter()
            .map(|((hash, controlled, delta), &rounds)| CalibrationRecord {
                state_hash: hash.clone(),
                controlled: *controlled,
                delta: f64::from_bits(*delta),
                rounds,
            })
            .collect()
    }

    pub fn dump_json(&self) -> String {
        serde_json::to_string_pretty(&self.records()).expect("records are plain data")
    }
}

/// Copies consumed per oracle (`S_j`), plus copies used as circuit input.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleLedger {
    per_oracle: BTreeMap<usize, u64>,
    pub input_copies: u64,
}

impl SampleLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, oracle: usize, copies: u64) {
        *self.per_oracle.entry(oracle).or_insert(0) += copies;
    }

    pub fn oracle(&self, oracle: usize) -> u64 {
        self.per_oracle.get(&oracle).copied().unwrap_or(0)
    }

    pub fn per_oracle(&self) -> &BTreeMap<usize, u64> {
        &self.per_oracle
    }

    pub fn total(&self) -> u64 {
        self.per_oracle.values().sum::<u64>() + self.input_copies
    }
}

/// Serializes as `{"S1": …, "S2": …, "input_copies": …}`.
impl Serialize for SampleLedger {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.per_oracle.len() + 1))?;
        for (j, count) in &self.per_oracle {
            map.serialize_entry(&format!("S{j}"), count)?;
        }
        map.serialize_entry("input_copies", &self.input_copies)?;
        map.end()
    }
}

/// A circuit whose queries are bound to calibrated LMR channels.
#[derive(Clone, Debug)]
pub struct SamplizedCircuit {
    pub circuit: OracleCircuit,
    pub bindings: DensityBindings,
    pub ledger: SampleLedger,
    /// Calibrated rounds per `(oracle, controlled)`.
    pub rounds: BTreeMap<(usize, bool), u64>,
    /// `δ / Q`, or `δ` when the circuit makes no queries.
    pub per_query_delta: f64,
}

impl SamplizedCircuit {
    pub fn run(&self, input: &DensityOp) -> Result<DensityOp> {
        Ok(run_density(&self.circuit, &self.bindings, input)?)
    }
}

/// Replaces every query to oracle `j` (1-based) by the LMR channel for
/// `states[j-1]`, calibrated at `δ/Q` with `Q` the total query count.
pub fn samplize(c: &OracleCircuit, states: &[PureState], delta: f64, calibrator: &Calibrator) -> Result<SamplizedCircuit> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SamplizeError::InvalidDelta(delta));
    }
    let q_total = c.total_queries();
    let per_query_delta = if q_total == 0 { delta } else { delta / q_total as f64 };
    let mut kinds: BTreeMap<(usize, bool), u64> = BTreeMap::new();
    for it in c.items() {
        if let crate::circuits::Item::Query(q) = it {
            *kinds.entry((q.oracle, q.is_controlled())).or_insert(0) += 1;
        }
    }
    let mut bindings = DensityBindings::new();
    let mut ledger = SampleLedger::new();
    let mut rounds = BTreeMap::new();
    for (&(oracle, controlled), &count) in &kinds {
        let psi = states.get(oracle - 1).ok_or(SamplizeError::MissingState(oracle))?;
        let cfg = calibrator.calibrate(psi, per_query_delta, controlled)?;
        let (channel, copies) = lmr_channel(psi, &cfg)?;
        bindings.insert(oracle, controlled, channel);
        ledger.record(oracle, copies * count);
        rounds.insert((oracle, controlled), copies);
    }
    for j in 1..=states.len() {
        ledger.record(j, 0);
    }
    Ok(SamplizedCircuit { circuit: c.clone(), bindings, ledger, rounds, per_query_delta })
}

/// `(trace-preservation defect, smallest Choi eigenvalue)`.
pub fn cptp_defects(ch: &Channel) -> Result<(f64, f64)> {
    Ok((ch.trace_preservation_defect(), ch.min_choi_eigenvalue()?))
}
