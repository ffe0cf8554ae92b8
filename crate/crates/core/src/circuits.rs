//! Circuits with oracle placeholders, the QFT and phase-estimation builders,
//! and two execution backends.
//!
//! Wire 0 is the most significant bit of a basis index. Gates and channels
//! are applied fiber by fiber on the wires they touch; the full `2^N`-wide
//! operator is never formed. Consecutive items on the same wire list are
//! composed into one local operator first, and a run that repeats a short
//! block (the `2^j` query pairs of phase estimation) is raised to a power by
//! squaring. The query model is unchanged by this: every placeholder is
//! still an item of the circuit and is counted as such.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::channel::Channel;
use crate::linalg::{gates, tensor, CMat, CVec, C64, ZERO};
use crate::rng::SimRng;
use crate::states::{DensityOp, PureState};

pub const MAX_QFT_WIRES: usize = 12;
/// Density-matrix runs allocate `16 · 4^N` bytes; beyond this they are refused.
pub const MAX_DENSITY_WIRES: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("wire {wire} out of range for a {n_wires}-wire circuit")]
    WireOutOfRange { wire: usize, n_wires: usize },
    #[error("wire {0} appears twice in one item")]
    DuplicateWire(usize),
    #[error("gate {name} acts on {wires} wire(s) and needs a {expected}x{expected} matrix")]
    GateShape { name: String, wires: usize, expected: usize },
    #[error("oracle {oracle} ({kind}) is not bound")]
    Unbound { oracle: usize, kind: &'static str },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{wires} wires exceed the density-matrix limit of {limit} ({bytes} bytes per state)")]
    TooLarge { wires: usize, limit: usize, bytes: u128 },
}

pub type Result<T> = std::result::Result<T, CircuitError>;

#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteGate {
    pub name: String,
    pub wires: Vec<usize>,
    pub matrix: CMat,
}

/// Placeholder for one query to oracle `oracle` (1-based).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OracleQuery {
    pub oracle: usize,
    pub control: Option<usize>,
    pub targets: Vec<usize>,
}

impl OracleQuery {
    pub fn is_controlled(&self) -> bool {
        self.control.is_some()
    }

    /// Control wire (if any) followed by the targets.
    pub fn wires(&self) -> Vec<usize> {
        self.control.iter().copied().chain(self.targets.iter().copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Gate(ConcreteGate),
    Query(OracleQuery),
}

impl Item {
    pub fn wires(&self) -> Vec<usize> {
        match self {
            Item::Gate(g) => g.wires.clone(),
            Item::Query(q) => q.wires(),
        }
    }
}

/// Ordered items, leftmost applied first.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCircuit {
    n_wires: usize,
    items: Vec<Item>,
}

impl OracleCircuit {
    pub fn new(n_wires: usize) -> Self {
        OracleCircuit { n_wires, items: Vec::new() }
    }

    pub fn n_wires(&self) -> usize {
        self.n_wires
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    fn check_wires(&self, wires: &[usize]) -> Result<()> {
        for (i, &w) in wires.iter().enumerate() {
            if w >= self.n_wires {
                return Err(CircuitError::WireOutOfRange { wire: w, n_wires: self.n_wires });
            }
            if wires[..i].contains(&w) {
                return Err(CircuitError::DuplicateWire(w));
            }
        }
        Ok(())
    }

    pub fn push_gate(&mut self, name: impl Into<String>, wires: &[usize], matrix: CMat) -> Result<&mut Self> {
        let name = name.into();
        self.check_wires(wires)?;
        let expected = 1usize << wires.len();
        if wires.is_empty() || matrix.nrows() != expected || matrix.ncols() != expected {
            return Err(CircuitError::GateShape { name, wires: wires.len(), expected });
        }
        self.items.push(Item::Gate(ConcreteGate { name, wires: wires.to_vec(), matrix }));
        Ok(self)
    }

    pub fn push_query(&mut self, oracle: usize, control: Option<usize>, targets: &[usize]) -> Result<&mut Self> {
        if oracle == 0 {
            return Err(CircuitError::InvalidParameter("oracle indices start at 1".into()));
        }
        if targets.is_empty() {
            return Err(CircuitError::InvalidParameter("a query needs target wires".into()));
        }
        let q = OracleQuery { oracle, control, targets: targets.to_vec() };
        self.check_wires(&q.wires())?;
        self.items.push(Item::Query(q));
        Ok(self)
    }

    /// Appends `QFT_t†` on `wires` (most significant first) as Hadamards,
    /// controlled phases and swaps.
    pub fn push_qft_inv(&mut self, wires: &[usize]) -> Result<&mut Self> {
        let t = wires.len();
        for i in 0..t / 2 {
            self.push_gate("SWAP", &[wires[i], wires[t - 1 - i]], gates::swap(2))?;
        }
        for i in (0..t).rev() {
            for j in (i + 1..t).rev() {
                let k = j - i + 1;
                self.push_gate(format!("CP(-2pi/2^{k})"), &[wires[j], wires[i]], gates::controlled_phase(-2.0 * PI / (1u64 << k) as f64))?;
            }
            self.push_gate("H", &[wires[i]], gates::hadamard())?;
        }
        Ok(self)
    }

    pub fn query_count(&self, oracle: usize) -> u64 {
        self.items
            .iter()
            .filter(|it| matches!(it, Item::Query(q) if q.oracle == oracle))
            .count() as u64
    }

    /// `Q_j` for every oracle index that appears.
    pub fn query_counts(&self) -> BTreeMap<usize, u64> {
        let mut counts = BTreeMap::new();
        for it in &self.items {
            if let Item::Query(q) = it {
                *counts.entry(q.oracle).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn total_queries(&self) -> u64 {
        self.query_counts().values().sum()
    }

    /// One line per item: `GATE name wires…` or `QUERY j controlled ctrl targets…`
    /// (`QUERY j plain targets…` when uncontrolled).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for it in &self.items {
            match it {
                Item::Gate(g) => {
                    let _ = write!(out, "GATE {}", g.name);
                    for w in &g.wires {
                        let _ = write!(out, " {w}");
                    }
                }
                Item::Query(q) => {
                    let _ = write!(out, "QUERY {}", q.oracle);
                    match q.control {
                        Some(c) => {
                            let _ = write!(out, " controlled {c}");
                        }
                        None => out.push_str(" plain"),
                    }
                    for w in &q.targets {
                        let _ = write!(out, " {w}");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

fn check_qft_size(t: usize) -> Result<()> {
    if !(1..=MAX_QFT_WIRES).contains(&t) {
        return Err(CircuitError::InvalidParameter(format!("QFT width must be in 1..={MAX_QFT_WIRES}, got {t}")));
    }
    Ok(())
}

/// `QFT_t : |j⟩ ↦ 2^{-t/2} Σ_k e^{2πi jk/2^t} |k⟩`.
pub fn qft(t: usize) -> Result<CMat> {
    check_qft_size(t)?;
    let d = 1usize << t;
    let s = 1.0 / (d as f64).sqrt();
    Ok(CMat::from_fn(d, d, |k, j| {
        let phase = 2.0 * PI * ((j * k) % d) as f64 / d as f64;
        C64::from_polar(s, phase)
    }))
}

pub fn qft_inv(t: usize) -> Result<CMat> {
    Ok(qft(t)?.adjoint())
}

/// Phase estimation of `U₁U₂⋯U_k` with `t` ancillas (wires `0..t`) on an
/// `n_system`-qubit register (wires `t..t+n`).
///
/// The ancilla carrying bit weight `2^j` (wire `t−1−j`) controls `2^j`
/// sequential copies of the block `U_k, …, U₂, U₁` (so `U_k` acts first),
/// each a separate query; hence `Q_i = 2^t − 1` for every oracle.
pub fn qpe_circuit(t: usize, n_system: usize, k: usize) -> Result<OracleCircuit> {
    check_qft_size(t)?;
    if n_system == 0 || k == 0 {
        return Err(CircuitError::InvalidParameter("qpe needs a system register and at least one oracle".into()));
    }
    let mut c = OracleCircuit::new(t + n_system);
    let system: Vec<usize> = (t..t + n_system).collect();
    for w in 0..t {
        c.push_gate("H", &[w], gates::hadamard())?;
    }
    for j in 0..t {
        let control = t - 1 - j;
        for _ in 0..(1u64 << j) {
            for oracle in (1..=k).rev() {
                c.push_query(oracle, Some(control), &system)?;
            }
        }
    }
    let ancillas: Vec<usize> = (0..t).collect();
    c.push_qft_inv(&ancillas)?;
    Ok(c)
}

/// Ancilla count for phase estimation that fails with probability at most
/// `eps_fail` and otherwise lands within `delta_phase` (in turns):
/// `t = ⌈log₂(1/δ)⌉ + ⌈log₂(2 + 1/(2ε))⌉`.
pub fn qpe_ancillas(eps_fail: f64, delta_phase: f64) -> Result<usize> {
    if !(eps_fail > 0.0 && eps_fail < 1.0) || !(delta_phase > 0.0 && delta_phase < 1.0) {
        return Err(CircuitError::InvalidParameter(format!(
            "need 0 < eps_fail, delta_phase < 1 (got {eps_fail}, {delta_phase})"
        )));
    }
    let p = (1.0 / delta_phase).log2().ceil() as usize;
    let extra = (2.0 + 1.0 / (2.0 * eps_fail)).log2().ceil() as usize;
    Ok(p + extra)
}

/// Unitaries bound to oracle indices for [`run_pure`]. Controlled queries
/// use `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ U` built from the same matrix.
pub type PureBindings = BTreeMap<usize, CMat>;

/// Channels bound to `(oracle, controlled)` for [`run_density`]. A
/// controlled binding acts on the control wire followed by the targets.
#[derive(Clone, Debug, Default)]
pub struct DensityBindings {
    map: BTreeMap<(usize, bool), Channel>,
}

impl DensityBindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, oracle: usize, controlled: bool, channel: Channel) -> &mut Self {
        self.map.insert((oracle, controlled), channel);
        self
    }

    pub fn get(&self, oracle: usize, controlled: bool) -> Option<&Channel> {
        self.map.get(&(oracle, controlled))
    }

    /// Exact unitary channels, plain and controlled, for every bound unitary.
    pub fn from_unitaries(bindings: &PureBindings) -> Self {
        let mut out = Self::new();
        for (&j, u) in bindings {
            out.insert(j, false, Channel::unitary(u.clone(), format!("U{j}")));
            out.insert(j, true, Channel::unitary(gates::controlled(u), format!("cU{j}")));
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, bool), &Channel)> {
        self.map.iter()
    }
}

/// Index bookkeeping for applying a local operator on `wires`.
struct Fibers {
    /// Global offset of each local basis index (first listed wire most significant).
    offsets: Vec<usize>,
    /// Global indices with every listed wire at zero.
    bases: Vec<usize>,
}

impl Fibers {
    fn new(n_wires: usize, wires: &[usize]) -> Self {
        let w = wires.len();
        let bit = |wire: usize| 1usize << (n_wires - 1 - wire);
        let offsets = (0..1usize << w)
            .map(|l| {
                wires
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| (l >> (w - 1 - b)) & 1 == 1)
                    .map(|(_, &wire)| bit(wire))
                    .sum()
            })
            .collect();
        let mask: usize = wires.iter().map(|&wire| bit(wire)).sum();
        let bases = (0..1usize << n_wires).filter(|i| i & mask == 0).collect();
        Fibers { offsets, bases }
    }
}

fn apply_unitary_vec(amps: &mut [C64], f: &Fibers, u: &CMat) {
    let dl = f.offsets.len();
    let mut x = vec![ZERO; dl];
    for &base in &f.bases {
        for (xi, off) in x.iter_mut().zip(&f.offsets) {
            *xi = amps[base + off];
        }
        for (i, off) in f.offsets.iter().enumerate() {
            amps[base + off] = u.row(i).iter().zip(&x).map(|(a, b)| a * b).sum();
        }
    }
    debug_assert_eq!(dl, u.nrows());
}

fn apply_unitary_density(rho: &mut CMat, f: &Fibers, u: &CMat) {
    let d = rho.nrows();
    let dl = f.offsets.len();
    let mut x = vec![ZERO; dl];
    // ρ ← U ρ
    for col in 0..d {
        for &base in &f.bases {
            for (xi, off) in x.iter_mut().zip(&f.offsets) {
                *xi = rho[(base + off, col)];
            }
            for (i, off) in f.offsets.iter().enumerate() {
                rho[(base + off, col)] = u.row(i).iter().zip(&x).map(|(a, b)| a * b).sum();
            }
        }
    }
    // ρ ← ρ U†
    for row in 0..d {
        for &base in &f.bases {
            for (xi, off) in x.iter_mut().zip(&f.offsets) {
                *xi = rho[(row, base + off)];
            }
            for (j, off) in f.offsets.iter().enumerate() {
                rho[(row, base + off)] = u.row(j).iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
            }
        }
    }
}

fn apply_superop_density(rho: &mut CMat, f: &Fibers, s: &CMat) {
    let dl = f.offsets.len();
    let mut x = vec![ZERO; dl * dl];
    for &ra in &f.bases {
        for &cb in &f.bases {
            for (k, ko) in f.offsets.iter().enumerate() {
                for (l, lo) in f.offsets.iter().enumerate() {
                    x[k * dl + l] = rho[(ra + ko, cb + lo)];
                }
            }
            for (i, io) in f.offsets.iter().enumerate() {
                for (j, jo) in f.offsets.iter().enumerate() {
                    let row = s.row(i * dl + j);
                    rho[(ra + io, cb + jo)] = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                }
            }
        }
    }
}

/// A maximal run of items on one wire list, as `block` repeated `repeats` times.
struct Run<'a> {
    wires: Vec<usize>,
    block: &'a [Item],
    repeats: u64,
}

fn plan_runs(items: &[Item], fuse: bool) -> Vec<Run<'_>> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let wires = items[i].wires();
        let mut j = i + 1;
        if fuse {
            while j < items.len() && items[j].wires() == wires {
                j += 1;
            }
        }
        let run = &items[i..j];
        let m = run.len();
        let period = (1..=m)
            .find(|&p| m.is_multiple_of(p) && (p..m).all(|x| run[x] == run[x - p]))
            .unwrap_or(m);
        runs.push(Run { wires, block: &run[..period], repeats: (m / period) as u64 });
        i = j;
    }
    runs
}

fn query_unitary(q: &OracleQuery, bindings: &PureBindings) -> Result<CMat> {
    let u = bindings
        .get(&q.oracle)
        .ok_or(CircuitError::Unbound { oracle: q.oracle, kind: "unitary" })?;
    let expected = 1usize << q.targets.len();
    if u.nrows() != expected || u.ncols() != expected {
        return Err(CircuitError::DimensionMismatch { expected, found: u.nrows() });
    }
    Ok(if q.is_controlled() { gates::controlled(u) } else { u.clone() })
}

/// Applies every item of `c` to `input`.
pub fn run_pure(c: &OracleCircuit, bindings: &PureBindings, input: &PureState) -> Result<PureState> {
    run_pure_with(c, bindings, input, true)
}

fn run_pure_with(c: &OracleCircuit, bindings: &PureBindings, input: &PureState, fuse: bool) -> Result<PureState> {
    if input.n_qubits() != c.n_wires {
        return Err(CircuitError::DimensionMismatch { expected: c.n_wires, found: input.n_qubits() });
    }
    let mut amps = input.amplitudes().clone().into_inner();
    for run in plan_runs(&c.items, fuse) {
        let mut local = CMat::identity(1 << run.wires.len());
        for it in run.block {
            let u = match it {
                Item::Gate(g) => g.matrix.clone(),
                Item::Query(q) => query_unitary(q, bindings)?,
            };
            local = &u * &local;
        }
        let local = local.pow(run.repeats);
        apply_unitary_vec(&mut amps, &Fibers::new(c.n_wires, &run.wires), &local);
    }
    PureState::from_unnormalized(CVec::new(amps))
        .map_err(|e| CircuitError::InvalidParameter(format!("simulation lost normalization: {e}")))
}

#[derive(Clone)]
enum LocalOp {
    Unitary(CMat),
    Superop(CMat),
}

impl LocalOp {
    fn into_superop(self) -> CMat {
        match self {
            LocalOp::Unitary(u) => tensor(&u, &u.conj()),
            LocalOp::Superop(s) => s,
        }
    }

    /// `next ∘ self`.
    fn then(self, next: LocalOp) -> LocalOp {
        match (self, next) {
            (LocalOp::Unitary(a), LocalOp::Unitary(b)) => LocalOp::Unitary(&b * &a),
            (a, b) => LocalOp::Superop(&b.into_superop() * &a.into_superop()),
        }
    }

    fn pow(self, e: u64) -> LocalOp {
        match self {
            LocalOp::Unitary(u) => LocalOp::Unitary(u.pow(e)),
            LocalOp::Superop(s) => LocalOp::Superop(s.pow(e)),
        }
    }
}

fn query_channel<'a>(q: &OracleQuery, bindings: &'a DensityBindings) -> Result<&'a Channel> {
    let ch = bindings.get(q.oracle, q.is_controlled()).ok_or(CircuitError::Unbound {
        oracle: q.oracle,
        kind: if q.is_controlled() { "controlled channel" } else { "channel" },
    })?;
    let expected = 1usize << q.wires().len();
    if ch.dim() != expected {
        return Err(CircuitError::DimensionMismatch { expected, found: ch.dim() });
    }
    Ok(ch)
}

/// Density-matrix execution: gates act by conjugation, queries by their bound channels.
pub fn run_density(c: &OracleCircuit, bindings: &DensityBindings, input: &DensityOp) -> Result<DensityOp> {
    run_density_with(c, bindings, input, true)
}

fn run_density_with(c: &OracleCircuit, bindings: &DensityBindings, input: &DensityOp, fuse: bool) -> Result<DensityOp> {
    if c.n_wires > MAX_DENSITY_WIRES {
        return Err(CircuitError::TooLarge {
            wires: c.n_wires,
            limit: MAX_DENSITY_WIRES,
            bytes: 16u128 << (2 * c.n_wires),
        });
    }
    if input.n_qubits() != c.n_wires {
        return Err(CircuitError::DimensionMismatch { expected: c.n_wires, found: input.n_qubits() });
    }
    let mut rho = input.matrix().clone();
    for run in plan_runs(&c.items, fuse) {
        let mut local = LocalOp::Unitary(CMat::identity(1 << run.wires.len()));
        for it in run.block {
            let op = match it {
                Item::Gate(g) => LocalOp::Unitary(g.matrix.clone()),
                Item::Query(q) => {
                    let ch = query_channel(q, bindings)?;
                    match ch.as_unitary() {
                        Some(u) => LocalOp::Unitary(u.clone()),
                        None => LocalOp::Superop(ch.superop()),
                    }
                }
            };
            local = local.then(op);
        }
        let fibers = Fibers::new(c.n_wires, &run.wires);
        match local.pow(run.repeats) {
            LocalOp::Unitary(u) => apply_unitary_density(&mut rho, &fibers, &u),
            LocalOp::Superop(s) => apply_superop_density(&mut rho, &fibers, &s),
        }
    }
    Ok(DensityOp::from_matrix_unchecked(rho))
}

/// Result of measuring the first `t` wires.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOutcome {
    /// `b₁…b_t`, `b₁` from wire 0.
    pub bits: Vec<u8>,
    /// `Σ b_j 2^{-j} ∈ [0, 1)`.
    pub gamma_tilde: f64,
}

impl MeasurementOutcome {
    pub fn from_index(index: usize, t: usize) -> Self {
        let bits = (1..=t).map(|j| ((index >> (t - j)) & 1) as u8).collect();
        MeasurementOutcome { bits, gamma_tilde: index as f64 / (1u64 << t) as f64 }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let gamma_tilde = bits
            .iter()
            .enumerate()
            .map(|(j, &b)| b as f64 * 0.5f64.powi(j as i32 + 1))
            .sum();
        MeasurementOutcome { bits: bits.to_vec(), gamma_tilde }
    }

    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }
}

/// Computational-basis marginal of the leading wires.
pub trait PrefixMarginal {
    fn wire_count(&self) -> usize;

    /// `p(m)` for `m ∈ 0..2^t`, where `m`'s bits are wires `0..t`.
    fn prefix_distribution(&self, t: usize) -> Result<Vec<f64>>;
}

fn check_prefix(t: usize, wires: usize) -> Result<()> {
    if t == 0 || t > wires {
        return Err(CircuitError::InvalidParameter(format!("cannot measure {t} of {wires} wires")));
    }
    Ok(())
}

impl PrefixMarginal for PureState {
    fn wire_count(&self) -> usize {
        self.n_qubits()
    }

    fn prefix_distribution(&self, t: usize) -> Result<Vec<f64>> {
        check_prefix(t, self.n_qubits())?;
        let rest = 1usize << (self.n_qubits() - t);
        Ok(self
            .amplitudes()
            .as_slice()
            .chunks(rest)
            .map(|chunk| chunk.iter().map(|z| z.norm_sqr()).sum())
            .collect())
    }
}

impl PrefixMarginal for DensityOp {
    fn wire_count(&self) -> usize {
        self.n_qubits()
    }

    fn prefix_distribution(&self, t: usize) -> Result<Vec<f64>> {
        check_prefix(t, self.n_qubits())?;
        let rest = 1usize << (self.n_qubits() - t);
        let m = self.matrix();
        Ok((0..1usize << t)
            .map(|p| (0..rest).map(|s| m[(p * rest + s, p * rest + s)].re).sum())
            .collect())
    }
}

/// Draws an index from a (possibly slightly unnormalized) distribution.
pub fn sample_index(dist: &[f64], rng: &mut SimRng) -> usize {
    let total: f64 = dist.iter().map(|p| p.max(0.0)).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in dist.iter().enumerate() {
        let p = p.max(0.0);
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn measure_prefix<S: PrefixMarginal + ?Sized>(state: &S, t: usize, rng: &mut SimRng) -> Result<MeasurementOutcome> {
    let dist = state.prefix_distribution(t)?;
    Ok(MeasurementOutcome::from_index(sample_index(&dist, rng), t))
}

/// `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions over different supports");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gates::{hadamard, pauli_x};
    use crate::reflections::householder;
    use crate::rng::rng_from_seed;
    use crate::states::haar_random;

    fn zero_plus_bindings() -> PureBindings {
        let mut b = PureBindings::new();
        b.insert(1, householder(&PureState::zero()).unwrap().into_matrix());
        b.insert(2, householder(&PureState::plus()).unwrap().into_matrix());
        b
    }

    fn qpe_input(t: usize, system: &PureState) -> PureState {
        PureState::basis(t, 0).unwrap().tensor(system)
    }

    #[test]
    fn qft_small_cases() {
        assert!(qft(1).unwrap().approx_eq(&hadamard(), 1e-15));
        let q2 = qft(2).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let expected = crate::linalg::I.powu((j * k) as u32) * 0.5;
                assert!((q2[(k, j)] - expected).norm() < 1e-15);
            }
        }
        for t in 1..=5 {
            let q = qft(t).unwrap();
            assert!(q.is_unitary(1e-10));
            assert!((&q * &qft_inv(t).unwrap()).approx_eq(&CMat::identity(1 << t), 1e-12));
        }
        assert!(qft(0).is_err() && qft(13).is_err());
    }

    #[test]
    fn qft_inv_decomposition_matches_matrix() {
        for t in 1..=5 {
            let mut c = OracleCircuit::new(t);
            c.push_qft_inv(&(0..t).collect::<Vec<_>>()).unwrap();
            let target = qft_inv(t).unwrap();
            for j in 0..1 << t {
                let out = run_pure(&c, &PureBindings::new(), &PureState::basis(t, j).unwrap()).unwrap();
                assert!(out.amplitudes().distance(&target.column(j)) < 1e-12, "t={t} j={j}");
            }
        }
    }

    #[test]
    fn smallest_qpe_layout() {
        let c = qpe_circuit(1, 1, 2).unwrap();
        assert_eq!(c.dump(), "GATE H 0\nQUERY 2 controlled 0 1\nQUERY 1 controlled 0 1\nGATE H 0\n");
    }

    #[test]
    fn qpe_query_counts() {
        for t in 1..=6 {
            let c = qpe_circuit(t, 2, 2).unwrap();
            let expected = (1u64 << t) - 1;
            assert_eq!(c.query_count(1), expected);
            assert_eq!(c.query_count(2), expected);
            assert_eq!(c.total_queries(), 2 * expected);
        }
        assert_eq!(qpe_circuit(3, 1, 2).unwrap().query_count(1), 7);
    }

    #[test]
    fn identity_oracles_give_zero_phase() {
        let t = 4;
        let mut b = PureBindings::new();
        b.insert(1, CMat::identity(2));
        b.insert(2, CMat::identity(2));
        let c = qpe_circuit(t, 1, 2).unwrap();
        let out = run_pure(&c, &b, &qpe_input(t, &haar_random(1, 3).unwrap())).unwrap();
        let dist = out.prefix_distribution(t).unwrap();
        assert!((dist[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_single_gate_circuits() {
        let input = haar_random(2, 5).unwrap();
        let out = run_pure(&OracleCircuit::new(2), &PureBindings::new(), &input).unwrap();
        assert_eq!(out, input);

        let mut c = OracleCircuit::new(3);
        c.push_gate("X", &[0], pauli_x()).unwrap();
        let out = run_pure(&c, &PureBindings::new(), &PureState::basis(3, 0).unwrap()).unwrap();
        assert!(out.amplitudes().distance(&CVec::basis(8, 0b100)) < 1e-15);
    }

    #[test]
    fn zero_plus_qpe_concentrates_on_quarter_turns() {
        let t = 6;
        let c = qpe_circuit(t, 1, 2).unwrap();
        let out = run_pure(&c, &zero_plus_bindings(), &qpe_input(t, &PureState::zero())).unwrap();
        let dist = out.prefix_distribution(t).unwrap();
        let mass = dist[16] + dist[48];
        assert!(mass >= 0.99, "mass {mass}");
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fused_and_unfused_execution_agree() {
        let t = 3;
        let phi = haar_random(2, 1).unwrap();
        let psi = haar_random(2, 2).unwrap();
        let mut b = PureBindings::new();
        b.insert(1, householder(&phi).unwrap().into_matrix());
        b.insert(2, householder(&psi).unwrap().into_matrix());
        let c = qpe_circuit(t, 2, 2).unwrap();
        let input = qpe_input(t, &phi);
        let fused = run_pure_with(&c, &b, &input, true).unwrap();
        let plain = run_pure_with(&c, &b, &input, false).unwrap();
        assert!(fused.amplitudes().distance(plain.amplitudes()) < 1e-12);

        let db = DensityBindings::from_unitaries(&b);
        let rf = run_density_with(&c, &db, &input.density(), true).unwrap();
        let rp = run_density_with(&c, &db, &input.density(), false).unwrap();
        assert!(rf.matrix().approx_eq(rp.matrix(), 1e-12));
        assert!(rf.matrix().approx_eq(&fused.projector(), 1e-9));
    }

    #[test]
    fn run_pure_is_linear() {
        let t = 2;
        let c = qpe_circuit(t, 1, 2).unwrap();
        let b = zero_plus_bindings();
        let a = haar_random(3, 10).unwrap();
        let bb = haar_random(3, 11).unwrap();
        let (alpha, beta) = (C64::new(0.6, 0.2), C64::new(-0.3, 0.7));
        let combo = &a.amplitudes().scale(alpha) + &bb.amplitudes().scale(beta);
        let norm = combo.norm();
        let combo_state = PureState::from_unnormalized(combo).unwrap();
        let lhs = run_pure(&c, &b, &combo_state).unwrap().amplitudes().scale(C64::new(norm, 0.0));
        let ra = run_pure(&c, &b, &a).unwrap();
        let rb = run_pure(&c, &b, &bb).unwrap();
        let rhs = &ra.amplitudes().scale(alpha) + &rb.amplitudes().scale(beta);
        assert!(lhs.distance(&rhs) < 1e-10);
    }

    #[test]
    fn depolarizing_binding_mixes_system() {
        let t = 2;
        let mut c = OracleCircuit::new(t + 1);
        c.push_gate("H", &[0], hadamard()).unwrap();
        c.push_query(1, None, &[2]).unwrap();
        let mut b = DensityBindings::new();
        b.insert(1, false, Channel::completely_depolarizing(2));
        let out = run_density(&c, &b, &qpe_input(t, &PureState::zero()).density()).unwrap();
        let marginal = crate::linalg::partial_trace(out.matrix(), &[2, 2, 2], &[2]).unwrap();
        assert!(marginal.approx_eq(&CMat::identity(2).scale_real(0.5), 1e-12));
    }

    #[test]
    fn unbound_and_mismatched_oracles() {
        let c = qpe_circuit(1, 1, 2).unwrap();
        let input = qpe_input(1, &PureState::zero());
        let mut b = PureBindings::new();
        b.insert(1, CMat::identity(2));
        assert!(matches!(run_pure(&c, &b, &input), Err(CircuitError::Unbound { oracle: 2, .. })));
        b.insert(2, CMat::identity(4));
        assert!(matches!(run_pure(&c, &b, &input), Err(CircuitError::DimensionMismatch { .. })));
        assert!(run_density(&c, &DensityBindings::new(), &input.density()).is_err());
        assert!(run_pure(&c, &zero_plus_bindings(), &PureState::zero()).is_err());
    }

    #[test]
    fn builder_validation() {
        let mut c = OracleCircuit::new(2);
        assert!(matches!(c.push_gate("X", &[2], pauli_x()), Err(CircuitError::WireOutOfRange { .. })));
        assert!(matches!(c.push_gate("X", &[0, 0], CMat::identity(4)), Err(CircuitError::DuplicateWire(0))));
        assert!(matches!(c.push_gate("X", &[0, 1], pauli_x()), Err(CircuitError::GateShape { .. })));
        assert!(c.push_query(0, None, &[1]).is_err());
        assert!(c.push_query(1, Some(1), &[1]).is_err());
        assert!(c.push_query(1, None, &[1]).is_ok());
        assert_eq!(c.dump(), "QUERY 1 plain 1\n");
    }

    #[test]
    fn measurement_outcomes() {
        let state = PureState::basis(4, 0b1010).unwrap(); // |101⟩|0⟩
        let mut rng = rng_from_seed(1);
        for _ in 0..20 {
            let m = measure_prefix(&state, 3, &mut rng).unwrap();
            assert_eq!(m.bits, vec![1, 0, 1]);
            assert_eq!(m.gamma_tilde, 0.625);
        }
        assert_eq!(MeasurementOutcome::from_bits(&[0, 1]).gamma_tilde, 0.25);
        let m = MeasurementOutcome::from_index(0b0110_1101, 8);
        assert_eq!(MeasurementOutcome::from_bits(&m.bits), m);
        assert_eq!(m.index(), 0b0110_1101);
        assert!(measure_prefix(&state, 5, &mut rng).is_err());
    }

    #[test]
    fn uniform_prefix_sampling_frequencies() {
        let state = PureState::plus().tensor(&PureState::plus()).tensor(&PureState::zero());
        let mut rng = rng_from_seed(99);
        let mut counts = [0usize; 4];
        let n = 10_000;
        for _ in 0..n {
            counts[measure_prefix(&state, 2, &mut rng).unwrap().index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() <= 0.02);
        }
        let dist = state.density().prefix_distribution(2).unwrap();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ancilla_formula() {
        // δ = 0.05/π → p = 6; ε = 0.1 → ⌈log₂ 7⌉ = 3
        assert_eq!(qpe_ancillas(0.1, 0.05 / PI).unwrap(), 9);
        assert_eq!(qpe_ancillas(0.1, 0.25 / PI).unwrap(), 7);
        assert_eq!(qpe_ancillas(0.1, 0.1 / PI).unwrap(), 8);
        assert!(qpe_ancillas(0.0, 0.1).is_err() && qpe_ancillas(0.1, 1.0).is_err());
    }

    #[test]
    fn density_size_guard() {
        let c = OracleCircuit::new(MAX_DENSITY_WIRES + 1);
        let input = DensityOp::maximally_mixed(1);
        assert!(matches!(run_density(&c, &DensityBindings::new(), &input), Err(CircuitError::TooLarge { .. })));
    }
}
