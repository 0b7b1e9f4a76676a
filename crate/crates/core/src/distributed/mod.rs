//! Multi-party protocol simulation.
//!
//! Registers carry an owner. Every operation checks that the acting party
//! owns what it touches; the only cross-party channels are declared ebits
//! and broadcast classical bits.

mod dbqc;
mod knit;
mod schedule;

pub use dbqc::{run_dbqc, run_triparty, ProtocolOutcome, TripartyScheme};
pub use knit::{knit_decompose, knit_estimate, KnitCircuit, KnitDecomposition, KnitMode, KnitOp, KnitOutcome};
pub use schedule::{hybrid_optimize, pingpong_run, HybridConfig, HybridOutcome};

use rand::RngCore;
use serde::Serialize;

use crate::error::{QError, Result};
use crate::oblivious::{sample_index, GeneralizedPauliBasis};
use crate::qmath::{embed_at, gates, partial_trace_at, ComplexMatrix, C64};
use crate::states::{bell_vector, ChoiProgram, MixedState, PureState};

/// A state a party keeps locally.
#[derive(Clone, Debug, PartialEq)]
pub enum HeldState {
    Pure(PureState),
    Mixed(MixedState),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Holdings {
    pub programs: Vec<ChoiProgram>,
    pub states: Vec<HeldState>,
    pub classical_descriptions: Vec<String>,
    pub ebit_endpoints: Vec<usize>,
    /// Projective readout `{|psi_o>, rest}` this party performs at the end.
    pub measurement_basis: Option<PureState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Party {
    pub name: String,
    pub holdings: Holdings,
    /// Knowledge-set tags; metadata only.
    pub capabilities: Vec<String>,
}

impl Party {
    pub fn new(name: impl Into<String>) -> Self {
        Party { name: name.into(), holdings: Holdings::default(), capabilities: Vec::new() }
    }

    pub fn with_program(mut self, program: ChoiProgram) -> Self {
        self.holdings.programs.push(program);
        self
    }

    pub fn with_state(mut self, state: HeldState) -> Self {
        self.holdings.states.push(state);
        self
    }

    pub fn with_measurement(mut self, psi: PureState) -> Self {
        self.holdings.measurement_basis = Some(psi);
        self
    }

    pub fn with_capability(mut self, tag: impl Into<String>) -> Self {
        self.capabilities.push(tag.into());
        self
    }

    pub(crate) fn pure_input(&self) -> Result<&PureState> {
        match self.holdings.states.first() {
            Some(HeldState::Pure(p)) => Ok(p),
            Some(HeldState::Mixed(_)) => Err(QError::InvalidArgument(format!("{} holds a mixed input", self.name))),
            None => Err(QError::Locality(format!("{} holds no input state", self.name))),
        }
    }

    pub(crate) fn measurement(&self) -> Result<&PureState> {
        self.holdings
            .measurement_basis
            .as_ref()
            .ok_or_else(|| QError::Locality(format!("{} holds no measurement basis", self.name)))
    }
}

/// Counters for one protocol execution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResourceLedger {
    pub ebits_distributed: usize,
    pub ebits_consumed: usize,
    pub classical_bits_sent: usize,
    pub oqt_ops: usize,
    pub qt_corrections: usize,
    /// Product of `||u||_1^2` over knitted gates; at least 1.
    pub knit_overhead: f64,
    pub max_live_registers: usize,
    /// Temporally ordered layers.
    pub depth: usize,
}

impl Default for ResourceLedger {
    fn default() -> Self {
        ResourceLedger {
            ebits_distributed: 0,
            ebits_consumed: 0,
            classical_bits_sent: 0,
            oqt_ops: 0,
            qt_corrections: 0,
            knit_overhead: 1.0,
            max_live_registers: 0,
            depth: 0,
        }
    }
}

/// One step of a recorded protocol.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ProtocolStep {
    PrepareState { party: String },
    PrepareProgram { party: String },
    DistributeEbit { id: usize, ends: (String, String) },
    IsiInject { party: String },
    OqtLink { from: String, to: String, ebit: Option<usize> },
    BellMeasureQt { from: String, to: String, ebit: usize },
    PauliCorrect { party: String },
    RemoteCnot { control: String, target: String, ebit: usize },
    LocalGate { party: String },
    KnitCut { gate: usize },
    FinalMeasure { party: String },
    Broadcast { from: String, bits: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ProtocolScript {
    pub steps: Vec<ProtocolStep>,
}

impl ProtocolScript {
    /// Every consumed ebit was distributed earlier and is consumed once.
    pub fn validate(&self) -> Result<()> {
        let mut distributed = std::collections::BTreeMap::new();
        for (k, step) in self.steps.iter().enumerate() {
            let used = match step {
                ProtocolStep::DistributeEbit { id, ends } => {
                    if distributed.insert(*id, (ends.clone(), false)).is_some() {
                        return Err(QError::Resource(format!("step {k}: ebit {id} distributed twice")));
                    }
                    continue;
                }
                ProtocolStep::BellMeasureQt { ebit, .. } | ProtocolStep::RemoteCnot { ebit, .. } => *ebit,
                ProtocolStep::OqtLink { ebit: Some(ebit), .. } => *ebit,
                _ => continue,
            };
            match distributed.get_mut(&used) {
                None => return Err(QError::Resource(format!("step {k}: ebit {used} was never distributed"))),
                Some((_, true)) => return Err(QError::Resource(format!("step {k}: ebit {used} reused"))),
                Some((_, flag)) => *flag = true,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ebit {
    pub id: usize,
    pub ends: (String, String),
    pub dim: usize,
    pub used: bool,
}

/// Parties, shared ebits, the running ledger and the step log.
#[derive(Clone, Debug, Default)]
pub struct Network {
    parties: Vec<Party>,
    ebits: Vec<Ebit>,
    pub ledger: ResourceLedger,
    pub script: ProtocolScript,
}

impl Network {
    pub fn new(parties: Vec<Party>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &parties {
            if !seen.insert(p.name.clone()) {
                return Err(QError::DuplicateLabel(p.name.clone()));
            }
        }
        Ok(Network { parties, ..Default::default() })
    }

    pub fn party(&self, name: &str) -> Result<&Party> {
        self.parties.iter().find(|p| p.name == name).ok_or_else(|| QError::UnknownLabel(name.into()))
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn ebits(&self) -> &[Ebit] {
        &self.ebits
    }

    pub fn unused_ebits(&self) -> usize {
        self.ebits.iter().filter(|e| !e.used).count()
    }

    pub fn distribute_ebit(&mut self, a: &str, b: &str, dim: usize) -> Result<usize> {
        self.party(a)?;
        self.party(b)?;
        if a == b {
            return Err(QError::Locality(format!("ebit endpoints must differ, got {a} twice")));
        }
        let id = self.ebits.len();
        self.ebits.push(Ebit { id, ends: (a.into(), b.into()), dim, used: false });
        for name in [a, b] {
            if let Some(p) = self.parties.iter_mut().find(|p| p.name == name) {
                p.holdings.ebit_endpoints.push(id);
            }
        }
        self.ledger.ebits_distributed += 1;
        self.script.steps.push(ProtocolStep::DistributeEbit { id, ends: (a.into(), b.into()) });
        Ok(id)
    }

    /// Marks `id` used by a link between `from` and `to`.
    pub fn consume_ebit(&mut self, id: usize, from: &str, to: &str) -> Result<&Ebit> {
        let e = self.ebits.get_mut(id).ok_or_else(|| QError::Resource(format!("ebit {id} was never distributed")))?;
        if e.used {
            return Err(QError::Resource(format!("ebit {id} already consumed")));
        }
        let (a, b) = (&e.ends.0, &e.ends.1);
        if !((a == from && b == to) || (a == to && b == from)) {
            return Err(QError::Locality(format!("ebit {id} joins {a} and {b}, not {from} and {to}")));
        }
        e.used = true;
        self.ledger.ebits_consumed += 1;
        Ok(e)
    }

    pub fn broadcast(&mut self, from: &str, bits: usize) -> Result<()> {
        self.party(from)?;
        self.ledger.classical_bits_sent += bits;
        self.script.steps.push(ProtocolStep::Broadcast { from: from.into(), bits });
        Ok(())
    }
}

/// One shot of a protocol run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeRecord {
    pub shot: usize,
    pub parity_bits: Vec<u8>,
    pub outcomes: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag_branch: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub term: Option<usize>,
}

impl OutcomeRecord {
    pub fn new(shot: usize, parity_bits: Vec<u8>, outcomes: Vec<f64>) -> Self {
        OutcomeRecord { shot, parity_bits, outcomes, flag_branch: None, term: None }
    }
}

/// A register together with the party that holds it.
#[derive(Clone, Debug, PartialEq)]
pub struct Register {
    pub owner: String,
    pub state: MixedState,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrectionRecord {
    /// Measurement outcome index.
    pub outcome: usize,
    pub bits: Vec<u8>,
    pub probability: f64,
}

fn bits_for(d: usize) -> usize {
    (usize::BITS - (d - 1).leading_zeros()) as usize
}

fn to_bits(value: usize, width: usize) -> Vec<u8> {
    (0..width).rev().map(|k| ((value >> k) & 1) as u8).collect()
}

/// One Bell-measurement outcome of teleporting `rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct TeleportBranch {
    pub outcome: usize,
    pub probability: f64,
    pub uncorrected: ComplexMatrix,
    pub corrected: ComplexMatrix,
}

/// All `d^2` outcomes of measuring `(sigma_i (x) I)|w>` on (input, near half).
pub fn teleport_outcomes(rho: &ComplexMatrix) -> Vec<TeleportBranch> {
    let d = rho.rows();
    let dims = [d, d, d];
    let w = bell_vector(d);
    let joint = rho.kron(&ComplexMatrix::projector(&w));
    let basis = GeneralizedPauliBasis::new(d);
    basis
        .operators()
        .iter()
        .enumerate()
        .map(|(i, sigma)| {
            let phi = &sigma.kron(&ComplexMatrix::identity(d)) * &w;
            let proj = ComplexMatrix::projector(&phi).kron(&ComplexMatrix::identity(d));
            let post = partial_trace_at(&(&proj * &joint), &[2], &dims);
            let p = post.trace().re;
            let uncorrected = post.scale_re(1.0 / p);
            let corrected = sigma.conjugate(&uncorrected);
            TeleportBranch { outcome: i, probability: p, uncorrected, corrected }
        })
        .collect()
}

/// Standard teleportation of `reg` to `to` through ebit `ebit`.
pub fn teleport_state(
    net: &mut Network,
    reg: Register,
    ebit: usize,
    to: &str,
    rng: &mut dyn RngCore,
) -> Result<(Register, CorrectionRecord)> {
    let d = reg.state.dim();
    let e = net.consume_ebit(ebit, &reg.owner, to)?;
    if e.dim != d {
        return Err(QError::DimensionMismatch(format!("ebit of dimension {} for register of dimension {d}", e.dim)));
    }
    let branches = teleport_outcomes(reg.state.matrix());
    let k = sample_index(&branches.iter().map(|b| b.probability).collect::<Vec<_>>(), rng);
    let b = &branches[k];
    let width = 2 * bits_for(d);
    net.script.steps.push(ProtocolStep::BellMeasureQt { from: reg.owner.clone(), to: to.into(), ebit });
    net.broadcast(&reg.owner, width)?;
    net.script.steps.push(ProtocolStep::PauliCorrect { party: to.into() });
    net.ledger.qt_corrections += 1;
    net.ledger.depth += 1;
    let state = MixedState::with_layout_unchecked(reg.state.layout().clone(), b.corrected.clone());
    let record = CorrectionRecord { outcome: k, bits: to_bits(k, width), probability: b.probability };
    Ok((Register { owner: to.into(), state }, record))
}

/// Qubit registers spread across parties.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedRegisters {
    pub owners: Vec<String>,
    pub rho: ComplexMatrix,
}

impl SharedRegisters {
    pub fn new(owners: Vec<String>, rho: ComplexMatrix) -> Result<Self> {
        if rho.rows() != 1 << owners.len() || !rho.is_square() {
            return Err(QError::DimensionMismatch(format!(
                "{} qubit owners for a {}x{} state",
                owners.len(),
                rho.rows(),
                rho.cols()
            )));
        }
        Ok(SharedRegisters { owners, rho })
    }

    pub fn qubits(&self) -> usize {
        self.owners.len()
    }

    /// Applies `gate` to `targets`, all of which `party` must hold.
    pub fn local_gate(&mut self, party: &str, gate: &ComplexMatrix, targets: &[usize]) -> Result<()> {
        for &t in targets {
            match self.owners.get(t) {
                Some(o) if o == party => {}
                Some(o) => return Err(QError::Locality(format!("{party} acted on qubit {t} held by {o}"))),
                None => return Err(QError::InvalidArgument(format!("no qubit {t}"))),
            }
        }
        let full = embed_at(gate, targets, &vec![2; self.qubits()])?;
        self.rho = full.conjugate(&self.rho);
        Ok(())
    }
}

/// Projects qubit `q` of `rho` onto `|v>`, returning `(p, normalized state)`.
fn project_qubit(rho: &ComplexMatrix, v: &ComplexMatrix, q: usize, n: usize) -> Result<(f64, ComplexMatrix)> {
    let full = embed_at(&ComplexMatrix::projector(v), &[q], &vec![2; n])?;
    let post = full.conjugate(rho);
    let p = post.trace().re.max(0.0);
    Ok((p, if p > 1e-15 { post.scale_re(1.0 / p) } else { post }))
}

/// The four `(m1, m2)` outcomes of a cat-entangler remote CNOT.
///
/// Each entry is `(probability, state after corrections)` with the ebit
/// qubits discarded; outcome index is `2*m1 + m2`.
pub fn remote_cnot_branches(regs: &SharedRegisters, control: usize, target: usize) -> Result<Vec<(f64, ComplexMatrix)>> {
    let n = regs.qubits();
    if control >= n || target >= n || control == target {
        return Err(QError::InvalidArgument(format!("bad remote CNOT qubits ({control}, {target}) of {n}")));
    }
    let (a, b) = (n, n + 1);
    let dims = vec![2; n + 2];
    let bell = bell_vector(2);
    let start = regs.rho.kron(&ComplexMatrix::projector(&bell));
    let entangle = embed_at(&gates::cnot(), &[control, a], &dims)?.conjugate(&start);
    let plus = ComplexMatrix::from_real(2, 1, &[std::f64::consts::FRAC_1_SQRT_2; 2]);
    let minus = ComplexMatrix::from_real(2, 1, &[std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2]);
    let keep: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(4);
    for m1 in 0..2 {
        let (p1, s1) = project_qubit(&entangle, &ComplexMatrix::basis(2, m1), a, n + 2)?;
        let mut s1 = s1;
        if m1 == 1 {
            s1 = embed_at(&gates::x(), &[b], &dims)?.conjugate(&s1);
        }
        let s1 = embed_at(&gates::cnot(), &[b, target], &dims)?.conjugate(&s1);
        for (m2, v) in [&plus, &minus].into_iter().enumerate() {
            let (p2, mut s2) = project_qubit(&s1, v, b, n + 2)?;
            if m2 == 1 {
                s2 = embed_at(&gates::z(), &[control], &dims)?.conjugate(&s2);
            }
            out.push((p1 * p2, partial_trace_at(&s2, &keep, &dims)));
        }
    }
    Ok(out)
}

/// CNOT from a qubit at one party onto a qubit at another, consuming `ebit`.
pub fn remote_cnot(
    net: &mut Network,
    regs: &mut SharedRegisters,
    control: usize,
    target: usize,
    ebit: usize,
    rng: &mut dyn RngCore,
) -> Result<CorrectionRecord> {
    let (ca, tb) = (
        regs.owners.get(control).cloned().ok_or_else(|| QError::InvalidArgument(format!("no qubit {control}")))?,
        regs.owners.get(target).cloned().ok_or_else(|| QError::InvalidArgument(format!("no qubit {target}")))?,
    );
    if ca == tb {
        return Err(QError::Locality(format!("control and target are both held by {ca}; use a local gate")));
    }
    let e = net.consume_ebit(ebit, &ca, &tb)?;
    if e.dim != 2 {
        return Err(QError::DimensionMismatch("remote CNOT needs a qubit ebit".into()));
    }
    let branches = remote_cnot_branches(regs, control, target)?;
    let k = sample_index(&branches.iter().map(|b| b.0).collect::<Vec<_>>(), rng);
    regs.rho = branches[k].1.clone();
    net.script.steps.push(ProtocolStep::RemoteCnot { control: ca.clone(), target: tb.clone(), ebit });
    net.broadcast(&ca, 1)?;
    net.script.steps.push(ProtocolStep::PauliCorrect { party: tb.clone() });
    net.broadcast(&tb, 1)?;
    net.script.steps.push(ProtocolStep::PauliCorrect { party: ca });
    net.ledger.qt_corrections += 2;
    net.ledger.depth += 2;
    Ok(CorrectionRecord { outcome: k, bits: to_bits(k, 2), probability: branches[k].0 })
}

/// `e^{i alpha} Rz(beta) Ry(gamma) Rz(delta)` for a 2x2 unitary.
pub(crate) fn zyz(u: &ComplexMatrix) -> (f64, f64, f64, f64) {
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let alpha = det.arg() / 2.0;
    let w = u.scale(C64::from_polar(1.0, -alpha));
    let gamma = 2.0 * w[(1, 0)].norm().atan2(w[(0, 0)].norm());
    let sum = if w[(1, 1)].norm() > 1e-12 { w[(1, 1)].arg() } else { 0.0 };
    let diff = if w[(1, 0)].norm() > 1e-12 { w[(1, 0)].arg() } else { 0.0 };
    (alpha, sum + diff, gamma, sum - diff)
}

/// `controlled(v)` on qubits (control, target) as local gates around two CNOTs.
///
/// Returns `(control phase, [C, B, A])` with
/// `controlled(v) = (P (x) A) CNOT (I (x) B) CNOT (I (x) C)`.
pub(crate) fn controlled_abc(v: &ComplexMatrix) -> (ComplexMatrix, [ComplexMatrix; 3]) {
    let (alpha, beta, gamma, delta) = zyz(v);
    let a = gates::rz(beta) * gates::ry(gamma / 2.0);
    let b = gates::ry(-gamma / 2.0) * gates::rz(-(delta + beta) / 2.0);
    let c = gates::rz((delta - beta) / 2.0);
    let phase = ComplexMatrix::diag(&[C64::new(1.0, 0.0), C64::from_polar(1.0, alpha)]);
    (phase, [c, b, a])
}
