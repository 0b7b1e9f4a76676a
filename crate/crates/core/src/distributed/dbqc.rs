//! Bipartite and tripartite computations over stored programs.

use std::collections::HashMap;

use rand::{Rng, RngCore};

use super::{
    remote_cnot, remote_cnot_branches, controlled_abc, Network, OutcomeRecord, Party, ProtocolScript, ProtocolStep,
    ResourceLedger, SharedRegisters,
};
use crate::error::{QError, Result};
use crate::estimate::LinearEstimator;
use crate::oblivious::{isi_measure, oqt_coefficients, oqt_step, sample_index, BinaryBranch};
use crate::qmath::{ComplexMatrix, RegisterLayout};
use crate::states::{channel_of_choi, choi_of_unitary, ChoiProgram, MixedState};

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolOutcome {
    pub estimate: f64,
    pub stderr: f64,
    pub ledger: ResourceLedger,
    pub script: ProtocolScript,
    pub records: Vec<OutcomeRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TripartyScheme {
    /// The joint program sits at a third station.
    I,
    /// The joint step is a controlled gate across the two data parties.
    II,
}

/// Binary outcome tree expanded on first visit, keyed by the bit path.
pub(crate) struct BranchTree {
    nodes: HashMap<Vec<u8>, MixedState>,
    splits: HashMap<Vec<u8>, f64>,
}

impl BranchTree {
    pub(crate) fn new() -> Self {
        BranchTree { nodes: HashMap::new(), splits: HashMap::new() }
    }

    pub(crate) fn insert(&mut self, path: Vec<u8>, state: MixedState) {
        self.nodes.insert(path, state);
    }

    /// Samples one more bit below `path`.
    pub(crate) fn descend(
        &mut self,
        path: &mut Vec<u8>,
        split: impl FnOnce(&MixedState) -> Result<(BinaryBranch, BinaryBranch)>,
        rng: &mut dyn RngCore,
    ) -> Result<u8> {
        if !self.splits.contains_key(path.as_slice()) {
            let node = self.nodes.get(path.as_slice()).ok_or_else(|| QError::InvalidArgument("unexpanded branch".into()))?;
            let (b0, b1) = split(node)?;
            self.splits.insert(path.clone(), b0.probability);
            for b in [b0, b1] {
                let mut child = path.clone();
                child.push(b.parity);
                self.nodes.insert(child, b.post_state);
            }
        }
        let bit = u8::from(rng.random::<f64>() >= self.splits[path.as_slice()]);
        path.push(bit);
        Ok(bit)
    }

    pub(crate) fn state(&self, path: &[u8]) -> &MixedState {
        &self.nodes[path]
    }
}

/// Injection output as `c |phi><phi| + e I`.
fn isi_affine(bit: u8, d: usize) -> (f64, f64) {
    if bit == 0 {
        (1.0, 0.0)
    } else {
        let inv = 1.0 / (d as f64 - 1.0);
        (-inv, inv)
    }
}

fn require_unitary_program(p: &ChoiProgram, d: usize) -> Result<()> {
    if !p.is_pure() {
        return Err(QError::MixedProgram);
    }
    if p.in_dim() != d || p.out_dim() != d {
        return Err(QError::DimensionMismatch(format!(
            "program {}->{} on a register of dimension {d}",
            p.in_dim(),
            p.out_dim()
        )));
    }
    if d < 2 {
        return Err(QError::InvalidArgument("registers must have dimension at least 2".into()));
    }
    Ok(())
}

fn first_program(p: &Party) -> Result<&ChoiProgram> {
    p.holdings.programs.first().ok_or_else(|| QError::Locality(format!("{} holds no program", p.name)))
}

fn bernoulli(p: f64, rng: &mut dyn RngCore) -> u8 {
    u8::from(rng.random::<f64>() < p)
}

/// Estimates `|<psi_o| U_B U_A |psi_in>|^2` with Alice's input injected into
/// her program and the result teleported obliviously into Bob's programs.
///
/// Alice holds `|psi_in>` and programs `[U_A, ...]`; Bob holds programs and
/// the readout state. The chain is inject, Alice's remaining programs, one
/// shared ebit used as an identity program, then Bob's programs.
pub fn run_dbqc(alice: &Party, bob: &Party, shots: usize, rng: &mut dyn RngCore) -> Result<ProtocolOutcome> {
    if shots == 0 {
        return Err(QError::InvalidArgument("shots must be positive".into()));
    }
    let psi_in = alice.pure_input()?;
    let psi_o = bob.measurement()?;
    let first = first_program(alice)?;
    first_program(bob)?;
    let d = psi_in.dim();
    for p in alice.holdings.programs.iter().chain(&bob.holdings.programs) {
        require_unitary_program(p, d)?;
    }
    if psi_o.dim() != d {
        return Err(QError::DimensionMismatch(format!("readout of dimension {} for registers of {d}", psi_o.dim())));
    }
    let rest_a = &alice.holdings.programs[1..];
    let (an, bn) = (alice.name.as_str(), bob.name.as_str());

    let mut net = Network::new(vec![alice.clone(), bob.clone()])?;
    net.script.steps.push(ProtocolStep::PrepareState { party: an.into() });
    net.script.steps.push(ProtocolStep::PrepareProgram { party: an.into() });
    net.script.steps.push(ProtocolStep::PrepareProgram { party: bn.into() });
    let ebit = net.distribute_ebit(an, bn, d)?;
    net.script.steps.push(ProtocolStep::IsiInject { party: an.into() });
    for _ in rest_a {
        net.script.steps.push(ProtocolStep::OqtLink { from: an.into(), to: an.into(), ebit: None });
    }
    net.consume_ebit(ebit, an, bn)?;
    net.script.steps.push(ProtocolStep::OqtLink { from: an.into(), to: bn.into(), ebit: Some(ebit) });
    for _ in &bob.holdings.programs {
        net.script.steps.push(ProtocolStep::OqtLink { from: bn.into(), to: bn.into(), ebit: None });
    }
    net.broadcast(an, 2 + rest_a.len())?;
    net.broadcast(bn, bob.holdings.programs.len())?;
    net.script.steps.push(ProtocolStep::FinalMeasure { party: bn.into() });

    let mut chain: Vec<ChoiProgram> = rest_a.to_vec();
    chain.push(choi_of_unitary(&ComplexMatrix::identity(d))?);
    chain.extend(bob.holdings.programs.iter().cloned());
    net.ledger.oqt_ops = chain.len();
    net.ledger.depth = 1;
    net.ledger.max_live_registers = 1 + 2 * alice.holdings.programs.len() + 2 * bob.holdings.programs.len() + 2;

    let obs = ComplexMatrix::projector(psi_o.vector());
    let mut tree = BranchTree::new();
    tree.insert(Vec::new(), MixedState::maximally_mixed(d));
    let mut est = LinearEstimator::new(1);
    let mut records = Vec::with_capacity(shots);
    for shot in 0..shots {
        let mut path = Vec::with_capacity(chain.len() + 1);
        tree.descend(&mut path, |_| isi_measure(first, psi_in), rng)?;
        for prog in &chain {
            tree.descend(&mut path, |s| oqt_step(prog, s), rng)?;
        }
        let y = bernoulli(tree.state(&path).expectation(&obs), rng) as f64;
        let s = path[1..].iter().filter(|&&b| b == 1).count();
        let (alpha, beta) = oqt_coefficients(d, s);
        let (c, e) = isi_affine(path[0], d);
        est.add(&[beta * c], y - alpha - beta * e);
        records.push(OutcomeRecord::new(shot, path, vec![y]));
    }
    let e = est.solve()?;
    Ok(ProtocolOutcome { estimate: e.value[0], stderr: e.stderr[0], ledger: net.ledger, script: net.script, records })
}

struct Injected {
    dim: usize,
    p0: f64,
    states: [MixedState; 2],
}

fn inject(p: &Party) -> Result<Injected> {
    let psi = p.pure_input()?;
    let prog = first_program(p)?;
    require_unitary_program(prog, psi.dim())?;
    let (b0, b1) = isi_measure(prog, psi)?;
    Ok(Injected { dim: psi.dim(), p0: b0.probability, states: [b0.post_state, b1.post_state] })
}

/// Regressors for `c_a c_b tau + c_a e_b tau_A + e_a c_b tau_B`.
fn product_regressors(a: u8, da: usize, b: u8, db: usize) -> ([f64; 3], f64) {
    let (ca, ea) = isi_affine(a, da);
    let (cb, eb) = isi_affine(b, db);
    ([ca * cb, ca * eb, ea * cb], ea * eb)
}

/// Estimates `|<psi_o| W (U_A (x) U_B) |psi_A psi_B>|^2`.
///
/// Scheme I: `W` is the program `c` holds; its in-port halves are shared
/// with `a` and `b` as ebits and the two parities are combined into one.
/// Scheme II: `W` is `controlled(V)` with control at `a` and target at `b`,
/// where `V` is `b`'s second program, compiled into two remote CNOTs. The
/// readout is then the product of `a`'s and `b`'s measurement states.
pub fn run_triparty(
    scheme: TripartyScheme,
    a: &Party,
    b: &Party,
    c: &Party,
    shots: usize,
    rng: &mut dyn RngCore,
) -> Result<ProtocolOutcome> {
    if shots == 0 {
        return Err(QError::InvalidArgument("shots must be positive".into()));
    }
    match scheme {
        TripartyScheme::I => scheme_one(a, b, c, shots, rng),
        TripartyScheme::II => scheme_two(a, b, c, shots, rng),
    }
}

fn scheme_one(a: &Party, b: &Party, c: &Party, shots: usize, rng: &mut dyn RngCore) -> Result<ProtocolOutcome> {
    let (ia, ib) = (inject(a)?, inject(b)?);
    let joint = first_program(c)?;
    let big = ia.dim * ib.dim;
    require_unitary_program(joint, big)?;
    let psi_o = c.measurement()?;
    if psi_o.dim() != big {
        return Err(QError::DimensionMismatch(format!("readout of dimension {} for {big}", psi_o.dim())));
    }

    let mut net = Network::new(vec![a.clone(), b.clone(), c.clone()])?;
    for p in [a, b] {
        net.script.steps.push(ProtocolStep::PrepareState { party: p.name.clone() });
        net.script.steps.push(ProtocolStep::PrepareProgram { party: p.name.clone() });
    }
    net.script.steps.push(ProtocolStep::PrepareProgram { party: c.name.clone() });
    let ea = net.distribute_ebit(&c.name, &a.name, ia.dim)?;
    let eb = net.distribute_ebit(&c.name, &b.name, ib.dim)?;
    for (p, e) in [(a, ea), (b, eb)] {
        net.script.steps.push(ProtocolStep::IsiInject { party: p.name.clone() });
        net.consume_ebit(e, &p.name, &c.name)?;
        net.script.steps.push(ProtocolStep::OqtLink { from: p.name.clone(), to: c.name.clone(), ebit: Some(e) });
        net.broadcast(&p.name, 2)?;
    }
    net.script.steps.push(ProtocolStep::FinalMeasure { party: c.name.clone() });
    net.ledger.oqt_ops = 2;
    net.ledger.depth = 1;
    net.ledger.max_live_registers = 8;

    let layout = RegisterLayout::numbered(&[ia.dim, ib.dim]);
    let mut tree = BranchTree::new();
    for x in 0..2u8 {
        for y in 0..2u8 {
            let m = ia.states[x as usize].matrix().kron(ib.states[y as usize].matrix());
            tree.insert(vec![x, y], MixedState::with_layout_unchecked(layout.clone(), m));
        }
    }
    let obs = ComplexMatrix::projector(psi_o.vector());
    let mut est = LinearEstimator::new(3);
    let mut records = Vec::with_capacity(shots);
    for shot in 0..shots {
        let x = bernoulli(1.0 - ia.p0, rng);
        let y = bernoulli(1.0 - ib.p0, rng);
        let mut path = vec![x, y];
        // k = i OR j: the joint trivial projector is the product of the two.
        let k = tree.descend(&mut path, |s| oqt_step(joint, s), rng)?;
        let out = bernoulli(tree.state(&path).expectation(&obs), rng) as f64;
        let (alpha, beta) = oqt_coefficients(big, k as usize);
        let (reg, off) = product_regressors(x, ia.dim, y, ib.dim);
        est.add(&reg.map(|v| beta * v), out - alpha - beta * off);
        records.push(OutcomeRecord::new(shot, path, vec![out]));
    }
    let e = est.solve()?;
    Ok(ProtocolOutcome { estimate: e.value[0], stderr: e.stderr[0], ledger: net.ledger, script: net.script, records })
}

/// `controlled(v)` from `a`'s qubit 0 onto `b`'s qubit 1, every outcome.
///
/// Returns `(probability, correction bits, state)` per path.
fn controlled_paths(
    start: &SharedRegisters,
    v: &ComplexMatrix,
) -> Result<Vec<(f64, Vec<u8>, ComplexMatrix)>> {
    let (phase, [gc, gb, ga]) = controlled_abc(v);
    let (pa, pb) = (start.owners[0].clone(), start.owners[1].clone());
    let mut regs = start.clone();
    regs.local_gate(&pb, &gc, &[1])?;
    let mut out = Vec::with_capacity(16);
    for (k1, (p1, s1)) in remote_cnot_branches(&regs, 0, 1)?.into_iter().enumerate() {
        let mut mid = SharedRegisters { owners: regs.owners.clone(), rho: s1 };
        mid.local_gate(&pb, &gb, &[1])?;
        for (k2, (p2, s2)) in remote_cnot_branches(&mid, 0, 1)?.into_iter().enumerate() {
            let mut end = SharedRegisters { owners: regs.owners.clone(), rho: s2 };
            end.local_gate(&pb, &ga, &[1])?;
            end.local_gate(&pa, &phase, &[0])?;
            let bits = vec![(k1 >> 1) as u8, (k1 & 1) as u8, (k2 >> 1) as u8, (k2 & 1) as u8];
            out.push((p1 * p2, bits, end.rho));
        }
    }
    Ok(out)
}

fn scheme_two(a: &Party, b: &Party, c: &Party, shots: usize, rng: &mut dyn RngCore) -> Result<ProtocolOutcome> {
    let (ia, ib) = (inject(a)?, inject(b)?);
    if ia.dim != 2 || ib.dim != 2 {
        return Err(QError::InvalidArgument("the controlled-gate scheme acts on one qubit per party".into()));
    }
    let v_prog = b
        .holdings
        .programs
        .get(1)
        .ok_or_else(|| QError::Locality(format!("{} holds no controlled-gate program", b.name)))?;
    require_unitary_program(v_prog, 2)?;
    let v = channel_of_choi(v_prog)?.kraus_ops()[0].clone();
    let (oa, ob) = (a.measurement()?, b.measurement()?);
    for psi in [oa, ob] {
        if psi.dim() != 2 {
            return Err(QError::DimensionMismatch("readout must be a qubit state".into()));
        }
    }
    let owners = vec![a.name.clone(), b.name.clone()];

    // One execution through the network fixes the ledger and the script.
    let mut net = Network::new(vec![a.clone(), b.clone(), c.clone()])?;
    for p in [a, b] {
        net.script.steps.push(ProtocolStep::PrepareState { party: p.name.clone() });
        net.script.steps.push(ProtocolStep::PrepareProgram { party: p.name.clone() });
        net.script.steps.push(ProtocolStep::IsiInject { party: p.name.clone() });
        net.broadcast(&p.name, 1)?;
    }
    let (phase, [gc, gb, ga]) = controlled_abc(&v);
    let mut regs = SharedRegisters::new(owners.clone(), ia.states[0].matrix().kron(ib.states[0].matrix()))?;
    regs.local_gate(&b.name, &gc, &[1])?;
    net.script.steps.push(ProtocolStep::LocalGate { party: b.name.clone() });
    let e1 = net.distribute_ebit(&a.name, &b.name, 2)?;
    remote_cnot(&mut net, &mut regs, 0, 1, e1, rng)?;
    regs.local_gate(&b.name, &gb, &[1])?;
    net.script.steps.push(ProtocolStep::LocalGate { party: b.name.clone() });
    let e2 = net.distribute_ebit(&a.name, &b.name, 2)?;
    remote_cnot(&mut net, &mut regs, 0, 1, e2, rng)?;
    regs.local_gate(&b.name, &ga, &[1])?;
    regs.local_gate(&a.name, &phase, &[0])?;
    net.script.steps.push(ProtocolStep::LocalGate { party: b.name.clone() });
    net.script.steps.push(ProtocolStep::LocalGate { party: a.name.clone() });
    net.script.steps.push(ProtocolStep::FinalMeasure { party: a.name.clone() });
    net.script.steps.push(ProtocolStep::FinalMeasure { party: b.name.clone() });
    net.ledger.depth += 1;
    net.ledger.max_live_registers = 2 + 4 + 2;

    let pa = ComplexMatrix::projector(oa.vector());
    let pb = ComplexMatrix::projector(ob.vector());
    let id = ComplexMatrix::identity(2);
    let readouts = [pa.kron(&pb), pa.kron(&(&id - &pb)), (&id - &pa).kron(&pb), (&id - &pa).kron(&(&id - &pb))];
    let mut leaves: HashMap<(u8, u8), (Vec<f64>, Vec<(Vec<u8>, Vec<f64>)>)> = HashMap::new();
    let mut est = LinearEstimator::new(3);
    let mut records = Vec::with_capacity(shots);
    for shot in 0..shots {
        let x = bernoulli(1.0 - ia.p0, rng);
        let y = bernoulli(1.0 - ib.p0, rng);
        if !leaves.contains_key(&(x, y)) {
            let start = SharedRegisters::new(
                owners.clone(),
                ia.states[x as usize].matrix().kron(ib.states[y as usize].matrix()),
            )?;
            let paths = controlled_paths(&start, &v)?;
            let probs = paths.iter().map(|p| p.0).collect();
            let outs = paths
                .into_iter()
                .map(|(_, bits, rho)| (bits, readouts.iter().map(|r| (r * &rho).trace().re.max(0.0)).collect()))
                .collect();
            leaves.insert((x, y), (probs, outs));
        }
        let (probs, outs) = &leaves[&(x, y)];
        let (bits, readout) = &outs[sample_index(probs, rng)];
        let r = sample_index(readout, rng);
        let (ya, yb) = (u8::from(r < 2), u8::from(r % 2 == 0));
        let out = f64::from(ya * yb);
        let (reg, off) = product_regressors(x, 2, y, 2);
        est.add(&reg, out - off);
        let mut path = vec![x, y];
        path.extend(bits);
        records.push(OutcomeRecord::new(shot, path, vec![f64::from(ya), f64::from(yb)]));
    }
    let e = est.solve()?;
    Ok(ProtocolOutcome { estimate: e.value[0], stderr: e.stderr[0], ledger: net.ledger, script: net.script, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributed::HeldState;
    use crate::states::PureState;
    use crate::oblivious::multiparty_binary_bell;
    use crate::qmath::{gates, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pure(v: &ComplexMatrix) -> PureState {
        PureState::from_amplitudes(&v.to_vec()).unwrap()
    }

    fn prog(u: &ComplexMatrix) -> ChoiProgram {
        choi_of_unitary(u).unwrap()
    }

    fn overlap(psi_o: &ComplexMatrix, w: &ComplexMatrix, psi: &ComplexMatrix) -> f64 {
        psi_o.inner_product(&(w * psi)).norm_sqr()
    }

    fn within(out: &ProtocolOutcome, truth: f64) {
        assert!(
            (out.estimate - truth).abs() < 3.0 * out.stderr.max(1e-3),
            "estimate {} +- {} vs {truth}",
            out.estimate,
            out.stderr
        );
    }

    fn dbqc_parties(u_a: &[ComplexMatrix], u_b: &[ComplexMatrix], psi_in: &ComplexMatrix, psi_o: &ComplexMatrix) -> (Party, Party) {
        let mut alice = Party::new("alice").with_state(HeldState::Pure(pure(psi_in)));
        for u in u_a {
            alice = alice.with_program(prog(u));
        }
        let mut bob = Party::new("bob").with_measurement(pure(psi_o));
        for u in u_b {
            bob = bob.with_program(prog(u));
        }
        (alice, bob)
    }

    #[test]
    fn dbqc_identity_pipeline() {
        let id = ComplexMatrix::identity(2);
        let zero = ComplexMatrix::basis(2, 0);
        let (alice, bob) = dbqc_parties(&[id.clone()], &[id], &zero, &zero);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = run_dbqc(&alice, &bob, 100_000, &mut rng).unwrap();
        within(&out, 1.0);
        assert_eq!(out.ledger.oqt_ops, 2);
        assert_eq!(out.ledger.ebits_consumed, 1);
        assert_eq!(out.ledger.qt_corrections, 0);
        assert_eq!(out.records.len(), 100_000);
        out.script.validate().unwrap();
    }

    #[test]
    fn dbqc_hadamard_overlap() {
        let (alice, bob) =
            dbqc_parties(&[gates::h()], &[ComplexMatrix::identity(2)], &ComplexMatrix::basis(2, 0), &ComplexMatrix::basis(2, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        within(&run_dbqc(&alice, &bob, 100_000, &mut rng).unwrap(), 0.5);
    }

    #[test]
    fn dbqc_random_unitaries_and_identity_insertion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (ua, ub) = (random_unitary(2, &mut rng), random_unitary(2, &mut rng));
        let psi = random_unitary(2, &mut rng).col(0);
        let psi_o = random_unitary(2, &mut rng).col(0);
        let truth = overlap(&psi_o, &(&ub * &ua), &psi);
        let (alice, bob) = dbqc_parties(&[ua.clone()], &[ub.clone()], &psi, &psi_o);
        let base = run_dbqc(&alice, &bob, 100_000, &mut rng).unwrap();
        within(&base, truth);
        let id = ComplexMatrix::identity(2);
        let (alice, bob) = dbqc_parties(&[ua, id.clone()], &[id, ub], &psi, &psi_o);
        let padded = run_dbqc(&alice, &bob, 100_000, &mut rng).unwrap();
        within(&padded, truth);
        assert_eq!(padded.ledger.oqt_ops, 4);
        let gap = (base.estimate - padded.estimate).abs();
        assert!(gap < 3.0 * (base.stderr.powi(2) + padded.stderr.powi(2)).sqrt());
    }

    #[test]
    fn dbqc_rejects_missing_holdings() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let id = ComplexMatrix::identity(2);
        let zero = ComplexMatrix::basis(2, 0);
        let (alice, bob) = dbqc_parties(&[id.clone()], &[id], &zero, &zero);
        let mut no_basis = bob.clone();
        no_basis.holdings.measurement_basis = None;
        assert!(matches!(run_dbqc(&alice, &no_basis, 10, &mut rng), Err(QError::Locality(_))));
        let mut no_input = alice.clone();
        no_input.holdings.states.clear();
        assert!(matches!(run_dbqc(&no_input, &bob, 10, &mut rng), Err(QError::Locality(_))));
        assert!(matches!(run_dbqc(&alice, &bob, 0, &mut rng), Err(QError::InvalidArgument(_))));
    }

    fn triparty(
        ua: &ComplexMatrix,
        ub: &ComplexMatrix,
        joint: &ComplexMatrix,
        v: &ComplexMatrix,
        psi: [&ComplexMatrix; 2],
        psi_o: [&ComplexMatrix; 2],
    ) -> (Party, Party, Party) {
        let a = Party::new("a").with_state(HeldState::Pure(pure(psi[0]))).with_program(prog(ua)).with_measurement(pure(psi_o[0]));
        let b = Party::new("b")
            .with_state(HeldState::Pure(pure(psi[1])))
            .with_program(prog(ub))
            .with_program(prog(v))
            .with_measurement(pure(psi_o[1]));
        let c = Party::new("c").with_program(prog(joint)).with_measurement(pure(&psi_o[0].kron(psi_o[1])));
        (a, b, c)
    }

    #[test]
    fn triparty_identity_gives_one() {
        let id = ComplexMatrix::identity(2);
        let zero = ComplexMatrix::basis(2, 0);
        let (a, b, c) = triparty(&id, &id, &ComplexMatrix::identity(4), &id, [&zero, &zero], [&zero, &zero]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for scheme in [TripartyScheme::I, TripartyScheme::II] {
            within(&run_triparty(scheme, &a, &b, &c, 100_000, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn triparty_schemes_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // A program fixes its unitary only up to phase; the controlled gate
        // uses the canonical representative.
        let v = channel_of_choi(&prog(&random_unitary(2, &mut rng))).unwrap().kraus_ops()[0].clone();
        let cv = gates::controlled(&v);
        let ua = gates::h();
        let ub = ComplexMatrix::identity(2);
        let psi = [ComplexMatrix::basis(2, 0), random_unitary(2, &mut rng).col(0)];
        let psi_o = [random_unitary(2, &mut rng).col(0), random_unitary(2, &mut rng).col(0)];
        let truth = overlap(&psi_o[0].kron(&psi_o[1]), &(&cv * &ua.kron(&ub)), &psi[0].kron(&psi[1]));
        let (a, b, c) = triparty(&ua, &ub, &cv, &v, [&psi[0], &psi[1]], [&psi_o[0], &psi_o[1]]);
        let one = run_triparty(TripartyScheme::I, &a, &b, &c, 100_000, &mut rng).unwrap();
        let two = run_triparty(TripartyScheme::II, &a, &b, &c, 100_000, &mut rng).unwrap();
        within(&one, truth);
        within(&two, truth);
        assert_eq!(one.ledger.qt_corrections, 0);
        assert!(two.ledger.qt_corrections > 0);
        assert!(two.ledger.depth > one.ledger.depth);
        assert_eq!(two.ledger.oqt_ops, 0);
        for out in [&one, &two] {
            out.script.validate().unwrap();
            assert_eq!(out.ledger.ebits_consumed, out.ledger.ebits_distributed);
        }
    }

    #[test]
    fn scheme_one_with_cnot_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let id = ComplexMatrix::identity(2);
        let psi_o = [random_unitary(2, &mut rng).col(0), random_unitary(2, &mut rng).col(0)];
        let zero = ComplexMatrix::basis(2, 0);
        let truth = overlap(&psi_o[0].kron(&psi_o[1]), &(gates::cnot() * gates::h().kron(&id)), &zero.kron(&zero));
        let (a, b, c) = triparty(&gates::h(), &id, &gates::cnot(), &gates::x(), [&zero, &zero], [&psi_o[0], &psi_o[1]]);
        within(&run_triparty(TripartyScheme::I, &a, &b, &c, 100_000, &mut rng).unwrap(), truth);
    }

    #[test]
    fn concatenated_parity_matches_joint_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (u1, u2) = (random_unitary(2, &mut rng), random_unitary(2, &mut rng));
        let r1 = MixedState::from_matrix(ComplexMatrix::projector(&random_unitary(2, &mut rng).col(0))).unwrap();
        let r2 = MixedState::maximally_mixed(2);
        let (m0, m1) = multiparty_binary_bell(&[(prog(&u1), r1.clone()), (prog(&u2), r2.clone())]).unwrap();
        let joint = MixedState::from_matrix(r1.matrix().kron(r2.matrix())).unwrap();
        let (j0, j1) = oqt_step(&prog(&u1.kron(&u2)), &joint).unwrap();
        assert!((m0.probability - j0.probability).abs() < 1e-12);
        assert!(m0.post_state.matrix().approx_eq(j0.post_state.matrix(), 1e-12));
        assert!(m1.post_state.matrix().approx_eq(j1.post_state.matrix(), 1e-12));
    }
}
