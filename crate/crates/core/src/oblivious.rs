//! Oblivious primitives: state injection, binary-parity teleportation of
//! stored programs, flag-controlled unitaries and multiplexers.

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::error::{QError, Result};
use crate::estimate::LinearEstimator;
use crate::qmath::{
    embed_at, gates, kron_all, partial_trace_at, ComplexMatrix, RegisterLayout, C64, EPS, ONE, ZERO,
};
use crate::states::{bell_vector, ChoiProgram, MixedState, PureState};

/// Below this a branch is treated as unreachable.
const BRANCH_FLOOR: f64 = 1e-15;

/// Clock-shift operators `X^a Z^b` at index `a*d + b`.
#[derive(Clone, Debug)]
pub struct GeneralizedPauliBasis {
    dim: usize,
    ops: Vec<ComplexMatrix>,
}

impl GeneralizedPauliBasis {
    pub fn new(d: usize) -> Self {
        let shift = shift(d);
        let clock = clock(d);
        let mut ops = Vec::with_capacity(d * d);
        for a in 0..d {
            let xa = shift.pow(a);
            for b in 0..d {
                ops.push(&xa * &clock.pow(b));
            }
        }
        GeneralizedPauliBasis { dim: d, ops }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn get(&self, i: usize) -> &ComplexMatrix {
        &self.ops[i]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// `X|j> = |j+1 mod d>`
pub fn shift(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| if i == (j + 1) % d { ONE } else { ZERO })
}

/// `Z|j> = e^{2 pi i j/d}|j>`
pub fn clock(d: usize) -> ComplexMatrix {
    let w = 2.0 * std::f64::consts::PI / d as f64;
    ComplexMatrix::diag(&(0..d).map(|j| C64::from_polar(1.0, w * j as f64)).collect::<Vec<_>>())
}

/// One outcome of a binary projective measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryBranch {
    /// 0 for the trivial branch.
    pub parity: u8,
    pub probability: f64,
    pub post_state: MixedState,
}

fn make_branches(
    sigma0: ComplexMatrix,
    marginal: ComplexMatrix,
    layout: RegisterLayout,
) -> (BinaryBranch, BinaryBranch) {
    let sigma1 = &marginal - &sigma0;
    let p0 = sigma0.trace().re.clamp(0.0, 1.0);
    let p1 = sigma1.trace().re.clamp(0.0, 1.0);
    let d = sigma0.rows();
    let normalize = |m: ComplexMatrix, p: f64| {
        if p < BRANCH_FLOOR {
            ComplexMatrix::identity(d).scale_re(1.0 / d as f64)
        } else {
            m.scale_re(1.0 / p)
        }
    };
    (
        BinaryBranch {
            parity: 0,
            probability: p0,
            post_state: MixedState::with_layout_unchecked(layout.clone(), normalize(sigma0, p0)),
        },
        BinaryBranch {
            parity: 1,
            probability: p1,
            post_state: MixedState::with_layout_unchecked(layout, normalize(sigma1, p1)),
        },
    )
}

/// `sum_{a,b} prog[(o,a),(o',b)] m[a,b]`
fn contract_in_port(prog: &ComplexMatrix, dout: usize, din: usize, m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(dout, dout, |o, op| {
        let mut acc = ZERO;
        for a in 0..din {
            for b in 0..din {
                let w = m[(a, b)];
                if w != ZERO {
                    acc += prog[(o * din + a, op * din + b)] * w;
                }
            }
        }
        acc
    })
}

fn in_port_marginal(program: &ChoiProgram) -> ComplexMatrix {
    partial_trace_at(&program.density(), &[0], &[program.out_dim(), program.in_dim()])
}

/// Measures `{|inject*><inject*|, complement}` on the program's in port.
///
/// Branch 0 leaves `U|inject>` on the out port with probability `1/d`.
pub fn isi_measure(program: &ChoiProgram, inject: &PureState) -> Result<(BinaryBranch, BinaryBranch)> {
    if inject.dim() != program.in_dim() {
        return Err(QError::DimensionMismatch(format!(
            "injected state of dimension {} into in port of dimension {}",
            inject.dim(),
            program.in_dim()
        )));
    }
    let phi = inject.vector();
    let m = ComplexMatrix::from_fn(phi.rows(), phi.rows(), |a, b| phi[(a, 0)] * phi[(b, 0)].conj());
    let sigma0 = contract_in_port(&program.density(), program.out_dim(), program.in_dim(), &m);
    let layout = RegisterLayout::single(program.out_dim());
    Ok(make_branches(sigma0, in_port_marginal(program), layout))
}

/// Binary Bell measurement `{|w><w|, I - |w><w|}` on (in port, input).
///
/// Branch 0 carries `U rho U†` with probability `1/d^2`; branch 1 carries
/// `(d I - U rho U†)/(d^2 - 1)`.
pub fn oqt_step(program: &ChoiProgram, input: &MixedState) -> Result<(BinaryBranch, BinaryBranch)> {
    if input.dim() != program.in_dim() {
        return Err(QError::DimensionMismatch(format!(
            "input of dimension {} into in port of dimension {}",
            input.dim(),
            program.in_dim()
        )));
    }
    let sigma0 = contract_in_port(&program.density(), program.out_dim(), program.in_dim(), input.matrix())
        .scale_re(1.0 / program.in_dim() as f64);
    let layout = if program.out_dim() == input.dim() {
        input.layout().clone()
    } else {
        RegisterLayout::single(program.out_dim())
    };
    Ok(make_branches(sigma0, in_port_marginal(program), layout))
}

/// How parity outcomes are chosen along a teleportation chain.
pub enum Parities<'a> {
    Sampled(&'a mut dyn RngCore),
    Forced(&'a [u8]),
}

/// Result of one pass through a chain of teleported programs.
#[derive(Clone, Debug, PartialEq)]
pub struct OqtRecord {
    pub parity_bits: Vec<u8>,
    /// Number of 1s in `parity_bits`.
    pub s: usize,
    pub final_state: MixedState,
    /// Probability of this parity pattern.
    pub path_probability: f64,
    /// `final_state = alpha I + beta U rho U†` for unitary programs.
    pub alpha: f64,
    pub beta: f64,
    /// Sampled eigenvalue of an observable on `final_state`, if measured.
    pub readout: Option<f64>,
}

impl OqtRecord {
    /// Draws one eigenvalue of `observable` with Born probabilities.
    pub fn measure(mut self, observable: &ComplexMatrix, rng: &mut dyn RngCore) -> Result<Self> {
        self.readout = Some(sample_eigenvalue(self.final_state.matrix(), observable, rng)?);
        Ok(self)
    }
}

/// `beta_s = (-1/(d^2-1))^s`, `alpha_s = (1 - beta_s)/d`.
pub fn oqt_coefficients(d: usize, s: usize) -> (f64, f64) {
    let d2 = (d * d) as f64;
    let beta = (-1.0 / (d2 - 1.0)).powi(s as i32);
    ((1.0 - beta) / d as f64, beta)
}

/// `alpha_s I + beta_s U rho U†`
pub fn oqt_closed_form(u: &ComplexMatrix, rho: &ComplexMatrix, s: usize) -> ComplexMatrix {
    let d = u.rows();
    let (alpha, beta) = oqt_coefficients(d, s);
    &ComplexMatrix::identity(d).scale_re(alpha) + &u.conjugate(rho).scale_re(beta)
}

pub fn oqt_sequence(programs: &[ChoiProgram], input: &MixedState, parities: Parities<'_>) -> Result<OqtRecord> {
    let mut parities = parities;
    if let Parities::Forced(bits) = &parities {
        if bits.len() != programs.len() {
            return Err(QError::DimensionMismatch(format!(
                "{} forced parities for {} programs",
                bits.len(),
                programs.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(QError::InvalidArgument("parity bits must be 0 or 1".into()));
        }
    }
    let mut state = input.clone();
    let mut bits = Vec::with_capacity(programs.len());
    let mut path_probability = 1.0;
    for (k, program) in programs.iter().enumerate() {
        let (b0, b1) = oqt_step(program, &state)?;
        let bit = match &mut parities {
            Parities::Forced(f) => f[k],
            Parities::Sampled(rng) => u8::from(rng.random::<f64>() >= b0.probability),
        };
        let branch = if bit == 0 { b0 } else { b1 };
        path_probability *= branch.probability;
        state = branch.post_state;
        bits.push(bit);
    }
    let s = bits.iter().filter(|&&b| b == 1).count();
    let (alpha, beta) = oqt_coefficients(state.dim(), s);
    Ok(OqtRecord { parity_bits: bits, s, final_state: state, path_probability, alpha, beta, readout: None })
}

/// Unbiased estimate of `tr(O U rho U†)` from records of any parity mix.
///
/// Each record satisfies `E[y] = alpha_s tr(O) + beta_s tau`; `tau` is
/// fitted by least squares with a robust standard error.
pub fn oqt_estimate_observable(records: &[OqtRecord], observable: &ComplexMatrix) -> Result<(f64, f64)> {
    let first = records.first().ok_or_else(|| QError::Empty("no OQT records".into()))?;
    let d = first.final_state.dim();
    if observable.rows() != d || !observable.is_square() {
        return Err(QError::DimensionMismatch(format!("observable {}x{} on dim {d}", observable.rows(), observable.cols())));
    }
    if observable.hermiticity_residual() > EPS {
        return Err(QError::InvalidArgument("observable must be Hermitian".into()));
    }
    let tr_o = observable.trace().re;
    let mut est = LinearEstimator::new(1);
    for r in records {
        if r.final_state.dim() != d {
            return Err(QError::DimensionMismatch("records differ in dimension".into()));
        }
        let y = r.readout.unwrap_or_else(|| r.final_state.expectation(observable));
        est.add(&[r.beta], y - r.alpha * tr_o);
    }
    let e = est.solve()?;
    Ok((e.value[0], e.stderr[0]))
}

/// Samples an eigenvalue of `observable` in state `rho`.
pub fn sample_eigenvalue(rho: &ComplexMatrix, observable: &ComplexMatrix, rng: &mut dyn RngCore) -> Result<f64> {
    if observable.rows() != rho.rows() {
        return Err(QError::DimensionMismatch("observable and state differ in dimension".into()));
    }
    let (vals, vecs) = observable.hermitian_eigen();
    let probs: Vec<f64> = (0..vals.len())
        .map(|k| {
            let v = vecs.col(k);
            v.inner_product(&(rho * &v)).re.max(0.0)
        })
        .collect();
    Ok(vals[sample_index(&probs, rng)])
}

/// Index drawn from unnormalized weights.
pub(crate) fn sample_index(weights: &[f64], rng: &mut dyn RngCore) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// Joint binary measurement whose trivial outcome requires every part to
/// teleport cleanly.
pub fn multiparty_binary_bell(parts: &[(ChoiProgram, MixedState)]) -> Result<(BinaryBranch, BinaryBranch)> {
    if parts.is_empty() {
        return Err(QError::Empty("no parts".into()));
    }
    let mut sigma0s = Vec::with_capacity(parts.len());
    let mut marginals = Vec::with_capacity(parts.len());
    for (program, input) in parts {
        let (b0, _) = oqt_step(program, input)?;
        sigma0s.push(b0.post_state.matrix().scale_re(b0.probability));
        marginals.push(in_port_marginal(program));
    }
    let sigma0 = kron_all(&sigma0s.iter().collect::<Vec<_>>());
    let marginal = kron_all(&marginals.iter().collect::<Vec<_>>());
    let layout = RegisterLayout::numbered(&parts.iter().map(|(p, _)| p.out_dim()).collect::<Vec<_>>());
    Ok(make_branches(sigma0, marginal, layout))
}

/// Local parity shots grouped into all-trivial versus the rest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParityCounts {
    pub shots: usize,
    pub part_zero_counts: Vec<usize>,
    pub all_zero: usize,
    pub rest: usize,
    /// Expected shots per all-trivial event, `prod_k d_k^2`.
    pub efficiency_factor: f64,
}

impl ParityCounts {
    pub fn all_zero_frequency(&self) -> f64 {
        self.all_zero as f64 / self.shots as f64
    }
}

pub fn local_parity_sampling(
    parts: &[(ChoiProgram, MixedState)],
    shots: usize,
    rng: &mut dyn RngCore,
) -> Result<ParityCounts> {
    if shots == 0 {
        return Err(QError::InvalidArgument("shots must be positive".into()));
    }
    if parts.is_empty() {
        return Err(QError::Empty("no parts".into()));
    }
    let p0s = parts.iter().map(|(p, s)| oqt_step(p, s).map(|(b0, _)| b0.probability)).collect::<Result<Vec<_>>>()?;
    let mut part_zero_counts = vec![0; parts.len()];
    let mut all_zero = 0;
    for _ in 0..shots {
        let mut all = true;
        for (k, p0) in p0s.iter().enumerate() {
            if rng.random::<f64>() < *p0 {
                part_zero_counts[k] += 1;
            } else {
                all = false;
            }
        }
        all_zero += usize::from(all);
    }
    let efficiency_factor = parts.iter().map(|(p, _)| (p.in_dim() * p.in_dim()) as f64).product();
    Ok(ParityCounts { shots, part_zero_counts, all_zero, rest: shots - all_zero, efficiency_factor })
}

/// A unitary that can be applied but not inspected.
pub trait BlackBox {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[C64]) -> Vec<C64>;
}

/// Black box backed by a matrix the caller owns.
#[derive(Clone, Debug)]
pub struct MatrixBox {
    u: ComplexMatrix,
}

impl MatrixBox {
    pub fn new(u: ComplexMatrix) -> Result<Self> {
        let r = u.unitarity_residual();
        if r > EPS {
            return Err(QError::NotUnitary(r));
        }
        Ok(MatrixBox { u })
    }

    /// Box for `U*`.
    pub fn conjugate(&self) -> MatrixBox {
        MatrixBox { u: self.u.conj() }
    }
}

impl BlackBox for MatrixBox {
    fn dim(&self) -> usize {
        self.u.rows()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        (&self.u * &ComplexMatrix::column(v)).to_vec()
    }
}

/// Black box backed by a closure.
pub struct FnBox<F: Fn(&[C64]) -> Vec<C64>> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[C64]) -> Vec<C64>> FnBox<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnBox { dim, f }
    }
}

impl<F: Fn(&[C64]) -> Vec<C64>> BlackBox for FnBox<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        (self.f)(v)
    }
}

/// A stored unitary program used as a black box through its trivial
/// injection branch: `v -> sqrt(d) (I (x) <v*|)|U>`.
#[derive(Clone, Debug)]
pub struct ProgramBox {
    vector: ComplexMatrix,
    out_dim: usize,
    in_dim: usize,
}

impl ProgramBox {
    pub fn new(program: &ChoiProgram) -> Result<Self> {
        let vector = program.vector().ok_or(QError::MixedProgram)?.clone();
        Ok(ProgramBox { vector, out_dim: program.out_dim(), in_dim: program.in_dim() })
    }
}

impl BlackBox for ProgramBox {
    fn dim(&self) -> usize {
        self.in_dim
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let scale = (self.in_dim as f64).sqrt();
        (0..self.out_dim)
            .map(|o| (0..self.in_dim).map(|i| self.vector[(o * self.in_dim + i, 0)] * v[i]).sum::<C64>() * scale)
            .collect()
    }
}

/// Applies `bx` to register `pos` of a state vector over `dims`.
pub fn apply_box_at(state: &[C64], bx: &dyn BlackBox, pos: usize, dims: &[usize]) -> Vec<C64> {
    let d = dims[pos];
    let stride: usize = dims[pos + 1..].iter().product();
    let block = d * stride;
    let mut out = state.to_vec();
    let mut slice = vec![ZERO; d];
    for hi in (0..state.len()).step_by(block) {
        for lo in 0..stride {
            for (j, s) in slice.iter_mut().enumerate() {
                *s = state[hi + j * stride + lo];
            }
            for (j, v) in bx.apply(&slice).into_iter().enumerate() {
                out[hi + j * stride + lo] = v;
            }
        }
    }
    out
}

/// Matrix of a black box acting on register `pos`, built column by column.
fn box_operator_at(bx: &dyn BlackBox, pos: usize, dims: &[usize]) -> ComplexMatrix {
    let n: usize = dims.iter().product();
    let mut out = ComplexMatrix::zeros(n, n);
    let mut e = vec![ZERO; n];
    for col in 0..n {
        e[col] = ONE;
        for (row, v) in apply_box_at(&e, bx, pos, dims).into_iter().enumerate() {
            out[(row, col)] = v;
        }
        e[col] = ZERO;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FlagKind {
    Omega,
    OmegaPerp,
}

/// Known eigenstate of `U (x) U*` held in a pair of registers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlagState {
    pub which: FlagKind,
    pub dim: usize,
}

impl FlagState {
    pub fn omega(dim: usize) -> Self {
        FlagState { which: FlagKind::Omega, dim }
    }

    pub fn omega_perp(dim: usize) -> Self {
        FlagState { which: FlagKind::OmegaPerp, dim }
    }

    /// Density matrix on the `d^2`-dimensional pair; `omega_perp` is
    /// `(I - |w><w|)/(d^2 - 1)`.
    pub fn density(&self) -> ComplexMatrix {
        let w = ComplexMatrix::projector(&bell_vector(self.dim));
        match self.which {
            FlagKind::Omega => w,
            FlagKind::OmegaPerp => {
                let d2 = self.dim * self.dim;
                (&ComplexMatrix::identity(d2) - &w).scale_re(1.0 / (d2 as f64 - 1.0))
            }
        }
    }
}

fn check_box_pair(u: &dyn BlackBox, uc: &dyn BlackBox, d: usize) -> Result<()> {
    if u.dim() != d || uc.dim() != d {
        return Err(QError::DimensionMismatch(format!(
            "black boxes of dimension {} and {} for d = {d}",
            u.dim(),
            uc.dim()
        )));
    }
    Ok(())
}

/// Flag construction on `(control m, data d, ancilla d, flag d, flag d)`:
/// swap `(data, ancilla)` with the flag pair where `I - P` holds, apply
/// `U (x) U*` to the data slot, swap back.
fn flag_controlled(
    proj: &ComplexMatrix,
    u: &dyn BlackBox,
    uc: &dyn BlackBox,
    d: usize,
) -> ComplexMatrix {
    let m = proj.rows();
    let d2 = d * d;
    let dims = [m, d, d, d, d];
    let pair_swap = gates::swap(d2);
    let off = &ComplexMatrix::identity(m) - proj;
    let cswap = &off.kron(&pair_swap) + &proj.kron(&ComplexMatrix::identity(d2 * d2));
    let hat = &box_operator_at(u, 1, &dims) * &box_operator_at(uc, 2, &dims);
    &(&cswap * &hat) * &cswap
}

/// Full flag-controlled unitary on (control qubit, data, ancilla, flag pair).
///
/// With the flag in `|w>`, the action on (control, data, ancilla) is
/// `P0 (x) I + P1 (x) (U (x) U*)` with no relative phase.
pub fn oqc_build(apply_u: &dyn BlackBox, apply_u_conj: &dyn BlackBox, d: usize, flag: &FlagState) -> Result<ComplexMatrix> {
    check_box_pair(apply_u, apply_u_conj, d)?;
    if flag.dim != d {
        return Err(QError::DimensionMismatch(format!("flag of dimension {} for d = {d}", flag.dim)));
    }
    let p1 = ComplexMatrix::projector(&ComplexMatrix::basis(2, 1));
    Ok(flag_controlled(&p1, apply_u, apply_u_conj, d))
}

/// `(I (x) <w|) W (I (x) |w>)` on everything but the flag pair.
pub fn oqc_compress(w: &ComplexMatrix, d: usize) -> ComplexMatrix {
    let rest = w.rows() / (d * d * d * d) * d * d;
    let omega = bell_vector(d);
    let iso = ComplexMatrix::identity(rest).kron(&omega);
    &(&iso.adjoint() * w) * &iso
}

/// `tr_flag W (rho (x) flag) W†`
pub fn oqc_induced(w: &ComplexMatrix, flag: &FlagState, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d2 = flag.dim * flag.dim;
    if rho.rows() * d2 != w.rows() {
        return Err(QError::DimensionMismatch(format!(
            "state of dimension {} with flag pair {d2} for operator of size {}",
            rho.rows(),
            w.rows()
        )));
    }
    let joint = w.conjugate(&rho.kron(&flag.density()));
    Ok(partial_trace_at(&joint, &[0], &[rho.rows(), d2]))
}

/// `P0 (x) I + P1 (x) (U (x) U*)`, the target of the flag construction.
pub fn controlled_pair(u: &ComplexMatrix) -> ComplexMatrix {
    gates::controlled(&u.kron(&u.conj()))
}

/// `sum_i P_i (x) (U_i (x) U_i*)` on (control, data, ancilla), built as a
/// product of one flag-controlled stage per projector.
pub fn multiplexer_build(
    controls: &[ComplexMatrix],
    programs: &[(&dyn BlackBox, &dyn BlackBox)],
    d: usize,
) -> Result<ComplexMatrix> {
    if controls.is_empty() {
        return Err(QError::Empty("no control projectors".into()));
    }
    if controls.len() != programs.len() {
        return Err(QError::DimensionMismatch(format!(
            "{} projectors for {} programs",
            controls.len(),
            programs.len()
        )));
    }
    let m = controls[0].rows();
    let mut sum = ComplexMatrix::zeros(m, m);
    for p in controls {
        if p.rows() != m || !p.is_square() {
            return Err(QError::DimensionMismatch("projectors differ in dimension".into()));
        }
        let r = (p * p).max_abs_diff(p).max(p.hermiticity_residual());
        if r > EPS {
            return Err(QError::NotResolution(r));
        }
        sum = &sum + p;
    }
    let r = sum.max_abs_diff(&ComplexMatrix::identity(m));
    if r > EPS {
        return Err(QError::NotResolution(r));
    }
    let mut out = ComplexMatrix::identity(m * d * d);
    for (p, (u, uc)) in controls.iter().zip(programs) {
        check_box_pair(*u, *uc, d)?;
        let stage = oqc_compress(&flag_controlled(p, *u, *uc, d), d);
        out = &stage * &out;
    }
    Ok(out)
}

/// One gate of a compiled circuit on qubits numbered from the most
/// significant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateOp {
    pub name: String,
    pub qubits: Vec<usize>,
    pub angle: Option<f64>,
}

impl GateOp {
    fn ry(q: usize, angle: f64) -> Self {
        GateOp { name: "RY".into(), qubits: vec![q], angle: Some(angle) }
    }

    fn cnot(control: usize, target: usize) -> Self {
        GateOp { name: "CNOT".into(), qubits: vec![control, target], angle: None }
    }

    pub fn matrix(&self) -> Result<ComplexMatrix> {
        match (self.name.as_str(), self.angle) {
            ("RY", Some(a)) => Ok(gates::ry(a)),
            ("RZ", Some(a)) => Ok(gates::rz(a)),
            (name, None) => gates::by_name(name).ok_or_else(|| QError::InvalidArgument(format!("unknown gate {name}"))),
            (name, Some(_)) => Err(QError::InvalidArgument(format!("gate {name} takes no angle"))),
        }
    }
}

/// Three-CNOT Toffoli on controls 0, 1 and target 2, exact up to a diagonal
/// phase, so it agrees with Toffoli under a computational-basis readout.
pub fn toffoli_boundary_compile() -> Vec<GateOp> {
    let q = std::f64::consts::FRAC_PI_4;
    vec![
        GateOp::ry(2, q),
        GateOp::cnot(1, 2),
        GateOp::ry(2, q),
        GateOp::cnot(0, 2),
        GateOp::ry(2, -q),
        GateOp::cnot(1, 2),
        GateOp::ry(2, -q),
    ]
}

/// Product of a gate sequence on `n` qubits.
pub fn sequence_unitary(seq: &[GateOp], n: usize) -> Result<ComplexMatrix> {
    let dims = vec![2; n];
    let mut u = ComplexMatrix::identity(1 << n);
    for g in seq {
        if g.qubits.iter().any(|&q| q >= n) {
            return Err(QError::InvalidArgument(format!("gate {} outside {n} qubits", g.name)));
        }
        u = &embed_at(&g.matrix()?, &g.qubits, &dims)? * &u;
    }
    Ok(u)
}

/// Outcome distribution of measuring qubit `target` of an `n`-qubit vector.
pub fn qubit_marginal(psi: &ComplexMatrix, target: usize, n: usize) -> [f64; 2] {
    let mut p = [0.0; 2];
    for (idx, a) in psi.to_vec().iter().enumerate() {
        p[(idx >> (n - 1 - target)) & 1] += a.norm_sqr();
    }
    p
}

pub fn toffoli() -> ComplexMatrix {
    gates::controlled(&gates::cnot())
}
