//! Quantum states, CPTP channels and the channel-state duality.
//!
//! A Choi program is stored with port order `(out, in)`: the program of a
//! unitary `U` is `(U (x) I)|w>` with `|w> = sum_i |ii>/sqrt(d)`, normalized
//! to unit trace.

use crate::error::{QError, Result};
use crate::qmath::{
    c, complete_to_unitary, partial_trace_at, ComplexMatrix, RegisterLayout, C64, EPS, ONE,
};

/// Normalized state vector over a register layout.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    layout: RegisterLayout,
    amplitudes: ComplexMatrix,
}

impl PureState {
    pub fn new(layout: RegisterLayout, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(QError::DimensionMismatch(format!(
                "{} amplitudes for layout of dimension {}",
                amplitudes.len(),
                layout.total_dim()
            )));
        }
        let v = ComplexMatrix::column(&amplitudes);
        if !v.is_finite() {
            return Err(QError::NonFinite("state amplitudes".into()));
        }
        let norm = v.frobenius_norm();
        if (norm - 1.0).abs() > EPS {
            return Err(QError::InvalidState(format!("norm {norm} != 1")));
        }
        Ok(PureState { layout, amplitudes: v })
    }

    /// Single-register state; amplitudes are normalized here.
    pub fn from_amplitudes(amplitudes: &[C64]) -> Result<Self> {
        let v = ComplexMatrix::column(amplitudes);
        let norm = v.frobenius_norm();
        if !(norm > 1e-300) || !v.is_finite() {
            return Err(QError::InvalidState("zero or non-finite vector".into()));
        }
        Ok(PureState { layout: RegisterLayout::single(amplitudes.len()), amplitudes: v.scale_re(1.0 / norm) })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        PureState { layout: RegisterLayout::single(dim), amplitudes: ComplexMatrix::basis(dim, index) }
    }

    pub(crate) fn from_vector_unchecked(layout: RegisterLayout, v: ComplexMatrix) -> Self {
        PureState { layout, amplitudes: v }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.rows()
    }

    /// Column vector of amplitudes.
    pub fn vector(&self) -> &ComplexMatrix {
        &self.amplitudes
    }

    pub fn amplitudes(&self) -> Vec<C64> {
        self.amplitudes.to_vec()
    }

    pub fn density(&self) -> MixedState {
        MixedState { layout: self.layout.clone(), matrix: ComplexMatrix::projector(&self.amplitudes) }
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        Ok(PureState {
            layout: self.layout.concat(&other.layout)?,
            amplitudes: self.amplitudes.kron(&other.amplitudes),
        })
    }

    pub fn overlap(&self, other: &PureState) -> C64 {
        self.amplitudes.inner_product(&other.amplitudes)
    }
}

/// Density matrix over a register layout.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    layout: RegisterLayout,
    matrix: ComplexMatrix,
}

impl MixedState {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(layout: RegisterLayout, matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != layout.total_dim() {
            return Err(QError::DimensionMismatch(format!(
                "{}x{} matrix for layout of dimension {}",
                matrix.rows(),
                matrix.cols(),
                layout.total_dim()
            )));
        }
        validate_density(&matrix)?;
        Ok(MixedState { layout, matrix })
    }

    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        let d = matrix.rows();
        Self::new(RegisterLayout::single(d), matrix)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        MixedState {
            layout: RegisterLayout::single(d),
            matrix: ComplexMatrix::identity(d).scale_re(1.0 / d as f64),
        }
    }

    pub(crate) fn with_layout_unchecked(layout: RegisterLayout, matrix: ComplexMatrix) -> Self {
        MixedState { layout, matrix }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `Re tr(O rho)`
    pub fn expectation(&self, observable: &ComplexMatrix) -> f64 {
        (observable * &self.matrix).trace().re
    }

    pub fn tensor(&self, other: &MixedState) -> Result<MixedState> {
        Ok(MixedState {
            layout: self.layout.concat(&other.layout)?,
            matrix: self.matrix.kron(&other.matrix),
        })
    }

    pub fn evolve(&self, u: &ComplexMatrix) -> Result<MixedState> {
        if u.rows() != self.dim() || !u.is_square() {
            return Err(QError::DimensionMismatch(format!("{}x{} on dim {}", u.rows(), u.cols(), self.dim())));
        }
        Ok(MixedState { layout: self.layout.clone(), matrix: u.conjugate(&self.matrix) })
    }

    /// Reduced state on the listed registers, in that order.
    pub fn reduce(&self, keep: &[&str]) -> Result<MixedState> {
        let m = crate::qmath::partial_trace(&self.matrix, keep, &self.layout)?;
        Ok(MixedState { layout: self.layout.subset(keep)?, matrix: m })
    }
}

pub(crate) fn validate_density(m: &ComplexMatrix) -> Result<()> {
    if !m.is_finite() {
        return Err(QError::NonFinite("density matrix".into()));
    }
    let herm = m.hermiticity_residual();
    if herm > EPS {
        return Err(QError::InvalidState(format!("not Hermitian (residual {herm:.3e})")));
    }
    let tr = m.trace();
    if (tr - ONE).norm() > EPS {
        return Err(QError::InvalidState(format!("trace {tr} != 1")));
    }
    let (vals, _) = m.hermitian_eigen();
    let min = vals.last().copied().unwrap_or(0.0);
    if min < -EPS {
        return Err(QError::NotPsd(min));
    }
    Ok(())
}

/// CPTP map in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Rejects Kraus sets with `||sum K†K - I||_max > 1e-10`.
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| QError::Empty("Kraus list".into()))?;
        let (out_dim, in_dim) = (first.rows(), first.cols());
        if kraus.iter().any(|k| k.rows() != out_dim || k.cols() != in_dim) {
            return Err(QError::DimensionMismatch("Kraus operators differ in shape".into()));
        }
        let residual = completeness_residual(&kraus);
        if residual > EPS {
            return Err(QError::NotTracePreserving(residual));
        }
        Ok(KrausChannel { in_dim, out_dim, kraus })
    }

    pub fn unitary(u: &ComplexMatrix) -> Result<Self> {
        let r = u.unitarity_residual();
        if r > EPS {
            return Err(QError::NotUnitary(r));
        }
        Ok(KrausChannel { in_dim: u.cols(), out_dim: u.rows(), kraus: vec![u.clone()] })
    }

    pub fn identity(d: usize) -> Self {
        KrausChannel { in_dim: d, out_dim: d, kraus: vec![ComplexMatrix::identity(d)] }
    }

    /// `rho -> tr(rho) I/d`, Kraus operators `|i><j|/sqrt(d)`.
    pub fn completely_depolarizing(d: usize) -> Self {
        let s = 1.0 / (d as f64).sqrt();
        let kraus = (0..d * d)
            .map(|k| {
                let mut m = ComplexMatrix::zeros(d, d);
                m[(k / d, k % d)] = c(s, 0.0);
                m
            })
            .collect();
        KrausChannel { in_dim: d, out_dim: d, kraus }
    }

    /// Qubit dephasing `{sqrt(1-p) I, sqrt(p) Z}`.
    pub fn dephasing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(QError::InvalidArgument(format!("dephasing probability {p}")));
        }
        let z = crate::qmath::gates::z();
        KrausChannel::new(vec![ComplexMatrix::identity(2).scale_re((1.0 - p).sqrt()), z.scale_re(p.sqrt())])
    }

    /// Qubit amplitude damping `K0 = diag(1, sqrt(1-g))`, `K1 = sqrt(g)|0><1|`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(QError::InvalidArgument(format!("damping rate {gamma}")));
        }
        let k0 = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, (1.0 - gamma).sqrt()]);
        let k1 = ComplexMatrix::from_real(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0]);
        KrausChannel::new(vec![k0, k1])
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus_ops(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// Applies `self` after `first`.
    pub fn after(&self, first: &KrausChannel) -> Result<KrausChannel> {
        if first.out_dim != self.in_dim {
            return Err(QError::DimensionMismatch(format!(
                "cannot feed dimension {} into {}",
                first.out_dim, self.in_dim
            )));
        }
        let kraus = self.kraus.iter().flat_map(|b| first.kraus.iter().map(move |a| b * a)).collect();
        Ok(KrausChannel { in_dim: first.in_dim, out_dim: self.out_dim, kraus })
    }

    /// Applies the Kraus sum to a raw operator.
    pub fn apply_matrix(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        self.kraus
            .iter()
            .fold(ComplexMatrix::zeros(self.out_dim, self.out_dim), |acc, k| &acc + &k.conjugate(rho))
    }
}

fn completeness_residual(kraus: &[ComplexMatrix]) -> f64 {
    let d = kraus[0].cols();
    let sum = kraus.iter().fold(ComplexMatrix::zeros(d, d), |acc, k| &acc + &(&k.adjoint() * k));
    sum.max_abs_diff(&ComplexMatrix::identity(d))
}

/// `sum_i K_i rho K_i†`
pub fn apply_channel(ch: &KrausChannel, rho: &MixedState) -> Result<MixedState> {
    if rho.dim() != ch.in_dim {
        return Err(QError::DimensionMismatch(format!("channel input {} vs state {}", ch.in_dim, rho.dim())));
    }
    let layout = if ch.in_dim == ch.out_dim { rho.layout().clone() } else { RegisterLayout::single(ch.out_dim) };
    Ok(MixedState::with_layout_unchecked(layout, ch.apply_matrix(rho.matrix())))
}

/// `sum_i |ii>/sqrt(d)` over registers `A, B`.
pub fn bell_state(d: usize) -> PureState {
    let layout = RegisterLayout::new([("A", d), ("B", d)]).expect("valid layout");
    PureState::from_vector_unchecked(layout, bell_vector(d))
}

pub(crate) fn bell_vector(d: usize) -> ComplexMatrix {
    let mut w = ComplexMatrix::zeros(d * d, 1);
    let s = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        w[(i * d + i, 0)] = c(s, 0.0);
    }
    w
}

#[derive(Clone, Debug, PartialEq)]
enum ChoiRepr {
    Pure(ComplexMatrix),
    Mixed(ComplexMatrix),
}

/// A gate or channel stored as its normalized Choi state over `(out, in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiProgram {
    out_dim: usize,
    in_dim: usize,
    repr: ChoiRepr,
}

impl ChoiProgram {
    /// Mixed program from a density matrix over `(out, in)`; checks the
    /// state is valid and its `in` marginal is `I/d_in`.
    pub fn from_density(out_dim: usize, in_dim: usize, rho: ComplexMatrix) -> Result<Self> {
        if !rho.is_square() || rho.rows() != out_dim * in_dim {
            return Err(QError::DimensionMismatch(format!(
                "Choi matrix {}x{} for ports {out_dim}x{in_dim}",
                rho.rows(),
                rho.cols()
            )));
        }
        validate_density(&rho)?;
        let marginal = partial_trace_at(&rho, &[1], &[out_dim, in_dim]);
        let r = marginal.max_abs_diff(&ComplexMatrix::identity(in_dim).scale_re(1.0 / in_dim as f64));
        if r > EPS {
            return Err(QError::NotTracePreserving(r));
        }
        Ok(ChoiProgram { out_dim, in_dim, repr: ChoiRepr::Mixed(rho) })
    }

    pub(crate) fn mixed_unchecked(out_dim: usize, in_dim: usize, rho: ComplexMatrix) -> Self {
        ChoiProgram { out_dim, in_dim, repr: ChoiRepr::Mixed(rho) }
    }

    pub(crate) fn pure_unchecked(out_dim: usize, in_dim: usize, v: ComplexMatrix) -> Self {
        ChoiProgram { out_dim, in_dim, repr: ChoiRepr::Pure(v) }
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, ChoiRepr::Pure(_))
    }

    pub fn layout(&self) -> RegisterLayout {
        RegisterLayout::new([("out", self.out_dim), ("in", self.in_dim)]).expect("valid layout")
    }

    /// State vector of a unitary program.
    pub fn vector(&self) -> Option<&ComplexMatrix> {
        match &self.repr {
            ChoiRepr::Pure(v) => Some(v),
            ChoiRepr::Mixed(_) => None,
        }
    }

    pub fn density(&self) -> ComplexMatrix {
        match &self.repr {
            ChoiRepr::Pure(v) => ComplexMatrix::projector(v),
            ChoiRepr::Mixed(m) => m.clone(),
        }
    }

    pub fn state(&self) -> MixedState {
        MixedState::with_layout_unchecked(self.layout(), self.density())
    }
}

/// `|U> = (U (x) I)|w>`
pub fn choi_of_unitary(u: &ComplexMatrix) -> Result<ChoiProgram> {
    let r = u.unitarity_residual();
    if r > EPS {
        return Err(QError::NotUnitary(r));
    }
    let d = u.rows();
    let v = &u.kron(&ComplexMatrix::identity(d)) * &bell_vector(d);
    Ok(ChoiProgram::pure_unchecked(d, d, v))
}

/// `(E (x) id)(w)`
pub fn choi_of_channel(ch: &KrausChannel) -> ChoiProgram {
    let d = ch.in_dim;
    let w = ComplexMatrix::projector(&bell_vector(d));
    let id = ComplexMatrix::identity(d);
    let rho = ch
        .kraus
        .iter()
        .fold(ComplexMatrix::zeros(ch.out_dim * d, ch.out_dim * d), |acc, k| &acc + &k.kron(&id).conjugate(&w));
    ChoiProgram::mixed_unchecked(ch.out_dim, d, rho)
}

/// Kraus operators from the eigendecomposition of `d_in` times the Choi state.
///
/// Eigenvectors are taken in descending eigenvalue order with the first
/// non-negligible entry made real positive.
pub fn channel_of_choi(program: &ChoiProgram) -> Result<KrausChannel> {
    let (dout, din) = (program.out_dim, program.in_dim);
    if let Some(v) = program.vector() {
        let k = unvec(&phase_fix(v), dout, din).scale_re((din as f64).sqrt());
        return KrausChannel::new(vec![k]);
    }
    let rho = program.density();
    let marginal = partial_trace_at(&rho, &[1], &[dout, din]);
    let r = marginal.max_abs_diff(&ComplexMatrix::identity(din).scale_re(1.0 / din as f64));
    if r > 1e-9 {
        return Err(QError::NotTracePreserving(r));
    }
    let choi_matrix = rho.scale_re(din as f64);
    let (vals, vecs) = choi_matrix.hermitian_eigen();
    let min = vals.last().copied().unwrap_or(0.0);
    if min < -1e-9 {
        return Err(QError::NotPsd(min));
    }
    let kraus: Vec<ComplexMatrix> = vals
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 1e-12)
        .map(|(k, &l)| unvec(&phase_fix(&vecs.col(k)), dout, din).scale_re(l.sqrt()))
        .collect();
    if kraus.is_empty() {
        return Err(QError::InvalidState("Choi state has no positive eigenvalue".into()));
    }
    // discarded eigenvalues below 1e-12 leave slack above the 1e-10 gate
    let residual = completeness_residual(&kraus);
    if residual > 1e-8 {
        return Err(QError::NotTracePreserving(residual));
    }
    Ok(KrausChannel { in_dim: din, out_dim: dout, kraus })
}

fn phase_fix(v: &ComplexMatrix) -> ComplexMatrix {
    let mut out = v.clone();
    if let Some(first) = v.to_vec().into_iter().find(|z| z.norm() > 1e-12) {
        let phase = first.conj() / first.norm();
        out = out.scale(phase);
    }
    out
}

/// `K[o, i] = v[o * din + i]`
fn unvec(v: &ComplexMatrix, dout: usize, din: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dout, din, |o, i| v[(o * din + i, 0)])
}

/// Unitary realization of a channel with the ancilla as the least
/// significant register: `K_i = (I (x) <i|) U (I (x) |0>)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dilation {
    unitary: ComplexMatrix,
    system_dim: usize,
    ancilla_dim: usize,
}

impl Dilation {
    pub fn new(unitary: ComplexMatrix, system_dim: usize, ancilla_dim: usize) -> Result<Self> {
        if unitary.rows() != system_dim * ancilla_dim {
            return Err(QError::DimensionMismatch(format!(
                "dilation of size {} for system {system_dim} x ancilla {ancilla_dim}",
                unitary.rows()
            )));
        }
        let r = unitary.unitarity_residual();
        if r > 1e-9 {
            return Err(QError::NotUnitary(r));
        }
        Ok(Dilation { unitary, system_dim, ancilla_dim })
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    /// `(I (x) <i|) U (I (x) |j>)`
    pub fn block(&self, i: usize, j: usize) -> ComplexMatrix {
        let (d, a) = (self.system_dim, self.ancilla_dim);
        ComplexMatrix::from_fn(d, d, |r, col| self.unitary[(r * a + i, col * a + j)])
    }

    pub fn kraus(&self, i: usize) -> ComplexMatrix {
        self.block(i, 0)
    }

    pub fn channel(&self) -> Result<KrausChannel> {
        KrausChannel::new((0..self.ancilla_dim).map(|i| self.kraus(i)).collect())
    }

    /// Unitary on system (x) ancilla, then trace out the ancilla.
    pub fn apply(&self, rho: &MixedState) -> Result<MixedState> {
        if rho.dim() != self.system_dim {
            return Err(QError::DimensionMismatch(format!("state {} vs system {}", rho.dim(), self.system_dim)));
        }
        let anc = ComplexMatrix::projector(&ComplexMatrix::basis(self.ancilla_dim, 0));
        let joint = self.unitary.conjugate(&rho.matrix().kron(&anc));
        let out = partial_trace_at(&joint, &[0], &[self.system_dim, self.ancilla_dim]);
        Ok(MixedState::with_layout_unchecked(rho.layout().clone(), out))
    }
}

/// Stinespring dilation; the isometry `sum_i K_i (x) |i>` is completed to a unitary.
pub fn stinespring_dilation(ch: &KrausChannel) -> Result<Dilation> {
    if ch.in_dim != ch.out_dim {
        return Err(QError::DimensionMismatch(format!(
            "dilation needs a square channel, got {} -> {}",
            ch.in_dim, ch.out_dim
        )));
    }
    let (d, r) = (ch.in_dim, ch.kraus.len());
    if r == 1 {
        return Dilation::new(ch.kraus[0].clone(), d, 1);
    }
    let iso = ComplexMatrix::from_fn(d * r, d, |row, col| ch.kraus[row % r][(row / r, col)]);
    // columns of U where the ancilla input is |0>
    let full = complete_to_unitary(&iso);
    // complete_to_unitary puts the isometry first; reorder columns so that
    // column (s, a=0) holds isometry column s
    let mut u = ComplexMatrix::zeros(d * r, d * r);
    let mut next_free = d;
    for s in 0..d {
        for a in 0..r {
            let src = if a == 0 {
                s
            } else {
                let k = next_free;
                next_free += 1;
                k
            };
            for row in 0..d * r {
                u[(row, s * r + a)] = full[(row, src)];
            }
        }
    }
    Dilation::new(u, d, r)
}

/// Port swap of a unitary program: `|U> -> |U^t>`.
pub fn transpose_program(program: &ChoiProgram) -> Result<ChoiProgram> {
    let v = program.vector().ok_or(QError::MixedProgram)?;
    let (dout, din) = (program.out_dim, program.in_dim);
    let swapped = ComplexMatrix::from_fn(dout * din, 1, |idx, _| {
        let (i, o) = (idx / dout, idx % dout);
        v[(o * din + i, 0)]
    });
    Ok(ChoiProgram::pure_unchecked(din, dout, swapped))
}

/// Entrywise conjugation of a unitary program: `|U> -> |U*>`.
pub fn conjugate_program(program: &ChoiProgram) -> Result<ChoiProgram> {
    let v = program.vector().ok_or(QError::MixedProgram)?;
    Ok(ChoiProgram::pure_unchecked(program.out_dim, program.in_dim, v.conj()))
}

/// Orthogonal embedding of a unitary acting on `d` into `2d`, with the
/// extra qubit as the least significant register:
/// `Q = U1 (x) I + U2 (x) J`, `J = [[0, -1], [1, 0]]`, `U = U1 + i U2`.
#[derive(Clone, Debug, PartialEq)]
pub struct RebitEmbedding {
    q: ComplexMatrix,
    source_dim: usize,
}

impl RebitEmbedding {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.q
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    /// The same operator with the extra qubit as the most significant
    /// register, i.e. the block form `[[U1, -U2], [U2, U1]]`.
    pub fn block_form(&self) -> ComplexMatrix {
        crate::qmath::permute_registers(&self.q, &[1, 0], &[self.source_dim, 2])
    }

    /// Max entry of `Q^T Q - I`.
    pub fn orthogonality_residual(&self) -> f64 {
        (&self.q.transpose() * &self.q).max_abs_diff(&ComplexMatrix::identity(2 * self.source_dim))
    }

    /// Outcome distribution of measuring the source register of `Q|Phi>`
    /// in the computational basis.
    pub fn probabilities(&self, input: &PureState) -> Result<Vec<f64>> {
        if input.dim() != 2 * self.source_dim {
            return Err(QError::DimensionMismatch(format!(
                "rebit input of dimension {} for source {}",
                input.dim(),
                self.source_dim
            )));
        }
        let out = &self.q * input.vector();
        Ok((0..self.source_dim).map(|a| out[(2 * a, 0)].norm_sqr() + out[(2 * a + 1, 0)].norm_sqr()).collect())
    }
}

pub fn rebit_embed(u: &ComplexMatrix) -> Result<RebitEmbedding> {
    let r = u.unitarity_residual();
    if r > EPS {
        return Err(QError::NotUnitary(r));
    }
    let d = u.rows();
    let re = ComplexMatrix::from_fn(d, d, |i, j| c(u[(i, j)].re, 0.0));
    let im = ComplexMatrix::from_fn(d, d, |i, j| c(u[(i, j)].im, 0.0));
    let j = ComplexMatrix::from_real(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let q = &re.kron(&ComplexMatrix::identity(2)) + &im.kron(&j);
    Ok(RebitEmbedding { q, source_dim: d })
}

/// `|psi> = |R> + i|I>  ->  |R>|0> + |I>|1>`
pub fn rebit_input(psi: &PureState) -> PureState {
    let d = psi.dim();
    let v = psi.vector();
    let out = ComplexMatrix::from_fn(2 * d, 1, |idx, _| {
        let z = v[(idx / 2, 0)];
        if idx % 2 == 0 {
            c(z.re, 0.0)
        } else {
            c(z.im, 0.0)
        }
    });
    let layout = RegisterLayout::new([("data", d), ("rebit", 2)]).expect("valid layout");
    PureState::from_vector_unchecked(layout, out)
}
