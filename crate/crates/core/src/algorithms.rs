//! Algorithms assembled from the oblivious primitives: trace estimation,
//! overlap tests, program composition, amplitude amplification and linear
//! combinations of unitaries.

use rand::RngCore;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{QError, Result};
use crate::oblivious::{
    multiplexer_build, oqc_build, oqt_sequence, BinaryBranch, BlackBox, FlagKind, FlagState, OqtRecord, Parities,
    ProgramBox,
};
use crate::qmath::{
    c, complete_to_unitary, embed_at, gates, partial_trace_at, ComplexMatrix, RegisterLayout, C64, EPS, ZERO,
};
use crate::states::{choi_of_unitary, conjugate_program, ChoiProgram, MixedState, PureState};

/// Readout basis of the control qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MeasurementAxis {
    X,
    Y,
}

impl MeasurementAxis {
    /// Eigenvector for outcome 0: `|+>` or `|+i>`.
    fn zero_vector(self) -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            MeasurementAxis::X => ComplexMatrix::column(&[c(s, 0.0), c(s, 0.0)]),
            MeasurementAxis::Y => ComplexMatrix::column(&[c(s, 0.0), c(0.0, s)]),
        }
    }
}

fn plus_state() -> ComplexMatrix {
    ComplexMatrix::projector(&MeasurementAxis::X.zero_vector())
}

fn control_p0(joint: &ComplexMatrix, rest: usize, axis: MeasurementAxis) -> f64 {
    let ctrl = partial_trace_at(joint, &[0], &[2, rest]);
    let v = axis.zero_vector();
    v.inner_product(&(&ctrl * &v)).re
}

/// Outcome-0 probability of the one-clean-qubit circuit: control in `|+>`,
/// controlled-`U` on `rho`, control read out along `axis`.
pub fn dqc1(u: &ComplexMatrix, rho: &MixedState, axis: MeasurementAxis) -> Result<f64> {
    let r = u.unitarity_residual();
    if r > EPS {
        return Err(QError::NotUnitary(r));
    }
    if u.rows() != rho.dim() {
        return Err(QError::DimensionMismatch(format!("{}x{} on state of dim {}", u.rows(), u.cols(), rho.dim())));
    }
    let joint = gates::controlled(u).conjugate(&plus_state().kron(rho.matrix()));
    Ok(control_p0(&joint, rho.dim(), axis))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Odqc1Outcome {
    pub p0: f64,
    /// Flag the controlled module was built with.
    pub flag: FlagKind,
}

/// One-clean-qubit circuit whose controlled module is the flag
/// construction over a program pair used only as black boxes.
///
/// With the `omega` flag, `p0 = (1 + Re tr(U rho) tr(U* eta))/2` on the X axis.
pub fn odqc1(
    program: &ChoiProgram,
    conj_program: &ChoiProgram,
    rho: &MixedState,
    eta: &MixedState,
    axis: MeasurementAxis,
    flag: FlagState,
) -> Result<Odqc1Outcome> {
    let u = ProgramBox::new(program)?;
    let uc = ProgramBox::new(conj_program)?;
    odqc1_boxes(&u, &uc, rho, eta, axis, flag)
}

pub fn odqc1_boxes(
    u: &dyn BlackBox,
    uc: &dyn BlackBox,
    rho: &MixedState,
    eta: &MixedState,
    axis: MeasurementAxis,
    flag: FlagState,
) -> Result<Odqc1Outcome> {
    let d = u.dim();
    if rho.dim() != d || eta.dim() != d {
        return Err(QError::DimensionMismatch(format!(
            "states of dimension {} and {} for black boxes of dimension {d}",
            rho.dim(),
            eta.dim()
        )));
    }
    let w = oqc_build(u, uc, d, &flag)?;
    let input = plus_state().kron(rho.matrix()).kron(eta.matrix()).kron(&flag.density());
    let joint = w.conjugate(&input);
    Ok(Odqc1Outcome { p0: control_p0(&joint, d * d * d * d, axis), flag: flag.which })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwapTestOutcome {
    pub p0: f64,
    pub shots: u64,
    pub zeros: u64,
    /// `2 p0_hat - 1` clipped to `[0, 1]`.
    pub estimate: f64,
    pub stderr: f64,
}

/// Controlled-SWAP overlap test with `shots` sampled readouts.
pub fn swap_test(psi: &PureState, phi: &PureState, shots: u64, rng: &mut dyn RngCore) -> Result<SwapTestOutcome> {
    if shots == 0 {
        return Err(QError::InvalidArgument("shots must be positive".into()));
    }
    let d = psi.dim();
    if phi.dim() != d {
        return Err(QError::DimensionMismatch(format!("states of dimension {d} and {}", phi.dim())));
    }
    let h = gates::h().kron(&ComplexMatrix::identity(d * d));
    let cswap = gates::controlled(&gates::swap(d));
    let input = ComplexMatrix::basis(2, 0).kron(psi.vector()).kron(phi.vector());
    let out = &h * &(&cswap * &(&h * &input));
    let p0: f64 = (0..d * d).map(|k| out[(k, 0)].norm_sqr()).sum::<f64>().clamp(0.0, 1.0);
    let zeros = Binomial::new(shots, p0)
        .map_err(|e| QError::InvalidArgument(e.to_string()))?
        .sample(&mut RngAdapter(rng));
    let p_hat = zeros as f64 / shots as f64;
    let estimate = (2.0 * p_hat - 1.0).clamp(0.0, 1.0);
    let stderr = 2.0 * (p_hat * (1.0 - p_hat) / shots as f64).sqrt();
    Ok(SwapTestOutcome { p0, shots, zeros, estimate, stderr })
}

/// Lets `rand_distr` sample from a `dyn RngCore`.
pub(crate) struct RngAdapter<'a>(pub &'a mut dyn RngCore);

impl RngCore for RngAdapter<'_> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Bell measurement across the out ports of `conj(p1)` and `p2`.
///
/// Branch 0 holds the program of `U1† U2` over ports `(in of p1, in of p2)`
/// with probability `1/d^2`.
pub fn compose_programs(p1: &ChoiProgram, p2: &ChoiProgram) -> Result<(BinaryBranch, BinaryBranch)> {
    let (v, d) = composed_vector(p1, p2)?;
    let p0 = v.frobenius_norm().powi(2);
    let layout = RegisterLayout::new([("out", d), ("in", d)])?;
    let sigma0 = ComplexMatrix::projector(&v);
    let marginal = ComplexMatrix::identity(d * d).scale_re(1.0 / (d * d) as f64);
    let sigma1 = &marginal - &sigma0;
    let p1_prob = 1.0 - p0;
    Ok((
        BinaryBranch {
            parity: 0,
            probability: p0,
            post_state: MixedState::with_layout_unchecked(layout.clone(), sigma0.scale_re(1.0 / p0)),
        },
        BinaryBranch {
            parity: 1,
            probability: p1_prob,
            post_state: MixedState::with_layout_unchecked(layout, sigma1.scale_re(1.0 / p1_prob)),
        },
    ))
}

/// The trivial-branch output of [`compose_programs`] as a pure program.
pub fn composed_program(p1: &ChoiProgram, p2: &ChoiProgram) -> Result<ChoiProgram> {
    let (v, d) = composed_vector(p1, p2)?;
    let norm = v.frobenius_norm();
    Ok(ChoiProgram::pure_unchecked(d, d, v.scale_re(1.0 / norm)))
}

/// `(<w|_{out1,out2} (x) I)(|U1*> (x) |U2>)`, reordered to `(in1, in2)`.
fn composed_vector(p1: &ChoiProgram, p2: &ChoiProgram) -> Result<(ComplexMatrix, usize)> {
    let d = p1.out_dim();
    if p1.in_dim() != d || p2.out_dim() != d || p2.in_dim() != d {
        return Err(QError::DimensionMismatch("composition needs square programs of equal dimension".into()));
    }
    let a = conjugate_program(p1)?;
    let a = a.vector().ok_or(QError::MixedProgram)?;
    let b = p2.vector().ok_or(QError::MixedProgram)?;
    let s = 1.0 / (d as f64).sqrt();
    let v = ComplexMatrix::from_fn(d * d, 1, |idx, _| {
        let (i1, i2) = (idx / d, idx % d);
        (0..d).map(|o| a[(o * d + i1, 0)] * b[(o * d + i2, 0)]).sum::<C64>() * s
    });
    Ok((v, d))
}

/// Unitary `G` on (control, data) whose `<0|G|0>` block is `sqrt(p) U`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockEncoding {
    g: ComplexMatrix,
    control_dim: usize,
    data_dim: usize,
    p: f64,
    theta: f64,
    u: ComplexMatrix,
}

impl BlockEncoding {
    pub fn g(&self) -> &ComplexMatrix {
        &self.g
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `sqrt(p) = sin(theta)`
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.u
    }

    /// `round(pi/(4 theta) - 1/2)`, capped so `(2n+1) theta <= pi/2 + theta`.
    pub fn recommended_iterations(&self) -> usize {
        let raw = (std::f64::consts::PI / (4.0 * self.theta) - 0.5).round().max(0.0);
        let cap = (std::f64::consts::PI / (4.0 * self.theta)).floor();
        raw.min(cap) as usize
    }

    /// `R = 2 Pi - I` with `Pi = |0><0| (x) I`.
    pub fn reflection(&self) -> ComplexMatrix {
        let pi = ComplexMatrix::projector(&ComplexMatrix::basis(self.control_dim, 0))
            .kron(&ComplexMatrix::identity(self.data_dim));
        &pi.scale_re(2.0) - &ComplexMatrix::identity(self.control_dim * self.data_dim)
    }

    /// `W = -G R G† R`
    pub fn walk(&self) -> ComplexMatrix {
        let r = self.reflection();
        (&(&(&self.g * &r) * &self.g.adjoint()) * &r).scale_re(-1.0)
    }
}

/// Extracts `M = (<0| (x) I) G (|0> (x) I)` and checks `M†M = p I`.
pub fn block_encoding_check(g: &ComplexMatrix, control_dim: usize, data_dim: usize) -> Result<BlockEncoding> {
    if g.rows() != control_dim * data_dim || !g.is_square() {
        return Err(QError::DimensionMismatch(format!(
            "{}x{} operator for control {control_dim} x data {data_dim}",
            g.rows(),
            g.cols()
        )));
    }
    let r = g.unitarity_residual();
    if r > 1e-9 {
        return Err(QError::NotUnitary(r));
    }
    let m = g.block(0, 0, data_dim, data_dim);
    let mtm = &m.adjoint() * &m;
    let p = mtm.trace().re / data_dim as f64;
    let dev = mtm.max_abs_diff(&ComplexMatrix::identity(data_dim).scale_re(p));
    if dev > 1e-9 {
        return Err(QError::NotBlockEncoding(dev));
    }
    if p < 1e-14 {
        return Err(QError::NotBlockEncoding(p));
    }
    let p = p.min(1.0);
    Ok(BlockEncoding {
        g: g.clone(),
        control_dim,
        data_dim,
        p,
        theta: p.sqrt().asin(),
        u: m.scale_re(1.0 / p.sqrt()),
    })
}

/// Unitary on (control, data) with top-left block `m`, for `||m|| <= 1`.
pub fn dilate_contraction(m: &ComplexMatrix, control_dim: usize) -> Result<ComplexMatrix> {
    let d = m.rows();
    if control_dim < 2 || !m.is_square() {
        return Err(QError::InvalidArgument("need a square block and at least two control levels".into()));
    }
    let (vals, vecs) = (&ComplexMatrix::identity(d) - &(&m.adjoint() * m)).hermitian_eigen();
    if vals.iter().any(|&l| l < -1e-9) {
        return Err(QError::InvalidArgument("block has operator norm above 1".into()));
    }
    let root = &(&vecs * &ComplexMatrix::diag(&vals.iter().map(|l| c(l.max(0.0).sqrt(), 0.0)).collect::<Vec<_>>()))
        * &vecs.adjoint();
    let iso = ComplexMatrix::from_fn(control_dim * d, d, |r, col| match r / d {
        0 => m[(r, col)],
        1 => root[(r - d, col)],
        _ => ZERO,
    });
    Ok(complete_to_unitary(&iso))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OaaOutcome {
    pub success_probability: f64,
    /// Data register after post-selecting the control on `|0>`.
    pub post_state: PureState,
    pub recommended_n: usize,
    /// Full (control, data) vector `W^n G |0>|psi>`.
    pub full_state: ComplexMatrix,
}

/// Applies `W^n G` to `|0>|psi>`; success is `sin^2((2n+1) theta)`.
pub fn oaa_amplify(be: &BlockEncoding, n: usize, psi: &PureState) -> Result<OaaOutcome> {
    if psi.dim() != be.data_dim {
        return Err(QError::DimensionMismatch(format!("input of dim {} for data dim {}", psi.dim(), be.data_dim)));
    }
    let w = be.walk();
    let mut state = &be.g * &ComplexMatrix::basis(be.control_dim, 0).kron(psi.vector());
    for _ in 0..n {
        state = &w * &state;
    }
    let good = state.block(0, 0, be.data_dim, 1);
    let success = good.frobenius_norm().powi(2);
    let post = if success > 1e-300 { good.scale_re(1.0 / success.sqrt()) } else { good };
    Ok(OaaOutcome {
        success_probability: success,
        post_state: PureState::from_vector_unchecked(RegisterLayout::single(be.data_dim), post),
        recommended_n: be.recommended_iterations(),
        full_state: state,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OaaOqtOutcome {
    pub record: OqtRecord,
    /// Number of stored programs consumed, `2n + 1`.
    pub program_count: usize,
}

/// Stored-program factors of `W^n G` in application order:
/// `G, R G† R, G, ...`. The sign of `W` is a global phase and is dropped.
pub fn oaa_programs(be: &BlockEncoding, n: usize) -> Result<Vec<ChoiProgram>> {
    let r = be.reflection();
    let g = choi_of_unitary(&be.g)?;
    let back = choi_of_unitary(&(&(&r * &be.g.adjoint()) * &r))?;
    let mut programs = vec![g.clone()];
    for _ in 0..n {
        programs.push(back.clone());
        programs.push(g.clone());
    }
    Ok(programs)
}

/// Runs the amplification as a chain of teleported programs on `|0><0| (x) rho`.
pub fn oaa_via_oqt(be: &BlockEncoding, n: usize, input: &MixedState, parities: Parities<'_>) -> Result<OaaOqtOutcome> {
    if input.dim() != be.data_dim {
        return Err(QError::DimensionMismatch(format!("input of dim {} for data dim {}", input.dim(), be.data_dim)));
    }
    let programs = oaa_programs(be, n)?;
    let start = ComplexMatrix::projector(&ComplexMatrix::basis(be.control_dim, 0)).kron(input.matrix());
    let layout = RegisterLayout::new([("control", be.control_dim), ("data", be.data_dim)])?;
    let record = oqt_sequence(&programs, &MixedState::with_layout_unchecked(layout, start), parities)?;
    Ok(OaaOqtOutcome { record, program_count: programs.len() })
}

/// Select-prepare plan for `C = sum_i c_i U_i / ||c||_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LcuPlan {
    coefficients: Vec<f64>,
    unitaries: Vec<ComplexMatrix>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    prepare: ComplexMatrix,
    unprepare: ComplexMatrix,
}

impl LcuPlan {
    pub fn new(coefficients: &[f64], unitaries: Vec<ComplexMatrix>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(QError::Empty("LCU plan has no terms".into()));
        }
        if coefficients.len() != unitaries.len() {
            return Err(QError::DimensionMismatch(format!(
                "{} coefficients for {} unitaries",
                coefficients.len(),
                unitaries.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(QError::InvalidArgument("coefficients must be finite and non-negative".into()));
        }
        let norm: f64 = coefficients.iter().sum();
        if norm <= 0.0 {
            return Err(QError::InvalidArgument("coefficients sum to zero".into()));
        }
        let d = unitaries[0].rows();
        for u in &unitaries {
            if u.rows() != d {
                return Err(QError::DimensionMismatch("LCU unitaries differ in dimension".into()));
            }
            let r = u.unitarity_residual();
            if r > EPS {
                return Err(QError::NotUnitary(r));
            }
        }
        let alpha: Vec<f64> = coefficients.iter().map(|c| (c / norm).sqrt()).collect();
        let col = ComplexMatrix::column(&alpha.iter().map(|a| c(*a, 0.0)).collect::<Vec<_>>());
        let prepare = complete_to_unitary(&col);
        let unprepare = prepare.adjoint();
        Ok(LcuPlan { coefficients: coefficients.to_vec(), unitaries, beta: alpha.clone(), alpha, prepare, unprepare })
    }

    /// Complex coefficients with their phases moved into the unitaries.
    pub fn from_complex(coefficients: &[C64], unitaries: Vec<ComplexMatrix>) -> Result<Self> {
        if coefficients.len() != unitaries.len() {
            return Err(QError::DimensionMismatch("coefficient and unitary counts differ".into()));
        }
        let mags: Vec<f64> = coefficients.iter().map(|z| z.norm()).collect();
        let us = coefficients
            .iter()
            .zip(unitaries)
            .map(|(z, u)| if z.norm() > 0.0 { u.scale(z / z.norm()) } else { u })
            .collect();
        Self::new(&mags, us)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn unitaries(&self) -> &[ComplexMatrix] {
        &self.unitaries
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn prepare(&self) -> &ComplexMatrix {
        &self.prepare
    }

    pub fn unprepare(&self) -> &ComplexMatrix {
        &self.unprepare
    }

    pub fn terms(&self) -> usize {
        self.coefficients.len()
    }

    pub fn data_dim(&self) -> usize {
        self.unitaries[0].rows()
    }

    /// `sum_i c_i U_i / ||c||_1`
    pub fn target(&self) -> ComplexMatrix {
        let norm: f64 = self.coefficients.iter().sum();
        self.coefficients
            .iter()
            .zip(&self.unitaries)
            .fold(ComplexMatrix::zeros(self.data_dim(), self.data_dim()), |acc, (c, u)| &acc + &u.scale_re(c / norm))
    }

    /// `(B (x) I) SELECT (A (x) I)` on (index, data).
    pub fn circuit(&self) -> ComplexMatrix {
        let (m, d) = (self.terms(), self.data_dim());
        let mut select = ComplexMatrix::zeros(m * d, m * d);
        for (i, u) in self.unitaries.iter().enumerate() {
            for r in 0..d {
                for col in 0..d {
                    select[(i * d + r, i * d + col)] = u[(r, col)];
                }
            }
        }
        let id = ComplexMatrix::identity(d);
        &(&self.unprepare.kron(&id) * &select) * &self.prepare.kron(&id)
    }
}

/// Post-selects the index register of the plan circuit on `|0>`.
pub fn lcu_apply(plan: &LcuPlan, psi: &PureState) -> Result<(f64, PureState)> {
    let d = plan.data_dim();
    if psi.dim() != d {
        return Err(QError::DimensionMismatch(format!("input of dim {} for data dim {d}", psi.dim())));
    }
    let out = &plan.circuit() * &ComplexMatrix::basis(plan.terms(), 0).kron(psi.vector());
    post_select(out.block(0, 0, d, 1))
}

fn post_select(good: ComplexMatrix) -> Result<(f64, PureState)> {
    let success = good.frobenius_norm().powi(2);
    if success < 1e-14 {
        return Err(QError::DegenerateSuperposition(success));
    }
    let d = good.rows();
    Ok((success, PureState::from_vector_unchecked(RegisterLayout::single(d), good.scale_re(1.0 / success.sqrt()))))
}

/// LCU over black-box pairs: the select stage is the flag-built multiplexer,
/// so the realized operator on (data, ancilla) is
/// `sum_i c_i (U_i (x) U_i*) / ||c||_1`.
pub fn lcu_apply_black_box(
    coefficients: &[f64],
    boxes: &[(&dyn BlackBox, &dyn BlackBox)],
    d: usize,
    input: &PureState,
) -> Result<(f64, PureState)> {
    let ids: Vec<ComplexMatrix> = (0..coefficients.len()).map(|_| ComplexMatrix::identity(d)).collect();
    let plan = LcuPlan::new(coefficients, ids)?;
    if input.dim() != d * d {
        return Err(QError::DimensionMismatch(format!("input of dim {} for data (x) ancilla {}", input.dim(), d * d)));
    }
    let m = plan.terms();
    let controls: Vec<ComplexMatrix> = (0..m).map(|i| ComplexMatrix::projector(&ComplexMatrix::basis(m, i))).collect();
    let select = multiplexer_build(&controls, boxes, d)?;
    let id = ComplexMatrix::identity(d * d);
    let circuit = &(&plan.unprepare.kron(&id) * &select) * &plan.prepare.kron(&id);
    let out = &circuit * &ComplexMatrix::basis(m, 0).kron(input.vector());
    post_select(out.block(0, 0, d * d, 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OqsMode {
    /// Prepare `sum_i c_i U_i |0>` from a known input.
    Generate,
    /// Apply `C / sqrt(p)` to an unknown input.
    Apply,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OqsOutcome {
    pub state: PureState,
    pub initial_success: f64,
    pub success_probability: f64,
    pub iterations: usize,
}

/// Exact amplification: a padding qubit lowers the angle to
/// `pi / (2(2n+1))` so that `n` rounds reach success 1.
fn exact_schedule(theta: f64) -> (usize, f64) {
    let n = (std::f64::consts::PI / (4.0 * theta) - 0.5 - 1e-12).ceil().max(0.0) as usize;
    let target = std::f64::consts::PI / (2.0 * (2 * n + 1) as f64);
    // cos(phi) = sin(target)/sin(theta)
    let cos_phi = (target.sin() / theta.sin()).min(1.0);
    (n, cos_phi)
}

fn padding_rotation(cos_phi: f64) -> ComplexMatrix {
    gates::ry(2.0 * cos_phi.clamp(-1.0, 1.0).acos())
}

/// Amplified superposition of unitaries. Generate mode reflects about the
/// known start state; apply mode requires a block encoding and runs the
/// oblivious walk. The success probability of the unamplified circuit is
/// taken as known.
pub fn oqs(mode: OqsMode, plan: &LcuPlan, input: &PureState) -> Result<OqsOutcome> {
    let (m, d) = (plan.terms(), plan.data_dim());
    if input.dim() != d {
        return Err(QError::DimensionMismatch(format!("input of dim {} for data dim {d}", input.dim())));
    }
    match mode {
        OqsMode::Apply => {
            let be = block_encoding_check(&plan.circuit(), m, d)?;
            let (n, cos_phi) = exact_schedule(be.theta());
            // control = (index, pad), pad least significant within the control
            let g = &embed_at(be.g(), &[0, 2], &[m, 2, d])? * &embed_at(&padding_rotation(cos_phi), &[1], &[m, 2, d])?;
            let padded = block_encoding_check(&g, 2 * m, d)?;
            let out = oaa_amplify(&padded, n, input)?;
            Ok(OqsOutcome {
                state: out.post_state,
                initial_success: be.p(),
                success_probability: out.success_probability,
                iterations: n,
            })
        }
        OqsMode::Generate => {
            let v = plan.circuit();
            let start = ComplexMatrix::basis(m * d, 0);
            let initial = (&v * &start).block(0, 0, d, 1).frobenius_norm().powi(2);
            if initial < 1e-14 {
                return Err(QError::DegenerateSuperposition(initial));
            }
            let theta = initial.sqrt().asin();
            let (n, cos_phi) = exact_schedule(theta);
            let dims = [m, 2, d];
            let a = &embed_at(&v, &[0, 2], &dims)? * &embed_at(&padding_rotation(cos_phi), &[1], &dims)?;
            let total = 2 * m * d;
            let s0 = ComplexMatrix::basis(total, 0);
            // reflection about the start state and about the good subspace
            let r_start = &ComplexMatrix::projector(&s0).scale_re(2.0) - &ComplexMatrix::identity(total);
            let good = ComplexMatrix::projector(&ComplexMatrix::basis(2 * m, 0)).kron(&ComplexMatrix::identity(d));
            let r_good = &good.scale_re(2.0) - &ComplexMatrix::identity(total);
            let q = (&(&(&a * &r_start) * &a.adjoint()) * &r_good).scale_re(-1.0);
            let mut state = &a * &s0;
            for _ in 0..n {
                state = &q * &state;
            }
            let (success, post) = post_select(state.block(0, 0, d, 1))?;
            Ok(OqsOutcome { state: post, initial_success: initial, success_probability: success, iterations: n })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oblivious::{oqt_estimate_observable, MatrixBox};
    use crate::qmath::{distance_up_to_phase, random_unitary, ONE};
    use crate::states::bell_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_pure(d: usize, r: &mut ChaCha8Rng) -> PureState {
        PureState::from_amplitudes(&random_unitary(d, r).col(0).to_vec()).unwrap()
    }

    fn random_mixed(d: usize, r: &mut ChaCha8Rng) -> MixedState {
        let v = random_unitary(d * d, r).col(0);
        MixedState::from_matrix(partial_trace_at(&ComplexMatrix::projector(&v), &[0], &[d, d])).unwrap()
    }

    fn random_encoding(p: f64, d: usize, r: &mut ChaCha8Rng) -> BlockEncoding {
        let u = random_unitary(d, r);
        let g = dilate_contraction(&u.scale_re(p.sqrt()), 2).unwrap();
        block_encoding_check(&g, 2, d).unwrap()
    }

    fn plus() -> PureState {
        PureState::from_amplitudes(&[ONE, ONE]).unwrap()
    }

    #[test]
    fn dqc1_examples() {
        let psi = PureState::basis(2, 1).density();
        assert!((dqc1(&ComplexMatrix::identity(2), &psi, MeasurementAxis::X).unwrap() - 1.0).abs() < 1e-15);
        assert!((dqc1(&gates::z(), &plus().density(), MeasurementAxis::X).unwrap() - 0.5).abs() < 1e-15);
        let mm = MixedState::maximally_mixed(2);
        assert!((dqc1(&gates::s(), &mm, MeasurementAxis::X).unwrap() - 0.75).abs() < 1e-15);
        assert!((dqc1(&gates::s(), &mm, MeasurementAxis::Y).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(
            dqc1(&ComplexMatrix::diag(&[ONE, c(0.5, 0.0)]), &mm, MeasurementAxis::X),
            Err(QError::NotUnitary(_))
        ));
    }

    #[test]
    fn dqc1_matches_trace_formula() {
        let mut r = rng(41);
        for k in 0..100 {
            let d = if k % 2 == 0 { 2 } else { 4 };
            let u = random_unitary(d, &mut r);
            let rho = random_mixed(d, &mut r);
            let t = (&u * rho.matrix()).trace();
            assert!((dqc1(&u, &rho, MeasurementAxis::X).unwrap() - 0.5 * (1.0 + t.re)).abs() < 1e-10);
            assert!((dqc1(&u, &rho, MeasurementAxis::Y).unwrap() - 0.5 * (1.0 + t.im)).abs() < 1e-10);
        }
    }

    fn odqc1_u(u: &ComplexMatrix, rho: &MixedState, eta: &MixedState, axis: MeasurementAxis) -> f64 {
        let p = choi_of_unitary(u).unwrap();
        let pc = choi_of_unitary(&u.conj()).unwrap();
        odqc1(&p, &pc, rho, eta, axis, FlagState::omega(u.rows())).unwrap().p0
    }

    #[test]
    fn odqc1_examples() {
        let zero = PureState::basis(2, 0).density();
        assert!((odqc1_u(&gates::z(), &zero, &zero, MeasurementAxis::X) - 1.0).abs() < 1e-12);
        let mut r = rng(42);
        let (rho, eta) = (random_mixed(2, &mut r), random_mixed(2, &mut r));
        assert!((odqc1_u(&ComplexMatrix::identity(2), &rho, &eta, MeasurementAxis::X) - 1.0).abs() < 1e-12);
        let mm = MixedState::maximally_mixed(2);
        assert!((odqc1_u(&gates::s(), &mm, &zero, MeasurementAxis::X) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn odqc1_product_law_and_phase_obliviousness() {
        let mut r = rng(43);
        for k in 0..20 {
            let d = 2 + k % 2;
            let u = random_unitary(d, &mut r);
            let (rho, eta) = (random_mixed(d, &mut r), random_mixed(d, &mut r));
            let prod = (&u * rho.matrix()).trace() * (&u.conj() * eta.matrix()).trace();
            let px = odqc1_u(&u, &rho, &eta, MeasurementAxis::X);
            let py = odqc1_u(&u, &rho, &eta, MeasurementAxis::Y);
            assert!((px - 0.5 * (1.0 + prod.re)).abs() < 1e-10);
            assert!((py - 0.5 * (1.0 + prod.im)).abs() < 1e-10);
            let ph = C64::from_polar(1.0, 0.7 * k as f64);
            let a = MatrixBox::new(u.scale(ph)).unwrap();
            let b = MatrixBox::new(u.conj().scale(ph.conj())).unwrap();
            let shifted = odqc1_boxes(&a, &b, &rho, &eta, MeasurementAxis::X, FlagState::omega(d)).unwrap();
            assert!((shifted.p0 - px).abs() < 1e-10);
        }
    }

    #[test]
    fn odqc1_reports_complement_flag() {
        let zero = PureState::basis(2, 0).density();
        let p = choi_of_unitary(&gates::z()).unwrap();
        let out = odqc1(&p, &p, &zero, &zero, MeasurementAxis::X, FlagState::omega_perp(2)).unwrap();
        assert_eq!(out.flag, FlagKind::OmegaPerp);
        assert!(out.p0 >= 0.0 && out.p0 <= 1.0);
    }

    #[test]
    fn swap_test_examples() {
        let mut r = rng(44);
        let zero = PureState::basis(2, 0);
        let same = swap_test(&zero, &zero, 1000, &mut r).unwrap();
        assert!((same.p0 - 1.0).abs() < 1e-15 && same.estimate == 1.0);
        let orth = swap_test(&zero, &PureState::basis(2, 1), 1000, &mut r).unwrap();
        assert!((orth.p0 - 0.5).abs() < 1e-15);
        let half = swap_test(&zero, &plus(), 100_000, &mut r).unwrap();
        assert!((half.p0 - 0.75).abs() < 1e-15);
        assert!((half.estimate - 0.5).abs() < 3.0 * half.stderr);
        assert!(swap_test(&zero, &plus(), 0, &mut r).is_err());
        let a = swap_test(&zero, &plus(), 500, &mut rng(9)).unwrap();
        assert_eq!(a, swap_test(&zero, &plus(), 500, &mut rng(9)).unwrap());
    }

    #[test]
    fn compose_examples() {
        let h = choi_of_unitary(&gates::h()).unwrap();
        let (b0, b1) = compose_programs(&h, &h).unwrap();
        assert!((b0.probability - 0.25).abs() < 1e-14);
        assert!((b0.probability + b1.probability - 1.0).abs() < 1e-14);
        assert!(b0.post_state.matrix().approx_eq(&ComplexMatrix::projector(&bell_vector(2)), 1e-14));

        let hz = choi_of_unitary(&(&gates::h() * &gates::z())).unwrap();
        let out = composed_program(&h, &hz).unwrap();
        let z = choi_of_unitary(&gates::z()).unwrap();
        assert!(distance_up_to_phase(out.vector().unwrap(), z.vector().unwrap()).unwrap() < 1e-12);
        assert!(compose_programs(&h, &choi_of_unitary(&ComplexMatrix::identity(3)).unwrap()).is_err());
    }

    #[test]
    fn composed_program_fidelity_and_trace() {
        let mut r = rng(45);
        for d in 2..=3 {
            let (u1, u2) = (random_unitary(d, &mut r), random_unitary(d, &mut r));
            let (p1, p2) = (choi_of_unitary(&u1).unwrap(), choi_of_unitary(&u2).unwrap());
            let (b0, _) = compose_programs(&p1, &p2).unwrap();
            let target = choi_of_unitary(&(&u1.adjoint() * &u2)).unwrap();
            let t = target.vector().unwrap();
            let fid = t.inner_product(&(b0.post_state.matrix() * t)).re;
            assert!(fid > 1.0 - 1e-9);
            assert!((b0.probability - 1.0 / (d * d) as f64).abs() < 1e-12);

            // DQC1 over the composed program estimates tr(U1† U2)/d on I/d
            let comp = composed_program(&p1, &p2).unwrap();
            let conj = conjugate_program(&comp).unwrap();
            let mm = MixedState::maximally_mixed(d);
            let zero = PureState::basis(d, 0).density();
            let got = odqc1(&comp, &conj, &mm, &zero, MeasurementAxis::X, FlagState::omega(d)).unwrap().p0;
            // the composed program is U1†U2 up to a phase that cancels in the pair
            let v = &u1.adjoint() * &u2;
            let expect = 0.5 * (1.0 + ((&v * mm.matrix()).trace() * v.conj()[(0, 0)]).re);
            assert!((got - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn block_encoding_examples() {
        let half = (&gates::x() + &gates::z()).scale_re(0.5);
        let be = block_encoding_check(&dilate_contraction(&half, 2).unwrap(), 2, 2).unwrap();
        assert!((be.p() - 0.5).abs() < 1e-12);
        assert!((be.theta() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!(distance_up_to_phase(be.unitary(), &gates::h()).unwrap() < 1e-12);

        let proj = (&ComplexMatrix::identity(2) + &gates::x()).scale_re(0.5);
        let g = dilate_contraction(&proj, 2).unwrap();
        assert!(matches!(block_encoding_check(&g, 2, 2), Err(QError::NotBlockEncoding(_))));

        let u = random_unitary(3, &mut rng(46));
        let exact = block_encoding_check(&ComplexMatrix::identity(2).kron(&u), 2, 3).unwrap();
        assert!((exact.p() - 1.0).abs() < 1e-12);
        assert!(exact.unitary().approx_eq(&u, 1e-12));

        let diag = ComplexMatrix::diag(&[ONE, c(0.5, 0.0)]);
        let g = dilate_contraction(&diag, 2).unwrap();
        assert!(matches!(block_encoding_check(&g, 2, 2), Err(QError::NotBlockEncoding(_))));
    }

    #[test]
    fn oaa_examples() {
        let mut r = rng(47);
        let be = random_encoding(0.25, 2, &mut r);
        let psi = random_pure(2, &mut r);
        let out = oaa_amplify(&be, 1, &psi).unwrap();
        assert!((out.success_probability - 1.0).abs() < 1e-9);
        assert_eq!(out.recommended_n, 1);
        assert!((oaa_amplify(&be, 0, &psi).unwrap().success_probability - 0.25).abs() < 1e-12);

        let be = random_encoding(0.1, 3, &mut r);
        let psi = random_pure(3, &mut r);
        let n = be.recommended_iterations();
        let out = oaa_amplify(&be, n, &psi).unwrap();
        assert!(out.success_probability >= 0.9);
        let expect = be.unitary() * psi.vector();
        assert!(distance_up_to_phase(out.post_state.vector(), &expect).unwrap() < 1e-8);
    }

    #[test]
    fn oaa_success_law_is_input_independent() {
        let mut r = rng(48);
        for p in [0.1, 0.25, 0.5] {
            let be = random_encoding(p, 2, &mut r);
            for n in 0..=5 {
                let expect = ((2 * n + 1) as f64 * be.theta()).sin().powi(2);
                let mut lo = f64::MAX;
                let mut hi = f64::MIN;
                for _ in 0..20 {
                    let s = oaa_amplify(&be, n, &random_pure(2, &mut r)).unwrap().success_probability;
                    assert!((s - expect).abs() < 1e-9);
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                assert!(hi - lo < 1e-9);
            }
        }
    }

    #[test]
    fn oaa_via_oqt_examples() {
        let mut r = rng(49);
        let be = random_encoding(0.25, 2, &mut r);
        let psi = random_pure(2, &mut r);
        for n in 0..=2 {
            let zeros = vec![0u8; 2 * n + 1];
            let out = oaa_via_oqt(&be, n, &psi.density(), Parities::Forced(&zeros)).unwrap();
            assert_eq!(out.program_count, 2 * n + 1);
            let direct = oaa_amplify(&be, n, &psi).unwrap();
            let expect = ComplexMatrix::projector(&direct.full_state);
            assert!(out.record.final_state.matrix().approx_eq(&expect, 1e-9));
        }
    }

    #[test]
    fn oaa_via_oqt_estimates_success() {
        let mut r = rng(50);
        let be = random_encoding(0.1, 2, &mut r);
        let psi = random_pure(2, &mut r);
        let good = ComplexMatrix::projector(&ComplexMatrix::basis(2, 0)).kron(&ComplexMatrix::identity(2));
        let recs: Vec<_> = (0..20_000)
            .map(|_| {
                oaa_via_oqt(&be, 1, &psi.density(), Parities::Sampled(&mut r))
                    .unwrap()
                    .record
                    .measure(&good, &mut r)
                    .unwrap()
            })
            .collect();
        let (est, se) = oqt_estimate_observable(&recs, &good).unwrap();
        let truth = oaa_amplify(&be, 1, &psi).unwrap().success_probability;
        assert!((est - truth).abs() < 4.0 * se, "{est} +- {se} vs {truth}");
    }

    #[test]
    fn lcu_examples() {
        let plan = LcuPlan::new(&[1.0, 0.0], vec![gates::x(), gates::z()]).unwrap();
        let psi = random_pure(2, &mut rng(51));
        let (p, out) = lcu_apply(&plan, &psi).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(distance_up_to_phase(out.vector(), &(&gates::x() * psi.vector())).unwrap() < 1e-12);

        let plan = LcuPlan::new(&[1.0, 1.0], vec![gates::x(), gates::z()]).unwrap();
        for k in 0..5 {
            let psi = random_pure(2, &mut rng(60 + k));
            assert!((lcu_apply(&plan, &psi).unwrap().0 - 0.5).abs() < 1e-12);
        }

        let plan = LcuPlan::new(&[1.0, 1.0], vec![ComplexMatrix::identity(2), gates::x()]).unwrap();
        let (p, out) = lcu_apply(&plan, &PureState::basis(2, 0)).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!(distance_up_to_phase(out.vector(), plus().vector()).unwrap() < 1e-12);

        let plan = LcuPlan::new(&[1.0, 1.0], vec![ComplexMatrix::identity(2), gates::x()]).unwrap();
        let minus = PureState::from_amplitudes(&[ONE, -ONE]).unwrap();
        assert!(matches!(lcu_apply(&plan, &minus), Err(QError::DegenerateSuperposition(_))));
        assert!(LcuPlan::new(&[-1.0, 1.0], vec![gates::x(), gates::z()]).is_err());
    }

    #[test]
    fn lcu_success_matches_matrix_oracle() {
        let mut r = rng(52);
        for k in 0..100 {
            let terms = 1 + k % 4;
            let d = 2 + (k / 4) % 3;
            let coeffs: Vec<f64> = (0..terms).map(|_| rand::Rng::random::<f64>(&mut r) + 0.01).collect();
            let us: Vec<_> = (0..terms).map(|_| random_unitary(d, &mut r)).collect();
            let plan = LcuPlan::new(&coeffs, us).unwrap();
            let psi = random_pure(d, &mut r);
            let cpsi = &plan.target() * psi.vector();
            let expect = cpsi.frobenius_norm().powi(2);
            let (p, out) = lcu_apply(&plan, &psi).unwrap();
            assert!((p - expect).abs() < 1e-10);
            assert!(distance_up_to_phase(out.vector(), &cpsi.scale_re(1.0 / expect.sqrt())).unwrap() < 1e-9);
            let a0 = plan.prepare().col(0);
            assert!((a0.frobenius_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lcu_black_box_matches_pair_operator() {
        let mut r = rng(53);
        let us: Vec<_> = (0..3).map(|_| random_unitary(2, &mut r)).collect();
        let coeffs = [0.5, 0.3, 0.2];
        let boxes: Vec<_> = us.iter().map(|u| MatrixBox::new(u.clone()).unwrap()).collect();
        let conj: Vec<_> = boxes.iter().map(|b| b.conjugate()).collect();
        let pairs: Vec<(&dyn BlackBox, &dyn BlackBox)> =
            boxes.iter().zip(&conj).map(|(a, b)| (a as &dyn BlackBox, b as &dyn BlackBox)).collect();
        let input = random_pure(4, &mut r);
        let (p, out) = lcu_apply_black_box(&coeffs, &pairs, 2, &input).unwrap();
        let c_op = coeffs.iter().zip(&us).fold(ComplexMatrix::zeros(4, 4), |acc, (c, u)| &acc + &u.kron(&u.conj()).scale_re(*c));
        let v = &c_op * input.vector();
        assert!((p - v.frobenius_norm().powi(2)).abs() < 1e-10);
        assert!(distance_up_to_phase(out.vector(), &v.scale_re(1.0 / p.sqrt())).unwrap() < 1e-9);
    }

    #[test]
    fn oqs_examples() {
        let plan = LcuPlan::new(&[1.0, 1.0], vec![ComplexMatrix::identity(2), gates::x()]).unwrap();
        let out = oqs(OqsMode::Generate, &plan, &PureState::basis(2, 0)).unwrap();
        assert!(out.success_probability >= 0.95);
        assert!((out.initial_success - 0.5).abs() < 1e-12);
        assert!(distance_up_to_phase(out.state.vector(), plus().vector()).unwrap() < 1e-9);

        let plan = LcuPlan::new(&[1.0, 1.0], vec![gates::x(), gates::z()]).unwrap();
        let psi = random_pure(2, &mut rng(54));
        let out = oqs(OqsMode::Apply, &plan, &psi).unwrap();
        assert!(out.success_probability >= 0.99);
        assert!(distance_up_to_phase(out.state.vector(), &(&gates::h() * psi.vector())).unwrap() < 1e-9);

        let single = LcuPlan::new(&[2.0], vec![gates::x()]).unwrap();
        let out = oqs(OqsMode::Apply, &single, &psi).unwrap();
        assert_eq!(out.iterations, 0);
        assert!((out.success_probability - 1.0).abs() < 1e-12);

        let bad = LcuPlan::new(&[1.0, 1.0], vec![ComplexMatrix::identity(2), gates::x()]).unwrap();
        assert!(matches!(oqs(OqsMode::Apply, &bad, &psi), Err(QError::NotBlockEncoding(_))));
    }
}
