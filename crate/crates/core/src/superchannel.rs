//! Higher-order maps on stored channel programs, superposed channels from
//! dilations, and teleportation-based composition of channel programs.

use serde::Serialize;

use crate::algorithms::{dqc1, MeasurementAxis};
use crate::error::{QError, Result};
use crate::oblivious::BinaryBranch;
use crate::qmath::{partial_trace_at, ComplexMatrix, RegisterLayout, C64, ZERO};
use crate::states::{ChoiProgram, Dilation, MixedState};

/// Comb with pre-circuit `U1` and post-circuit `U2`, each on
/// `system (x) memory` with the memory least significant.
///
/// `K1_m = (I (x) <m|) U1 (I (x) |0>)` and
/// `K2_{m mu} = (I (x) <mu|) U2 (I (x) |m>)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Superchannel {
    u1: ComplexMatrix,
    u2: ComplexMatrix,
    system_dim: usize,
    memory_dim: usize,
}

impl Superchannel {
    pub fn new(u1: ComplexMatrix, u2: ComplexMatrix, system_dim: usize, memory_dim: usize) -> Result<Self> {
        let n = system_dim * memory_dim;
        for u in [&u1, &u2] {
            if u.rows() != n || !u.is_square() {
                return Err(QError::DimensionMismatch(format!(
                    "{}x{} circuit for system {system_dim} x memory {memory_dim}",
                    u.rows(),
                    u.cols()
                )));
            }
            let r = u.unitarity_residual();
            if r > 1e-9 {
                return Err(QError::NotUnitary(r));
            }
        }
        Ok(Superchannel { u1, u2, system_dim, memory_dim })
    }

    pub fn identity(system_dim: usize) -> Self {
        let id = ComplexMatrix::identity(system_dim);
        Superchannel { u1: id.clone(), u2: id, system_dim, memory_dim: 1 }
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn memory_dim(&self) -> usize {
        self.memory_dim
    }

    fn block(u: &ComplexMatrix, d: usize, r: usize, out: usize, inp: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(d, d, |a, b| u[(a * r + out, b * r + inp)])
    }

    pub fn pre_kraus(&self, m: usize) -> ComplexMatrix {
        Self::block(&self.u1, self.system_dim, self.memory_dim, m, 0)
    }

    pub fn post_kraus(&self, m: usize, mu: usize) -> ComplexMatrix {
        Self::block(&self.u2, self.system_dim, self.memory_dim, mu, m)
    }

    /// Channel realized by the comb with an identity slot.
    pub fn comb_kraus(&self) -> Vec<ComplexMatrix> {
        let (d, r) = (self.system_dim, self.memory_dim);
        (0..r)
            .map(|mu| (0..r).fold(ComplexMatrix::zeros(d, d), |acc, m| &acc + &(&self.post_kraus(m, mu) * &self.pre_kraus(m))))
            .collect()
    }

    /// `S_mu = sum_m K2_{m mu} (x) K1_m^T` acting on `(out, in)` Choi ports.
    fn choi_kraus(&self) -> Vec<ComplexMatrix> {
        let (d, r) = (self.system_dim, self.memory_dim);
        (0..r)
            .map(|mu| {
                (0..r).fold(ComplexMatrix::zeros(d * d, d * d), |acc, m| {
                    &acc + &self.post_kraus(m, mu).kron(&self.pre_kraus(m).transpose())
                })
            })
            .collect()
    }
}

/// `S_mu = sum_m K2_{m mu} (x) K1_m`; rejects sets with
/// `||sum S_mu† S_mu - I||_max > 1e-9`.
pub fn superchannel_kraus(sc: &Superchannel) -> Result<Vec<ComplexMatrix>> {
    let (d, r) = (sc.system_dim, sc.memory_dim);
    let ops: Vec<ComplexMatrix> = (0..r)
        .map(|mu| {
            (0..r).fold(ComplexMatrix::zeros(d * d, d * d), |acc, m| &acc + &sc.post_kraus(m, mu).kron(&sc.pre_kraus(m)))
        })
        .collect();
    let sum = ops.iter().fold(ComplexMatrix::zeros(d * d, d * d), |acc, s| &acc + &(&s.adjoint() * s));
    let residual = sum.max_abs_diff(&ComplexMatrix::identity(d * d));
    if residual > 1e-9 {
        return Err(QError::NotTracePreserving(residual));
    }
    Ok(ops)
}

/// Choi state of the channel `rho -> tr_M U2 (E (x) id)(U1 (rho (x) |0><0|) U1†) U2†`.
pub fn apply_superchannel(sc: &Superchannel, program: &ChoiProgram) -> Result<ChoiProgram> {
    let d = sc.system_dim;
    if program.out_dim() != d || program.in_dim() != d {
        return Err(QError::DimensionMismatch(format!(
            "program {}x{} for superchannel on dimension {d}",
            program.out_dim(),
            program.in_dim()
        )));
    }
    let rho = program.density();
    let out = sc
        .choi_kraus()
        .iter()
        .fold(ComplexMatrix::zeros(d * d, d * d), |acc, s| &acc + &s.conjugate(&rho));
    Ok(ChoiProgram::mixed_unchecked(d, d, out))
}

/// `sum_ij c_i c_j* tr_a(U_i (rho (x) rho_a) U_j†) / ||c||_1^2`.
///
/// The trace of the result is the post-selection probability of the
/// superposition.
pub fn controlled_channel_superpose(
    coeffs: &[C64],
    dilations: &[Dilation],
    rho: &MixedState,
    ancilla_state: Option<&ComplexMatrix>,
) -> Result<ComplexMatrix> {
    let first = dilations.first().ok_or_else(|| QError::Empty("no channels".into()))?;
    if coeffs.len() != dilations.len() {
        return Err(QError::DimensionMismatch(format!("{} coefficients for {} channels", coeffs.len(), dilations.len())));
    }
    let (d, a) = (first.system_dim(), first.ancilla_dim());
    if dilations.iter().any(|u| u.system_dim() != d || u.ancilla_dim() != a) {
        return Err(QError::DimensionMismatch("dilations differ in system or ancilla dimension".into()));
    }
    if rho.dim() != d {
        return Err(QError::DimensionMismatch(format!("state of dim {} for system {d}", rho.dim())));
    }
    let rho_a = match ancilla_state {
        Some(m) if m.rows() != a => {
            return Err(QError::DimensionMismatch(format!("ancilla state of dim {} for ancilla {a}", m.rows())))
        }
        Some(m) => m.clone(),
        None => ComplexMatrix::projector(&ComplexMatrix::basis(a, 0)),
    };
    let norm: f64 = coeffs.iter().map(|c| c.norm()).sum();
    if norm <= 0.0 {
        return Err(QError::InvalidArgument("coefficients are all zero".into()));
    }
    let joint = rho.matrix().kron(&rho_a);
    let mut out = ComplexMatrix::zeros(d, d);
    for (ci, ui) in coeffs.iter().zip(dilations) {
        let left = ui.unitary() * &joint;
        for (cj, uj) in coeffs.iter().zip(dilations) {
            let w = ci * cj.conj() / (norm * norm);
            if w == ZERO {
                continue;
            }
            let term = &left * &uj.unitary().adjoint();
            out = &out + &partial_trace_at(&term, &[0], &[d, a]).scale(w);
        }
    }
    Ok(out)
}

/// DQC1 with the dilation controlled on `rho (x) |0><0|`; the outcome
/// encodes `tr(K_0 rho)` for `K_0 = <0|U|0>`.
pub fn dqc1_channel_trace(dilation: &Dilation, rho: &MixedState, axis: MeasurementAxis) -> Result<f64> {
    let a = dilation.ancilla_dim();
    let anc = ComplexMatrix::projector(&ComplexMatrix::basis(a, 0));
    let joint = MixedState::with_layout_unchecked(
        RegisterLayout::new([("system", rho.dim()), ("ancilla", a)])?,
        rho.matrix().kron(&anc),
    );
    dqc1(dilation.unitary(), &joint, axis)
}

/// Binary Bell measurement across `(in of p2, out of p1)`.
///
/// Branch 0 holds the program of `E2 . E1` over `(out of p2, in of p1)`.
pub fn oqt_compose_choi(p1: &ChoiProgram, p2: &ChoiProgram) -> Result<(BinaryBranch, BinaryBranch)> {
    if p2.in_dim() != p1.out_dim() {
        return Err(QError::DimensionMismatch(format!(
            "cannot feed output of dimension {} into input of dimension {}",
            p1.out_dim(),
            p2.in_dim()
        )));
    }
    let (o2, k, i1) = (p2.out_dim(), p1.out_dim(), p1.in_dim());
    let r1 = p1.density();
    let r2 = p2.density();
    let n = o2 * i1;
    let sigma0 = ComplexMatrix::from_fn(n, n, |row, col| {
        let (x, xi) = (row / i1, row % i1);
        let (y, yi) = (col / i1, col % i1);
        let mut acc = ZERO;
        for a in 0..k {
            for b in 0..k {
                acc += r2[(x * k + a, y * k + b)] * r1[(a * i1 + xi, b * i1 + yi)];
            }
        }
        acc / k as f64
    });
    let m2 = partial_trace_at(&r2, &[0], &[o2, k]);
    let m1 = partial_trace_at(&r1, &[1], &[k, i1]);
    let sigma1 = &m2.kron(&m1) - &sigma0;
    let layout = RegisterLayout::new([("out", o2), ("in", i1)])?;
    let (p0, p1v) = (sigma0.trace().re, sigma1.trace().re);
    let norm = |m: ComplexMatrix, p: f64| {
        if p < 1e-15 {
            ComplexMatrix::identity(n).scale_re(1.0 / n as f64)
        } else {
            m.scale_re(1.0 / p)
        }
    };
    Ok((
        BinaryBranch {
            parity: 0,
            probability: p0,
            post_state: MixedState::with_layout_unchecked(layout.clone(), norm(sigma0, p0)),
        },
        BinaryBranch {
            parity: 1,
            probability: p1v,
            post_state: MixedState::with_layout_unchecked(layout, norm(sigma1, p1v)),
        },
    ))
}

/// Validity report for a Choi state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChoiValidity {
    pub min_eigenvalue: f64,
    pub trace_error: f64,
    pub marginal_error: f64,
}

impl ChoiValidity {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol && self.trace_error <= tol && self.marginal_error <= tol
    }
}

pub fn choi_validity(program: &ChoiProgram) -> ChoiValidity {
    let rho = program.density();
    let (vals, _) = rho.hermitian_eigen();
    let din = program.in_dim();
    let marginal = partial_trace_at(&rho, &[1], &[program.out_dim(), din]);
    ChoiValidity {
        min_eigenvalue: vals.last().copied().unwrap_or(0.0),
        trace_error: (rho.trace().re - 1.0).abs(),
        marginal_error: marginal.max_abs_diff(&ComplexMatrix::identity(din).scale_re(1.0 / din as f64)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{lcu_apply, LcuPlan};
    use crate::qmath::{c, gates, random_unitary, ONE};
    use crate::states::{choi_of_channel, choi_of_unitary, stinespring_dilation, KrausChannel, PureState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_sc(d: usize, r: usize, g: &mut ChaCha8Rng) -> Superchannel {
        Superchannel::new(random_unitary(d * r, g), random_unitary(d * r, g), d, r).unwrap()
    }

    fn random_channel(d: usize, nk: usize, g: &mut ChaCha8Rng) -> KrausChannel {
        Dilation::new(random_unitary(d * nk, g), d, nk).unwrap().channel().unwrap()
    }

    #[test]
    fn kraus_examples() {
        let id = superchannel_kraus(&Superchannel::identity(2)).unwrap();
        assert_eq!(id.len(), 1);
        assert!(id[0].approx_eq(&ComplexMatrix::identity(4), 0.0));
        let mut g = rng(61);
        for _ in 0..10 {
            let ks = superchannel_kraus(&random_sc(2, 2, &mut g)).unwrap();
            let sum = ks.iter().fold(ComplexMatrix::zeros(4, 4), |acc, s| &acc + &(&s.adjoint() * s));
            assert!(sum.approx_eq(&ComplexMatrix::identity(4), 1e-9));
        }
        assert!(Superchannel::new(ComplexMatrix::identity(4).scale_re(2.0), ComplexMatrix::identity(4), 2, 2).is_err());
    }

    #[test]
    fn identity_superchannel_fixes_programs() {
        let mut g = rng(62);
        let p = choi_of_channel(&random_channel(3, 2, &mut g));
        let out = apply_superchannel(&Superchannel::identity(3), &p).unwrap();
        assert!(out.density().approx_eq(&p.density(), 1e-14));
    }

    #[test]
    fn pre_and_post_composition() {
        let mut g = rng(63);
        let (u, v, w) = (random_unitary(2, &mut g), random_unitary(2, &mut g), random_unitary(2, &mut g));
        let sc = Superchannel::new(v.clone(), w.clone(), 2, 1).unwrap();
        let out = apply_superchannel(&sc, &choi_of_unitary(&u).unwrap()).unwrap();
        let expect = choi_of_unitary(&(&(&w * &u) * &v)).unwrap();
        assert!(out.density().approx_eq(&expect.density(), 1e-10));
    }

    #[test]
    fn identity_program_gives_comb_channel() {
        let mut g = rng(64);
        let sc = random_sc(2, 2, &mut g);
        let out = apply_superchannel(&sc, &choi_of_unitary(&ComplexMatrix::identity(2)).unwrap()).unwrap();
        let comb = KrausChannel::new(sc.comb_kraus()).unwrap();
        assert!(out.density().approx_eq(&choi_of_channel(&comb).density(), 1e-10));
    }

    #[test]
    fn measure_and_record_superchannel() {
        // U1 copies the computational basis into memory; the output channel
        // is E after complete dephasing
        let sc = Superchannel::new(gates::cnot(), ComplexMatrix::identity(4), 2, 2).unwrap();
        let mut g = rng(65);
        let e = random_channel(2, 2, &mut g);
        let out = apply_superchannel(&sc, &choi_of_channel(&e)).unwrap();
        let dephase = KrausChannel::dephasing(0.5).unwrap();
        let expect = choi_of_channel(&e.after(&dephase).unwrap());
        assert!(out.density().approx_eq(&expect.density(), 1e-10));
    }

    #[test]
    fn outputs_are_valid_choi_states() {
        let mut g = rng(66);
        for r in 1..=3 {
            let sc = random_sc(2, r, &mut g);
            let p = choi_of_channel(&random_channel(2, 3, &mut g));
            let out = apply_superchannel(&sc, &p).unwrap();
            assert!(choi_validity(&out).is_valid(1e-9), "{:?}", choi_validity(&out));
        }
    }

    #[test]
    fn superpose_examples() {
        let mut g = rng(67);
        let rho = PureState::from_amplitudes(&random_unitary(2, &mut g).col(0).to_vec()).unwrap().density();
        let e = random_channel(2, 2, &mut g);
        let dil = stinespring_dilation(&e).unwrap();
        let out = controlled_channel_superpose(&[ONE], &[dil], &rho, None).unwrap();
        assert!(out.approx_eq(&e.apply_matrix(rho.matrix()), 1e-12));

        // unitary channels reduce to the LCU output
        let (u1, u2) = (random_unitary(2, &mut g), random_unitary(2, &mut g));
        let dils = vec![Dilation::new(u1.clone(), 2, 1).unwrap(), Dilation::new(u2.clone(), 2, 1).unwrap()];
        let psi = PureState::from_amplitudes(&random_unitary(2, &mut g).col(0).to_vec()).unwrap();
        let out = controlled_channel_superpose(&[c(0.6, 0.0), c(0.4, 0.0)], &dils, &psi.density(), None).unwrap();
        let plan = LcuPlan::new(&[0.6, 0.4], vec![u1, u2]).unwrap();
        let (p, post) = lcu_apply(&plan, &psi).unwrap();
        assert!((out.trace().re - p).abs() < 1e-12);
        assert!(out.approx_eq(&ComplexMatrix::projector(post.vector()).scale_re(p), 1e-12));
    }

    #[test]
    fn orthogonal_flags_kill_cross_terms() {
        let mut g = rng(68);
        let (v0, v1) = (random_unitary(2, &mut g), random_unitary(2, &mut g));
        let d0 = Dilation::new(v0.kron(&ComplexMatrix::identity(2)), 2, 2).unwrap();
        let d1 = Dilation::new(v1.kron(&gates::x()), 2, 2).unwrap();
        let rho = PureState::from_amplitudes(&random_unitary(2, &mut g).col(0).to_vec()).unwrap().density();
        let cs = [c(0.7, 0.0), c(0.0, 0.3)];
        let out = controlled_channel_superpose(&cs, &[d0, d1], &rho, None).unwrap();
        let expect = &v0.conjugate(rho.matrix()).scale_re(0.49) + &v1.conjugate(rho.matrix()).scale_re(0.09);
        assert!(out.approx_eq(&expect, 1e-12));
    }

    #[test]
    fn superpose_matches_direct_operator() {
        let mut g = rng(69);
        let dils: Vec<_> = (0..3).map(|_| Dilation::new(random_unitary(4, &mut g), 2, 2).unwrap()).collect();
        let cs = [c(0.5, 0.1), c(-0.2, 0.3), c(0.1, -0.4)];
        let rho = MixedState::maximally_mixed(2);
        let out = controlled_channel_superpose(&cs, &dils, &rho, None).unwrap();
        let norm: f64 = cs.iter().map(|z| z.norm()).sum();
        let ct = cs.iter().zip(&dils).fold(ComplexMatrix::zeros(4, 4), |acc, (z, u)| &acc + &u.unitary().scale(z / norm));
        let anc = ComplexMatrix::projector(&ComplexMatrix::basis(2, 0));
        let expect = partial_trace_at(&ct.conjugate(&rho.matrix().kron(&anc)), &[0], &[2, 2]);
        assert!(out.approx_eq(&expect, 1e-12));
        let bad = Dilation::new(random_unitary(6, &mut g), 2, 3).unwrap();
        assert!(controlled_channel_superpose(&cs[..2], &[dils[0].clone(), bad], &rho, None).is_err());
    }

    #[test]
    fn channel_trace_examples() {
        let mm = MixedState::maximally_mixed(2);
        let ad = stinespring_dilation(&KrausChannel::amplitude_damping(1.0).unwrap()).unwrap();
        assert!((dqc1_channel_trace(&ad, &mm, MeasurementAxis::X).unwrap() - 0.75).abs() < 1e-12);
        let deph = stinespring_dilation(&KrausChannel::dephasing(0.5).unwrap()).unwrap();
        let mut g = rng(70);
        let rho = PureState::from_amplitudes(&random_unitary(2, &mut g).col(0).to_vec()).unwrap().density();
        let expect = 0.5 * (1.0 + std::f64::consts::FRAC_1_SQRT_2);
        assert!((dqc1_channel_trace(&deph, &rho, MeasurementAxis::X).unwrap() - expect).abs() < 1e-12);
        let u = random_unitary(2, &mut g);
        let unitary = Dilation::new(u.clone(), 2, 1).unwrap();
        let a = dqc1_channel_trace(&unitary, &rho, MeasurementAxis::Y).unwrap();
        assert!((a - dqc1(&u, &rho, MeasurementAxis::Y).unwrap()).abs() < 1e-15);
        for _ in 0..10 {
            let dil = Dilation::new(random_unitary(6, &mut g), 2, 3).unwrap();
            let t = (&dil.block(0, 0) * rho.matrix()).trace();
            assert!((dqc1_channel_trace(&dil, &rho, MeasurementAxis::X).unwrap() - 0.5 * (1.0 + t.re)).abs() < 1e-10);
            assert!((dqc1_channel_trace(&dil, &rho, MeasurementAxis::Y).unwrap() - 0.5 * (1.0 + t.im)).abs() < 1e-10);
        }
    }

    #[test]
    fn compose_choi_examples() {
        let w = choi_of_unitary(&ComplexMatrix::identity(2)).unwrap();
        let (b0, _) = oqt_compose_choi(&w, &w).unwrap();
        assert!(b0.post_state.matrix().approx_eq(&w.density(), 1e-14));
        assert!((b0.probability - 0.25).abs() < 1e-14);

        let mut g = rng(71);
        let (v, u) = (random_unitary(3, &mut g), random_unitary(3, &mut g));
        let (b0, b1) = oqt_compose_choi(&choi_of_unitary(&v).unwrap(), &choi_of_unitary(&u).unwrap()).unwrap();
        let target = choi_of_unitary(&(&u * &v)).unwrap().density();
        assert!(b0.post_state.matrix().approx_eq(&target, 1e-10));
        let expect1 = (&ComplexMatrix::identity(9) - &target).scale_re(1.0 / 8.0);
        assert!(b1.post_state.matrix().approx_eq(&expect1, 1e-10));

        let e1 = KrausChannel::completely_depolarizing(2);
        let e2 = KrausChannel::dephasing(0.3).unwrap();
        let (b0, _) = oqt_compose_choi(&choi_of_channel(&e1), &choi_of_channel(&e2)).unwrap();
        let expect = choi_of_channel(&e2.after(&e1).unwrap()).density();
        assert!(b0.post_state.matrix().approx_eq(&expect, 1e-10));

        for _ in 0..10 {
            let (e1, e2) = (random_channel(2, 2, &mut g), random_channel(2, 3, &mut g));
            let (b0, b1) = oqt_compose_choi(&choi_of_channel(&e1), &choi_of_channel(&e2)).unwrap();
            let expect = choi_of_channel(&e2.after(&e1).unwrap()).density();
            assert!(b0.post_state.matrix().approx_eq(&expect, 1e-9));
            assert!((b0.probability + b1.probability - 1.0).abs() < 1e-12);
        }
        assert!(oqt_compose_choi(&w, &choi_of_unitary(&ComplexMatrix::identity(3)).unwrap()).is_err());
    }
}
