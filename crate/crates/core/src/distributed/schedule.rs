//! Sequential scheduling: two-block teleportation chains and the
//! classical outer loop around a parametric protocol.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::ResourceLedger;
use crate::error::{QError, Result};
use crate::oblivious::{oqt_coefficients, oqt_step, OqtRecord, Parities};
use crate::states::{ChoiProgram, MixedState};

/// Runs the chain with only two program blocks alive at a time.
///
/// Block `k % 2` receives program `k`; the block just measured is reset and
/// re-prepared with the next program before the following step.
pub fn pingpong_run(
    programs: &[ChoiProgram],
    input: &MixedState,
    blocks: usize,
    parities: Parities<'_>,
) -> Result<(OqtRecord, ResourceLedger)> {
    if blocks != 2 {
        return Err(QError::InvalidArgument(format!("ping-pong needs exactly 2 blocks, got {blocks}")));
    }
    if programs.is_empty() {
        return Err(QError::Empty("no programs".into()));
    }
    let mut parities = parities;
    if let Parities::Forced(bits) = &parities {
        if bits.len() != programs.len() || bits.iter().any(|&b| b > 1) {
            return Err(QError::InvalidArgument(format!("{} forced parities for {} programs", bits.len(), programs.len())));
        }
    }
    let mut ledger = ResourceLedger::default();
    // The input register plus two ports per occupied block.
    let mut live = 1usize;
    let mut occupied = [false; 2];
    let mut state = input.clone();
    let mut bits = Vec::with_capacity(programs.len());
    let mut path_probability = 1.0;
    for (k, program) in programs.iter().enumerate() {
        let block = k % 2;
        if occupied[block] {
            return Err(QError::Resource(format!("block {block} re-prepared while still live")));
        }
        occupied[block] = true;
        live += 2;
        ledger.max_live_registers = ledger.max_live_registers.max(live);
        let (b0, b1) = oqt_step(program, &state)?;
        let bit = match &mut parities {
            Parities::Forced(f) => f[k],
            Parities::Sampled(rng) => u8::from(rng.random::<f64>() >= b0.probability),
        };
        let branch = if bit == 0 { b0 } else { b1 };
        path_probability *= branch.probability;
        state = branch.post_state;
        bits.push(bit);
        // The measured pair is the previous holder of the state and this
        // block's in port; the previous block becomes free.
        live -= 2;
        if k > 0 {
            occupied[1 - block] = false;
        }
        ledger.oqt_ops += 1;
        ledger.classical_bits_sent += 1;
        ledger.depth += 1;
    }
    let s = bits.iter().filter(|&&b| b == 1).count();
    let (alpha, beta) = oqt_coefficients(state.dim(), s);
    let record = OqtRecord { parity_bits: bits, s, final_state: state, path_probability, alpha, beta, readout: None };
    Ok((record, ledger))
}

/// Cyclic coordinate descent on a shrinking grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub initial: Vec<f64>,
    pub step: f64,
    /// Step multiplier after each full cycle, in `(0, 1)`.
    pub shrink: f64,
    /// Grid points on each side of the current coordinate.
    pub grid: usize,
    pub iterations: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig { initial: vec![0.0], step: 0.5, shrink: 0.5, grid: 2, iterations: 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HybridOutcome {
    pub theta: Vec<f64>,
    pub objective: f64,
    /// Best objective before the first cycle and after each cycle.
    pub trace: Vec<f64>,
}

/// Minimizes `objective(theta, rng)`; moves only on strict improvement.
pub fn hybrid_optimize(
    objective: &mut dyn FnMut(&[f64], &mut dyn RngCore) -> Result<f64>,
    config: &HybridConfig,
    rng: &mut dyn RngCore,
) -> Result<HybridOutcome> {
    if config.initial.is_empty() || config.initial.iter().any(|v| !v.is_finite()) {
        return Err(QError::InvalidArgument("initial parameters must be a finite non-empty vector".into()));
    }
    if !(config.step > 0.0) || !(config.shrink > 0.0 && config.shrink < 1.0) {
        return Err(QError::InvalidArgument("step must be positive and shrink in (0, 1)".into()));
    }
    let mut eval = |theta: &[f64], rng: &mut dyn RngCore| -> Result<f64> {
        let f = objective(theta, rng)?;
        if f.is_finite() {
            Ok(f)
        } else {
            Err(QError::NonFinite(format!("objective at {theta:?}")))
        }
    };
    let mut theta = config.initial.clone();
    let mut best = eval(&theta, rng)?;
    let mut trace = vec![best];
    let mut step = config.step;
    let g = config.grid as i64;
    for _ in 0..config.iterations {
        for j in 0..theta.len() {
            let centre = theta[j];
            for k in (-g..=g).filter(|&k| k != 0) {
                let mut trial = theta.clone();
                trial[j] = centre + k as f64 * step;
                let f = eval(&trial, rng)?;
                if f < best {
                    best = f;
                    theta = trial;
                }
            }
        }
        trace.push(best);
        step *= config.shrink;
    }
    Ok(HybridOutcome { theta, objective: best, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oblivious::oqt_sequence;
    use crate::qmath::{gates, random_unitary, ComplexMatrix};
    use crate::states::choi_of_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rho0(d: usize) -> MixedState {
        MixedState::from_matrix(ComplexMatrix::projector(&ComplexMatrix::basis(d, 0))).unwrap()
    }

    #[test]
    fn identity_programs_return_input() {
        let id = choi_of_unitary(&ComplexMatrix::identity(2)).unwrap();
        let programs = vec![id; 4];
        let (rec, _) = pingpong_run(&programs, &rho0(2), 2, Parities::Forced(&[0; 4])).unwrap();
        assert!(rec.final_state.matrix().approx_eq(rho0(2).matrix(), 1e-12));
    }

    #[test]
    fn forced_trivial_parities_compose_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let us: Vec<ComplexMatrix> = (0..4).map(|_| random_unitary(2, &mut rng)).collect();
        let programs: Vec<ChoiProgram> = us.iter().map(|u| choi_of_unitary(u).unwrap()).collect();
        let (rec, ledger) = pingpong_run(&programs, &rho0(2), 2, Parities::Forced(&[0; 4])).unwrap();
        let total = us.iter().fold(ComplexMatrix::identity(2), |acc, u| u * &acc);
        assert!(rec.final_state.matrix().approx_eq(&total.conjugate(rho0(2).matrix()), 1e-9));
        assert_eq!(ledger.depth, 4);
        let parallel = oqt_sequence(&programs, &rho0(2), Parities::Forced(&[0, 1, 1, 0])).unwrap();
        let (pp, _) = pingpong_run(&programs, &rho0(2), 2, Parities::Forced(&[0, 1, 1, 0])).unwrap();
        assert!(pp.final_state.matrix().approx_eq(parallel.final_state.matrix(), 1e-12));
        assert!((pp.path_probability - parallel.path_probability).abs() < 1e-12);
    }

    #[test]
    fn live_registers_do_not_grow() {
        let id = choi_of_unitary(&gates::h()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, l2) = pingpong_run(&vec![id.clone(); 2], &rho0(2), 2, Parities::Sampled(&mut rng)).unwrap();
        let (_, l8) = pingpong_run(&vec![id; 8], &rho0(2), 2, Parities::Sampled(&mut rng)).unwrap();
        assert_eq!(l2.max_live_registers, l8.max_live_registers);
        assert_eq!(l8.max_live_registers, 3);
    }

    #[test]
    fn pingpong_rejects_bad_arguments() {
        let id = choi_of_unitary(&ComplexMatrix::identity(2)).unwrap();
        assert!(matches!(pingpong_run(&[], &rho0(2), 2, Parities::Forced(&[])), Err(QError::Empty(_))));
        assert!(pingpong_run(&[id], &rho0(2), 3, Parities::Forced(&[0])).is_err());
    }

    #[test]
    fn single_rotation_optimum() {
        let mut f = |t: &[f64], _: &mut dyn RngCore| -> Result<f64> { Ok((t[0] / 2.0).sin().powi(2)) };
        let cfg = HybridConfig { initial: vec![1.3], ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = hybrid_optimize(&mut f, &cfg, &mut rng).unwrap();
        assert!(out.theta[0].abs() < 0.05, "{:?}", out.theta);
        assert!(out.objective <= out.trace[0]);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_objective_stays_put() {
        let mut f = |_: &[f64], _: &mut dyn RngCore| -> Result<f64> { Ok(0.7) };
        let cfg = HybridConfig { initial: vec![0.4, -1.0], ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = hybrid_optimize(&mut f, &cfg, &mut rng).unwrap();
        assert_eq!(out.theta, cfg.initial);
        assert_eq!(out.objective, 0.7);
    }

    #[test]
    fn two_parameter_overlap_matches_grid_scan() {
        // f = 1 - |<phi| RZ(b) RY(a) |0>|^2 for a fixed target phi.
        let phi = gates::rz(0.9) * gates::ry(2.1) * ComplexMatrix::basis(2, 0);
        let cost = |a: f64, b: f64| 1.0 - phi.inner_product(&(gates::rz(b) * gates::ry(a) * ComplexMatrix::basis(2, 0))).norm_sqr();
        let mut f = |t: &[f64], _: &mut dyn RngCore| -> Result<f64> { Ok(cost(t[0], t[1])) };
        let cfg = HybridConfig { initial: vec![1.0, 0.0], step: 0.5, shrink: 0.6, grid: 3, iterations: 20 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = hybrid_optimize(&mut f, &cfg, &mut rng).unwrap();
        let mut oracle = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=200 {
            for j in 0..=200 {
                let (a, b) = (i as f64 * std::f64::consts::PI / 200.0, -3.0 + j as f64 * 6.0 / 200.0);
                let v = cost(a, b);
                if v < oracle.0 {
                    oracle = (v, a, b);
                }
            }
        }
        assert!((out.theta[0] - oracle.1).abs() < 0.1 && (out.theta[1] - oracle.2).abs() < 0.1, "{:?} vs {oracle:?}", out.theta);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let mut f = |_: &[f64], _: &mut dyn RngCore| -> Result<f64> { Ok(f64::NAN) };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(matches!(hybrid_optimize(&mut f, &HybridConfig::default(), &mut rng), Err(QError::NonFinite(_))));
    }
}
