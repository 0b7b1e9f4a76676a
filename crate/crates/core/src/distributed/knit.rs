//! Cutting nonlocal two-register gates into local operator sandwiches.

use std::collections::HashMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::OutcomeRecord;
use crate::error::{QError, Result};
use crate::oblivious::{sample_index, GeneralizedPauliBasis};
use crate::qmath::{embed_at, ComplexMatrix, C64, EPS};
use crate::states::MixedState;

/// Below this a coefficient is dropped from the expansion.
const COEFF_FLOOR: f64 = 1e-14;

/// `U = sum_ij u_ij sigma_i (x) sigma_j` over the clock-shift basis.
#[derive(Clone, Debug, PartialEq)]
pub struct KnitDecomposition {
    pub local_dim: usize,
    /// `u_ij` at `i * d^2 + j`.
    pub coefficients: Vec<C64>,
    pub one_norm: f64,
    /// `one_norm^2`
    pub overhead: f64,
}

impl KnitDecomposition {
    pub fn coefficient(&self, i: usize, j: usize) -> C64 {
        let n = self.local_dim * self.local_dim;
        self.coefficients[i * n + j]
    }

    /// `(i, j, u_ij)` with `u_ij` non-negligible.
    pub fn terms(&self) -> Vec<(usize, usize, C64)> {
        let n = self.local_dim * self.local_dim;
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, u)| u.norm() > COEFF_FLOOR)
            .map(|(k, u)| (k / n, k % n, *u))
            .collect()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let basis = GeneralizedPauliBasis::new(self.local_dim);
        let n = self.local_dim * self.local_dim;
        let mut out = ComplexMatrix::zeros(n, n);
        for (i, j, u) in self.terms() {
            out = &out + &basis.get(i).kron(basis.get(j)).scale(u);
        }
        out
    }
}

pub fn knit_decompose(u: &ComplexMatrix) -> Result<KnitDecomposition> {
    if !u.is_square() {
        return Err(QError::DimensionMismatch(format!("gate is {}x{}", u.rows(), u.cols())));
    }
    let d = (u.rows() as f64).sqrt().round() as usize;
    if d * d != u.rows() || d < 2 {
        return Err(QError::DimensionMismatch(format!("gate of dimension {} is not d x d", u.rows())));
    }
    let basis = GeneralizedPauliBasis::new(d);
    let n = d * d;
    let norm = 1.0 / n as f64;
    let mut coefficients = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = basis.get(i).kron(basis.get(j));
            coefficients.push(p.inner_product(u) * norm);
        }
    }
    let one_norm: f64 = coefficients.iter().map(|c| c.norm()).sum();
    Ok(KnitDecomposition { local_dim: d, coefficients, one_norm, overhead: one_norm * one_norm })
}

/// A gate on `targets`; `cut` marks it for knitting.
#[derive(Clone, Debug, PartialEq)]
pub struct KnitOp {
    pub gate: ComplexMatrix,
    pub targets: Vec<usize>,
    pub cut: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnitCircuit {
    pub dims: Vec<usize>,
    pub ops: Vec<KnitOp>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnitMode {
    ExactSum,
    Sampled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnitOutcome {
    pub estimate: f64,
    pub stderr: f64,
    /// Product of `||u||_1^2` over cuts.
    pub overhead: f64,
    /// `tr(O C(rho))` without cutting.
    pub direct: f64,
    pub records: Vec<OutcomeRecord>,
}

/// Paired indices `(i, j), (k, l)` for one cut with weight `u_ij conj(u_kl)`.
#[derive(Clone, Copy, Debug)]
struct Pair {
    left: usize,
    right: usize,
    weight: C64,
}

struct Cut {
    op: usize,
    pairs: Vec<Pair>,
    sandwiches: Vec<ComplexMatrix>,
}

impl KnitCircuit {
    fn check(&self) -> Result<()> {
        for (k, op) in self.ops.iter().enumerate() {
            let dim: usize = op.targets.iter().map(|&t| self.dims.get(t).copied().unwrap_or(0)).product();
            if op.targets.iter().any(|&t| t >= self.dims.len()) || op.gate.rows() != dim || !op.gate.is_square() {
                return Err(QError::DimensionMismatch(format!("gate {k} does not fit its targets")));
            }
            if op.gate.unitarity_residual() > EPS {
                return Err(QError::NotUnitary(op.gate.unitarity_residual()));
            }
            if op.cut && (op.targets.len() != 2 || self.dims[op.targets[0]] != self.dims[op.targets[1]]) {
                return Err(QError::InvalidArgument(format!("cut gate {k} must act on two equal registers")));
            }
        }
        Ok(())
    }

    /// Uncut density-matrix simulation.
    pub fn simulate(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check()?;
        let mut rho = rho.clone();
        for op in &self.ops {
            rho = embed_at(&op.gate, &op.targets, &self.dims)?.conjugate(&rho);
        }
        Ok(rho)
    }

    pub fn cut_count(&self) -> usize {
        self.ops.iter().filter(|o| o.cut).count()
    }

    fn cuts(&self) -> Result<Vec<Cut>> {
        let mut cuts = Vec::new();
        for (k, op) in self.ops.iter().enumerate().filter(|(_, o)| o.cut) {
            let dec = knit_decompose(&op.gate)?;
            let basis = GeneralizedPauliBasis::new(dec.local_dim);
            let terms = dec.terms();
            let mut sandwiches = Vec::new();
            let mut index = HashMap::new();
            for &(i, j, _) in &terms {
                index.insert((i, j), sandwiches.len());
                sandwiches.push(embed_at(&basis.get(i).kron(basis.get(j)), &op.targets, &self.dims)?);
            }
            let mut pairs = Vec::with_capacity(terms.len() * terms.len());
            for &(i, j, u) in &terms {
                for &(k2, l, v) in &terms {
                    pairs.push(Pair { left: index[&(i, j)], right: index[&(k2, l)], weight: u * v.conj() });
                }
            }
            cuts.push(Cut { op: k, pairs, sandwiches });
        }
        Ok(cuts)
    }

    /// `tr(O rho')` with each cut replaced by `A rho B†` for the chosen pairs.
    fn sandwich_value(&self, rho: &ComplexMatrix, observable: &ComplexMatrix, cuts: &[Cut], choice: &[usize]) -> Result<C64> {
        let mut rho = rho.clone();
        let mut c = 0;
        for (k, op) in self.ops.iter().enumerate() {
            if c < cuts.len() && cuts[c].op == k {
                let pair = cuts[c].pairs[choice[c]];
                let a = &cuts[c].sandwiches[pair.left];
                let b = &cuts[c].sandwiches[pair.right];
                rho = &(a * &rho) * &b.adjoint();
                c += 1;
            } else {
                rho = embed_at(&op.gate, &op.targets, &self.dims)?.conjugate(&rho);
            }
        }
        Ok((observable * &rho).trace())
    }
}

/// Estimates `tr(O C(rho))` from the paired-term expansion of every cut gate.
pub fn knit_estimate(
    circuit: &KnitCircuit,
    input: &MixedState,
    observable: &ComplexMatrix,
    mode: KnitMode,
    shots: usize,
    rng: &mut dyn RngCore,
) -> Result<KnitOutcome> {
    let total: usize = circuit.dims.iter().product();
    if input.dim() != total || observable.rows() != total {
        return Err(QError::DimensionMismatch(format!("circuit on {total} dimensions")));
    }
    if observable.hermiticity_residual() > EPS {
        return Err(QError::InvalidArgument("observable must be Hermitian".into()));
    }
    let direct = (observable * &circuit.simulate(input.matrix())?).trace().re;
    let cuts = circuit.cuts()?;
    let overhead: f64 = cuts.iter().map(|c| c.pairs.iter().map(|p| p.weight.norm()).sum::<f64>()).product();
    let radix: Vec<usize> = cuts.iter().map(|c| c.pairs.len()).collect();
    let flat = |choice: &[usize]| choice.iter().zip(&radix).fold(0, |acc, (c, r)| acc * r + c);
    match mode {
        KnitMode::ExactSum => {
            let count: usize = radix.iter().product();
            let mut sum = C64::new(0.0, 0.0);
            let mut choice = vec![0; cuts.len()];
            for _ in 0..count {
                let w: C64 = cuts.iter().zip(&choice).map(|(c, &k)| c.pairs[k].weight).product();
                sum += w * circuit.sandwich_value(input.matrix(), observable, &cuts, &choice)?;
                for (slot, r) in choice.iter_mut().zip(&radix).rev() {
                    *slot += 1;
                    if *slot < *r {
                        break;
                    }
                    *slot = 0;
                }
            }
            Ok(KnitOutcome { estimate: sum.re, stderr: 0.0, overhead, direct, records: Vec::new() })
        }
        KnitMode::Sampled => {
            if shots == 0 {
                return Err(QError::InvalidArgument("shots must be positive".into()));
            }
            let probs: Vec<Vec<f64>> = cuts.iter().map(|c| c.pairs.iter().map(|p| p.weight.norm()).collect()).collect();
            let mut values: HashMap<Vec<usize>, f64> = HashMap::new();
            let mut records = Vec::with_capacity(shots);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for shot in 0..shots {
                let choice: Vec<usize> = probs.iter().map(|p| sample_index(p, rng)).collect();
                let x = match values.get(&choice) {
                    Some(x) => *x,
                    None => {
                        let w: C64 = cuts.iter().zip(&choice).map(|(c, &k)| c.pairs[k].weight).product();
                        let v = circuit.sandwich_value(input.matrix(), observable, &cuts, &choice)?;
                        let x = overhead * (w / w.norm() * v).re;
                        values.insert(choice.clone(), x);
                        x
                    }
                };
                sum += x;
                sum_sq += x * x;
                let mut rec = OutcomeRecord::new(shot, Vec::new(), vec![x]);
                rec.term = Some(flat(&choice));
                records.push(rec);
            }
            let n = shots as f64;
            let mean = sum / n;
            let var = if shots > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
            Ok(KnitOutcome { estimate: mean, stderr: (var / n).sqrt(), overhead, direct, records })
        }
    }
}
