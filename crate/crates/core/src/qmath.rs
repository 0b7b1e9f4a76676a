//! Dense complex linear algebra over labeled multi-register systems.
//!
//! Register ordering is big-endian throughout: the first label of a
//! [`RegisterLayout`] is the most significant digit of a basis index, and
//! `tensor_product(a, b)` places `a` in the most significant position.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{QError, Result};

pub type C64 = Complex64;

/// Default cap on the number of entries produced by [`tensor_product`].
pub const DEFAULT_ENTRY_CAP: usize = 1 << 20;

/// Absolute tolerance used for equality checks unless stated otherwise.
pub const EPS: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix. Column vectors are `n x 1` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let cols = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == cols), "ragged matrix rows");
        Self::from_fn(r, cols, |i, j| rows[i][j])
    }

    /// Real-valued convenience constructor, row major.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self::from_fn(rows, cols, |i, j| c(data[i * cols + j], 0.0))
    }

    pub fn column(v: &[C64]) -> Self {
        ComplexMatrix(DMatrix::from_column_slice(v.len(), 1, v))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut m = Self::zeros(dim, 1);
        m[(index, 0)] = ONE;
        m
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO })
    }

    pub fn from_inner(m: DMatrix<C64>) -> Self {
        ComplexMatrix(m)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        ComplexMatrix(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix(self.0.map(|z| z * s))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        ComplexMatrix(self.0.map(|z| z * s))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius inner product `tr(self† other)`.
    pub fn inner_product(&self, other: &Self) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.0.shape(), other.0.shape(), "shape mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.0.shape() == other.0.shape() && self.max_abs_diff(other) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Max entry of `A†A - I`.
    pub fn unitarity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.rows()))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() <= tol
    }

    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint())
    }

    /// Kronecker product without a capacity check.
    pub fn kron(&self, other: &Self) -> Self {
        ComplexMatrix(self.0.kronecker(&other.0))
    }

    /// `self * rho * self†`
    pub fn conjugate(&self, rho: &Self) -> Self {
        &(self * rho) * &self.adjoint()
    }

    /// Outer product `|v><v|` of a column vector.
    pub fn projector(v: &Self) -> Self {
        v * &v.adjoint()
    }

    /// Column vector entries as a `Vec`.
    pub fn to_vec(&self) -> Vec<C64> {
        self.0.iter().copied().collect()
    }

    /// Submatrix copy.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        ComplexMatrix(self.0.view((r0, c0), (rows, cols)).into_owned())
    }

    /// Eigendecomposition of a Hermitian matrix, eigenvalues in descending
    /// order. Columns of the returned matrix are the eigenvectors.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        let herm = ComplexMatrix::from_fn(self.rows(), self.cols(), |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        });
        let eig = nalgebra::SymmetricEigen::new(herm.0);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let n = self.rows();
        let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    pub fn col(&self, j: usize) -> ComplexMatrix {
        self.block(0, j, self.rows(), 1)
    }

    /// Matrix power for non-negative exponents.
    pub fn pow(&self, n: usize) -> Self {
        let mut out = Self::identity(self.rows());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 * rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 + rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0 - rhs.0)
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-self.0)
    }
}

/// Ordered list of named registers with their dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    registers: Vec<(String, usize)>,
}

impl RegisterLayout {
    pub fn new<S: Into<String>>(registers: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for (label, dim) in registers {
            let label = label.into();
            if dim == 0 {
                return Err(QError::InvalidArgument(format!("register `{label}` has dimension 0")));
            }
            if out.iter().any(|(l, _)| *l == label) {
                return Err(QError::DuplicateLabel(label));
            }
            out.push((label, dim));
        }
        if out.is_empty() {
            return Err(QError::Empty("register layout".into()));
        }
        Ok(RegisterLayout { registers: out })
    }

    /// A single register labeled `q`.
    pub fn single(dim: usize) -> Self {
        RegisterLayout { registers: vec![("q".to_string(), dim.max(1))] }
    }

    /// Registers `q0, q1, ...` with the given dimensions.
    pub fn numbered(dims: &[usize]) -> Self {
        RegisterLayout {
            registers: dims.iter().enumerate().map(|(k, &d)| (format!("q{k}"), d)).collect(),
        }
    }

    pub fn registers(&self) -> &[(String, usize)] {
        &self.registers
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.registers.iter().map(|(l, _)| l.as_str())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.registers.iter().map(|&(_, d)| d).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.registers.iter().map(|&(_, d)| d).product()
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| QError::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.registers[self.position(label)?].1)
    }

    /// Layout restricted to `labels`, in the order given.
    pub fn subset(&self, labels: &[&str]) -> Result<Self> {
        let regs = labels
            .iter()
            .map(|l| Ok((l.to_string(), self.dim_of(l)?)))
            .collect::<Result<Vec<_>>>()?;
        RegisterLayout::new(regs)
    }

    /// Concatenation; `self` stays most significant.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        RegisterLayout::new(self.registers.iter().chain(other.registers.iter()).cloned())
    }
}

fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

fn compose(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// Kronecker product with a capacity check on the result size.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    tensor_product_capped(a, b, DEFAULT_ENTRY_CAP)
}

pub fn tensor_product_capped(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    let rows = a.rows().checked_mul(b.rows());
    let cols = a.cols().checked_mul(b.cols());
    let entries = rows.zip(cols).and_then(|(r, c)| r.checked_mul(c)).unwrap_or(usize::MAX);
    if entries > cap {
        return Err(QError::Capacity { entries, cap });
    }
    Ok(a.kron(b))
}

/// Kronecker product of a list, left to right.
pub fn kron_all(ops: &[&ComplexMatrix]) -> ComplexMatrix {
    ops.iter().fold(ComplexMatrix::identity(1), |acc, op| acc.kron(op))
}

/// Lifts `op` acting on `targets` (in that order) to the full layout.
pub fn embed_operator(op: &ComplexMatrix, targets: &[&str], layout: &RegisterLayout) -> Result<ComplexMatrix> {
    let positions = targets.iter().map(|t| layout.position(t)).collect::<Result<Vec<_>>>()?;
    for (k, p) in positions.iter().enumerate() {
        if positions[..k].contains(p) {
            return Err(QError::DuplicateLabel(targets[k].to_string()));
        }
    }
    embed_at(op, &positions, &layout.dims())
}

/// Same as [`embed_operator`] with register positions instead of labels.
pub fn embed_at(op: &ComplexMatrix, positions: &[usize], dims: &[usize]) -> Result<ComplexMatrix> {
    let tdims: Vec<usize> = positions.iter().map(|&p| dims[p]).collect();
    let tdim: usize = tdims.iter().product();
    if !op.is_square() || op.rows() != tdim {
        return Err(QError::DimensionMismatch(format!(
            "operator is {}x{}, targets span dimension {tdim}",
            op.rows(),
            op.cols()
        )));
    }
    let n: usize = dims.iter().product();
    let rest: Vec<usize> = (0..dims.len()).filter(|p| !positions.contains(p)).collect();
    let rdims: Vec<usize> = rest.iter().map(|&p| dims[p]).collect();
    let rdim: usize = rdims.iter().product();

    // index map: full index -> (target index, rest index)
    let mut tgt = vec![0usize; n];
    let mut oth = vec![0usize; n];
    let mut dig = vec![0usize; dims.len()];
    let mut td = vec![0usize; positions.len()];
    let mut rd = vec![0usize; rest.len()];
    for idx in 0..n {
        digits(idx, dims, &mut dig);
        for (k, &p) in positions.iter().enumerate() {
            td[k] = dig[p];
        }
        for (k, &p) in rest.iter().enumerate() {
            rd[k] = dig[p];
        }
        tgt[idx] = compose(&td, &tdims);
        oth[idx] = compose(&rd, &rdims);
    }
    // full index from (target, rest)
    let mut full = vec![0usize; tdim * rdim];
    for idx in 0..n {
        full[tgt[idx] * rdim + oth[idx]] = idx;
    }
    let mut out = ComplexMatrix::zeros(n, n);
    for col in 0..n {
        let (tc, rc) = (tgt[col], oth[col]);
        for tr in 0..tdim {
            let v = op[(tr, tc)];
            if v != ZERO {
                out[(full[tr * rdim + rc], col)] = v;
            }
        }
    }
    Ok(out)
}

/// Traces out every register not listed in `keep`; the result is ordered as `keep`.
pub fn partial_trace(rho: &ComplexMatrix, keep: &[&str], layout: &RegisterLayout) -> Result<ComplexMatrix> {
    let positions = keep.iter().map(|t| layout.position(t)).collect::<Result<Vec<_>>>()?;
    if !rho.is_square() || rho.rows() != layout.total_dim() {
        return Err(QError::DimensionMismatch(format!(
            "matrix is {}x{}, layout dimension {}",
            rho.rows(),
            rho.cols(),
            layout.total_dim()
        )));
    }
    Ok(partial_trace_at(rho, &positions, &layout.dims()))
}

/// Position-based partial trace; `keep` order defines the output order.
pub fn partial_trace_at(rho: &ComplexMatrix, keep: &[usize], dims: &[usize]) -> ComplexMatrix {
    let n: usize = dims.iter().product();
    let kdims: Vec<usize> = keep.iter().map(|&p| dims[p]).collect();
    let kdim: usize = kdims.iter().product();
    let rest: Vec<usize> = (0..dims.len()).filter(|p| !keep.contains(p)).collect();
    let rdims: Vec<usize> = rest.iter().map(|&p| dims[p]).collect();
    let mut kidx = vec![0usize; n];
    let mut ridx = vec![0usize; n];
    let mut dig = vec![0usize; dims.len()];
    let mut kd = vec![0usize; keep.len()];
    let mut rd = vec![0usize; rest.len()];
    for idx in 0..n {
        digits(idx, dims, &mut dig);
        for (k, &p) in keep.iter().enumerate() {
            kd[k] = dig[p];
        }
        for (k, &p) in rest.iter().enumerate() {
            rd[k] = dig[p];
        }
        kidx[idx] = compose(&kd, &kdims);
        ridx[idx] = compose(&rd, &rdims);
    }
    let mut out = ComplexMatrix::zeros(kdim, kdim);
    for i in 0..n {
        for j in 0..n {
            if ridx[i] == ridx[j] {
                out[(kidx[i], kidx[j])] += rho[(i, j)];
            }
        }
    }
    out
}

/// Reorders the registers of a square operator: output register `k` is
/// input register `order[k]`.
pub fn permute_registers(op: &ComplexMatrix, order: &[usize], dims: &[usize]) -> ComplexMatrix {
    let n: usize = dims.iter().product();
    let ndims: Vec<usize> = order.iter().map(|&p| dims[p]).collect();
    let mut map = vec![0usize; n];
    let mut dig = vec![0usize; dims.len()];
    let mut nd = vec![0usize; dims.len()];
    for (idx, slot) in map.iter_mut().enumerate() {
        digits(idx, dims, &mut dig);
        for (k, &p) in order.iter().enumerate() {
            nd[k] = dig[p];
        }
        *slot = compose(&nd, &ndims);
    }
    let cols = op.cols();
    if cols == 1 {
        let mut out = ComplexMatrix::zeros(n, 1);
        for i in 0..n {
            out[(map[i], 0)] = op[(i, 0)];
        }
        return out;
    }
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(map[i], map[j])] = op[(i, j)];
        }
    }
    out
}

/// Haar-random unitary via Gram-Schmidt on a complex Gaussian matrix with
/// the phases of the triangular factor fixed to be positive.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    });
    orthonormalize_columns(&g)
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Equivalent to
/// the Q factor of a QR decomposition whose R has positive real diagonal.
pub fn orthonormalize_columns(g: &ComplexMatrix) -> ComplexMatrix {
    let (n, m) = (g.rows(), g.cols());
    let mut q = g.clone();
    for j in 0..m {
        for _pass in 0..2 {
            for k in 0..j {
                let mut proj = ZERO;
                for i in 0..n {
                    proj += q[(i, k)].conj() * q[(i, j)];
                }
                for i in 0..n {
                    let qk = q[(i, k)];
                    q[(i, j)] -= proj * qk;
                }
            }
        }
        let norm = (0..n).map(|i| q[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            q[(i, j)] /= norm;
        }
    }
    q
}

/// Completes the orthonormal columns of `v` (n x m, m <= n) to an n x n unitary.
pub fn complete_to_unitary(v: &ComplexMatrix) -> ComplexMatrix {
    let (n, m) = (v.rows(), v.cols());
    let mut cols: Vec<ComplexMatrix> = (0..m).map(|j| v.col(j)).collect();
    for e in 0..n {
        if cols.len() == n {
            break;
        }
        let mut cand = ComplexMatrix::basis(n, e);
        for _pass in 0..2 {
            for q in &cols {
                let proj = q.inner_product(&cand);
                cand = &cand - &q.scale(proj);
            }
        }
        let norm = cand.frobenius_norm();
        if norm > 1e-6 {
            cols.push(cand.scale_re(1.0 / norm));
        }
    }
    ComplexMatrix::from_fn(n, n, |i, j| cols[j][(i, 0)])
}

/// `min_phi ||a - e^{i phi} b||_F`.
pub fn distance_up_to_phase(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(QError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let overlap = b.inner_product(a);
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
    Ok((a - &b.scale(phase)).frobenius_norm())
}

/// Named single- and two-qubit gates.
pub mod gates {
    use super::*;

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![ZERO, -I], vec![I, ZERO]])
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
    }

    pub fn h() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_real(2, 2, &[s, s, s, -s])
    }

    pub fn s() -> ComplexMatrix {
        ComplexMatrix::diag(&[ONE, I])
    }

    pub fn t() -> ComplexMatrix {
        ComplexMatrix::diag(&[ONE, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)])
    }

    /// `exp(-i theta Y / 2)`
    pub fn ry(theta: f64) -> ComplexMatrix {
        let (sn, cs) = (theta / 2.0).sin_cos();
        ComplexMatrix::from_real(2, 2, &[cs, -sn, sn, cs])
    }

    /// `exp(-i theta Z / 2)`
    pub fn rz(theta: f64) -> ComplexMatrix {
        ComplexMatrix::diag(&[C64::from_polar(1.0, -theta / 2.0), C64::from_polar(1.0, theta / 2.0)])
    }

    /// Control is the first (most significant) qubit.
    pub fn cnot() -> ComplexMatrix {
        ComplexMatrix::from_real(
            4,
            4,
            &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.],
        )
    }

    pub fn cz() -> ComplexMatrix {
        ComplexMatrix::diag(&[ONE, ONE, ONE, -ONE])
    }

    pub fn swap(d: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(d * d, d * d, |r, col| {
            let (a, b) = (col / d, col % d);
            if r == b * d + a {
                ONE
            } else {
                ZERO
            }
        })
    }

    /// `|0><0| (x) I + |1><1| (x) u`
    pub fn controlled(u: &ComplexMatrix) -> ComplexMatrix {
        let d = u.rows();
        let mut out = ComplexMatrix::identity(2 * d);
        for i in 0..d {
            for j in 0..d {
                out[(d + i, d + j)] = u[(i, j)];
            }
        }
        out
    }

    /// Looks up a gate by name (`RY(0.3)` style for rotations).
    pub fn by_name(name: &str) -> Option<ComplexMatrix> {
        let name = name.trim();
        let upper = name.to_ascii_uppercase();
        if let Some(arg) = upper.strip_prefix("RY(").and_then(|r| r.strip_suffix(')')) {
            return arg.trim().parse().ok().map(ry);
        }
        if let Some(arg) = upper.strip_prefix("RZ(").and_then(|r| r.strip_suffix(')')) {
            return arg.trim().parse().ok().map(rz);
        }
        Some(match upper.as_str() {
            "I" => ComplexMatrix::identity(2),
            "X" => x(),
            "Y" => y(),
            "Z" => z(),
            "H" => h(),
            "S" => s(),
            "T" => t(),
            "CNOT" | "CX" => cnot(),
            "CZ" => cz(),
            "SWAP" => swap(2),
            _ => return None,
        })
    }
}
