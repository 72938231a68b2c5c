//! Dense complex operator algebra.
//!
//! Everything here works on `nalgebra` dense matrices of `Complex64`. Global
//! Hilbert spaces are tensor products of per-node factors described by
//! [`NodeDims`]; the first factor is the most significant index of the
//! Kronecker product.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::tolerance::Tolerances;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `sigma_z / 2`, the phase generator used throughout the average-estimation examples.
pub fn sigma_z_half() -> CMatrix {
    pauli_z().scale(0.5)
}

/// Real matrix lifted to complex entries.
pub fn complexify(m: &RMatrix) -> CMatrix {
    m.map(|x| c(x, 0.0))
}

pub(crate) fn ensure_square(m: &CMatrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return arg(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        ));
    }
    if m.nrows() == 0 {
        return arg(format!("{what} must be non-empty"));
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_same_dim(a: &CMatrix, b: &CMatrix) -> Result<usize> {
    let n = ensure_square(a, "left operand")?;
    let m = ensure_square(b, "right operand")?;
    if n != m {
        return arg(format!("dimension mismatch: {n} vs {m}"));
    }
    Ok(n)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entry of `|M - M^dagger|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M^dagger) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Per-node local dimensions of a tensor-product Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct NodeDims(Vec<usize>);

impl NodeDims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return arg("node dimensions must be non-empty");
        }
        if let Some(bad) = dims.iter().find(|&&d| d < 2) {
            return arg(format!("local dimension must be >= 2, got {bad}"));
        }
        Ok(Self(dims))
    }

    /// `n` factors of dimension two.
    pub fn qubits(n: usize) -> Self {
        Self(vec![2; n.max(1)])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    /// `(left, local, right)` block sizes around factor `k`.
    fn split(&self, k: usize) -> (usize, usize, usize) {
        let left = self.0[..k].iter().product();
        let right = self.0[k + 1..].iter().product();
        (left, self.0[k], right)
    }
}

impl TryFrom<Vec<usize>> for NodeDims {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<NodeDims> for Vec<usize> {
    fn from(d: NodeDims) -> Self {
        d.0
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix tagged with its tensor structure.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    mat: CMatrix,
    dims: NodeDims,
}

impl DensityState {
    /// Validates against the default tolerances.
    pub fn new(mat: CMatrix, dims: NodeDims) -> Result<Self> {
        Self::with_tolerances(mat, dims, &Tolerances::default())
    }

    pub fn with_tolerances(mat: CMatrix, dims: NodeDims, tol: &Tolerances) -> Result<Self> {
        let n = ensure_square(&mat, "density matrix")?;
        if dims.total() != n {
            return arg(format!(
                "node dimensions {:?} multiply to {}, matrix is {n}x{n}",
                dims.as_slice(),
                dims.total()
            ));
        }
        if !is_finite(&mat) {
            return arg("density matrix has non-finite entries");
        }
        let dev = hermitian_deviation(&mat);
        if dev > tol.hermitian {
            return arg(format!(
                "density matrix is not Hermitian (deviation {dev:e})"
            ));
        }
        let mat = hermitian_part(&mat);
        let tr = trace(&mat).re;
        if (tr - 1.0).abs() > tol.trace {
            return arg(format!("density matrix trace is {tr}, expected 1"));
        }
        let spec = eig_hermitian_unchecked(&mat);
        let min = spec.eigenvalues[0];
        if min < -tol.psd {
            return arg(format!(
                "density matrix is not PSD (min eigenvalue {min:e})"
            ));
        }
        Ok(Self { mat, dims })
    }

    /// Projector onto a normalized state vector.
    pub fn pure(psi: &CVector, dims: NodeDims) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return arg(format!("state vector norm is {norm}, expected 1"));
        }
        Self::new(psi * psi.adjoint(), dims)
    }

    /// Caller guarantees validity (outputs of CPTP maps on valid states).
    pub(crate) fn from_parts(mat: CMatrix, dims: NodeDims) -> Self {
        debug_assert_eq!(mat.nrows(), dims.total());
        Self {
            mat: hermitian_part(&mat),
            dims,
        }
    }

    /// Maximally mixed state on `dims`.
    pub fn maximally_mixed(dims: NodeDims) -> Self {
        let n = dims.total();
        Self {
            mat: identity(n).unscale(n as f64),
            dims,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dims(&self) -> &NodeDims {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.mat * &self.mat)).re
    }

    /// Re-checks the Hermitian, trace and PSD invariants.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        Self::with_tolerances(self.mat.clone(), self.dims.clone(), tol).map(|_| ())
    }

    /// Same matrix, different tensor labelling with the same total dimension.
    pub fn retag(self, dims: NodeDims) -> Result<Self> {
        if dims.total() != self.dim() {
            return arg("retagged dimensions do not match the state dimension");
        }
        Ok(Self {
            mat: self.mat,
            dims,
        })
    }
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    pub fn reconstruct(&self) -> CMatrix {
        self.map_reconstruct(|l| l)
    }

    /// `V f(diag(lambda)) V^dagger`.
    pub fn map_reconstruct(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let fl = f(l);
            scaled.column_mut(j).scale_mut(fl);
        }
        scaled * v.adjoint()
    }

    /// `V g(diag(lambda)) V^dagger` for a complex-valued function.
    pub fn map_reconstruct_complex(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let fl = f(l);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= fl;
            }
        }
        scaled * v.adjoint()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
pub fn eig_hermitian(m: &CMatrix) -> Result<Spectrum> {
    ensure_square(m, "eigen input")?;
    let dev = hermitian_deviation(m);
    if dev > Tolerances::default().hermitian {
        return arg(format!("eigen input is not Hermitian (deviation {dev:e})"));
    }
    Ok(eig_hermitian_unchecked(&hermitian_part(m)))
}

/// Hermiticity is the caller's responsibility; only the lower triangle is trusted.
pub(crate) fn eig_hermitian_unchecked(m: &CMatrix) -> Spectrum {
    let n = m.nrows();
    let fm = faer::Mat::<Complex64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("self-adjoint eigendecomposition of a finite matrix");
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let vals = order.iter().map(|&k| s[k].re).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    Spectrum {
        eigenvalues: vals,
        eigenvectors: vecs,
    }
}

/// Ascending eigenvalues and orthonormal eigenvectors of a real symmetric matrix.
pub fn eig_symmetric(m: &RMatrix) -> (Vec<f64>, RMatrix) {
    let n = m.nrows();
    let sym = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let eig = sym
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition of a finite matrix");
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let vals = order.iter().map(|&k| s[k]).collect();
    let vecs = RMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    (vals, vecs)
}

/// Kronecker product of the factors in list order.
pub fn tensor(factors: &[CMatrix]) -> Result<CMatrix> {
    let (first, rest) = match factors.split_first() {
        Some(split) => split,
        None => return arg("tensor product of an empty list"),
    };
    ensure_square(first, "tensor factor")?;
    let mut acc = first.clone();
    for f in rest {
        ensure_square(f, "tensor factor")?;
        acc = acc.kronecker(f);
    }
    Ok(acc)
}

/// Kronecker product of state vectors.
pub fn tensor_vec(factors: &[CVector]) -> CVector {
    let mut acc = CVector::from_element(1, ONE);
    for f in factors {
        acc = acc.kronecker(f);
    }
    acc
}

fn is_anti_hermitian(m: &CMatrix) -> bool {
    let n = m.nrows();
    let scale = max_abs_entry(m).max(1.0);
    (0..n).all(|i| (i..n).all(|j| (m[(i, j)] + m[(j, i)].conj()).norm() <= 1e-12 * scale))
}

fn is_hermitian_exactish(m: &CMatrix) -> bool {
    hermitian_deviation(m) <= 1e-12 * max_abs_entry(m).max(1.0)
}

fn singular_values(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let fm = faer::Mat::<Complex64>::from_fn(n, m.ncols(), |i, j| m[(i, j)]);
    let sv = fm
        .singular_values()
        .expect("singular values of a finite matrix");
    sv.into_iter().collect()
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    ensure_square(m, "trace-norm input")?;
    // Normal fast paths: Hermitian and anti-Hermitian inputs (commutators of Hermitian pairs).
    if is_hermitian_exactish(m) {
        let s = eig_hermitian_unchecked(&hermitian_part(m));
        return Ok(s.eigenvalues.iter().map(|l| l.abs()).sum());
    }
    if is_anti_hermitian(m) {
        let h = m.map(|z| z * I);
        let s = eig_hermitian_unchecked(&hermitian_part(&h));
        return Ok(s.eigenvalues.iter().map(|l| l.abs()).sum());
    }
    Ok(singular_values(m).into_iter().sum())
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> Result<f64> {
    ensure_square(m, "operator-norm input")?;
    if is_hermitian_exactish(m) {
        let s = eig_hermitian_unchecked(&hermitian_part(m));
        return Ok(s.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs())));
    }
    Ok(singular_values(m).into_iter().fold(0.0f64, f64::max))
}

/// Principal square root of a PSD matrix; small negative eigenvalues are clamped to zero.
pub fn sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    Ok(eig_hermitian(m)?.map_reconstruct(|l| l.max(0.0).sqrt()))
}

/// Eigenvalues below `n * eps * lambda_max` are rounding noise.
fn noise_floor(s: &Spectrum) -> f64 {
    s.eigenvalues.len() as f64 * f64::EPSILON * s.max_eigenvalue().max(0.0)
}

/// Uhlmann fidelity `Tr sqrt(sqrt(rho) sigma sqrt(rho))`, root (not squared) convention.
pub fn fidelity(rho: &DensityState, sigma: &DensityState) -> Result<f64> {
    ensure_same_dim(rho.matrix(), sigma.matrix())?;
    let spec = eig_hermitian_unchecked(rho.matrix());
    let floor = noise_floor(&spec);
    let sr = spec.map_reconstruct(|l| if l > floor { l.sqrt() } else { 0.0 });
    let inner = eig_hermitian_unchecked(&hermitian_part(&(&sr * sigma.matrix() * &sr)));
    let floor = noise_floor(&inner);
    let f: f64 = inner
        .eigenvalues
        .iter()
        .filter(|&&l| l > floor)
        .map(|l| l.sqrt())
        .sum();
    Ok(if f > 0.0 { f.min(1.0) } else { 0.0 })
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_same_dim(a, b)?;
    Ok(a * b - b * a)
}

/// `AB + BA`.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_same_dim(a, b)?;
    Ok(a * b + b * a)
}

/// `op` on factor `node`, identity elsewhere.
pub fn embed_local(op: &CMatrix, node: usize, dims: &NodeDims) -> Result<CMatrix> {
    if node >= dims.len() {
        return arg(format!(
            "node index {node} out of range for {} factors",
            dims.len()
        ));
    }
    let k = ensure_square(op, "local operator")?;
    if k != dims.as_slice()[node] {
        return arg(format!(
            "local operator is {k}x{k} but factor {node} has dimension {}",
            dims.as_slice()[node]
        ));
    }
    let (left, _, right) = dims.split(node);
    Ok(identity(left).kronecker(op).kronecker(&identity(right)))
}

fn check_local(op: &CMatrix, factor: usize, dims: &NodeDims, m: &CMatrix) -> Result<()> {
    if factor >= dims.len() {
        return arg(format!(
            "factor {factor} out of range for {} factors",
            dims.len()
        ));
    }
    if op.nrows() != dims.as_slice()[factor] || op.ncols() != op.nrows() {
        return arg(format!(
            "local operator is {}x{} but factor {factor} has dimension {}",
            op.nrows(),
            op.ncols(),
            dims.as_slice()[factor]
        ));
    }
    if m.nrows() != dims.total() || m.ncols() != dims.total() {
        return arg("operand does not match the node dimensions");
    }
    Ok(())
}

/// `(1 x op x 1) M` without forming the lifted operator.
pub fn left_apply_local(
    op: &CMatrix,
    factor: usize,
    dims: &NodeDims,
    m: &CMatrix,
) -> Result<CMatrix> {
    check_local(op, factor, dims, m)?;
    let (left, k, right) = dims.split(factor);
    let n = m.ncols();
    let mut out = CMatrix::zeros(m.nrows(), n);
    let mut buf = vec![ZERO; k];
    for col in 0..n {
        for a in 0..left {
            for b in 0..right {
                let base = a * k * right + b;
                for (y, slot) in buf.iter_mut().enumerate() {
                    *slot = m[(base + y * right, col)];
                }
                for x in 0..k {
                    let mut acc = ZERO;
                    for (y, v) in buf.iter().enumerate() {
                        acc += op[(x, y)] * v;
                    }
                    out[(base + x * right, col)] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// `M (1 x op x 1)^dagger` without forming the lifted operator.
pub fn right_apply_local_adjoint(
    op: &CMatrix,
    factor: usize,
    dims: &NodeDims,
    m: &CMatrix,
) -> Result<CMatrix> {
    check_local(op, factor, dims, m)?;
    let (left, k, right) = dims.split(factor);
    let rows = m.nrows();
    let mut out = CMatrix::zeros(rows, m.ncols());
    for a in 0..left {
        for b in 0..right {
            let base = a * k * right + b;
            for x in 0..k {
                let dst = base + x * right;
                for y in 0..k {
                    let w = op[(x, y)].conj();
                    if w == ZERO {
                        continue;
                    }
                    let src = base + y * right;
                    for r in 0..rows {
                        out[(r, dst)] += m[(r, src)] * w;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `(1 x K x 1) M (1 x K x 1)^dagger`.
pub fn conjugate_local(
    op: &CMatrix,
    factor: usize,
    dims: &NodeDims,
    m: &CMatrix,
) -> Result<CMatrix> {
    let left = left_apply_local(op, factor, dims, m)?;
    right_apply_local_adjoint(op, factor, dims, &left)
}

/// Frobenius norm of `A - B`.
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}
