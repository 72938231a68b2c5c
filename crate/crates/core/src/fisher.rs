//! Classical and quantum Fisher information matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::model::{ParamVector, WeightVector};
use crate::qcore::{
    self, eig_hermitian_unchecked, hermitian_deviation, CMatrix, CVector, DensityState, RMatrix,
};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherKind {
    Classical,
    Quantum,
}

/// Real symmetric PSD `d x d` information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    entries: RMatrix,
    kind: FisherKind,
    theta: Option<ParamVector>,
}

impl FisherMatrix {
    /// Symmetrizes after checking symmetry and positivity within 1e-9 (scaled by the matrix norm).
    pub fn new(entries: RMatrix, kind: FisherKind) -> Result<Self> {
        let d = entries.nrows();
        if d == 0 || entries.ncols() != d {
            return arg("Fisher matrix must be square and non-empty");
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return arg("Fisher matrix has non-finite entries");
        }
        let scale = entries.norm().max(1.0);
        let asym = (&entries - entries.transpose()).amax();
        if asym > 1e-9 * scale {
            return arg(format!(
                "Fisher matrix is not symmetric (deviation {asym:e})"
            ));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let min = qcore::eig_symmetric(&sym).0[0];
        if min < -1e-9 * scale {
            return arg(format!("Fisher matrix is not PSD (min eigenvalue {min:e})"));
        }
        Ok(Self {
            entries: sym,
            kind,
            theta: None,
        })
    }

    pub fn at(mut self, theta: ParamVector) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn entries(&self) -> &RMatrix {
        &self.entries
    }

    pub fn kind(&self) -> FisherKind {
        self.kind
    }

    pub fn theta(&self) -> Option<&ParamVector> {
        self.theta.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        qcore::eig_symmetric(&self.entries).0
    }

    /// Largest `|F_ij - x|`.
    pub fn max_deviation_from(&self, other: &RMatrix) -> f64 {
        (&self.entries - other).amax()
    }
}

/// Measurement effects summing to the identity.
#[derive(Debug, Clone)]
pub struct Povm {
    effects: Vec<CMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        let first = effects
            .first()
            .ok_or_else(|| Error::Argument("POVM has no effects".into()))?;
        let n = qcore::ensure_square(first, "POVM effect")?;
        let mut sum = CMatrix::zeros(n, n);
        for e in &effects {
            if e.nrows() != n || e.ncols() != n {
                return arg("POVM effects have inconsistent dimensions");
            }
            if hermitian_deviation(e) > 1e-10 {
                return arg("POVM effect is not Hermitian");
            }
            let min = eig_hermitian_unchecked(&qcore::hermitian_part(e)).eigenvalues[0];
            if min < -1e-10 {
                return arg(format!("POVM effect is not PSD (min eigenvalue {min:e})"));
            }
            sum += e;
        }
        let dev = qcore::max_abs_entry(&(sum - qcore::identity(n)));
        if dev > 1e-9 {
            return arg(format!(
                "POVM effects do not sum to identity (deviation {dev:e})"
            ));
        }
        Ok(Self { effects })
    }

    /// Projective measurement onto the columns of a unitary.
    pub fn projective(basis: &CMatrix) -> Result<Self> {
        let effects = basis
            .column_iter()
            .map(|col| {
                let v: CVector = col.into_owned();
                &v * v.adjoint()
            })
            .collect();
        Self::new(effects)
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }

    /// Born-rule probabilities `Tr(rho Pi_x)`.
    pub fn probabilities(&self, rho: &DensityState) -> Result<Vec<f64>> {
        if rho.dim() != self.dim() {
            return arg("state and POVM dimensions differ");
        }
        Ok(self
            .effects
            .iter()
            .map(|e| trace_product(rho.matrix(), e))
            .collect())
    }
}

/// `Re Tr(AB)` without forming the product.
fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

fn check_derivative(rho: &DensityState, drho: &CMatrix) -> Result<()> {
    if drho.nrows() != rho.dim() || drho.ncols() != rho.dim() {
        return arg("state derivative does not match the state dimension");
    }
    let dev = hermitian_deviation(drho);
    if dev > 1e-8 {
        return arg(format!(
            "state derivative is not Hermitian (deviation {dev:e})"
        ));
    }
    Ok(())
}

/// `rank_tol` default: a fraction of the largest eigenvalue.
fn support_cut(eigenvalues: &[f64], rank_tol: Option<f64>) -> f64 {
    rank_tol.unwrap_or_else(|| {
        Tolerances::default().rank_rel * eigenvalues.last().copied().unwrap_or(0.0).max(0.0)
    })
}

/// Eigenbasis of `rho` reused across several SLD solves.
struct SldSolver {
    spectrum: qcore::Spectrum,
    cut: f64,
}

impl SldSolver {
    fn new(rho: &DensityState, rank_tol: Option<f64>) -> Self {
        let spectrum = eig_hermitian_unchecked(rho.matrix());
        let cut = support_cut(&spectrum.eigenvalues, rank_tol);
        Self { spectrum, cut }
    }

    fn solve(&self, drho: &CMatrix) -> CMatrix {
        let v = &self.spectrum.eigenvectors;
        let lam = &self.spectrum.eigenvalues;
        let mut in_basis = v.adjoint() * drho * v;
        let n = lam.len();
        for j in 0..n {
            for k in 0..n {
                let s = lam[j] + lam[k];
                in_basis[(j, k)] = if s > self.cut {
                    in_basis[(j, k)] * (2.0 / s)
                } else {
                    qcore::ZERO
                };
            }
        }
        qcore::hermitian_part(&(v * in_basis * v.adjoint()))
    }
}

/// Symmetric logarithmic derivative solving `d rho = {L, rho}/2` on the support of `rho`.
///
/// In the eigenbasis of `rho`, `L_jk = 2 (d rho)_jk / (lambda_j + lambda_k)` whenever the
/// eigenvalue sum exceeds `rank_tol` (default `1e-10 * lambda_max`), and zero otherwise.
pub fn sld(rho: &DensityState, drho: &CMatrix, rank_tol: Option<f64>) -> Result<CMatrix> {
    check_derivative(rho, drho)?;
    Ok(SldSolver::new(rho, rank_tol).solve(&qcore::hermitian_part(drho)))
}

/// `Q_mn = Tr(rho {L_m, L_n}) / 2`, cross-checked against `Tr(d_m rho L_n + d_n rho L_m) / 2`.
pub fn qfim(rho: &DensityState, drho_list: &[CMatrix]) -> Result<FisherMatrix> {
    qfim_with_rank_tol(rho, drho_list, None)
}

pub fn qfim_with_rank_tol(
    rho: &DensityState,
    drho_list: &[CMatrix],
    rank_tol: Option<f64>,
) -> Result<FisherMatrix> {
    if drho_list.is_empty() {
        return arg("QFIm needs at least one derivative");
    }
    for d in drho_list {
        check_derivative(rho, d)?;
    }
    let solver = SldSolver::new(rho, rank_tol);
    let slds: Vec<CMatrix> = drho_list
        .iter()
        .map(|d| solver.solve(&qcore::hermitian_part(d)))
        .collect();
    let d = drho_list.len();
    let mut q = RMatrix::zeros(d, d);
    let mut alt = RMatrix::zeros(d, d);
    let rho_m = rho.matrix();
    for m in 0..d {
        let rho_lm = rho_m * &slds[m];
        for n in m..d {
            // Tr(rho {Lm, Ln}) / 2 = Re Tr(rho Lm Ln) for Hermitian operands
            let v = trace_product(&rho_lm, &slds[n]);
            q[(m, n)] = v;
            q[(n, m)] = v;
            let a = 0.5
                * (trace_product(&drho_list[m], &slds[n]) + trace_product(&drho_list[n], &slds[m]));
            alt[(m, n)] = a;
            alt[(n, m)] = a;
        }
    }
    let tol = Tolerances::default().qfim_consistency;
    let gap = (&q - &alt).amax();
    if gap > tol * q.amax().max(1.0) {
        return Err(Error::Numerical(format!(
            "QFIm formulas disagree by {gap:e}"
        )));
    }
    FisherMatrix::new(q, FisherKind::Quantum)
}

/// `Tr(d_m rho L_n + d_n rho L_m) / 2`, the alternative QFIm expression.
pub fn qfim_alternative(rho: &DensityState, drho_list: &[CMatrix]) -> Result<RMatrix> {
    let solver = SldSolver::new(rho, None);
    for d in drho_list {
        check_derivative(rho, d)?;
    }
    let slds: Vec<CMatrix> = drho_list
        .iter()
        .map(|d| solver.solve(&qcore::hermitian_part(d)))
        .collect();
    let d = drho_list.len();
    Ok(RMatrix::from_fn(d, d, |m, n| {
        0.5 * (trace_product(&drho_list[m], &slds[n]) + trace_product(&drho_list[n], &slds[m]))
    }))
}

/// Pure-state QFIm `4 Re(<d_m psi|d_n psi> - <d_m psi|psi><psi|d_n psi>)`.
pub fn qfim_pure(psi: &CVector, dpsi_list: &[CVector]) -> Result<FisherMatrix> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return arg(format!("state vector norm is {norm}, expected 1"));
    }
    if dpsi_list.iter().any(|d| d.len() != psi.len()) {
        return arg("derivative vectors must match the state dimension");
    }
    let d = dpsi_list.len();
    let overlaps: Vec<_> = dpsi_list.iter().map(|dp| dp.dotc(psi)).collect();
    let q = RMatrix::from_fn(d, d, |m, n| {
        let inner = dpsi_list[m].dotc(&dpsi_list[n]);
        4.0 * (inner - overlaps[m] * overlaps[n].conj()).re
    });
    FisherMatrix::new((&q + q.transpose()) * 0.5, FisherKind::Quantum)
}

/// Classical Fisher information `sum_x (d_m p)(d_n p) / p` of a POVM; outcomes with
/// `p <= 1e-12` are skipped.
pub fn cfim(rho: &DensityState, povm: &Povm, drho_list: &[CMatrix]) -> Result<FisherMatrix> {
    if povm.dim() != rho.dim() {
        return arg("state and POVM dimensions differ");
    }
    for d in drho_list {
        check_derivative(rho, d)?;
    }
    let floor = Tolerances::default().probability_floor;
    let d = drho_list.len();
    let mut f = RMatrix::zeros(d, d);
    for effect in povm.effects() {
        let p = trace_product(rho.matrix(), effect);
        if p <= floor {
            continue;
        }
        let dp: Vec<f64> = drho_list
            .iter()
            .map(|dr| trace_product(dr, effect))
            .collect();
        for m in 0..d {
            for n in 0..d {
                f[(m, n)] += dp[m] * dp[n] / p;
            }
        }
    }
    FisherMatrix::new(f, FisherKind::Classical)
}

/// Matrix-order and entrywise comparison of a CFIm against a QFIm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherOrdering {
    /// `Q - F` is PSD within `-1e-8`.
    pub matrix_order: bool,
    pub min_gap_eigenvalue: f64,
    /// Diagnostic only: every `F_mn <= Q_mn + 1e-8`.
    pub entrywise: bool,
}

pub fn compare_cfim_qfim(f: &FisherMatrix, q: &FisherMatrix) -> Result<FisherOrdering> {
    if f.dim() != q.dim() {
        return arg("CFIm and QFIm have different sizes");
    }
    let gap = q.entries() - f.entries();
    let min = qcore::eig_symmetric(&gap).0[0];
    Ok(FisherOrdering {
        matrix_order: min >= -1e-8,
        min_gap_eigenvalue: min,
        entrywise: gap.iter().all(|&x| x >= -1e-8),
    })
}

/// `Q - F` is PSD within `-1e-8`.
pub fn cfim_leq_qfim_check(f: &FisherMatrix, q: &FisherMatrix) -> Result<bool> {
    Ok(compare_cfim_qfim(f, q)?.matrix_order)
}

/// `B^T M B`.
pub fn reparametrize(m: &FisherMatrix, b: &RMatrix) -> Result<FisherMatrix> {
    if b.nrows() != m.dim() {
        return arg(format!(
            "B has {} rows, Fisher matrix is {}x{}",
            b.nrows(),
            m.dim(),
            m.dim()
        ));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return arg("B has non-finite entries");
    }
    let out = b.transpose() * m.entries() * b;
    let sym = (&out + out.transpose()) * 0.5;
    let mut fm = FisherMatrix::new(sym, m.kind())?;
    fm.theta = m.theta.clone();
    Ok(fm)
}

/// Jacobian `B = dTheta/dTheta'` for the coordinates `theta'_1 = w^T Theta` plus an
/// orthonormal basis of the complement of `w`.
///
/// The first column is `w / |w|^2`; the remaining columns span `w`'s orthogonal complement.
pub fn complete_b_matrix(w: &WeightVector) -> RMatrix {
    let d = w.len();
    let wv = DVector::from_column_slice(w.as_slice());
    let mut seed = DMatrix::<f64>::identity(d, d);
    seed.set_column(0, &wv);
    // Pivot so the seed stays full rank: move the identity column most aligned with w out.
    let pivot = wv.iamax();
    if pivot != 0 {
        seed.set_column(
            pivot,
            &DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 }),
        );
    }
    let q = seed.qr().q();
    let mut b = RMatrix::zeros(d, d);
    b.set_column(0, &(&wv / w.norm_squared()));
    for j in 1..d {
        b.set_column(j, &q.column(j));
    }
    b
}

/// Pseudo-inverse Cramer-Rao bound `F^+ / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CramerRaoBound {
    /// `F^+ / shots`.
    pub covariance: RMatrix,
    pub rank: usize,
    /// Unit vectors spanning the kernel of `F`; estimates along them are unbounded.
    pub unidentifiable: Vec<DVector<f64>>,
    pub shots: u64,
}

impl CramerRaoBound {
    pub fn is_identifiable(&self, w: &WeightVector) -> bool {
        let wv = DVector::from_column_slice(w.as_slice());
        let scale = wv.norm();
        self.unidentifiable
            .iter()
            .all(|k| k.dot(&wv).abs() <= 1e-8 * scale)
    }

    /// Variance bound `w^T F^+ w / M` for `w^T Theta`, `None` when `w` touches the kernel.
    pub fn variance_bound(&self, w: &WeightVector) -> Option<f64> {
        if w.len() != self.covariance.nrows() || !self.is_identifiable(w) {
            return None;
        }
        let wv = DVector::from_column_slice(w.as_slice());
        Some(wv.dot(&(&self.covariance * &wv)))
    }
}

pub fn crb_covariance_bound(f: &FisherMatrix, shots: u64) -> Result<CramerRaoBound> {
    if shots == 0 {
        return arg("number of shots must be positive");
    }
    let (values, vectors) = qcore::eig_symmetric(f.entries());
    let max = values.iter().fold(0.0f64, |a, &l| a.max(l));
    let cut = Tolerances::default().pinv_rel * max;
    let d = f.dim();
    let mut pinv = RMatrix::zeros(d, d);
    let mut kernel = Vec::new();
    for (i, &l) in values.iter().enumerate() {
        let v = vectors.column(i).into_owned();
        if l > cut && l > 0.0 {
            pinv += &v * v.transpose() / l;
        } else {
            kernel.push(v);
        }
    }
    Ok(CramerRaoBound {
        covariance: pinv / shots as f64,
        rank: d - kernel.len(),
        unidentifiable: kernel,
        shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{state_and_derivatives, NetworkModel};
    use crate::qcore::{c, pauli_x, sigma_z_half, tensor_vec, NodeDims, ONE, ZERO};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn ket(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(r, i)| c(r, i)))
    }

    fn ghz(d: usize) -> DensityState {
        let n = 1 << d;
        let mut psi = CVector::zeros(n);
        psi[0] = c(FRAC_1_SQRT_2, 0.0);
        psi[n - 1] = c(FRAC_1_SQRT_2, 0.0);
        DensityState::pure(&psi, NodeDims::qubits(d)).unwrap()
    }

    #[test]
    fn pure_state_sld_is_twice_derivative() {
        let m = NetworkModel::multiplicative(&sigma_z_half(), &[1, 1], ghz(2)).unwrap();
        let (rho, d) =
            state_and_derivatives(&m, &ParamVector::new(vec![0.2, 0.5]).unwrap()).unwrap();
        let l = sld(&rho, &d[0], None).unwrap();
        assert!(qcore::max_abs_entry(&(l - d[0].scale(2.0))) < 1e-10);
    }

    #[test]
    fn zero_derivative_gives_zero_sld() {
        let rho = DensityState::maximally_mixed(NodeDims::qubits(2));
        let l = sld(&rho, &CMatrix::zeros(4, 4), None).unwrap();
        assert_eq!(qcore::max_abs_entry(&l), 0.0);
    }

    #[test]
    fn sld_rejects_non_hermitian_derivative() {
        let rho = DensityState::maximally_mixed(NodeDims::qubits(1));
        let bad = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(sld(&rho, &bad, None), Err(Error::Argument(_))));
    }

    #[test]
    fn full_rank_sld_solves_defining_equation() {
        let rho = DensityState::new(
            CMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)]),
            NodeDims::qubits(1),
        )
        .unwrap();
        let drho = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.2, 0.0), c(-0.3, 0.1), c(-0.3, -0.1), c(-0.2, 0.0)],
        );
        let l = sld(&rho, &drho, None).unwrap();
        let back = qcore::anticommutator(&l, rho.matrix()).unwrap().scale(0.5);
        assert!(qcore::max_abs_entry(&(back - drho)) < 1e-9);
    }

    #[test]
    fn ghz_qfim_is_all_ones() {
        for d in 2..=4 {
            let m = NetworkModel::multiplicative(&sigma_z_half(), &vec![1; d], ghz(d)).unwrap();
            let theta = ParamVector::new((0..d).map(|i| 0.1 * i as f64).collect()).unwrap();
            let (rho, dr) = state_and_derivatives(&m, &theta).unwrap();
            let q = qfim(&rho, &dr).unwrap();
            assert!(q.max_deviation_from(&RMatrix::from_element(d, d, 1.0)) < 1e-10);
        }
    }

    #[test]
    fn product_plus_qfim_is_identity() {
        let plus = ket(&[(FRAC_1_SQRT_2, 0.0), (FRAC_1_SQRT_2, 0.0)]);
        let psi = tensor_vec(&[plus.clone(), plus.clone(), plus]);
        let rho0 = DensityState::pure(&psi, NodeDims::qubits(3)).unwrap();
        let m = NetworkModel::multiplicative(&sigma_z_half(), &[1, 1, 1], rho0).unwrap();
        let (rho, dr) =
            state_and_derivatives(&m, &ParamVector::new(vec![0.3, 0.1, -0.4]).unwrap()).unwrap();
        let q = qfim(&rho, &dr).unwrap();
        assert!(q.max_deviation_from(&RMatrix::identity(3, 3)) < 1e-10);
    }

    #[test]
    fn single_plus_qfi_is_four_times_variance() {
        // 4 Var(sz/2) on |+>: <(sz/2)^2> = 1/4, <sz/2> = 0
        let rho0 = DensityState::pure(
            &ket(&[(FRAC_1_SQRT_2, 0.0), (FRAC_1_SQRT_2, 0.0)]),
            NodeDims::qubits(1),
        )
        .unwrap();
        let m = NetworkModel::multiplicative(&sigma_z_half(), &[1], rho0).unwrap();
        let (rho, dr) = state_and_derivatives(&m, &ParamVector::zeros(1)).unwrap();
        assert_abs_diff_eq!(
            qfim(&rho, &dr).unwrap().entries()[(0, 0)],
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pure_formula_examples() {
        // |psi_Theta> = (|0..0> + e^{-i d theta_bar}|1..1>)/sqrt2, d/dtheta_mu of the phase is -i
        let d = 3;
        let n = 1 << d;
        let phase = c(0.0, -0.9).exp();
        let mut psi = CVector::zeros(n);
        psi[0] = c(FRAC_1_SQRT_2, 0.0);
        psi[n - 1] = phase * FRAC_1_SQRT_2;
        let mut dpsi = CVector::zeros(n);
        dpsi[n - 1] = phase * c(0.0, -FRAC_1_SQRT_2);
        let q = qfim_pure(&psi, &vec![dpsi; d]).unwrap();
        assert!(q.max_deviation_from(&RMatrix::from_element(d, d, 1.0)) < 1e-12);

        let still = qfim_pure(&psi, &[CVector::zeros(n), CVector::zeros(n)]).unwrap();
        assert_eq!(still.entries().amax(), 0.0);

        assert!(qfim_pure(&psi.scale(2.0), &[CVector::zeros(n)]).is_err());
    }

    #[test]
    fn cfim_examples() {
        // identity POVM carries no information
        let m = NetworkModel::multiplicative(&sigma_z_half(), &[1, 1], ghz(2)).unwrap();
        let (rho, dr) =
            state_and_derivatives(&m, &ParamVector::new(vec![0.3, 0.2]).unwrap()).unwrap();
        let trivial = Povm::new(vec![qcore::identity(4)]).unwrap();
        assert_eq!(cfim(&rho, &trivial, &dr).unwrap().entries().amax(), 0.0);

        // |+>, X measurement at theta = pi/2: p(+) = (1 + cos theta)/2, F = sin^2/(1 - cos^2) = 1
        let plus = DensityState::pure(
            &ket(&[(FRAC_1_SQRT_2, 0.0), (FRAC_1_SQRT_2, 0.0)]),
            NodeDims::qubits(1),
        )
        .unwrap();
        let m1 = NetworkModel::multiplicative(&sigma_z_half(), &[1], plus).unwrap();
        let (rho1, dr1) =
            state_and_derivatives(&m1, &ParamVector::new(vec![FRAC_PI_2]).unwrap()).unwrap();
        let hadamard = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ONE, -ONE]).unscale(2f64.sqrt());
        let x = Povm::projective(&hadamard).unwrap();
        assert_abs_diff_eq!(
            cfim(&rho1, &x, &dr1).unwrap().entries()[(0, 0)],
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn povm_validation() {
        assert!(Povm::new(vec![]).is_err());
        assert!(Povm::new(vec![qcore::identity(2).scale(0.5)]).is_err());
        assert!(Povm::new(vec![pauli_x(), qcore::identity(2) - pauli_x()]).is_err());
    }

    #[test]
    fn reparametrize_examples() {
        let q = FisherMatrix::new(RMatrix::from_element(3, 3, 1.0), FisherKind::Quantum).unwrap();
        let same = reparametrize(&q, &RMatrix::identity(3, 3)).unwrap();
        assert_eq!(same.entries(), q.entries());
        let b = complete_b_matrix(&WeightVector::average(3));
        let qp = reparametrize(&q, &b).unwrap();
        assert_abs_diff_eq!(qp.entries()[(0, 0)], 9.0, epsilon = 1e-12);
        assert!(reparametrize(&q, &RMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn completed_b_inverts_target_coordinates() {
        let w = WeightVector::new(vec![0.2, -1.0, 0.5, 3.0]).unwrap();
        let b = complete_b_matrix(&w);
        // theta' = A theta with A = [w^T; U^T]; B must be A^{-1}
        let mut a = RMatrix::zeros(4, 4);
        a.set_row(0, &nalgebra::RowDVector::from_row_slice(w.as_slice()));
        for j in 1..4 {
            a.set_row(j, &b.column(j).transpose());
        }
        assert!((a * &b - RMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn crb_examples() {
        let id = FisherMatrix::new(RMatrix::identity(2, 2), FisherKind::Quantum).unwrap();
        let bound = crb_covariance_bound(&id, 1).unwrap();
        assert!((&bound.covariance - RMatrix::identity(2, 2)).amax() < 1e-14);
        let b100 = crb_covariance_bound(&id, 100).unwrap();
        assert!((&b100.covariance - &bound.covariance / 100.0).amax() < 1e-16);

        let d = 4;
        let ones =
            FisherMatrix::new(RMatrix::from_element(d, d, 1.0), FisherKind::Quantum).unwrap();
        let b = crb_covariance_bound(&ones, 10).unwrap();
        assert_eq!(b.rank, 1);
        assert_eq!(b.unidentifiable.len(), d - 1);
        let var = b.variance_bound(&WeightVector::average(d)).unwrap();
        assert_abs_diff_eq!(var, 1.0 / (10.0 * (d * d) as f64), epsilon = 1e-14);
        assert!(b
            .variance_bound(&WeightVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap())
            .is_none());
        assert!(b.covariance.iter().all(|x| x.is_finite()));
    }
}
