//! Privacy criteria for estimating a linear function `w^T Theta`.
//!
//! Two families of checks live here: the definitional one (the QFIm is a
//! positive multiple of `w w^T`) and the operational ones built from trace
//! norms of state derivatives or generator commutators. The continuity
//! bound and the epsilon-privacy chain quantify how far a state is from
//! being exactly private.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::fisher::{self, FisherMatrix};
use crate::model::{self, NetworkModel, ParamVector, WeightVector};
use crate::qcore::{
    self, commutator, eig_hermitian_unchecked, fidelity, hermitian_deviation, operator_norm,
    trace_norm, CMatrix, DensityState, RMatrix,
};
use crate::tolerance::Tolerances;

/// Trace-norm comparison between the derivatives of nodes `mu` and `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostic {
    pub mu: usize,
    pub nu: usize,
    pub norm_diff: f64,
    pub weight_gap: f64,
    /// `norm_diff / weight_gap`; absent for equal weights.
    pub ratio: Option<f64>,
}

/// Outcome of a privacy check.
///
/// For the rank-one check `scale_a` is the fitted `a` in `Q ~ a w w^T` and
/// `residual_rel` the relative Frobenius misfit. For the trace-norm checks
/// `scale_a` is the mean proportionality constant and `residual_rel` the worst
/// of the equal-weight norms and the spread `max/min - 1` of the ratios.
/// Both are `None` when undefined: an all-zero QFIm, or ratios that vanish for
/// some pairs only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyVerdict {
    pub is_private: bool,
    pub scale_a: Option<f64>,
    pub residual_rel: Option<f64>,
    pub tolerance: f64,
    pub pair_diagnostics: Vec<PairDiagnostic>,
}

/// Both sides of the continuity inequality for `|Q_{mu nu} - Q_{mu' nu'}|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityBoundReport {
    pub indices: [usize; 4],
    pub lhs: f64,
    pub rhs: f64,
    pub xi: f64,
    pub lambda_min_support: f64,
    /// The state is rank deficient and `xi` was taken on its support.
    pub support_restricted: bool,
}

impl ContinuityBoundReport {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack
    }
}

/// `W = w w^T`.
pub fn build_w(w: &WeightVector) -> RMatrix {
    let v = w.as_slice();
    RMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j])
}

/// Definitional check: `Q = a w w^T` with `a >= 0`.
///
/// Private iff the relative residual is at most `tol` and no eigenvalue of `Q`
/// restricted to the complement of `w` exceeds `tol * ||Q||_F`.
pub fn rank_one_privacy_check(
    q: &FisherMatrix,
    w: &WeightVector,
    tol: f64,
) -> Result<PrivacyVerdict> {
    let d = q.dim();
    if w.len() != d {
        return arg(format!(
            "weight vector has {} entries, Fisher matrix is {d}x{d}",
            w.len()
        ));
    }
    let entries = q.entries();
    let fro = entries.norm();
    if fro == 0.0 {
        return Ok(PrivacyVerdict {
            is_private: false,
            scale_a: None,
            residual_rel: None,
            tolerance: tol,
            pair_diagnostics: Vec::new(),
        });
    }
    let wv = nalgebra::DVector::from_column_slice(w.as_slice());
    let nw2 = w.norm_squared();
    let a = (wv.transpose() * entries * &wv)[(0, 0)] / (nw2 * nw2);
    let residual = (entries - build_w(w) * a).norm() / fro;

    let proj = RMatrix::identity(d, d) - build_w(w) / nw2;
    let orth = &proj * entries * &proj;
    let orth_max = qcore::eig_symmetric(&orth).0.last().copied().unwrap_or(0.0);

    Ok(PrivacyVerdict {
        is_private: residual <= tol && orth_max <= tol * fro,
        scale_a: Some(a),
        residual_rel: Some(residual),
        tolerance: tol,
        pair_diagnostics: Vec::new(),
    })
}

fn weight_scale(w: &WeightVector) -> f64 {
    w.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Proportionality verdict from per-pair trace norms.
fn proportionality_verdict(
    norms: Vec<(usize, usize, f64)>,
    w: &WeightVector,
    tol: f64,
) -> PrivacyVerdict {
    let ws = w.as_slice();
    let gap_zero = 1e-12 * weight_scale(w);
    let mut diags = Vec::with_capacity(norms.len());
    let mut worst_equal = 0.0f64;
    let mut ratios = Vec::new();
    for (mu, nu, norm_diff) in norms {
        let gap = (ws[mu] - ws[nu]).abs();
        let ratio = if gap <= gap_zero {
            worst_equal = worst_equal.max(norm_diff);
            None
        } else {
            let r = norm_diff / gap;
            ratios.push(r);
            Some(r)
        };
        diags.push(PairDiagnostic {
            mu,
            nu,
            norm_diff,
            weight_gap: gap,
            ratio,
        });
    }

    let (spread, scale) = if ratios.is_empty() {
        (Some(0.0), None)
    } else {
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let spread = if max == 0.0 {
            Some(0.0)
        } else if min == 0.0 {
            None
        } else {
            Some(max / min - 1.0)
        };
        (spread, Some(mean))
    };

    PrivacyVerdict {
        is_private: worst_equal <= tol && spread.is_some_and(|s| s <= tol),
        scale_a: scale,
        residual_rel: spread.map(|s| worst_equal.max(s)),
        tolerance: tol,
        pair_diagnostics: diags,
    }
}

/// `||d_mu rho - d_nu rho||_1` proportional to `|w_mu - w_nu|` over all pairs.
///
/// Equal-weight pairs must have `norm_diff <= tol`; the remaining pairs must share
/// one ratio up to a relative spread of `tol`.
pub fn derivative_norm_condition(
    drho_list: &[CMatrix],
    w: &WeightVector,
    tol: f64,
) -> Result<PrivacyVerdict> {
    let d = drho_list.len();
    if w.len() != d {
        return arg(format!("{d} derivatives but {} weights", w.len()));
    }
    let mut norms = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for mu in 0..d {
        for nu in mu + 1..d {
            qcore::ensure_same_dim(&drho_list[mu], &drho_list[nu])?;
            norms.push((mu, nu, trace_norm(&(&drho_list[mu] - &drho_list[nu]))?));
        }
    }
    Ok(proportionality_verdict(norms, w, tol))
}

/// Which probe the generator-commutator condition is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationState {
    Initial,
    Evolved,
}

/// `||[H'_mu - H'_nu, rho]||_1` proportional to `|w_mu - w_nu|`.
///
/// Needs unitary nodes whose generators commute with their derivatives; `rho`
/// is the probe or the evolved state depending on `at`, and the two agree in
/// that setting.
pub fn unitary_privacy_condition(
    model: &NetworkModel,
    theta: &ParamVector,
    at: EvaluationState,
    w: &WeightVector,
    tol: f64,
) -> Result<PrivacyVerdict> {
    if !model.is_unitary() {
        return Err(Error::UnsupportedEncoding(
            "generator condition needs unitary nodes".into(),
        ));
    }
    let commuting = model::check_generator_commutation(model, theta)?;
    if let Some(bad) = commuting.iter().position(|ok| !ok) {
        return Err(Error::UnsupportedEncoding(format!(
            "node {bad}: dH/dtheta does not commute with H(theta)"
        )));
    }
    let d = model.d();
    if w.len() != d {
        return arg(format!("{d} nodes but {} weights", w.len()));
    }
    let rho = match at {
        EvaluationState::Initial => model.initial_state().clone(),
        EvaluationState::Evolved => model::evolve(model, theta)?,
    };
    let hp = (0..d)
        .map(|mu| model::generator_derivative(model, mu, theta))
        .collect::<Result<Vec<_>>>()?;
    let mut norms = Vec::new();
    for mu in 0..d {
        for nu in mu + 1..d {
            norms.push((
                mu,
                nu,
                trace_norm(&commutator(&(&hp[mu] - &hp[nu]), rho.matrix())?)?,
            ));
        }
    }
    Ok(proportionality_verdict(norms, w, tol))
}

/// All derivatives coincide entrywise within `tol`.
pub fn average_privacy_condition(drho_list: &[CMatrix], tol: f64) -> Result<bool> {
    if drho_list.len() < 2 {
        return arg("average condition needs at least two derivatives");
    }
    let mut worst = 0.0f64;
    for mu in 0..drho_list.len() {
        for nu in mu + 1..drho_list.len() {
            qcore::ensure_same_dim(&drho_list[mu], &drho_list[nu])?;
            worst = worst.max(qcore::max_abs_entry(&(&drho_list[mu] - &drho_list[nu])));
        }
    }
    Ok(worst <= tol)
}

/// Smallest eigenvalue of `rho` above `rank_tol` (default `1e-10`), plus whether `rho` is rank deficient.
pub fn support_min_eigenvalue(rho: &DensityState, rank_tol: Option<f64>) -> Result<(f64, bool)> {
    let cut = rank_tol.unwrap_or(Tolerances::default().rank_rel);
    let spec = eig_hermitian_unchecked(rho.matrix());
    let support: Vec<f64> = spec
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > cut)
        .collect();
    let min = support.first().copied().ok_or_else(|| {
        Error::Argument(format!("no eigenvalue above the rank tolerance {cut:e}"))
    })?;
    Ok((min, support.len() < rho.dim()))
}

/// `xi = (1/l)(1 + 32/l)` with `l` the smallest non-zero eigenvalue of `rho`.
pub fn xi(rho: &DensityState, rank_tol: Option<f64>) -> Result<f64> {
    let (l, _) = support_min_eigenvalue(rho, rank_tol)?;
    Ok(xi_from_lambda(l))
}

fn xi_from_lambda(l: f64) -> f64 {
    (1.0 / l) * (1.0 + 32.0 / l)
}

/// Evaluates both sides of the continuity bound on QFIm entries.
pub fn continuity_gap_bound(
    rho: &DensityState,
    drho_list: &[CMatrix],
    mu: usize,
    nu: usize,
    mu2: usize,
    nu2: usize,
) -> Result<ContinuityBoundReport> {
    let d = drho_list.len();
    if [mu, nu, mu2, nu2].iter().any(|&k| k >= d) {
        return arg(format!("index out of range for {d} parameters"));
    }
    let (lambda, restricted) = support_min_eigenvalue(rho, None)?;
    let xi = xi_from_lambda(lambda);
    let q = fisher::qfim(rho, drho_list)?;
    let lhs = (q.entries()[(mu, nu)] - q.entries()[(mu2, nu2)]).abs();
    let n = |k: usize| trace_norm(&drho_list[k]);
    let nd = |a: usize, b: usize| trace_norm(&(&drho_list[a] - &drho_list[b]));
    let rhs = 0.5 * xi * (nd(mu, mu2)? * (n(nu)? + n(nu2)?) + nd(nu, nu2)? * (n(mu)? + n(mu2)?));
    Ok(ContinuityBoundReport {
        indices: [mu, nu, mu2, nu2],
        lhs,
        rhs,
        xi,
        lambda_min_support: lambda,
        support_restricted: restricted,
    })
}

fn check_generator(h: &CMatrix, dim: usize, what: &str) -> Result<()> {
    if h.nrows() != dim || h.ncols() != dim {
        return arg(format!(
            "{what} is {}x{}, state is {dim}x{dim}",
            h.nrows(),
            h.ncols()
        ));
    }
    let dev = hermitian_deviation(h);
    if dev > 1e-8 {
        return arg(format!("{what} is not Hermitian (deviation {dev:e})"));
    }
    Ok(())
}

/// `epsilon = ||[H'_mu - H'_nu, sigma]||_1`.
pub fn epsilon_privacy(
    sigma: &DensityState,
    hprime_mu: &CMatrix,
    hprime_nu: &CMatrix,
) -> Result<f64> {
    check_generator(hprime_mu, sigma.dim(), "first generator")?;
    check_generator(hprime_nu, sigma.dim(), "second generator")?;
    trace_norm(&commutator(&(hprime_mu - hprime_nu), sigma.matrix())?)
}

/// `8 ||H||_inf sqrt(1 - F^2(sigma, varrho))` for a private reference `varrho`.
///
/// `varrho` is expected to satisfy the average condition; this is not re-checked.
pub fn epsilon_privacy_bound(
    sigma: &DensityState,
    varrho: &DensityState,
    h_local: &CMatrix,
) -> Result<f64> {
    let f = fidelity(sigma, varrho)?;
    Ok(8.0 * operator_norm(h_local)? * (1.0 - f * f).max(0.0).sqrt())
}

/// Every link of the epsilon-privacy chain for one perturbed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonChain {
    pub epsilon: f64,
    /// `4 max(||H'_mu||, ||H'_nu||) ||sigma - varrho||_1`.
    pub trace_distance_bound: f64,
    /// `8 ||H||_inf sqrt(1 - F^2)`.
    pub fidelity_bound: f64,
    pub fidelity: f64,
}

impl EpsilonChain {
    /// Both inequalities hold up to `slack`.
    pub fn holds(&self, slack: f64) -> bool {
        self.epsilon <= self.trace_distance_bound + slack
            && self.trace_distance_bound <= self.fidelity_bound + slack
    }
}

pub fn epsilon_chain(
    sigma: &DensityState,
    varrho: &DensityState,
    hprime_mu: &CMatrix,
    hprime_nu: &CMatrix,
    h_local: &CMatrix,
) -> Result<EpsilonChain> {
    qcore::ensure_same_dim(sigma.matrix(), varrho.matrix())?;
    let epsilon = epsilon_privacy(sigma, hprime_mu, hprime_nu)?;
    let hmax = operator_norm(hprime_mu)?.max(operator_norm(hprime_nu)?);
    let dist = trace_norm(&(sigma.matrix() - varrho.matrix()))?;
    let f = fidelity(sigma, varrho)?;
    Ok(EpsilonChain {
        epsilon,
        trace_distance_bound: 4.0 * hmax * dist,
        fidelity_bound: 8.0 * operator_norm(h_local)? * (1.0 - f * f).max(0.0).sqrt(),
        fidelity: f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::FisherKind;
    use crate::qcore::{c, embed_local, sigma_z_half, tensor_vec, CVector, NodeDims};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn ghz(d: usize) -> DensityState {
        let n = 1 << d;
        let mut psi = CVector::zeros(n);
        psi[0] = c(FRAC_1_SQRT_2, 0.0);
        psi[n - 1] = c(FRAC_1_SQRT_2, 0.0);
        DensityState::pure(&psi, NodeDims::qubits(d)).unwrap()
    }

    fn plus_product(d: usize) -> DensityState {
        let plus = CVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.0); 2]);
        DensityState::pure(&tensor_vec(&vec![plus; d]), NodeDims::qubits(d)).unwrap()
    }

    fn fisher(m: RMatrix) -> FisherMatrix {
        FisherMatrix::new(m, FisherKind::Quantum).unwrap()
    }

    #[test]
    fn w_matrix_examples() {
        let w = WeightVector::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(
            build_w(&w),
            RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])
        );
        let avg = build_w(&WeightVector::average(2));
        assert!(avg.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let w3 = WeightVector::new(vec![1.0, -2.0, 0.5]).unwrap();
        let ev = qcore::eig_symmetric(&build_w(&w3)).0;
        assert!((ev[2] - w3.norm_squared()).abs() < 1e-12);
        assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12);
    }

    #[test]
    fn all_ones_is_private_for_average() {
        for d in 2..=5 {
            let q = fisher(RMatrix::from_element(d, d, 1.0));
            let v = rank_one_privacy_check(&q, &WeightVector::average(d), 1e-8).unwrap();
            assert!(v.is_private);
            assert!((v.scale_a.unwrap() - (d * d) as f64).abs() < 1e-9);
            assert!(v.residual_rel.unwrap() < 1e-14);
        }
    }

    #[test]
    fn identity_is_not_private() {
        let v = rank_one_privacy_check(
            &fisher(RMatrix::identity(3, 3)),
            &WeightVector::average(3),
            1e-8,
        )
        .unwrap();
        assert!(!v.is_private);
        // I - P_w has Frobenius norm sqrt(d - 1) against ||I||_F = sqrt(d).
        assert!((v.residual_rel.unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scaled_construction_recovers_scale() {
        let w = WeightVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let v = rank_one_privacy_check(&fisher(build_w(&w) * 7.0), &w, 1e-10).unwrap();
        assert!(v.is_private);
        assert!((v.scale_a.unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn zero_fisher_is_flagged() {
        let v = rank_one_privacy_check(
            &fisher(RMatrix::zeros(2, 2)),
            &WeightVector::average(2),
            1e-8,
        )
        .unwrap();
        assert!(!v.is_private);
        assert!(v.residual_rel.is_none() && v.scale_a.is_none());
    }

    #[test]
    fn xi_examples() {
        assert!((xi(&ghz(2), None).unwrap() - 33.0).abs() < 1e-9);
        assert!(
            (xi(&DensityState::maximally_mixed(NodeDims::qubits(1)), None).unwrap() - 130.0).abs()
                < 1e-9
        );
        let m = qcore::complexify(&RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            0.9, 0.1, 0.0,
        ])));
        let rho = DensityState::new(m, NodeDims::new(vec![3]).unwrap()).unwrap();
        assert!((xi(&rho, None).unwrap() - 3210.0).abs() < 1e-6);
        assert!(support_min_eigenvalue(&rho, None).unwrap().1);
    }

    #[test]
    fn ghz_derivatives_satisfy_average_condition() {
        let model = NetworkModel::multiplicative(&sigma_z_half(), &[1, 1, 1], ghz(3)).unwrap();
        let theta = ParamVector::new(vec![0.2, -0.4, 1.1]).unwrap();
        let (_, dr) = model::state_and_derivatives(&model, &theta).unwrap();
        assert!(average_privacy_condition(&dr, 1e-12).unwrap());
        let v = derivative_norm_condition(&dr, &WeightVector::average(3), 1e-10).unwrap();
        assert!(v.is_private);
        assert_eq!(v.pair_diagnostics.len(), 3);
        for at in [EvaluationState::Initial, EvaluationState::Evolved] {
            let u = unitary_privacy_condition(&model, &theta, at, &WeightVector::average(3), 1e-10)
                .unwrap();
            assert!(u.is_private);
        }
    }

    #[test]
    fn product_probe_fails_trace_norm_conditions() {
        let model =
            NetworkModel::multiplicative(&sigma_z_half(), &[1, 1], plus_product(2)).unwrap();
        let theta = ParamVector::new(vec![0.3, 0.3]).unwrap();
        let (_, dr) = model::state_and_derivatives(&model, &theta).unwrap();
        assert!(!average_privacy_condition(&dr, 1e-8).unwrap());
        let w = WeightVector::average(2);
        assert!(!derivative_norm_condition(&dr, &w, 1e-8).unwrap().is_private);
        let u =
            unitary_privacy_condition(&model, &theta, EvaluationState::Initial, &w, 1e-8).unwrap();
        assert!(!u.is_private);
        assert!(u.pair_diagnostics[0].norm_diff > 0.1);
    }

    #[test]
    fn average_condition_needs_two_derivatives() {
        assert!(average_privacy_condition(&[CMatrix::zeros(2, 2)], 1e-8).is_err());
    }

    #[test]
    fn continuity_identical_indices_is_trivial() {
        let model =
            NetworkModel::multiplicative(&sigma_z_half(), &[1, 1], plus_product(2)).unwrap();
        let (rho, dr) = model::state_and_derivatives(&model, &ParamVector::zeros(2)).unwrap();
        let r = continuity_gap_bound(&rho, &dr, 0, 1, 0, 1).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
        assert!(continuity_gap_bound(&rho, &dr, 0, 2, 0, 1).is_err());
    }

    #[test]
    fn epsilon_for_product_probe_matches_hand_value() {
        // Delta|++> is orthogonal to |++> with norm 1/sqrt2, so the commutator has two singular values 1/sqrt2.
        let dims = NodeDims::qubits(2);
        let h1 = embed_local(&sigma_z_half(), 0, &dims).unwrap();
        let h2 = embed_local(&sigma_z_half(), 1, &dims).unwrap();
        let sigma = plus_product(2);
        let eps = epsilon_privacy(&sigma, &h1, &h2).unwrap();
        let delta = &h1 - &h2;
        let comm = &delta * sigma.matrix() - sigma.matrix() * &delta;
        let brute: f64 = comm.clone().svd(false, false).singular_values.iter().sum();
        assert!((eps - brute).abs() < 1e-10);
        assert!((eps - 2f64.sqrt()).abs() < 1e-10);
        assert!(epsilon_privacy(&ghz(2), &h1, &h2).unwrap() < 1e-12);
    }

    #[test]
    fn epsilon_bound_vanishes_at_reference() {
        let g = ghz(2);
        assert!(epsilon_privacy_bound(&g, &g, &sigma_z_half()).unwrap() < 1e-6);
        let dims = NodeDims::qubits(2);
        let h1 = embed_local(&sigma_z_half(), 0, &dims).unwrap();
        let h2 = embed_local(&sigma_z_half(), 1, &dims).unwrap();
        let chain = epsilon_chain(&plus_product(2), &g, &h1, &h2, &sigma_z_half()).unwrap();
        assert!(chain.holds(1e-12));
        let f = chain.fidelity;
        assert!((chain.fidelity_bound - 4.0 * (1.0 - f * f).sqrt()).abs() < 1e-12);
    }
}
