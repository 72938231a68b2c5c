//! Uncorrelated noise channels acting on network probes.
//!
//! Per-node channels are stored as local Kraus lists and applied factor by
//! factor, which equals the sum over all Kraus strings `A_k1 (x) ... (x) A_kd`.
//! [`kraus_strings`] enumerates those strings explicitly for small networks.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::model::{
    self, apply_kraus_on_factor, check_kraus_completeness, EncodingMap, NetworkModel, ParamVector,
    WeightVector,
};
use crate::privacy::{self, PrivacyVerdict};
use crate::qcore::{
    self, c, commutator, operator_norm, trace, CMatrix, DensityState, NodeDims, ONE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locality {
    /// The same local Kraus list on every targeted factor.
    PerNode,
    /// An affine map on the whole register.
    GlobalMap,
}

/// Where the noise acts relative to the parameter encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseStage {
    BeforeSampling,
    AfterSampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseChannel {
    name: String,
    eta: f64,
    locality: Locality,
    kraus: Vec<CMatrix>,
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return arg(format!("noise strength must lie in [0, 1], got {eta}"));
    }
    Ok(())
}

fn real(n: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_row_slice(
        n,
        n,
        &entries.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>(),
    )
}

impl NoiseChannel {
    /// Custom per-node channel from a complete Kraus list.
    pub fn per_node(name: impl Into<String>, eta: f64, kraus: Vec<CMatrix>) -> Result<Self> {
        check_eta(eta)?;
        let dim = kraus
            .first()
            .map(|k| k.nrows())
            .ok_or_else(|| Error::Argument("empty Kraus list".into()))?;
        check_kraus_completeness(&kraus, dim)?;
        Ok(Self {
            name: name.into(),
            eta,
            locality: Locality::PerNode,
            kraus,
        })
    }

    /// `sqrt(1-eta) 1`, `sqrt(eta) sigma_z`.
    pub fn dephasing(eta: f64) -> Result<Self> {
        check_eta(eta)?;
        let kraus = vec![
            qcore::identity(2).scale((1.0 - eta).sqrt()),
            qcore::pauli_z().scale(eta.sqrt()),
        ];
        Self::per_node("dephasing", eta, kraus)
    }

    /// Pauli Kraus form with weights `eta/4` and `1 - 3 eta/4`; acts as `(1-eta) rho + eta 1/2` on a qubit.
    pub fn depolarizing(eta: f64) -> Result<Self> {
        check_eta(eta)?;
        let p = (eta / 4.0).sqrt();
        let kraus = vec![
            qcore::pauli_x().scale(p),
            qcore::pauli_y().scale(p),
            qcore::pauli_z().scale(p),
            qcore::identity(2).scale((1.0 - 0.75 * eta).sqrt()),
        ];
        Self::per_node("depolarizing", eta, kraus)
    }

    /// `(1 - eta) rho + eta 1/dim` on the full register.
    pub fn global_depolarizing(eta: f64) -> Result<Self> {
        check_eta(eta)?;
        Ok(Self {
            name: "global_depolarizing".into(),
            eta,
            locality: Locality::GlobalMap,
            kraus: Vec::new(),
        })
    }

    /// `diag(1, sqrt(1-eta))` and `sqrt(eta) |0><1|`.
    pub fn amplitude_damping(eta: f64) -> Result<Self> {
        check_eta(eta)?;
        let kraus = vec![
            real(2, &[1.0, 0.0, 0.0, (1.0 - eta).sqrt()]),
            real(2, &[0.0, eta.sqrt(), 0.0, 0.0]),
        ];
        Self::per_node("amplitude_damping", eta, kraus)
    }

    /// Qutrit erasure: the qubit block survives with probability `1 - eta`, otherwise the
    /// factor is replaced by the flag level `|e> = |2>`.
    pub fn erasure(eta: f64) -> Result<Self> {
        check_eta(eta)?;
        let s = (1.0 - eta).sqrt();
        let e = eta.sqrt();
        let kraus = vec![
            real(3, &[s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, 0.0]),
            real(3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
            real(3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, e, 0.0, 0.0]),
            real(3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, e, 0.0]),
        ];
        Self::per_node("erasure", eta, kraus)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn locality(&self) -> Locality {
        self.locality
    }

    /// Local Kraus operators; empty for global maps.
    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// Local dimension the Kraus operators act on (`None` for global maps).
    pub fn local_dim(&self) -> Option<usize> {
        self.kraus.first().map(|k| k.nrows())
    }

    /// Applies the channel as a linear map to an arbitrary operator `m` on `dims`.
    pub fn apply_linear(&self, m: &CMatrix, dims: &NodeDims, factors: &[usize]) -> Result<CMatrix> {
        if m.nrows() != dims.total() || m.ncols() != dims.total() {
            return arg("operator does not match the register dimensions");
        }
        match self.locality {
            Locality::GlobalMap => {
                let n = dims.total();
                let tr = trace(m);
                Ok(m.scale(1.0 - self.eta) + qcore::identity(n) * (tr * self.eta / n as f64))
            }
            Locality::PerNode => {
                let local = self.local_dim().unwrap_or(0);
                let mut out = m.clone();
                for &f in factors {
                    if f >= dims.len() {
                        return arg(format!(
                            "factor {f} out of range for {} factors",
                            dims.len()
                        ));
                    }
                    if dims.as_slice()[f] != local {
                        return arg(format!(
                            "{} acts on dimension {local}, factor {f} has dimension {}",
                            self.name,
                            dims.as_slice()[f]
                        ));
                    }
                    out = apply_kraus_on_factor(&self.kraus, f, dims, &out)?;
                }
                Ok(out)
            }
        }
    }
}

/// Channel applied to the listed tensor factors (ignored for global maps).
pub fn apply_channel(
    rho: &DensityState,
    channel: &NoiseChannel,
    factors: &[usize],
) -> Result<DensityState> {
    let out = channel.apply_linear(rho.matrix(), rho.dims(), factors)?;
    Ok(DensityState::from_parts(out, rho.dims().clone()))
}

/// Channel applied to every factor.
pub fn apply_channel_everywhere(
    rho: &DensityState,
    channel: &NoiseChannel,
) -> Result<DensityState> {
    let all: Vec<usize> = (0..rho.dims().len()).collect();
    apply_channel(rho, channel, &all)
}

/// Lazy enumeration of `A_k1 (x) ... (x) A_kd` in lexicographic order of `k`.
pub struct KrausStrings<'a> {
    ops: &'a [CMatrix],
    index: Vec<usize>,
    done: bool,
}

impl Iterator for KrausStrings<'_> {
    type Item = (Vec<usize>, CMatrix);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let factors: Vec<CMatrix> = self.index.iter().map(|&k| self.ops[k].clone()).collect();
        let item = (self.index.clone(), qcore::tensor(&factors).ok()?);
        self.done = true;
        for slot in self.index.iter_mut().rev() {
            *slot += 1;
            if *slot < self.ops.len() {
                self.done = false;
                break;
            }
            *slot = 0;
        }
        Some(item)
    }
}

pub fn kraus_strings(channel: &NoiseChannel, d: usize) -> Result<KrausStrings<'_>> {
    if channel.locality != Locality::PerNode {
        return arg("Kraus strings are defined for per-node channels");
    }
    if d == 0 {
        return arg("need at least one factor");
    }
    Ok(KrausStrings {
        ops: &channel.kraus,
        index: vec![0; d],
        done: false,
    })
}

/// `V = 1 (+) 0`: qubit-to-qutrit inclusion for operators.
fn pad_to_qutrit(m: &CMatrix, corner: f64) -> CMatrix {
    let mut out = CMatrix::zeros(3, 3);
    out.view_mut((0, 0), (2, 2)).copy_from(m);
    out[(2, 2)] = c(corner, 0.0);
    out
}

/// Qubit probe embedded into the qutrit register, no weight on the flag levels.
pub fn embed_qubit_state(rho: &DensityState) -> Result<DensityState> {
    let dims = rho.dims().as_slice();
    if dims.iter().any(|&k| k != 2) {
        return Err(Error::UnsupportedEncoding(
            "erasure embedding needs qubit factors".into(),
        ));
    }
    let n = dims.len();
    let map = |i: usize| (0..n).fold(0usize, |acc, k| acc * 3 + ((i >> (n - 1 - k)) & 1));
    let big = 3usize.pow(n as u32);
    let mut out = CMatrix::zeros(big, big);
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            out[(map(i), map(j))] = rho.matrix()[(i, j)];
        }
    }
    Ok(DensityState::from_parts(out, NodeDims::new(vec![3; n])?))
}

/// Every qubit factor becomes a qutrit; the sampling unitary acts as `U (+) 1`.
pub fn embed_for_erasure(model: &NetworkModel) -> Result<NetworkModel> {
    let mut nodes = Vec::with_capacity(model.d());
    for node in model.nodes() {
        if node.local_dim() != 2 {
            return Err(Error::UnsupportedEncoding(
                "erasure embedding needs qubit nodes".into(),
            ));
        }
        nodes.push(match node {
            EncodingMap::MultiplicativeUnitary { generator, weight } => {
                EncodingMap::multiplicative(pad_to_qutrit(generator, 0.0), *weight)?
            }
            EncodingMap::GeneralUnitary {
                hamiltonian,
                derivative,
                ..
            } => {
                let h = hamiltonian.clone();
                let embedded = EncodingMap::general_unitary(3, move |t| pad_to_qutrit(&h(t), 0.0));
                match derivative {
                    Some(dh) => {
                        let dh = dh.clone();
                        embedded.with_derivative(move |t| pad_to_qutrit(&dh(t), 0.0))
                    }
                    None => embedded,
                }
            }
            EncodingMap::KrausEncoding { .. } => {
                return Err(Error::UnsupportedEncoding(
                    "erasure embedding needs unitary nodes".into(),
                ))
            }
        });
    }
    NetworkModel::new(nodes, embed_qubit_state(model.initial_state())?)
}

/// Model whose factors match the channel, embedding qubits for qutrit channels.
fn model_for_channel(model: &NetworkModel, channel: &NoiseChannel) -> Result<NetworkModel> {
    match channel.local_dim() {
        Some(3) if model.dims().as_slice().iter().all(|&k| k == 2) => embed_for_erasure(model),
        _ => Ok(model.clone()),
    }
}

fn local_unitaries(model: &NetworkModel, theta: &ParamVector) -> Result<Vec<CMatrix>> {
    if !model.is_unitary() {
        return Err(Error::UnsupportedEncoding(
            "sampling commutation needs unitary nodes".into(),
        ));
    }
    if theta.len() != model.d() {
        return arg(format!(
            "expected {} parameters, got {}",
            model.d(),
            theta.len()
        ));
    }
    model
        .nodes()
        .iter()
        .zip(theta.as_slice())
        .map(|(n, &t)| n.local_unitary(t))
        .collect()
}

/// `max_{k, mu} ||[A_k, U(theta_mu)]||_inf`, with qutrit channels checked against `U (+) 1`.
pub fn sampling_commutator_norm(
    channel: &NoiseChannel,
    model: &NetworkModel,
    theta: &ParamVector,
) -> Result<f64> {
    if channel.locality == Locality::GlobalMap {
        return Err(Error::UnsupportedEncoding(
            "global maps have no local Kraus operators".into(),
        ));
    }
    let model = model_for_channel(model, channel)?;
    let mut worst = 0.0f64;
    for u in local_unitaries(&model, theta)? {
        qcore::ensure_same_dim(&u, &channel.kraus[0])?;
        for a in &channel.kraus {
            worst = worst.max(operator_norm(&commutator(a, &u)?)?);
        }
    }
    Ok(worst)
}

/// `max ||E(U X U^dagger) - U E(X) U^dagger||_inf` over local matrix units `X`
/// (over the probe and `|0><N-1|` for global maps). Zero means the channel is
/// covariant under the sampling unitaries as a map, whatever its Kraus form.
pub fn sampling_covariance_defect(
    channel: &NoiseChannel,
    model: &NetworkModel,
    theta: &ParamVector,
) -> Result<f64> {
    let model = model_for_channel(model, channel)?;
    let mut worst = 0.0f64;
    match channel.locality {
        Locality::PerNode => {
            let n = channel.local_dim().unwrap_or(0);
            let dims = NodeDims::new(vec![n])?;
            for u in local_unitaries(&model, theta)? {
                qcore::ensure_same_dim(&u, &channel.kraus[0])?;
                for i in 0..n {
                    for j in 0..n {
                        let mut x = CMatrix::zeros(n, n);
                        x[(i, j)] = ONE;
                        let lhs = channel.apply_linear(&(&u * &x * u.adjoint()), &dims, &[0])?;
                        let rhs = &u * channel.apply_linear(&x, &dims, &[0])? * u.adjoint();
                        worst = worst.max(operator_norm(&(lhs - rhs))?);
                    }
                }
            }
        }
        Locality::GlobalMap => {
            let u = model::sampling_unitary(&model, theta)?;
            let n = u.nrows();
            let mut corner = CMatrix::zeros(n, n);
            corner[(0, n - 1)] = ONE;
            for x in [model.initial_state().matrix().clone(), corner] {
                let lhs = channel.apply_linear(&(&u * &x * u.adjoint()), model.dims(), &[])?;
                let rhs = &u * channel.apply_linear(&x, model.dims(), &[])? * u.adjoint();
                worst = worst.max(operator_norm(&(lhs - rhs))?);
            }
        }
    }
    Ok(worst)
}

/// Kraus operators commute with every node's sampling unitary within `1e-10`.
/// Global maps are judged by their covariance defect instead.
pub fn commutes_with_sampling(
    channel: &NoiseChannel,
    model: &NetworkModel,
    theta: &ParamVector,
) -> Result<bool> {
    let tol = crate::Tolerances::default().commutation;
    let norm = match channel.locality {
        Locality::PerNode => sampling_commutator_norm(channel, model, theta)?,
        Locality::GlobalMap => sampling_covariance_defect(channel, model, theta)?,
    };
    Ok(norm <= tol)
}

/// Noisy evolved state and its derivatives, on the register the channel acts on.
///
/// After sampling the derivatives pass through the (parameter-free) channel. Before
/// sampling the noisy probe is evolved like any other probe.
pub fn noisy_state_and_derivatives(
    model: &NetworkModel,
    channel: &NoiseChannel,
    stage: NoiseStage,
    theta: &ParamVector,
) -> Result<(DensityState, Vec<CMatrix>)> {
    let model = model_for_channel(model, channel)?;
    let all: Vec<usize> = (0..model.dims().len()).collect();
    match stage {
        NoiseStage::AfterSampling => {
            let (rho, drho) = model::state_and_derivatives(&model, theta)?;
            let rho = apply_channel(&rho, channel, &all)?;
            let drho = drho
                .iter()
                .map(|d| channel.apply_linear(d, model.dims(), &all))
                .collect::<Result<Vec<_>>>()?;
            Ok((rho, drho))
        }
        NoiseStage::BeforeSampling => {
            let noisy = apply_channel(model.initial_state(), channel, &all)?;
            model::state_and_derivatives(&model.with_initial_state(noisy)?, theta)
        }
    }
}

/// Derivative trace-norm verdict for the noisy pipeline.
pub fn privacy_after_noise(
    model: &NetworkModel,
    channel: &NoiseChannel,
    stage: NoiseStage,
    theta: &ParamVector,
    w: &WeightVector,
    tol: f64,
) -> Result<PrivacyVerdict> {
    let (_, drho) = noisy_state_and_derivatives(model, channel, stage, theta)?;
    privacy::derivative_norm_condition(&drho, w, tol)
}

/// One point of a noise sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub eta: f64,
    /// Worst pair `||[H'_mu - H'_nu, sigma]||_1` on the noisy evolved state.
    pub epsilon: f64,
    /// `8 ||H||_inf sqrt(1 - F^2)` against the noiseless evolved state.
    pub epsilon_bound: f64,
    pub fidelity: f64,
    /// `2 |<0..0| sigma |1..1>|`.
    pub coherence_abs: f64,
    pub verdict: PrivacyVerdict,
}

/// Evaluates the noisy pipeline at one channel strength.
pub fn evaluate_noise_point(
    model: &NetworkModel,
    channel: &NoiseChannel,
    stage: NoiseStage,
    theta: &ParamVector,
    w: &WeightVector,
    tol: f64,
) -> Result<NoisePoint> {
    let target = model_for_channel(model, channel)?;
    let (sigma, drho) = noisy_state_and_derivatives(model, channel, stage, theta)?;
    let reference = model::evolve(&target, theta)?;
    let hp = (0..target.d())
        .map(|mu| model::generator_derivative(&target, mu, theta))
        .collect::<Result<Vec<_>>>()?;
    let mut epsilon = 0.0f64;
    for mu in 0..hp.len() {
        for nu in mu + 1..hp.len() {
            epsilon = epsilon.max(privacy::epsilon_privacy(&sigma, &hp[mu], &hp[nu])?);
        }
    }
    let h_local = (0..target.d())
        .map(|mu| operator_norm(&target.nodes()[mu].hamiltonian_derivative(theta.as_slice()[mu])?))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let fidelity = qcore::fidelity(&sigma, &reference)?;
    let epsilon_bound = 8.0 * h_local * (1.0 - fidelity * fidelity).max(0.0).sqrt();
    let ones = all_ones_index(sigma.dims());
    let coherence_abs = 2.0 * sigma.matrix()[(0, ones)].norm();
    let verdict = privacy::derivative_norm_condition(&drho, w, tol)?;
    Ok(NoisePoint {
        eta: channel.eta,
        epsilon,
        epsilon_bound,
        fidelity,
        coherence_abs,
        verdict,
    })
}

/// Index of `|1 1 ... 1>` in the computational basis of `dims`.
pub fn all_ones_index(dims: &NodeDims) -> usize {
    dims.as_slice().iter().fold(0, |acc, &k| acc * k + 1)
}

/// Split of an amplitude-damped GHZ-like state into its corner coherences and diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdDecomposition {
    /// Entries at `(0,0)`, `(N-1,N-1)`, `(0,N-1)`, `(N-1,0)`.
    pub coherence_part: CMatrix,
    /// Remaining diagonal entries.
    pub diagonal_part: CMatrix,
    /// Largest entry of `rho - coherence_part - diagonal_part`.
    pub residual: f64,
}

impl AdDecomposition {
    /// `|<0..0| rho |1..1>|`.
    pub fn coherence_abs(&self) -> f64 {
        let n = self.coherence_part.nrows();
        self.coherence_part[(0, n - 1)].norm()
    }
}

pub fn ad_structure_decompose(rho: &DensityState) -> AdDecomposition {
    let m = rho.matrix();
    let n = m.nrows();
    let last = n - 1;
    let mut coh = CMatrix::zeros(n, n);
    for (i, j) in [(0, 0), (last, last), (0, last), (last, 0)] {
        coh[(i, j)] = m[(i, j)];
    }
    let mut diag = CMatrix::zeros(n, n);
    for i in 1..last {
        diag[(i, i)] = m[(i, i)];
    }
    let residual = qcore::max_abs_entry(&(m - &coh - &diag));
    AdDecomposition {
        coherence_part: coh,
        diagonal_part: diag,
        residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructurePredicates {
    /// At most one non-zero entry in every row and column.
    pub is_generalized_permutation: bool,
    pub is_upper_triangular: bool,
    pub first_entry_zero: bool,
}

/// Entrywise structure with zero threshold `1e-12`.
pub fn matrix_structure_predicates(m: &CMatrix) -> Result<StructurePredicates> {
    let n = qcore::ensure_square(m, "structure input")?;
    let zero = crate::Tolerances::default().structural_zero;
    let nz = |i: usize, j: usize| m[(i, j)].norm() > zero;
    let rows_ok = (0..n).all(|i| (0..n).filter(|&j| nz(i, j)).count() <= 1);
    let cols_ok = (0..n).all(|j| (0..n).filter(|&i| nz(i, j)).count() <= 1);
    let upper = (0..n).all(|i| (0..i).all(|j| !nz(i, j)));
    Ok(StructurePredicates {
        is_generalized_permutation: rows_ok && cols_ok,
        is_upper_triangular: upper,
        first_entry_zero: !nz(0, 0),
    })
}
