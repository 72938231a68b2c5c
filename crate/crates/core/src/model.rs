//! Network statistical model: per-node encodings, the sampling operator,
//! evolved probe states and their parameter derivatives.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::qcore::{
    self, c, commutator, conjugate_local, embed_local, ensure_square, hermitian_deviation,
    hermitian_part, identity, operator_norm, CMatrix, DensityState, NodeDims, ZERO,
};
use crate::tolerance::Tolerances;

pub type HamiltonianFn = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;
pub type KrausFamilyFn = Arc<dyn Fn(f64) -> Vec<CMatrix> + Send + Sync>;

/// `exp(-i t A)` for Hermitian `A`.
pub fn expm_hermitian(a: &CMatrix, t: f64) -> Result<CMatrix> {
    let spec = qcore::eig_hermitian(a)?;
    Ok(spec.map_reconstruct_complex(|l| c(0.0, -t * l).exp()))
}

/// How one node imprints its parameter on the probe.
#[derive(Clone)]
pub enum EncodingMap {
    /// `exp(-i theta H)` applied to each of `weight` tensor factors owned by the node.
    MultiplicativeUnitary { generator: CMatrix, weight: usize },
    /// `exp(-i H(theta))` on a single factor. `derivative` is `dH/dtheta` when known.
    GeneralUnitary {
        dim: usize,
        hamiltonian: HamiltonianFn,
        derivative: Option<HamiltonianFn>,
    },
    /// Parameter-dependent CPTP map on a single factor.
    KrausEncoding { dim: usize, family: KrausFamilyFn },
}

impl fmt::Debug for EncodingMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MultiplicativeUnitary { generator, weight } => f
                .debug_struct("MultiplicativeUnitary")
                .field("generator", generator)
                .field("weight", weight)
                .finish(),
            Self::GeneralUnitary {
                dim, derivative, ..
            } => f
                .debug_struct("GeneralUnitary")
                .field("dim", dim)
                .field("analytic_derivative", &derivative.is_some())
                .finish(),
            Self::KrausEncoding { dim, .. } => {
                f.debug_struct("KrausEncoding").field("dim", dim).finish()
            }
        }
    }
}

const KRAUS_PROBE_THETAS: [f64; 4] = [0.0, 0.37, 1.0, -2.1];

impl EncodingMap {
    pub fn multiplicative(generator: CMatrix, weight: usize) -> Result<Self> {
        ensure_square(&generator, "generator")?;
        if weight == 0 {
            return arg("encoding weight must be a positive integer");
        }
        let dev = hermitian_deviation(&generator);
        if dev > Tolerances::default().hermitian {
            return arg(format!("generator is not Hermitian (deviation {dev:e})"));
        }
        Ok(Self::MultiplicativeUnitary {
            generator: hermitian_part(&generator),
            weight,
        })
    }

    pub fn general_unitary(
        dim: usize,
        hamiltonian: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        Self::GeneralUnitary {
            dim,
            hamiltonian: Arc::new(hamiltonian),
            derivative: None,
        }
    }

    /// Attaches an analytic `dH/dtheta` to a general unitary encoding.
    pub fn with_derivative(self, d: impl Fn(f64) -> CMatrix + Send + Sync + 'static) -> Self {
        match self {
            Self::GeneralUnitary {
                dim, hamiltonian, ..
            } => Self::GeneralUnitary {
                dim,
                hamiltonian,
                derivative: Some(Arc::new(d)),
            },
            other => other,
        }
    }

    pub fn kraus(
        dim: usize,
        family: impl Fn(f64) -> Vec<CMatrix> + Send + Sync + 'static,
    ) -> Result<Self> {
        let family: KrausFamilyFn = Arc::new(family);
        for &t in &KRAUS_PROBE_THETAS {
            check_kraus_completeness(&family(t), dim)?;
        }
        Ok(Self::KrausEncoding { dim, family })
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(self, Self::KrausEncoding { .. })
    }

    /// Number of tensor factors the node occupies.
    pub fn factors(&self) -> usize {
        match self {
            Self::MultiplicativeUnitary { weight, .. } => *weight,
            _ => 1,
        }
    }

    pub fn local_dim(&self) -> usize {
        match self {
            Self::MultiplicativeUnitary { generator, .. } => generator.nrows(),
            Self::GeneralUnitary { dim, .. } | Self::KrausEncoding { dim, .. } => *dim,
        }
    }

    /// Local Hamiltonian `H_mu(theta)` on one factor.
    pub fn hamiltonian(&self, theta: f64) -> Result<CMatrix> {
        match self {
            Self::MultiplicativeUnitary { generator, .. } => Ok(generator.scale(theta)),
            Self::GeneralUnitary { hamiltonian, .. } => Ok(hamiltonian(theta)),
            Self::KrausEncoding { .. } => Err(kraus_unsupported()),
        }
    }

    /// `dH_mu/dtheta` on one factor (central differences when no analytic form was given).
    pub fn hamiltonian_derivative(&self, theta: f64) -> Result<CMatrix> {
        match self {
            Self::MultiplicativeUnitary { generator, .. } => Ok(generator.clone()),
            Self::GeneralUnitary {
                hamiltonian,
                derivative,
                ..
            } => Ok(match derivative {
                Some(d) => d(theta),
                None => {
                    let h = Tolerances::default().fd_step;
                    (hamiltonian(theta + h) - hamiltonian(theta - h)).unscale(2.0 * h)
                }
            }),
            Self::KrausEncoding { .. } => Err(kraus_unsupported()),
        }
    }

    /// Single-factor unitary `U(theta)`.
    pub fn local_unitary(&self, theta: f64) -> Result<CMatrix> {
        match self {
            Self::MultiplicativeUnitary { generator, .. } => expm_hermitian(generator, theta),
            Self::GeneralUnitary { hamiltonian, .. } => expm_hermitian(&hamiltonian(theta), 1.0),
            Self::KrausEncoding { .. } => Err(kraus_unsupported()),
        }
    }

    /// Kraus operators of the single-factor map (a unitary is its own one-element list).
    pub fn local_kraus(&self, theta: f64) -> Result<Vec<CMatrix>> {
        match self {
            Self::KrausEncoding { dim, family } => {
                let ops = family(theta);
                check_kraus_completeness(&ops, *dim)?;
                Ok(ops)
            }
            _ => Ok(vec![self.local_unitary(theta)?]),
        }
    }

    /// `[dH/dtheta, H(theta)]` vanishes, so `dU = -i H' U` holds exactly.
    pub fn generator_commutes(&self, theta: f64, tol: f64) -> Result<bool> {
        match self {
            Self::MultiplicativeUnitary { .. } => Ok(true),
            Self::GeneralUnitary { .. } => {
                let comm = commutator(
                    &self.hamiltonian_derivative(theta)?,
                    &self.hamiltonian(theta)?,
                )?;
                Ok(operator_norm(&comm)? <= tol)
            }
            Self::KrausEncoding { .. } => Err(kraus_unsupported()),
        }
    }
}

fn kraus_unsupported() -> Error {
    Error::UnsupportedEncoding(
        "operation requires a unitary encoding, node uses Kraus operators".into(),
    )
}

/// `sum_k A_k^dagger A_k = 1` within 1e-9.
pub fn check_kraus_completeness(ops: &[CMatrix], dim: usize) -> Result<()> {
    if ops.is_empty() {
        return arg("empty Kraus list");
    }
    let mut sum = CMatrix::zeros(dim, dim);
    for op in ops {
        if op.nrows() != dim || op.ncols() != dim {
            return arg(format!(
                "Kraus operator is {}x{}, expected {dim}x{dim}",
                op.nrows(),
                op.ncols()
            ));
        }
        sum += op.adjoint() * op;
    }
    let dev = qcore::max_abs_entry(&(sum - identity(dim)));
    if dev > 1e-9 {
        return arg(format!(
            "Kraus operators are not complete (deviation {dev:e})"
        ));
    }
    Ok(())
}

/// Unknown parameters `theta_1..theta_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return arg("parameters must be finite");
        }
        Ok(Self(theta))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Arithmetic mean of the parameters.
    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Copy with `theta_mu` shifted by `delta`.
    pub fn shifted(&self, mu: usize, delta: f64) -> Self {
        let mut v = self.0.clone();
        v[mu] += delta;
        Self(v)
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Coefficients `w` of the target function `w^T Theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return arg("weight vector must be non-empty");
        }
        if w.iter().any(|x| !x.is_finite()) {
            return arg("weight vector must be finite");
        }
        if w.iter().all(|&x| x == 0.0) {
            return arg("weight vector must not be all zero");
        }
        Ok(Self(w))
    }

    /// `(1, ..., 1) / d`.
    pub fn average(d: usize) -> Self {
        Self(vec![1.0 / d as f64; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    /// Weights as positive integers, or an error naming the offending entry.
    pub fn as_integers(&self) -> Result<Vec<usize>> {
        self.0
            .iter()
            .map(|&x| {
                if x >= 1.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    arg(format!("weight {x} is not a positive integer"))
                }
            })
            .collect()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// Encodings, expanded tensor structure and initial probe.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    nodes: Vec<EncodingMap>,
    dims: NodeDims,
    offsets: Vec<usize>,
    rho0: DensityState,
}

impl NetworkModel {
    pub fn new(nodes: Vec<EncodingMap>, rho0: DensityState) -> Result<Self> {
        if nodes.is_empty() {
            return arg("a network needs at least one node");
        }
        let mut dims = Vec::new();
        let mut offsets = Vec::with_capacity(nodes.len());
        for node in &nodes {
            offsets.push(dims.len());
            dims.extend(std::iter::repeat_n(node.local_dim(), node.factors()));
        }
        let dims = NodeDims::new(dims)?;
        if dims.total() != rho0.dim() {
            return arg(format!(
                "expanded node dimensions {:?} give {}, probe has dimension {}",
                dims.as_slice(),
                dims.total(),
                rho0.dim()
            ));
        }
        let rho0 = rho0.retag(dims.clone())?;
        Ok(Self {
            nodes,
            dims,
            offsets,
            rho0,
        })
    }

    /// `d` multiplicative nodes sharing one generator, with per-node integer weights.
    pub fn multiplicative(
        generator: &CMatrix,
        weights: &[usize],
        rho0: DensityState,
    ) -> Result<Self> {
        let nodes = weights
            .iter()
            .map(|&w| EncodingMap::multiplicative(generator.clone(), w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(nodes, rho0)
    }

    /// Number of parameters.
    pub fn d(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[EncodingMap] {
        &self.nodes
    }

    pub fn dims(&self) -> &NodeDims {
        &self.dims
    }

    pub fn initial_state(&self) -> &DensityState {
        &self.rho0
    }

    /// Same encodings, new probe.
    pub fn with_initial_state(&self, rho0: DensityState) -> Result<Self> {
        Self::new(self.nodes.clone(), rho0)
    }

    /// Tensor factors owned by node `mu`.
    pub fn factor_range(&self, mu: usize) -> std::ops::Range<usize> {
        let start = self.offsets[mu];
        start..start + self.nodes[mu].factors()
    }

    pub fn is_unitary(&self) -> bool {
        self.nodes.iter().all(EncodingMap::is_unitary)
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.d() {
            return arg(format!(
                "expected {} parameters, got {}",
                self.d(),
                theta.len()
            ));
        }
        Ok(())
    }

    fn check_node(&self, mu: usize) -> Result<()> {
        if mu >= self.d() {
            return arg(format!(
                "node index {mu} out of range for {} nodes",
                self.d()
            ));
        }
        Ok(())
    }
}

/// Global unitary `U_Theta`, with a weight-`w` node contributing `U(theta_mu)^{(x) w}`.
pub fn sampling_unitary(model: &NetworkModel, theta: &ParamVector) -> Result<CMatrix> {
    model.check_theta(theta)?;
    let mut factors = Vec::with_capacity(model.dims().len());
    for (node, &t) in model.nodes().iter().zip(theta.as_slice()) {
        let u = node.local_unitary(t)?;
        factors.extend(std::iter::repeat_n(u, node.factors()));
    }
    qcore::tensor(&factors)
}

/// `rho_Theta = Lambda_Theta(rho_0)`, applied factor by factor.
pub fn evolve(model: &NetworkModel, theta: &ParamVector) -> Result<DensityState> {
    model.check_theta(theta)?;
    let mut rho = model.initial_state().matrix().clone();
    for (mu, (node, &t)) in model.nodes().iter().zip(theta.as_slice()).enumerate() {
        let ops = node.local_kraus(t)?;
        for factor in model.factor_range(mu) {
            rho = apply_kraus_on_factor(&ops, factor, model.dims(), &rho)?;
        }
    }
    Ok(DensityState::from_parts(rho, model.dims().clone()))
}

/// `sum_k A_k M A_k^dagger` with every `A_k` acting on one factor.
pub(crate) fn apply_kraus_on_factor(
    ops: &[CMatrix],
    factor: usize,
    dims: &NodeDims,
    m: &CMatrix,
) -> Result<CMatrix> {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for op in ops {
        out += conjugate_local(op, factor, dims, m)?;
    }
    Ok(out)
}

/// Global generator derivative `H'_mu`: the sum of `dH_mu/dtheta` embedded on each of the node's factors.
pub fn generator_derivative(
    model: &NetworkModel,
    mu: usize,
    theta: &ParamVector,
) -> Result<CMatrix> {
    model.check_theta(theta)?;
    model.check_node(mu)?;
    let local = model.nodes()[mu].hamiltonian_derivative(theta.as_slice()[mu])?;
    let n = model.dims().total();
    let mut total = CMatrix::from_element(n, n, ZERO);
    for factor in model.factor_range(mu) {
        total += embed_local(&local, factor, model.dims())?;
    }
    Ok(total)
}

/// Per-node check that `[dH_mu/dtheta, H_mu(theta)]` vanishes.
pub fn check_generator_commutation(model: &NetworkModel, theta: &ParamVector) -> Result<Vec<bool>> {
    model.check_theta(theta)?;
    let tol = Tolerances::default().commutation;
    model
        .nodes()
        .iter()
        .zip(theta.as_slice())
        .map(|(node, &t)| node.generator_commutes(t, tol))
        .collect()
}

/// Central finite difference of `evolve` along `theta_mu`.
pub fn finite_difference_derivative(
    model: &NetworkModel,
    theta: &ParamVector,
    mu: usize,
    h: f64,
) -> Result<CMatrix> {
    model.check_theta(theta)?;
    model.check_node(mu)?;
    let plus = evolve(model, &theta.shifted(mu, h))?;
    let minus = evolve(model, &theta.shifted(mu, -h))?;
    Ok((plus.matrix() - minus.matrix()).unscale(2.0 * h))
}

fn analytic_available(model: &NetworkModel, theta: &ParamVector, mu: usize) -> Result<bool> {
    let node = &model.nodes()[mu];
    if !node.is_unitary() {
        return Ok(false);
    }
    node.generator_commutes(theta.as_slice()[mu], Tolerances::default().commutation)
}

/// `d rho_Theta / d theta_mu`: `-i[H'_mu, rho_Theta]` for unitary nodes whose
/// generator commutes with its derivative, central differences otherwise.
pub fn state_derivative(model: &NetworkModel, theta: &ParamVector, mu: usize) -> Result<CMatrix> {
    model.check_theta(theta)?;
    model.check_node(mu)?;
    let rho = evolve(model, theta)?;
    derivative_at(model, theta, mu, &rho)
}

fn derivative_at(
    model: &NetworkModel,
    theta: &ParamVector,
    mu: usize,
    rho: &DensityState,
) -> Result<CMatrix> {
    if analytic_available(model, theta, mu)? {
        let hp = generator_derivative(model, mu, theta)?;
        let comm = commutator(&hp, rho.matrix())?;
        Ok(comm.map(|z| z * c(0.0, -1.0)))
    } else {
        finite_difference_derivative(model, theta, mu, Tolerances::default().fd_step)
    }
}

/// Evolved state together with every parameter derivative.
pub fn state_and_derivatives(
    model: &NetworkModel,
    theta: &ParamVector,
) -> Result<(DensityState, Vec<CMatrix>)> {
    model.check_theta(theta)?;
    let rho = evolve(model, theta)?;
    let derivs = (0..model.d())
        .map(|mu| derivative_at(model, theta, mu, &rho))
        .collect::<Result<Vec<_>>>()?;
    Ok((rho, derivs))
}
