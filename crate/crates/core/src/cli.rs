//! Batch front-end: one JSON scenario in, a JSON report (and a CSV curve for
//! noise sweeps) out.
//!
//! Exit codes: `0` success or certified, `1` not certified or a numerical
//! failure, `2` invalid input. Nothing is written when the input is invalid.

use std::fmt::Write as _;
use std::io::{IsTerminal, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::fisher::{self, FisherMatrix, FisherOrdering};
use crate::model::{self, NetworkModel, ParamVector, WeightVector};
use crate::noise::{self, Locality, NoiseChannel, NoisePoint, NoiseStage};
use crate::privacy::{self, ContinuityBoundReport, EvaluationState, PrivacyVerdict};
use crate::protocol::{self, EstimationResult};
use crate::qcore::{self, c, CMatrix, CVector, DensityState, NodeDims, RMatrix};
use crate::tolerance::Tolerances;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

/// `[re, im]`.
pub type ComplexLit = [f64; 2];
/// Rows of `[re, im]` pairs.
pub type MatrixLit = Vec<Vec<ComplexLit>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Analyze,
    NoiseSweep,
    Simulate,
    Certify,
}

impl Task {
    pub fn label(self) -> &'static str {
        match self {
            Self::Analyze => "analyze",
            Self::NoiseSweep => "noise-sweep",
            Self::Simulate => "simulate",
            Self::Certify => "certify",
        }
    }
}

/// `"sigma_z_half"` or `{"matrix": [[[re, im], ...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorSpec {
    Label(String),
    Matrix { matrix: MatrixLit },
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self::Label("sigma_z_half".into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingSpec {
    pub generator: GeneratorSpec,
    /// Integer weight per node; all ones when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<usize>>,
    /// Target function `w`; the normalized weights when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateSpec {
    /// `alpha |0..0> + beta |1..1>`, balanced by default.
    Ghz {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<ComplexLit>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<ComplexLit>,
    },
    /// Coefficients over the generator eigenvectors in ascending eigenvalue order.
    WeightedEigen {
        coeffs: Vec<ComplexLit>,
    },
    /// `gamma0` times the GHZ state plus computational basis states `[index, weight]`.
    Mixed {
        gamma0: f64,
        diagonal: Vec<(usize, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<ComplexLit>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<ComplexLit>,
    },
    /// The same local state on every factor, `|+>` by default.
    Product {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vector: Option<Vec<ComplexLit>>,
    },
    Matrix {
        matrix: MatrixLit,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelName {
    Dephasing,
    Depolarizing,
    AmplitudeDamping,
    Erasure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub channel: ChannelName,
    /// Strength grid; `0, 0.1, ..., 1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(default = "default_stage")]
    pub stage: NoiseStage,
    /// Depolarizing defaults to the global map; every other channel is per node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locality: Option<Locality>,
}

fn default_stage() -> NoiseStage {
    NoiseStage::BeforeSampling
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    XBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub shots: u64,
    pub repetitions: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            shots: 100_000,
            repetitions: 200,
        }
    }
}

/// One scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// When present it must match the subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    pub d: usize,
    #[serde(default)]
    pub encoding: EncodingSpec,
    pub initial_state: InitialStateSpec,
    /// One value per node; `pi / (2 d)` each when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<Measurement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub order: String,
    pub data: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_real(m: &RMatrix) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            order: "row_major".into(),
            data,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedVerdict {
    pub check: String,
    pub verdict: PrivacyVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweepRecord {
    pub channel: String,
    pub locality: Locality,
    pub stage: NoiseStage,
    /// Largest `||[A_k, U]||` at strength 0.5; absent for global maps.
    pub kraus_commutator_norm: Option<f64>,
    /// Largest map-level defect `||E(U X U^dagger) - U E(X) U^dagger||` at strength 0.5.
    pub covariance_defect: f64,
    pub points: Vec<NoisePoint>,
}

/// Run-dependent fields, kept apart from the reproducible body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool_version: String,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub command: Task,
    /// Effective scenario after command-line overrides.
    pub scenario: Scenario,
    pub qfim: Option<MatrixRecord>,
    pub cfim: Option<MatrixRecord>,
    pub cfim_vs_qfim: Option<FisherOrdering>,
    /// QFI of `w^T Theta` after reparametrization.
    pub target_qfi: Option<f64>,
    /// `w^T Q^+ w`, the single-shot variance bound for `w^T Theta`.
    pub target_variance_bound: Option<f64>,
    pub verdicts: Vec<NamedVerdict>,
    pub average_condition: Option<bool>,
    /// Rank-one and derivative-norm verdicts coincide.
    pub criteria_agree: Option<bool>,
    pub continuity: Vec<ContinuityBoundReport>,
    pub noise: Option<NoiseSweepRecord>,
    pub estimation: Option<EstimationResult>,
    pub certified: Option<bool>,
    pub warnings: Vec<String>,
}

impl ReportBody {
    fn empty(command: Task, scenario: Scenario) -> Self {
        Self {
            command,
            scenario,
            qfim: None,
            cfim: None,
            cfim_vs_qfim: None,
            target_qfi: None,
            target_variance_bound: None,
            verdicts: Vec::new(),
            average_condition: None,
            criteria_agree: None,
            continuity: Vec::new(),
            noise: None,
            estimation: None,
            certified: None,
            warnings: Vec::new(),
        }
    }

    /// Canonical JSON of the body alone.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report bodies serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub body: ReportBody,
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub report: Report,
    pub csv: Option<String>,
    pub exit_code: i32,
    pub summary: String,
}

/// Scenario parse or consistency failure.
#[derive(Debug)]
pub struct InvalidInput(pub String);

impl std::fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn parse_scenario(text: &str) -> std::result::Result<Scenario, InvalidInput> {
    serde_json::from_str(text).map_err(|e| InvalidInput(format!("scenario schema error: {e}")))
}

pub fn load_scenario(path: &Path) -> std::result::Result<Scenario, InvalidInput> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InvalidInput(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

fn complex(z: ComplexLit) -> num_complex::Complex64 {
    c(z[0], z[1])
}

fn matrix_from_literal(lit: &MatrixLit, what: &str) -> Result<CMatrix> {
    let n = lit.len();
    if n == 0 || lit.iter().any(|row| row.len() != n) {
        return arg(format!(
            "{what} must be a non-empty square array of [re, im] pairs"
        ));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| complex(lit[i][j])))
}

fn check_tolerances(t: &Tolerances) -> Result<()> {
    let all = [
        t.hermitian,
        t.trace,
        t.psd,
        t.rank_rel,
        t.qfim_consistency,
        t.privacy,
        t.probability_floor,
        t.pinv_rel,
        t.fd_step,
        t.commutation,
        t.structural_zero,
    ];
    if all.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return arg("tolerances must be positive and finite");
    }
    Ok(())
}

/// Model, target function and parameters described by a scenario.
pub struct Setup {
    pub model: NetworkModel,
    pub generator: CMatrix,
    pub weights: Vec<usize>,
    pub target: WeightVector,
    pub theta: ParamVector,
}

pub fn build_setup(sc: &Scenario) -> Result<Setup> {
    check_tolerances(&sc.tolerances)?;
    if sc.d == 0 {
        return arg("d must be at least 1");
    }
    let generator = match &sc.encoding.generator {
        GeneratorSpec::Label(l) if l == "sigma_z_half" => qcore::sigma_z_half(),
        GeneratorSpec::Label(l) => return arg(format!("unknown generator label {l:?}")),
        GeneratorSpec::Matrix { matrix } => matrix_from_literal(matrix, "generator")?,
    };
    let local = generator.nrows();
    let weights = sc.encoding.weights.clone().unwrap_or_else(|| vec![1; sc.d]);
    if weights.len() != sc.d {
        return arg(format!(
            "encoding.weights has {} entries, d = {}",
            weights.len(),
            sc.d
        ));
    }
    if weights.contains(&0) {
        return arg("encoding.weights must be positive integers");
    }
    let factors: usize = weights.iter().sum();
    let weight_vec = WeightVector::new(weights.iter().map(|&x| x as f64).collect())?;
    let target = match &sc.encoding.target {
        Some(t) => WeightVector::new(t.clone())?,
        None => {
            let total = factors as f64;
            WeightVector::new(weights.iter().map(|&x| x as f64 / total).collect())?
        }
    };
    if target.len() != sc.d {
        return arg(format!(
            "encoding.target has {} entries, d = {}",
            target.len(),
            sc.d
        ));
    }
    let theta = match &sc.theta {
        Some(t) if t.len() != sc.d => {
            return arg(format!("theta has {} entries, d = {}", t.len(), sc.d))
        }
        Some(t) => ParamVector::new(t.clone())?,
        None => ParamVector::new(vec![std::f64::consts::PI / (2.0 * sc.d as f64); sc.d])?,
    };

    let qubit_only = |kind: &str| -> Result<()> {
        if local != 2 {
            return arg(format!("{kind} initial states need a qubit generator"));
        }
        Ok(())
    };
    let ghz = |alpha: &Option<ComplexLit>, beta: &Option<ComplexLit>| -> Result<DensityState> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        protocol::ghz_state(
            factors,
            complex(alpha.unwrap_or([h, 0.0])),
            complex(beta.unwrap_or([h, 0.0])),
        )
    };
    let rho0 = match &sc.initial_state {
        InitialStateSpec::Ghz { alpha, beta } => {
            qubit_only("ghz")?;
            ghz(alpha, beta)?
        }
        InitialStateSpec::Mixed {
            gamma0,
            diagonal,
            alpha,
            beta,
        } => {
            qubit_only("mixed")?;
            protocol::mixed_private_state(*gamma0, &ghz(alpha, beta)?, diagonal)?
        }
        InitialStateSpec::WeightedEigen { coeffs } => {
            if coeffs.len() != local {
                return arg(format!(
                    "weighted_eigen needs {local} coefficients, got {}",
                    coeffs.len()
                ));
            }
            let spec = qcore::eig_hermitian(&generator)?;
            let vecs: Vec<CVector> = spec
                .eigenvectors
                .column_iter()
                .map(|col| col.into_owned())
                .collect();
            let cs: Vec<_> = coeffs.iter().map(|&z| complex(z)).collect();
            protocol::weighted_eigen_state(&weight_vec, &cs, &vecs)?
        }
        InitialStateSpec::Product { vector } => {
            let v = match vector {
                Some(v) => CVector::from_iterator(v.len(), v.iter().map(|&z| complex(z))),
                None => CVector::from_element(local, c(1.0 / (local as f64).sqrt(), 0.0)),
            };
            if v.len() != local {
                return arg(format!(
                    "product vector has {} entries, generator is {local}x{local}",
                    v.len()
                ));
            }
            DensityState::pure(
                &qcore::tensor_vec(&vec![v; factors]),
                NodeDims::new(vec![local; factors])?,
            )?
        }
        InitialStateSpec::Matrix { matrix } => DensityState::with_tolerances(
            matrix_from_literal(matrix, "initial_state.matrix")?,
            NodeDims::new(vec![local; factors])?,
            &sc.tolerances,
        )?,
    };
    let model = NetworkModel::multiplicative(&generator, &weights, rho0)?;
    Ok(Setup {
        model,
        generator,
        weights,
        target,
        theta,
    })
}

fn channel_for(spec: &NoiseSpec, eta: f64) -> Result<NoiseChannel> {
    let locality = spec.locality.unwrap_or(match spec.channel {
        ChannelName::Depolarizing => Locality::GlobalMap,
        _ => Locality::PerNode,
    });
    match (spec.channel, locality) {
        (ChannelName::Depolarizing, Locality::GlobalMap) => NoiseChannel::global_depolarizing(eta),
        (ChannelName::Depolarizing, Locality::PerNode) => NoiseChannel::depolarizing(eta),
        (ChannelName::Dephasing, Locality::PerNode) => NoiseChannel::dephasing(eta),
        (ChannelName::AmplitudeDamping, Locality::PerNode) => NoiseChannel::amplitude_damping(eta),
        (ChannelName::Erasure, Locality::PerNode) => NoiseChannel::erasure(eta),
        (other, Locality::GlobalMap) => arg(format!("{other:?} has no global-map form")),
    }
}

fn eta_grid(spec: &NoiseSpec) -> Result<Vec<f64>> {
    let mut grid = spec
        .eta
        .clone()
        .unwrap_or_else(|| (0..=10).map(|k| k as f64 / 10.0).collect());
    if grid.is_empty() {
        return arg("noise.eta must not be empty");
    }
    if grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return arg("noise.eta values must lie in [0, 1]");
    }
    grid.sort_by(f64::total_cmp);
    Ok(grid)
}

struct Analysis {
    qfim: FisherMatrix,
    verdicts: Vec<NamedVerdict>,
    average: Option<bool>,
    agree: bool,
}

fn analyze_core(setup: &Setup, tol: &Tolerances, body: &mut ReportBody) -> Result<Analysis> {
    let (rho, drho) = model::state_and_derivatives(&setup.model, &setup.theta)?;
    let q = fisher::qfim_with_rank_tol(&rho, &drho, None)?.at(setup.theta.clone());
    let w = &setup.target;
    let rank_one = privacy::rank_one_privacy_check(&q, w, tol.privacy)?;
    let deriv = privacy::derivative_norm_condition(&drho, w, tol.privacy)?;
    let unitary = privacy::unitary_privacy_condition(
        &setup.model,
        &setup.theta,
        EvaluationState::Initial,
        w,
        tol.privacy,
    )?;
    let agree = rank_one.is_private == deriv.is_private;
    if !agree {
        body.warnings
            .push("rank-one QFIm check and derivative trace-norm condition disagree".into());
    }
    let average = (setup.model.d() >= 2)
        .then(|| privacy::average_privacy_condition(&drho, tol.privacy))
        .transpose()?;
    let verdicts = vec![
        NamedVerdict {
            check: "rank_one_qfim".into(),
            verdict: rank_one,
        },
        NamedVerdict {
            check: "derivative_trace_norm".into(),
            verdict: deriv,
        },
        NamedVerdict {
            check: "generator_commutator".into(),
            verdict: unitary,
        },
    ];

    body.qfim = Some(MatrixRecord::from_real(q.entries()));
    let reparam = fisher::reparametrize(&q, &fisher::complete_b_matrix(w))?;
    body.target_qfi = Some(reparam.entries()[(0, 0)]);
    body.target_variance_bound = fisher::crb_covariance_bound(&q, 1)?.variance_bound(w);
    for mu in 0..setup.model.d() {
        for nu in mu + 1..setup.model.d() {
            let r = privacy::continuity_gap_bound(&rho, &drho, mu, mu, mu, nu)?;
            if !r.holds(1e-12) {
                body.warnings
                    .push(format!("continuity bound violated at {:?}", r.indices));
            }
            body.continuity.push(r);
        }
    }
    Ok(Analysis {
        qfim: q,
        verdicts,
        average,
        agree,
    })
}

fn meta(start: Instant) -> ReportMeta {
    ReportMeta {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    }
}

fn verdict_line(out: &mut String, name: &str, ok: bool, color: bool) {
    let word = match (ok, color) {
        (true, true) => "\x1b[32mPASS\x1b[0m",
        (false, true) => "\x1b[31mFAIL\x1b[0m",
        (true, false) => "PASS",
        (false, false) => "FAIL",
    };
    let _ = writeln!(out, "{word} {name}");
}

/// QFIm, optional CFIm, privacy verdicts and continuity spot checks.
pub fn cmd_analyze(sc: &Scenario) -> Result<CommandOutcome> {
    let start = Instant::now();
    let setup = build_setup(sc)?;
    let mut body = ReportBody::empty(Task::Analyze, sc.clone());
    let analysis = analyze_core(&setup, &sc.tolerances, &mut body)?;
    if sc.measurement == Some(Measurement::XBasis) {
        if setup.model.dims().as_slice().iter().any(|&k| k != 2)
            || setup.weights.iter().any(|&w| w != 1)
        {
            return arg("x_basis measurement needs one qubit per node");
        }
        let (rho, drho) = model::state_and_derivatives(&setup.model, &setup.theta)?;
        let f = fisher::cfim(&rho, &protocol::x_basis_povm(setup.model.d())?, &drho)?;
        body.cfim_vs_qfim = Some(fisher::compare_cfim_qfim(&f, &analysis.qfim)?);
        body.cfim = Some(MatrixRecord::from_real(f.entries()));
    }
    body.average_condition = analysis.average;
    body.criteria_agree = Some(analysis.agree);
    let color = use_color();
    let mut summary = format!("scenario {}\n", sc.name);
    for v in &analysis.verdicts {
        verdict_line(&mut summary, &v.check, v.verdict.is_private, color);
    }
    body.verdicts = analysis.verdicts;
    Ok(CommandOutcome {
        report: Report {
            meta: meta(start),
            body,
        },
        csv: None,
        exit_code: EXIT_OK,
        summary,
    })
}

fn sweep(sc: &Scenario, setup: &Setup, spec: &NoiseSpec) -> Result<NoiseSweepRecord> {
    let grid = eta_grid(spec)?;
    let probe = channel_for(spec, 0.5)?;
    let kraus_norm = match probe.locality() {
        Locality::PerNode => Some(noise::sampling_commutator_norm(
            &probe,
            &setup.model,
            &setup.theta,
        )?),
        Locality::GlobalMap => None,
    };
    let defect = noise::sampling_covariance_defect(&probe, &setup.model, &setup.theta)?;
    let points = grid
        .par_iter()
        .map(|&eta| {
            let ch = channel_for(spec, eta)?;
            noise::evaluate_noise_point(
                &setup.model,
                &ch,
                spec.stage,
                &setup.theta,
                &setup.target,
                sc.tolerances.privacy,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseSweepRecord {
        channel: probe.name().to_string(),
        locality: probe.locality(),
        stage: spec.stage,
        kraus_commutator_norm: kraus_norm,
        covariance_defect: defect,
        points,
    })
}

/// CSV with columns `eta,epsilon,epsilon_bound,fidelity,coherence_abs,verdict`.
pub fn sweep_csv(points: &[NoisePoint]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::Argument(format!("csv: {e}"));
    w.write_record([
        "eta",
        "epsilon",
        "epsilon_bound",
        "fidelity",
        "coherence_abs",
        "verdict",
    ])
    .map_err(io)?;
    for p in points {
        w.write_record([
            p.eta.to_string(),
            format!("{:e}", p.epsilon),
            format!("{:e}", p.epsilon_bound),
            p.fidelity.to_string(),
            p.coherence_abs.to_string(),
            if p.verdict.is_private {
                "private"
            } else {
                "not_private"
            }
            .to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Argument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Epsilon, fidelity bound, coherence and verdict over the noise grid.
pub fn cmd_noise_sweep(sc: &Scenario) -> Result<CommandOutcome> {
    let start = Instant::now();
    let setup = build_setup(sc)?;
    let spec = sc
        .noise
        .as_ref()
        .ok_or_else(|| Error::Argument("noise-sweep needs a noise section".into()))?;
    let record = sweep(sc, &setup, spec)?;
    let csv = sweep_csv(&record.points)?;
    let mut body = ReportBody::empty(Task::NoiseSweep, sc.clone());
    let worst = record.points.iter().fold(0.0f64, |m, p| m.max(p.epsilon));
    let private = record
        .points
        .iter()
        .filter(|p| p.verdict.is_private)
        .count();
    let summary = format!(
        "scenario {}: {} ({:?}, {:?}) over {} points, max epsilon {worst:.3e}, private at {private}\n",
        sc.name,
        record.channel,
        record.locality,
        record.stage,
        record.points.len()
    );
    body.noise = Some(record);
    Ok(CommandOutcome {
        report: Report {
            meta: meta(start),
            body,
        },
        csv: Some(csv),
        exit_code: EXIT_OK,
        summary,
    })
}

fn is_balanced_ghz(setup: &Setup) -> bool {
    let rho = setup.model.initial_state();
    let n = rho.dim();
    let target = protocol::ghz_balanced(setup.model.d()).map(|g| g.into_matrix());
    n == 1 << setup.model.d()
        && target.is_ok_and(|t| qcore::max_abs_entry(&(rho.matrix() - t)) < 1e-12)
}

/// Monte Carlo average estimation with the X-basis parity measurement.
pub fn cmd_simulate(sc: &Scenario) -> Result<CommandOutcome> {
    let start = Instant::now();
    let setup = build_setup(sc)?;
    let sigma_z = matches!(&sc.encoding.generator, GeneratorSpec::Label(l) if l == "sigma_z_half");
    if !sigma_z || setup.weights.iter().any(|&w| w != 1) || !is_balanced_ghz(&setup) {
        return arg("simulate supports the balanced GHZ probe with sigma_z_half and unit weights");
    }
    let sim = sc.simulation.unwrap_or_default();
    let est = protocol::run_experiment(
        setup.model.d(),
        &setup.theta,
        sim.shots,
        sim.repetitions,
        sc.seed,
    )?;
    let mut body = ReportBody::empty(Task::Simulate, sc.clone());
    if let Some(w) = &est.quadrant_warning {
        body.warnings.push(w.clone());
    }
    let summary = format!(
        "scenario {}: theta_bar {:.6} estimate {:.6}, mse*M*d^2 = {:.4} ({} x {} shots)\n",
        sc.name, est.theta_bar, est.theta_bar_hat, est.efficiency_ratio, est.repetitions, est.shots
    );
    body.estimation = Some(est);
    Ok(CommandOutcome {
        report: Report {
            meta: meta(start),
            body,
        },
        csv: None,
        exit_code: EXIT_OK,
        summary,
    })
}

/// Every privacy check (plus the noisy pipeline when configured) must pass.
pub fn cmd_certify(sc: &Scenario) -> Result<CommandOutcome> {
    let start = Instant::now();
    let setup = build_setup(sc)?;
    let mut body = ReportBody::empty(Task::Certify, sc.clone());
    let analysis = analyze_core(&setup, &sc.tolerances, &mut body)?;
    let color = use_color();
    let mut summary = format!("scenario {}\n", sc.name);
    let mut ok = true;
    for v in &analysis.verdicts {
        verdict_line(&mut summary, &v.check, v.verdict.is_private, color);
        ok &= v.verdict.is_private;
    }
    let uniform = setup.target.as_slice().windows(2).all(|p| p[0] == p[1]);
    if let (Some(avg), true) = (analysis.average, uniform) {
        verdict_line(&mut summary, "average_condition", avg, color);
        ok &= avg;
    }
    if let Some(spec) = &sc.noise {
        let record = sweep(sc, &setup, spec)?;
        for p in &record.points {
            let name = format!("{} eta={} ({:?})", record.channel, p.eta, record.stage);
            verdict_line(&mut summary, &name, p.verdict.is_private, color);
            ok &= p.verdict.is_private;
        }
        body.noise = Some(record);
    }
    body.average_condition = analysis.average;
    body.criteria_agree = Some(analysis.agree);
    body.verdicts = analysis.verdicts;
    body.certified = Some(ok);
    let _ = writeln!(
        summary,
        "{}",
        if ok { "certified" } else { "not certified" }
    );
    let exit_code = if ok { EXIT_OK } else { EXIT_FAIL };
    Ok(CommandOutcome {
        report: Report {
            meta: meta(start),
            body,
        },
        csv: None,
        exit_code,
        summary,
    })
}

/// Dispatches a validated scenario; `task` in the file must agree with `command`.
pub fn run_task(
    command: Task,
    sc: &Scenario,
) -> std::result::Result<CommandOutcome, (i32, String)> {
    if let Some(t) = sc.task {
        if t != command {
            return Err((
                EXIT_INVALID,
                format!(
                    "scenario task is {}, command is {}",
                    t.label(),
                    command.label()
                ),
            ));
        }
    }
    let res = match command {
        Task::Analyze => cmd_analyze(sc),
        Task::NoiseSweep => cmd_noise_sweep(sc),
        Task::Simulate => cmd_simulate(sc),
        Task::Certify => cmd_certify(sc),
    };
    res.map_err(|e| {
        let code = match e {
            Error::Numerical(_) => EXIT_FAIL,
            Error::Argument(_) | Error::UnsupportedEncoding(_) => EXIT_INVALID,
        };
        (code, e.to_string())
    })
}

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stdout().is_terminal()
}

#[derive(Debug, Parser)]
#[command(
    name = "qnet-privacy",
    version,
    about = "Privacy analysis for networks of quantum sensors"
)]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; noise sweeps also write the CSV next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the privacy tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fisher matrices, privacy verdicts and continuity checks.
    Analyze(CommonArgs),
    /// Privacy quantities over a grid of noise strengths.
    NoiseSweep(CommonArgs),
    /// Monte Carlo estimation of the network average.
    Simulate(CommonArgs),
    /// Exit 0 iff every configured privacy check passes.
    Certify(CommonArgs),
}

impl Command {
    fn split(&self) -> (Task, &CommonArgs) {
        match self {
            Self::Analyze(a) => (Task::Analyze, a),
            Self::NoiseSweep(a) => (Task::NoiseSweep, a),
            Self::Simulate(a) => (Task::Simulate, a),
            Self::Certify(a) => (Task::Certify, a),
        }
    }
}

fn write_outputs(outcome: &CommandOutcome, out: Option<&Path>) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(&outcome.report).expect("reports serialize");
    match out {
        Some(path) => {
            std::fs::write(path, json + "\n")?;
            if let Some(csv) = &outcome.csv {
                std::fs::write(path.with_extension("csv"), csv)?;
            }
            print!("{}", outcome.summary);
        }
        None => {
            println!("{json}");
            eprint!("{}", outcome.summary);
        }
    }
    std::io::stdout().flush()
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    let (task, common) = args.command.split();
    let mut scenario = match load_scenario(&common.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    if let Some(tol) = common.tol {
        if !(tol.is_finite() && tol > 0.0) {
            eprintln!("error: --tol must be positive and finite");
            return EXIT_INVALID;
        }
        scenario.tolerances.privacy = tol;
    }
    match run_task(task, &scenario) {
        Ok(outcome) => match write_outputs(&outcome, common.out.as_deref()) {
            Ok(()) => outcome.exit_code,
            Err(e) => {
                eprintln!("error: cannot write output: {e}");
                EXIT_FAIL
            }
        },
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}
