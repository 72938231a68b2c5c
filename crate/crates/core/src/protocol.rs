//! Private estimation of the network average with a GHZ probe.
//!
//! The probe `alpha |0..0> + beta |1..1>` is imprinted by `exp(-i theta_mu sigma_z / 2)`
//! on every node and read out with a product X-basis measurement. Outcome
//! strings use `0` for `|+>` and `1` for `|->`, node 0 first. The product of
//! the `+-1` outcomes has mean `cos(d theta_bar)`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::fisher::Povm;
use crate::model::{ParamVector, WeightVector};
use crate::qcore::{self, c, CMatrix, CVector, DensityState, NodeDims, ZERO};

/// Largest network the sampler handles (outcome counts are kept per string).
pub const MAX_SAMPLED_NODES: usize = 20;

/// Projector onto `alpha |0>^d + beta |1>^d`.
pub fn ghz_state(d: usize, alpha: Complex64, beta: Complex64) -> Result<DensityState> {
    if d == 0 {
        return arg("GHZ state needs at least one node");
    }
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return arg(format!("|alpha|^2 + |beta|^2 = {norm}, expected 1"));
    }
    let n = 1usize << d;
    let mut psi = CVector::from_element(n, ZERO);
    psi[0] += alpha;
    psi[n - 1] += beta;
    DensityState::pure(&psi, NodeDims::qubits(d))
}

/// Balanced GHZ state `(|0..0> + |1..1>)/sqrt 2`.
pub fn ghz_balanced(d: usize) -> Result<DensityState> {
    let a = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ghz_state(d, a, a)
}

/// Projector onto `sum_i c_i (x)_mu |v_i>^{(x) w_mu}` over `sum_mu w_mu` factors.
pub fn weighted_eigen_state(
    w: &WeightVector,
    coeffs: &[Complex64],
    eigvecs: &[CVector],
) -> Result<DensityState> {
    let weights = w.as_integers()?;
    if weights.contains(&0) {
        return arg("weights must be at least one");
    }
    if coeffs.is_empty() || coeffs.len() != eigvecs.len() {
        return arg("need one coefficient per eigenvector");
    }
    let norm: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return arg(format!("coefficients have squared norm {norm}, expected 1"));
    }
    let local = eigvecs[0].len();
    if local < 2 || eigvecs.iter().any(|v| v.len() != local) {
        return arg("eigenvectors must share one local dimension of at least 2");
    }
    let factors: usize = weights.iter().sum();
    let mut psi = CVector::from_element(local.pow(factors as u32), ZERO);
    for (&ci, v) in coeffs.iter().zip(eigvecs) {
        psi += qcore::tensor_vec(&vec![v.clone(); factors]) * ci;
    }
    let n = psi.norm();
    if (n - 1.0).abs() > 1e-9 {
        return arg(format!(
            "superposition has norm {n}; eigenvectors must be orthonormal"
        ));
    }
    DensityState::pure(&psi, NodeDims::new(vec![local; factors])?)
}

/// `gamma0 |Phi><Phi| + sum_i gamma_i |i><i|` with computational basis indices `i`.
pub fn mixed_private_state(
    gamma0: f64,
    ghz: &DensityState,
    diag_weights: &[(usize, f64)],
) -> Result<DensityState> {
    let n = ghz.dim();
    if gamma0 < 0.0 || diag_weights.iter().any(|&(_, g)| g.is_nan() || g < 0.0) {
        return arg("mixture weights must be non-negative");
    }
    let total = gamma0 + diag_weights.iter().map(|&(_, g)| g).sum::<f64>();
    if (total - 1.0).abs() > 1e-9 {
        return arg(format!("mixture weights sum to {total}, expected 1"));
    }
    let mut m = ghz.matrix().scale(gamma0);
    for &(i, g) in diag_weights {
        if i >= n {
            return arg(format!("basis index {i} out of range for dimension {n}"));
        }
        m[(i, i)] += c(g, 0.0);
    }
    DensityState::new(m, ghz.dims().clone())
}

fn parse_outcome(outcome: &str) -> Result<u32> {
    let mut ones = 0;
    for ch in outcome.chars() {
        match ch {
            '0' => {}
            '1' => ones += 1,
            other => return arg(format!("outcome strings use '0' and '1', found {other:?}")),
        }
    }
    Ok(ones)
}

/// `+1` for an even number of `|->` outcomes, `-1` otherwise.
pub fn parity(outcome: &str) -> Result<i32> {
    Ok(if parse_outcome(outcome)? % 2 == 0 {
        1
    } else {
        -1
    })
}

/// `p(x) = (1 + pi_x cos(d theta_bar)) / 2^d` for one outcome string of length `d`.
pub fn parity_probability(d: usize, theta_bar: f64, outcome: &str) -> Result<f64> {
    if outcome.chars().count() != d {
        return arg(format!("outcome {outcome:?} does not have {d} symbols"));
    }
    let pi = parity(outcome)? as f64;
    Ok((1.0 + pi * (d as f64 * theta_bar).cos()) / (1u64 << d) as f64)
}

/// Bit string of `x` over `d` nodes, node 0 first.
pub fn outcome_string(x: usize, d: usize) -> String {
    (0..d)
        .map(|k| {
            if (x >> (d - 1 - k)) & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

/// Product X-basis measurement, effect `x` matching [`outcome_string`]`(x, d)`.
pub fn x_basis_povm(d: usize) -> Result<Povm> {
    if d == 0 {
        return arg("measurement needs at least one node");
    }
    let h = c(0.5, 0.0);
    let plus = CMatrix::from_element(2, 2, h);
    let minus = CMatrix::from_row_slice(2, 2, &[h, -h, -h, h]);
    let effects = (0..1usize << d)
        .map(|x| {
            let factors: Vec<CMatrix> = outcome_string(x, d)
                .chars()
                .map(|b| {
                    if b == '0' {
                        plus.clone()
                    } else {
                        minus.clone()
                    }
                })
                .collect();
            qcore::tensor(&factors)
        })
        .collect::<Result<Vec<_>>>()?;
    Povm::new(effects)
}

/// Counts of sampled outcome strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSample {
    pub d: usize,
    pub shots: u64,
    pub seed: u64,
    pub counts: BTreeMap<String, u64>,
}

impl OutcomeSample {
    /// Empirical mean of the outcome parity.
    pub fn mean_parity(&self) -> f64 {
        let mut acc = 0i64;
        for (s, &n) in &self.counts {
            let sign = if s.bytes().filter(|&b| b == b'1').count() % 2 == 0 {
                1
            } else {
                -1
            };
            acc += sign * n as i64;
        }
        acc as f64 / self.shots as f64
    }
}

fn check_sampling(d: usize, shots: u64) -> Result<()> {
    if d == 0 || d > MAX_SAMPLED_NODES {
        return arg(format!(
            "sampling supports 1..={MAX_SAMPLED_NODES} nodes, got {d}"
        ));
    }
    if shots == 0 {
        return arg("need at least one shot");
    }
    Ok(())
}

/// Raw per-string counts, indexed by [`outcome_string`] order.
fn sample_counts(d: usize, theta_bar: f64, shots: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_even = 0.5 * (1.0 + (d as f64 * theta_bar).cos());
    let free_mask = (1u32 << (d - 1)) - 1;
    let mut counts = vec![0u64; 1 << d];
    for _ in 0..shots {
        let odd = rng.random::<f64>() >= p_even;
        let free = rng.random::<u32>() & free_mask;
        let last = (free.count_ones() % 2 == 1) ^ odd;
        counts[((free << 1) | last as u32) as usize] += 1;
    }
    counts
}

/// `shots` i.i.d. X-basis outcomes of the evolved GHZ state at `theta`.
///
/// Each shot draws the parity first, then a uniform string of that parity
/// (ChaCha8 stream seeded with `seed`).
pub fn sample_outcomes(
    d: usize,
    theta: &ParamVector,
    shots: u64,
    seed: u64,
) -> Result<OutcomeSample> {
    check_sampling(d, shots)?;
    if theta.len() != d {
        return arg(format!("expected {d} parameters, got {}", theta.len()));
    }
    let raw = sample_counts(d, theta.mean(), shots, seed);
    let counts = raw
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(x, &n)| (outcome_string(x, d), n))
        .collect();
    Ok(OutcomeSample {
        d,
        shots,
        seed,
        counts,
    })
}

/// `arccos(mean parity) / d`, valid for `d theta_bar` in `(0, pi)`.
pub fn estimate_mean(sample: &OutcomeSample) -> f64 {
    sample.mean_parity().clamp(-1.0, 1.0).acos() / sample.d as f64
}

fn estimate_from_counts(d: usize, counts: &[u64], shots: u64) -> f64 {
    let acc: i64 = counts
        .iter()
        .enumerate()
        .map(|(x, &n)| {
            if x.count_ones() % 2 == 0 {
                n as i64
            } else {
                -(n as i64)
            }
        })
        .sum();
    (acc as f64 / shots as f64).clamp(-1.0, 1.0).acos() / d as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub d: usize,
    pub theta_bar: f64,
    /// Mean of the per-repetition estimates.
    pub theta_bar_hat: f64,
    pub bias: f64,
    pub mse: f64,
    /// `1 / (M d^2)`.
    pub crb: f64,
    /// `mse / crb`.
    pub efficiency_ratio: f64,
    pub shots: u64,
    pub repetitions: u64,
    pub seed: u64,
    pub quadrant_warning: Option<String>,
}

/// `R` independent sample-and-estimate rounds; round `r` uses seed `seed + r`.
pub fn run_experiment(
    d: usize,
    theta: &ParamVector,
    shots: u64,
    repetitions: u64,
    seed: u64,
) -> Result<EstimationResult> {
    check_sampling(d, shots)?;
    if repetitions == 0 {
        return arg("need at least one repetition");
    }
    if theta.len() != d {
        return arg(format!("expected {d} parameters, got {}", theta.len()));
    }
    let theta_bar = theta.mean();
    let estimates: Vec<f64> = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            estimate_from_counts(
                d,
                &sample_counts(d, theta_bar, shots, seed.wrapping_add(r)),
                shots,
            )
        })
        .collect();
    let reps = repetitions as f64;
    let mean = estimates.iter().sum::<f64>() / reps;
    let mse = estimates
        .iter()
        .map(|e| (e - theta_bar).powi(2))
        .sum::<f64>()
        / reps;
    let crb = 1.0 / (shots as f64 * (d * d) as f64);
    let phase = d as f64 * theta_bar;
    let quadrant_warning = (!(phase > 0.0 && phase < std::f64::consts::PI)).then(|| {
        format!("d * theta_bar = {phase} is outside (0, pi); the arccos estimator folds it back into that range")
    });
    Ok(EstimationResult {
        d,
        theta_bar,
        theta_bar_hat: mean,
        bias: mean - theta_bar,
        mse,
        crb,
        efficiency_ratio: mse / crb,
        shots,
        repetitions,
        seed,
        quadrant_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher;
    use crate::model::{self, NetworkModel};
    use crate::qcore::{sigma_z_half, ONE};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn ghz_constructor_examples() {
        let rho = ghz_state(3, ONE, ZERO).unwrap();
        assert_eq!(rho.matrix()[(0, 0)], ONE);
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        let g = ghz_balanced(2).unwrap();
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert!((g.matrix()[(i, j)].re - 0.5).abs() < 1e-15);
        }
        assert!(ghz_state(2, ONE, ONE).is_err());
        let skew = ghz_state(4, c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        assert!((skew.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_state_reduces_to_ghz() {
        let a = c(FRAC_1_SQRT_2, 0.0);
        let basis = [
            CVector::from_vec(vec![ONE, ZERO]),
            CVector::from_vec(vec![ZERO, ONE]),
        ];
        let s = weighted_eigen_state(&WeightVector::new(vec![1.0, 1.0]).unwrap(), &[a, a], &basis)
            .unwrap();
        assert!(qcore::max_abs_entry(&(s.matrix() - ghz_balanced(2).unwrap().matrix())) < 1e-15);
        let s3 = weighted_eigen_state(&WeightVector::new(vec![1.0, 2.0]).unwrap(), &[a, a], &basis)
            .unwrap();
        assert_eq!(s3.dims().as_slice(), &[2, 2, 2]);
        assert!(
            weighted_eigen_state(&WeightVector::new(vec![1.0, 1.5]).unwrap(), &[a, a], &basis)
                .is_err()
        );
    }

    #[test]
    fn mixed_state_weights_are_checked() {
        let g = ghz_balanced(2).unwrap();
        let m = mixed_private_state(0.5, &g, &[(1, 0.5)]).unwrap();
        assert!((m.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(mixed_private_state(0.5, &g, &[(1, 0.4)]).is_err());
        assert!(mixed_private_state(1.2, &g, &[(1, -0.2)]).is_err());
        assert!(mixed_private_state(0.5, &g, &[(4, 0.5)]).is_err());
    }

    #[test]
    fn parity_probabilities() {
        assert!((parity_probability(2, 0.0, "00").unwrap() - 0.5).abs() < 1e-15);
        assert!(parity_probability(2, 0.0, "01").unwrap().abs() < 1e-15);
        for d in 1..=5 {
            let total: f64 = (0..1 << d)
                .map(|x| parity_probability(d, 0.37, &outcome_string(x, d)).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-14);
        }
        assert!(parity_probability(2, 0.0, "0").is_err());
        assert!(parity_probability(2, 0.0, "0a").is_err());
    }

    #[test]
    fn povm_matches_closed_form() {
        for d in 1..=4 {
            let povm = x_basis_povm(d).unwrap();
            let model = NetworkModel::multiplicative(
                &sigma_z_half(),
                &vec![1; d],
                ghz_balanced(d).unwrap(),
            )
            .unwrap();
            let theta = ParamVector::new((0..d).map(|k| 0.3 + 0.2 * k as f64).collect()).unwrap();
            let rho = model::evolve(&model, &theta).unwrap();
            let p = povm.probabilities(&rho).unwrap();
            for (x, px) in p.iter().enumerate() {
                let want = parity_probability(d, theta.mean(), &outcome_string(x, d)).unwrap();
                assert!((px - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn golden_path_cfim_is_all_ones() {
        let d = 3;
        let model =
            NetworkModel::multiplicative(&sigma_z_half(), &[1, 1, 1], ghz_balanced(d).unwrap())
                .unwrap();
        let theta = ParamVector::new(vec![0.1, 0.5, 0.2]).unwrap();
        let (rho, dr) = model::state_and_derivatives(&model, &theta).unwrap();
        let f = fisher::cfim(&rho, &x_basis_povm(d).unwrap(), &dr).unwrap();
        assert!(f.max_deviation_from(&crate::qcore::RMatrix::from_element(d, d, 1.0)) < 1e-8);
    }

    #[test]
    fn zero_phase_samples_are_even() {
        let s = sample_outcomes(3, &ParamVector::zeros(3), 1000, 5).unwrap();
        assert!(s.counts.keys().all(|k| parity(k).unwrap() == 1));
        assert_eq!(s.counts.values().sum::<u64>(), 1000);
        assert_eq!(estimate_mean(&s), 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let theta = ParamVector::new(vec![0.2, 0.4]).unwrap();
        let a = sample_outcomes(2, &theta, 500, 42).unwrap();
        assert_eq!(a, sample_outcomes(2, &theta, 500, 42).unwrap());
        assert_ne!(a, sample_outcomes(2, &theta, 500, 43).unwrap());
    }

    #[test]
    fn estimator_examples() {
        let mut counts = BTreeMap::new();
        counts.insert("00".to_string(), 5);
        counts.insert("01".to_string(), 5);
        let s = OutcomeSample {
            d: 2,
            shots: 10,
            seed: 0,
            counts,
        };
        assert!((estimate_mean(&s) - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn experiment_reports_crb_and_warning() {
        let theta = ParamVector::new(vec![PI / 8.0; 4]).unwrap();
        let r = run_experiment(4, &theta, 2000, 4, 9).unwrap();
        assert!((r.crb - 1.0 / (2000.0 * 16.0)).abs() < 1e-18);
        assert!(r.quadrant_warning.is_none());
        let r2 = run_experiment(4, &theta, 4000, 4, 9).unwrap();
        assert!((r.crb / r2.crb - 2.0).abs() < 1e-12);
        let outside =
            run_experiment(2, &ParamVector::new(vec![2.0, 2.0]).unwrap(), 100, 1, 0).unwrap();
        assert!(outside.quadrant_warning.is_some());
    }
}
