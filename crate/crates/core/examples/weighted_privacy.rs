//! Weighted linear functions: the eigen-superposition probe gives `Q = w w^T`,
//! while a probe built for other weights fails the rank-one check.
//!
//!     cargo run --example weighted_privacy

use num_complex::Complex64;
use qnet_privacy::fisher;
use qnet_privacy::model::{self, NetworkModel, ParamVector, WeightVector};
use qnet_privacy::privacy;
use qnet_privacy::protocol;
use qnet_privacy::qcore::{self, sigma_z_half, CVector};

fn probe(weights: &[usize]) -> qnet_privacy::Result<NetworkModel> {
    let wv = WeightVector::new(weights.iter().map(|&x| x as f64).collect())?;
    let vecs: Vec<CVector> = qcore::eig_hermitian(&sigma_z_half())?
        .eigenvectors
        .column_iter()
        .map(|v| v.into_owned())
        .collect();
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    NetworkModel::multiplicative(
        &sigma_z_half(),
        weights,
        protocol::weighted_eigen_state(&wv, &[h, h], &vecs)?,
    )
}

fn main() -> qnet_privacy::Result<()> {
    for weights in [vec![1, 2], vec![1, 2, 3], vec![2, 3]] {
        let model = probe(&weights)?;
        let theta = ParamVector::new(vec![0.3; weights.len()])?;
        let (rho, drho) = model::state_and_derivatives(&model, &theta)?;
        let q = fisher::qfim(&rho, &drho)?;
        let own = WeightVector::new(weights.iter().map(|&x| x as f64).collect())?;
        let uniform = WeightVector::average(weights.len());
        let v_own = privacy::rank_one_privacy_check(&q, &own, 1e-8)?;
        let v_avg = privacy::rank_one_privacy_check(&q, &uniform, 1e-8)?;
        println!("weights {weights:?}");
        println!(
            "  Q = {}",
            q.entries().to_string().trim_end().replace('\n', "\n      ")
        );
        println!(
            "  for its own w: private={} a={:?}",
            v_own.is_private, v_own.scale_a
        );
        println!(
            "  for the average: private={} residual={:?}",
            v_avg.is_private, v_avg.residual_rel
        );
    }
    Ok(())
}
