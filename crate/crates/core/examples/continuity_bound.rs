//! Continuity bound between QFIm entries on random full-rank two-node models.
//!
//!     cargo run --example continuity_bound

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qnet_privacy::model::{self, NetworkModel, ParamVector};
use qnet_privacy::privacy;
use qnet_privacy::qcore::{self, DensityState, NodeDims};

fn random_state(rng: &mut ChaCha8Rng) -> qnet_privacy::Result<DensityState> {
    let g = DMatrix::from_fn(4, 4, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let m = &g * g.adjoint() + DMatrix::identity(4, 4) * Complex64::new(0.3, 0.0);
    let t = qcore::trace(&m).re;
    DensityState::new(
        qcore::hermitian_part(&(m / Complex64::new(t, 0.0))),
        NodeDims::qubits(2),
    )
}

fn main() -> qnet_privacy::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    println!(
        "{:>14} {:>10} {:>10} {:>10} {:>8}",
        "indices", "lhs", "rhs", "xi", "lambda"
    );
    for _ in 0..10 {
        let model =
            NetworkModel::multiplicative(&qcore::pauli_z(), &[1, 1], random_state(&mut rng)?)?;
        let theta = ParamVector::new(vec![
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ])?;
        let (rho, drho) = model::state_and_derivatives(&model, &theta)?;
        let r = privacy::continuity_gap_bound(&rho, &drho, 0, 0, 1, 1)?;
        println!(
            "{:>14} {:>10.4} {:>10.2} {:>10.2} {:>8.4}",
            format!("{:?}", r.indices),
            r.lhs,
            r.rhs,
            r.xi,
            r.lambda_min_support
        );
        assert!(r.holds(0.0));
    }
    Ok(())
}
