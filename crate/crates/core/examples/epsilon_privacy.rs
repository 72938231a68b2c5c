//! Epsilon-privacy of a GHZ probe mixed with growing amounts of a product state,
//! next to its trace-distance and fidelity bounds.
//!
//!     cargo run --example epsilon_privacy

use num_complex::Complex64;
use qnet_privacy::model::{self, NetworkModel, ParamVector};
use qnet_privacy::privacy;
use qnet_privacy::protocol;
use qnet_privacy::qcore::{self, sigma_z_half, CVector, DensityState, NodeDims};

fn main() -> qnet_privacy::Result<()> {
    let d = 3;
    let model =
        NetworkModel::multiplicative(&sigma_z_half(), &vec![1; d], protocol::ghz_balanced(d)?)?;
    let theta = ParamVector::new(vec![0.2, 0.5, -0.3])?;
    let varrho = model::evolve(&model, &theta)?;
    let plus = CVector::from_element(2, Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
    let product = DensityState::pure(&qcore::tensor_vec(&vec![plus; d]), NodeDims::qubits(d))?;
    let hp: Vec<_> = (0..d)
        .map(|mu| model::generator_derivative(&model, mu, &theta))
        .collect::<Result<_, _>>()?;

    println!(
        "{:>5} {:>10} {:>12} {:>12} {:>9}",
        "t", "epsilon", "4|H'||s-r|", "8|H|sqrt", "fidelity"
    );
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let sigma = DensityState::new(
            varrho.matrix() * Complex64::new(1.0 - t, 0.0)
                + product.matrix() * Complex64::new(t, 0.0),
            NodeDims::qubits(d),
        )?;
        let chain = privacy::epsilon_chain(&sigma, &varrho, &hp[0], &hp[1], &sigma_z_half())?;
        println!(
            "{t:>5.1} {:>10.4} {:>12.4} {:>12.4} {:>9.5}",
            chain.epsilon, chain.trace_distance_bound, chain.fidelity_bound, chain.fidelity
        );
    }
    Ok(())
}
