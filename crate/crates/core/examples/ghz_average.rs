//! QFIm, parity CFIm and the target-function QFI for GHZ probes of growing size.
//!
//!     cargo run --example ghz_average

use qnet_privacy::fisher;
use qnet_privacy::model::{self, NetworkModel, ParamVector, WeightVector};
use qnet_privacy::privacy;
use qnet_privacy::protocol;
use qnet_privacy::qcore::sigma_z_half;

fn main() -> qnet_privacy::Result<()> {
    println!(
        "{:>2} {:>10} {:>10} {:>12} {:>10} {:>8}",
        "d", "max|Q-1|", "max|F-1|", "QFI(avg)", "d^2", "private"
    );
    for d in 2..=6 {
        let model =
            NetworkModel::multiplicative(&sigma_z_half(), &vec![1; d], protocol::ghz_balanced(d)?)?;
        let theta = ParamVector::new((0..d).map(|k| 0.2 + 0.05 * k as f64).collect())?;
        let (rho, drho) = model::state_and_derivatives(&model, &theta)?;
        let q = fisher::qfim(&rho, &drho)?;
        let f = fisher::cfim(&rho, &protocol::x_basis_povm(d)?, &drho)?;
        let w = WeightVector::average(d);
        let target = fisher::reparametrize(&q, &fisher::complete_b_matrix(&w))?.entries()[(0, 0)];
        let verdict = privacy::rank_one_privacy_check(&q, &w, 1e-8)?;
        let dev =
            |m: &nalgebra::DMatrix<f64>| m.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
        println!(
            "{d:>2} {:>10.1e} {:>10.1e} {target:>12.6} {:>10} {:>8}",
            dev(q.entries()),
            dev(f.entries()),
            d * d,
            verdict.is_private
        );
    }
    Ok(())
}
