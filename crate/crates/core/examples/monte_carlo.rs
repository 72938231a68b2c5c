//! Parity-measurement estimation of the network average against the Cramer-Rao bound.
//!
//!     cargo run --release --example monte_carlo

use std::f64::consts::PI;

use qnet_privacy::model::ParamVector;
use qnet_privacy::protocol;

fn main() -> qnet_privacy::Result<()> {
    println!(
        "{:>2} {:>8} {:>10} {:>11} {:>11} {:>9}",
        "d", "shots", "theta_bar", "mse", "crb", "mse/crb"
    );
    for d in 2..=5 {
        for shots in [1_000u64, 10_000, 100_000] {
            let theta = ParamVector::new(vec![PI / (2.0 * d as f64); d])?;
            let r = protocol::run_experiment(d, &theta, shots, 200, 1)?;
            println!(
                "{d:>2} {shots:>8} {:>10.6} {:>11.3e} {:>11.3e} {:>9.3}",
                r.theta_bar, r.mse, r.crb, r.efficiency_ratio
            );
        }
    }
    Ok(())
}
