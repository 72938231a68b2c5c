//! Sweeps every noise channel over eta on a 3-node GHZ probe and prints the
//! privacy quantities at each point.
//!
//!     cargo run --example noise_channels

use qnet_privacy::model::{NetworkModel, ParamVector, WeightVector};
use qnet_privacy::noise::{self, NoiseChannel, NoiseStage};
use qnet_privacy::protocol::ghz_balanced;
use qnet_privacy::qcore::sigma_z_half;

type Ctor = fn(f64) -> qnet_privacy::Result<NoiseChannel>;

fn main() -> qnet_privacy::Result<()> {
    let d = 3;
    let model = NetworkModel::multiplicative(&sigma_z_half(), &vec![1; d], ghz_balanced(d)?)?;
    let theta = ParamVector::new(vec![0.3, -0.2, 0.5])?;
    let w = WeightVector::average(d);
    let channels: [(&str, Ctor); 5] = [
        ("dephasing", NoiseChannel::dephasing),
        ("erasure", NoiseChannel::erasure),
        ("global_depolarizing", NoiseChannel::global_depolarizing),
        ("depolarizing", NoiseChannel::depolarizing),
        ("amplitude_damping", NoiseChannel::amplitude_damping),
    ];

    for stage in [NoiseStage::BeforeSampling, NoiseStage::AfterSampling] {
        println!("== noise {stage:?}");
        for (name, make) in channels {
            let probe = make(0.5)?;
            let comm = noise::sampling_commutator_norm(&probe, &model, &theta).ok();
            let cov = noise::sampling_covariance_defect(&probe, &model, &theta)?;
            println!(
                "{name:<20} kraus commutator {:>9}  map covariance defect {cov:.1e}",
                comm.map_or("n/a".to_string(), |c| format!("{c:.3}"))
            );
            println!(
                "  {:>4} {:>11} {:>11} {:>9} {:>9} {:>8}",
                "eta", "epsilon", "bound", "fidelity", "coherence", "private"
            );
            for k in 0..=10 {
                let eta = k as f64 / 10.0;
                let p = noise::evaluate_noise_point(&model, &make(eta)?, stage, &theta, &w, 1e-8)?;
                println!(
                    "  {:>4.1} {:>11.3e} {:>11.3e} {:>9.6} {:>9.6} {:>8}",
                    p.eta,
                    p.epsilon,
                    p.epsilon_bound,
                    p.fidelity,
                    p.coherence_abs,
                    p.verdict.is_private
                );
            }
        }
    }
    Ok(())
}
