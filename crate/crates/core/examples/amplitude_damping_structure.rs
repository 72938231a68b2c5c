//! Amplitude damping on GHZ probes: corner coherence decay and the structure of
//! every Kraus string.
//!
//!     cargo run --example amplitude_damping_structure

use qnet_privacy::noise::{self, NoiseChannel};
use qnet_privacy::protocol;

fn main() -> qnet_privacy::Result<()> {
    for d in 2..=4 {
        let ghz = protocol::ghz_balanced(d)?;
        println!("d = {d}");
        for eta in [0.0, 0.2, 0.5, 0.8] {
            let ch = NoiseChannel::amplitude_damping(eta)?;
            let dec = noise::ad_structure_decompose(&noise::apply_channel_everywhere(&ghz, &ch)?);
            println!(
                "  eta {eta:.1}: |coherence| {:.6} expected {:.6} residual {:.1e}",
                dec.coherence_abs(),
                0.5 * (1.0 - eta).powf(d as f64 / 2.0),
                dec.residual
            );
        }
        let ch = NoiseChannel::amplitude_damping(0.3)?;
        let (mut gp, mut upper, mut zero_first, mut with_decay) = (0, 0, 0, 0);
        let mut total = 0;
        for (index, m) in noise::kraus_strings(&ch, d)? {
            let p = noise::matrix_structure_predicates(&m)?;
            total += 1;
            gp += p.is_generalized_permutation as usize;
            upper += p.is_upper_triangular as usize;
            if index.contains(&1) {
                with_decay += 1;
                zero_first += p.first_entry_zero as usize;
            }
        }
        println!("  {total} strings: {gp} generalized permutation, {upper} upper triangular, {zero_first}/{with_decay} decay strings with zero first entry");
    }
    Ok(())
}
