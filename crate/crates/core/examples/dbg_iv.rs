use membrane_core::limits::{infinite_volume_check, CompactField};
use membrane_core::potential::Potential;
use membrane_core::sampler::{Preconditioner, SamplerConfig};
use std::time::Instant;

fn main() {
    let pot = Potential::logcosh(1.0, 0.5).unwrap();
    let aprime = CompactField::single(5, 0.5);
    let config = SamplerConfig {
        keep: 6000,
        thin: 2,
        burn_in: 1000,
        chains: 2,
        seed: 77,
        precondition: Preconditioner::Identity,
        ..Default::default()
    };
    let t0 = Instant::now();
    let rep = infinite_volume_check(pot, &aprime, 5, &[2, 3, 4], &config, 8).unwrap();
    println!("wall {:.1} min, rhs {:.8}", t0.elapsed().as_secs_f64() / 60.0, rep.rhs);
    for r in &rep.rows {
        println!(
            "L={}: lhs={:.7} se={:.2e} gap={:.3e} flag={}",
            r.l, r.value, r.se, r.gap, r.flag
        );
    }
    println!(
        "monotone={} final_ok={}",
        rep.monotone_nonincreasing, rep.final_gap_within_3se
    );
}
