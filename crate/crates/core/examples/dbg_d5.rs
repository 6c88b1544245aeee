use membrane_core::gibbs::ModelSpec;
use membrane_core::lattice::*;
use membrane_core::limits::variance_estimate;
use membrane_core::operators::GreenCache;
use membrane_core::potential::Potential;
use membrane_core::sampler::*;
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let pot = Potential::logcosh(1.0, 0.5).unwrap();
    for l in [3i64, 4] {
        let geom = Arc::new(build_geometry(5, l).unwrap());
        let cache = GreenCache::new(geom.clone());
        let x0 = geom.interior_index(&vec![0; 5]).unwrap();
        let mut ap = LatticeField::indicator(&geom, DomainTag::Box, x0);
        for v in ap.values_mut() {
            *v *= 0.5;
        }
        let a = cache.dirichlet_solve(&ap).unwrap().to_tag(&geom, DomainTag::Box);
        let spec = ModelSpec::new(geom.clone(), pot);
        let config = SamplerConfig {
            keep: 1000,
            thin: 1,
            burn_in: 300,
            chains: 2,
            seed: 3,
            precondition: Preconditioner::Identity,
            ..Default::default()
        };
        let obs = [TrackedObservable {
            name: "a_eta".into(),
            kind: ObsKind::LinearEta(a.values().to_vec()),
        }];
        let t0 = Instant::now();
        let run = sample_q(&spec, &cache, &config, &obs, false).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let d0 = &run.diagnostics[0];
        let var = variance_estimate(&run.observables[0].per_chain);
        println!(
            "L={l}: wall={dt:.1}s ms/step={:.3} acc={:.3} step={:.4} iact={:.1} ess={:.0} var={:.6}±{:.6}",
            1000.0 * dt / 2600.0,
            run.acc_rate,
            run.final_steps[0],
            d0.iact,
            d0.ess,
            var.value,
            var.se
        );
    }
}
