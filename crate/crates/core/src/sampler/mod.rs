//! MALA sampling of the interface measure through its Laplacian field.
//!
//! Chains live on the η-coordinates, where the Gibbs density is explicit and
//! the boundary part of the gradient reduces to one Dirichlet solve (scatter
//! `V'(α^z)` onto the inner neighbors of the boundary and solve). An optional
//! constant mass matrix — the exact covariance of the quadratic-potential
//! model — preconditions the proposal; without it the slowest η-mode mixes a
//! factor `~L` slower, and interface-coordinate proposals would be slower by
//! the squared spectral gap of the bi-Laplacian.

pub mod diagnostics;

use std::io::{Read, Write};
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gibbs::{EtaBatchView, GaussianOracle, ModelSpec};
use crate::lattice::{dot, DomainTag, LatticeField};
use crate::operators::GreenCache;
use diagnostics::ObservableDiagnostics;

/// Tuning knobs of one sampling run.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Initial MALA step size.
    pub step: f64,
    pub chains: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th state after burn-in.
    pub thin: usize,
    /// Kept samples per chain.
    pub keep: usize,
    pub seed: u64,
    /// Acceptance target for burn-in step-size adaptation.
    pub target_accept: f64,
    pub adapt: bool,
    /// Recompute-and-compare interval for the cached energy.
    pub audit_interval: usize,
    pub precondition: Preconditioner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    /// Gaussian mass matrix when the boundary is small enough, identity
    /// otherwise.
    Auto,
    Gaussian,
    Identity,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            step: 0.4,
            chains: 2,
            burn_in: 800,
            thin: 4,
            keep: 2000,
            seed: 1,
            target_accept: 0.574,
            adapt: true,
            audit_interval: 1024,
            precondition: Preconditioner::Auto,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::Parameter("step size must be positive".into()));
        }
        if self.keep < 1 || self.chains < 1 || self.thin < 1 {
            return Err(Error::Parameter(
                "need at least one chain, one kept sample, and thin >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Constant mass matrix for the proposal.
pub enum MassMatrix {
    Identity,
    /// Covariance of the quadratic reference model.
    Gaussian(Arc<GaussianOracle>),
}

impl MassMatrix {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            MassMatrix::Identity => v.to_vec(),
            MassMatrix::Gaussian(o) => o.covariance_apply(v),
        }
    }

    fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        match self {
            MassMatrix::Identity => v.to_vec(),
            MassMatrix::Gaussian(o) => o.precision_apply(v),
        }
    }

    fn apply_sqrt(&self, v: &[f64]) -> Vec<f64> {
        match self {
            MassMatrix::Identity => v.to_vec(),
            MassMatrix::Gaussian(o) => o.sqrt_cov_apply(v),
        }
    }
}

/// Boundary size up to which the Gaussian mass matrix is built automatically.
const AUTO_PRECOND_BOUNDARY_LIMIT: usize = 2048;

/// Build the mass matrix for a run.
pub fn build_mass_matrix(
    spec: &ModelSpec,
    cache: &GreenCache,
    choice: Preconditioner,
) -> Result<MassMatrix> {
    let use_gaussian = match choice {
        Preconditioner::Identity => false,
        Preconditioner::Gaussian => true,
        Preconditioner::Auto => {
            spec.geom.boundary_count() <= AUTO_PRECOND_BOUNDARY_LIMIT
                && spec.geom.boundary_count() * spec.geom.interior_count() <= 300_000_000
        }
    };
    if use_gaussian {
        let cbar = 0.5 * (spec.potential.c_min() + spec.potential.c_max());
        Ok(MassMatrix::Gaussian(Arc::new(GaussianOracle::new(
            cache, cbar,
        )?)))
    } else {
        Ok(MassMatrix::Identity)
    }
}

/// Energy and gradient of the η-chain target, through Dirichlet solves.
pub struct EtaTarget<'a> {
    spec: &'a ModelSpec,
    cache: &'a GreenCache,
}

impl<'a> EtaTarget<'a> {
    pub fn new(spec: &'a ModelSpec, cache: &'a GreenCache) -> Self {
        EtaTarget { spec, cache }
    }

    /// `(H, ∇H, φ, α)` at `eta`. `φ` is the interior part of the solved
    /// interface, `α` the boundary Laplacian values `Δφ(z) = φ(z̃)`.
    pub fn energy_grad(&self, eta: &[f64]) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let geom = &self.spec.geom;
        let pot = &self.spec.potential;
        let nb = geom.boundary_count();

        let mut phi = eta.to_vec();
        self.cache.solve_interior(&mut phi);
        let alpha: Vec<f64> = (0..nb).map(|z| phi[geom.tilde(z)]).collect();

        let mut h = 0.0;
        // Σ_z V'(α^z) P^z(x) = -(Δ_L^{-1} Σ_z V'(α^z) 1_{z̃})(x)
        let mut scatter = vec![0.0; eta.len()];
        for (z, &az) in alpha.iter().enumerate() {
            let (v, dv) = pot.v_and_dv(az);
            h += v;
            scatter[geom.tilde(z)] += dv;
        }
        self.cache.solve_interior(&mut scatter);

        let mut grad = scatter;
        for (g, &e) in grad.iter_mut().zip(eta) {
            let (v, dv) = pot.v_and_dv(e);
            h += v;
            *g += dv;
        }
        if let Some(b) = self.spec.tilt_values() {
            h -= dot(b, eta);
            for (g, &bi) in grad.iter_mut().zip(b) {
                *g -= bi;
            }
        }
        (h, grad, phi, alpha)
    }
}

/// State of one chain.
pub struct ChainState {
    pub eta: Vec<f64>,
    /// Interior values of `φ = Δ_L^{-1} η`.
    pub phi: Vec<f64>,
    /// Boundary values `α^z(η)`.
    pub alpha: Vec<f64>,
    pub energy: f64,
    pub grad: Vec<f64>,
    pub rng: ChaCha8Rng,
    pub log_step: f64,
    pub accepted: u64,
    pub attempted: u64,
    steps_since_audit: usize,
}

impl ChainState {
    pub fn init(target: &EtaTarget, seed: u64, chain_idx: u64, step: f64) -> Self {
        let n = target.spec.geom.interior_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain_idx + 1);
        let eta = vec![0.0; n];
        let (energy, grad, phi, alpha) = target.energy_grad(&eta);
        // Optimal Langevin steps shrink like n^{-1/3}; start there so the
        // burn-in adaptation only fine-tunes.
        let scaled = step / (n as f64).cbrt();
        ChainState {
            eta,
            phi,
            alpha,
            energy,
            grad,
            rng,
            log_step: scaled.ln(),
            accepted: 0,
            attempted: 0,
            steps_since_audit: 0,
        }
    }

    /// Current interface as a CL1 field (zero boundary data).
    pub fn phi_cl1(&self, spec: &ModelSpec) -> LatticeField {
        let mut f = LatticeField::zeros(&spec.geom, DomainTag::Cl1);
        f.values_mut()[..self.phi.len()].copy_from_slice(&self.phi);
        f
    }
}

/// One Metropolis-adjusted Langevin step; returns the acceptance probability.
pub fn mala_step(
    state: &mut ChainState,
    target: &EtaTarget,
    mass: &MassMatrix,
    audit_interval: usize,
) -> Result<f64> {
    let n = state.eta.len();
    let step = state.log_step.exp();

    let xi: Vec<f64> = (0..n).map(|_| state.rng.sample(StandardNormal)).collect();
    let noise = mass.apply_sqrt(&xi);
    let drift = mass.apply(&state.grad);
    let sqrt2h = (2.0 * step).sqrt();
    let proposal: Vec<f64> = (0..n)
        .map(|i| state.eta[i] - step * drift[i] + sqrt2h * noise[i])
        .collect();

    let (h_new, grad_new, phi_new, alpha_new) = target.energy_grad(&proposal);
    if !h_new.is_finite() || grad_new.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence {
            step: state.attempted as usize,
            what: format!("non-finite energy {h_new} in proposal"),
        });
    }

    // Forward kernel: r = η' - η + h·M∇H(η) = √(2h)·M^{1/2}ξ, so the
    // quadratic form is ‖ξ‖²/2 directly.
    let log_q_forward = -0.5 * dot(&xi, &xi);
    let drift_new = mass.apply(&grad_new);
    let r_back: Vec<f64> = (0..n)
        .map(|i| state.eta[i] - proposal[i] + step * drift_new[i])
        .collect();
    let minv_r = mass.apply_inverse(&r_back);
    let log_q_backward = -dot(&r_back, &minv_r) / (4.0 * step);

    let log_alpha = state.energy - h_new + log_q_backward - log_q_forward;
    let acc_prob = log_alpha.min(0.0).exp();
    let u: f64 = state.rng.gen();
    state.attempted += 1;
    if u.ln() < log_alpha {
        state.accepted += 1;
        state.eta = proposal;
        state.energy = h_new;
        state.grad = grad_new;
        state.phi = phi_new;
        state.alpha = alpha_new;
    }

    state.steps_since_audit += 1;
    if state.steps_since_audit >= audit_interval {
        state.steps_since_audit = 0;
        let (h_check, _, _, _) = target.energy_grad(&state.eta);
        let scale = h_check.abs().max(1.0);
        if (h_check - state.energy).abs() > 1e-10 * scale {
            return Err(Error::Numerical {
                what: "cached chain energy diverged from recomputation".into(),
                residual: (h_check - state.energy).abs() / scale,
                tol: 1e-10,
            });
        }
    }
    Ok(acc_prob)
}

/// Scalar observables tracked during a run.
#[derive(Debug, Clone)]
pub enum ObsKind {
    /// `⟨w, η⟩` over interior sites.
    LinearEta(Vec<f64>),
    /// `η(x)` at one site.
    EtaSite(usize),
    /// `φ(x)` at one site.
    PhiSite(usize),
}

#[derive(Debug, Clone)]
pub struct TrackedObservable {
    pub name: String,
    pub kind: ObsKind,
}

impl TrackedObservable {
    fn eval(&self, eta: &[f64], phi: &[f64]) -> f64 {
        match &self.kind {
            ObsKind::LinearEta(w) => dot(w, eta),
            ObsKind::EtaSite(x) => eta[*x],
            ObsKind::PhiSite(x) => phi[*x],
        }
    }
}

/// Kept samples of one run, merged across chains in chain order.
pub struct SampleBatch {
    pub d: usize,
    pub l: i64,
    pub n_sites: usize,
    pub n_alpha: usize,
    pub eta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub chain_len: Vec<usize>,
    pub potential_name: String,
    pub tilt_hash: u64,
    pub seed: u64,
}

impl SampleBatch {
    pub fn view(&self) -> EtaBatchView<'_> {
        EtaBatchView {
            n_sites: self.n_sites,
            n_alpha: self.n_alpha,
            eta: &self.eta,
            alpha: Some(&self.alpha),
            chain_len: self.chain_len.clone(),
        }
    }

    /// Versioned binary dump: header then row-major doubles.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"MLSB")?;
        f.write_all(&1u32.to_le_bytes())?;
        f.write_all(&(self.d as u32).to_le_bytes())?;
        f.write_all(&self.l.to_le_bytes())?;
        let name = self.potential_name.as_bytes();
        f.write_all(&(name.len() as u32).to_le_bytes())?;
        f.write_all(name)?;
        f.write_all(&self.tilt_hash.to_le_bytes())?;
        f.write_all(&self.seed.to_le_bytes())?;
        f.write_all(&(self.n_sites as u64).to_le_bytes())?;
        f.write_all(&(self.n_alpha as u64).to_le_bytes())?;
        f.write_all(&(self.chain_len.len() as u32).to_le_bytes())?;
        for &c in &self.chain_len {
            f.write_all(&(c as u64).to_le_bytes())?;
        }
        for v in self.eta.iter().chain(&self.alpha) {
            f.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<SampleBatch> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut m4 = [0u8; 4];
        f.read_exact(&mut m4)?;
        if &m4 != b"MLSB" {
            return Err(Error::Format("bad magic in sample batch".into()));
        }
        f.read_exact(&mut m4)?;
        if u32::from_le_bytes(m4) != 1 {
            return Err(Error::Format("unsupported sample batch version".into()));
        }
        f.read_exact(&mut m4)?;
        let d = u32::from_le_bytes(m4) as usize;
        let mut m8 = [0u8; 8];
        f.read_exact(&mut m8)?;
        let l = i64::from_le_bytes(m8);
        f.read_exact(&mut m4)?;
        let name_len = u32::from_le_bytes(m4) as usize;
        let mut name = vec![0u8; name_len];
        f.read_exact(&mut name)?;
        let potential_name = String::from_utf8(name)
            .map_err(|_| Error::Format("potential tag is not UTF-8".into()))?;
        f.read_exact(&mut m8)?;
        let tilt_hash = u64::from_le_bytes(m8);
        f.read_exact(&mut m8)?;
        let seed = u64::from_le_bytes(m8);
        f.read_exact(&mut m8)?;
        let n_sites = u64::from_le_bytes(m8) as usize;
        f.read_exact(&mut m8)?;
        let n_alpha = u64::from_le_bytes(m8) as usize;
        f.read_exact(&mut m4)?;
        let n_chains = u32::from_le_bytes(m4) as usize;
        let mut chain_len = Vec::with_capacity(n_chains);
        for _ in 0..n_chains {
            f.read_exact(&mut m8)?;
            chain_len.push(u64::from_le_bytes(m8) as usize);
        }
        let kept: usize = chain_len.iter().sum();
        let mut eta = vec![0.0; kept * n_sites];
        let mut alpha = vec![0.0; kept * n_alpha];
        for v in eta.iter_mut().chain(alpha.iter_mut()) {
            f.read_exact(&mut m8)?;
            *v = f64::from_le_bytes(m8);
        }
        Ok(SampleBatch {
            d,
            l,
            n_sites,
            n_alpha,
            eta,
            alpha,
            chain_len,
            potential_name,
            tilt_hash,
            seed,
        })
    }
}

pub struct ObservableSeries {
    pub name: String,
    pub per_chain: Vec<Vec<f64>>,
}

impl ObservableSeries {
    pub fn pooled(&self) -> Vec<f64> {
        self.per_chain.iter().flatten().copied().collect()
    }
}

pub struct SampleRun {
    pub batch: Option<SampleBatch>,
    pub observables: Vec<ObservableSeries>,
    pub diagnostics: Vec<ObservableDiagnostics>,
    pub acc_rate: f64,
    pub final_steps: Vec<f64>,
    /// Statistical warning: some observable fell below the ESS threshold or
    /// chains disagree.
    pub flagged: bool,
}

/// Minimum pooled ESS per tracked observable before a run is flagged.
pub const ESS_WARN_THRESHOLD: f64 = 100.0;

fn tilt_hash(spec: &ModelSpec) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    if let Some(b) = spec.tilt_values() {
        for v in b {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
    }
    h
}

/// Run MALA chains against the (optionally tilted) η-measure and return
/// thinned samples and tracked observable series.
pub fn sample_q(
    spec: &ModelSpec,
    cache: &GreenCache,
    config: &SamplerConfig,
    observables: &[TrackedObservable],
    store_full: bool,
) -> Result<SampleRun> {
    config.validate()?;
    let target = EtaTarget::new(spec, cache);
    let mass = build_mass_matrix(spec, cache, config.precondition)?;
    let n = spec.geom.interior_count();
    let nb = spec.geom.boundary_count();

    struct ChainOut {
        eta: Vec<f64>,
        alpha: Vec<f64>,
        obs: Vec<Vec<f64>>,
        accepted: u64,
        attempted: u64,
        final_step: f64,
    }

    let run_chain = |chain_idx: usize| -> Result<ChainOut> {
        let mut state = ChainState::init(&target, config.seed, chain_idx as u64, config.step);
        // Burn-in with stochastic-approximation step adaptation.
        for t in 0..config.burn_in {
            let acc = mala_step(&mut state, &target, &mass, config.audit_interval)?;
            if config.adapt {
                let gamma = 0.5 / (1.0 + t as f64 / 40.0).powf(0.7);
                state.log_step += gamma * (acc - config.target_accept);
            }
        }
        state.accepted = 0;
        state.attempted = 0;
        let mut eta_out = if store_full {
            Vec::with_capacity(config.keep * n)
        } else {
            Vec::new()
        };
        let mut alpha_out = if store_full {
            Vec::with_capacity(config.keep * nb)
        } else {
            Vec::new()
        };
        let mut obs_out: Vec<Vec<f64>> = observables
            .iter()
            .map(|_| Vec::with_capacity(config.keep))
            .collect();
        for _ in 0..config.keep {
            for _ in 0..config.thin {
                mala_step(&mut state, &target, &mass, config.audit_interval)?;
            }
            if store_full {
                eta_out.extend_from_slice(&state.eta);
                alpha_out.extend_from_slice(&state.alpha);
            }
            for (series, ob) in obs_out.iter_mut().zip(observables) {
                series.push(ob.eval(&state.eta, &state.phi));
            }
        }
        Ok(ChainOut {
            eta: eta_out,
            alpha: alpha_out,
            obs: obs_out,
            accepted: state.accepted,
            attempted: state.attempted,
            final_step: state.log_step.exp(),
        })
    };

    let results: Vec<Result<ChainOut>> = (0..config.chains)
        .into_par_iter()
        .map(run_chain)
        .collect();
    let mut chains = Vec::with_capacity(config.chains);
    for r in results {
        chains.push(r?);
    }

    let acc_rate = chains.iter().map(|c| c.accepted).sum::<u64>() as f64
        / chains.iter().map(|c| c.attempted).sum::<u64>().max(1) as f64;
    let final_steps: Vec<f64> = chains.iter().map(|c| c.final_step).collect();

    let mut observables_out = Vec::new();
    let mut diags = Vec::new();
    let mut flagged = false;
    for (k, ob) in observables.iter().enumerate() {
        let per_chain: Vec<Vec<f64>> = chains.iter().map(|c| c.obs[k].clone()).collect();
        let views: Vec<&[f64]> = per_chain.iter().map(|c| c.as_slice()).collect();
        let diag = diagnostics::diagnose(&ob.name, &views);
        if diag.ess < ESS_WARN_THRESHOLD || diag.rhat.map_or(false, |r| r > 1.05) {
            flagged = true;
        }
        diags.push(diag);
        observables_out.push(ObservableSeries {
            name: ob.name.clone(),
            per_chain,
        });
    }

    let batch = if store_full {
        let mut eta = Vec::with_capacity(config.keep * config.chains * n);
        let mut alpha = Vec::with_capacity(config.keep * config.chains * nb);
        for c in &chains {
            eta.extend_from_slice(&c.eta);
            alpha.extend_from_slice(&c.alpha);
        }
        Some(SampleBatch {
            d: spec.geom.d(),
            l: spec.geom.l(),
            n_sites: n,
            n_alpha: nb,
            eta,
            alpha,
            chain_len: vec![config.keep; config.chains],
            potential_name: spec.potential.name().to_string(),
            tilt_hash: tilt_hash(spec),
            seed: config.seed,
        })
    } else {
        None
    };

    Ok(SampleRun {
        batch,
        observables: observables_out,
        diagnostics: diags,
        acc_rate,
        final_steps,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_geometry;
    use crate::potential::Potential;
    use approx::assert_abs_diff_eq;

    fn setup(d: usize, l: i64) -> (Arc<crate::lattice::BoxGeometry>, GreenCache) {
        let geom = Arc::new(build_geometry(d, l).unwrap());
        let cache = GreenCache::new(geom.clone());
        (geom, cache)
    }

    #[test]
    fn eta_target_matches_gibbs_hamiltonian() {
        let (geom, cache) = setup(2, 4);
        let pot = Potential::logcosh(1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bvals: Vec<f64> = (0..geom.interior_count())
            .map(|_| rng.gen_range(-0.3..0.3))
            .collect();
        let b = LatticeField::from_values(&geom, DomainTag::Box, bvals).unwrap();
        let spec = ModelSpec::new(geom.clone(), pot).with_tilt(b);
        let target = EtaTarget::new(&spec, &cache);

        let eta_vals: Vec<f64> = (0..geom.interior_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let eta = LatticeField::from_values(&geom, DomainTag::Box, eta_vals.clone()).unwrap();
        let (h1, g1, _, a1) = target.energy_grad(&eta_vals);
        let (h2, g2) = crate::gibbs::hamiltonian_eta(&spec, &cache, &eta).unwrap();
        assert_abs_diff_eq!(h1, h2, epsilon = 1e-9);
        for (x, y) in g1.iter().zip(g2.values()) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-9);
        }
        let a2 = cache.alpha_z(&eta).unwrap();
        for (x, y) in a1.iter().zip(&a2) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-10);
        }
    }

    #[test]
    fn determinism_bitwise() {
        let (geom, cache) = setup(2, 3);
        let spec = ModelSpec::new(geom, Potential::logcosh(1.0, 0.5).unwrap());
        let config = SamplerConfig {
            keep: 50,
            burn_in: 100,
            chains: 2,
            ..Default::default()
        };
        let obs = [TrackedObservable {
            name: "eta0".into(),
            kind: ObsKind::EtaSite(0),
        }];
        let r1 = sample_q(&spec, &cache, &config, &obs, true).unwrap();
        let r2 = sample_q(&spec, &cache, &config, &obs, true).unwrap();
        assert_eq!(r1.batch.as_ref().unwrap().eta, r2.batch.as_ref().unwrap().eta);
        assert_eq!(
            r1.observables[0].per_chain,
            r2.observables[0].per_chain
        );
    }

    #[test]
    fn acceptance_rate_in_window_after_adaptation() {
        let (geom, cache) = setup(2, 4);
        for pre in [Preconditioner::Gaussian, Preconditioner::Identity] {
            let spec = ModelSpec::new(geom.clone(), Potential::logcosh(1.0, 0.5).unwrap());
            let config = SamplerConfig {
                keep: 1500,
                burn_in: 600,
                chains: 1,
                precondition: pre,
                thin: 1,
                ..Default::default()
            };
            let run = sample_q(&spec, &cache, &config, &[], false).unwrap();
            assert!(
                run.acc_rate > 0.4 && run.acc_rate < 0.8,
                "acceptance {} with {pre:?}",
                run.acc_rate
            );
        }
    }

    #[test]
    fn exact_marginal_smoke_1d() {
        // d=1, L=1, quadratic(1): all three covariance entries match the
        // dense reference to 3 standard errors.
        let (geom, cache) = setup(1, 1);
        let spec = ModelSpec::new(geom.clone(), Potential::quadratic(1.0).unwrap());
        let oracle = GaussianOracle::new(&cache, 1.0).unwrap();
        let config = SamplerConfig {
            keep: 100_000,
            thin: 2,
            burn_in: 1000,
            chains: 2,
            seed: 42,
            ..Default::default()
        };
        let run = sample_q(&spec, &cache, &config, &[], true).unwrap();
        let batch = run.batch.unwrap();
        let kept = batch.chain_len.iter().sum::<usize>();
        let n = 3usize;
        let mut mean = [0.0f64; 3];
        for i in 0..kept {
            for x in 0..n {
                mean[x] += batch.eta[i * n + x];
            }
        }
        for m in mean.iter_mut() {
            *m /= kept as f64;
        }
        for (x, y) in [(1usize, 1usize), (0, 0), (0, 1)] {
            let mut acc = 0.0;
            for i in 0..kept {
                acc += (batch.eta[i * n + x] - mean[x]) * (batch.eta[i * n + y] - mean[y]);
            }
            let emp = acc / (kept as f64 - 1.0);
            let exact = oracle.covariance_entry(x, y);
            let sxx = oracle.covariance_entry(x, x);
            let syy = oracle.covariance_entry(y, y);
            // effective sample count reduced by autocorrelation; thin=2 with
            // the exact mass matrix keeps correlation mild, budget a factor 4.
            let n_eff = kept as f64 / 4.0;
            let se = ((sxx * syy + exact * exact) / n_eff).sqrt();
            assert!(
                (emp - exact).abs() < 3.0 * se,
                "cov({x},{y}): emp {emp}, exact {exact}, se {se}"
            );
        }
    }

    #[test]
    fn symmetric_model_has_zero_means() {
        let (geom, cache) = setup(2, 3);
        let spec = ModelSpec::new(geom.clone(), Potential::logcosh(1.0, 0.5).unwrap());
        let config = SamplerConfig {
            keep: 4000,
            thin: 2,
            burn_in: 500,
            chains: 2,
            seed: 9,
            ..Default::default()
        };
        let run = sample_q(&spec, &cache, &config, &[], true).unwrap();
        let batch = run.batch.unwrap();
        let kept: usize = batch.chain_len.iter().sum();
        let n = geom.interior_count();
        for x in 0..n {
            let mut mean = 0.0;
            let mut var = 0.0;
            for i in 0..kept {
                mean += batch.eta[i * n + x];
            }
            mean /= kept as f64;
            for i in 0..kept {
                var += (batch.eta[i * n + x] - mean) * (batch.eta[i * n + x] - mean);
            }
            var /= kept as f64 - 1.0;
            // generous τ budget for the 3-SE window
            let se = (var * 8.0 / kept as f64).sqrt();
            assert!(mean.abs() < 3.0 * se, "site {x}: mean {mean}, se {se}");
        }
    }

    #[test]
    fn tilted_mean_matches_oracle() {
        let (geom, cache) = setup(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let bvals: Vec<f64> = (0..geom.interior_count())
            .map(|_| rng.gen_range(-0.4..0.4))
            .collect();
        let b = LatticeField::from_values(&geom, DomainTag::Box, bvals.clone()).unwrap();
        let c = 1.0;
        let spec = ModelSpec::new(geom.clone(), Potential::quadratic(c).unwrap()).with_tilt(b);
        let oracle = GaussianOracle::new(&cache, c).unwrap();
        let exact_mean = oracle.tilted_mean(&bvals);

        let config = SamplerConfig {
            keep: 8000,
            thin: 2,
            burn_in: 800,
            chains: 2,
            seed: 5,
            ..Default::default()
        };
        let obs: Vec<TrackedObservable> = [0usize, 40, 80]
            .iter()
            .map(|&x| TrackedObservable {
                name: format!("eta{x}"),
                kind: ObsKind::EtaSite(x),
            })
            .collect();
        let run = sample_q(&spec, &cache, &config, &obs, false).unwrap();
        for (k, &x) in [0usize, 40, 80].iter().enumerate() {
            let pooled = run.observables[k].pooled();
            let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
            let sd = oracle.covariance_entry(x, x).sqrt();
            let se = sd / run.diagnostics[k].ess.max(1.0).sqrt();
            assert!(
                (mean - exact_mean[x]).abs() < 3.5 * se,
                "site {x}: mean {mean}, exact {}, se {se}",
                exact_mean[x]
            );
        }
    }

    #[test]
    fn poincare_variance_bound_on_linear_observables() {
        let (geom, cache) = setup(2, 3);
        let pot = Potential::logcosh(1.0, 0.5).unwrap();
        let spec = ModelSpec::new(geom.clone(), pot);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut a: Vec<f64> = (0..geom.interior_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let norm = dot(&a, &a).sqrt();
        for v in a.iter_mut() {
            *v /= norm;
        }
        let config = SamplerConfig {
            keep: 6000,
            thin: 2,
            burn_in: 500,
            chains: 2,
            seed: 3,
            ..Default::default()
        };
        let obs = [TrackedObservable {
            name: "a_eta".into(),
            kind: ObsKind::LinearEta(a),
        }];
        let run = sample_q(&spec, &cache, &config, &obs, false).unwrap();
        let pooled = run.observables[0].pooled();
        let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
        let var =
            pooled.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (pooled.len() - 1) as f64;
        let ess = run.diagnostics[0].ess;
        let se_var = var * (2.0 / ess).sqrt();
        assert!(
            var <= 1.0 / pot.c_min() + 3.0 * se_var,
            "Var = {var}, bound = {}",
            1.0 / pot.c_min()
        );
    }

    #[test]
    fn rhat_across_seeds() {
        let (geom, cache) = setup(2, 3);
        let spec = ModelSpec::new(geom.clone(), Potential::quadratic(1.0).unwrap());
        let mut a = vec![0.0; geom.interior_count()];
        a[4] = 1.0;
        a[11] = -0.5;
        let obs = [TrackedObservable {
            name: "a_eta".into(),
            kind: ObsKind::LinearEta(a),
        }];
        let mut chains: Vec<Vec<f64>> = Vec::new();
        for seed in [100u64, 200] {
            let config = SamplerConfig {
                keep: 3000,
                thin: 2,
                burn_in: 400,
                chains: 1,
                seed,
                ..Default::default()
            };
            let run = sample_q(&spec, &cache, &config, &obs, false).unwrap();
            chains.push(run.observables[0].pooled());
        }
        let views: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
        let rhat = diagnostics::split_rhat(&views).unwrap();
        assert!(rhat < 1.05, "R-hat = {rhat}");
    }

    #[test]
    fn batch_save_load_roundtrip() {
        let (geom, cache) = setup(1, 2);
        let spec = ModelSpec::new(geom, Potential::quadratic(1.0).unwrap());
        let config = SamplerConfig {
            keep: 20,
            burn_in: 50,
            chains: 2,
            ..Default::default()
        };
        let run = sample_q(&spec, &cache, &config, &[], true).unwrap();
        let batch = run.batch.unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.bin");
        batch.save(&path).unwrap();
        let loaded = SampleBatch::load(&path).unwrap();
        assert_eq!(batch.eta, loaded.eta);
        assert_eq!(batch.alpha, loaded.alpha);
        assert_eq!(batch.chain_len, loaded.chain_len);
        assert_eq!(batch.potential_name, loaded.potential_name);
        assert_eq!(batch.tilt_hash, loaded.tilt_hash);
    }
}
