//! Hamiltonians of the interface measure in both coordinate systems, the
//! exact Gaussian reference model, and Monte Carlo evaluation of the
//! quadratic energies on separable candidate profiles.
//!
//! In η-coordinates the Gibbs density is `exp(-H^b)` with
//! `H^b(η) = Σ_x V(η(x)) + Σ_z V(α^z(η)) - Σ_x b(x) η(x)`; in φ-coordinates
//! the same measure reads `exp(-Σ_{cl1} V(Δφ) + ⟨Δ_L b, φ⟩)`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::{dot, BoxGeometry, DomainTag, LatticeField};
use crate::operators::{lap_box_from_cl1, lap_cl1_from_box, GreenCache};
use crate::potential::{solve_u, OneDMeasure, OneDProfile, Potential};
use crate::sampler::diagnostics;

/// Which coordinates a consumer intends to work in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordSystem {
    Phi,
    Eta,
}

/// A model instance: geometry, potential, and an optional linear tilt of the
/// η-field.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub geom: Arc<BoxGeometry>,
    pub potential: Potential,
    pub tilt: Option<LatticeField>,
    pub coords: CoordSystem,
}

impl ModelSpec {
    pub fn new(geom: Arc<BoxGeometry>, potential: Potential) -> Self {
        ModelSpec {
            geom,
            potential,
            tilt: None,
            coords: CoordSystem::Eta,
        }
    }

    pub fn with_tilt(mut self, b: LatticeField) -> Self {
        self.tilt = Some(b.to_tag(&self.geom, DomainTag::Box));
        self
    }

    pub fn tilt_values(&self) -> Option<&[f64]> {
        self.tilt.as_ref().map(|b| b.values())
    }
}

/// Interface-coordinate Hamiltonian `Σ_{x∈cl1} V(Δφ(x)) - ⟨Δ_L b, φ⟩` and
/// its gradient `Δ(V'(Δφ)) - Δ_L b` over interior sites.
pub fn hamiltonian_phi(spec: &ModelSpec, phi: &LatticeField) -> (f64, LatticeField) {
    let geom = &spec.geom;
    let pot = &spec.potential;
    let phi_box = phi.to_tag(geom, DomainTag::Box);
    let cl1 = geom.site_count(DomainTag::Cl1);
    let mut dphi = vec![0.0; cl1];
    lap_cl1_from_box(geom, phi_box.values(), &mut dphi);

    let mut h: f64 = dphi.iter().map(|&v| pot.v(v)).sum();
    let mut vprime = dphi;
    for v in vprime.iter_mut() {
        *v = pot.dv(*v);
    }
    let mut grad = LatticeField::zeros(geom, DomainTag::Box);
    lap_box_from_cl1(geom, &vprime, grad.values_mut());

    if let Some(b) = &spec.tilt {
        let lap_b = crate::operators::laplacian(geom, b);
        h -= dot(lap_b.values(), phi_box.values());
        for (g, lb) in grad.values_mut().iter_mut().zip(lap_b.values()) {
            *g -= lb;
        }
    }
    (h, grad)
}

/// Laplacian-field Hamiltonian `Σ_x V(η(x)) + Σ_z V(α^z(η)) - ⟨b, η⟩` and
/// its gradient `V'(η(x)) - Σ_z V'(α^z(η)) P^z(x) - b(x)`.
pub fn hamiltonian_eta(
    spec: &ModelSpec,
    cache: &GreenCache,
    eta: &LatticeField,
) -> Result<(f64, LatticeField)> {
    let geom = &spec.geom;
    let pot = &spec.potential;
    let eta_box = eta.to_tag(geom, DomainTag::Box);
    let p = cache.poisson()?;
    let alpha: Vec<f64> = p.apply(eta_box.values()).iter().map(|v| -v).collect();

    let mut h: f64 = eta_box.values().iter().map(|&v| pot.v(v)).sum();
    h += alpha.iter().map(|&v| pot.v(v)).sum::<f64>();

    let vprime_alpha: Vec<f64> = alpha.iter().map(|&v| pot.dv(v)).collect();
    let bterm = p.apply_transpose(&vprime_alpha);
    let mut grad = LatticeField::zeros(geom, DomainTag::Box);
    for (i, g) in grad.values_mut().iter_mut().enumerate() {
        *g = pot.dv(eta_box.values()[i]) - bterm[i];
    }
    if let Some(b) = spec.tilt_values() {
        h -= dot(b, eta_box.values());
        for (g, &bi) in grad.values_mut().iter_mut().zip(b) {
            *g -= bi;
        }
    }
    Ok((h, grad))
}

/// Exact Gaussian model for the quadratic potential `½cξ²`: precision
/// `A = c(Id + Σ_z P^z P^zᵀ)` handled in Woodbury form, with the spectral
/// square root of the boundary Gram matrix for sampling.
pub struct GaussianOracle {
    c: f64,
    n: usize,
    b: usize,
    /// Copy of the Poisson matrix (B×N row-major).
    p_rows: Vec<f64>,
    /// Cholesky of `I_B + P Pᵀ`.
    gram_chol: Cholesky<f64, Dyn>,
    /// Eigenvalues of `P Pᵀ` above the cutoff, with the corresponding
    /// orthonormal interior modes `q̃_i = Pᵀ q_i / √λ_i` (N×modes,
    /// column-major).
    mode_vals: Vec<f64>,
    mode_vecs: Vec<f64>,
}

impl GaussianOracle {
    pub fn new(cache: &GreenCache, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Parameter("oracle needs c > 0".into()));
        }
        let p = cache.poisson()?;
        let n = p.interior_count();
        let b = p.boundary_count();
        let p_rows = (0..b).flat_map(|z| p.row(z).to_vec()).collect::<Vec<_>>();
        let gram = p.gram_interior();
        let mut eye_plus = gram.clone();
        for i in 0..b {
            eye_plus[(i, i)] += 1.0;
        }
        let gram_chol = Cholesky::new(eye_plus)
            .ok_or_else(|| Error::Solver("boundary Gram factorization failed".into()))?;

        let eig = SymmetricEigen::new(gram);
        let mut mode_vals = Vec::new();
        let mut mode_vecs = Vec::new();
        for i in 0..b {
            let lam = eig.eigenvalues[i];
            if lam <= 1e-12 {
                continue;
            }
            mode_vals.push(lam);
            let q = eig.eigenvectors.column(i);
            let mut u = vec![0.0; n];
            for z in 0..b {
                let qz = q[z];
                if qz == 0.0 {
                    continue;
                }
                for (ui, &pv) in u.iter_mut().zip(&p_rows[z * n..(z + 1) * n]) {
                    *ui += qz * pv;
                }
            }
            let inv_sqrt = 1.0 / lam.sqrt();
            for ui in u.iter_mut() {
                *ui *= inv_sqrt;
            }
            mode_vecs.extend(u);
        }
        Ok(GaussianOracle {
            c,
            n,
            b,
            p_rows,
            gram_chol,
            mode_vals,
            mode_vecs,
        })
    }

    pub fn interior_count(&self) -> usize {
        self.n
    }

    fn p_apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.b)
            .map(|z| dot(&self.p_rows[z * self.n..(z + 1) * self.n], v))
            .collect()
    }

    fn p_apply_t(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for z in 0..self.b {
            let wz = w[z];
            if wz == 0.0 {
                continue;
            }
            for (o, &pv) in out.iter_mut().zip(&self.p_rows[z * self.n..(z + 1) * self.n]) {
                *o += wz * pv;
            }
        }
        out
    }

    /// Apply the covariance `Σ = A^{-1}` by the Woodbury identity.
    pub fn covariance_apply(&self, v: &[f64]) -> Vec<f64> {
        let pv = DVector::from_vec(self.p_apply(v));
        let w = self.gram_chol.solve(&pv);
        let corr = self.p_apply_t(w.as_slice());
        v.iter()
            .zip(&corr)
            .map(|(&a, &b)| (a - b) / self.c)
            .collect()
    }

    /// Apply the precision `A = c(Id + PᵀP)`.
    pub fn precision_apply(&self, v: &[f64]) -> Vec<f64> {
        let pv = self.p_apply(v);
        let corr = self.p_apply_t(&pv);
        v.iter()
            .zip(&corr)
            .map(|(&a, &b)| self.c * (a + b))
            .collect()
    }

    /// Cumulant generating function `½⟨a, Σ a⟩` of `⟨a, η⟩`.
    pub fn cgf(&self, a: &[f64]) -> f64 {
        0.5 * dot(a, &self.covariance_apply(a))
    }

    /// Mean of the tilted model, `Σ b`.
    pub fn tilted_mean(&self, b: &[f64]) -> Vec<f64> {
        self.covariance_apply(b)
    }

    pub fn covariance_entry(&self, x: usize, y: usize) -> f64 {
        let mut e = vec![0.0; self.n];
        e[y] = 1.0;
        self.covariance_apply(&e)[x]
    }

    /// Apply `Σ^{1/2} = c^{-1/2} (Id + Σ_i ((1+λ_i)^{-1/2}-1) q̃_i q̃_iᵀ)`.
    pub fn sqrt_cov_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for (i, &lam) in self.mode_vals.iter().enumerate() {
            let u = &self.mode_vecs[i * self.n..(i + 1) * self.n];
            let factor = (1.0 + lam).powf(-0.5) - 1.0;
            let coeff = factor * dot(u, v);
            for (o, &ui) in out.iter_mut().zip(u) {
                *o += coeff * ui;
            }
        }
        let s = self.c.sqrt().recip();
        for o in out.iter_mut() {
            *o *= s;
        }
        out
    }

    /// Draw an exact sample, optionally under a tilt `b`.
    pub fn sample(&self, tilt: Option<&[f64]>, rng: &mut impl Rng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        let mut eta = self.sqrt_cov_apply(&z);
        if let Some(b) = tilt {
            let mean = self.tilted_mean(b);
            for (e, m) in eta.iter_mut().zip(mean) {
                *e += m;
            }
        }
        eta
    }

    /// Dense precision matrix (test-scale geometries only).
    pub fn dense_precision(&self) -> DMatrix<f64> {
        let mut a = DMatrix::<f64>::identity(self.n, self.n);
        for z in 0..self.b {
            let row = &self.p_rows[z * self.n..(z + 1) * self.n];
            for i in 0..self.n {
                for j in 0..self.n {
                    a[(i, j)] += row[i] * row[j];
                }
            }
        }
        a * self.c
    }
}

/// Per-site scalar profile `v(x, η) = g_x(η(x))`.
pub enum SeparableProfile {
    /// `g_x(t) = coeff[x]`, independent of the spin.
    Constant { coeff: Vec<f64> },
    /// `g_x(t) = U^{b(x)}(t)·a(x)` in the bulk, `E_{ν⁰}U⁰·a(x)` on the
    /// boundary layer.
    AnsatzW {
        profiles: Vec<Arc<OneDProfile>>,
        coeff: Vec<f64>,
        in_bulk: Vec<bool>,
        layer_value: f64,
    },
    /// Arbitrary `(g, g')` pairs.
    Custom {
        #[allow(clippy::type_complexity)]
        f: Arc<dyn Fn(usize, f64) -> (f64, f64) + Send + Sync>,
    },
}

impl SeparableProfile {
    #[inline]
    pub fn eval(&self, x: usize, t: f64) -> (f64, f64) {
        match self {
            SeparableProfile::Constant { coeff } => (coeff[x], 0.0),
            SeparableProfile::AnsatzW {
                profiles,
                coeff,
                in_bulk,
                layer_value,
            } => {
                if in_bulk[x] {
                    let u = &profiles[x];
                    (u.eval(t) * coeff[x], u.eval_deriv(t) * coeff[x])
                } else {
                    (layer_value * coeff[x], 0.0)
                }
            }
            SeparableProfile::Custom { f } => f(x, t),
        }
    }
}

/// Boundary-layer width `round(L^{1-ε})` with `ε = (d-1)/(3d-1)`.
pub fn default_layer_width(d: usize, l: i64) -> i64 {
    let eps = (d as f64 - 1.0) / (3.0 * d as f64 - 1.0);
    (l as f64).powf(1.0 - eps).round() as i64
}

/// Build the two-zone ansatz profile for direction `a` under tilt `b`.
pub fn ansatz_w(
    geom: &BoxGeometry,
    pot: Potential,
    tilt: Option<&[f64]>,
    a: &[f64],
    ell: i64,
) -> Result<SeparableProfile> {
    let n = geom.interior_count();
    if a.len() != n {
        return Err(Error::Domain("direction length mismatch".into()));
    }
    let m0 = OneDMeasure::new(pot, 0.0)?;
    let u0 = Arc::new(solve_u(&m0)?);
    let layer_value = u0.mean_under(&m0);

    let mut by_beta: HashMap<u64, Arc<OneDProfile>> = HashMap::new();
    by_beta.insert(0.0f64.to_bits(), u0.clone());
    let mut profiles = Vec::with_capacity(n);
    let mut in_bulk = Vec::with_capacity(n);
    for x in 0..n {
        let beta = tilt.map_or(0.0, |b| b[x]);
        let prof = match by_beta.entry(beta.to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => e.get().clone(),
            std::collections::hash_map::Entry::Vacant(e) => {
                let m = OneDMeasure::new(pot, beta)?;
                let p = Arc::new(solve_u(&m)?);
                e.insert(p.clone());
                p
            }
        };
        profiles.push(prof);
        in_bulk.push((geom.rho(x) as i64) >= ell + 1);
    }
    Ok(SeparableProfile::AnsatzW {
        profiles,
        coeff: a.to_vec(),
        in_bulk,
        layer_value,
    })
}

/// Thinned η-samples grouped by chain, with matching boundary values
/// `α^z(η)` when available.
pub struct EtaBatchView<'a> {
    pub n_sites: usize,
    pub n_alpha: usize,
    /// Kept samples, row-major (`kept × n_sites`).
    pub eta: &'a [f64],
    /// Kept boundary values, row-major (`kept × n_alpha`), if recorded.
    pub alpha: Option<&'a [f64]>,
    /// Kept-sample counts per chain, in chain order.
    pub chain_len: Vec<usize>,
}

impl<'a> EtaBatchView<'a> {
    pub fn kept(&self) -> usize {
        self.eta.len() / self.n_sites
    }

    pub fn eta_row(&self, i: usize) -> &[f64] {
        &self.eta[i * self.n_sites..(i + 1) * self.n_sites]
    }

    pub fn alpha_row(&self, i: usize) -> Option<&[f64]> {
        self.alpha
            .map(|a| &a[i * self.n_alpha..(i + 1) * self.n_alpha])
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
    pub ess: f64,
    pub flagged: bool,
}

/// Minimum pooled effective sample size before an estimate is flagged.
pub const MIN_ESS: f64 = 100.0;

fn mc_from_series(series: &[f64], chain_len: &[usize]) -> McEstimate {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|&s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut chains: Vec<&[f64]> = Vec::new();
    let mut start = 0;
    for &len in chain_len {
        chains.push(&series[start..start + len]);
        start += len;
    }
    let ess = diagnostics::ess_chains(&chains).max(1e-9);
    McEstimate {
        value: mean,
        se: (var / ess).sqrt(),
        ess,
        flagged: ess < MIN_ESS,
    }
}

/// Monte Carlo estimate of the bulk energy
/// `F_a(v) = E[ Σ_x ½(|g'_x|² + V''(η_x) g_x²) - Σ_x a(x) g_x ]`.
pub fn evaluate_f(
    profile: &SeparableProfile,
    pot: &Potential,
    a: &[f64],
    batch: &EtaBatchView,
) -> McEstimate {
    let kept = batch.kept();
    let mut series = Vec::with_capacity(kept);
    for i in 0..kept {
        let eta = batch.eta_row(i);
        let mut s = 0.0;
        for (x, (&ax, &ex)) in a.iter().zip(eta).enumerate() {
            let (g, dg) = profile.eval(x, ex);
            s += 0.5 * (dg * dg + pot.d2v(ex) * g * g) - ax * g;
        }
        series.push(s);
    }
    mc_from_series(&series, &batch.chain_len)
}

/// Monte Carlo estimate of the full energy: `evaluate_f` plus the boundary
/// term `½ Σ_z V''(α^z(η)) |α^z(v(·,η))|²`.
pub fn evaluate_e(
    profile: &SeparableProfile,
    pot: &Potential,
    a: &[f64],
    batch: &EtaBatchView,
    cache: &GreenCache,
) -> Result<McEstimate> {
    let p = cache.poisson()?;
    let kept = batch.kept();
    let mut series = Vec::with_capacity(kept);
    let mut v = vec![0.0; batch.n_sites];
    for i in 0..kept {
        let eta = batch.eta_row(i);
        let mut s = 0.0;
        for (x, (&ax, &ex)) in a.iter().zip(eta).enumerate() {
            let (g, dg) = profile.eval(x, ex);
            s += 0.5 * (dg * dg + pot.d2v(ex) * g * g) - ax * g;
            v[x] = g;
        }
        let alpha_eta: Vec<f64> = match batch.alpha_row(i) {
            Some(row) => row.to_vec(),
            None => p.apply(eta).iter().map(|w| -w).collect(),
        };
        let alpha_v = p.apply(&v);
        for (&ae, &av) in alpha_eta.iter().zip(&alpha_v) {
            // α^z(v) = -⟨P^z, v⟩
            s += 0.5 * pot.d2v(ae) * av * av;
        }
        series.push(s);
    }
    Ok(mc_from_series(&series, &batch.chain_len))
}
