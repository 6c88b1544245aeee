//! Harmonic Bergman projection on `L²(cl₁ Box_L)`, the special profiles that
//! cancel boundary inner products, the boundary energy, and the continuum
//! bi-Laplacian comparison.
//!
//! The complement projection is computed exactly as `K⊥ = Δ G Δ`: extend by
//! zero, take the Laplacian into the cube, solve the clamped bi-Laplacian,
//! and take the Laplacian back out to `cl₁`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{build_geometry, BoxGeometry, DomainTag, LatticeField};
use crate::operators::{laplacian, laplacian_cl1, GreenCache, POSITIVE_KERNEL_SIGN};

/// Orthogonal decomposition of a CL1 field into its discrete-harmonic part
/// and the complement.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub input: LatticeField,
    pub harmonic: LatticeField,
    pub complement: LatticeField,
}

/// Split `a = K a + K⊥ a` with `K` the projection onto fields harmonic in
/// the cube.
pub fn bergman_split(cache: &GreenCache, a: &LatticeField) -> Result<ProjectionPair> {
    let geom = cache.geometry();
    let a_cl1 = a.to_tag(geom, DomainTag::Cl1);
    let lap_a = laplacian(geom, &a_cl1);
    let v = cache.bilaplacian_green(&lap_a)?;
    let complement = laplacian_cl1(geom, &v);
    let mut harmonic = a_cl1.clone();
    for (h, c) in harmonic
        .values_mut()
        .iter_mut()
        .zip(complement.values())
    {
        *h -= c;
    }
    Ok(ProjectionPair {
        input: a_cl1,
        harmonic,
        complement,
    })
}

/// Boundary energy `B_L(a) = Σ_z ⟨P^z, a⟩²` over the interior inner product.
pub fn boundary_energy(cache: &GreenCache, a: &LatticeField) -> Result<f64> {
    let geom = cache.geometry();
    let a_box = a.to_tag(geom, DomainTag::Box);
    let p = cache.poisson()?;
    Ok(p.apply(a_box.values()).iter().map(|v| v * v).sum())
}

/// Profile `e` whose inner products with every Poisson kernel cancel those of
/// the indicator at `x0`, built from nested-cube exit kernels.
#[derive(Debug, Clone)]
pub struct SpecialProfile {
    pub x0: usize,
    pub e: LatticeField,
    /// Per-shell weights `(k, ε(k))`; empty when `x0` touches the boundary.
    pub weights: Vec<(i64, f64)>,
}

/// Build the special profile at an interior site.
///
/// Shells are the boundaries of sub-cubes `Box_k` centered at the origin for
/// `k` from `‖x0‖_∞` to `L-1`, weighted by `dist(x0, ∂Box_k)^{(d-1)/2}` and
/// normalized to total weight one. A site adjacent to the boundary gets the
/// degenerate profile `-1_{x0}`.
pub fn special_profile(geom: &Arc<BoxGeometry>, x0: usize) -> Result<SpecialProfile> {
    if x0 >= geom.interior_count() {
        return Err(Error::Domain(format!(
            "site index {x0} outside the interior (count {})",
            geom.interior_count()
        )));
    }
    let d = geom.d();
    let l = geom.l();
    let x0_coords = geom.interior_coords(x0);
    let k0 = x0_coords.iter().map(|c| c.abs()).max().unwrap();

    let mut e = LatticeField::zeros(geom, DomainTag::Cl1);
    if k0 == l {
        // ρ(x0) = 1: the shell range is empty.
        e.values_mut()[x0] = -1.0;
        return Ok(SpecialProfile {
            x0,
            e,
            weights: Vec::new(),
        });
    }

    let shells: Vec<i64> = (k0..l).collect();
    let raw: Vec<f64> = shells
        .iter()
        .map(|&k| ((k + 1 - k0) as f64).powf((d as f64 - 1.0) / 2.0))
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<(i64, f64)> = shells
        .iter()
        .zip(&raw)
        .map(|(&k, &r)| (k, r / total))
        .collect();

    for &(k, eps) in &weights {
        if k == 0 {
            // Single-site cube: the walk exits uniformly in one step.
            let p = 1.0 / (2.0 * d as f64);
            let mut coords = vec![0i64; d];
            for axis in 0..d {
                for sign in [-1i64, 1] {
                    coords[axis] = sign;
                    let idx = geom.interior_index(&coords).unwrap();
                    e.values_mut()[idx] -= eps * p;
                    coords[axis] = 0;
                }
            }
            continue;
        }
        let sub = Arc::new(build_geometry(d, k)?);
        let sub_cache = GreenCache::new(sub.clone());
        let x0_sub = sub.interior_index(&x0_coords).ok_or_else(|| {
            Error::Domain("profile site escaped its shell range".into())
        })?;
        // Exit distribution from x0 over ∂Box_k, all values from one solve:
        // P^x_k(x0) = -Γ_k(x0, x̃) = -Γ_k(x̃, x0).
        let col = sub_cache.green_column(x0_sub);
        for z in 0..sub.boundary_count() {
            let p = POSITIVE_KERNEL_SIGN * col.values()[sub.tilde(z)];
            let zc = sub.boundary_coords(z);
            let idx = geom
                .interior_index(zc)
                .expect("shell sites of inner cubes are interior to the outer cube");
            e.values_mut()[idx] -= eps * p;
        }
    }
    Ok(SpecialProfile { x0, e, weights })
}

/// Squared `L²` mass of a CL1 field on the layer
/// `Λ' = cl₁ Box_L \ Box_{L-ℓ}` (boundary included).
pub fn layer_norm_sq(geom: &BoxGeometry, field: &LatticeField, ell: i64) -> f64 {
    let f = field.to_tag(geom, DomainTag::Cl1);
    let n = geom.interior_count();
    let mut acc = 0.0;
    for i in 0..n {
        if (geom.rho(i) as i64) <= ell {
            acc += f.values()[i] * f.values()[i];
        }
    }
    for b in n..geom.site_count(DomainTag::Cl1) {
        acc += f.values()[b] * f.values()[b];
    }
    acc
}

/// Closed-form test function on `[-1,1]^d` with clamped boundary data,
/// together with its continuum bi-Laplacian.
pub trait TestFunction: Sync {
    fn dimension(&self) -> usize;
    fn u(&self, x: &[f64]) -> f64;
    /// `Δ²_{R^d} u`.
    fn bilap_u(&self, x: &[f64]) -> f64;
}

/// `u(x) = Π_i (1 - x_i²)²`, vanishing with its normal derivative on the
/// boundary of the unit cube.
#[derive(Debug, Clone)]
pub struct ProductQuartic {
    pub d: usize,
}

impl ProductQuartic {
    fn g(t: f64) -> f64 {
        let s = 1.0 - t * t;
        s * s
    }
    fn g2(t: f64) -> f64 {
        12.0 * t * t - 4.0
    }
    fn g4(_t: f64) -> f64 {
        24.0
    }
}

impl TestFunction for ProductQuartic {
    fn dimension(&self) -> usize {
        self.d
    }

    fn u(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| Self::g(t)).product()
    }

    fn bilap_u(&self, x: &[f64]) -> f64 {
        let d = self.d;
        let g: Vec<f64> = x.iter().map(|&t| Self::g(t)).collect();
        let g2: Vec<f64> = x.iter().map(|&t| Self::g2(t)).collect();
        let mut acc = 0.0;
        for i in 0..d {
            let mut term = Self::g4(x[i]);
            for (j, &gj) in g.iter().enumerate() {
                if j != i {
                    term *= gj;
                }
            }
            acc += term;
        }
        for i in 0..d {
            for k in 0..d {
                if i == k {
                    continue;
                }
                let mut term = g2[i] * g2[k];
                for (j, &gj) in g.iter().enumerate() {
                    if j != i && j != k {
                        term *= gj;
                    }
                }
                acc += term;
            }
        }
        acc
    }
}

/// One row of the discrete-vs-continuum comparison.
#[derive(Debug, Clone)]
pub struct ContinuumRow {
    pub l: i64,
    /// `‖Δu_L - Δ(G_L f_L)‖_{L²(cl₁)}`.
    pub norm: f64,
}

#[derive(Debug, Clone)]
pub struct ContinuumReport {
    pub rows: Vec<ContinuumRow>,
    /// Least-squares slope of `log norm` against `log L`.
    pub fitted_exponent: f64,
}

/// Scaled lattice restriction `f_L(x) = L^{-d/2-2} f(x/L)` of the continuum
/// bi-Laplacian of the test function.
pub fn scaled_rhs(geom: &BoxGeometry, tf: &dyn TestFunction) -> LatticeField {
    let d = geom.d();
    let l = geom.l() as f64;
    let scale = l.powf(-(d as f64) / 2.0 - 2.0);
    let mut f = LatticeField::zeros(geom, DomainTag::Box);
    let mut coords = vec![0i64; d];
    let mut point = vec![0.0; d];
    for i in 0..geom.interior_count() {
        geom.interior_coords_into(i, &mut coords);
        for (p, &c) in point.iter_mut().zip(&coords) {
            *p = c as f64 / l;
        }
        f.values_mut()[i] = scale * tf.bilap_u(&point);
    }
    f
}

/// Rescaled continuum solution on `Cl2`, `u_L(x) = L^{-d/2+2} u(x/(L+2))`.
pub fn scaled_solution(geom: &BoxGeometry, tf: &dyn TestFunction) -> LatticeField {
    let d = geom.d();
    let l = geom.l() as f64;
    let scale = l.powf(-(d as f64) / 2.0 + 2.0);
    let denom = l + 2.0;
    let mut u = LatticeField::zeros(geom, DomainTag::Cl2);
    let n = geom.interior_count();
    let mut coords = vec![0i64; d];
    let mut point = vec![0.0; d];
    for i in 0..n {
        geom.interior_coords_into(i, &mut coords);
        for (p, &c) in point.iter_mut().zip(&coords) {
            *p = c as f64 / denom;
        }
        u.values_mut()[i] = scale * tf.u(&point);
    }
    for b in 0..geom.boundary2_count() {
        let bc = geom.boundary2_coords(b);
        for (p, &c) in point.iter_mut().zip(bc) {
            *p = c as f64 / denom;
        }
        u.values_mut()[n + b] = scale * tf.u(&point);
    }
    u
}

/// Verify the clamped boundary data of a test function by sampling each face.
pub fn check_clamped_boundary(tf: &dyn TestFunction) -> Result<()> {
    let d = tf.dimension();
    let samples = 7usize;
    let h = 1e-6;
    let mut x = vec![0.0; d];
    for axis in 0..d {
        for sign in [-1.0f64, 1.0] {
            for s in 0..samples.pow((d - 1).max(1) as u32).min(49) {
                let mut rem = s;
                for j in 0..d {
                    if j == axis {
                        x[j] = sign;
                    } else {
                        x[j] = -0.9 + 1.8 * ((rem % samples) as f64) / (samples - 1) as f64;
                        rem /= samples;
                    }
                }
                let val = tf.u(&x);
                if val.abs() > 1e-10 {
                    return Err(Error::Parameter(format!(
                        "test function does not vanish on the boundary: u({x:?}) = {val:.3e}"
                    )));
                }
                let mut xin = x.clone();
                xin[axis] -= sign * h;
                let normal = (tf.u(&x) - tf.u(&xin)) / h;
                if normal.abs() > 1e-4 {
                    return Err(Error::Parameter(format!(
                        "normal derivative does not vanish at {x:?}: {normal:.3e}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Sweep the discrete-vs-continuum comparison over box sizes.
pub fn continuum_comparison(tf: &dyn TestFunction, ls: &[i64]) -> Result<ContinuumReport> {
    check_clamped_boundary(tf)?;
    let d = tf.dimension();
    let mut rows = Vec::new();
    for &l in ls {
        let geom = Arc::new(build_geometry(d, l)?);
        let cache = GreenCache::new(geom.clone());
        let f_l = scaled_rhs(&geom, tf);
        let v = cache.bilaplacian_green(&f_l)?;
        let u_l = scaled_solution(&geom, tf);
        let du = laplacian_cl1(&geom, &u_l);
        let dv = laplacian_cl1(&geom, &v);
        let norm: f64 = du
            .values()
            .iter()
            .zip(dv.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        rows.push(ContinuumRow { l, norm });
    }
    let fitted_exponent = fit_log_slope(
        &rows.iter().map(|r| r.l as f64).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.norm).collect::<Vec<_>>(),
    );
    Ok(ContinuumReport {
        rows,
        fitted_exponent,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}
