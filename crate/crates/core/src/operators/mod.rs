//! Discrete Laplacian and bi-Laplacian with Dirichlet data on the cube,
//! their Green's machinery, Poisson kernels and boundary maps.
//!
//! Sign convention: the stored Green's kernel `Γ` satisfies `Δ Γ(·,y) = 1_y`
//! with zero boundary data, which makes `Γ ≤ 0`. The classical positive
//! kernel is its negation; [`POSITIVE_KERNEL_SIGN`] records the flip, and the
//! Poisson kernel is assembled as `P^z = -Γ(·, z̃)` on the interior.

mod infinite;
mod solver;

pub use infinite::{infinite_green, potential_kernel_2d, InfiniteGreen, COORD_RANGE_MAX};
pub use solver::{pcg, DstSolver};

use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::lattice::{BoxGeometry, DomainTag, LatticeField};
use solver::{build_bilap_engine, BilapEngine};

/// Multiply stored Green's values by this to obtain the classical positive
/// kernel.
pub const POSITIVE_KERNEL_SIGN: f64 = -1.0;

/// Largest number of entries allowed in a dense Poisson-kernel matrix.
const POISSON_ENTRY_LIMIT: usize = 300_000_000;

/// Support size up to which the bi-Laplacian uses the exact Woodbury solve.
const WOODBURY_LIMIT: usize = 3600;

/// Discrete Laplacian `Δv(x) = Σ_{y∼x} (v(y) - v(x))` of a field (extended
/// by zero), evaluated at interior sites.
pub fn laplacian(geom: &BoxGeometry, v: &LatticeField) -> LatticeField {
    let vc = v.to_tag(geom, DomainTag::Cl1);
    let mut out = LatticeField::zeros(geom, DomainTag::Box);
    lap_box_from_cl1(geom, vc.values(), out.values_mut());
    out
}

/// Same stencil evaluated on `Cl1` (interior plus first boundary); the input
/// is extended by zero to `Cl2` as needed.
pub fn laplacian_cl1(geom: &BoxGeometry, v: &LatticeField) -> LatticeField {
    let vc = v.to_tag(geom, DomainTag::Cl2);
    let mut out = LatticeField::zeros(geom, DomainTag::Cl1);
    lap_cl1_from_cl2(geom, vc.values(), out.values_mut());
    out
}

pub(crate) fn lap_box_from_cl1(geom: &BoxGeometry, v_cl1: &[f64], out: &mut [f64]) {
    let n = geom.interior_count();
    let two_d = 2 * geom.d();
    for (x, o) in out.iter_mut().enumerate().take(n) {
        let mut acc = -(two_d as f64) * v_cl1[x];
        for dir in 0..two_d {
            acc += v_cl1[geom.neighbor_cl1(x, dir)];
        }
        *o = acc;
    }
}

pub(crate) fn lap_cl1_from_cl2(geom: &BoxGeometry, v_cl2: &[f64], out: &mut [f64]) {
    let cl1 = geom.site_count(DomainTag::Cl1);
    let n = geom.interior_count();
    let two_d = 2 * geom.d();
    for x in 0..cl1 {
        let own = if x < n {
            v_cl2[x]
        } else {
            v_cl2[n + geom.b1_in_b2(x - n)]
        };
        let mut acc = -(two_d as f64) * own;
        for dir in 0..two_d {
            acc += v_cl2[geom.neighbor_cl2(x, dir)];
        }
        out[x] = acc;
    }
}

/// `Δ` of a Box-supported field evaluated on `Cl1`, without materializing the
/// `Cl2` extension.
pub(crate) fn lap_cl1_from_box(geom: &BoxGeometry, v_box: &[f64], out: &mut [f64]) {
    let cl1 = geom.site_count(DomainTag::Cl1);
    let n = geom.interior_count();
    let two_d = 2 * geom.d();
    for x in 0..cl1 {
        if x < n {
            let mut acc = -(two_d as f64) * v_box[x];
            for dir in 0..two_d {
                let t = geom.neighbor_cl1(x, dir);
                if t < n {
                    acc += v_box[t];
                }
            }
            out[x] = acc;
        } else {
            // Boundary site: the only in-cube neighbor is z̃.
            out[x] = v_box[geom.tilde(x - n)];
        }
    }
}

/// The clamped bi-Laplacian `Δ²` applied to a Box-supported field, equal to
/// `Δ∘Δ` composed through the first boundary layer.
pub fn bilap_apply(geom: &BoxGeometry, v_box: &[f64]) -> Vec<f64> {
    let cl1 = geom.site_count(DomainTag::Cl1);
    let mut mid = vec![0.0; cl1];
    lap_cl1_from_box(geom, v_box, &mut mid);
    let mut out = vec![0.0; geom.interior_count()];
    lap_box_from_cl1(geom, &mid, &mut out);
    out
}

/// Dense Poisson-kernel matrix: one row per boundary site `z`, holding the
/// discrete harmonic function with boundary data `1_z`, restricted to the
/// interior.
#[derive(Debug)]
pub struct PoissonKernel {
    b: usize,
    n: usize,
    rows: Vec<f64>,
}

impl PoissonKernel {
    pub fn boundary_count(&self) -> usize {
        self.b
    }

    pub fn interior_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, z: usize) -> &[f64] {
        &self.rows[z * self.n..(z + 1) * self.n]
    }

    /// `w_z = Σ_x P^z(x) v(x)` for all boundary `z`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.b)
            .map(|z| crate::lattice::dot(self.row(z), v))
            .collect()
    }

    /// `u(x) = Σ_z w_z P^z(x)`.
    pub fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for z in 0..self.b {
            let wz = w[z];
            if wz == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(z)) {
                *o += wz * p;
            }
        }
        out
    }

    /// Gram matrix `⟨P^z, P^w⟩` over the interior.
    pub fn gram_interior(&self) -> nalgebra::DMatrix<f64> {
        let mut g = nalgebra::DMatrix::<f64>::zeros(self.b, self.b);
        for z in 0..self.b {
            for w in z..self.b {
                let v = crate::lattice::dot(self.row(z), self.row(w));
                g[(z, w)] = v;
                g[(w, z)] = v;
            }
        }
        g
    }

    /// Full `P^z` as a CL1 field (boundary part is the indicator of `z`).
    pub fn row_cl1(&self, geom: &BoxGeometry, z: usize) -> LatticeField {
        let mut f = LatticeField::zeros(geom, DomainTag::Cl1);
        f.values_mut()[..self.n].copy_from_slice(self.row(z));
        f.values_mut()[self.n + z] = 1.0;
        f
    }
}

/// Precomputed solver state for a fixed geometry: the sine-transform solver,
/// the bi-Laplacian engine and (lazily) the Poisson kernel matrix.
pub struct GreenCache {
    geom: Arc<BoxGeometry>,
    dst: DstSolver,
    bilap: OnceLock<BilapEngine>,
    poisson: OnceLock<PoissonKernel>,
}

impl std::fmt::Debug for GreenCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenCache")
            .field("d", &self.geom.d())
            .field("l", &self.geom.l())
            .finish()
    }
}

impl GreenCache {
    pub fn new(geom: Arc<BoxGeometry>) -> Self {
        let dst = DstSolver::new(geom.d(), geom.n1d());
        GreenCache {
            geom,
            dst,
            bilap: OnceLock::new(),
            poisson: OnceLock::new(),
        }
    }

    pub fn geometry(&self) -> &Arc<BoxGeometry> {
        &self.geom
    }

    pub fn dst(&self) -> &DstSolver {
        &self.dst
    }

    /// Solve `Δφ = η` in the cube with `φ = 0` outside; the result is a CL1
    /// field whose boundary values are zero.
    pub fn dirichlet_solve(&self, eta: &LatticeField) -> Result<LatticeField> {
        let n = self.geom.interior_count();
        let eta_box = eta.to_tag(&self.geom, DomainTag::Box);
        let mut interior = eta_box.values().to_vec();
        self.dst.solve_in_place(&mut interior);

        // Residual audit against the stencil.
        let mut phi = LatticeField::zeros(&self.geom, DomainTag::Cl1);
        phi.values_mut()[..n].copy_from_slice(&interior);
        let lap = laplacian(&self.geom, &phi);
        let scale = eta_box
            .values()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let resid = lap
            .values()
            .iter()
            .zip(eta_box.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if scale > 0.0 && resid > 1e-10 * scale {
            return Err(Error::Numerical {
                what: "Dirichlet solve residual".into(),
                residual: resid / scale,
                tol: 1e-10,
            });
        }
        Ok(phi)
    }

    /// Raw interior solve without the residual audit (hot paths).
    pub fn solve_interior(&self, rhs: &mut [f64]) {
        self.dst.solve_in_place(rhs);
    }

    /// Column `Γ(·, y)` of the stored Green's kernel as a CL1 field.
    pub fn green_column(&self, y: usize) -> LatticeField {
        let ind = LatticeField::indicator(&self.geom, DomainTag::Box, y);
        let mut interior = ind.into_values();
        self.dst.solve_in_place(&mut interior);
        let mut out = LatticeField::zeros(&self.geom, DomainTag::Cl1);
        let n = self.geom.interior_count();
        out.values_mut()[..n].copy_from_slice(&interior);
        out
    }

    /// The Poisson kernel matrix, built on first use.
    pub fn poisson(&self) -> Result<&PoissonKernel> {
        let n = self.geom.interior_count();
        let b = self.geom.boundary_count();
        if b.saturating_mul(n) > POISSON_ENTRY_LIMIT {
            return Err(Error::Parameter(format!(
                "dense Poisson kernel would need {b}×{n} entries; beyond the limit"
            )));
        }
        Ok(self.poisson.get_or_init(|| {
            let mut rows = vec![0.0; b * n];
            let mut col_cache: std::collections::HashMap<usize, Vec<f64>> =
                std::collections::HashMap::new();
            for z in 0..b {
                let t = self.geom.tilde(z);
                let col = col_cache.entry(t).or_insert_with(|| {
                    let mut c = vec![0.0; n];
                    c[t] = 1.0;
                    self.dst.solve_in_place(&mut c);
                    c
                });
                for (r, &g) in rows[z * n..(z + 1) * n].iter_mut().zip(col.iter()) {
                    *r = POSITIVE_KERNEL_SIGN * g;
                }
            }
            PoissonKernel { b, n, rows }
        }))
    }

    /// Boundary map `α^z(η) = -⟨P^z, η⟩`, one value per boundary site.
    pub fn alpha_z(&self, eta: &LatticeField) -> Result<Vec<f64>> {
        let p = self.poisson()?;
        let eta_box = eta.to_tag(&self.geom, DomainTag::Box);
        Ok(p.apply(eta_box.values()).iter().map(|v| -v).collect())
    }

    /// The same map computed through the Dirichlet solve: `α^z(η) = Δφ(z)`,
    /// which on the cube is the value of `φ` at the interior neighbor of `z`.
    pub fn alpha_z_via_solve(&self, eta: &LatticeField) -> Result<Vec<f64>> {
        let phi = self.dirichlet_solve(eta)?;
        let b = self.geom.boundary_count();
        Ok((0..b).map(|z| phi.values()[self.geom.tilde(z)]).collect())
    }

    fn bilap_engine(&self) -> &BilapEngine {
        self.bilap.get_or_init(|| {
            let n = self.geom.interior_count();
            let diag: Vec<f64> = (0..n)
                .map(|i| self.geom.boundary_neighbor_count(i) as f64)
                .collect();
            build_bilap_engine(&self.dst, &diag, WOODBURY_LIMIT)
        })
    }

    /// Solve `Δ²v = f` in the cube with `v = 0` outside (clamped data on both
    /// outer layers); the result is a CL2 field vanishing off the interior.
    pub fn bilaplacian_green(&self, f: &LatticeField) -> Result<LatticeField> {
        let geom = &self.geom;
        let n = geom.interior_count();
        let f_box = f.to_tag(geom, DomainTag::Box);
        // The composed stencil equals Δ_L² + D with D the boundary-neighbor
        // diagonal, which is the operator the engine was built for.
        let apply = |v: &[f64]| -> Vec<f64> { bilap_apply(geom, v) };
        let engine = self.bilap_engine();
        let mut sol = engine
            .solve(&self.dst, &apply, f_box.values())
            .map_err(Error::Solver)?;

        let f_norm = f_box.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual_inf = |v: &[f64]| -> f64 {
            bilap_apply(geom, v)
                .iter()
                .zip(f_box.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        // At large boxes the conditioning of Δ² puts the plain relative
        // residual at the eps·κ floor; iterative refinement recovers most
        // of it before the backward-error audit below.
        let mut resid = residual_inf(&sol);
        for _ in 0..2 {
            if resid <= 1e-9 * f_norm {
                break;
            }
            let r: Vec<f64> = bilap_apply(geom, &sol)
                .iter()
                .zip(f_box.values())
                .map(|(a, b)| b - a)
                .collect();
            let delta = engine.solve(&self.dst, &apply, &r).map_err(Error::Solver)?;
            for (s, d) in sol.iter_mut().zip(&delta) {
                *s += d;
            }
            let new_resid = residual_inf(&sol);
            if new_resid >= resid {
                break;
            }
            resid = new_resid;
        }
        // Backward-error audit: ‖Δ²‖_∞ ≤ (4d)² for the composed stencil.
        let v_norm = sol.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let op_norm = (4.0 * geom.d() as f64).powi(2);
        let scale = f_norm + op_norm * v_norm;
        if scale > 0.0 && resid > 1e-9 * scale {
            return Err(Error::Numerical {
                what: "bi-Laplacian solve residual".into(),
                residual: resid / scale,
                tol: 1e-9,
            });
        }
        let mut out = LatticeField::zeros(geom, DomainTag::Cl2);
        out.values_mut()[..n].copy_from_slice(&sol);
        Ok(out)
    }

    /// Persist the Poisson kernel matrix (versioned header + row-major f64).
    pub fn save_poisson(&self, path: &std::path::Path) -> Result<()> {
        let p = self.poisson()?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"MLPK")?;
        f.write_all(&1u32.to_le_bytes())?;
        f.write_all(&(self.geom.d() as u32).to_le_bytes())?;
        f.write_all(&self.geom.l().to_le_bytes())?;
        f.write_all(&(p.b as u64).to_le_bytes())?;
        f.write_all(&(p.n as u64).to_le_bytes())?;
        for v in &p.rows {
            f.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Load a previously saved Poisson kernel, validating the key.
    pub fn load_poisson(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        f.read_exact(&mut magic)?;
        if &magic != b"MLPK" {
            return Err(Error::Format("bad magic in Poisson cache".into()));
        }
        let mut u32buf = [0u8; 4];
        f.read_exact(&mut u32buf)?;
        if u32::from_le_bytes(u32buf) != 1 {
            return Err(Error::Format("unsupported Poisson cache version".into()));
        }
        f.read_exact(&mut u32buf)?;
        let d = u32::from_le_bytes(u32buf) as usize;
        let mut i64buf = [0u8; 8];
        f.read_exact(&mut i64buf)?;
        let l = i64::from_le_bytes(i64buf);
        if d != self.geom.d() || l != self.geom.l() {
            return Err(Error::Format(format!(
                "Poisson cache keyed by (d={d}, L={l}), geometry is (d={}, L={})",
                self.geom.d(),
                self.geom.l()
            )));
        }
        let mut u64buf = [0u8; 8];
        f.read_exact(&mut u64buf)?;
        let b = u64::from_le_bytes(u64buf) as usize;
        f.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        if b != self.geom.boundary_count() || n != self.geom.interior_count() {
            return Err(Error::Format("Poisson cache shape mismatch".into()));
        }
        let mut rows = vec![0.0f64; b * n];
        let mut buf = [0u8; 8];
        for v in rows.iter_mut() {
            f.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let _ = self.poisson.set(PoissonKernel { b, n, rows });
        Ok(())
    }
}
