//! Linear-solver engines behind the Green's machinery.
//!
//! The Dirichlet Laplacian on the cube separates into a Kronecker sum of 1D
//! second-difference operators, so solves are done exactly by a tensor
//! discrete sine transform. The clamped bi-Laplacian does not separate, but
//! it equals the squared Dirichlet Laplacian plus a diagonal boundary
//! correction, which either a Woodbury update (small boundaries) or a
//! sine-transform-preconditioned CG (large ones) handles.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Exact Dirichlet-Laplacian solver on `[-L,L]^d` via the tensor sine
/// transform. The 1D sine basis is involutive under the orthonormal scaling,
/// so the same transform is used forward and backward.
#[derive(Debug)]
pub struct DstSolver {
    d: usize,
    n1d: usize,
    /// Orthonormal sine matrix, row-major `n1d × n1d`, symmetric.
    s: Vec<f64>,
    /// Reciprocal eigenvalues of the d-dimensional Laplacian, lexicographic.
    inv_eig: Vec<f64>,
}

impl DstSolver {
    pub fn new(d: usize, n1d: usize) -> Self {
        let n = n1d;
        let norm = (2.0 / (n as f64 + 1.0)).sqrt();
        let mut s = vec![0.0; n * n];
        for k in 0..n {
            for i in 0..n {
                s[k * n + i] = norm
                    * ((i as f64 + 1.0) * (k as f64 + 1.0) * std::f64::consts::PI
                        / (n as f64 + 1.0))
                        .sin();
            }
        }
        let eig1d: Vec<f64> = (0..n)
            .map(|k| 2.0 * ((k as f64 + 1.0) * std::f64::consts::PI / (n as f64 + 1.0)).cos() - 2.0)
            .collect();
        let total = n.pow(d as u32);
        let mut inv_eig = vec![0.0; total];
        let mut idx = vec![0usize; d];
        for flat in 0..total {
            let mut rem = flat;
            for j in (0..d).rev() {
                idx[j] = rem % n;
                rem /= n;
            }
            let lam: f64 = idx.iter().map(|&k| eig1d[k]).sum();
            inv_eig[flat] = 1.0 / lam;
        }
        DstSolver { d, n1d: n, s, inv_eig }
    }

    pub fn site_count(&self) -> usize {
        self.inv_eig.len()
    }

    /// Apply the orthonormal sine transform along every axis, in place.
    ///
    /// Each axis contracts the `(n × inner)` panels against the sine matrix
    /// with a contiguous inner index, which keeps the kernel vectorizable.
    pub fn transform(&self, data: &mut [f64]) {
        let n = self.n1d;
        let total = data.len();
        debug_assert_eq!(total, self.site_count());
        let mut panel = vec![0.0; total];
        let mut inner = total / n;
        // Axis 0 has the largest stride; process axes from slowest to fastest.
        for _axis in 0..self.d {
            if inner == 1 {
                // Fastest axis: contiguous lines, plain dense matvec.
                for block in data.chunks_exact_mut(n) {
                    let line = &mut panel[..n];
                    line.copy_from_slice(block);
                    for (k, out) in block.iter_mut().enumerate() {
                        let s_row = &self.s[k * n..(k + 1) * n];
                        let mut acc = 0.0;
                        for (sv, &lv) in s_row.iter().zip(line.iter()) {
                            acc += sv * lv;
                        }
                        *out = acc;
                    }
                }
            } else {
                let outer = total / (n * inner);
                for o in 0..outer {
                    let base = o * n * inner;
                    let block = &mut data[base..base + n * inner];
                    panel[..n * inner].copy_from_slice(block);
                    for (k, out_row) in block.chunks_exact_mut(inner).enumerate() {
                        let s_row = &self.s[k * n..(k + 1) * n];
                        out_row.fill(0.0);
                        for (i, src) in panel[..n * inner].chunks_exact(inner).enumerate() {
                            let s_ki = s_row[i];
                            for (out, &v) in out_row.iter_mut().zip(src) {
                                *out += s_ki * v;
                            }
                        }
                    }
                }
            }
            inner /= n;
        }
    }

    /// Solve `Δφ = rhs` with zero boundary data, in place.
    pub fn solve_in_place(&self, data: &mut [f64]) {
        self.transform(data);
        for (v, &ie) in data.iter_mut().zip(&self.inv_eig) {
            *v *= ie;
        }
        self.transform(data);
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut data = rhs.to_vec();
        self.solve_in_place(&mut data);
        data
    }
}

/// Solver for the clamped bi-Laplacian system `(Δ_L² + D) v = f`, where `D`
/// is the diagonal count of boundary neighbors.
#[derive(Debug)]
pub enum BilapEngine {
    /// Exact: Woodbury update of the squared-Laplacian inverse over the
    /// inner boundary layer.
    Woodbury {
        /// Interior indices with at least one boundary neighbor.
        support: Vec<usize>,
        /// sqrt of the diagonal entries on the support.
        sqrt_d: Vec<f64>,
        chol: Cholesky<f64, Dyn>,
    },
    /// Preconditioned conjugate gradients with the squared-Laplacian inverse
    /// as preconditioner.
    Pcg { tol: f64, max_iter: usize },
}

/// Build the engine. `diag` is the full diagonal of `D` over interior sites.
pub fn build_bilap_engine(
    dst: &DstSolver,
    diag: &[f64],
    woodbury_limit: usize,
) -> BilapEngine {
    let support: Vec<usize> = (0..diag.len()).filter(|&i| diag[i] > 0.0).collect();
    if support.len() <= woodbury_limit {
        let m = support.len();
        let sqrt_d: Vec<f64> = support.iter().map(|&i| diag[i].sqrt()).collect();
        let mut w = DMatrix::<f64>::identity(m, m);
        let n = diag.len();
        let mut col = vec![0.0; n];
        for (j, (&sj, &dj)) in support.iter().zip(&sqrt_d).enumerate() {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[sj] = dj;
            dst.solve_in_place(&mut col);
            dst.solve_in_place(&mut col);
            for (i, (&si, &di)) in support.iter().zip(&sqrt_d).enumerate() {
                w[(i, j)] += di * col[si];
            }
        }
        match Cholesky::new(w) {
            Some(chol) => BilapEngine::Woodbury {
                support,
                sqrt_d,
                chol,
            },
            // SPD by construction; if factorization fails numerically fall
            // back to iteration.
            None => BilapEngine::Pcg {
                tol: 1e-12,
                max_iter: 20_000,
            },
        }
    } else {
        BilapEngine::Pcg {
            tol: 1e-12,
            max_iter: 20_000,
        }
    }
}

impl BilapEngine {
    /// Solve `(Δ_L² + D) v = f`. `apply_a` must evaluate that operator.
    pub fn solve(
        &self,
        dst: &DstSolver,
        apply_a: &dyn Fn(&[f64]) -> Vec<f64>,
        f: &[f64],
    ) -> Result<Vec<f64>, String> {
        match self {
            BilapEngine::Woodbury {
                support,
                sqrt_d,
                chol,
            } => {
                let mut t = f.to_vec();
                dst.solve_in_place(&mut t);
                dst.solve_in_place(&mut t);
                let mut u = DVector::<f64>::zeros(support.len());
                for (i, (&si, &di)) in support.iter().zip(sqrt_d).enumerate() {
                    u[i] = di * t[si];
                }
                let w = chol.solve(&u);
                let mut corr = vec![0.0; f.len()];
                for (i, (&si, &di)) in support.iter().zip(sqrt_d).enumerate() {
                    corr[si] = di * w[i];
                }
                dst.solve_in_place(&mut corr);
                dst.solve_in_place(&mut corr);
                for (ti, ci) in t.iter_mut().zip(&corr) {
                    *ti -= ci;
                }
                Ok(t)
            }
            BilapEngine::Pcg { tol, max_iter } => {
                pcg(apply_a, &|r| {
                    let mut z = r.to_vec();
                    dst.solve_in_place(&mut z);
                    dst.solve_in_place(&mut z);
                    z
                }, f, *tol, *max_iter)
            }
        }
    }
}

/// Preconditioned conjugate gradients for SPD systems.
pub fn pcg(
    apply_a: &dyn Fn(&[f64]) -> Vec<f64>,
    apply_prec: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, String> {
    let n = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = apply_prec(&r);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _it in 0..max_iter {
        let ap = apply_a(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(format!("matrix not positive definite (pᵀAp = {pap:.3e})"));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= rel_tol * bnorm {
            return Ok(x);
        }
        z = apply_prec(&r);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(format!(
        "no convergence within {max_iter} iterations (‖b‖ = {bnorm:.3e})"
    ))
}
