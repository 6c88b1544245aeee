//! Full-lattice Green's function for `d ≥ 3` and the two-dimensional
//! potential kernel.
//!
//! For `d ≥ 3` the positive kernel `g` with `Δg = -1_0` is evaluated through
//! the Laplace representation `g(x) = ∫_0^∞ e^{-2dt} Π_i I_{x_i}(2t) dt`,
//! with the tail beyond the quadrature window integrated analytically from
//! the uniform asymptotic series of the scaled Bessel functions. For `d = 2`
//! the kernel `a` with `Δa = 1_0`, `a(0) = 0` is evaluated from the exact
//! one-dimensional reduction with `cosh t = 2 - cos k`, whose integrand is
//! analytic on `[0, π]`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::quadrature::composite_gauss;

/// Largest per-coordinate offset the evaluator will tabulate.
pub const COORD_RANGE_MAX: i64 = 64;

/// Memoizing evaluator for the infinite-lattice kernel in a fixed dimension.
#[derive(Debug)]
pub struct InfiniteGreen {
    d: usize,
    memo: HashMap<Vec<i64>, f64>,
    bessel: Option<BesselTable>,
}

impl InfiniteGreen {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Parameter(
                "infinite-lattice kernel needs d >= 2".into(),
            ));
        }
        Ok(InfiniteGreen {
            d,
            memo: HashMap::new(),
            bessel: None,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    /// Kernel value at offset `x`: the positive Green's function for
    /// `d ≥ 3`, the potential kernel for `d = 2`.
    pub fn eval(&mut self, x: &[i64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::Parameter(format!(
                "offset has {} coordinates, dimension is {}",
                x.len(),
                self.d
            )));
        }
        let mut key: Vec<i64> = x.iter().map(|c| c.abs()).collect();
        key.sort_unstable();
        if key[self.d - 1] > COORD_RANGE_MAX {
            return Err(Error::Range(format!(
                "offset {:?} beyond the tabulated range ±{COORD_RANGE_MAX}",
                x
            )));
        }
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = if self.d == 2 {
            potential_kernel_2d(key[0], key[1])
        } else {
            let n_max = key[self.d - 1] as usize;
            let need_rebuild = match &self.bessel {
                Some(t) => t.n_max < n_max,
                None => true,
            };
            if need_rebuild {
                // Grow in chunks so nearby requests reuse the table.
                let target = (n_max + 8).max(24).min(COORD_RANGE_MAX as usize);
                self.bessel = Some(BesselTable::build(target));
            }
            let table = self.bessel.as_ref().unwrap();
            green_from_table(self.d, &key, table)
        };
        self.memo.insert(key, v);
        Ok(v)
    }
}

/// One-shot evaluation (prefer [`InfiniteGreen`] for repeated use).
pub fn infinite_green(d: usize, x: &[i64]) -> Result<f64> {
    InfiniteGreen::new(d)?.eval(x)
}

/// Two-dimensional potential kernel `a` with `Δa = 1_0` and `a(0) = 0`,
/// normalized for the sum-form Laplacian (no `1/2d`).
///
/// Exact 1D reduction: with `cosh t(k) = 2 - cos k`, the classical kernel is
/// `(2/π) ∫_0^π [1 - e^{-|x₁| t(k)} cos(x₂ k)] / sinh t(k) dk`; dividing by
/// `2d = 4` matches the sum-form normalization. The integrand is analytic on
/// `[0, π]`, so the composite Gauss rule converges spectrally.
pub fn potential_kernel_2d(x1: i64, x2: i64) -> f64 {
    let (m, n) = (x1.abs().max(x2.abs()), x1.abs().min(x2.abs()));
    if m == 0 {
        return 0.0;
    }
    // Enough panels to resolve cos(n k) oscillation and the e^{-m t} layer.
    let panels = 40 + 2 * m as usize;
    let (ks, ws) = composite_gauss(12, panels, 0.0, std::f64::consts::PI);
    let mut acc = 0.0;
    for (&k, &w) in ks.iter().zip(&ws) {
        // u = cosh t - 1 = 1 - cos k, computed stably.
        let u = 2.0 * (0.5 * k).sin().powi(2);
        let t = acosh_1p(u);
        let sinh_t = (u * (2.0 + u)).sqrt();
        let integrand = (1.0 - (-(m as f64) * t).exp() * ((n as f64) * k).cos()) / sinh_t;
        acc += w * integrand;
    }
    acc / (2.0 * std::f64::consts::PI)
}

/// `acosh(1 + u) = ln(1 + u + sqrt(u(2+u)))`, stable for small `u ≥ 0`.
fn acosh_1p(u: f64) -> f64 {
    (u + (u * (2.0 + u)).sqrt()).ln_1p()
}

/// Scaled Bessel values `e^{-z} I_n(z)` for `n = 0..=n_max` on the quadrature
/// nodes of `[0, T]`, plus the node weights.
#[derive(Debug)]
struct BesselTable {
    n_max: usize,
    t_end: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Row-major: `ive[node][n]`.
    ive: Vec<f64>,
}

impl BesselTable {
    fn build(n_max: usize) -> Self {
        // The asymptotic tail series needs T well past 4 n_max² / 16;
        // unit-width panels resolve the integrand to ~1e-13.
        let t_end = (2.0 * (n_max as f64).powi(2)).max(400.0);
        let panels = t_end.ceil() as usize;
        let (nodes, weights) = composite_gauss(10, panels, 0.0, t_end);
        let cols = n_max + 1;
        let mut ive = vec![0.0; nodes.len() * cols];
        for (j, &t) in nodes.iter().enumerate() {
            scaled_bessel_i(2.0 * t, n_max, &mut ive[j * cols..(j + 1) * cols]);
        }
        BesselTable {
            n_max,
            t_end,
            nodes,
            weights,
            ive,
        }
    }
}

/// `e^{-z} I_n(z)` for all `n = 0..=n_max` by Miller's backward recurrence
/// with the normalization `e^{-z}(I_0 + 2 Σ_{k≥1} I_k) = 1`.
fn scaled_bessel_i(z: f64, n_max: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), n_max + 1);
    if z == 0.0 {
        out[0] = 1.0;
        for o in out.iter_mut().skip(1) {
            *o = 0.0;
        }
        return;
    }
    if z < 1e-8 {
        // Two-term series is exact to double precision here.
        out[0] = (1.0 - z) * (1.0 + z * z / 4.0);
        if n_max >= 1 {
            out[1] = 0.5 * z;
        }
        for o in out.iter_mut().skip(2) {
            *o = 0.0;
        }
        return;
    }
    let start = (z.ceil() as usize).max(n_max) + 20 + (12.0 * z.cbrt()).ceil() as usize;
    let mut b_next = 0.0f64;
    let mut b_cur = 1e-280f64;
    let mut norm = 0.0f64;
    for k in (1..=start).rev() {
        let b_prev = b_next + (2.0 * k as f64 / z) * b_cur;
        b_next = b_cur;
        b_cur = b_prev;
        // b_cur ~ I_{k-1}; accumulate 2·I_k terms.
        norm += 2.0 * b_next;
        if k - 1 <= n_max {
            out[k - 1] = b_cur;
        }
        if b_cur > 1e250 {
            let scale = 1e-250;
            b_cur *= scale;
            b_next *= scale;
            norm *= scale;
            for o in out.iter_mut() {
                *o *= scale;
            }
        }
    }
    norm += b_cur; // I_0 term
    for o in out.iter_mut() {
        *o /= norm;
    }
}

fn green_from_table(d: usize, sorted_abs: &[i64], table: &BesselTable) -> f64 {
    let cols = table.n_max + 1;
    let mut acc = 0.0;
    for (j, (&_t, &w)) in table.nodes.iter().zip(&table.weights).enumerate() {
        let row = &table.ive[j * cols..(j + 1) * cols];
        let mut prod = w;
        for &n in sorted_abs {
            prod *= row[n as usize];
        }
        acc += prod;
    }
    acc + green_tail(d, sorted_abs, table.t_end)
}

/// Tail `∫_T^∞ Π e^{-2t} I_{n_i}(2t) dt` from the product of the uniform
/// asymptotic series `e^{-z}I_n(z) ~ (4πt)^{-1/2} Σ_k γ_k(n) t^{-k}`.
fn green_tail(d: usize, sorted_abs: &[i64], t_end: f64) -> f64 {
    const ORDER: usize = 5;
    let mut coeff = [0.0f64; ORDER];
    coeff[0] = 1.0;
    for &n in sorted_abs {
        let mu = 4.0 * (n as f64) * (n as f64);
        let mut gamma = [0.0f64; ORDER];
        gamma[0] = 1.0;
        let mut prod = 1.0;
        for k in 1..ORDER {
            let odd = (2 * k - 1) as f64;
            prod *= -(mu - odd * odd) / (k as f64 * 16.0);
            gamma[k] = prod;
        }
        let mut next = [0.0f64; ORDER];
        for i in 0..ORDER {
            for k in 0..ORDER - i {
                next[i + k] += coeff[i] * gamma[k];
            }
        }
        coeff = next;
    }
    let pref = (4.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0);
    let mut tail = 0.0;
    for (m, &c) in coeff.iter().enumerate() {
        let expo = d as f64 / 2.0 + m as f64 - 1.0;
        tail += c * t_end.powf(-expo) / expo;
    }
    pref * tail
}
