//! Single-spin potential `V` and the one-dimensional machinery built on it:
//! the tilted measure `ν^β ∝ exp(βξ - V(ξ))`, its cumulant generating
//! function, and the minimizer `U^β` of the one-dimensional quadratic energy
//! `E[½|v'|² + ½V''v²] - E[v]`.

use crate::error::{Error, Result};

/// Largest tilt / c.g.f. argument accepted by the quadrature machinery.
pub const MAX_TILT: f64 = 10.0;

/// Nodes of the fixed quadrature grid.
pub const GRID_NODES: usize = 2049;

/// Symmetric uniformly convex potential with exact derivative bounds.
///
/// `quadratic(c)` is `½cξ²`; `logcosh(c, a)` is `½cξ² + a·log cosh ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    Quadratic { c: f64 },
    LogCosh { c: f64, a: f64 },
}

impl Potential {
    pub fn quadratic(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Parameter(format!("quadratic: need c > 0, got {c}")));
        }
        Ok(Potential::Quadratic { c })
    }

    pub fn logcosh(c: f64, a: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Parameter(format!("logcosh: need c > 0, got {c}")));
        }
        if !(a >= 0.0) {
            return Err(Error::Parameter(format!("logcosh: need a >= 0, got {a}")));
        }
        Ok(Potential::LogCosh { c, a })
    }

    /// Named constructor used by configuration files.
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        match (name, params) {
            ("quadratic", [c]) => Self::quadratic(*c),
            ("logcosh", [c, a]) => Self::logcosh(*c, *a),
            _ => Err(Error::Parameter(format!(
                "unknown potential {name:?} with {} parameter(s)",
                params.len()
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::Quadratic { .. } => "quadratic",
            Potential::LogCosh { .. } => "logcosh",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Potential::Quadratic { c } => vec![*c],
            Potential::LogCosh { c, a } => vec![*c, *a],
        }
    }

    #[inline]
    pub fn v(&self, x: f64) -> f64 {
        match self {
            Potential::Quadratic { c } => 0.5 * c * x * x,
            Potential::LogCosh { c, a } => 0.5 * c * x * x + a * ln_cosh(x),
        }
    }

    #[inline]
    pub fn dv(&self, x: f64) -> f64 {
        match self {
            Potential::Quadratic { c } => c * x,
            Potential::LogCosh { c, a } => c * x + a * x.tanh(),
        }
    }

    #[inline]
    pub fn d2v(&self, x: f64) -> f64 {
        match self {
            Potential::Quadratic { c } => *c,
            Potential::LogCosh { c, a } => c + a * sech2(x),
        }
    }

    #[inline]
    pub fn d3v(&self, x: f64) -> f64 {
        match self {
            Potential::Quadratic { .. } => 0.0,
            Potential::LogCosh { a, .. } => -2.0 * a * sech2(x) * x.tanh(),
        }
    }

    /// `(V(x), V'(x))` sharing the transcendental work (one `exp` serves
    /// both `log cosh` and `tanh`). The sampler's hot loop lives on this.
    #[inline]
    pub fn v_and_dv(&self, x: f64) -> (f64, f64) {
        match self {
            Potential::Quadratic { c } => (0.5 * c * x * x, c * x),
            Potential::LogCosh { c, a } => {
                let ax = x.abs();
                let e = (-2.0 * ax).exp();
                let lncosh = ax + e.ln_1p() - std::f64::consts::LN_2;
                let tanh_abs = (1.0 - e) / (1.0 + e);
                let tanh = if x < 0.0 { -tanh_abs } else { tanh_abs };
                (0.5 * c * x * x + a * lncosh, c * x + a * tanh)
            }
        }
    }

    /// `inf V''`, exact for the built-ins.
    pub fn c_min(&self) -> f64 {
        match self {
            Potential::Quadratic { c } => *c,
            Potential::LogCosh { c, .. } => *c,
        }
    }

    /// `sup V''`, exact for the built-ins.
    pub fn c_max(&self) -> f64 {
        match self {
            Potential::Quadratic { c } => *c,
            Potential::LogCosh { c, a } => c + a,
        }
    }

    /// `sup |V'''|`; `a·4√3/9` for logcosh, from the closed form of
    /// `sup |2 sech² tanh|`.
    pub fn t_max(&self) -> f64 {
        match self {
            Potential::Quadratic { .. } => 0.0,
            Potential::LogCosh { a, .. } => a * 4.0 * 3.0_f64.sqrt() / 9.0,
        }
    }

    pub fn symmetric(&self) -> bool {
        true
    }
}

#[inline]
fn ln_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2
}

#[inline]
fn sech2(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Tilted single-spin measure `ν^β` discretized on a fixed uniform grid with
/// trapezoid weights. The grid doubles as the finite-difference mesh for
/// [`solve_u`].
#[derive(Debug, Clone)]
pub struct OneDMeasure {
    pot: Potential,
    beta: f64,
    r: f64,
    h: f64,
    xs: Vec<f64>,
    /// Normalized density-times-trapezoid weights, summing to 1.
    weights: Vec<f64>,
    /// Cumulative sums of `weights`.
    cum: Vec<f64>,
    /// log of `∫ exp(βξ - V(ξ)) dξ`.
    log_j: f64,
}

impl OneDMeasure {
    pub fn new(pot: Potential, beta: f64) -> Result<Self> {
        Self::with_nodes(pot, beta, GRID_NODES)
    }

    pub fn with_nodes(pot: Potential, beta: f64, n: usize) -> Result<Self> {
        if beta.abs() > MAX_TILT {
            return Err(Error::Parameter(format!(
                "tilt β = {beta} exceeds the maximum {MAX_TILT}"
            )));
        }
        if n < 8 {
            return Err(Error::Parameter("grid needs at least 8 nodes".into()));
        }
        let r = 9.0 / pot.c_min().sqrt();
        let h = 2.0 * r / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| -r + h * i as f64).collect();
        let logs: Vec<f64> = xs.iter().map(|&x| beta * x - pot.v(x)).collect();
        let lmax = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = logs.iter().map(|&l| (l - lmax).exp()).collect();
        weights[0] *= 0.5;
        weights[n - 1] *= 0.5;
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let mut cum = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cum.push(acc);
        }
        let log_j = lmax + (total * h).ln();
        Ok(OneDMeasure {
            pot,
            beta,
            r,
            h,
            xs,
            weights,
            cum,
            log_j,
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_j
    }

    /// Quadrature expectation of a function of the spin.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.xs
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn var(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    /// CDF at `t`, linearly interpolated between grid nodes.
    pub fn cdf(&self, t: f64) -> f64 {
        let n = self.xs.len();
        if t <= self.xs[0] {
            return 0.0;
        }
        if t >= self.xs[n - 1] {
            return 1.0;
        }
        let pos = (t - self.xs[0]) / self.h;
        let i = (pos.floor() as usize).min(n - 2);
        let frac = pos - i as f64;
        (self.cum[i] + frac * self.weights[i + 1]).min(1.0)
    }
}

/// Cumulant generating function `ψ(λ) = log E_{ν⁰} e^{λξ}` of the untilted
/// measure by quadrature. Errors if the tilted integrand has not decayed at
/// the grid edges.
pub fn cgf_psi(m: &OneDMeasure, lambda: f64) -> Result<f64> {
    if m.beta != 0.0 {
        return Err(Error::Parameter(
            "cgf_psi expects the untilted measure (β = 0)".into(),
        ));
    }
    if lambda.abs() > MAX_TILT {
        return Err(Error::Parameter(format!(
            "c.g.f. argument λ = {lambda} exceeds the maximum {MAX_TILT}"
        )));
    }
    // Work with log-integrands to avoid overflow.
    let logs: Vec<f64> = m
        .xs
        .iter()
        .zip(&m.weights)
        .map(|(&x, &w)| lambda * x + w.ln())
        .collect();
    let lmax = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logs.iter().map(|&l| (l - lmax).exp()).sum();

    // Tail-mass bound for the tilted integrand: beyond ±R the log-integrand
    // λξ - V(ξ) decays at rate at least V'(R) ∓ λ by convexity, so the
    // truncated mass is at most density(±R)·e^{±λR}/rate.
    let r = m.r;
    let rate_hi = m.pot.dv(r) - lambda;
    let rate_lo = m.pot.dv(r) + lambda;
    let tilted_total = lmax + total.ln();
    let mut tail_rel = f64::INFINITY;
    if rate_hi > 0.0 && rate_lo > 0.0 {
        let log_dens_hi = lambda * r - m.pot.v(r) - m.log_j;
        let log_dens_lo = -lambda * r - m.pot.v(r) - m.log_j;
        let tail = (log_dens_hi - rate_hi.ln()).exp() + (log_dens_lo - rate_lo.ln()).exp();
        tail_rel = tail / tilted_total.exp();
    }
    if tail_rel > 1e-12 {
        return Err(Error::Truncation(format!(
            "tilted tail mass beyond ±{r:.2} is {tail_rel:.3e} of the integral (λ = {lambda})"
        )));
    }
    Ok(tilted_total)
}

/// The minimizer `U^β` of `G₁(·; ν^β)` on the quadrature grid, together with
/// its derivative.
#[derive(Debug, Clone)]
pub struct OneDProfile {
    beta: f64,
    x0: f64,
    h: f64,
    values: Vec<f64>,
    grad: Vec<f64>,
}

impl OneDProfile {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    #[inline]
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.values.len();
        let pos = ((t - self.x0) / self.h).clamp(0.0, (n - 1) as f64 - 1e-12);
        let i = pos.floor() as usize;
        (i, pos - i as f64)
    }

    /// Linear interpolation, clamped to the grid range.
    pub fn eval(&self, t: f64) -> f64 {
        let (i, frac) = self.locate(t);
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn eval_deriv(&self, t: f64) -> f64 {
        let (i, frac) = self.locate(t);
        self.grad[i] * (1.0 - frac) + self.grad[i + 1] * frac
    }

    /// Quadrature expectation of `U^β` under a compatible measure.
    pub fn mean_under(&self, m: &OneDMeasure) -> f64 {
        m.nodes()
            .iter()
            .zip(m.weights())
            .map(|(&x, &w)| w * self.eval(x))
            .sum()
    }
}

/// Solve the Euler-Lagrange equation of `G₁(·; ν^β)`,
/// `-U'' + (V'(ξ) - β) U' + V''(ξ) U = 1`, by P1 finite elements in
/// divergence form on the quadrature grid (lumped mass, natural boundary
/// closure at ±R).
pub fn solve_u(m: &OneDMeasure) -> Result<OneDProfile> {
    let n = m.xs.len();
    let h = m.h;
    let pot = &m.pot;
    let beta = m.beta;
    // Relative density exp(βξ - V(ξ) - shift) at nodes and midpoints.
    let shift = m
        .xs
        .iter()
        .map(|&x| beta * x - pot.v(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let rho_node: Vec<f64> = m
        .xs
        .iter()
        .map(|&x| (beta * x - pot.v(x) - shift).exp())
        .collect();
    let rho_mid: Vec<f64> = (0..n - 1)
        .map(|i| {
            let x = 0.5 * (m.xs[i] + m.xs[i + 1]);
            (beta * x - pot.v(x) - shift).exp()
        })
        .collect();

    // Symmetric tridiagonal system.
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let trap = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        let mut dg = trap * rho_node[i] * pot.d2v(m.xs[i]);
        if i > 0 {
            dg += rho_mid[i - 1] / h;
        }
        if i + 1 < n {
            dg += rho_mid[i] / h;
        }
        diag[i] = dg;
        rhs[i] = trap * rho_node[i];
        if i + 1 < n {
            off[i] = -rho_mid[i] / h;
        }
    }
    let values = solve_tridiag(&diag, &off, &rhs)
        .ok_or_else(|| Error::Solver("tridiagonal factorization failed".into()))?;

    // Residual audit in the weighted norm.
    let mut res2 = 0.0;
    let mut rhs2 = 0.0;
    for i in 0..n {
        let mut ax = diag[i] * values[i];
        if i > 0 {
            ax += off[i - 1] * values[i - 1];
        }
        if i + 1 < n {
            ax += off[i] * values[i + 1];
        }
        res2 += (ax - rhs[i]) * (ax - rhs[i]);
        rhs2 += rhs[i] * rhs[i];
    }
    let rel = (res2 / rhs2).sqrt();
    if rel > 1e-8 {
        return Err(Error::Numerical {
            what: "discrete Euler-Lagrange residual".into(),
            residual: rel,
            tol: 1e-8,
        });
    }

    let mut grad = vec![0.0; n];
    grad[0] = (values[1] - values[0]) / h;
    grad[n - 1] = (values[n - 1] - values[n - 2]) / h;
    for i in 1..n - 1 {
        grad[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    Ok(OneDProfile {
        beta,
        x0: m.xs[0],
        h,
        values,
        grad,
    })
}

fn solve_tridiag(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if diag[0] == 0.0 {
        return None;
    }
    c[0] = off.first().copied().unwrap_or(0.0) / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if denom == 0.0 {
            return None;
        }
        if i < n - 1 {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let xi = x[i] - c[i] * x[i + 1];
        x[i] = xi;
    }
    Some(x)
}

/// `E_{ν^β} U^β - E_{ν⁰} U⁰`, the tilt sensitivity of the mean profile.
pub fn mean_u_beta_sensitivity(pot: Potential, beta: f64) -> Result<f64> {
    let m0 = OneDMeasure::new(pot, 0.0)?;
    let u0 = solve_u(&m0)?;
    if beta == 0.0 {
        return Ok(0.0);
    }
    let mb = OneDMeasure::new(pot, beta)?;
    let ub = solve_u(&mb)?;
    Ok(ub.mean_under(&mb) - u0.mean_under(&m0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn builtin_shapes() {
        let q = Potential::quadratic(1.0).unwrap();
        assert_eq!(q.d2v(0.3), 1.0);
        assert_eq!(q.d3v(0.3), 0.0);
        let lc = Potential::logcosh(1.0, 0.5).unwrap();
        assert_abs_diff_eq!(lc.d2v(0.0), 1.5, epsilon = 1e-14);
        assert!((lc.d2v(30.0) - 1.0).abs() < 1e-12);
        assert_abs_diff_eq!(lc.v(2.0), lc.v(-2.0), epsilon = 1e-14);
        assert!(Potential::quadratic(0.0).is_err());
        assert!(Potential::logcosh(1.0, -0.1).is_err());
        assert!(Potential::builtin("logcosh", &[1.0, 0.5]).is_ok());
        assert!(Potential::builtin("quartic", &[1.0]).is_err());
    }

    #[test]
    fn derivative_finite_difference_check() {
        let lc = Potential::logcosh(1.3, 0.7).unwrap();
        let hs = [1e-3, 5e-4];
        for &x in &[-2.2, -0.4, 0.0, 0.9, 3.3] {
            // O(h²) convergence of the centered difference toward V'.
            let errs: Vec<f64> = hs
                .iter()
                .map(|&h| ((lc.v(x + h) - lc.v(x - h)) / (2.0 * h) - lc.dv(x)).abs())
                .collect();
            assert!(errs[0] < 1e-5);
            assert!(errs[1] < errs[0] / 2.0 + 1e-12);
            let d2 = (lc.dv(x + 1e-4) - lc.dv(x - 1e-4)) / 2e-4;
            assert_abs_diff_eq!(d2, lc.d2v(x), epsilon = 1e-6);
            let d3 = (lc.d2v(x + 1e-4) - lc.d2v(x - 1e-4)) / 2e-4;
            assert_abs_diff_eq!(d3, lc.d3v(x), epsilon = 1e-6);
        }
    }

    #[test]
    fn fused_eval_matches_separate() {
        for pot in [
            Potential::quadratic(1.3).unwrap(),
            Potential::logcosh(1.0, 0.5).unwrap(),
        ] {
            for i in -40..=40 {
                let x = i as f64 * 0.31;
                let (v, dv) = pot.v_and_dv(x);
                assert!((v - pot.v(x)).abs() < 1e-14 * (1.0 + v.abs()));
                assert!((dv - pot.dv(x)).abs() < 1e-14 * (1.0 + dv.abs()));
            }
        }
    }

    #[test]
    fn d2v_bounds_on_grid() {
        let lc = Potential::logcosh(1.0, 0.5).unwrap();
        let m = OneDMeasure::new(lc, 0.0).unwrap();
        for &x in m.nodes() {
            let v2 = lc.d2v(x);
            assert!(v2 >= lc.c_min() - 1e-12 && v2 <= lc.c_max() + 1e-12);
        }
        // sup |V'''| attained value never exceeds the closed form.
        let sup_num = m
            .nodes()
            .iter()
            .map(|&x| lc.d3v(x).abs())
            .fold(0.0, f64::max);
        assert!(sup_num <= lc.t_max() + 1e-12);
        assert!(sup_num > 0.9 * lc.t_max());
    }

    #[test]
    fn measure_weights_normalized() {
        let lc = Potential::logcosh(1.0, 0.5).unwrap();
        for beta in [0.0, 0.5, 1.0] {
            let m = OneDMeasure::new(lc, beta).unwrap();
            let s: f64 = m.weights().iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cgf_gaussian_value() {
        let q = Potential::quadratic(1.0).unwrap();
        let m = OneDMeasure::new(q, 0.0).unwrap();
        assert_abs_diff_eq!(cgf_psi(&m, 1.0).unwrap(), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(cgf_psi(&m, 0.0).unwrap(), 0.0, epsilon = 1e-13);
        // quadratic(c): ψ(λ) = λ²/(2c)
        let q2 = Potential::quadratic(2.0).unwrap();
        let m2 = OneDMeasure::new(q2, 0.0).unwrap();
        assert_abs_diff_eq!(cgf_psi(&m2, 1.5).unwrap(), 1.5 * 1.5 / 4.0, epsilon = 1e-10);
    }

    #[test]
    fn cgf_logcosh_pinned_against_refined_oracle() {
        let lc = Potential::logcosh(1.0, 0.5).unwrap();
        let m = OneDMeasure::new(lc, 0.0).unwrap();
        let got = cgf_psi(&m, 1.0).unwrap();
        // Independent trapezoid oracle at 10x node count.
        let fine = OneDMeasure::with_nodes(lc, 0.0, 10 * GRID_NODES + 1).unwrap();
        let oracle: f64 = {
            let num: f64 = fine.expect(|x| (1.0 * x).exp());
            num.ln()
        };
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-10);
        // Frozen from the oracle above.
        assert_abs_diff_eq!(got, 0.380_687_523_823_672_4, epsilon = 1e-9);
    }

    #[test]
    fn cgf_truncation_and_tilt_guards() {
        let q = Potential::quadratic(1.0).unwrap();
        let m = OneDMeasure::new(q, 0.0).unwrap();
        assert!(matches!(cgf_psi(&m, 11.0), Err(Error::Parameter(_))));
        // λ = 8 pushes the mode to the grid edge: truncation must trip.
        assert!(matches!(cgf_psi(&m, 8.0), Err(Error::Truncation(_))));
    }

    #[test]
    fn cgf_symmetry_and_convexity() {
        let lc = Potential::logcosh(1.0, 0.5).unwrap();
        let m = OneDMeasure::new(lc, 0.0).unwrap();
        let grid: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&l| cgf_psi(&m, l).unwrap()).collect();
        for (i, &l) in grid.iter().enumerate() {
            let neg = cgf_psi(&m, -l).unwrap();
            assert_abs_diff_eq!(vals[i], neg, epsilon = 1e-12);
        }
        for i in 1..grid.len() - 1 {
            let second = vals[i + 1] - 2.0 * vals[i] + vals[i - 1];
            assert!(second >= -1e-12, "ψ not convex at {}", grid[i]);
        }
    }

    #[test]
    fn solve_u_quadratic_is_constant() {
        for c in [0.7, 1.0, 2.5] {
            let q = Potential::quadratic(c).unwrap();
            for beta in [0.0, 0.8] {
                let m = OneDMeasure::new(q, beta).unwrap();
                let u = solve_u(&m).unwrap();
                for &v in u.values() {
                    assert_abs_diff_eq!(v, 1.0 / c, epsilon = 1e-10);
                }
                assert_abs_diff_eq!(
                    mean_u_beta_sensitivity(q, beta).unwrap(),
                    0.0,
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn solve_u_bounds_and_hs_identity() {
        let lc = Potential::logcosh(1.0, 0.5).unwrap();
        for beta in [0.0, 0.5, 1.0] {
            let m = OneDMeasure::new(lc, beta).unwrap();
            let u = solve_u(&m).unwrap();
            let lo = 1.0 / lc.c_max();
            let hi = 1.0 / lc.c_min();
            for &v in u.values() {
                assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
            let grad_max = u.grad().iter().cloned().map(f64::abs).fold(0.0, f64::max);
            assert!(grad_max.is_finite());
            // E_{ν^β} U^β = Var_{ν^β}(ξ)
            let mean_u = u.mean_under(&m);
            assert_abs_diff_eq!(mean_u, m.var(), epsilon = 1e-6);
        }
    }

    #[test]
    fn poincare_variance_bound() {
        let lc = Potential::logcosh(1.0, 0.5).unwrap();
        for beta in [0.0, 0.5, 1.0] {
            let m = OneDMeasure::new(lc, beta).unwrap();
            assert!(m.var() <= 1.0 / lc.c_min() + 1e-10);
        }
    }

    #[test]
    fn beta_sensitivity_is_linear_in_beta() {
        let lc = Potential::logcosh(1.0, 0.5).unwrap();
        let betas = [0.1, 0.2, 0.4];
        let deltas: Vec<f64> = betas
            .iter()
            .map(|&b| mean_u_beta_sensitivity(lc, b).unwrap().abs())
            .collect();
        // Least-squares fit of |Δ| = C·β through the origin.
        let num: f64 = betas.iter().zip(&deltas).map(|(&b, &d)| b * d).sum();
        let den: f64 = betas.iter().map(|&b| b * b).sum();
        let c_fit = num / den;
        assert!(c_fit.is_finite());
        for (&b, &d) in betas.iter().zip(&deltas) {
            assert!(d <= 1.5 * c_fit * b + 1e-9, "Δ({b}) = {d}, C = {c_fit}");
        }
    }

    #[test]
    fn cdf_monotone_and_normalized() {
        let lc = Potential::logcosh(1.0, 0.5).unwrap();
        let m = OneDMeasure::new(lc, 0.3).unwrap();
        let mut last = -1.0;
        for i in 0..200 {
            let t = -9.0 + 18.0 * i as f64 / 199.0;
            let c = m.cdf(t);
            assert!(c >= last - 1e-12);
            assert!((0.0..=1.0).contains(&c));
            last = c;
        }
        assert_abs_diff_eq!(m.cdf(1e9), 1.0, epsilon = 1e-12);
    }
}
