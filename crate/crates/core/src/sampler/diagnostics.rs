//! Chain diagnostics: integrated autocorrelation time, effective sample
//! size, split-chain R-hat, and the Kolmogorov-Smirnov statistic.

/// Highest lag considered relative to the series length.
const MAX_LAG_FRACTION: usize = 3;

/// Integrated autocorrelation time `τ = 1 + 2 Σ ρ_k` by Geyer's initial
/// positive sequence. Returns `f64::INFINITY` for a (numerically) constant
/// series.
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let scale = series.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1.0);
    if var <= 1e-28 * scale * scale {
        return f64::INFINITY;
    }
    let acov = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n - lag {
            acc += (series[i] - mean) * (series[i + lag] - mean);
        }
        acc / n as f64
    };
    let mut tau = 1.0;
    let max_pair = n / (2 * MAX_LAG_FRACTION);
    for m in 0..max_pair {
        let pair = acov(2 * m + 1) + acov(2 * m + 2);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair / var;
    }
    tau.max(1.0)
}

/// Effective sample size of one chain.
pub fn ess(series: &[f64]) -> f64 {
    let tau = integrated_autocorr_time(series);
    if tau.is_infinite() {
        0.0
    } else {
        series.len() as f64 / tau
    }
}

/// Pooled effective sample size across chains.
pub fn ess_chains(chains: &[&[f64]]) -> f64 {
    chains.iter().map(|c| ess(c)).sum()
}

/// Split-chain potential scale reduction factor. `None` with fewer than two
/// half-chains of usable length.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    let mut halves: Vec<&[f64]> = Vec::new();
    for c in chains {
        if c.len() >= 4 {
            let mid = c.len() / 2;
            halves.push(&c[..mid]);
            halves.push(&c[mid..]);
        }
    }
    if halves.len() < 2 {
        return None;
    }
    let m = halves.len() as f64;
    let n = halves.iter().map(|h| h.len()).min().unwrap() as f64;
    let means: Vec<f64> = halves
        .iter()
        .map(|h| h.iter().sum::<f64>() / h.len() as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|&mu| (mu - grand) * (mu - grand)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, &mu)| {
            h.iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() / (h.len() as f64 - 1.0)
        })
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        return Some(1.0);
    }
    Some((((n - 1.0) / n * w + b / n) / w).sqrt())
}

/// Diagnostics for one scalar observable tracked across chains.
#[derive(Debug, Clone)]
pub struct ObservableDiagnostics {
    pub name: String,
    pub iact: f64,
    pub ess: f64,
    pub rhat: Option<f64>,
    pub flags: Vec<String>,
}

/// Deterministic report for one observable.
pub fn diagnose(name: &str, chains: &[&[f64]]) -> ObservableDiagnostics {
    let mut flags = Vec::new();
    let iacts: Vec<f64> = chains.iter().map(|c| integrated_autocorr_time(c)).collect();
    let iact = iacts.iter().cloned().fold(0.0f64, f64::max);
    if iact.is_infinite() {
        flags.push("constant-series".to_string());
    }
    let ess = ess_chains(chains);
    let rhat = split_rhat(chains);
    if rhat.is_none() {
        flags.push("rhat-unavailable".to_string());
    }
    if let Some(r) = rhat {
        if r > 1.05 {
            flags.push(format!("rhat-high:{r:.3}"));
        }
    }
    ObservableDiagnostics {
        name: name.to_string(),
        iact,
        ess,
        rhat,
        flags,
    }
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((((i + 1) as f64) / n - f).abs());
        d = d.max((f - (i as f64) / n).abs());
    }
    d
}

/// Asymptotic two-sided KS critical value at level `alpha` for an effective
/// sample size.
pub fn ks_critical(n_eff: f64, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / n_eff.sqrt()
}
