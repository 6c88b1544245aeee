//! Subcommand execution: each check builds its geometry, runs the pipeline,
//! and emits CSV rows plus a JSON manifest sufficient to re-run it exactly.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use membrane_core::bergman::{
    self, bergman_split, continuum_comparison, special_profile, ProductQuartic,
};
use membrane_core::error::{Error, Result};
use membrane_core::gibbs::{GaussianOracle, ModelSpec};
use membrane_core::lattice::{build_geometry, l2_inner, BoxGeometry, DomainTag, LatticeField};
use membrane_core::limits::{
    cgf_thermo, gaussian_approx_check, infinite_volume_check, marginal_check,
    scaling_limit_check, CheckRow, CompactField,
};
use membrane_core::operators::GreenCache;
use membrane_core::sampler::{sample_q, ObsKind, TrackedObservable};

use crate::config::ExperimentConfig;

pub struct Outcome {
    /// (file name, contents) pairs to write under the output directory.
    pub files: Vec<(String, Vec<u8>)>,
    pub flagged: bool,
}

fn seeded_field(geom: &BoxGeometry, seed: u64, scale: f64) -> LatticeField {
    // Deterministic quasi-random field; avoids pulling RNG deps in here.
    let n = geom.interior_count();
    let mut vals = Vec::with_capacity(n);
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
    for _ in 0..n {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        vals.push(scale * (2.0 * u - 1.0));
    }
    LatticeField::from_values(geom, DomainTag::Box, vals).unwrap()
}

fn rows_to_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from(CheckRow::csv_header());
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

fn point_field(
    geom: &BoxGeometry,
    sites: &Option<Vec<Vec<i64>>>,
    values: &Option<Vec<f64>>,
    what: &str,
) -> Result<LatticeField> {
    let (sites, values) = match (sites, values) {
        (Some(s), Some(v)) if s.len() == v.len() && !s.is_empty() => (s, v),
        _ => {
            return Err(Error::Parameter(format!(
                "{what} needs matching nonempty site/value lists"
            )))
        }
    };
    let mut f = LatticeField::zeros(geom, DomainTag::Box);
    for (s, &v) in sites.iter().zip(values) {
        let idx = geom
            .interior_index(s)
            .ok_or_else(|| Error::Parameter(format!("{what}: site {s:?} not interior")))?;
        f.values_mut()[idx] += v;
    }
    Ok(f)
}

pub fn execute(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    match cfg.subcommand.as_str() {
        "greens" => run_greens(cfg, seed),
        "bergman" => run_bergman(cfg, seed),
        "profile" => run_profile(cfg),
        "continuum" => run_continuum(cfg),
        "sample" => run_sample(cfg, seed),
        "cgf" => run_cgf(cfg, seed),
        "infinite-volume" => run_infinite_volume(cfg, seed),
        "gaussian-approx" => run_gaussian_approx(cfg, seed),
        "scaling-limit" => run_scaling_limit(cfg, seed),
        "marginal" => run_marginal(cfg, seed),
        other => Err(Error::Parameter(format!("unknown subcommand {other:?}"))),
    }
}

fn run_greens(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    let mut rows = Vec::new();
    for l in cfg.ls()? {
        let geom = Arc::new(build_geometry(cfg.d, l)?);
        let cache = GreenCache::new(geom.clone());
        let eta = seeded_field(&geom, seed, 1.0);

        let phi = cache.dirichlet_solve(&eta)?;
        let lap = membrane_core::operators::laplacian(&geom, &phi);
        let roundtrip = lap
            .values()
            .iter()
            .zip(eta.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rows.push(residual_row("laplacian-roundtrip", cfg.d, l, roundtrip, 1e-10));

        let p = cache.poisson()?;
        let mut norm_dev = 0.0f64;
        for x in 0..geom.interior_count() {
            let s: f64 = (0..geom.boundary_count()).map(|z| p.row(z)[x]).sum();
            norm_dev = norm_dev.max((s - 1.0).abs());
        }
        rows.push(residual_row("poisson-normalization", cfg.d, l, norm_dev, 1e-10));

        let a1 = cache.alpha_z(&eta)?;
        let a2 = cache.alpha_z_via_solve(&eta)?;
        let alpha_dev = a1
            .iter()
            .zip(&a2)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        rows.push(residual_row("alpha-crosscheck", cfg.d, l, alpha_dev, 1e-10));

        let mut sym_dev = 0.0f64;
        let probes = [
            (0usize, geom.interior_count() / 2),
            (geom.interior_count() / 3, geom.interior_count() - 1),
        ];
        for &(x, y) in &probes {
            let cx = cache.green_column(x);
            let cy = cache.green_column(y);
            sym_dev = sym_dev.max((cx.values()[y] - cy.values()[x]).abs());
        }
        rows.push(residual_row("green-symmetry", cfg.d, l, sym_dev, 1e-10));
    }
    let flagged = rows.iter().any(|r| r.flag);
    Ok(Outcome {
        files: vec![("report.csv".into(), rows_to_csv(&rows).into_bytes())],
        flagged,
    })
}

fn residual_row(name: &str, d: usize, l: i64, residual: f64, tol: f64) -> CheckRow {
    CheckRow {
        check: name.into(),
        d,
        l,
        value: residual,
        se: 0.0,
        reference: 0.0,
        gap: residual,
        flag: residual > tol,
    }
}

fn run_bergman(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    let mut rows = Vec::new();
    for l in cfg.ls()? {
        let geom = Arc::new(build_geometry(cfg.d, l)?);
        let cache = GreenCache::new(geom.clone());
        let a_box = seeded_field(&geom, seed, 1.0);
        let a = a_box.to_tag(&geom, DomainTag::Cl1);
        let pair = bergman_split(&cache, &a)?;

        let second = bergman_split(&cache, &pair.harmonic)?;
        let idem = second
            .complement
            .values()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        rows.push(residual_row("bergman-idempotence", cfg.d, l, idem, 1e-8));

        let b = seeded_field(&geom, seed + 17, 1.0).to_tag(&geom, DomainTag::Cl1);
        let pb = bergman_split(&cache, &b)?;
        let adj = (l2_inner(&geom, &pair.harmonic, &b, DomainTag::Cl1)
            - l2_inner(&geom, &a, &pb.harmonic, DomainTag::Cl1))
        .abs();
        rows.push(residual_row("bergman-self-adjoint", cfg.d, l, adj, 1e-8));

        let pyth = (l2_inner(&geom, &a, &a, DomainTag::Cl1)
            - l2_inner(&geom, &pair.harmonic, &pair.harmonic, DomainTag::Cl1)
            - l2_inner(&geom, &pair.complement, &pair.complement, DomainTag::Cl1))
        .abs();
        rows.push(residual_row("bergman-pythagoras", cfg.d, l, pyth, 1e-8));
    }
    let flagged = rows.iter().any(|r| r.flag);
    Ok(Outcome {
        files: vec![("report.csv".into(), rows_to_csv(&rows).into_bytes())],
        flagged,
    })
}

fn run_profile(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ls = cfg.ls()?;
    let l = ls[0];
    let geom = Arc::new(build_geometry(cfg.d, l)?);
    let cache = GreenCache::new(geom.clone());
    let x0_coords = cfg
        .params
        .x0
        .clone()
        .ok_or_else(|| Error::Parameter("profile needs params.x0".into()))?;
    let x0 = geom
        .interior_index(&x0_coords)
        .ok_or_else(|| Error::Parameter(format!("x0 {x0_coords:?} not interior")))?;
    let sp = special_profile(&geom, x0)?;
    let p = cache.poisson()?;
    let mut out = String::from("z,inner_product_residual\n");
    let mut flagged = false;
    for z in 0..geom.boundary_count() {
        let ip = membrane_core::lattice::l2_inner(&geom, &sp.e, &p.row_cl1(&geom, z), DomainTag::Cl1);
        let residual = (ip + p.row(z)[x0]).abs();
        flagged |= residual > 1e-9;
        out.push_str(&format!("{z},{residual}\n"));
    }
    Ok(Outcome {
        files: vec![("profile.csv".into(), out.into_bytes())],
        flagged,
    })
}

fn run_continuum(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.params.test_function.as_deref().unwrap_or("product-quartic") != "product-quartic" {
        return Err(Error::Parameter(
            "only the product-quartic test function is available".into(),
        ));
    }
    let tf = ProductQuartic { d: cfg.d };
    let ls = cfg.ls()?;
    let report = continuum_comparison(&tf, &ls)?;
    let mut out = String::from("L,norm,fitted_exponent\n");
    for r in &report.rows {
        out.push_str(&format!("{},{},{}\n", r.l, r.norm, report.fitted_exponent));
    }
    let mut files: Vec<(String, Vec<u8>)> = vec![("continuum.csv".into(), out.into_bytes())];

    // Optional boundary-layer mass rows at the largest box.
    if let Some(ells) = &cfg.params.layer_ells {
        let l = *ls.last().unwrap();
        let geom = Arc::new(build_geometry(cfg.d, l)?);
        let cache = GreenCache::new(geom.clone());
        let f_l = bergman::scaled_rhs(&geom, &tf);
        let a = cache.dirichlet_solve(&f_l)?;
        let pair = bergman_split(&cache, &a)?;
        let mut rows = Vec::new();
        for &ell in ells {
            let mass = bergman::layer_norm_sq(&geom, &pair.harmonic, ell);
            let fitted_c = mass * l as f64 / (ell as f64 + 1.0);
            rows.push(CheckRow {
                check: "harmonic-layer-mass".into(),
                d: cfg.d,
                l: ell,
                value: mass,
                se: 0.0,
                reference: fitted_c,
                gap: 0.0,
                flag: false,
            });
        }
        files.push(("report.csv".into(), rows_to_csv(&rows).into_bytes()));
    }
    Ok(Outcome {
        files,
        flagged: report.fitted_exponent > -0.4,
    })
}

fn run_sample(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    let ls = cfg.ls()?;
    let geom = Arc::new(build_geometry(cfg.d, ls[0])?);
    let cache = GreenCache::new(geom.clone());
    let pot = cfg.potential()?;
    let mut spec = ModelSpec::new(geom.clone(), pot);
    if cfg.params.direction_sites.is_some() {
        let b = point_field(
            &geom,
            &cfg.params.direction_sites,
            &cfg.params.direction_values,
            "tilt",
        )?;
        spec = spec.with_tilt(b);
    }
    let config = cfg.sampler_config(seed)?;
    let center = geom.interior_index(&vec![0; cfg.d]).unwrap();
    let obs = [
        TrackedObservable {
            name: "eta_center".into(),
            kind: ObsKind::EtaSite(center),
        },
        TrackedObservable {
            name: "phi_center".into(),
            kind: ObsKind::PhiSite(center),
        },
    ];
    let run = sample_q(&spec, &cache, &config, &obs, true)?;
    let mut out = String::from("name,iact,ess,rhat,flags\n");
    for d in &run.diagnostics {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            d.name,
            d.iact,
            d.ess,
            d.rhat.map_or("na".to_string(), |r| r.to_string()),
            d.flags.join(";")
        ));
    }
    out.push_str(&format!("acceptance,,{},,\n", run.acc_rate));
    let batch = run.batch.as_ref().unwrap();
    let tmp = std::env::temp_dir().join(format!("membrane-batch-{seed}.bin"));
    batch.save(&tmp)?;
    let bin = std::fs::read(&tmp)?;
    let _ = std::fs::remove_file(&tmp);
    Ok(Outcome {
        files: vec![
            ("diagnostics.csv".into(), out.into_bytes()),
            ("batch.bin".into(), bin),
        ],
        flagged: run.flagged,
    })
}

fn run_cgf(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    let ls = cfg.ls()?;
    let mut rows = Vec::new();
    let pot = cfg.potential()?;
    for l in ls {
        let geom = Arc::new(build_geometry(cfg.d, l)?);
        let cache = GreenCache::new(geom.clone());
        let a = point_field(
            &geom,
            &cfg.params.direction_sites,
            &cfg.params.direction_values,
            "cgf direction",
        )?;
        let spec = ModelSpec::new(geom.clone(), pot);
        let config = cfg.sampler_config(seed)?;
        let est = cgf_thermo(&spec, &cache, &a, &config, cfg.sampler.nodes)?;
        let (reference, gap) = if pot.name() == "quadratic" {
            let oracle = GaussianOracle::new(&cache, pot.params()[0])?;
            let r = oracle.cgf(a.values());
            (r, (est.value - r).abs())
        } else {
            (f64::NAN, f64::NAN)
        };
        rows.push(CheckRow {
            check: "cgf-thermo".into(),
            d: cfg.d,
            l,
            value: est.value,
            se: est.se,
            reference,
            gap,
            flag: est.flagged || (gap.is_finite() && gap > 3.0 * est.se),
        });
    }
    let flagged = rows.iter().any(|r| r.flag);
    Ok(Outcome {
        files: vec![("report.csv".into(), rows_to_csv(&rows).into_bytes())],
        flagged,
    })
}

fn run_infinite_volume(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    if cfg.d < 5 {
        return Err(Error::Parameter(
            "the infinite-volume comparison needs d >= 5".into(),
        ));
    }
    let aprime = CompactField {
        sites: cfg
            .params
            .a_prime_sites
            .clone()
            .ok_or_else(|| Error::Parameter("needs params.a_prime_sites".into()))?,
        values: cfg
            .params
            .a_prime_values
            .clone()
            .ok_or_else(|| Error::Parameter("needs params.a_prime_values".into()))?,
    };
    let config = cfg.sampler_config(seed)?;
    let report = infinite_volume_check(
        cfg.potential()?,
        &aprime,
        cfg.d,
        &cfg.ls()?,
        &config,
        cfg.sampler.nodes,
    )?;
    let flagged = report.rows.iter().any(|r| r.flag)
        || !report.monotone_nonincreasing
        || !report.final_gap_within_3se;
    Ok(Outcome {
        files: vec![("report.csv".into(), rows_to_csv(&report.rows).into_bytes())],
        flagged,
    })
}

fn run_gaussian_approx(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    let tf = ProductQuartic { d: cfg.d };
    let config = cfg.sampler_config(seed)?;
    let report = gaussian_approx_check(
        cfg.potential()?,
        &tf,
        &cfg.ls()?,
        &config,
        cfg.sampler.nodes,
        cfg.params.amplitude.unwrap_or(1.0),
        false,
    )?;
    let flagged = report.rows.iter().any(|r| r.flag);
    Ok(Outcome {
        files: vec![("report.csv".into(), rows_to_csv(&report.rows).into_bytes())],
        flagged,
    })
}

fn run_scaling_limit(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    let points = cfg
        .params
        .points
        .clone()
        .ok_or_else(|| Error::Parameter("needs params.points".into()))?;
    let coeffs = cfg
        .params
        .coeffs
        .clone()
        .ok_or_else(|| Error::Parameter("needs params.coeffs".into()))?;
    let config = cfg.sampler_config(seed)?;
    let report = scaling_limit_check(
        cfg.potential()?,
        &points,
        &coeffs,
        cfg.d,
        &cfg.ls()?,
        &config,
        cfg.sampler.nodes,
        true,
    )?;
    let mut rows = report.cgf_rows.clone();
    rows.extend(report.cov_rows.clone());
    let flagged = rows.iter().any(|r| r.flag);
    Ok(Outcome {
        files: vec![("report.csv".into(), rows_to_csv(&rows).into_bytes())],
        flagged,
    })
}

fn run_marginal(cfg: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    let rhos = cfg
        .params
        .rhos
        .clone()
        .ok_or_else(|| Error::Parameter("needs params.rhos".into()))?;
    let ls = cfg.ls()?;
    let config = cfg.sampler_config(seed)?;
    let report = marginal_check(cfg.potential()?, None, cfg.d, ls[0], &rhos, &config)?;
    let flagged = report.rows.iter().any(|r| r.flag) || !report.ks_decreasing;
    Ok(Outcome {
        files: vec![("report.csv".into(), rows_to_csv(&report.rows).into_bytes())],
        flagged,
    })
}

/// Write outcome files and the manifest; returns the process exit code.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    seed: u64,
    out_dir: &Path,
    outcome: &Outcome,
    started: Instant,
) -> Result<i32> {
    std::fs::create_dir_all(out_dir)?;
    for (name, contents) in &outcome.files {
        let path: PathBuf = out_dir.join(name);
        std::fs::write(&path, contents)?;
    }
    let manifest = serde_json::json!({
        "config": cfg,
        "seed": seed,
        "versions": {
            "membrane-core": env!("CARGO_PKG_VERSION"),
        },
        "wall_time_secs": started.elapsed().as_secs_f64(),
        "timestamp_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        "flagged": outcome.flagged,
    });
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serialization"),
    )?;
    Ok(if outcome.flagged { 2 } else { 0 })
}
