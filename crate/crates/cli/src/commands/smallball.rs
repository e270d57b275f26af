//! `funreg smallball`: small-ball probability curves and the radius/count
//! concentration checks, with CSV output and a JSON summary on stdout.

use std::path::PathBuf;

use clap::Args;

use funreg_core::datagen::{estimate_beta, generate, NormKind};
use funreg_core::io::{write_check_csv, write_phi_csv};
use funreg_core::smallball::{
    check_neighbor_count, check_neighbor_count_dependent, check_radius_quantile,
    check_radius_quantile_dependent, phi_estimate, phi_inverse, CheckResult,
};

use crate::commands::{parse_hgrid, parse_metric, parse_point};
use crate::config::{canonical_hash, load_process_spec};
use crate::errors::{CliError, CliResult};
use crate::manifest::{manifest_path_for, RunManifest};

#[derive(Args)]
pub struct SmallballArgs {
    /// Process spec file (TOML or JSON) for the covariate draws.
    #[arg(long)]
    process: PathBuf,

    /// Target point: `zero`, a scalar, `v1,v2,...`, or a curve file.
    #[arg(long, default_value = "zero")]
    x: String,

    /// Semi-metric: `l2` or `projection:<dim>:<basis csv>`.
    #[arg(long, default_value = "l2")]
    metric: String,

    /// Radius grid `lo:hi:steps` for phi estimation and quantile inversion.
    #[arg(long)]
    hgrid: String,

    /// What to run: phi, p1, p2, p3, or p4.
    #[arg(long)]
    check: String,

    /// Sample size per replication (and the phi sample size).
    #[arg(long)]
    n: usize,

    /// Neighbor count for p1/p2.
    #[arg(long)]
    k: Option<usize>,

    /// Ball radius for p3/p4.
    #[arg(long = "H")]
    bandwidth: Option<f64>,

    /// Replications for the checks.
    #[arg(long, default_value_t = 200)]
    reps: usize,

    /// Seed override; mandatory when the process file has no seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Dependence horizon for p2/p4.
    #[arg(long)]
    m: Option<usize>,

    /// Margin multiplier on the measured coupling decay for p2/p4 radii.
    #[arg(long, default_value_t = 5.0)]
    margin: f64,

    /// Replications for the coupling-decay estimate behind p2/p4.
    #[arg(long, default_value_t = 1_000)]
    beta_reps: usize,

    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn check_summary(result: &CheckResult) -> serde_json::Value {
    serde_json::json!({
        "check": result.kind.code(),
        "replications": result.replications,
        "violations": result.violations,
        "violation_fraction": result.violation_fraction,
        "n": result.n,
        "k": result.k,
        "radius": result.radius,
        "threshold": result.threshold,
        "band": result.band.map(|(lo, hi)| vec![lo, hi]),
        "m": result.m,
        "warnings": result.warnings,
    })
}

pub fn run(args: SmallballArgs) -> CliResult<()> {
    let spec = load_process_spec(&args.process, args.seed)?;
    let metric = parse_metric(&args.metric)?;
    let zero = spec.element_space().zero_element();
    let x = parse_point(&args.x, Some(&zero))?;
    let h_grid = parse_hgrid(&args.hgrid)?;

    let config = serde_json::json!({
        "process": serde_json::to_value(&spec).map_err(|e| CliError::config(e.to_string()))?,
        "x": args.x,
        "metric": args.metric,
        "hgrid": args.hgrid,
        "check": args.check,
        "n": args.n,
        "k": args.k,
        "H": args.bandwidth,
        "reps": args.reps,
        "m": args.m,
        "margin": args.margin,
        "beta_reps": args.beta_reps,
    });
    let hash = canonical_hash(&config);
    let manifest = RunManifest::start(
        &manifest_path_for(&args.out),
        "smallball",
        spec.seed,
        config,
        hash,
    )?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }

    let need_k = || {
        args.k
            .ok_or_else(|| CliError::config(format!("--check {} needs --k", args.check)))
    };
    let need_h = || {
        args.bandwidth
            .ok_or_else(|| CliError::config(format!("--check {} needs --H", args.check)))
    };
    let need_m = || {
        args.m
            .ok_or_else(|| CliError::config(format!("--check {} needs --m", args.check)))
    };

    let results = match args.check.as_str() {
        "phi" => {
            let samples = generate(&spec, args.n)?;
            let curve = phi_estimate(&samples, &x, &metric, &h_grid)?;
            write_phi_csv(&args.out, &curve)?;
            serde_json::json!({
                "check": "phi",
                "n": curve.n_samples,
                "monotonized": curve.monotonized,
            })
        }
        "p1" => {
            let result =
                check_radius_quantile(&spec, &x, &metric, args.n, need_k()?, args.reps, &h_grid)?;
            write_check_csv(&args.out, &result)?;
            check_summary(&result)
        }
        "p2" => {
            let k = need_k()?;
            let m = need_m()?;
            let beta = estimate_beta(&spec, m, args.beta_reps, &NormKind::L2, &metric)?;
            let aux = funreg_core::datagen::generate_with_stream(
                &spec,
                10 * args.n,
                funreg_core::rng::STREAM_AUX,
            )?;
            let phi = phi_estimate(&aux, &x, &metric, &h_grid)?;
            let quantile = phi_inverse(&phi, 2.0 * k as f64 / args.n as f64)?;
            let h = quantile + args.margin * beta.gamma_hat;
            let result =
                check_radius_quantile_dependent(&spec, &x, &metric, args.n, k, h, m, args.reps)?;
            write_check_csv(&args.out, &result)?;
            let mut summary = check_summary(&result);
            summary["beta_hat"] = serde_json::json!(beta.gamma_hat);
            summary["margin"] = serde_json::json!(args.margin);
            summary["base_quantile"] = serde_json::json!(quantile);
            summary
        }
        "p3" => {
            let result =
                check_neighbor_count(&spec, &x, &metric, args.n, need_h()?, args.reps)?;
            write_check_csv(&args.out, &result)?;
            check_summary(&result)
        }
        "p4" => {
            let h = need_h()?;
            let m = need_m()?;
            let beta = estimate_beta(&spec, m, args.beta_reps, &NormKind::L2, &metric)?;
            let delta = args.margin * beta.gamma_hat;
            let h_lo = if delta > 0.0 { h - delta } else { h * (1.0 - 1e-9) };
            let h_hi = if delta > 0.0 { h + delta } else { h * (1.0 + 1e-9) };
            if h_lo <= 0.0 {
                return Err(CliError::config(format!(
                    "margin {delta} swallows the radius {h}; lower --margin or raise --H"
                )));
            }
            let result = check_neighbor_count_dependent(
                &spec, &x, &metric, args.n, h, h_lo, h_hi, m, args.reps,
            )?;
            write_check_csv(&args.out, &result)?;
            let mut summary = check_summary(&result);
            summary["beta_hat"] = serde_json::json!(beta.gamma_hat);
            summary["margin"] = serde_json::json!(args.margin);
            summary
        }
        other => {
            return Err(CliError::config(format!(
                "unknown check `{other}` (phi, p1, p2, p3, p4)"
            )))
        }
    };

    println!("{}", serde_json::to_string_pretty(&results).unwrap());
    manifest.finish(vec![args.out.clone()], results)?;
    Ok(())
}
