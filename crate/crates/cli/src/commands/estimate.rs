//! `funreg estimate`: one regression estimate from CSV covariates and
//! responses at a target curve.

use std::path::PathBuf;

use clap::Args;

use funreg_core::curves::Element;
use funreg_core::estimator::{compute_weights, estimate, Kernel, WeightScheme};
use funreg_core::io::{fmt_f64, read_curves_csv, write_curves_csv};

use crate::commands::parse_metric;

use crate::config::canonical_hash;
use crate::errors::{CliError, CliResult};
use crate::manifest::{manifest_path_for, RunManifest};

#[derive(Args)]
pub struct EstimateArgs {
    /// Target point: curve file, first curve column.
    #[arg(long)]
    x: PathBuf,

    /// Covariate curves file.
    #[arg(long)]
    data: PathBuf,

    /// Response curves file (same count as covariates).
    #[arg(long)]
    responses: PathBuf,

    /// Weight scheme: knn, kknn, or nw.
    #[arg(long)]
    scheme: String,

    /// Neighbor count for knn/kknn.
    #[arg(long)]
    k: Option<usize>,

    /// Bandwidth for nw.
    #[arg(long)]
    h: Option<f64>,

    /// Kernel for kknn/nw: uniform or triangle.
    #[arg(long, default_value = "uniform")]
    kernel: String,

    /// Semi-metric: `l2` or `projection:<dim>:<basis csv>`.
    #[arg(long, default_value = "l2")]
    metric: String,

    /// Output CSV for the estimated curve.
    #[arg(long)]
    out: PathBuf,
}

fn parse_kernel(name: &str) -> CliResult<Kernel> {
    match name {
        "uniform" => Ok(Kernel::Uniform),
        "triangle" => Ok(Kernel::Triangle),
        other => Err(CliError::config(format!(
            "unknown kernel `{other}` (uniform, triangle)"
        ))),
    }
}

pub fn run(args: EstimateArgs) -> CliResult<()> {
    let scheme = match args.scheme.as_str() {
        "knn" => WeightScheme::SimpleKnn {
            k: args
                .k
                .ok_or_else(|| CliError::config("--scheme knn needs --k"))?,
        },
        "kknn" => WeightScheme::KernelKnn {
            k: args
                .k
                .ok_or_else(|| CliError::config("--scheme kknn needs --k"))?,
            kernel: parse_kernel(&args.kernel)?,
        },
        "nw" => WeightScheme::NadarayaWatson {
            h: args
                .h
                .ok_or_else(|| CliError::config("--scheme nw needs --h"))?,
            kernel: parse_kernel(&args.kernel)?,
        },
        other => {
            return Err(CliError::config(format!(
                "unknown scheme `{other}` (knn, kknn, nw)"
            )))
        }
    };
    let metric = parse_metric(&args.metric)?;

    let (_, x_curves, _) = read_curves_csv(&args.x)?;
    let x = x_curves
        .into_iter()
        .next()
        .map(Element::Curve)
        .ok_or_else(|| CliError::data(format!("{}: no curves", args.x.display())))?;
    let (_, data_curves, _) = read_curves_csv(&args.data)?;
    let xs: Vec<Element> = data_curves.into_iter().map(Element::Curve).collect();
    let (_, response_curves, _) = read_curves_csv(&args.responses)?;
    let ys: Vec<Element> = response_curves.into_iter().map(Element::Curve).collect();

    let config = serde_json::json!({
        "x": args.x.display().to_string(),
        "data": args.data.display().to_string(),
        "responses": args.responses.display().to_string(),
        "scheme": args.scheme,
        "k": args.k,
        "h": args.h,
        "kernel": args.kernel,
        "metric": args.metric,
    });
    let hash = canonical_hash(&config);
    let manifest = RunManifest::start(&manifest_path_for(&args.out), "estimate", 0, config, hash)?;

    let weights = compute_weights(&scheme, &xs, &x, &metric)?;
    let fitted = estimate(&weights, &ys)?;
    let Element::Curve(curve) = fitted else {
        return Err(CliError::data("responses must be curves"));
    };
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_curves_csv(&args.out, &[curve], &["estimate".to_string()])?;

    let summary = serde_json::json!({
        "radius": fmt_f64(weights.radius()),
        "k_effective": weights.k_effective(),
        "v_n1": fmt_f64(weights.v_n1()),
        "c_n2": fmt_f64(weights.c_n2()),
        "envelope_compliant": weights.envelope_compliant(),
    });
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    manifest.finish(vec![args.out.clone()], summary)?;
    Ok(())
}
