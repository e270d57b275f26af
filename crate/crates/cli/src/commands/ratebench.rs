//! `funreg ratebench`: run a configured rate experiment, emit the raw and
//! summary CSVs, and finalize a manifest with the slope fit and the pass/fail
//! state of every configured property.

use std::path::PathBuf;

use clap::Args;

use funreg_core::io::{write_experiment_raw, write_experiment_summary};
use funreg_core::ratebench::run_experiment;

use crate::config::{canonical_hash, from_value, read_value, RatebenchConfig};
use crate::errors::{CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Args)]
pub struct RatebenchArgs {
    /// Experiment config file (TOML or JSON).
    #[arg(long)]
    config: PathBuf,

    /// Output directory (env FUNREG_OUT_DIR overrides).
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run(args: RatebenchArgs) -> CliResult<()> {
    let out_dir = super::out_dir_override(args.out_dir);
    let raw_value = read_value(&args.config)?;
    let hash = canonical_hash(&raw_value);
    let config: RatebenchConfig = from_value(raw_value, &args.config.display().to_string())?;
    let resolved = config.resolve()?;

    // the resolved config (all defaults materialized) goes into the manifest
    let config_echo =
        serde_json::to_value(&config).map_err(|e| CliError::config(e.to_string()))?;
    std::fs::create_dir_all(&out_dir)?;
    let manifest = RunManifest::start(
        &out_dir.join("manifest.json"),
        "ratebench",
        config.seed,
        config_echo,
        hash,
    )?;

    let result = run_experiment(&resolved)?;

    let raw_path = out_dir.join("raw.csv");
    let summary_path = out_dir.join("summary.csv");
    write_experiment_raw(&raw_path, &result)?;
    write_experiment_summary(&summary_path, &result)?;

    let medians: Vec<f64> = result.summaries.iter().map(|s| s.median).collect();
    let mut properties = serde_json::Map::new();
    if config.checks.monotone_median {
        let ok = medians.windows(2).all(|w| w[1] < w[0]);
        properties.insert("monotone_median".into(), serde_json::json!(ok));
    }
    if let Some([lo, hi]) = config.checks.slope_range {
        let ok = result
            .slope
            .map(|s| s.slope >= lo && s.slope <= hi)
            .unwrap_or(false);
        properties.insert("slope_in_range".into(), serde_json::json!(ok));
    }
    if let Some(violations) = result.bias_violations {
        properties.insert(
            "bias_bound_zero_violations".into(),
            serde_json::json!(violations == 0),
        );
    }
    let all_ok = properties.values().all(|v| v.as_bool().unwrap_or(false));

    let results = serde_json::json!({
        "scheme": result.scheme_kind,
        "rule": result.rule_source,
        "resolved_rule_values": result.summaries.iter().map(|s| s.rule_value).collect::<Vec<_>>(),
        "n_grid": result.summaries.iter().map(|s| s.n).collect::<Vec<_>>(),
        "medians": medians,
        "q90": result.summaries.iter().map(|s| s.q90).collect::<Vec<_>>(),
        "slope": result.slope.map(|s| s.slope),
        "slope_intercept": result.slope.map(|s| s.intercept),
        "slope_residual": result.slope.map(|s| s.residual),
        "gamma1_noise": result.gamma1_noise,
        "bias_violations": result.bias_violations,
        "replication_failures": result.failures.len(),
        "properties": serde_json::Value::Object(properties),
    });

    println!("{}", serde_json::to_string_pretty(&results).unwrap());
    manifest.finish(vec![raw_path, summary_path], results)?;

    if !all_ok {
        return Err(CliError::Numeric(
            "one or more configured properties failed; see manifest.json".into(),
        ));
    }
    Ok(())
}
