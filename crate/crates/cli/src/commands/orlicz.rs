//! `funreg orlicz`: Orlicz norm of a one-column sample file, printed as JSON.

use std::path::PathBuf;

use clap::Args;

use funreg_core::io::{fmt_f64, read_samples_csv};
use funreg_core::orlicz::{orlicz_norm, PsiSpec};

use crate::errors::{CliError, CliResult};

#[derive(Args)]
pub struct OrliczArgs {
    /// psi family: power or exp.
    #[arg(long)]
    psi: String,

    /// Family exponent p >= 1.
    #[arg(long)]
    p: f64,

    /// One-column CSV of nonnegative samples.
    #[arg(long)]
    input: PathBuf,

    /// Relative bisection tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

pub fn run(args: OrliczArgs) -> CliResult<()> {
    let spec = match args.psi.as_str() {
        "power" => PsiSpec::power(args.p)?,
        "exp" => PsiSpec::exponential(args.p)?,
        other => {
            return Err(CliError::config(format!(
                "unknown psi family `{other}` (power, exp)"
            )))
        }
    };
    let samples = read_samples_csv(&args.input)?;
    let est = orlicz_norm(&samples, &spec, args.tol)?;
    let out = serde_json::json!({
        "value": est.value,
        "value_17sig": fmt_f64(est.value),
        "bracket": [est.bracket.0, est.bracket.1],
        "mc_samples": est.mc_samples,
        "tolerance": est.tolerance,
        "degenerate": est.degenerate,
        "psi": { "family": args.psi, "p": args.p },
        "input": args.input.display().to_string(),
    });
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    Ok(())
}
