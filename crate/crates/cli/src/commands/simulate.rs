//! `funreg simulate`: generate a sequence from a process spec file, and
//! optionally its coupled copies for a list of lags.

use std::path::PathBuf;

use clap::Args;

use funreg_core::datagen::{generate, generate_coupled};
use funreg_core::io::write_elements_csv;

use crate::config::{canonical_hash, load_process_spec};
use crate::errors::{CliError, CliResult};
use crate::manifest::{manifest_path_for, RunManifest};

#[derive(Args)]
pub struct SimulateArgs {
    /// Process spec file (TOML or JSON).
    #[arg(long)]
    process: PathBuf,

    /// Sequence length.
    #[arg(long)]
    n: usize,

    /// Seed override; mandatory when the process file has no seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,

    /// Comma-separated coupling lags; adds one `_m<lag>` file per lag plus a
    /// `_primed` file with the fully refreshed path.
    #[arg(long, value_delimiter = ',')]
    couple: Vec<usize>,
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let spec = load_process_spec(&args.process, args.seed)?;
    let config = serde_json::to_value(&spec).map_err(|e| CliError::config(e.to_string()))?;
    let hash = canonical_hash(&config);
    let manifest = RunManifest::start(
        &manifest_path_for(&args.out),
        "simulate",
        spec.seed,
        config,
        hash,
    )?;

    let mut outputs = vec![args.out.clone()];
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }

    if args.couple.is_empty() {
        let sequence = generate(&spec, args.n)?;
        write_elements_csv(&args.out, &sequence, "x")?;
    } else {
        let pair = generate_coupled(&spec, args.n, &args.couple)?;
        write_elements_csv(&args.out, &pair.original, "x")?;
        let stem = args
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "out".into());
        let ext = args
            .out
            .extension()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "csv".into());
        let sibling = |suffix: &str| args.out.with_file_name(format!("{stem}_{suffix}.{ext}"));
        let primed = sibling("primed");
        write_elements_csv(&primed, &pair.primed, "x")?;
        outputs.push(primed);
        for (m, seq) in &pair.coupled {
            let path = sibling(&format!("m{m}"));
            write_elements_csv(&path, seq, "x")?;
            outputs.push(path);
        }
    }

    let n = args.n;
    manifest.finish(outputs, serde_json::json!({ "n": n }))?;
    Ok(())
}
