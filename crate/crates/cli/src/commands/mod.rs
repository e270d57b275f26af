pub mod estimate;
pub mod orlicz;
pub mod ratebench;
pub mod simulate;
pub mod smallball;

use std::path::{Path, PathBuf};

use funreg_core::curves::{Element, SemiMetricSpec};
use funreg_core::io::read_curves_csv;

use crate::errors::{CliError, CliResult};

/// Parse a `--metric` argument: `l2` or `projection:<dim>:<basis csv>`.
pub fn parse_metric(spec: &str) -> CliResult<SemiMetricSpec> {
    if spec == "l2" {
        return Ok(SemiMetricSpec::l2());
    }
    if let Some(rest) = spec.strip_prefix("projection:") {
        let (dim, path) = rest.split_once(':').ok_or_else(|| {
            CliError::config("projection metric wants projection:<dim>:<basis csv>")
        })?;
        let dim: usize = dim
            .parse()
            .map_err(|_| CliError::config(format!("bad projection dim `{dim}`")))?;
        let (_, basis, _) = read_curves_csv(Path::new(path))?;
        return Ok(SemiMetricSpec::projection(dim, basis)?);
    }
    Err(CliError::config(format!(
        "unknown metric `{spec}` (l2, projection:<dim>:<basis csv>)"
    )))
}

/// Parse a target-point argument: `zero`, a scalar literal, a comma-separated
/// vector literal, or a path to a curve file (first curve column).
pub fn parse_point(spec: &str, zero_of: Option<&Element>) -> CliResult<Element> {
    if spec == "zero" {
        return zero_of
            .map(|e| e.zero_like())
            .ok_or_else(|| CliError::config("`zero` needs a process to take the space from"));
    }
    if let Ok(v) = spec.parse::<f64>() {
        return Ok(Element::Scalar(v));
    }
    if spec.contains(',') {
        let values: Result<Vec<f64>, _> = spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
        if let Ok(values) = values {
            return Ok(Element::Vector(values));
        }
    }
    let path = Path::new(spec);
    let (_, curves, _) = read_curves_csv(path)?;
    curves
        .into_iter()
        .next()
        .map(Element::Curve)
        .ok_or_else(|| CliError::data(format!("{}: no curves", path.display())))
}

/// `lo:hi:steps` into a strictly increasing linear grid of radii.
pub fn parse_hgrid(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::config(format!(
            "--hgrid wants lo:hi:steps, got `{spec}`"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::config(format!("bad hgrid lo `{}`", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::config(format!("bad hgrid hi `{}`", parts[1])))?;
    let steps: usize = parts[2]
        .parse()
        .map_err(|_| CliError::config(format!("bad hgrid steps `{}`", parts[2])))?;
    // negated comparisons so NaN endpoints are rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if steps < 2 || !(hi > lo) || !(lo > 0.0) {
        return Err(CliError::config(
            "--hgrid needs 0 < lo < hi and steps >= 2",
        ));
    }
    Ok((0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect())
}

/// Output-directory override from the environment (the only env knob).
pub fn out_dir_override(flag: PathBuf) -> PathBuf {
    match std::env::var_os("FUNREG_OUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => flag,
    }
}
