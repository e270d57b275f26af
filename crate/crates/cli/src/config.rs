//! Config-file loading: strict TOML/JSON parsing (unknown keys are errors),
//! canonical content hashing, and resolution of the ratebench schema into the
//! core experiment types.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use funreg_core::curves::{Curve, Element, Grid, SemiMetricSpec};
use funreg_core::datagen::ProcessSpec;
use funreg_core::estimator::Kernel;
use funreg_core::io::read_curves_csv;
use funreg_core::ratebench::{
    named_shape, ExperimentConfig, RegressionTruth, Rule, SchemeRule, TargetSpec,
};

use crate::errors::{CliError, CliResult};

/// Read a structured config file. `.json` files and files beginning with `{`
/// parse as JSON, everything else as TOML.
pub fn read_value(path: &Path) -> CliResult<serde_json::Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json")
        || text.trim_start().starts_with('{');
    if is_json {
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    } else {
        let value: toml::Value = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(value).map_err(|e| CliError::config(e.to_string()))
    }
}

/// Canonical SHA-256 of a config value: objects are serialized with sorted
/// keys, so the hash does not depend on key order in the file.
pub fn canonical_hash(value: &serde_json::Value) -> String {
    // serde_json maps are BTree-backed, so serialization is already sorted
    let canonical = serde_json::to_string(value).expect("value serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Deserialize a parsed value into a strict schema, naming the offending key
/// path on failure.
pub fn from_value<T: serde::de::DeserializeOwned>(
    value: serde_json::Value,
    context: &str,
) -> CliResult<T> {
    serde_json::from_value(value).map_err(|e| CliError::config(format!("{context}: {e}")))
}

/// Load a process spec file, with an optional seed override from the command
/// line. Seeds are mandatory: a file without one must supply `--seed`.
pub fn load_process_spec(path: &Path, seed_override: Option<u64>) -> CliResult<ProcessSpec> {
    let mut value = read_value(path)?;
    if let Some(seed) = seed_override {
        value
            .as_object_mut()
            .ok_or_else(|| CliError::config("process spec must be a table"))?
            .insert("seed".into(), serde_json::json!(seed));
    }
    if value.get("seed").is_none() {
        return Err(CliError::config(
            "seed is mandatory: set `seed` in the process file or pass --seed",
        ));
    }
    from_value(value, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// ratebench config schema
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Uniform,
    Triangle,
}

impl KernelConfig {
    pub fn to_kernel(&self) -> Kernel {
        match self {
            KernelConfig::Uniform => Kernel::Uniform,
            KernelConfig::Triangle => Kernel::Triangle,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeConfig {
    SimpleKnn {
        k_rule: String,
    },
    KernelKnn {
        k_rule: String,
        kernel: KernelConfig,
    },
    NadarayaWatson {
        h_rule: String,
        kernel: KernelConfig,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricConfig {
    L2,
    Projection { dim: usize, basis: PathBuf },
}

impl MetricConfig {
    pub fn resolve(&self) -> CliResult<SemiMetricSpec> {
        match self {
            MetricConfig::L2 => Ok(SemiMetricSpec::l2()),
            MetricConfig::Projection { dim, basis } => {
                let (_, curves, _) = read_curves_csv(basis)?;
                Ok(SemiMetricSpec::projection(*dim, curves)?)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponseConfig {
    Scalar,
    Curve { grid: Grid, shape: String },
}

impl ResponseConfig {
    fn shape_element(&self) -> CliResult<Element> {
        match self {
            ResponseConfig::Scalar => Ok(Element::Scalar(1.0)),
            ResponseConfig::Curve { grid, shape } => {
                Ok(Element::Curve(named_shape(shape, grid)?))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthConfig {
    Constant {
        value: f64,
        response: ResponseConfig,
    },
    DistanceDecay {
        amplitude: f64,
        alpha: f64,
        /// Currently only "zero": the zero element of the covariate space.
        #[serde(default = "default_center")]
        center: String,
        response: ResponseConfig,
    },
}

fn default_center() -> String {
    "zero".into()
}

impl TruthConfig {
    fn resolve(&self, covariate: &ProcessSpec) -> CliResult<RegressionTruth> {
        match self {
            TruthConfig::Constant { value, response } => {
                let mut shape = response.shape_element()?;
                shape.scale(*value);
                Ok(RegressionTruth::constant(shape))
            }
            TruthConfig::DistanceDecay {
                amplitude,
                alpha,
                center,
                response,
            } => {
                if center != "zero" {
                    return Err(CliError::config(format!(
                        "truth center `{center}` not supported (use \"zero\")"
                    )));
                }
                let center = covariate.element_space().zero_element();
                let shape = response.shape_element()?;
                Ok(RegressionTruth::distance_decay(
                    center, *amplitude, *alpha, shape,
                )?)
            }
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    #[default]
    Draw,
    File { path: PathBuf },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default)]
    pub monotone_median: bool,
    #[serde(default)]
    pub slope_range: Option<[f64; 2]>,
}

fn default_gamma_replications() -> usize {
    500
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatebenchConfig {
    pub seed: u64,
    pub replications: usize,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_gamma_replications")]
    pub gamma_replications: usize,
    pub covariate: ProcessSpec,
    #[serde(default)]
    pub noise: Option<ProcessSpec>,
    pub truth: TruthConfig,
    pub scheme: SchemeConfig,
    pub metric: MetricConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
}

impl RatebenchConfig {
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let truth = self.truth.resolve(&self.covariate)?;
        let scheme = match &self.scheme {
            SchemeConfig::SimpleKnn { k_rule } => SchemeRule::SimpleKnn {
                k_rule: Rule::parse(k_rule)?,
            },
            SchemeConfig::KernelKnn { k_rule, kernel } => SchemeRule::KernelKnn {
                k_rule: Rule::parse(k_rule)?,
                kernel: kernel.to_kernel(),
            },
            SchemeConfig::NadarayaWatson { h_rule, kernel } => SchemeRule::NadarayaWatson {
                h_rule: Rule::parse(h_rule)?,
                kernel: kernel.to_kernel(),
            },
        };
        let target = match &self.target {
            TargetConfig::Draw => TargetSpec::DrawFromCovariate,
            TargetConfig::File { path } => {
                let (_, curves, _) = read_curves_csv(path)?;
                let curve: Curve = curves.into_iter().next().ok_or_else(|| {
                    CliError::data(format!("{}: no curves", path.display()))
                })?;
                TargetSpec::Explicit(Element::Curve(curve))
            }
        };
        Ok(ExperimentConfig {
            covariate: self.covariate.clone(),
            noise: self.noise.clone(),
            truth,
            scheme,
            metric: self.metric.resolve()?,
            n_grid: self.n_grid.clone(),
            replications: self.replications,
            seed: self.seed,
            target,
            gamma_replications: self.gamma_replications,
        })
    }
}
