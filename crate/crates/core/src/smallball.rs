//! Empirical small-ball probabilities and the concentration checks for the
//! neighbor radius H and the neighbor count k.
//!
//! The small-ball probability `phi(h)` is the chance that a covariate draw
//! lands within distance h of the target point. Finite-dimensional covariates
//! have `phi(h) ~ h^tau` (fractal type); smooth random curves such as
//! Brownian paths decay much faster as h shrinks (exponential type), which is
//! what makes their regression rates logarithmic.
//!
//! Almost-sure statements cannot be tested directly; the checks here count
//! how often the asserted event fails across seeded replications and report
//! the violation frequency with every parameter that produced it.

use rayon::prelude::*;

use crate::curves::{element_distance, Element, SemiMetricSpec};
use crate::datagen::{generate_with_stream, ProcessSpec};
use crate::error::{Error, Result};
use crate::estimator::knn_radius;
use crate::ratebench::fit_loglog;
use crate::rng::{replication_stream_id, STREAM_AUX};

/// Auxiliary-sample multiplier for the plug-in estimate of phi.
const AUX_FACTOR: usize = 10;

// ---------------------------------------------------------------------------
// phi estimation
// ---------------------------------------------------------------------------

/// Empirical small-ball curve: `phi_hat(h)` on a grid of radii.
#[derive(Clone, Debug)]
pub struct SmallBallCurve {
    pub h_grid: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub n_samples: usize,
    /// True when a monotone rearrangement had to repair the estimates (it
    /// cannot trigger for a single-sample empirical CDF, but downstream
    /// estimators built from merged samples may need it).
    pub monotonized: bool,
}

/// Estimate `phi(h) = P(d(X, x) <= h)` on a grid of radii from a sample.
pub fn phi_estimate(
    samples: &[Element],
    x: &Element,
    metric: &SemiMetricSpec,
    h_grid: &[f64],
) -> Result<SmallBallCurve> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    validate_h_grid(h_grid)?;
    let mut dists: Vec<f64> = samples
        .iter()
        .map(|s| element_distance(metric, s, x))
        .collect::<Result<_>>()?;
    dists.sort_by(f64::total_cmp);
    let n = dists.len() as f64;
    let mut phi_hat: Vec<f64> = h_grid
        .iter()
        .map(|&h| dists.partition_point(|&d| d <= h) as f64 / n)
        .collect();
    let mut monotonized = false;
    for i in 1..phi_hat.len() {
        if phi_hat[i] < phi_hat[i - 1] {
            phi_hat[i] = phi_hat[i - 1];
            monotonized = true;
        }
    }
    Ok(SmallBallCurve {
        h_grid: h_grid.to_vec(),
        phi_hat,
        n_samples: samples.len(),
        monotonized,
    })
}

fn validate_h_grid(h_grid: &[f64]) -> Result<()> {
    if h_grid.is_empty() {
        return Err(Error::InvalidParam {
            name: "h_grid",
            message: "need at least one radius".into(),
        });
    }
    for (i, w) in h_grid.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParam {
                name: "h_grid",
                message: format!("radii must be strictly increasing (index {})", i + 1),
            });
        }
    }
    if !(h_grid[0] > 0.0) {
        return Err(Error::InvalidParam {
            name: "h_grid",
            message: format!("radii must be positive, got {}", h_grid[0]),
        });
    }
    Ok(())
}

/// Generalized inverse on the stored grid: the smallest grid radius with
/// `phi_hat(h) >= p`. No interpolation between grid points.
pub fn phi_inverse(curve: &SmallBallCurve, p: f64) -> Result<f64> {
    let max = *curve.phi_hat.last().unwrap_or(&0.0);
    if !(p > 0.0) || p > max {
        return Err(Error::ProbabilityAboveMax { p, max });
    }
    let idx = curve.phi_hat.partition_point(|&v| v < p);
    Ok(curve.h_grid[idx])
}

/// Log-log slopes of `phi_hat` over a sliding window of grid points; the
/// fractal/exponential classification diagnostic. Windows with zero
/// estimates are skipped.
pub fn local_loglog_slopes(curve: &SmallBallCurve, window: usize) -> Result<Vec<f64>> {
    if window < 3 || window > curve.h_grid.len() {
        return Err(Error::InvalidParam {
            name: "window",
            message: format!(
                "need 3 <= window <= {} grid points, got {window}",
                curve.h_grid.len()
            ),
        });
    }
    let mut slopes = Vec::new();
    for start in 0..=(curve.h_grid.len() - window) {
        let hs = &curve.h_grid[start..start + window];
        let ps = &curve.phi_hat[start..start + window];
        if ps.iter().all(|&p| p > 0.0) {
            slopes.push(fit_loglog(hs, ps)?.slope);
        }
    }
    Ok(slopes)
}

// ---------------------------------------------------------------------------
// Concentration checks
// ---------------------------------------------------------------------------

/// Which concentration statement a check exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    /// k-NN radius against the small-ball quantile, independent draws.
    RadiusQuantile,
    /// k-NN radius against a caller-enlarged bound, dependent draws.
    RadiusQuantileDependent,
    /// Neighbor count against the `[n phi(H)/2, 2 n phi(H)]` band.
    NeighborCount,
    /// Neighbor count band with shrunken/enlarged radii, dependent draws.
    NeighborCountDependent,
}

impl CheckKind {
    /// Short code used on the command line and in result files.
    pub fn code(&self) -> &'static str {
        match self {
            CheckKind::RadiusQuantile => "p1",
            CheckKind::RadiusQuantileDependent => "p2",
            CheckKind::NeighborCount => "p3",
            CheckKind::NeighborCountDependent => "p4",
        }
    }
}

/// Outcome of one replication of a concentration check.
#[derive(Clone, Copy, Debug)]
pub struct ReplicationOutcome {
    /// The statistic the check thresholds: H for radius checks, k for count
    /// checks.
    pub statistic: f64,
    pub violated: bool,
}

/// Frequency summary of a concentration check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub kind: CheckKind,
    pub replications: usize,
    pub violations: usize,
    /// `violations / replications`, exactly.
    pub violation_fraction: f64,
    pub n: usize,
    pub k: Option<usize>,
    /// Fixed ball radius, where the check uses one.
    pub radius: Option<f64>,
    /// Radius threshold the statistic is compared against.
    pub threshold: Option<f64>,
    /// Count band `[lo, hi]` for neighbor-count checks.
    pub band: Option<(f64, f64)>,
    /// Dependence horizon recorded for dependent checks.
    pub m: Option<usize>,
    /// Hypothesis-regime warnings; a nonempty list marks a diagnostic run.
    pub warnings: Vec<String>,
    pub per_replication: Vec<ReplicationOutcome>,
}

impl CheckResult {
    fn from_outcomes(
        kind: CheckKind,
        n: usize,
        outcomes: Vec<ReplicationOutcome>,
        warnings: Vec<String>,
    ) -> Self {
        let replications = outcomes.len();
        let violations = outcomes.iter().filter(|o| o.violated).count();
        CheckResult {
            kind,
            replications,
            violations,
            violation_fraction: violations as f64 / replications as f64,
            n,
            k: None,
            radius: None,
            threshold: None,
            band: None,
            m: None,
            warnings,
            per_replication: outcomes,
        }
    }
}

fn validate_reps(replications: usize) -> Result<()> {
    if replications == 0 {
        return Err(Error::InvalidParam {
            name: "replications",
            message: "need at least one replication".into(),
        });
    }
    Ok(())
}

/// Plug-in small-ball estimate from a large auxiliary sample on a reserved
/// stream, so replication noise dominates the plug-in error.
fn aux_phi(
    process: &ProcessSpec,
    x: &Element,
    metric: &SemiMetricSpec,
    n: usize,
    h_grid: &[f64],
) -> Result<SmallBallCurve> {
    let aux = generate_with_stream(process, AUX_FACTOR * n, STREAM_AUX)?;
    phi_estimate(&aux, x, metric, h_grid)
}

/// Exact empirical phi at a single radius from the auxiliary sample.
fn aux_phi_at(
    process: &ProcessSpec,
    x: &Element,
    metric: &SemiMetricSpec,
    n: usize,
    h: f64,
) -> Result<f64> {
    let aux = generate_with_stream(process, AUX_FACTOR * n, STREAM_AUX)?;
    let inside = aux
        .iter()
        .map(|s| element_distance(metric, s, x))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .filter(|&d| d <= h)
        .count();
    Ok(inside as f64 / aux.len() as f64)
}

fn radius_outcomes(
    process: &ProcessSpec,
    x: &Element,
    metric: &SemiMetricSpec,
    n: usize,
    k: usize,
    threshold: f64,
    replications: usize,
) -> Result<Vec<ReplicationOutcome>> {
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let draws =
                generate_with_stream(process, n, replication_stream_id(0, r as u64))?;
            let h = knn_radius(&draws, x, metric, k)?;
            Ok(ReplicationOutcome {
                statistic: h,
                violated: h > threshold,
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn count_outcomes(
    process: &ProcessSpec,
    x: &Element,
    metric: &SemiMetricSpec,
    n: usize,
    h: f64,
    lo: f64,
    hi: f64,
    replications: usize,
) -> Result<Vec<ReplicationOutcome>> {
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let draws =
                generate_with_stream(process, n, replication_stream_id(0, r as u64))?;
            let count = draws
                .iter()
                .map(|d| element_distance(metric, d, x))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .filter(|&d| d <= h)
                .count() as f64;
            Ok(ReplicationOutcome {
                statistic: count,
                violated: count < lo || count > hi,
            })
        })
        .collect()
}

/// Check that the k-NN radius stays below the small-ball quantile
/// `phi^{-1}(2k/n)` across replications of independent draws.
///
/// The quantile comes from a high-precision plug-in estimate on the reserved
/// auxiliary stream and is inverted on `h_grid`. k = n is degenerate (the
/// quantile at 2 does not exist) and is rejected. Out-of-regime parameters
/// produce warnings, not failures: such runs are diagnostics.
pub fn check_radius_quantile(
    process: &ProcessSpec,
    x: &Element,
    metric: &SemiMetricSpec,
    n: usize,
    k: usize,
    replications: usize,
    h_grid: &[f64],
) -> Result<CheckResult> {
    validate_reps(replications)?;
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let phi = aux_phi(process, x, metric, n, h_grid)?;
    let threshold = phi_inverse(&phi, 2.0 * k as f64 / n as f64)?;
    let mut warnings = regime_warnings_radius(process, n, k, None);
    if phi.monotonized {
        warnings.push("phi estimate needed monotone rearrangement".into());
    }
    let outcomes = radius_outcomes(process, x, metric, n, k, threshold, replications)?;
    let mut result =
        CheckResult::from_outcomes(CheckKind::RadiusQuantile, n, outcomes, warnings);
    result.k = Some(k);
    result.threshold = Some(threshold);
    Ok(result)
}

/// Dependent-covariate variant: the caller supplies the enlarged radius
/// bound `h` (typically the quantile plus a margin scaled by the measured
/// coupling decay of the covariates) and the horizon m it was derived from.
///
/// With serially independent draws and `h` equal to the plain quantile this
/// reproduces [`check_radius_quantile`] replication by replication.
#[allow(clippy::too_many_arguments)]
pub fn check_radius_quantile_dependent(
    process: &ProcessSpec,
    x: &Element,
    metric: &SemiMetricSpec,
    n: usize,
    k: usize,
    h: f64,
    m: usize,
    replications: usize,
) -> Result<CheckResult> {
    validate_reps(replications)?;
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParam {
            name: "h",
            message: format!("need a radius bound > 0, got {h}"),
        });
    }
    let warnings = regime_warnings_radius(process, n, k, Some(m));
    let outcomes = radius_outcomes(process, x, metric, n, k, h, replications)?;
    let mut result =
        CheckResult::from_outcomes(CheckKind::RadiusQuantileDependent, n, outcomes, warnings);
    result.k = Some(k);
    result.threshold = Some(h);
    result.m = Some(m);
    Ok(result)
}

/// Check that the number of draws inside the fixed ball B(x, h) stays within
/// `[n phi(h)/2, 2 n phi(h)]`, with phi(h) from the auxiliary stream.
pub fn check_neighbor_count(
    process: &ProcessSpec,
    x: &Element,
    metric: &SemiMetricSpec,
    n: usize,
    h: f64,
    replications: usize,
) -> Result<CheckResult> {
    validate_reps(replications)?;
    if !(h > 0.0) {
        return Err(Error::InvalidParam {
            name: "h",
            message: format!("need a bandwidth > 0, got {h}"),
        });
    }
    let p = aux_phi_at(process, x, metric, n, h)?;
    let band = (n as f64 * p / 2.0, 2.0 * n as f64 * p);
    let warnings = regime_warnings_count(process, n, p, None);
    let outcomes = count_outcomes(process, x, metric, n, h, band.0, band.1, replications)?;
    let mut result = CheckResult::from_outcomes(CheckKind::NeighborCount, n, outcomes, warnings);
    result.radius = Some(h);
    result.band = Some(band);
    Ok(result)
}

/// Dependent-covariate variant of the count check: the band uses the
/// caller-supplied shrunken radius `h_lo` and enlarged radius `h_hi`
/// (`h_lo < h < h_hi`), the count still uses the working radius h.
#[allow(clippy::too_many_arguments)]
pub fn check_neighbor_count_dependent(
    process: &ProcessSpec,
    x: &Element,
    metric: &SemiMetricSpec,
    n: usize,
    h: f64,
    h_lo: f64,
    h_hi: f64,
    m: usize,
    replications: usize,
) -> Result<CheckResult> {
    validate_reps(replications)?;
    if !(h_lo > 0.0 && h_lo < h && h < h_hi) {
        return Err(Error::InvalidParam {
            name: "radii",
            message: format!("need 0 < h_lo < h < h_hi, got {h_lo}, {h}, {h_hi}"),
        });
    }
    let p_lo = aux_phi_at(process, x, metric, n, h_lo)?;
    let p_hi = aux_phi_at(process, x, metric, n, h_hi)?;
    let band = (n as f64 * p_lo / 2.0, 2.0 * n as f64 * p_hi);
    let warnings = regime_warnings_count(process, n, p_lo, Some(m));
    let outcomes = count_outcomes(process, x, metric, n, h, band.0, band.1, replications)?;
    let mut result =
        CheckResult::from_outcomes(CheckKind::NeighborCountDependent, n, outcomes, warnings);
    result.radius = Some(h);
    result.band = Some(band);
    result.m = Some(m);
    Ok(result)
}

fn regime_warnings_radius(
    process: &ProcessSpec,
    n: usize,
    k: usize,
    m: Option<usize>,
) -> Vec<String> {
    let mut warnings = Vec::new();
    let nf = n as f64;
    let kf = k as f64;
    if kf / nf > 0.1 {
        warnings.push(format!("k/n = {:.3} is not small", kf / nf));
    }
    match m {
        None => {
            if kf < 4.0 * nf.ln() {
                warnings.push(format!("k/log n = {:.2} is small", kf / nf.ln()));
            }
            if process.is_dependent() {
                warnings.push("independent-draw check run on a dependent process".into());
            }
        }
        Some(m) => {
            if kf < 4.0 * m as f64 * nf.ln() {
                warnings.push(format!(
                    "k/(m log n) = {:.2} is small",
                    kf / (m as f64 * nf.ln())
                ));
            }
        }
    }
    warnings
}

fn regime_warnings_count(
    process: &ProcessSpec,
    n: usize,
    p: f64,
    m: Option<usize>,
) -> Vec<String> {
    let mut warnings = Vec::new();
    let nf = n as f64;
    let mass = nf * p;
    match m {
        None => {
            if mass < 10.0 * nf.ln() {
                warnings.push(format!("n phi(h)/log n = {:.2} is small", mass / nf.ln()));
            }
            if process.is_dependent() {
                warnings.push("independent-draw check run on a dependent process".into());
            }
        }
        Some(m) => {
            if mass < 10.0 * m as f64 * nf.ln() {
                warnings.push(format!(
                    "n phi(h_lo)/(m log n) = {:.2} is small",
                    mass / (m as f64 * nf.ln())
                ));
            }
        }
    }
    warnings
}
