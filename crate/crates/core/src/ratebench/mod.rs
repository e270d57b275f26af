//! End-to-end Monte Carlo rate experiments: generate regression pairs with a
//! known truth, run the estimator across a grid of sample sizes, measure the
//! estimation error at a fixed target point, and fit log-log convergence
//! slopes. Also houses the slope fitter and the weighted-noise variance
//! diagnostic.
//!
//! The error metric is the Hilbert norm at the single target point; the
//! headline statistic per sample size is the median across replications,
//! which tracks typical paths and resists heavy-tailed replication noise.

pub mod rule;

use rayon::prelude::*;

use crate::curves::{element_distance, Curve, Element, Grid, SemiMetricSpec, SpaceSpec};
use crate::datagen::{
    estimate_gamma, generate_with_stream, noise_with_stream, NormKind, ProcessSpec,
};
use crate::error::{Error, Result};
use crate::estimator::{compute_weights, estimate, weight_stats, Kernel, WeightScheme, WeightVector};
use crate::rng::{replication_stream_id, STREAM_TARGET, STREAM_VERIFY};

pub use rule::Rule;

/// Slack added to exact-inequality checks to absorb floating-point roundoff.
const BIAS_BOUND_SLACK: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Slope fitting
// ---------------------------------------------------------------------------

/// Ordinary least squares fit on log-log axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean squared residual in log space.
    pub residual: f64,
}

/// OLS of `log y` on `log x` for strictly increasing positive abscissae.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::TooFewPoints {
            need: 3,
            got: xs.len().min(ys.len()),
        });
    }
    for w in xs.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::DegenerateDesign { value: w[1] });
        }
    }
    for (index, &v) in xs.iter().chain(ys.iter()).enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveValue {
                index: index % xs.len(),
                value: v,
            });
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let xbar = lx.iter().sum::<f64>() / m;
    let ybar = ly.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (ss / m).sqrt(),
    })
}

/// [`fit_loglog`] on an integer grid of sample sizes.
pub fn fit_slope(ns: &[usize], errors: &[f64]) -> Result<SlopeFit> {
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    fit_loglog(&xs, errors)
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    }
}

// ---------------------------------------------------------------------------
// Regression truths
// ---------------------------------------------------------------------------

/// Built-in response shapes on a grid.
pub fn named_shape(name: &str, grid: &Grid) -> Result<Curve> {
    match name {
        "constant" => Ok(Curve::from_fn(grid, |_| 1.0)),
        "sine" => Ok(Curve::from_fn(grid, |t| {
            (2.0 * std::f64::consts::PI * t).sin()
        })),
        "bump" => Ok(Curve::from_fn(grid, |t| (-(t - 0.5).powi(2) / 0.02).exp())),
        other => Err(Error::InvalidParam {
            name: "shape",
            message: format!("unknown shape `{other}` (constant, sine, bump)"),
        }),
    }
}

#[derive(Clone, Debug)]
enum TruthKind {
    /// `r(x) = value` for every x.
    Constant { value: Element },
    /// `r(x) = amplitude * exp(-d(x, center)^alpha) * shape`.
    DistanceDecay {
        center: Element,
        amplitude: f64,
        alpha: f64,
        shape: Element,
    },
}

/// A regression map with declared smoothness: Hoelder constant M and exponent
/// alpha, plus the uniform bound B on the response norm.
#[derive(Clone, Debug)]
pub struct RegressionTruth {
    kind: TruthKind,
    lipschitz_m: f64,
    alpha: f64,
    bound_b: f64,
}

impl RegressionTruth {
    pub fn constant(value: Element) -> Self {
        let bound_b = value.norm();
        RegressionTruth {
            kind: TruthKind::Constant { value },
            lipschitz_m: 0.0,
            alpha: 1.0,
            bound_b,
        }
    }

    /// Distance-driven truth `g(d(x, center)) * shape` with `g(u) =
    /// amplitude * exp(-u^alpha)`.
    ///
    /// `|e^{-a} - e^{-b}| <= |a - b|` and `|u^alpha - v^alpha| <= |u -
    /// v|^alpha` for alpha <= 1 give the declared constants M = amplitude *
    /// |shape| and B = amplitude * |shape| in closed form.
    pub fn distance_decay(
        center: Element,
        amplitude: f64,
        alpha: f64,
        shape: Element,
    ) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidParam {
                name: "amplitude",
                message: format!("need amplitude > 0, got {amplitude}"),
            });
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParam {
                name: "alpha",
                message: format!("need alpha in (0, 1], got {alpha}"),
            });
        }
        let shape_norm = shape.norm();
        if shape_norm == 0.0 {
            return Err(Error::InvalidParam {
                name: "shape",
                message: "shape must be a nonzero element".into(),
            });
        }
        Ok(RegressionTruth {
            lipschitz_m: amplitude * shape_norm,
            alpha,
            bound_b: amplitude * shape_norm,
            kind: TruthKind::DistanceDecay {
                center,
                amplitude,
                alpha,
                shape,
            },
        })
    }

    pub fn lipschitz_m(&self) -> f64 {
        self.lipschitz_m
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bound_b(&self) -> f64 {
        self.bound_b
    }

    pub fn response_space(&self) -> SpaceSpec {
        match &self.kind {
            TruthKind::Constant { value } => value.space(),
            TruthKind::DistanceDecay { shape, .. } => shape.space(),
        }
    }

    /// Evaluate the regression map at a covariate point.
    pub fn apply(&self, x: &Element, metric: &SemiMetricSpec) -> Result<Element> {
        match &self.kind {
            TruthKind::Constant { value } => Ok(value.clone()),
            TruthKind::DistanceDecay {
                center,
                amplitude,
                alpha,
                shape,
            } => {
                let d = element_distance(metric, x, center)?;
                let mut out = shape.clone();
                out.scale(amplitude * (-d.powf(*alpha)).exp());
                Ok(out)
            }
        }
    }

    /// Spot-check the declared Hoelder constants on random covariate pairs.
    pub fn verify_lipschitz(
        &self,
        process: &ProcessSpec,
        metric: &SemiMetricSpec,
        pairs: usize,
    ) -> Result<()> {
        let draws = generate_with_stream(process, 2 * pairs, STREAM_VERIFY)?;
        for pair in draws.chunks_exact(2) {
            let d = element_distance(metric, &pair[0], &pair[1])?;
            let rx = self.apply(&pair[0], metric)?;
            let ry = self.apply(&pair[1], metric)?;
            let gap = rx.sub(&ry)?.norm();
            let allowed = self.lipschitz_m * d.powf(self.alpha) + 1e-9;
            if gap > allowed {
                return Err(Error::InvalidParam {
                    name: "truth",
                    message: format!(
                        "smoothness violation: |r(x) - r(x')| = {gap} > M d^alpha = {allowed}"
                    ),
                });
            }
            if rx.norm() > self.bound_b + 1e-9 {
                return Err(Error::InvalidParam {
                    name: "truth",
                    message: format!("bound violation: |r(x)| = {} > B = {}", rx.norm(), self.bound_b),
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// Weight scheme with its sample-size rule, kept as a parseable string so
/// every result can echo the tuning that produced it.
#[derive(Clone, Debug)]
pub enum SchemeRule {
    SimpleKnn { k_rule: Rule },
    KernelKnn { k_rule: Rule, kernel: Kernel },
    NadarayaWatson { h_rule: Rule, kernel: Kernel },
}

impl SchemeRule {
    pub fn resolve(&self, n: usize) -> Result<(WeightScheme, f64)> {
        match self {
            SchemeRule::SimpleKnn { k_rule } => {
                let k = k_rule.eval_k(n)?;
                Ok((WeightScheme::SimpleKnn { k }, k as f64))
            }
            SchemeRule::KernelKnn { k_rule, kernel } => {
                let k = k_rule.eval_k(n)?;
                Ok((
                    WeightScheme::KernelKnn { k, kernel: *kernel },
                    k as f64,
                ))
            }
            SchemeRule::NadarayaWatson { h_rule, kernel } => {
                let h = h_rule.eval_h(n)?;
                Ok((
                    WeightScheme::NadarayaWatson { h, kernel: *kernel },
                    h,
                ))
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SchemeRule::SimpleKnn { .. } => "simple_knn",
            SchemeRule::KernelKnn { .. } => "kernel_knn",
            SchemeRule::NadarayaWatson { .. } => "nadaraya_watson",
        }
    }

    pub fn rule_source(&self) -> &str {
        match self {
            SchemeRule::SimpleKnn { k_rule } | SchemeRule::KernelKnn { k_rule, .. } => {
                k_rule.source()
            }
            SchemeRule::NadarayaWatson { h_rule, .. } => h_rule.source(),
        }
    }
}

/// Where the fixed target point comes from.
#[derive(Clone, Debug)]
pub enum TargetSpec {
    /// One draw from the covariate process on a reserved stream.
    DrawFromCovariate,
    /// A caller-supplied element of the covariate space.
    Explicit(Element),
}

/// Full description of a rate experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub covariate: ProcessSpec,
    /// Mean-zero noise added to the responses; `None` runs noiseless.
    pub noise: Option<ProcessSpec>,
    pub truth: RegressionTruth,
    pub scheme: SchemeRule,
    pub metric: SemiMetricSpec,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    /// Master seed for experiment-level draws (the covariate and noise specs
    /// carry their own seeds).
    pub seed: u64,
    pub target: TargetSpec,
    /// Replications for the noise coupling-decay estimate when the noise is
    /// serially dependent.
    pub gamma_replications: usize,
}

/// One successful replication.
#[derive(Clone, Copy, Debug)]
pub struct RepRecord {
    pub n: usize,
    pub replication: usize,
    /// `|r^(x) - r(x)|` in the response norm.
    pub error: f64,
    /// Ball radius used by the weights (H or the bandwidth).
    pub radius: f64,
    pub k_effective: usize,
    pub v_n1: f64,
    pub c_n2: f64,
    pub b_n: f64,
}

/// One failed replication, kept verbatim rather than swallowed.
#[derive(Clone, Debug)]
pub struct RepFailure {
    pub n: usize,
    pub replication: usize,
    pub message: String,
}

/// Per-sample-size summary.
#[derive(Clone, Copy, Debug)]
pub struct NSummary {
    pub n: usize,
    /// Resolved rule value at this n: k for k-NN schemes, h for fixed-bandwidth.
    pub rule_value: f64,
    pub median: f64,
    pub q90: f64,
    pub successes: usize,
    pub failures: usize,
}

/// Everything a rate experiment produces.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub records: Vec<RepRecord>,
    pub failures: Vec<RepFailure>,
    pub summaries: Vec<NSummary>,
    /// Log-log slope of the per-n medians; absent when medians vanish or the
    /// grid is too short.
    pub slope: Option<SlopeFit>,
    /// Lag-1 coupling decay of the noise when it is serially dependent.
    pub gamma1_noise: Option<f64>,
    /// Noiseless runs only: replications whose error exceeded the
    /// bias bound `M H^alpha + 2 B b_n`.
    pub bias_violations: Option<usize>,
    pub scheme_kind: String,
    pub rule_source: String,
}

enum RepOutcome {
    Ok(RepRecord),
    Failed(RepFailure),
}

/// Run a full rate experiment. Deterministic given the config; replication
/// order and worker count never change the output.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    validate_config(config)?;
    let covariate_space = config.covariate.element_space();
    let response_space = config.truth.response_space();
    if let Some(noise) = &config.noise {
        let noise_space = noise.element_space();
        if !noise_space.matches(&response_space) {
            return Err(Error::SpaceMismatch {
                expected: response_space.to_string(),
                found: noise_space.to_string(),
            });
        }
    }

    let x = match &config.target {
        TargetSpec::Explicit(x) => {
            if !x.space().matches(&covariate_space) {
                return Err(Error::SpaceMismatch {
                    expected: covariate_space.to_string(),
                    found: x.space().to_string(),
                });
            }
            x.clone()
        }
        TargetSpec::DrawFromCovariate => {
            let mut draw = generate_with_stream(&config.covariate, 1, STREAM_TARGET)?;
            draw.pop().unwrap()
        }
    };

    config
        .truth
        .verify_lipschitz(&config.covariate, &config.metric, 1_000)?;
    let r_x = config.truth.apply(&x, &config.metric)?;

    // resolve every rule up front so bad rules fail before any simulation
    let resolved: Vec<(usize, WeightScheme, f64)> = config
        .n_grid
        .iter()
        .map(|&n| {
            let (scheme, value) = config.scheme.resolve(n)?;
            Ok((n, scheme, value))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..config.n_grid.len())
        .flat_map(|n_idx| (0..config.replications).map(move |rep| (n_idx, rep)))
        .collect();

    let outcomes: Vec<RepOutcome> = jobs
        .par_iter()
        .map(|&(n_idx, rep)| {
            let (n, scheme, _) = &resolved[n_idx];
            // covariates and noise live on disjoint stream blocks, so they
            // stay independent even when the two specs share a seed
            let cov_stream = replication_stream_id(1 + 2 * n_idx as u64, rep as u64);
            let noise_stream = replication_stream_id(2 + 2 * n_idx as u64, rep as u64);
            match run_replication(config, scheme, *n, cov_stream, noise_stream, &x, &r_x) {
                Ok(record) => RepOutcome::Ok(RepRecord {
                    n: *n,
                    replication: rep,
                    ..record
                }),
                Err(err) => RepOutcome::Failed(RepFailure {
                    n: *n,
                    replication: rep,
                    message: err.to_string(),
                }),
            }
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            RepOutcome::Ok(r) => records.push(r),
            RepOutcome::Failed(f) => failures.push(f),
        }
    }

    let mut summaries = Vec::new();
    for (n, _, rule_value) in &resolved {
        let mut errors: Vec<f64> = records
            .iter()
            .filter(|r| r.n == *n)
            .map(|r| r.error)
            .collect();
        errors.sort_by(f64::total_cmp);
        let failed = failures.iter().filter(|f| f.n == *n).count();
        if errors.is_empty() {
            return Err(Error::Data {
                context: format!("experiment at n = {n}"),
                message: format!("all {failed} replications failed: {}", failures
                    .iter()
                    .find(|f| f.n == *n)
                    .map(|f| f.message.clone())
                    .unwrap_or_default()),
            });
        }
        summaries.push(NSummary {
            n: *n,
            rule_value: *rule_value,
            median: quantile(&errors, 0.5),
            q90: quantile(&errors, 0.9),
            successes: errors.len(),
            failures: failed,
        });
    }

    // medians at the floating-point noise floor carry no rate information
    let slope = if summaries.len() >= 3 && summaries.iter().all(|s| s.median > 1e-13) {
        let ns: Vec<usize> = summaries.iter().map(|s| s.n).collect();
        let medians: Vec<f64> = summaries.iter().map(|s| s.median).collect();
        Some(fit_slope(&ns, &medians)?)
    } else {
        None
    };

    let gamma1_noise = match &config.noise {
        Some(noise) if noise.is_dependent() => Some(
            estimate_gamma(noise, 1, config.gamma_replications, &NormKind::L2)?.gamma_hat,
        ),
        _ => None,
    };

    let bias_violations = if config.noise.is_none() {
        let m = config.truth.lipschitz_m();
        let alpha = config.truth.alpha();
        let b = config.truth.bound_b();
        Some(
            records
                .iter()
                .filter(|r| r.error > m * r.radius.powf(alpha) + 2.0 * b * r.b_n + BIAS_BOUND_SLACK)
                .count(),
        )
    } else {
        None
    };

    Ok(ExperimentResult {
        records,
        failures,
        summaries,
        slope,
        gamma1_noise,
        bias_violations,
        scheme_kind: config.scheme.kind_name().to_string(),
        rule_source: config.scheme.rule_source().to_string(),
    })
}

fn validate_config(config: &ExperimentConfig) -> Result<()> {
    if config.n_grid.is_empty() {
        return Err(Error::InvalidParam {
            name: "n_grid",
            message: "need at least one sample size".into(),
        });
    }
    for w in config.n_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParam {
                name: "n_grid",
                message: "sample sizes must be strictly increasing".into(),
            });
        }
    }
    if config.replications == 0 {
        return Err(Error::InvalidParam {
            name: "replications",
            message: "need at least one replication".into(),
        });
    }
    config.covariate.validate()?;
    if let Some(noise) = &config.noise {
        noise.validate()?;
    }
    Ok(())
}

fn run_replication(
    config: &ExperimentConfig,
    scheme: &WeightScheme,
    n: usize,
    cov_stream: u64,
    noise_stream: u64,
    x: &Element,
    r_x: &Element,
) -> Result<RepRecord> {
    let xs = generate_with_stream(&config.covariate, n, cov_stream)?;
    let mut ys: Vec<Element> = xs
        .iter()
        .map(|xi| config.truth.apply(xi, &config.metric))
        .collect::<Result<_>>()?;
    if let Some(noise_spec) = &config.noise {
        let eps = noise_with_stream(noise_spec, n, &config.truth.response_space(), noise_stream)?;
        for (y, e) in ys.iter_mut().zip(&eps) {
            y.add_scaled(1.0, e)?;
        }
    }
    let weights = compute_weights(scheme, &xs, x, &config.metric)?;
    let estimate = estimate(&weights, &ys)?;
    let error = estimate.sub(r_x)?.norm();
    let k_for_stats = weights.k_effective().max(1);
    let stats = weight_stats(&weights, k_for_stats)?;
    Ok(RepRecord {
        n,
        replication: 0, // filled by the caller
        error,
        radius: weights.radius(),
        k_effective: weights.k_effective(),
        v_n1: stats.v_n1,
        c_n2: stats.c_n2,
        b_n: stats.b_n,
    })
}

// ---------------------------------------------------------------------------
// Variance diagnostic
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of `E |sum_i W_i eps_i|` against the weight-norm
/// prediction `c_n2 + sqrt(gamma_1 v_n1)`.
#[derive(Clone, Copy, Debug)]
pub struct VarianceDiagnostic {
    pub mean_sn_norm: f64,
    pub c_n2: f64,
    pub v_n1: f64,
    /// Lag-1 coupling decay of the noise; 0 for independent noise.
    pub gamma1: f64,
    /// `mean_sn_norm / (c_n2 + sqrt(gamma1 * v_n1))`.
    pub ratio: f64,
}

pub fn variance_diagnostic(
    weights: &WeightVector,
    noise: &ProcessSpec,
    replications: usize,
) -> Result<VarianceDiagnostic> {
    if replications == 0 {
        return Err(Error::InvalidParam {
            name: "replications",
            message: "need at least one replication".into(),
        });
    }
    noise.validate()?;
    let n = weights.len();
    let space = noise.element_space();
    let norms: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let eps = noise_with_stream(noise, n, &space, replication_stream_id(2, r as u64))?;
            let sn = estimate(weights, &eps)?;
            Ok(sn.norm())
        })
        .collect::<Result<_>>()?;
    let mean_sn_norm = norms.iter().sum::<f64>() / norms.len() as f64;
    let gamma1 = if noise.is_dependent() {
        estimate_gamma(noise, 1, replications.max(100), &NormKind::L2)?.gamma_hat
    } else {
        0.0
    };
    let c_n2 = weights.c_n2();
    let v_n1 = weights.v_n1();
    let ratio = mean_sn_norm / (c_n2 + (gamma1 * v_n1).sqrt());
    Ok(VarianceDiagnostic {
        mean_sn_norm,
        c_n2,
        v_n1,
        gamma1,
        ratio,
    })
}
