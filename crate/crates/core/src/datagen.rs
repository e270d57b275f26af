//! Seeded generators for covariate and noise sequences: independent draws
//! (finite-dimensional Gaussian, Brownian paths) and first-order
//! autoregressions, together with the coupled copies used to quantify weak
//! dependence and the empirical decay rate of the coupling error.
//!
//! An AR(1) sequence is a function of its innovation history. Its lag-m
//! coupled copy keeps the most recent m innovations and replaces the older
//! ones with an independent stream, so the coupling error `X_m - X_m^(m)`
//! measures how fast the dependence on the past decays.

use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::curves::{Curve, Element, Grid, SemiMetricSpec, SpaceSpec};
use crate::error::{Error, Result};
use crate::orlicz::{orlicz_norm, PsiSpec, DEFAULT_TOLERANCE};
use crate::rng::{stream, STREAM_PRIMARY, STREAM_PRIMED};

/// Truncation bias target for the default AR(1) burn-in: the leftover weight
/// of the discarded infinite past, `|rho|^burn_in`, stays below this.
const BURN_IN_BIAS: f64 = 1e-12;

/// Stream block reserved for decay estimation, far above the per-n blocks of
/// rate experiments; keeps the coupling replications disjoint from any other
/// replication family run on the same seed.
const DECAY_STREAM_BLOCK: u64 = 1 << 16;

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

/// Marginal distribution of AR(1) innovations (and of white-noise curves).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationSpec {
    Gaussian { sigma: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl InnovationSpec {
    fn validate(&self) -> Result<()> {
        match self {
            InnovationSpec::Gaussian { sigma } => {
                if !(sigma > &0.0) || !sigma.is_finite() {
                    return Err(Error::InvalidParam {
                        name: "innovation sigma",
                        message: format!("need sigma > 0, got {sigma}"),
                    });
                }
            }
            InnovationSpec::Uniform { lo, hi } => {
                if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidParam {
                        name: "innovation range",
                        message: format!("need lo < hi, got [{lo}, {hi}]"),
                    });
                }
            }
        }
        Ok(())
    }

    fn mean(&self) -> f64 {
        match self {
            InnovationSpec::Gaussian { .. } => 0.0,
            InnovationSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            InnovationSpec::Gaussian { sigma } => {
                Normal::new(0.0, *sigma).expect("validated").sample(rng)
            }
            InnovationSpec::Uniform { lo, hi } => Uniform::new(*lo, *hi).sample(rng),
        }
    }
}

/// State space of an AR(1) process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ar1Space {
    Scalar,
    Curve { grid: Grid },
}

/// Autoregression operator for curve-valued states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ar1Operator {
    /// `rho * identity`, applied pointwise on the grid.
    #[default]
    Diagonal,
    /// `rho` times a moving average over `2 * half_width + 1` grid points
    /// (truncated at the boundaries).
    Banded { half_width: usize },
}

/// Kind of process to generate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    /// Independent standard Gaussian vectors in R^dim.
    IidGaussianFinite { dim: usize },
    /// Standard Brownian paths sampled on a grid (cumulative sums of scaled
    /// Gaussian increments).
    BrownianMotion { grid: Grid },
    /// Stationary first-order autoregression `X_i = A X_{i-1} + alpha_i`.
    Ar1 {
        rho: f64,
        innovation: InnovationSpec,
        space: Ar1Space,
        #[serde(default)]
        operator: Ar1Operator,
    },
}

/// A reproducible generator description: process kind plus master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub seed: u64,
    /// Truncation length of the autoregression's past; `None` picks the
    /// smallest burn-in with `|rho|^burn_in < 1e-12`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    pub process: ProcessKind,
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.process {
            ProcessKind::IidGaussianFinite { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidParam {
                        name: "dim",
                        message: "need dim >= 1".into(),
                    });
                }
            }
            ProcessKind::BrownianMotion { .. } => {}
            ProcessKind::Ar1 {
                rho,
                innovation,
                space,
                operator,
            } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::InvalidParam {
                        name: "rho",
                        message: format!("need |rho| < 1 for stationarity, got {rho}"),
                    });
                }
                innovation.validate()?;
                if let (Ar1Operator::Banded { .. }, Ar1Space::Scalar) = (operator, space) {
                    return Err(Error::InvalidParam {
                        name: "operator",
                        message: "banded operator requires a curve-valued state".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Space the generated elements live in.
    pub fn element_space(&self) -> SpaceSpec {
        match &self.process {
            ProcessKind::IidGaussianFinite { dim } => SpaceSpec::Vector { dim: *dim },
            ProcessKind::BrownianMotion { grid } => SpaceSpec::Curve { grid: grid.clone() },
            ProcessKind::Ar1 { space, .. } => match space {
                Ar1Space::Scalar => SpaceSpec::Scalar,
                Ar1Space::Curve { grid } => SpaceSpec::Curve { grid: grid.clone() },
            },
        }
    }

    /// Burn-in actually applied: the explicit override or the default rule.
    pub fn effective_burn_in(&self) -> usize {
        if let Some(b) = self.burn_in {
            return b;
        }
        match &self.process {
            ProcessKind::Ar1 { rho, .. } if rho.abs() > 0.0 => {
                (BURN_IN_BIAS.ln() / rho.abs().ln()).ceil() as usize
            }
            _ => 0,
        }
    }

    fn is_ar1(&self) -> bool {
        matches!(self.process, ProcessKind::Ar1 { .. })
    }

    /// Whether the generated sequence is serially dependent.
    pub fn is_dependent(&self) -> bool {
        matches!(&self.process, ProcessKind::Ar1 { rho, .. } if *rho != 0.0)
    }

    /// Stationary mean of the process, elementwise (used to center noise).
    fn stationary_mean(&self) -> f64 {
        match &self.process {
            ProcessKind::IidGaussianFinite { .. } | ProcessKind::BrownianMotion { .. } => 0.0,
            // the moving-average operator preserves constants, so the mean of
            // the diagonal and banded recursions agree
            ProcessKind::Ar1 {
                rho, innovation, ..
            } => innovation.mean() / (1.0 - rho),
        }
    }
}

// ---------------------------------------------------------------------------
// Coupling outputs
// ---------------------------------------------------------------------------

/// An AR(1) path together with its lag-m coupled copies.
#[derive(Clone, Debug)]
pub struct CoupledPair {
    /// The original path X_1..X_n.
    pub original: Vec<Element>,
    /// The path built entirely from the independent innovation stream; the
    /// limit of the coupled copies as m -> 0.
    pub primed: Vec<Element>,
    /// For each requested m: the copies sharing innovations down to lag m-1
    /// and drawing from the independent stream beyond.
    pub coupled: BTreeMap<usize, Vec<Element>>,
}

/// Norm applied to the replicated coupling errors.
#[derive(Clone, Debug)]
pub enum NormKind {
    /// Root mean square of the errors.
    L2,
    /// Orlicz norm of the error sample under the given ψ.
    Orlicz(PsiSpec),
}

impl NormKind {
    fn apply(&self, samples: &[f64]) -> Result<f64> {
        match self {
            NormKind::L2 => {
                let ms = samples.iter().map(|d| d * d).sum::<f64>() / samples.len() as f64;
                Ok(ms.sqrt())
            }
            NormKind::Orlicz(spec) => Ok(orlicz_norm(samples, spec, DEFAULT_TOLERANCE)?.value),
        }
    }

    pub fn name(&self) -> String {
        match self {
            NormKind::L2 => "l2".into(),
            NormKind::Orlicz(PsiSpec::Power { p }) => format!("orlicz_power({p})"),
            NormKind::Orlicz(PsiSpec::Exponential { p }) => format!("orlicz_exponential({p})"),
        }
    }
}

/// Monte Carlo estimate of the size of the lag-m coupling error.
#[derive(Clone, Debug)]
pub struct DecayEstimate {
    pub m: usize,
    pub gamma_hat: f64,
    pub norm_kind: String,
    pub replications: usize,
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// Generate a stationary sequence of length n on the generator's primary
/// stream. Identical spec and seed give bitwise-identical output.
pub fn generate(spec: &ProcessSpec, n: usize) -> Result<Vec<Element>> {
    generate_with_stream(spec, n, STREAM_PRIMARY)
}

/// Generate on an explicit stream id; the entry point replicated experiments
/// use so parallel workers never share randomness.
pub fn generate_with_stream(spec: &ProcessSpec, n: usize, stream_id: u64) -> Result<Vec<Element>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidParam {
            name: "n",
            message: "need n >= 1".into(),
        });
    }
    let mut rng = stream(spec.seed, stream_id);
    match &spec.process {
        ProcessKind::IidGaussianFinite { dim } => {
            let normal = Normal::new(0.0, 1.0).unwrap();
            Ok((0..n)
                .map(|_| Element::Vector((0..*dim).map(|_| normal.sample(&mut rng)).collect()))
                .collect())
        }
        ProcessKind::BrownianMotion { grid } => {
            let normal = Normal::new(0.0, 1.0).unwrap();
            Ok((0..n)
                .map(|_| Element::Curve(brownian_path(grid, &normal, &mut rng)))
                .collect())
        }
        ProcessKind::Ar1 { .. } => {
            let burn = spec.effective_burn_in();
            let total = burn + n;
            let innovations = draw_innovations(spec, total, &mut rng);
            let path = ar1_path(spec, &innovations);
            Ok(path[burn..].to_vec())
        }
    }
}

fn brownian_path(grid: &Grid, normal: &Normal<f64>, rng: &mut ChaCha12Rng) -> Curve {
    let t = grid.points();
    let mut values = Vec::with_capacity(t.len());
    let first = if t[0] > 0.0 {
        t[0].sqrt() * normal.sample(rng)
    } else {
        0.0
    };
    values.push(first);
    for i in 1..t.len() {
        let dt = t[i] - t[i - 1];
        let prev = values[i - 1];
        values.push(prev + dt.sqrt() * normal.sample(rng));
    }
    Curve::new(grid.clone(), values).expect("values built on the grid")
}

/// One innovation per time step, in the process's state space.
fn draw_innovations(spec: &ProcessSpec, total: usize, rng: &mut ChaCha12Rng) -> Vec<Element> {
    let ProcessKind::Ar1 {
        innovation, space, ..
    } = &spec.process
    else {
        unreachable!("innovations only exist for autoregressions")
    };
    (0..total)
        .map(|_| match space {
            Ar1Space::Scalar => Element::Scalar(innovation.sample(rng)),
            // white noise on the grid: independent draws per point
            Ar1Space::Curve { grid } => {
                let values = (0..grid.len()).map(|_| innovation.sample(rng)).collect();
                Element::Curve(Curve::new(grid.clone(), values).expect("grid-sized"))
            }
        })
        .collect()
}

/// Apply the autoregression operator to a state.
fn apply_operator(spec: &ProcessSpec, state: &Element) -> Element {
    let ProcessKind::Ar1 { rho, operator, .. } = &spec.process else {
        unreachable!()
    };
    match (operator, state) {
        (Ar1Operator::Diagonal, _) => {
            let mut out = state.clone();
            out.scale(*rho);
            out
        }
        (Ar1Operator::Banded { half_width }, Element::Curve(c)) => {
            let v = c.values();
            let m = v.len();
            let w = *half_width;
            let mut values = Vec::with_capacity(m);
            for j in 0..m {
                let lo = j.saturating_sub(w);
                let hi = (j + w).min(m - 1);
                let avg = v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
                values.push(rho * avg);
            }
            Element::Curve(Curve::new(c.grid().clone(), values).expect("same grid"))
        }
        (Ar1Operator::Banded { .. }, _) => unreachable!("validated: banded needs curves"),
    }
}

/// Run the recursion `X_t = A X_{t-1} + alpha_t` from a zero start.
fn ar1_path(spec: &ProcessSpec, innovations: &[Element]) -> Vec<Element> {
    let mut out = Vec::with_capacity(innovations.len());
    let mut state = innovations[0].zero_like();
    for alpha in innovations {
        let mut next = apply_operator(spec, &state);
        next.add_scaled(1.0, alpha).expect("same space");
        out.push(next.clone());
        state = next;
    }
    out
}

/// Horner-style evaluation of the recursion from a replaced starting state:
/// `A(...A(A(start) + alpha[from]) + ...) + alpha[to]`.
fn ar1_from_state(
    spec: &ProcessSpec,
    start: &Element,
    innovations: &[Element],
    from: usize,
    to: usize,
) -> Element {
    let mut state = start.clone();
    for alpha in &innovations[from..=to] {
        let mut next = apply_operator(spec, &state);
        next.add_scaled(1.0, alpha).expect("same space");
        state = next;
    }
    state
}

/// Generate an AR(1) path together with its lag-m coupled copies for each
/// requested m.
///
/// The copies reuse the exact innovation values of the original for the most
/// recent m lags and substitute an independent stream before that, so for the
/// diagonal operator `X_i - X_i^(m) = rho^m (X_{i-m} - X'_{i-m})` holds per
/// realization up to floating-point roundoff.
pub fn generate_coupled(spec: &ProcessSpec, n: usize, m_list: &[usize]) -> Result<CoupledPair> {
    generate_coupled_with_streams(spec, n, m_list, STREAM_PRIMARY, STREAM_PRIMED)
}

fn generate_coupled_with_streams(
    spec: &ProcessSpec,
    n: usize,
    m_list: &[usize],
    main_stream: u64,
    prime_stream: u64,
) -> Result<CoupledPair> {
    spec.validate()?;
    if !spec.is_ar1() {
        return Err(Error::InvalidParam {
            name: "process",
            message: "coupled copies are defined for autoregressions only".into(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParam {
            name: "n",
            message: "need n >= 1".into(),
        });
    }
    for &m in m_list {
        if m == 0 {
            return Err(Error::InvalidParam {
                name: "m",
                message: "coupling lag m must be >= 1".into(),
            });
        }
    }

    let burn = spec.effective_burn_in();
    let total = burn + n;
    let mut rng_main = stream(spec.seed, main_stream);
    let mut rng_prime = stream(spec.seed, prime_stream);
    let alpha = draw_innovations(spec, total, &mut rng_main);
    let alpha_prime = draw_innovations(spec, total, &mut rng_prime);

    let path = ar1_path(spec, &alpha);
    let path_prime = ar1_path(spec, &alpha_prime);

    let mut coupled = BTreeMap::new();
    for &m in m_list {
        let mut seq = Vec::with_capacity(n);
        for i in 0..n {
            let a = burn + i; // absolute time of output index i
            let value = if m > a {
                // the replaced lags predate the truncated past shared by both
                // paths, so the copy coincides with the original
                path[a].clone()
            } else {
                ar1_from_state(spec, &path_prime[a - m], &alpha, a - m + 1, a)
            };
            seq.push(value);
        }
        coupled.insert(m, seq);
    }

    Ok(CoupledPair {
        original: path[burn..].to_vec(),
        primed: path_prime[burn..].to_vec(),
        coupled,
    })
}

/// Monte Carlo estimate of the lag-m coupling error `||X_m - X_m^(m)||`,
/// measured by the Hilbert norm of the element difference and aggregated
/// across replications by `norm_kind`.
pub fn estimate_gamma(
    spec: &ProcessSpec,
    m: usize,
    replications: usize,
    norm_kind: &NormKind,
) -> Result<DecayEstimate> {
    estimate_decay(spec, m, replications, norm_kind, None)
}

/// Same as [`estimate_gamma`], but with the semi-metric in place of the
/// Hilbert norm: the decay rate of covariate sequences in the predictor
/// space, where only distances are available.
pub fn estimate_beta(
    spec: &ProcessSpec,
    m: usize,
    replications: usize,
    norm_kind: &NormKind,
    metric: &SemiMetricSpec,
) -> Result<DecayEstimate> {
    estimate_decay(spec, m, replications, norm_kind, Some(metric))
}

fn estimate_decay(
    spec: &ProcessSpec,
    m: usize,
    replications: usize,
    norm_kind: &NormKind,
    metric: Option<&SemiMetricSpec>,
) -> Result<DecayEstimate> {
    if replications < 100 {
        return Err(Error::InvalidParam {
            name: "replications",
            message: format!("need >= 100 replications, got {replications}"),
        });
    }
    let diffs: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let base = crate::rng::replication_stream_id(DECAY_STREAM_BLOCK, 2 * r as u64);
            let pair = generate_coupled_with_streams(spec, m, &[m], base, base + 1)?;
            let x = &pair.original[m - 1];
            let x_m = &pair.coupled[&m][m - 1];
            match metric {
                None => Ok(x.sub(x_m)?.norm()),
                Some(metric) => crate::curves::element_distance(metric, x, x_m),
            }
        })
        .collect::<Result<_>>()?;
    let gamma_hat = norm_kind.apply(&diffs)?;
    Ok(DecayEstimate {
        m,
        gamma_hat,
        norm_kind: norm_kind.name(),
        replications,
    })
}

/// Generate a mean-zero noise sequence in the requested target space.
///
/// The generator subtracts the closed-form stationary mean, so the output is
/// exactly centered in law; every supported kind has a closed-form mean.
pub fn noise_sequence(spec: &ProcessSpec, n: usize, target: &SpaceSpec) -> Result<Vec<Element>> {
    noise_with_stream(spec, n, target, STREAM_PRIMARY)
}

/// [`noise_sequence`] on an explicit stream id, for replicated experiments.
pub fn noise_with_stream(
    spec: &ProcessSpec,
    n: usize,
    target: &SpaceSpec,
    stream_id: u64,
) -> Result<Vec<Element>> {
    let space = spec.element_space();
    if !space.matches(target) {
        return Err(Error::SpaceMismatch {
            expected: target.to_string(),
            found: space.to_string(),
        });
    }
    let mut out = generate_with_stream(spec, n, stream_id)?;
    let mean = spec.stationary_mean();
    if mean != 0.0 {
        let mut shift = out[0].zero_like();
        match &mut shift {
            Element::Scalar(v) => *v = mean,
            Element::Vector(v) => v.iter_mut().for_each(|x| *x = mean),
            Element::Curve(c) => c.values_mut().iter_mut().for_each(|x| *x = mean),
        }
        for e in &mut out {
            e.add_scaled(-1.0, &shift)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_ar1(rho: f64, seed: u64) -> ProcessSpec {
        ProcessSpec {
            seed,
            burn_in: None,
            process: ProcessKind::Ar1 {
                rho,
                innovation: InnovationSpec::Gaussian { sigma: 1.0 },
                space: Ar1Space::Scalar,
                operator: Ar1Operator::Diagonal,
            },
        }
    }

    fn scalars(elements: &[Element]) -> Vec<f64> {
        elements
            .iter()
            .map(|e| match e {
                Element::Scalar(v) => *v,
                other => panic!("expected scalar, got {other:?}"),
            })
            .collect()
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = scalar_ar1(0.5, 77);
        let a = generate(&spec, 100).unwrap();
        let b = generate(&spec, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate(&scalar_ar1(1.0, 1), 10).is_err());
        let bad_dim = ProcessSpec {
            seed: 1,
            burn_in: None,
            process: ProcessKind::IidGaussianFinite { dim: 0 },
        };
        assert!(generate(&bad_dim, 10).is_err());
    }

    #[test]
    fn rho_zero_sequence_is_serially_uncorrelated() {
        let n = 20_000;
        let xs = scalars(&generate(&scalar_ar1(0.0, 5), n).unwrap());
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let lag1 = xs
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / ((n - 1) as f64);
        let acf1 = lag1 / var;
        assert!(
            acf1.abs() < 3.0 / (n as f64).sqrt(),
            "lag-1 autocorrelation {acf1} too large"
        );
    }

    #[test]
    fn ar1_reaches_stationary_variance() {
        let n = 100_000;
        let xs = scalars(&generate(&scalar_ar1(0.5, 21), n).unwrap());
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let want = 1.0 / (1.0 - 0.25);
        assert!(
            (var - want).abs() / want < 0.05,
            "variance {var} vs {want}"
        );
    }

    #[test]
    fn stationarity_over_sliding_windows() {
        let n = 100_000;
        let xs = scalars(&generate(&scalar_ar1(0.5, 33), n).unwrap());
        let window = n / 5;
        let mut vars = Vec::new();
        for w in 0..5 {
            let chunk = &xs[w * window..(w + 1) * window];
            let mean = chunk.iter().sum::<f64>() / window as f64;
            let var = chunk.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / window as f64;
            assert!(mean.abs() < 0.1, "window {w} mean {mean} drifted");
            vars.push(var);
        }
        let reference = vars[0];
        for (w, var) in vars.iter().enumerate() {
            assert!(
                (var - reference).abs() / reference < 0.10,
                "window {w} variance {var} vs {reference}"
            );
        }
    }

    #[test]
    fn brownian_motion_variance_at_one() {
        let grid = Grid::uniform(0.0, 1.0, 51).unwrap();
        let spec = ProcessSpec {
            seed: 9,
            burn_in: None,
            process: ProcessKind::BrownianMotion { grid },
        };
        let reps = 10_000;
        let paths = generate(&spec, reps).unwrap();
        let finals: Vec<f64> = paths
            .iter()
            .map(|e| match e {
                Element::Curve(c) => *c.values().last().unwrap(),
                _ => unreachable!(),
            })
            .collect();
        let var = finals.iter().map(|x| x * x).sum::<f64>() / reps as f64;
        assert!((var - 1.0).abs() < 0.05, "Var(X(1)) = {var}");
        let starts: Vec<f64> = paths
            .iter()
            .map(|e| match e {
                Element::Curve(c) => c.values()[0],
                _ => unreachable!(),
            })
            .collect();
        assert!(starts.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn coupled_equals_original_when_rho_is_zero() {
        let pair = generate_coupled(&scalar_ar1(0.0, 3), 200, &[1, 2, 5]).unwrap();
        for m in [1, 2, 5] {
            assert_eq!(pair.coupled[&m], pair.original, "m = {m}");
        }
    }

    #[test]
    fn coupling_identity_is_exact_for_scalars() {
        let rho: f64 = 0.5;
        let spec = scalar_ar1(rho, 12);
        let n = 1_000;
        let ms = [1usize, 2, 3, 4, 5, 6];
        let pair = generate_coupled(&spec, n, &ms).unwrap();
        let x = scalars(&pair.original);
        let xp = scalars(&pair.primed);
        for &m in &ms {
            let xm = scalars(&pair.coupled[&m]);
            for i in m..n {
                let lhs = x[i] - xm[i];
                let rhs = rho.powi(m as i32) * (x[i - m] - xp[i - m]);
                assert!(
                    (lhs - rhs).abs() <= 1e-12,
                    "m = {m}, i = {i}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn coupling_identity_holds_per_grid_point_for_curves() {
        let grid = Grid::uniform(0.0, 1.0, 7).unwrap();
        let rho: f64 = 0.4;
        let spec = ProcessSpec {
            seed: 8,
            burn_in: None,
            process: ProcessKind::Ar1 {
                rho,
                innovation: InnovationSpec::Gaussian { sigma: 1.0 },
                space: Ar1Space::Curve { grid },
                operator: Ar1Operator::Diagonal,
            },
        };
        let n = 50;
        let m = 3;
        let pair = generate_coupled(&spec, n, &[m]).unwrap();
        for i in m..n {
            let (Element::Curve(x), Element::Curve(xm), Element::Curve(xl), Element::Curve(xpl)) = (
                &pair.original[i],
                &pair.coupled[&m][i],
                &pair.original[i - m],
                &pair.primed[i - m],
            ) else {
                unreachable!()
            };
            for j in 0..x.values().len() {
                let lhs = x.values()[j] - xm.values()[j];
                let rhs = rho.powi(m as i32) * (xl.values()[j] - xpl.values()[j]);
                assert!((lhs - rhs).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn coupled_rejects_bad_arguments() {
        assert!(generate_coupled(&scalar_ar1(0.5, 1), 10, &[0]).is_err());
        let iid = ProcessSpec {
            seed: 1,
            burn_in: None,
            process: ProcessKind::IidGaussianFinite { dim: 2 },
        };
        assert!(generate_coupled(&iid, 10, &[1]).is_err());
    }

    #[test]
    fn gamma_decays_geometrically_for_ar1() {
        let spec = scalar_ar1(0.5, 101);
        // Var(X - X') = 2 * 4/3 at the replaced lag, scaled by rho^m
        let mut log_gammas = Vec::new();
        for m in 1..=6 {
            let est = estimate_gamma(&spec, m, 2_000, &NormKind::L2).unwrap();
            let want = 0.5f64.powi(m as i32) * (8.0f64 / 3.0).sqrt();
            assert!(
                (est.gamma_hat - want).abs() / want < 0.10,
                "m = {m}: {} vs {want}",
                est.gamma_hat
            );
            log_gammas.push(est.gamma_hat.ln());
        }
        // slope of log gamma against m
        let mslope = {
            let n = log_gammas.len() as f64;
            let xbar = (1..=log_gammas.len()).sum::<usize>() as f64 / n;
            let ybar = log_gammas.iter().sum::<f64>() / n;
            let mut num = 0.0;
            let mut den = 0.0;
            for (i, y) in log_gammas.iter().enumerate() {
                let x = (i + 1) as f64;
                num += (x - xbar) * (y - ybar);
                den += (x - xbar) * (x - xbar);
            }
            num / den
        };
        assert!(
            (mslope - 0.5f64.ln()).abs() < 0.07,
            "decay slope {mslope} vs {}",
            0.5f64.ln()
        );
    }

    #[test]
    fn gamma_under_quadratic_orlicz_norm_matches_l2() {
        // the power-2 Orlicz norm is the root mean square, so the two
        // aggregation routes must agree on the same replicated errors
        let spec = scalar_ar1(0.5, 67);
        let l2 = estimate_gamma(&spec, 2, 1_000, &NormKind::L2).unwrap();
        let orlicz = estimate_gamma(
            &spec,
            2,
            1_000,
            &NormKind::Orlicz(PsiSpec::power(2.0).unwrap()),
        )
        .unwrap();
        assert!(
            (l2.gamma_hat - orlicz.gamma_hat).abs() < 1e-4 * l2.gamma_hat,
            "l2 {} vs orlicz {}",
            l2.gamma_hat,
            orlicz.gamma_hat
        );
    }

    #[test]
    fn gamma_is_zero_for_independent_sequences() {
        let est = estimate_gamma(&scalar_ar1(0.0, 7), 3, 200, &NormKind::L2).unwrap();
        assert_eq!(est.gamma_hat, 0.0);
    }

    #[test]
    fn gamma_requires_enough_replications() {
        assert!(estimate_gamma(&scalar_ar1(0.5, 7), 1, 50, &NormKind::L2).is_err());
    }

    #[test]
    fn beta_uses_the_semi_metric() {
        let spec = scalar_ar1(0.5, 19);
        let metric = SemiMetricSpec::l2();
        let beta = estimate_beta(&spec, 2, 500, &NormKind::L2, &metric).unwrap();
        let gamma = estimate_gamma(&spec, 2, 500, &NormKind::L2).unwrap();
        // for scalars with the l2 semi-metric the two coincide
        assert!((beta.gamma_hat - gamma.gamma_hat).abs() < 1e-12);
    }

    #[test]
    fn marginal_law_is_preserved_by_coupling() {
        let spec = scalar_ar1(0.6, 55);
        let m = 2;
        let reps = 10_000;
        let mut originals = Vec::with_capacity(reps);
        let mut coupled = Vec::with_capacity(reps);
        for r in 0..reps {
            let base = crate::rng::replication_stream_id(1, 2 * r as u64);
            let pair =
                generate_coupled_with_streams(&spec, m, &[m], base, base + 1).unwrap();
            originals.push(match pair.original[m - 1] {
                Element::Scalar(v) => v,
                _ => unreachable!(),
            });
            coupled.push(match pair.coupled[&m][m - 1] {
                Element::Scalar(v) => v,
                _ => unreachable!(),
            });
        }
        let ks = two_sample_ks(&mut originals, &mut coupled);
        assert!(ks < 0.02, "KS distance {ks}");
    }

    fn two_sample_ks(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j) = (0usize, 0usize);
        let mut sup: f64 = 0.0;
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            let fa = i as f64 / a.len() as f64;
            let fb = j as f64 / b.len() as f64;
            sup = sup.max((fa - fb).abs());
        }
        sup
    }

    #[test]
    fn noise_is_centered() {
        let n = 40_000;
        let spec = ProcessSpec {
            seed: 91,
            burn_in: None,
            process: ProcessKind::Ar1 {
                rho: 0.0,
                innovation: InnovationSpec::Uniform { lo: 0.0, hi: 2.0 },
                space: Ar1Space::Scalar,
                operator: Ar1Operator::Diagonal,
            },
        };
        let noise = scalars(&noise_sequence(&spec, n, &SpaceSpec::Scalar).unwrap());
        let mean = noise.iter().sum::<f64>() / n as f64;
        // uniform(0,2) has sd ~ 0.577
        assert!(
            mean.abs() < 4.0 * 0.577 / (n as f64).sqrt(),
            "noise mean {mean} not centered"
        );
    }

    #[test]
    fn noise_rejects_space_mismatch() {
        let spec = scalar_ar1(0.0, 1);
        let grid = Grid::uniform(0.0, 1.0, 5).unwrap();
        assert!(matches!(
            noise_sequence(&spec, 10, &SpaceSpec::Curve { grid }),
            Err(Error::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn bounded_noise_has_finite_sub_gaussian_norm() {
        let spec = ProcessSpec {
            seed: 13,
            burn_in: None,
            process: ProcessKind::Ar1 {
                rho: 0.0,
                innovation: InnovationSpec::Uniform { lo: -1.0, hi: 1.0 },
                space: Ar1Space::Scalar,
                operator: Ar1Operator::Diagonal,
            },
        };
        let noise = noise_sequence(&spec, 5_000, &SpaceSpec::Scalar).unwrap();
        let mags: Vec<f64> = noise.iter().map(|e| e.norm()).collect();
        let psi2 = PsiSpec::exponential(2.0).unwrap();
        let est = orlicz_norm(&mags, &psi2, 1e-6).unwrap();
        assert!(est.value.is_finite() && est.value > 0.0);
        // bounded by 1 means the norm cannot exceed 1/sqrt(ln 2) ~ 1.2011
        assert!(est.value <= 1.0 / (2.0f64.ln()).sqrt() + 1e-6);
    }

    #[test]
    fn banded_operator_runs_and_stays_stationary() {
        let grid = Grid::uniform(0.0, 1.0, 9).unwrap();
        let spec = ProcessSpec {
            seed: 3,
            burn_in: None,
            process: ProcessKind::Ar1 {
                rho: 0.5,
                innovation: InnovationSpec::Gaussian { sigma: 1.0 },
                space: Ar1Space::Curve { grid },
                operator: Ar1Operator::Banded { half_width: 2 },
            },
        };
        let xs = generate(&spec, 2_000).unwrap();
        let norms: Vec<f64> = xs.iter().map(|e| e.norm()).collect();
        let first_half = norms[..1_000].iter().sum::<f64>() / 1_000.0;
        let second_half = norms[1_000..].iter().sum::<f64>() / 1_000.0;
        assert!((first_half - second_half).abs() / first_half < 0.10);
    }
}
