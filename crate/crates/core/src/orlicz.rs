//! ψ function families and Orlicz norm estimation from samples.
//!
//! The Orlicz norm of a nonnegative random variable X is
//! `inf { C > 0 : E psi(X/C) <= 1 }` for a convex increasing ψ with ψ(0) = 0.
//! Two families are provided: the power family `psi(x) = x^p` (whose norm is
//! the L^p norm) and the exponential family `psi_p(x) = exp(x^p) - 1` (whose
//! finiteness encodes exponential tail decay of order p).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for the bisection-based norm estimate.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Geometric bracket expansion limit; past this the norm is treated as
/// infinite for the sample at hand.
const MAX_BRACKET_RATIO: f64 = (1u64 << 60) as f64;

// ---------------------------------------------------------------------------
// PsiSpec
// ---------------------------------------------------------------------------

/// A ψ function defining an Orlicz norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPsi", into = "RawPsi")]
pub enum PsiSpec {
    /// `psi(x) = x^p`, p >= 1. The associated Orlicz norm is the L^p norm.
    Power { p: f64 },
    /// `psi_p(x) = exp(x^p) - 1`, p >= 1.
    Exponential { p: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawPsi {
    Power { p: f64 },
    Exponential { p: f64 },
}

impl TryFrom<RawPsi> for PsiSpec {
    type Error = Error;

    fn try_from(raw: RawPsi) -> Result<Self> {
        match raw {
            RawPsi::Power { p } => PsiSpec::power(p),
            RawPsi::Exponential { p } => PsiSpec::exponential(p),
        }
    }
}

impl From<PsiSpec> for RawPsi {
    fn from(spec: PsiSpec) -> Self {
        match spec {
            PsiSpec::Power { p } => RawPsi::Power { p },
            PsiSpec::Exponential { p } => RawPsi::Exponential { p },
        }
    }
}

impl PsiSpec {
    pub fn power(p: f64) -> Result<Self> {
        let spec = PsiSpec::Power { p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn exponential(p: f64) -> Result<Self> {
        let spec = PsiSpec::Exponential { p };
        spec.validate()?;
        Ok(spec)
    }

    fn p(&self) -> f64 {
        match self {
            PsiSpec::Power { p } | PsiSpec::Exponential { p } => *p,
        }
    }

    /// Check p >= 1 plus a numeric sweep for ψ(0) = 0, strict monotonicity,
    /// and midpoint convexity on a coarse grid.
    fn validate(&self) -> Result<()> {
        let p = self.p();
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidParam {
                name: "psi exponent",
                message: format!("need p >= 1, got {p}"),
            });
        }
        let xs: Vec<f64> = (0..=16).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| self.eval_unchecked(x)).collect();
        if ys[0] != 0.0 {
            return Err(Error::InvalidParam {
                name: "psi",
                message: format!("psi(0) = {}, expected 0", ys[0]),
            });
        }
        for i in 1..ys.len() {
            if !(ys[i] > ys[i - 1]) {
                return Err(Error::InvalidParam {
                    name: "psi",
                    message: format!("not strictly increasing at x = {}", xs[i]),
                });
            }
        }
        for i in 1..ys.len() - 1 {
            let chord = 0.5 * (ys[i - 1] + ys[i + 1]);
            if ys[i] > chord * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::InvalidParam {
                    name: "psi",
                    message: format!("not convex near x = {}", xs[i]),
                });
            }
        }
        Ok(())
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        match self {
            PsiSpec::Power { p } => x.powf(*p),
            // exp_m1 keeps accuracy near 0; large arguments saturate to +inf,
            // which stays monotone and is handled by the estimators
            PsiSpec::Exponential { p } => x.powf(*p).exp_m1(),
        }
    }

    /// The point where ψ reaches 1; sets the natural scale of the norm.
    pub fn inverse_at_one(&self) -> f64 {
        match self {
            PsiSpec::Power { .. } => 1.0,
            PsiSpec::Exponential { p } => std::f64::consts::LN_2.powf(1.0 / p),
        }
    }
}

/// Evaluate ψ at a nonnegative point.
pub fn psi_eval(spec: &PsiSpec, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParam {
            name: "x",
            message: format!("psi is defined on [0, inf), got {x}"),
        });
    }
    Ok(spec.eval_unchecked(x))
}

// ---------------------------------------------------------------------------
// Norm estimation
// ---------------------------------------------------------------------------

/// Result of a bisection-based Orlicz norm estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct OrliczEstimate {
    /// Smallest C (within tolerance) with sample mean of ψ(s/C) <= 1.
    pub value: f64,
    /// Number of samples the estimate is based on.
    pub mc_samples: usize,
    /// Final bisection bracket (lo excluded, hi feasible).
    pub bracket: (f64, f64),
    /// Relative tolerance the bracket was closed to.
    pub tolerance: f64,
    /// True when every sample was zero and the norm is 0 by convention.
    pub degenerate: bool,
}

/// True when the sample mean of ψ(s/c) exceeds 1, evaluated overflow-safely.
///
/// The running sum short-circuits as soon as it provably exceeds `n`, and
/// exponential-family terms with `(s/c)^p` beyond the f64 exp range count as
/// an immediate exceedance.
fn mean_exceeds_one(samples: &[f64], spec: &PsiSpec, c: f64) -> bool {
    let n = samples.len() as f64;
    let mut acc = 0.0;
    for &s in samples {
        let term = match spec {
            PsiSpec::Power { p } => (s / c).powf(*p),
            PsiSpec::Exponential { p } => {
                let u = (s / c).powf(*p);
                if u > 700.0 {
                    return true;
                }
                u.exp_m1()
            }
        };
        acc += term;
        if acc > n {
            return true;
        }
    }
    acc > n
}

/// Estimate the Orlicz norm of a sample of nonnegative draws by bisection.
///
/// `E psi(s/C)` is continuous and strictly decreasing in C wherever it is
/// finite, so bisection on the plug-in sample mean is exact up to the
/// requested relative tolerance. An all-zero sample yields the degenerate
/// zero norm.
pub fn orlicz_norm(samples: &[f64], spec: &PsiSpec, tolerance: f64) -> Result<OrliczEstimate> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(tolerance > 0.0) || !tolerance.is_finite() {
        return Err(Error::InvalidParam {
            name: "tolerance",
            message: format!("need a finite tolerance > 0, got {tolerance}"),
        });
    }
    let mut max_s = 0.0f64;
    for (index, &s) in samples.iter().enumerate() {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::BadSample { index, value: s });
        }
        max_s = max_s.max(s);
    }
    if max_s == 0.0 {
        return Ok(OrliczEstimate {
            value: 0.0,
            mc_samples: samples.len(),
            bracket: (0.0, 0.0),
            tolerance,
            degenerate: true,
        });
    }

    let scale = max_s / spec.inverse_at_one();
    let mut lo = scale * 1e-6;
    let mut hi = scale * 1e6;

    // expand until the bracket encloses the crossing of the mean through 1
    while mean_exceeds_one(samples, spec, hi) {
        lo = hi;
        hi *= 2.0;
        if hi / scale > MAX_BRACKET_RATIO {
            return Err(Error::NormUnbounded);
        }
    }
    while !mean_exceeds_one(samples, spec, lo) {
        hi = lo;
        lo /= 2.0;
        if scale / lo > MAX_BRACKET_RATIO {
            // mean stays <= 1 down to a vanishing C: the norm is 0-adjacent
            lo = 0.0;
            break;
        }
    }

    let mut iterations = 0usize;
    while hi - lo > tolerance * hi.max(1.0) && iterations < 10_000 {
        let mid = 0.5 * (lo + hi);
        if mean_exceeds_one(samples, spec, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    Ok(OrliczEstimate {
        value: hi,
        mc_samples: samples.len(),
        bracket: (lo, hi),
        tolerance,
        degenerate: false,
    })
}

/// Tail probability bound `min(1, 1/psi(x/norm))` implied by a finite Orlicz
/// norm; decreasing in x and vacuous at x = 0.
pub fn tail_bound(norm: f64, spec: &PsiSpec, x: f64) -> Result<f64> {
    if !(norm > 0.0) {
        return Err(Error::InvalidParam {
            name: "norm",
            message: format!("need norm > 0, got {norm}"),
        });
    }
    let v = psi_eval(spec, x / norm)?;
    Ok((1.0 / v).min(1.0))
}

/// Orlicz norm bound `((1+K)/C)^(1/p)` implied by a sub-exponential tail
/// `P(X > x) <= K exp(-C x^p)`.
pub fn norm_bound_from_tail(k: f64, c: f64, p: f64) -> f64 {
    ((1.0 + k) / c).powf(1.0 / p)
}

/// Norms of a sample before and after conditioning on a finite partition.
///
/// Each draw is replaced by the mean of its group (the conditional
/// expectation given the partition σ-algebra); both Orlicz norms are then
/// estimated. The conditioned norm never exceeds the plain norm beyond
/// statistical tolerance.
pub fn conditional_contraction_check(
    samples: &[(f64, usize)],
    spec: &PsiSpec,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sums: std::collections::BTreeMap<usize, (f64, usize)> = std::collections::BTreeMap::new();
    for &(x, group) in samples {
        let entry = sums.entry(group).or_insert((0.0, 0));
        entry.0 += x;
        entry.1 += 1;
    }
    let raw: Vec<f64> = samples.iter().map(|&(x, _)| x.abs()).collect();
    let conditioned: Vec<f64> = samples
        .iter()
        .map(|&(_, group)| {
            let (sum, count) = sums[&group];
            (sum / count as f64).abs()
        })
        .collect();
    let norm_x = orlicz_norm(&raw, spec, DEFAULT_TOLERANCE)?.value;
    let norm_cond = orlicz_norm(&conditioned, spec, DEFAULT_TOLERANCE)?.value;
    Ok((norm_x, norm_cond))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Exp, Normal};

    const E: f64 = std::f64::consts::E;

    /// Independent bisection oracle over an arbitrary ψ closure; deliberately
    /// separate from the production code path.
    fn oracle_norm(samples: &[f64], psi: impl Fn(f64) -> f64) -> f64 {
        let mean = |c: f64| samples.iter().map(|&s| psi(s / c)).sum::<f64>() / samples.len() as f64;
        let mut lo = 1e-12;
        let mut hi = 1e-12;
        while mean(hi) > 1.0 {
            hi *= 2.0;
            assert!(hi < 1e300, "oracle bracket blew up");
        }
        while mean(lo) <= 1.0 && lo > 1e-300 {
            lo /= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    fn exp1_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::stream(seed, 0);
        let dist = Exp::new(1.0).unwrap();
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    }

    #[test]
    fn psi_eval_matches_formulas() {
        let psi1 = PsiSpec::exponential(1.0).unwrap();
        assert!((psi_eval(&psi1, 1.0).unwrap() - (E - 1.0)).abs() < 1e-12);
        assert_eq!(psi_eval(&psi1, 0.0).unwrap(), 0.0);
        let pow2 = PsiSpec::power(2.0).unwrap();
        assert_eq!(psi_eval(&pow2, 0.0).unwrap(), 0.0);
        assert_eq!(psi_eval(&pow2, 3.0).unwrap(), 9.0);
        assert!(psi_eval(&pow2, -1.0).is_err());
    }

    #[test]
    fn psi_spec_rejects_p_below_one() {
        assert!(PsiSpec::power(0.5).is_err());
        assert!(PsiSpec::exponential(0.0).is_err());
        assert!(serde_json::from_str::<PsiSpec>(r#"{"power": {"p": 0.5}}"#).is_err());
    }

    #[test]
    fn constant_sample_norm_is_the_constant() {
        let spec = PsiSpec::power(2.0).unwrap();
        let est = orlicz_norm(&vec![3.0; 100], &spec, 1e-8).unwrap();
        assert!((est.value - 3.0).abs() < 3.0 * 1e-7);
        assert!(!est.degenerate);
        assert!(est.bracket.0 <= est.value && est.value <= est.bracket.1 + 1e-15);
    }

    #[test]
    fn all_zero_sample_is_degenerate() {
        let spec = PsiSpec::power(2.0).unwrap();
        let est = orlicz_norm(&[0.0, 0.0, 0.0], &spec, 1e-6).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.degenerate);
    }

    #[test]
    fn infinite_sample_is_rejected() {
        let spec = PsiSpec::power(2.0).unwrap();
        assert!(matches!(
            orlicz_norm(&[1.0, f64::INFINITY], &spec, 1e-6),
            Err(Error::BadSample { .. })
        ));
    }

    #[test]
    fn exponential_draws_have_psi1_norm_two() {
        // closed form: E exp(X/C) = C/(C-1) for C > 1, so E psi1(X/C) <= 1 iff C >= 2
        let samples = exp1_samples(100_000, 17);
        let spec = PsiSpec::exponential(1.0).unwrap();
        let est = orlicz_norm(&samples, &spec, 1e-6).unwrap();
        assert!(
            (est.value - 2.0).abs() < 0.05,
            "psi1 norm of Exp(1) was {}",
            est.value
        );
    }

    #[test]
    fn absolute_gaussian_draws_have_l2_norm_one() {
        let mut rng = crate::rng::stream(99, 0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let samples: Vec<f64> = (0..100_000)
            .map(|_| {
                let z: f64 = normal.sample(&mut rng);
                z.abs()
            })
            .collect();
        let spec = PsiSpec::power(2.0).unwrap();
        let est = orlicz_norm(&samples, &spec, 1e-6).unwrap();
        assert!((est.value - 1.0).abs() < 0.02, "L2 norm was {}", est.value);
    }

    #[test]
    fn norm_matches_independent_oracle_on_random_samples() {
        let mut rng = crate::rng::stream(3, 0);
        for spec in [PsiSpec::power(1.5).unwrap(), PsiSpec::exponential(1.0).unwrap()] {
            let samples: Vec<f64> = (0..512).map(|_| rng.gen_range(0.0..4.0)).collect();
            let est = orlicz_norm(&samples, &spec, 1e-9).unwrap();
            let oracle = oracle_norm(&samples, |x| spec.eval_unchecked(x));
            assert!(
                (est.value - oracle).abs() < 1e-6 * oracle.max(1.0),
                "estimate {} vs oracle {oracle}",
                est.value
            );
        }
    }

    #[test]
    fn scaling_the_sample_scales_the_norm() {
        let samples = exp1_samples(20_000, 5);
        let spec = PsiSpec::exponential(1.0).unwrap();
        let tol = 1e-6;
        let base = orlicz_norm(&samples, &spec, tol).unwrap().value;
        for lambda in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = samples.iter().map(|s| s * lambda).collect();
            let got = orlicz_norm(&scaled, &spec, tol).unwrap().value;
            let want = lambda * base;
            assert!(
                (got - want).abs() <= 2.0 * tol * want.max(1.0),
                "lambda {lambda}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn dominated_psi_bounds_norm_by_scaling_factor() {
        // psi~ = a * psi with a >= 1 gives |X| under psi~ <= a * |X| under psi
        let samples = exp1_samples(4_000, 11);
        let spec = PsiSpec::power(2.0).unwrap();
        let base = orlicz_norm(&samples, &spec, 1e-8).unwrap().value;
        for a in [1.0, 2.0, 8.0] {
            let tilde = oracle_norm(&samples, |x| a * x * x);
            assert!(
                tilde <= a * base + 1e-6,
                "a = {a}: tilde norm {tilde} exceeds {}",
                a * base
            );
        }
    }

    #[test]
    fn power_of_sample_rule() {
        // ||X^2|| under x^2 equals ||X||^2 under x^4 (power families)
        let samples = exp1_samples(4_000, 13);
        let squared: Vec<f64> = samples.iter().map(|s| s * s).collect();
        let psi4 = PsiSpec::power(4.0).unwrap();
        let psi2 = PsiSpec::power(2.0).unwrap();
        let lhs = orlicz_norm(&squared, &psi2, 1e-8).unwrap().value;
        let rhs = orlicz_norm(&samples, &psi4, 1e-8).unwrap().value.powi(2);
        assert!(lhs <= rhs + 1e-5 * rhs, "lhs {lhs} vs rhs {rhs}");
    }

    #[test]
    fn l2_norm_is_dominated_by_psi1_norm_up_to_constant() {
        let samples = exp1_samples(50_000, 23);
        let l2 = orlicz_norm(&samples, &PsiSpec::power(2.0).unwrap(), 1e-6)
            .unwrap()
            .value;
        let psi1 = orlicz_norm(&samples, &PsiSpec::exponential(1.0).unwrap(), 1e-6)
            .unwrap()
            .value;
        assert!(l2 <= 2.0 * psi1, "l2 {l2} vs 2 * psi1 {}", 2.0 * psi1);
    }

    #[test]
    fn tail_bound_formulas() {
        let psi1 = PsiSpec::exponential(1.0).unwrap();
        assert_eq!(tail_bound(2.0, &psi1, 0.0).unwrap(), 1.0);
        let got = tail_bound(2.0, &psi1, 4.0).unwrap();
        assert!((got - 1.0 / (E * E - 1.0)).abs() < 1e-12);
        let pow2 = PsiSpec::power(2.0).unwrap();
        assert!((tail_bound(1.0, &pow2, 10.0).unwrap() - 0.01).abs() < 1e-15);
        // decreasing in x
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let mut prev = f64::INFINITY;
        for x in xs {
            let b = tail_bound(2.0, &psi1, x).unwrap();
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn tail_bound_dominates_empirical_exponential_tail() {
        let samples = exp1_samples(100_000, 31);
        let psi1 = PsiSpec::exponential(1.0).unwrap();
        let norm = orlicz_norm(&samples, &psi1, 1e-6).unwrap().value;
        let n = samples.len() as f64;
        for i in 1..=16 {
            let x = i as f64 * 0.5;
            let empirical = samples.iter().filter(|&&s| s > x).count() as f64 / n;
            let bound = tail_bound(norm, &psi1, x).unwrap();
            let se = (empirical * (1.0 - empirical) / n).sqrt();
            assert!(
                empirical <= bound + 3.0 * se,
                "x = {x}: empirical {empirical} above bound {bound}"
            );
        }
    }

    #[test]
    fn norm_bound_from_tail_formula() {
        assert!((norm_bound_from_tail(1.0, 1.0, 1.0) - 2.0).abs() < 1e-15);
        assert!((norm_bound_from_tail(1.0, 1.0, 2.0) - 2.0f64.sqrt()).abs() < 1e-15);
        // Exp(1) has P(X > x) = exp(-x), i.e. K = 1, C = 1, p = 1; the bound 2
        // coincides with the exact psi1 norm of Exp(1)
        let samples = exp1_samples(100_000, 37);
        let est = orlicz_norm(&samples, &PsiSpec::exponential(1.0).unwrap(), 1e-6).unwrap();
        assert!((norm_bound_from_tail(1.0, 1.0, 1.0) - est.value).abs() < 0.05);
    }

    #[test]
    fn conditioning_contracts_the_norm() {
        // symmetric two-sided exponential magnitudes, grouped by sign
        let mut rng = crate::rng::stream(41, 0);
        let dist = Exp::new(1.0).unwrap();
        let samples: Vec<(f64, usize)> = (0..20_000)
            .map(|_| {
                let mag: f64 = dist.sample(&mut rng);
                if rng.gen_bool(0.5) {
                    (mag, 1)
                } else {
                    (-mag, 0)
                }
            })
            .collect();
        let spec = PsiSpec::power(2.0).unwrap();
        let (norm_x, norm_cond) = conditional_contraction_check(&samples, &spec).unwrap();
        assert!(
            norm_cond < norm_x,
            "conditioned {norm_cond} not below raw {norm_x}"
        );
    }

    #[test]
    fn trivial_partition_reduces_to_global_mean() {
        let samples: Vec<(f64, usize)> = (0..200).map(|i| (i as f64 / 100.0, 0)).collect();
        let spec = PsiSpec::power(2.0).unwrap();
        let (norm_x, norm_cond) = conditional_contraction_check(&samples, &spec).unwrap();
        let mean = samples.iter().map(|&(x, _)| x).sum::<f64>() / samples.len() as f64;
        assert!((norm_cond - mean.abs()).abs() < 1e-5);
        assert!(norm_cond <= norm_x + 1e-9);
    }

    #[test]
    fn equal_samples_give_equal_norms() {
        let samples: Vec<(f64, usize)> = (0..100).map(|i| (2.5, i % 3)).collect();
        let spec = PsiSpec::exponential(1.0).unwrap();
        let (norm_x, norm_cond) = conditional_contraction_check(&samples, &spec).unwrap();
        assert!((norm_x - norm_cond).abs() < 1e-9);
    }
}
