//! The weighted regression estimator `r^(x) = sum_i W_ni(x) Y_i` under three
//! weight schemes: simple k-NN, kernel k-NN, and Nadaraya-Watson, plus the
//! weight statistics (v_n1, c_n2, b_n, H, k) that drive its error bounds.
//!
//! Ties in distances are broken by original index everywhere, so every
//! operation is deterministic. Balls are closed: a point at distance exactly
//! H is inside B(x, H), and the kernel is evaluated at d/H with K(1) counted.

use crate::curves::{element_distance, Element, SemiMetricSpec};
use crate::error::{Error, Result};

/// Probability-vector slack tolerated when accepting caller-supplied weights.
const WEIGHT_SUM_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Schemes and kernels
// ---------------------------------------------------------------------------

/// Kernel on [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    /// Indicator of [-1, 1]; bounded above and below on its support.
    Uniform,
    /// `1 - |u|` on [-1, 1]; vanishes at the boundary, so it violates the
    /// two-sided envelope condition there.
    Triangle,
}

impl Kernel {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Kernel::Uniform => {
                if u.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Triangle => (1.0 - u.abs()).max(0.0),
        }
    }

    /// Whether `c I_[-1,1] <= K <= C I_[-1,1]` holds with c > 0.
    pub fn envelope_compliant(&self) -> bool {
        matches!(self, Kernel::Uniform)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Uniform => "uniform",
            Kernel::Triangle => "triangle",
        }
    }
}

/// Weight scheme of the estimator.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightScheme {
    /// Mass 1/k on each of the k nearest neighbors.
    SimpleKnn { k: usize },
    /// Kernel weights with the data-driven radius of the k-th neighbor.
    KernelKnn { k: usize, kernel: Kernel },
    /// Kernel weights with a fixed bandwidth h.
    NadarayaWatson { h: f64, kernel: Kernel },
}

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

/// Neighbor ranking of a sample around a target point.
#[derive(Clone, Debug, PartialEq)]
pub struct RankVector {
    /// Original indices ordered by increasing distance (ties by index).
    pub order: Vec<usize>,
    /// Distances in rank order.
    pub distances: Vec<f64>,
}

/// Rank the sample by distance to x, ties broken by original index.
pub fn rank_neighbors(
    xs: &[Element],
    x: &Element,
    metric: &SemiMetricSpec,
) -> Result<RankVector> {
    if xs.is_empty() {
        return Err(Error::EmptySamples);
    }
    let dists: Vec<f64> = xs
        .iter()
        .map(|xi| element_distance(metric, xi, x))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    // stable sort keeps the index order on exact distance ties
    order.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]));
    let distances = order.iter().map(|&i| dists[i]).collect();
    Ok(RankVector { order, distances })
}

/// Radius of the k-th nearest neighbor: the smallest h whose closed ball
/// around x holds at least k sample points. The infimum is attained at an
/// observed distance.
pub fn knn_radius(xs: &[Element], x: &Element, metric: &SemiMetricSpec, k: usize) -> Result<f64> {
    if k == 0 || k > xs.len() {
        return Err(Error::KOutOfRange { k, n: xs.len() });
    }
    let ranked = rank_neighbors(xs, x, metric)?;
    Ok(ranked.distances[k - 1])
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// A probability vector of estimator weights with its derived statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    /// Weights in non-increasing order (the order statistics v_n1 >= ...).
    sorted: Vec<f64>,
    /// Ball radius: the k-th neighbor distance for k-NN schemes, the fixed
    /// bandwidth for Nadaraya-Watson.
    radius: f64,
    /// k for k-NN schemes; the number of points inside the ball for
    /// Nadaraya-Watson.
    k_effective: usize,
    /// False when the kernel violates the two-sided envelope condition.
    envelope_compliant: bool,
}

/// The statistics of a weight vector driving bias and variance bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightStats {
    /// Largest weight.
    pub v_n1: f64,
    /// Euclidean norm of the weight vector.
    pub c_n2: f64,
    /// Total weight beyond the k largest.
    pub b_n: f64,
}

impl WeightVector {
    /// Custom-weights entry point: accept any probability vector.
    ///
    /// `radius` and `k_effective` describe the neighborhood the weights were
    /// built from; pass the full-sample values when there is none.
    pub fn from_raw(weights: Vec<f64>, radius: f64, k_effective: usize) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut sum = 0.0;
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::BadSample { index, value: w });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParam {
                name: "weights",
                message: format!("must sum to 1 within {WEIGHT_SUM_TOL:.0e}, got {sum}"),
            });
        }
        Ok(Self::assemble(weights, radius, k_effective, true))
    }

    fn assemble(
        weights: Vec<f64>,
        radius: f64,
        k_effective: usize,
        envelope_compliant: bool,
    ) -> Self {
        let mut sorted = weights.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        WeightVector {
            weights,
            sorted,
            radius,
            k_effective,
            envelope_compliant,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn k_effective(&self) -> usize {
        self.k_effective
    }

    pub fn envelope_compliant(&self) -> bool {
        self.envelope_compliant
    }

    /// Largest weight v_n1.
    pub fn v_n1(&self) -> f64 {
        self.sorted[0]
    }

    /// Euclidean norm of the weight vector, `sqrt(sum w_i^2)`.
    pub fn c_n2(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Compute the estimator weights for a scheme at a target point.
pub fn compute_weights(
    scheme: &WeightScheme,
    xs: &[Element],
    x: &Element,
    metric: &SemiMetricSpec,
) -> Result<WeightVector> {
    let n = xs.len();
    let ranked = rank_neighbors(xs, x, metric)?;
    match scheme {
        WeightScheme::SimpleKnn { k } => {
            if *k == 0 || *k > n {
                return Err(Error::KOutOfRange { k: *k, n });
            }
            let mut weights = vec![0.0; n];
            for &i in ranked.order.iter().take(*k) {
                weights[i] = 1.0 / *k as f64;
            }
            let radius = ranked.distances[*k - 1];
            Ok(WeightVector::assemble(weights, radius, *k, true))
        }
        WeightScheme::KernelKnn { k, kernel } => {
            if *k == 0 || *k > n {
                return Err(Error::KOutOfRange { k: *k, n });
            }
            let h = ranked.distances[*k - 1];
            kernel_weights(&ranked, h, *kernel, *k)
        }
        WeightScheme::NadarayaWatson { h, kernel } => {
            if !(h > &0.0) || !h.is_finite() {
                return Err(Error::InvalidParam {
                    name: "h",
                    message: format!("need a finite bandwidth > 0, got {h}"),
                });
            }
            let k_eff = ranked.distances.iter().take_while(|&&d| d <= *h).count();
            kernel_weights(&ranked, *h, *kernel, k_eff)
        }
    }
}

fn kernel_weights(
    ranked: &RankVector,
    h: f64,
    kernel: Kernel,
    k_effective: usize,
) -> Result<WeightVector> {
    let n = ranked.order.len();
    let mut weights = vec![0.0; n];
    let mut mass = 0.0;
    // accumulate in rank order so the normalizer never depends on how the
    // sample happened to be stored
    for (rank, &i) in ranked.order.iter().enumerate() {
        let d = ranked.distances[rank];
        let u = if h > 0.0 {
            d / h
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let w = kernel.eval(u);
        weights[i] = w;
        mass += w;
    }
    if mass <= 0.0 {
        return Err(Error::EmptyNeighborhood { h });
    }
    for w in &mut weights {
        *w /= mass;
    }
    Ok(WeightVector::assemble(
        weights,
        h,
        k_effective,
        kernel.envelope_compliant(),
    ))
}

/// The regression estimate: the convex combination of responses under the
/// weights. Its norm never exceeds the largest response norm.
pub fn estimate(weights: &WeightVector, ys: &[Element]) -> Result<Element> {
    if ys.len() != weights.len() {
        return Err(Error::InvalidParam {
            name: "responses",
            message: format!("{} responses for {} weights", ys.len(), weights.len()),
        });
    }
    let mut acc = ys[0].zero_like();
    for (w, y) in weights.weights().iter().zip(ys) {
        acc.add_scaled(*w, y)?;
    }
    Ok(acc)
}

/// Statistics of the sorted weights for a cutoff k: the largest weight, the
/// Euclidean norm, and the tail mass beyond the k largest.
pub fn weight_stats(weights: &WeightVector, k: usize) -> Result<WeightStats> {
    if k == 0 || k > weights.len() {
        return Err(Error::KOutOfRange {
            k,
            n: weights.len(),
        });
    }
    let sorted = weights.sorted();
    Ok(WeightStats {
        v_n1: sorted[0],
        c_n2: weights.c_n2(),
        b_n: sorted[k..].iter().sum(),
    })
}
