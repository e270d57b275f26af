//! Discretized curves as Hilbert-space elements, together with the
//! semi-metrics used on the predictor space.
//!
//! A [`Curve`] is a vector of values on a shared [`Grid`]; the inner product
//! is the trapezoid rule on that grid, which is exact for the piecewise-linear
//! functions the storage model represents. Arithmetic between curves demands
//! identical grids — there is no silent resampling.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum allowed deviation of a projection basis Gram matrix from identity.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Strictly increasing abscissae shared by a family of curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct Grid {
    points: Arc<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawGrid {
    Points { points: Vec<f64> },
    Uniform { lo: f64, hi: f64, count: usize },
}

impl TryFrom<RawGrid> for Grid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        match raw {
            RawGrid::Points { points } => Grid::new(points),
            RawGrid::Uniform { lo, hi, count } => Grid::uniform(lo, hi, count),
        }
    }
}

impl From<Grid> for RawGrid {
    fn from(grid: Grid) -> Self {
        RawGrid::Points {
            points: grid.points.as_ref().clone(),
        }
    }
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::GridTooSmall { got: points.len() });
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(Error::GridNotIncreasing { index: i + 1 });
            }
        }
        Ok(Grid {
            points: Arc::new(points),
        })
    }

    /// Uniform grid with `count` points spanning `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::GridTooSmall { got: count });
        }
        if !(hi > lo) {
            return Err(Error::InvalidParam {
                name: "grid",
                message: format!("need hi > lo, got [{lo}, {hi}]"),
            });
        }
        let step = (hi - lo) / (count - 1) as f64;
        let points = (0..count).map(|i| lo + step * i as f64).collect();
        Grid::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a grid always has at least 2 points
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Fast identity check: pointer equality first, contents second.
    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.points, &other.points) || self.points == other.points
    }

    /// Trapezoid quadrature weight of grid point `i`.
    fn weight(&self, i: usize) -> f64 {
        let p = &self.points;
        let last = p.len() - 1;
        if i == 0 {
            (p[1] - p[0]) / 2.0
        } else if i == last {
            (p[last] - p[last - 1]) / 2.0
        } else {
            (p[i + 1] - p[i - 1]) / 2.0
        }
    }
}

// ---------------------------------------------------------------------------
// Curve
// ---------------------------------------------------------------------------

/// A discretized element of the response/predictor function space.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::CurveLength {
                values: values.len(),
                points: grid.len(),
            });
        }
        Ok(Curve { grid, values })
    }

    /// Curve sampled from a closed-form function of the abscissa.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Curve {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zero(grid: &Grid) -> Self {
        Curve {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        check_same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Curve {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    /// In-place `self += w * other`.
    pub fn add_scaled(&mut self, w: f64, other: &Curve) -> Result<()> {
        check_same_grid(self, other)?;
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += w * o;
        }
        Ok(())
    }
}

fn check_same_grid(a: &Curve, b: &Curve) -> Result<()> {
    if a.grid.same_as(&b.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch {
            left: a.grid.len(),
            right: b.grid.len(),
        })
    }
}

/// Trapezoid-rule approximation of the Hilbert inner product.
pub fn inner_product(a: &Curve, b: &Curve) -> Result<f64> {
    check_same_grid(a, b)?;
    let mut acc = 0.0;
    for i in 0..a.values.len() {
        acc += a.grid.weight(i) * a.values[i] * b.values[i];
    }
    Ok(acc)
}

/// Hilbert norm `sqrt(<a, a>)`.
pub fn hilbert_norm(a: &Curve) -> f64 {
    // <a, a> is a sum of nonnegative terms, no clamping needed
    inner_product(a, a).expect("same grid").sqrt()
}

// ---------------------------------------------------------------------------
// Semi-metrics
// ---------------------------------------------------------------------------

/// Semi-metric on the predictor space: symmetric, zero on the diagonal, no
/// triangle inequality required.
#[derive(Clone, Debug)]
pub enum SemiMetricSpec {
    /// Hilbert distance of the difference curve (or absolute/Euclidean
    /// distance for scalar/vector elements).
    L2,
    /// Euclidean distance between the first `dim` coefficients against a
    /// precomputed orthonormal curve basis.
    Projection { dim: usize, basis: Vec<Curve> },
}

impl SemiMetricSpec {
    pub fn l2() -> Self {
        SemiMetricSpec::L2
    }

    /// Projection semi-metric against an orthonormal basis.
    ///
    /// The first `dim` basis curves must share one grid and be orthonormal
    /// under the trapezoid inner product; orthonormality is validated here,
    /// not recomputed (basis estimation belongs offline).
    pub fn projection(dim: usize, basis: Vec<Curve>) -> Result<Self> {
        if dim == 0 || dim > basis.len() {
            return Err(Error::InvalidParam {
                name: "projection dim",
                message: format!("need 1..={} basis curves, got dim = {dim}", basis.len()),
            });
        }
        let mut deviation: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                let g = inner_product(&basis[i], &basis[j])?;
                let target = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((g - target).abs());
            }
        }
        if deviation > ORTHONORMALITY_TOL {
            return Err(Error::BasisNotOrthonormal {
                deviation,
                limit: ORTHONORMALITY_TOL,
            });
        }
        Ok(SemiMetricSpec::Projection { dim, basis })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SemiMetricSpec::L2 => "l2",
            SemiMetricSpec::Projection { .. } => "projection",
        }
    }
}

/// Semi-metric between two curves.
pub fn semi_metric(spec: &SemiMetricSpec, x: &Curve, y: &Curve) -> Result<f64> {
    match spec {
        SemiMetricSpec::L2 => Ok(hilbert_norm(&x.sub(y)?)),
        SemiMetricSpec::Projection { dim, basis } => {
            let mut acc = 0.0;
            for b in basis.iter().take(*dim) {
                let cx = inner_product(x, b)?;
                let cy = inner_product(y, b)?;
                acc += (cx - cy) * (cx - cy);
            }
            Ok(acc.sqrt())
        }
    }
}

// ---------------------------------------------------------------------------
// Elements: the unified covariate/response value type
// ---------------------------------------------------------------------------

/// One observation: a point of the predictor space F or the response space H.
///
/// Scalars and finite-dimensional vectors carry their usual absolute-value /
/// Euclidean norms; curves carry the trapezoid Hilbert norm.
#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    Scalar(f64),
    Vector(Vec<f64>),
    Curve(Curve),
}

/// Shape of the space an [`Element`] lives in; used for compatibility checks.
#[derive(Clone, Debug, PartialEq)]
pub enum SpaceSpec {
    Scalar,
    Vector { dim: usize },
    Curve { grid: Grid },
}

impl std::fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpaceSpec::Scalar => write!(f, "scalar"),
            SpaceSpec::Vector { dim } => write!(f, "vector({dim})"),
            SpaceSpec::Curve { grid } => write!(f, "curve({} points)", grid.len()),
        }
    }
}

impl SpaceSpec {
    pub fn matches(&self, other: &SpaceSpec) -> bool {
        match (self, other) {
            (SpaceSpec::Scalar, SpaceSpec::Scalar) => true,
            (SpaceSpec::Vector { dim: a }, SpaceSpec::Vector { dim: b }) => a == b,
            (SpaceSpec::Curve { grid: a }, SpaceSpec::Curve { grid: b }) => a.same_as(b),
            _ => false,
        }
    }

    pub fn zero_element(&self) -> Element {
        match self {
            SpaceSpec::Scalar => Element::Scalar(0.0),
            SpaceSpec::Vector { dim } => Element::Vector(vec![0.0; *dim]),
            SpaceSpec::Curve { grid } => Element::Curve(Curve::zero(grid)),
        }
    }
}

impl Element {
    pub fn space(&self) -> SpaceSpec {
        match self {
            Element::Scalar(_) => SpaceSpec::Scalar,
            Element::Vector(v) => SpaceSpec::Vector { dim: v.len() },
            Element::Curve(c) => SpaceSpec::Curve {
                grid: c.grid().clone(),
            },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Element::Scalar(_) => "scalar",
            Element::Vector(_) => "vector",
            Element::Curve(_) => "curve",
        }
    }

    /// Norm of the element in its own Hilbert space.
    pub fn norm(&self) -> f64 {
        match self {
            Element::Scalar(v) => v.abs(),
            Element::Vector(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Element::Curve(c) => hilbert_norm(c),
        }
    }

    pub fn sub(&self, other: &Element) -> Result<Element> {
        match (self, other) {
            (Element::Scalar(a), Element::Scalar(b)) => Ok(Element::Scalar(a - b)),
            (Element::Vector(a), Element::Vector(b)) if a.len() == b.len() => {
                Ok(Element::Vector(a.iter().zip(b).map(|(x, y)| x - y).collect()))
            }
            (Element::Curve(a), Element::Curve(b)) => Ok(Element::Curve(a.sub(b)?)),
            _ => Err(space_mismatch(self, other)),
        }
    }

    pub fn scale(&mut self, a: f64) {
        match self {
            Element::Scalar(v) => *v *= a,
            Element::Vector(v) => v.iter_mut().for_each(|x| *x *= a),
            Element::Curve(c) => c.scale(a),
        }
    }

    /// In-place `self += w * other`.
    pub fn add_scaled(&mut self, w: f64, other: &Element) -> Result<()> {
        match (self, other) {
            (Element::Scalar(a), Element::Scalar(b)) => {
                *a += w * b;
                Ok(())
            }
            (Element::Vector(a), Element::Vector(b)) if a.len() == b.len() => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += w * y;
                }
                Ok(())
            }
            (Element::Curve(a), Element::Curve(b)) => a.add_scaled(w, b),
            (a, b) => Err(space_mismatch(a, b)),
        }
    }

    pub fn zero_like(&self) -> Element {
        self.space().zero_element()
    }
}

fn space_mismatch(a: &Element, b: &Element) -> Error {
    Error::SpaceMismatch {
        expected: a.space().to_string(),
        found: b.space().to_string(),
    }
}

/// Semi-metric between two elements of the predictor space.
///
/// The projection kind is defined for curves only; `L2` dispatches to the
/// native norm of each element kind.
pub fn element_distance(spec: &SemiMetricSpec, a: &Element, b: &Element) -> Result<f64> {
    match (spec, a, b) {
        (SemiMetricSpec::Projection { .. }, Element::Curve(x), Element::Curve(y)) => {
            semi_metric(spec, x, y)
        }
        (SemiMetricSpec::Projection { .. }, x, _) => Err(Error::ProjectionNeedsCurves {
            found: x.kind_name(),
        }),
        (SemiMetricSpec::L2, x, y) => Ok(x.sub(y)?.norm()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(count: usize) -> Grid {
        Grid::uniform(0.0, 1.0, count).unwrap()
    }

    /// Gram-Schmidt under the trapezoid inner product; test-side oracle for
    /// projection/Parseval checks.
    fn orthonormal_basis(grid: &Grid, seed: u64) -> Vec<Curve> {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, 0);
        let m = grid.len();
        let mut basis: Vec<Curve> = Vec::with_capacity(m);
        while basis.len() < m {
            let raw = Curve::new(
                grid.clone(),
                (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let mut candidate = raw;
            for b in &basis {
                let coeff = inner_product(&candidate, b).unwrap();
                candidate.add_scaled(-coeff, b).unwrap();
            }
            // re-orthogonalize once to tame roundoff
            for b in &basis {
                let coeff = inner_product(&candidate, b).unwrap();
                candidate.add_scaled(-coeff, b).unwrap();
            }
            let norm = hilbert_norm(&candidate);
            if norm > 1e-6 {
                candidate.scale(1.0 / norm);
                basis.push(candidate);
            }
        }
        basis
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(vec![0.0]).is_err());
        assert!(Grid::new(vec![0.0, 0.0]).is_err());
        assert!(Grid::new(vec![0.0, 1.0, 0.5]).is_err());
        assert!(Grid::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn inner_product_of_constants_is_one() {
        for count in [2, 5, 100] {
            let g = unit_grid(count);
            let one = Curve::from_fn(&g, |_| 1.0);
            assert!((inner_product(&one, &one).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_product_of_identity_matches_exact_integral() {
        let g = unit_grid(1001);
        let t = Curve::from_fn(&g, |t| t);
        let exact = 1.0 / 3.0;
        assert!((inner_product(&t, &t).unwrap() - exact).abs() < 1e-6);
    }

    #[test]
    fn inner_product_is_bilinear_under_sign_flip() {
        let g = unit_grid(33);
        let a = Curve::from_fn(&g, |t| (3.0 * t).sin() + 0.5);
        let mut neg = a.clone();
        neg.scale(-1.0);
        let lhs = inner_product(&a, &neg).unwrap();
        let norm = hilbert_norm(&a);
        assert!((lhs + norm * norm).abs() < 1e-12);
    }

    #[test]
    fn inner_product_rejects_grid_mismatch() {
        let a = Curve::from_fn(&unit_grid(5), |t| t);
        let b = Curve::from_fn(&unit_grid(6), |t| t);
        match inner_product(&a, &b) {
            Err(Error::GridMismatch { left: 5, right: 6 }) => {}
            other => panic!("expected grid mismatch, got {other:?}"),
        }
    }

    #[test]
    fn norms_of_simple_curves() {
        let g = unit_grid(1001);
        assert_eq!(hilbert_norm(&Curve::zero(&g)), 0.0);
        let two = Curve::from_fn(&g, |_| 2.0);
        assert!((hilbert_norm(&two) - 2.0).abs() < 1e-12);
        let t = Curve::from_fn(&g, |t| t);
        assert!((hilbert_norm(&t) - 1.0 / 3.0f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn quadrature_error_shrinks_with_grid_refinement() {
        // smooth integrand with known integral: ∫ e^t dt = e - 1 on [0,1]
        let exact = std::f64::consts::E - 1.0;
        let err = |count: usize| {
            let g = unit_grid(count);
            let c = Curve::from_fn(&g, |t| (0.5 * t).exp());
            (inner_product(&c, &c).unwrap() - exact).abs()
        };
        let coarse = err(17);
        let fine = err(33);
        assert!(
            coarse / fine >= 3.0,
            "expected >=3x error reduction, got {coarse:.3e} -> {fine:.3e}"
        );
    }

    #[test]
    fn l2_semi_metric_basics() {
        let g = unit_grid(21);
        let x = Curve::from_fn(&g, |_| 1.0);
        let y = Curve::zero(&g);
        let spec = SemiMetricSpec::l2();
        assert_eq!(semi_metric(&spec, &x, &x).unwrap(), 0.0);
        assert!((semi_metric(&spec, &x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_dimension_projection_agrees_with_l2() {
        let g = unit_grid(12);
        let basis = orthonormal_basis(&g, 9001);
        let spec = SemiMetricSpec::projection(g.len(), basis).unwrap();
        let mut rng = crate::rng::stream(42, 0);
        use rand::Rng;
        for _ in 0..20 {
            let x = Curve::new(g.clone(), (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .unwrap();
            let y = Curve::new(g.clone(), (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .unwrap();
            let proj = semi_metric(&spec, &x, &y).unwrap();
            let l2 = semi_metric(&SemiMetricSpec::l2(), &x, &y).unwrap();
            assert!(
                (proj - l2).abs() < 1e-8,
                "projection {proj} vs l2 {l2} differ beyond tolerance"
            );
        }
    }

    #[test]
    fn projection_rejects_non_orthonormal_basis() {
        let g = unit_grid(8);
        let b0 = Curve::from_fn(&g, |_| 1.0);
        let b1 = Curve::from_fn(&g, |t| t); // not orthogonal to the constant
        match SemiMetricSpec::projection(2, vec![b0, b1]) {
            Err(Error::BasisNotOrthonormal { .. }) => {}
            other => panic!("expected orthonormality failure, got {other:?}"),
        }
    }

    #[test]
    fn projection_rejects_scalar_elements() {
        let g = unit_grid(8);
        let basis = orthonormal_basis(&g, 5);
        let spec = SemiMetricSpec::projection(2, basis).unwrap();
        let err = element_distance(&spec, &Element::Scalar(1.0), &Element::Scalar(0.0));
        assert!(matches!(err, Err(Error::ProjectionNeedsCurves { .. })));
    }

    #[test]
    fn element_distance_dispatch() {
        let l2 = SemiMetricSpec::l2();
        assert_eq!(
            element_distance(&l2, &Element::Scalar(3.0), &Element::Scalar(1.0)).unwrap(),
            2.0
        );
        let a = Element::Vector(vec![3.0, 4.0]);
        let b = Element::Vector(vec![0.0, 0.0]);
        assert!((element_distance(&l2, &a, &b).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn grid_serde_roundtrip_and_uniform_form() {
        let g: Grid = serde_json::from_str(r#"{"lo": 0.0, "hi": 1.0, "count": 3}"#).unwrap();
        assert_eq!(g.points(), &[0.0, 0.5, 1.0]);
        let g2: Grid = serde_json::from_str(r#"{"points": [0.0, 0.25, 1.0]}"#).unwrap();
        assert_eq!(g2.points(), &[0.0, 0.25, 1.0]);
        assert!(serde_json::from_str::<Grid>(r#"{"points": [1.0, 0.0]}"#).is_err());
    }

    proptest! {
        #[test]
        fn parallelogram_identity(values_a in prop::collection::vec(-10.0f64..10.0, 16),
                                  values_b in prop::collection::vec(-10.0f64..10.0, 16)) {
            let g = unit_grid(16);
            let a = Curve::new(g.clone(), values_a).unwrap();
            let b = Curve::new(g.clone(), values_b).unwrap();
            let mut sum = a.clone();
            sum.add_scaled(1.0, &b).unwrap();
            let diff = a.sub(&b).unwrap();
            let lhs = hilbert_norm(&sum).powi(2) + hilbert_norm(&diff).powi(2);
            let rhs = 2.0 * hilbert_norm(&a).powi(2) + 2.0 * hilbert_norm(&b).powi(2);
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            prop_assert!((lhs - rhs).abs() / scale < 1e-10);
        }

        #[test]
        fn semi_metric_symmetry_and_self_distance(values_a in prop::collection::vec(-5.0f64..5.0, 9),
                                                  values_b in prop::collection::vec(-5.0f64..5.0, 9)) {
            let g = unit_grid(9);
            let a = Curve::new(g.clone(), values_a).unwrap();
            let b = Curve::new(g.clone(), values_b).unwrap();
            let spec = SemiMetricSpec::l2();
            prop_assert_eq!(semi_metric(&spec, &a, &a).unwrap(), 0.0);
            let d_ab = semi_metric(&spec, &a, &b).unwrap();
            let d_ba = semi_metric(&spec, &b, &a).unwrap();
            prop_assert!(d_ab >= 0.0);
            prop_assert!((d_ab - d_ba).abs() < 1e-12);
        }
    }
}
