//! Points of a finite-dimensional Euclidean space and affine combinations of
//! orbit segments.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, Mul, Neg, Sub};

use crate::{Error, Result};

/// Tolerance on `Σ_j μ_{n,j} = 1`.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A point of `ℝ^d`, `d ≥ 1`.
///
/// [`Point::new`] rejects empty and non-finite input. Arithmetic on points
/// does not re-check finiteness; the engine does that once per iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::config("points need dimension >= 1"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point construction"));
        }
        Ok(Point(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    /// A point of `ℝ`. Panics if `value` is not finite.
    pub fn scalar(value: f64) -> Self {
        assert!(value.is_finite(), "scalar point must be finite");
        Point(vec![value])
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "points need dimension >= 1");
        Point(vec![0.0; dim])
    }

    /// Builds a point without validation; used for operator outputs.
    pub(crate) fn raw(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        euclid(self.0.iter().copied())
    }

    /// `‖self − other‖²`.
    pub fn dist_sq(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        euclid(self.0.iter().zip(&other.0).map(|(a, b)| a - b))
    }

    pub fn scale(&self, factor: f64) -> Point {
        Point(self.0.iter().map(|c| c * factor).collect())
    }

    /// `self + factor · dir`, coordinatewise as `self[k] + factor * dir[k]`.
    pub fn axpy(&self, factor: f64, dir: &Point) -> Point {
        assert_eq!(self.dim(), dir.dim(), "dimension mismatch");
        Point(
            self.0
                .iter()
                .zip(&dir.0)
                .map(|(a, d)| a + factor * d)
                .collect(),
        )
    }

    /// `self + factor · (target − self)`, the relaxed move toward `target`.
    pub fn relax_toward(&self, target: &Point, factor: f64) -> Point {
        assert_eq!(self.dim(), target.dim(), "dimension mismatch");
        Point(
            self.0
                .iter()
                .zip(&target.0)
                .map(|(a, t)| a + factor * (t - a))
                .collect(),
        )
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            })
        }
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Point {
    type Output = Point;

    fn add(self, rhs: &Point) -> Point {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Point {
    type Output = Point;

    fn sub(self, rhs: &Point) -> Point {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &Point {
    type Output = Point;

    fn mul(self, rhs: f64) -> Point {
        self.scale(rhs)
    }
}

impl Neg for &Point {
    type Output = Point;

    fn neg(self) -> Point {
        Point(self.0.iter().map(|c| -c).collect())
    }
}

/// Euclidean norm that rescales when the plain sum of squares over- or
/// underflows.
fn euclid(coords: impl Iterator<Item = f64> + Clone) -> f64 {
    let sq: f64 = coords.clone().map(|c| c * c).sum();
    if sq.is_finite() && sq >= f64::MIN_POSITIVE {
        return libm::sqrt(sq);
    }
    let scale = coords.clone().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return if sq.is_nan() { f64::NAN } else { scale };
    }
    let inner: f64 = coords.map(|c| (c / scale) * (c / scale)).sum();
    scale * libm::sqrt(inner)
}

/// One row `(μ_{n,j})_j` of a weight array, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    row_index: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseRow {
    /// Checks `j ≤ n` for every entry and `|Σ μ − 1| ≤ 1e-12`.
    pub fn new(row_index: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        let row = Self::unchecked(row_index, entries);
        row.validate()?;
        Ok(row)
    }

    pub(crate) fn unchecked(row_index: usize, entries: Vec<(usize, f64)>) -> Self {
        SparseRow { row_index, entries }
    }

    /// The Kronecker row `μ_{n,j} = δ_{n,j}`.
    pub fn kronecker(row_index: usize) -> Self {
        SparseRow {
            row_index,
            entries: vec![(row_index, 1.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidSchedule(alloc::format!(
                "row {} has no entries",
                self.row_index
            )));
        }
        if let Some(&(j, _)) = self.entries.iter().find(|(j, _)| *j > self.row_index) {
            return Err(Error::InvalidSchedule(alloc::format!(
                "row {} references future index {j}",
                self.row_index
            )));
        }
        if let Some(&(j, w)) = self.entries.iter().find(|(_, w)| !w.is_finite()) {
            return Err(Error::InvalidSchedule(alloc::format!(
                "row {} has non-finite weight {w} at index {j}",
                self.row_index
            )));
        }
        let sum = self.sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::InvalidSchedule(alloc::format!(
                "row {} sums to {sum}, not 1 (condition (b))",
                self.row_index
            )));
        }
        Ok(())
    }

    pub fn row_index(&self) -> usize {
        self.row_index
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Compensated (Neumaier) sum of the weights, so long rows such as
    /// Cesàro means do not drift past the row-sum tolerance.
    pub fn sum(&self) -> f64 {
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for &(_, w) in &self.entries {
            let t = s + w;
            if s.abs() >= w.abs() {
                c += (s - t) + w;
            } else {
                c += (w - t) + s;
            }
            s = t;
        }
        s + c
    }

    pub fn abs_sum(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w.abs()).sum()
    }

    /// `μ_{n,j}`, zero when `j` is not stored.
    pub fn weight(&self, j: usize) -> f64 {
        self.entries
            .iter()
            .filter(|(k, _)| *k == j)
            .map(|(_, w)| w)
            .sum()
    }

    /// Smallest index touched by the row.
    pub fn min_index(&self) -> usize {
        self.entries
            .iter()
            .map(|(j, _)| *j)
            .min()
            .unwrap_or(self.row_index)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|(_, w)| *w >= 0.0)
    }
}

/// An indexed collection of orbit points `x_j`.
pub trait Orbit {
    fn point(&self, j: usize) -> Option<&Point>;
}

impl Orbit for [Point] {
    fn point(&self, j: usize) -> Option<&Point> {
        self.get(j)
    }
}

impl Orbit for Vec<Point> {
    fn point(&self, j: usize) -> Option<&Point> {
        self.get(j)
    }
}

impl Orbit for BTreeMap<usize, Point> {
    fn point(&self, j: usize) -> Option<&Point> {
        self.get(&j)
    }
}

/// `x̄_n = Σ_j μ_{n,j} x_j`.
///
/// Accumulation starts from the first stored entry, so the Kronecker row
/// `{n: 1}` reproduces `x_n` bit for bit.
pub fn affine_combine<O: Orbit + ?Sized>(row: &SparseRow, orbit: &O) -> Result<Point> {
    row.validate()?;
    let mut terms = row.entries.iter();
    let &(j0, w0) = terms.next().expect("validated rows are nonempty");
    let first = orbit.point(j0).ok_or(Error::MissingOrbitIndex(j0))?;
    let mut acc = first.scale(w0);
    for &(j, w) in terms {
        let xj = orbit.point(j).ok_or(Error::MissingOrbitIndex(j))?;
        xj.check_dim(acc.dim())?;
        for (a, c) in acc.as_mut_slice().iter_mut().zip(xj.as_slice()) {
            *a += w * c;
        }
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite("affine combination"));
    }
    Ok(acc)
}

/// Euclidean distance `‖p − q‖`.
pub fn norm_dist(p: &Point, q: &Point) -> Result<f64> {
    q.check_dim(p.dim())?;
    Ok(p.dist(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(v: &[f64]) -> Point {
        Point::from_slice(v).unwrap()
    }

    #[test]
    fn kronecker_row_identity() {
        let row = SparseRow::new(0, vec![(0, 1.0)]).unwrap();
        let orbit = vec![pt(&[3.0, -1.0])];
        assert_eq!(affine_combine(&row, &orbit).unwrap(), pt(&[3.0, -1.0]));
    }

    #[test]
    fn inertial_row_on_sparse_orbit() {
        let row = SparseRow::new(4, vec![(4, 1.5), (3, -0.5)]).unwrap();
        let mut orbit = BTreeMap::new();
        orbit.insert(3, Point::scalar(1.0));
        orbit.insert(4, Point::scalar(0.0));
        assert_eq!(affine_combine(&row, &orbit).unwrap(), Point::scalar(-0.5));
    }

    #[test]
    fn midpoint_row() {
        let row = SparseRow::new(1, vec![(1, 0.5), (0, 0.5)]).unwrap();
        let orbit = vec![Point::scalar(2.0), Point::scalar(4.0)];
        assert_eq!(affine_combine(&row, &orbit).unwrap(), Point::scalar(3.0));
    }

    #[test]
    fn missing_index_is_reported() {
        let row = SparseRow::new(2, vec![(2, 1.0)]).unwrap();
        let orbit = vec![Point::scalar(2.0)];
        assert_eq!(
            affine_combine(&row, &orbit),
            Err(Error::MissingOrbitIndex(2))
        );
    }

    #[test]
    fn rows_must_sum_to_one_and_look_backward() {
        assert!(matches!(
            SparseRow::new(3, vec![(3, 0.9)]),
            Err(Error::InvalidSchedule(_))
        ));
        assert!(matches!(
            SparseRow::new(1, vec![(2, 1.0)]),
            Err(Error::InvalidSchedule(_))
        ));
    }

    #[test]
    fn non_finite_combination_is_numerical_error() {
        let row = SparseRow::new(1, vec![(1, 2.0), (0, -1.0)]).unwrap();
        let orbit = vec![Point::raw(vec![f64::MAX]), Point::raw(vec![-f64::MAX])];
        assert_eq!(
            affine_combine(&row, &orbit),
            Err(Error::NonFinite("affine combination"))
        );
    }

    #[test]
    fn distances() {
        assert_eq!(norm_dist(&pt(&[0.0, 0.0]), &pt(&[3.0, 4.0])).unwrap(), 5.0);
        let p = pt(&[1.5, -2.0, 7.0]);
        assert_eq!(norm_dist(&p, &p).unwrap(), 0.0);
        assert_eq!(norm_dist(&pt(&[1.0]), &pt(&[-1.0])).unwrap(), 2.0);
        assert!(matches!(
            norm_dist(&pt(&[1.0]), &pt(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn point_construction_rejects_bad_input() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn kronecker_is_bit_exact(v in proptest::collection::vec(-1e6f64..1e6, 1..5), n in 0usize..4) {
            let mut orbit: Vec<Point> = (0..n).map(|k| Point::zeros(v.len()).axpy(k as f64, &pt(&v))).collect();
            orbit.push(pt(&v));
            let got = affine_combine(&SparseRow::kronecker(n), &orbit).unwrap();
            let bits: Vec<u64> = got.as_slice().iter().map(|c| c.to_bits()).collect();
            let want: Vec<u64> = v.iter().map(|c| c.to_bits()).collect();
            prop_assert_eq!(bits, want);
        }

        #[test]
        fn affine_invariance(
            pts in proptest::collection::vec(proptest::collection::vec(-100f64..100.0, 2), 3),
            raw in proptest::collection::vec(-2f64..2.0, 2),
            shift in proptest::collection::vec(-50f64..50.0, 2),
        ) {
            let last = 1.0 - raw.iter().sum::<f64>();
            let row = SparseRow::new(2, vec![(2, last), (1, raw[1]), (0, raw[0])]).unwrap();
            let orbit: Vec<Point> = pts.iter().map(|p| pt(p)).collect();
            let c = pt(&shift);
            let shifted: Vec<Point> = orbit.iter().map(|p| p + &c).collect();
            let base = affine_combine(&row, &orbit).unwrap();
            let moved = affine_combine(&row, &shifted).unwrap();
            let expect = &base + &c;
            prop_assert!(moved.dist(&expect) <= 1e-12 * (1.0 + base.norm() + c.norm()) * 10.0);
        }
    }
}
