//! Finite metric spaces and the distance primitives everything else is built on.
//!
//! A finite metric space is complete, so every function on it attains its
//! infimum and every closed ball is a finite point set. Balls are closed
//! (`dist <= r`) throughout.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A finite point set with a distance matrix.
///
/// Construction checks only the shape and that entries are finite and
/// nonnegative; the metric axioms are checked by [`validate_metric`] (or
/// [`MetricSpace::checked`]) so that invalid matrices can still be inspected.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    labels: Vec<String>,
    coords: Option<Vec<Vec<f64>>>,
    dist: Vec<f64>,
    n: usize,
}

impl MetricSpace {
    pub fn new(
        labels: Vec<String>,
        coords: Option<Vec<Vec<f64>>>,
        dist: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::MatrixShape { expected: n });
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in dist.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::BadDistance { i, j, value: d });
                }
                flat.push(d);
            }
        }
        Ok(Self {
            labels,
            coords,
            dist: flat,
            n,
        })
    }

    /// Builds the space and rejects it unless [`validate_metric`] passes with
    /// triangle tolerance `tol_metric`.
    pub fn checked(
        labels: Vec<String>,
        coords: Option<Vec<Vec<f64>>>,
        dist: Vec<Vec<f64>>,
        tol_metric: f64,
    ) -> Result<Self> {
        let space = Self::new(labels, coords, dist)?;
        match validate_metric(&space, tol_metric) {
            MetricReport::Pass => Ok(space),
            MetricReport::Fail(v) => Err(Error::NotAMetric(v.to_string())),
        }
    }

    /// Points in `R^d` with the Euclidean distance.
    pub fn euclidean(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        let dist = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        points[i]
                            .iter()
                            .zip(&points[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect();
        let labels = (0..n).map(|i| format!("p{i}")).collect();
        Self::new(labels, Some(points), dist)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Row `i` of the distance matrix.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    /// First coordinate of point `i`, when the space carries coordinates.
    pub fn coord(&self, i: usize) -> Option<f64> {
        self.coords
            .as_ref()
            .and_then(|c| c.get(i))
            .and_then(|v| v.first().copied())
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.n {
            Ok(())
        } else {
            Err(Error::InvalidIndex { index, len: self.n })
        }
    }

    /// Index of the point whose first coordinate is closest to `x`.
    pub fn nearest_coord(&self, x: f64) -> Option<usize> {
        let coords = self.coords.as_ref()?;
        (0..self.n).min_by(|&i, &j| {
            let di = (coords[i][0] - x).abs();
            let dj = (coords[j][0] - x).abs();
            di.total_cmp(&dj).then(i.cmp(&j))
        })
    }

    pub fn max_distance(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest distance between two distinct points (`+inf` for a single point).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                best = best.min(self.dist(i, j));
            }
        }
        best
    }

    pub fn all_points(&self) -> PointSet {
        PointSet {
            indices: (0..self.n).collect(),
        }
    }

    /// Closed ball `{y : dist(y, x) <= r}`.
    pub fn ball(&self, x: usize, r: f64) -> Result<PointSet> {
        self.check_index(x)?;
        if !(r >= 0.0) {
            return Err(Error::NegativeLevel(r));
        }
        Ok(PointSet {
            indices: self
                .row(x)
                .iter()
                .enumerate()
                .filter(|(_, &d)| d <= r)
                .map(|(y, _)| y)
                .collect(),
        })
    }

    /// Largest pairwise distance within `s`; zero for empty and singleton sets.
    pub fn diam(&self, s: &PointSet) -> f64 {
        let idx = s.as_slice();
        let mut best = 0.0f64;
        for (a, &i) in idx.iter().enumerate() {
            let row = self.row(i);
            for &j in &idx[a + 1..] {
                best = best.max(row[j]);
            }
        }
        best
    }

    /// `inf { dist(x, y) : y in s }`, which is `+inf` for an empty set.
    pub fn dist_to_set(&self, x: usize, s: &PointSet) -> f64 {
        let row = self.row(x);
        s.iter().map(|y| row[y]).fold(f64::INFINITY, f64::min)
    }

    pub fn into_shared(self) -> Arc<Self> {
        Arc::new(self)
    }
}

/// Uniform grid of `m` points on `[a, b]` with the absolute-value metric,
/// rounded so that it is exactly a metric in floating point.
pub fn build_grid_1d(a: f64, b: f64, m: usize) -> Result<MetricSpace> {
    if !(a < b) || m < 2 || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidGrid { a, b, m });
    }
    let h = (b - a) / (m - 1) as f64;
    let xs: Vec<f64> = (0..m)
        .map(|i| if i == m - 1 { b } else { a + i as f64 * h })
        .collect();
    let steps = step_distances(a, b, m);
    let dist = (0..m)
        .map(|i| (0..m).map(|j| steps[i.abs_diff(j)]).collect())
        .collect();
    let labels = xs.iter().map(|x| format!("{x}")).collect();
    let coords = xs.iter().map(|&x| vec![x]).collect();
    MetricSpace::new(labels, Some(coords), dist)
}

/// `D(k)`, the distance between grid points `k` steps apart.
///
/// Every `D(k)` is `q * ceil(k * n / (m - 1))` with `q = ulp(b - a)` and
/// `n = (b - a) / q`, so all distances are exact multiples of `q`, their sums
/// are exact, and the ceiling makes `D` subadditive. Hence the triangle
/// inequality holds with no tolerance, `D(m - 1) = b - a`, and
/// `|D(k) - k h| < ulp(b - a)`.
fn step_distances(a: f64, b: f64, m: usize) -> Vec<f64> {
    let span = b - a;
    let q = f64::from_bits(span.to_bits() + 1) - span;
    let n = (span / q) as u128;
    let steps = (m - 1) as u128;
    (0..m as u128)
        .map(|k| q * (k * n).div_ceil(steps) as f64)
        .collect()
}

/// Sorted set of point indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PointSet {
    indices: Vec<usize>,
}

impl PointSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn singleton(i: usize) -> Self {
        Self { indices: vec![i] }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn first(&self) -> Option<usize> {
        self.indices.first().copied()
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        let mut v = self.indices.clone();
        v.extend_from_slice(&other.indices);
        PointSet::new(v)
    }

    pub fn intersection(&self, other: &PointSet) -> PointSet {
        PointSet {
            indices: self.iter().filter(|&i| other.contains(i)).collect(),
        }
    }

    /// Elements of `self` missing from `other`.
    pub fn difference(&self, other: &PointSet) -> PointSet {
        PointSet {
            indices: self.iter().filter(|&i| !other.contains(i)).collect(),
        }
    }
}

impl FromIterator<usize> for PointSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        PointSet::new(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricViolation {
    Diagonal { i: usize },
    Identity { i: usize, j: usize },
    Symmetry { i: usize, j: usize },
    Triangle { i: usize, j: usize, k: usize },
}

impl fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Diagonal { i } => write!(f, "dist[{i}][{i}] != 0"),
            Self::Identity { i, j } => write!(f, "dist[{i}][{j}] = 0 for distinct points"),
            Self::Symmetry { i, j } => write!(f, "dist[{i}][{j}] != dist[{j}][{i}]"),
            Self::Triangle { i, j, k } => {
                write!(f, "dist[{i}][{k}] > dist[{i}][{j}] + dist[{j}][{k}]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricReport {
    Pass,
    Fail(MetricViolation),
}

impl MetricReport {
    pub fn passed(&self) -> bool {
        matches!(self, MetricReport::Pass)
    }
}

/// Checks the metric axioms by exhaustive scan, reporting the first violation
/// in the order diagonal, identity, symmetry, triangle.
pub fn validate_metric(space: &MetricSpace, tol_metric: f64) -> MetricReport {
    let n = space.len();
    for i in 0..n {
        if space.dist(i, i) != 0.0 {
            return MetricReport::Fail(MetricViolation::Diagonal { i });
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && space.dist(i, j) == 0.0 {
                return MetricReport::Fail(MetricViolation::Identity { i, j });
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if space.dist(i, j) != space.dist(j, i) {
                return MetricReport::Fail(MetricViolation::Symmetry { i, j });
            }
        }
    }
    for i in 0..n {
        let ri = space.row(i);
        for j in 0..n {
            let rj = space.row(j);
            let dij = ri[j];
            for k in 0..n {
                if ri[k] > dij + rj[k] + tol_metric {
                    return MetricReport::Fail(MetricViolation::Triangle { i, j, k });
                }
            }
        }
    }
    MetricReport::Pass
}
