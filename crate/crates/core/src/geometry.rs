//! Minimum enclosing balls for small sets of high-dimensional points.
//!
//! [`meb_exact`] projects the points onto their affine span and solves the
//! dual problem with an active-set method, so its cost depends on the number
//! of points rather than the ambient dimension. [`meb_bruteforce`] is a
//! slow, independent oracle used by the tests, and [`meb_coreset`] is the
//! iterative approximation used for larger point counts.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// Point counts above this are routed to [`meb_coreset`] by the metrics layer.
pub const MAX_EXACT_POINTS: usize = 64;
/// Largest input accepted by [`meb_bruteforce`].
pub const MAX_BRUTEFORCE_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point set is empty")]
    EmptyInput,
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("brute-force solver accepts at most {max} points, got {got}")]
    TooManyPoints { max: usize, got: usize },
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
}

/// A finite point in R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.is_empty() {
            return Err(GeometryError::InvalidDimension(0));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite { index: 0 });
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A closed ball `{p : |p - center| <= radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Membership with `|p - c| <= r (1 + rel) + abs`.
    pub fn contains(&self, p: &[f64], rel: f64, abs: f64) -> bool {
        distance(p, &self.center) <= self.radius * (1.0 + rel) + abs
    }
}

/// Numerical tolerances for [`meb_exact`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Relative slack when testing boundary membership in the exact solver.
    pub rel: f64,
    /// Directions with residual norm below `span * max_norm` are treated as
    /// outside the affine span.
    pub span: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            rel: 1e-12,
            span: 1e-10,
        }
    }
}

/// Checks non-emptiness, shared dimension and finiteness. Returns the dimension.
pub fn validate_points<P: AsRef<[f64]>>(points: &[P]) -> Result<usize, GeometryError> {
    let first = points.first().ok_or(GeometryError::EmptyInput)?;
    let dim = first.as_ref().len();
    if dim == 0 {
        return Err(GeometryError::InvalidDimension(0));
    }
    for (index, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(GeometryError::DimensionMismatch {
                index,
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite { index });
        }
    }
    Ok(dim)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    sq_distance(a, b).sqrt()
}

fn max_distance_from<P: AsRef<[f64]>>(points: &[P], center: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| distance(p.as_ref(), center))
        .fold(0.0, f64::max)
}

/// Orthonormal frame of the affine span of a point set, anchored at the first
/// point.
struct AffineFrame {
    origin: Vec<f64>,
    basis: Vec<Vec<f64>>,
    /// Largest distance of any point from the origin.
    scale: f64,
}

impl AffineFrame {
    /// Column-pivoted modified Gram-Schmidt over `p_i - p_0`.
    fn new<P: AsRef<[f64]>>(points: &[P], span_tol: f64) -> Self {
        let origin = points[0].as_ref().to_vec();
        let mut residuals: Vec<Vec<f64>> = points[1..]
            .iter()
            .map(|p| p.as_ref().iter().zip(&origin).map(|(x, o)| x - o).collect())
            .collect();
        let scale = residuals
            .iter()
            .map(|r| dot(r, r).sqrt())
            .fold(0.0, f64::max);
        let threshold = span_tol * scale;
        let mut basis: Vec<Vec<f64>> = Vec::new();

        loop {
            let mut best: Option<(usize, f64)> = None;
            for (j, r) in residuals.iter().enumerate() {
                let norm = dot(r, r).sqrt();
                if best.is_none_or(|(_, b)| norm > b) {
                    best = Some((j, norm));
                }
            }
            let Some((j, norm)) = best else { break };
            if norm <= threshold || norm == 0.0 {
                break;
            }
            let mut q = residuals[j].clone();
            // second projection pass keeps the basis orthogonal to working precision
            for b in &basis {
                let c = dot(&q, b);
                q.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let qn = dot(&q, &q).sqrt();
            if qn <= threshold || qn == 0.0 {
                break;
            }
            q.iter_mut().for_each(|x| *x /= qn);
            for r in residuals.iter_mut() {
                let c = dot(r, &q);
                r.iter_mut().zip(&q).for_each(|(x, y)| *x -= c * y);
            }
            basis.push(q);
        }

        Self {
            origin,
            basis,
            scale,
        }
    }

    fn rank(&self) -> usize {
        self.basis.len()
    }

    fn project(&self, p: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = p.iter().zip(&self.origin).map(|(x, o)| x - o).collect();
        self.basis.iter().map(|q| dot(q, &shifted)).collect()
    }

    fn lift(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.origin.clone();
        for (c, q) in coords.iter().zip(&self.basis) {
            out.iter_mut().zip(q).for_each(|(o, x)| *o += c * x);
        }
        out
    }
}

/// Dual active-set solver for the minimum enclosing ball in reduced
/// coordinates.
///
/// The center is kept as a convex combination `sum lambda_i q_i` over an
/// affinely independent support set. Each round first moves the weights
/// towards the circumcenter of the support (dropping points whose weight
/// reaches zero), then adds the farthest point outside the current ball.
struct ActiveSet<'a> {
    points: &'a [Vec<f64>],
    rel: f64,
    abs: f64,
}

impl ActiveSet<'_> {
    fn edges(&self, support: &[usize]) -> Vec<Vec<f64>> {
        let s0 = &self.points[support[0]];
        support[1..]
            .iter()
            .map(|&i| self.points[i].iter().zip(s0).map(|(a, b)| a - b).collect())
            .collect()
    }

    fn gram(edges: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(edges.len(), edges.len(), |i, j| dot(&edges[i], &edges[j]))
    }

    fn solve(gram: &DMatrix<f64>, rhs: DVector<f64>) -> DVector<f64> {
        let k = rhs.len();
        let eps = 1e-14 * gram.diagonal().max().max(f64::MIN_POSITIVE);
        gram.clone()
            .svd(true, true)
            .solve(&rhs, eps)
            .unwrap_or_else(|_| DVector::zeros(k))
    }

    /// Barycentric coordinates of the circumcenter of `support` within its
    /// affine hull.
    fn circumcenter_weights(&self, support: &[usize]) -> Vec<f64> {
        if support.len() == 1 {
            return vec![1.0];
        }
        let edges = self.edges(support);
        let gram = Self::gram(&edges);
        let rhs = DVector::from_fn(edges.len(), |i, _| 0.5 * gram[(i, i)]);
        let a = Self::solve(&gram, rhs);
        let mut out = Vec::with_capacity(support.len());
        out.push(1.0 - a.sum());
        out.extend(a.iter());
        out
    }

    /// Barycentric coordinates of `p` w.r.t. `support` when `p` lies in its
    /// affine hull, `None` otherwise.
    fn affine_coordinates(&self, support: &[usize], p: &[f64], span_tol: f64) -> Option<Vec<f64>> {
        let s0 = &self.points[support[0]];
        let e: Vec<f64> = p.iter().zip(s0).map(|(a, b)| a - b).collect();
        if support.len() == 1 {
            return (dot(&e, &e).sqrt() <= span_tol).then(|| vec![1.0]);
        }
        let edges = self.edges(support);
        let gram = Self::gram(&edges);
        let rhs = DVector::from_fn(edges.len(), |i, _| dot(&edges[i], &e));
        let b = Self::solve(&gram, rhs);
        let mut residual = e;
        for (c, edge) in b.iter().zip(&edges) {
            residual.iter_mut().zip(edge).for_each(|(r, x)| *r -= c * x);
        }
        if dot(&residual, &residual).sqrt() > span_tol {
            return None;
        }
        let mut out = Vec::with_capacity(support.len());
        out.push(1.0 - b.sum());
        out.extend(b.iter());
        Some(out)
    }

    fn center(&self, support: &[usize], weights: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.points[0].len()];
        for (&i, w) in support.iter().zip(weights) {
            c.iter_mut().zip(&self.points[i]).for_each(|(x, p)| *x += w * p);
        }
        c
    }

    /// Removes support entries whose weight is not positive.
    fn prune(support: &mut Vec<usize>, weights: &mut Vec<f64>, keep_last: bool) {
        let n = support.len();
        let mut i = 0;
        while i < support.len() {
            let protected = keep_last && i == support.len() - 1 && support.len() == n;
            if weights[i] <= 0.0 && !protected && support.len() > 1 {
                support.remove(i);
                weights.remove(i);
            } else {
                i += 1;
            }
        }
    }

    fn run(&self, span_tol: f64) -> Vec<f64> {
        let n = self.points.len();
        let mut support = vec![0usize];
        let mut weights = vec![1.0];
        let max_rounds = 20 * n * n + 100;

        for _ in 0..max_rounds {
            // move towards the circumcenter of the support until it is inside its hull
            loop {
                let target = self.circumcenter_weights(&support);
                let mut step = 1.0_f64;
                for (w, t) in weights.iter().zip(&target) {
                    if *t < 0.0 {
                        step = step.min(w / (w - t));
                    }
                }
                for (w, t) in weights.iter_mut().zip(&target) {
                    *w += step * (t - *w);
                }
                if step >= 1.0 {
                    weights = target;
                    break;
                }
                // the blocking weight is now (numerically) zero
                let blocking = weights
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .expect("support is non-empty");
                weights[blocking] = 0.0;
                Self::prune(&mut support, &mut weights, false);
            }

            let center = self.center(&support, &weights);
            let radius = support
                .iter()
                .map(|&i| distance(&self.points[i], &center))
                .fold(0.0, f64::max);
            let (far, far_dist) = (0..n)
                .map(|i| (i, distance(&self.points[i], &center)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("points are non-empty");
            if far_dist <= radius * (1.0 + self.rel) + self.abs || support.contains(&far) {
                return center;
            }

            match self.affine_coordinates(&support, &self.points[far], span_tol) {
                None => {
                    support.push(far);
                    weights.push(0.0);
                }
                Some(beta) => {
                    // exchange along a direction that keeps the center's
                    // objective linear and decreasing
                    let mut step = f64::INFINITY;
                    for (w, b) in weights.iter().zip(&beta) {
                        if *b > 0.0 {
                            step = step.min(w / b);
                        }
                    }
                    for (w, b) in weights.iter_mut().zip(&beta) {
                        *w -= step * b;
                    }
                    let blocking = weights
                        .iter()
                        .zip(&beta)
                        .enumerate()
                        .filter(|(_, (_, b))| **b > 0.0)
                        .min_by(|a, b| a.1 .0.total_cmp(b.1 .0))
                        .map(|(i, _)| i)
                        .expect("affine coordinates sum to one");
                    weights[blocking] = 0.0;
                    support.push(far);
                    weights.push(step);
                    Self::prune(&mut support, &mut weights, true);
                }
            }
        }
        self.center(&support, &weights)
    }
}

/// Exact minimum enclosing ball.
///
/// Intended for small point counts (up to [`MAX_EXACT_POINTS`]); works in any
/// ambient dimension.
pub fn meb_exact<P: AsRef<[f64]>>(points: &[P], tol: &ToleranceConfig) -> Result<Ball, GeometryError> {
    validate_points(points)?;
    let frame = AffineFrame::new(points, tol.span);
    let center = if frame.rank() == 0 {
        frame.origin.clone()
    } else {
        let reduced: Vec<Vec<f64>> = points.iter().map(|p| frame.project(p.as_ref())).collect();
        let solver = ActiveSet {
            points: &reduced,
            rel: tol.rel,
            abs: tol.rel * frame.scale,
        };
        frame.lift(&solver.run(tol.span * frame.scale))
    };
    // measured in ambient coordinates so every input point is enclosed
    let radius = max_distance_from(points, &center);
    Ok(Ball { center, radius })
}

/// Gaussian elimination with partial pivoting. `None` when the system is
/// singular relative to `rel_tol` times the largest pivot candidate.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, rel_tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= rel_tol * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Exhaustive minimum enclosing ball over all affinely independent support
/// subsets. Cost grows as 2^n; limited to [`MAX_BRUTEFORCE_POINTS`].
///
/// Among candidates whose radii agree within 1e-12, the one with the
/// lexicographically smallest support index list wins.
pub fn meb_bruteforce<P: AsRef<[f64]>>(points: &[P]) -> Result<Ball, GeometryError> {
    validate_points(points)?;
    let n = points.len();
    if n > MAX_BRUTEFORCE_POINTS {
        return Err(GeometryError::TooManyPoints {
            max: MAX_BRUTEFORCE_POINTS,
            got: n,
        });
    }
    let pts: Vec<&[f64]> = points.iter().map(|p| p.as_ref()).collect();
    let scale = pts
        .iter()
        .map(|p| distance(p, pts[0]))
        .fold(0.0, f64::max);
    let enclose_tol = 1e-10 * (1.0 + scale);

    let mut best: Option<(Ball, Vec<usize>)> = None;
    for mask in 1u32..(1u32 << n) {
        let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let s0 = pts[subset[0]];
        let center = if subset.len() == 1 {
            s0.to_vec()
        } else {
            let edges: Vec<Vec<f64>> = subset[1..]
                .iter()
                .map(|&i| pts[i].iter().zip(s0).map(|(a, b)| a - b).collect())
                .collect();
            let gram: Vec<Vec<f64>> = edges
                .iter()
                .map(|ei| edges.iter().map(|ej| dot(ei, ej)).collect())
                .collect();
            let rhs: Vec<f64> = edges.iter().map(|e| 0.5 * dot(e, e)).collect();
            let Some(lambda) = solve_dense(gram, rhs, 1e-10) else {
                continue;
            };
            let mut c = s0.to_vec();
            for (l, e) in lambda.iter().zip(&edges) {
                c.iter_mut().zip(e).for_each(|(ci, x)| *ci += l * x);
            }
            c
        };
        let radius = distance(s0, &center);
        if pts.iter().any(|p| distance(p, &center) > radius + enclose_tol) {
            continue;
        }
        let better = match &best {
            None => true,
            Some((b, support)) => {
                radius < b.radius - 1e-12
                    || ((radius - b.radius).abs() <= 1e-12 && subset < *support)
            }
        };
        if better {
            best = Some((Ball { center, radius }, subset));
        }
    }
    // a single point always yields a candidate, and the farthest-pair ball is
    // always enclosing, so `best` is populated
    Ok(best.map(|(b, _)| b).expect("at least one enclosing candidate"))
}

/// Iterative approximation: start at the first point and move the center a
/// `1/(i+1)` fraction toward the current farthest point.
///
/// The center stays in the convex hull of the points. After `t` iterations
/// the center lies within `r*/sqrt(t)` of the optimal center.
pub fn meb_coreset<P: AsRef<[f64]>>(points: &[P], iterations: usize) -> Result<Ball, GeometryError> {
    validate_points(points)?;
    let mut center = points[0].as_ref().to_vec();
    for i in 1..=iterations {
        let far = points
            .iter()
            .map(|p| p.as_ref())
            .max_by(|a, b| sq_distance(a, &center).total_cmp(&sq_distance(b, &center)))
            .expect("non-empty");
        let step = 1.0 / (i as f64 + 1.0);
        center.iter_mut().zip(far).for_each(|(c, f)| *c += step * (f - *c));
    }
    let radius = max_distance_from(points, &center);
    Ok(Ball { center, radius })
}

/// Deterministic random rotation (orthogonal, determinant +1).
///
/// QR of a seeded Gaussian matrix with the signs of `R`'s diagonal folded into
/// `Q`; the last column is negated when needed to make the determinant
/// positive.
pub fn random_rotation(dim: usize, seed: u64) -> Result<DMatrix<f64>, GeometryError> {
    if dim == 0 {
        return Err(GeometryError::InvalidDimension(0));
    }
    let mut rng = seed::rng_from(&[seed, dim as u64]);
    let gaussian = DMatrix::from_fn(dim, dim, |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v
    });
    let qr = gaussian.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(dim - 1).neg_mut();
    }
    Ok(q)
}

/// Applies `m` to each point.
pub fn rotate_points<P: AsRef<[f64]>>(m: &DMatrix<f64>, points: &[P]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            let v = DVector::from_column_slice(p.as_ref());
            (m * v).iter().copied().collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seed::rng_from(&[seed]);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = dot(&v, &v).sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn antipodal_pair() {
        let b = meb_exact(&[vec![1.0, 0.0], vec![-1.0, 0.0]], &tol()).unwrap();
        assert_abs_diff_eq!(b.radius, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.center[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.center[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn right_triangle_uses_hypotenuse() {
        let pts = [vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]];
        let b = meb_exact(&pts, &tol()).unwrap();
        assert_abs_diff_eq!(b.radius, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.center[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.center[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn high_dimensional_unit_vectors_match_oracle() {
        let mut rng = seed::rng_from(&[512]);
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                unit((0..512)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect())
            })
            .collect();
        let exact = meb_exact(&pts, &tol()).unwrap();
        let oracle = meb_bruteforce(&pts).unwrap();
        assert_abs_diff_eq!(exact.radius, oracle.radius, epsilon = 1e-9);
    }

    #[test]
    fn every_point_on_the_boundary() {
        // centered regular simplex: 52 unit vectors in 51 dimensions
        let n = 52;
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|i| unit((0..n).map(|j| if i == j { 1.0 - 1.0 / n as f64 } else { -1.0 / n as f64 }).collect()))
            .collect();
        let ball = meb_exact(&pts, &tol()).unwrap();
        assert_abs_diff_eq!(ball.radius, 1.0, epsilon = 1e-9);

        let mut rng = seed::rng_from(&[64]);
        let pts: Vec<Vec<f64>> = (0..64)
            .map(|_| unit((0..512).map(|_| StandardNormal.sample(&mut rng)).collect()))
            .collect();
        let exact = meb_exact(&pts, &tol()).unwrap();
        let approx = meb_coreset(&pts, 20_000).unwrap();
        assert!(exact.radius <= approx.radius + 1e-12);
        assert!(approx.radius <= exact.radius * (1.0 + 1.0 / (20_000f64).sqrt()));
    }

    #[test]
    fn degenerate_inputs() {
        let single = meb_exact(&[vec![3.0, -1.0, 2.0]], &tol()).unwrap();
        assert_eq!(single.radius, 0.0);
        assert_eq!(single.center, vec![3.0, -1.0, 2.0]);

        let same = vec![vec![0.25, 0.5]; 5];
        assert_eq!(meb_exact(&same, &tol()).unwrap().radius, 0.0);

        // collinear points reduce to a one-dimensional span
        let line: Vec<Vec<f64>> = [0.0, 1.0, 4.0, 2.5].iter().map(|&t| vec![t, 2.0 * t, -t]).collect();
        let b = meb_exact(&line, &tol()).unwrap();
        assert_abs_diff_eq!(b.radius, 2.0 * 6f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn error_paths() {
        let empty: Vec<Vec<f64>> = vec![];
        assert_eq!(meb_exact(&empty, &tol()), Err(GeometryError::EmptyInput));
        assert!(matches!(
            meb_exact(&[vec![1.0, 0.0], vec![1.0]], &tol()),
            Err(GeometryError::DimensionMismatch { index: 1, .. })
        ));
        assert_eq!(
            meb_exact(&[vec![f64::NAN, 0.0]], &tol()),
            Err(GeometryError::NonFinite { index: 0 })
        );
        let many = random_points(11, 2, 1);
        assert!(matches!(
            meb_bruteforce(&many),
            Err(GeometryError::TooManyPoints { got: 11, .. })
        ));
        assert!(random_rotation(0, 1).is_err());
    }

    #[test]
    fn bruteforce_examples() {
        let b = meb_bruteforce(&[vec![2.0, 7.0]]).unwrap();
        assert_eq!(b.radius, 0.0);
        assert_eq!(b.center, vec![2.0, 7.0]);

        let s = 3f64.sqrt() / 2.0;
        let tri = [vec![1.0, 0.0], vec![-0.5, s], vec![-0.5, -s]];
        let b = meb_bruteforce(&tri).unwrap();
        assert_abs_diff_eq!(b.radius, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.center[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.center[1], 0.0, epsilon = 1e-12);

        let b = meb_bruteforce(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(b.radius, 2f64.sqrt() / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.center[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn coreset_examples() {
        let b = meb_coreset(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 1000).unwrap();
        assert!((b.radius - 1.0).abs() <= 1e-3);

        for iters in [0, 1, 17] {
            assert_eq!(meb_coreset(&[vec![4.0, 4.0]], iters).unwrap().radius, 0.0);
        }

        let pts = random_points(8, 16, 99);
        let b = meb_coreset(&pts, 100_000).unwrap();
        let oracle = meb_bruteforce(&pts).unwrap();
        assert!((b.radius - oracle.radius).abs() <= 1e-4, "{} vs {}", b.radius, oracle.radius);
        assert!(b.radius >= oracle.radius - 1e-12);
    }

    #[test]
    fn rotation_fixture() {
        assert_eq!(random_rotation(1, 5).unwrap()[(0, 0)], 1.0);
        for (dim, seed) in [(2, 0), (7, 3), (64, 11)] {
            let m = random_rotation(dim, seed).unwrap();
            let gram = m.transpose() * &m;
            let err = (gram - DMatrix::<f64>::identity(dim, dim)).abs().max();
            assert!(err <= 1e-10, "orthogonality error {err}");
            assert!((m.determinant() - 1.0).abs() <= 1e-8);
            assert_eq!(m, random_rotation(dim, seed).unwrap());
        }
    }

    #[test]
    fn rotation_leaves_radius_unchanged() {
        let pts = random_points(7, 12, 4);
        let m = random_rotation(12, 8).unwrap();
        let a = meb_exact(&pts, &tol()).unwrap().radius;
        let b = meb_exact(&rotate_points(&m, &pts), &tol()).unwrap().radius;
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    #[test]
    fn projection_matches_explicit_low_dimensional_solve() {
        // points spanning 5 dimensions, embedded in 512 by a random isometry
        let low = random_points(8, 5, 21);
        let m = random_rotation(512, 3).unwrap();
        let padded: Vec<Vec<f64>> = low
            .iter()
            .map(|p| {
                let mut v = p.clone();
                v.resize(512, 0.0);
                v
            })
            .collect();
        let high = rotate_points(&m, &padded);
        let a = meb_exact(&high, &tol()).unwrap().radius;
        let b = meb_exact(&low, &tol()).unwrap().radius;
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    fn point_set() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=8, 1usize..=8).prop_flat_map(|(n, d)| {
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n)
        })
    }

    proptest! {
        #[test]
        fn encloses_every_point(pts in point_set()) {
            let b = meb_exact(&pts, &tol()).unwrap();
            for p in &pts {
                prop_assert!(distance(p, &b.center) <= b.radius + 1e-9);
            }
        }

        #[test]
        fn agrees_with_bruteforce(pts in point_set()) {
            let a = meb_exact(&pts, &tol()).unwrap().radius;
            let b = meb_bruteforce(&pts).unwrap().radius;
            prop_assert!((a - b).abs() <= 1e-9, "exact {a} vs oracle {b}");
        }

        #[test]
        fn monotone_under_point_addition(pts in point_set(), extra in prop::collection::vec(-10.0f64..10.0, 8)) {
            let before = meb_exact(&pts, &tol()).unwrap().radius;
            let mut more = pts.clone();
            more.push(extra[..pts[0].len()].to_vec());
            let after = meb_exact(&more, &tol()).unwrap().radius;
            prop_assert!(after >= before - 1e-9);
        }

        #[test]
        fn duplicate_is_inert(pts in point_set(), pick in 0usize..8) {
            let base = meb_exact(&pts, &tol()).unwrap();
            let mut more = pts.clone();
            more.push(pts[pick % pts.len()].clone());
            let dup = meb_exact(&more, &tol()).unwrap();
            prop_assert!((dup.radius - base.radius).abs() <= 1e-12);
            for (a, b) in dup.center.iter().zip(&base.center) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn coreset_stays_within_bound(pts in point_set(), iters in 1usize..200) {
            let opt = meb_exact(&pts, &tol()).unwrap().radius;
            let approx = meb_coreset(&pts, iters).unwrap().radius;
            prop_assert!(approx >= opt - 1e-9);
            prop_assert!(approx <= opt * (1.0 + 1.0 / (iters as f64).sqrt()) + 1e-9);
        }
    }
}
