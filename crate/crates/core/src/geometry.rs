//! Points, the bounded detection domain and its metric, and minimal bounding spheres.
//!
//! The domain metric is a weighted Euclidean distance: coordinate `i` is
//! multiplied by `weights[i]` before the usual norm is taken. This is how
//! heterogeneous units (degrees, dispersion measure) are put on one scale.
//! When the first coordinate wraps (right ascension), differences along it
//! are taken along the shortest arc.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;

pub type Coords = SmallVec<[f64; 3]>;

/// A location in the domain, in native units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    coords: Coords,
}

impl Point {
    pub fn new(coords: impl IntoIterator<Item = f64>) -> Self {
        Self { coords: coords.into_iter().collect() }
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self { coords: Coords::from_slice(coords) }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point::new(v)
    }
}

/// Closed box with per-dimension metric weights and an optional wrap of the
/// first coordinate (period `upper[0] - lower[0]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    weights: Vec<f64>,
    wrap_first: bool,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let dim = lower.len();
        Self::with_options(lower, upper, vec![1.0; dim], false)
    }

    pub fn with_options(
        lower: Vec<f64>,
        upper: Vec<f64>,
        weights: Vec<f64>,
        wrap_first: bool,
    ) -> Result<Self> {
        if lower.is_empty() {
            return Err(invalid("domain needs at least one dimension"));
        }
        if lower.len() != upper.len() || lower.len() != weights.len() {
            return Err(invalid(format!(
                "domain bounds/weights disagree in length: {} / {} / {}",
                lower.len(),
                upper.len(),
                weights.len()
            )));
        }
        for i in 0..lower.len() {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(invalid(format!(
                    "dimension {i}: need finite lower < upper, got [{}, {}]",
                    lower[i], upper[i]
                )));
            }
            if !(weights[i].is_finite() && weights[i] > 0.0) {
                return Err(invalid(format!("dimension {i}: metric weight must be > 0, got {}", weights[i])));
            }
        }
        Ok(Self { lower, upper, weights, wrap_first })
    }

    pub fn unit_square() -> Self {
        Self::new(vec![0.0, 0.0], vec![1.0, 1.0]).expect("valid bounds")
    }

    /// Right ascension [0, 360) wrapping, declination [-11, 90] and DM (0, 5000],
    /// all with unit metric weights.
    pub fn frb_default() -> Self {
        Self::with_options(vec![0.0, -11.0, 0.0], vec![360.0, 90.0, 5000.0], vec![1.0; 3], true)
            .expect("valid bounds")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn wraps_first(&self) -> bool {
        self.wrap_first
    }

    pub fn extent(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.extent(i)).product()
    }

    /// Bring a wrapped coordinate into `[lower, upper)`.
    pub fn wrap_value(&self, i: usize, x: f64) -> f64 {
        if i == 0 && self.wrap_first {
            let period = self.extent(0);
            let w = (x - self.lower[0]).rem_euclid(period) + self.lower[0];
            // rem_euclid may round up to exactly the period
            if w >= self.upper[0] {
                self.lower[0]
            } else {
                w
            }
        } else {
            x
        }
    }

    pub fn wrap(&self, p: &mut Point) {
        if self.wrap_first && p.dim() > 0 {
            p.coords[0] = self.wrap_value(0, p.coords[0]);
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        if p.dim() != self.dim() {
            return false;
        }
        p.coords.iter().enumerate().all(|(i, &x)| {
            if !x.is_finite() {
                return false;
            }
            if i == 0 && self.wrap_first {
                true
            } else {
                x >= self.lower[i] && x <= self.upper[i]
            }
        })
    }

    /// Coordinate difference `b - a`, shortest arc along a wrapped axis.
    pub fn displacement(&self, a: &Point, b: &Point) -> Coords {
        a.coords
            .iter()
            .zip(b.coords.iter())
            .enumerate()
            .map(|(i, (&x, &y))| self.axis_difference(i, x, y))
            .collect()
    }

    fn axis_difference(&self, i: usize, x: f64, y: f64) -> f64 {
        let d = y - x;
        if i == 0 && self.wrap_first {
            let period = self.extent(0);
            let mut d = d.rem_euclid(period);
            if d > 0.5 * period {
                d -= period;
            }
            d
        } else {
            d
        }
    }

    /// Weighted Euclidean norm of a displacement vector.
    pub fn norm(&self, disp: &[f64]) -> f64 {
        disp.iter().zip(&self.weights).map(|(d, w)| (d * w) * (d * w)).sum::<f64>().sqrt()
    }

    /// `p + disp`, wrapped.
    pub fn translate(&self, p: &Point, disp: &[f64]) -> Point {
        let mut q = Point::new(p.coords.iter().zip(disp).map(|(x, d)| x + d));
        self.wrap(&mut q);
        q
    }

    /// `p - disp`, wrapped.
    pub fn translate_back(&self, p: &Point, disp: &[f64]) -> Point {
        let mut q = Point::new(p.coords.iter().zip(disp).map(|(x, d)| x - d));
        self.wrap(&mut q);
        q
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(invalid(format!("point has {} coordinates, domain has {}", p.dim(), self.dim())));
        }
        if !p.is_finite() {
            return Err(invalid(format!("non-finite coordinates {:?}", p.coords())));
        }
        Ok(())
    }
}

/// Weighted Euclidean distance between two points of `domain`.
pub fn metric_distance(a: &Point, b: &Point, domain: &Domain) -> Result<f64> {
    domain.check_point(a)?;
    domain.check_point(b)?;
    Ok(domain.norm(&domain.displacement(a, b)))
}

/// Closed ball in the domain metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Point,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(invalid(format!("sphere radius must be finite and >= 0, got {radius}")));
        }
        if !center.is_finite() {
            return Err(invalid("sphere center must be finite"));
        }
        Ok(Self { center, radius })
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Self { center: self.center.clone(), radius }
    }
}

/// Smallest ball (under the domain metric) containing every input point.
///
/// Points are mapped to metric coordinates (weights applied, wrapped axis
/// unwrapped around the first point), the ball is found there with the
/// move-to-front randomized algorithm, and the center is mapped back.
/// Clusters spanning more than half the wrap period are not meaningful.
pub fn min_bounding_sphere(points: &[Point], domain: &Domain) -> Result<Sphere> {
    let first = points.first().ok_or_else(|| invalid("minimal bounding sphere of an empty point set"))?;
    for p in points {
        domain.check_point(p)?;
    }
    let dim = domain.dim();
    let w = domain.weights();
    let embedded: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let d = domain.displacement(first, p);
            (0..dim).map(|i| (first[i] + d[i]) * w[i]).collect()
        })
        .collect();

    let ball = miniball(&embedded);
    let mut center = Point::new((0..dim).map(|i| ball.center[i] / w[i]));
    domain.wrap(&mut center);
    // exact containment: radius is the largest distance from the final center
    let radius = points
        .iter()
        .map(|p| domain.norm(&domain.displacement(&center, p)))
        .fold(0.0_f64, f64::max);
    Sphere::new(center, radius)
}

#[derive(Debug, Clone)]
struct Ball {
    center: Vec<f64>,
    sq_radius: f64,
}

impl Ball {
    fn contains(&self, p: &[f64]) -> bool {
        let d2: f64 = p.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 <= self.sq_radius * (1.0 + 1e-12) + 1e-300
    }
}

fn miniball(points: &[Vec<f64>]) -> Ball {
    let dim = points[0].len();
    let mut order: Vec<usize> = (0..points.len()).collect();
    // fixed seed: the result must not depend on anything but the input
    order.shuffle(&mut rng_from_seed(0x5EED_BA11 ^ points.len() as u64));
    let mut list: Vec<&[f64]> = order.iter().map(|&i| points[i].as_slice()).collect();
    let mut support: Vec<&[f64]> = Vec::with_capacity(dim + 1);
    let n = list.len();
    mtf(&mut list, n, &mut support, dim)
}

fn mtf<'a>(list: &mut Vec<&'a [f64]>, end: usize, support: &mut Vec<&'a [f64]>, dim: usize) -> Ball {
    let mut ball = ball_from_support(support, dim);
    if support.len() == dim + 1 {
        return ball;
    }
    let mut i = 0;
    while i < end {
        let p = list[i];
        if !ball.contains(p) {
            support.push(p);
            ball = mtf(list, i, support, dim);
            support.pop();
            let moved = list.remove(i);
            list.insert(0, moved);
        }
        i += 1;
    }
    ball
}

fn ball_from_support(support: &[&[f64]], dim: usize) -> Ball {
    match support.len() {
        0 => Ball { center: vec![0.0; dim], sq_radius: -1.0 },
        1 => Ball { center: support[0].to_vec(), sq_radius: 0.0 },
        _ => circumball(support).unwrap_or_else(|| fallback_ball(support)),
    }
}

/// Ball with every support point on its boundary, centered in their affine hull.
fn circumball(support: &[&[f64]]) -> Option<Ball> {
    let p0 = support[0];
    let vs: Vec<Vec<f64>> = support[1..]
        .iter()
        .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
        .collect();
    let m = vs.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut rhs = nalgebra::DVector::<f64>::zeros(m);
    for j in 0..m {
        for k in 0..m {
            a[(j, k)] = 2.0 * dot(&vs[j], &vs[k]);
        }
        rhs[j] = dot(&vs[j], &vs[j]);
    }
    let scale = (0..m).map(|j| a[(j, j)]).fold(0.0_f64, f64::max);
    if scale <= 0.0 {
        return None;
    }
    let lu = a.full_piv_lu();
    let diag_min = (0..m).map(|j| lu.u()[(j, j)].abs()).fold(f64::INFINITY, f64::min);
    if diag_min <= 1e-13 * scale {
        return None;
    }
    let lambda = lu.solve(&rhs)?;
    let mut center = p0.to_vec();
    for (j, v) in vs.iter().enumerate() {
        for (c, x) in center.iter_mut().zip(v) {
            *c += lambda[j] * x;
        }
    }
    let sq_radius = support
        .iter()
        .map(|p| p.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(0.0_f64, f64::max);
    Some(Ball { center, sq_radius })
}

/// Affinely dependent support (repeated or collinear points): smallest
/// circumball of a sub-support that still contains every support point.
fn fallback_ball(support: &[&[f64]]) -> Ball {
    let n = support.len();
    let mut best: Option<Ball> = None;
    for mask in 1u32..(1 << n) {
        let subset: Vec<&[f64]> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| support[i]).collect();
        if subset.len() == n {
            continue;
        }
        let ball = if subset.len() == 1 {
            Ball { center: subset[0].to_vec(), sq_radius: 0.0 }
        } else {
            match circumball(&subset) {
                Some(b) => b,
                None => continue,
            }
        };
        if support.iter().all(|p| ball.contains(p)) && best.as_ref().is_none_or(|b| ball.sq_radius < b.sq_radius) {
            best = Some(ball);
        }
    }
    best.unwrap_or_else(|| Ball { center: support[0].to_vec(), sq_radius: 0.0 })
}
