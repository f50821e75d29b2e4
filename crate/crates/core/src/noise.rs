//! Measurement-error models: sampling, densities, and the law of the error
//! norm used by the i.i.d. form of the contact bound.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Coords, Domain, Point};
use crate::rng::{rng_from_seed, SimRng};

/// Default redraw limit when a perturbed point leaves the domain.
pub const DEFAULT_MAX_RETRIES: usize = 10_000;

/// Piecewise-constant density on a regular grid over a local displacement patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct GridDensity {
    lower: Vec<f64>,
    upper: Vec<f64>,
    shape: Vec<usize>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    shape: Vec<usize>,
    weights: Vec<f64>,
}

impl TryFrom<GridSpec> for GridDensity {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        GridDensity::new(s.lower, s.upper, s.shape, s.weights)
    }
}

impl From<GridDensity> for GridSpec {
    fn from(g: GridDensity) -> Self {
        GridSpec { lower: g.lower, upper: g.upper, shape: g.shape, weights: g.weights }
    }
}

impl GridDensity {
    /// Weights are row-major (last axis fastest) and are normalized to sum to one.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, shape: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let dim = lower.len();
        if dim == 0 || upper.len() != dim || shape.len() != dim {
            return Err(invalid("grid bounds and shape must share a nonzero dimension"));
        }
        for i in 0..dim {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(invalid(format!("grid axis {i}: need lower < upper, got [{}, {}]", lower[i], upper[i])));
            }
            if shape[i] == 0 {
                return Err(invalid(format!("grid axis {i} has no cells")));
            }
        }
        let cells: usize = shape.iter().product();
        if weights.len() != cells {
            return Err(invalid(format!("grid has {cells} cells but {} weights", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("grid weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(invalid("grid weights sum to zero"));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(Self { lower, upper, shape, weights, cdf })
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

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| (self.upper[i] - self.lower[i]) / self.shape[i] as f64).product()
    }

    fn cell_of(&self, e: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for i in 0..self.dim() {
            if !(e[i] >= self.lower[i] && e[i] <= self.upper[i]) {
                return None;
            }
            let h = (self.upper[i] - self.lower[i]) / self.shape[i] as f64;
            let j = (((e[i] - self.lower[i]) / h).floor() as usize).min(self.shape[i] - 1);
            flat = flat * self.shape[i] + j;
        }
        Some(flat)
    }

    pub fn density(&self, e: &[f64]) -> f64 {
        self.cell_of(e).map_or(0.0, |c| self.weights[c] / self.cell_volume())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Coords) {
        let u: f64 = rng.random();
        let mut cell = self.cdf.partition_point(|&c| c <= u).min(self.weights.len() - 1);
        // never land on a zero-weight cell through rounding at the cdf edges
        while self.weights[cell] == 0.0 && cell > 0 {
            cell -= 1;
        }
        let mut idx = vec![0usize; self.dim()];
        for i in (0..self.dim()).rev() {
            idx[i] = cell % self.shape[i];
            cell /= self.shape[i];
        }
        for (i, j) in idx.into_iter().enumerate() {
            let h = (self.upper[i] - self.lower[i]) / self.shape[i] as f64;
            out.push(self.lower[i] + (j as f64 + rng.random::<f64>()) * h);
        }
    }
}

/// Distribution of the displacement `ε` of one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// `ε = 0` in `dim` coordinates.
    Degenerate { dim: usize },
    /// Independent zero-mean normals with one standard deviation per coordinate.
    Gaussian { sigma: Vec<f64> },
    /// Gridded empirical density over the displacement.
    Gridded(GridDensity),
    /// Independent blocks over consecutive coordinates.
    Product(Vec<NoiseModel>),
}

impl NoiseModel {
    /// Isotropic Gaussian, or the degenerate model when `sigma == 0`.
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(invalid(format!("noise sigma must be finite and >= 0, got {sigma}")));
        }
        if sigma == 0.0 {
            Ok(NoiseModel::Degenerate { dim })
        } else {
            Ok(NoiseModel::Gaussian { sigma: vec![sigma; dim] })
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Degenerate { dim } if *dim == 0 => Err(invalid("noise model needs at least one coordinate")),
            NoiseModel::Gaussian { sigma } => {
                if sigma.is_empty() || sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    Err(invalid(format!("Gaussian noise sigmas must be finite and > 0, got {sigma:?}")))
                } else {
                    Ok(())
                }
            }
            NoiseModel::Product(parts) => {
                if parts.is_empty() {
                    return Err(invalid("product noise model has no blocks"));
                }
                parts.iter().try_for_each(NoiseModel::validate)
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseModel::Degenerate { dim } => *dim,
            NoiseModel::Gaussian { sigma } => sigma.len(),
            NoiseModel::Gridded(g) => g.dim(),
            NoiseModel::Product(parts) => parts.iter().map(NoiseModel::dim).sum(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        match self {
            NoiseModel::Degenerate { .. } => true,
            NoiseModel::Product(parts) => parts.iter().all(NoiseModel::is_degenerate),
            _ => false,
        }
    }

    /// One draw of `ε`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Coords {
        let mut out = Coords::new();
        self.sample_into(rng, &mut out);
        out
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Coords) {
        match self {
            NoiseModel::Degenerate { dim } => out.extend(std::iter::repeat_n(0.0, *dim)),
            NoiseModel::Gaussian { sigma } => {
                for s in sigma {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(s * z);
                }
            }
            NoiseModel::Gridded(g) => g.sample(rng, out),
            NoiseModel::Product(parts) => parts.iter().for_each(|p| p.sample_into(rng, out)),
        }
    }

    /// One draw of `ε` from its own seeded stream.
    pub fn sample_noise(&self, seed: u64) -> Coords {
        self.sample(&mut rng_from_seed(seed))
    }

    /// Density of `ε` at `e`. A degenerate block contributes a point mass, so
    /// the result is `f64::INFINITY` at its atom and 0 elsewhere; callers must
    /// not multiply the sentinel into likelihoods.
    pub fn density(&self, e: &[f64]) -> f64 {
        match self {
            NoiseModel::Degenerate { .. } => {
                if e.iter().all(|&v| v == 0.0) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            NoiseModel::Gaussian { sigma } => sigma
                .iter()
                .zip(e)
                .map(|(s, v)| (-0.5 * (v / s) * (v / s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt()))
                .product(),
            NoiseModel::Gridded(g) => g.density(e),
            NoiseModel::Product(parts) => {
                let mut offset = 0;
                let mut total = 1.0;
                for p in parts {
                    let d = p.density(&e[offset..offset + p.dim()]);
                    offset += p.dim();
                    if d == 0.0 {
                        return 0.0;
                    }
                    total *= d;
                }
                total
            }
        }
    }

    /// `ln f(e)` with degenerate blocks dropped: they contribute 0 at their
    /// atom and `-inf` anywhere else.
    pub fn ln_density(&self, e: &[f64]) -> f64 {
        match self {
            NoiseModel::Degenerate { .. } => {
                if e.iter().all(|&v| v == 0.0) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            NoiseModel::Gaussian { sigma } => sigma
                .iter()
                .zip(e)
                .map(|(s, v)| -0.5 * (v / s) * (v / s) - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln())
                .sum(),
            NoiseModel::Gridded(g) => g.density(e).ln(),
            NoiseModel::Product(parts) => {
                let mut offset = 0;
                let mut total = 0.0;
                for p in parts {
                    total += p.ln_density(&e[offset..offset + p.dim()]);
                    offset += p.dim();
                }
                total
            }
        }
    }

    /// Splits into the model of the first `k` coordinates and the rest, when
    /// the blocks allow it.
    pub fn split_at(&self, k: usize) -> Option<(NoiseModel, Option<NoiseModel>)> {
        let dim = self.dim();
        if k == dim {
            return Some((self.clone(), None));
        }
        if k == 0 || k > dim {
            return None;
        }
        match self {
            NoiseModel::Degenerate { .. } => {
                Some((NoiseModel::Degenerate { dim: k }, Some(NoiseModel::Degenerate { dim: dim - k })))
            }
            NoiseModel::Gaussian { sigma } => Some((
                NoiseModel::Gaussian { sigma: sigma[..k].to_vec() },
                Some(NoiseModel::Gaussian { sigma: sigma[k..].to_vec() }),
            )),
            NoiseModel::Gridded(_) => None,
            NoiseModel::Product(parts) => {
                let mut start = 0;
                for (i, p) in parts.iter().enumerate() {
                    if start + p.dim() >= k {
                        let (h, t) = p.split_at(k - start)?;
                        let mut head = parts[..i].to_vec();
                        head.push(h);
                        let mut tail: Vec<NoiseModel> = t.into_iter().collect();
                        tail.extend_from_slice(&parts[i + 1..]);
                        return Some((flatten(&head), if tail.is_empty() { None } else { Some(flatten(&tail)) }));
                    }
                    start += p.dim();
                }
                None
            }
        }
    }

    /// Law of the metric norm `|ε|` (per-coordinate `weights`), available
    /// when the weighted error is an isotropic Gaussian or degenerate.
    pub fn radial_law(&self, weights: &[f64]) -> Result<RadialLaw> {
        if weights.len() != self.dim() {
            return Err(invalid(format!("{} metric weights for a {}D noise model", weights.len(), self.dim())));
        }
        match self {
            NoiseModel::Degenerate { .. } => Ok(RadialLaw::PointMassAtZero),
            NoiseModel::Gaussian { sigma } => {
                let scale = sigma[0] * weights[0];
                let isotropic = sigma.iter().zip(weights).all(|(s, w)| ((s * w) - scale).abs() <= 1e-12 * scale);
                if isotropic {
                    Ok(RadialLaw::Chi { dof: sigma.len(), scale })
                } else {
                    Err(Error::UnsupportedNoise("weighted Gaussian error is not isotropic".into()))
                }
            }
            NoiseModel::Product(parts) if parts.iter().all(NoiseModel::is_degenerate) => Ok(RadialLaw::PointMassAtZero),
            NoiseModel::Product(_) => {
                let flat = self.as_plain_gaussian().ok_or_else(|| {
                    Error::UnsupportedNoise("product noise has non-Gaussian blocks".into())
                })?;
                flat.radial_law(weights)
            }
            NoiseModel::Gridded(_) => {
                Err(Error::UnsupportedNoise("gridded empirical noise has no closed-form radial law".into()))
            }
        }
    }

    fn as_plain_gaussian(&self) -> Option<NoiseModel> {
        let mut sigma = Vec::new();
        for p in self.leaves() {
            match p {
                NoiseModel::Gaussian { sigma: s } => sigma.extend_from_slice(s),
                _ => return None,
            }
        }
        Some(NoiseModel::Gaussian { sigma })
    }

    fn leaves(&self) -> Vec<&NoiseModel> {
        match self {
            NoiseModel::Product(parts) => parts.iter().flat_map(NoiseModel::leaves).collect(),
            other => vec![other],
        }
    }
}

fn flatten(parts: &[NoiseModel]) -> NoiseModel {
    if parts.len() == 1 {
        parts[0].clone()
    } else {
        NoiseModel::Product(parts.to_vec())
    }
}

/// Law of `|ε|`: a point mass at zero or a scaled chi distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadialLaw {
    PointMassAtZero,
    Chi { dof: usize, scale: f64 },
}

impl RadialLaw {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            RadialLaw::PointMassAtZero => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            RadialLaw::Chi { dof, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(dof as f64 / 2.0, 0.5 * (x / scale) * (x / scale))
                }
            }
        }
    }

    /// Density of `|ε|`; zero everywhere for the point mass.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            RadialLaw::PointMassAtZero => 0.0,
            RadialLaw::Chi { dof, scale } => {
                if x < 0.0 {
                    return 0.0;
                }
                let k = dof as f64;
                if x == 0.0 {
                    return if dof == 1 { (2.0 / std::f64::consts::PI).sqrt() / scale } else { 0.0 };
                }
                let t = x / scale;
                ((k - 1.0) * t.ln() - 0.5 * t * t - (0.5 * k - 1.0) * std::f64::consts::LN_2 - ln_gamma(0.5 * k)).exp()
                    / scale
            }
        }
    }

    /// Density of the maximum of `k` independent copies: `k F^{k-1} f`.
    pub fn max_pdf(&self, k: usize, x: f64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let f = self.pdf(x);
        if f == 0.0 {
            return 0.0;
        }
        k as f64 * self.cdf(x).powi(k as i32 - 1) * f
    }

    pub fn max_cdf(&self, k: usize, x: f64) -> f64 {
        self.cdf(x).powi(k as i32)
    }

    /// Smallest `x` (to bisection precision) with `max_cdf(k, x) >= p`.
    pub fn max_quantile(&self, k: usize, p: f64) -> f64 {
        match *self {
            RadialLaw::PointMassAtZero => 0.0,
            RadialLaw::Chi { scale, .. } => {
                let mut hi = scale;
                while self.max_cdf(k, hi) < p {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.max_cdf(k, mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                hi
            }
        }
    }
}

/// `k F^{k-1}(x) f(x)` for `|ε|` under unit metric weights.
pub fn radial_max_pdf(model: &NoiseModel, k: usize, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k must be >= 1"));
    }
    let law = model.radial_law(&vec![1.0; model.dim()])?;
    Ok(law.max_pdf(k, x))
}

/// Draws `base + sign * ε` until it lands in the domain.
pub fn displace_in_domain(
    base: &Point,
    noise: &NoiseModel,
    domain: &Domain,
    sign: f64,
    rng: &mut SimRng,
    max_retries: usize,
) -> Result<Point> {
    if noise.dim() != base.dim() {
        return Err(invalid(format!("{}D noise for a {}D point", noise.dim(), base.dim())));
    }
    for _ in 0..max_retries.max(1) {
        let e = noise.sample(rng);
        let mut p = Point::new(base.coords().iter().zip(&e).map(|(x, v)| x + sign * v));
        domain.wrap(&mut p);
        if domain.contains(&p) {
            return Ok(p);
        }
    }
    Err(Error::RetriesExhausted(max_retries))
}
