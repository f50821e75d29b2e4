//! k-contact probabilities: the exact noiseless distribution, the upper
//! bound for noisy observations (general and i.i.d. forms), direct
//! simulation of the probability of coincidence for an event cluster, and
//! comparison against externally supplied values.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::catalog::CatalogEvent;
use crate::error::{invalid, Error, Result};
use crate::geometry::{min_bounding_sphere, Domain, Point, Sphere};
use crate::intensity::{IntensityModel, UnitBallSamples};
use crate::mcmc::IntensityFamily;
use crate::noise::{displace_in_domain, NoiseModel, RadialLaw, DEFAULT_MAX_RETRIES};
use crate::poisson::poisson_tail_at_least;
use crate::quadrature::CompositeRule;
use crate::rng::{derive_seed, stream_rng};

/// Probabilities below this are shown as "< 1e-16".
pub const DISPLAY_FLOOR: f64 = 1e-16;

/// Upper tail mass at which the i.i.d. integral is truncated.
pub const IID_TRUNCATION: f64 = 1e-10;

/// A point `s0`, radius `r` and order `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactQuery {
    pub center: Point,
    pub radius: f64,
    pub k: usize,
}

impl ContactQuery {
    pub fn new(center: Point, radius: f64, k: usize) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(invalid(format!("radius must be finite and >= 0, got {radius}")));
        }
        if k == 0 {
            return Err(invalid("k must be >= 1"));
        }
        Ok(Self { center, radius, k })
    }

    /// Query given by the minimal bounding sphere of a cluster, with `k` its size.
    pub fn from_cluster(points: &[Point], domain: &Domain) -> Result<Self> {
        let s = min_bounding_sphere(points, domain)?;
        Self::new(s.center, s.radius, points.len())
    }

    pub fn sphere(&self) -> Sphere {
        Sphere { center: self.center.clone(), radius: self.radius }
    }
}

/// A probability estimate, clamped to [0, 1], with the unclamped value kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    pub value: f64,
    pub std_error: f64,
    pub raw: f64,
}

impl Probability {
    fn from_raw(raw: f64, std_error: f64) -> Self {
        Self { value: raw.clamp(0.0, 1.0), std_error, raw }
    }
}

/// Poisson pmf at `k - 1`, the derivative of the k-contact tail in the ball mass.
fn tail_slope(k: usize, mass: f64) -> f64 {
    if mass <= 0.0 {
        return if k == 1 { 1.0 } else { 0.0 };
    }
    let j = (k - 1) as u64;
    (j as f64 * mass.ln() - mass - ln_factorial(j)).exp()
}

/// `P(d_k(s0, X) <= r) = 1 - Σ_{i<k} M^i e^{-M} / i!` with `M` the Monte
/// Carlo mass of the ball; the standard error is propagated through the tail.
pub fn berman_cdf(model: &IntensityModel, q: &ContactQuery, n_mc: usize, seed: u64) -> Result<Probability> {
    let m = model.integrate_ball(&q.sphere(), n_mc, seed)?;
    let p = poisson_tail_at_least(q.k as u64, m.value);
    Ok(Probability::from_raw(p, tail_slope(q.k, m.value) * m.std_error))
}

fn check_noise(model: &IntensityModel, noise: &NoiseModel) -> Result<()> {
    if noise.dim() != model.dim() {
        return Err(invalid(format!("{}D noise for a {}D model", noise.dim(), model.dim())));
    }
    noise.validate()
}

/// Upper bound on the k-contact probability of the noisy process. Each
/// outer draw samples `ε_1..ε_k` (one per noise model, in order), widens the
/// radius to `r + max|ε_i|` and evaluates the Berman tail there with a fresh
/// inner Monte Carlo mass.
pub fn contact_bound(
    model: &IntensityModel,
    noises: &[NoiseModel],
    q: &ContactQuery,
    n_outer: usize,
    n_inner: usize,
    seed: u64,
) -> Result<Probability> {
    if noises.len() != q.k {
        return Err(invalid(format!("{} noise models for k = {}", noises.len(), q.k)));
    }
    if n_outer == 0 || n_inner == 0 {
        return Err(invalid("n_outer and n_inner must be >= 1"));
    }
    for n in noises {
        check_noise(model, n)?;
    }
    let domain = model.domain();
    let values: Vec<f64> = (0..n_outer)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            let widen = noises.iter().map(|n| domain.norm(&n.sample(&mut rng))).fold(0.0_f64, f64::max);
            let ball = Sphere { center: q.center.clone(), radius: q.radius + widen };
            let m = model.integrate_ball(&ball, n_inner, derive_seed(seed, j as u64))?;
            Ok(poisson_tail_at_least(q.k as u64, m.value))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, se) = mean_and_se(&values);
    Ok(Probability::from_raw(mean, se))
}

/// The bound when all k errors share one law with a closed-form radial
/// distribution: `∫ tail(r + x) k F^{k-1}(x) f(x) dx`, integrated with a
/// composite Gauss-Legendre rule of about `n_grid` nodes up to the point where
/// the law of the maximum has 1e-10 mass left. The inner masses share one set
/// of unit-ball samples, so the reported standard error is the fully
/// correlated propagation of the inner errors.
pub fn contact_bound_iid(
    model: &IntensityModel,
    noise: &NoiseModel,
    q: &ContactQuery,
    n_grid: usize,
    n_inner: usize,
    seed: u64,
) -> Result<Probability> {
    check_noise(model, noise)?;
    if n_inner == 0 {
        return Err(invalid("n_inner must be >= 1"));
    }
    let law = noise.radial_law(model.domain().weights())?;
    let samples = UnitBallSamples::new(model.dim(), n_inner, seed);
    bound_iid_with(model, &law, q, n_grid, &samples)
}

/// [`contact_bound_iid`] with a caller-owned radial law and unit-ball sample set.
pub fn bound_iid_with(
    model: &IntensityModel,
    law: &RadialLaw,
    q: &ContactQuery,
    n_grid: usize,
    samples: &UnitBallSamples,
) -> Result<Probability> {
    let k = q.k;
    let tail_at = |radius: f64| -> Result<(f64, f64)> {
        let m = model.integrate_ball_with(samples, &q.center, radius)?;
        Ok((poisson_tail_at_least(k as u64, m.value), tail_slope(k, m.value) * m.std_error))
    };
    match law {
        RadialLaw::PointMassAtZero => {
            let (p, se) = tail_at(q.radius)?;
            Ok(Probability::from_raw(p, se))
        }
        RadialLaw::Chi { .. } => {
            let x_max = law.max_quantile(k, 1.0 - IID_TRUNCATION);
            let order = 8;
            let panels = n_grid.div_ceil(order).max(1);
            let rule = CompositeRule::new(0.0, x_max, panels, order);
            let (mut value, mut se) = (0.0, 0.0);
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let density = law.max_pdf(k, x);
                if density == 0.0 {
                    continue;
                }
                let (p, e) = tail_at(q.radius + x)?;
                value += w * density * p;
                se += w * density * e;
            }
            Ok(Probability::from_raw(value, se))
        }
    }
}

/// Posterior-averaged bound: each outer draw also picks a parameter vector
/// uniformly from `draws` and scales the expected count by `scaling`.
#[allow(clippy::too_many_arguments)]
pub fn contact_bound_posterior(
    family: &dyn IntensityFamily,
    draws: &[Vec<f64>],
    scaling: f64,
    noises: &[NoiseModel],
    q: &ContactQuery,
    n_outer: usize,
    n_inner: usize,
    seed: u64,
) -> Result<Probability> {
    if draws.is_empty() {
        return Err(Error::EmptyPosterior);
    }
    if noises.len() != q.k {
        return Err(invalid(format!("{} noise models for k = {}", noises.len(), q.k)));
    }
    if !(scaling.is_finite() && scaling > 0.0) {
        return Err(invalid(format!("count scaling must be > 0, got {scaling}")));
    }
    let domain = family.domain().clone();
    let values: Vec<f64> = (0..n_outer.max(1))
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            let theta = &draws[rng.random_range(0..draws.len())];
            let model = family.build(theta)?.scaled(scaling);
            let widen = noises.iter().map(|n| domain.norm(&n.sample(&mut rng))).fold(0.0_f64, f64::max);
            let ball = Sphere { center: q.center.clone(), radius: q.radius + widen };
            let m = model.integrate_ball(&ball, n_inner, derive_seed(seed, j as u64))?;
            Ok(poisson_tail_at_least(q.k as u64, m.value))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, se) = mean_and_se(&values);
    Ok(Probability::from_raw(mean, se))
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Settings for [`simulate_pc`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcConfig {
    /// Multiplier applied to the expected event count of each drawn model.
    pub count_scaling: f64,
    pub n_rep: usize,
    /// Monte Carlo points per ball mass.
    pub n_inner: usize,
    pub seed: u64,
    pub max_retries: usize,
}

impl Default for PcConfig {
    fn default() -> Self {
        Self { count_scaling: 1.0, n_rep: 5000, n_inner: 4096, seed: 0, max_retries: DEFAULT_MAX_RETRIES }
    }
}

/// Replicate distribution of the probability of coincidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPc {
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: Vec<f64>,
}

/// Per-replicate simulation of the probability of coincidence of a cluster:
/// draw `θ` from the posterior, scale its expected count, draw true member
/// positions from their localization densities, and evaluate the exact
/// k-contact probability at the minimal bounding sphere of those positions.
/// The inner Monte Carlo points are shared by all replicates.
pub fn simulate_pc(
    family: &dyn IntensityFamily,
    draws: &[Vec<f64>],
    cluster: &[CatalogEvent],
    config: &PcConfig,
) -> Result<SimulatedPc> {
    if draws.is_empty() {
        return Err(Error::EmptyPosterior);
    }
    if cluster.len() < 2 {
        return Err(invalid(format!("a cluster needs at least 2 events, got {}", cluster.len())));
    }
    if !(config.count_scaling.is_finite() && config.count_scaling > 0.0) {
        return Err(invalid(format!("count scaling must be > 0, got {}", config.count_scaling)));
    }
    if config.n_rep == 0 || config.n_inner == 0 {
        return Err(invalid("n_rep and n_inner must be >= 1"));
    }
    let domain = family.domain().clone();
    let k = cluster.len();
    let samples = UnitBallSamples::new(domain.dim(), config.n_inner, derive_seed(config.seed, u64::MAX));
    let replicates: Vec<f64> = (0..config.n_rep)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, i as u64);
            let theta = &draws[rng.random_range(0..draws.len())];
            let model = family.build(theta)?.scaled(config.count_scaling);
            let truth = cluster
                .iter()
                .map(|e| displace_in_domain(&e.observed, &e.noise, &domain, -1.0, &mut rng, config.max_retries))
                .collect::<Result<Vec<Point>>>()?;
            let sphere = min_bounding_sphere(&truth, &domain)?;
            let m = model.integrate_ball_with(&samples, &sphere.center, sphere.radius)?;
            Ok(poisson_tail_at_least(k as u64, m.value))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut sorted = replicates.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(SimulatedPc {
        median: quantile_sorted(&sorted, 0.5),
        lower: quantile_sorted(&sorted, 0.025),
        upper: quantile_sorted(&sorted, 0.975),
        replicates,
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Everything reported for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactResult {
    pub id: String,
    pub k: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub metric_weights: Vec<f64>,
    pub bound: Probability,
    pub simulated: Option<SimulatedPc>,
    pub count_scaling: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
}

/// Renders a probability, showing values under double precision reach as "< 1e-16".
pub fn format_probability(p: f64) -> String {
    if p < DISPLAY_FLOOR {
        "< 1e-16".to_string()
    } else {
        format!("{p:.6e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub id: String,
    pub pc: f64,
    pub bound: f64,
    pub previous: f64,
    /// `previous / pc`; `None` when `pc` is zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub median_ratio: Option<f64>,
    pub n_improved: usize,
    /// Identifiers present on only one side.
    pub unmatched: Vec<String>,
}

/// Joins results with previously published values by identifier. A row is
/// "improved" when the new value is smaller than the previous one.
pub fn compare_with_previous(results: &[ContactResult], previous: &BTreeMap<String, f64>) -> Comparison {
    let mut rows = Vec::new();
    let mut unmatched = Vec::new();
    for r in results {
        let pc = r.simulated.as_ref().map_or(r.bound.value, |s| s.median);
        match previous.get(&r.id) {
            Some(&prev) => {
                let ratio = if pc > 0.0 { Some(prev / pc) } else { None };
                rows.push(ComparisonRow { id: r.id.clone(), pc, bound: r.bound.value, previous: prev, ratio });
            }
            None => unmatched.push(r.id.clone()),
        }
    }
    for id in previous.keys() {
        if !results.iter().any(|r| &r.id == id) {
            unmatched.push(id.clone());
        }
    }
    let n_improved = rows.iter().filter(|r| r.pc < r.previous).count();
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio.unwrap_or(f64::INFINITY)).collect();
    ratios.sort_by(f64::total_cmp);
    let median_ratio = if ratios.is_empty() {
        None
    } else {
        let n = ratios.len();
        Some(if n % 2 == 1 { ratios[n / 2] } else { 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]) })
    };
    Comparison { rows, median_ratio, n_improved, unmatched }
}
