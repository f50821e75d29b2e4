//! Synthetic noisy datasets and the bound-validation experiment.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogEvent, EventCatalog};
use crate::contact::{bound_iid_with, ContactQuery};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::intensity::{IntensityKind, IntensityModel, UnitBallSamples};
use crate::noise::{displace_in_domain, NoiseModel, DEFAULT_MAX_RETRIES};
use crate::rng::{derive_seed, rng_from_seed, stream_rng, SimRng};

/// Grid resolution and inflation of the rejection envelope.
pub const ENVELOPE_GRID: usize = 256;
pub const ENVELOPE_INFLATION: f64 = 1.1;

/// Poisson draw with mean equal to the model's total mass.
pub fn sample_count<R: Rng + ?Sized>(model: &IntensityModel, rng: &mut R) -> u64 {
    let mean = model.total_mass();
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Rejection sampler from the normalized density with a uniform envelope.
#[derive(Debug, Clone)]
pub struct PositionSampler<'a> {
    model: &'a IntensityModel,
    envelope: f64,
}

impl<'a> PositionSampler<'a> {
    /// Envelope from the grid supremum of `Λ`, inflated by 10%.
    pub fn new(model: &'a IntensityModel) -> Self {
        Self::with_envelope(model, ENVELOPE_INFLATION * model.grid_supremum(ENVELOPE_GRID))
    }

    pub fn with_envelope(model: &'a IntensityModel, envelope: f64) -> Self {
        Self { model, envelope }
    }

    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    /// `n` independent positions. Fails with [`Error::EnvelopeTooSmall`] on
    /// the first proposal whose intensity exceeds the envelope.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Point>> {
        let domain = self.model.domain();
        let (lo, hi) = (domain.lower(), domain.upper());
        let mut out = Vec::with_capacity(n);
        let mut x = vec![0.0; domain.dim()];
        while out.len() < n {
            for i in 0..x.len() {
                x[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
            }
            let value = self.model.eval_coords(&x);
            if value > self.envelope {
                return Err(Error::EnvelopeTooSmall { value, envelope: self.envelope });
            }
            if rng.random::<f64>() * self.envelope < value {
                let mut p = Point::from_slice(&x);
                domain.wrap(&mut p);
                out.push(p);
            }
        }
        Ok(out)
    }
}

/// `n` independent draws from the normalized density. An envelope violation
/// doubles the envelope and restarts from the same seed.
pub fn sample_positions(model: &IntensityModel, n: usize, seed: u64) -> Result<Vec<Point>> {
    let mut sampler = PositionSampler::new(model);
    for _ in 0..16 {
        match sampler.sample(n, &mut rng_from_seed(seed)) {
            Err(Error::EnvelopeTooSmall { value, envelope }) => {
                sampler = PositionSampler::with_envelope(model, (2.0 * envelope).max(ENVELOPE_INFLATION * value));
            }
            other => return other,
        }
    }
    Err(Error::EnvelopeTooSmall { value: f64::NAN, envelope: sampler.envelope })
}

/// True and noisy positions of one simulated realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub true_positions: Vec<Point>,
    pub noisy_positions: Vec<Point>,
    pub noise: Vec<NoiseModel>,
    /// Parameters of the generating intensity.
    pub theta: Vec<f64>,
    pub seed: u64,
    pub n: usize,
}

impl SyntheticDataset {
    /// Catalog of the noisy positions with identifiers `ev00000`, `ev00001`, ...
    pub fn to_catalog(&self, domain: &Domain) -> Result<EventCatalog> {
        let events = self
            .noisy_positions
            .iter()
            .zip(&self.noise)
            .enumerate()
            .map(|(i, (p, n))| CatalogEvent { id: format!("ev{i:05}"), observed: p.clone(), noise: n.clone(), cluster: None })
            .collect();
        EventCatalog::new(domain.clone(), events)
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise.iter().all(NoiseModel::is_degenerate)
    }
}

/// Parameters of an intensity model as a flat vector.
pub fn model_parameters(model: &IntensityModel) -> Vec<f64> {
    match model.kind() {
        IntensityKind::Homogeneous { rate } => vec![*rate],
        IntensityKind::BivariateGaussian { scale, .. } => vec![*scale],
        IntensityKind::GaussianMixture { scale, q, .. } => vec![*scale, *q],
        IntensityKind::Frb { params, .. } => params.to_vec(),
    }
}

/// Count, positions and noisy positions with one shared noise model.
pub fn make_dataset(model: &IntensityModel, noise: &NoiseModel, seed: u64) -> Result<SyntheticDataset> {
    make_dataset_with(model, seed, |_, _| Ok(noise.clone()))
}

/// Like [`make_dataset`] with a per-event noise model chosen by `noise_for(index, rng)`.
pub fn make_dataset_with<F>(model: &IntensityModel, seed: u64, mut noise_for: F) -> Result<SyntheticDataset>
where
    F: FnMut(usize, &mut SimRng) -> Result<NoiseModel>,
{
    let mut count_rng = stream_rng(seed, 0);
    let n = sample_count(model, &mut count_rng) as usize;
    let true_positions = sample_positions(model, n, derive_seed(seed, 1))?;
    let mut rng = stream_rng(seed, 2);
    let domain = model.domain();
    let mut noise = Vec::with_capacity(n);
    let mut noisy = Vec::with_capacity(n);
    for (i, x) in true_positions.iter().enumerate() {
        let m = noise_for(i, &mut rng)?;
        if m.dim() != domain.dim() {
            return Err(Error::InvalidInput(format!("{}D noise for a {}D model", m.dim(), domain.dim())));
        }
        noisy.push(displace_in_domain(x, &m, domain, 1.0, &mut rng, DEFAULT_MAX_RETRIES)?);
        noise.push(m);
    }
    Ok(SyntheticDataset { true_positions, noisy_positions: noisy, noise, theta: model_parameters(model), seed, n })
}

/// How the experiment's test points are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestPoints {
    /// Uniform over the domain.
    Uniform,
    /// Drawn from the intensity itself.
    IntensityWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValidationConfig {
    /// Standard deviation of the isotropic Gaussian error; 0 means no noise.
    pub sigma: f64,
    pub radius: f64,
    pub k: usize,
    pub n_test_points: usize,
    pub n_replicates: usize,
    pub test_points: TestPoints,
    /// Quadrature nodes for the bound.
    pub n_grid: usize,
    /// Monte Carlo points per ball mass in the bound.
    pub n_inner: usize,
    pub seed: u64,
}

impl Default for BoundValidationConfig {
    fn default() -> Self {
        Self {
            sigma: 1e-3,
            radius: 1e-2,
            k: 2,
            n_test_points: 500,
            n_replicates: 5000,
            test_points: TestPoints::Uniform,
            n_grid: 64,
            n_inner: 4096,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub s0: Vec<f64>,
    pub intensity: f64,
    pub hits: u64,
    pub frequency: f64,
    pub bound: f64,
    pub bound_std_error: f64,
    /// `bound / frequency`, absent when the frequency is zero.
    pub ratio: Option<f64>,
}

impl BoundRow {
    /// Binomial standard error of the frequency over `m` replicates.
    pub fn binomial_se(&self, m: usize) -> f64 {
        (self.frequency * (1.0 - self.frequency) / m as f64).sqrt()
    }

    /// Whether the bound falls short of the frequency by more than three
    /// binomial standard errors.
    pub fn violates(&self, m: usize) -> bool {
        self.bound < self.frequency - 3.0 * self.binomial_se(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValidationTable {
    pub config: BoundValidationConfig,
    pub rows: Vec<BoundRow>,
    pub dominance_violations: usize,
}

/// Empirical k-contact frequencies of the noisy process at test points,
/// against the bound, for one (intensity, noise level) cell.
pub fn bound_validation_experiment(model: &IntensityModel, config: &BoundValidationConfig) -> Result<BoundValidationTable> {
    if config.k == 0 || config.n_replicates == 0 || config.n_inner == 0 {
        return Err(Error::InvalidInput("k, n_replicates and n_inner must be >= 1".into()));
    }
    if !(config.radius.is_finite() && config.radius >= 0.0) {
        return Err(Error::InvalidInput(format!("radius must be finite and >= 0, got {}", config.radius)));
    }
    let domain = model.domain();
    let dim = domain.dim();
    let noise = NoiseModel::isotropic(dim, config.sigma)?;
    let law = noise.radial_law(domain.weights())?;

    let test_points: Vec<Point> = match config.test_points {
        TestPoints::Uniform => {
            let mut rng = stream_rng(config.seed, 0);
            (0..config.n_test_points)
                .map(|_| {
                    Point::new((0..dim).map(|i| domain.lower()[i] + domain.extent(i) * rng.random::<f64>()))
                })
                .collect()
        }
        TestPoints::IntensityWeighted => sample_positions(model, config.n_test_points, derive_seed(config.seed, 0))?,
    };

    let sampler = PositionSampler::new(model);
    let hits: Vec<u64> = (0..config.n_replicates)
        .into_par_iter()
        .map(|rep| -> Result<Vec<u64>> {
            let mut rng = stream_rng(derive_seed(config.seed, 1), rep as u64);
            let n = sample_count(model, &mut rng) as usize;
            let positions = sampler.sample(n, &mut rng)?;
            let mut noisy = positions
                .iter()
                .map(|x| displace_in_domain(x, &noise, domain, 1.0, &mut rng, DEFAULT_MAX_RETRIES))
                .collect::<Result<Vec<Point>>>()?;
            Ok(count_hits(&mut noisy, &test_points, domain, config.radius, config.k))
        })
        .try_reduce(
            || vec![0u64; config.n_test_points],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;

    let samples = UnitBallSamples::new(dim, config.n_inner, derive_seed(config.seed, 2));
    let m = config.n_replicates;
    let rows = test_points
        .par_iter()
        .zip(hits.par_iter())
        .map(|(s0, &h)| -> Result<BoundRow> {
            let q = ContactQuery::new(s0.clone(), config.radius, config.k)?;
            let b = bound_iid_with(model, &law, &q, config.n_grid, &samples)?;
            let frequency = h as f64 / m as f64;
            Ok(BoundRow {
                s0: s0.coords().to_vec(),
                intensity: model.eval(s0),
                hits: h,
                frequency,
                bound: b.value,
                bound_std_error: b.std_error,
                ratio: if h > 0 { Some(b.value / frequency) } else { None },
            })
        })
        .collect::<Result<Vec<BoundRow>>>()?;
    let dominance_violations = rows.iter().filter(|r| r.violates(m)).count();
    Ok(BoundValidationTable { config: config.clone(), rows, dominance_violations })
}

/// For each test point, 1 if at least `k` of `points` lie within `radius`.
/// Points are sorted along the first axis so each query scans a slab; a
/// wrapped first axis falls back to a full scan.
fn count_hits(points: &mut [Point], tests: &[Point], domain: &Domain, radius: f64, k: usize) -> Vec<u64> {
    let w0 = domain.weights()[0];
    let slab = radius / w0;
    let full_scan = domain.wraps_first();
    points.sort_by(|a, b| a[0].total_cmp(&b[0]));
    tests
        .iter()
        .map(|s| {
            let (start, end) = if full_scan {
                (0, points.len())
            } else {
                (points.partition_point(|p| p[0] < s[0] - slab), points.partition_point(|p| p[0] <= s[0] + slab))
            };
            let mut count = 0;
            for p in &points[start..end] {
                if domain.norm(&domain.displacement(s, p)) <= radius {
                    count += 1;
                    if count >= k {
                        return 1;
                    }
                }
            }
            0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_count_gives_empty() {
        let m = IntensityModel::benchmark_gaussian();
        assert!(sample_positions(&m, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn envelope_violation_detected_and_recovered() {
        let m = IntensityModel::benchmark_gaussian();
        let tiny = PositionSampler::with_envelope(&m, 1.0);
        assert!(matches!(tiny.sample(10, &mut rng_from_seed(0)), Err(Error::EnvelopeTooSmall { .. })));
        assert_eq!(sample_positions(&m, 50, 4).unwrap().len(), 50);
    }

    #[test]
    fn degenerate_noise_keeps_positions() {
        let m = IntensityModel::benchmark_gaussian();
        let d = make_dataset(&m, &NoiseModel::Degenerate { dim: 2 }, 3).unwrap();
        assert_eq!(d.true_positions, d.noisy_positions);
        assert_eq!(d.n, d.true_positions.len());
        assert!(d.is_noiseless());
    }

    #[test]
    fn datasets_are_reproducible() {
        let m = IntensityModel::benchmark_mixture();
        let noise = NoiseModel::isotropic(2, 1e-2).unwrap();
        let a = make_dataset(&m, &noise, 17).unwrap();
        let b = make_dataset(&m, &noise, 17).unwrap();
        assert_eq!(a, b);
        let c = make_dataset(&m, &noise, 18).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn hit_counting_matches_brute_force() {
        let d = Domain::unit_square();
        let mut rng = rng_from_seed(8);
        let mut pts: Vec<Point> = (0..300).map(|_| Point::new([rng.random::<f64>(), rng.random()])).collect();
        let tests: Vec<Point> = (0..50).map(|_| Point::new([rng.random::<f64>(), rng.random()])).collect();
        let brute: Vec<u64> = tests
            .iter()
            .map(|s| (pts.iter().filter(|p| d.norm(&d.displacement(s, p)) <= 0.05).count() >= 2) as u64)
            .collect();
        assert_eq!(count_hits(&mut pts, &tests, &d, 0.05, 2), brute);
    }
}
