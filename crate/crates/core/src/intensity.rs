//! Parametric intensity functions over a bounded domain, their total mass,
//! normalized densities and Monte Carlo mass over metric balls.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point, Sphere};
use crate::quadrature::{gauss_legendre_panels, midpoint_box, DEFAULT_MAX_LEVELS};
use crate::rng::rng_from_seed;

/// Telescope latitude in degrees used by the FRB intensity.
pub const TELESCOPE_LATITUDE_DEG: f64 = 49.32;

const MASS_RTOL: f64 = 1e-8;
const FRB_NORM_RTOL: f64 = 1e-10;

/// Cosine of an angle in degrees, exactly zero at the poles.
pub fn cos_deg(x: f64) -> f64 {
    if x.abs() == 90.0 {
        0.0
    } else {
        x.to_radians().cos()
    }
}

/// Bivariate normal density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianSpec", into = "GaussianSpec")]
pub struct Gaussian2 {
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
    inv: [[f64; 2]; 2],
    ln_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianSpec {
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
}

impl TryFrom<GaussianSpec> for Gaussian2 {
    type Error = Error;
    fn try_from(s: GaussianSpec) -> Result<Self> {
        Gaussian2::new(s.mean, s.cov)
    }
}

impl From<Gaussian2> for GaussianSpec {
    fn from(g: Gaussian2) -> Self {
        GaussianSpec { mean: g.mean, cov: g.cov }
    }
}

impl Gaussian2 {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        let finite = mean.iter().chain(cov.iter().flatten()).all(|v| v.is_finite());
        if !finite || cov[0][1] != cov[1][0] || cov[0][0] <= 0.0 || det <= 0.0 {
            return Err(Error::ModelConfig(format!("covariance {cov:?} is not symmetric positive definite")));
        }
        let inv = [[cov[1][1] / det, -cov[0][1] / det], [-cov[1][0] / det, cov[0][0] / det]];
        let ln_norm = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln();
        Ok(Self { mean, cov, inv, ln_norm })
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn cov(&self) -> [[f64; 2]; 2] {
        self.cov
    }

    pub fn pdf(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.mean[0];
        let dy = y - self.mean[1];
        let q = dx * (self.inv[0][0] * dx + self.inv[0][1] * dy) + dy * (self.inv[1][0] * dx + self.inv[1][1] * dy);
        (self.ln_norm - 0.5 * q).exp()
    }
}

/// The six FRB hyperparameters `(N_FRBs, b, c, d, DM0, DM*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrbHyperparams {
    pub n_frbs: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub dm0: f64,
    pub dm_star: f64,
}

impl FrbHyperparams {
    pub const NAMES: [&'static str; 6] = ["N_FRBs", "b", "c", "d", "DM0", "DM*"];

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        if theta.len() != 6 {
            return Err(Error::InvalidInput(format!("FRB parameter vector needs 6 entries, got {}", theta.len())));
        }
        Ok(Self { n_frbs: theta[0], b: theta[1], c: theta[2], d: theta[3], dm0: theta[4], dm_star: theta[5] })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.n_frbs, self.b, self.c, self.d, self.dm0, self.dm_star]
    }

    /// `ln g(δ, DM)` with the unnormalized shape
    /// `g = exp(c/(1 + d cos δ) - u^{3/2}) cos δ u^3`, `u = (DM + DM0/cos^b(φ-δ))/DM*`.
    pub fn ln_shape(&self, dec: f64, dm: f64) -> f64 {
        let cd = cos_deg(dec);
        if cd <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let u = (dm + self.dm_offset(dec)) / self.dm_star;
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.c / (1.0 + self.d * cd) - u * u.sqrt() + cd.ln() + 3.0 * u.ln()
    }

    fn dm_offset(&self, dec: f64) -> f64 {
        self.dm0 / cos_deg(TELESCOPE_LATITUDE_DEG - dec).powf(self.b)
    }

    /// `∫ g dDM` over `[dm_lo, dm_hi]` at fixed declination, in closed form
    /// through the regularized incomplete gamma function of order 8/3.
    pub fn dm_integral(&self, dec: f64, dm_lo: f64, dm_hi: f64) -> f64 {
        let cd = cos_deg(dec);
        if cd <= 0.0 {
            return 0.0;
        }
        let a = 8.0 / 3.0;
        let offset = self.dm_offset(dec);
        let v_lo = ((dm_lo + offset) / self.dm_star).max(0.0);
        let v_hi = ((dm_hi + offset) / self.dm_star).max(0.0);
        let w_lo = v_lo * v_lo.sqrt();
        let w_hi = v_hi * v_hi.sqrt();
        let diff = if w_lo > a { gamma_ur(a, w_lo) - gamma_ur(a, w_hi) } else { gamma_lr(a, w_hi) - gamma_lr(a, w_lo) };
        cd * (self.c / (1.0 + self.d * cd)).exp() * self.dm_star * (2.0 / 3.0) * gamma(a) * diff
    }

    fn validate(&self, domain: &Domain) -> Result<()> {
        let v = self.to_vec();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::ModelConfig(format!("non-finite FRB parameters {v:?}")));
        }
        for (name, value) in [("N_FRBs", self.n_frbs), ("b", self.b), ("c", self.c), ("d", self.d), ("DM*", self.dm_star)] {
            if value <= 0.0 {
                return Err(Error::ModelConfig(format!("{name} must be > 0, got {value}")));
            }
        }
        if domain.dim() != 3 {
            return Err(Error::ModelConfig(format!("FRB intensity needs a 3D (α, δ, DM) domain, got {}D", domain.dim())));
        }
        let (dec_lo, dec_hi) = (domain.lower()[1], domain.upper()[1]);
        if dec_lo < -90.0 || dec_hi > 90.0 {
            return Err(Error::ModelConfig(format!("declination bounds [{dec_lo}, {dec_hi}] exceed [-90, 90]")));
        }
        for dec in [dec_lo, dec_hi] {
            if cos_deg(TELESCOPE_LATITUDE_DEG - dec) <= 0.0 {
                return Err(Error::ModelConfig(format!("cos(φ - δ) <= 0 at δ = {dec}")));
            }
        }
        let dm_lo = domain.lower()[2];
        let mut checks = vec![dec_lo, dec_hi];
        if (dec_lo..=dec_hi).contains(&TELESCOPE_LATITUDE_DEG) {
            checks.push(TELESCOPE_LATITUDE_DEG);
        }
        for dec in checks {
            if dm_lo + self.dm_offset(dec) < 0.0 {
                return Err(Error::ModelConfig(format!("DM + DM0/cos^b(φ-δ) < 0 at δ = {dec}, DM = {dm_lo}")));
            }
        }
        Ok(())
    }
}

/// The supported intensity families with their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IntensityKind {
    /// Constant rate per unit volume.
    Homogeneous { rate: f64 },
    /// `scale * N(mean, cov)` on a 2D domain.
    BivariateGaussian { scale: f64, component: Gaussian2 },
    /// `scale * (q N1 + (1 - q) N2)` on a 2D domain.
    GaussianMixture { scale: f64, q: f64, first: Gaussian2, second: Gaussian2 },
    /// FRB exposure/selection intensity, uniform in right ascension.
    /// `norm` is `∫ g` over declination and DM.
    Frb { params: FrbHyperparams, norm: f64 },
}

/// An intensity function with its domain and cached total mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityModel {
    kind: IntensityKind,
    domain: Domain,
    total_mass: f64,
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl IntensityModel {
    pub fn homogeneous(domain: Domain, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::ModelConfig(format!("rate must be finite and > 0, got {rate}")));
        }
        let total_mass = rate * domain.volume();
        Ok(Self { kind: IntensityKind::Homogeneous { rate }, domain, total_mass })
    }

    /// Gaussian intensity scaled so that its mass over `domain` is `total`.
    pub fn bivariate_gaussian(domain: Domain, component: Gaussian2, total: f64) -> Result<Self> {
        let mut model = Self::build(IntensityKind::BivariateGaussian { scale: 1.0, component }, domain)?;
        model.rescale_to(total)?;
        Ok(model)
    }

    /// Two-component Gaussian mixture scaled so that its mass over `domain` is `total`.
    pub fn gaussian_mixture(domain: Domain, q: f64, first: Gaussian2, second: Gaussian2, total: f64) -> Result<Self> {
        let mut model = Self::build(IntensityKind::GaussianMixture { scale: 1.0, q, first, second }, domain)?;
        model.rescale_to(total)?;
        Ok(model)
    }

    pub fn frb(domain: Domain, params: FrbHyperparams) -> Result<Self> {
        Self::build(IntensityKind::Frb { params, norm: 0.0 }, domain)
    }

    /// Builds a model from raw parameters, computing the total mass.
    pub fn build(kind: IntensityKind, domain: Domain) -> Result<Self> {
        let kind = match kind {
            IntensityKind::Homogeneous { rate } => return Self::homogeneous(domain, rate),
            IntensityKind::BivariateGaussian { scale, component } => {
                check_scale(scale)?;
                check_2d(&domain)?;
                IntensityKind::BivariateGaussian { scale, component }
            }
            IntensityKind::GaussianMixture { scale, q, first, second } => {
                check_scale(scale)?;
                check_2d(&domain)?;
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::ModelConfig(format!("mixing weight q must be in [0, 1], got {q}")));
                }
                IntensityKind::GaussianMixture { scale, q, first, second }
            }
            IntensityKind::Frb { params, .. } => {
                params.validate(&domain)?;
                let (lo, hi) = (domain.lower()[1], domain.upper()[1]);
                let (dm_lo, dm_hi) = (domain.lower()[2], domain.upper()[2]);
                let norm = gauss_legendre_panels(|dec| params.dm_integral(dec, dm_lo, dm_hi), lo, hi, 16, FRB_NORM_RTOL, 4096)?;
                if !(norm.is_finite() && norm > 0.0) {
                    return Err(Error::ModelConfig(format!("FRB shape integrates to {norm} over the domain")));
                }
                IntensityKind::Frb { params, norm }
            }
        };
        let mut model = Self { kind, domain, total_mass: f64::NAN };
        model.total_mass = match &model.kind {
            IntensityKind::Frb { params, .. } => params.n_frbs,
            _ => midpoint_box(|x| model.eval_coords(x), model.domain.lower(), model.domain.upper(), MASS_RTOL, DEFAULT_MAX_LEVELS)?,
        };
        if !(model.total_mass.is_finite() && model.total_mass > 0.0) {
            return Err(Error::ModelConfig(format!("total mass must be finite and > 0, got {}", model.total_mass)));
        }
        Ok(model)
    }

    fn rescale_to(&mut self, total: f64) -> Result<()> {
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::ModelConfig(format!("target total mass must be > 0, got {total}")));
        }
        *self = self.scaled(total / self.total_mass);
        Ok(())
    }

    /// Unit-square Gaussian benchmark with mass 200.
    pub fn benchmark_gaussian() -> Self {
        Self::bivariate_gaussian(Domain::unit_square(), benchmark_first_component(), 200.0).expect("valid benchmark")
    }

    /// Unit-square two-component mixture benchmark (q = 0.71) with mass 200.
    pub fn benchmark_mixture() -> Self {
        let second = Gaussian2::new([0.25, 0.14], [[0.007, 0.0005], [0.0005, 0.002]]).expect("valid covariance");
        Self::gaussian_mixture(Domain::unit_square(), 0.71, benchmark_first_component(), second, 200.0)
            .expect("valid benchmark")
    }

    pub fn kind(&self) -> &IntensityKind {
        &self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `∫_D Λ`, computed at construction.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn frb_params(&self) -> Option<&FrbHyperparams> {
        match &self.kind {
            IntensityKind::Frb { params, .. } => Some(params),
            _ => None,
        }
    }

    /// Same shape with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let kind = match &self.kind {
            IntensityKind::Homogeneous { rate } => IntensityKind::Homogeneous { rate: rate * factor },
            IntensityKind::BivariateGaussian { scale, component } => {
                IntensityKind::BivariateGaussian { scale: scale * factor, component: component.clone() }
            }
            IntensityKind::GaussianMixture { scale, q, first, second } => IntensityKind::GaussianMixture {
                scale: scale * factor,
                q: *q,
                first: first.clone(),
                second: second.clone(),
            },
            IntensityKind::Frb { params, norm } => {
                IntensityKind::Frb { params: FrbHyperparams { n_frbs: params.n_frbs * factor, ..*params }, norm: *norm }
            }
        };
        Self { kind, domain: self.domain.clone(), total_mass: self.total_mass * factor }
    }

    /// `Λ(s)`; zero outside the domain.
    pub fn eval(&self, s: &Point) -> f64 {
        self.eval_coords(s.coords())
    }

    /// `ln Λ(s)`; `-inf` outside the domain or where the intensity vanishes.
    pub fn ln_eval(&self, s: &Point) -> f64 {
        self.ln_eval_coords(s.coords())
    }

    pub fn eval_coords(&self, x: &[f64]) -> f64 {
        match &self.kind {
            IntensityKind::Frb { .. } => self.ln_eval_coords(x).exp(),
            _ => {
                if !self.inside(x) {
                    return 0.0;
                }
                self.eval_inside(x)
            }
        }
    }

    pub fn ln_eval_coords(&self, x: &[f64]) -> f64 {
        if !self.inside(x) {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            IntensityKind::Frb { params, norm } => {
                (params.n_frbs / (norm * self.domain.extent(0))).ln() + params.ln_shape(x[1], x[2])
            }
            _ => self.eval_inside(x).ln(),
        }
    }

    fn inside(&self, x: &[f64]) -> bool {
        if x.len() != self.domain.dim() {
            return false;
        }
        let (lo, hi) = (self.domain.lower(), self.domain.upper());
        x.iter().enumerate().all(|(i, &v)| {
            v.is_finite() && ((i == 0 && self.domain.wraps_first()) || (v >= lo[i] && v <= hi[i]))
        })
    }

    fn eval_inside(&self, x: &[f64]) -> f64 {
        match &self.kind {
            IntensityKind::Homogeneous { rate } => *rate,
            IntensityKind::BivariateGaussian { scale, component } => scale * component.pdf(x[0], x[1]),
            IntensityKind::GaussianMixture { scale, q, first, second } => {
                scale * (q * first.pdf(x[0], x[1]) + (1.0 - q) * second.pdf(x[0], x[1]))
            }
            IntensityKind::Frb { .. } => self.ln_eval_coords(x).exp(),
        }
    }

    /// `Λ(s) / ∫_D Λ`.
    pub fn normalized_density(&self, s: &Point) -> f64 {
        self.eval(s) / self.total_mass
    }

    /// Largest intensity found on a regular grid of `resolution` nodes per
    /// varying axis (boundaries included). Right ascension is skipped for
    /// the FRB kind, which does not depend on it.
    pub fn grid_supremum(&self, resolution: usize) -> f64 {
        let res = resolution.max(2);
        let (lo, hi) = (self.domain.lower(), self.domain.upper());
        match &self.kind {
            IntensityKind::Homogeneous { rate } => *rate,
            IntensityKind::Frb { .. } => {
                let mut best = 0.0_f64;
                let alpha = lo[0];
                for i in 0..res {
                    let dec = lo[1] + (hi[1] - lo[1]) * i as f64 / (res - 1) as f64;
                    for j in 0..res {
                        let dm = lo[2] + (hi[2] - lo[2]) * j as f64 / (res - 1) as f64;
                        best = best.max(self.eval_coords(&[alpha, dec, dm]));
                    }
                }
                best
            }
            _ => {
                let mut best = 0.0_f64;
                for i in 0..res {
                    let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (res - 1) as f64;
                    for j in 0..res {
                        let y = lo[1] + (hi[1] - lo[1]) * j as f64 / (res - 1) as f64;
                        best = best.max(self.eval_coords(&[x, y]));
                    }
                }
                best
            }
        }
    }

    /// Monte Carlo estimate of `∫_{ball ∩ D} Λ` from `n_mc` uniform points in
    /// the metric ball. A zero radius gives exactly zero.
    pub fn integrate_ball(&self, ball: &Sphere, n_mc: usize, seed: u64) -> Result<Estimate> {
        if n_mc == 0 {
            return Err(Error::InvalidInput("n_mc must be >= 1".into()));
        }
        if ball.radius == 0.0 {
            return Ok(Estimate { value: 0.0, std_error: 0.0 });
        }
        let samples = UnitBallSamples::new(self.dim(), n_mc, seed);
        self.integrate_ball_with(&samples, &ball.center, ball.radius)
    }

    /// Like [`IntensityModel::integrate_ball`] with a fixed set of unit-ball
    /// points, so that estimates at different radii share random numbers.
    pub fn integrate_ball_with(&self, samples: &UnitBallSamples, center: &Point, radius: f64) -> Result<Estimate> {
        if samples.dim != self.dim() || center.dim() != self.dim() {
            return Err(Error::InvalidInput("ball dimension does not match the model".into()));
        }
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidInput(format!("ball radius must be finite and >= 0, got {radius}")));
        }
        if radius == 0.0 || samples.is_empty() {
            return Ok(Estimate { value: 0.0, std_error: 0.0 });
        }
        let dim = self.dim();
        let w = self.domain.weights();
        let c = center.coords();
        let volume = unit_ball_volume(dim) * radius.powi(dim as i32) / w.iter().product::<f64>();
        let mut x = vec![0.0; dim];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for u in samples.points.chunks_exact(dim) {
            for i in 0..dim {
                x[i] = self.domain.wrap_value(i, c[i] + radius * u[i] / w[i]);
            }
            let v = self.eval_coords(&x);
            sum += v;
            sum_sq += v * v;
        }
        let n = samples.len() as f64;
        let mean = sum / n;
        let var = if n > 1.0 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Ok(Estimate { value: volume * mean, std_error: volume * (var / n).sqrt() })
    }
}

fn benchmark_first_component() -> Gaussian2 {
    Gaussian2::new([0.64, 0.61], [[0.016, 0.007], [0.007, 0.02]]).expect("valid covariance")
}

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(Error::ModelConfig(format!("scale must be finite and > 0, got {scale}")))
    }
}

fn check_2d(domain: &Domain) -> Result<()> {
    if domain.dim() == 2 {
        Ok(())
    } else {
        Err(Error::ModelConfig(format!("Gaussian intensities need a 2D domain, got {}D", domain.dim())))
    }
}

/// Volume of the Euclidean unit ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    std::f64::consts::PI.powf(h) / gamma(h + 1.0)
}

/// Uniform points in the Euclidean unit ball, stored flat.
#[derive(Debug, Clone)]
pub struct UnitBallSamples {
    dim: usize,
    points: Vec<f64>,
}

impl UnitBallSamples {
    pub fn new(dim: usize, n: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut points = Vec::with_capacity(dim * n);
        let mut z = vec![0.0; dim];
        for _ in 0..n {
            let norm = loop {
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    break norm;
                }
            };
            let radius = rng.random::<f64>().powf(1.0 / dim as f64);
            points.extend(z.iter().map(|v| v / norm * radius));
        }
        Self { dim, points }
    }

    pub fn len(&self) -> usize {
        self.points.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Model description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Homogeneous {
        rate: f64,
        #[serde(default)]
        domain: Option<DomainSpec>,
    },
    BivariateGaussian {
        total: f64,
        mean: [f64; 2],
        cov: [[f64; 2]; 2],
        #[serde(default)]
        domain: Option<DomainSpec>,
    },
    GaussianMixture {
        total: f64,
        q: f64,
        first: GaussianParams,
        second: GaussianParams,
        #[serde(default)]
        domain: Option<DomainSpec>,
    },
    /// `theta` is `(N_FRBs, b, c, d, DM0, DM*)`.
    Frb {
        theta: [f64; 6],
        #[serde(default)]
        domain: Option<DomainSpec>,
    },
    /// The unit-square Gaussian benchmark.
    BenchmarkGaussian,
    /// The unit-square mixture benchmark.
    BenchmarkMixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianParams {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub wrap_first: bool,
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; self.lower.len()]);
        Domain::with_options(self.lower.clone(), self.upper.clone(), weights, self.wrap_first)
    }

    pub fn from_domain(d: &Domain) -> Self {
        Self {
            lower: d.lower().to_vec(),
            upper: d.upper().to_vec(),
            weights: Some(d.weights().to_vec()),
            wrap_first: d.wraps_first(),
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<IntensityModel> {
        let domain = |spec: &Option<DomainSpec>, default: Domain| -> Result<Domain> {
            spec.as_ref().map(DomainSpec::build).unwrap_or(Ok(default))
        };
        match self {
            ModelSpec::Homogeneous { rate, domain: d } => IntensityModel::homogeneous(domain(d, Domain::unit_square())?, *rate),
            ModelSpec::BivariateGaussian { total, mean, cov, domain: d } => {
                IntensityModel::bivariate_gaussian(domain(d, Domain::unit_square())?, Gaussian2::new(*mean, *cov)?, *total)
            }
            ModelSpec::GaussianMixture { total, q, first, second, domain: d } => IntensityModel::gaussian_mixture(
                domain(d, Domain::unit_square())?,
                *q,
                Gaussian2::new(first.mean, first.cov)?,
                Gaussian2::new(second.mean, second.cov)?,
                *total,
            ),
            ModelSpec::Frb { theta, domain: d } => {
                IntensityModel::frb(domain(d, Domain::frb_default())?, FrbHyperparams::from_slice(theta)?)
            }
            ModelSpec::BenchmarkGaussian => Ok(IntensityModel::benchmark_gaussian()),
            ModelSpec::BenchmarkMixture => Ok(IntensityModel::benchmark_mixture()),
        }
    }
}
