//! Metropolis-Hastings within Gibbs for the hierarchical model: a joint
//! Gaussian random walk on the hyperparameters, independence proposals for
//! each event's position drawn from its localization density, and
//! single-site random walks on the remaining coordinates (DM).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::EventCatalog;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Domain, Point};
use crate::intensity::IntensityModel;
use crate::mcmc::family::IntensityFamily;
use crate::mcmc::lhs::lhs_starts;
use crate::mcmc::prior::Hyperprior;
use crate::noise::{NoiseModel, DEFAULT_MAX_RETRIES};
use crate::poisson::ln_factorial;
use crate::rng::{stream_rng, SimRng};

/// `-∫_D Λ + Σ ln Λ(x_i) + Σ ln f(y_i | x_i) - ln n!` for latent positions
/// `x_i` and the catalog's observed `y_i`. Degenerate noise blocks add
/// nothing at their atom. `-inf` if some `Λ(x_i)` vanishes.
pub fn log_likelihood(
    family: &dyn IntensityFamily,
    theta: &[f64],
    latent: &[Point],
    catalog: &EventCatalog,
) -> Result<f64> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(invalid(format!("non-finite parameters {theta:?}")));
    }
    if latent.len() != catalog.len() {
        return Err(invalid(format!("{} latent positions for {} events", latent.len(), catalog.len())));
    }
    let model = family.build(theta)?;
    Ok(log_likelihood_with(&model, latent, catalog))
}

pub(crate) fn log_likelihood_with(model: &IntensityModel, latent: &[Point], catalog: &EventCatalog) -> f64 {
    let mut total = -model.total_mass() - ln_factorial(catalog.len() as u64);
    for (x, e) in latent.iter().zip(&catalog.events) {
        total += model.ln_eval(x) + noise_term(&catalog.domain, &e.noise, x, &e.observed);
    }
    total
}

fn noise_term(domain: &Domain, noise: &NoiseModel, latent: &Point, observed: &Point) -> f64 {
    noise.ln_density(&domain.displacement(latent, observed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total iterations, burn-in included.
    pub n_iter: usize,
    pub burn_in: usize,
    /// Iteration at which the proposal covariance is re-estimated and frozen.
    pub adapt_at: usize,
    /// Use only the last `adapt_window` pre-adaptation iterations for the
    /// covariance estimate; `None` uses all of them.
    pub adapt_window: Option<usize>,
    pub thin: usize,
    pub seed: u64,
    /// Stream of `seed` used by this chain.
    pub chain_index: u64,
    /// Starting parameters; `None` draws a single latin hypercube start.
    pub initial: Option<Vec<f64>>,
    /// Iterations without any accepted hyperparameter move that trigger a warning.
    pub stall_window: usize,
    pub max_retries: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_iter: 6000,
            burn_in: 1000,
            adapt_at: 1000,
            adapt_window: None,
            thin: 1,
            seed: 0,
            chain_index: 0,
            initial: None,
            stall_window: 500,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub theta: f64,
    pub position: f64,
    pub trailing: f64,
}

/// Post-burn-in draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub param_names: Vec<String>,
    pub draws: Vec<Vec<f64>>,
    pub log_posterior: Vec<f64>,
    /// Whether the hyperparameter proposal was accepted at each kept iteration.
    pub accepted: Vec<bool>,
    pub seed: u64,
    pub chain_index: u64,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub acceptance: AcceptanceRates,
    pub proposal_cov: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
    /// Latent positions at the last iteration.
    pub final_latent: Vec<Point>,
}

impl PosteriorChain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Draws of parameter `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[j]).collect()
    }
}

struct EventBlocks {
    head: NoiseModel,
    /// Standard deviations for each trailing coordinate; `None` keeps it fixed.
    trailing: Vec<Option<f64>>,
}

/// Sampler state for one chain.
pub struct ChainState<'a> {
    family: &'a dyn IntensityFamily,
    catalog: &'a EventCatalog,
    prior: &'a Hyperprior,
    blocks: Vec<EventBlocks>,
    head_dims: usize,
    pub theta: Vec<f64>,
    pub latent: Vec<Point>,
    model: IntensityModel,
    ln_lambda: Vec<f64>,
    ln_noise: Vec<f64>,
    ln_prior: f64,
    pub iteration: usize,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    adapted: bool,
    history: Vec<Vec<f64>>,
    pub theta_accepted: usize,
    pub position_accepted: usize,
    pub position_proposed: usize,
    pub trailing_accepted: usize,
    pub trailing_proposed: usize,
    adapt_at: usize,
    adapt_window: Option<usize>,
    max_retries: usize,
}

impl<'a> ChainState<'a> {
    pub fn new(
        family: &'a dyn IntensityFamily,
        catalog: &'a EventCatalog,
        prior: &'a Hyperprior,
        initial: &[f64],
        adapt_at: usize,
        max_retries: usize,
        rng: &mut SimRng,
    ) -> Result<Self> {
        if catalog.is_empty() {
            return Err(invalid("cannot fit an empty catalog"));
        }
        if prior.dim() != family.param_names().len() || initial.len() != prior.dim() {
            return Err(invalid("prior, family and starting point disagree in dimension"));
        }
        if catalog.domain != *family.domain() {
            return Err(invalid("catalog domain differs from the model family's domain"));
        }
        let ln_prior = prior.ln_pdf(initial);
        if !ln_prior.is_finite() {
            return Err(invalid(format!("starting point {initial:?} is outside the prior support")));
        }
        let head_dims = family.position_dims();
        let mut blocks = Vec::with_capacity(catalog.len());
        for e in &catalog.events {
            let (head, tail) = e.noise.split_at(head_dims).ok_or_else(|| {
                Error::UnsupportedNoise(format!(
                    "event {:?}: noise cannot be split after coordinate {head_dims}",
                    e.id
                ))
            })?;
            let trailing = match tail {
                None => Vec::new(),
                Some(NoiseModel::Gaussian { sigma }) => sigma.into_iter().map(Some).collect(),
                Some(t) if t.is_degenerate() => vec![None; t.dim()],
                Some(_) => {
                    return Err(Error::UnsupportedNoise(format!(
                        "event {:?}: trailing coordinates need Gaussian or degenerate noise",
                        e.id
                    )))
                }
            };
            blocks.push(EventBlocks { head, trailing });
        }
        let model = family.build(initial)?;
        let domain = &catalog.domain;
        let mut latent = Vec::with_capacity(catalog.len());
        for (e, b) in catalog.events.iter().zip(&blocks) {
            let mut x = e.observed.clone();
            let usable = |x: &Point| {
                model.ln_eval(x).is_finite() && noise_term(domain, &e.noise, x, &e.observed).is_finite()
            };
            let mut tries = 0;
            while !usable(&x) {
                if tries >= max_retries {
                    return Err(Error::RetriesExhausted(max_retries));
                }
                tries += 1;
                x = e.observed.clone();
                let eps = b.head.sample(rng);
                for i in 0..head_dims {
                    x.coords_mut()[i] -= eps[i];
                }
                domain.wrap(&mut x);
            }
            latent.push(x);
        }
        let ln_lambda: Vec<f64> = latent.iter().map(|x| model.ln_eval(x)).collect();
        let ln_noise: Vec<f64> = latent
            .iter()
            .zip(&catalog.events)
            .map(|(x, e)| noise_term(domain, &e.noise, x, &e.observed))
            .collect();
        let d = prior.dim();
        let cov = DMatrix::from_diagonal(&DVector::from_vec(prior.initial_proposal_variances()));
        let chol = cov.clone().cholesky().map(|c| c.l()).ok_or_else(|| invalid("initial proposal covariance"))?;
        Self {
            family,
            catalog,
            prior,
            blocks,
            head_dims,
            theta: initial.to_vec(),
            latent,
            model,
            ln_lambda,
            ln_noise,
            ln_prior,
            iteration: 0,
            cov,
            chol,
            adapted: false,
            history: Vec::with_capacity(adapt_at.min(1 << 20)),
            theta_accepted: 0,
            position_accepted: 0,
            position_proposed: 0,
            trailing_accepted: 0,
            trailing_proposed: 0,
            adapt_at,
            adapt_window: None,
            max_retries,
        }
        .checked(d)
    }

    fn checked(self, d: usize) -> Result<Self> {
        if self.cov.nrows() != d {
            return Err(invalid("proposal covariance dimension"));
        }
        if !self.log_posterior().is_finite() {
            return Err(invalid(format!("starting point {:?} has zero posterior density", self.theta)));
        }
        Ok(self)
    }

    /// Restricts the adaptation estimate to the last `window` iterations before `adapt_at`.
    pub fn set_adapt_window(&mut self, window: Option<usize>) {
        self.adapt_window = window;
    }

    pub fn max_retries(&self) -> usize {
        self.max_retries
    }

    fn log_likelihood_cached(&self) -> f64 {
        -self.model.total_mass() - ln_factorial(self.catalog.len() as u64)
            + self.ln_lambda.iter().sum::<f64>()
            + self.ln_noise.iter().sum::<f64>()
    }

    pub fn log_posterior(&self) -> f64 {
        self.ln_prior + self.log_likelihood_cached()
    }

    pub fn proposal_cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn is_adapted(&self) -> bool {
        self.adapted
    }

    /// One sweep of all three blocks. Returns whether the hyperparameter move was accepted.
    pub fn step(&mut self, rng: &mut SimRng) -> bool {
        if !self.adapted && self.iteration == self.adapt_at {
            self.adapt();
        }
        let accepted = self.update_theta(rng);
        self.update_positions(rng);
        self.update_trailing(rng);
        if !self.adapted {
            self.history.push(self.theta.clone());
        }
        self.iteration += 1;
        accepted
    }

    /// Sample covariance of the iterations so far, scaled by 2.38^2/d, then frozen.
    fn adapt(&mut self) {
        self.adapted = true;
        let d = self.theta.len();
        if let Some(w) = self.adapt_window {
            let skip = self.history.len().saturating_sub(w);
            self.history.drain(..skip);
        }
        let n = self.history.len();
        if n > d + 1 {
            let mut mean = vec![0.0; d];
            for h in &self.history {
                for j in 0..d {
                    mean[j] += h[j] / n as f64;
                }
            }
            let mut s = DMatrix::<f64>::zeros(d, d);
            for h in &self.history {
                for a in 0..d {
                    for b in 0..d {
                        s[(a, b)] += (h[a] - mean[a]) * (h[b] - mean[b]) / (n - 1) as f64;
                    }
                }
            }
            let scaled = s * (2.38 * 2.38 / d as f64);
            if let Some(c) = scaled.clone().cholesky() {
                self.cov = scaled;
                self.chol = c.l();
            }
        }
        self.history = Vec::new();
    }

    fn update_theta(&mut self, rng: &mut SimRng) -> bool {
        let d = self.theta.len();
        let z = DVector::<f64>::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let step = &self.chol * z;
        let proposal: Vec<f64> = self.theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
        let u: f64 = rng.random();
        let ln_prior = self.prior.ln_pdf(&proposal);
        if !ln_prior.is_finite() {
            return false;
        }
        let Ok(model) = self.family.build(&proposal) else {
            return false;
        };
        let ln_lambda: Vec<f64> = self.latent.iter().map(|x| model.ln_eval(x)).collect();
        let ll = -model.total_mass() - ln_factorial(self.catalog.len() as u64)
            + ln_lambda.iter().sum::<f64>()
            + self.ln_noise.iter().sum::<f64>();
        let ln_ratio = ln_prior + ll - self.log_posterior();
        if ln_ratio.is_nan() || u.ln() >= ln_ratio {
            return false;
        }
        self.theta = proposal;
        self.model = model;
        self.ln_lambda = ln_lambda;
        self.ln_prior = ln_prior;
        self.theta_accepted += 1;
        true
    }

    fn update_positions(&mut self, rng: &mut SimRng) {
        let domain = &self.catalog.domain;
        for i in 0..self.latent.len() {
            let block = &self.blocks[i];
            let observed = &self.catalog.events[i].observed;
            let eps = block.head.sample(rng);
            let mut x = self.latent[i].clone();
            for j in 0..self.head_dims {
                x.coords_mut()[j] = observed[j] - eps[j];
            }
            domain.wrap(&mut x);
            let u: f64 = rng.random();
            self.position_proposed += 1;
            if !domain.contains(&x) {
                continue;
            }
            let ln_l = self.model.ln_eval(&x);
            // proposal density equals the localization density, so it cancels
            if ln_l.is_finite() && u.ln() < ln_l - self.ln_lambda[i] {
                self.ln_noise[i] = noise_term(domain, &self.catalog.events[i].noise, &x, observed);
                self.latent[i] = x;
                self.ln_lambda[i] = ln_l;
                self.position_accepted += 1;
            }
        }
    }

    fn update_trailing(&mut self, rng: &mut SimRng) {
        let domain = &self.catalog.domain;
        for i in 0..self.latent.len() {
            for (t, sigma) in self.blocks[i].trailing.iter().enumerate() {
                let Some(sigma) = *sigma else { continue };
                let j = self.head_dims + t;
                let z: f64 = rng.sample(StandardNormal);
                let u: f64 = rng.random();
                self.trailing_proposed += 1;
                let mut x = self.latent[i].clone();
                x.coords_mut()[j] += sigma * z;
                if !domain.contains(&x) {
                    continue;
                }
                let ln_l = self.model.ln_eval(&x);
                if !ln_l.is_finite() {
                    continue;
                }
                let y = self.catalog.events[i].observed[j];
                let ln_f_new = -0.5 * ((y - x[j]) / sigma).powi(2);
                let ln_f_old = -0.5 * ((y - self.latent[i][j]) / sigma).powi(2);
                if u.ln() < ln_l - self.ln_lambda[i] + ln_f_new - ln_f_old {
                    self.ln_noise[i] = noise_term(domain, &self.catalog.events[i].noise, &x, &self.catalog.events[i].observed);
                    self.latent[i] = x;
                    self.ln_lambda[i] = ln_l;
                    self.trailing_accepted += 1;
                }
            }
        }
    }
}

/// Runs one chain and keeps every `thin`-th iteration from `burn_in` on.
pub fn run_chain(
    family: &dyn IntensityFamily,
    catalog: &EventCatalog,
    prior: &Hyperprior,
    config: &ChainConfig,
) -> Result<PosteriorChain> {
    if config.n_iter <= config.burn_in || config.thin == 0 {
        return Err(invalid("need n_iter > burn_in and thin >= 1"));
    }
    let initial = match &config.initial {
        Some(t) => t.clone(),
        None => lhs_starts(prior, 1, config.seed ^ config.chain_index.rotate_left(32)).remove(0),
    };
    let mut rng = stream_rng(config.seed, config.chain_index);
    let mut state = ChainState::new(family, catalog, prior, &initial, config.adapt_at, config.max_retries, &mut rng)?;
    state.set_adapt_window(config.adapt_window);
    let mut chain = PosteriorChain {
        param_names: family.param_names(),
        draws: Vec::new(),
        log_posterior: Vec::new(),
        accepted: Vec::new(),
        seed: config.seed,
        chain_index: config.chain_index,
        n_iter: config.n_iter,
        burn_in: config.burn_in,
        thin: config.thin,
        acceptance: AcceptanceRates::default(),
        proposal_cov: Vec::new(),
        warnings: Vec::new(),
        final_latent: Vec::new(),
    };
    let mut since_accept = 0usize;
    for it in 0..config.n_iter {
        let accepted = state.step(&mut rng);
        since_accept = if accepted { 0 } else { since_accept + 1 };
        if config.stall_window > 0 && since_accept == config.stall_window {
            chain.warnings.push(format!(
                "no hyperparameter move accepted in iterations {}..{}",
                it + 1 - config.stall_window,
                it + 1
            ));
        }
        if it >= config.burn_in && (it - config.burn_in).is_multiple_of(config.thin) {
            chain.draws.push(state.theta.clone());
            chain.log_posterior.push(state.log_posterior());
            chain.accepted.push(accepted);
        }
    }
    let rate = |a: usize, p: usize| if p == 0 { 0.0 } else { a as f64 / p as f64 };
    chain.acceptance = AcceptanceRates {
        theta: rate(state.theta_accepted, config.n_iter),
        position: rate(state.position_accepted, state.position_proposed),
        trailing: rate(state.trailing_accepted, state.trailing_proposed),
    };
    let cov = state.proposal_cov();
    chain.proposal_cov = (0..cov.nrows()).map(|i| (0..cov.ncols()).map(|j| cov[(i, j)]).collect()).collect();
    chain.final_latent = state.latent;
    Ok(chain)
}

/// Runs `n_chains` independent chains from latin hypercube starts, each on
/// its own stream of `base.seed`, in parallel.
pub fn run_chains(
    family: &dyn IntensityFamily,
    catalog: &EventCatalog,
    prior: &Hyperprior,
    n_chains: usize,
    base: &ChainConfig,
) -> Result<Vec<PosteriorChain>> {
    if n_chains == 0 {
        return Err(invalid("need at least one chain"));
    }
    let starts = lhs_starts(prior, n_chains, base.seed);
    starts
        .into_par_iter()
        .enumerate()
        .map(|(c, start)| {
            let config = ChainConfig { chain_index: c as u64, initial: Some(start), ..base.clone() };
            run_chain(family, catalog, prior, &config)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CatalogEvent;
    use crate::mcmc::family::HomogeneousFamily;
    use crate::mcmc::prior::Marginal;
    use approx::assert_relative_eq;

    fn homogeneous_setup(n: usize) -> (HomogeneousFamily, EventCatalog, Hyperprior) {
        let domain = Domain::unit_square();
        let events = (0..n)
            .map(|i| CatalogEvent {
                id: format!("e{i}"),
                observed: Point::new([0.1 + 0.8 * i as f64 / n.max(1) as f64, 0.5]),
                noise: NoiseModel::Degenerate { dim: 2 },
                cluster: None,
            })
            .collect();
        let catalog = EventCatalog::new(domain.clone(), events).unwrap();
        let prior = Hyperprior::new(vec!["rate".into()], vec![Marginal::Uniform { lower: 0.1, upper: 100.0 }]).unwrap();
        (HomogeneousFamily::new(domain), catalog, prior)
    }

    #[test]
    fn homogeneous_likelihood_closed_form() {
        let (family, catalog, _) = homogeneous_setup(5);
        let latent: Vec<Point> = catalog.events.iter().map(|e| e.observed.clone()).collect();
        let ll = log_likelihood(&family, &[7.0], &latent, &catalog).unwrap();
        assert_relative_eq!(ll, 5.0 * 7f64.ln() - 7.0 - ln_factorial(5), max_relative = 1e-14);
    }

    #[test]
    fn empty_catalog_likelihood_is_minus_mass() {
        let (family, catalog, _) = homogeneous_setup(0);
        assert_relative_eq!(log_likelihood(&family, &[3.0], &[], &catalog).unwrap(), -3.0);
    }

    #[test]
    fn non_finite_theta_rejected() {
        let (family, catalog, _) = homogeneous_setup(1);
        let latent = vec![catalog.events[0].observed.clone()];
        assert!(matches!(log_likelihood(&family, &[f64::NAN], &latent, &catalog), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn chains_are_deterministic() {
        let (family, catalog, prior) = homogeneous_setup(10);
        let config = ChainConfig { n_iter: 400, burn_in: 100, adapt_at: 100, seed: 5, ..Default::default() };
        let a = run_chain(&family, &catalog, &prior, &config).unwrap();
        let b = run_chain(&family, &catalog, &prior, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 300);
    }

    #[test]
    fn covariance_frozen_after_adaptation() {
        let (family, catalog, prior) = homogeneous_setup(10);
        let mut rng = stream_rng(1, 0);
        let mut s = ChainState::new(&family, &catalog, &prior, &[10.0], 50, 100, &mut rng).unwrap();
        for _ in 0..51 {
            s.step(&mut rng);
        }
        let frozen = s.proposal_cov().clone();
        for _ in 0..200 {
            s.step(&mut rng);
            assert_eq!(s.proposal_cov(), &frozen);
        }
        assert!(s.is_adapted());
    }
}
