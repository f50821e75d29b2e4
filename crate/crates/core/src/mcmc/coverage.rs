//! Frequentist coverage of posterior credible intervals on synthetic data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contact::quantile_sorted;
use crate::diagnostics::diagnose;
use crate::error::{invalid, Result};
use crate::mcmc::family::{FrbFamily, IntensityFamily};
use crate::mcmc::prior::Hyperprior;
use crate::mcmc::sampler::{run_chains, ChainConfig};
use crate::noise::NoiseModel;
use crate::rng::{derive_seed, SimRng};
use crate::simulate::make_dataset_with;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub n_replicates: usize,
    pub theta_star: Vec<f64>,
    pub n_chains: usize,
    pub chain: ChainConfig,
    /// Central credible level.
    pub level: f64,
    pub seed: u64,
}

impl CoverageConfig {
    /// FRB truth `(525, 1.5, 6, 2, 560, 400)` with 10 replicates.
    pub fn frb_default() -> Self {
        Self {
            n_replicates: 10,
            theta_star: vec![525.0, 1.5, 6.0, 2.0, 560.0, 400.0],
            n_chains: 4,
            chain: ChainConfig::default(),
            level: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub replicate: usize,
    pub n_events: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub covered: Vec<bool>,
    pub max_rhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub param_names: Vec<String>,
    pub theta_star: Vec<f64>,
    pub level: f64,
    pub n_replicates: usize,
    /// Replicates whose interval covers the truth, per parameter.
    pub counts: Vec<usize>,
    pub rows: Vec<CoverageRow>,
}

/// Per replicate: simulate from `θ*`, fit with `n_chains` chains, and check
/// whether each pooled central credible interval covers `θ*`.
pub fn coverage_study<F>(
    family: &dyn IntensityFamily,
    prior: &Hyperprior,
    config: &CoverageConfig,
    mut noise_for: F,
) -> Result<CoverageTable>
where
    F: FnMut(usize, &mut SimRng) -> Result<NoiseModel>,
{
    if !prior.in_support(&config.theta_star) {
        return Err(invalid(format!("θ* = {:?} is outside the prior support", config.theta_star)));
    }
    if !(0.0 < config.level && config.level < 1.0) {
        return Err(invalid(format!("credible level must be in (0, 1), got {}", config.level)));
    }
    let truth = family.build(&config.theta_star)?;
    let p = prior.dim();
    let alpha = 0.5 * (1.0 - config.level);
    let mut rows = Vec::with_capacity(config.n_replicates);
    for rep in 0..config.n_replicates {
        let data_seed = derive_seed(config.seed, 2 * rep as u64);
        let dataset = make_dataset_with(&truth, data_seed, &mut noise_for)?;
        let catalog = dataset.to_catalog(family.domain())?;
        let chain_config = ChainConfig { seed: derive_seed(config.seed, 2 * rep as u64 + 1), ..config.chain.clone() };
        let chains = run_chains(family, &catalog, prior, config.n_chains, &chain_config)?;
        let max_rhat = if chains.len() >= 2 && chains[0].len() >= 4 {
            diagnose(&chains, f64::INFINITY, 0.0)?.max_rhat()
        } else {
            f64::NAN
        };
        let (mut lower, mut upper, mut covered) = (Vec::new(), Vec::new(), Vec::new());
        for j in 0..p {
            let mut pooled: Vec<f64> = chains.iter().flat_map(|c| c.column(j)).collect();
            pooled.sort_by(f64::total_cmp);
            let lo = quantile_sorted(&pooled, alpha);
            let hi = quantile_sorted(&pooled, 1.0 - alpha);
            covered.push(lo <= config.theta_star[j] && config.theta_star[j] <= hi);
            lower.push(lo);
            upper.push(hi);
        }
        rows.push(CoverageRow { replicate: rep, n_events: dataset.n, lower, upper, covered, max_rhat });
    }
    let counts = (0..p).map(|j| rows.iter().filter(|r| r.covered[j]).count()).collect();
    Ok(CoverageTable {
        param_names: family.param_names(),
        theta_star: config.theta_star.clone(),
        level: config.level,
        n_replicates: config.n_replicates,
        counts,
        rows,
    })
}

/// Synthetic localization errors for FRB studies: isotropic Gaussian in
/// (α, δ) with `position_sigma` degrees and a DM error whose standard
/// deviation is drawn uniformly from `dm_sigma_range`.
pub fn frb_synthetic_noise(position_sigma: f64, dm_sigma_range: (f64, f64)) -> impl FnMut(usize, &mut SimRng) -> Result<NoiseModel> {
    move |_, rng| {
        let dm_sigma = rng.random_range(dm_sigma_range.0..=dm_sigma_range.1);
        Ok(NoiseModel::Gaussian { sigma: vec![position_sigma, position_sigma, dm_sigma] })
    }
}

/// Coverage of the FRB model under the default hyperprior with 0.2° position
/// errors and DM errors between 0.4 and 3.
pub fn frb_coverage_study(config: &CoverageConfig) -> Result<CoverageTable> {
    coverage_study(&FrbFamily::default(), &Hyperprior::frb_default(), config, frb_synthetic_noise(0.2, (0.4, 3.0)))
}
