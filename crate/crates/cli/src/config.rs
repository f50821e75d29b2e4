//! Versioned TOML run configuration.
//!
//! Relative paths inside a config file are resolved against the directory
//! that contains it.

use std::path::{Path, PathBuf};

use nhpp_core::intensity::ModelSpec;
use nhpp_core::mcmc::{ChainConfig, Marginal};
use nhpp_core::simulate::TestPoints;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliResult, Context};
use crate::io::{read_text, sha256_hex};

pub const CONFIG_VERSION: i64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: i64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub pc: Option<PcSection>,
    #[serde(default)]
    pub validate_bound: Option<ValidateBoundConfig>,
    #[serde(default)]
    pub coverage: Option<CoverageSection>,
    #[serde(default)]
    pub diagnose: Option<DiagnoseConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path).map_err(|e| config_err(e.to_string()))?;
        let table: toml::Table = toml::from_str(&text).config(&path.display().to_string())?;
        match table.get("version") {
            Some(toml::Value::Integer(CONFIG_VERSION)) => {}
            Some(v) => return Err(config_err(format!("config version {v} is not supported (expected {CONFIG_VERSION})"))),
            None => return Err(config_err("config is missing 'version'")),
        }
        let mut cfg: RunConfig = toml::from_str(&text).config(&path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> CliResult<&'a T> {
        s.as_ref().ok_or_else(|| config_err(format!("config has no [{name}] section")))
    }
}

/// Hash of a command's effective configuration. Output locations are left
/// out so the same run written elsewhere hashes the same.
pub fn config_hash<T: Serialize>(command: &str, section: &T, seed: u64) -> String {
    let mut section = serde_json::to_value(section).unwrap_or_default();
    if let Some(obj) = section.as_object_mut() {
        obj.remove("out_dir");
    }
    let v = serde_json::json!({ "command": command, "section": section, "seed": seed });
    sha256_hex(v.to_string().as_bytes())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseSpec {
    None,
    Isotropic { sigma: f64 },
    Gaussian { sigma: Vec<f64> },
    /// Isotropic position error plus a DM error whose sigma is drawn
    /// uniformly per event.
    Frb { position_sigma: f64, dm_sigma: [f64; 2] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    #[serde(default = "noise_none")]
    pub noise: NoiseSpec,
    pub out_dir: PathBuf,
    /// Leading coordinates carried by the `loc` column; defaults to min(2, dim).
    #[serde(default)]
    pub loc_dims: Option<usize>,
    #[serde(default)]
    pub axes: Option<Vec<String>>,
}

fn noise_none() -> NoiseSpec {
    NoiseSpec::None
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Frb,
    Homogeneous,
    Fixed { model: ModelSpec },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainFormat {
    #[default]
    Csv,
    Binary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSettings {
    pub n_chains: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub adapt_at: usize,
    pub adapt_window: Option<usize>,
    pub thin: usize,
    pub stall_window: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        let c = ChainConfig::default();
        Self {
            n_chains: 4,
            n_iter: c.n_iter,
            burn_in: c.burn_in,
            adapt_at: c.adapt_at,
            adapt_window: c.adapt_window,
            thin: c.thin,
            stall_window: c.stall_window,
        }
    }
}

impl ChainSettings {
    pub fn chain_config(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            adapt_at: self.adapt_at,
            adapt_window: self.adapt_window,
            thin: self.thin,
            seed,
            stall_window: self.stall_window,
            ..ChainConfig::default()
        }
    }
}

fn default_rhat() -> f64 {
    nhpp_core::diagnostics::DEFAULT_RHAT_THRESHOLD
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub catalog: PathBuf,
    pub family: FamilySpec,
    /// One marginal per family parameter; the FRB family has a default.
    #[serde(default)]
    pub prior: Option<Vec<Marginal>>,
    #[serde(default)]
    pub chain: ChainSettings,
    #[serde(default = "default_rhat")]
    pub rhat_threshold: f64,
    #[serde(default)]
    pub min_ess: f64,
    #[serde(default)]
    pub format: ChainFormat,
    pub out_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn default_n_outer() -> usize {
    2000
}
fn default_n_inner() -> usize {
    4096
}
fn default_n_rep() -> usize {
    5000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcSection {
    pub catalog: PathBuf,
    pub family: FamilySpec,
    /// Stored chains; not used by the fixed family.
    #[serde(default)]
    pub chains: Vec<PathBuf>,
    #[serde(default = "one")]
    pub count_scaling: f64,
    #[serde(default = "default_n_outer")]
    pub n_outer: usize,
    #[serde(default = "default_n_inner")]
    pub n_inner: usize,
    #[serde(default = "default_n_rep")]
    pub n_rep: usize,
    /// Evenly thins the pooled posterior draws down to this many.
    #[serde(default)]
    pub max_draws: Option<usize>,
    /// Previously published values, for the comparison table.
    #[serde(default)]
    pub previous: Option<PathBuf>,
    #[serde(default)]
    pub significance: Option<f64>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedModel {
    pub name: String,
    pub model: ModelSpec,
}

fn default_models() -> Vec<NamedModel> {
    vec![
        NamedModel { name: "gaussian".into(), model: ModelSpec::BenchmarkGaussian },
        NamedModel { name: "mixture".into(), model: ModelSpec::BenchmarkMixture },
    ]
}
fn default_sigmas() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1]
}
fn default_radius() -> f64 {
    1e-2
}
fn default_k() -> usize {
    2
}
fn default_test_points() -> usize {
    500
}
fn default_grid() -> usize {
    64
}
fn default_min_hits() -> u64 {
    10
}
fn uniform() -> TestPoints {
    TestPoints::Uniform
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateBoundConfig {
    pub out_dir: PathBuf,
    #[serde(default = "default_models")]
    pub models: Vec<NamedModel>,
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_test_points")]
    pub n_test_points: usize,
    #[serde(default = "default_n_rep")]
    pub n_replicates: usize,
    #[serde(default = "uniform")]
    pub test_points: TestPoints,
    #[serde(default = "default_grid")]
    pub n_grid: usize,
    #[serde(default = "default_n_inner")]
    pub n_inner: usize,
    /// Rows with fewer hits are left out of the ratio quantiles.
    #[serde(default = "default_min_hits")]
    pub min_hits: u64,
}

fn default_reps() -> usize {
    10
}
fn default_theta_star() -> Vec<f64> {
    vec![525.0, 1.5, 6.0, 2.0, 560.0, 400.0]
}
fn default_level() -> f64 {
    0.9
}
fn default_position_sigma() -> f64 {
    0.2
}
fn default_dm_sigma() -> [f64; 2] {
    [0.4, 3.0]
}

/// FRB coverage study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSection {
    pub out_dir: PathBuf,
    #[serde(default = "default_reps")]
    pub n_replicates: usize,
    #[serde(default = "default_theta_star")]
    pub theta_star: Vec<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub chain: ChainSettings,
    #[serde(default = "default_position_sigma")]
    pub position_sigma: f64,
    #[serde(default = "default_dm_sigma")]
    pub dm_sigma: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub chains: Vec<PathBuf>,
    #[serde(default = "default_rhat")]
    pub rhat_threshold: f64,
    #[serde(default)]
    pub min_ess: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}
