//! Hierarchical Bayesian fitting of intensity hyperparameters.

pub mod coverage;
pub mod family;
pub mod lhs;
pub mod prior;
pub mod sampler;

pub use coverage::{coverage_study, frb_coverage_study, frb_synthetic_noise, CoverageConfig, CoverageRow, CoverageTable};
pub use family::{FixedFamily, FrbFamily, HomogeneousFamily, IntensityFamily};
pub use lhs::lhs_starts;
pub use prior::{Hyperprior, Marginal};
pub use sampler::{log_likelihood, run_chain, run_chains, AcceptanceRates, ChainConfig, ChainState, PosteriorChain};
