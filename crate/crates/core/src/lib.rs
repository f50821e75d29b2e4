//! Noisy nonhomogeneous Poisson point processes: intensity models, measurement
//! noise, simulation, k-contact probabilities and their bound for noisy
//! observations, hierarchical MCMC fitting and convergence diagnostics.

pub mod catalog;
pub mod contact;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod intensity;
pub mod mcmc;
pub mod noise;
pub mod poisson;
pub mod quadrature;
pub mod rng;
pub mod simulate;

pub use catalog::{CatalogEvent, EventCatalog};
pub use error::{Error, Result};
pub use geometry::{metric_distance, min_bounding_sphere, Domain, Point, Sphere};
pub use intensity::{Estimate, FrbHyperparams, IntensityKind, IntensityModel};
pub use noise::{GridDensity, NoiseModel, RadialLaw};
