//! Parametric families `θ ↦ Λ(·; θ)` fitted by the sampler.

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::intensity::{FrbHyperparams, IntensityModel};

pub trait IntensityFamily: Send + Sync {
    fn param_names(&self) -> Vec<String>;

    fn domain(&self) -> &Domain;

    fn build(&self, theta: &[f64]) -> Result<IntensityModel>;

    /// Number of leading coordinates whose latent values are refreshed
    /// jointly by the independence sampler; the remaining coordinates get
    /// single-site random-walk updates.
    fn position_dims(&self) -> usize {
        self.domain().dim()
    }
}

/// FRB intensity over (α, δ, DM) with `θ = (N_FRBs, b, c, d, DM0, DM*)`.
#[derive(Debug, Clone)]
pub struct FrbFamily {
    domain: Domain,
}

impl FrbFamily {
    pub fn new(domain: Domain) -> Self {
        Self { domain }
    }
}

impl Default for FrbFamily {
    fn default() -> Self {
        Self::new(Domain::frb_default())
    }
}

impl IntensityFamily for FrbFamily {
    fn param_names(&self) -> Vec<String> {
        FrbHyperparams::NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn build(&self, theta: &[f64]) -> Result<IntensityModel> {
        IntensityModel::frb(self.domain.clone(), FrbHyperparams::from_slice(theta)?)
    }

    fn position_dims(&self) -> usize {
        2
    }
}

/// Constant rate, `θ = (rate)`.
#[derive(Debug, Clone)]
pub struct HomogeneousFamily {
    domain: Domain,
}

impl HomogeneousFamily {
    pub fn new(domain: Domain) -> Self {
        Self { domain }
    }
}

impl IntensityFamily for HomogeneousFamily {
    fn param_names(&self) -> Vec<String> {
        vec!["rate".into()]
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn build(&self, theta: &[f64]) -> Result<IntensityModel> {
        match theta {
            [rate] => IntensityModel::homogeneous(self.domain.clone(), *rate),
            _ => Err(Error::InvalidInput(format!("homogeneous family takes 1 parameter, got {}", theta.len()))),
        }
    }
}

/// A single known model with no free parameters.
#[derive(Debug, Clone)]
pub struct FixedFamily {
    model: IntensityModel,
}

impl FixedFamily {
    pub fn new(model: IntensityModel) -> Self {
        Self { model }
    }
}

impl IntensityFamily for FixedFamily {
    fn param_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn domain(&self) -> &Domain {
        self.model.domain()
    }

    fn build(&self, theta: &[f64]) -> Result<IntensityModel> {
        if theta.is_empty() {
            Ok(self.model.clone())
        } else {
            Err(Error::InvalidInput("fixed model takes no parameters".into()))
        }
    }
}
