//! Independent marginal hyperpriors.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};

/// One-dimensional prior with an inverse CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Marginal {
    Uniform { lower: f64, upper: f64 },
    Normal { mean: f64, sd: f64 },
    /// Normal restricted to `(lower, ∞)` and renormalized.
    TruncatedNormal { mean: f64, sd: f64, lower: f64 },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid")
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Uniform { lower, upper } => lower.is_finite() && upper.is_finite() && lower < upper,
            Marginal::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Marginal::TruncatedNormal { mean, sd, lower } => {
                mean.is_finite() && sd.is_finite() && sd > 0.0 && lower.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid prior marginal {self:?}")))
        }
    }

    /// Open/closed support as `(lower, upper)`; the truncation point itself is excluded.
    pub fn in_support(&self, x: f64) -> bool {
        match *self {
            Marginal::Uniform { lower, upper } => x >= lower && x <= upper,
            Marginal::Normal { .. } => x.is_finite(),
            Marginal::TruncatedNormal { lower, .. } => x.is_finite() && x > lower,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !self.in_support(x) {
            return f64::NEG_INFINITY;
        }
        let ln_phi = |z: f64| -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln();
        match *self {
            Marginal::Uniform { lower, upper } => -(upper - lower).ln(),
            Marginal::Normal { mean, sd } => ln_phi((x - mean) / sd) - sd.ln(),
            Marginal::TruncatedNormal { mean, sd, lower } => {
                let kept = 1.0 - std_normal().cdf((lower - mean) / sd);
                ln_phi((x - mean) / sd) - sd.ln() - kept.ln()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Marginal::Normal { mean, sd } => std_normal().cdf((x - mean) / sd),
            Marginal::TruncatedNormal { mean, sd, lower } => {
                if x <= lower {
                    return 0.0;
                }
                let n = std_normal();
                let a = n.cdf((lower - mean) / sd);
                ((n.cdf((x - mean) / sd) - a) / (1.0 - a)).clamp(0.0, 1.0)
            }
        }
    }

    /// Quantile for `p` in (0, 1).
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        match *self {
            Marginal::Uniform { lower, upper } => lower + p * (upper - lower),
            Marginal::Normal { mean, sd } => mean + sd * std_normal().inverse_cdf(p),
            Marginal::TruncatedNormal { mean, sd, lower } => {
                let n = std_normal();
                let a = n.cdf((lower - mean) / sd);
                let x = mean + sd * n.inverse_cdf(a + p * (1.0 - a));
                if x > lower {
                    x
                } else {
                    lower + f64::EPSILON * lower.abs().max(1.0)
                }
            }
        }
    }

    /// Width of the central 90% interval.
    pub fn central_width(&self) -> f64 {
        self.inverse_cdf(0.95) - self.inverse_cdf(0.05)
    }
}

/// Named independent marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperprior {
    pub names: Vec<String>,
    pub marginals: Vec<Marginal>,
}

impl Hyperprior {
    pub fn new(names: Vec<String>, marginals: Vec<Marginal>) -> Result<Self> {
        if names.len() != marginals.len() || names.is_empty() {
            return Err(invalid("hyperprior needs one marginal per named parameter"));
        }
        marginals.iter().try_for_each(Marginal::validate)?;
        Ok(Self { names, marginals })
    }

    /// `N_FRBs ~ U(128.8, 2362.8)`, `b ~ N(1.45, 0.12)`, `c, d ~ U(0, 10)`,
    /// `DM0 ~ N(560, 560)` and `DM* ~ N(404, 404)`, the last two truncated to positive values.
    pub fn frb_default() -> Self {
        let names = ["N_FRBs", "b", "c", "d", "DM0", "DM*"].iter().map(|s| s.to_string()).collect();
        let marginals = vec![
            Marginal::Uniform { lower: 128.8, upper: 2362.8 },
            Marginal::Normal { mean: 1.45, sd: 0.12 },
            Marginal::Uniform { lower: 0.0, upper: 10.0 },
            Marginal::Uniform { lower: 0.0, upper: 10.0 },
            Marginal::TruncatedNormal { mean: 560.0, sd: 560.0, lower: 0.0 },
            Marginal::TruncatedNormal { mean: 404.0, sd: 404.0, lower: 0.0 },
        ];
        Self::new(names, marginals).expect("valid prior")
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// Which marginals are truncated normals.
    pub fn truncation_flags(&self) -> Vec<bool> {
        self.marginals.iter().map(|m| matches!(m, Marginal::TruncatedNormal { .. })).collect()
    }

    pub fn ln_pdf(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.dim() {
            return f64::NEG_INFINITY;
        }
        self.marginals.iter().zip(theta).map(|(m, x)| m.ln_pdf(*x)).sum()
    }

    pub fn in_support(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && self.marginals.iter().zip(theta).all(|(m, x)| m.in_support(*x))
    }

    /// Diagonal proposal variances: (1% of each central 90% width)^2.
    pub fn initial_proposal_variances(&self) -> Vec<f64> {
        self.marginals.iter().map(|m| (0.01 * m.central_width()).powi(2)).collect()
    }
}
