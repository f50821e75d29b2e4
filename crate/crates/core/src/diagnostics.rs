//! Convergence diagnostics across chains: Gelman-Rubin R̂ and effective sample size.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mcmc::PosteriorChain;

/// Default R̂ threshold.
pub const DEFAULT_RHAT_THRESHOLD: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rhat {
    pub value: f64,
    /// Set when every chain is constant; the value is then exactly 1.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub value: f64,
    /// Set for a constant chain; the value is then the chain length.
    pub degenerate: bool,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Classic (non-split) potential scale reduction `sqrt(var+/W)` with
/// `var+ = (n-1)/n W + B/n`.
pub fn gelman_rubin(chains: &[&[f64]]) -> Result<Rhat> {
    if chains.len() < 2 {
        return Err(invalid(format!("R̂ needs at least 2 chains, got {}", chains.len())));
    }
    let n = chains[0].len();
    if n < 4 {
        return Err(invalid(format!("R̂ needs chains of length >= 4, got {n}")));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(invalid("R̂ needs chains of equal length"));
    }
    if chains.iter().flat_map(|c| c.iter()).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite value in chain"));
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().zip(&means).map(|(c, &m)| sample_var(c, m)).sum::<f64>() / chains.len() as f64;
    if w == 0.0 {
        return Ok(Rhat { value: 1.0, degenerate: true });
    }
    let grand = mean(&means);
    let b = n as f64 * sample_var(&means, grand);
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok(Rhat { value: (var_plus / w).sqrt(), degenerate: false })
}

/// R̂ on chains split into first and second halves (a middle draw of an odd
/// length is dropped).
pub fn split_gelman_rubin(chains: &[&[f64]]) -> Result<Rhat> {
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        halves.push(&c[..h]);
        halves.push(&c[c.len() - h..]);
    }
    gelman_rubin(&halves)
}

/// `n / (1 + 2 Σ ρ_t)` with Geyer's initial monotone sequence truncation,
/// capped at `n`.
pub fn effective_sample_size(chain: &[f64]) -> Result<Ess> {
    let n = chain.len();
    if n < 8 {
        return Err(invalid(format!("ESS needs a chain of length >= 8, got {n}")));
    }
    if chain.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite value in chain"));
    }
    let m = mean(chain);
    let centered: Vec<f64> = chain.iter().map(|v| v - m).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let gamma0 = autocov(0);
    if gamma0 == 0.0 {
        return Ok(Ess { value: n as f64, degenerate: true });
    }
    let rho = |lag: usize| autocov(lag) / gamma0;
    let mut sum_pairs = 0.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum_pairs += pair;
        prev = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / n as f64);
    Ok(Ess { value: (n as f64 / tau).min(n as f64), degenerate: false })
}

/// Per-parameter convergence summary over several chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub param_names: Vec<String>,
    pub n_chains: usize,
    pub draws_per_chain: usize,
    pub rhat: Vec<f64>,
    pub split_rhat: Vec<f64>,
    pub rhat_degenerate: Vec<bool>,
    pub ess_per_chain: Vec<Vec<f64>>,
    pub ess_pooled: Vec<f64>,
    pub rhat_threshold: f64,
    pub min_ess: f64,
    /// Parameters failing the R̂ gate. R̂ is compared as `max(R̂, 1)`, its
    /// large-sample limit, so a threshold of 1 or less always fails.
    pub rhat_exceeded: Vec<String>,
    /// Parameters whose pooled ESS is below `min_ess`.
    pub low_ess: Vec<String>,
    /// Warnings raised while sampling, prefixed with the chain index.
    pub chain_warnings: Vec<String>,
    pub seeds: Vec<u64>,
}

impl DiagnosticsReport {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn converged(&self) -> bool {
        self.rhat_exceeded.is_empty()
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<10} {:>10} {:>10} {:>12}\n", "param", "rhat", "split_rhat", "ess_pooled");
        for (j, name) in self.param_names.iter().enumerate() {
            s.push_str(&format!(
                "{:<10} {:>10.5} {:>10.5} {:>12.1}\n",
                name, self.rhat[j], self.split_rhat[j], self.ess_pooled[j]
            ));
        }
        s
    }
}

/// Diagnostics for equal-length chains of the same parameters.
pub fn diagnose(chains: &[PosteriorChain], rhat_threshold: f64, min_ess: f64) -> Result<DiagnosticsReport> {
    let first = chains.first().ok_or_else(|| invalid("no chains to diagnose"))?;
    let p = first.param_names.len();
    let n = first.len();
    if chains.iter().any(|c| c.param_names != first.param_names || c.len() != n) {
        return Err(invalid("chains differ in parameters or length"));
    }
    let mut report = DiagnosticsReport {
        param_names: first.param_names.clone(),
        n_chains: chains.len(),
        draws_per_chain: n,
        rhat: Vec::with_capacity(p),
        split_rhat: Vec::with_capacity(p),
        rhat_degenerate: Vec::with_capacity(p),
        ess_per_chain: Vec::with_capacity(p),
        ess_pooled: Vec::with_capacity(p),
        rhat_threshold,
        min_ess,
        rhat_exceeded: Vec::new(),
        low_ess: Vec::new(),
        chain_warnings: chains
            .iter()
            .flat_map(|c| c.warnings.iter().map(move |w| format!("chain {}: {w}", c.chain_index)))
            .collect(),
        seeds: chains.iter().map(|c| c.seed).collect(),
    };
    for j in 0..p {
        let columns: Vec<Vec<f64>> = chains.iter().map(|c| c.column(j)).collect();
        let refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
        let r = gelman_rubin(&refs)?;
        report.rhat.push(r.value);
        report.rhat_degenerate.push(r.degenerate);
        report.split_rhat.push(split_gelman_rubin(&refs)?.value);
        let ess: Vec<f64> = refs.iter().map(|c| effective_sample_size(c).map(|e| e.value)).collect::<Result<_>>()?;
        report.ess_pooled.push(ess.iter().sum());
        report.ess_per_chain.push(ess);
        if r.value.max(1.0) >= rhat_threshold {
            report.rhat_exceeded.push(first.param_names[j].clone());
        }
        if report.ess_pooled[j] < min_ess {
            report.low_ess.push(first.param_names[j].clone());
        }
    }
    Ok(report)
}
