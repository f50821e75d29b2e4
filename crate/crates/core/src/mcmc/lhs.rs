//! Latin hypercube starting points.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::mcmc::prior::Hyperprior;
use crate::rng::rng_from_seed;

/// One starting vector per chain: for each parameter the unit interval is cut
/// into `n_chains` equal-probability strata, one uniform draw is taken in each,
/// the strata are permuted across chains and mapped through the marginal
/// inverse CDF.
pub fn lhs_starts(prior: &Hyperprior, n_chains: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let mut starts = vec![vec![0.0; prior.dim()]; n_chains];
    for (j, marginal) in prior.marginals.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n_chains).collect();
        strata.shuffle(&mut rng);
        for (chain, &s) in strata.iter().enumerate() {
            let u = (s as f64 + rng.random::<f64>()) / n_chains as f64;
            starts[chain][j] = marginal.inverse_cdf(u);
        }
    }
    starts
}
