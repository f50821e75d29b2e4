//! Acceptance criteria, one PASS/FAIL line each. Set `NHPP_FULL_ACCEPTANCE=1`
//! to run the full 10-replicate coverage study instead of the 2-replicate smoke run.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::{support_set_radius, XorShift};
use nhpp_core::contact::{
    berman_cdf, compare_with_previous, contact_bound, contact_bound_iid, simulate_pc, ContactQuery, ContactResult,
    PcConfig, Probability, SimulatedPc,
};
use nhpp_core::diagnostics::{diagnose, effective_sample_size, gelman_rubin};
use nhpp_core::mcmc::{
    coverage_study, frb_synthetic_noise, run_chains, ChainConfig, CoverageConfig, FixedFamily, FrbFamily,
    Hyperprior, IntensityFamily,
};
use nhpp_core::rng::{derive_seed, rng_from_seed, stream_rng};
use nhpp_core::simulate::{bound_validation_experiment, make_dataset_with, sample_count, BoundValidationConfig, PositionSampler};
use nhpp_core::{min_bounding_sphere, CatalogEvent, Domain, IntensityModel, NoiseModel, Point};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn frb_theta_star() -> Vec<f64> {
    vec![525.0, 1.5, 6.0, 2.0, 560.0, 400.0]
}

/// Settings for a converged FRB fit on this hardware: the covariance is
/// adapted once at iteration 3000 from the preceding 2000 draws.
fn frb_chain_config(n_iter: usize, seed: u64) -> ChainConfig {
    ChainConfig { n_iter, burn_in: 3000, adapt_at: 3000, adapt_window: Some(2000), seed, ..Default::default() }
}

fn c1_berman_exactness() -> Outcome {
    let t = Instant::now();
    let m = IntensityModel::homogeneous(Domain::unit_square(), 100.0).map_err(|e| e.to_string())?;
    let q = ContactQuery::new(Point::new([0.5, 0.5]), 0.05, 1).map_err(|e| e.to_string())?;
    let p = berman_cdf(&m, &q, 4096, 1).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let want = 1.0 - (-std::f64::consts::PI * 0.25f64).exp();
    let ok = (p.value - want).abs() <= 3.0 * p.std_error + 1e-12
        && (p.value - 0.5441).abs() < 5e-5
        && elapsed < Duration::from_secs(1);
    check(ok, format!("P = {:.6} ± {:.1e} (analytic {want:.6}), {elapsed:?}", p.value, p.std_error))
}

fn c2_c3_bound_validation() -> (Outcome, Outcome) {
    let t = Instant::now();
    let cfg = BoundValidationConfig { sigma: 1e-3, n_test_points: 500, n_replicates: 5000, seed: 2024, ..Default::default() };
    let mut violations = Vec::new();
    let mut worst_ratio = 0.0_f64;
    let mut n_ratio = 0;
    let mut ratio_ok = true;
    for (name, model) in [("gaussian", IntensityModel::benchmark_gaussian()), ("mixture", IntensityModel::benchmark_mixture())] {
        let table = match bound_validation_experiment(&model, &cfg) {
            Ok(t) => t,
            Err(e) => return (Err(e.to_string()), Err(e.to_string())),
        };
        violations.push(format!("{name}: {}", table.dominance_violations));
        for row in table.rows.iter().filter(|r| r.hits >= 10) {
            let r = row.ratio.unwrap_or(f64::INFINITY);
            n_ratio += 1;
            worst_ratio = worst_ratio.max(r);
            ratio_ok &= (0.0..=15.0).contains(&r);
        }
        if table.dominance_violations > 0 {
            return (
                Err(format!("dominance violations {}", violations.join(", "))),
                check(ratio_ok, format!("max ratio {worst_ratio:.2} over {n_ratio} rows")),
            );
        }
    }
    let elapsed = t.elapsed();
    (
        check(true, format!("violations {} (2 × 500 points × 5000 replicates, {elapsed:?})", violations.join(", "))),
        check(ratio_ok && n_ratio > 0, format!("bound/frequency in [0, {worst_ratio:.2}] over {n_ratio} rows with ≥ 10 hits")),
    )
}

fn c4_iid_vs_general() -> Outcome {
    let models = [IntensityModel::benchmark_gaussian(), IntensityModel::benchmark_mixture()];
    let mut rng = XorShift(0x5eed_0004);
    let mut worst = 0.0_f64;
    for i in 0..20 {
        let m = &models[i % 2];
        let center = Point::new([0.15 + 0.7 * rng.next_f64(), 0.15 + 0.7 * rng.next_f64()]);
        let radius = 0.005 + 0.03 * rng.next_f64();
        let k = 2 + (rng.next_f64() * 3.0) as usize;
        let sigma = 0.002 + 0.02 * rng.next_f64();
        let noise = NoiseModel::isotropic(2, sigma).map_err(|e| e.to_string())?;
        let q = ContactQuery::new(center, radius, k).map_err(|e| e.to_string())?;
        let iid = contact_bound_iid(m, &noise, &q, 96, 50_000, derive_seed(4, i as u64)).map_err(|e| e.to_string())?;
        let gen = contact_bound(m, &vec![noise; k], &q, 20_000, 2000, derive_seed(40, i as u64)).map_err(|e| e.to_string())?;
        let z = (iid.value - gen.value).abs() / (iid.std_error.powi(2) + gen.std_error.powi(2)).sqrt().max(1e-300);
        let z = if iid.value == gen.value { 0.0 } else { z };
        worst = worst.max(z);
    }
    check(worst <= 3.0, format!("max |Δ| / combined SE = {worst:.2} over 20 configurations"))
}

fn c5_coverage() -> Outcome {
    let full = std::env::var("NHPP_FULL_ACCEPTANCE").is_ok_and(|v| v == "1");
    let (n_rep, n_chains, n_iter, need) = if full { (10, 4, 20_000, 7) } else { (2, 2, 8000, 1) };
    let config = CoverageConfig {
        n_replicates: n_rep,
        theta_star: frb_theta_star(),
        n_chains,
        chain: frb_chain_config(n_iter, 0),
        level: 0.9,
        seed: 55,
    };
    let table = coverage_study(&FrbFamily::default(), &Hyperprior::frb_default(), &config, frb_synthetic_noise(0.2, (0.4, 3.0)))
        .map_err(|e| e.to_string())?;
    let ok = table.counts.iter().all(|&c| c >= need);
    let mode = if full { "full" } else { "smoke" };
    check(ok, format!("{mode}: covered {:?} of {n_rep} (need ≥ {need} each)", table.counts))
}

fn c6_convergence() -> Outcome {
    let fam = FrbFamily::default();
    let truth = fam.build(&frb_theta_star()).map_err(|e| e.to_string())?;
    let ds = make_dataset_with(&truth, 1, frb_synthetic_noise(0.2, (0.4, 3.0))).map_err(|e| e.to_string())?;
    let cat = ds.to_catalog(fam.domain()).map_err(|e| e.to_string())?;
    let chains = run_chains(&fam, &cat, &Hyperprior::frb_default(), 4, &frb_chain_config(20_000, 3)).map_err(|e| e.to_string())?;
    let r = diagnose(&chains, 1.01, 400.0).map_err(|e| e.to_string())?;
    let min_ess = r.ess_pooled.iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        r.converged() && r.low_ess.is_empty(),
        format!("{} events, 4 chains: max R̂ = {:.5}, min pooled ESS = {min_ess:.0}", ds.n, r.max_rhat()),
    )
}

fn c7_diagnostic_oracles() -> Outcome {
    let mut rng = rng_from_seed(7);
    let c: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
    let r = gelman_rubin(&[&c, &c, &c, &c]).map_err(|e| e.to_string())?.value;
    let exact = (499.0f64 / 500.0).sqrt();
    let n = 200_000;
    let mut x = 0.0;
    let ar: Vec<f64> = (0..n + 1000)
        .map(|_| {
            x = 0.9 * x + (1.0f64 - 0.81).sqrt() * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .skip(1000)
        .collect();
    let ess = effective_sample_size(&ar).map_err(|e| e.to_string())?.value;
    let want = n as f64 / 19.0;
    check(
        r == exact && (ess - want).abs() < 0.2 * want,
        format!("R̂(identical) = {r} (exact {exact}), AR(1) ESS = {ess:.0} vs n/19 = {want:.0}"),
    )
}

fn c8_noiseless_collapse() -> Outcome {
    let models = [IntensityModel::benchmark_gaussian(), IntensityModel::benchmark_mixture()];
    let mut rng = XorShift(0x5eed_0008);
    let mut worst = 0.0_f64;
    for i in 0..10 {
        let m = &models[i % 2];
        let k = 2 + i % 3;
        let domain = m.domain().clone();
        // a k-point cluster whose bounding sphere defines the query
        let c = [0.2 + 0.6 * rng.next_f64(), 0.2 + 0.6 * rng.next_f64()];
        let pts: Vec<Point> =
            (0..k).map(|_| Point::new([c[0] + 0.03 * (rng.next_f64() - 0.5), c[1] + 0.03 * (rng.next_f64() - 0.5)])).collect();
        let s = min_bounding_sphere(&pts, &domain).map_err(|e| e.to_string())?;
        let q = ContactQuery::new(s.center.clone(), s.radius, k).map_err(|e| e.to_string())?;
        let seed = derive_seed(8, i as u64);
        let degenerate = NoiseModel::Degenerate { dim: 2 };
        let exact = berman_cdf(m, &q, 200_000, seed).map_err(|e| e.to_string())?;
        let gen = contact_bound(m, &vec![degenerate.clone(); k], &q, 100, 20_000, seed + 1).map_err(|e| e.to_string())?;
        let iid = contact_bound_iid(m, &degenerate, &q, 64, 200_000, seed + 2).map_err(|e| e.to_string())?;
        let cluster: Vec<CatalogEvent> = pts
            .iter()
            .enumerate()
            .map(|(j, p)| CatalogEvent { id: format!("p{j}"), observed: p.clone(), noise: degenerate.clone(), cluster: None })
            .collect();
        let cfg = PcConfig { n_rep: 20, n_inner: 200_000, seed: seed + 3, ..Default::default() };
        let sim = simulate_pc(&FixedFamily::new(m.clone()), &[vec![]], &cluster, &cfg).map_err(|e| e.to_string())?;
        let sim_p = Probability { value: sim.replicates[0], std_error: exact.std_error, raw: sim.replicates[0] };
        if sim.replicates.iter().any(|&v| v != sim.replicates[0]) {
            return Err(format!("query {i}: noiseless replicates differ"));
        }
        for other in [gen, iid, sim_p] {
            let se = (exact.std_error.powi(2) + other.std_error.powi(2)).sqrt();
            let z = if other.value == exact.value { 0.0 } else { (other.value - exact.value).abs() / se.max(1e-300) };
            worst = worst.max(z);
        }
    }
    check(worst <= 3.0, format!("max |Δ| / SE = {worst:.2} over 10 queries × 3 estimators"))
}

fn c9_planted_cluster() -> Outcome {
    let model = IntensityModel::benchmark_gaussian();
    let domain = model.domain().clone();
    let pts = vec![Point::new([0.640, 0.610]), Point::new([0.662, 0.618]), Point::new([0.650, 0.632])];
    let sphere = min_bounding_sphere(&pts, &domain).map_err(|e| e.to_string())?;
    let cluster: Vec<CatalogEvent> = pts
        .iter()
        .enumerate()
        .map(|(j, p)| CatalogEvent {
            id: format!("planted{j}"),
            observed: p.clone(),
            noise: NoiseModel::Degenerate { dim: 2 },
            cluster: Some("planted".into()),
        })
        .collect();
    let cfg = PcConfig { n_rep: 200, n_inner: 1_000_000, seed: 9, ..Default::default() };
    let sim = simulate_pc(&FixedFamily::new(model.clone()), &[vec![]], &cluster, &cfg).map_err(|e| e.to_string())?;

    let n_data = 100_000;
    let sampler = PositionSampler::new(&model);
    let hits: usize = (0..n_data)
        .into_par_iter()
        .map(|i| -> Result<usize, String> {
            let mut rng = stream_rng(99, i as u64);
            let n = sample_count(&model, &mut rng) as usize;
            let xs = sampler.sample(n, &mut rng).map_err(|e| e.to_string())?;
            let inside = xs.iter().filter(|x| domain.norm(&domain.displacement(&sphere.center, x)) <= sphere.radius).count();
            Ok(usize::from(inside >= 3))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let freq = hits as f64 / n_data as f64;
    let se = (freq * (1.0 - freq) / n_data as f64).sqrt();
    check(
        (sim.median - freq).abs() <= 3.0 * se,
        format!("simulate_pc median {:.5} vs brute force {freq:.5} ± {se:.5} (r = {:.5})", sim.median, sphere.radius),
    )
}

fn c10_bounding_sphere() -> Outcome {
    let mut rng = XorShift(0x5eed_0010);
    let mut worst = 0.0_f64;
    for trial in 0..1000 {
        let dim = 2 + trial % 2;
        let n = 1 + (rng.next_f64() * 8.0) as usize;
        let weights: Vec<f64> = (0..dim).map(|_| 0.5 + rng.next_f64()).collect();
        let domain = Domain::with_options(vec![0.0; dim], vec![1.0; dim], weights.clone(), false).map_err(|e| e.to_string())?;
        let raw: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.next_f64()).collect()).collect();
        let embedded: Vec<Vec<f64>> = raw.iter().map(|p| p.iter().zip(&weights).map(|(x, w)| x * w).collect()).collect();
        let want = support_set_radius(&embedded);
        let points: Vec<Point> = raw.into_iter().map(Point::new).collect();
        let got = min_bounding_sphere(&points, &domain).map_err(|e| e.to_string())?.radius;
        let rel = if want == 0.0 { got } else { (got - want).abs() / want };
        worst = worst.max(rel);
    }
    check(worst <= 1e-9, format!("max relative radius error {worst:.2e} over 1000 instances"))
}

fn c11_comparison_arithmetic() -> Outcome {
    let result = |id: &str, pc: f64| ContactResult {
        id: id.into(),
        k: 2,
        center: vec![0.0; 3],
        radius: 1.0,
        metric_weights: vec![1.0; 3],
        bound: Probability { value: 2.0 * pc, std_error: 0.0, raw: 2.0 * pc },
        simulated: Some(SimulatedPc { median: pc, lower: pc, upper: pc, replicates: vec![pc] }),
        count_scaling: 1.0,
        n_outer: 1,
        n_inner: 1,
        seed: 0,
    };
    let results = vec![result("a", 1e-6), result("b", 1e-3), result("c", 0.5), result("d", 1e-4)];
    let previous: BTreeMap<String, f64> =
        [("a", 3e-3), ("b", 1e-2), ("c", 0.1), ("d", 0.4)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let cmp = compare_with_previous(&results, &previous);
    // ratios 3000, 10, 0.2, 4000: median (10 + 3000) / 2, three improved
    let ok = cmp.n_improved == 3
        && (cmp.median_ratio.unwrap_or(f64::NAN) - 1505.0).abs() < 1e-9
        && cmp.unmatched.is_empty();
    check(
        ok,
        format!(
            "comparison arithmetic (improved {}, median ratio {:?}); real-catalog results are not reproducible without the survey data",
            cmp.n_improved, cmp.median_ratio
        ),
    )
}

fn report(id: &str, name: &str, outcome: &Outcome, failures: &mut usize) {
    match outcome {
        Ok(d) => println!("PASS criterion {id}: {name}: {d}"),
        Err(d) => {
            *failures += 1;
            println!("FAIL criterion {id}: {name}: {d}");
        }
    }
}

fn main() {
    let mut failures = 0;
    report("1", "Berman exactness", &c1_berman_exactness(), &mut failures);
    let (c2, c3) = c2_c3_bound_validation();
    report("2", "bound dominance", &c2, &mut failures);
    report("3", "bound tightness", &c3, &mut failures);
    report("4", "i.i.d./general bound agreement", &c4_iid_vs_general(), &mut failures);
    report("5", "MCMC coverage", &c5_coverage(), &mut failures);
    report("6", "convergence diagnostics", &c6_convergence(), &mut failures);
    report("7", "diagnostic oracles", &c7_diagnostic_oracles(), &mut failures);
    report("8", "noiseless collapse", &c8_noiseless_collapse(), &mut failures);
    report("9", "planted-cluster P_C", &c9_planted_cluster(), &mut failures);
    report("10", "minimal bounding sphere", &c10_bounding_sphere(), &mut failures);
    report("11", "real-data comparison (substituted)", &c11_comparison_arithmetic(), &mut failures);
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
