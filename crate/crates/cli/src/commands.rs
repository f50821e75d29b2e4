//! One function per subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nhpp_core::contact::{
    compare_with_previous, contact_bound_posterior, format_probability, quantile_sorted,
    simulate_pc, ContactQuery, ContactResult, PcConfig,
};
use nhpp_core::diagnostics::{diagnose, DiagnosticsReport};
use nhpp_core::mcmc::{
    coverage_study, frb_synthetic_noise, run_chains, CoverageConfig, FixedFamily, FrbFamily, HomogeneousFamily,
    Hyperprior, IntensityFamily, PosteriorChain,
};
use nhpp_core::noise::DEFAULT_MAX_RETRIES;
use nhpp_core::rng::{derive_seed, SimRng};
use nhpp_core::simulate::{bound_validation_experiment, make_dataset_with, BoundValidationConfig};
use nhpp_core::{CatalogEvent, Domain, EventCatalog, NoiseModel};
use serde::{Deserialize, Serialize};

use crate::catalog_file::{read_catalog, write_catalog, CatalogLayout};
use crate::chain_file::{chain_file_name, read_chain, write_chain, ChainMeta};
use crate::config::{config_hash, FamilySpec, NoiseSpec, RunConfig};
use crate::error::{config_err, data_err, CliError, CliResult, Context};
use crate::io::{check_header, file_hash, header_line, join_f64, read_text, sha256_hex, to_json_report, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub theta: Vec<f64>,
    pub model: nhpp_core::intensity::ModelSpec,
    pub model_hash: String,
    pub config_hash: String,
    pub n_events: usize,
    pub noiseless: bool,
    pub catalog: String,
    pub catalog_sha256: String,
    pub truth: String,
    pub truth_sha256: String,
}

type NoiseFn = Box<dyn FnMut(usize, &mut SimRng) -> nhpp_core::Result<NoiseModel>>;

fn noise_sampler(spec: &NoiseSpec, dim: usize) -> CliResult<NoiseFn> {
    let fixed = |m: NoiseModel| -> CliResult<NoiseFn> {
        m.validate().config("simulate.noise")?;
        Ok(Box::new(move |_, _| Ok(m.clone())))
    };
    match spec {
        NoiseSpec::None => fixed(NoiseModel::Degenerate { dim }),
        NoiseSpec::Isotropic { sigma } => fixed(NoiseModel::isotropic(dim, *sigma).config("simulate.noise")?),
        NoiseSpec::Gaussian { sigma } => {
            if sigma.len() != dim {
                return Err(config_err(format!("simulate.noise: {} sigmas for a {dim}D model", sigma.len())));
            }
            fixed(NoiseModel::Gaussian { sigma: sigma.clone() })
        }
        NoiseSpec::Frb { position_sigma, dm_sigma } => {
            let ok = dim == 3
                && position_sigma.is_finite()
                && *position_sigma > 0.0
                && dm_sigma[0] > 0.0
                && dm_sigma[0] <= dm_sigma[1]
                && dm_sigma[1].is_finite();
            if !ok {
                return Err(config_err("simulate.noise: frb noise needs a 3D model, sigma > 0 and 0 < dm_sigma[0] <= dm_sigma[1]"));
            }
            Ok(Box::new(frb_synthetic_noise(*position_sigma, (dm_sigma[0], dm_sigma[1]))))
        }
    }
}

pub fn simulate(cfg: &RunConfig, seed: u64) -> CliResult<()> {
    let sc = cfg.section(&cfg.simulate, "simulate")?;
    let model = sc.model.build().config("simulate.model")?;
    let domain = model.domain().clone();
    let dim = domain.dim();
    let mut layout = CatalogLayout::default_for(&domain);
    if let Some(axes) = &sc.axes {
        if axes.len() != dim {
            return Err(config_err(format!("simulate.axes: {} names for a {dim}D model", axes.len())));
        }
        layout.axes = axes.clone();
    }
    if let Some(l) = sc.loc_dims {
        if l == 0 || l > dim {
            return Err(config_err(format!("simulate.loc_dims must be in 1..={dim}")));
        }
        layout.loc_dims = l;
    }
    let dataset = make_dataset_with(&model, seed, noise_sampler(&sc.noise, dim)?).data("simulation")?;
    let catalog = dataset.to_catalog(&domain).data("simulated catalog")?;
    let truth_events = catalog
        .events
        .iter()
        .zip(&dataset.true_positions)
        .map(|(e, p)| CatalogEvent { id: e.id.clone(), observed: p.clone(), noise: NoiseModel::Degenerate { dim }, cluster: None })
        .collect();
    let truth = EventCatalog::new(domain, truth_events).data("true positions")?;

    let out = cfg.resolve(&sc.out_dir);
    let catalog_path = out.join("catalog.csv");
    let truth_path = out.join("truth.csv");
    write_catalog(&catalog_path, &catalog, &layout)?;
    write_catalog(&truth_path, &truth, &layout)?;
    let manifest = Manifest {
        seed,
        theta: dataset.theta.clone(),
        model: sc.model.clone(),
        model_hash: sha256_hex(serde_json::to_string(&sc.model).config("model")?.as_bytes()),
        config_hash: config_hash("simulate", sc, seed),
        n_events: dataset.n,
        noiseless: dataset.is_noiseless(),
        catalog: "catalog.csv".into(),
        catalog_sha256: file_hash(&catalog_path)?,
        truth: "truth.csv".into(),
        truth_sha256: file_hash(&truth_path)?,
    };
    write_atomic(&out.join("manifest.json"), &to_json_report("nhpp-manifest", 1, &manifest)?)?;
    println!("simulated {} events (seed {seed}) into {}", dataset.n, out.display());
    Ok(())
}

fn build_family(spec: &FamilySpec, domain: &Domain) -> CliResult<Box<dyn IntensityFamily>> {
    Ok(match spec {
        FamilySpec::Frb => {
            if domain.dim() != 3 {
                return Err(config_err(format!("the frb family needs a 3D catalog, got {}D", domain.dim())));
            }
            Box::new(FrbFamily::new(domain.clone()))
        }
        FamilySpec::Homogeneous => Box::new(HomogeneousFamily::new(domain.clone())),
        FamilySpec::Fixed { model } => {
            let m = model.build().config("family.model")?;
            if m.domain() != domain {
                return Err(config_err("family.model domain differs from the catalog domain"));
            }
            Box::new(FixedFamily::new(m))
        }
    })
}

fn write_diagnostics(out: &Path, report: &DiagnosticsReport, hash: &str) -> CliResult<()> {
    #[derive(Serialize)]
    struct Body<'a> {
        config_hash: &'a str,
        converged: bool,
        max_rhat: f64,
        report: &'a DiagnosticsReport,
    }
    let body = Body { config_hash: hash, converged: report.converged(), max_rhat: report.max_rhat(), report };
    write_atomic(&out.join("diagnostics.json"), &to_json_report("nhpp-diagnostics", 1, &body)?)?;
    let mut s = format!("{}\nparam,rhat,split_rhat,ess_pooled,rhat_exceeded,low_ess\n", header_line("diagnostics", 1));
    for (j, name) in report.param_names.iter().enumerate() {
        s.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            report.rhat[j],
            report.split_rhat[j],
            report.ess_pooled[j],
            report.rhat_exceeded.contains(name),
            report.low_ess.contains(name)
        ));
    }
    write_atomic(&out.join("diagnostics.csv"), s.as_bytes())
}

fn finish_diagnostics(report: &DiagnosticsReport) -> CliResult<()> {
    print!("{}", report.to_table());
    for w in &report.chain_warnings {
        eprintln!("warning: {w}");
    }
    if !report.low_ess.is_empty() {
        eprintln!("warning: pooled ESS below {} for {}", report.min_ess, report.low_ess.join(", "));
    }
    if report.converged() {
        Ok(())
    } else {
        Err(CliError::Convergence(format!(
            "R̂ above {} for {} (max {:.5})",
            report.rhat_threshold,
            report.rhat_exceeded.join(", "),
            report.max_rhat()
        )))
    }
}

pub fn fit(cfg: &RunConfig, seed: u64) -> CliResult<()> {
    let fc = cfg.section(&cfg.fit, "fit")?;
    if matches!(fc.family, FamilySpec::Fixed { .. }) {
        return Err(config_err("fit: the fixed family has no parameters"));
    }
    let ch = &fc.chain;
    if ch.n_chains < 2 {
        return Err(config_err("fit: R̂ needs n_chains >= 2"));
    }
    if ch.thin == 0 || ch.n_iter <= ch.burn_in || (ch.n_iter - ch.burn_in).div_ceil(ch.thin) < 8 {
        return Err(config_err("fit: need thin >= 1 and at least 8 kept draws per chain"));
    }
    let catalog_path = cfg.resolve(&fc.catalog);
    let cf = read_catalog(&catalog_path)?;
    let catalog_hash = file_hash(&catalog_path)?;
    let family = build_family(&fc.family, &cf.catalog.domain)?;
    let prior = match &fc.prior {
        Some(m) => Hyperprior::new(family.param_names(), m.clone()).config("fit.prior")?,
        None if matches!(fc.family, FamilySpec::Frb) => Hyperprior::frb_default(),
        None => return Err(config_err("fit.prior is required for this family")),
    };
    let chains = run_chains(family.as_ref(), &cf.catalog, &prior, ch.n_chains, &ch.chain_config(seed)).data("sampling")?;
    let hash = config_hash("fit", fc, seed);
    let out = cfg.resolve(&fc.out_dir);
    for c in &chains {
        let meta = ChainMeta::of(c, &hash, &catalog_hash);
        write_chain(&out.join(chain_file_name(c.chain_index, fc.format)), c, &meta, fc.format)?;
    }
    let report = diagnose(&chains, fc.rhat_threshold, fc.min_ess).data("diagnostics")?;
    write_diagnostics(&out, &report, &hash)?;
    finish_diagnostics(&report)
}

fn load_chains(cfg: &RunConfig, paths: &[PathBuf]) -> CliResult<Vec<(PosteriorChain, ChainMeta)>> {
    if paths.is_empty() {
        return Err(config_err("no chain files given"));
    }
    paths
        .iter()
        .map(|p| read_chain(&cfg.resolve(p)).map(|s| (s.chain, s.meta)))
        .collect()
}

/// Pooled draws, evenly thinned to at most `max_draws`.
fn pooled_draws(chains: &[(PosteriorChain, ChainMeta)], max_draws: Option<usize>) -> Vec<Vec<f64>> {
    let all: Vec<Vec<f64>> = chains.iter().flat_map(|(c, _)| c.draws.iter().cloned()).collect();
    match max_draws {
        Some(m) if m > 0 && all.len() > m => (0..m).map(|i| all[i * all.len() / m].clone()).collect(),
        _ => all,
    }
}

fn read_previous(path: &Path) -> CliResult<BTreeMap<String, f64>> {
    let text = read_text(path)?;
    check_header(text.lines().next(), "previous", 1, path)?;
    let body = text.split_once('\n').map_or("", |(_, b)| b);
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let ctx = |m: String| data_err(format!("{}: {m}", path.display()));
    let header: Vec<String> = rdr.headers().map_err(|e| ctx(e.to_string()))?.iter().map(String::from).collect();
    if header != ["id", "pc"] {
        return Err(ctx(format!("expected columns id,pc, got {header:?}")));
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx(e.to_string()))?;
        let v: f64 = rec[1].trim().parse().map_err(|e| ctx(format!("{:?}: {e}", &rec[1])))?;
        if out.insert(rec[0].to_string(), v).is_some() {
            return Err(ctx(format!("duplicate id {:?}", &rec[0])));
        }
    }
    Ok(out)
}

pub fn pc(cfg: &RunConfig, seed: u64) -> CliResult<()> {
    let pcs = cfg.section(&cfg.pc, "pc")?;
    if pcs.n_outer == 0 || pcs.n_inner == 0 || pcs.n_rep == 0 {
        return Err(config_err("pc: n_outer, n_inner and n_rep must be >= 1"));
    }
    if !(pcs.count_scaling.is_finite() && pcs.count_scaling > 0.0) {
        return Err(config_err("pc: count_scaling must be > 0"));
    }
    let catalog_path = cfg.resolve(&pcs.catalog);
    let cf = read_catalog(&catalog_path)?;
    let catalog_hash = file_hash(&catalog_path)?;
    let domain = cf.catalog.domain.clone();
    let family = build_family(&pcs.family, &domain)?;
    let draws = if matches!(pcs.family, FamilySpec::Fixed { .. }) {
        vec![Vec::new()]
    } else {
        let chains = load_chains(cfg, &pcs.chains)?;
        for (c, meta) in &chains {
            if c.param_names != family.param_names() {
                return Err(data_err(format!("chain parameters {:?} do not match the family", c.param_names)));
            }
            if meta.catalog_hash != catalog_hash {
                eprintln!("warning: chain {} was fitted to a different catalog", meta.chain_index);
            }
        }
        pooled_draws(&chains, pcs.max_draws)
    };
    if draws.is_empty() {
        return Err(data_err("the chains hold no posterior draws"));
    }
    let clusters = cf.catalog.clusters();
    if clusters.is_empty() {
        return Err(data_err("the catalog has no cluster labels"));
    }
    if let Some((label, _)) = clusters.iter().find(|(_, idx)| idx.len() < 2) {
        return Err(data_err(format!("cluster {label:?} has a single event; clusters need at least 2")));
    }

    let mut results = Vec::new();
    for (i, (label, idx)) in clusters.iter().enumerate() {
        let events: Vec<CatalogEvent> = idx.iter().map(|&j| cf.catalog.events[j].clone()).collect();
        let points: Vec<_> = events.iter().map(|e| e.observed.clone()).collect();
        let noises: Vec<NoiseModel> = events.iter().map(|e| e.noise.clone()).collect();
        let q = ContactQuery::from_cluster(&points, &domain).data(label)?;
        let bound_seed = derive_seed(seed, 2 * i as u64);
        let bound = contact_bound_posterior(
            family.as_ref(),
            &draws,
            pcs.count_scaling,
            &noises,
            &q,
            pcs.n_outer,
            pcs.n_inner,
            bound_seed,
        )
        .data(label)?;
        let pc_config = PcConfig {
            count_scaling: pcs.count_scaling,
            n_rep: pcs.n_rep,
            n_inner: pcs.n_inner,
            seed: derive_seed(seed, 2 * i as u64 + 1),
            max_retries: DEFAULT_MAX_RETRIES,
        };
        let sim = simulate_pc(family.as_ref(), &draws, &events, &pc_config).data(label)?;
        results.push(ContactResult {
            id: label.clone(),
            k: q.k,
            center: q.center.coords().to_vec(),
            radius: q.radius,
            metric_weights: domain.weights().to_vec(),
            bound,
            simulated: Some(sim),
            count_scaling: pcs.count_scaling,
            n_outer: pcs.n_outer,
            n_inner: pcs.n_inner,
            seed: bound_seed,
        });
    }

    let hash = config_hash("pc", pcs, seed);
    let out = cfg.resolve(&pcs.out_dir);
    let mut s = format!(
        "{}\nid,k,radius,center,bound,bound_se,pc_median,pc_lower,pc_upper,significant\n",
        header_line("pc", 1)
    );
    println!("{:<12} {:>3} {:>14} {:>14} {:>14}", "cluster", "k", "radius", "bound", "pc_median");
    for r in &results {
        let sim = r.simulated.as_ref().expect("simulated");
        let significant = pcs.significance.map_or(String::new(), |t| (sim.median < t).to_string());
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.id,
            r.k,
            r.radius,
            join_f64(&r.center, ";"),
            r.bound.value,
            r.bound.std_error,
            sim.median,
            sim.lower,
            sim.upper,
            significant
        ));
        println!(
            "{:<12} {:>3} {:>14.6e} {:>14} {:>14}",
            r.id,
            r.k,
            r.radius,
            format_probability(r.bound.value),
            format_probability(sim.median)
        );
    }
    write_atomic(&out.join("pc.csv"), s.as_bytes())?;
    #[derive(Serialize)]
    struct Body<'a> {
        config_hash: &'a str,
        catalog_sha256: &'a str,
        results: &'a [ContactResult],
    }
    let body = Body { config_hash: &hash, catalog_sha256: &catalog_hash, results: &results };
    write_atomic(&out.join("pc.json"), &to_json_report("nhpp-pc", 1, &body)?)?;

    if let Some(prev) = &pcs.previous {
        let previous = read_previous(&cfg.resolve(prev))?;
        let cmp = compare_with_previous(&results, &previous);
        let mut s = format!("{}\nid,pc,bound,previous,ratio\n", header_line("comparison", 1));
        for row in &cmp.rows {
            let ratio = row.ratio.map_or(String::new(), |r| r.to_string());
            s.push_str(&format!("{},{},{},{},{ratio}\n", row.id, row.pc, row.bound, row.previous));
        }
        write_atomic(&out.join("comparison.csv"), s.as_bytes())?;
        write_atomic(&out.join("comparison.json"), &to_json_report("nhpp-comparison", 1, &cmp)?)?;
        println!(
            "{} of {} matched clusters improved; median previous/new ratio {}",
            cmp.n_improved,
            cmp.rows.len(),
            cmp.median_ratio.map_or("n/a".to_string(), |m| format!("{m:.4e}"))
        );
        if !cmp.unmatched.is_empty() {
            eprintln!("warning: unmatched identifiers: {}", cmp.unmatched.join(", "));
        }
    }
    Ok(())
}

fn sigma_tag(s: f64) -> String {
    format!("{s:e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub model: String,
    pub sigma: f64,
    pub n_points: usize,
    pub n_replicates: usize,
    pub violations: usize,
    pub ratio_rows: usize,
    pub ratio_min: f64,
    pub ratio_median: f64,
    pub ratio_p90: f64,
    pub ratio_max: f64,
}

pub fn validate_bound(cfg: &RunConfig, seed: u64) -> CliResult<()> {
    let vb = cfg.section(&cfg.validate_bound, "validate_bound")?;
    if vb.models.is_empty() || vb.sigmas.is_empty() {
        return Err(config_err("validate_bound: need at least one model and one sigma"));
    }
    if let Some(s) = vb.sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(config_err(format!("validate_bound: invalid sigma {s}")));
    }
    let out = cfg.resolve(&vb.out_dir);
    let mut summaries = Vec::new();
    for (mi, named) in vb.models.iter().enumerate() {
        let model = named.model.build().config(&format!("validate_bound model {:?}", named.name))?;
        for (si, &sigma) in vb.sigmas.iter().enumerate() {
            let cell = (mi * vb.sigmas.len() + si) as u64;
            let config = BoundValidationConfig {
                sigma,
                radius: vb.radius,
                k: vb.k,
                n_test_points: vb.n_test_points,
                n_replicates: vb.n_replicates,
                test_points: vb.test_points,
                n_grid: vb.n_grid,
                n_inner: vb.n_inner,
                seed: derive_seed(seed, cell),
            };
            let table = bound_validation_experiment(&model, &config).data("bound validation")?;
            let dim = model.dim();
            let mut s = format!("{}\n", header_line("bound-cell", 1));
            let mut cols: Vec<String> = (0..dim).map(|i| format!("s0_{i}")).collect();
            cols.extend(["intensity", "hits", "frequency", "bound", "bound_se", "ratio", "violation"].map(String::from));
            s.push_str(&cols.join(","));
            s.push('\n');
            for row in &table.rows {
                let ratio = row.ratio.map_or(String::new(), |r| r.to_string());
                s.push_str(&format!(
                    "{},{},{},{},{},{},{ratio},{}\n",
                    join_f64(&row.s0, ","),
                    row.intensity,
                    row.hits,
                    row.frequency,
                    row.bound,
                    row.bound_std_error,
                    row.violates(vb.n_replicates)
                ));
            }
            write_atomic(&out.join(format!("{}_sigma_{}.csv", named.name, sigma_tag(sigma))), s.as_bytes())?;
            let mut ratios: Vec<f64> =
                table.rows.iter().filter(|r| r.hits >= vb.min_hits).filter_map(|r| r.ratio).collect();
            ratios.sort_by(f64::total_cmp);
            summaries.push(CellSummary {
                model: named.name.clone(),
                sigma,
                n_points: table.rows.len(),
                n_replicates: vb.n_replicates,
                violations: table.dominance_violations,
                ratio_rows: ratios.len(),
                ratio_min: quantile_sorted(&ratios, 0.0),
                ratio_median: quantile_sorted(&ratios, 0.5),
                ratio_p90: quantile_sorted(&ratios, 0.9),
                ratio_max: quantile_sorted(&ratios, 1.0),
            });
        }
    }
    let mut s = format!(
        "{}\nmodel,sigma,n_points,n_replicates,violations,ratio_rows,ratio_min,ratio_median,ratio_p90,ratio_max\n",
        header_line("bound-summary", 1)
    );
    for c in &summaries {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.model,
            c.sigma,
            c.n_points,
            c.n_replicates,
            c.violations,
            c.ratio_rows,
            c.ratio_min,
            c.ratio_median,
            c.ratio_p90,
            c.ratio_max
        ));
        println!(
            "{:<10} sigma={:<8} violations={} ratio median={:.3} max={:.3}",
            c.model,
            sigma_tag(c.sigma),
            c.violations,
            c.ratio_median,
            c.ratio_max
        );
    }
    write_atomic(&out.join("summary.csv"), s.as_bytes())?;
    let body = serde_json::json!({ "config_hash": config_hash("validate_bound", vb, seed), "cells": summaries });
    write_atomic(&out.join("summary.json"), &to_json_report("nhpp-bound-summary", 1, &body)?)
}

pub fn coverage(cfg: &RunConfig, seed: u64) -> CliResult<()> {
    let cs = cfg.section(&cfg.coverage, "coverage")?;
    let prior = Hyperprior::frb_default();
    if cs.theta_star.len() != prior.dim() || !prior.in_support(&cs.theta_star) {
        return Err(config_err(format!("coverage.theta_star {:?} is outside the prior support", cs.theta_star)));
    }
    if !(0.0 < cs.level && cs.level < 1.0) {
        return Err(config_err("coverage.level must be in (0, 1)"));
    }
    let [lo, hi] = cs.dm_sigma;
    if !(cs.position_sigma > 0.0 && lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(config_err("coverage: need position_sigma > 0 and 0 < dm_sigma[0] <= dm_sigma[1]"));
    }
    if cs.chain.n_chains == 0 || cs.chain.n_iter <= cs.chain.burn_in {
        return Err(config_err("coverage.chain: need n_chains >= 1 and n_iter > burn_in"));
    }
    let config = CoverageConfig {
        n_replicates: cs.n_replicates,
        theta_star: cs.theta_star.clone(),
        n_chains: cs.chain.n_chains,
        chain: cs.chain.chain_config(0),
        level: cs.level,
        seed,
    };
    let table = coverage_study(&FrbFamily::default(), &prior, &config, frb_synthetic_noise(cs.position_sigma, (lo, hi)))
        .data("coverage study")?;

    let out = cfg.resolve(&cs.out_dir);
    let mut s = format!("{}\nparam,theta_star,covered,n_replicates,level\n", header_line("coverage", 1));
    for (j, name) in table.param_names.iter().enumerate() {
        s.push_str(&format!("{name},{},{},{},{}\n", table.theta_star[j], table.counts[j], table.n_replicates, table.level));
        println!("{name:<8} {}/{}", table.counts[j], table.n_replicates);
    }
    write_atomic(&out.join("coverage.csv"), s.as_bytes())?;
    let mut s = format!("{}\nreplicate,n_events,max_rhat", header_line("coverage-rows", 1));
    for name in &table.param_names {
        s.push_str(&format!(",{name}_lower,{name}_upper,{name}_covered"));
    }
    s.push('\n');
    for row in &table.rows {
        s.push_str(&format!("{},{},{}", row.replicate, row.n_events, row.max_rhat));
        for j in 0..table.param_names.len() {
            s.push_str(&format!(",{},{},{}", row.lower[j], row.upper[j], row.covered[j]));
        }
        s.push('\n');
    }
    write_atomic(&out.join("coverage_rows.csv"), s.as_bytes())?;
    let body = serde_json::json!({ "config_hash": config_hash("coverage", cs, seed), "table": table });
    write_atomic(&out.join("coverage.json"), &to_json_report("nhpp-coverage", 1, &body)?)
}

pub fn diagnose_chains(cfg: &RunConfig, _seed: u64) -> CliResult<()> {
    let dc = cfg.section(&cfg.diagnose, "diagnose")?;
    let chains: Vec<PosteriorChain> = load_chains(cfg, &dc.chains)?.into_iter().map(|(c, _)| c).collect();
    if chains.len() < 2 {
        return Err(config_err("diagnose: R̂ needs at least 2 chains"));
    }
    let report = diagnose(&chains, dc.rhat_threshold, dc.min_ess).data("diagnostics")?;
    if let Some(out) = &dc.out_dir {
        // the seed does not enter the diagnostics, so it is left out of the hash
        write_diagnostics(&cfg.resolve(out), &report, &config_hash("diagnose", dc, 0))?;
    }
    finish_diagnostics(&report)
}
