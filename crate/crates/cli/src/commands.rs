use std::fmt::Display;
use std::path::Path;

use decompound::adaptive::{calibrate_penalty, default_k_n, ell_lower_bound, select_cutoff_grid, AdaptiveConfig, KnMode, ELL_HEADROOM, M_HAT_STEP, M_HAT_U_MAX};
use decompound::countlaw::{CountLaw, NonvanishingVerdict};
use decompound::ecf::{ecf_on_grid, FrequencyGrid, Provenance, Sample};
use decompound::estimator::{estimate_density_deterministic, estimate_density_from_sample, estimate_m_from_sample};
use decompound::simulate::{
    compound_from_density, fit_two_point, grid_search_cutoff, ingest_claims_with, kde, run_experiment, sample_compound, Bandwidth, CutoffChoice, ExperimentConfig,
    GridSearchOptions, IngestMode, IngestOptions, InnovationLaw, NSummary, SimError, SmoothnessClass,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    point_mass, AdaptConfig, CheckConfig, ConfigError, EstimateConfig, Globals, IngestChoice, InputSpec, RealCutoff, RealdataConfig, SimulateConfig,
};
use crate::error::{CliError, Status};
use crate::output::{columns_csv, OutputDir};

pub struct Context {
    pub globals: Globals,
    pub dry_run: bool,
}

fn compute(e: impl Display) -> CliError {
    CliError::Compute(e.to_string())
}

fn config(e: impl Display) -> CliError {
    CliError::Config(ConfigError(e.to_string()))
}

/// Global settings plus the command's own section, in the shape of a config file.
fn resolved(command: &str, globals: &Globals, section: &impl Serialize) -> Value {
    let mut v = serde_json::to_value(globals).expect("globals serialize");
    v["command"] = json!(command);
    v[command] = serde_json::to_value(section).expect("config serializes");
    v
}

fn print_dry_run(resolved: &Value, derived: Value) {
    let doc = json!({ "config": resolved, "derived": derived });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
}

fn read_sample(path: &Path) -> Result<Sample<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut xs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let x: f64 = line.parse().map_err(|_| CliError::Input(format!("{}:{}: not a number: {line:?}", path.display(), i + 1)))?;
        xs.push(x);
    }
    Sample::new(xs, Provenance::Ingested { source: path.display().to_string() }).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_sample(input: &InputSpec, law: &CountLaw<f64>, seed: u64) -> Result<Sample<f64>, CliError> {
    match input {
        InputSpec::File { path } => read_sample(path),
        InputSpec::Generate { xi, n } => {
            if *n == 0 {
                return Err(config("generated sample size must be positive"));
            }
            sample_compound(law, &xi.law()?, *n, seed).map_err(compute)
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summary_csv(buf: &mut Vec<u8>, summary: &[NSummary]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["n", "reps", "failed", "median", "q1", "q3", "max"])?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for s in summary {
        w.write_record([s.n.to_string(), s.reps.to_string(), s.failed.to_string(), opt(s.median), opt(s.q1), opt(s.q3), opt(s.max)])?;
    }
    w.flush()?;
    Ok(())
}

fn class_constant(class: SmoothnessClass) -> f64 {
    match class {
        SmoothnessClass::Smooth { m, .. } | SmoothnessClass::Supersmooth { m, .. } => m,
    }
}

fn simulate_derived(cfg: &SimulateConfig, innovation: &InnovationLaw) -> Value {
    let class = innovation.class_info();
    let m = class.map(class_constant);
    let mean_n = cfg.law.moments().mean;
    let (h, rho0) = match cfg.cutoff {
        CutoffChoice::Adaptive { spec } => (spec.h, spec.rho0),
        _ => (1.0, None),
    };
    let kappa = match rho0 {
        Some(r) => cfg.law.kappa_from_rho0(r),
        None => cfg.law.kappa_symmetric(),
    }
    .ok();
    let ell_bound = kappa.zip(m).and_then(|(k, m)| ell_lower_bound(k, m, mean_n, h).ok());
    let schedule: Vec<Value> = cfg
        .n
        .iter()
        .map(|&n| match cfg.cutoff {
            CutoffChoice::Theory => json!({ "n": n, "u": class.and_then(|c| CutoffChoice::theory_rule(c).cutoff(n).ok()) }),
            CutoffChoice::Rule { rule } => json!({ "n": n, "u": rule.cutoff(n).ok() }),
            CutoffChoice::Adaptive { spec } => {
                let k = spec.k_max.unwrap_or_else(|| default_k_n(n, KnMode::Simulation));
                json!({ "n": n, "k_max": k, "u_max": k as f64 * spec.h })
            }
        })
        .collect();
    json!({ "mean_n": mean_n, "kappa": kappa, "m_class": m, "ell_lower_bound": ell_bound, "u_schedule": schedule })
}

pub fn simulate(ctx: &Context, cfg: &SimulateConfig) -> Result<Status, CliError> {
    let innovation = cfg.xi.law()?;
    let x_grid = cfg.x_grid.values()?;
    let quad = cfg.quad.quadrature()?;
    if cfg.n.is_empty() || cfg.reps == 0 {
        return Err(config("need at least one sample size and one replication"));
    }
    let resolved = resolved("simulate", &ctx.globals, cfg);
    if ctx.dry_run {
        print_dry_run(&resolved, simulate_derived(cfg, &innovation));
        return Ok(Status::Success);
    }
    let mut exp = ExperimentConfig::new(cfg.law.clone(), innovation, cfg.n.clone(), cfg.reps, cfg.cutoff, ctx.globals.seed);
    exp.x_grid = x_grid;
    exp.quad = quad;
    let report = run_experiment(&exp).map_err(|e| match e {
        SimError::InvalidInput(m) => config(m),
        e => compute(e),
    })?;

    let mut out = OutputDir::create(&ctx.globals.output_dir)?;
    if ctx.globals.format.csv() {
        out.write_with("replications.csv", |b| report.write_csv(b))?;
        out.write_with("summary.csv", |b| summary_csv(b, &report.summary))?;
    }
    if ctx.globals.format.json() {
        out.write_json("report.json", &report)?;
    }
    out.finish("simulate", &resolved)?;

    for s in &report.summary {
        let med = s.median.map_or("-".to_string(), |m| format!("{m:.3e}"));
        println!("n = {:>6}  reps = {:>4}  failed = {:>3}  median error = {med}", s.n, s.reps, s.failed);
    }
    if report.failed() > 0 {
        eprintln!("{} of {} replications failed; see the replication records", report.failed(), report.records.len());
        return Ok(Status::Partial);
    }
    Ok(Status::Success)
}

pub fn estimate(ctx: &Context, cfg: &EstimateConfig) -> Result<Status, CliError> {
    let x_grid = cfg.x_grid.values()?;
    let quad = cfg.quad.quadrature()?;
    cfg.cutoff.validate().map_err(config)?;
    let sampling_law = match cfg.deterministic_m {
        Some(m) => point_mass(m)?,
        None => cfg.law.clone(),
    };
    let resolved = resolved("estimate", &ctx.globals, cfg);
    let sample = load_sample(&cfg.input, &sampling_law, ctx.globals.seed)?;
    let n = sample.len();
    let u = cfg.cutoff.cutoff(n).map_err(config)?;
    let estimator = if cfg.deterministic_m.is_some() { "deterministic" } else { "compound" };
    if ctx.dry_run {
        print_dry_run(&resolved, json!({ "n": n, "cutoff": u, "estimator": estimator }));
        return Ok(Status::Success);
    }

    let est = match cfg.deterministic_m {
        Some(m) => {
            let grid = FrequencyGrid::equispaced(u, quad.nodes).map_err(compute)?;
            estimate_density_deterministic(&ecf_on_grid(&sample, &grid), m, u, &x_grid, quad, cfg.modulus_floor)
        }
        None => estimate_density_from_sample(&sample, &cfg.law, u, &x_grid, quad),
    }
    .map_err(compute)?;

    let mut out = OutputDir::create(&ctx.globals.output_dir)?;
    if ctx.globals.format.csv() {
        out.write_with("density.csv", |b| est.write_csv(b))?;
    }
    if ctx.globals.format.json() {
        out.write_json("density.json", &est)?;
    }
    let summary = json!({
        "n": n,
        "estimator": estimator,
        "cutoff": u,
        "quadrature_nodes": est.quadrature_nodes,
        "diagnostics": est.diagnostics,
    });
    out.write_json("summary.json", &summary)?;
    out.finish("estimate", &resolved)?;
    println!(
        "n = {n}  U = {u:.4}  clipped frequencies = {}  max imaginary residue = {:.1e}",
        est.diagnostics.branch_violations, est.diagnostics.max_imag_residue
    );
    Ok(Status::Success)
}

fn k_hat_stats(k: &[usize]) -> Value {
    let min = k.iter().min().copied();
    let max = k.iter().max().copied();
    json!({ "min": min, "median": median(k.iter().map(|&k| k as f64).collect()), "max": max })
}

pub fn adapt(ctx: &Context, cfg: &AdaptConfig) -> Result<Status, CliError> {
    let x_grid = cfg.x_grid.values()?;
    let quad = cfg.quad.quadrature()?;
    let resolved = resolved("adapt", &ctx.globals, cfg);
    let sample = load_sample(&cfg.input, &cfg.law, ctx.globals.seed)?;
    let n = sample.len();
    let k_max = cfg.k_max.unwrap_or_else(|| default_k_n(n, cfg.kn_mode.into()));
    let cal = calibrate_penalty(&sample, &cfg.law, cfg.h, cfg.beta_bar, cfg.rho0).map_err(|e| match e {
        decompound::AdaptiveError::InvalidConfig(m) => config(m),
        e => compute(e),
    })?;
    let ell = cfg.ell.value().unwrap_or(cal.ell);
    let adaptive = AdaptiveConfig { h: cfg.h, k_max, ell, quad };
    adaptive.validate().map_err(config)?;
    let derived = json!({
        "n": n,
        "k_max": k_max,
        "u_max": k_max as f64 * cfg.h,
        "kappa": cal.kappa,
        "m_hat": cal.m_hat,
        "mean_n": cal.mean_n,
        "ell_lower_bound": cal.lower_bound,
        "ell": ell,
    });
    if ctx.dry_run {
        print_dry_run(&resolved, derived);
        return Ok(Status::Success);
    }
    if ell < cal.lower_bound {
        eprintln!("warning: ell = {ell} is below the calibrated lower bound {:.4}", cal.lower_bound);
    }

    let sel = select_cutoff_grid(&sample, &cfg.law, &adaptive, &x_grid).map_err(compute)?;
    let k_hat: Vec<usize> = sel.selections.iter().map(|s| s.k_hat).collect();
    let mut out = OutputDir::create(&ctx.globals.output_dir)?;
    if ctx.globals.format.csv() {
        let kf: Vec<f64> = k_hat.iter().map(|&k| k as f64).collect();
        let cut: Vec<f64> = sel.selections.iter().map(|s| s.cutoff).collect();
        out.write_with("density.csv", |b| columns_csv(b, &["x", "density", "k_hat", "cutoff"], &[&sel.x_grid, &sel.values, &kf, &cut]))?;
    }
    if ctx.globals.format.json() {
        out.write_json("selection.json", &sel)?;
    }
    let mut summary = derived;
    summary["k_hat"] = k_hat_stats(&k_hat);
    summary["branch_violations"] = json!(sel.branch_violations);
    out.write_json("summary.json", &summary)?;
    out.finish("adapt", &resolved)?;
    println!("n = {n}  K = {k_max}  ell = {ell:.4}  median k_hat = {}", summary["k_hat"]["median"]);
    Ok(Status::Success)
}

fn ingest_options(cfg: &RealdataConfig) -> IngestOptions {
    let mode = match cfg.mode {
        IngestChoice::Lenient => IngestMode::Lenient,
        IngestChoice::Strict => IngestMode::Strict,
    };
    IngestOptions { mode, region: cfg.region.clone() }
}

pub fn realdata(ctx: &Context, cfg: &RealdataConfig) -> Result<Status, CliError> {
    let (Some(freq), Some(sev)) = (&cfg.freq, &cfg.sev) else {
        return Err(config("realdata needs both --freq and --sev"));
    };
    let eval = cfg.eval_grid.values()?;
    let quad = cfg.quad.quadrature()?;
    let u_grid = cfg.cutoff.grid()?;
    if cfg.resample_n < 2 || (matches!(cfg.cutoff, RealCutoff::Grid { .. }) && cfg.resamples == 0) {
        return Err(config("need resamples >= 1 and resample_n >= 2"));
    }
    let resolved = resolved("realdata", &ctx.globals, cfg);

    let ds = match ingest_claims_with(freq, sev, &ingest_options(cfg)) {
        Ok(ds) => ds,
        Err(e) => {
            if !ctx.dry_run {
                let mut out = OutputDir::create(&ctx.globals.output_dir)?;
                out.write_json("ingest_error.json", &json!({ "error": e.to_string(), "freq": freq, "sev": sev }))?;
                out.finish("realdata", &resolved)?;
            }
            return Err(CliError::Input(e.to_string()));
        }
    };
    let law = fit_two_point(&ds).map_err(|e| CliError::Input(e.to_string()))?;
    let sample = ds.sample().map_err(|e| CliError::Input(e.to_string()))?;
    let n = sample.len();
    let mean_n = law.moments().mean;
    let kappa = law.kappa_from_rho0(cfg.rho0).map_err(config)?;
    let m_hat = estimate_m_from_sample(&sample, cfg.beta_bar, M_HAT_U_MAX, M_HAT_STEP).map_err(config)?;
    let ell_min = ell_lower_bound(kappa, m_hat, mean_n, cfg.h).map_err(config)?;
    let ell = cfg.ell.value().unwrap_or(ELL_HEADROOM * ell_min);
    let k_max = cfg.k_max.unwrap_or_else(|| default_k_n(n, KnMode::RealData));
    let p_hat = law.pmf(1);
    let rho_star = law.rho_star().ok();
    let mut fit = json!({
        "policies": n,
        "rejected": ds.report.rejected.len(),
        "p_hat": p_hat,
        "rho_star": rho_star,
        "mean_n": mean_n,
        "kappa": kappa,
        "m_hat": m_hat,
        "ell_min": ell_min,
        "ell": ell,
        "k_max": k_max,
    });
    let rho_text = rho_star.map_or("-".to_string(), |r| format!("{r:.4}"));
    println!("policies = {n}  p = {p_hat:.4}  rho* = {rho_text}  kappa = {kappa:.4}  M = {m_hat:.4}  ell_min = {ell_min:.4}");
    if ctx.dry_run {
        print_dry_run(&resolved, json!({ "fit": fit, "cutoff_grid": u_grid }));
        return Ok(Status::Success);
    }

    let mut out = OutputDir::create(&ctx.globals.output_dir)?;
    out.write_json("ingest_report.json", &ds.report)?;
    let (values, chosen) = match cfg.cutoff {
        RealCutoff::Adaptive => {
            let adaptive = AdaptiveConfig { h: cfg.h, k_max, ell, quad };
            adaptive.validate().map_err(config)?;
            let sel = select_cutoff_grid(&sample, &law, &adaptive, &eval).map_err(compute)?;
            let k_hat: Vec<usize> = sel.selections.iter().map(|s| s.k_hat).collect();
            if ctx.globals.format.json() {
                out.write_json("selection.json", &sel)?;
            }
            (sel.values, json!({ "kind": "adaptive", "k_hat": k_hat_stats(&k_hat), "branch_violations": sel.branch_violations }))
        }
        RealCutoff::Fixed { u } => {
            let est = estimate_density_from_sample(&sample, &law, u, &eval, quad).map_err(compute)?;
            (est.values, json!({ "kind": "fixed", "u": u, "diagnostics": est.diagnostics }))
        }
        RealCutoff::Grid { .. } => {
            let opts = GridSearchOptions { eval_grid: eval.clone(), quad, ..Default::default() };
            let gs = grid_search_cutoff(&ds, &law, &u_grid, cfg.resamples, cfg.resample_n, ctx.globals.seed, &opts).map_err(compute)?;
            if ctx.globals.format.csv() {
                out.write_with("gridsearch.csv", |b| -> Result<(), csv::Error> {
                    let mut w = csv::Writer::from_writer(b);
                    w.write_record(["u", "mean_error", "failure"])?;
                    for row in &gs.table {
                        w.write_record([row.u.to_string(), row.mean_error.map(|e| e.to_string()).unwrap_or_default(), row.failure.clone().unwrap_or_default()])?;
                    }
                    w.flush()?;
                    Ok(())
                })?;
            }
            if ctx.globals.format.json() {
                out.write_json("gridsearch.json", &gs)?;
            }
            let est = estimate_density_from_sample(&sample, &law, gs.u_best, &eval, quad).map_err(compute)?;
            println!("grid search: U_best = {}", gs.u_best);
            (est.values, json!({ "kind": "grid", "u_best": gs.u_best, "diagnostics": est.diagnostics }))
        }
    };

    let data_kde = kde(sample.observations(), Bandwidth::Silverman, &eval).map_err(compute)?;
    let model_xs = compound_from_density(&law, &eval, &values, cfg.resample_n, ctx.globals.seed, 0).map_err(compute)?;
    let model_kde = kde(&model_xs, Bandwidth::Silverman, &eval).map_err(compute)?;
    if ctx.globals.format.csv() {
        out.write_with("density.csv", |b| columns_csv(b, &["x", "density"], &[&eval, &values]))?;
        out.write_with("kde_comparison.csv", |b| columns_csv(b, &["x", "data_kde", "model_kde"], &[&eval, &data_kde.values, &model_kde.values]))?;
    }
    if ctx.globals.format.json() {
        out.write_json("density.json", &json!({ "x_grid": eval, "values": values }))?;
        out.write_json("kde_comparison.json", &json!({ "x_grid": eval, "data_kde": data_kde.values, "model_kde": model_kde.values }))?;
    }
    fit["cutoff"] = chosen;
    out.write_json("fit.json", &fit)?;
    out.finish("realdata", &resolved)?;
    Ok(Status::Success)
}

fn describe(verdict: &NonvanishingVerdict<f64>) -> String {
    match verdict {
        NonvanishingVerdict::GuaranteedNoZeros { reason } => format!("GuaranteedNoZeros: {reason}"),
        NonvanishingVerdict::GuaranteedNearAndFar { u_circ } => format!("GuaranteedNearAndFar(u_circ = {u_circ})"),
        NonvanishingVerdict::Inconclusive => "Inconclusive".to_string(),
    }
}

pub fn check(ctx: &Context, cfg: &CheckConfig) -> Result<Status, CliError> {
    let stats = cfg.stats()?;
    let resolved = resolved("check", &ctx.globals, cfg);
    if ctx.dry_run {
        print_dry_run(&resolved, json!({ "stats": stats, "mean_n": cfg.law.moments().mean }));
        return Ok(Status::Success);
    }
    let verdict = cfg.law.check_nonvanishing(&stats).map_err(config)?;
    let line = describe(&verdict);
    println!("{line}");
    let mut out = OutputDir::create(&ctx.globals.output_dir)?;
    out.write_json("check.json", &json!({ "law": cfg.law, "stats": stats, "verdict": verdict, "summary": line }))?;
    out.finish("check", &resolved)?;
    Ok(Status::Success)
}
