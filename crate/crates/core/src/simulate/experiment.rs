use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::innovation::sample_compound_rep;
use super::{quantile_sorted, sorted, InnovationLaw, SimError, SmoothnessClass};
use crate::adaptive::{calibrate_penalty, default_k_n, select_cutoff_grid, AdaptiveConfig, KnMode};
use crate::countlaw::CountLaw;
use crate::ecf::{Provenance, Sample};
use crate::estimator::{estimate_density_from_sample, CutoffRule, DensityEstimate, Quadrature};

/// Scale applied to the polynomial-rate cutoff under [`CutoffChoice::Theory`].
pub const THEORY_POLYNOMIAL_C: f64 = 1.0 / 3.0;

/// `n` equispaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Mean squared error of `estimate` against `truth` over `grid`. Each grid point must be
/// one of the estimate's abscissae (to `1e-12` relative), in any order.
pub fn error_on_grid(estimate: &DensityEstimate<f64>, truth: impl Fn(f64) -> f64, grid: &[f64]) -> Result<f64, SimError> {
    if grid.is_empty() {
        return Err(SimError::InvalidInput("empty evaluation grid".into()));
    }
    let mut index: Vec<usize> = (0..estimate.x_grid.len()).collect();
    index.sort_by(|a, b| estimate.x_grid[*a].total_cmp(&estimate.x_grid[*b]));
    let xs: Vec<f64> = index.iter().map(|i| estimate.x_grid[*i]).collect();
    let mut total = 0.0;
    for &x in grid {
        let tol = 1e-12 * x.abs().max(1.0);
        let pos = xs.partition_point(|v| *v < x - tol);
        if pos >= xs.len() || (xs[pos] - x).abs() > tol {
            return Err(SimError::GridMismatch { x });
        }
        let d = estimate.values[index[pos]] - truth(x);
        total += d * d;
    }
    Ok(total / grid.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveSpec {
    #[serde(default = "one")]
    pub h: f64,
    /// Candidate count; `floor(n^{1/4})` when absent.
    #[serde(default)]
    pub k_max: Option<usize>,
    /// Penalty level; calibrated from the sample when absent.
    #[serde(default)]
    pub ell: Option<f64>,
    #[serde(default)]
    pub rho0: Option<f64>,
    #[serde(default = "one")]
    pub beta_bar: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for AdaptiveSpec {
    fn default() -> Self {
        Self { h: 1.0, k_max: None, ell: None, rho0: None, beta_bar: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffChoice {
    /// Rate-optimal rule for the innovation's class: `(1/3) n^{1/(1+2 beta)}` or
    /// `(log n / (2 c_gamma))^{1/gamma}`.
    Theory,
    Rule { rule: CutoffRule<f64> },
    Adaptive { spec: AdaptiveSpec },
}

impl CutoffChoice {
    pub fn theory_rule(class: SmoothnessClass) -> CutoffRule<f64> {
        match class {
            SmoothnessClass::Smooth { beta, .. } => CutoffRule::Polynomial { beta, c: THEORY_POLYNOMIAL_C },
            SmoothnessClass::Supersmooth { gamma, c_gamma, .. } => CutoffRule::Supersmooth { gamma, c_gamma },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub law: CountLaw<f64>,
    pub innovation: InnovationLaw,
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub cutoff: CutoffChoice,
    pub seed: u64,
    pub x_grid: Vec<f64>,
    pub quad: Quadrature,
}

impl ExperimentConfig {
    /// Evaluation on 1000 points over `[-4, 4]` with the default quadrature.
    pub fn new(law: CountLaw<f64>, innovation: InnovationLaw, n_values: Vec<usize>, reps: usize, cutoff: CutoffChoice, seed: u64) -> Self {
        Self { law, innovation, n_values, reps, cutoff, seed, x_grid: linspace(-4.0, 4.0, 1000), quad: Quadrature::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KHatStats {
    pub min: usize,
    pub median: f64,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub error: Option<f64>,
    pub failed: bool,
    pub failure: Option<String>,
    pub cutoff: Option<f64>,
    pub k_hat: Option<KHatStats>,
    pub branch_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NSummary {
    pub n: usize,
    pub reps: usize,
    pub failed: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentDescriptor {
    pub law: String,
    pub innovation: String,
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub cutoff: CutoffChoice,
    pub seed: u64,
    pub grid_from: f64,
    pub grid_to: f64,
    pub grid_points: usize,
    pub quad: Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentDescriptor,
    pub records: Vec<ReplicationRecord>,
    pub summary: Vec<NSummary>,
    /// Median error strictly decreasing as `n` increases.
    pub median_decreasing: bool,
}

impl ExperimentReport {
    /// Long format: `n,rep,seed,error,failed`; `error` is empty for failed replications.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["n", "rep", "seed", "error", "failed"])?;
        for r in &self.records {
            let error = r.error.map(|e| e.to_string()).unwrap_or_default();
            wtr.write_record([r.n.to_string(), r.rep.to_string(), r.seed.to_string(), error, r.failed.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| r.failed).count()
    }
}

struct Outcome {
    error: f64,
    cutoff: Option<f64>,
    k_hat: Option<KHatStats>,
    branch_violations: usize,
}

fn replicate(config: &ExperimentConfig, rule: Option<&CutoffRule<f64>>, n: usize, rep: usize) -> Result<Outcome, SimError> {
    let xs = sample_compound_rep(&config.law, &config.innovation, n, config.seed, rep as u64);
    let sample = Sample::new(xs, Provenance::Simulated { seed: config.seed })?;
    let truth = |x: f64| config.innovation.density(x);
    match (&config.cutoff, rule) {
        (CutoffChoice::Adaptive { spec }, _) => {
            let ell = match spec.ell {
                Some(ell) => ell,
                None => calibrate_penalty(&sample, &config.law, spec.h, spec.beta_bar, spec.rho0)?.ell,
            };
            let k_max = spec.k_max.unwrap_or_else(|| default_k_n(n, KnMode::Simulation));
            let adaptive = AdaptiveConfig { h: spec.h, k_max, ell, quad: config.quad };
            let batch = select_cutoff_grid(&sample, &config.law, &adaptive, &config.x_grid)?;
            let est = DensityEstimate {
                x_grid: batch.x_grid.clone(),
                values: batch.values.clone(),
                cutoff_used: f64::NAN,
                quadrature_nodes: config.quad.nodes,
                diagnostics: Default::default(),
            };
            let ks = sorted(&batch.selections.iter().map(|s| s.k_hat as f64).collect::<Vec<_>>());
            Ok(Outcome {
                error: error_on_grid(&est, truth, &config.x_grid)?,
                cutoff: None,
                k_hat: Some(KHatStats { min: ks[0] as usize, median: quantile_sorted(&ks, 0.5), max: ks[ks.len() - 1] as usize }),
                branch_violations: batch.branch_violations,
            })
        }
        (_, Some(rule)) => {
            let u = rule.cutoff(n)?;
            let est = estimate_density_from_sample(&sample, &config.law, u, &config.x_grid, config.quad)?;
            Ok(Outcome {
                error: error_on_grid(&est, truth, &config.x_grid)?,
                cutoff: Some(u),
                k_hat: None,
                branch_violations: est.diagnostics.branch_violations,
            })
        }
        _ => unreachable!("non-adaptive choices resolve to a rule"),
    }
}

fn summarize(n: usize, records: &[ReplicationRecord]) -> NSummary {
    let mine: Vec<&ReplicationRecord> = records.iter().filter(|r| r.n == n).collect();
    let errors = sorted(&mine.iter().filter_map(|r| r.error).collect::<Vec<_>>());
    let stat = |q: f64| (!errors.is_empty()).then(|| quantile_sorted(&errors, q));
    NSummary { n, reps: mine.len(), failed: mine.iter().filter(|r| r.failed).count(), median: stat(0.5), q1: stat(0.25), q3: stat(0.75), max: stat(1.0) }
}

/// Runs every `(n, replication)` pair. Replication `r` uses the same random streams for
/// every `n`, so samples for smaller `n` are prefixes of those for larger `n`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, SimError> {
    if config.reps == 0 {
        return Err(SimError::InvalidInput("need at least one replication".into()));
    }
    if config.n_values.is_empty() || config.n_values.iter().any(|n| *n < 2) {
        return Err(SimError::InvalidInput("sample sizes must be at least 2".into()));
    }
    if config.x_grid.is_empty() {
        return Err(SimError::InvalidInput("empty evaluation grid".into()));
    }
    let rule = match &config.cutoff {
        CutoffChoice::Theory => {
            let class = config
                .innovation
                .class_info()
                .ok_or_else(|| SimError::InvalidInput(format!("{} has no smoothness class for the theory cutoff", config.innovation)))?;
            Some(CutoffChoice::theory_rule(class))
        }
        CutoffChoice::Rule { rule } => Some(*rule),
        CutoffChoice::Adaptive { spec } => {
            if !(spec.h > 0.0) || spec.k_max == Some(0) || spec.ell.is_some_and(|l| !(l > 0.0)) || !(spec.beta_bar > 0.0) {
                return Err(SimError::InvalidInput("adaptive spec needs h, ell, beta_bar > 0 and k_max >= 1".into()));
            }
            None
        }
    };
    if let Some(rule) = &rule {
        rule.validate()?;
    }

    let jobs: Vec<(usize, usize)> = config.n_values.iter().flat_map(|&n| (0..config.reps).map(move |rep| (n, rep))).collect();
    let records: Vec<ReplicationRecord> = jobs
        .par_iter()
        .map(|&(n, rep)| {
            let base = ReplicationRecord {
                n,
                rep,
                seed: config.seed,
                error: None,
                failed: false,
                failure: None,
                cutoff: None,
                k_hat: None,
                branch_violations: 0,
            };
            match replicate(config, rule.as_ref(), n, rep) {
                Ok(o) => ReplicationRecord { error: Some(o.error), cutoff: o.cutoff, k_hat: o.k_hat, branch_violations: o.branch_violations, ..base },
                Err(e) => ReplicationRecord { failed: true, failure: Some(e.to_string()), ..base },
            }
        })
        .collect();

    let mut ns = config.n_values.clone();
    ns.sort_unstable();
    ns.dedup();
    let summary: Vec<NSummary> = ns.iter().map(|&n| summarize(n, &records)).collect();
    let medians: Option<Vec<f64>> = summary.iter().map(|s| s.median).collect();
    let median_decreasing = medians.is_some_and(|m| m.windows(2).all(|w| w[1] < w[0]));

    Ok(ExperimentReport {
        config: ExperimentDescriptor {
            law: config.law.to_string(),
            innovation: config.innovation.to_string(),
            n_values: config.n_values.clone(),
            reps: config.reps,
            cutoff: config.cutoff,
            seed: config.seed,
            grid_from: config.x_grid[0],
            grid_to: config.x_grid[config.x_grid.len() - 1],
            grid_points: config.x_grid.len(),
            quad: config.quad,
        },
        records,
        summary,
        median_decreasing,
    })
}

/// Least-squares slope of `log(median error)` against `log n`.
pub fn rate_slope(report: &ExperimentReport) -> Result<f64, SimError> {
    let pts: Vec<(f64, f64)> =
        report.summary.iter().filter_map(|s| s.median.filter(|m| *m > 0.0).map(|m| ((s.n as f64).ln(), m.ln()))).collect();
    if pts.len() < 3 {
        return Err(SimError::InsufficientPoints { needed: 3, have: pts.len() });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
