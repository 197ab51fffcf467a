//! `decompound`: simulation, estimation, adaptive selection, claims pipeline and
//! nonvanishing checks from the command line.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use decompound::countlaw::CountLaw;
use decompound::simulate::{AdaptiveSpec, CutoffChoice};
use decompound::QuadRule;

use commands::Context;
use config::{
    parse_cutoff_choice, parse_law, Auto, ConfigError, FileConfig, Format, GridSpec, IngestChoice, InputSpec, KnChoice, QuadSpec, RealCutoff, RuleFlags, UFlag,
    XiSpec, DEFAULT_OUTPUT_DIR, DEFAULT_SEED,
};
use error::{CliError, Status};

#[derive(Parser)]
#[command(name = "decompound", version, about = "Density estimation for the summands of compound sums")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, or `auto`.
    #[arg(long, global = true)]
    threads: Option<Auto<usize>>,
    #[arg(long = "output-dir", visible_alias = "output_dir", global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Print the resolved config and derived constants, then stop.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo study of estimation error.
    Simulate(SimulateArgs),
    /// Density estimate from one sample.
    Estimate(EstimateArgs),
    /// Pointwise adaptive cutoff selection.
    Adapt(AdaptArgs),
    /// Claims pipeline: ingest, fit, calibrate, estimate.
    Realdata(RealdataArgs),
    /// Sufficient conditions for a nonvanishing characteristic function.
    Check(CheckArgs),
}

fn parse_quad_rule(raw: &str) -> Result<QuadRule, ConfigError> {
    match raw {
        "simpson" => Ok(QuadRule::Simpson),
        "trapezoid" => Ok(QuadRule::Trapezoid),
        _ => Err(ConfigError(format!("unknown quadrature rule {raw:?}; expected simpson or trapezoid"))),
    }
}

#[derive(Args)]
struct QuadArgs {
    /// Nodes on each side of zero.
    #[arg(long)]
    quad_nodes: Option<usize>,
    /// `simpson` or `trapezoid`.
    #[arg(long, value_parser = parse_quad_rule)]
    quad_rule: Option<QuadRule>,
}

impl QuadArgs {
    fn apply(&self, q: &mut QuadSpec) {
        q.nodes = self.quad_nodes.unwrap_or(q.nodes);
        q.rule = self.quad_rule.unwrap_or(q.rule);
    }
}

#[derive(Args)]
struct SampleArgs {
    /// Observations, one per line.
    #[arg(long, conflicts_with = "generate_n")]
    input: Option<PathBuf>,
    /// Simulate this many observations with the count law and `--xi`.
    #[arg(long)]
    generate_n: Option<usize>,
    /// Summand law for generated samples: `laplace[:location,scale]` or `normal[:mean,sd]`.
    #[arg(long)]
    xi: Option<XiSpec>,
}

impl SampleArgs {
    fn apply(&self, input: &mut InputSpec) -> Result<(), ConfigError> {
        if let Some(path) = &self.input {
            if self.xi.is_some() {
                return Err(ConfigError("--xi only applies to generated samples".into()));
            }
            *input = InputSpec::File { path: path.clone() };
            return Ok(());
        }
        if self.generate_n.is_none() && self.xi.is_none() {
            return Ok(());
        }
        let (xi, n) = match input {
            InputSpec::Generate { xi, n } => (*xi, *n),
            InputSpec::File { .. } => (XiSpec::default(), 1000),
        };
        *input = InputSpec::Generate { xi: self.xi.unwrap_or(xi), n: self.generate_n.unwrap_or(n) };
        Ok(())
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// `two_point:p`, `geometric:p`, `shifted_poisson:lambda` or `tabulated:w1,w2,..`.
    #[arg(long, value_parser = parse_law)]
    law: Option<CountLaw<f64>>,
    #[arg(long)]
    xi: Option<XiSpec>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    /// `theory`, `adaptive`, `fixed:U`, `poly:beta:c` or `supersmooth:gamma:c_gamma`.
    #[arg(long, value_parser = parse_cutoff_choice)]
    cutoff: Option<CutoffChoice>,
    /// Adaptive penalty level, or `auto`.
    #[arg(long)]
    ell: Option<Auto<f64>>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    beta_bar: Option<f64>,
    /// Evaluation grid `from:to:points`.
    #[arg(long, allow_hyphen_values = true)]
    x_grid: Option<GridSpec>,
    #[command(flatten)]
    quad: QuadArgs,
}

impl SimulateArgs {
    fn apply(self, cfg: &mut config::SimulateConfig) -> Result<(), ConfigError> {
        if let Some(law) = self.law {
            cfg.law = law;
        }
        cfg.xi = self.xi.unwrap_or(cfg.xi);
        cfg.n = self.n.unwrap_or(std::mem::take(&mut cfg.n));
        cfg.reps = self.reps.unwrap_or(cfg.reps);
        cfg.cutoff = self.cutoff.unwrap_or(cfg.cutoff);
        cfg.x_grid = self.x_grid.unwrap_or(cfg.x_grid);
        self.quad.apply(&mut cfg.quad);
        let adaptive_flags = self.ell.is_some() || self.h.is_some() || self.k_max.is_some() || self.rho0.is_some() || self.beta_bar.is_some();
        match &mut cfg.cutoff {
            CutoffChoice::Adaptive { spec } => {
                let AdaptiveSpec { h, k_max, ell, rho0, beta_bar } = spec;
                if let Some(v) = self.ell {
                    *ell = v.value();
                }
                *h = self.h.unwrap_or(*h);
                *k_max = self.k_max.or(*k_max);
                *rho0 = self.rho0.or(*rho0);
                *beta_bar = self.beta_bar.unwrap_or(*beta_bar);
            }
            _ if adaptive_flags => return Err(ConfigError("--ell, --h, --k-max, --rho0 and --beta-bar need --cutoff adaptive".into())),
            _ => {}
        }
        Ok(())
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, value_parser = parse_law)]
    law: Option<CountLaw<f64>>,
    /// Cutoff: a number, `auto-poly`, `auto-supersmooth` or `auto-deterministic`.
    #[arg(long = "U", allow_hyphen_values = true)]
    u: Option<UFlag>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c_gamma: Option<f64>,
    /// Treat the count as fixed at this value.
    #[arg(long)]
    deterministic_m: Option<u32>,
    #[arg(long)]
    modulus_floor: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_grid: Option<GridSpec>,
    #[command(flatten)]
    quad: QuadArgs,
}

impl EstimateArgs {
    fn apply(self, cfg: &mut config::EstimateConfig) -> Result<(), ConfigError> {
        self.sample.apply(&mut cfg.input)?;
        if let Some(law) = self.law {
            cfg.law = law;
        }
        cfg.deterministic_m = self.deterministic_m.or(cfg.deterministic_m);
        let flags = RuleFlags { u: self.u, beta: self.beta, c: self.c, gamma: self.gamma, c_gamma: self.c_gamma, m: cfg.deterministic_m };
        cfg.cutoff = flags.apply(cfg.cutoff)?;
        cfg.modulus_floor = self.modulus_floor.unwrap_or(cfg.modulus_floor);
        cfg.x_grid = self.x_grid.unwrap_or(cfg.x_grid);
        self.quad.apply(&mut cfg.quad);
        Ok(())
    }
}

#[derive(Args)]
struct AdaptArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, value_parser = parse_law)]
    law: Option<CountLaw<f64>>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Default candidate count: `floor(n^{1/4})` or twice that.
    #[arg(long, value_enum)]
    kn_mode: Option<KnChoice>,
    #[arg(long)]
    ell: Option<Auto<f64>>,
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    beta_bar: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_grid: Option<GridSpec>,
    #[command(flatten)]
    quad: QuadArgs,
}

impl AdaptArgs {
    fn apply(self, cfg: &mut config::AdaptConfig) -> Result<(), ConfigError> {
        self.sample.apply(&mut cfg.input)?;
        if let Some(law) = self.law {
            cfg.law = law;
        }
        cfg.h = self.h.unwrap_or(cfg.h);
        cfg.k_max = self.k_max.or(cfg.k_max);
        cfg.kn_mode = self.kn_mode.unwrap_or(cfg.kn_mode);
        cfg.ell = self.ell.unwrap_or(cfg.ell);
        cfg.rho0 = self.rho0.or(cfg.rho0);
        cfg.beta_bar = self.beta_bar.unwrap_or(cfg.beta_bar);
        cfg.x_grid = self.x_grid.unwrap_or(cfg.x_grid);
        self.quad.apply(&mut cfg.quad);
        Ok(())
    }
}

#[derive(Args)]
struct RealdataArgs {
    /// Frequency file: policy id, claim count and optionally region.
    #[arg(long)]
    freq: Option<PathBuf>,
    /// Severity file: policy id and one claim amount per row.
    #[arg(long)]
    sev: Option<PathBuf>,
    #[arg(long)]
    region: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<IngestChoice>,
    /// `adaptive`, `fixed:U` or `grid:from:to:step`.
    #[arg(long)]
    cutoff: Option<RealCutoff>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    resample_n: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    ell: Option<Auto<f64>>,
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    beta_bar: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eval_grid: Option<GridSpec>,
    #[command(flatten)]
    quad: QuadArgs,
}

impl RealdataArgs {
    fn apply(self, cfg: &mut config::RealdataConfig) {
        cfg.freq = self.freq.or(cfg.freq.take());
        cfg.sev = self.sev.or(cfg.sev.take());
        cfg.region = self.region.or(cfg.region.take());
        cfg.mode = self.mode.unwrap_or(cfg.mode);
        cfg.cutoff = self.cutoff.unwrap_or(cfg.cutoff);
        cfg.resamples = self.resamples.unwrap_or(cfg.resamples);
        cfg.resample_n = self.resample_n.unwrap_or(cfg.resample_n);
        cfg.h = self.h.unwrap_or(cfg.h);
        cfg.k_max = self.k_max.or(cfg.k_max);
        cfg.ell = self.ell.unwrap_or(cfg.ell);
        cfg.rho0 = self.rho0.unwrap_or(cfg.rho0);
        cfg.beta_bar = self.beta_bar.unwrap_or(cfg.beta_bar);
        cfg.eval_grid = self.eval_grid.unwrap_or(cfg.eval_grid);
        self.quad.apply(&mut cfg.quad);
    }
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_parser = parse_law)]
    law: Option<CountLaw<f64>>,
    /// Summand law supplying default statistics.
    #[arg(long)]
    xi: Option<XiSpec>,
    #[arg(long, allow_hyphen_values = true)]
    mean: Option<f64>,
    #[arg(long)]
    variance: Option<f64>,
    /// Standard deviation of the Gaussian component.
    #[arg(long)]
    gaussian_component: Option<f64>,
}

impl CheckArgs {
    fn apply(self, cfg: &mut config::CheckConfig) {
        if let Some(law) = self.law {
            cfg.law = law;
        }
        cfg.xi = self.xi.or(cfg.xi);
        cfg.mean = self.mean.or(cfg.mean);
        cfg.variance = self.variance.or(cfg.variance);
        cfg.gaussian_component = self.gaussian_component.or(cfg.gaussian_component);
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Estimate(_) => "estimate",
        Command::Adapt(_) => "adapt",
        Command::Realdata(_) => "realdata",
        Command::Check(_) => "check",
    }
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let name = command_name(&cli.command);
    if let Some(c) = &file.command {
        if c != name {
            return Err(ConfigError(format!("config file is for `{c}`, not `{name}`")).into());
        }
    }
    let globals = config::Globals {
        seed: cli.global.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        threads: cli.global.threads.or(file.threads).unwrap_or_default(),
        output_dir: cli.global.output_dir.clone().or(file.output_dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        format: cli.global.format.or(file.format).unwrap_or_default(),
    };
    if let Auto::Value(t) = globals.threads {
        if t == 0 {
            return Err(ConfigError("--threads must be positive or auto".into()).into());
        }
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let ctx = Context { globals, dry_run: cli.global.dry_run };
    let FileConfig { simulate, estimate, adapt, realdata, check, .. } = file;
    match cli.command {
        Command::Simulate(args) => {
            let mut cfg = simulate;
            args.apply(&mut cfg)?;
            commands::simulate(&ctx, &cfg)
        }
        Command::Estimate(args) => {
            let mut cfg = estimate;
            args.apply(&mut cfg)?;
            commands::estimate(&ctx, &cfg)
        }
        Command::Adapt(args) => {
            let mut cfg = adapt;
            args.apply(&mut cfg)?;
            commands::adapt(&ctx, &cfg)
        }
        Command::Realdata(args) => {
            let mut cfg = realdata;
            args.apply(&mut cfg);
            commands::realdata(&ctx, &cfg)
        }
        Command::Check(args) => {
            let mut cfg = check;
            args.apply(&mut cfg);
            commands::check(&ctx, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = run(cli);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_status(&result))
}

/// 0 on success, 1 for configuration, input and output problems, 2 when estimation fails
/// or some replications failed.
fn exit_status(result: &Result<Status, CliError>) -> u8 {
    match result {
        Ok(Status::Success) => 0,
        Ok(Status::Partial) => 2,
        Err(e) => e.exit_code(),
    }
}
