use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use decompound::adaptive::KnMode;
use decompound::countlaw::{CountLaw, InnovationStats};
use decompound::simulate::{AdaptiveSpec, CutoffChoice, InnovationLaw, SimError};
use decompound::{CutoffRule, QuadRule, Quadrature};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

fn num<T: FromStr>(raw: &str, what: &str) -> Result<T, ConfigError> {
    raw.trim().parse().map_err(|_| bad(format!("cannot parse {what} from {raw:?}")))
}

fn nums(raw: &str, what: &str) -> Result<Vec<f64>, ConfigError> {
    raw.split([',', ':']).map(|v| num(v, what)).collect()
}

/// `two_point:p`, `geometric:p`, `shifted_poisson:lambda`, `tabulated:w1,w2,..` or `degenerate`.
pub fn parse_law(raw: &str) -> Result<CountLaw<f64>, ConfigError> {
    let (family, args) = raw.split_once(':').unwrap_or((raw, ""));
    let one = || -> Result<f64, ConfigError> { num(args, "law parameter") };
    let law = match family.trim() {
        "two_point" => CountLaw::two_point(one()?),
        "geometric" => CountLaw::geometric(one()?),
        "shifted_poisson" => CountLaw::shifted_poisson(one()?),
        "tabulated" => CountLaw::tabulated(nums(args, "tabulated weight")?),
        "degenerate" if args.is_empty() => Ok(CountLaw::degenerate()),
        other => return Err(bad(format!("unknown count law {other:?}; expected two_point, geometric, shifted_poisson or tabulated"))),
    };
    law.map_err(|e| bad(format!("count law {raw:?}: {e}")))
}

/// Law with all mass at `m`.
pub fn point_mass(m: u32) -> Result<CountLaw<f64>, ConfigError> {
    if m == 0 {
        return Err(bad("deterministic count must be at least 1"));
    }
    let mut w = vec![0.0; m as usize];
    w[m as usize - 1] = 1.0;
    CountLaw::tabulated(w).map_err(|e| bad(e.to_string()))
}

fn zero() -> f64 {
    0.0
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum XiSpec {
    Laplace {
        #[serde(default = "zero")]
        location: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Normal {
        #[serde(default = "zero")]
        mean: f64,
        #[serde(default = "one")]
        sd: f64,
    },
}

impl Default for XiSpec {
    fn default() -> Self {
        XiSpec::Laplace { location: 0.0, scale: 1.0 }
    }
}

impl FromStr for XiSpec {
    type Err = ConfigError;

    /// `laplace`, `laplace:location,scale`, `normal` or `normal:mean,sd`.
    fn from_str(raw: &str) -> Result<Self, ConfigError> {
        let (family, args) = raw.split_once(':').unwrap_or((raw, ""));
        let params = if args.is_empty() { vec![0.0, 1.0] } else { nums(args, "summand parameter")? };
        if params.len() != 2 {
            return Err(bad(format!("summand law {raw:?} needs two parameters")));
        }
        match family.trim() {
            "laplace" => Ok(XiSpec::Laplace { location: params[0], scale: params[1] }),
            "normal" => Ok(XiSpec::Normal { mean: params[0], sd: params[1] }),
            other => Err(bad(format!("unknown summand law {other:?}; expected laplace or normal"))),
        }
    }
}

impl XiSpec {
    pub fn law(&self) -> Result<InnovationLaw, ConfigError> {
        let law: Result<InnovationLaw, SimError> = match *self {
            XiSpec::Laplace { location, scale } => InnovationLaw::laplace(location, scale),
            XiSpec::Normal { mean, sd } => InnovationLaw::normal(mean, sd),
        };
        law.map_err(|e| bad(e.to_string()))
    }

    pub fn stats(&self) -> InnovationStats<f64> {
        match *self {
            XiSpec::Laplace { location, scale } => InnovationStats { mean: location, variance: 2.0 * scale * scale, gaussian_component: 0.0 },
            XiSpec::Normal { mean, sd } => InnovationStats { mean, variance: sd * sd, gaussian_component: sd },
        }
    }
}

/// `points` equispaced values from `from` to `to`; written `from:to:points` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        if !(self.from.is_finite() && self.to.is_finite() && self.from < self.to) || self.points < 2 {
            return Err(bad(format!("grid needs from < to and at least two points, got {self}")));
        }
        Ok(decompound::simulate::linspace(self.from, self.to, self.points))
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.from, self.to, self.points)
    }
}

impl FromStr for GridSpec {
    type Err = ConfigError;

    fn from_str(raw: &str) -> Result<Self, ConfigError> {
        let parts: Vec<&str> = raw.split(':').collect();
        let [from, to, points] = parts[..] else {
            return Err(bad(format!("grid {raw:?} must be from:to:points")));
        };
        Ok(GridSpec { from: num(from, "grid start")?, to: num(to, "grid end")?, points: num(points, "grid size")? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSpec {
    pub nodes: usize,
    pub rule: QuadRule,
}

impl Default for QuadSpec {
    fn default() -> Self {
        let q = Quadrature::default();
        QuadSpec { nodes: q.nodes, rule: q.rule }
    }
}

impl QuadSpec {
    pub fn quadrature(&self) -> Result<Quadrature, ConfigError> {
        if self.nodes == 0 {
            return Err(bad("quadrature needs at least one node"));
        }
        Ok(Quadrature { nodes: self.nodes, rule: self.rule })
    }
}

/// Either a number or the word `auto`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Auto<T> {
    #[default]
    Auto,
    Value(T),
}

impl<T: FromStr> FromStr for Auto<T> {
    type Err = ConfigError;

    fn from_str(raw: &str) -> Result<Self, ConfigError> {
        if raw.trim() == "auto" {
            Ok(Auto::Auto)
        } else {
            num(raw, "value or \"auto\"").map(Auto::Value)
        }
    }
}

impl<T: Serialize> Serialize for Auto<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Auto::Auto => s.serialize_str("auto"),
            Auto::Value(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Auto<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Value(T),
            Word(String),
        }
        match Repr::<T>::deserialize(d)? {
            Repr::Value(v) => Ok(Auto::Value(v)),
            Repr::Word(w) if w == "auto" => Ok(Auto::Auto),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("expected a number or \"auto\", got {w:?}"))),
        }
    }
}

impl<T> Auto<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Auto::Auto => None,
            Auto::Value(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum KnChoice {
    #[default]
    Simulation,
    RealData,
}

impl From<KnChoice> for KnMode {
    fn from(k: KnChoice) -> Self {
        match k {
            KnChoice::Simulation => KnMode::Simulation,
            KnChoice::RealData => KnMode::RealData,
        }
    }
}

/// Simulation cutoff on the command line: `theory`, `adaptive`, `fixed:U`, `poly:beta:c` or
/// `supersmooth:gamma:c_gamma`.
pub fn parse_cutoff_choice(raw: &str) -> Result<CutoffChoice, ConfigError> {
    match raw.trim() {
        "theory" => Ok(CutoffChoice::Theory),
        "adaptive" => Ok(CutoffChoice::Adaptive { spec: AdaptiveSpec::default() }),
        other => parse_rule(other).map(|rule| CutoffChoice::Rule { rule }),
    }
}

fn parse_rule(raw: &str) -> Result<CutoffRule<f64>, ConfigError> {
    let (kind, args) = raw.split_once(':').unwrap_or((raw, ""));
    let p = nums(args, "cutoff parameter")?;
    match (kind, p.as_slice()) {
        ("fixed", [u]) => Ok(CutoffRule::Fixed { u: *u }),
        ("poly", [beta, c]) => Ok(CutoffRule::Polynomial { beta: *beta, c: *c }),
        ("supersmooth", [gamma, c_gamma]) => Ok(CutoffRule::Supersmooth { gamma: *gamma, c_gamma: *c_gamma }),
        _ => Err(bad(format!("unknown cutoff {raw:?}"))),
    }
}

/// Cutoff of a single estimate: a number, `auto-poly`, `auto-supersmooth` or
/// `auto-deterministic`; the parameters come from the separate flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UFlag {
    Value(f64),
    AutoPoly,
    AutoSupersmooth,
    AutoDeterministic,
}

impl FromStr for UFlag {
    type Err = ConfigError;

    fn from_str(raw: &str) -> Result<Self, ConfigError> {
        match raw.trim() {
            "auto-poly" => Ok(UFlag::AutoPoly),
            "auto-supersmooth" => Ok(UFlag::AutoSupersmooth),
            "auto-deterministic" => Ok(UFlag::AutoDeterministic),
            other => num(other, "cutoff U").map(UFlag::Value),
        }
    }
}

/// Overrides for a cutoff rule from individual flags.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleFlags {
    pub u: Option<UFlag>,
    pub beta: Option<f64>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub c_gamma: Option<f64>,
    pub m: Option<u32>,
}

impl RuleFlags {
    pub fn apply(&self, rule: CutoffRule<f64>) -> Result<CutoffRule<f64>, ConfigError> {
        let mut rule = match self.u {
            None => rule,
            Some(UFlag::Value(u)) => CutoffRule::Fixed { u },
            Some(UFlag::AutoPoly) => CutoffRule::Polynomial { beta: 1.0, c: 1.0 / 3.0 },
            Some(UFlag::AutoSupersmooth) => CutoffRule::Supersmooth { gamma: 2.0, c_gamma: 0.5 },
            Some(UFlag::AutoDeterministic) => CutoffRule::DeterministicSum { beta: 1.0, m: self.m.unwrap_or(1) },
        };
        let unused = |name: &str, rule: &CutoffRule<f64>| Err(bad(format!("--{name} does not apply to cutoff {rule:?}")));
        match &mut rule {
            CutoffRule::Fixed { .. } => {
                if self.beta.is_some() {
                    return unused("beta", &rule);
                }
                if self.c.is_some() {
                    return unused("c", &rule);
                }
            }
            CutoffRule::Polynomial { beta, c } => {
                *beta = self.beta.unwrap_or(*beta);
                *c = self.c.unwrap_or(*c);
            }
            CutoffRule::Supersmooth { gamma, c_gamma } => {
                *gamma = self.gamma.unwrap_or(*gamma);
                *c_gamma = self.c_gamma.unwrap_or(*c_gamma);
            }
            CutoffRule::DeterministicSum { beta, m } => {
                *beta = self.beta.unwrap_or(*beta);
                *m = self.m.unwrap_or(*m);
            }
        }
        if !matches!(rule, CutoffRule::Supersmooth { .. }) && (self.gamma.is_some() || self.c_gamma.is_some()) {
            return unused("gamma", &rule);
        }
        rule.validate().map_err(|e| bad(e.to_string()))?;
        Ok(rule)
    }
}

/// Global settings shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Globals {
    pub seed: u64,
    pub threads: Auto<usize>,
    pub output_dir: PathBuf,
    pub format: Format,
}

/// Contents of a `--config` file. Every field is optional; absent fields take defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Present in echoed configs; must match the subcommand when given.
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<Auto<usize>>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<Format>,
    pub simulate: SimulateConfig,
    pub estimate: EstimateConfig,
    pub adapt: AdaptConfig,
    pub realdata: RealdataConfig,
    pub check: CheckConfig,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUTPUT_DIR: &str = "decompound-out";

impl FileConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub law: CountLaw<f64>,
    pub xi: XiSpec,
    pub n: Vec<usize>,
    pub reps: usize,
    pub cutoff: CutoffChoice,
    pub x_grid: GridSpec,
    pub quad: QuadSpec,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            law: CountLaw::two_point(0.3).expect("valid law"),
            xi: XiSpec::default(),
            n: vec![100, 1000, 5000],
            reps: 100,
            cutoff: CutoffChoice::Theory,
            x_grid: GridSpec { from: -4.0, to: 4.0, points: 1000 },
            quad: QuadSpec::default(),
        }
    }
}

/// Where the observations of `X` come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// One value per line.
    File { path: PathBuf },
    /// Compound sample drawn with the command's count law and the global seed.
    Generate { xi: XiSpec, n: usize },
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Generate { xi: XiSpec::default(), n: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub input: InputSpec,
    pub law: CountLaw<f64>,
    pub cutoff: CutoffRule<f64>,
    /// Routes to the deterministic-count estimator with `N = m`; `law` is then unused.
    pub deterministic_m: Option<u32>,
    pub modulus_floor: f64,
    pub x_grid: GridSpec,
    pub quad: QuadSpec,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            input: InputSpec::default(),
            law: CountLaw::two_point(0.3).expect("valid law"),
            cutoff: CutoffRule::Polynomial { beta: 1.0, c: 1.0 / 3.0 },
            deterministic_m: None,
            modulus_floor: decompound::estimator::DEFAULT_MODULUS_FLOOR,
            x_grid: GridSpec { from: -4.0, to: 4.0, points: 1000 },
            quad: QuadSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub input: InputSpec,
    pub law: CountLaw<f64>,
    pub h: f64,
    /// Candidate count; from `kn_mode` when absent.
    pub k_max: Option<usize>,
    pub kn_mode: KnChoice,
    pub ell: Auto<f64>,
    /// Source of kappa for the automatic penalty; the symmetric-summand constant when absent.
    pub rho0: Option<f64>,
    pub beta_bar: f64,
    pub x_grid: GridSpec,
    pub quad: QuadSpec,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            input: InputSpec::default(),
            law: CountLaw::shifted_poisson(0.1).expect("valid law"),
            h: 1.0,
            k_max: None,
            kn_mode: KnChoice::Simulation,
            ell: Auto::Auto,
            rho0: None,
            beta_bar: 1.0,
            x_grid: GridSpec { from: -4.0, to: 4.0, points: 1000 },
            quad: QuadSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum IngestChoice {
    #[default]
    Lenient,
    Strict,
}

/// Cutoff of the claims pipeline: `adaptive`, `fixed:U` or `grid:from:to:step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RealCutoff {
    Adaptive,
    Fixed { u: f64 },
    Grid { from: f64, to: f64, step: f64 },
}

impl FromStr for RealCutoff {
    type Err = ConfigError;

    fn from_str(raw: &str) -> Result<Self, ConfigError> {
        let (kind, args) = raw.split_once(':').unwrap_or((raw, ""));
        match kind.trim() {
            "adaptive" if args.is_empty() => Ok(RealCutoff::Adaptive),
            "fixed" => Ok(RealCutoff::Fixed { u: num(args, "cutoff U")? }),
            "grid" => match nums(args, "grid bound")?[..] {
                [from, to, step] => Ok(RealCutoff::Grid { from, to, step }),
                _ => Err(bad(format!("grid cutoff {raw:?} must be grid:from:to:step"))),
            },
            _ => Err(bad(format!("unknown cutoff {raw:?}; expected adaptive, fixed:U or grid:from:to:step"))),
        }
    }
}

impl RealCutoff {
    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        let RealCutoff::Grid { from, to, step } = *self else { return Ok(Vec::new()) };
        if !(from > 0.0 && to >= from && step > 0.0 && from.is_finite() && to.is_finite()) {
            return Err(bad(format!("cutoff grid needs 0 < from <= to and step > 0, got {from}:{to}:{step}")));
        }
        let count = ((to - from) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| from + i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealdataConfig {
    pub freq: Option<PathBuf>,
    pub sev: Option<PathBuf>,
    pub region: Option<String>,
    pub mode: IngestChoice,
    pub cutoff: RealCutoff,
    pub resamples: usize,
    pub resample_n: usize,
    pub h: f64,
    pub k_max: Option<usize>,
    pub ell: Auto<f64>,
    pub rho0: f64,
    pub beta_bar: f64,
    pub eval_grid: GridSpec,
    pub quad: QuadSpec,
}

impl Default for RealdataConfig {
    fn default() -> Self {
        RealdataConfig {
            freq: None,
            sev: None,
            region: None,
            mode: IngestChoice::Lenient,
            cutoff: RealCutoff::Adaptive,
            resamples: 25,
            resample_n: 1000,
            h: 1.0,
            k_max: None,
            ell: Auto::Auto,
            rho0: 1.0,
            beta_bar: 2.0,
            eval_grid: GridSpec { from: -0.296, to: 11.2, points: 1000 },
            quad: QuadSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub law: CountLaw<f64>,
    /// Summand law whose moments seed the statistics below.
    pub xi: Option<XiSpec>,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub gaussian_component: Option<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { law: CountLaw::two_point(0.3).expect("valid law"), xi: None, mean: None, variance: None, gaussian_component: None }
    }
}

impl CheckConfig {
    pub fn stats(&self) -> Result<InnovationStats<f64>, ConfigError> {
        let base = self.xi.map(|x| x.stats());
        let variance = self.variance.or(base.map(|b| b.variance)).ok_or_else(|| bad("check needs --variance or --xi"))?;
        Ok(InnovationStats {
            mean: self.mean.or(base.map(|b| b.mean)).unwrap_or(0.0),
            variance,
            gaussian_component: self.gaussian_component.or(base.map(|b| b.gaussian_component)).unwrap_or(0.0),
        })
    }
}
