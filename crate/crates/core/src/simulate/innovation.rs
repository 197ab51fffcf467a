use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{substream, Role, SimError};
use crate::countlaw::CountLaw;
use crate::ecf::{Provenance, Sample};

/// User-supplied summand law.
pub trait CustomInnovation: Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    fn density(&self, x: f64) -> f64;
    fn cf(&self, u: f64) -> Complex64;
    fn name(&self) -> String {
        "custom".into()
    }
}

#[derive(Clone)]
pub enum InnovationKind {
    Laplace { location: f64, scale: f64 },
    Normal { mean: f64, sd: f64 },
    Custom(Arc<dyn CustomInnovation>),
}

impl fmt::Debug for InnovationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Laplace { location, scale } => write!(f, "Laplace {{ location: {location}, scale: {scale} }}"),
            Self::Normal { mean, sd } => write!(f, "Normal {{ mean: {mean}, sd: {sd} }}"),
            Self::Custom(c) => write!(f, "Custom({})", c.name()),
        }
    }
}

/// Decay class of the summand characteristic function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SmoothnessClass {
    /// `(1 + |u|)^{1 + beta} |phi(u)|` bounded.
    Smooth { beta: f64, m: f64 },
    /// `exp(c_gamma |u|^gamma) |phi(u)|` bounded.
    Supersmooth { gamma: f64, c_gamma: f64, m: f64 },
}

#[derive(Debug, Clone)]
pub struct InnovationLaw {
    kind: InnovationKind,
    class_info: Option<SmoothnessClass>,
}

impl InnovationLaw {
    /// Laplace law; class constant `M = 1 / scale^2`, the limit of
    /// `(1+|u|)^2 |phi(u)|` as `|u| -> infinity`.
    pub fn laplace(location: f64, scale: f64) -> Result<Self, SimError> {
        if !(scale > 0.0 && scale.is_finite() && location.is_finite()) {
            return Err(SimError::InvalidInput(format!("Laplace needs finite location and positive scale, got ({location}, {scale})")));
        }
        Ok(Self {
            kind: InnovationKind::Laplace { location, scale },
            class_info: Some(SmoothnessClass::Smooth { beta: 1.0, m: 1.0 / (scale * scale) }),
        })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self, SimError> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(SimError::InvalidInput(format!("normal needs finite mean and positive sd, got ({mean}, {sd})")));
        }
        Ok(Self {
            kind: InnovationKind::Normal { mean, sd },
            class_info: Some(SmoothnessClass::Supersmooth { gamma: 2.0, c_gamma: sd * sd / 2.0, m: 1.0 }),
        })
    }

    pub fn custom(law: Arc<dyn CustomInnovation>, class_info: Option<SmoothnessClass>) -> Self {
        Self { kind: InnovationKind::Custom(law), class_info }
    }

    pub fn standard_laplace() -> Self {
        Self::laplace(0.0, 1.0).expect("valid parameters")
    }

    pub fn standard_normal() -> Self {
        Self::normal(0.0, 1.0).expect("valid parameters")
    }

    pub fn kind(&self) -> &InnovationKind {
        &self.kind
    }

    pub fn class_info(&self) -> Option<SmoothnessClass> {
        self.class_info
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match &self.kind {
            InnovationKind::Laplace { location, scale } => {
                // Inverse CDF from one uniform on (-1/2, 1/2).
                let v: f64 = rng.random::<f64>() - 0.5;
                location - scale * v.signum() * (1.0 - 2.0 * v.abs()).ln()
            }
            InnovationKind::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            InnovationKind::Custom(c) => c.sample(rng),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match &self.kind {
            InnovationKind::Laplace { location, scale } => (-(x - location).abs() / scale).exp() / (2.0 * scale),
            InnovationKind::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                (-z * z / 2.0).exp() / (sd * (2.0 * PI).sqrt())
            }
            InnovationKind::Custom(c) => c.density(x),
        }
    }

    pub fn cf(&self, u: f64) -> Complex64 {
        match &self.kind {
            InnovationKind::Laplace { location, scale } => Complex64::from_polar(1.0 / (1.0 + scale * scale * u * u), u * location),
            InnovationKind::Normal { mean, sd } => Complex64::from_polar((-sd * sd * u * u / 2.0).exp(), u * mean),
            InnovationKind::Custom(c) => c.cf(u),
        }
    }

    /// `n` draws from the innovation stream of `(seed, rep)`.
    pub fn sample_n(&self, n: usize, seed: u64, rep: u64) -> Vec<f64> {
        let mut rng = substream(seed, rep, Role::Innovations);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

impl fmt::Display for InnovationLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            InnovationKind::Laplace { location, scale } => write!(f, "laplace({location}, {scale})"),
            InnovationKind::Normal { mean, sd } => write!(f, "normal({mean}, {sd})"),
            InnovationKind::Custom(c) => write!(f, "{}", c.name()),
        }
    }
}

/// `n` draws of `xi_1 + .. + xi_N`. Counts come from the count stream and summands from
/// the innovation stream of `(seed, rep)`, consumed in order.
pub(crate) fn sample_compound_rep(law: &CountLaw<f64>, innovation: &InnovationLaw, n: usize, seed: u64, rep: u64) -> Vec<f64> {
    let counts = substream(seed, rep, Role::Counts);
    let mut innov = substream(seed, rep, Role::Innovations);
    let counts: Vec<u32> = law.sampler().sample_iter(counts).take(n).collect();
    counts.into_iter().map(|k| (0..k).map(|_| innovation.sample(&mut innov)).sum()).collect()
}

pub fn sample_compound(law: &CountLaw<f64>, innovation: &InnovationLaw, n: usize, seed: u64) -> Result<Sample<f64>, SimError> {
    if n == 0 {
        return Err(SimError::InvalidInput("need n >= 1".into()));
    }
    Ok(Sample::new(sample_compound_rep(law, innovation, n, seed, 0), Provenance::Simulated { seed })?)
}
