//! Nonparametric estimation of the summand density in a compound sum
//! `X = xi_1 + .. + xi_N` with known count law, by spectral inversion of the empirical
//! characteristic function.
//!
//! The numerical core is generic over [`Real`] (`f32`, `f64`); the aliases below fix
//! the scalar to `f64`. [`simulate`] works in `f64` only.

pub mod adaptive;
pub mod countlaw;
pub mod ecf;
pub mod estimator;
pub mod real;
pub mod simulate;

pub use adaptive::{select_cutoff, select_cutoff_grid, AdaptiveConfig, AdaptiveError, KnMode};
pub use countlaw::{CountLaw, Family, LawError};
pub use ecf::{ecf_on_grid, CfError, CharFnGrid, FrequencyGrid, Provenance, Sample};
pub use estimator::{estimate_density, estimate_density_deterministic, CutoffRule, DensityEstimate, EstimateError, QuadRule, Quadrature};
pub use real::Real;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type CountLaw64 = CountLaw<f64>;
pub type CountLaw32 = CountLaw<f32>;
pub type Sample64 = Sample<f64>;
pub type FrequencyGrid64 = FrequencyGrid<f64>;
pub type CharFnGrid64 = CharFnGrid<f64>;
pub type DensityEstimate64 = DensityEstimate<f64>;
pub type CutoffRule64 = CutoffRule<f64>;
pub type AdaptiveConfig64 = AdaptiveConfig<f64>;
