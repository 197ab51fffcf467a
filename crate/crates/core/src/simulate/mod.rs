//! Compound-sum simulation, the Monte Carlo experiment protocol and the claims pipeline.
//!
//! Everything here works in `f64`.

mod claims;
mod experiment;
mod gridsearch;
mod innovation;
mod kde;

pub use claims::{fit_two_point, ingest_claims, ingest_claims_with, write_claims, ClaimRecord, ClaimsDataset, IngestMode, IngestOptions, IngestReport, Rejection};
pub use experiment::{
    error_on_grid, linspace, rate_slope, run_experiment, AdaptiveSpec, CutoffChoice, ExperimentConfig, ExperimentReport, KHatStats, NSummary, ReplicationRecord,
};
pub use gridsearch::{compound_from_density, grid_search_cutoff, resample_from_density, GridRow, GridSearchOptions, GridSearchResult};
pub use innovation::{sample_compound, CustomInnovation, InnovationKind, InnovationLaw, SmoothnessClass};
pub use kde::{kde, silverman_bandwidth, Bandwidth};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::adaptive::AdaptiveError;
use crate::countlaw::LawError;
use crate::ecf::CfError;
use crate::estimator::EstimateError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("estimate grid does not cover the evaluation grid at x = {x}")]
    GridMismatch { x: f64 },
    #[error("need at least {needed} sample sizes with finite median error, have {have}")]
    InsufficientPoints { needed: usize, have: usize },
    #[error("sample has zero spread")]
    DegenerateSample,
    #[error("{file}: {message}")]
    Schema { file: String, message: String },
    #[error("policy {policy_id}: claim count {count} but {amounts} severity rows")]
    JoinMismatch { policy_id: String, count: u32, amounts: usize },
    #[error("policy {policy_id}: claim amount {amount} is not positive")]
    NonpositiveAmount { policy_id: String, amount: f64 },
    #[error("policy {policy_id}: claim count {count} outside the two-point support")]
    UnsupportedCount { policy_id: String, count: u32 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Adaptive(#[from] AdaptiveError),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Cf(#[from] CfError),
}

/// Role tags for RNG substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub(crate) enum Role {
    Counts = 1,
    Innovations = 2,
    Resample = 3,
}

/// Independent ChaCha stream for `(seed, replication, role)`. Draws are consumed in order,
/// so a larger sample from the same stream extends a smaller one.
pub(crate) fn substream(seed: u64, rep: u64, role: Role) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((rep << 8) | role as u64);
    rng
}

/// Type-7 sample quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub(crate) fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_differ_and_repeat() {
        let a: u64 = substream(1, 0, Role::Counts).random();
        let b: u64 = substream(1, 0, Role::Innovations).random();
        let c: u64 = substream(1, 1, Role::Counts).random();
        assert!(a != b && a != c && b != c);
        assert_eq!(a, substream(1, 0, Role::Counts).random::<u64>());
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }
}
