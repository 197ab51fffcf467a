//! Data-driven choice of the cutoff among `U = k h`, `k = 1..=K`, by comparing each
//! estimate with all larger-cutoff estimates against the penalty `V(k) = ell k / n`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::countlaw::{CountLaw, LawError};
use crate::ecf::Sample;
use crate::estimator::{estimate_density_from_sample, estimate_m_from_sample, DensityEstimate, EstimateError, Quadrature};
use crate::real::Real;

/// Headroom over the minimal penalty level; the bound must hold strictly.
pub const ELL_HEADROOM: f64 = 1.01;
/// Frequency range and step of the `M` plug-in used for automatic penalties.
pub const M_HAT_U_MAX: f64 = 10.0;
pub const M_HAT_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptiveError {
    #[error("invalid adaptive configuration: {0}")]
    InvalidConfig(String),
    #[error("estimate for k = {k} failed: {source}")]
    Estimate {
        k: usize,
        #[source]
        source: EstimateError,
    },
    #[error("penalty calibration failed: {0}")]
    Calibration(#[from] EstimateError),
    #[error(transparent)]
    Law(#[from] LawError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdaptiveConfig<T> {
    /// Cutoff step: candidate `k` uses `U = k h`.
    pub h: T,
    /// Number of candidates.
    pub k_max: usize,
    pub ell: T,
    pub quad: Quadrature,
}

impl<T: Real> AdaptiveConfig<T> {
    pub fn validate(&self) -> Result<(), AdaptiveError> {
        if !(self.h > T::zero() && self.h.is_finite()) {
            return Err(AdaptiveError::InvalidConfig(format!("h must be positive, got {}", self.h)));
        }
        if self.k_max == 0 {
            return Err(AdaptiveError::InvalidConfig("need at least one candidate cutoff".into()));
        }
        if !(self.ell > T::zero() && self.ell.is_finite()) {
            return Err(AdaptiveError::InvalidConfig(format!("ell must be positive, got {}", self.ell)));
        }
        Ok(())
    }
}

/// `kappa^2 M E[N] h`.
pub fn ell_lower_bound<T: Real>(kappa: T, m: T, mean_n: T, h: T) -> Result<T, AdaptiveError> {
    if [kappa, m, mean_n, h].iter().any(|v| !(*v > T::zero() && v.is_finite())) {
        return Err(AdaptiveError::InvalidConfig("penalty bound needs positive kappa, M, E[N] and h".into()));
    }
    Ok(kappa * kappa * m * mean_n * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KnMode {
    Simulation,
    RealData,
}

/// `floor(n^{1/4})`, doubled for real data; at least 1.
pub fn default_k_n(n: usize, mode: KnMode) -> usize {
    // Integer fourth root, so perfect powers are exact.
    let mut r = (n as f64).powf(0.25).floor() as usize;
    while (r + 1).pow(4) <= n {
        r += 1;
    }
    while r > 0 && r.pow(4) > n {
        r -= 1;
    }
    let r = r.max(1);
    match mode {
        KnMode::Simulation => r,
        KnMode::RealData => 2 * r,
    }
}

/// Inputs and result of the automatic penalty level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltyCalibration<T> {
    pub kappa: T,
    pub m_hat: T,
    pub mean_n: T,
    pub lower_bound: T,
    pub ell: T,
}

/// `ell = 1.01 kappa^2 M_hat E[N] h`. `kappa` comes from `rho0` when given and from
/// the symmetric-innovation constant otherwise.
pub fn calibrate_penalty<T: Real>(
    sample: &Sample<T>,
    law: &CountLaw<T>,
    h: T,
    beta_bar: T,
    rho0: Option<T>,
) -> Result<PenaltyCalibration<T>, AdaptiveError> {
    let kappa = match rho0 {
        Some(r) => law.kappa_from_rho0(r)?,
        None => law.kappa_symmetric()?,
    };
    let m_hat = estimate_m_from_sample(sample, beta_bar, T::of(M_HAT_U_MAX), T::of(M_HAT_STEP))?;
    let mean_n = law.moments().mean;
    let lower_bound = ell_lower_bound(kappa, m_hat, mean_n, h)?;
    Ok(PenaltyCalibration { kappa, m_hat, mean_n, lower_bound, ell: lower_bound * T::of(ELL_HEADROOM) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry<T> {
    pub k: usize,
    pub a: T,
    pub v: T,
    pub estimate: T,
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection<T> {
    pub x: T,
    pub k_hat: usize,
    pub cutoff: T,
    pub estimate: T,
    pub trace: Vec<TraceEntry<T>>,
}

/// Selection from the estimates `p_k(x)` for `k = 1..=estimates.len()`.
pub fn select_from_estimates<T: Real>(estimates: &[T], ell: T, n: usize) -> (usize, Vec<TraceEntry<T>>) {
    let nf = T::of_usize(n);
    let penalty = |k: usize| ell * T::of_usize(k) / nf;
    let k_n = estimates.len();
    let mut trace: Vec<TraceEntry<T>> = (1..=k_n)
        .map(|k| {
            let pk = estimates[k - 1];
            let a = (k + 1..=k_n).map(|kp| {
                let d = estimates[kp - 1] - pk;
                (d * d - penalty(kp)).max(T::zero())
            });
            let a = a.fold(T::zero(), T::max);
            TraceEntry { k, a, v: penalty(k), estimate: pk, chosen: false }
        })
        .collect();
    let mut best = 0;
    for i in 1..trace.len() {
        if trace[i].a + trace[i].v < trace[best].a + trace[best].v {
            best = i;
        }
    }
    if let Some(t) = trace.get_mut(best) {
        t.chosen = true;
    }
    (best + 1, trace)
}

/// Estimates for every candidate on `x_grid`, in order of `k`.
pub fn candidate_estimates<T: Real>(
    sample: &Sample<T>,
    law: &CountLaw<T>,
    config: &AdaptiveConfig<T>,
    x_grid: &[T],
) -> Result<Vec<DensityEstimate<T>>, AdaptiveError> {
    config.validate()?;
    (1..=config.k_max)
        .into_par_iter()
        .map(|k| {
            let u = config.h * T::of_usize(k);
            estimate_density_from_sample(sample, law, u, x_grid, config.quad).map_err(|source| AdaptiveError::Estimate { k, source })
        })
        .collect()
}

/// Pointwise selection at a single `x`.
pub fn select_cutoff<T: Real>(sample: &Sample<T>, law: &CountLaw<T>, config: &AdaptiveConfig<T>, x: T) -> Result<Selection<T>, AdaptiveError> {
    let mut batch = select_cutoff_grid(sample, law, config, &[x])?;
    Ok(batch.selections.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSelection<T> {
    pub x_grid: Vec<T>,
    /// Selected estimate at each `x`.
    pub values: Vec<T>,
    pub selections: Vec<Selection<T>>,
    pub branch_violations: usize,
}

/// Pointwise selection over a grid, reusing one estimate per candidate across all `x`.
pub fn select_cutoff_grid<T: Real>(
    sample: &Sample<T>,
    law: &CountLaw<T>,
    config: &AdaptiveConfig<T>,
    x_grid: &[T],
) -> Result<BatchSelection<T>, AdaptiveError> {
    let per_k = candidate_estimates(sample, law, config, x_grid)?;
    let n = sample.len();
    let selections: Vec<Selection<T>> = x_grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let column: Vec<T> = per_k.iter().map(|e| e.values[i]).collect();
            let (k_hat, trace) = select_from_estimates(&column, config.ell, n);
            Selection { x, k_hat, cutoff: config.h * T::of_usize(k_hat), estimate: column[k_hat - 1], trace }
        })
        .collect();
    Ok(BatchSelection {
        x_grid: x_grid.to_vec(),
        values: selections.iter().map(|s| s.estimate).collect(),
        branch_violations: per_k.iter().map(|e| e.diagnostics.branch_violations).sum(),
        selections,
    })
}
