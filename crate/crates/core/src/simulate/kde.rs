use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{quantile_sorted, sorted, SimError};
use crate::estimator::{DensityEstimate, Diagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bandwidth {
    /// `0.9 min(sd, IQR / 1.34) n^{-1/5}`.
    Silverman,
    Fixed { h: f64 },
}

/// Kernel contributions beyond this many bandwidths are below `1e-14` and skipped.
const KERNEL_REACH: f64 = 8.0;

pub fn silverman_bandwidth(xs: &[f64]) -> Result<f64, SimError> {
    let n = xs.len();
    if n < 2 {
        return Err(SimError::InvalidInput("Silverman bandwidth needs at least two observations".into()));
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if !(sd > 0.0) {
        return Err(SimError::DegenerateSample);
    }
    let s = sorted(xs);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Gaussian-kernel density estimate. The bandwidth is reported as `cutoff_used`.
pub fn kde(xs: &[f64], bandwidth: Bandwidth, x_grid: &[f64]) -> Result<DensityEstimate<f64>, SimError> {
    if xs.is_empty() {
        return Err(SimError::InvalidInput("empty sample".into()));
    }
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(xs)?,
        Bandwidth::Fixed { h } if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed { h } => return Err(SimError::InvalidInput(format!("bandwidth must be positive, got {h}"))),
    };
    let data = sorted(xs);
    let norm = 1.0 / (data.len() as f64 * h * (2.0 * PI).sqrt());
    let values = x_grid
        .iter()
        .map(|&x| {
            let lo = data.partition_point(|v| *v < x - KERNEL_REACH * h);
            let hi = data.partition_point(|v| *v <= x + KERNEL_REACH * h);
            data[lo..hi].iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>() * norm
        })
        .collect();
    Ok(DensityEstimate {
        x_grid: x_grid.to_vec(),
        values,
        cutoff_used: h,
        quadrature_nodes: 0,
        diagnostics: Diagnostics { max_imag_residue: 0.0, branch_violations: 0 },
    })
}
