use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{kde, linspace, substream, Bandwidth, ClaimsDataset, Role, SimError};
use crate::countlaw::CountLaw;
use crate::estimator::{estimate_density_from_sample, Quadrature};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOptions {
    /// Grid for comparing densities of `X`.
    pub eval_grid: Vec<f64>,
    /// Points on which the summand density is estimated before resampling; defaults to
    /// the data range padded by a quarter of its width on each side.
    pub xi_grid: Option<Vec<f64>>,
    pub xi_points: usize,
    pub bandwidth: Bandwidth,
    pub quad: Quadrature,
}

impl Default for GridSearchOptions {
    fn default() -> Self {
        Self { eval_grid: linspace(-0.296, 11.2, 1000), xi_grid: None, xi_points: 2001, bandwidth: Bandwidth::Silverman, quad: Quadrature::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub u: f64,
    pub mean_error: Option<f64>,
    pub errors: Vec<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSearchResult {
    pub u_best: f64,
    pub table: Vec<GridRow>,
}

/// Inverse-CDF draws from a density tabulated on an increasing grid. Negative values are
/// clipped to zero; the CDF is the trapezoid integral, linear between grid points.
pub fn resample_from_density<R: Rng + ?Sized>(x: &[f64], density: &[f64], count: usize, rng: &mut R) -> Result<Vec<f64>, SimError> {
    if x.len() < 2 || x.len() != density.len() {
        return Err(SimError::InvalidInput("need at least two grid points with matching density values".into()));
    }
    let mut cdf = Vec::with_capacity(x.len());
    cdf.push(0.0);
    for i in 1..x.len() {
        let area = 0.5 * (density[i - 1].max(0.0) + density[i].max(0.0)) * (x[i] - x[i - 1]);
        cdf.push(cdf[i - 1] + area);
    }
    let total = *cdf.last().unwrap();
    if !(total > 0.0 && total.is_finite()) {
        return Err(SimError::InvalidInput("estimated density has no positive mass".into()));
    }
    Ok((0..count)
        .map(|_| {
            let t = rng.random::<f64>() * total;
            let i = cdf.partition_point(|c| *c <= t).clamp(1, x.len() - 1);
            let span = cdf[i] - cdf[i - 1];
            let frac = if span > 0.0 { (t - cdf[i - 1]) / span } else { 0.0 };
            x[i - 1] + frac * (x[i] - x[i - 1])
        })
        .collect())
}

/// `n` compound sums whose summands follow the tabulated density, drawn from the
/// replication-`rep` streams of `seed`.
pub fn compound_from_density(law: &CountLaw<f64>, x: &[f64], density: &[f64], n: usize, seed: u64, rep: u64) -> Result<Vec<f64>, SimError> {
    let sampler = law.sampler();
    let mut counts = substream(seed, rep, Role::Counts);
    let mut draws = substream(seed, rep, Role::Resample);
    let ns: Vec<u32> = (0..n).map(|_| counts.sample(&sampler)).collect();
    let total: u32 = ns.iter().sum();
    let xi = resample_from_density(x, density, total as usize, &mut draws)?;
    let mut it = xi.into_iter();
    Ok(ns.iter().map(|&m| it.by_ref().take(m as usize).sum()).collect())
}

fn padded_grid(xs: &[f64], points: usize) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.25 * (hi - lo).max(1.0);
    linspace(lo - pad, hi + pad, points)
}

/// For each `U`: estimate the summand density, draw `resamples` compound samples of size
/// `resample_n` from it, and average the squared distance between their KDE and the KDE
/// of the data on the evaluation grid. Resample `k` uses the same random streams for
/// every `U`.
pub fn grid_search_cutoff(
    dataset: &ClaimsDataset,
    law: &CountLaw<f64>,
    u_grid: &[f64],
    resamples: usize,
    resample_n: usize,
    seed: u64,
    options: &GridSearchOptions,
) -> Result<GridSearchResult, SimError> {
    if u_grid.is_empty() || resamples == 0 || resample_n < 2 {
        return Err(SimError::InvalidInput("need a nonempty U grid, at least one resample and resample_n >= 2".into()));
    }
    let sample = dataset.sample()?;
    let data_kde = kde(sample.observations(), options.bandwidth, &options.eval_grid)?;
    let xi_grid = options.xi_grid.clone().unwrap_or_else(|| padded_grid(sample.observations(), options.xi_points));
    let table: Vec<GridRow> = u_grid
        .iter()
        .map(|&u| {
            let run = || -> Result<Vec<f64>, SimError> {
                let est = estimate_density_from_sample(&sample, law, u, &xi_grid, options.quad)?;
                (0..resamples)
                    .into_par_iter()
                    .map(|k| {
                        let xs = compound_from_density(law, &xi_grid, &est.values, resample_n, seed, k as u64)?;
                        let sim = kde(&xs, options.bandwidth, &options.eval_grid)?;
                        let j = options.eval_grid.len() as f64;
                        Ok(sim.values.iter().zip(&data_kde.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / j)
                    })
                    .collect()
            };
            match run() {
                Ok(errors) => GridRow { u, mean_error: Some(errors.iter().sum::<f64>() / errors.len() as f64), errors, failure: None },
                Err(e) => GridRow { u, mean_error: None, errors: Vec::new(), failure: Some(e.to_string()) },
            }
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for row in &table {
        if let Some(e) = row.mean_error {
            if best.is_none_or(|(bu, b)| e < b || (e == b && row.u < bu)) {
                best = Some((row.u, e));
            }
        }
    }
    let (u_best, _) = best.ok_or_else(|| SimError::InvalidInput("every cutoff on the grid failed".into()))?;
    Ok(GridSearchResult { u_best, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{sorted, ClaimRecord, IngestReport};
    use rand::SeedableRng;

    fn dataset(xs: &[f64]) -> ClaimsDataset {
        let records = xs
            .iter()
            .enumerate()
            .map(|(i, x)| ClaimRecord { policy_id: i.to_string(), claim_count: 1, claim_amounts: vec![x.exp()] })
            .collect();
        ClaimsDataset { records, report: IngestReport::default(), source: "test".into() }
    }

    #[test]
    fn resampling_follows_density() {
        // Triangular density on [0, 2]; CDF x^2/2 on [0, 1].
        let x = linspace(0.0, 2.0, 201);
        let p: Vec<f64> = x.iter().map(|v| if *v <= 1.0 { *v } else { 2.0 - v }).collect();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let draws = sorted(&resample_from_density(&x, &p, 20_000, &mut rng).unwrap());
        assert!(draws.iter().all(|d| (0.0..=2.0).contains(d)));
        let below_half = draws.partition_point(|d| *d < 0.5) as f64 / 20_000.0;
        assert!((below_half - 0.125).abs() < 0.01);
    }

    #[test]
    fn negative_lobes_are_clipped() {
        let x = linspace(0.0, 3.0, 4);
        let p = [-1.0, 1.0, -1.0, -1.0];
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2);
        let draws = resample_from_density(&x, &p, 1000, &mut rng).unwrap();
        assert!(draws.iter().all(|d| (0.0..=2.0).contains(d)));
        assert!(resample_from_density(&x, &[-1.0; 4], 10, &mut rng).is_err());
    }

    #[test]
    fn single_cutoff_is_returned() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..200).map(|_| 5.0 + rng.random::<f64>()).collect();
        let opts = GridSearchOptions { xi_points: 201, quad: Quadrature::from(256), ..Default::default() };
        let r = grid_search_cutoff(&dataset(&xs), &CountLaw::degenerate(), &[7.0], 2, 100, 0, &opts).unwrap();
        assert_eq!(r.u_best, 7.0);
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.table[0].errors.len(), 2);
    }

    #[test]
    fn deterministic_and_tie_free() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..150).map(|_| 5.0 + rng.random::<f64>()).collect();
        let opts = GridSearchOptions { xi_points: 201, quad: Quadrature::from(256), ..Default::default() };
        let ds = dataset(&xs);
        let a = grid_search_cutoff(&ds, &CountLaw::degenerate(), &[2.0, 6.0, 12.0], 3, 100, 9, &opts).unwrap();
        let b = grid_search_cutoff(&ds, &CountLaw::degenerate(), &[2.0, 6.0, 12.0], 3, 100, 9, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.table.iter().all(|r| r.mean_error.is_some()));
    }
}
