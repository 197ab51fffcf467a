//! Empirical and exact characteristic functions on symmetric frequency grids.
//!
//! Grids store only the nonnegative half `0 = u_0 < u_1 < ..`; values at `-u` are
//! the complex conjugates of the values at `u`, so conjugate symmetry holds by
//! construction.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::countlaw::{CountLaw, LawError};
use crate::real::{cis, Real, RESYNC};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CfError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("characteristic function vanishes (|phi| < 1e-13) at u = {u}")]
    ZeroCharacteristicFunction { u: f64 },
    #[error("grid too coarse to unwrap the phase at u = {u} (|step in arg| > pi/2)")]
    UnderResolvedGrid { u: f64 },
    #[error(transparent)]
    Law(#[from] LawError),
}

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Simulated { seed: u64 },
    Ingested { source: String },
    Inline,
}

/// Nonempty collection of finite observations of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    observations: Vec<T>,
    provenance: Provenance,
}

impl<T: Real> Sample<T> {
    pub fn new(observations: Vec<T>, provenance: Provenance) -> Result<Self, CfError> {
        if observations.is_empty() {
            return Err(CfError::EmptySample);
        }
        if let Some(i) = observations.iter().position(|x| !x.is_finite()) {
            return Err(CfError::NonFinite(i));
        }
        Ok(Self { observations, provenance })
    }

    pub fn observations(&self) -> &[T] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Copy with every observation multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self { observations: self.observations.iter().map(|x| *x * c).collect(), provenance: self.provenance.clone() }
    }
}

/// Nonnegative half of a frequency grid symmetric about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid<T> {
    nodes: Vec<T>,
    step: Option<T>,
}

impl<T: Real> FrequencyGrid<T> {
    /// `u_j = j * u_max / intervals` for `j = 0..=intervals`.
    pub fn equispaced(u_max: T, intervals: usize) -> Result<Self, CfError> {
        if !(u_max >= T::zero() && u_max.is_finite()) || (intervals == 0 && !u_max.is_zero()) {
            return Err(CfError::InvalidGrid(format!("need u_max >= 0 and at least one interval (u_max = {u_max})")));
        }
        if intervals == 0 {
            return Ok(Self { nodes: vec![T::zero()], step: None });
        }
        let step = u_max / T::of_usize(intervals);
        let nodes = (0..=intervals).map(|j| step * T::of_usize(j)).collect();
        Ok(Self { nodes, step: Some(step) })
    }

    /// From the nonnegative half, which must start at 0 and strictly increase.
    pub fn from_nonnegative(nodes: Vec<T>) -> Result<Self, CfError> {
        if nodes.first().is_none_or(|u| !u.is_zero()) {
            return Err(CfError::InvalidGrid("grid must contain u = 0 as its first nonnegative node".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|u| !u.is_finite()) {
            return Err(CfError::InvalidGrid("grid nodes must be finite and strictly increasing".into()));
        }
        Ok(Self { nodes, step: None })
    }

    /// From a full grid, which must be symmetric about zero and contain zero.
    pub fn from_symmetric(all: &[T]) -> Result<Self, CfError> {
        let mut sorted = all.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let n = sorted.len();
        for i in 0..n {
            let (a, b) = (sorted[i], sorted[n - 1 - i]);
            if (a + b).abs() > T::tol(1e-12) * T::one().max(a.abs()) {
                return Err(CfError::InvalidGrid("grid is not symmetric about zero".into()));
            }
        }
        let nonneg: Vec<T> = sorted.into_iter().filter(|u| *u >= T::zero()).collect();
        Self::from_nonnegative(nonneg)
    }

    pub fn nonnegative(&self) -> &[T] {
        &self.nodes
    }

    /// Node spacing, for grids built by [`Self::equispaced`].
    pub fn step(&self) -> Option<T> {
        self.step
    }

    pub fn u_max(&self) -> T {
        *self.nodes.last().expect("grid has u = 0")
    }

    /// Full symmetric grid in ascending order.
    pub fn symmetric(&self) -> Vec<T> {
        self.nodes.iter().skip(1).rev().map(|u| -*u).chain(self.nodes.iter().copied()).collect()
    }
}

/// Provenance of the values held by a [`CharFnGrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CfSource {
    Empirical { n: usize },
    Exact { law: String },
}

/// Characteristic function values on a symmetric grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFnGrid<T> {
    grid: FrequencyGrid<T>,
    values: Vec<Complex<T>>,
    source: CfSource,
    observations: Option<Arc<[T]>>,
}

impl<T: Real> CharFnGrid<T> {
    /// Wraps precomputed nonnegative-half values. The value at `u = 0` is set to 1.
    pub fn from_parts(grid: FrequencyGrid<T>, mut values: Vec<Complex<T>>, source: CfSource) -> Result<Self, CfError> {
        if values.len() != grid.nodes.len() {
            return Err(CfError::InvalidGrid(format!("{} values for {} nodes", values.len(), grid.nodes.len())));
        }
        values[0] = Complex::new(T::one(), T::zero());
        Ok(Self { grid, values, source, observations: None })
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn source(&self) -> &CfSource {
        &self.source
    }

    /// The observations behind an empirical grid, so it can be re-evaluated elsewhere.
    pub fn observations(&self) -> Option<&[T]> {
        self.observations.as_deref()
    }

    pub fn nonnegative_nodes(&self) -> &[T] {
        &self.grid.nodes
    }

    pub fn nonnegative_values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// Ascending symmetric frequencies.
    pub fn u_values(&self) -> Vec<T> {
        self.grid.symmetric()
    }

    /// Values matching [`Self::u_values`].
    pub fn values(&self) -> Vec<Complex<T>> {
        self.values.iter().skip(1).rev().map(|v| v.conj()).chain(self.values.iter().copied()).collect()
    }

    /// Value at a grid node `u` (either sign), matched to relative tolerance `1e-9` of the
    /// local spacing.
    pub fn lookup(&self, u: T) -> Option<Complex<T>> {
        let a = u.abs();
        let nodes = &self.grid.nodes;
        let i = nodes.partition_point(|x| *x < a);
        let spacing = if nodes.len() > 1 { nodes[1] - nodes[0] } else { T::one() };
        let tol = T::tol(1e-9) * spacing.max(T::min_positive_value());
        let pick = [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&j| j < nodes.len())
            .min_by(|&j, &k| (nodes[j] - a).abs().partial_cmp(&(nodes[k] - a).abs()).unwrap())?;
        if (nodes[pick] - a).abs() > tol {
            return None;
        }
        let v = self.values[pick];
        Some(if u < T::zero() { v.conj() } else { v })
    }
}

/// Empirical characteristic function `n^{-1} sum_k e^{i u X_k}` on the grid.
pub fn ecf_on_grid<T: Real>(sample: &Sample<T>, grid: &FrequencyGrid<T>) -> CharFnGrid<T> {
    let xs = sample.observations();
    let n_inv = T::of_usize(xs.len()).recip();
    let nodes = &grid.nodes;

    let mut values: Vec<Complex<T>> = match grid.step {
        Some(step) => {
            // e^{i u_j x} by rotation within blocks of RESYNC nodes; every block starts
            // from an exact sin_cos. Sums run over samples in order, so results do not
            // depend on how blocks are scheduled across threads.
            let rotations: Vec<Complex<T>> = xs.iter().map(|x| cis(step * *x)).collect();
            let blocks: Vec<usize> = (0..nodes.len()).step_by(RESYNC).collect();
            blocks
                .par_iter()
                .flat_map_iter(|&start| {
                    let len = RESYNC.min(nodes.len() - start);
                    let mut acc = vec![Complex::new(T::zero(), T::zero()); len];
                    let u0 = step * T::of_usize(start);
                    for (x, rot) in xs.iter().zip(&rotations) {
                        let mut w = cis(u0 * *x);
                        for slot in acc.iter_mut() {
                            *slot = *slot + w;
                            w = w * *rot;
                        }
                    }
                    acc.into_iter().map(move |s| s * n_inv)
                })
                .collect()
        }
        None => nodes
            .par_iter()
            .map(|u| xs.iter().fold(Complex::new(T::zero(), T::zero()), |acc, x| acc + cis(*u * *x)) * n_inv)
            .collect(),
    };
    values[0] = Complex::new(T::one(), T::zero());
    CharFnGrid { grid: grid.clone(), values, source: CfSource::Empirical { n: xs.len() }, observations: Some(xs.into()) }
}

/// Exact characteristic function `cf` tabulated on the grid.
pub fn exact_cf<T, F>(cf: F, grid: &FrequencyGrid<T>, label: impl Into<String>) -> CharFnGrid<T>
where
    T: Real,
    F: Fn(T) -> Complex<T> + Sync,
{
    let mut values: Vec<Complex<T>> = grid.nodes.par_iter().map(|u| cf(*u)).collect();
    values[0] = Complex::new(T::one(), T::zero());
    CharFnGrid { grid: grid.clone(), values, source: CfSource::Exact { law: label.into() }, observations: None }
}

/// Continuous logarithm of CF values along ascending nonnegative nodes, anchored at
/// `log(values[0])` with its principal argument.
pub fn unwrap_log<T: Real>(nodes: &[T], values: &[Complex<T>]) -> Result<Vec<Complex<T>>, CfError> {
    let half_pi = T::FRAC_PI_2();
    let mut out = Vec::with_capacity(values.len());
    let mut phase = T::zero();
    for (j, v) in values.iter().enumerate() {
        if j == 0 {
            phase = v.arg();
        } else {
            let step = (v / values[j - 1]).arg();
            if step.abs() > half_pi {
                return Err(CfError::UnderResolvedGrid { u: nodes[j].f64() });
            }
            phase = phase + step;
        }
        out.push(Complex::new(v.norm().ln(), phase));
    }
    Ok(out)
}

/// `phi_X(u) = L_N(-psi_xi(u))` with `psi_xi` the continuous logarithm of the summand
/// characteristic function from `u = 0`.
pub fn exact_cf_compound<T, F>(law: &CountLaw<T>, innovation_cf: F, grid: &FrequencyGrid<T>) -> Result<CharFnGrid<T>, CfError>
where
    T: Real,
    F: Fn(T) -> Complex<T> + Sync,
{
    let floor = T::tol(1e-13);
    let phi: Vec<Complex<T>> = grid.nodes.par_iter().map(|u| innovation_cf(*u)).collect();
    if let Some(j) = phi.iter().position(|v| !(v.norm() >= floor)) {
        return Err(CfError::ZeroCharacteristicFunction { u: grid.nodes[j].f64() });
    }
    let psi = unwrap_log(&grid.nodes, &phi)?;
    let values = psi.iter().map(|p| law.laplace(-*p)).collect::<Result<Vec<_>, _>>()?;
    CharFnGrid::from_parts(grid.clone(), values, CfSource::Exact { law: law.to_string() })
}
