//! Spectral density estimators for the summand density.
//!
//! The general estimator integrates `e^{-iux} H(phi_X(u))` over `[-U, U]`, where
//! `H = exp(-L_N^{-1})`. `H` is evaluated through the closed forms in
//! [`crate::countlaw`], which avoids the round trip through a complex logarithm.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::countlaw::{CountLaw, Family, LawError};
use crate::ecf::{ecf_on_grid, unwrap_log, CfError, CharFnGrid, FrequencyGrid, Provenance, Sample};
use crate::real::{cis_powers, Real};

pub const DEFAULT_QUAD_NODES: usize = 4096;
pub const DEFAULT_MODULUS_FLOOR: f64 = 1e-8;
/// Largest share of quadrature frequencies that may be clipped for branch violations.
pub const MAX_CLIPPED_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("characteristic function not available at quadrature node u = {u}")]
    InsufficientGrid { u: f64 },
    #[error("{clipped} of {total} frequencies clipped for branch violations")]
    BranchViolationMajority { clipped: usize, total: usize },
    #[error("|phi| = {modulus:e} below the modulus floor at u = {u}")]
    ModulusFloorViolation { u: f64, modulus: f64 },
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error(transparent)]
    Law(#[from] LawError),
}

/// How the cutoff `U` is chosen from the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CutoffRule<T> {
    Fixed { u: T },
    /// `c n^{1/(1+2 beta)}`.
    Polynomial { beta: T, c: T },
    /// `(log n / (2 c_gamma))^{1/gamma}`.
    Supersmooth { gamma: T, c_gamma: T },
    /// `n^{1/(beta + 2m(beta+1))}`, for the deterministic-count estimator.
    DeterministicSum { beta: T, m: u32 },
}

impl<T: Real> CutoffRule<T> {
    pub fn validate(&self) -> Result<(), EstimateError> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(EstimateError::InvalidInput(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            CutoffRule::Fixed { u } => positive("U", u),
            CutoffRule::Polynomial { beta, c } => positive("beta", beta).and(positive("c", c)),
            CutoffRule::Supersmooth { gamma, c_gamma } => positive("gamma", gamma).and(positive("c_gamma", c_gamma)),
            CutoffRule::DeterministicSum { beta, m } => {
                positive("beta", beta)?;
                if m == 0 {
                    return Err(EstimateError::InvalidInput("m must be at least 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn cutoff(&self, n: usize) -> Result<T, EstimateError> {
        self.validate()?;
        if n < 2 {
            return Err(EstimateError::InvalidInput(format!("cutoff rules need n >= 2, got {n}")));
        }
        let nf = T::of_usize(n);
        let one = T::one();
        let two = T::of(2.0);
        Ok(match *self {
            CutoffRule::Fixed { u } => u,
            CutoffRule::Polynomial { beta, c } => c * nf.powf(one / (one + two * beta)),
            CutoffRule::Supersmooth { gamma, c_gamma } => (nf.ln() / (two * c_gamma)).powf(one / gamma),
            CutoffRule::DeterministicSum { beta, m } => {
                let m = T::of(f64::from(m));
                nf.powf(one / (beta + two * m * (beta + one)))
            }
        })
    }
}

pub fn cutoff<T: Real>(rule: &CutoffRule<T>, n: usize) -> Result<T, EstimateError> {
    rule.cutoff(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuadRule {
    Trapezoid,
    /// Composite Simpson; the interval count `2 * nodes` is always even. The trapezoid
    /// endpoint error of order `(U/nodes)^2 |x|` is visible at 4096 nodes for `|x|` near 4.
    #[default]
    Simpson,
}

/// Quadrature on `2 * nodes + 1` equispaced frequencies over `[-U, U]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrature {
    pub nodes: usize,
    pub rule: QuadRule,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { nodes: DEFAULT_QUAD_NODES, rule: QuadRule::default() }
    }
}

impl From<usize> for Quadrature {
    fn from(nodes: usize) -> Self {
        Self { nodes, rule: QuadRule::default() }
    }
}

impl Quadrature {
    /// Weight of node `j` (0..=nodes) on either side of zero, in units of the step.
    fn weight<T: Real>(&self, j: usize) -> T {
        let q = self.nodes;
        match self.rule {
            QuadRule::Trapezoid => {
                if j == q {
                    T::of(0.5)
                } else {
                    T::one()
                }
            }
            QuadRule::Simpson => {
                // Index on the full grid is q + j; parity is the same for -j.
                let third = T::one() / T::of(3.0);
                if j == q {
                    third
                } else if (q + j) % 2 == 1 {
                    T::of(4.0) * third
                } else {
                    T::of(2.0) * third
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Diagnostics {
    pub max_imag_residue: f64,
    pub branch_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate<T> {
    pub x_grid: Vec<T>,
    pub values: Vec<T>,
    pub cutoff_used: T,
    pub quadrature_nodes: usize,
    pub diagnostics: Diagnostics,
}

impl<T: Real + Serialize> DensityEstimate<T> {
    /// Writes `x,density` rows with a header.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "density"])?;
        for (x, p) in self.x_grid.iter().zip(&self.values) {
            wtr.serialize((x, p))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// CF values at `j * U / q` for `j = 0..=q`, read from `cf` when it carries those
/// nodes and otherwise recomputed from its observations.
fn values_at_nodes<T: Real>(cf: &CharFnGrid<T>, u: T, q: usize) -> Result<Vec<Complex<T>>, EstimateError> {
    let du = u / T::of_usize(q);
    let grid = cf.grid();
    if let Some(step) = grid.step() {
        let ratio = du / step;
        let k = ratio.round();
        if k >= T::one() && (ratio - k).abs() <= T::tol(1e-9) * k {
            let k = k.to_usize().expect("positive ratio");
            if q * k < cf.nonnegative_values().len() {
                return Ok((0..=q).map(|j| cf.nonnegative_values()[j * k]).collect());
            }
        }
    }
    let direct: Option<Vec<_>> = (0..=q).map(|j| cf.lookup(du * T::of_usize(j))).collect();
    if let Some(v) = direct {
        return Ok(v);
    }
    if let Some(xs) = cf.observations() {
        let sample = Sample::new(xs.to_vec(), Provenance::Inline)?;
        let grid = FrequencyGrid::equispaced(u, q)?;
        return Ok(ecf_on_grid(&sample, &grid).nonnegative_values().to_vec());
    }
    let missing = (0..=q).map(|j| du * T::of_usize(j)).find(|uj| cf.lookup(*uj).is_none()).unwrap_or(u);
    Err(EstimateError::InsufficientGrid { u: missing.f64() })
}

fn check_inputs<T: Real>(u: T, x_grid: &[T], quad: &Quadrature) -> Result<(), EstimateError> {
    if !(u > T::zero() && u.is_finite()) {
        return Err(EstimateError::InvalidInput(format!("cutoff must be positive and finite, got {u}")));
    }
    if quad.nodes == 0 {
        return Err(EstimateError::InvalidInput("need at least one quadrature node".into()));
    }
    if x_grid.iter().any(|x| !x.is_finite()) {
        return Err(EstimateError::InvalidInput("x grid contains a non-finite value".into()));
    }
    Ok(())
}

/// `H(phi)` at each node, on the closed-form branch or by continuation along the nodes
/// for tabulated laws without one. `None` marks a branch violation.
fn h_along<T: Real>(law: &CountLaw<T>, phi: &[Complex<T>]) -> Result<Vec<Option<Complex<T>>>, EstimateError> {
    if matches!(law.family(), Family::Tabulated { weights } if weights.len() > 2) {
        return Ok(law.continue_inverse_lenient(phi).into_iter().map(|w| w.map(|w| (-w).exp())).collect());
    }
    phi.iter()
        .map(|z| match law.h(*z) {
            Ok(h) if h.re.is_finite() && h.im.is_finite() => Ok(Some(h)),
            Ok(_) | Err(LawError::BranchViolation { .. }) | Err(LawError::Domain(_)) => Ok(None),
            Err(e) => Err(e.into()),
        })
        .collect()
}

/// `(1/2pi) * sum_j w_j e^{-i u_j x} g(u_j) du` for each `x`, with `g(-u_j) = g_neg[j]`,
/// summed in ascending frequency order. Returns the real parts and the largest
/// imaginary residue.
fn invert<T: Real>(g_neg: &[Complex<T>], g_pos: &[Complex<T>], du: T, quad: &Quadrature, x_grid: &[T]) -> (Vec<T>, f64) {
    let q = quad.nodes;
    let weights: Vec<T> = (0..=q).map(|j| quad.weight(j)).collect();
    let scale = du / T::TAU();
    let out: Vec<(T, T)> = x_grid
        .par_iter()
        .map(|&x| {
            let rot = cis_powers(-du * x, q + 1);
            let mut acc = Complex::new(T::zero(), T::zero());
            for j in (1..=q).rev() {
                acc = acc + rot[j].conj() * g_neg[j] * weights[j];
            }
            for j in 0..=q {
                acc = acc + rot[j] * g_pos[j] * weights[j];
            }
            (acc.re * scale, (acc.im * scale).abs())
        })
        .collect();
    let max_imag = out.iter().map(|(_, im)| im.f64()).fold(0.0, f64::max);
    (out.into_iter().map(|(re, _)| re).collect(), max_imag)
}

/// General-count estimator from CF values covering `[-U, U]`.
pub fn estimate_density<T: Real>(
    cf: &CharFnGrid<T>,
    law: &CountLaw<T>,
    u: T,
    x_grid: &[T],
    quad: impl Into<Quadrature>,
) -> Result<DensityEstimate<T>, EstimateError> {
    let quad = quad.into();
    check_inputs(u, x_grid, &quad)?;
    let q = quad.nodes;
    let phi = values_at_nodes(cf, u, q)?;
    let conj: Vec<Complex<T>> = phi.iter().map(|z| z.conj()).collect();
    // The negative half is evaluated on its own rather than mirrored, so the imaginary
    // residue measures how far the computed integrand is from Hermitian symmetry.
    let pos = h_along(law, &phi)?;
    let neg = h_along(law, &conj)?;

    let zero = Complex::new(T::zero(), T::zero());
    let mut g_pos = Vec::with_capacity(q + 1);
    let mut g_neg = Vec::with_capacity(q + 1);
    let mut clipped = 0usize;
    for (p, n) in pos.into_iter().zip(neg) {
        match (p, n) {
            (Some(p), Some(n)) => {
                g_pos.push(p);
                g_neg.push(n);
            }
            _ => {
                g_pos.push(zero);
                g_neg.push(zero);
                clipped += 2;
            }
        }
    }
    // u = 0 is a single frequency, and phi = 1 there, so it never fails; j = 0 is counted
    // on the positive side only.
    let total = 2 * q + 1;
    if clipped as f64 > MAX_CLIPPED_SHARE * total as f64 {
        return Err(EstimateError::BranchViolationMajority { clipped, total });
    }
    let du = u / T::of_usize(q);
    let (values, max_imag_residue) = invert(&g_neg, &g_pos, du, &quad, x_grid);
    Ok(DensityEstimate {
        x_grid: x_grid.to_vec(),
        values,
        cutoff_used: u,
        quadrature_nodes: q,
        diagnostics: Diagnostics { max_imag_residue, branch_violations: clipped },
    })
}

/// Computes the empirical CF exactly at the quadrature nodes, then inverts.
pub fn estimate_density_from_sample<T: Real>(
    sample: &Sample<T>,
    law: &CountLaw<T>,
    u: T,
    x_grid: &[T],
    quad: impl Into<Quadrature>,
) -> Result<DensityEstimate<T>, EstimateError> {
    let quad = quad.into();
    check_inputs(u, x_grid, &quad)?;
    let grid = FrequencyGrid::equispaced(u, quad.nodes)?;
    estimate_density(&ecf_on_grid(sample, &grid), law, u, x_grid, quad)
}

/// Estimator for a deterministic count `N = m`, via the continuous `m`-th root of `phi_X`.
pub fn estimate_density_deterministic<T: Real>(
    cf: &CharFnGrid<T>,
    m: u32,
    u: T,
    x_grid: &[T],
    quad: impl Into<Quadrature>,
    modulus_floor: T,
) -> Result<DensityEstimate<T>, EstimateError> {
    let quad = quad.into();
    check_inputs(u, x_grid, &quad)?;
    if m == 0 {
        return Err(EstimateError::InvalidInput("m must be at least 1".into()));
    }
    if !(modulus_floor > T::zero()) {
        return Err(EstimateError::InvalidInput(format!("modulus floor must be positive, got {modulus_floor}")));
    }
    let q = quad.nodes;
    let du = u / T::of_usize(q);
    let phi = values_at_nodes(cf, u, q)?;
    let root = if m == 1 {
        phi
    } else {
        if let Some(j) = phi.iter().position(|z| !(z.norm() >= modulus_floor)) {
            return Err(EstimateError::ModulusFloorViolation { u: (du * T::of_usize(j)).f64(), modulus: phi[j].norm().f64() });
        }
        let nodes: Vec<T> = (0..=q).map(|j| du * T::of_usize(j)).collect();
        let inv_m = T::of(f64::from(m)).recip();
        unwrap_log(&nodes, &phi)?.into_iter().map(|l| (l * inv_m).exp()).collect()
    };
    let conj: Vec<Complex<T>> = root.iter().map(|z| z.conj()).collect();
    let (values, max_imag_residue) = invert(&conj, &root, du, &quad, x_grid);
    Ok(DensityEstimate {
        x_grid: x_grid.to_vec(),
        values,
        cutoff_used: u,
        quadrature_nodes: q,
        diagnostics: Diagnostics { max_imag_residue, branch_violations: 0 },
    })
}

/// `max_u (1 + u)^{1 + beta_bar} |phi(u)|` over `u = 0, step, 2 step, .. <= u_max`.
pub fn estimate_m<T: Real>(cf: &CharFnGrid<T>, beta_bar: T, u_max: T, step: T) -> Result<T, EstimateError> {
    if !(beta_bar > T::zero()) || !(u_max >= T::zero()) || !(step > T::zero()) {
        return Err(EstimateError::InvalidInput("beta_bar and step must be positive, u_max nonnegative".into()));
    }
    let count = (u_max / step + T::tol(1e-9)).floor().to_usize().unwrap_or(0);
    let power = T::one() + beta_bar;
    let mut best = T::zero();
    for j in 0..=count {
        let u = step * T::of_usize(j);
        let v = cf.lookup(u).ok_or(EstimateError::InsufficientGrid { u: u.f64() })?;
        best = best.max((T::one() + u).powf(power) * v.norm());
    }
    Ok(best)
}

/// [`estimate_m`] from a sample, with the CF computed on the equidistant grid itself.
pub fn estimate_m_from_sample<T: Real>(sample: &Sample<T>, beta_bar: T, u_max: T, step: T) -> Result<T, EstimateError> {
    if !(step > T::zero()) || !(u_max >= T::zero()) {
        return Err(EstimateError::InvalidInput("step must be positive, u_max nonnegative".into()));
    }
    let count = (u_max / step + T::tol(1e-9)).floor().to_usize().unwrap_or(0);
    let grid = FrequencyGrid::equispaced(step * T::of_usize(count), count)?;
    estimate_m(&ecf_on_grid(sample, &grid), beta_bar, u_max, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecf::exact_cf;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    type C = Complex<f64>;
    type Law = CountLaw<f64>;

    fn normal_pdf(x: f64) -> f64 {
        (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    fn laplace_pdf(x: f64) -> f64 {
        0.5 * (-x.abs()).exp()
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    fn sup_err(est: &DensityEstimate<f64>, f: impl Fn(f64) -> f64) -> f64 {
        est.x_grid.iter().zip(&est.values).map(|(x, p)| (p - f(*x)).abs()).fold(0.0, f64::max)
    }

    fn normal_sample(seed: u64, n: usize, scale: f64) -> Sample<f64> {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, scale).unwrap();
        Sample::new((0..n).map(|_| d.sample(&mut rng)).collect(), Provenance::Inline).unwrap()
    }

    #[test]
    fn cutoff_rules() {
        let r = CutoffRule::Polynomial { beta: 1.0f64, c: 1.0 / 3.0 };
        assert!((r.cutoff(1000).unwrap() - 10.0 / 3.0).abs() < 1e-12);
        let r = CutoffRule::Polynomial { beta: 1.0f64, c: 1.0 };
        assert!((r.cutoff(8).unwrap() - 2.0).abs() < 1e-12);
        // n = 3 with c_gamma = log(3)/2 gives (1)^{1/2}.
        let r = CutoffRule::Supersmooth { gamma: 2.0, c_gamma: 3f64.ln() / 2.0 };
        assert!((r.cutoff(3).unwrap() - 1.0).abs() < 1e-12);
        let r = CutoffRule::DeterministicSum { beta: 1.0f64, m: 2 };
        assert!((r.cutoff(1 << 9).unwrap() - 2.0).abs() < 1e-12);
        assert!(CutoffRule::Fixed { u: 0.0f64 }.cutoff(10).is_err());
        assert!(CutoffRule::Polynomial { beta: 1.0f64, c: 1.0 }.cutoff(1).is_err());
    }

    #[test]
    fn supersmooth_at_e() {
        // log n / (2 c) = 1 at n = e^{2c}; pick c so that n = 20 lands exactly.
        let c = 20f64.ln() / 2.0;
        let r = CutoffRule::Supersmooth { gamma: 2.0, c_gamma: c };
        assert!((r.cutoff(20).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_law_inverts_normal_cf() {
        let grid = FrequencyGrid::equispaced(8.0, 4096).unwrap();
        let cf = exact_cf(|u: f64| C::new((-u * u / 2.0).exp(), 0.0), &grid, "normal");
        let x = linspace(-5.0, 5.0, 201);
        let est = estimate_density(&cf, &Law::degenerate(), 8.0, &x, 4096).unwrap();
        assert!(sup_err(&est, normal_pdf) < 1e-6);
        assert!(est.diagnostics.max_imag_residue < 1e-10);
        assert_eq!(est.diagnostics.branch_violations, 0);
    }

    #[test]
    fn two_point_population_identity() {
        let law = Law::two_point(0.3).unwrap();
        let grid = FrequencyGrid::equispaced(20.0, 4096).unwrap();
        let cf = crate::ecf::exact_cf_compound(&law, |u: f64| C::new(1.0 / (1.0 + u * u), 0.0), &grid).unwrap();
        let x = linspace(-4.0, 4.0, 161);
        let est = estimate_density(&cf, &law, 20.0, &x, 4096).unwrap();
        // At the cusp the truncation bias is exactly (1/pi)(pi/2 - atan U).
        let cusp = (std::f64::consts::FRAC_PI_2 - 20f64.atan()) / std::f64::consts::PI;
        assert!((laplace_pdf(0.0) - est.values[80] - cusp).abs() < 1e-6);
        let away = x.iter().zip(&est.values).filter(|(x, _)| x.abs() >= 0.5).map(|(x, p)| (p - laplace_pdf(*x)).abs());
        assert!(away.fold(0.0, f64::max) < 2e-3);
        assert!(est.diagnostics.max_imag_residue < 1e-10);
    }

    #[test]
    fn compound_identity_for_all_closed_forms() {
        let laws = [Law::shifted_poisson(0.1).unwrap(), Law::geometric(0.8).unwrap(), Law::tabulated(vec![0.6, 0.3, 0.1]).unwrap()];
        let grid = FrequencyGrid::equispaced(7.5, 2048).unwrap();
        let x = linspace(-4.0, 4.0, 81);
        for law in laws {
            let cf = crate::ecf::exact_cf_compound(&law, |u: f64| C::new((-u * u / 2.0).exp(), 0.0), &grid).unwrap();
            let est = estimate_density(&cf, &law, 7.5, &x, 2048).unwrap();
            assert!(sup_err(&est, normal_pdf) < 1e-6, "{law}: {}", sup_err(&est, normal_pdf));
        }
    }

    #[test]
    fn small_cutoff_far_from_support() {
        let grid = FrequencyGrid::equispaced(0.05, 64).unwrap();
        let cf = exact_cf(|u: f64| C::new((-u * u / 2.0).exp(), 0.0), &grid, "normal");
        let est = estimate_density(&cf, &Law::degenerate(), 0.05, &[1e3], 64).unwrap();
        assert!(est.values[0].abs() <= 0.05 / std::f64::consts::PI);
    }

    #[test]
    fn missing_nodes_are_reported() {
        let grid = FrequencyGrid::equispaced(2.0, 10).unwrap();
        let cf = exact_cf(|u: f64| C::new((-u * u / 2.0).exp(), 0.0), &grid, "normal");
        let err = estimate_density(&cf, &Law::degenerate(), 4.0, &[0.0], 20).unwrap_err();
        assert!(matches!(err, EstimateError::InsufficientGrid { .. }));
    }

    #[test]
    fn empirical_grids_are_recomputed() {
        let s = normal_sample(3, 400, 1.0);
        let coarse = ecf_on_grid(&s, &FrequencyGrid::equispaced(1.0, 3).unwrap());
        let x = linspace(-2.0, 2.0, 9);
        let a = estimate_density(&coarse, &Law::degenerate(), 3.0, &x, 256).unwrap();
        let b = estimate_density_from_sample(&s, &Law::degenerate(), 3.0, &x, 256).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn subsampled_grid_matches_exact_grid() {
        let law = Law::two_point(0.3).unwrap();
        let s = normal_sample(4, 300, 1.0);
        let fine = ecf_on_grid(&s, &FrequencyGrid::equispaced(4.0, 1024).unwrap());
        let x = linspace(-2.0, 2.0, 5);
        let a = estimate_density(&fine, &law, 2.0, &x, 256).unwrap();
        let b = estimate_density_from_sample(&s, &law, 2.0, &x, 256).unwrap();
        for (p, r) in a.values.iter().zip(&b.values) {
            assert!((p - r).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_estimate_is_real() {
        let s = normal_sample(5, 2000, 1.0);
        let law = Law::shifted_poisson(0.1).unwrap();
        let x = linspace(-3.0, 3.0, 31);
        let est = estimate_density_from_sample(&s, &law, 3.0, &x, 4096).unwrap();
        assert!(est.diagnostics.max_imag_residue < 1e-8);
    }

    #[test]
    fn branch_violations_clip_or_fail() {
        // Two-point H has a branch point at z = -p^2 / (4(1-p)); constant phi beyond it.
        let law = Law::two_point(0.5).unwrap();
        let grid = FrequencyGrid::equispaced(1.0, 100).unwrap();
        let bad = exact_cf(|u: f64| if u > 0.955 { C::new(-0.5, 0.0) } else { C::new((-u * u).exp(), 0.0) }, &grid, "bad");
        let est = estimate_density(&bad, &law, 1.0, &[0.0], 100).unwrap();
        assert_eq!(est.diagnostics.branch_violations, 10);
        let worse = exact_cf(|u: f64| if u > 0.505 { C::new(-0.5, 0.0) } else { C::new(1.0, 0.0) }, &grid, "worse");
        let err = estimate_density(&worse, &law, 1.0, &[0.0], 100).unwrap_err();
        assert_eq!(err, EstimateError::BranchViolationMajority { clipped: 100, total: 201 });
    }

    #[test]
    fn oracle_error_decreases_with_cutoff() {
        let law = Law::shifted_poisson(0.1).unwrap();
        let x = linspace(-4.0, 4.0, 81);
        let mut last = f64::INFINITY;
        for u in [2.0, 4.0, 6.0, 8.0] {
            let grid = FrequencyGrid::equispaced(u, 1024).unwrap();
            // psi = -u^2/2 exactly, so the compound CF is L_N(u^2/2) without unwrapping.
            let cf = exact_cf(|u: f64| law.laplace(C::new(u * u / 2.0, 0.0)).unwrap(), &grid, "compound normal");
            let e = sup_err(&estimate_density(&cf, &law, u, &x, 1024).unwrap(), normal_pdf);
            assert!(e < last, "U = {u}: {e} >= {last}");
            last = e;
        }
    }

    #[test]
    fn deterministic_square_root() {
        let grid = FrequencyGrid::equispaced(8.0, 4096).unwrap();
        let cf = exact_cf(|u: f64| C::new((-u * u).exp(), 0.0), &grid, "normal sum");
        let x = linspace(-5.0, 5.0, 101);
        let est = estimate_density_deterministic(&cf, 2, 8.0, &x, 4096, 1e-30).unwrap();
        assert!(sup_err(&est, normal_pdf) < 1e-6);
    }

    #[test]
    fn deterministic_shifted_root_tracks_phase() {
        // X = xi_1 + xi_2 + xi_3 with xi ~ N(1, 1): phi_X = e^{3iu - 3u^2/2} winds the
        // circle several times; the continuous root recovers N(1, 1).
        let grid = FrequencyGrid::equispaced(6.0, 4096).unwrap();
        let cf = exact_cf(|u: f64| C::from_polar((-1.5 * u * u).exp(), 3.0 * u), &grid, "shifted");
        let x = linspace(-3.0, 5.0, 81);
        let est = estimate_density_deterministic(&cf, 3, 6.0, &x, 4096, 1e-30).unwrap();
        assert!(sup_err(&est, |x| normal_pdf(x - 1.0)) < 1e-6);
    }

    #[test]
    fn deterministic_m1_is_plain_inversion() {
        let s = normal_sample(6, 500, 1.0);
        let grid = FrequencyGrid::equispaced(4.0, 512).unwrap();
        let cf = ecf_on_grid(&s, &grid);
        let x = linspace(-3.0, 3.0, 13);
        let a = estimate_density_deterministic(&cf, 1, 4.0, &x, 512, 1e-8).unwrap();
        let b = estimate_density(&cf, &Law::degenerate(), 4.0, &x, 512).unwrap();
        for (p, r) in a.values.iter().zip(&b.values) {
            assert!((p - r).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_floor_violation() {
        let grid = FrequencyGrid::equispaced(10.0, 100).unwrap();
        let cf = exact_cf(|u: f64| C::new((-u * u).exp(), 0.0), &grid, "narrow");
        let err = estimate_density_deterministic(&cf, 2, 10.0, &[0.0], 100, 1e-8).unwrap_err();
        let EstimateError::ModulusFloorViolation { u, .. } = err else { panic!("{err:?}") };
        // e^{-u^2} < 1e-8 first at u = 4.3 on a 0.1 grid.
        assert!((u - 4.3).abs() < 1e-9);
    }

    #[test]
    fn m_hat_for_laplace() {
        let grid = FrequencyGrid::equispaced(100.0, 10_000).unwrap();
        let cf = exact_cf(|u: f64| C::new(1.0 / (1.0 + u * u), 0.0), &grid, "laplace");
        let m = estimate_m(&cf, 1.0, 100.0, 0.01).unwrap();
        assert!((m - 2.0).abs() < 1e-3);
        let point = CharFnGrid::from_parts(FrequencyGrid::equispaced(0.0, 0).unwrap(), vec![C::new(1.0, 0.0)], crate::ecf::CfSource::Exact { law: "point".into() }).unwrap();
        assert_eq!(estimate_m(&point, 3.0, 0.0, 0.1).unwrap(), 1.0);
        assert!(estimate_m(&cf, 1.0, 200.0, 0.01).is_err());
    }

    #[test]
    fn m_hat_from_sample_matches_grid() {
        let s = normal_sample(7, 100, 1.0);
        let a = estimate_m_from_sample(&s, 2.0, 10.0, 0.01).unwrap();
        let grid = FrequencyGrid::equispaced(10.0, 1000).unwrap();
        let b = estimate_m(&ecf_on_grid(&s, &grid), 2.0, 10.0, 0.01).unwrap();
        assert!((a - b).abs() < 1e-12 * b);
        assert!(a >= 1.0);
    }

    #[test]
    fn csv_and_json() {
        let est = DensityEstimate {
            x_grid: vec![0.0, 1.0],
            values: vec![0.5, 0.25],
            cutoff_used: 2.0,
            quadrature_nodes: 8,
            diagnostics: Diagnostics { max_imag_residue: 0.0, branch_violations: 0 },
        };
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,density\n0.0,0.5\n1.0,0.25\n");
        let v: serde_json::Value = serde_json::from_str(&est.to_json().unwrap()).unwrap();
        assert_eq!(v["diagnostics"]["branch_violations"], 0);
    }

    #[test]
    fn f32_estimate() {
        let grid = FrequencyGrid::<f32>::equispaced(6.0, 512).unwrap();
        let cf = exact_cf(|u: f32| Complex::new((-u * u / 2.0).exp(), 0.0), &grid, "normal");
        let est = estimate_density(&cf, &CountLaw::<f32>::two_point(0.9).unwrap(), 6.0, &[0.0f32], 512);
        assert!(est.unwrap().values[0].is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn scaling_equivariance(seed in 0u64..1000, c in 0.25f64..4.0) {
            let s = normal_sample(seed, 200, 1.0);
            let law = Law::two_point(0.4).unwrap();
            let x = linspace(-2.0, 2.0, 7);
            let base = estimate_density_from_sample(&s, &law, 2.0, &x, 256).unwrap();
            let xc: Vec<f64> = x.iter().map(|v| v * c).collect();
            let scaled = estimate_density_from_sample(&s.scaled(c), &law, 2.0 / c, &xc, 256).unwrap();
            for (p, q) in base.values.iter().zip(&scaled.values) {
                prop_assert!((q - p / c).abs() < 1e-10, "{} vs {}", q, p / c);
            }
        }

        #[test]
        fn deterministic_output(seed in 0u64..1000) {
            let s = normal_sample(seed, 100, 1.0);
            let law = Law::geometric(0.7).unwrap();
            let x = linspace(-2.0, 2.0, 5);
            let a = estimate_density_from_sample(&s, &law, 1.5, &x, 128).unwrap();
            let b = estimate_density_from_sample(&s, &law, 1.5, &x, 128).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
