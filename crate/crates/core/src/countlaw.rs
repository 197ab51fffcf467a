//! Known distribution of the number of summands `N` and its Laplace-transform calculus.
//!
//! A [`CountLaw`] is a pmf on `{1, 2, ...}`. Besides the Laplace transform
//! `L_N(w) = E[exp(-w N)]` it provides the inverse `L_N^{-1}`, the function
//! `H(z) = exp(-L_N^{-1}(z))` with its first two derivatives, and the constants
//! that control the stability of the decompounding estimator.
//!
//! `H` is the inverse of the probability generating function `P_N(y) = sum_k p_k y^k`,
//! so all closed forms below are written in terms of `P_N` and its derivatives.

use std::fmt;

use num_complex::Complex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("invalid count law: {0}")]
    InvalidParameter(String),
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("principal branch cut of {function} hit at {re}{im:+}i")]
    BranchViolation { function: &'static str, re: f64, im: f64 },
    #[error("unsupported for this count law: {0}")]
    Unsupported(String),
    #[error("Newton continuation diverged at path index {index} (residual {residual:e})")]
    NewtonDivergence { index: usize, residual: f64 },
    #[error("derivative of the Laplace transform vanished at path index {index}")]
    DerivativeVanished { index: usize },
}

/// Parametric family of a count law. Probabilities refer to `k = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family<T> {
    /// `P(N = 1) = p`, `P(N = 2) = 1 - p`.
    TwoPoint { p: T },
    /// `P(N = k) = (1 - p)^{k-1} p`.
    Geometric { p: T },
    /// `P(N = k) = c_lambda lambda^k / k!` with `c_lambda = 1 / (e^lambda - 1)`.
    ShiftedPoisson { lambda: T },
    /// Finite pmf, `weights[k - 1] = P(N = k)`.
    Tabulated { weights: Vec<T> },
}

/// A validated count law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Family<T>",
    into = "Family<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct CountLaw<T> {
    family: Family<T>,
}

impl<T: Real> TryFrom<Family<T>> for CountLaw<T> {
    type Error = LawError;

    fn try_from(family: Family<T>) -> Result<Self, LawError> {
        match family {
            Family::TwoPoint { p } => Self::two_point(p),
            Family::Geometric { p } => Self::geometric(p),
            Family::ShiftedPoisson { lambda } => Self::shifted_poisson(lambda),
            Family::Tabulated { weights } => Self::tabulated(weights),
        }
    }
}

impl<T> From<CountLaw<T>> for Family<T> {
    fn from(law: CountLaw<T>) -> Self {
        law.family
    }
}

/// First two moments of `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments<T> {
    pub mean: T,
    pub second_moment: T,
}

impl<T: Real> Moments<T> {
    pub fn variance(&self) -> T {
        self.second_moment - self.mean * self.mean
    }
}

/// Summary statistics of the summand distribution used by [`CountLaw::check_nonvanishing`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnovationStats<T> {
    #[serde(default)]
    pub mean: T,
    pub variance: T,
    /// Standard deviation `c` of the Gaussian part of the Levy triplet; zero if none.
    #[serde(default)]
    pub gaussian_component: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum NoZerosReason<T> {
    /// The leading weight of the size-biased law exceeds one half.
    LeadingWeight { r_m: T },
    /// Gaussian component strong enough: `r_m > 1 / (1 + alpha)`.
    GaussianComponent { r_m: T, alpha: T },
}

impl<T: Real> fmt::Display for NoZerosReason<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoZerosReason::LeadingWeight { r_m } => write!(f, "r_m>1/2 (r_m = {r_m})"),
            NoZerosReason::GaussianComponent { r_m, alpha } => {
                write!(f, "r_m>1/(1+alpha) (r_m = {r_m}, alpha = {alpha})")
            }
        }
    }
}

/// Outcome of the sufficient conditions for `phi_Lambda` to have no real zeros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum NonvanishingVerdict<T> {
    GuaranteedNoZeros { reason: NoZerosReason<T> },
    /// No zeros for `|u| < u_circ` and beyond some larger frequency.
    GuaranteedNearAndFar { u_circ: T },
    Inconclusive,
}

const SIZE_BIASED_TAIL: f64 = 1e-12;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_ACCEPT: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;
const DERIVATIVE_FLOOR: f64 = 1e-13;

impl<T: Real> CountLaw<T> {
    pub fn two_point(p: T) -> Result<Self, LawError> {
        check_open_unit("two_point p", p)?;
        Ok(Self { family: Family::TwoPoint { p } })
    }

    pub fn geometric(p: T) -> Result<Self, LawError> {
        check_open_unit("geometric p", p)?;
        Ok(Self { family: Family::Geometric { p } })
    }

    pub fn shifted_poisson(lambda: T) -> Result<Self, LawError> {
        if !(lambda > T::zero() && lambda.is_finite()) {
            return Err(LawError::InvalidParameter(format!("shifted_poisson lambda must be positive, got {lambda}")));
        }
        Ok(Self { family: Family::ShiftedPoisson { lambda } })
    }

    /// Finite pmf on `{1, .., K}`; trailing zero weights are dropped.
    pub fn tabulated(mut weights: Vec<T>) -> Result<Self, LawError> {
        if weights.iter().any(|w| !(*w >= T::zero() && *w <= T::one())) {
            return Err(LawError::InvalidParameter("tabulated weights must lie in [0, 1]".into()));
        }
        while weights.last().is_some_and(|w| w.is_zero()) {
            weights.pop();
        }
        if weights.is_empty() {
            return Err(LawError::InvalidParameter("tabulated law needs at least one positive weight".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::tol(1e-12) {
            return Err(LawError::InvalidParameter(format!("tabulated weights sum to {total}, not 1")));
        }
        Ok(Self { family: Family::Tabulated { weights } })
    }

    /// `N = 1` almost surely.
    pub fn degenerate() -> Self {
        Self { family: Family::Tabulated { weights: vec![T::one()] } }
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(&self.family, Family::Tabulated { weights } if weights.len() == 1)
    }

    /// `c_lambda = 1 / (e^lambda - 1)` for the shifted Poisson family.
    pub fn c_lambda(lambda: T) -> T {
        lambda.exp_m1().recip()
    }

    /// `P(N = k)`.
    pub fn pmf(&self, k: usize) -> T {
        if k == 0 {
            return T::zero();
        }
        match &self.family {
            Family::TwoPoint { p } => match k {
                1 => *p,
                2 => T::one() - *p,
                _ => T::zero(),
            },
            Family::Geometric { p } => *p * (T::one() - *p).powi(k as i32 - 1),
            Family::ShiftedPoisson { lambda } => {
                let mut term = Self::c_lambda(*lambda) * *lambda;
                for j in 2..=k {
                    term = term * *lambda / T::of_usize(j);
                }
                term
            }
            Family::Tabulated { weights } => weights.get(k - 1).copied().unwrap_or_else(T::zero),
        }
    }

    /// Polynomial coefficients `[p_1, p_2]` when `P_N` is at most quadratic.
    fn quadratic(&self) -> Option<(T, T)> {
        match &self.family {
            Family::TwoPoint { p } => Some((*p, T::one() - *p)),
            Family::Tabulated { weights } if weights.len() == 2 => Some((weights[0], weights[1])),
            _ => None,
        }
    }

    /// Probability generating function `P_N(y)` and its first two derivatives.
    fn pgf(&self, y: Complex<T>) -> [Complex<T>; 3] {
        let one = Complex::new(T::one(), T::zero());
        match &self.family {
            Family::TwoPoint { p } => {
                let q = T::one() - *p;
                [y * (y * q + *p), y * (q + q) + *p, one * (q + q)]
            }
            Family::Geometric { p } => {
                let q = T::one() - *p;
                let d = one - y * q;
                [y * *p / d, one * *p / (d * d), one * (*p * q * T::of(2.0)) / (d * d * d)]
            }
            Family::ShiftedPoisson { lambda } => {
                let c = Self::c_lambda(*lambda);
                let e = (y * *lambda).exp();
                [(e - one) * c, e * (c * *lambda), e * (c * *lambda * *lambda)]
            }
            Family::Tabulated { weights } => {
                // Horner for P, P', P'' simultaneously; weights[k-1] multiplies y^k.
                let mut f = Complex::new(T::zero(), T::zero());
                let mut d1 = f;
                let mut d2 = f;
                for w in weights.iter().rev() {
                    d2 = d2 * y + d1 * T::of(2.0);
                    d1 = d1 * y + f;
                    f = f * y + *w;
                }
                // f currently holds sum_k w_k y^{k-1}; multiply by y.
                [f * y, d1 * y + f, d2 * y + d1 * T::of(2.0)]
            }
        }
    }

    /// Laplace transform `L_N(z) = E[e^{-zN}]`.
    pub fn laplace(&self, z: Complex<T>) -> Result<Complex<T>, LawError> {
        if let Family::Geometric { p } = &self.family {
            let bound = (T::one() - *p).ln();
            if !(z.re > bound) {
                return Err(LawError::Domain(format!("geometric Laplace transform needs Re(z) > {bound}, got {z}")));
            }
        }
        Ok(self.laplace_unchecked(z))
    }

    /// Analytic continuation of the closed form, without the convergence check.
    fn laplace_unchecked(&self, z: Complex<T>) -> Complex<T> {
        self.pgf((-z).exp())[0]
    }

    /// `L_N'(w) = -sum_k k p_k e^{-k w}`.
    pub fn laplace_derivative(&self, w: Complex<T>) -> Complex<T> {
        let y = (-w).exp();
        -(self.pgf(y)[1] * y)
    }

    /// `H(z) = exp(-L_N^{-1}(z))`, evaluated on principal branches.
    pub fn h(&self, z: Complex<T>) -> Result<Complex<T>, LawError> {
        if self.is_degenerate() {
            return Ok(z);
        }
        if let Some((a, b)) = self.quadratic() {
            let s = principal_sqrt(Complex::new(a * a, T::zero()) + z * (b * T::of(4.0)))?;
            return Ok((s - a) / (b + b));
        }
        match &self.family {
            Family::ShiftedPoisson { lambda } => {
                let c = Self::c_lambda(*lambda);
                Ok(principal_ln(z / c + T::one())? / *lambda)
            }
            Family::Geometric { p } => {
                let d = geometric_denominator(*p, z)?;
                Ok(z / d)
            }
            _ => Err(self.needs_continuation()),
        }
    }

    /// `H'(z)`.
    pub fn h_prime(&self, z: Complex<T>) -> Result<Complex<T>, LawError> {
        if self.is_degenerate() {
            return Ok(Complex::new(T::one(), T::zero()));
        }
        if let Some((a, b)) = self.quadratic() {
            let s = principal_sqrt(Complex::new(a * a, T::zero()) + z * (b * T::of(4.0)))?;
            return nonzero(s, "H'").map(|s| s.inv());
        }
        match &self.family {
            Family::ShiftedPoisson { lambda } => {
                let c = Self::c_lambda(*lambda);
                principal_ln(z / c + T::one())?;
                Ok(((z + c) * *lambda).inv())
            }
            Family::Geometric { p } => {
                let d = geometric_denominator(*p, z)?;
                Ok((d * d).inv() * *p)
            }
            _ => Err(self.needs_continuation()),
        }
    }

    /// `H''(z)`.
    pub fn h_second(&self, z: Complex<T>) -> Result<Complex<T>, LawError> {
        if self.is_degenerate() {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
        if let Some((a, b)) = self.quadratic() {
            let s = principal_sqrt(Complex::new(a * a, T::zero()) + z * (b * T::of(4.0)))?;
            let s = nonzero(s, "H''")?;
            return Ok(-(s * s * s).inv() * (b + b));
        }
        match &self.family {
            Family::ShiftedPoisson { lambda } => {
                let c = Self::c_lambda(*lambda);
                principal_ln(z / c + T::one())?;
                let d = z + c;
                Ok(-((d * d) * *lambda).inv())
            }
            Family::Geometric { p } => {
                let d = geometric_denominator(*p, z)?;
                Ok(-(d * d * d).inv() * (T::of(2.0) * *p * (T::one() - *p)))
            }
            _ => Err(self.needs_continuation()),
        }
    }

    /// `H'` and `H''` from a point `w = L_N^{-1}(z)` through the generic series
    /// `H' = 1 / P_N'(e^{-w})`, `H'' = -P_N''(e^{-w}) (H')^3`.
    pub fn h_derivatives_at_inverse(&self, w: Complex<T>) -> (Complex<T>, Complex<T>) {
        let [_, d1, d2] = self.pgf((-w).exp());
        let hp = d1.inv();
        (hp, -(d2 * hp * hp * hp))
    }

    /// Inverse Laplace transform `L_N^{-1}(z)` on principal branches.
    pub fn laplace_inverse(&self, z: Complex<T>) -> Result<Complex<T>, LawError> {
        let h = self.h(z)?;
        Ok(-principal_ln(h)?)
    }

    /// Inverse along a discretised path starting at `z = 1`, tracking the branch by
    /// Newton continuation from the previous solution.
    pub fn laplace_inverse_continued(&self, z_path: &[Complex<T>]) -> Result<Vec<Complex<T>>, LawError> {
        let Some(first) = z_path.first() else {
            return Ok(Vec::new());
        };
        if (*first - T::one()).norm() > T::tol(1e-12) {
            return Err(LawError::Domain(format!("continuation path must start at z = 1, got {first}")));
        }
        let mut out = Vec::with_capacity(z_path.len());
        let mut w = Complex::new(T::zero(), T::zero());
        let mut z_prev = Complex::new(T::one(), T::zero());
        for (index, &z) in z_path.iter().enumerate() {
            w = self.newton_from(z, z_prev, w, index)?;
            z_prev = z;
            out.push(w);
        }
        Ok(out)
    }

    /// Continuation that records failures (`None`) and keeps going from the last good point.
    pub(crate) fn continue_inverse_lenient(&self, z_path: &[Complex<T>]) -> Vec<Option<Complex<T>>> {
        let mut w = Complex::new(T::zero(), T::zero());
        let mut z_prev = Complex::new(T::one(), T::zero());
        z_path
            .iter()
            .enumerate()
            .map(|(index, &z)| match self.newton_from(z, z_prev, w, index) {
                Ok(next) => {
                    w = next;
                    z_prev = z;
                    Some(next)
                }
                Err(_) => None,
            })
            .collect()
    }

    /// Damped Newton solve of `L_N(w) = z`, starting from an Euler predictor off the
    /// previous solution `(z_prev, w_prev)`.
    fn newton_from(&self, z: Complex<T>, z_prev: Complex<T>, w_prev: Complex<T>, index: usize) -> Result<Complex<T>, LawError> {
        let floor = T::tol(DERIVATIVE_FLOOR);
        let scale = T::one() + z.norm();
        let tol = T::tol(NEWTON_TOL) * scale;

        let d_prev = self.laplace_derivative(w_prev);
        let mut w = if d_prev.norm() > floor { w_prev + (z - z_prev) / d_prev } else { w_prev };
        let mut resid = self.laplace_unchecked(w) - z;
        if !resid.norm().is_finite() {
            w = w_prev;
            resid = self.laplace_unchecked(w) - z;
        }

        for _ in 0..NEWTON_MAX_ITER {
            if resid.norm() <= tol {
                return Ok(w);
            }
            let d = self.laplace_derivative(w);
            if d.norm() < floor {
                return Err(LawError::DerivativeVanished { index });
            }
            let mut step = resid / d;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = w - step;
                let r = self.laplace_unchecked(cand) - z;
                if r.norm().is_finite() && r.norm() < resid.norm() {
                    w = cand;
                    resid = r;
                    accepted = true;
                    break;
                }
                step = step * T::of(0.5);
            }
            if !accepted {
                break;
            }
        }
        if resid.norm() <= T::tol(NEWTON_ACCEPT) * scale {
            Ok(w)
        } else {
            Err(LawError::NewtonDivergence { index, residual: resid.norm().f64() })
        }
    }

    fn needs_continuation(&self) -> LawError {
        LawError::Unsupported("closed-form inverse exists only for the parametric families and tabulated laws with K <= 2; use laplace_inverse_continued".into())
    }

    /// Analyticity radius `rho*` on the negative real axis: `H` is analytic with bounded
    /// derivatives on `Re(z) > -rho*`.
    pub fn rho_star(&self) -> Result<T, LawError> {
        if self.is_degenerate() {
            return Ok(T::infinity());
        }
        if let Some((a, b)) = self.quadratic() {
            return Ok(a * a / (T::of(4.0) * b));
        }
        match &self.family {
            Family::ShiftedPoisson { lambda } => Ok(Self::c_lambda(*lambda)),
            Family::Geometric { p } => Ok(*p / (T::one() - *p)),
            _ => Err(LawError::Unsupported("rho* is only known for the parametric families".into())),
        }
    }

    /// `kappa(rho0) = max{H'(-rho0), -H''(-rho0)}`.
    pub fn kappa_from_rho0(&self, rho0: T) -> Result<T, LawError> {
        if !(rho0 > T::zero()) {
            return Err(LawError::InvalidParameter(format!("rho0 must be positive, got {rho0}")));
        }
        let rho_star = self.rho_star()?;
        if rho0 >= rho_star {
            return Err(LawError::Domain(format!("rho0 = {rho0} must be below rho* = {rho_star}")));
        }
        let z = Complex::new(-rho0, T::zero());
        let hp = self.h_prime(z)?.re;
        let hs = self.h_second(z)?.re;
        Ok(hp.max(-hs))
    }

    /// `kappa = max{1/p_1, (E[N^2] - E[N]) / p_1^3}`, valid when the summands are symmetric.
    pub fn kappa_symmetric(&self) -> Result<T, LawError> {
        let p1 = self.pmf(1);
        if !(p1 > T::zero()) {
            return Err(LawError::Domain("kappa for symmetric summands needs P(N = 1) > 0".into()));
        }
        let m = self.moments();
        Ok(p1.recip().max((m.second_moment - m.mean) / (p1 * p1 * p1)))
    }

    pub fn moments(&self) -> Moments<T> {
        let one = T::one();
        match &self.family {
            Family::TwoPoint { p } => Moments { mean: T::of(2.0) - *p, second_moment: T::of(4.0) - T::of(3.0) * *p },
            Family::Geometric { p } => Moments { mean: p.recip(), second_moment: (T::of(2.0) - *p) / (*p * *p) },
            Family::ShiftedPoisson { lambda } => {
                // c e^lambda = 1 / (1 - e^-lambda)
                let ce = -(-*lambda).exp_m1().recip();
                Moments { mean: ce * *lambda, second_moment: ce * (*lambda * *lambda + *lambda) }
            }
            Family::Tabulated { weights } => {
                let (mut mean, mut second) = (T::zero(), T::zero());
                for (i, w) in weights.iter().enumerate() {
                    let k = T::of_usize(i) + one;
                    mean = mean + k * *w;
                    second = second + k * k * *w;
                }
                Moments { mean, second_moment: second }
            }
        }
    }

    /// Size-biased law `P(tau = k) = k p_k / E[N]`, tabulated. Infinite supports are
    /// truncated once the remaining mass falls below `1e-12`.
    pub fn size_biased(&self) -> CountLaw<T> {
        let mean = self.moments().mean;
        let mut weights: Vec<T> = match &self.family {
            Family::Tabulated { weights } => {
                weights.iter().enumerate().map(|(i, w)| T::of_usize(i + 1) * *w / mean).collect()
            }
            Family::TwoPoint { p } => vec![*p / mean, T::of(2.0) * (T::one() - *p) / mean],
            Family::Geometric { .. } | Family::ShiftedPoisson { .. } => self.truncated_size_biased(mean),
        };
        let total: T = weights.iter().copied().sum();
        for w in &mut weights {
            *w = *w / total;
        }
        CountLaw::tabulated(weights).expect("size-biased weights form a pmf")
    }

    fn truncated_size_biased(&self, mean: T) -> Vec<T> {
        let tail_tol = T::tol(SIZE_BIASED_TAIL) * T::of(1e-2);
        let mut weights = Vec::new();
        let mut pk = self.pmf(1);
        let mut k = 1usize;
        loop {
            let kt = T::of_usize(k);
            weights.push(kt * pk / mean);
            let next = self.next_pmf(pk, k);
            // Bound the tail of k^2 p_k (which dominates the size-biased mass and its
            // mean) by a geometric series once the terms decrease.
            let cur = kt * kt * pk;
            let k1 = T::of_usize(k + 1);
            let nxt = k1 * k1 * next;
            let ratio = nxt / cur;
            if cur.is_zero() || (ratio < T::one() && nxt / (T::one() - ratio) / mean < tail_tol) {
                break;
            }
            if k > 50_000_000 {
                break;
            }
            pk = next;
            k += 1;
        }
        weights
    }

    fn next_pmf(&self, pk: T, k: usize) -> T {
        match &self.family {
            Family::Geometric { p } => pk * (T::one() - *p),
            Family::ShiftedPoisson { lambda } => pk * *lambda / T::of_usize(k + 1),
            _ => self.pmf(k + 1),
        }
    }

    /// Sufficient conditions for the characteristic function of the size-biased compound
    /// `Lambda = xi_1 + .. + xi_tau` to be free of real zeros.
    pub fn check_nonvanishing(&self, stats: &InnovationStats<T>) -> Result<NonvanishingVerdict<T>, LawError> {
        if !(stats.variance > T::zero()) {
            return Err(LawError::Domain(format!("summand variance must be positive, got {}", stats.variance)));
        }
        if !(stats.gaussian_component >= T::zero()) {
            return Err(LawError::Domain("gaussian component must be nonnegative".into()));
        }
        if stats.gaussian_component * stats.gaussian_component > stats.variance * (T::one() + T::tol(1e-12)) {
            return Err(LawError::Domain("gaussian component variance exceeds the summand variance".into()));
        }
        let tau = self.size_biased();
        let Family::Tabulated { weights } = tau.family() else { unreachable!("size_biased is tabulated") };
        let r_m = weights.iter().copied().find(|w| !w.is_zero()).unwrap_or_else(T::zero);
        if r_m > T::of(0.5) {
            return Ok(NonvanishingVerdict::GuaranteedNoZeros { reason: NoZerosReason::LeadingWeight { r_m } });
        }
        if !stats.variance.is_finite() || !stats.mean.is_finite() {
            return Ok(NonvanishingVerdict::Inconclusive);
        }
        let tm = tau.moments();
        let c = stats.gaussian_component;
        if c > T::zero() {
            let alpha = (T::PI() * T::PI() / T::of(8.0) * c * c / (stats.variance * tm.mean)).exp();
            if r_m > (T::one() + alpha).recip() {
                return Ok(NonvanishingVerdict::GuaranteedNoZeros { reason: NoZerosReason::GaussianComponent { r_m, alpha } });
            }
        }
        let sigma2 = tm.mean * stats.variance + tm.variance() * stats.mean * stats.mean;
        if !(sigma2 > T::zero() && sigma2.is_finite()) {
            return Ok(NonvanishingVerdict::Inconclusive);
        }
        Ok(NonvanishingVerdict::GuaranteedNearAndFar { u_circ: T::PI() / (T::of(2.0) * sigma2.sqrt()) })
    }

    /// Sampler for `N`; parameters are converted to `f64` once.
    pub fn sampler(&self) -> CountSampler {
        match &self.family {
            Family::TwoPoint { p } => CountSampler::TwoPoint(p.f64()),
            Family::Geometric { p } => CountSampler::Geometric(rand_distr::Geometric::new(p.f64()).expect("p in (0, 1)")),
            Family::ShiftedPoisson { lambda } => {
                let lambda = lambda.f64();
                if lambda < 10.0 {
                    let cl = 1.0 / lambda.exp_m1();
                    CountSampler::ShiftedPoissonInverse { lambda, first: cl * lambda }
                } else {
                    CountSampler::ShiftedPoissonReject(rand_distr::Poisson::new(lambda).expect("lambda > 0"))
                }
            }
            Family::Tabulated { weights } => {
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w.f64();
                        acc
                    })
                    .collect();
                CountSampler::Tabulated(cumulative)
            }
        }
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample_counts(&self, seed: u64, n: usize) -> Vec<u32> {
        let sampler = self.sampler();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| sampler.sample(&mut rng)).collect()
    }
}

impl<T: Real> fmt::Display for CountLaw<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::TwoPoint { p } => write!(f, "two_point({p})"),
            Family::Geometric { p } => write!(f, "geometric({p})"),
            Family::ShiftedPoisson { lambda } => write!(f, "shifted_poisson({lambda})"),
            Family::Tabulated { weights } => {
                write!(f, "tabulated(")?;
                for (i, w) in weights.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{w}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Draws from a [`CountLaw`].
#[derive(Debug, Clone)]
pub enum CountSampler {
    TwoPoint(f64),
    Geometric(rand_distr::Geometric),
    ShiftedPoissonInverse { lambda: f64, first: f64 },
    ShiftedPoissonReject(rand_distr::Poisson<f64>),
    Tabulated(Vec<f64>),
}

impl Distribution<u32> for CountSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            CountSampler::TwoPoint(p) => {
                if rng.random::<f64>() < *p {
                    1
                } else {
                    2
                }
            }
            CountSampler::Geometric(g) => g.sample(rng) as u32 + 1,
            CountSampler::ShiftedPoissonInverse { lambda, first } => {
                let u: f64 = rng.random();
                let (mut k, mut term, mut cum) = (1u32, *first, *first);
                while u >= cum && term > 0.0 {
                    k += 1;
                    term *= lambda / f64::from(k);
                    cum += term;
                }
                k
            }
            CountSampler::ShiftedPoissonReject(poisson) => loop {
                let k = poisson.sample(rng);
                if k >= 1.0 {
                    break k as u32;
                }
            },
            CountSampler::Tabulated(cumulative) => {
                let u: f64 = rng.random::<f64>() * cumulative.last().copied().unwrap_or(1.0);
                let idx = cumulative.partition_point(|c| *c <= u);
                idx.min(cumulative.len() - 1) as u32 + 1
            }
        }
    }
}

fn check_open_unit<T: Real>(what: &str, p: T) -> Result<(), LawError> {
    if p > T::zero() && p < T::one() {
        Ok(())
    } else {
        Err(LawError::InvalidParameter(format!("{what} must lie in (0, 1), got {p}")))
    }
}

/// Whether `a` sits on the negative real half-line, the cut of the principal `sqrt`/`log`.
fn on_branch_cut<T: Real>(a: Complex<T>) -> bool {
    a.re <= T::zero() && a.im.abs() <= T::epsilon() * T::of(4.0) * a.re.abs()
}

fn principal_sqrt<T: Real>(a: Complex<T>) -> Result<Complex<T>, LawError> {
    if on_branch_cut(a) && !a.re.is_zero() {
        return Err(LawError::BranchViolation { function: "sqrt", re: a.re.f64(), im: a.im.f64() });
    }
    Ok(a.sqrt())
}

fn principal_ln<T: Real>(a: Complex<T>) -> Result<Complex<T>, LawError> {
    if on_branch_cut(a) {
        return Err(LawError::BranchViolation { function: "log", re: a.re.f64(), im: a.im.f64() });
    }
    Ok(a.ln())
}

fn nonzero<T: Real>(a: Complex<T>, what: &str) -> Result<Complex<T>, LawError> {
    if a.norm() > T::min_positive_value() {
        Ok(a)
    } else {
        Err(LawError::Domain(format!("{what} is unbounded at the branch point")))
    }
}

fn geometric_denominator<T: Real>(p: T, z: Complex<T>) -> Result<Complex<T>, LawError> {
    let d = z * (T::one() - p) + p;
    if d.norm() <= T::epsilon() * T::of(4.0) {
        return Err(LawError::Domain(format!("geometric H has a pole at z = -p/(1-p); got {z}")));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    type Law = CountLaw<f64>;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        Complex::new(re, im)
    }

    fn families() -> Vec<Law> {
        vec![
            Law::two_point(0.3).unwrap(),
            Law::two_point(0.9014).unwrap(),
            Law::geometric(0.3).unwrap(),
            Law::geometric(0.5).unwrap(),
            Law::shifted_poisson(1.0).unwrap(),
            Law::shifted_poisson(0.1).unwrap(),
        ]
    }

    /// Halton points in the unit disk, skipping a thin wedge around every cut/pole.
    fn interior_points(law: &Law, count: usize) -> Vec<C> {
        fn halton(mut i: usize, b: usize) -> f64 {
            let (mut f, mut r) = (1.0, 0.0);
            while i > 0 {
                f /= b as f64;
                r += f * (i % b) as f64;
                i /= b;
            }
            r
        }
        let mut pts = Vec::new();
        let mut i = 1;
        while pts.len() < count {
            let r = 0.98 * halton(i, 2).sqrt();
            let th = std::f64::consts::TAU * halton(i, 3);
            i += 1;
            let z = c(r * th.cos(), r * th.sin());
            let h = match law.h(z) {
                Ok(h) => h,
                Err(_) => continue,
            };
            // stay clear of the log cut of L^{-1} = -log H and the sqrt/log cuts of H
            if h.im.abs() < 1e-3 && h.re < 0.0 {
                continue;
            }
            if z.im.abs() < 1e-3 && z.re < 0.0 {
                continue;
            }
            if law.h_prime(z).map(|d| d.norm() > 1e2).unwrap_or(true) {
                continue;
            }
            pts.push(z);
        }
        pts
    }

    #[test]
    fn laplace_at_zero_is_total_probability() {
        for law in families().into_iter().chain([Law::tabulated(vec![0.2, 0.5, 0.3]).unwrap()]) {
            let v = law.laplace(c(0.0, 0.0)).unwrap();
            assert!((v - 1.0).norm() < 1e-14, "{law}: {v}");
        }
    }

    #[test]
    fn two_point_laplace_closed_form() {
        let law = Law::two_point(0.3).unwrap();
        let z = c(0.4, -1.3);
        let expect = (-z).exp() * 0.3 + (-z * 2.0).exp() * 0.7;
        assert!((law.laplace(z).unwrap() - expect).norm() < 1e-15);
    }

    #[test]
    fn shifted_poisson_laplace_matches_series() {
        let law = Law::shifted_poisson(1.0).unwrap();
        let cl = 1.0 / (1f64.exp() - 1.0);
        let (mut term, mut series) = (cl, 0.0);
        for k in 1..60 {
            term *= 1.0 / k as f64;
            series += term * (-(k as f64)).exp();
        }
        let closed = law.laplace(c(1.0, 0.0)).unwrap();
        assert!((closed.re - series).abs() < 1e-14, "{closed} vs {series}");
        assert!((closed.re - cl * ((-1f64).exp().exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn geometric_laplace_domain() {
        let law = Law::geometric(0.5).unwrap();
        assert!(matches!(law.laplace(c(-1.0, 0.0)), Err(LawError::Domain(_))));
        assert!(law.laplace(c(-0.5, 0.0)).is_ok());
    }

    #[test]
    fn two_point_inverse_value() {
        let law = Law::two_point(0.3).unwrap();
        let w = law.laplace_inverse(c(1.0, 0.0)).unwrap();
        assert!(w.norm() < 1e-15);
        // z = 1 closed form is -log((-0.3 + sqrt(0.09 + 2.8)) / 1.4) = 0
        let z = c(0.5, 0.2);
        let w = law.laplace_inverse(z).unwrap();
        let closed = -((c(0.09, 0.0) + z * 2.8).sqrt() - 0.3).ln() + (1.4f64).ln();
        assert!((w - closed).norm() < 1e-14);
        assert!((law.laplace(w).unwrap() - z).norm() < 1e-12);
    }

    #[test]
    fn geometric_inverse_at_p() {
        let p = 0.37;
        let law = Law::geometric(p).unwrap();
        let w = law.laplace_inverse(c(p, 0.0)).unwrap();
        assert!((w.re - (2.0 - p).ln()).abs() < 1e-14 && w.im.abs() < 1e-15);
        assert!((law.laplace(w).unwrap() - p).norm() < 1e-14);
    }

    #[test]
    fn inverse_is_zero_at_one() {
        for law in families() {
            assert!(law.laplace_inverse(c(1.0, 0.0)).unwrap().norm() < 1e-14, "{law}");
            assert!((law.h(c(1.0, 0.0)).unwrap() - 1.0).norm() < 1e-14);
        }
    }

    #[test]
    fn round_trip_on_interior_points() {
        for law in families() {
            for z in interior_points(&law, 100) {
                let w = law.laplace_inverse(z).unwrap();
                let back = law.laplace_unchecked(w);
                assert!((back - z).norm() <= 1e-10 * (1.0 + z.norm()), "{law} z={z} back={back}");
            }
        }
    }

    #[test]
    fn conjugation_symmetry() {
        for law in families() {
            for z in interior_points(&law, 50) {
                let a = law.laplace_inverse(z.conj()).unwrap();
                let b = law.laplace_inverse(z).unwrap().conj();
                assert!((a - b).norm() <= 1e-12, "{law} z={z}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let step = 1e-6;
        for law in families() {
            for z in interior_points(&law, 20) {
                let fd1 = (law.h(z + step).unwrap() - law.h(z - step).unwrap()) / (2.0 * step);
                let fd2 = (law.h_prime(z + step).unwrap() - law.h_prime(z - step).unwrap()) / (2.0 * step);
                let d1 = law.h_prime(z).unwrap();
                let d2 = law.h_second(z).unwrap();
                assert!((fd1 - d1).norm() <= 1e-5 * d1.norm().max(1.0), "{law} H' at {z}: {d1} vs {fd1}");
                assert!((fd2 - d2).norm() <= 1e-5 * d2.norm().max(1.0), "{law} H'' at {z}: {d2} vs {fd2}");
            }
        }
    }

    #[test]
    fn closed_forms_agree_with_generic_series() {
        for law in families() {
            for z in interior_points(&law, 20) {
                let w = law.laplace_inverse(z).unwrap();
                let (g1, g2) = law.h_derivatives_at_inverse(w);
                let d1 = law.h_prime(z).unwrap();
                let d2 = law.h_second(z).unwrap();
                assert!((g1 - d1).norm() <= 1e-9 * d1.norm().max(1.0), "{law}");
                assert!((g2 - d2).norm() <= 1e-9 * d2.norm().max(1.0), "{law}");
            }
        }
    }

    #[test]
    fn shifted_poisson_h_closed_form() {
        let lambda = 0.7;
        let law = Law::shifted_poisson(lambda).unwrap();
        let cl = Law::c_lambda(lambda);
        let z = c(0.3, 0.4);
        assert!((law.h(z).unwrap() - (z / cl + 1.0).ln() / lambda).norm() < 1e-15);
        assert!((law.h_prime(z).unwrap() - 1.0 / ((z + cl) * lambda)).norm() < 1e-14);
        assert!((law.h_second(z).unwrap() + 1.0 / ((z + cl) * (z + cl) * lambda)).norm() < 1e-14);
    }

    #[test]
    fn geometric_h_prime_finite_difference() {
        let law = Law::geometric(0.5).unwrap();
        let z = c(0.7, 0.0);
        let expect = 0.5 / (0.5 + 0.7 * 0.5f64).powi(2);
        let fd = (law.h(z + 1e-6).unwrap() - law.h(z - 1e-6).unwrap()) / 2e-6;
        assert!((law.h_prime(z).unwrap().re - expect).abs() < 1e-14);
        assert!((fd.re - expect).abs() < 1e-5);
    }

    #[test]
    fn degenerate_law_is_identity() {
        let law = Law::degenerate();
        for z in [c(0.3, 0.2), c(-0.7, 0.1), c(0.0, -0.9)] {
            assert_eq!(law.h(z).unwrap(), z);
            assert_eq!(law.h_prime(z).unwrap(), c(1.0, 0.0));
            assert_eq!(law.h_second(z).unwrap(), c(0.0, 0.0));
        }
        assert_eq!(law.rho_star().unwrap(), f64::INFINITY);
        assert_eq!(law.kappa_from_rho0(3.0).unwrap(), 1.0);
    }

    #[test]
    fn branch_violation_on_cut() {
        let law = Law::two_point(0.3).unwrap();
        // p^2 + 4z(1-p) < 0 for real z < -0.0321
        assert!(matches!(law.h(c(-0.5, 0.0)), Err(LawError::BranchViolation { function: "sqrt", .. })));
        let law = Law::shifted_poisson(1.0).unwrap();
        assert!(matches!(law.h(c(-0.9, 0.0)), Err(LawError::BranchViolation { function: "log", .. })));
        let law = Law::geometric(0.3).unwrap();
        assert!(matches!(law.h(c(-0.3 / 0.7, 0.0)), Err(LawError::Domain(_))));
        let law = Law::tabulated(vec![0.2, 0.5, 0.3]).unwrap();
        assert!(matches!(law.laplace_inverse(c(0.5, 0.0)), Err(LawError::Unsupported(_))));
    }

    #[test]
    fn continuation_matches_closed_form() {
        // path phi_X(u) for two-point(0.3) with Laplace summands, u in [0, 3]
        let law = Law::two_point(0.3).unwrap();
        let path: Vec<C> = (0..=300)
            .map(|j| {
                let u = 3.0 * j as f64 / 300.0;
                let phi = 1.0 / (1.0 + u * u);
                c(0.3 * phi + 0.7 * phi * phi, 0.0)
            })
            .collect();
        let cont = law.laplace_inverse_continued(&path).unwrap();
        for (z, w) in path.iter().zip(&cont) {
            assert!((law.laplace_inverse(*z).unwrap() - w).norm() < 1e-9, "z={z}");
        }
        assert_eq!(law.laplace_inverse_continued(&[c(1.0, 0.0)]).unwrap(), vec![c(0.0, 0.0)]);
    }

    #[test]
    fn continuation_round_trip_geometric() {
        let law = Law::geometric(0.5).unwrap();
        let path: Vec<C> = (0..=200).map(|j| c(1.0 - 0.8 * j as f64 / 200.0, 0.0)).collect();
        let cont = law.laplace_inverse_continued(&path).unwrap();
        for (z, w) in path.iter().zip(&cont) {
            assert!((law.laplace(*w).unwrap() - z).norm() < 1e-10);
            assert!((law.laplace_inverse(*z).unwrap() - w).norm() < 1e-9);
        }
    }

    #[test]
    fn continuation_tabulated_round_trip() {
        let law = Law::tabulated(vec![0.5, 0.3, 0.2]).unwrap();
        let path: Vec<C> = (0..=400)
            .map(|j| {
                let u = 6.0 * j as f64 / 400.0;
                let phi = (-0.5 * u * u).exp() * Complex::from_polar(1.0, 0.4 * u);
                phi * 0.5 + phi * phi * 0.3 + phi * phi * phi * 0.2
            })
            .collect();
        let cont = law.laplace_inverse_continued(&path).unwrap();
        for (z, w) in path.iter().zip(&cont) {
            assert!((law.laplace_unchecked(*w) - z).norm() < 1e-10);
        }
        // phi_xi recovered as exp(-w) along the branch
        let u: f64 = 6.0;
        let expect = (-0.5 * u * u).exp() * Complex::from_polar(1.0, 0.4 * u);
        assert!(((-cont[400]).exp() - expect).norm() < 1e-9);
    }

    #[test]
    fn continuation_rejects_bad_start() {
        let law = Law::geometric(0.5).unwrap();
        assert!(matches!(law.laplace_inverse_continued(&[c(0.5, 0.0)]), Err(LawError::Domain(_))));
    }

    #[test]
    fn kappa_constants() {
        let law = Law::shifted_poisson(0.1).unwrap();
        assert!((law.kappa_from_rho0(5.0).unwrap() - 2.218).abs() < 1e-3);
        let law = Law::two_point(0.9014).unwrap();
        assert!((law.kappa_from_rho0(1.0).unwrap() - 1.546).abs() < 1e-3);
        // geometric(0.9), rho0 = 1: d = p - (1 - p)
        let law = Law::geometric(0.9).unwrap();
        let d: f64 = 0.9 - 0.1;
        let expect = (0.9 / (d * d)).max(2.0 * 0.9 * 0.1 / (d * d * d));
        assert!((law.kappa_from_rho0(1.0).unwrap() - expect).abs() < 1e-12);
        assert!(matches!(law.kappa_from_rho0(9.0), Err(LawError::Domain(_))));
    }

    #[test]
    fn kappa_nondecreasing_in_rho0() {
        for law in families() {
            let rs = law.rho_star().unwrap();
            let ks: Vec<f64> = (1..=10).map(|i| law.kappa_from_rho0(rs * i as f64 / 11.0).unwrap()).collect();
            assert!(ks.windows(2).all(|w| w[1] >= w[0]), "{law}: {ks:?}");
        }
    }

    #[test]
    fn kappa_symmetric_values() {
        assert_eq!(Law::degenerate().kappa_symmetric().unwrap(), 1.0);
        let k = Law::two_point(0.3).unwrap().kappa_symmetric().unwrap();
        assert!((k - (1.0f64 / 0.3).max((3.1 - 1.7) / 0.027)).abs() < 1e-12);
        let k = Law::geometric(0.5).unwrap().kappa_symmetric().unwrap();
        assert!((k - 32.0).abs() < 1e-12);
        let law = Law::tabulated(vec![0.0, 1.0]).unwrap();
        assert!(matches!(law.kappa_symmetric(), Err(LawError::Domain(_))));
    }

    #[test]
    fn rho_star_values() {
        assert!((Law::two_point(0.9014).unwrap().rho_star().unwrap() - 2.061).abs() < 1e-3);
        assert!((Law::shifted_poisson(0.1).unwrap().rho_star().unwrap() - 9.508).abs() < 1e-3);
        assert_eq!(Law::geometric(0.5).unwrap().rho_star().unwrap(), 1.0);
        assert!(Law::tabulated(vec![0.2, 0.5, 0.3]).unwrap().rho_star().is_err());
    }

    #[test]
    fn moments_values() {
        assert!((Law::shifted_poisson(0.1).unwrap().moments().mean - 1.051).abs() < 1e-3);
        assert!((Law::two_point(0.9014).unwrap().moments().mean - 1.099).abs() < 1e-3);
        let m = Law::degenerate().moments();
        assert_eq!((m.mean, m.second_moment), (1.0, 1.0));
        // shifted Poisson against direct summation
        let law = Law::shifted_poisson(2.5).unwrap();
        let (mut s1, mut s2) = (0.0, 0.0);
        for k in 1..80 {
            let pk = law.pmf(k);
            s1 += k as f64 * pk;
            s2 += (k * k) as f64 * pk;
        }
        let m = law.moments();
        assert!((m.mean - s1).abs() < 1e-12 && (m.second_moment - s2).abs() < 1e-12);
    }

    #[test]
    fn size_biased_two_point() {
        let p = 0.3;
        let tau = Law::two_point(p).unwrap().size_biased();
        assert!((tau.pmf(1) - p / (2.0 - p)).abs() < 1e-15);
        assert!((tau.pmf(2) - 2.0 * (1.0 - p) / (2.0 - p)).abs() < 1e-15);
        assert_eq!(Law::degenerate().size_biased(), Law::degenerate());
    }

    #[test]
    fn size_biased_identities() {
        for law in families().into_iter().chain([Law::geometric(0.02).unwrap(), Law::shifted_poisson(20.0).unwrap()]) {
            let tau = law.size_biased();
            let Family::Tabulated { weights } = tau.family() else { panic!() };
            let total: f64 = weights.iter().sum();
            let m = law.moments();
            assert!((total - 1.0).abs() < 1e-10, "{law}");
            assert!((tau.moments().mean - m.second_moment / m.mean).abs() < 1e-10, "{law}: {}", tau.moments().mean);
        }
        let tau = Law::geometric(0.5).unwrap().size_biased();
        assert!((tau.moments().mean - 3.0).abs() < 1e-10);
    }

    #[test]
    fn nonvanishing_checks() {
        let stats = InnovationStats { mean: 0.0, variance: 1.0, gaussian_component: 0.0 };
        // r_1 = 0.6 via two-point p with p/(2-p) = 0.6 -> p = 0.75
        let v = Law::two_point(0.75).unwrap().check_nonvanishing(&stats).unwrap();
        assert!(matches!(v, NonvanishingVerdict::GuaranteedNoZeros { reason: NoZerosReason::LeadingWeight { r_m } } if (r_m - 0.6).abs() < 1e-12));
        let v = Law::degenerate().check_nonvanishing(&stats).unwrap();
        assert!(matches!(v, NonvanishingVerdict::GuaranteedNoZeros { .. }));

        // geometric(0.3): r_1 = p^2 = 0.09, E[tau] = (2 - p)/p
        let law = Law::geometric(0.3).unwrap();
        let with_c = InnovationStats { mean: 0.0, variance: 1.0, gaussian_component: 1.0 };
        let e_tau = 1.7 / 0.3;
        let alpha = (std::f64::consts::PI.powi(2) / 8.0 / e_tau).exp();
        assert!(0.09 < 1.0 / (1.0 + alpha));
        let v = law.check_nonvanishing(&with_c).unwrap();
        let NonvanishingVerdict::GuaranteedNearAndFar { u_circ } = v else { panic!("{v:?}") };
        // zero-mean summands: sigma^2 = E[tau] Var(xi)
        assert!((u_circ - std::f64::consts::PI / (2.0 * e_tau.sqrt())).abs() < 1e-9);

        // a strong gaussian part rescues a small leading weight
        let law = Law::two_point(0.3).unwrap();
        let r1 = 0.3 / 1.7;
        let v = law.check_nonvanishing(&InnovationStats { mean: 0.0, variance: 0.01, gaussian_component: 0.1 }).unwrap();
        let e_tau = (4.0 - 0.9) / 1.7;
        let alpha = (std::f64::consts::PI.powi(2) / 8.0 / e_tau).exp();
        assert_eq!(r1 > 1.0 / (1.0 + alpha), matches!(v, NonvanishingVerdict::GuaranteedNoZeros { .. }));

        assert!(law.check_nonvanishing(&InnovationStats { mean: 0.0, variance: 0.0, gaussian_component: 0.0 }).is_err());
    }

    #[test]
    fn sampling_matches_law() {
        assert_eq!(Law::degenerate().sample_counts(11, 5), vec![1; 5]);
        let n = 100_000;
        let draws = Law::two_point(0.3).unwrap().sample_counts(42, n);
        let ones = draws.iter().filter(|&&k| k == 1).count() as f64 / n as f64;
        assert!((ones - 0.3).abs() < 0.01);
        let draws = Law::shifted_poisson(1.0).unwrap().sample_counts(7, n);
        let mean = draws.iter().map(|&k| f64::from(k)).sum::<f64>() / n as f64;
        let law = Law::shifted_poisson(1.0).unwrap();
        let m = law.moments();
        assert!((m.mean - 1.0 / (1.0 - (-1f64).exp())).abs() < 1e-14);
        assert!((mean - m.mean).abs() < 3.0 * (m.variance() / n as f64).sqrt());
        let law = Law::shifted_poisson(15.0).unwrap();
        let mean = law.sample_counts(3, 20_000).iter().map(|&k| f64::from(k)).sum::<f64>() / 20_000.0;
        assert!((mean - law.moments().mean).abs() < 4.0 * (law.moments().variance() / 20_000.0).sqrt());
        assert_eq!(law.sample_counts(3, 100), law.sample_counts(3, 100));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Law::two_point(1.0).is_err());
        assert!(Law::geometric(0.0).is_err());
        assert!(Law::shifted_poisson(-1.0).is_err());
        assert!(Law::tabulated(vec![0.5, 0.4]).is_err());
        assert!(Law::tabulated(vec![]).is_err());
    }

    #[test]
    fn json_form() {
        let law: CountLaw<f64> = serde_json::from_str(r#"{"family":"two_point","p":0.3}"#).unwrap();
        assert_eq!(law, Law::two_point(0.3).unwrap());
        let law: CountLaw<f64> = serde_json::from_str(r#"{"family":"tabulated","weights":[0.5,0.5]}"#).unwrap();
        assert_eq!(serde_json::to_string(&law).unwrap(), r#"{"family":"tabulated","weights":[0.5,0.5]}"#);
        assert!(serde_json::from_str::<CountLaw<f64>>(r#"{"family":"geometric","p":1.5}"#).is_err());
        assert!(serde_json::from_str::<CountLaw<f64>>(r#"{"family":"geometric","p":0.5,"q":1}"#).is_err());
    }

    #[test]
    fn f32_smoke() {
        let law = CountLaw::<f32>::two_point(0.3).unwrap();
        let z = Complex::new(0.4f32, 0.1);
        let w = law.laplace_inverse(z).unwrap();
        assert!((law.laplace(w).unwrap() - z).norm() < 1e-5);
    }

    proptest! {
        #[test]
        fn shifted_poisson_round_trip(lambda in 0.05f64..5.0, r in 0.0f64..0.95, th in -3.0f64..3.0) {
            let law = Law::shifted_poisson(lambda).unwrap();
            let z = Complex::from_polar(r, th);
            if let Ok(w) = law.laplace_inverse(z) {
                prop_assert!((law.laplace_unchecked(w) - z).norm() <= 1e-10 * (1.0 + z.norm()));
            }
        }
    }
}
