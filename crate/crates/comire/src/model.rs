//! Convex mixture regression state and its density, distribution, and mean
//! functionals.
//!
//! The response density at dose x interpolates two extremal densities:
//! a finite Gaussian mixture f0 at zero dose and a single Gaussian f_inf at
//! arbitrarily high dose, mixed as (1 - beta(x)) f0 + beta(x) f_inf. The
//! high-dose component mean sits strictly below every zero-dose component
//! mean, which makes the conditional mean nonincreasing in dose.

use crate::basis::{BetaWeights, SplineBasis};
use crate::error::{ComireError, Result};
use crate::samplers::std_normal_cdf;
use crate::util::log_sum_exp;

/// Zero-dose mixture: weights, component means, and precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalLow {
    nu0: Vec<f64>,
    mu0: Vec<f64>,
    tau0: Vec<f64>,
}

impl ExtremalLow {
    pub fn new(nu0: Vec<f64>, mu0: Vec<f64>, tau0: Vec<f64>) -> Result<Self> {
        if nu0.is_empty() || nu0.len() != mu0.len() || nu0.len() != tau0.len() {
            return Err(ComireError::Invariant(
                "mixture parameter vectors must share a positive length".into(),
            ));
        }
        if nu0.iter().any(|&v| !(0.0..=1.0 + 1e-10).contains(&v)) {
            return Err(ComireError::Invariant(
                "mixture weights must lie in [0, 1]".into(),
            ));
        }
        let total: f64 = nu0.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(ComireError::Invariant(format!(
                "mixture weights must sum to 1 (got {total})"
            )));
        }
        if tau0.iter().any(|&t| !(t > 0.0)) {
            return Err(ComireError::Invariant(
                "precisions must be positive".into(),
            ));
        }
        if mu0.iter().any(|m| !m.is_finite()) {
            return Err(ComireError::Invariant("component means must be finite".into()));
        }
        Ok(Self { nu0, mu0, tau0 })
    }

    pub fn h(&self) -> usize {
        self.nu0.len()
    }

    pub fn nu0(&self) -> &[f64] {
        &self.nu0
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    pub fn tau0(&self) -> &[f64] {
        &self.tau0
    }

    pub fn min_mu0(&self) -> f64 {
        self.mu0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Mixture mean nu0' mu0.
    pub fn mean(&self) -> f64 {
        self.nu0.iter().zip(&self.mu0).map(|(n, m)| n * m).sum()
    }
}

/// High-dose component: a single Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremalHigh {
    mu_inf: f64,
    tau_inf: f64,
}

impl ExtremalHigh {
    pub fn new(mu_inf: f64, tau_inf: f64) -> Result<Self> {
        if !mu_inf.is_finite() {
            return Err(ComireError::Invariant("high-dose mean must be finite".into()));
        }
        if !(tau_inf > 0.0) {
            return Err(ComireError::Invariant(
                "high-dose precision must be positive".into(),
            ));
        }
        Ok(Self { mu_inf, tau_inf })
    }

    pub fn mu_inf(&self) -> f64 {
        self.mu_inf
    }

    pub fn tau_inf(&self) -> f64 {
        self.tau_inf
    }
}

/// One complete draw of the model parameters.
///
/// Construction enforces the adversity restriction mu_inf < min_h mu0_h
/// strictly; the Gibbs truncation regions are open intervals, so no equality
/// tolerance is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub low: ExtremalLow,
    pub high: ExtremalHigh,
    pub w: BetaWeights,
}

impl ParamState {
    pub fn new(low: ExtremalLow, high: ExtremalHigh, w: BetaWeights) -> Result<Self> {
        if !(high.mu_inf < low.min_mu0()) {
            return Err(ComireError::Invariant(format!(
                "adversity restriction violated: mu_inf = {} must lie strictly below \
                 min component mean {}",
                high.mu_inf,
                low.min_mu0()
            )));
        }
        Ok(Self { low, high, w })
    }

    /// Log of the zero-dose mixture density at y.
    pub fn log_density_low(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .low
            .nu0
            .iter()
            .zip(&self.low.mu0)
            .zip(&self.low.tau0)
            .filter(|((nu, _), _)| **nu > 0.0)
            .map(|((nu, mu), tau)| nu.ln() + log_normal_pdf(y, *mu, *tau))
            .collect();
        log_sum_exp(&terms)
    }

    /// Zero-dose mixture density f0(y).
    pub fn density_low(&self, y: f64) -> f64 {
        self.log_density_low(y).exp()
    }

    /// Log of the high-dose density at y.
    pub fn log_density_high(&self, y: f64) -> f64 {
        log_normal_pdf(y, self.high.mu_inf, self.high.tau_inf)
    }

    /// High-dose density f_inf(y).
    pub fn density_high(&self, y: f64) -> f64 {
        self.log_density_high(y).exp()
    }

    /// Conditional density f_x(y) = (1 - beta) f0(y) + beta f_inf(y).
    pub fn conditional_density(&self, basis: &SplineBasis, x: f64, y: f64) -> Result<f64> {
        let beta = basis.beta(&self.w, x)?;
        Ok((1.0 - beta) * self.density_low(y) + beta * self.density_high(y))
    }

    /// Zero-dose distribution function F0(a).
    pub fn cdf_low(&self, a: f64) -> f64 {
        self.low
            .nu0
            .iter()
            .zip(&self.low.mu0)
            .zip(&self.low.tau0)
            .map(|((nu, mu), tau)| nu * std_normal_cdf((a - mu) * tau.sqrt()))
            .sum()
    }

    /// High-dose distribution function F_inf(a).
    pub fn cdf_high(&self, a: f64) -> f64 {
        std_normal_cdf((a - self.high.mu_inf) * self.high.tau_inf.sqrt())
    }

    /// Conditional distribution function F_x(a).
    pub fn conditional_cdf(&self, basis: &SplineBasis, x: f64, a: f64) -> Result<f64> {
        let beta = basis.beta(&self.w, x)?;
        Ok((1.0 - beta) * self.cdf_low(a) + beta * self.cdf_high(a))
    }

    /// Conditional mean mu(x) = nu0' mu0 + (mu_inf - nu0' mu0) beta(x).
    pub fn conditional_mean(&self, basis: &SplineBasis, x: f64) -> Result<f64> {
        let m0 = self.low.mean();
        let beta = basis.beta(&self.w, x)?;
        Ok(m0 + (self.high.mu_inf - m0) * beta)
    }

    /// Sum of log conditional densities over the dataset.
    pub fn log_likelihood(&self, basis: &SplineBasis, data: &Dataset) -> Result<f64> {
        let mut total = 0.0;
        for (&x, &y) in data.x().iter().zip(data.y()) {
            let beta = basis.beta(&self.w, x)?;
            let lf0 = self.log_density_low(y);
            let lfi = self.log_density_high(y);
            let shift = lf0.max(lfi);
            let dens = (1.0 - beta) * (lf0 - shift).exp() + beta * (lfi - shift).exp();
            total += shift + dens.ln();
        }
        Ok(total)
    }
}

pub(crate) fn log_normal_pdf(y: f64, mu: f64, tau: f64) -> f64 {
    const LN_2PI: f64 = 1.837_877_066_409_345_5;
    0.5 * (tau.ln() - LN_2PI) - 0.5 * tau * (y - mu) * (y - mu)
}

/// Normal density with mean mu and precision tau.
#[cfg(test)]
pub(crate) fn normal_pdf(y: f64, mu: f64, tau: f64) -> f64 {
    let sd = tau.sqrt();
    sd * crate::samplers::std_normal_pdf((y - mu) * sd)
}

/// Fixed hyperparameters: mixture size, basis, and prior settings.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub h: usize,
    pub basis: SplineBasis,
    /// Dirichlet concentration for the zero-dose mixture weights, length h.
    pub alpha: Vec<f64>,
    /// Dirichlet concentration for the basis weights, length basis.j().
    pub eta: Vec<f64>,
    pub a_tau: f64,
    pub b_tau: f64,
    /// Prior mean for all component locations (the response sample mean by
    /// default at the CLI level).
    pub prior_mean: f64,
    /// Prior variance for component locations.
    pub kappa: f64,
}

impl ModelConfig {
    /// Default hyperparameters: H = 10, symmetric Dirichlet masses 1/H and
    /// 1/J, kappa = 10, a_tau = b_tau = 2.
    pub fn with_defaults(basis: SplineBasis, prior_mean: f64) -> Self {
        Self::with_h(basis, prior_mean, 10)
    }

    pub fn with_h(basis: SplineBasis, prior_mean: f64, h: usize) -> Self {
        let j = basis.j();
        Self {
            h,
            basis,
            alpha: vec![1.0 / h as f64; h],
            eta: vec![1.0 / j as f64; j],
            a_tau: 2.0,
            b_tau: 2.0,
            prior_mean,
            kappa: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(ComireError::Config("H must be positive".into()));
        }
        if self.alpha.len() != self.h {
            return Err(ComireError::Config(format!(
                "alpha length {} does not match H = {}",
                self.alpha.len(),
                self.h
            )));
        }
        if self.eta.len() != self.basis.j() {
            return Err(ComireError::Config(format!(
                "eta length {} does not match J = {}",
                self.eta.len(),
                self.basis.j()
            )));
        }
        if self.alpha.iter().chain(&self.eta).any(|&v| !(v > 0.0)) {
            return Err(ComireError::Config(
                "Dirichlet concentrations must be positive".into(),
            ));
        }
        if !(self.a_tau > 0.0) || !(self.b_tau > 0.0) || !(self.kappa > 0.0) {
            return Err(ComireError::Config(
                "a_tau, b_tau, and kappa must be positive".into(),
            ));
        }
        if !self.prior_mean.is_finite() {
            return Err(ComireError::Config("prior mean must be finite".into()));
        }
        Ok(())
    }
}

/// Paired dose/response observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(ComireError::Data(format!(
                "dose and response lengths differ ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        for (i, &xi) in x.iter().enumerate() {
            if !xi.is_finite() || xi < 0.0 {
                return Err(ComireError::Data(format!(
                    "dose at row {} must be finite and nonnegative (got {xi})",
                    i + 1
                )));
            }
        }
        for (i, &yi) in y.iter().enumerate() {
            if !yi.is_finite() {
                return Err(ComireError::Data(format!(
                    "response at row {} must be finite (got {yi})",
                    i + 1
                )));
            }
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn dose_max(&self) -> Option<f64> {
        self.x.iter().cloned().reduce(f64::max)
    }

    pub fn response_mean(&self) -> Option<f64> {
        if self.is_empty() {
            None
        } else {
            Some(crate::util::mean(&self.y))
        }
    }
}
