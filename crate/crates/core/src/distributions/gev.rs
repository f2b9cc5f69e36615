use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::rng::open_uniform;

/// Below this magnitude of `xi` the Gumbel limit is used, corrected by a
/// second-order series in `xi`.
pub const XI_GUMBEL_EPS: f64 = 1e-6;

/// Classical GEV parameters. `xi = 0` is the Gumbel distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

/// `(x^(-xi) - 1) / xi`, with the limit `-ln x` at `xi = 0`.
pub(crate) fn psi(x: f64, xi: f64) -> f64 {
    let l = x.ln();
    if xi.abs() < XI_GUMBEL_EPS {
        -l + xi * l * l / 2.0 - xi * xi * l * l * l / 6.0
    } else {
        (-xi * l).exp_m1() / xi
    }
}

/// `ln(1 + xi z) / xi`, the inverse of `-psi` in log scale. `None` outside
/// the support.
fn log1p_scaled(z: f64, xi: f64) -> Option<f64> {
    let t = xi * z;
    if t <= -1.0 {
        return None;
    }
    if xi.abs() < XI_GUMBEL_EPS && t.abs() < 1e-3 {
        Some(z * (1.0 - t / 2.0 + t * t / 3.0 - t * t * t / 4.0))
    } else if xi == 0.0 {
        Some(z)
    } else {
        Some(t.ln_1p() / xi)
    }
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        let p = Self { mu, sigma, xi };
        p.validate()?;
        Ok(p)
    }

    pub fn gumbel(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(mu, sigma, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("mu", self.mu)?;
        ensure_finite("sigma", self.sigma)?;
        ensure_finite("xi", self.xi)?;
        if self.sigma <= 0.0 {
            return Err(Error::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Log of the cumulative distribution, `-t(y)`.
    pub fn log_cdf(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        match log1p_scaled(z, self.xi) {
            Some(u) => -(-u).exp(),
            None if self.xi > 0.0 => f64::NEG_INFINITY,
            None => 0.0,
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.log_cdf(y).exp()
    }

    pub fn logpdf(&self, y: f64) -> f64 {
        let z = (y - self.mu) / self.sigma;
        match log1p_scaled(z, self.xi) {
            Some(u) => -(1.0 + self.xi) * u - (-u).exp() - self.sigma.ln(),
            None => f64::NEG_INFINITY,
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.logpdf(y).exp()
    }

    /// Quantile without argument checks; `prob` must lie in (0, 1).
    pub fn quantile_unchecked(&self, prob: f64) -> f64 {
        self.mu + self.sigma * psi(-prob.ln(), self.xi)
    }

    pub fn quantile(&self, prob: f64) -> Result<f64> {
        check_prob(prob)?;
        Ok(self.quantile_unchecked(prob))
    }

    /// Inverse-CDF draws.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.quantile_unchecked(open_uniform(rng))).collect()
    }

    /// Lower end of the support (`-inf` unless `xi > 0`).
    pub fn lower_bound(&self) -> f64 {
        if self.xi > 0.0 {
            self.mu - self.sigma / self.xi
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn upper_bound(&self) -> f64 {
        if self.xi < 0.0 {
            self.mu - self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }
}

pub(crate) fn check_prob(prob: f64) -> Result<()> {
    if prob > 0.0 && prob < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("probability must lie in (0, 1), got {prob}")))
    }
}

pub fn gev_cdf(y: f64, p: &GevParams) -> Result<f64> {
    ensure_finite("y", y)?;
    p.validate()?;
    Ok(p.cdf(y))
}

pub fn gev_logpdf(y: f64, p: &GevParams) -> Result<f64> {
    ensure_finite("y", y)?;
    p.validate()?;
    Ok(p.logpdf(y))
}

pub fn gev_quantile(prob: f64, p: &GevParams) -> Result<f64> {
    p.validate()?;
    p.quantile(prob)
}
