//! Maximum-likelihood fitting of GEV and bGEV models to block maxima.

mod fit;
mod table;

pub use fit::{default_init, fit_bgev_mle, fit_bgev_regression, fit_gev_mle, regression_loglik, standardise_response};
pub use table::{check_full_rank, BlockMaximaRow, BlockMaximaTable, INTERCEPT};

use serde::{Deserialize, Serialize};

use crate::distributions::{BGevParams, BlendSpec, GevParams, QuantileSpec, XI_MAX};
use crate::error::{Error, Result};
use crate::optim::{BfgsOptions, Termination};

/// Coefficients of `mu_alpha = x_mu' beta_mu` and
/// `log sigma_beta = x_sigma' beta_sigma` with a shared tail parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionParams {
    pub beta_mu: Vec<f64>,
    pub beta_sigma: Vec<f64>,
    pub xi: f64,
}

impl RegressionParams {
    /// Intercept-only starting values from the pooled responses.
    pub fn initial(table: &BlockMaximaTable, qspec: QuantileSpec) -> Result<Self> {
        let init = default_init(&table.responses(), qspec)?;
        let mut beta_mu = vec![0.0; table.mu_names().len()];
        let mut beta_sigma = vec![0.0; table.sigma_names().len()];
        beta_mu[0] = init.mu_alpha;
        beta_sigma[0] = init.sigma_beta.ln();
        Ok(Self {
            beta_mu,
            beta_sigma,
            xi: init.xi,
        })
    }

    pub fn mu_alpha(&self, x_mu: &[f64]) -> f64 {
        dot(&self.beta_mu, x_mu)
    }

    pub fn sigma_beta(&self, x_sigma: &[f64]) -> f64 {
        dot(&self.beta_sigma, x_sigma).exp()
    }

    /// bGEV parameters for one covariate row.
    pub fn at(&self, x_mu: &[f64], x_sigma: &[f64], blend: BlendSpec, qspec: QuantileSpec) -> Result<BGevParams> {
        BGevParams::with_specs(self.mu_alpha(x_mu), self.sigma_beta(x_sigma), self.xi, blend, qspec)
    }

    pub(crate) fn check_dims(&self, table: &BlockMaximaTable) -> Result<()> {
        if self.beta_mu.len() != table.mu_names().len() {
            return Err(Error::DimensionMismatch {
                expected: table.mu_names().len(),
                got: self.beta_mu.len(),
            });
        }
        if self.beta_sigma.len() != table.sigma_names().len() {
            return Err(Error::DimensionMismatch {
                expected: table.sigma_names().len(),
                got: self.beta_sigma.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedParams {
    Gev(GevParams),
    BGev(BGevParams),
    Regression(RegressionParams),
}

impl FittedParams {
    /// Parameter vector in the coordinates used by `cov_asymptotic`:
    /// `(mu, sigma, xi)`, `(mu_alpha, sigma_beta, xi)` or
    /// `(beta_mu.., beta_sigma.., xi)`.
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            FittedParams::Gev(g) => vec![g.mu, g.sigma, g.xi],
            FittedParams::BGev(b) => vec![b.mu_alpha, b.sigma_beta, b.xi],
            FittedParams::Regression(r) => {
                let mut v = r.beta_mu.clone();
                v.extend(&r.beta_sigma);
                v.push(r.xi);
                v
            }
        }
    }

    pub fn as_gev(&self) -> Option<&GevParams> {
        match self {
            FittedParams::Gev(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_bgev(&self) -> Option<&BGevParams> {
        match self {
            FittedParams::BGev(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_regression(&self) -> Option<&RegressionParams> {
        match self {
            FittedParams::Regression(r) => Some(r),
            _ => None,
        }
    }
}

/// Affine response transform `y' = (y - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardisation {
    pub shift: f64,
    pub scale: f64,
}

impl Standardisation {
    pub const IDENTITY: Standardisation = Standardisation { shift: 0.0, scale: 1.0 };

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.shift) / self.scale
    }

    pub fn invert(&self, y: f64) -> f64 {
        self.shift + self.scale * y
    }
}

impl Default for Standardisation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Rescale responses so that `q95 - q05 = 1` before optimising.
    pub standardise: bool,
    pub bfgs: BfgsOptions,
    pub xi_max: f64,
    /// Used by the regression fitter; univariate bGEV fits take them from
    /// the initial parameters.
    pub blend: BlendSpec,
    pub qspec: QuantileSpec,
    pub compute_covariance: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            standardise: false,
            bfgs: BfgsOptions::default(),
            xi_max: XI_MAX,
            blend: BlendSpec::default(),
            qspec: QuantileSpec::default(),
            compute_covariance: true,
        }
    }
}

impl FitOptions {
    pub fn standardised() -> Self {
        Self {
            standardise: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FittedParams,
    /// Log-likelihood of the raw (unstandardised) data.
    pub loglik: f64,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub n_obs: usize,
    /// Inverse observed information in the coordinates of
    /// [`FittedParams::to_vec`]; `None` when not positive definite.
    pub cov_asymptotic: Option<Vec<Vec<f64>>>,
    pub standardisation: Standardisation,
}

impl FitResult {
    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.cov_asymptotic
            .as_ref()
            .map(|c| (0..c.len()).map(|i| c[i][i].max(0.0).sqrt()).collect())
    }
}

#[cfg(test)]
mod tests;
