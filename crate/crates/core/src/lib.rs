//! Heavy-tailed block-maxima modelling with the blended generalised extreme
//! value (bGEV) distribution.
//!
//! The crate is organised by subsystem:
//!
//! - [`distributions`]: GEV, Gumbel and bGEV kernels plus the quantile-based
//!   `(mu_alpha, sigma_beta, xi)` parametrisation.
//! - [`inference`]: maximum-likelihood fitting, univariate and with linear
//!   predictors on `mu_alpha` and `log sigma_beta`.
//! - [`twostep`]: spread estimation from declustered threshold exceedances,
//!   log-spread regression, standardisation of block maxima and bootstrap
//!   propagation of the spread uncertainty.
//! - [`priors`]: penalised-complexity priors for the tail parameter.
//! - [`scoring`]: CRPS, threshold-weighted CRPS and its scaled variant.
//! - [`simstudy`]: the GEV-vs-bGEV robustness simulation.
//!
//! Numerical plumbing (quadrature, quasi-Newton optimisation, special
//! functions, seeded random streams) lives in the remaining modules.

pub mod distributions;
pub mod error;
pub mod inference;
pub mod optim;
pub mod priors;
pub mod quadrature;
pub mod rng;
pub mod scoring;
pub mod simstudy;
pub mod special;
pub mod stats;
pub mod twostep;

pub use distributions::{BGev, BGevParams, BlendSpec, GevParams, QuantileSpec};
pub use error::{Error, Result};
pub use inference::{BlockMaximaRow, BlockMaximaTable, FitOptions, FitResult, FittedParams, RegressionParams};
pub use priors::{PcPriorCurve, PriorFamily};
pub use scoring::{ForecastDistribution, ForecastMixture};
pub use simstudy::SimConfig;
pub use twostep::{ExceedanceSeries, LogSpreadModel, SpreadEstimate, TwoStepConfig, TwoStepFit};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
