//! GEV, Gumbel and blended GEV kernels.

mod bgev;
mod gev;

pub use bgev::{
    bgev_cdf, bgev_logpdf, bgev_quantile, blend_weight, from_quantile_params, return_level, tail_match,
    to_quantile_params, BGev, BGevParams, BlendSpec, QuantileSpec, XI_MAX,
};
pub use gev::{gev_cdf, gev_logpdf, gev_quantile, GevParams, XI_GUMBEL_EPS};

#[cfg(test)]
mod tests;
