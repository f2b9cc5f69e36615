//! Two-step estimation: spread from declustered threshold exceedances,
//! log-spread regression, standardisation of block maxima by the spread
//! and a bootstrap over the log-spread coefficients.

mod pipeline;
mod spread;

pub use pipeline::{
    fit_standardised_maxima, run_two_step, BootstrapFit, ReturnLevelSummary, SpreadSource, StationSpread,
    TwoStepConfig, TwoStepFit,
};
pub use spread::{
    compute_threshold, decluster, estimate_sigma_star, fit_log_spread_regression, predict_sigma_star, station_spread,
    ExceedanceSeries, LogSpreadModel, SpreadEstimate, SpreadSkip, MIN_THRESHOLD_OBS,
};
