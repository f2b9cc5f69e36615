use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::check_full_rank;
use crate::stats::{quantile_sorted, sample_sd, sorted_copy};

/// Minimum number of observations for the exceedance threshold.
pub const MIN_THRESHOLD_OBS: usize = 100;
const TAU_CAP: f64 = 1e12;

/// Time-ordered raw observations at one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceSeries {
    pub station_id: String,
    /// `(step index, value)` with strictly increasing step indices.
    pub observations: Vec<(i64, f64)>,
    pub years_of_data: u32,
}

impl ExceedanceSeries {
    pub fn new(station_id: impl Into<String>, observations: Vec<(i64, f64)>, years_of_data: u32) -> Result<Self> {
        let station_id = station_id.into();
        for w in observations.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Invalid(format!(
                    "station {station_id}: timestamps must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((t, v)) = observations.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "station {station_id}: non-finite value {v} at step {t}"
            )));
        }
        Ok(Self {
            station_id,
            observations,
            years_of_data,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|&(_, v)| v).collect()
    }
}

/// Empirical `q` quantile (type 7) of all values at the station.
pub fn compute_threshold(series: &ExceedanceSeries, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!(
            "threshold probability must lie in (0, 1), got {q}"
        )));
    }
    let n = series.observations.len();
    if n < MIN_THRESHOLD_OBS {
        return Err(Error::InsufficientData(format!(
            "station {}: {n} observations, need at least {MIN_THRESHOLD_OBS}",
            series.station_id
        )));
    }
    Ok(quantile_sorted(&sorted_copy(&series.values()), q))
}

/// Runs declustering: exceedances separated by fewer than `run_length`
/// non-exceeding steps share a cluster. Returns the cluster maxima.
pub fn decluster(observations: &[(i64, f64)], threshold: f64, run_length: u32) -> Result<Vec<f64>> {
    if run_length < 1 {
        return Err(Error::domain("run length must be at least 1"));
    }
    let mut maxima = Vec::new();
    let mut last: Option<i64> = None;
    for &(t, v) in observations {
        if v <= threshold {
            continue;
        }
        match last {
            Some(prev) if t - prev - 1 < run_length as i64 => {
                let m = maxima.last_mut().expect("open cluster");
                if v > *m {
                    *m = v;
                }
            }
            _ => maxima.push(v),
        }
        last = Some(t);
    }
    Ok(maxima)
}

/// Spread estimate for an eligible station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadEstimate {
    pub station_id: String,
    pub sigma_star: f64,
    pub n_cluster_maxima: usize,
    pub log_sigma_star: f64,
}

/// Why a station does not contribute to the log-spread regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SpreadSkip {
    NoSeries,
    TooFewObservations { n: usize },
    TooFewYears { years: u32 },
    TooFewClusters { clusters: usize },
    ZeroSpread,
}

impl fmt::Display for SpreadSkip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpreadSkip::NoSeries => write!(f, "no exceedance series"),
            SpreadSkip::TooFewObservations { n } => write!(f, "only {n} observations"),
            SpreadSkip::TooFewYears { years } => write!(f, "only {years} years of data"),
            SpreadSkip::TooFewClusters { clusters } => write!(f, "only {clusters} cluster maxima"),
            SpreadSkip::ZeroSpread => write!(f, "cluster maxima have zero spread"),
        }
    }
}

/// Sample standard deviation (`n - 1`) of the cluster maxima.
pub fn estimate_sigma_star(
    station_id: &str,
    cluster_maxima: &[f64],
    years_of_data: u32,
) -> std::result::Result<SpreadEstimate, SpreadSkip> {
    if years_of_data <= 3 {
        return Err(SpreadSkip::TooFewYears { years: years_of_data });
    }
    if cluster_maxima.len() < 2 {
        return Err(SpreadSkip::TooFewClusters {
            clusters: cluster_maxima.len(),
        });
    }
    let sd = sample_sd(cluster_maxima);
    if !(sd > 0.0) {
        return Err(SpreadSkip::ZeroSpread);
    }
    Ok(SpreadEstimate {
        station_id: station_id.to_string(),
        sigma_star: sd,
        n_cluster_maxima: cluster_maxima.len(),
        log_sigma_star: sd.ln(),
    })
}

/// Threshold, decluster and estimate for one series.
pub fn station_spread(
    series: &ExceedanceSeries,
    threshold_q: f64,
    run_length: u32,
) -> Result<std::result::Result<SpreadEstimate, SpreadSkip>> {
    let n = series.observations.len();
    if n < MIN_THRESHOLD_OBS {
        return Ok(Err(SpreadSkip::TooFewObservations { n }));
    }
    if series.years_of_data <= 3 {
        return Ok(Err(SpreadSkip::TooFewYears {
            years: series.years_of_data,
        }));
    }
    let thr = compute_threshold(series, threshold_q)?;
    let maxima = decluster(&series.observations, thr, run_length)?;
    Ok(estimate_sigma_star(&series.station_id, &maxima, series.years_of_data))
}

/// Gaussian linear model `log sigma* ~ N(x' beta, 1 / tau)` with the flat-prior
/// coefficient posterior `N(beta_hat, s^2 (X'X)^-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSpreadModel {
    pub covariate_names: Vec<String>,
    pub beta_sigma: Vec<f64>,
    pub tau: f64,
    pub posterior_cov: Vec<Vec<f64>>,
    pub n_stations: usize,
}

impl LogSpreadModel {
    pub fn posterior_sd(&self) -> Vec<f64> {
        (0..self.beta_sigma.len())
            .map(|i| self.posterior_cov[i][i].max(0.0).sqrt())
            .collect()
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let p = self.beta_sigma.len();
        DMatrix::from_fn(p, p, |i, j| self.posterior_cov[i][j])
    }
}

/// Ordinary least squares on `log sigma*`. `x_sigma[i]` are the covariates
/// of `estimates[i]`.
pub fn fit_log_spread_regression(
    estimates: &[SpreadEstimate],
    x_sigma: &[Vec<f64>],
    names: &[String],
) -> Result<LogSpreadModel> {
    let n = estimates.len();
    if x_sigma.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x_sigma.len(),
        });
    }
    let p = names.len();
    if let Some(bad) = x_sigma.iter().find(|x| x.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: bad.len(),
        });
    }
    if n < p + 2 {
        return Err(Error::InsufficientData(format!(
            "{n} eligible stations for {p} spread coefficients"
        )));
    }
    let x = DMatrix::from_fn(n, p, |i, j| x_sigma[i][j]);
    check_full_rank("sigma", &x, names)?;
    let y = DVector::from_iterator(n, estimates.iter().map(|e| e.log_sigma_star));
    let xtx = x.transpose() * &x;
    let xtx_inv = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Collinear {
            predictor: "sigma".into(),
            columns: names.to_vec(),
        })?
        .inverse();
    let beta = &xtx_inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let s2 = resid.norm_squared() / (n - p) as f64;
    let tau = if s2 > 0.0 { (1.0 / s2).min(TAU_CAP) } else { TAU_CAP };
    let cov = &xtx_inv / tau;
    Ok(LogSpreadModel {
        covariate_names: names.to_vec(),
        beta_sigma: beta.iter().copied().collect(),
        tau,
        posterior_cov: (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect(),
        n_stations: n,
    })
}

/// `exp(x' beta_sigma)` at the posterior mean.
pub fn predict_sigma_star(model: &LogSpreadModel, x_sigma: &[f64]) -> Result<f64> {
    predict_with(&model.beta_sigma, x_sigma)
}

pub(crate) fn predict_with(beta: &[f64], x_sigma: &[f64]) -> Result<f64> {
    if beta.len() != x_sigma.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            got: x_sigma.len(),
        });
    }
    Ok(beta.iter().zip(x_sigma).map(|(b, x)| b * x).sum::<f64>().exp())
}
