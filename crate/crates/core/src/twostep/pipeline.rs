use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spread::{fit_log_spread_regression, predict_with, station_spread, ExceedanceSeries, LogSpreadModel};
use super::{SpreadEstimate, SpreadSkip};
use crate::distributions::{BGev, BGevParams};
use crate::error::{Error, Result};
use crate::inference::{fit_bgev_regression, BlockMaximaTable, FitOptions, FitResult, RegressionParams};
use crate::rng::{derive_seed, stream};
use crate::scoring::ForecastMixture;
use crate::stats::{mean, quantile_sorted, sorted_copy};

const TAG_BOOT: u64 = 1;
const TAG_DRAWS: u64 = 2;
const MAX_REJECTIONS: usize = 10_000;

/// Which spread enters the standardisation at stations with their own
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadSource {
    /// The station's own estimate where eligible, the regression prediction
    /// elsewhere.
    #[default]
    Station,
    /// The regression prediction at every station.
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStepConfig {
    pub threshold_q: f64,
    pub run_length: u32,
    pub b_boot: usize,
    pub propagate: bool,
    pub spread_source: SpreadSource,
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for TwoStepConfig {
    fn default() -> Self {
        Self {
            threshold_q: 0.99,
            run_length: 24,
            b_boot: 100,
            propagate: true,
            spread_source: SpreadSource::default(),
            seed: 0,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSpread {
    pub station_id: String,
    pub x_mu: Vec<f64>,
    pub x_sigma: Vec<f64>,
    /// Spread used for standardisation at the posterior mean.
    pub sigma_star: f64,
    pub estimate: Option<SpreadEstimate>,
    pub skip: Option<SpreadSkip>,
}

/// One bootstrap replicate: the spreads it standardised with (aligned with
/// [`TwoStepFit::stations`]) and the fit of the standardised maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapFit {
    pub sigma_star: Vec<f64>,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnLevelSummary {
    pub station_id: String,
    pub period: f64,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepFit {
    pub config: TwoStepConfig,
    pub log_spread_model: LogSpreadModel,
    pub stations: Vec<StationSpread>,
    pub bootstrap_fits: Vec<BootstrapFit>,
    #[serde(rename = "B")]
    pub b: usize,
}

/// Divides each maximum by its station's spread and fits the standardised
/// maxima with an intercept-only spread predictor. `sigma_star` is aligned
/// with `table.stations()`.
pub fn fit_standardised_maxima(
    table: &BlockMaximaTable,
    sigma_star: &[f64],
    init: Option<&RegressionParams>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let stations = table.stations();
    if sigma_star.len() != stations.len() {
        return Err(Error::DimensionMismatch {
            expected: stations.len(),
            got: sigma_star.len(),
        });
    }
    let index: HashMap<&str, usize> = stations.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let ys: Vec<f64> = table
        .rows()
        .iter()
        .map(|r| r.y / sigma_star[index[r.station_id.as_str()]])
        .collect();
    let std_table = table.with_intercept_only_spread().with_responses(&ys)?;
    let init = match init {
        Some(p) => p.clone(),
        None => RegressionParams::initial(&std_table, opts.qspec)?,
    };
    fit_bgev_regression(&std_table, &init, opts)
}

fn station_covariates(table: &BlockMaximaTable) -> Result<Vec<(String, Vec<f64>, Vec<f64>)>> {
    let mut out: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for r in table.rows() {
        match index.get(&r.station_id) {
            Some(&i) => {
                if out[i].1 != r.x_mu || out[i].2 != r.x_sigma {
                    return Err(Error::Invalid(format!(
                        "station {} has covariates that vary between years",
                        r.station_id
                    )));
                }
            }
            None => {
                index.insert(r.station_id.clone(), out.len());
                out.push((r.station_id.clone(), r.x_mu.clone(), r.x_sigma.clone()));
            }
        }
    }
    Ok(out)
}

/// Draws from `N(mean, cov)` via the symmetric square root. With `xi_max`
/// set, draws whose last coordinate (the tail parameter) leaves `[0, xi_max)`
/// are rejected.
fn gaussian_draws<R: Rng>(
    mean: &[f64],
    cov: Option<&Vec<Vec<f64>>>,
    n: usize,
    xi_max: Option<f64>,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let p = mean.len();
    let Some(cov) = cov else {
        return vec![mean.to_vec(); n];
    };
    let m = DMatrix::from_fn(p, p, |i, j| 0.5 * (cov[i][j] + cov[j][i]));
    let eig = SymmetricEigen::new(m);
    let root_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&root_vals);
    let centre = DVector::from_column_slice(mean);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let Some(xi_max) = xi_max else {
            let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
            out.push((&centre + &root * z).iter().copied().collect());
            continue;
        };
        let mut draw = None;
        for _ in 0..MAX_REJECTIONS {
            let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let x = &centre + &root * z;
            if x[p - 1] >= 0.0 && x[p - 1] < xi_max {
                draw = Some(x);
                break;
            }
        }
        let mut x = draw.unwrap_or_else(|| centre.clone());
        x[p - 1] = x[p - 1].clamp(0.0, xi_max * (1.0 - 1e-9));
        out.push(x.iter().copied().collect());
    }
    out
}

/// Runs the full two-step estimator. `series` may omit stations; those are
/// standardised with the regression prediction.
pub fn run_two_step(
    table: &BlockMaximaTable,
    series: &[ExceedanceSeries],
    config: &TwoStepConfig,
) -> Result<TwoStepFit> {
    if config.b_boot < 1 {
        return Err(Error::Invalid(
            "the number of bootstrap samples must be at least 1".into(),
        ));
    }
    let covs = station_covariates(table)?;
    let index: HashMap<&str, usize> = covs.iter().enumerate().map(|(i, c)| (c.0.as_str(), i)).collect();
    let mut by_station: Vec<Option<&ExceedanceSeries>> = vec![None; covs.len()];
    for s in series {
        match index.get(s.station_id.as_str()) {
            Some(&i) if by_station[i].is_none() => by_station[i] = Some(s),
            Some(_) => {
                return Err(Error::Invalid(format!(
                    "duplicate exceedance series for station {}",
                    s.station_id
                )))
            }
            None => {
                return Err(Error::Invalid(format!(
                    "exceedance series for station {} has no block maxima",
                    s.station_id
                )))
            }
        }
    }

    let spreads: Vec<std::result::Result<SpreadEstimate, SpreadSkip>> = by_station
        .par_iter()
        .map(|s| match s {
            None => Ok(Err(SpreadSkip::NoSeries)),
            Some(series) => station_spread(series, config.threshold_q, config.run_length)
                .map_err(|e| e.at_station(&series.station_id)),
        })
        .collect::<Result<_>>()?;

    let (estimates, xs): (Vec<SpreadEstimate>, Vec<Vec<f64>>) = spreads
        .iter()
        .zip(&covs)
        .filter_map(|(s, c)| s.as_ref().ok().map(|e| (e.clone(), c.2.clone())))
        .unzip();
    let model = fit_log_spread_regression(&estimates, &xs, table.sigma_names())?;

    let mut stations = Vec::with_capacity(covs.len());
    for ((id, x_mu, x_sigma), s) in covs.into_iter().zip(spreads) {
        let predicted = predict_with(&model.beta_sigma, &x_sigma)?;
        let (sigma_star, estimate, skip) = match s {
            Ok(e) => {
                let used = match config.spread_source {
                    SpreadSource::Station => e.sigma_star,
                    SpreadSource::Regression => predicted,
                };
                (used, Some(e), None)
            }
            Err(skip) => (predicted, None, Some(skip)),
        };
        stations.push(StationSpread {
            station_id: id,
            x_mu,
            x_sigma,
            sigma_star,
            estimate,
            skip,
        });
    }

    let base_sigma: Vec<f64> = stations.iter().map(|s| s.sigma_star).collect();
    let base = fit_standardised_maxima(table, &base_sigma, None, &config.fit)?;
    let bootstrap_fits = if config.propagate {
        let init = base
            .params
            .as_regression()
            .cloned()
            .ok_or_else(|| Error::Invalid("unexpected fit family".into()))?;
        let beta_hat = &model.beta_sigma;
        (0..config.b_boot)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream(derive_seed(config.seed, &[TAG_BOOT, b as u64]));
                let beta_b = gaussian_draws(beta_hat, Some(&model.posterior_cov), 1, None, &mut rng)
                    .pop()
                    .expect("one draw");
                let delta: Vec<f64> = beta_b.iter().zip(beta_hat).map(|(x, y)| x - y).collect();
                let sigma_star = stations
                    .iter()
                    .map(|s| Ok(s.sigma_star * predict_with(&delta, &s.x_sigma)?))
                    .collect::<Result<Vec<f64>>>()?;
                let fit = fit_standardised_maxima(table, &sigma_star, Some(&init), &config.fit)
                    .map_err(|e| Error::Invalid(format!("bootstrap replicate {b}: {e}")))?;
                Ok(BootstrapFit { sigma_star, fit })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![BootstrapFit {
            sigma_star: base_sigma,
            fit: base,
        }]
    };
    Ok(TwoStepFit {
        config: *config,
        log_spread_model: model,
        b: bootstrap_fits.len(),
        stations,
        bootstrap_fits,
    })
}

impl TwoStepFit {
    pub fn station_index(&self, station_id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.station_id == station_id)
    }

    fn regression(&self, b: usize) -> Result<&RegressionParams> {
        self.bootstrap_fits
            .get(b)
            .ok_or_else(|| Error::Invalid(format!("no bootstrap fit {b}")))?
            .fit
            .params
            .as_regression()
            .ok_or_else(|| Error::Invalid("unexpected fit family".into()))
    }

    fn standardised_from(&self, r: &RegressionParams, station: usize) -> Result<BGevParams> {
        let s = &self.stations[station];
        let fit = &self.config.fit;
        BGevParams::with_specs(r.mu_alpha(&s.x_mu), r.beta_sigma[0].exp(), r.xi, fit.blend, fit.qspec)
    }

    /// Parameters of the standardised maxima at a station for replicate `b`.
    pub fn standardised_params(&self, b: usize, station: usize) -> Result<BGevParams> {
        self.standardised_from(self.regression(b)?, station)
    }

    /// Data-scale parameters `(mu*_alpha sigma*, sigma*_beta sigma*, xi)`.
    pub fn station_params(&self, b: usize, station: usize) -> Result<BGevParams> {
        let p = self.standardised_params(b, station)?;
        let scale = self.bootstrap_fits[b].sigma_star[station];
        BGevParams::with_specs(p.mu_alpha * scale, p.sigma_beta * scale, p.xi, p.blend, p.qspec)
    }

    /// `draws_per_fit` regression parameter draws from each replicate's
    /// asymptotic Gaussian, with the tail parameter truncated to `[0, xi_max)`.
    pub fn parameter_draws(&self, draws_per_fit: usize, seed: u64) -> Result<Vec<Vec<RegressionParams>>> {
        let xi_max = self.config.fit.xi_max;
        self.bootstrap_fits
            .par_iter()
            .enumerate()
            .map(|(b, bf)| {
                let r = self.regression(b)?;
                let mut centre = r.beta_mu.clone();
                centre.push(r.beta_sigma[0]);
                centre.push(r.xi);
                let pm = r.beta_mu.len();
                let mut rng = stream(derive_seed(seed, &[TAG_DRAWS, b as u64]));
                Ok(gaussian_draws(
                    &centre,
                    bf.fit.cov_asymptotic.as_ref(),
                    draws_per_fit,
                    Some(xi_max),
                    &mut rng,
                )
                .into_iter()
                .map(|v| RegressionParams {
                    beta_mu: v[..pm].to_vec(),
                    beta_sigma: vec![v[pm]],
                    xi: v[pm + 1],
                })
                .collect())
            })
            .collect()
    }

    fn station_draws(&self, draws: &[Vec<RegressionParams>], station: usize) -> Result<Vec<BGevParams>> {
        let mut out = Vec::with_capacity(draws.iter().map(Vec::len).sum());
        for (b, set) in draws.iter().enumerate() {
            let scale = self.bootstrap_fits[b].sigma_star[station];
            for r in set {
                let p = self.standardised_from(r, station)?;
                out.push(BGevParams {
                    mu_alpha: p.mu_alpha * scale,
                    sigma_beta: p.sigma_beta * scale,
                    ..p
                });
            }
        }
        Ok(out)
    }

    /// Return-level ensemble at a station: one value per parameter draw.
    pub fn return_level_ensemble(
        &self,
        station: usize,
        period: f64,
        draws_per_fit: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let draws = self.parameter_draws(draws_per_fit, seed)?;
        self.station_draws(&draws, station)?
            .iter()
            .map(|p| BGev::new(p)?.return_level(period))
            .collect()
    }

    /// Posterior-mean return level and 95% interval for every station and
    /// period.
    pub fn return_level_table(
        &self,
        periods: &[f64],
        draws_per_fit: usize,
        seed: u64,
    ) -> Result<Vec<ReturnLevelSummary>> {
        let draws = self.parameter_draws(draws_per_fit, seed)?;
        let per_station: Vec<Vec<ReturnLevelSummary>> = (0..self.stations.len())
            .into_par_iter()
            .map(|s| {
                let comps = self.station_draws(&draws, s)?;
                let dists = comps.iter().map(BGev::new).collect::<Result<Vec<_>>>()?;
                periods
                    .iter()
                    .map(|&t| {
                        let levels = dists.iter().map(|d| d.return_level(t)).collect::<Result<Vec<_>>>()?;
                        let sorted = sorted_copy(&levels);
                        Ok(ReturnLevelSummary {
                            station_id: self.stations[s].station_id.clone(),
                            period: t,
                            mean: mean(&levels),
                            q025: quantile_sorted(&sorted, 0.025),
                            q975: quantile_sorted(&sorted, 0.975),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(per_station.into_iter().flatten().collect())
    }

    /// Equal-weight predictive mixture at a station with
    /// `m = draws_per_fit * B` components.
    pub fn forecast_mixture(&self, station: usize, draws_per_fit: usize, seed: u64) -> Result<ForecastMixture> {
        let draws = self.parameter_draws(draws_per_fit, seed)?;
        ForecastMixture::new(self.station_draws(&draws, station)?)
    }
}
