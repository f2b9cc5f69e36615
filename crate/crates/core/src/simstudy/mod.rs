//! GEV versus bGEV robustness study: return-level maximum likelihood
//! estimates under good and bad initial values.

mod svg;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{to_quantile_params, BGev, BlendSpec, GevParams, QuantileSpec};
use crate::error::{Error, Result};
use crate::inference::{fit_bgev_mle, fit_gev_mle, FitOptions};
use crate::rng::{derive_seed, stream};
use crate::stats::{median, quantile_sorted, sorted_copy};

pub use svg::density_panel_svg;

/// Return period whose estimates drive the bias classifier.
pub const BIAS_PERIOD: f64 = 25.0;
/// Percentile of the good-init GEV estimates below which a bad-init
/// estimate counts as biased.
pub const BIAS_PERCENTILE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub truth: GevParams,
    pub n_grid: Vec<usize>,
    pub return_periods: Vec<f64>,
    pub replicates: usize,
    pub init_good: GevParams,
    pub init_bad: GevParams,
    pub master_seed: u64,
    #[serde(default)]
    pub fit: FitOptions,
}

impl Default for SimConfig {
    fn default() -> Self {
        let truth = GevParams::new(10.05, 3.21, 0.178).expect("valid truth");
        Self {
            truth,
            n_grid: vec![25, 50, 100, 500, 1000],
            return_periods: vec![25.0, 50.0, 100.0, 250.0, 500.0],
            replicates: 500,
            init_good: truth,
            init_bad: GevParams { sigma: 0.9, ..truth },
            master_seed: 1,
            fit: FitOptions {
                compute_covariance: false,
                ..FitOptions::default()
            },
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Invalid("replicates must be at least 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 5) {
            return Err(Error::Invalid(format!(
                "sample sizes must be at least 5, got {:?}",
                self.n_grid
            )));
        }
        if self.return_periods.is_empty() || self.return_periods.iter().any(|&t| !(t > 1.0 && t.is_finite())) {
            return Err(Error::Invalid(format!(
                "return periods must exceed 1, got {:?}",
                self.return_periods
            )));
        }
        self.truth.validate()?;
        for g in [&self.init_good, &self.init_bad] {
            g.validate()?;
            if !(g.xi >= 0.0 && g.xi < self.fit.xi_max) {
                return Err(Error::domain(format!(
                    "initial xi must lie in [0, {}) for the bGEV arm, got {}",
                    self.fit.xi_max, g.xi
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimDist {
    Gev,
    #[serde(rename = "bgev")]
    BGev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Good,
    Bad,
}

impl fmt::Display for SimDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimDist::Gev => "gev",
            SimDist::BGev => "bgev",
        })
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::Good => "good",
            InitKind::Bad => "bad",
        })
    }
}

/// One return-level estimate. `estimate` is `None` when the fit did not
/// converge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub dist: SimDist,
    pub init: InitKind,
    pub n: usize,
    pub period: f64,
    pub replicate: usize,
    pub estimate: Option<f64>,
    pub converged: bool,
}

/// `n` GEV draws by inversion from the stream keyed by `seed`.
pub fn sample_gev(n: usize, truth: &GevParams, seed: u64) -> Vec<f64> {
    truth.sample(&mut stream(seed), n)
}

/// Seed of the sample shared by all four arms of a replicate.
pub fn replicate_seed(master: u64, n: usize, replicate: usize) -> u64 {
    derive_seed(master, &[n as u64, replicate as u64])
}

fn arm_levels(sample: &[f64], dist: SimDist, init: &GevParams, cfg: &SimConfig) -> Option<Vec<f64>> {
    match dist {
        SimDist::Gev => {
            let fit = fit_gev_mle(sample, init, &cfg.fit).ok().filter(|f| f.converged)?;
            let g = *fit.params.as_gev()?;
            cfg.return_periods
                .iter()
                .map(|&t| g.quantile(1.0 - 1.0 / t).ok())
                .collect()
        }
        SimDist::BGev => {
            let p0 = to_quantile_params(init, BlendSpec::default(), QuantileSpec::default()).ok()?;
            let fit = fit_bgev_mle(sample, &p0, &cfg.fit).ok().filter(|f| f.converged)?;
            let d = BGev::new_unbounded(fit.params.as_bgev()?).ok()?;
            cfg.return_periods.iter().map(|&t| d.return_level(t).ok()).collect()
        }
    }
}

const ARMS: [(SimDist, InitKind); 4] = [
    (SimDist::Gev, InitKind::Good),
    (SimDist::Gev, InitKind::Bad),
    (SimDist::BGev, InitKind::Good),
    (SimDist::BGev, InitKind::Bad),
];

fn run_replicate(cfg: &SimConfig, n: usize, rep: usize) -> Vec<SimRow> {
    let sample = sample_gev(n, &cfg.truth, replicate_seed(cfg.master_seed, n, rep));
    let mut rows = Vec::with_capacity(4 * cfg.return_periods.len());
    for (dist, init) in ARMS {
        let g = match init {
            InitKind::Good => &cfg.init_good,
            InitKind::Bad => &cfg.init_bad,
        };
        let levels = arm_levels(&sample, dist, g, cfg);
        for (k, &period) in cfg.return_periods.iter().enumerate() {
            rows.push(SimRow {
                dist,
                init,
                n,
                period,
                replicate: rep,
                estimate: levels.as_ref().map(|l| l[k]),
                converged: levels.is_some(),
            });
        }
    }
    rows
}

/// Runs every (n, replicate) work item in parallel. Rows are ordered by
/// n, replicate, distribution, initial value and period regardless of
/// scheduling.
pub fn run_study(cfg: &SimConfig) -> Result<Vec<SimRow>> {
    cfg.validate()?;
    let items: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let chunks: Vec<Vec<SimRow>> = items.par_iter().map(|&(n, r)| run_replicate(cfg, n, r)).collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Summary of one (dist, init, n, period) cell. Statistics are over
/// converged replicates and are `None` when there are none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dist: SimDist,
    pub init: InitKind,
    pub n: usize,
    pub period: f64,
    pub replicates: usize,
    pub median: Option<f64>,
    pub q05: Option<f64>,
    pub q95: Option<f64>,
    pub failure_fraction: f64,
    pub empty: bool,
}

type CellKey = (SimDist, InitKind, usize, u64);

fn cell_key(r: &SimRow) -> CellKey {
    (r.dist, r.init, r.n, r.period.to_bits())
}

pub fn summarise_study(rows: &[SimRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("empty simulation table".into()));
    }
    let mut cells: std::collections::BTreeMap<CellKey, (f64, usize, Vec<f64>)> = Default::default();
    for r in rows {
        let e = cells.entry(cell_key(r)).or_insert((r.period, 0, Vec::new()));
        e.1 += 1;
        if let Some(v) = r.estimate {
            e.2.push(v);
        }
    }
    Ok(cells
        .into_iter()
        .map(|((dist, init, n, _), (period, total, est))| {
            let sorted = sorted_copy(&est);
            let stat = |p: f64| (!sorted.is_empty()).then(|| quantile_sorted(&sorted, p));
            SummaryRow {
                dist,
                init,
                n,
                period,
                replicates: total,
                median: (!sorted.is_empty()).then(|| median(&sorted)),
                q05: stat(0.05),
                q95: stat(0.95),
                failure_fraction: (total - est.len()) as f64 / total as f64,
                empty: sorted.is_empty(),
            }
        })
        .collect())
}

/// Estimates of one cell, in replicate order, with `None` for failures.
pub fn cell_estimates(rows: &[SimRow], dist: SimDist, init: InitKind, n: usize, period: f64) -> Vec<Option<f64>> {
    let mut v: Vec<(usize, Option<f64>)> = rows
        .iter()
        .filter(|r| r.dist == dist && r.init == init && r.n == n && r.period == period)
        .map(|r| (r.replicate, r.estimate))
        .collect();
    v.sort_by_key(|x| x.0);
    v.into_iter().map(|x| x.1).collect()
}

/// `BIAS_PERCENTILE` quantile of the converged good-init GEV estimates
/// at `BIAS_PERIOD`.
pub fn bias_threshold(rows: &[SimRow], n: usize) -> Result<f64> {
    let good: Vec<f64> = cell_estimates(rows, SimDist::Gev, InitKind::Good, n, BIAS_PERIOD)
        .into_iter()
        .flatten()
        .collect();
    if good.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no converged good-init GEV estimates at n = {n}, T = {BIAS_PERIOD}"
        )));
    }
    Ok(quantile_sorted(&sorted_copy(&good), BIAS_PERCENTILE))
}

/// Fraction of replicates in an arm that failed or whose `BIAS_PERIOD`
/// estimate lies below [`bias_threshold`].
pub fn biased_fraction(rows: &[SimRow], dist: SimDist, init: InitKind, n: usize) -> Result<f64> {
    let thr = bias_threshold(rows, n)?;
    let est = cell_estimates(rows, dist, init, n, BIAS_PERIOD);
    if est.is_empty() {
        return Err(Error::InsufficientData(format!("no {dist}/{init} rows at n = {n}")));
    }
    let biased = est.iter().filter(|e| e.is_none_or(|v| v < thr)).count();
    Ok(biased as f64 / est.len() as f64)
}

#[cfg(test)]
mod tests;
