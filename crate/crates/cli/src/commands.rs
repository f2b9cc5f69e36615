use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bgev_core::distributions::{BlendSpec, QuantileSpec, XI_MAX};
use bgev_core::inference::{default_init, fit_bgev_mle, fit_bgev_regression, fit_gev_mle};
use bgev_core::priors::PcPriorCurve;
use bgev_core::scoring::{crps, s_ff, stwcrps_with_sff, twcrps};
use bgev_core::simstudy::{
    biased_fraction, density_panel_svg, run_study, summarise_study, InitKind, SimDist, BIAS_PERIOD,
};
use bgev_core::twostep::{run_two_step, SpreadSource};
use bgev_core::{
    FitOptions, FitResult, FittedParams, PriorFamily, RegressionParams, SimConfig, TwoStepConfig, TwoStepFit,
};
use serde::Serialize;

use crate::args::{
    BlendArgs, Family, FitArgs, PriorArgs, PriorFamilyArg, ReturnLevelArgs, ScoreArgs, SimulateArgs, SpreadSourceArg,
    TwostepArgs,
};
use crate::io::{read_exceedances, read_maxima, write_csv};
use crate::UsageError;

pub struct Ctx<'a> {
    pub out: &'a Path,
    pub seed: u64,
    pub plots: bool,
    pub outputs: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.outputs.push(p.clone());
        p
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&p, text + "\n").with_context(|| format!("cannot write {}", p.display()))
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn specs(b: &BlendArgs) -> Result<(BlendSpec, QuantileSpec)> {
    let blend = BlendSpec {
        p_a: b.pa,
        p_b: b.pb,
        ..BlendSpec::default()
    };
    blend.validate().map_err(|e| usage(e.to_string()))?;
    let qspec = QuantileSpec::new(b.alpha, b.beta).map_err(|e| usage(e.to_string()))?;
    qspec.validate_against(&blend).map_err(|e| usage(e.to_string()))?;
    Ok((blend, qspec))
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--{name} must lie in (0, 1), got {p}")))
    }
}

fn check_periods(periods: &[f64]) -> Result<()> {
    match periods.iter().find(|&&t| !(t > 1.0 && t.is_finite())) {
        Some(t) => Err(usage(format!("return periods must exceed 1, got {t}"))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct ParamRow {
    parameter: String,
    estimate: f64,
    std_error: Option<f64>,
}

fn param_names(params: &FittedParams, mu: &[String], sigma: &[String]) -> Vec<String> {
    match params {
        FittedParams::Gev(_) => vec!["mu".into(), "sigma".into(), "xi".into()],
        FittedParams::BGev(_) => vec!["mu_alpha".into(), "sigma_beta".into(), "xi".into()],
        FittedParams::Regression(_) => mu
            .iter()
            .map(|c| format!("mu_alpha:{c}"))
            .chain(sigma.iter().map(|c| format!("log_sigma_beta:{c}")))
            .chain(std::iter::once("xi".into()))
            .collect(),
    }
}

pub fn fit(a: &FitArgs, ctx: &mut Ctx) -> Result<()> {
    let (blend, qspec) = specs(&a.blend)?;
    let has_covs = !a.covariates.mu_covariates.is_empty() || !a.covariates.sigma_covariates.is_empty();
    if has_covs && a.family == Family::Gev {
        return Err(usage("covariates require --family bgev"));
    }
    let table = read_maxima(&a.maxima, &a.covariates.mu_covariates, &a.covariates.sigma_covariates)?;
    let opts = FitOptions {
        standardise: !a.no_standardise,
        blend,
        qspec,
        ..FitOptions::default()
    };
    let sample = table.responses();
    let res: FitResult = match (a.family, has_covs) {
        (Family::Gev, _) => {
            let b = default_init(&sample, QuantileSpec::default())?;
            let g = bgev_core::distributions::from_quantile_params(&b)?;
            fit_gev_mle(&sample, &g, &opts)?
        }
        (Family::Bgev, false) => {
            let init = bgev_core::BGevParams {
                blend,
                ..default_init(&sample, qspec)?
            };
            fit_bgev_mle(&sample, &init, &opts)?
        }
        (Family::Bgev, true) => {
            table.check_rank()?;
            let init = RegressionParams::initial(&table, qspec)?;
            fit_bgev_regression(&table, &init, &opts)?
        }
    };
    if !res.converged {
        eprintln!("warning: optimiser stopped with {:?}", res.termination);
    }
    let names = param_names(&res.params, table.mu_names(), table.sigma_names());
    let se = res.std_errors();
    let rows: Vec<ParamRow> = names
        .into_iter()
        .zip(res.params.to_vec())
        .enumerate()
        .map(|(i, (parameter, estimate))| ParamRow {
            parameter,
            estimate,
            std_error: se.as_ref().map(|s| s[i]),
        })
        .collect();
    let p = ctx.path("parameters.csv");
    write_csv(&p, None, rows)?;
    ctx.write_json("fit.json", &res)
}

#[derive(Serialize)]
struct SpreadRow<'a> {
    station_id: &'a str,
    sigma_star: f64,
    source: &'static str,
    cluster_maxima: Option<usize>,
    skipped: Option<String>,
}

#[derive(Serialize)]
struct CoefRow<'a> {
    covariate: &'a str,
    estimate: f64,
    posterior_sd: f64,
}

pub fn twostep(a: &TwostepArgs, ctx: &mut Ctx) -> Result<()> {
    let (blend, qspec) = specs(&a.blend)?;
    check_prob("threshold-q", a.threshold_q)?;
    if a.b_boot == 0 {
        return Err(usage("--b-boot must be at least 1"));
    }
    if a.steps_per_year == 0 {
        return Err(usage("--steps-per-year must be positive"));
    }
    let table = read_maxima(&a.maxima, &a.covariates.mu_covariates, &a.covariates.sigma_covariates)?;
    let series = read_exceedances(&a.exceedances, a.steps_per_year)?;
    let cfg = TwoStepConfig {
        threshold_q: a.threshold_q,
        run_length: a.run_length,
        b_boot: a.b_boot,
        propagate: !a.no_propagate,
        spread_source: match a.spread_source {
            SpreadSourceArg::Station => SpreadSource::Station,
            SpreadSourceArg::Regression => SpreadSource::Regression,
        },
        seed: ctx.seed,
        fit: FitOptions {
            blend,
            qspec,
            xi_max: XI_MAX,
            ..FitOptions::default()
        },
    };
    let fit = run_two_step(&table, &series, &cfg)?;
    let spread: Vec<SpreadRow> = fit
        .stations
        .iter()
        .map(|s| SpreadRow {
            station_id: &s.station_id,
            sigma_star: s.sigma_star,
            source: match (&s.estimate, cfg.spread_source) {
                (Some(_), SpreadSource::Station) => "station",
                _ => "regression",
            },
            cluster_maxima: s.estimate.as_ref().map(|e| e.n_cluster_maxima),
            skipped: s.skip.as_ref().map(|k| k.to_string()),
        })
        .collect();
    let p = ctx.path("spread.csv");
    write_csv(&p, None, spread)?;
    let m = &fit.log_spread_model;
    let sd = m.posterior_sd();
    let coefs: Vec<CoefRow> = m
        .covariate_names
        .iter()
        .zip(&m.beta_sigma)
        .zip(&sd)
        .map(|((c, &b), &s)| CoefRow {
            covariate: c,
            estimate: b,
            posterior_sd: s,
        })
        .collect();
    let p = ctx.path("log_spread.csv");
    write_csv(&p, None, coefs)?;
    ctx.write_json("twostep_fit.json", &fit)
}

fn load_fit(path: &Path) -> Result<TwoStepFit> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a two-step fit", path.display()))
}

pub fn return_levels(a: &ReturnLevelArgs, ctx: &mut Ctx) -> Result<()> {
    check_periods(&a.period)?;
    if a.draws_per_fit == 0 {
        return Err(usage("--draws-per-fit must be at least 1"));
    }
    let fit = load_fit(&a.fit)?;
    let table = fit.return_level_table(&a.period, a.draws_per_fit, ctx.seed)?;
    let rows = table.iter().map(|r| (&r.station_id, r.period, r.mean, r.q025, r.q975));
    let p = ctx.path("return_levels.csv");
    write_csv(&p, Some(&["station_id", "period", "mean", "q2.5", "q97.5"]), rows)
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    station_id: &'a str,
    year: i32,
    observed: f64,
    crps: f64,
    twcrps: f64,
    stwcrps: f64,
}

pub fn score(a: &ScoreArgs, ctx: &mut Ctx) -> Result<()> {
    check_prob("p0", a.p0)?;
    if a.draws_per_fit == 0 {
        return Err(usage("--draws-per-fit must be at least 1"));
    }
    let fit = load_fit(&a.fit)?;
    let obs = read_maxima(&a.observations, &[], &[])?;
    let mut rows = Vec::with_capacity(obs.len());
    let mut cache: Option<(String, bgev_core::ForecastMixture, f64)> = None;
    for r in obs.rows() {
        let idx = fit
            .station_index(&r.station_id)
            .with_context(|| format!("station {} is not in the fit", r.station_id))?;
        if cache.as_ref().is_none_or(|c| c.0 != r.station_id) {
            let mix = fit.forecast_mixture(idx, a.draws_per_fit, ctx.seed)?;
            let sff = s_ff(&mix, a.p0)?;
            cache = Some((r.station_id.clone(), mix, sff));
        }
        let (_, mix, sff) = cache.as_ref().expect("filled above");
        rows.push(ScoreRow {
            station_id: &r.station_id,
            year: r.year,
            observed: r.y,
            crps: crps(mix, r.y)?,
            twcrps: twcrps(mix, r.y, a.p0)?,
            stwcrps: stwcrps_with_sff(mix, r.y, a.p0, *sff)?,
        });
    }
    let p = ctx.path("scores.csv");
    write_csv(&p, None, rows)
}

#[derive(Serialize)]
struct BiasRow {
    n: usize,
    gev_good: f64,
    gev_bad: f64,
    bgev_good: f64,
    bgev_bad: f64,
}

pub fn simulate(a: &SimulateArgs, ctx: &mut Ctx) -> Result<()> {
    let mut cfg = SimConfig {
        n_grid: a.n.clone(),
        return_periods: a.periods.clone(),
        replicates: a.replicates,
        master_seed: ctx.seed,
        ..SimConfig::default()
    };
    cfg.init_bad.sigma = a.bad_sigma;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let rows = run_study(&cfg)?;
    let p = ctx.path("sim_raw.csv");
    write_csv(&p, None, &rows)?;
    let summary = summarise_study(&rows)?;
    let p = ctx.path("sim_summary.csv");
    write_csv(&p, None, &summary)?;
    if cfg.return_periods.contains(&BIAS_PERIOD) {
        let bias = cfg
            .n_grid
            .iter()
            .map(|&n| {
                let f = |d, i| biased_fraction(&rows, d, i, n);
                Ok(BiasRow {
                    n,
                    gev_good: f(SimDist::Gev, InitKind::Good)?,
                    gev_bad: f(SimDist::Gev, InitKind::Bad)?,
                    bgev_good: f(SimDist::BGev, InitKind::Good)?,
                    bgev_bad: f(SimDist::BGev, InitKind::Bad)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = ctx.path("sim_bias.csv");
        write_csv(&p, None, bias)?;
    }
    if ctx.plots {
        for &n in &cfg.n_grid {
            for &t in &cfg.return_periods {
                let truth = cfg.truth.quantile(1.0 - 1.0 / t)?;
                if let Ok(svg) = density_panel_svg(&rows, n, t, Some(truth)) {
                    let p = ctx.path(&format!("sim_n{n}_T{t}.svg"));
                    fs::write(&p, svg).with_context(|| format!("cannot write {}", p.display()))?;
                }
            }
        }
    }
    Ok(())
}

pub fn prior(a: &PriorArgs, ctx: &mut Ctx) -> Result<()> {
    if !(a.lambda > 0.0 && a.lambda.is_finite()) {
        return Err(usage(format!("--lambda must be positive, got {}", a.lambda)));
    }
    let families: Vec<PriorFamily> = match a.family {
        PriorFamilyArg::Gev => vec![PriorFamily::Gev],
        PriorFamilyArg::Bgev => vec![PriorFamily::BGev],
        PriorFamilyArg::Gp => vec![PriorFamily::Gp],
        PriorFamilyArg::All => PriorFamily::ALL.to_vec(),
    };
    for fam in families {
        let curve = PcPriorCurve::compute(fam, a.lambda)?;
        let p = ctx.path(&format!("prior_{fam}.csv"));
        write_csv(&p, None, &curve.grid)?;
    }
    Ok(())
}
