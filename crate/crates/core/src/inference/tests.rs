use super::*;
use crate::distributions::{from_quantile_params, to_quantile_params, BGev};
use crate::rng::{derive_seed, stream};
use approx::assert_relative_eq;

fn truth_gev() -> GevParams {
    GevParams::new(10.05, 3.21, 0.178).unwrap()
}

fn gev_sample(seed: u64, n: usize) -> Vec<f64> {
    truth_gev().sample(&mut stream(seed), n)
}

/// Type-7 quantile written out independently of the crate helper.
fn type7(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = 1.0 + (v.len() as f64 - 1.0) * p;
    let j = h.floor() as usize;
    let g = h - j as f64;
    if j >= v.len() {
        return v[v.len() - 1];
    }
    v[j - 1] + g * (v[j] - v[j - 1])
}

#[test]
fn standardising_unit_range_sample_keeps_scale() {
    let base: Vec<f64> = (0..101).map(|i| i as f64 / 90.0 + 3.0).collect();
    let (st, z) = standardise_response(&base).unwrap();
    assert_relative_eq!(st.scale, 1.0, max_relative = 1e-12);
    assert_relative_eq!(type7(&z, 0.95) - type7(&z, 0.05), 1.0, max_relative = 1e-12);
}

#[test]
fn standardising_constant_sample_fails() {
    assert!(matches!(standardise_response(&[2.0; 10]), Err(Error::Degenerate(_))));
}

#[test]
fn standardising_uniform_grid() {
    let grid: Vec<f64> = (0..=100).map(|i| i as f64).collect();
    let (st, z) = standardise_response(&grid).unwrap();
    let oracle = type7(&grid, 0.95) - type7(&grid, 0.05);
    assert_relative_eq!(st.scale, oracle, max_relative = 1e-14);
    assert_relative_eq!(st.scale, 90.0, max_relative = 1e-14);
    assert_relative_eq!(st.shift, type7(&grid, 0.05), max_relative = 1e-14);
    assert_relative_eq!(type7(&z, 0.95) - type7(&z, 0.05), 1.0, max_relative = 1e-13);
}

#[test]
fn init_is_median_for_symmetric_sample() {
    let s: Vec<f64> = (-10..=10).map(|i| 7.0 + 0.3 * i as f64).collect();
    let p = default_init(&s, QuantileSpec::default()).unwrap();
    assert_relative_eq!(p.mu_alpha, 7.0, max_relative = 1e-14);
    assert_eq!(p.xi, 0.1);
    assert!(default_init(&[1.0; 8], QuantileSpec::default()).is_err());
    assert!(default_init(&[1.0, 2.0, 3.0], QuantileSpec::default()).is_err());
}

#[test]
fn init_close_to_truth_for_large_sample() {
    let truth = to_quantile_params(&truth_gev(), BlendSpec::default(), QuantileSpec::default()).unwrap();
    let p = default_init(&gev_sample(11, 1000), QuantileSpec::default()).unwrap();
    assert!((p.mu_alpha / truth.mu_alpha - 1.0).abs() < 0.15);
    assert!((p.sigma_beta / truth.sigma_beta - 1.0).abs() < 0.15);
}

#[test]
fn gev_fit_recovers_truth() {
    let data = gev_sample(7, 1000);
    let fit = fit_gev_mle(&data, &truth_gev(), &FitOptions::default()).unwrap();
    assert!(fit.converged, "{:?}", fit.termination);
    let se = fit.std_errors().unwrap();
    let est = fit.params.to_vec();
    let truth = [10.05, 3.21, 0.178];
    for k in 0..3 {
        assert!(
            (est[k] - truth[k]).abs() < 3.0 * se[k],
            "k={k} est={} se={}",
            est[k],
            se[k]
        );
    }
    let at_init: f64 = data.iter().map(|&y| truth_gev().logpdf(y)).sum();
    assert!(fit.loglik >= at_init);
}

#[test]
fn gev_fit_rejects_constant_sample() {
    assert!(fit_gev_mle(&[3.0; 20], &truth_gev(), &FitOptions::default()).is_err());
}

#[test]
fn gev_fit_flags_infeasible_start() {
    let data = gev_sample(3, 1000);
    let bad = GevParams::new(10.05, 0.9, 0.178).unwrap();
    let lower = bad.lower_bound();
    let fit = fit_gev_mle(&data, &bad, &FitOptions::default()).unwrap();
    if data.iter().any(|&y| y <= lower) {
        assert!(!fit.converged);
        assert_eq!(fit.termination, crate::optim::Termination::InfeasibleStart);
        assert_eq!(fit.params.as_gev().unwrap(), &bad);
    } else {
        assert!(fit.converged);
    }
}

#[test]
fn bgev_fit_keeps_xi_in_range_and_improves() {
    for seed in 0..4 {
        let data = gev_sample(100 + seed, 300);
        let init = default_init(&data, QuantileSpec::default()).unwrap();
        let fit = fit_bgev_mle(&data, &init, &FitOptions::default()).unwrap();
        let p = fit.params.as_bgev().unwrap();
        assert!(p.xi >= 0.0 && p.xi < 0.5);
        let d = BGev::new(&init).unwrap();
        let at_init: f64 = data.iter().map(|&y| d.logpdf(y)).sum();
        assert!(fit.loglik >= at_init);
        assert!(fit.converged, "{:?}", fit.termination);
    }
}

#[test]
fn bgev_fit_at_xi_boundary() {
    // Light-tailed data pushes xi to zero.
    let g = GevParams::new(0.0, 1.0, -0.2).unwrap();
    let data = g.sample(&mut stream(5), 500);
    let init = default_init(&data, QuantileSpec::default()).unwrap();
    let fit = fit_bgev_mle(&data, &init, &FitOptions::default()).unwrap();
    let p = fit.params.as_bgev().unwrap();
    assert!(p.xi >= 0.0 && p.xi < 0.01, "{}", p.xi);
}

#[test]
fn standardised_fit_matches_raw_fit() {
    let data = gev_sample(21, 500);
    let init = default_init(&data, QuantileSpec::default()).unwrap();
    let raw = fit_bgev_mle(&data, &init, &FitOptions::default()).unwrap();
    let std = fit_bgev_mle(&data, &init, &FitOptions::standardised()).unwrap();
    assert_ne!(std.standardisation.scale, 1.0);
    let (a, b) = (raw.params.as_bgev().unwrap(), std.params.as_bgev().unwrap());
    assert_relative_eq!(a.mu_alpha, b.mu_alpha, max_relative = 1e-5);
    assert_relative_eq!(a.sigma_beta, b.sigma_beta, max_relative = 1e-5);
    assert_relative_eq!(a.xi, b.xi, max_relative = 1e-5, epsilon = 1e-6);
    assert_relative_eq!(raw.loglik, std.loglik, max_relative = 1e-8);
    let (ca, cb) = (raw.cov_asymptotic.unwrap(), std.cov_asymptotic.unwrap());
    for i in 0..3 {
        assert_relative_eq!(ca[i][i], cb[i][i], max_relative = 1e-2);
    }
}

#[test]
fn intercept_only_regression_matches_univariate_fit() {
    let data = gev_sample(31, 400);
    let init = default_init(&data, QuantileSpec::default()).unwrap();
    let uni = fit_bgev_mle(&data, &init, &FitOptions::default()).unwrap();
    let table = BlockMaximaTable::pooled("all", &data).unwrap();
    let rinit = RegressionParams::initial(&table, QuantileSpec::default()).unwrap();
    let reg = fit_bgev_regression(&table, &rinit, &FitOptions::default()).unwrap();
    assert!(
        (uni.loglik - reg.loglik).abs() < 1e-6,
        "{} vs {}",
        uni.loglik,
        reg.loglik
    );
    let r = reg.params.as_regression().unwrap();
    assert_relative_eq!(
        r.beta_mu[0],
        uni.params.as_bgev().unwrap().mu_alpha,
        max_relative = 1e-5
    );
}

fn synthetic_table(seed: u64, stations: usize, years: usize, truth: &RegressionParams) -> BlockMaximaTable {
    let mut rng = stream(seed);
    let mut rows = Vec::new();
    for s in 0..stations {
        let x1 = -1.0 + 2.0 * s as f64 / (stations - 1) as f64;
        let x2 = ((s * 7919) % stations) as f64 / stations as f64 - 0.5;
        let x_mu = vec![1.0, x1, x2];
        let x_sigma = vec![1.0, x2];
        let p = truth
            .at(&x_mu, &x_sigma, BlendSpec::default(), QuantileSpec::default())
            .unwrap();
        let d = BGev::new(&p).unwrap();
        for (year, y) in d.sample(&mut rng, years).into_iter().enumerate() {
            rows.push(BlockMaximaRow {
                station_id: format!("s{s}"),
                year: 2000 + year as i32,
                y,
                x_mu: x_mu.clone(),
                x_sigma: x_sigma.clone(),
            });
        }
    }
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
    BlockMaximaTable::new(names(&["intercept", "x1", "x2"]), names(&["intercept", "x2"]), rows).unwrap()
}

#[test]
fn regression_recovers_coefficients() {
    let truth = RegressionParams {
        beta_mu: vec![20.0, 3.0, -2.0],
        beta_sigma: vec![1.5f64.ln(), 0.4],
        xi: 0.15,
    };
    let table = synthetic_table(derive_seed(9, &[1]), 200, 10, &truth);
    let init = RegressionParams::initial(&table, QuantileSpec::default()).unwrap();
    let fit = fit_bgev_regression(&table, &init, &FitOptions::standardised()).unwrap();
    assert!(fit.converged, "{:?}", fit.termination);
    let est = fit.params.to_vec();
    let se = fit.std_errors().unwrap();
    let want = {
        let mut v = truth.beta_mu.clone();
        v.extend(&truth.beta_sigma);
        v.push(truth.xi);
        v
    };
    for k in 0..want.len() {
        assert!(
            (est[k] - want[k]).abs() < 3.0 * se[k],
            "k={k} est={} want={} se={}",
            est[k],
            want[k],
            se[k]
        );
    }
}

#[test]
fn duplicated_column_is_reported() {
    let rows: Vec<BlockMaximaRow> = (0..20)
        .map(|i| BlockMaximaRow {
            station_id: "a".into(),
            year: i,
            y: 10.0 + (i as f64).sin(),
            x_mu: vec![1.0, i as f64, i as f64],
            x_sigma: vec![1.0],
        })
        .collect();
    let names = vec!["intercept".to_string(), "elev".into(), "elev_copy".into()];
    let table = BlockMaximaTable::new(names, vec!["intercept".into()], rows).unwrap();
    let init = RegressionParams {
        beta_mu: vec![10.0, 0.0, 0.0],
        beta_sigma: vec![0.0],
        xi: 0.1,
    };
    match fit_bgev_regression(&table, &init, &FitOptions::default()) {
        Err(Error::Collinear { predictor, columns }) => {
            assert_eq!(predictor, "mu");
            assert_eq!(columns, vec!["elev".to_string(), "elev_copy".into()]);
        }
        other => panic!("expected collinearity error, got {other:?}"),
    }
}

#[test]
fn table_rejects_duplicates_and_missing_intercept() {
    let row = |year, x0| BlockMaximaRow {
        station_id: "a".into(),
        year,
        y: 1.0,
        x_mu: vec![x0],
        x_sigma: vec![1.0],
    };
    let names = || vec!["intercept".to_string()];
    assert!(BlockMaximaTable::new(names(), names(), vec![row(1, 1.0), row(1, 1.0)]).is_err());
    assert!(BlockMaximaTable::new(names(), names(), vec![row(1, 2.0)]).is_err());
}

#[test]
fn parameter_conversion_helpers() {
    let p = BGevParams::new(11.26, 2.01, 0.178).unwrap();
    let g = from_quantile_params(&p).unwrap();
    let fp = FittedParams::Gev(g);
    assert_eq!(fp.to_vec(), vec![g.mu, g.sigma, g.xi]);
    assert!(fp.as_bgev().is_none());
}
