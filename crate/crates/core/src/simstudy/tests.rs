use std::sync::OnceLock;

use super::*;

fn small_config() -> SimConfig {
    SimConfig {
        n_grid: vec![100, 1000],
        return_periods: vec![25.0, 500.0],
        replicates: 40,
        master_seed: 7,
        ..SimConfig::default()
    }
}

fn small_study() -> &'static Vec<SimRow> {
    static ROWS: OnceLock<Vec<SimRow>> = OnceLock::new();
    ROWS.get_or_init(|| run_study(&small_config()).unwrap())
}

fn true_level(period: f64) -> f64 {
    SimConfig::default().truth.quantile(1.0 - 1.0 / period).unwrap()
}

#[test]
fn defaults() {
    let c = SimConfig::default();
    assert_eq!(c.n_grid, vec![25, 50, 100, 500, 1000]);
    assert_eq!(c.return_periods, vec![25.0, 50.0, 100.0, 250.0, 500.0]);
    assert_eq!(c.replicates, 500);
    assert_eq!((c.truth.mu, c.truth.sigma, c.truth.xi), (10.05, 3.21, 0.178));
    assert_eq!(c.init_bad.sigma, 0.9);
    c.validate().unwrap();
}

#[test]
fn sample_median_matches_quantile() {
    let t = SimConfig::default().truth;
    let x = sample_gev(1_000_000, &t, 11);
    let m = median(&x);
    assert!((m - t.quantile(0.5).unwrap()).abs() < 0.02, "{m}");
}

#[test]
fn samples_are_reproducible_and_in_support() {
    let t = SimConfig::default().truth;
    let a = sample_gev(500, &t, 3);
    assert_eq!(a, sample_gev(500, &t, 3));
    assert_ne!(a, sample_gev(500, &t, 4));
    let lb = t.mu - t.sigma / t.xi;
    assert!(a.iter().all(|&v| v > lb));
}

#[test]
fn study_is_deterministic() {
    let cfg = SimConfig {
        n_grid: vec![50],
        replicates: 6,
        ..small_config()
    };
    let a = run_study(&cfg).unwrap();
    let b = run_study(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 6 * 4 * 2);
}

#[test]
fn bgev_arms_always_converge_and_agree() {
    let rows = small_study();
    for &n in &[100, 1000] {
        for &t in &[25.0, 500.0] {
            let good = cell_estimates(rows, SimDist::BGev, InitKind::Good, n, t);
            let bad = cell_estimates(rows, SimDist::BGev, InitKind::Bad, n, t);
            assert_eq!(good.len(), 40);
            for (g, b) in good.iter().zip(&bad) {
                let (g, b) = (g.unwrap(), b.unwrap());
                assert!(((g - b) / g).abs() < 1e-4, "n={n} T={t}: {g} vs {b}");
            }
        }
    }
}

#[test]
fn bad_init_gev_is_biased_more_often() {
    let rows = small_study();
    let good = biased_fraction(rows, SimDist::Gev, InitKind::Good, 1000).unwrap();
    let bad = biased_fraction(rows, SimDist::Gev, InitKind::Bad, 1000).unwrap();
    assert!(bad > good, "{bad} vs {good}");
    assert!(bad > 0.5, "{bad}");
}

#[test]
fn good_init_medians_agree_across_families() {
    let rows = small_study();
    let s = summarise_study(rows).unwrap();
    let find = |d, i| {
        s.iter()
            .find(|r| r.dist == d && r.init == i && r.n == 1000 && r.period == 25.0)
            .unwrap()
    };
    let g = find(SimDist::Gev, InitKind::Good).median.unwrap();
    let b = find(SimDist::BGev, InitKind::Good).median.unwrap();
    assert!(((g - b) / g).abs() < 0.02, "{g} vs {b}");
    let cell = find(SimDist::Gev, InitKind::Good);
    let truth = true_level(25.0);
    assert!(cell.q05.unwrap() < truth && truth < cell.q95.unwrap());
}

#[test]
fn summary_matches_recomputation() {
    let rows = small_study();
    let s = summarise_study(rows).unwrap();
    assert_eq!(s.len(), 2 * 2 * 2 * 2);
    for r in &s {
        let est: Vec<f64> = cell_estimates(rows, r.dist, r.init, r.n, r.period)
            .into_iter()
            .flatten()
            .collect();
        assert_eq!(r.replicates, 40);
        if est.is_empty() {
            assert!(r.empty && r.median.is_none());
        } else {
            assert_eq!(r.median.unwrap(), median(&est));
        }
    }
}

#[test]
fn identical_estimates_give_zero_width() {
    let rows: Vec<SimRow> = (0..5)
        .map(|k| SimRow {
            dist: SimDist::Gev,
            init: InitKind::Good,
            n: 10,
            period: 25.0,
            replicate: k,
            estimate: Some(3.5),
            converged: true,
        })
        .collect();
    let s = summarise_study(&rows).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].q05, s[0].q95);
    assert_eq!(s[0].failure_fraction, 0.0);
}

#[test]
fn failed_cell_is_flagged() {
    let rows = vec![SimRow {
        dist: SimDist::Gev,
        init: InitKind::Bad,
        n: 10,
        period: 25.0,
        replicate: 0,
        estimate: None,
        converged: false,
    }];
    let s = summarise_study(&rows).unwrap();
    assert!(s[0].empty && s[0].median.is_none());
    assert_eq!(s[0].failure_fraction, 1.0);
    assert!(summarise_study(&[]).is_err());
}

#[test]
fn svg_panel_draws_each_arm() {
    let svg = density_panel_svg(small_study(), 1000, 25.0, Some(true_level(25.0))).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.matches("<polyline").count() >= 3);
    assert!(density_panel_svg(small_study(), 77, 25.0, None).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(SimConfig {
        replicates: 0,
        ..SimConfig::default()
    }
    .validate()
    .is_err());
    assert!(SimConfig {
        return_periods: vec![1.0],
        ..SimConfig::default()
    }
    .validate()
    .is_err());
    let mut c = SimConfig::default();
    c.init_good.xi = 0.7;
    assert!(run_study(&c).is_err());
}
