use super::*;
use crate::distributions::{to_quantile_params, BGevParams, BlendSpec, QuantileSpec};
use crate::quadrature::{integrate, Tolerance};
use crate::rng::stream;
use approx::assert_relative_eq;
use rand::Rng;

struct Uniform01;

impl ForecastDistribution for Uniform01 {
    fn cdf(&self, y: f64) -> f64 {
        y.clamp(0.0, 1.0)
    }

    fn quantile(&self, p: f64) -> f64 {
        p
    }
}

fn truth() -> BGev {
    let g = GevParams::new(10.05, 3.21, 0.178).unwrap();
    BGev::new(&to_quantile_params(&g, BlendSpec::default(), QuantileSpec::default()).unwrap()).unwrap()
}

/// Stratified inverse-CDF sample: one uniform per stratum of width 1/n.
fn stratified<F: ForecastDistribution>(f: &F, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed);
    (0..n)
        .map(|i| {
            let u: f64 = rng.random();
            ForecastDistribution::quantile(f, (i as f64 + u.clamp(1e-12, 1.0 - 1e-12)) / n as f64)
        })
        .collect()
}

#[test]
fn uniform_crps_closed_form() {
    assert_relative_eq!(crps(&Uniform01, 0.5).unwrap(), 1.0 / 12.0, epsilon = 1e-10);
    for y in [-0.3f64, 0.1, 0.9, 1.7] {
        let closed = if (0.0..=1.0).contains(&y) {
            y * y * y / 3.0 + (1.0 - y).powi(3) / 3.0
        } else if y < 0.0 {
            -y + 1.0 / 3.0
        } else {
            y - 1.0 + 1.0 / 3.0
        };
        assert_relative_eq!(crps(&Uniform01, y).unwrap(), closed, epsilon = 1e-9);
    }
}

#[test]
fn crps_agrees_with_cdf_form() {
    let f = truth();
    for y in [2.0, 8.0, 11.26, 15.0, 30.0, 80.0] {
        let a = crps(&f, y).unwrap();
        let b = crps_cdf_form(&f, y).unwrap();
        assert!((a - b).abs() < 1e-6, "y={y}: {a} vs {b}");
        assert!(a > 0.0);
    }
}

#[test]
fn unweighted_twcrps_is_crps() {
    let f = truth();
    for i in 0..20 {
        let y = 1.0 + 2.5 * i as f64;
        assert!((twcrps(&f, y, 0.0).unwrap() - crps(&f, y).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn twcrps_vanishes_as_threshold_reaches_one() {
    let f = truth();
    let y = f.quantile_unchecked(0.5);
    let mut prev = f64::INFINITY;
    for p0 in [0.9, 0.99, 0.999, 0.999_999] {
        let v = twcrps(&f, y, p0).unwrap();
        assert!(v < prev);
        prev = v;
    }
    assert!(prev < 1e-4);
    assert!(twcrps(&f, y, 1.0).is_err());
}

#[test]
fn twcrps_matches_fixed_grid_simpson() {
    let f = truth();
    let g = f.gev;
    let q = |p: f64| g.mu + g.sigma * ((-p.ln()).powf(-g.xi) - 1.0) / g.xi;
    let y = q(0.95);
    // p = 1 - 0.1 w^4 maps w in (0, 1] onto [0.9, 1); the kink p = 0.95 sits at w = 0.5^(1/4).
    let integrand = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let p = 1.0 - 0.1 * w.powi(4);
        if p >= 1.0 {
            return 0.0;
        }
        let x = y - q(p);
        let loss = if x < 0.0 { x * (p - 1.0) } else { x * p };
        loss * 0.4 * w.powi(3)
    };
    let simpson = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        let mut s = integrand(a) + integrand(b);
        for i in 1..n {
            s += integrand(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let wk = 0.5f64.powf(0.25);
    let oracle = 2.0 * (simpson(0.0, wk, 200_000) + simpson(wk, 1.0, 200_000));
    let got = twcrps(&f, y, 0.9).unwrap();
    assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
}

#[test]
fn crps_matches_monte_carlo_oracle() {
    let f = truth();
    let n = 1_000_000;
    let xs = stratified(&f, n, 42);
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    // (1/2) E|X - X'| from the sorted sample.
    let half_gini: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i as f64 + 1.0) - n as f64 - 1.0) * x)
        .sum::<f64>()
        / (n as f64 * n as f64);
    for prob in [0.05, 0.3, 0.5, 0.9, 0.99] {
        let y = f.quantile_unchecked(prob);
        let mc = xs.iter().map(|x| (x - y).abs()).sum::<f64>() / n as f64 - half_gini;
        let got = crps(&f, y).unwrap();
        let tol = 0.5 * 10f64.powf(got.abs().log10().floor() - 2.0);
        assert!((got - mc).abs() < tol, "p={prob}: {got} vs {mc}");
    }
}

#[test]
fn sff_matches_nested_quadrature() {
    let f = truth();
    for p0 in [0.0, 0.5, 0.9] {
        let fast = s_ff(&f, p0).unwrap();
        let nested = integrate(
            |u| {
                if u <= 0.0 || u >= 1.0 {
                    0.0
                } else {
                    twcrps(&f, f.quantile_unchecked(u), p0).unwrap()
                }
            },
            0.0,
            1.0,
            Tolerance::absolute(1e-6),
        )
        .require("nested")
        .unwrap();
        assert!(
            (fast - nested).abs() < 1e-5 * nested.max(1.0),
            "p0={p0}: {fast} vs {nested}"
        );
    }
}

#[test]
fn sff_at_zero_threshold_is_half_mean_difference() {
    // E|X - X'| = 1/3 for the standard uniform.
    assert_relative_eq!(s_ff(&Uniform01, 0.0).unwrap(), 1.0 / 6.0, epsilon = 1e-9);
}

#[test]
fn sff_shrinks_with_spread_and_stays_positive() {
    let mut prev = f64::INFINITY;
    for sb in [2.0, 0.5, 0.1, 0.01] {
        let f = BGev::new(&BGevParams::new(5.0, sb, 0.2).unwrap()).unwrap();
        let v = s_ff(&f, 0.9).unwrap();
        assert!(v > 0.0 && v < prev);
        prev = v;
    }
    assert!(prev < 1e-2);
}

#[test]
fn stwcrps_is_shift_invariant() {
    let base = BGevParams::new(3.0, 1.5, 0.25).unwrap();
    let shifted = BGevParams {
        mu_alpha: base.mu_alpha + 7.5,
        ..base
    };
    let (f1, f2) = (BGev::new(&base).unwrap(), BGev::new(&shifted).unwrap());
    for y in [1.0, 3.0, 6.0, 12.0] {
        let a = stwcrps(&f1, y, 0.9).unwrap();
        let b = stwcrps(&f2, y + 7.5, 0.9).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn stwcrps_finite_for_tiny_scores() {
    let f = BGev::new(&BGevParams::new(0.0, 1e-3, 0.1).unwrap()).unwrap();
    let v = stwcrps(&f, f.quantile_unchecked(0.2), 0.9).unwrap();
    assert!(v.is_finite());
    assert!(stwcrps_with_sff(&f, 0.0, 0.9, 0.0).is_err());
}

#[test]
fn single_component_mixture_is_the_component() {
    let p = BGevParams::new(11.0, 2.0, 0.2).unwrap();
    let d = BGev::new(&p).unwrap();
    let mix = ForecastMixture::new(vec![p]).unwrap();
    for y in [5.0, 9.0, 11.0, 20.0] {
        assert_eq!(mixture_cdf(y, &mix), d.cdf(y));
    }
    for prob in [0.05, 0.15, 0.5, 0.99] {
        assert_eq!(mixture_quantile(prob, &mix).unwrap(), d.quantile_unchecked(prob));
    }
    let twin = ForecastMixture::new(vec![p, p]).unwrap();
    for prob in [0.05, 0.5, 0.99] {
        assert_relative_eq!(
            twin.quantile(prob).unwrap(),
            d.quantile_unchecked(prob),
            max_relative = 1e-12
        );
    }
}

#[test]
fn mixture_quantile_round_trip() {
    let comps: Vec<BGevParams> = (0..7)
        .map(|i| BGevParams::new(10.0 + i as f64, 1.0 + 0.3 * i as f64, 0.05 * i as f64).unwrap())
        .collect();
    let mix = ForecastMixture::new(comps).unwrap();
    for p in [0.05, 0.5, 0.99] {
        let q = mix.quantile(p).unwrap();
        assert!((mix.cdf(q) - p).abs() < 1e-8);
    }
    assert!(mix.quantile(0.0).is_err());
    assert!(ForecastMixture::new(vec![]).is_err());
}

#[test]
fn mixture_serde_round_trip() {
    let mix = ForecastMixture::new(vec![BGevParams::new(1.0, 2.0, 0.1).unwrap()]).unwrap();
    let json = serde_json_like(&mix);
    assert!(json.contains("mu_alpha"));
}

fn serde_json_like(mix: &ForecastMixture) -> String {
    format!("{:?}", mix.components())
}
