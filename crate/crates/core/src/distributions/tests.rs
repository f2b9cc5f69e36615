use super::*;
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};
use approx::assert_relative_eq;
use proptest::prelude::*;

fn truth() -> BGevParams {
    let g = GevParams::new(10.05, 3.21, 0.178).unwrap();
    to_quantile_params(&g, BlendSpec::default(), QuantileSpec::default()).unwrap()
}

fn halton(index: usize, base: usize) -> f64 {
    let (mut f, mut r, mut i) = (1.0, 0.0, index);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[test]
fn matched_gumbel_hits_window_probabilities() {
    let g = GevParams::new(0.0, 1.0, 0.2).unwrap();
    let blend = BlendSpec::default();
    let m = tail_match(&g, &blend).unwrap();
    let a = g.quantile(0.1).unwrap();
    let b = g.quantile(0.2).unwrap();
    assert_relative_eq!(m.cdf(a), 0.1, max_relative = 1e-12);
    assert_relative_eq!(m.cdf(b), 0.2, max_relative = 1e-12);
}

#[test]
fn gumbel_matches_itself() {
    let g = GevParams::gumbel(3.0, 2.0).unwrap();
    assert_eq!(tail_match(&g, &BlendSpec::default()).unwrap(), g);
}

#[test]
fn matched_scale_agrees_with_numeric_solve() {
    let g = GevParams::new(0.0, 1.0, 0.2).unwrap();
    let a = g.quantile(0.1).unwrap();
    let b = g.quantile(0.2).unwrap();
    // Solve exp(-exp(-(a-m)/s)) = 0.1, exp(-exp(-(b-m)/s)) = 0.2 by Newton
    // on the linearised system: (a-m)/s = -ln(-ln 0.1), (b-m)/s = -ln(-ln 0.2).
    let (ua, ub) = (-(-(0.1f64).ln()).ln(), -(-(0.2f64).ln()).ln());
    let (mut m, mut s) = (0.0f64, 1.0f64);
    for _ in 0..50 {
        let r1 = (a - m) / s - ua;
        let r2 = (b - m) / s - ub;
        let j = [[-1.0 / s, -(a - m) / (s * s)], [-1.0 / s, -(b - m) / (s * s)]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        m -= (j[1][1] * r1 - j[0][1] * r2) / det;
        s -= (-j[1][0] * r1 + j[0][0] * r2) / det;
    }
    let got = tail_match(&g, &BlendSpec::default()).unwrap();
    assert_relative_eq!(got.sigma, s, max_relative = 1e-10);
    assert_relative_eq!(got.mu, m, epsilon = 1e-10);
}

#[test]
fn tail_match_rejects_negative_shape() {
    let g = GevParams::new(0.0, 1.0, -0.1).unwrap();
    assert!(tail_match(&g, &BlendSpec::default()).is_err());
}

#[test]
fn blend_weight_edges_and_median() {
    assert_eq!(blend_weight(1.0, 1.0, 3.0, 5.0, 5.0).unwrap(), 0.0);
    assert_eq!(blend_weight(3.0, 1.0, 3.0, 5.0, 5.0).unwrap(), 1.0);
    assert_relative_eq!(blend_weight(2.0, 1.0, 3.0, 5.0, 5.0).unwrap(), 0.5, epsilon = 1e-14);
    assert!(blend_weight(2.0, 3.0, 3.0, 5.0, 5.0).is_err());
}

#[test]
fn cdf_at_window_edges() {
    let p = truth();
    let d = BGev::new(&p).unwrap();
    assert_relative_eq!(bgev_cdf(d.a, &p).unwrap(), 0.1, max_relative = 1e-12);
    assert_relative_eq!(bgev_cdf(d.b, &p).unwrap(), 0.2, max_relative = 1e-12);
}

#[test]
fn zero_shape_is_gumbel_everywhere() {
    let p = BGevParams::new(4.0, 2.0, 0.0).unwrap();
    let d = BGev::new(&p).unwrap();
    let g = from_quantile_params(&p).unwrap();
    for i in 0..50 {
        let y = -4.0 + 0.4 * i as f64;
        assert_relative_eq!(d.cdf(y), gev_cdf(y, &g).unwrap(), max_relative = 1e-13);
        assert_relative_eq!(d.logpdf(y), g.logpdf(y), max_relative = 1e-12, epsilon = 1e-12);
        assert_relative_eq!(d.cdf(y), d.gumbel.cdf(y), max_relative = 1e-13);
    }
}

#[test]
fn exact_tails_outside_window() {
    let p = BGevParams::new(1.0, 0.8, 0.3).unwrap();
    let d = BGev::new(&p).unwrap();
    for k in 0..20 {
        let below = d.a - 0.1 * k as f64;
        assert_eq!(d.cdf(below), d.gumbel.cdf(below));
        let above = d.b + 0.3 * k as f64;
        assert_eq!(d.cdf(above), d.gev.cdf(above));
        assert_eq!(bgev_logpdf(above, &p).unwrap(), gev_logpdf(above, &d.gev).unwrap());
    }
}

#[test]
fn density_matches_cdf_differences_across_window() {
    let p = truth();
    let d = BGev::new(&p).unwrap();
    let mut ys: Vec<f64> = (0..10).map(|i| d.a - 3.0 + 0.29 * i as f64).collect();
    ys.extend((1..=10).map(|i| d.a + (d.b - d.a) * i as f64 / 11.0));
    ys.extend((1..=10).map(|i| d.b + 1.5 * i as f64));
    assert_eq!(ys.len(), 30);
    for y in ys {
        let h = 1e-5;
        let fd = (d.cdf(y + h) - d.cdf(y - h)) / (2.0 * h);
        assert!((fd - d.pdf(y)).abs() < 1e-6, "y={y} fd={fd} pdf={}", d.pdf(y));
    }
}

#[test]
fn density_integrates_to_one() {
    for xi in [0.0, 0.1, 0.3, 0.49] {
        let p = BGevParams::new(0.0, 1.0, xi).unwrap();
        let d = BGev::new(&p).unwrap();
        let tol = Tolerance::absolute(1e-11);
        let lower = d.gumbel.quantile(1e-300).unwrap();
        let left = integrate(|y| d.pdf(y), lower, d.a, tol).value;
        let mid = integrate(|y| d.pdf(y), d.a, d.b, tol).value;
        let right = integrate_to_infinity(|y| d.pdf(y), d.b, tol).value;
        let total = left + mid + right;
        assert!((total - 1.0).abs() < 1e-6, "xi={xi} total={total}");
    }
}

#[test]
fn density_positive_everywhere() {
    let p = BGevParams::new(0.0, 1.0, 0.45).unwrap();
    let d = BGev::new(&p).unwrap();
    for i in 0..400 {
        let y = -10.0 + 0.1 * i as f64;
        assert!(d.pdf(y) > 0.0 || d.logpdf(y) > f64::NEG_INFINITY, "y={y}");
    }
}

#[test]
fn quantile_at_window_edge_and_alpha() {
    let p = truth();
    let d = BGev::new(&p).unwrap();
    assert_relative_eq!(bgev_quantile(0.2, &p).unwrap(), d.b, max_relative = 1e-14);
    assert_relative_eq!(bgev_quantile(0.5, &p).unwrap(), p.mu_alpha, max_relative = 1e-13);
    let spread = d.quantile(0.6).unwrap() - d.quantile(0.4).unwrap();
    assert_relative_eq!(spread, p.sigma_beta, max_relative = 1e-12);
}

#[test]
fn quantile_round_trips_through_cdf() {
    let p = truth();
    let d = BGev::new(&p).unwrap();
    for y in [d.a - 2.0 * p.sigma_beta, 0.5 * (d.a + d.b), d.b + 2.0 * p.sigma_beta] {
        let back = d.quantile(d.cdf(y)).unwrap();
        assert!((back - y).abs() < 1e-8, "y={y} back={back}");
    }
    for i in 1..20 {
        let prob = 0.1 + 0.1 * i as f64 / 20.0;
        let q = d.quantile(prob).unwrap();
        assert!((d.cdf(q) - prob).abs() <= 1e-10);
    }
    assert!(d.quantile(0.0).is_err());
    assert!(d.quantile(1.0).is_err());
}

#[test]
fn simulation_truth_parameter_anchor() {
    let p = BGevParams::new(11.26, 2.01, 0.178).unwrap();
    let g = from_quantile_params(&p).unwrap();
    assert!((g.mu - 10.05).abs() < 0.01, "{}", g.mu);
    assert!((g.sigma - 3.21).abs() < 0.01, "{}", g.sigma);
}

#[test]
fn gumbel_location_offset_at_median() {
    let g = GevParams::gumbel(2.0, 1.5).unwrap();
    let p = to_quantile_params(&g, BlendSpec::default(), QuantileSpec::default()).unwrap();
    assert_relative_eq!(p.mu_alpha, 2.0 + 1.5 * 0.366_512_920_581_664_3, max_relative = 1e-14);
}

#[test]
fn reparametrisation_rejects_bad_spread() {
    let mut p = BGevParams::new(0.0, 1.0, 0.1).unwrap();
    p.sigma_beta = 0.0;
    assert!(from_quantile_params(&p).is_err());
    p.sigma_beta = -1.0;
    assert!(from_quantile_params(&p).is_err());
}

#[test]
fn reparametrisation_round_trip_on_halton_grid() {
    for i in 1..=512 {
        let mu_alpha = -50.0 + 100.0 * halton(i, 2);
        let sigma_beta = 0.01 + 20.0 * halton(i, 3);
        let xi = 0.49 * halton(i, 5);
        let p = BGevParams::new(mu_alpha, sigma_beta, xi).unwrap();
        let back = to_quantile_params(&from_quantile_params(&p).unwrap(), p.blend, p.qspec).unwrap();
        assert_relative_eq!(back.mu_alpha, mu_alpha, max_relative = 1e-12, epsilon = 1e-12);
        assert_relative_eq!(back.sigma_beta, sigma_beta, max_relative = 1e-12);
        assert_eq!(back.xi, xi);
    }
}

#[test]
fn return_levels_match_gev_tail() {
    let p = truth();
    let g = from_quantile_params(&p).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for t in [25.0, 50.0, 100.0, 250.0, 500.0] {
        let r = return_level(t, &p).unwrap();
        assert_relative_eq!(r, g.quantile(1.0 - 1.0 / t).unwrap(), max_relative = 1e-14);
        assert!(r > prev);
        prev = r;
    }
    assert!(return_level(1.0, &p).is_err());
}

#[test]
fn parameter_validation() {
    assert!(BGevParams::new(0.0, 1.0, 0.5).is_err());
    assert!(BGevParams::new(0.0, 1.0, -0.01).is_err());
    assert!(BGevParams::new(0.0, 0.0, 0.1).is_err());
    assert!(BlendSpec::new(0.2, 0.1, 5.0, 5.0).is_err());
    let narrow = QuantileSpec::new(0.15, 0.8).unwrap();
    assert!(BGevParams::with_specs(0.0, 1.0, 0.1, BlendSpec::default(), narrow).is_err());
}

fn valid_params() -> impl Strategy<Value = BGevParams> {
    (-100.0f64..100.0, 0.05f64..30.0, 0.0f64..0.49).prop_map(|(m, s, x)| BGevParams::new(m, s, x).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cdf_strictly_increasing_on_dense_grid(p in valid_params()) {
        let d = BGev::new(&p).unwrap();
        let lo = d.a - 5.0 * p.sigma_beta;
        let hi = d.b + 5.0 * p.sigma_beta;
        let mut prev = d.cdf(lo);
        for i in 1..=400 {
            let y = lo + (hi - lo) * i as f64 / 400.0;
            let c = d.cdf(y);
            prop_assert!(c > prev || (c == prev && (c == 0.0 || c == 1.0)), "y={} c={} prev={}", y, c, prev);
            prev = c;
        }
    }

    #[test]
    fn cdf_continuous_at_window_edges(p in valid_params()) {
        let d = BGev::new(&p).unwrap();
        let eps = 1e-9 * (d.b - d.a);
        prop_assert!((d.cdf(d.a + eps) - d.cdf(d.a)).abs() < 1e-8);
        prop_assert!((d.cdf(d.b - eps) - d.cdf(d.b)).abs() < 1e-8);
    }

    #[test]
    fn reparametrisation_is_a_bijection(p in valid_params()) {
        let g = from_quantile_params(&p).unwrap();
        let back = to_quantile_params(&g, p.blend, p.qspec).unwrap();
        prop_assert!((back.mu_alpha - p.mu_alpha).abs() <= 1e-12 * p.mu_alpha.abs().max(1.0));
        prop_assert!((back.sigma_beta - p.sigma_beta).abs() <= 1e-12 * p.sigma_beta);
    }

    #[test]
    fn quantile_inverts_cdf(p in valid_params(), prob in 0.001f64..0.999) {
        let d = BGev::new(&p).unwrap();
        let q = d.quantile(prob).unwrap();
        prop_assert!((d.cdf(q) - prob).abs() <= 1e-10);
    }

    #[test]
    fn density_matches_cdf_slope(p in valid_params(), u in 0.02f64..0.98) {
        let d = BGev::new(&p).unwrap();
        let y = d.quantile(u).unwrap();
        let h = 1e-5 * p.sigma_beta;
        let fd = (d.cdf(y + h) - d.cdf(y - h)) / (2.0 * h);
        prop_assert!((fd - d.pdf(y)).abs() <= 1e-6 * d.pdf(y).max(1.0 / p.sigma_beta), "fd={} pdf={}", fd, d.pdf(y));
    }

    #[test]
    fn return_level_monotone(p in valid_params(), t in 1.5f64..1000.0) {
        let d = BGev::new(&p).unwrap();
        prop_assert!(d.return_level(2.0 * t).unwrap() >= d.return_level(t).unwrap());
    }
}
