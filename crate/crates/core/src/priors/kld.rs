use serde::{Deserialize, Serialize};

use crate::distributions::{to_quantile_params, BGev, BlendSpec, GevParams, QuantileSpec};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::special::{
    digamma, exponential_integral, gamma_one_minus_m1, lower_incomplete_gamma, upper_incomplete_gamma, EULER_GAMMA,
};

const SPLIT_LO: f64 = 1e-8;
const SPLIT_HI: f64 = 1.0 - 1e-8;

fn check_xi(xi: f64) -> Result<()> {
    if (0.0..1.0).contains(&xi) {
        Ok(())
    } else {
        Err(Error::domain(format!("tail parameter must lie in [0, 1), got {xi}")))
    }
}

/// Absolute tolerance for the (0, 1) integrals. The KLD is of order xi^2
/// while its constituent terms are of order xi, so the tolerance shrinks
/// with xi.
fn tol_for(xi: f64) -> Tolerance {
    Tolerance::absolute((1e-10 * xi * xi).clamp(1e-16, 1e-10)).with_rel(1e-13)
}

/// `int_lo^hi f(v) dv` split at `1e-8` and `1 - 1e-8`.
fn integrate_unit<F: Fn(f64) -> f64>(f: F, lo: f64, tol: Tolerance, what: &str) -> Result<f64> {
    let mut pts = vec![lo];
    pts.extend([SPLIT_LO, SPLIT_HI].into_iter().filter(|&p| p > lo));
    pts.push(1.0);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let q = integrate(&f, w[0], w[1], tol);
        if !q.value.is_finite() || q.error > 1e3 * tol.abs_tol.max(tol.rel_tol * q.value.abs()) {
            return Err(Error::Divergent(format!("{what}: error estimate {:.3e}", q.error)));
        }
        total += q.value;
    }
    Ok(total)
}

/// `exp(-psi(w, xi)) - w` for `w = -ln v`, i.e. the KLD integrand minus its
/// xi = 0 limit.
fn excess_integrand(v: f64, xi: f64) -> f64 {
    if v <= 0.0 || v >= 1.0 {
        return 0.0;
    }
    let w = -v.ln();
    let l = w.ln();
    let e = (-xi * l).exp_m1();
    // -psi - ln w = -expm1(-xi L)/xi - L
    w * (-e / xi - l).exp_m1()
}

/// KLD from the Gumbel base model to the GEV with tail parameter `xi`:
/// `-1 - (1+xi) gamma + (Gamma(1-xi) - 1)/xi + int_0^1 exp((1 - (-ln v)^-xi)/xi) dv`.
pub fn kld_gev(xi: f64) -> Result<f64> {
    check_xi(xi)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    let j = integrate_unit(|v| excess_integrand(v, xi), 0.0, tol_for(xi), "GEV KLD")?;
    Ok(-(1.0 + xi) * EULER_GAMMA + gamma_one_minus_m1(xi) / xi + j)
}

/// Derivative of [`kld_gev`] by differentiation under the integral sign.
pub fn kld_gev_derivative(xi: f64) -> Result<f64> {
    check_xi(xi)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    let gm = gamma_one_minus_m1(xi);
    let analytic = -EULER_GAMMA - (1.0 + gm) * digamma(1.0 - xi)? / xi - gm / (xi * xi);
    let integrand = |v: f64| {
        if v <= 0.0 || v >= 1.0 {
            return 0.0;
        }
        let w = -v.ln();
        let l = w.ln();
        let e = (-xi * l).exp_m1();
        let a = -e / xi;
        if a.is_infinite() {
            return 0.0;
        }
        // -1 + w^-xi (1 + xi L) = expm1(-xi L) + xi L + xi L expm1(-xi L)
        let bracket = e + xi * l + xi * l * e;
        a.exp() * bracket / (xi * xi)
    };
    let tol = Tolerance::absolute(1e-12).with_rel(1e-13);
    let j = integrate_unit(integrand, 0.0, tol, "GEV KLD derivative")?;
    Ok(analytic + j)
}

/// Gumbel, blending and Fréchet contributions to the bGEV KLD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KldParts {
    pub gumbel: f64,
    pub blending: f64,
    pub frechet: f64,
}

impl KldParts {
    pub fn total(&self) -> f64 {
        self.gumbel + self.blending + self.frechet
    }
}

fn psi(x: f64, xi: f64) -> f64 {
    (-xi * x.ln()).exp_m1() / xi
}

/// bGEV with `mu = 0`, `sigma = 1` (classical parameters) and tail `xi`.
pub(crate) fn standard_bgev(xi: f64, blend: &BlendSpec) -> Result<BGev> {
    let g = GevParams {
        mu: 0.0,
        sigma: 1.0,
        xi,
    };
    let p = to_quantile_params(&g, *blend, QuantileSpec::default())?;
    BGev::new_unbounded(&p)
}

/// Closed-form KLD contribution of the region below the `p_a` quantile.
pub fn kld_bgev_gumbel_part(xi: f64, blend: &BlendSpec) -> Result<f64> {
    let (pa, pb) = (blend.p_a, blend.p_b);
    let (la, lb) = (pa.ln(), pb.ln());
    let log_ratio = (la / lb).ln();
    let dpsi = psi(-lb, xi) - psi(-la, xi);
    let c1 = dpsi / log_ratio;
    let c2 = c1 * (-la).ln() + psi(-la, xi);
    let ei = exponential_integral(la)?;
    let t = pa * (-la).ln() - ei;
    Ok(
        -upper_incomplete_gamma(-la, 2.0)? + t + upper_incomplete_gamma(-la, c1 + 1.0)? * (-c2).exp() - c1 * t
            + pa * (c2 + log_ratio.ln())
            - pa * dpsi.ln(),
    )
}

/// KLD contribution of the region above the `p_b` quantile.
pub fn kld_bgev_frechet_part(xi: f64, blend: &BlendSpec) -> Result<f64> {
    let pb = blend.p_b;
    let lb = pb.ln();
    let ei = exponential_integral(lb)?;
    // int_{pb}^1 exp(-psi(w)) du, written as the excess over int w du.
    let w_integral = 1.0 - pb + pb * lb;
    let excess = integrate_unit(|u| excess_integrand(u, xi), pb, tol_for(xi), "Frechet KLD")?;
    let tail_term = (lower_incomplete_gamma(-lb, 1.0 - xi)? - (1.0 - pb)) / xi;
    Ok(-lower_incomplete_gamma(-lb, 2.0)?
        + (xi + 1.0) * (-pb * (-lb).ln() + ei - EULER_GAMMA)
        + tail_term
        + w_integral
        + excess)
}

/// KLD contribution of the blending window, by quadrature.
pub fn kld_bgev_blending_part(xi: f64, blend: &BlendSpec) -> Result<f64> {
    let d = standard_bgev(xi, blend)?;
    let base = GevParams {
        mu: 0.0,
        sigma: 1.0,
        xi: 0.0,
    };
    let f = |x: f64| {
        let lh = d.logpdf(x);
        lh.exp() * (lh - base.logpdf(x))
    };
    integrate(f, d.a, d.b, tol_for(xi)).require("blending KLD")
}

pub fn kld_bgev_parts(xi: f64, blend: &BlendSpec) -> Result<KldParts> {
    check_xi(xi)?;
    blend.validate()?;
    if xi == 0.0 {
        return Ok(KldParts {
            gumbel: 0.0,
            blending: 0.0,
            frechet: 0.0,
        });
    }
    Ok(KldParts {
        gumbel: kld_bgev_gumbel_part(xi, blend)?,
        blending: kld_bgev_blending_part(xi, blend)?,
        frechet: kld_bgev_frechet_part(xi, blend)?,
    })
}

/// KLD from the Gumbel base model to the bGEV with tail parameter `xi`.
pub fn kld_bgev(xi: f64, blend: &BlendSpec) -> Result<f64> {
    Ok(kld_bgev_parts(xi, blend)?.total())
}

/// Five-point central difference of [`kld_bgev`], step
/// `min(1e-4, xi/2.5, (1-xi)/2.5)` so the stencil stays inside (0, 1).
pub fn kld_bgev_derivative(xi: f64, blend: &BlendSpec) -> Result<f64> {
    check_xi(xi)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    let h = 1e-4f64.min(xi / 2.5).min((1.0 - xi) / 2.5);
    let k = |x: f64| kld_bgev(x, blend);
    Ok((-k(xi + 2.0 * h)? + 8.0 * k(xi + h)? - 8.0 * k(xi - h)? + k(xi - 2.0 * h)?) / (12.0 * h))
}
