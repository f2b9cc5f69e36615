//! CRPS, threshold-weighted CRPS and the scaled twCRPS, evaluated by
//! quadrature over the quantile function.

mod mixture;

pub use mixture::{mixture_cdf, mixture_quantile, ForecastMixture};

use crate::distributions::{BGev, GevParams};
use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::{integrate, integrate_from_neg_infinity, integrate_to_infinity, Tolerance};

/// A forecast exposing mutually inverse CDF and quantile functions.
pub trait ForecastDistribution {
    fn cdf(&self, y: f64) -> f64;
    /// Quantile for `p` in (0, 1).
    fn quantile(&self, p: f64) -> f64;
}

impl ForecastDistribution for BGev {
    fn cdf(&self, y: f64) -> f64 {
        BGev::cdf(self, y)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.quantile_unchecked(p)
    }
}

impl ForecastDistribution for GevParams {
    fn cdf(&self, y: f64) -> f64 {
        GevParams::cdf(self, y)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.quantile_unchecked(p)
    }
}

const SCORE_TOL: f64 = 1e-8;
const SFF_TOL: f64 = 1e-6;

fn check_p0(p0: f64) -> Result<()> {
    if (0.0..1.0).contains(&p0) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "weight threshold p0 must lie in [0, 1), got {p0}"
        )))
    }
}

/// Pinball loss `l_p(x) = x (p - 1[x < 0])`.
fn pinball(x: f64, p: f64) -> f64 {
    if x < 0.0 {
        x * (p - 1.0)
    } else {
        x * p
    }
}

/// `int_{p_lo}^{1} g(p) dp` through `p = 1 - exp(-t)`, split at `kink`.
fn integrate_upper<G: Fn(f64) -> f64>(g: G, p_lo: f64, kink: Option<f64>, tol: f64, what: &str) -> Result<f64> {
    let t_of = |p: f64| -(-p).ln_1p();
    let h = |t: f64| {
        let p = -(-t).exp_m1();
        if p >= 1.0 {
            return 0.0;
        }
        g(p) * (-t).exp()
    };
    let t0 = t_of(p_lo);
    let tol = Tolerance::absolute(tol);
    let mut total = 0.0;
    let mut start = t0;
    if let Some(k) = kink.filter(|&k| k > p_lo && k < 1.0) {
        let tk = t_of(k);
        total += integrate(h, t0, tk, tol).require(what)?;
        start = tk;
    }
    total += integrate_to_infinity(h, start, tol).require(what)?;
    Ok(total)
}

/// Threshold-weighted CRPS with weight `1[p > p0]`:
/// `2 int_{p0}^1 l_p(y - F^-1(p)) dp`.
pub fn twcrps<F: ForecastDistribution + ?Sized>(f: &F, y: f64, p0: f64) -> Result<f64> {
    ensure_finite("y", y)?;
    check_p0(p0)?;
    let kink = f.cdf(y);
    let v = integrate_upper(|p| pinball(y - f.quantile(p), p), p0, Some(kink), SCORE_TOL, "twcrps")?;
    Ok(2.0 * v)
}

pub fn crps<F: ForecastDistribution + ?Sized>(f: &F, y: f64) -> Result<f64> {
    twcrps(f, y, 0.0)
}

/// CRPS through the CDF form `int (F(t) - 1[t >= y])^2 dt`.
pub fn crps_cdf_form<F: ForecastDistribution + ?Sized>(f: &F, y: f64) -> Result<f64> {
    ensure_finite("y", y)?;
    let tol = Tolerance::absolute(SCORE_TOL);
    let lower = integrate_from_neg_infinity(|t| f.cdf(t).powi(2), y, tol).require("crps lower")?;
    let upper = integrate_to_infinity(|t| (1.0 - f.cdf(t)).powi(2), y, tol).require("crps upper")?;
    Ok(lower + upper)
}

/// Expected twCRPS of `F` under itself, `int twcrps(F, y) dF(y)`.
///
/// Evaluated as `int_0^1 F^-1(u) k(u) du` with `k(u) = -(1 - p0)^2` for
/// `u <= p0` and `2u - 1 - p0^2` above.
pub fn s_ff<F: ForecastDistribution + ?Sized>(f: &F, p0: f64) -> Result<f64> {
    check_p0(p0)?;
    let upper = integrate_upper(
        |u| f.quantile(u) * (2.0 * u - 1.0 - p0 * p0),
        p0,
        None,
        SFF_TOL * 1e-2,
        "s_ff",
    )?;
    let lower = if p0 > 0.0 {
        let w = -(1.0 - p0) * (1.0 - p0);
        let q = integrate(
            |u| if u > 0.0 { f.quantile(u) } else { 0.0 },
            0.0,
            p0,
            Tolerance::absolute(SFF_TOL * 1e-2),
        );
        w * q.require("s_ff")?
    } else {
        0.0
    };
    let v = upper + lower;
    if !v.is_finite() {
        return Err(Error::Divergent("s_ff".into()));
    }
    Ok(v)
}

/// Scaled twCRPS `S(F, y) / |S(F, F)| + ln |S(F, F)|` with `S(F, F)`
/// supplied by the caller.
pub fn stwcrps_with_sff<F: ForecastDistribution + ?Sized>(f: &F, y: f64, p0: f64, sff: f64) -> Result<f64> {
    if !(sff.abs() > 0.0) || !sff.is_finite() {
        return Err(Error::Degenerate(format!("S(F, F) = {sff}")));
    }
    Ok(twcrps(f, y, p0)? / sff.abs() + sff.abs().ln())
}

pub fn stwcrps<F: ForecastDistribution + ?Sized>(f: &F, y: f64, p0: f64) -> Result<f64> {
    let sff = s_ff(f, p0)?;
    stwcrps_with_sff(f, y, p0, sff)
}

#[cfg(test)]
mod tests;
