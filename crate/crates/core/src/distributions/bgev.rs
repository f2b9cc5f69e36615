use serde::{Deserialize, Serialize};

use super::gev::{check_prob, psi, GevParams};
use crate::error::{ensure_finite, Error, Result};
use crate::rng::open_uniform;
use crate::special::{beta_log_pdf, reg_inc_beta};

/// Default upper bound on the tail parameter for bGEV models.
pub const XI_MAX: f64 = 0.5;

/// Blending window probabilities and beta-weight shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendSpec {
    pub p_a: f64,
    pub p_b: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for BlendSpec {
    fn default() -> Self {
        Self {
            p_a: 0.1,
            p_b: 0.2,
            c1: 5.0,
            c2: 5.0,
        }
    }
}

impl BlendSpec {
    pub fn new(p_a: f64, p_b: f64, c1: f64, c2: f64) -> Result<Self> {
        let s = Self { p_a, p_b, c1, c2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_a > 0.0 && self.p_a < self.p_b && self.p_b < 1.0) {
            return Err(Error::domain(format!(
                "blend probabilities need 0 < p_a < p_b < 1, got ({}, {})",
                self.p_a, self.p_b
            )));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.c1.is_finite() && self.c2.is_finite()) {
            return Err(Error::domain(format!(
                "beta shapes must be positive, got ({}, {})",
                self.c1, self.c2
            )));
        }
        Ok(())
    }
}

/// Probabilities defining the location (`alpha` quantile) and spread
/// (`q(1 - beta/2) - q(beta/2)`) parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for QuantileSpec {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.8 }
    }
}

impl QuantileSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let q = Self { alpha, beta };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0 && self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::domain(format!(
                "alpha and beta must lie in (0, 1), got ({}, {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    /// Checks that both functionals lie above the blending window.
    pub fn validate_against(&self, blend: &BlendSpec) -> Result<()> {
        self.validate()?;
        if self.alpha < blend.p_b || self.beta / 2.0 < blend.p_b {
            return Err(Error::domain(format!(
                "alpha = {} and beta/2 = {} must both be at least p_b = {}",
                self.alpha,
                self.beta / 2.0,
                blend.p_b
            )));
        }
        Ok(())
    }

    /// `q(1 - beta/2) - q(beta/2)` for a GEV with unit scale.
    fn spread_factor(&self, xi: f64) -> f64 {
        psi(-(1.0 - self.beta / 2.0).ln(), xi) - psi(-(self.beta / 2.0).ln(), xi)
    }

    fn location_offset(&self, xi: f64) -> f64 {
        psi(-self.alpha.ln(), xi)
    }
}

/// Quantile-based bGEV parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BGevParams {
    pub mu_alpha: f64,
    pub sigma_beta: f64,
    pub xi: f64,
    #[serde(default)]
    pub blend: BlendSpec,
    #[serde(default)]
    pub qspec: QuantileSpec,
}

impl BGevParams {
    /// Parameters with the default blending and quantile specifications.
    pub fn new(mu_alpha: f64, sigma_beta: f64, xi: f64) -> Result<Self> {
        Self::with_specs(mu_alpha, sigma_beta, xi, BlendSpec::default(), QuantileSpec::default())
    }

    pub fn with_specs(mu_alpha: f64, sigma_beta: f64, xi: f64, blend: BlendSpec, qspec: QuantileSpec) -> Result<Self> {
        let p = Self {
            mu_alpha,
            sigma_beta,
            xi,
            blend,
            qspec,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_xi_max(XI_MAX)
    }

    pub fn validate_with_xi_max(&self, xi_max: f64) -> Result<()> {
        ensure_finite("mu_alpha", self.mu_alpha)?;
        ensure_finite("sigma_beta", self.sigma_beta)?;
        ensure_finite("xi", self.xi)?;
        if self.sigma_beta <= 0.0 {
            return Err(Error::domain(format!(
                "sigma_beta must be positive, got {}",
                self.sigma_beta
            )));
        }
        if !(self.xi >= 0.0 && self.xi < xi_max) {
            return Err(Error::domain(format!("xi must lie in [0, {xi_max}), got {}", self.xi)));
        }
        self.blend.validate()?;
        self.qspec.validate_against(&self.blend)
    }
}

/// GEV parameters of the distribution whose `alpha` quantile is `mu_alpha`
/// and whose central `beta` range is `sigma_beta`.
pub fn from_quantile_params(p: &BGevParams) -> Result<GevParams> {
    ensure_finite("mu_alpha", p.mu_alpha)?;
    ensure_finite("xi", p.xi)?;
    if !(p.sigma_beta > 0.0) || !p.sigma_beta.is_finite() {
        return Err(Error::domain(format!(
            "sigma_beta must be positive, got {}",
            p.sigma_beta
        )));
    }
    p.qspec.validate()?;
    let sigma = p.sigma_beta / p.qspec.spread_factor(p.xi);
    let mu = p.mu_alpha - sigma * p.qspec.location_offset(p.xi);
    Ok(GevParams { mu, sigma, xi: p.xi })
}

pub fn to_quantile_params(g: &GevParams, blend: BlendSpec, qspec: QuantileSpec) -> Result<BGevParams> {
    g.validate()?;
    if g.xi < 0.0 {
        return Err(Error::domain(format!("bGEV requires xi >= 0, got {}", g.xi)));
    }
    qspec.validate()?;
    Ok(BGevParams {
        mu_alpha: g.mu + g.sigma * qspec.location_offset(g.xi),
        sigma_beta: g.sigma * qspec.spread_factor(g.xi),
        xi: g.xi,
        blend,
        qspec,
    })
}

/// Gumbel distribution agreeing with `p` at its `p_a` and `p_b` quantiles.
pub fn tail_match(p: &GevParams, blend: &BlendSpec) -> Result<GevParams> {
    p.validate()?;
    blend.validate()?;
    if p.xi < 0.0 {
        return Err(Error::domain(format!("tail matching requires xi >= 0, got {}", p.xi)));
    }
    if p.xi == 0.0 {
        return Ok(*p);
    }
    let a = p.quantile_unchecked(blend.p_a);
    let b = p.quantile_unchecked(blend.p_b);
    let sigma = (b - a) / (blend.p_a.ln() / blend.p_b.ln()).ln();
    let mu = a + sigma * (-blend.p_a.ln()).ln();
    Ok(GevParams { mu, sigma, xi: 0.0 })
}

/// Beta-CDF weight moving from 0 at `a` to 1 at `b`.
pub fn blend_weight(y: f64, a: f64, b: f64, c1: f64, c2: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::domain(format!("blend window needs a < b, got [{a}, {b}]")));
    }
    if y <= a {
        return Ok(0.0);
    }
    if y >= b {
        return Ok(1.0);
    }
    reg_inc_beta((y - a) / (b - a), c1, c2)
}

/// Evaluator for a bGEV distribution with the blending window precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BGev {
    pub params: BGevParams,
    /// GEV body/upper tail `F`.
    pub gev: GevParams,
    /// Gumbel lower tail `G`.
    pub gumbel: GevParams,
    pub a: f64,
    pub b: f64,
}

impl BGev {
    pub fn new(params: &BGevParams) -> Result<Self> {
        params.validate()?;
        Self::build(params)
    }

    /// Like [`BGev::new`] but allows any `xi >= 0`.
    pub fn new_unbounded(params: &BGevParams) -> Result<Self> {
        params.validate_with_xi_max(f64::INFINITY)?;
        Self::build(params)
    }

    fn build(params: &BGevParams) -> Result<Self> {
        let gev = from_quantile_params(params)?;
        let gumbel = tail_match(&gev, &params.blend)?;
        let a = gev.quantile_unchecked(params.blend.p_a);
        let b = gev.quantile_unchecked(params.blend.p_b);
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::domain("degenerate blending window"));
        }
        Ok(Self {
            params: *params,
            gev,
            gumbel,
            a,
            b,
        })
    }

    fn weight(&self, y: f64) -> f64 {
        let bl = &self.params.blend;
        reg_inc_beta((y - self.a) / (self.b - self.a), bl.c1, bl.c2).unwrap_or(f64::NAN)
    }

    pub fn log_cdf(&self, y: f64) -> f64 {
        if y <= self.a {
            return self.gumbel.log_cdf(y);
        }
        if y >= self.b {
            return self.gev.log_cdf(y);
        }
        let v = self.weight(y);
        v * self.gev.log_cdf(y) + (1.0 - v) * self.gumbel.log_cdf(y)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.log_cdf(y).exp()
    }

    pub fn logpdf(&self, y: f64) -> f64 {
        if y <= self.a {
            return self.gumbel.logpdf(y);
        }
        if y >= self.b {
            return self.gev.logpdf(y);
        }
        let bl = &self.params.blend;
        let width = self.b - self.a;
        let x = (y - self.a) / width;
        let v = self.weight(y);
        let dv = (beta_log_pdf(x, bl.c1, bl.c2) - width.ln()).exp();
        let (lf, lg) = (self.gev.log_cdf(y), self.gumbel.log_cdf(y));
        let hazard_f = (self.gev.logpdf(y) - lf).exp();
        let hazard_g = (self.gumbel.logpdf(y) - lg).exp();
        let bracket = dv * (lf - lg) + v * hazard_f + (1.0 - v) * hazard_g;
        v * lf + (1.0 - v) * lg + bracket.ln()
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.logpdf(y).exp()
    }

    pub fn quantile_unchecked(&self, prob: f64) -> f64 {
        let bl = &self.params.blend;
        if prob <= bl.p_a {
            return self.gumbel.quantile_unchecked(prob);
        }
        if prob >= bl.p_b {
            return self.gev.quantile_unchecked(prob);
        }
        let (mut lo, mut hi) = (self.a, self.b);
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < prob {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut y = 0.5 * (lo + hi);
        for _ in 0..50 {
            let resid = self.cdf(y) - prob;
            if resid.abs() <= 1e-10 {
                break;
            }
            let step = resid / self.pdf(y);
            let next = y - step;
            if resid < 0.0 {
                lo = lo.max(y);
            } else {
                hi = hi.min(y);
            }
            y = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if step.abs() < 1e-15 * y.abs().max(1.0) {
                break;
            }
        }
        y
    }

    pub fn quantile(&self, prob: f64) -> Result<f64> {
        check_prob(prob)?;
        Ok(self.quantile_unchecked(prob))
    }

    /// Inverse-CDF draws.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.quantile_unchecked(open_uniform(rng))).collect()
    }

    pub fn return_level(&self, period: f64) -> Result<f64> {
        if !(period > 1.0) || !period.is_finite() {
            return Err(Error::domain(format!("return period must exceed 1, got {period}")));
        }
        Ok(self.quantile_unchecked(1.0 - 1.0 / period))
    }
}

pub fn bgev_cdf(y: f64, p: &BGevParams) -> Result<f64> {
    ensure_finite("y", y)?;
    Ok(BGev::new(p)?.cdf(y))
}

pub fn bgev_logpdf(y: f64, p: &BGevParams) -> Result<f64> {
    ensure_finite("y", y)?;
    Ok(BGev::new(p)?.logpdf(y))
}

pub fn bgev_quantile(prob: f64, p: &BGevParams) -> Result<f64> {
    BGev::new(p)?.quantile(prob)
}

pub fn return_level(period: f64, p: &BGevParams) -> Result<f64> {
    BGev::new(p)?.return_level(period)
}
