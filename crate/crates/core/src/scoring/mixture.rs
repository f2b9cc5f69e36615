use serde::{Deserialize, Serialize};

use super::ForecastDistribution;
use crate::distributions::{BGev, BGevParams};
use crate::error::{Error, Result};

/// Equal-weight mixture of bGEV components.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<BGevParams>", into = "Vec<BGevParams>")]
pub struct ForecastMixture {
    components: Vec<BGevParams>,
    evaluators: Vec<BGev>,
}

impl TryFrom<Vec<BGevParams>> for ForecastMixture {
    type Error = Error;

    fn try_from(v: Vec<BGevParams>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ForecastMixture> for Vec<BGevParams> {
    fn from(m: ForecastMixture) -> Self {
        m.components
    }
}

impl ForecastMixture {
    pub fn new(components: Vec<BGevParams>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Invalid("a mixture needs at least one component".into()));
        }
        let evaluators = components.iter().map(BGev::new).collect::<Result<Vec<_>>>()?;
        Ok(Self { components, evaluators })
    }

    pub fn components(&self) -> &[BGevParams] {
        &self.components
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.evaluators.iter().map(|d| d.cdf(y)).sum::<f64>() / self.m() as f64
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.evaluators.iter().map(|d| d.pdf(y)).sum::<f64>() / self.m() as f64
    }

    pub fn quantile_unchecked(&self, p: f64) -> f64 {
        if let [single] = self.evaluators.as_slice() {
            return single.quantile_unchecked(p);
        }
        // Component quantiles bracket the mixture quantile.
        let (mut lo, mut hi) = self
            .evaluators
            .iter()
            .map(|d| d.quantile_unchecked(p))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| (a.min(q), b.max(q)));
        if hi - lo <= 0.0 {
            return lo;
        }
        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let resid = self.cdf(y) - p;
            if resid == 0.0 {
                return y;
            }
            if resid < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let newton = y - resid / self.pdf(y);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let step = (next - y).abs();
            y = next;
            if step <= 1e-12 * y.abs().max(1.0) {
                break;
            }
        }
        y
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability must lie in (0, 1), got {p}")));
        }
        Ok(self.quantile_unchecked(p))
    }
}

impl ForecastDistribution for ForecastMixture {
    fn cdf(&self, y: f64) -> f64 {
        ForecastMixture::cdf(self, y)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.quantile_unchecked(p)
    }
}

pub fn mixture_cdf(y: f64, mix: &ForecastMixture) -> f64 {
    mix.cdf(y)
}

pub fn mixture_quantile(p: f64, mix: &ForecastMixture) -> Result<f64> {
    mix.quantile(p)
}
