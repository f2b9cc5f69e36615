//! Penalised-complexity priors for the tail parameter `xi`.
//!
//! The prior puts an exponential(`lambda`) distribution on the distance
//! `d(xi) = sqrt(2 KLD(xi))` from the Gumbel base model at `xi = 0`. The
//! GP family has a closed form; the GEV and bGEV families integrate the
//! KLD numerically.

mod kld;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::BlendSpec;
use crate::error::{Error, Result};

pub use kld::{
    kld_bgev, kld_bgev_blending_part, kld_bgev_derivative, kld_bgev_frechet_part, kld_bgev_gumbel_part, kld_bgev_parts,
    kld_gev, kld_gev_derivative, KldParts,
};

/// Point at which the origin density is evaluated, one grid step in.
pub const ORIGIN_STEP: f64 = 1e-4;
pub const GRID_LO: f64 = 1e-4;
pub const GRID_HI: f64 = 0.95;
pub const GRID_POINTS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorFamily {
    Gev,
    #[serde(rename = "bgev")]
    BGev,
    Gp,
}

impl PriorFamily {
    pub const ALL: [PriorFamily; 3] = [PriorFamily::Gev, PriorFamily::BGev, PriorFamily::Gp];
}

impl fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorFamily::Gev => "gev",
            PriorFamily::BGev => "bgev",
            PriorFamily::Gp => "gp",
        })
    }
}

impl FromStr for PriorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gev" => Ok(PriorFamily::Gev),
            "bgev" => Ok(PriorFamily::BGev),
            "gp" => Ok(PriorFamily::Gp),
            other => Err(Error::Invalid(format!(
                "unknown prior family '{other}' (expected gev, bgev or gp)"
            ))),
        }
    }
}

/// KLD of `family` at `xi` from the Gumbel base model.
pub fn kld(xi: f64, family: PriorFamily) -> Result<f64> {
    match family {
        PriorFamily::Gev => kld_gev(xi),
        PriorFamily::BGev => kld_bgev(xi, &BlendSpec::default()),
        PriorFamily::Gp => {
            check_domain(xi)?;
            Ok(xi * xi / (4.0 * (1.0 - xi)))
        }
    }
}

fn kld_derivative(xi: f64, family: PriorFamily) -> Result<f64> {
    match family {
        PriorFamily::Gev => kld_gev_derivative(xi),
        PriorFamily::BGev => kld_bgev_derivative(xi, &BlendSpec::default()),
        PriorFamily::Gp => Ok(xi * (2.0 - xi) / (4.0 * (1.0 - xi) * (1.0 - xi))),
    }
}

fn check_domain(xi: f64) -> Result<()> {
    if (0.0..1.0).contains(&xi) {
        Ok(())
    } else {
        Err(Error::domain(format!("tail parameter must lie in [0, 1), got {xi}")))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "lambda must be positive and finite, got {lambda}"
        )))
    }
}

/// GP closed form.
pub fn gp_prior_density(xi: f64, lambda: f64) -> Result<f64> {
    check_domain(xi)?;
    check_lambda(lambda)?;
    let r = lambda / std::f64::consts::SQRT_2;
    let s = 1.0 - xi;
    Ok(r * (-r * xi / s.sqrt()).exp() * (1.0 - xi / 2.0) / s.powf(1.5))
}

fn density_from_kld(xi: f64, lambda: f64, family: PriorFamily, k: f64) -> Result<f64> {
    let dk = kld_derivative(xi, family)?;
    let d = (2.0 * k).sqrt();
    if !(d > 0.0) {
        return Err(Error::Divergent(format!("non-positive KLD {k:e} at xi = {xi}")));
    }
    Ok(lambda / d * (-lambda * d).exp() * dk.abs())
}

/// PC prior density of `xi` for the given family.
///
/// At `xi = 0` the GEV and bGEV densities are the limit `lambda |d'(xi)|`
/// evaluated at [`ORIGIN_STEP`].
pub fn pc_prior_density(xi: f64, lambda: f64, family: PriorFamily) -> Result<f64> {
    check_domain(xi)?;
    check_lambda(lambda)?;
    match family {
        PriorFamily::Gp => gp_prior_density(xi, lambda),
        _ if xi == 0.0 => {
            let h = ORIGIN_STEP;
            let k = kld(h, family)?;
            let d = (2.0 * k).sqrt();
            Ok(lambda * kld_derivative(h, family)?.abs() / d)
        }
        _ => density_from_kld(xi, lambda, family, kld(xi, family)?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorPoint {
    pub xi: f64,
    pub kld: f64,
    pub density: f64,
}

/// Prior density and KLD tabulated on `xi = 0` plus a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcPriorCurve {
    pub family: PriorFamily,
    pub lambda: f64,
    pub grid: Vec<PriorPoint>,
}

impl PcPriorCurve {
    /// Default grid: 0 followed by 400 uniform points on `[1e-4, 0.95]`.
    pub fn compute(family: PriorFamily, lambda: f64) -> Result<Self> {
        let step = (GRID_HI - GRID_LO) / (GRID_POINTS - 1) as f64;
        let xs: Vec<f64> = std::iter::once(0.0)
            .chain((0..GRID_POINTS).map(|i| GRID_LO + step * i as f64))
            .collect();
        Self::on_grid(family, lambda, &xs)
    }

    pub fn on_grid(family: PriorFamily, lambda: f64, xs: &[f64]) -> Result<Self> {
        check_lambda(lambda)?;
        let grid = xs
            .par_iter()
            .map(|&xi| {
                let k = kld(xi, family)?;
                let density = if xi == 0.0 || family == PriorFamily::Gp {
                    pc_prior_density(xi, lambda, family)?
                } else {
                    density_from_kld(xi, lambda, family, k)?
                };
                Ok(PriorPoint { xi, kld: k, density })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { family, lambda, grid })
    }

    pub fn peak(&self) -> f64 {
        self.grid.iter().map(|p| p.density).fold(0.0, f64::max)
    }

    pub fn kld_is_increasing(&self) -> bool {
        self.grid.windows(2).all(|w| w[1].kld > w[0].kld)
    }
}
