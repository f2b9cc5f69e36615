use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One block maximum with its predictor covariates. Column 0 of both
/// covariate vectors is the intercept and must equal 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMaximaRow {
    pub station_id: String,
    pub year: i32,
    pub y: f64,
    pub x_mu: Vec<f64>,
    pub x_sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMaximaTable {
    mu_names: Vec<String>,
    sigma_names: Vec<String>,
    rows: Vec<BlockMaximaRow>,
}

pub const INTERCEPT: &str = "intercept";

impl BlockMaximaTable {
    pub fn new(mu_names: Vec<String>, sigma_names: Vec<String>, rows: Vec<BlockMaximaRow>) -> Result<Self> {
        if mu_names.is_empty() || sigma_names.is_empty() {
            return Err(Error::Invalid(
                "both predictors need at least the intercept column".into(),
            ));
        }
        let mut seen = HashSet::new();
        for (i, r) in rows.iter().enumerate() {
            if r.x_mu.len() != mu_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: mu_names.len(),
                    got: r.x_mu.len(),
                });
            }
            if r.x_sigma.len() != sigma_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: sigma_names.len(),
                    got: r.x_sigma.len(),
                });
            }
            if !r.y.is_finite() || r.x_mu.iter().chain(&r.x_sigma).any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "row {i} ({}, {}) has non-finite values",
                    r.station_id, r.year
                )));
            }
            if r.x_mu[0] != 1.0 || r.x_sigma[0] != 1.0 {
                return Err(Error::Invalid(format!(
                    "row {i}: covariate column 0 must be the intercept (1.0)"
                )));
            }
            if !seen.insert((r.station_id.as_str(), r.year)) {
                return Err(Error::Invalid(format!(
                    "duplicate row for station {} year {}",
                    r.station_id, r.year
                )));
            }
        }
        Ok(Self {
            mu_names,
            sigma_names,
            rows,
        })
    }

    /// Intercept-only table holding a single pooled sample.
    pub fn pooled(station_id: &str, sample: &[f64]) -> Result<Self> {
        let rows = sample
            .iter()
            .enumerate()
            .map(|(i, &y)| BlockMaximaRow {
                station_id: station_id.to_string(),
                year: i as i32,
                y,
                x_mu: vec![1.0],
                x_sigma: vec![1.0],
            })
            .collect();
        Self::new(vec![INTERCEPT.into()], vec![INTERCEPT.into()], rows)
    }

    pub fn rows(&self) -> &[BlockMaximaRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn mu_names(&self) -> &[String] {
        &self.mu_names
    }

    pub fn sigma_names(&self) -> &[String] {
        &self.sigma_names
    }

    pub fn responses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }

    /// Distinct station identifiers in first-appearance order.
    pub fn stations(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.station_id.as_str()))
            .map(|r| r.station_id.clone())
            .collect()
    }

    /// Copy with the responses replaced.
    pub fn with_responses(&self, ys: &[f64]) -> Result<Self> {
        if ys.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                got: ys.len(),
            });
        }
        let mut out = self.clone();
        for (r, &y) in out.rows.iter_mut().zip(ys) {
            r.y = y;
        }
        Ok(out)
    }

    /// Copy with the spread predictor reduced to the intercept.
    pub fn with_intercept_only_spread(&self) -> Self {
        let mut out = self.clone();
        out.sigma_names.truncate(1);
        for r in &mut out.rows {
            r.x_sigma.truncate(1);
        }
        out
    }

    pub fn check_rank(&self) -> Result<()> {
        let n = self.rows.len();
        let mu = DMatrix::from_fn(n, self.mu_names.len(), |i, j| self.rows[i].x_mu[j]);
        check_full_rank("mu", &mu, &self.mu_names)?;
        let sg = DMatrix::from_fn(n, self.sigma_names.len(), |i, j| self.rows[i].x_sigma[j]);
        check_full_rank("sigma", &sg, &self.sigma_names)
    }
}

/// Greedy span test: each column is regressed on the columns accepted
/// before it. A (near) zero residual names the column together with the
/// earlier columns it is built from.
pub fn check_full_rank(predictor: &str, x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let mut accepted: Vec<usize> = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::Collinear {
                predictor: predictor.into(),
                columns: vec![names[j].clone()],
            });
        }
        if !accepted.is_empty() {
            let basis = x.select_columns(&accepted);
            let svd = basis.clone().svd(true, true);
            let coef: DVector<f64> = svd.solve(&col, 1e-12).map_err(|e| Error::Invalid(e.to_string()))?;
            let resid = &col - &basis * &coef;
            if resid.norm() <= 1e-9 * norm {
                let cmax = coef.amax();
                let mut columns: Vec<String> = accepted
                    .iter()
                    .zip(coef.iter())
                    .filter(|(_, c)| c.abs() > 1e-8 * cmax)
                    .map(|(&k, _)| names[k].clone())
                    .collect();
                columns.push(names[j].clone());
                return Err(Error::Collinear {
                    predictor: predictor.into(),
                    columns,
                });
            }
        }
        accepted.push(j);
    }
    if x.nrows() < x.ncols() {
        return Err(Error::InsufficientData(format!(
            "{predictor} predictor has {} columns but only {} rows",
            x.ncols(),
            x.nrows()
        )));
    }
    Ok(())
}
