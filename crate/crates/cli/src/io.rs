use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use bgev_core::inference::INTERCEPT;
use bgev_core::{BlockMaximaRow, BlockMaximaTable, ExceedanceSeries};
use serde::Serialize;

const MAXIMA_PREFIX: [&str; 3] = ["station_id", "year", "maximum"];

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn headers(rdr: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>> {
    Ok(rdr
        .headers()
        .with_context(|| format!("{}: cannot read header", path.display()))?
        .iter()
        .map(str::to_string)
        .collect())
}

fn check_prefix(path: &Path, header: &[String], expected: &[&str]) -> Result<()> {
    if header.len() < expected.len() || header.iter().zip(expected).any(|(h, e)| h != e) {
        bail!(
            "{}: header must start with {}, got {}",
            path.display(),
            expected.join(","),
            header.join(",")
        );
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, path: &Path, line: u64) -> Result<T> {
    let raw = rec
        .get(i)
        .ok_or_else(|| anyhow!("{} line {line}: missing column '{name}'", path.display()))?;
    raw.parse()
        .map_err(|_| anyhow!("{} line {line}: column '{name}': cannot parse '{raw}'", path.display()))
}

fn records(rdr: &mut csv::Reader<File>, path: &Path) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match (e.position(), e.kind()) {
            (Some(pos), csv::ErrorKind::UnequalLengths { expected_len, len, .. }) => anyhow!(
                "{} line {}: expected {expected_len} fields, found {len}",
                path.display(),
                pos.line()
            ),
            (Some(pos), _) => anyhow!("{} line {}: {e}", path.display(), pos.line()),
            (None, _) => anyhow!("{}: {e}", path.display()),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok(out)
}

fn finite(v: f64, name: &str, path: &Path, line: u64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        bail!("{} line {line}: column '{name}' is not finite", path.display())
    }
}

/// Block maxima with covariates standardised to zero mean and unit standard
/// deviation and an intercept in front of each predictor.
pub fn read_maxima(path: &Path, mu_covs: &[String], sigma_covs: &[String]) -> Result<BlockMaximaTable> {
    let mut rdr = reader(path)?;
    let header = headers(&mut rdr, path)?;
    check_prefix(path, &header, &MAXIMA_PREFIX)?;
    let col = |name: &String| {
        header
            .iter()
            .position(|h| h == name)
            .filter(|&i| i >= MAXIMA_PREFIX.len())
            .ok_or_else(|| {
                anyhow!(
                    "{}: covariate '{name}' not found; available: {}",
                    path.display(),
                    header[MAXIMA_PREFIX.len()..].join(",")
                )
            })
    };
    let mut used: Vec<String> = Vec::new();
    for c in mu_covs.iter().chain(sigma_covs) {
        if !used.contains(c) {
            used.push(c.clone());
        }
    }
    let cols: Vec<usize> = used.iter().map(col).collect::<Result<_>>()?;

    let mut raw = Vec::new();
    for (line, rec) in records(&mut rdr, path)? {
        let station: String = field(&rec, 0, "station_id", path, line)?;
        if station.is_empty() {
            bail!("{} line {line}: empty station_id", path.display());
        }
        let year: i32 = field(&rec, 1, "year", path, line)?;
        let y = finite(field(&rec, 2, "maximum", path, line)?, "maximum", path, line)?;
        let covs = cols
            .iter()
            .zip(&used)
            .map(|(&i, name)| finite(field(&rec, i, name, path, line)?, name, path, line))
            .collect::<Result<Vec<f64>>>()?;
        raw.push((line, station, year, y, covs));
    }
    if raw.is_empty() {
        bail!("{}: no data rows", path.display());
    }

    let n = raw.len() as f64;
    let mut moments = Vec::with_capacity(used.len());
    for (k, name) in used.iter().enumerate() {
        let mean = raw.iter().map(|r| r.4[k]).sum::<f64>() / n;
        let var = raw.iter().map(|r| (r.4[k] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        if !(var > 0.0) {
            bail!("{}: covariate '{name}' is constant", path.display());
        }
        moments.push((mean, var.sqrt()));
    }
    let idx: HashMap<&String, usize> = used.iter().enumerate().map(|(k, c)| (c, k)).collect();
    let build = |names: &[String], covs: &[f64]| -> Vec<f64> {
        std::iter::once(1.0)
            .chain(names.iter().map(|c| {
                let k = idx[c];
                (covs[k] - moments[k].0) / moments[k].1
            }))
            .collect()
    };
    let mut seen = HashMap::new();
    let mut rows = Vec::with_capacity(raw.len());
    for (line, station, year, y, covs) in raw {
        if let Some(prev) = seen.insert((station.clone(), year), line) {
            bail!(
                "{} line {line}: duplicate station {station} year {year} (first at line {prev})",
                path.display()
            );
        }
        rows.push(BlockMaximaRow {
            station_id: station,
            year,
            y,
            x_mu: build(mu_covs, &covs),
            x_sigma: build(sigma_covs, &covs),
        });
    }
    let names = |covs: &[String]| {
        std::iter::once(INTERCEPT.to_string())
            .chain(covs.iter().cloned())
            .collect()
    };
    BlockMaximaTable::new(names(mu_covs), names(sigma_covs), rows).with_context(|| format!("{}", path.display()))
}

/// Observation series per station in order of first appearance; rows may
/// come in any order but step indices must be unique per station.
pub fn read_exceedances(path: &Path, steps_per_year: u32) -> Result<Vec<ExceedanceSeries>> {
    if steps_per_year == 0 {
        bail!("steps per year must be positive");
    }
    let mut rdr = reader(path)?;
    let header = headers(&mut rdr, path)?;
    check_prefix(path, &header, &["station_id", "t", "value"])?;
    let mut order: Vec<String> = Vec::new();
    let mut by_station: HashMap<String, Vec<(i64, f64, u64)>> = HashMap::new();
    for (line, rec) in records(&mut rdr, path)? {
        let station: String = field(&rec, 0, "station_id", path, line)?;
        let t: i64 = field(&rec, 1, "t", path, line)?;
        let v = finite(field(&rec, 2, "value", path, line)?, "value", path, line)?;
        let entry = by_station.entry(station.clone()).or_insert_with(|| {
            order.push(station);
            Vec::new()
        });
        entry.push((t, v, line));
    }
    if order.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    order
        .into_iter()
        .map(|s| {
            let mut obs = by_station.remove(&s).unwrap_or_default();
            obs.sort_by_key(|o| o.0);
            if let Some(w) = obs.windows(2).find(|w| w[0].0 == w[1].0) {
                bail!(
                    "{} line {}: duplicate step {} for station {s} (also at line {})",
                    path.display(),
                    w[1].2,
                    w[1].0,
                    w[0].2
                );
            }
            let span = (obs[obs.len() - 1].0 - obs[0].0 + 1) as f64;
            let years = (span / steps_per_year as f64).round() as u32;
            let series = obs.into_iter().map(|(t, v, _)| (t, v)).collect();
            Ok(ExceedanceSeries::new(s, series, years)?)
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, header: Option<&[&str]>, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
