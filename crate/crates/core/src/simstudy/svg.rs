use std::fmt::Write;

use super::{cell_estimates, InitKind, SimDist, SimRow, ARMS};
use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, sample_sd, sorted_copy};

const W: f64 = 480.0;
const H: f64 = 320.0;
const MARGIN: f64 = 40.0;
const POINTS: usize = 200;

fn colour(dist: SimDist, init: InitKind) -> (&'static str, &'static str) {
    let c = match dist {
        SimDist::Gev => "#1f77b4",
        SimDist::BGev => "#d62728",
    };
    let dash = match init {
        InitKind::Good => "none",
        InitKind::Bad => "6,4",
    };
    (c, dash)
}

/// Gaussian kernel density estimate with Silverman's bandwidth.
fn kde(values: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let sorted = sorted_copy(values);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let sd = sample_sd(values);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = (0.9 * spread * n.powf(-0.2)).max(1e-9);
    let norm = 1.0 / (n * bw * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&x| {
            values
                .iter()
                .map(|&v| (-0.5 * ((x - v) / bw).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Density panel of the converged estimates of all four arms for one
/// `(n, period)` cell, with an optional vertical line at `truth`.
pub fn density_panel_svg(rows: &[SimRow], n: usize, period: f64, truth: Option<f64>) -> Result<String> {
    let arms: Vec<_> = ARMS
        .iter()
        .map(|&(d, i)| {
            (
                d,
                i,
                cell_estimates(rows, d, i, n, period)
                    .into_iter()
                    .flatten()
                    .collect::<Vec<f64>>(),
            )
        })
        .filter(|a| a.2.len() >= 2)
        .collect();
    if arms.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no estimates to plot at n = {n}, T = {period}"
        )));
    }
    let all: Vec<f64> = arms.iter().flat_map(|a| a.2.iter().copied()).chain(truth).collect();
    let sorted = sorted_copy(&all);
    let (lo, hi) = (quantile_sorted(&sorted, 0.005), quantile_sorted(&sorted, 0.995));
    let pad = 0.05 * (hi - lo).max(1e-6);
    let (x0, x1) = (lo - pad, hi + pad);
    let grid: Vec<f64> = (0..POINTS)
        .map(|k| x0 + (x1 - x0) * k as f64 / (POINTS - 1) as f64)
        .collect();
    let curves: Vec<Vec<f64>> = arms.iter().map(|a| kde(&a.2, &grid)).collect();
    let ymax = curves.iter().flatten().fold(0.0f64, |m, &v| m.max(v)).max(1e-12);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - y / ymax * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="13">n = {n}, T = {period}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    for k in 0..=4 {
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{x:.1}</text>"#,
            sx(x),
            H - MARGIN + 14.0
        );
    }
    if let Some(t) = truth {
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{b}" stroke="grey" stroke-dasharray="2,2"/>"#,
            x = sx(t),
            top = MARGIN,
            b = H - MARGIN
        );
    }
    for (k, ((d, i, _), c)) in arms.iter().zip(&curves).enumerate() {
        let (col, dash) = colour(*d, *i);
        let pts: Vec<String> = grid
            .iter()
            .zip(c)
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{col}" stroke-dasharray="{dash}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{a}" y1="{ly}" x2="{b}" y2="{ly}" stroke="{col}" stroke-dasharray="{dash}" stroke-width="1.5"/><text x="{t}" y="{ty}" font-family="sans-serif" font-size="10">{d} ({i} init)</text>"#,
            a = W - MARGIN - 110.0,
            b = W - MARGIN - 85.0,
            t = W - MARGIN - 80.0,
            ty = ly + 3.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
