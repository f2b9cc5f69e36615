use super::{BlockMaximaTable, FitOptions, FitResult, FittedParams, RegressionParams, Standardisation};
use crate::distributions::{BGev, BGevParams, BlendSpec, GevParams, QuantileSpec};
use crate::error::{Error, Result};
use crate::optim::{invert_spd, minimize_bfgs, numeric_hessian, Minimum};
use crate::stats::{quantile_sorted, sorted_copy};

const THETA_XI_CLAMP: f64 = 20.0;
/// Beyond this the tail parameter sits on its boundary and is held fixed
/// when differentiating for the covariance.
const THETA_XI_BOUNDARY: f64 = 15.0;
const HESSIAN_REL_STEP: f64 = 1e-4;

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn xi_from_theta(t: f64, xi_max: f64) -> f64 {
    xi_max * logistic(t.clamp(-THETA_XI_CLAMP, THETA_XI_CLAMP))
}

fn theta_from_xi(xi: f64, xi_max: f64) -> f64 {
    let s = xi / xi_max;
    if s <= 0.0 {
        return -THETA_XI_CLAMP;
    }
    (s / (1.0 - s)).ln().clamp(-THETA_XI_CLAMP, THETA_XI_CLAMP)
}

fn dxi_dtheta(t: f64, xi_max: f64) -> f64 {
    let s = logistic(t.clamp(-THETA_XI_CLAMP, THETA_XI_CLAMP));
    xi_max * s * (1.0 - s)
}

fn check_sample(sample: &[f64], min_len: usize) -> Result<()> {
    if sample.len() < min_len {
        return Err(Error::InsufficientData(format!(
            "need at least {min_len} observations, got {}",
            sample.len()
        )));
    }
    if let Some(v) = sample.iter().find(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("non-finite observation {v}")));
    }
    if sample.iter().all(|&v| v == sample[0]) {
        return Err(Error::Degenerate("all observations are identical".into()));
    }
    Ok(())
}

/// Shift by the empirical 5% quantile and divide by the 5%-95% range
/// (type-7 quantiles).
pub fn standardise_response(sample: &[f64]) -> Result<(Standardisation, Vec<f64>)> {
    check_sample(sample, 2)?;
    let sorted = sorted_copy(sample);
    let q05 = quantile_sorted(&sorted, 0.05);
    let q95 = quantile_sorted(&sorted, 0.95);
    let scale = q95 - q05;
    if !(scale > 0.0) {
        return Err(Error::Degenerate("the 5% and 95% quantiles coincide".into()));
    }
    let st = Standardisation { shift: q05, scale };
    Ok((st, sample.iter().map(|&y| st.apply(y)).collect()))
}

/// Empirical-quantile starting values with `xi = 0.1`.
pub fn default_init(sample: &[f64], qspec: QuantileSpec) -> Result<BGevParams> {
    check_sample(sample, 5)?;
    qspec.validate()?;
    let sorted = sorted_copy(sample);
    let mu_alpha = quantile_sorted(&sorted, qspec.alpha);
    let sigma_beta = quantile_sorted(&sorted, 1.0 - qspec.beta / 2.0) - quantile_sorted(&sorted, qspec.beta / 2.0);
    if !(sigma_beta > 0.0) {
        return Err(Error::Degenerate("empirical quantile spread is zero".into()));
    }
    BGevParams::with_specs(mu_alpha, sigma_beta, 0.1, BlendSpec::default(), qspec)
}

fn prepare(sample: &[f64], opts: &FitOptions) -> Result<(Standardisation, Vec<f64>)> {
    if opts.standardise {
        standardise_response(sample)
    } else {
        Ok((Standardisation::IDENTITY, sample.to_vec()))
    }
}

fn minimise<F: Fn(&[f64]) -> f64>(nll: &F, n: usize, theta0: &[f64], opts: &FitOptions) -> Minimum {
    let scale = 1.0 / n as f64;
    minimize_bfgs(|t: &[f64]| nll(t) * scale, theta0, &opts.bfgs)
}

/// Inverse Hessian of `nll` over the free coordinates, mapped through the
/// diagonal Jacobian `jac`. Fixed coordinates get zero variance.
fn covariance<F: Fn(&[f64]) -> f64>(nll: &F, theta: &[f64], free: &[bool], jac: &[f64]) -> Option<Vec<Vec<f64>>> {
    let idx: Vec<usize> = (0..theta.len()).filter(|&i| free[i]).collect();
    let sub = |s: &[f64]| {
        let mut full = theta.to_vec();
        for (k, &i) in idx.iter().enumerate() {
            full[i] = s[k];
        }
        nll(&full)
    };
    let start: Vec<f64> = idx.iter().map(|&i| theta[i]).collect();
    let h = numeric_hessian(&sub, &start, HESSIAN_REL_STEP)?;
    let inv = invert_spd(&h)?;
    let p = theta.len();
    let mut cov = vec![vec![0.0; p]; p];
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            cov[i][j] = jac[i] * inv[(a, b)] * jac[j];
        }
    }
    Some(cov)
}

fn gev_nll(data: &[f64], t: &[f64]) -> f64 {
    if !(t[1] > 0.0) || t.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let g = GevParams {
        mu: t[0],
        sigma: t[1],
        xi: t[2],
    };
    let s: f64 = data.iter().map(|&y| g.logpdf(y)).sum();
    if s.is_finite() {
        -s
    } else {
        f64::INFINITY
    }
}

/// GEV maximum likelihood on `(mu, sigma, xi)`. Observations outside the
/// support make the likelihood zero; an infeasible start is reported as
/// non-converged with the initial values.
pub fn fit_gev_mle(sample: &[f64], init: &GevParams, opts: &FitOptions) -> Result<FitResult> {
    check_sample(sample, 3)?;
    init.validate()?;
    let (st, data) = prepare(sample, opts)?;
    let n = data.len();
    let theta0 = [st.apply(init.mu), init.sigma / st.scale, init.xi];
    let nll = |t: &[f64]| gev_nll(&data, t);
    let m = minimise(&nll, n, &theta0, opts);
    let converged = m.termination.converged();
    let t = &m.x;
    let params = GevParams {
        mu: st.invert(t[0]),
        sigma: st.scale * t[1],
        xi: t[2],
    };
    let cov = if converged && opts.compute_covariance {
        covariance(&nll, t, &[true; 3], &[st.scale, st.scale, 1.0])
    } else {
        None
    };
    Ok(FitResult {
        params: FittedParams::Gev(params),
        loglik: -nll(t) - n as f64 * st.scale.ln(),
        converged,
        termination: m.termination,
        iterations: m.iterations,
        n_obs: n,
        cov_asymptotic: cov,
        standardisation: st,
    })
}

fn bgev_params(
    mu_alpha: f64,
    log_sigma: f64,
    theta_xi: f64,
    xi_max: f64,
    blend: BlendSpec,
    qspec: QuantileSpec,
) -> BGevParams {
    BGevParams {
        mu_alpha,
        sigma_beta: log_sigma.exp(),
        xi: xi_from_theta(theta_xi, xi_max),
        blend,
        qspec,
    }
}

fn bgev_loglik(p: &BGevParams, ys: impl Iterator<Item = f64>) -> f64 {
    match BGev::new_unbounded(p) {
        Ok(d) => ys.map(|y| d.logpdf(y)).sum(),
        Err(_) => f64::NEG_INFINITY,
    }
}

fn finite_or_inf(nll: f64) -> f64 {
    if nll.is_finite() {
        nll
    } else {
        f64::INFINITY
    }
}

/// bGEV maximum likelihood over `(mu_alpha, log sigma_beta, logit(xi / xi_max))`.
pub fn fit_bgev_mle(sample: &[f64], init: &BGevParams, opts: &FitOptions) -> Result<FitResult> {
    check_sample(sample, 3)?;
    init.validate_with_xi_max(opts.xi_max)?;
    let (st, data) = prepare(sample, opts)?;
    let n = data.len();
    let (blend, qspec, xi_max) = (init.blend, init.qspec, opts.xi_max);
    let theta0 = [
        st.apply(init.mu_alpha),
        (init.sigma_beta / st.scale).ln(),
        theta_from_xi(init.xi, xi_max),
    ];
    let nll = |t: &[f64]| {
        if t.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let p = bgev_params(t[0], t[1], t[2], xi_max, blend, qspec);
        finite_or_inf(-bgev_loglik(&p, data.iter().copied()))
    };
    let m = minimise(&nll, n, &theta0, opts);
    let converged = m.termination.converged();
    let t = &m.x;
    let fitted = bgev_params(st.invert(t[0]), t[1] + st.scale.ln(), t[2], xi_max, blend, qspec);
    let cov = if converged && opts.compute_covariance {
        let free = [true, true, t[2].abs() < THETA_XI_BOUNDARY];
        covariance(&nll, t, &free, &[st.scale, fitted.sigma_beta, dxi_dtheta(t[2], xi_max)])
    } else {
        None
    };
    Ok(FitResult {
        params: FittedParams::BGev(fitted),
        loglik: -nll(t) - n as f64 * st.scale.ln(),
        converged,
        termination: m.termination,
        iterations: m.iterations,
        n_obs: n,
        cov_asymptotic: cov,
        standardisation: st,
    })
}

/// Log-likelihood of a regression parameter set on a table.
pub fn regression_loglik(
    table: &BlockMaximaTable,
    params: &RegressionParams,
    blend: BlendSpec,
    qspec: QuantileSpec,
) -> f64 {
    table
        .rows()
        .iter()
        .map(|r| {
            let p = BGevParams {
                mu_alpha: params.mu_alpha(&r.x_mu),
                sigma_beta: params.sigma_beta(&r.x_sigma),
                xi: params.xi,
                blend,
                qspec,
            };
            bgev_loglik(&p, std::iter::once(r.y))
        })
        .sum()
}

/// bGEV regression with `mu_alpha = x_mu' beta_mu`,
/// `log sigma_beta = x_sigma' beta_sigma` and a shared tail parameter.
pub fn fit_bgev_regression(table: &BlockMaximaTable, init: &RegressionParams, opts: &FitOptions) -> Result<FitResult> {
    let (pm, ps) = (table.mu_names().len(), table.sigma_names().len());
    init.check_dims(table)?;
    if table.len() < pm.max(ps) + 2 {
        return Err(Error::InsufficientData(format!(
            "{} rows for {} location and {} spread coefficients",
            table.len(),
            pm,
            ps
        )));
    }
    table.check_rank()?;
    let (st, data) = prepare(&table.responses(), opts)?;
    check_sample(&data, 3)?;
    if !(init.xi >= 0.0 && init.xi < opts.xi_max) {
        return Err(Error::domain(format!(
            "initial xi must lie in [0, {}), got {}",
            opts.xi_max, init.xi
        )));
    }
    let n = data.len();
    let (blend, qspec, xi_max) = (opts.blend, opts.qspec, opts.xi_max);
    qspec.validate_against(&blend)?;

    let mut theta0: Vec<f64> = init.beta_mu.iter().map(|b| b / st.scale).collect();
    theta0[0] = (init.beta_mu[0] - st.shift) / st.scale;
    theta0.extend(&init.beta_sigma);
    theta0[pm] -= st.scale.ln();
    theta0.push(theta_from_xi(init.xi, xi_max));

    let rows = table.rows();
    let nll = |t: &[f64]| {
        if t.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let (bm, rest) = t.split_at(pm);
        let (bs, tx) = rest.split_at(ps);
        let mut total = 0.0;
        let mut current: Option<(usize, BGev)> = None;
        for (i, (r, &y)) in rows.iter().zip(&data).enumerate() {
            let reuse = matches!(current, Some((j, _)) if rows[j].x_mu == r.x_mu && rows[j].x_sigma == r.x_sigma);
            if !reuse {
                let ls = super::dot(bs, &r.x_sigma);
                if ls > 700.0 {
                    return f64::INFINITY;
                }
                let p = bgev_params(super::dot(bm, &r.x_mu), ls, tx[0], xi_max, blend, qspec);
                match BGev::new_unbounded(&p) {
                    Ok(d) => current = Some((i, d)),
                    Err(_) => return f64::INFINITY,
                }
            }
            if let Some((_, d)) = &current {
                total += d.logpdf(y);
            }
        }
        finite_or_inf(-total)
    };
    let m = minimise(&nll, n, &theta0, opts);
    let converged = m.termination.converged();
    let t = &m.x;
    let mut beta_mu: Vec<f64> = t[..pm].iter().map(|b| b * st.scale).collect();
    beta_mu[0] += st.shift;
    let mut beta_sigma = t[pm..pm + ps].to_vec();
    beta_sigma[0] += st.scale.ln();
    let tx = t[pm + ps];
    let fitted = RegressionParams {
        beta_mu,
        beta_sigma,
        xi: xi_from_theta(tx, xi_max),
    };
    let cov = if converged && opts.compute_covariance {
        let mut free = vec![true; pm + ps + 1];
        free[pm + ps] = tx.abs() < THETA_XI_BOUNDARY;
        let mut jac = vec![st.scale; pm];
        jac.extend(std::iter::repeat(1.0).take(ps));
        jac.push(dxi_dtheta(tx, xi_max));
        covariance(&nll, t, &free, &jac)
    } else {
        None
    };
    Ok(FitResult {
        params: FittedParams::Regression(fitted),
        loglik: -nll(t) - n as f64 * st.scale.ln(),
        converged,
        termination: m.termination,
        iterations: m.iterations,
        n_obs: n,
        cov_asymptotic: cov,
        standardisation: st,
    })
}
