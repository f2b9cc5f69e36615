//! Quasi-Newton (BFGS) minimisation with central-difference gradients.
//!
//! Objectives signal infeasible points by returning `+inf`; the line search
//! treats those as failed trial steps and backtracks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Gradient sup-norm below which a failed line search is attributed to
/// finite-difference noise at the optimum rather than to a real failure.
const NOISE_FLOOR_GRAD: f64 = 1e-6;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
/// Relative decrease below which an accepted step counts as a stall.
const STALL_REL_DECREASE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Sup-norm gradient tolerance.
    pub grad_tol: f64,
    /// Finite-difference step relative to `max(1, |x_i|)`.
    pub rel_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            rel_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradientTolerance,
    /// Progress stalled (failed line search or a negligible decrease)
    /// with the gradient at the finite-difference noise floor.
    NoiseFloor,
    /// The objective is not finite at the starting point.
    InfeasibleStart,
    LineSearchFailed,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::GradientTolerance | Termination::NoiseFloor)
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub grad_norm: f64,
}

fn step_size(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Central-difference gradient. Falls back to a one-sided difference when one
/// neighbour is infeasible; returns `None` when both are.
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], fx: f64, rel_step: f64) -> Option<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = step_size(x[i], rel_step);
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        let g = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) => (fp - fx) / h,
            (false, true) => (fx - fm) / h,
            (false, false) => return None,
        };
        grad.push(g);
    }
    Some(grad)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
}

pub fn minimize_bfgs<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &BfgsOptions) -> Minimum {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    if !fx.is_finite() {
        return Minimum {
            x: x0.to_vec(),
            value: fx,
            iterations: 0,
            termination: Termination::InfeasibleStart,
            grad_norm: f64::NAN,
        };
    }
    let Some(g0) = numeric_gradient(&f, x.as_slice(), fx, opts.rel_step) else {
        return Minimum {
            x: x0.to_vec(),
            value: fx,
            iterations: 0,
            termination: Termination::InfeasibleStart,
            grad_norm: f64::NAN,
        };
    };
    let mut g = DVector::from_vec(g0);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;

    for iter in 0..opts.max_iter {
        let gnorm = sup_norm(g.as_slice());
        if gnorm < opts.grad_tol {
            return finish(x, fx, iter, Termination::GradientTolerance, gnorm);
        }
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            dir = -g.clone();
            slope = g.dot(&dir);
        }

        let accepted = backtrack(&f, &x, fx, &dir, slope);
        let (x_new, f_new) = match accepted {
            Some(step) => step,
            None if !fresh => {
                // Retry from a steepest-descent model before giving up.
                h_inv = DMatrix::identity(n, n);
                fresh = true;
                continue;
            }
            None => {
                let term = if gnorm <= NOISE_FLOOR_GRAD {
                    Termination::NoiseFloor
                } else {
                    Termination::LineSearchFailed
                };
                return finish(x, fx, iter, term, gnorm);
            }
        };

        let Some(g_new) = numeric_gradient(&f, x_new.as_slice(), f_new, opts.rel_step) else {
            return finish(x_new, f_new, iter + 1, Termination::LineSearchFailed, f64::NAN);
        };
        let g_new = DVector::from_vec(g_new);
        let g_new_norm = sup_norm(g_new.as_slice());
        if g_new_norm >= opts.grad_tol
            && g_new_norm <= NOISE_FLOOR_GRAD
            && fx - f_new <= STALL_REL_DECREASE * fx.abs().max(1.0)
        {
            return finish(x_new, f_new, iter + 1, Termination::NoiseFloor, g_new_norm);
        }
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                let scale = sy / y.dot(&y);
                h_inv = DMatrix::identity(n, n) * scale;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            h_inv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    let gnorm = sup_norm(g.as_slice());
    let term = if gnorm < opts.grad_tol {
        Termination::GradientTolerance
    } else {
        Termination::MaxIterations
    };
    finish(x, fx, opts.max_iter, term, gnorm)
}

fn backtrack<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &DVector<f64>,
    fx: f64,
    dir: &DVector<f64>,
    slope: f64,
) -> Option<(DVector<f64>, f64)> {
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let trial = x + dir * alpha;
        let ft = f(trial.as_slice());
        if ft.is_finite() && ft <= fx + ARMIJO_C1 * alpha * slope {
            if ft < fx || (trial - x).norm() == 0.0 {
                return Some((x + dir * alpha, ft));
            }
            return None;
        }
        alpha *= 0.5;
    }
    None
}

fn finish(x: DVector<f64>, fx: f64, iterations: usize, termination: Termination, grad_norm: f64) -> Minimum {
    Minimum {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
        termination,
        grad_norm,
    }
}

/// Central-difference Hessian with steps `rel_step * max(1, |x_i|)`.
/// Returns `None` if any probe is not finite.
pub fn numeric_hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], rel_step: f64) -> Option<DMatrix<f64>> {
    let n = x.len();
    let f0 = f(x);
    if !f0.is_finite() {
        return None;
    }
    let h: Vec<f64> = x.iter().map(|&xi| step_size(xi, rel_step)).collect();
    let mut p = x.to_vec();
    let eval = |p: &[f64]| -> Option<f64> {
        let v = f(p);
        v.is_finite().then_some(v)
    };
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        p[i] = x[i] + h[i];
        let fp = eval(&p)?;
        p[i] = x[i] - h[i];
        let fm = eval(&p)?;
        p[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| -> Option<f64> {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = eval(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let fpp = corner(1.0, 1.0)?;
            let fpm = corner(1.0, -1.0)?;
            let fmp = corner(-1.0, 1.0)?;
            let fmm = corner(-1.0, -1.0)?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Some(hess)
}

/// Inverse of a symmetric positive-definite matrix, `None` otherwise.
pub fn invert_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let chol = sym.cholesky()?;
    let inv = chol.inverse();
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}
