//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for [`integrate`]. The iteration stops once the summed error
/// estimate is below `max(abs_tol, rel_tol * |integral|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn absolute(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol: 0.0,
            max_intervals: 4000,
        }
    }

    pub fn with_rel(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl Quadrature {
    /// The value, or a [`Error::Divergent`] when the tolerance was missed.
    pub fn require(self, what: &str) -> Result<f64> {
        if self.converged && self.value.is_finite() {
            Ok(self.value)
        } else {
            Err(Error::Divergent(format!(
                "{what}: value {} with error estimate {:.3e}",
                self.value, self.error
            )))
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Quadrature {
    if a == b {
        return Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    if b < a {
        let mut q = integrate(f, b, a, tol);
        q.value = -q.value;
        return q;
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut evaluations = 15;
    let mut total = value;
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut converged = false;
    loop {
        let target = tol.abs_tol.max(tol.rel_tol * total.abs());
        if total_err <= target && total.is_finite() {
            converged = true;
            break;
        }
        if heap.len() >= tol.max_intervals || !total.is_finite() {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        if heap.len() % 64 == 0 {
            // Re-sum to keep drift from the running updates out.
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    total = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Quadrature {
        value: total,
        error,
        evaluations,
        converged: converged || error <= tol.abs_tol.max(tol.rel_tol * total.abs()),
    }
}

/// Integrates `f` over `[a, inf)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> Quadrature {
    integrate(
        |t| {
            let one_m = 1.0 - t;
            let x = a + t / one_m;
            let v = f(x) / (one_m * one_m);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integrates `f` over `(-inf, b]`.
pub fn integrate_from_neg_infinity<F: FnMut(f64) -> f64>(mut f: F, b: f64, tol: Tolerance) -> Quadrature {
    integrate_to_infinity(|x| f(2.0 * b - x), b, tol)
}

/// Integrates over consecutive pieces `[points[i], points[i+1]]` and sums.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], tol: Tolerance) -> Quadrature {
    let mut acc = Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
        converged: true,
    };
    for w in points.windows(2) {
        let q = integrate(&mut f, w[0], w[1], tol);
        acc.value += q.value;
        acc.error += q.error;
        acc.evaluations += q.evaluations;
        acc.converged &= q.converged;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, Tolerance::absolute(1e-14));
        assert!(q.converged);
        assert_abs_diff_eq!(q.value, 10.0, epsilon = 1e-13);
    }

    #[test]
    fn log_singularity() {
        let q = integrate(|x: f64| -x.ln(), 0.0, 1.0, Tolerance::absolute(1e-12));
        assert!(q.converged);
        assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn semi_infinite() {
        let q = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, Tolerance::absolute(1e-12));
        assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-11);
        let q = integrate_from_neg_infinity(|x: f64| x.exp(), 0.0, Tolerance::absolute(1e-12));
        assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-11);
        // Gaussian over the real line.
        let g = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let total = integrate_from_neg_infinity(g, 0.0, Tolerance::absolute(1e-13)).value
            + integrate_to_infinity(g, 0.0, Tolerance::absolute(1e-13)).value;
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn divergent_integral_is_flagged() {
        let q = integrate_to_infinity(|x: f64| 1.0 / (1.0 + x), 0.0, Tolerance::absolute(1e-8));
        assert!(q.require("harmonic").is_err());
    }
}
