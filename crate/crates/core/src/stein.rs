//! Normal distribution helpers, the characteristic-function ODE bound, the
//! Kolmogorov bound in terms of `(A, B)` and the Berry–Esséen smoothing integral.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactDistribution;
use crate::numeric::ComplexSum;

/// `Φ(x)` via the complementary error function.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `(Φ(x), φ(x))`.
pub fn std_normal(x: f64) -> (f64, f64) {
    (std_normal_cdf(x), std_normal_pdf(x))
}

/// Characteristic function of the standard normal.
#[inline]
pub fn normal_cf(t: f64) -> f64 {
    (-0.5 * t * t).exp()
}

/// Largest `|t|` for which the ODE bound is established: `1 / (2A)`.
pub fn ode_range(a: f64) -> f64 {
    1.0 / (2.0 * a)
}

/// `(A/3)|t|³ e^{−t²/4} + 2B|t|`, valid for `|t| ≤ 1/(2A)`.
pub fn ode_bound(a: f64, b: f64, t: f64) -> Result<f64> {
    check_ab(a, b)?;
    let limit = ode_range(a);
    if t.abs() > limit {
        return Err(Error::OutOfRange { t, limit });
    }
    let at = t.abs();
    Ok(a / 3.0 * at.powi(3) * (-t * t / 4.0).exp() + 2.0 * b * at)
}

/// Coefficient of `A` in [`st_bound`]: `4/(3√π) + 24√2/(π√π)`.
pub fn st_constant() -> f64 {
    let sqrt_pi = PI.sqrt();
    4.0 / (3.0 * sqrt_pi) + 24.0 * SQRT_2 / (PI * sqrt_pi)
}

/// Kolmogorov-distance bound `c·A + (2/π)·B/A`.
pub fn st_bound(a: f64, b: f64) -> Result<f64> {
    check_ab(a, b)?;
    Ok(st_constant() * a + 2.0 / PI * b / a)
}

fn check_ab(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidArgument(format!("A must be positive, got {a}")));
    }
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::InvalidArgument(format!("B must be nonnegative, got {b}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CfSourceTag {
    ExactOracle,
    Empirical { m: usize },
    Zero,
}

/// A characteristic-function gap `t ↦ φ_X(t) − e^{−t²/2}`.
pub trait CfDifference: Sync {
    fn diff(&self, t: f64) -> Complex64;

    /// Standard error of `diff(t)`; zero for exact sources.
    fn std_error(&self, _t: f64) -> f64 {
        0.0
    }

    fn tag(&self) -> CfSourceTag;
}

/// The identically zero gap.
pub struct ZeroDiff;

impl CfDifference for ZeroDiff {
    fn diff(&self, _t: f64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    fn tag(&self) -> CfSourceTag {
        CfSourceTag::Zero
    }
}

impl CfDifference for ExactDistribution {
    fn diff(&self, t: f64) -> Complex64 {
        self.cf(t) - normal_cf(t)
    }

    fn tag(&self) -> CfSourceTag {
        CfSourceTag::ExactOracle
    }
}

/// Gap of the empirical characteristic function of a sample.
pub struct EmpiricalDiff<'a> {
    values: &'a [f64],
}

impl<'a> EmpiricalDiff<'a> {
    pub fn new(values: &'a [f64]) -> Self {
        Self { values }
    }

    pub fn cf(&self, t: f64) -> Complex64 {
        let mut s = ComplexSum::new();
        for &w in self.values {
            s.add(Complex64::from_polar(1.0, t * w));
        }
        s.value() / self.values.len() as f64
    }
}

impl CfDifference for EmpiricalDiff<'_> {
    fn diff(&self, t: f64) -> Complex64 {
        self.cf(t) - normal_cf(t)
    }

    fn std_error(&self, t: f64) -> f64 {
        let m = self.values.len() as f64;
        ((1.0 - self.cf(t).norm_sqr()).max(0.0) / m).sqrt()
    }

    fn tag(&self) -> CfSourceTag {
        CfSourceTag::Empirical {
            m: self.values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingBound {
    pub value: f64,
    /// `(1/π) ∫_{−T}^{T} |diff(t)/t| dt`
    pub integral: f64,
    /// `24 b / (π T)`
    pub boundary: f64,
    pub quadrature_error: f64,
    /// `(1/π) ∫ SE(t)/|t| dt`; zero for exact sources
    pub propagated_std_error: f64,
    pub t_max: f64,
    pub source: CfSourceTag,
}

/// Density bound of the standard normal, `(2π)^{−1/2}`.
pub fn normal_density_bound() -> f64 {
    1.0 / (2.0 * PI).sqrt()
}

/// `(1/π) ∫_{−T}^{T} |diff(t)/t| dt + 24 b / (π T)`.
pub fn smoothing_bound(diff: &dyn CfDifference, t_max: f64, b: f64) -> Result<SmoothingBound> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidArgument(format!("T must be positive, got {t_max}")));
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::InvalidArgument(format!("b must be positive, got {b}")));
    }
    let integrand = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            (diff.diff(t) / t).norm()
        }
    };
    let (neg, e1) = adaptive_gk(&integrand, -t_max, 0.0, 1e-8, 1e-14)?;
    let (pos, e2) = adaptive_gk(&integrand, 0.0, t_max, 1e-8, 1e-14)?;
    let propagated = match diff.tag() {
        CfSourceTag::Empirical { .. } => {
            let se = |t: f64| if t == 0.0 { 0.0 } else { diff.std_error(t) / t.abs() };
            let (a, _) = adaptive_gk(&se, -t_max, 0.0, 1e-6, 1e-14)?;
            let (c, _) = adaptive_gk(&se, 0.0, t_max, 1e-6, 1e-14)?;
            (a + c) / PI
        }
        _ => 0.0,
    };
    let integral = (neg + pos) / PI;
    let boundary = 24.0 * b / (PI * t_max);
    Ok(SmoothingBound {
        value: integral + boundary,
        integral,
        boundary,
        quadrature_error: (e1 + e2) / PI,
        propagated_std_error: propagated,
        t_max,
        source: diff.tag(),
    })
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = K15_WEIGHTS[7] * fc;
    let mut gauss = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kronrod += K15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G7_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7, 15) quadrature.
pub fn adaptive_gk(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<(f64, f64)> {
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = gk15(f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNonConvergence { error: err });
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn normal_basics() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_abs_diff_eq!(std_normal_pdf(0.0), 0.398_942_280_401_432_7, epsilon = 1e-15);
        for i in 0..200 {
            let x = -10.0 + 0.1 * i as f64;
            assert_abs_diff_eq!(std_normal_cdf(x) + std_normal_cdf(-x), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn cdf_matches_quadrature_of_density() {
        let (half, _) = adaptive_gk(&std_normal_pdf, 0.0, 1.959964, 1e-14, 1e-16).unwrap();
        assert_abs_diff_eq!(0.5 + half, std_normal_cdf(1.959964), epsilon = 1e-13);
        assert_abs_diff_eq!(std_normal_cdf(1.959964), 0.975, epsilon = 1e-6);
    }

    #[test]
    fn ode_bound_values() {
        assert_eq!(ode_bound(1.0, 0.0, 0.0).unwrap(), 0.0);
        let expect = (1.0 / 3.0) * 0.125 * (-1.0f64 / 16.0).exp();
        assert_abs_diff_eq!(ode_bound(1.0, 0.0, 0.5).unwrap(), expect, epsilon = 1e-16);
        assert!(matches!(ode_bound(1.0, 0.0, 0.6), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn st_constant_value() {
        // 30-digit reference value of 4/(3√π) + 24√2/(π√π)
        assert_abs_diff_eq!(st_bound(1.0, 0.0).unwrap(), 6.847_641_827_750_808, epsilon = 1e-10);
        assert!(st_bound(0.0, 1.0).is_err());
        assert!(st_bound(1.0, 2.0).unwrap() > st_bound(1.0, 1.0).unwrap());
    }

    #[test]
    fn zero_diff_boundary_term() {
        let b = normal_density_bound();
        let r = smoothing_bound(&ZeroDiff, 2.0, b).unwrap();
        assert_eq!(r.integral, 0.0);
        assert_abs_diff_eq!(r.value, 24.0 * b / (PI * 2.0), epsilon = 1e-15);
        let r1 = smoothing_bound(&ZeroDiff, 1.0, b).unwrap();
        assert_abs_diff_eq!(r1.boundary, 2.0 * r.boundary, epsilon = 1e-15);
    }

    #[test]
    fn gk_integrates_polynomials_and_oscillations() {
        let (v, _) = adaptive_gk(&|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-12, 1e-15).unwrap();
        assert_abs_diff_eq!(v, 64.0 / 6.0 - 1.0 / 6.0 - 9.0, epsilon = 1e-12);
        let (v, _) = adaptive_gk(&|x| (20.0 * x).sin().abs(), 0.0, PI, 1e-10, 1e-15).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn empirical_cf_of_zero_sample() {
        let zero = [0.0];
        let e = EmpiricalDiff::new(&zero);
        for t in [-3.0, 0.0, 1.5] {
            assert_eq!(e.cf(t), Complex64::new(1.0, 0.0));
        }
    }

    proptest! {
        #[test]
        fn cdf_is_monotone(mut xs in proptest::collection::vec(-40.0f64..40.0, 2..50)) {
            xs.sort_by(f64::total_cmp);
            for w in xs.windows(2) {
                prop_assert!(std_normal_cdf(w[0]) <= std_normal_cdf(w[1]));
            }
        }
    }
}
