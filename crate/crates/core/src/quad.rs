//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 4000 }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
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
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    // The raw Kronrod–Gauss difference; pessimistic, since K15 is far
    // more accurate than G7 on smooth pieces.
    let error = ((kronrod - gauss) * half).abs();
    if !value.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok(Segment { a, b, value, error })
}

/// Integrates a fallible integrand over the finite interval `[a, b]`.
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("interval [{a}, {b}] must be finite")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
    }
    if a > b {
        let r = try_integrate(f, b, a, opts)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }

    let first = kronrod(&mut f, a, b)?;
    let mut evaluations = 15;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut total_abs = first.value.abs();
    let mut heap = BinaryHeap::new();
    heap.push(first);

    // Roundoff floor: no subdivision gets below a few ulps of the integral of |f|.
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()).max(100.0 * f64::EPSILON * total_abs) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "tolerance not met on [{a}, {b}] after {} subdivisions (error estimate {total_err:.3e})",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature(format!("interval [{}, {}] cannot be bisected further", worst.a, worst.b)));
        }
        let left = kronrod(&mut f, worst.a, mid)?;
        let right = kronrod(&mut f, mid, worst.b)?;
        evaluations += 30;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        total_abs += left.value.abs() + right.value.abs() - worst.value.abs();
        heap.push(left);
        heap.push(right);
    }

    // Re-sum to shed the drift of the running updates.
    let value = heap.iter().map(|s| s.value).sum();
    let abs_error = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult { value, abs_error, evaluations })
}

/// Integrates an infallible integrand over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), a, b, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - (8.0 + 1.0 - 1.5 + 6.0)).abs() < 1e-13);
    }

    #[test]
    fn smooth_transcendental() {
        let r = integrate(f64::sin, 0.0, std::f64::consts::PI, QuadOptions::with_tol(1e-14, 1e-14)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        let r = integrate(|x| (-x).exp(), 0.0, 50.0, QuadOptions::with_tol(1e-14, 1e-14)).unwrap();
        assert!((r.value - (1.0 - (-50f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, QuadOptions::with_tol(1e-10, 1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn reversed_interval_flips_sign() {
        let r = integrate(|x| x, 1.0, 0.0, QuadOptions::default()).unwrap();
        assert!((r.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn propagates_integrand_failure() {
        let err = try_integrate(|_| Err(Error::Fit("boom".into())), 0.0, 1.0, QuadOptions::default()).unwrap_err();
        assert_eq!(err, Error::Fit("boom".into()));
    }

    #[test]
    fn reports_non_convergence() {
        let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 0.0, max_intervals: 4 };
        assert!(integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, opts).is_err());
    }
}
