//! Numerical inverse Laplace transforms.
//!
//! Both methods are expressed as a quadrature rule in the `s` plane,
//! `f(t) ~ Re sum_k w_k F(s_k)`, so a transform evaluated once at the nodes
//! can be reused for a whole family of originals (see [`h_n_cdf_family`]).
//! The error estimate is the heuristic `|value(order) - value(order - 2)|`;
//! for Stehfest, whose successive orders do not converge monotonically, the
//! larger of the last two such differences.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{f_hat_complex, h_hat_complex, SeriesControl};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InversionKind {
    /// Gaver–Stehfest: real nodes only.
    Stehfest,
    /// Fixed Talbot contour.
    Talbot,
}

impl fmt::Display for InversionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InversionKind::Stehfest => "stehfest",
            InversionKind::Talbot => "talbot",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionMethod {
    pub kind: InversionKind,
    pub order: usize,
    /// Significant digits the successive-order agreement must reach.
    pub work_precision: f64,
}

impl InversionMethod {
    pub const DEFAULT_TALBOT_ORDER: usize = 32;
    pub const DEFAULT_STEHFEST_ORDER: usize = 14;

    pub fn talbot(order: usize) -> Result<Self> {
        if order < 16 {
            return Err(Error::invalid(format!("Talbot order must be >= 16, got {order}")));
        }
        Ok(Self { kind: InversionKind::Talbot, order, work_precision: 8.0 })
    }

    pub fn stehfest(order: usize) -> Result<Self> {
        if order % 2 != 0 || !(8..=20).contains(&order) {
            return Err(Error::invalid(format!("Stehfest order must be even and in 8..=20, got {order}")));
        }
        Ok(Self { kind: InversionKind::Stehfest, order, work_precision: 3.0 })
    }

    pub fn new(kind: InversionKind, order: usize) -> Result<Self> {
        match kind {
            InversionKind::Talbot => Self::talbot(order),
            InversionKind::Stehfest => Self::stehfest(order),
        }
    }

    pub fn with_work_precision(mut self, digits: f64) -> Result<Self> {
        if !(digits > 0.0 && digits <= 16.0) {
            return Err(Error::invalid(format!("work precision must be in (0, 16], got {digits}")));
        }
        self.work_precision = digits;
        Ok(self)
    }

    fn tolerance(&self, value: f64) -> f64 {
        10f64.powf(-self.work_precision) * (1.0 + value.abs())
    }
}

impl Default for InversionMethod {
    fn default() -> Self {
        Self::talbot(Self::DEFAULT_TALBOT_ORDER).expect("default order is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub t: f64,
    pub value: f64,
    pub est_error: f64,
    pub method: InversionMethod,
}

struct Rule {
    nodes: Vec<Complex64>,
    weights: Vec<Complex64>,
}

impl Rule {
    fn new(kind: InversionKind, order: usize, t: f64) -> Rule {
        match kind {
            InversionKind::Talbot => talbot_rule(order, t),
            InversionKind::Stehfest => stehfest_rule(order, t),
        }
    }

    fn apply(&self, values: impl Iterator<Item = Complex64>) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| (w * v).re).sum()
    }
}

/// The rule itself plus the lower-order rules used for the error estimate.
fn rules(method: InversionMethod, t: f64) -> Vec<Rule> {
    let depth = match method.kind {
        InversionKind::Talbot => 1,
        InversionKind::Stehfest => 2,
    };
    (0..=depth).map(|d| Rule::new(method.kind, method.order - 2 * d, t)).collect()
}

fn talbot_rule(m: usize, t: f64) -> Rule {
    let mf = m as f64;
    let r = 2.0 * mf / (5.0 * t);
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    nodes.push(Complex64::new(r, 0.0));
    weights.push(Complex64::new(0.5 * (r * t).exp() * r / mf, 0.0));
    for k in 1..m {
        let theta = k as f64 * PI / mf;
        let cot = 1.0 / theta.tan();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        nodes.push(s);
        weights.push((t * s).exp() * Complex64::new(1.0, sigma) * (r / mf));
    }
    Rule { nodes, weights }
}

fn stehfest_coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    let fact = |k: usize| -> f64 { (1..=k).map(|i| i as f64).product() };
    (1..=n)
        .map(|k| {
            let mut sum = 0.0;
            for j in k.div_ceil(2)..=k.min(half) {
                sum += (j as f64).powi(half as i32) * fact(2 * j)
                    / (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
            }
            if (k + half) % 2 == 0 {
                sum
            } else {
                -sum
            }
        })
        .collect()
}

fn stehfest_rule(n: usize, t: f64) -> Rule {
    let a = LN_2 / t;
    let coeffs = stehfest_coefficients(n);
    Rule {
        nodes: (1..=n).map(|k| Complex64::new(k as f64 * a, 0.0)).collect(),
        weights: coeffs.iter().map(|&v| Complex64::new(v * a, 0.0)).collect(),
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("inversion needs finite t > 0, got {t}")))
    }
}

fn eval_at<F>(rule: &Rule, f: &mut F, t: f64) -> Result<Vec<Complex64>>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    rule.nodes
        .iter()
        .map(|&s| {
            let v = f(s)?;
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(Error::Inversion { t, reason: format!("transform is not finite at node s = {s}") })
            }
        })
        .collect()
}

fn finish(t: f64, values: &[f64], method: InversionMethod) -> Result<InversionReport> {
    let value = values[0];
    let est_error = values.windows(2).map(|w| (w[0] - w[1]).abs()).fold(0.0, f64::max);
    if !value.is_finite() || !est_error.is_finite() {
        return Err(Error::Inversion { t, reason: "non-finite result".into() });
    }
    if est_error > method.tolerance(value) {
        return Err(Error::Inversion {
            t,
            reason: format!(
                "{} order {}: successive orders differ by {est_error:.3e} (value {value:.6e})",
                method.kind, method.order
            ),
        });
    }
    Ok(InversionReport { t, value, est_error, method })
}

/// Inverts a transform given on the complex plane. With the Stehfest method
/// only real nodes are used and the real part of the transform is taken.
pub fn invert<F>(mut transform: F, t: f64, method: InversionMethod) -> Result<InversionReport>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    check_t(t)?;
    let values = rules(method, t)
        .iter()
        .map(|rule| Ok(rule.apply(eval_at(rule, &mut transform, t)?.into_iter())))
        .collect::<Result<Vec<_>>>()?;
    finish(t, &values, method)
}

/// Inverts a transform known only on the positive real axis.
pub fn invert_real<F>(mut transform: F, t: f64, method: InversionMethod) -> Result<InversionReport>
where
    F: FnMut(f64) -> Result<f64>,
{
    if method.kind != InversionKind::Stehfest {
        return Err(Error::invalid("a real-axis transform needs the Stehfest method"));
    }
    invert(|s| Ok(Complex64::new(transform(s.re)?, 0.0)), t, method)
}

/// Inverts the power family `h^(s)^n / s` for all `n` in `0..=n_max` at
/// once, giving the CDFs `H_n(t)` of the total length of `n` excursions.
pub fn h_n_cdf_family(
    t: f64,
    n_max: usize,
    params: &ModelParams,
    method: InversionMethod,
    ctrl: &SeriesControl,
) -> Result<Vec<InversionReport>> {
    check_t(t)?;
    let mut eval = |s: Complex64| h_hat_complex(s, params, ctrl);
    let rules = rules(method, t);
    let h = rules.iter().map(|rule| eval_at(rule, &mut eval, t)).collect::<Result<Vec<_>>>()?;
    // running h^n / s at every node of every rule
    let mut pows: Vec<Vec<Complex64>> = rules.iter().map(|rule| rule.nodes.iter().map(|s| 1.0 / s).collect()).collect();
    let mut out = Vec::with_capacity(n_max + 1);
    let mut values = vec![0.0; rules.len()];
    for n in 0..=n_max {
        for (i, rule) in rules.iter().enumerate() {
            if n > 0 {
                pows[i].iter_mut().zip(&h[i]).for_each(|(p, h)| *p *= h);
            }
            values[i] = rule.apply(pows[i].iter().copied());
        }
        out.push(finish(t, &values, method)?);
    }
    Ok(out)
}

/// Density of the first return time to `Z_p`.
///
/// Small negative values within twice the error estimate are clipped to 0.
pub fn first_return_density(
    t: f64,
    params: &ModelParams,
    method: InversionMethod,
    ctrl: &SeriesControl,
) -> Result<InversionReport> {
    let report = invert(|s| f_hat_complex(s, params, ctrl), t, method)?;
    clip_density(report)
}

/// `P(tau <= t)` for the first return time.
pub fn first_return_cdf(
    t: f64,
    params: &ModelParams,
    method: InversionMethod,
    ctrl: &SeriesControl,
) -> Result<InversionReport> {
    invert(|s| Ok(f_hat_complex(s, params, ctrl)? / s), t, method)
}

fn clip_density(mut report: InversionReport) -> Result<InversionReport> {
    if report.value < 0.0 {
        let eps = 2.0 * report.est_error + 1e-13;
        if -report.value > eps {
            return Err(Error::Inversion {
                t: report.t,
                reason: format!("density {:.3e} is negative beyond its error slack {eps:.3e}", report.value),
            });
        }
        log::debug!("clipping density {:.3e} to 0 at t = {}", report.value, report.t);
        report.value = 0.0;
    }
    Ok(report)
}

/// Density and CDF of the total length of `n` excursions outside `Z_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnTime {
    pub density: InversionReport,
    pub cdf: InversionReport,
}

pub fn h_n_time(
    t: f64,
    n: u32,
    params: &ModelParams,
    method: InversionMethod,
    ctrl: &SeriesControl,
) -> Result<HnTime> {
    if n == 0 {
        return Err(Error::invalid("h_n_time needs n >= 1"));
    }
    let density = invert(|s| Ok(h_hat_complex(s, params, ctrl)?.powu(n)), t, method)?;
    let cdf = invert(|s| Ok(h_hat_complex(s, params, ctrl)?.powu(n) / s), t, method)?;
    Ok(HnTime { density: clip_density(density)?, cdf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{j_hat_complex, survival_j};

    fn methods() -> [InversionMethod; 2] {
        [InversionMethod::default(), InversionMethod::stehfest(14).unwrap()]
    }

    #[test]
    fn method_validation() {
        assert!(InversionMethod::talbot(8).is_err());
        assert!(InversionMethod::stehfest(13).is_err());
        assert!(InversionMethod::stehfest(22).is_err());
        assert!(InversionMethod::stehfest(8).is_ok());
        assert!(InversionMethod::default().with_work_precision(0.0).is_err());
    }

    #[test]
    fn stehfest_weights_sum_to_zero() {
        for n in (8..=20).step_by(2) {
            let sum: f64 = stehfest_coefficients(n).iter().sum();
            assert!(sum.abs() < 1e-6 * stehfest_coefficients(n)[n / 2].abs(), "n {n}: {sum}");
        }
        assert_eq!(stehfest_coefficients(8)[0], -1.0 / 3.0);
    }

    #[test]
    fn inverts_constant_and_exponential() {
        let b = 4.0 / 7.0;
        for m in methods() {
            for &t in &[0.3, 1.0, 17.0] {
                let r = invert(|s| Ok(1.0 / s), t, m).unwrap();
                assert!((r.value - 1.0).abs() < 1e-6, "{m:?}");
            }
            let r = invert(|s| Ok(b / (s + b)), 1.0 / b, m).unwrap();
            assert!((r.value - b * (-1f64).exp()).abs() < 1e-5, "{m:?}: {}", r.value);
        }
        let r = invert_real(|s| Ok(b / (s + b)), 1.75, InversionMethod::stehfest(14).unwrap()).unwrap();
        assert!((r.value - 0.210_215_9).abs() < 1e-5);
        assert!(invert_real(|s| Ok(1.0 / s), 1.0, InversionMethod::default()).is_err());
    }

    #[test]
    fn rejects_bad_time_and_propagates_failures() {
        assert!(invert(|s| Ok(1.0 / s), 0.0, InversionMethod::default()).is_err());
        let err = invert(|_| Err(Error::Fit("x".into())), 1.0, InversionMethod::default()).unwrap_err();
        assert_eq!(err, Error::Fit("x".into()));
        let err = invert(|_| Ok(Complex64::new(f64::NAN, 0.0)), 1.0, InversionMethod::default()).unwrap_err();
        assert!(matches!(err, Error::Inversion { .. }));
    }

    #[test]
    fn survival_calibration() {
        let ctrl = SeriesControl::default();
        let params = ModelParams::new(2, 2.0).unwrap();
        let r = invert(|s| j_hat_complex(s, &params, &ctrl), 1.0, InversionMethod::default()).unwrap();
        assert!((r.value - 0.619_958_3).abs() < 1e-6);
        assert!(r.est_error < 1e-8);
        for &t in &[0.1, 3.0, 100.0] {
            let exact = survival_j(t, &params, &ctrl).unwrap();
            let r = invert(|s| j_hat_complex(s, &params, &ctrl), t, InversionMethod::default()).unwrap();
            assert!(((r.value - exact) / exact).abs() < 1e-8, "t {t}");
        }
    }

    #[test]
    fn power_family_matches_single_inversions() {
        let ctrl = SeriesControl::default();
        let params = ModelParams::new(2, 2.0).unwrap();
        let fam = h_n_cdf_family(3.0, 4, &params, InversionMethod::default(), &ctrl).unwrap();
        assert_eq!(fam.len(), 5);
        assert!((fam[0].value - 1.0).abs() < 1e-9);
        for n in 1..=4u32 {
            let single = h_n_time(3.0, n, &params, InversionMethod::default(), &ctrl).unwrap();
            assert!((single.cdf.value - fam[n as usize].value).abs() < 1e-12);
            assert!(fam[n as usize].value < fam[n as usize - 1].value);
        }
    }

    #[test]
    fn first_return_methods_agree() {
        let ctrl = SeriesControl::default();
        let params = ModelParams::new(2, 2.0).unwrap();
        for &t in &[0.5, 2.0, 20.0, 100.0] {
            let a = first_return_density(t, &params, InversionMethod::default(), &ctrl).unwrap();
            let b = first_return_density(t, &params, InversionMethod::stehfest(14).unwrap(), &ctrl).unwrap();
            assert!((a.value - b.value).abs() <= a.est_error + b.est_error + 1e-12, "t {t}: {a:?} {b:?}");
        }
    }

    #[test]
    fn clipping_rules() {
        let m = InversionMethod::default();
        let r = InversionReport { t: 1.0, value: -1e-12, est_error: 1e-12, method: m };
        assert_eq!(clip_density(r).unwrap().value, 0.0);
        let r = InversionReport { t: 1.0, value: -1e-6, est_error: 1e-12, method: m };
        assert!(clip_density(r).is_err());
    }
}
