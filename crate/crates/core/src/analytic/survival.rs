use num_complex::Complex64;

use super::SeriesControl;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Sums `sum_n term(n)` over survival modes with weights `(1-1/p) p^{-n}`,
/// stopping once `tail(n)` (a bound on the remainder from `n` on) is small.
fn mode_series<T, F, B>(params: &ModelParams, ctrl: &SeriesControl, what: &'static str, mut term: F, tail: B) -> Result<T>
where
    T: Copy + std::ops::AddAssign + Default + Into<Complex64>,
    F: FnMut(f64, f64) -> T,
    B: Fn(usize) -> f64,
{
    let mut sum = T::default();
    for n in 0..ctrl.max_terms {
        if n > 0 && ctrl.done(tail(n), sum.into().norm()) {
            return Ok(sum);
        }
        sum += term(params.mode_weight(n), params.mode_rate(n));
    }
    Err(Error::SeriesNonConvergence { what, terms: ctrl.max_terms })
}

/// Survival probability `J(t)`: the chance to be in `Z_p` at time `t`.
pub fn survival_j(t: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    let p = params.pf();
    let j = mode_series(params, ctrl, "survival J", |w, lam| w * (-lam * t).exp(), |n| p.powi(-(n as i32)))?;
    Ok(j.clamp(0.0, 1.0))
}

/// `J'(t)`.
pub fn j_derivative(t: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_time(t)?;
    let p = params.pf();
    let q = params.pf().powf(-params.alpha());
    mode_series(params, ctrl, "J'", |w, lam| -w * lam * (-lam * t).exp(), |n| p.powi(-(n as i32)) * q.powi(n as i32))
}

/// Inflow rate into `Z_p`, `v(t) = J'(t) + B_alpha J(t)`.
pub fn v_rate(t: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_time(t)?;
    let b = params.constants().b_alpha;
    let p = params.pf();
    let v = mode_series(params, ctrl, "inflow v", |w, lam| w * (b - lam) * (-lam * t).exp(), |n| {
        p.powi(-(n as i32))
    })?;
    Ok(v.max(0.0))
}

/// Mean sojourn time in `Z_p` up to `t`, i.e. the integral of `J` over `[0, t]`.
pub fn mean_sojourn(t: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    check_time(t)?;
    let p = params.pf();
    let m = mode_series(
        params,
        ctrl,
        "mean sojourn",
        |w, lam| {
            let x = lam * t;
            // (1 - e^{-lam t}) / lam, with its t-linear limit once lam underflows
            let integral = if x < 1e-300 { t } else { -(-x).exp_m1() / lam };
            w * integral
        },
        |n| t * p.powi(-(n as i32)),
    )?;
    Ok(m.clamp(0.0, t))
}

/// Laplace transform of the survival probability.
pub fn j_hat(s: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("j_hat needs s > 0, got {s}")));
    }
    let p = params.pf();
    mode_series(params, ctrl, "J hat", |w, lam| w / (s + lam), |n| p.powi(-(n as i32)) / s)
}

/// Sums needed by the complex-domain transforms at a single `s`.
#[derive(Debug, Clone, Copy)]
struct ModeSums {
    /// `J^(s)`
    j: Complex64,
    /// `sum w lam / (s + lam)`, so that `s J^(s) = 1 - q`
    q: Complex64,
    /// `sum w lam (lam - B) / (s + lam)`
    r: Complex64,
}

fn mode_sums(s: Complex64, params: &ModelParams, ctrl: &SeriesControl) -> Result<ModeSums> {
    let b = params.constants().b_alpha;
    let p = params.pf();
    let mut j = Complex64::default();
    let mut q = Complex64::default();
    let mut r = Complex64::default();
    for n in 0..ctrl.max_terms {
        let lam = params.mode_rate(n);
        if n > 0 {
            // Remaining poles lie in [-lam, 0]; bound each term by the
            // distance from s to that segment.
            let dist = distance_to_segment(s, -lam);
            if dist == 0.0 {
                return Err(Error::invalid(format!("transform evaluated on its pole set at s = {s}")));
            }
            if ctrl.done(p.powi(-(n as i32)) / dist, j.norm()) {
                return Ok(ModeSums { j, q, r });
            }
        }
        let w = params.mode_weight(n);
        let inv = 1.0 / (s + lam);
        if !inv.is_finite() {
            return Err(Error::invalid(format!("transform evaluated on a pole at s = {s}")));
        }
        j += w * inv;
        q += w * lam * inv;
        r += w * lam * (lam - b) * inv;
    }
    Err(Error::SeriesNonConvergence { what: "complex J hat", terms: ctrl.max_terms })
}

fn distance_to_segment(s: Complex64, lo: f64) -> f64 {
    let x = s.re.clamp(lo, 0.0);
    ((s.re - x).powi(2) + s.im * s.im).sqrt()
}

/// `J^(s)` at complex `s` off the negative real axis.
pub fn j_hat_complex(s: Complex64, params: &ModelParams, ctrl: &SeriesControl) -> Result<Complex64> {
    Ok(mode_sums(s, params, ctrl)?.j)
}

/// Laplace transform of the first-return density,
/// `f^(s) = 1 - 1 / ((B_alpha + s) J^(s))`, at complex `s`.
pub fn f_hat_complex(s: Complex64, params: &ModelParams, ctrl: &SeriesControl) -> Result<Complex64> {
    let b = params.constants().b_alpha;
    let m = mode_sums(s, params, ctrl)?;
    if s.norm() >= 1.0 {
        // (B+s)J^ - 1 = R/s, written without cancellation at large |s|
        Ok(m.r / ((b + s) * (1.0 - m.q)))
    } else {
        Ok(1.0 - 1.0 / ((b + s) * m.j))
    }
}

/// Laplace transform `h^(s) = f^(s) / g^(s)` of the excursion-length density.
pub fn h_hat_complex(s: Complex64, params: &ModelParams, ctrl: &SeriesControl) -> Result<Complex64> {
    let b = params.constants().b_alpha;
    let m = mode_sums(s, params, ctrl)?;
    if s.norm() >= 1.0 {
        Ok(m.r / (b * (1.0 - m.q)))
    } else {
        Ok((s + b - 1.0 / m.j) / b)
    }
}

/// Return probability `f^(0)`: 1 for the recurrent walk, `C_alpha` otherwise.
fn f_hat_at_zero(params: &ModelParams) -> f64 {
    let alpha = params.alpha();
    if alpha >= 1.0 {
        return 1.0;
    }
    let p = params.pf();
    let b = params.constants().b_alpha;
    // J^(0) = (1 - 1/p) / (1 - p^{alpha-1}), the s -> 0 limit of the series
    let j0 = (1.0 - 1.0 / p) / (1.0 - p.powf(alpha - 1.0));
    1.0 - 1.0 / (b * j0)
}

/// First-return transform at real `s >= 0`.
pub fn f_hat(s: f64, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("f_hat needs s >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(f_hat_at_zero(params));
    }
    Ok(f_hat_complex(Complex64::new(s, 0.0), params, ctrl)?.re.clamp(0.0, 1.0))
}

/// `h^_n(s) = (h^(s))^n`, the transform of the total length of `n` excursions.
pub fn h_n_hat(s: f64, n: u32, params: &ModelParams, ctrl: &SeriesControl) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("h_n_hat needs s >= 0, got {s}")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let h1 = if s == 0.0 {
        // h^(0) = f^(0) / g^(0) and g^(0) = 1
        f_hat_at_zero(params)
    } else {
        h_hat_complex(Complex64::new(s, 0.0), params, ctrl)?.re
    };
    Ok(h1.clamp(0.0, 1.0).powi(n as i32))
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be finite and >= 0, got {t}")))
    }
}
