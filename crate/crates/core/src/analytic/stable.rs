//! One-sided stable law `F_gamma` with Laplace transform
//! `exp(-Gamma(1 - gamma) s^gamma)`, evaluated two independent ways.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rug::Float;
use statrs::function::gamma::{gamma, ln_gamma};

use super::SeriesControl;
use crate::error::{Error, Result};
use crate::quad::{try_integrate, QuadOptions};

/// Smallest argument accepted by the power series.
pub const STABLE_SERIES_FLOOR: f64 = 0.5;

fn check_gamma(g: f64) -> Result<()> {
    if g > 0.0 && g < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("stable index must lie in (0, 1), got {g}")))
    }
}

/// `n = 1` term of the series, the large-`t` asymptote of the density.
pub fn stable_leading_term(t: f64, g: f64) -> f64 {
    gamma(1.0 - g) * (PI * g).sin() * gamma(g + 1.0) * t.powf(-g - 1.0) / PI
}

#[derive(Clone, Copy, PartialEq)]
enum SeriesKind {
    Density,
    Survival,
}

/// Density series `(1/pi) sum_n (-1)^{n+1} a^n sin(n pi g) Gamma(n g + 1) t^{-n g - 1} / n!`,
/// `a = Gamma(1 - g)`, summed in multiprecision: the terms grow enormously
/// before they decay once `t` is small.
pub fn stable_density_series(t: f64, g: f64, ctrl: &SeriesControl) -> Result<f64> {
    series(t, g, ctrl, SeriesKind::Density)
}

/// `1 - F_gamma(y)` from the termwise integrated series.
pub fn stable_survival_series(y: f64, g: f64, ctrl: &SeriesControl) -> Result<f64> {
    series(y, g, ctrl, SeriesKind::Survival)
}

fn series(t: f64, g: f64, ctrl: &SeriesControl, kind: SeriesKind) -> Result<f64> {
    check_gamma(g)?;
    if !(t >= STABLE_SERIES_FLOOR && t.is_finite()) {
        return Err(Error::invalid(format!("stable series needs t >= {STABLE_SERIES_FLOOR}, got {t}")));
    }
    let ln_a = ln_gamma(1.0 - g);
    let ln_t = t.ln();
    // log magnitude of term n, ignoring the sine
    let log_mag = |n: f64| -> f64 {
        let base = n * ln_a + ln_gamma(n * g + 1.0) - ln_gamma(n + 1.0) - n * g * ln_t;
        match kind {
            SeriesKind::Density => base - ln_t,
            SeriesKind::Survival => base - (n * g).ln(),
        }
    };
    let stop_below = ctrl.abs_tol.ln() - 2.0;
    let mut peak = f64::NEG_INFINITY;
    let mut prev = f64::NEG_INFINITY;
    let mut last = None;
    for n in 1..=ctrl.max_terms {
        let l = log_mag(n as f64);
        peak = peak.max(l);
        if n >= 8 && l < prev && l < stop_below {
            last = Some(n);
            break;
        }
        prev = l;
    }
    let Some(last) = last else {
        return Err(Error::SeriesNonConvergence { what: "stable series", terms: ctrl.max_terms });
    };

    let bits = ((peak - stop_below).max(0.0) / std::f64::consts::LN_2 + 64.0).ceil() as u32;
    let prec = bits.max(64);
    let a = Float::with_val(prec, 1.0 - g).gamma();
    let ln_tf = Float::with_val(prec, t).ln();
    let gf = Float::with_val(prec, g);
    let mut a_pow_over_fact = Float::with_val(prec, 1);
    let mut sum = Float::with_val(prec, 0);
    for n in 1..=last {
        a_pow_over_fact *= &a;
        a_pow_over_fact /= n as u32;
        let ng = Float::with_val(prec, &gf * n as u32);
        let sin = ng.clone().sin_pi();
        if sin.is_zero() {
            continue;
        }
        let mut term = Float::with_val(prec, &ng + 1u32).gamma();
        term *= &a_pow_over_fact;
        term *= sin;
        let power = match kind {
            SeriesKind::Density => Float::with_val(prec, -(ng.clone() + 1u32)),
            SeriesKind::Survival => Float::with_val(prec, -ng.clone()),
        };
        term *= (power * &ln_tf).exp();
        if kind == SeriesKind::Survival {
            term /= &ng;
        }
        if n % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let value = sum.to_f64() / PI;
    Ok(match kind {
        SeriesKind::Density => value.max(0.0),
        SeriesKind::Survival => value.clamp(0.0, 1.0),
    })
}

/// `exp(z) - 1` without cancellation near `z = 0`.
fn expm1_c(z: Complex64) -> Complex64 {
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * z.im.cos() - 2.0 * half * half, z.re.exp() * z.im.sin())
}

/// Largest ray angle below the real `k` axis on which the characteristic
/// function still decays.
fn max_ray_angle(g: f64) -> f64 {
    FRAC_PI_2 / g - FRAC_PI_2
}

fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 8000 }
}

/// Density by Fourier inversion along a ray `k = rho e^{-i phi}` in the lower
/// half plane, on which the integrand decays exponentially. For `g <= 1/2`
/// this is the rotated real-axis integral
/// `-(1/pi) Re i int_0^inf e^{-k t} exp(-a e^{-i pi g} k^g) dk`.
pub fn stable_density_quadrature(t: f64, g: f64) -> Result<f64> {
    check_gamma(g)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("stable density needs finite t > 0, got {t}")));
    }
    let phi = if g <= 0.5 { FRAC_PI_2 } else { 0.5 * max_ray_angle(g) };
    let rot = Complex64::from_polar(1.0, -phi);
    let a = Complex64::from_polar(gamma(1.0 - g) * t.powf(-g), -(FRAC_PI_2 * g + g * phi));
    let v_max = (46.0 / phi.sin()).powf(g);
    let inv_g = 1.0 / g;
    // u = v^{1/g}; the "- 1" integrates to zero along the ray
    let integrand = |v: f64| -> Result<f64> {
        if v == 0.0 {
            return Ok(0.0);
        }
        let u = v.powf(inv_g);
        let jac = inv_g * u / v;
        let z = rot * (-Complex64::i() * u * rot).exp() * expm1_c(-a * v);
        Ok(z.re * jac)
    };
    let r = try_integrate(integrand, 0.0, v_max, quad_opts())?;
    Ok((r.value / (PI * t)).max(0.0))
}

/// `1 - F_gamma(y)` by the Gil-Pelaez formula along a ray.
pub fn stable_survival(y: f64, g: f64) -> Result<f64> {
    check_gamma(g)?;
    if y <= 0.0 {
        return Ok(1.0);
    }
    if !y.is_finite() {
        return Ok(0.0);
    }
    let phi = FRAC_PI_4.min(0.5 * max_ray_angle(g));
    let rot = Complex64::from_polar(1.0, -phi);
    let a = Complex64::from_polar(gamma(1.0 - g) * y.powf(-g), -(FRAC_PI_2 * g + g * phi));
    let v_max = (46.0 / phi.sin()).powf(g);
    let inv_g = 1.0 / g;
    // exp(-u e^{-i phi}) / u is subtracted to make the integrand finite at 0.
    let integrand = |v: f64| -> Result<f64> {
        if v == 0.0 {
            return Ok(0.0);
        }
        let u = v.powf(inv_g);
        let ur = u * rot;
        let w = (-ur).exp() * expm1_c(ur - Complex64::i() * ur - a * v);
        Ok(inv_g * w.im / v)
    };
    let r = try_integrate(integrand, 0.0, v_max, quad_opts())?;
    Ok((0.5 + r.value / PI).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erf;

    fn levy(t: f64) -> f64 {
        0.5 * t.powf(-1.5) * (-PI / (4.0 * t)).exp()
    }

    #[test]
    fn series_matches_levy() {
        let c = SeriesControl::default();
        assert!((stable_density_series(1.0, 0.5, &c).unwrap() - 0.227_969_1).abs() < 1e-7);
        assert!((stable_density_series(4.0, 0.5, &c).unwrap() - 0.051_357_8).abs() < 1e-6);
        for &t in &[0.5, 0.8, 2.0, 30.0] {
            assert!((stable_density_series(t, 0.5, &c).unwrap() - levy(t)).abs() < 1e-12, "t {t}");
        }
        assert!(stable_density_series(0.3, 0.5, &c).is_err());
        assert!(stable_density_series(1.0, 1.0, &c).is_err());
    }

    #[test]
    fn quadrature_matches_levy() {
        for &t in &[0.1, 0.5, 1.0, 4.0, 100.0] {
            let q = stable_density_quadrature(t, 0.5).unwrap();
            assert!((q - levy(t)).abs() < 1e-10, "t {t}: {q} vs {}", levy(t));
        }
        assert!((stable_density_quadrature(0.1, 0.5).unwrap() - 0.006_138_03).abs() < 1e-8);
    }

    #[test]
    fn routes_agree() {
        let c = SeriesControl::default();
        for &g in &[0.25, 0.5, 0.75] {
            for &t in &[0.5, 1.0, 3.0, 20.0] {
                let s = stable_density_series(t, g, &c).unwrap();
                let q = stable_density_quadrature(t, g).unwrap();
                assert!((s - q).abs() < 1e-9, "g {g} t {t}: {s} vs {q}");
            }
        }
    }

    #[test]
    fn leading_term_dominates_at_large_t() {
        let c = SeriesControl::default();
        assert!((stable_leading_term(3.0, 0.5) - 0.5 * 3f64.powf(-1.5)).abs() < 1e-15);
        let ratio = stable_density_series(1e4, 0.5, &c).unwrap() / stable_leading_term(1e4, 0.5);
        assert!((ratio - 1.0).abs() < 1e-3);
    }

    #[test]
    fn survival_routes() {
        let c = SeriesControl::default();
        for &y in &[0.05, 0.5, 1.0, 10.0, 1e3] {
            let exact = erf((PI / (4.0 * y)).sqrt());
            assert!((stable_survival(y, 0.5).unwrap() - exact).abs() < 1e-10, "y {y}");
        }
        for &g in &[0.25, 0.75] {
            for &y in &[0.7, 2.0, 15.0] {
                let a = stable_survival(y, g).unwrap();
                let b = stable_survival_series(y, g, &c).unwrap();
                assert!((a - b).abs() < 1e-9, "g {g} y {y}: {a} vs {b}");
            }
        }
        assert_eq!(stable_survival(0.0, 0.5).unwrap(), 1.0);
    }
}
