use crate::analytic::{v_rate, SeriesControl};
use crate::error::{Error, Result};
use crate::laplace::{first_return_density, InversionMethod};
use crate::model::ModelParams;
use crate::quad::{try_integrate, QuadOptions};

/// Residual `v(t) - (v * f)(t) - f(t)` of the renewal equation linking the
/// inflow rate `v` into `Z_p` and the first-return density `f`.
pub fn volterra_residual_at(t: f64, params: &ModelParams, method: InversionMethod, ctrl: &SeriesControl) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("residual needs finite t > 0, got {t}")));
    }
    let f = |tau: f64| -> Result<f64> {
        if tau <= 0.0 {
            return Ok(0.0);
        }
        Ok(first_return_density(tau, params, method, ctrl)?.value)
    };
    let conv = try_integrate(|tau| Ok(v_rate(t - tau, params, ctrl)? * f(tau)?), 0.0, t, QuadOptions::with_tol(1e-10, 1e-9))?;
    Ok(v_rate(t, params, ctrl)? - conv.value - f(t)?)
}

/// Largest absolute residual over `t_grid`.
pub fn volterra_residual(params: &ModelParams, t_grid: &[f64], method: InversionMethod, ctrl: &SeriesControl) -> Result<f64> {
    t_grid.iter().try_fold(0.0f64, |acc, &t| Ok(acc.max(volterra_residual_at(t, params, method, ctrl)?.abs())))
}
