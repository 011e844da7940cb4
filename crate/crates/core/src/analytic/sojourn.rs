use super::erlang::poisson_pmf;
use super::SeriesControl;
use crate::error::{Error, Result};
use crate::laplace::{h_n_cdf_family, InversionMethod};
use crate::model::ModelParams;

/// Number of Poisson terms kept for mean `m`: `m + 10 sqrt(m + 1) + 20`.
pub fn poisson_cutoff(mean: f64) -> usize {
    (mean + 10.0 * (mean + 1.0).sqrt() + 20.0).ceil() as usize
}

/// `sum_n H_n(tau) Pois(n; mean)` with `H_0 = 1`.
fn mixed_sum(tau: f64, mean: f64, params: &ModelParams, method: InversionMethod, ctrl: &SeriesControl) -> Result<f64> {
    if tau <= 0.0 {
        return Ok(poisson_pmf(0, mean));
    }
    let n_max = poisson_cutoff(mean);
    let family = h_n_cdf_family(tau, n_max, params, method, ctrl)?;
    let mut sum = poisson_pmf(0, mean);
    for (n, report) in family.iter().enumerate().skip(1) {
        let w = poisson_pmf(n as u32, mean);
        if w == 0.0 && n as f64 > mean {
            break;
        }
        sum += report.value.clamp(0.0, 1.0) * w;
    }
    Ok(sum.clamp(0.0, 1.0))
}

fn check(theta: f64, t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("horizon must be finite and >= 0, got {t}")));
    }
    if !(theta >= 0.0 && theta <= t) {
        return Err(Error::invalid(format!("theta must lie in [0, {t}], got {theta}")));
    }
    Ok(())
}

/// Distribution of the sojourn time in `Z_p` up to `t`:
/// `Phi(theta, t) = 1 - sum_n H_n(t - theta) (G_n(theta) - G_{n+1}(theta))`.
///
/// For `theta < t` this is `P(sojourn < theta)`. The law has an atom of mass
/// `exp(-B_alpha t)` at `theta = t` (paths that never leave), and
/// `Phi(t, t) = 1`.
pub fn sojourn_cdf(
    theta: f64,
    t: f64,
    params: &ModelParams,
    method: InversionMethod,
    ctrl: &SeriesControl,
) -> Result<f64> {
    check(theta, t)?;
    if theta >= t {
        return Ok(1.0);
    }
    let b = params.constants().b_alpha;
    Ok(1.0 - mixed_sum(t - theta, b * theta, params, method, ctrl)?)
}

/// `P(sojourn outside Z_p <= theta)` up to `t`:
/// `sum_n H_n(theta) (G_n(t - theta) - G_{n+1}(t - theta))`.
pub fn complement_sojourn_cdf(
    theta: f64,
    t: f64,
    params: &ModelParams,
    method: InversionMethod,
    ctrl: &SeriesControl,
) -> Result<f64> {
    check(theta, t)?;
    let b = params.constants().b_alpha;
    mixed_sum(theta, b * (t - theta), params, method, ctrl)
}
