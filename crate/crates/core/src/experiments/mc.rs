use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{fit_power_law, ks_critical_1pct, ks_from_sorted, ks_p_value, log_grid, Estimate, PowerLawFit};
use crate::analytic::{sojourn_cdf, SeriesControl};
use crate::error::{Error, Result};
use crate::laplace::{first_return_cdf, InversionMethod};
use crate::model::{ModelParams, NormChainGenerator, DEFAULT_MAX_LEVEL};
use crate::simulate::{first_return_time, levels_at, path_functionals, path_seed, sojourns_at};

fn generator(params: &ModelParams) -> Result<NormChainGenerator> {
    NormChainGenerator::new(*params, DEFAULT_MAX_LEVEL)
}

/// Runs `f(seed_i)` for every path, in parallel, returning results in path order.
pub(crate) fn map_paths<T, F>(n_paths: usize, base_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    (0..n_paths as u64).into_par_iter().map(|i| f(path_seed(base_seed, i))).collect()
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("time grid must be finite, nonnegative and sorted"));
    }
    Ok(())
}

/// Sojourn-time samples, `out[i][path]` at `times[i]`.
pub fn sojourn_samples(gen: &NormChainGenerator, times: &[f64], n_paths: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_times(times)?;
    let per_path = map_paths(n_paths, seed, |s| sojourns_at(gen, s, times));
    Ok((0..times.len()).map(|i| per_path.iter().map(|row| row[i]).collect()).collect())
}

/// `<theta^beta>` at each time, `out[b][i]` for `betas[b]` and `times[i]`.
pub fn moment_curve(
    gen: &NormChainGenerator,
    times: &[f64],
    betas: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<Estimate>>> {
    if betas.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::invalid("moment orders must be positive"));
    }
    let samples = sojourn_samples(gen, times, n_paths, seed)?;
    Ok(betas
        .iter()
        .map(|&beta| {
            samples
                .iter()
                .map(|col| Estimate::from_samples(&col.iter().map(|x| x.powf(beta)).collect::<Vec<_>>()))
                .collect()
        })
        .collect())
}

/// `<theta^beta>(t)` over `n_paths` paths.
pub fn estimate_moment(params: &ModelParams, t: f64, beta: f64, n_paths: usize, seed: u64) -> Result<Estimate> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    if n_paths < 100 {
        return Err(Error::invalid("estimate_moment needs at least 100 paths"));
    }
    let gen = generator(params)?;
    Ok(moment_curve(&gen, &[t], &[beta], n_paths, seed)?[0][0])
}

/// Growth exponent of `<theta^beta>` predicted for `alpha > 1`:
/// `gamma beta` below `beta = alpha/(alpha-1)`, `beta - 1/(alpha-1)` from there on.
pub fn moment_exponent_prediction(alpha: f64, beta: f64) -> Option<f64> {
    if alpha <= 1.0 {
        return None;
    }
    let threshold = alpha / (alpha - 1.0);
    Some(if beta < threshold { (alpha - 1.0) / alpha * beta } else { beta - 1.0 / (alpha - 1.0) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentFit {
    pub beta: f64,
    pub fit: PowerLawFit,
    pub times: Vec<f64>,
    pub estimates: Vec<Estimate>,
}

/// One log-log fit of `<theta^beta>(t)` per `beta`.
pub fn moment_scaling_report(
    params: &ModelParams,
    betas: &[f64],
    t_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<MomentFit>> {
    if params.alpha() <= 1.0 {
        return Err(Error::invalid("moment scaling needs alpha > 1"));
    }
    let gen = generator(params)?;
    let curves = moment_curve(&gen, t_grid, betas, n_paths, seed)?;
    betas
        .iter()
        .zip(curves)
        .map(|(&beta, estimates)| {
            let ys: Vec<f64> = estimates.iter().map(|e| e.value).collect();
            let mut fit = fit_power_law(t_grid, &ys)?;
            fit.predicted_slope = moment_exponent_prediction(params.alpha(), beta);
            if fit.r_squared < 0.98 {
                log::warn!("moment fit for beta = {beta} has r^2 = {:.4}", fit.r_squared);
            }
            Ok(MomentFit { beta, fit, times: t_grid.to_vec(), estimates })
        })
        .collect()
}

/// Fraction of paths in `Z_p` at each time.
pub fn empirical_survival(gen: &NormChainGenerator, times: &[f64], n_paths: usize, seed: u64) -> Result<Vec<Estimate>> {
    check_times(times)?;
    let levels = map_paths(n_paths, seed, |s| levels_at(gen, s, times));
    Ok((0..times.len())
        .map(|i| {
            let hits: Vec<f64> = levels.iter().map(|row| if row[i] == 0 { 1.0 } else { 0.0 }).collect();
            Estimate::from_samples(&hits)
        })
        .collect())
}

/// First return times, `None` when censored at `horizon`.
pub fn first_return_samples(gen: &NormChainGenerator, horizon: f64, n_paths: usize, seed: u64) -> Vec<Option<f64>> {
    map_paths(n_paths, seed, |s| first_return_time(gen, s, horizon))
}

/// Fraction of paths whose first excursion has not ended by `horizon`.
pub fn never_return_fraction(params: &ModelParams, horizon: f64, n_paths: usize, seed: u64) -> Result<Estimate> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon must be positive and finite"));
    }
    let gen = generator(params)?;
    let flags: Vec<f64> = first_return_samples(&gen, horizon, n_paths, seed)
        .iter()
        .map(|r| if r.is_none() { 1.0 } else { 0.0 })
        .collect();
    Ok(Estimate::from_samples(&flags))
}

/// Survival-exponent prediction for the first return time:
/// `-(alpha-1)/alpha` for `alpha > 1`, `-(1/alpha - 1)` (conditional on
/// return) for `alpha < 1`, none at `alpha = 1`.
pub fn first_return_tail_prediction(alpha: f64) -> Option<f64> {
    if alpha > 1.0 {
        Some(-(alpha - 1.0) / alpha)
    } else if alpha < 1.0 {
        Some(-(1.0 / alpha - 1.0))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub fit: PowerLawFit,
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub n: u64,
    pub returned: u64,
    /// True when the survival is conditional on return by the horizon.
    pub conditional: bool,
}

/// Fits the empirical survival function of the first return time on a log
/// grid of `points` times in `[t_lo, t_hi]`. For `alpha < 1` the survival is
/// conditional on return by `horizon`: `P(t < tau <= horizon) / P(tau <= horizon)`.
pub fn first_return_tail(
    params: &ModelParams,
    horizon: f64,
    fit_range: (f64, f64),
    points: usize,
    n_paths: usize,
    seed: u64,
) -> Result<TailReport> {
    if n_paths < 10_000 {
        return Err(Error::invalid("first_return_tail needs at least 10^4 paths"));
    }
    let (lo, hi) = fit_range;
    if !(lo > 0.0 && hi > lo && hi <= horizon) {
        return Err(Error::invalid("fit range must satisfy 0 < t_lo < t_hi <= horizon"));
    }
    let gen = generator(params)?;
    let mut returns: Vec<f64> = first_return_samples(&gen, horizon, n_paths, seed).into_iter().flatten().collect();
    returns.sort_by(f64::total_cmp);
    let conditional = params.alpha() < 1.0;
    let n = n_paths as f64;
    let returned = returns.len() as f64;
    let times = log_grid(lo, hi, points);
    let mut survival = Vec::with_capacity(times.len());
    for &t in &times {
        let beyond_in_horizon = returned - returns.partition_point(|&x| x <= t) as f64;
        let count = if conditional { beyond_in_horizon } else { beyond_in_horizon + (n - returned) };
        if count < 10.0 {
            return Err(Error::Fit(format!("only {count} first returns beyond t = {t:.3e}; tail too thin to fit")));
        }
        survival.push(count / if conditional { returned } else { n });
    }
    let mut fit = fit_power_law(&times, &survival)?;
    fit.predicted_slope = first_return_tail_prediction(params.alpha());
    Ok(TailReport { fit, times, survival, n: n_paths as u64, returned: returned as u64, conditional })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub distance: f64,
    pub critical_1pct: f64,
    pub p_value: f64,
    pub n: u64,
}

impl KsReport {
    fn new(distance: f64, n: usize) -> Self {
        Self { distance, critical_1pct: ks_critical_1pct(n), p_value: ks_p_value(distance, n), n: n as u64 }
    }

    pub fn passes(&self) -> bool {
        self.distance <= self.critical_1pct
    }
}

/// KS distance between simulated sojourn times at `t` and the series/inversion CDF.
pub fn sojourn_cdf_ks(
    params: &ModelParams,
    t: f64,
    n_paths: usize,
    seed: u64,
    method: InversionMethod,
    ctrl: &SeriesControl,
) -> Result<KsReport> {
    let gen = generator(params)?;
    let mut xs = sojourn_samples(&gen, &[t], n_paths, seed)?.remove(0);
    xs.sort_by(f64::total_cmp);
    let below: Vec<f64> = xs
        .par_iter()
        .map(|&x| if x >= t { Ok(1.0 - (-params.constants().b_alpha * t).exp()) } else { sojourn_cdf(x, t, params, method, ctrl) })
        .collect::<Result<_>>()?;
    let at: Vec<f64> = xs.iter().zip(&below).map(|(&x, &b)| if x >= t { 1.0 } else { b }).collect();
    Ok(KsReport::new(ks_from_sorted(&xs, &below, &at), xs.len()))
}

/// KS distance between simulated first return times and the inverted CDF,
/// over returns up to `horizon` (censored paths sit above it).
pub fn first_return_ks(
    params: &ModelParams,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    method: InversionMethod,
    ctrl: &SeriesControl,
) -> Result<KsReport> {
    let gen = generator(params)?;
    let samples = first_return_samples(&gen, horizon, n_paths, seed);
    let mut xs: Vec<f64> = samples.iter().flatten().copied().collect();
    xs.sort_by(f64::total_cmp);
    let model: Vec<f64> = xs
        .par_iter()
        .map(|&x| Ok(first_return_cdf(x, params, method, ctrl)?.value.clamp(0.0, 1.0)))
        .collect::<Result<_>>()?;
    let n = n_paths as f64;
    let mut d: f64 = 0.0;
    for (i, &f) in model.iter().enumerate() {
        d = d.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
    }
    Ok(KsReport::new(d, n_paths))
}

/// Mean sojourn time at `t` over `n_paths` paths, streamed.
pub fn mean_sojourn_mc(params: &ModelParams, t: f64, n_paths: usize, seed: u64) -> Result<Estimate> {
    let gen = generator(params)?;
    let xs: Vec<f64> =
        map_paths(n_paths, seed, |s| path_functionals(&gen, t, s).map(|f| f.sojourn)).into_iter().collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&xs))
}
