//! Spectral-diffusion widths from subordination by the sojourn time.
//!
//! The frequency process is never sampled. Only its variance law
//! `<nu^2(theta)> = D theta^{2h}` enters, so the hole width reduces to a
//! fractional moment of the sojourn time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{fit_power_law, moment_curve, Estimate, PowerLawFit};
use crate::model::{ModelParams, NormChainGenerator, DEFAULT_MAX_LEVEL};
use crate::simulate::sojourns_at;

pub const DEFAULT_H: f64 = 0.27;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    h: f64,
    d: f64,
    model: ModelParams,
}

impl SpectralParams {
    pub fn new(h: f64, d: f64, model: ModelParams) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::invalid(format!("h must lie in (0, 1), got {h}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid(format!("D must be positive and finite, got {d}")));
        }
        let alpha = model.alpha();
        if alpha > 1.0 && 2.0 * h >= alpha / (alpha - 1.0) {
            log::warn!("2h = {} is past alpha/(alpha-1) = {}; the sub-threshold scaling does not apply", 2.0 * h, alpha / (alpha - 1.0));
        }
        Ok(Self { h, d, model })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    fn width(&self, moment: &Estimate) -> WidthRow {
        let sigma = (self.d * moment.value).sqrt();
        // d sigma = D dM / (2 sigma)
        let stderr = if sigma > 0.0 { self.d * moment.stderr / (2.0 * sigma) } else { 0.0 };
        WidthRow { t: 0.0, t_a: 0.0, sigma, stderr, n: moment.n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub t: f64,
    pub t_a: f64,
    pub sigma: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Hole widths, sorted by `(t_a, t)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WidthTable {
    pub rows: Vec<WidthRow>,
}

impl WidthTable {
    pub const COLUMNS: [&'static str; 5] = ["t", "t_a", "sigma", "stderr", "n"];

    fn sorted(mut rows: Vec<WidthRow>) -> Self {
        rows.sort_by(|a, b| a.t_a.total_cmp(&b.t_a).then(a.t.total_cmp(&b.t)));
        Self { rows }
    }

    /// Log-log slope of `sigma` against `t` over the rows with `t_a = 0`.
    pub fn slope_in_t(&self) -> Result<PowerLawFit> {
        let rows: Vec<&WidthRow> = self.rows.iter().filter(|r| r.t_a == 0.0).collect();
        fit_power_law(&rows.iter().map(|r| r.t).collect::<Vec<_>>(), &rows.iter().map(|r| r.sigma).collect::<Vec<_>>())
    }

    /// Log-log slope of `sigma` against `t_a` over the rows with `t_a > 0`.
    pub fn slope_in_ta(&self) -> Result<PowerLawFit> {
        let rows: Vec<&WidthRow> = self.rows.iter().filter(|r| r.t_a > 0.0).collect();
        fit_power_law(&rows.iter().map(|r| r.t_a).collect::<Vec<_>>(), &rows.iter().map(|r| r.sigma).collect::<Vec<_>>())
    }
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 1000 {
        return Err(Error::invalid(format!("spectral widths need at least 10^3 paths, got {n_paths}")));
    }
    Ok(())
}

/// `sigma(t) = sqrt(D <theta^{2h}(t)>)` on `t_grid`.
pub fn hole_width(sp: &SpectralParams, t_grid: &[f64], n_paths: usize, seed: u64) -> Result<WidthTable> {
    check_paths(n_paths)?;
    if t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::invalid("t grid must be positive"));
    }
    let mut times = t_grid.to_vec();
    times.sort_by(f64::total_cmp);
    let gen = NormChainGenerator::new(sp.model, DEFAULT_MAX_LEVEL)?;
    let moments = moment_curve(&gen, &times, &[2.0 * sp.h], n_paths, seed)?.remove(0);
    Ok(WidthTable::sorted(times.iter().zip(&moments).map(|(&t, m)| WidthRow { t, ..sp.width(m) }).collect()))
}

/// `sigma(t, t_a) = sqrt(D <(theta(t_a + t) - theta(t_a))^{2h}>)` for each
/// ageing time. Paths are shared across `t_a`.
pub fn ageing_width(sp: &SpectralParams, t: f64, t_a_grid: &[f64], n_paths: usize, seed: u64) -> Result<WidthTable> {
    check_paths(n_paths)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    if t_a_grid.is_empty() || t_a_grid.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
        return Err(Error::invalid("ageing grid must be nonempty, finite and nonnegative"));
    }
    let mut ages = t_a_grid.to_vec();
    ages.sort_by(f64::total_cmp);
    let mut times: Vec<(f64, usize, bool)> =
        ages.iter().enumerate().flat_map(|(i, &a)| [(a, i, false), (a + t, i, true)]).collect();
    times.sort_by(|x, y| x.0.total_cmp(&y.0));
    let grid: Vec<f64> = times.iter().map(|x| x.0).collect();
    let gen = NormChainGenerator::new(sp.model, DEFAULT_MAX_LEVEL)?;
    let beta = 2.0 * sp.h;
    let per_path: Vec<Vec<f64>> = crate::experiments::mc::map_paths(n_paths, seed, |s| {
        let at = sojourns_at(&gen, s, &grid);
        let mut inc = vec![0.0; ages.len()];
        for (&(_, i, late), &v) in times.iter().zip(&at) {
            inc[i] += if late { v } else { -v };
        }
        inc.iter().map(|d| d.clamp(0.0, t).powf(beta)).collect()
    });
    let rows = ages
        .iter()
        .enumerate()
        .map(|(i, &t_a)| {
            let col: Vec<f64> = per_path.iter().map(|row| row[i]).collect();
            WidthRow { t, t_a, ..sp.width(&Estimate::from_samples(&col)) }
        })
        .collect();
    let table = WidthTable::sorted(rows);
    if let Ok(fit) = table.slope_in_ta() {
        log::info!("ageing slope {:.4} +- {:.4} (predicted {:.4})", fit.slope, fit.slope_stderr, -ageing_exponent(sp.model.alpha(), sp.h));
    }
    Ok(table)
}

/// Predicted hole-width growth exponent `(alpha - 1) h / alpha`.
pub fn width_exponent(alpha: f64, h: f64) -> f64 {
    (alpha - 1.0) * h / alpha
}

/// Predicted ageing decay exponent `h / alpha`, so that `sigma ~ t_a^{-h/alpha}`.
pub fn ageing_exponent(alpha: f64, h: f64) -> f64 {
    h / alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub b_obs: f64,
    pub c_obs: f64,
    /// `b / c`.
    pub alpha_inferred: f64,
    /// `1 + b / c`, the `alpha` at which the two predicted exponents have the
    /// observed ratio (`b_pred / c_pred = alpha - 1`).
    pub alpha_consistent: f64,
    /// `b + c`, the `h` reproducing both exponents at `alpha_consistent`.
    pub h_consistent: f64,
}

impl ExponentReport {
    pub fn b_pred(&self, h: f64) -> f64 {
        width_exponent(self.alpha_inferred, h)
    }

    pub fn c_pred(&self, h: f64) -> f64 {
        ageing_exponent(self.alpha_inferred, h)
    }
}

/// Infers `alpha = b / c` from an observed width exponent `b` and ageing exponent `c`.
pub fn exponent_report(b_obs: f64, c_obs: f64) -> Result<ExponentReport> {
    if !(b_obs > 0.0 && c_obs > 0.0 && b_obs.is_finite() && c_obs.is_finite()) {
        return Err(Error::invalid("observed exponents must be positive"));
    }
    Ok(ExponentReport { b_obs, c_obs, alpha_inferred: b_obs / c_obs, alpha_consistent: 1.0 + b_obs / c_obs, h_consistent: b_obs + c_obs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::estimate_moment;

    fn sp(alpha: f64) -> SpectralParams {
        SpectralParams::new(DEFAULT_H, 1.0, ModelParams::new(2, alpha).unwrap()).unwrap()
    }

    #[test]
    fn validation() {
        let m = ModelParams::new(2, 2.0).unwrap();
        assert!(SpectralParams::new(0.0, 1.0, m).is_err());
        assert!(SpectralParams::new(1.0, 1.0, m).is_err());
        assert!(SpectralParams::new(0.5, 0.0, m).is_err());
        assert!(SpectralParams::new(0.99, 1.0, m).is_ok());
        assert!(hole_width(&sp(2.0), &[1.0], 999, 1).is_err());
        assert!(ageing_width(&sp(2.0), 0.0, &[1.0], 1000, 1).is_err());
        assert!(exponent_report(0.0, 0.07).is_err());
        assert!(exponent_report(0.27, -1.0).is_err());
    }

    #[test]
    fn exponent_arithmetic() {
        let r = exponent_report(0.27, 0.07).unwrap();
        assert!((r.alpha_inferred - 27.0 / 7.0).abs() < 1e-12);
        assert!((width_exponent(r.alpha_consistent, r.h_consistent) - 0.27).abs() < 1e-12);
        assert!((ageing_exponent(r.alpha_consistent, r.h_consistent) - 0.07).abs() < 1e-12);
        assert!((r.b_pred(0.27) - 0.27 * (20.0 / 27.0)).abs() < 1e-12);
        assert!((width_exponent(2.0, 0.27) - 0.135).abs() < 1e-15);
        assert!((ageing_exponent(2.0, 0.27) - 0.135).abs() < 1e-15);
        for alpha in [1.5, 2.0, 3.0, 8.0, 50.0] {
            let ratio = width_exponent(alpha, 0.3) / ageing_exponent(alpha, 0.3);
            assert!((ratio - (alpha - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn width_is_the_fractional_moment() {
        let s = sp(2.0);
        let table = hole_width(&s, &[3.0], 2000, 11).unwrap();
        let m = estimate_moment(s.model(), 3.0, 2.0 * s.h(), 2000, 11).unwrap();
        assert_eq!(table.rows[0].sigma, m.value.sqrt());
        assert_eq!(table.rows[0].n, 2000);
    }

    #[test]
    fn short_times_stay_in_zp() {
        let s = SpectralParams::new(0.27, 2.5, ModelParams::new(2, 2.0).unwrap()).unwrap();
        let t = 1e-4;
        let table = hole_width(&s, &[t], 1000, 3).unwrap();
        let ratio = table.rows[0].sigma / (2.5 * t.powf(0.54)).sqrt();
        assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn zero_age_matches_hole_width() {
        let s = sp(2.0);
        let aged = ageing_width(&s, 5.0, &[0.0, 100.0], 1000, 5).unwrap();
        let fresh = hole_width(&s, &[5.0], 1000, 5).unwrap();
        assert_eq!(aged.rows[0].t_a, 0.0);
        assert!((aged.rows[0].sigma - fresh.rows[0].sigma).abs() < 1e-12 * fresh.rows[0].sigma);
        let (a, b) = (aged.rows[0], aged.rows[1]);
        assert!(b.sigma < a.sigma + 3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt());
    }

    #[test]
    fn rows_sorted() {
        let table = ageing_width(&sp(2.0), 1.0, &[50.0, 0.0, 10.0], 1000, 2).unwrap();
        let ages: Vec<f64> = table.rows.iter().map(|r| r.t_a).collect();
        assert_eq!(ages, vec![0.0, 10.0, 50.0]);
        assert!(table.rows.iter().all(|r| r.sigma >= 0.0 && r.t == 1.0));
    }
}
