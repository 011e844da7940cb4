use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::mc::sojourn_samples;
use super::stats::ks_distance;
use crate::analytic::stable_survival;
use crate::error::{Error, Result};
use crate::model::{ModelParams, NormChainGenerator, DEFAULT_MAX_LEVEL};

/// `P(X < x)` for the scaled sojourn time `X = theta(t) / t^gamma` under the
/// limit law, tabulated in `z = ln(B_alpha B x)`:
/// `P(X < x) = 1 - F_gamma(e^{-z/gamma})`.
#[derive(Debug, Clone)]
pub struct LimitLawTable {
    gamma: f64,
    z0: f64,
    dz: f64,
    values: Vec<f64>,
}

impl LimitLawTable {
    const Z_MIN: f64 = -16.0;
    const Z_MAX: f64 = 6.0;
    const STEP: f64 = 0.01;

    pub fn new(gamma: f64) -> Result<Self> {
        let n = ((Self::Z_MAX - Self::Z_MIN) / Self::STEP).round() as usize + 1;
        let values = (0..n)
            .into_par_iter()
            .map(|i| stable_survival((-(Self::Z_MIN + i as f64 * Self::STEP) / gamma).exp(), gamma))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { gamma, z0: Self::Z_MIN, dz: Self::STEP, values })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cdf_at_z(&self, z: f64) -> f64 {
        let pos = (z - self.z0) / self.dz;
        if pos <= 0.0 {
            // left tail decays like e^{z}
            return self.values[0] * (z - self.z0).exp();
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return 1.0;
        }
        let w = pos - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLawFit {
    pub t: f64,
    pub gamma: f64,
    pub b_fit: f64,
    pub ks_distance: f64,
    pub n: u64,
}

/// Fits the single constant `B` of the limit law to scaled samples by CDF
/// least squares, and reports the post-fit KS distance.
pub fn fit_limit_law(scaled: &[f64], b_alpha: f64, table: &LimitLawTable) -> Result<(f64, f64)> {
    if scaled.len() < 10 || scaled.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Fit("limit-law fit needs at least 10 positive samples".into()));
    }
    let g = table.gamma();
    let mut xs = scaled.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    // E[X] = 1 / (Gamma(1 + g) Gamma(1 - g) B_alpha B)
    let b0 = 1.0 / (gamma(1.0 + g) * gamma(1.0 - g) * b_alpha * mean);
    let loss = |ln_b: f64| -> f64 {
        let scale = (b_alpha * ln_b.exp()).ln();
        xs.iter()
            .enumerate()
            .map(|(i, &x)| (table.cdf_at_z(scale + x.ln()) - (i as f64 + 0.5) / n).powi(2))
            .sum()
    };
    let ln_b = golden_min(loss, b0.ln() - 3.0, b0.ln() + 3.0, 1e-10);
    if (ln_b - b0.ln()).abs() > 2.99 {
        return Err(Error::Fit(format!("B fit ran to the edge of its bracket (B = {:.4e})", ln_b.exp())));
    }
    let b = ln_b.exp();
    let model = |x: f64| if x > 0.0 { table.cdf_at_z((b_alpha * b * x).ln()) } else { 0.0 };
    Ok((b, ks_distance(&xs, model, model)))
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Simulates `theta(t) / t^gamma` and fits the limit law to it.
pub fn limit_law_check(params: &ModelParams, t: f64, n_paths: usize, seed: u64) -> Result<LimitLawFit> {
    let Some(g) = params.constants().tail_gamma else {
        return Err(Error::invalid("the limit law needs alpha > 1"));
    };
    if !(t >= 1e3 && t.is_finite()) {
        return Err(Error::invalid(format!("limit-law check needs t >= 1e3, got {t}")));
    }
    let gen = NormChainGenerator::new(*params, DEFAULT_MAX_LEVEL)?;
    let scale = t.powf(g);
    let scaled: Vec<f64> = sojourn_samples(&gen, &[t], n_paths, seed)?.remove(0).into_iter().map(|x| x / scale).collect();
    let table = LimitLawTable::new(g)?;
    let (b_fit, ks) = fit_limit_law(&scaled, params.constants().b_alpha, &table)?;
    Ok(LimitLawFit { t, gamma: g, b_fit, ks_distance: ks, n: n_paths as u64 })
}
