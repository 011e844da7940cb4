use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::CompensatedSum;

/// Monte Carlo mean with its standard error.
///
/// Merging uses the pooled mean and sum of squared deviations, so it is
/// associative and commutative up to floating-point reassociation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    #[serde(skip)]
    m2: f64,
}

impl Default for Estimate {
    fn default() -> Self {
        Self { value: 0.0, stderr: 0.0, n: 0, m2: 0.0 }
    }
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self::default();
        }
        let mut sum = CompensatedSum::default();
        samples.iter().for_each(|&x| sum.add(x));
        let mean = sum.value() / n as f64;
        let mut m2 = CompensatedSum::default();
        samples.iter().for_each(|&x| m2.add((x - mean) * (x - mean)));
        Self::from_parts(n as u64, mean, m2.value())
    }

    fn from_parts(n: u64, mean: f64, m2: f64) -> Self {
        let stderr = if n > 1 { (m2 / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
        Self { value: mean, stderr, n, m2 }
    }

    pub fn merge(&self, other: &Estimate) -> Estimate {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.value - self.value;
        let mean = (na * self.value + nb * other.value) / n;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / n;
        Self::from_parts(self.n + other.n, mean, m2)
    }

    pub fn std_dev(&self) -> f64 {
        if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).sqrt()
        } else {
            0.0
        }
    }

    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr > 0.0 {
            (self.value - target) / self.stderr
        } else if self.value == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Least-squares line through `(ln t, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub t_range: (f64, f64),
    pub r_squared: f64,
    pub predicted_slope: Option<f64>,
}

pub fn fit_power_law(ts: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if ts.len() != ys.len() {
        return Err(Error::invalid("t and y grids differ in length"));
    }
    if ts.len() < 5 {
        return Err(Error::Fit(format!("power-law fit needs at least 5 points, got {}", ts.len())));
    }
    if ts.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Fit("power-law fit needs positive finite data".into()));
    }
    let x: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate t grid".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = (sse / (n - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(0.0, f64::max);
    Ok(PowerLawFit { slope, slope_stderr, intercept, t_range: (lo, hi), r_squared, predicted_slope: None })
}

/// `n` points equally spaced in `ln t` from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Two-sided Kolmogorov–Smirnov distance of a sample to a model CDF.
///
/// `cdf_below(x)` must return `P(X < x)` and `cdf_at(x)` `P(X <= x)`; they
/// differ only at atoms of the model.
pub fn ks_distance<L, R>(samples: &[f64], mut cdf_below: L, mut cdf_at: R) -> f64
where
    L: FnMut(f64) -> f64,
    R: FnMut(f64) -> f64,
{
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let below: Vec<f64> = xs.iter().map(|&x| cdf_below(x)).collect();
    let at: Vec<f64> = xs.iter().map(|&x| cdf_at(x)).collect();
    ks_from_sorted(&xs, &below, &at)
}

/// KS distance from model values at sorted samples; ties share the values
/// stored at their first index.
pub fn ks_from_sorted(sorted: &[f64], below: &[f64], at: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        d = d.max((below[i] - i as f64 / n).abs());
        d = d.max((at[i] - j as f64 / n).abs());
        i = j;
    }
    d
}

/// Asymptotic 1% critical value of the one-sample KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_61 / (n as f64).sqrt()
}

/// Asymptotic p-value of a KS distance `d` from `n` samples.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_basics() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
        assert_eq!(e.n, 4);
        assert!((e.std_dev() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((e.stderr - e.std_dev() / 2.0).abs() < 1e-15);
        assert_eq!(Estimate::from_samples(&[]).n, 0);
        assert_eq!(Estimate::from_samples(&[3.0]).stderr, 0.0);
        assert!((e.z_score(2.5)).abs() < 1e-15);
    }

    #[test]
    fn merge_matches_pooled() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1013) as f64 / 17.0).collect();
        let whole = Estimate::from_samples(&xs);
        let a = Estimate::from_samples(&xs[..300]);
        let b = Estimate::from_samples(&xs[300..720]);
        let c = Estimate::from_samples(&xs[720..]);
        let left = a.merge(&b).merge(&c);
        let right = a.merge(&b.merge(&c));
        let swapped = c.merge(&a).merge(&b);
        for m in [left, right, swapped] {
            assert_eq!(m.n, whole.n);
            assert!((m.value - whole.value).abs() < 1e-12 * whole.value.abs());
            assert!((m.stderr - whole.stderr).abs() < 1e-12 * whole.stderr);
        }
        assert_eq!(Estimate::default().merge(&a), a);
    }

    #[test]
    fn exact_power_law() {
        let ts = log_grid(1.0, 1e4, 9);
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-0.75)).collect();
        let fit = fit_power_law(&ts, &ys).unwrap();
        assert!((fit.slope + 0.75).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert!(fit.slope_stderr < 1e-10);
        assert_eq!(fit.t_range, (1.0, 1e4));
        assert!(fit_power_law(&ts[..4], &ys[..4]).is_err());
        assert!(fit_power_law(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1e2, 1e5, 13);
        assert_eq!(g.len(), 13);
        assert!((g[0] - 1e2).abs() < 1e-10);
        assert_eq!(g[12], 1e5);
        assert!((g[4] - 1e3).abs() < 1e-9);
    }

    #[test]
    fn ks_on_uniform_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_distance(&xs, |x| x, |x| x);
        assert!((d - 0.005).abs() < 1e-12);
        // an atom in the model at 1 matched by tied samples
        let mut ys = xs.clone();
        ys.truncate(50);
        ys.extend(std::iter::repeat(1.0).take(50));
        let d = ks_distance(&ys, |x| x.min(0.5), |x| if x >= 1.0 { 1.0 } else { x.min(0.5) });
        assert!(d < 0.02, "{d}");
        assert!((ks_critical_1pct(10_000) - 0.016_276_1).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_p_values() {
        assert!((ks_p_value(ks_critical_1pct(100_000), 100_000) - 0.01).abs() < 1e-3);
        assert_eq!(ks_p_value(0.0, 100), 1.0);
        assert!(ks_p_value(0.5, 100) < 1e-10);
    }
}
