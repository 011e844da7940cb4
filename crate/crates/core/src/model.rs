//! Model parameters, the closed-form constants of the walk, and the exact
//! generator of the lumped level process.
//!
//! The walk is observed through its level `k = log_p max(|x|_p, 1)`: level 0
//! is the unit ball `Z_p`, level `k >= 1` is the sphere `|x|_p = p^k`. Jump
//! rates of the Vladimirov kernel into each target level depend only on the
//! source level, so the level process is itself a Markov chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default level cutoff of [`NormChainGenerator`].
pub const DEFAULT_MAX_LEVEL: usize = 40;

/// The pair `(p, alpha)` defining the walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    p: u32,
    alpha: f64,
}

impl ModelParams {
    pub fn new(p: u32, alpha: f64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::invalid(format!("p = {p} is not prime")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid(format!("alpha = {alpha} must be positive and finite")));
        }
        // p^alpha must stay representable; every constant is built from it.
        if alpha * f64::from(p).ln() > 700.0 {
            return Err(Error::invalid(format!("alpha = {alpha} overflows p^alpha for p = {p}")));
        }
        Ok(Self { p, alpha })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub(crate) fn pf(&self) -> f64 {
        f64::from(self.p)
    }

    /// `p^{-alpha n}`: the decay rate of the `n`-th survival mode.
    pub(crate) fn mode_rate(&self, n: usize) -> f64 {
        self.pf().powf(-self.alpha * n as f64)
    }

    /// `(1 - 1/p) p^{-n}`: the weight of the `n`-th survival mode.
    pub(crate) fn mode_weight(&self, n: usize) -> f64 {
        (1.0 - 1.0 / self.pf()) * self.pf().powi(-(n as i32))
    }

    pub fn constants(&self) -> DerivedConstants {
        derive_constants(self)
    }
}

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `Gamma_p(-alpha) = (1 - p^{-alpha-1}) / (1 - p^alpha)`; always negative.
    pub gamma_p_neg_alpha: f64,
    /// Exit rate from `Z_p`, `B_alpha = (1 - 1/p) / (1 - p^{-alpha-1})`.
    pub b_alpha: f64,
    /// Return probability `C_alpha` of the transient walk; `None` for `alpha >= 1`.
    pub c_alpha: Option<f64>,
    /// Kernel prefactor `C = -1 / Gamma_p(-alpha)`.
    pub kernel_scale: f64,
    /// Sojourn scaling exponent `(alpha - 1) / alpha`; `None` for `alpha <= 1`.
    pub tail_gamma: Option<f64>,
}

impl DerivedConstants {
    /// `B_alpha` computed a second way, by summing the kernel over all shells
    /// outside `Z_p`.
    pub fn b_alpha_from_kernel(&self, params: &ModelParams) -> f64 {
        let p = params.pf();
        let q = p.powf(-params.alpha());
        self.kernel_scale * (1.0 - 1.0 / p) * q / (1.0 - q)
    }
}

pub fn derive_constants(params: &ModelParams) -> DerivedConstants {
    let p = params.pf();
    let alpha = params.alpha();
    let p_alpha = p.powf(alpha);
    let p_neg = p.powf(-alpha - 1.0);

    let gamma_p_neg_alpha = (1.0 - p_neg) / (1.0 - p_alpha);
    let kernel_scale = (p_alpha - 1.0) / (1.0 - p_neg);
    let b_alpha = (1.0 - 1.0 / p) / (1.0 - p_neg);
    let c_alpha = (alpha < 1.0).then(|| {
        let r = (p_alpha - 1.0) / (p - 1.0);
        p.powf(1.0 - alpha) * r * r
    });
    let tail_gamma = (alpha > 1.0).then(|| (alpha - 1.0) / alpha);

    DerivedConstants { gamma_p_neg_alpha, b_alpha, c_alpha, kernel_scale, tail_gamma }
}

/// Outgoing transitions of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorRow {
    targets: Vec<usize>,
    rates: Vec<f64>,
    cumulative: Vec<f64>,
    exit_rate: f64,
}

impl GeneratorRow {
    fn from_pairs(pairs: Vec<(usize, f64)>) -> Self {
        let pairs: Vec<_> = pairs.into_iter().filter(|&(_, r)| r > 0.0).collect();
        let mut cumulative = Vec::with_capacity(pairs.len());
        let mut acc = 0.0;
        for &(_, r) in &pairs {
            acc += r;
            cumulative.push(acc);
        }
        let (targets, rates) = pairs.into_iter().unzip();
        Self { targets, rates, cumulative, exit_rate: acc }
    }

    pub fn exit_rate(&self) -> f64 {
        self.exit_rate
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.targets.iter().copied().zip(self.rates.iter().copied())
    }

    /// Picks a target level given `u` uniform on `[0, 1)`.
    #[inline]
    pub fn select(&self, u: f64) -> usize {
        let x = u * self.exit_rate;
        let idx = self.cumulative.partition_point(|&c| c <= x);
        self.targets[idx.min(self.targets.len() - 1)]
    }
}

/// Transition-rate table of the level process on `{0, ..., K}`.
///
/// Rates, with `C` the kernel prefactor:
/// - `k -> m` for `m > k`: `C (1 - 1/p) p^{-m alpha}`,
/// - `k -> 0` for `k >= 1`: `C p^{-k(alpha+1)}`,
/// - `k -> j` for `1 <= j < k`: `C p^{-k(alpha+1)} p^j (1 - 1/p)`.
///
/// Upward jumps past `K` land on `K`.
#[derive(Debug, Clone)]
pub struct NormChainGenerator {
    params: ModelParams,
    max_level: usize,
    rows: Vec<GeneratorRow>,
}

impl NormChainGenerator {
    pub fn new(params: ModelParams, max_level: usize) -> Result<Self> {
        if max_level < 1 {
            return Err(Error::invalid("max_level must be at least 1"));
        }
        let constants = params.constants();
        let ln_p = params.pf().ln();
        let alpha = params.alpha();
        let ln_c = constants.kernel_scale.ln();
        let ln_one_minus = (1.0 - 1.0 / params.pf()).ln();

        let up_rate = |m: usize| (ln_c + ln_one_minus - m as f64 * alpha * ln_p).exp();
        // Mass of all shells beyond the cutoff, clipped onto level K.
        let q = params.pf().powf(-alpha);
        let clipped = up_rate(max_level + 1) / (1.0 - q);

        let rows = (0..=max_level)
            .map(|k| {
                let mut pairs = Vec::with_capacity(max_level);
                if k > 0 {
                    let ln_down = ln_c - k as f64 * (alpha + 1.0) * ln_p;
                    pairs.push((0, ln_down.exp()));
                    for j in 1..k {
                        pairs.push((j, (ln_down + j as f64 * ln_p + ln_one_minus).exp()));
                    }
                }
                for m in (k + 1)..=max_level {
                    let extra = if m == max_level { clipped } else { 0.0 };
                    pairs.push((m, up_rate(m) + extra));
                }
                GeneratorRow::from_pairs(pairs)
            })
            .collect();

        Ok(Self { params, max_level, rows })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn row(&self, level: usize) -> &GeneratorRow {
        &self.rows[level]
    }

    pub fn rows(&self) -> &[GeneratorRow] {
        &self.rows
    }

    pub fn exit_rate(&self, level: usize) -> f64 {
        self.rows[level].exit_rate
    }

    /// Rate `from -> to`; zero on the diagonal.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rows[from]
            .transitions()
            .find(|&(m, _)| m == to)
            .map_or(0.0, |(_, r)| r)
    }
}

/// Convenience wrapper matching [`NormChainGenerator::new`].
pub fn build_generator(params: ModelParams, max_level: usize) -> Result<NormChainGenerator> {
    NormChainGenerator::new(params, max_level)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn constants_for_p2_alpha2() {
        let c = ModelParams::new(2, 2.0).unwrap().constants();
        assert!(rel(c.b_alpha, 4.0 / 7.0) < 1e-12);
        assert!(rel(c.gamma_p_neg_alpha, -7.0 / 24.0) < 1e-12);
        assert!(rel(c.kernel_scale, 24.0 / 7.0) < 1e-12);
        assert_eq!(c.tail_gamma, Some(0.5));
        assert_eq!(c.c_alpha, None);
    }

    #[test]
    fn c_alpha_for_transient_walk() {
        let c = ModelParams::new(2, 0.5).unwrap().constants();
        let expected = 3.0 * 2f64.sqrt() - 4.0;
        assert!(rel(c.c_alpha.unwrap(), expected) < 1e-12);
        assert_eq!(c.tail_gamma, None);
    }

    #[test]
    fn b_alpha_for_p3() {
        let c = ModelParams::new(3, 2.0).unwrap().constants();
        assert!(rel(c.b_alpha, 9.0 / 13.0) < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(4, 1.0).is_err());
        assert!(ModelParams::new(1, 1.0).is_err());
        assert!(ModelParams::new(2, 0.0).is_err());
        assert!(ModelParams::new(2, f64::NAN).is_err());
        assert!(ModelParams::new(2, -1.0).is_err());
        assert!(ModelParams::new(13, 0.3).is_ok());
    }

    #[test]
    fn both_routes_to_b_alpha_agree() {
        for &p in &[2u32, 3, 5, 7, 11, 13] {
            for &alpha in &[0.1, 0.5, 1.0, 1.5, 2.0, 4.0, 50.0] {
                let params = ModelParams::new(p, alpha).unwrap();
                let c = params.constants();
                assert!(c.gamma_p_neg_alpha < 0.0);
                assert!(rel(c.b_alpha_from_kernel(&params), c.b_alpha) < 1e-12, "p={p} alpha={alpha}");
                if let Some(ca) = c.c_alpha {
                    assert!(ca > 0.0 && ca < 1.0);
                }
            }
        }
    }

    #[test]
    fn generator_rows_for_p2_alpha2() {
        let params = ModelParams::new(2, 2.0).unwrap();
        let g = NormChainGenerator::new(params, DEFAULT_MAX_LEVEL).unwrap();
        assert!(rel(g.exit_rate(0), 4.0 / 7.0) < 1e-12);
        assert!(rel(g.rate(0, 1), 3.0 / 7.0) < 1e-12);
        assert!(rel(g.rate(0, 3), 12.0 / 7.0 / 64.0) < 1e-12);
        assert!(rel(g.rate(0, 1) / g.exit_rate(0), 0.75) < 1e-12);

        assert!(rel(g.rate(1, 0), 3.0 / 7.0) < 1e-12);
        let up: f64 = (2..=g.max_level()).map(|m| g.rate(1, m)).sum();
        assert!(rel(up, 1.0 / 7.0) < 1e-12);
        assert!(rel(g.exit_rate(1), 4.0 / 7.0) < 1e-12);
    }

    #[test]
    fn row_structure() {
        let params = ModelParams::new(3, 1.5).unwrap();
        let g = NormChainGenerator::new(params, 12).unwrap();
        for (k, row) in g.rows().iter().enumerate() {
            let sum: f64 = row.transitions().map(|(_, r)| r).sum();
            assert!(rel(sum, row.exit_rate()) < 1e-12);
            assert!(row.transitions().all(|(m, r)| m != k && r >= 0.0));
        }
        // upward rates do not depend on the source level
        for m in 3..12 {
            assert!(rel(g.rate(1, m), g.rate(2, m)) < 1e-14);
            assert!(rel(g.rate(0, m), g.rate(2, m)) < 1e-14);
        }
        for m in 1..11 {
            assert!(g.rate(0, m) > g.rate(0, m + 1));
            assert!(g.rate(m, 0) > g.rate(m + 1, 0));
        }
    }

    #[test]
    fn row_select_covers_targets() {
        let params = ModelParams::new(2, 2.0).unwrap();
        let g = NormChainGenerator::new(params, 6).unwrap();
        let row = g.row(0);
        assert_eq!(row.select(0.0), 1);
        assert_eq!(row.select(0.7499), 1);
        assert_eq!(row.select(0.7501), 2);
        assert_eq!(row.select(1.0 - 1e-16), 6);
    }

    #[test]
    fn huge_alpha_rows_stay_finite() {
        let params = ModelParams::new(2, 50.0).unwrap();
        let g = NormChainGenerator::new(params, DEFAULT_MAX_LEVEL).unwrap();
        for row in g.rows() {
            assert!(row.exit_rate().is_finite());
        }
        assert!(rel(g.exit_rate(0), params.constants().b_alpha) < 1e-12);
    }
}
