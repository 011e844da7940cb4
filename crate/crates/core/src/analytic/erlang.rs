use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::model::ModelParams;

/// CDF of the total length of `n` holding times in `Z_p` (Erlang with rate
/// `B_alpha`), `G_n(t) = 1 - sum_{m<n} (B t)^m e^{-B t} / m!`.
pub fn g_n_cdf(t: f64, n: u32, params: &ModelParams) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if !(t > 0.0) {
        return 0.0;
    }
    let x = params.constants().b_alpha * t;
    // Regularized incomplete gamma; the complement side keeps small values exact.
    if x < n as f64 {
        gamma_lr(n as f64, x).clamp(0.0, 1.0)
    } else {
        (1.0 - gamma_ur(n as f64, x)).clamp(0.0, 1.0)
    }
}

/// `G_n(theta) - G_{n+1}(theta)`: the Poisson pmf with mean `B_alpha theta`.
pub fn poisson_weight(n: u32, theta: f64, params: &ModelParams) -> f64 {
    poisson_pmf(n, params.constants().b_alpha * theta.max(0.0))
}

pub(crate) fn poisson_pmf(n: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    (nf * mean.ln() - mean - ln_gamma(nf + 1.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p22() -> ModelParams {
        ModelParams::new(2, 2.0).unwrap()
    }

    #[test]
    fn erlang_values() {
        let t = 7.0 / 4.0;
        assert!((g_n_cdf(t, 1, &p22()) - (1.0 - (-1f64).exp())).abs() < 1e-14);
        assert!((g_n_cdf(t, 2, &p22()) - (1.0 - 2.0 / std::f64::consts::E)).abs() < 1e-14);
        assert_eq!(g_n_cdf(0.0, 5, &p22()), 0.0);
        for n in 1..20 {
            assert!(g_n_cdf(3.0, n + 1, &p22()) < g_n_cdf(3.0, n, &p22()));
        }
    }

    #[test]
    fn poisson_weights() {
        assert_eq!(poisson_weight(0, 0.0, &p22()), 1.0);
        assert_eq!(poisson_weight(3, 0.0, &p22()), 0.0);
        let theta = 7.0 / 4.0;
        let w1 = poisson_weight(1, theta, &p22());
        assert!((w1 - (-1f64).exp()).abs() < 1e-15);
        assert!((w1 - (g_n_cdf(theta, 1, &p22()) - g_n_cdf(theta, 2, &p22()))).abs() < 1e-14);
        for &theta in &[0.5, 5.0, 50.0] {
            let total: f64 = (0..200).map(|n| poisson_weight(n, theta, &p22())).sum();
            assert!((total - 1.0).abs() < 1e-12, "theta {theta}: {total}");
        }
    }

    #[test]
    fn difference_identity_holds_at_large_mean() {
        let theta = 400.0;
        for n in [200u32, 228, 260] {
            let diff = g_n_cdf(theta, n, &p22()) - g_n_cdf(theta, n + 1, &p22());
            let w = poisson_weight(n, theta, &p22());
            assert!((diff - w).abs() < 1e-12);
        }
    }
}
