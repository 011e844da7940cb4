//! Closed forms and series of the sojourn-time theory.
//!
//! Everything here flows through the survival-probability series
//! `J(t) = (1 - 1/p) sum_n p^{-n} exp(-p^{-alpha n} t)`: its transform, the
//! first-return transform built on it, the Erlang law of the `Z_p` holding
//! times, the sojourn-time CDF, and the one-sided stable law of the scaling
//! limit.

mod erlang;
mod sojourn;
mod stable;
mod survival;

pub use erlang::{g_n_cdf, poisson_weight};
pub use sojourn::{complement_sojourn_cdf, poisson_cutoff, sojourn_cdf};
pub use stable::{
    stable_survival_series,
    stable_density_quadrature, stable_density_series, stable_leading_term, stable_survival,
    STABLE_SERIES_FLOOR,
};
pub use survival::{
    f_hat, f_hat_complex, h_hat_complex, h_n_hat, j_derivative, j_hat, j_hat_complex, mean_sojourn,
    survival_j, v_rate,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation policy shared by the infinite-series evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { abs_tol: 1e-16, rel_tol: 1e-15, max_terms: 20_000 }
    }
}

impl SeriesControl {
    pub fn new(abs_tol: f64, rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(abs_tol > 0.0 && rel_tol > 0.0) {
            return Err(Error::invalid("series tolerances must be positive"));
        }
        if max_terms < 8 {
            return Err(Error::invalid("max_terms must be at least 8"));
        }
        Ok(Self { abs_tol, rel_tol, max_terms })
    }

    pub(crate) fn done(&self, tail_bound: f64, sum: f64) -> bool {
        tail_bound <= self.abs_tol.max(self.rel_tol * sum.abs())
    }
}
