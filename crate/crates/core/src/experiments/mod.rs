//! Estimators and validation harnesses that tie the simulator to the
//! closed forms: moments and their growth exponents, first-return tails,
//! sojourn CDF goodness of fit, the renewal-equation residual, an ODE oracle
//! for the level generator, and the scaling-limit fit.

mod limit;
pub(crate) mod mc;
mod ode;
mod stats;
mod volterra;

pub use limit::{fit_limit_law, limit_law_check, LimitLawFit, LimitLawTable};
pub use mc::{
    empirical_survival, estimate_moment, first_return_ks, first_return_samples, first_return_tail,
    first_return_tail_prediction, mean_sojourn_mc, moment_curve, moment_exponent_prediction, moment_scaling_report,
    never_return_fraction, sojourn_cdf_ks, sojourn_samples, KsReport, MomentFit, TailReport,
};
pub use ode::ode_survival_oracle;
pub use stats::{
    fit_power_law, ks_critical_1pct, ks_distance, ks_from_sorted, ks_p_value, log_grid, Estimate, PowerLawFit,
};
pub use volterra::{volterra_residual, volterra_residual_at};
