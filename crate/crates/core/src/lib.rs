//! Sojourn times of a p-adic random walk in the ring of integers `Z_p`.
//!
//! The walk is lumped onto its ball levels: level 0 is `Z_p` and level `k`
//! is the sphere `|x|_p = p^k`. On top of that chain sit
//!
//! - closed-form evaluators for the survival probability, transforms, the
//!   sojourn-time CDF and its mean, and the one-sided stable law ([`analytic`]),
//! - numerical Laplace inversion for the quantities only known in the
//!   transform domain ([`laplace`]),
//! - an exact event-driven simulator of the level chain ([`simulate`]),
//! - the estimators and cross-checks tying the two together ([`experiments`]),
//! - the spectral-diffusion width model ([`spectral`]).

pub mod analytic;
pub mod error;
pub mod experiments;
pub mod laplace;
pub mod model;
pub mod quad;
pub mod simulate;
pub mod spectral;

pub use analytic::SeriesControl;
pub use error::{Error, Result};
pub use experiments::{Estimate, KsReport, PowerLawFit};
pub use laplace::{InversionKind, InversionMethod, InversionReport};
pub use model::{DerivedConstants, ModelParams, NormChainGenerator, DEFAULT_MAX_LEVEL};
pub use simulate::{PathRecord, Trajectory, TrajectoryFunctionals};
pub use spectral::{SpectralParams, WidthRow, WidthTable};
