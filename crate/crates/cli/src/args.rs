use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::grid::Grid;
use crate::output::Format;

/// Sojourn times of the p-adic random walk in Z_p: closed forms, Laplace
/// inversion, Monte Carlo and the spectral-width model.
///
/// Output is CSV (default) or JSON, preceded in CSV by `# key=value`
/// metadata lines. Without --out it goes to $PADIC_SOJOURN_OUT_DIR/<name>.<ext>
/// when that variable is set, otherwise to standard output.
///
/// Exit codes: 0 success, 2 bad flags or parameters, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "padic-sojourn", version, about, long_about)]
pub struct Cli {
    /// Worker threads for path ensembles (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Model {
    /// Prime p.
    #[arg(long, default_value_t = 2)]
    pub p: u32,
    /// Order alpha > 0 of the Vladimirov operator.
    #[arg(long)]
    pub alpha: f64,
}

#[derive(Debug, Args, Clone)]
pub struct Output {
    /// Output file (written atomically).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Talbot,
    Stehfest,
}

#[derive(Debug, Args, Clone)]
pub struct Inversion {
    /// Laplace inversion rule.
    #[arg(long, value_enum, default_value_t = Method::Talbot)]
    pub method: Method,
    /// Rule order (Talbot >= 16, default 32; Stehfest even in 8..=20, default 14).
    #[arg(long)]
    pub order: Option<usize>,
    /// Digits the error estimate must certify.
    #[arg(long)]
    pub work_precision: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct Ensemble {
    #[arg(long, default_value_t = 10_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived constants B_alpha, Gamma_p(-alpha), C_alpha, kernel scale, gamma (JSON by default).
    ///
    /// Columns: p, alpha, b_alpha, gamma_p_neg_alpha, c_alpha, kernel_scale, gamma.
    Constants {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        output: Output,
    },
    /// Evaluates a closed form on a grid.
    ///
    /// Columns: `t, value` (j, v, mean, g-n), `s, value` (transforms),
    /// `theta, value` (poisson), `theta, t, value` (sojourn CDFs) and
    /// `t, gamma, value` (stable quantities). n goes in the header.
    Eval(Eval),
    /// Inverts a Laplace transform numerically.
    ///
    /// Columns: t, value, est_error, method, order.
    Invert(Invert),
    /// Simulates independent paths of the level chain.
    ///
    /// Columns: seed, horizon, sojourn, complement_sojourn, first_return
    /// (empty if absent), returned, visits_to_zero, max_level. `seed` is the
    /// per-path seed derived from --seed and the path index; it replays the
    /// path on its own.
    Simulate {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        horizon: f64,
        #[command(flatten)]
        ensemble: Ensemble,
        /// Level cutoff K of the chain.
        #[arg(long, default_value_t = padic_sojourn::DEFAULT_MAX_LEVEL)]
        max_level: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Validation experiments tying simulation to the closed forms.
    #[command(subcommand)]
    Experiment(Experiment),
    /// Spectral hole widths by subordination to the sojourn time.
    #[command(subcommand)]
    Spectral(Spectral),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// Survival probability J(t) in Z_p.
    J,
    /// Inflow rate v(t) into Z_p.
    V,
    /// Mean sojourn time up to t.
    Mean,
    /// Laplace transform of J at real s.
    JHat,
    /// Laplace transform of the first-return density at real s.
    FHat,
    /// n-th power of the excursion-length transform at real s.
    HNHat,
    /// Erlang CDF G_n(t).
    GN,
    /// Poisson weight G_n(theta) - G_{n+1}(theta).
    Poisson,
    /// P(sojourn < theta) up to t.
    SojournCdf,
    /// P(time outside Z_p <= theta) up to t.
    ComplementCdf,
    /// One-sided stable density.
    StableDensity,
    /// One-sided stable survival 1 - F_gamma.
    StableSurvival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StableMethod {
    Series,
    Quadrature,
}

#[derive(Debug, Args)]
pub struct Eval {
    #[arg(value_enum)]
    pub quantity: Quantity,
    /// Model parameters (not used by the stable quantities).
    #[arg(long, default_value_t = 2)]
    pub p: u32,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Single time (or stable argument).
    #[arg(long)]
    pub t: Option<f64>,
    /// Grid of times: `a,b,c`, `log:LO:HI:N` or `lin:LO:HI:N`.
    #[arg(long)]
    pub t_grid: Option<Grid>,
    /// Transform argument(s).
    #[arg(long)]
    pub s: Option<Grid>,
    /// Sojourn level(s) theta.
    #[arg(long)]
    pub theta: Option<Grid>,
    #[arg(long)]
    pub n: Option<u32>,
    /// Stable index in (0, 1).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value_t = StableMethod::Quadrature)]
    pub stable_method: StableMethod,
    #[command(flatten)]
    pub inversion: Inversion,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// Survival J from its transform (calibration).
    J,
    /// First-return density f.
    F,
    /// First-return CDF.
    FCdf,
    /// Density h_n of the total length of n excursions.
    HN,
    /// CDF H_n.
    HNCdf,
}

#[derive(Debug, Args)]
pub struct Invert {
    #[arg(value_enum)]
    pub target: Target,
    #[command(flatten)]
    pub model: Model,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub t_grid: Option<Grid>,
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    #[command(flatten)]
    pub inversion: Inversion,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Monte Carlo mean sojourn time against the closed form.
    ///
    /// Columns: experiment, p, alpha, t, value, stderr, n, reference.
    MeanSojourn {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[command(flatten)]
        ensemble: Ensemble,
        #[command(flatten)]
        output: Output,
    },
    /// Fractional moments <theta^beta>(t) and their log-log slopes.
    ///
    /// Columns: experiment, p, alpha, beta, t, value, stderr, n.
    /// Fit file (--fit-out): beta, t_lo, t_hi, slope, slope_stderr, predicted_slope.
    Moments {
        #[command(flatten)]
        model: Model,
        /// Moment orders.
        #[arg(long, default_value = "1,2,3")]
        beta: Grid,
        #[arg(long, default_value = "log:1e2:1e5:10")]
        t_grid: Grid,
        #[command(flatten)]
        ensemble: Ensemble,
        #[arg(long)]
        fit_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Survival function of the first return time and its power-law slope.
    ///
    /// Columns: experiment, p, alpha, t, value, stderr, n.
    /// Fit file (--fit-out): t_lo, t_hi, slope, slope_stderr, predicted_slope.
    Tail {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 1e5)]
        horizon: f64,
        #[arg(long, default_value_t = 1e2)]
        t_lo: f64,
        #[arg(long, default_value_t = 1e5)]
        t_hi: f64,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[command(flatten)]
        ensemble: Ensemble,
        #[arg(long)]
        fit_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Survival in Z_p: series, ODE oracle on the truncated chain, and Monte Carlo.
    ///
    /// Columns: experiment, p, alpha, t, value, ode, mc, stderr, n.
    Survival {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "lin:0:50:101")]
        t_grid: Grid,
        #[command(flatten)]
        ensemble: Ensemble,
        #[arg(long, default_value_t = padic_sojourn::DEFAULT_MAX_LEVEL)]
        max_level: usize,
        /// Local error tolerance of the ODE integrator.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Empirical sojourn-time CDF against the series/inversion CDF, with KS distance in the header.
    ///
    /// Columns: experiment, p, alpha, t, theta, value, model, n.
    SojournCdf {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 10.0)]
        t: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[command(flatten)]
        ensemble: Ensemble,
        #[command(flatten)]
        inversion: Inversion,
        #[command(flatten)]
        output: Output,
    },
    /// Fraction of paths whose first excursion is unfinished at the horizon.
    ///
    /// Columns: experiment, p, alpha, horizon, value, stderr, n, reference.
    NeverReturn {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 1e6)]
        horizon: f64,
        #[command(flatten)]
        ensemble: Ensemble,
        #[command(flatten)]
        output: Output,
    },
    /// Residual of the renewal equation between v and f.
    ///
    /// Columns: experiment, p, alpha, t, value.
    Volterra {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "0.5,1,2,5,10")]
        t_grid: Grid,
        #[command(flatten)]
        inversion: Inversion,
        #[command(flatten)]
        output: Output,
    },
    /// One-parameter fit of the stable scaling limit of theta(t) / t^gamma.
    ///
    /// Columns: experiment, p, alpha, t, gamma, b_fit, ks_distance, n.
    LimitLaw {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "1e4,2e4")]
        t_grid: Grid,
        #[command(flatten)]
        ensemble: Ensemble,
        #[command(flatten)]
        output: Output,
    },
    /// Stable density by series and by quadrature on one grid.
    ///
    /// Columns: experiment, gamma, t, series, quadrature. The series column
    /// is empty below its floor t = 0.5.
    Stable {
        #[arg(long, default_value = "0.25,0.5,0.75")]
        gamma: Grid,
        #[arg(long, default_value = "log:0.05:100:60")]
        t_grid: Grid,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args, Clone)]
pub struct SpectralModel {
    /// Self-similarity exponent of the frequency process, in (0, 1).
    #[arg(long, default_value_t = padic_sojourn::spectral::DEFAULT_H)]
    pub h: f64,
    /// Variance scale D.
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    #[command(flatten)]
    pub model: Model,
}

#[derive(Debug, Subcommand)]
pub enum Spectral {
    /// Hole width sigma(t).
    ///
    /// Columns: t, t_a, sigma, stderr, n (t_a = 0). The fitted slope is in the header.
    Width {
        #[command(flatten)]
        spectral: SpectralModel,
        #[arg(long, default_value = "log:1e2:1e5:10")]
        t_grid: Grid,
        #[command(flatten)]
        ensemble: Ensemble,
        #[command(flatten)]
        output: Output,
    },
    /// Aged hole width sigma(t, t_a) from sojourn increments.
    ///
    /// Columns: t, t_a, sigma, stderr, n. The fitted slope in t_a is in the header.
    Ageing {
        #[command(flatten)]
        spectral: SpectralModel,
        #[arg(long, default_value_t = 10.0)]
        t: f64,
        #[arg(long, default_value = "log:1e3:1e6:10")]
        ta_grid: Grid,
        #[command(flatten)]
        ensemble: Ensemble,
        #[command(flatten)]
        output: Output,
    },
    /// alpha inferred from observed width and ageing exponents (JSON by default).
    ///
    /// Columns: b_obs, c_obs, alpha_inferred, alpha_consistent, h_consistent.
    Exponents {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        #[command(flatten)]
        output: Output,
    },
}
