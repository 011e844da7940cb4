use std::path::Path;

use anyhow::{bail, Result};
use padic_sojourn::analytic::{
    complement_sojourn_cdf, f_hat, g_n_cdf, h_n_hat, j_hat, j_hat_complex, mean_sojourn, poisson_weight,
    sojourn_cdf, stable_density_quadrature, stable_density_series, stable_survival, stable_survival_series,
    survival_j, v_rate, STABLE_SERIES_FLOOR,
};
use padic_sojourn::experiments::{
    empirical_survival, first_return_tail, limit_law_check, mean_sojourn_mc, moment_scaling_report,
    never_return_fraction, ode_survival_oracle, sojourn_cdf_ks, sojourn_samples, volterra_residual_at,
};
use padic_sojourn::laplace::{first_return_cdf, first_return_density, h_n_time, invert};
use padic_sojourn::simulate::simulate_ensemble;
use padic_sojourn::spectral::{ageing_width, exponent_report, hole_width, SpectralParams, WidthTable};
use padic_sojourn::{InversionKind, InversionMethod, ModelParams, NormChainGenerator, SeriesControl, DEFAULT_MAX_LEVEL};

use crate::args::{
    Command, Ensemble, Eval, Experiment, Inversion, Invert, Method, Model, Output, Quantity, Spectral,
    SpectralModel, StableMethod, Target,
};
use crate::output::{emit, Cell, Format, Meta, Table};

/// A flag combination clap cannot check on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

fn model(m: &Model) -> Result<ModelParams> {
    Ok(ModelParams::new(m.p, m.alpha)?)
}

fn model_meta(meta: &mut Meta, m: &Model) {
    meta.set("p", m.p).set("alpha", m.alpha);
}

fn ensemble_meta(meta: &mut Meta, e: &Ensemble) {
    meta.set("n_paths", e.n_paths as u64).set("seed", e.seed);
}

fn method(inv: &Inversion, meta: &mut Meta) -> Result<InversionMethod> {
    let kind = match inv.method {
        Method::Talbot => InversionKind::Talbot,
        Method::Stehfest => InversionKind::Stehfest,
    };
    let order = inv.order.unwrap_or(match kind {
        InversionKind::Talbot => InversionMethod::DEFAULT_TALBOT_ORDER,
        InversionKind::Stehfest => InversionMethod::DEFAULT_STEHFEST_ORDER,
    });
    let mut m = InversionMethod::new(kind, order)?;
    if let Some(wp) = inv.work_precision {
        m = m.with_work_precision(wp)?;
    }
    meta.set("method", kind.to_string()).set("order", order as u64).set("work_precision", m.work_precision);
    Ok(m)
}

fn emit_to(table: &Table, meta: &Meta, output: &Output, default: Format, name: &str) -> Result<()> {
    emit(table, meta, output.format.unwrap_or(default), output.out.as_deref(), name)
}

fn times(t: Option<f64>, grid: Option<&crate::grid::Grid>, flag: &str) -> Result<Vec<f64>> {
    match (t, grid) {
        (Some(_), Some(_)) => usage(format!("give --{flag} or --{flag}-grid, not both")),
        (Some(t), None) => Ok(vec![t]),
        (None, Some(g)) => Ok(g.0.clone()),
        (None, None) => usage(format!("--{flag} or --{flag}-grid is required")),
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Constants { model: m, output } => constants(&m, &output),
        Command::Eval(e) => eval(e),
        Command::Invert(i) => invert_cmd(i),
        Command::Simulate { model: m, horizon, ensemble, max_level, output } => {
            let params = model(&m)?;
            let gen = NormChainGenerator::new(params, max_level)?;
            let records = simulate_ensemble(&gen, horizon, ensemble.n_paths, ensemble.seed)?;
            let mut meta = Meta::new("simulate");
            model_meta(&mut meta, &m);
            meta.set("horizon", horizon).set("max_level", max_level as u64);
            ensemble_meta(&mut meta, &ensemble);
            let mut table = Table::new(&[
                "seed",
                "horizon",
                "sojourn",
                "complement_sojourn",
                "first_return",
                "returned",
                "visits_to_zero",
                "max_level",
            ]);
            for r in records {
                let f = r.functionals;
                table.push(vec![
                    r.seed.into(),
                    r.horizon.into(),
                    f.sojourn.into(),
                    f.complement_sojourn.into(),
                    f.first_return.into(),
                    f.returned.into(),
                    f.visits_to_zero.into(),
                    f.max_level.into(),
                ]);
            }
            emit_to(&table, &meta, &output, Format::Csv, "simulate")
        }
        Command::Experiment(e) => experiment(e),
        Command::Spectral(s) => spectral(s),
    }
}

fn constants(m: &Model, output: &Output) -> Result<()> {
    let params = model(m)?;
    let c = params.constants();
    let mut meta = Meta::new("constants");
    model_meta(&mut meta, m);
    let mut table =
        Table::new(&["p", "alpha", "b_alpha", "gamma_p_neg_alpha", "c_alpha", "kernel_scale", "gamma"]);
    table.push(vec![
        m.p.into(),
        m.alpha.into(),
        c.b_alpha.into(),
        c.gamma_p_neg_alpha.into(),
        c.c_alpha.into(),
        c.kernel_scale.into(),
        c.tail_gamma.into(),
    ]);
    emit_to(&table, &meta, output, Format::Json, "constants")
}

fn eval(e: Eval) -> Result<()> {
    let ctrl = SeriesControl::default();
    let mut meta = Meta::new("eval");
    meta.set("quantity", format!("{:?}", e.quantity));
    let stable = matches!(e.quantity, Quantity::StableDensity | Quantity::StableSurvival);
    let params = if stable {
        None
    } else {
        let Some(alpha) = e.alpha else {
            return usage("--alpha is required for this quantity");
        };
        let m = Model { p: e.p, alpha };
        model_meta(&mut meta, &m);
        Some(model(&m)?)
    };
    let need_n = || -> Result<u32> {
        match e.n {
            Some(n) => Ok(n),
            None => usage("--n is required for this quantity"),
        }
    };
    let mut table;
    match e.quantity {
        Quantity::J | Quantity::V | Quantity::Mean | Quantity::GN => {
            let m = params.as_ref().expect("model");
            let ts = times(e.t, e.t_grid.as_ref(), "t")?;
            let n = if e.quantity == Quantity::GN { Some(need_n()?) } else { None };
            if let Some(n) = n {
                meta.set("n", n);
            }
            table = Table::new(&["t", "value"]);
            for t in ts {
                let v = match e.quantity {
                    Quantity::J => survival_j(t, m, &ctrl)?,
                    Quantity::V => v_rate(t, m, &ctrl)?,
                    Quantity::Mean => mean_sojourn(t, m, &ctrl)?,
                    _ => g_n_cdf(t, n.unwrap_or(0), m),
                };
                table.push(vec![t.into(), v.into()]);
            }
        }
        Quantity::JHat | Quantity::FHat | Quantity::HNHat => {
            let m = params.as_ref().expect("model");
            let Some(s_grid) = &e.s else {
                return usage("--s is required for transforms");
            };
            let n = if e.quantity == Quantity::HNHat { Some(need_n()?) } else { None };
            if let Some(n) = n {
                meta.set("n", n);
            }
            table = Table::new(&["s", "value"]);
            for &s in &s_grid.0 {
                let v = match e.quantity {
                    Quantity::JHat => j_hat(s, m, &ctrl)?,
                    Quantity::FHat => f_hat(s, m, &ctrl)?,
                    _ => h_n_hat(s, n.unwrap_or(0), m, &ctrl)?,
                };
                table.push(vec![s.into(), v.into()]);
            }
        }
        Quantity::Poisson => {
            let m = params.as_ref().expect("model");
            let Some(theta) = &e.theta else {
                return usage("--theta is required");
            };
            let n = need_n()?;
            meta.set("n", n);
            table = Table::new(&["theta", "value"]);
            for &th in &theta.0 {
                table.push(vec![th.into(), poisson_weight(n, th, m).into()]);
            }
        }
        Quantity::SojournCdf | Quantity::ComplementCdf => {
            let m = params.as_ref().expect("model");
            let (Some(t), Some(theta)) = (e.t, &e.theta) else {
                return usage("--t and --theta are required for sojourn CDFs");
            };
            let im = method(&e.inversion, &mut meta)?;
            table = Table::new(&["theta", "t", "value"]);
            for &th in &theta.0 {
                let v = if e.quantity == Quantity::SojournCdf {
                    sojourn_cdf(th, t, m, im, &ctrl)?
                } else {
                    complement_sojourn_cdf(th, t, m, im, &ctrl)?
                };
                table.push(vec![th.into(), t.into(), v.into()]);
            }
        }
        Quantity::StableDensity | Quantity::StableSurvival => {
            let Some(g) = e.gamma else {
                return usage("--gamma is required for stable quantities");
            };
            let ts = times(e.t, e.t_grid.as_ref(), "t")?;
            meta.set("gamma", g).set("stable_method", format!("{:?}", e.stable_method).to_lowercase());
            table = Table::new(&["t", "gamma", "value"]);
            for t in ts {
                let v = match (e.quantity, e.stable_method) {
                    (Quantity::StableDensity, StableMethod::Series) => stable_density_series(t, g, &ctrl)?,
                    (Quantity::StableDensity, StableMethod::Quadrature) => stable_density_quadrature(t, g)?,
                    (_, StableMethod::Series) => stable_survival_series(t, g, &ctrl)?,
                    (_, StableMethod::Quadrature) => stable_survival(t, g)?,
                };
                table.push(vec![t.into(), g.into(), v.into()]);
            }
        }
    }
    emit_to(&table, &meta, &e.output, Format::Csv, "eval")
}

fn invert_cmd(i: Invert) -> Result<()> {
    let ctrl = SeriesControl::default();
    let params = model(&i.model)?;
    let mut meta = Meta::new("invert");
    meta.set("target", format!("{:?}", i.target));
    model_meta(&mut meta, &i.model);
    let im = method(&i.inversion, &mut meta)?;
    if matches!(i.target, Target::HN | Target::HNCdf) {
        if i.n == 0 {
            return usage("--n must be at least 1");
        }
        meta.set("n", i.n);
    }
    let mut table = Table::new(&["t", "value", "est_error", "method", "order"]);
    for t in times(i.t, i.t_grid.as_ref(), "t")? {
        let r = match i.target {
            Target::J => invert(|s| j_hat_complex(s, &params, &ctrl), t, im)?,
            Target::F => first_return_density(t, &params, im, &ctrl)?,
            Target::FCdf => first_return_cdf(t, &params, im, &ctrl)?,
            Target::HN => h_n_time(t, i.n, &params, im, &ctrl)?.density,
            Target::HNCdf => h_n_time(t, i.n, &params, im, &ctrl)?.cdf,
        };
        table.push(vec![
            r.t.into(),
            r.value.into(),
            r.est_error.into(),
            r.method.kind.to_string().into(),
            r.method.order.into(),
        ]);
    }
    emit_to(&table, &meta, &i.output, Format::Csv, "invert")
}

fn fit_table(rows: &[(Option<f64>, padic_sojourn::PowerLawFit)], with_beta: bool) -> Table {
    let mut table = if with_beta {
        Table::new(&["beta", "t_lo", "t_hi", "slope", "slope_stderr", "predicted_slope"])
    } else {
        Table::new(&["t_lo", "t_hi", "slope", "slope_stderr", "predicted_slope"])
    };
    for (beta, f) in rows {
        let mut row: Vec<Cell> = Vec::new();
        if with_beta {
            row.push((*beta).into());
        }
        row.extend([
            f.t_range.0.into(),
            f.t_range.1.into(),
            f.slope.into(),
            f.slope_stderr.into(),
            f.predicted_slope.into(),
        ]);
        table.push(row);
    }
    table
}

fn write_fit(table: &Table, meta: &Meta, path: Option<&Path>) -> Result<()> {
    if let Some(path) = path {
        emit(table, meta, Format::Csv, Some(path), "fit")?;
    }
    Ok(())
}

fn experiment(e: Experiment) -> Result<()> {
    let ctrl = SeriesControl::default();
    match e {
        Experiment::MeanSojourn { model: m, t, ensemble, output } => {
            let params = model(&m)?;
            let est = mean_sojourn_mc(&params, t, ensemble.n_paths, ensemble.seed)?;
            let reference = mean_sojourn(t, &params, &ctrl)?;
            let mut meta = Meta::new("experiment mean-sojourn");
            model_meta(&mut meta, &m);
            ensemble_meta(&mut meta, &ensemble);
            meta.set("z_score", est.z_score(reference));
            let mut table = Table::new(&["experiment", "p", "alpha", "t", "value", "stderr", "n", "reference"]);
            table.push(vec![
                "mean_sojourn".into(),
                m.p.into(),
                m.alpha.into(),
                t.into(),
                est.value.into(),
                est.stderr.into(),
                est.n.into(),
                reference.into(),
            ]);
            emit_to(&table, &meta, &output, Format::Csv, "mean_sojourn")
        }
        Experiment::Moments { model: m, beta, t_grid, ensemble, fit_out, output } => {
            let params = model(&m)?;
            let fits = moment_scaling_report(&params, &beta.0, &t_grid.0, ensemble.n_paths, ensemble.seed)?;
            let mut meta = Meta::new("experiment moments");
            model_meta(&mut meta, &m);
            ensemble_meta(&mut meta, &ensemble);
            let mut table = Table::new(&["experiment", "p", "alpha", "beta", "t", "value", "stderr", "n"]);
            for f in &fits {
                for (t, est) in f.times.iter().zip(&f.estimates) {
                    table.push(vec![
                        "moments".into(),
                        m.p.into(),
                        m.alpha.into(),
                        f.beta.into(),
                        (*t).into(),
                        est.value.into(),
                        est.stderr.into(),
                        est.n.into(),
                    ]);
                }
            }
            let rows: Vec<_> = fits.iter().map(|f| (Some(f.beta), f.fit)).collect();
            write_fit(&fit_table(&rows, true), &meta, fit_out.as_deref())?;
            emit_to(&table, &meta, &output, Format::Csv, "moments")
        }
        Experiment::Tail { model: m, horizon, t_lo, t_hi, points, ensemble, fit_out, output } => {
            let params = model(&m)?;
            let report = first_return_tail(&params, horizon, (t_lo, t_hi), points, ensemble.n_paths, ensemble.seed)?;
            let mut meta = Meta::new("experiment tail");
            model_meta(&mut meta, &m);
            ensemble_meta(&mut meta, &ensemble);
            meta.set("horizon", horizon).set("conditional", report.conditional).set("returned", report.returned);
            let denom = if report.conditional { report.returned } else { report.n } as f64;
            let mut table = Table::new(&["experiment", "p", "alpha", "t", "value", "stderr", "n"]);
            for (t, s) in report.times.iter().zip(&report.survival) {
                table.push(vec![
                    "tail".into(),
                    m.p.into(),
                    m.alpha.into(),
                    (*t).into(),
                    (*s).into(),
                    (s * (1.0 - s) / denom).sqrt().into(),
                    (denom as u64).into(),
                ]);
            }
            write_fit(&fit_table(&[(None, report.fit)], false), &meta, fit_out.as_deref())?;
            emit_to(&table, &meta, &output, Format::Csv, "tail")
        }
        Experiment::Survival { model: m, t_grid, ensemble, max_level, tol, output } => {
            let params = model(&m)?;
            let gen = NormChainGenerator::new(params, max_level)?;
            let mut ts = t_grid.0.clone();
            ts.sort_by(f64::total_cmp);
            let ode = ode_survival_oracle(&gen, &ts, tol)?;
            let mc = if ensemble.n_paths > 0 { Some(empirical_survival(&gen, &ts, ensemble.n_paths, ensemble.seed)?) } else { None };
            let mut meta = Meta::new("experiment survival");
            model_meta(&mut meta, &m);
            ensemble_meta(&mut meta, &ensemble);
            meta.set("max_level", max_level as u64).set("tol", tol);
            let mut table = Table::new(&["experiment", "p", "alpha", "t", "value", "ode", "mc", "stderr", "n"]);
            for (i, &t) in ts.iter().enumerate() {
                let est = mc.as_ref().map(|v| v[i]);
                table.push(vec![
                    "survival".into(),
                    m.p.into(),
                    m.alpha.into(),
                    t.into(),
                    survival_j(t, &params, &ctrl)?.into(),
                    ode[i].1.into(),
                    est.map(|e| e.value).into(),
                    est.map(|e| e.stderr).into(),
                    est.map(|e| e.n).into(),
                ]);
            }
            emit_to(&table, &meta, &output, Format::Csv, "survival")
        }
        Experiment::SojournCdf { model: m, t, points, ensemble, inversion, output } => {
            let params = model(&m)?;
            if points < 2 {
                return usage("--points must be at least 2");
            }
            let mut meta = Meta::new("experiment sojourn-cdf");
            model_meta(&mut meta, &m);
            ensemble_meta(&mut meta, &ensemble);
            let im = method(&inversion, &mut meta)?;
            let gen = NormChainGenerator::new(params, DEFAULT_MAX_LEVEL)?;
            let mut xs = sojourn_samples(&gen, &[t], ensemble.n_paths, ensemble.seed)?.remove(0);
            xs.sort_by(f64::total_cmp);
            let ks = sojourn_cdf_ks(&params, t, ensemble.n_paths, ensemble.seed, im, &ctrl)?;
            meta.set("ks_distance", ks.distance).set("ks_critical_1pct", ks.critical_1pct).set("ks_p_value", ks.p_value);
            let n = xs.len() as f64;
            let mut table = Table::new(&["experiment", "p", "alpha", "t", "theta", "value", "model", "n"]);
            for i in 0..points {
                let theta = t * i as f64 / points as f64;
                let below = xs.partition_point(|&x| x < theta) as f64 / n;
                table.push(vec![
                    "sojourn_cdf".into(),
                    m.p.into(),
                    m.alpha.into(),
                    t.into(),
                    theta.into(),
                    below.into(),
                    sojourn_cdf(theta, t, &params, im, &ctrl)?.into(),
                    (xs.len() as u64).into(),
                ]);
            }
            emit_to(&table, &meta, &output, Format::Csv, "sojourn_cdf")
        }
        Experiment::NeverReturn { model: m, horizon, ensemble, output } => {
            let params = model(&m)?;
            let est = never_return_fraction(&params, horizon, ensemble.n_paths, ensemble.seed)?;
            let reference = params.constants().c_alpha.map(|c| 1.0 - c).unwrap_or(0.0);
            let mut meta = Meta::new("experiment never-return");
            model_meta(&mut meta, &m);
            ensemble_meta(&mut meta, &ensemble);
            let mut table = Table::new(&["experiment", "p", "alpha", "horizon", "value", "stderr", "n", "reference"]);
            table.push(vec![
                "never_return".into(),
                m.p.into(),
                m.alpha.into(),
                horizon.into(),
                est.value.into(),
                est.stderr.into(),
                est.n.into(),
                reference.into(),
            ]);
            emit_to(&table, &meta, &output, Format::Csv, "never_return")
        }
        Experiment::Volterra { model: m, t_grid, inversion, output } => {
            let params = model(&m)?;
            let mut meta = Meta::new("experiment volterra");
            model_meta(&mut meta, &m);
            let im = method(&inversion, &mut meta)?;
            let mut table = Table::new(&["experiment", "p", "alpha", "t", "value"]);
            for &t in &t_grid.0 {
                let r = volterra_residual_at(t, &params, im, &ctrl)?;
                table.push(vec!["volterra".into(), m.p.into(), m.alpha.into(), t.into(), r.into()]);
            }
            emit_to(&table, &meta, &output, Format::Csv, "volterra")
        }
        Experiment::LimitLaw { model: m, t_grid, ensemble, output } => {
            let params = model(&m)?;
            let mut meta = Meta::new("experiment limit-law");
            model_meta(&mut meta, &m);
            ensemble_meta(&mut meta, &ensemble);
            let mut table = Table::new(&["experiment", "p", "alpha", "t", "gamma", "b_fit", "ks_distance", "n"]);
            for &t in &t_grid.0 {
                let fit = limit_law_check(&params, t, ensemble.n_paths, ensemble.seed)?;
                table.push(vec![
                    "limit_law".into(),
                    m.p.into(),
                    m.alpha.into(),
                    t.into(),
                    fit.gamma.into(),
                    fit.b_fit.into(),
                    fit.ks_distance.into(),
                    fit.n.into(),
                ]);
            }
            emit_to(&table, &meta, &output, Format::Csv, "limit_law")
        }
        Experiment::Stable { gamma, t_grid, output } => {
            let mut meta = Meta::new("experiment stable");
            meta.set("series_floor", STABLE_SERIES_FLOOR);
            let mut table = Table::new(&["experiment", "gamma", "t", "series", "quadrature"]);
            for &g in &gamma.0 {
                for &t in &t_grid.0 {
                    let series = if t >= STABLE_SERIES_FLOOR { Some(stable_density_series(t, g, &ctrl)?) } else { None };
                    table.push(vec![
                        "stable".into(),
                        g.into(),
                        t.into(),
                        series.into(),
                        stable_density_quadrature(t, g)?.into(),
                    ]);
                }
            }
            emit_to(&table, &meta, &output, Format::Csv, "stable")
        }
    }
}

fn spectral_params(s: &SpectralModel, meta: &mut Meta) -> Result<SpectralParams> {
    model_meta(meta, &s.model);
    meta.set("h", s.h).set("d", s.d);
    Ok(SpectralParams::new(s.h, s.d, model(&s.model)?)?)
}

fn width_rows(table: &WidthTable) -> Table {
    let mut out = Table::new(&WidthTable::COLUMNS);
    for r in &table.rows {
        out.push(vec![r.t.into(), r.t_a.into(), r.sigma.into(), r.stderr.into(), r.n.into()]);
    }
    out
}

fn spectral(s: Spectral) -> Result<()> {
    match s {
        Spectral::Width { spectral, t_grid, ensemble, output } => {
            let mut meta = Meta::new("spectral width");
            let sp = spectral_params(&spectral, &mut meta)?;
            ensemble_meta(&mut meta, &ensemble);
            let table = hole_width(&sp, &t_grid.0, ensemble.n_paths, ensemble.seed)?;
            if let Ok(fit) = table.slope_in_t() {
                meta.set("slope", fit.slope).set("slope_stderr", fit.slope_stderr);
            }
            emit_to(&width_rows(&table), &meta, &output, Format::Csv, "spectral_width")
        }
        Spectral::Ageing { spectral, t, ta_grid, ensemble, output } => {
            let mut meta = Meta::new("spectral ageing");
            let sp = spectral_params(&spectral, &mut meta)?;
            ensemble_meta(&mut meta, &ensemble);
            meta.set("t", t);
            let table = ageing_width(&sp, t, &ta_grid.0, ensemble.n_paths, ensemble.seed)?;
            if let Ok(fit) = table.slope_in_ta() {
                meta.set("slope", fit.slope).set("slope_stderr", fit.slope_stderr);
            }
            emit_to(&width_rows(&table), &meta, &output, Format::Csv, "spectral_ageing")
        }
        Spectral::Exponents { b, c, output } => {
            let r = exponent_report(b, c)?;
            let meta = Meta::new("spectral exponents");
            let mut table = Table::new(&["b_obs", "c_obs", "alpha_inferred", "alpha_consistent", "h_consistent"]);
            table.push(vec![
                r.b_obs.into(),
                r.c_obs.into(),
                r.alpha_inferred.into(),
                r.alpha_consistent.into(),
                r.h_consistent.into(),
            ]);
            emit_to(&table, &meta, &output, Format::Json, "spectral_exponents")
        }
    }
}

/// Exit status for a failed run: 2 for bad flags or parameters, 3 for
/// numerical failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<padic_sojourn::Error>() {
        Some(e) if e.is_numerical() => 3,
        Some(_) => 2,
        None => 1,
    }
}

pub fn check_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!(UsageError("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
