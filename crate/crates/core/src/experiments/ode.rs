use crate::error::{Error, Result};
use crate::model::NormChainGenerator;

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Master equation `dP/dt = G^T P` of the level process.
fn rhs(gen: &NormChainGenerator, p: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (k, row) in gen.rows().iter().enumerate() {
        let mass = p[k];
        if mass == 0.0 {
            continue;
        }
        out[k] -= mass * row.exit_rate();
        for (m, r) in row.transitions() {
            out[m] += mass * r;
        }
    }
}

/// Probability of level 0 at each time of `t_grid`, starting from level 0,
/// by adaptive Dormand–Prince integration with local tolerance `tol`.
///
/// The largest exit rate is that of level 0, so the system is not stiff and
/// step sizes scale like `tol^{1/5}`.
pub fn ode_survival_oracle(gen: &NormChainGenerator, t_grid: &[f64], tol: f64) -> Result<Vec<(f64, f64)>> {
    if !(tol > 0.0) {
        return Err(Error::invalid("ODE tolerance must be positive"));
    }
    if t_grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("ODE time grid must be finite, nonnegative and sorted"));
    }
    let dim = gen.max_level() + 1;
    let mut y = vec![0.0; dim];
    y[0] = 1.0;
    let mut t: f64 = 0.0;
    let mut h: f64 = 1e-3;
    let mut k = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];
    let mut y5 = vec![0.0; dim];
    let mut out = Vec::with_capacity(t_grid.len());

    for &target in t_grid {
        while t < target {
            let step = h.min(target - t);
            rhs(gen, &y, &mut k[0]);
            for s in 1..7 {
                for i in 0..dim {
                    stage[i] = y[i] + step * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
                rhs(gen, &stage, &mut k[s]);
            }
            let mut err: f64 = 0.0;
            for i in 0..dim {
                y5[i] = y[i] + step * (0..7).map(|j| B5[j] * k[j][i]).sum::<f64>();
                let y4 = y[i] + step * (0..7).map(|j| B4[j] * k[j][i]).sum::<f64>();
                let scale = tol + tol * y[i].abs().max(y5[i].abs());
                err = err.max((y5[i] - y4).abs() / scale);
            }
            if err <= 1.0 {
                t += step;
                if target - t < 1e-13 * target.max(1.0) {
                    t = target;
                }
                std::mem::swap(&mut y, &mut y5);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // keep h from collapsing to the short final step before a grid point
            h = if err <= 1.0 { h.max(step) * factor } else { step * factor };
            if h < 1e-14 * t.max(1.0) {
                return Err(Error::Ode { t, reason: format!("step size underflow ({h:.3e})") });
            }
        }
        out.push((target, y[0]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{survival_j, SeriesControl};
    use crate::model::ModelParams;

    #[test]
    fn matches_survival_series() {
        let params = ModelParams::new(2, 2.0).unwrap();
        let gen = NormChainGenerator::new(params, 40).unwrap();
        let grid = [0.0, 0.5, 1.0, 5.0, 20.0];
        let table = ode_survival_oracle(&gen, &grid, 1e-10).unwrap();
        assert_eq!(table[0], (0.0, 1.0));
        for &(t, p0) in &table {
            let j = survival_j(t, &params, &SeriesControl::default()).unwrap();
            assert!((p0 - j).abs() < 1e-7, "t {t}: {p0} vs {j}");
        }
    }

    #[test]
    fn two_level_chain_and_bad_grids() {
        let gen = NormChainGenerator::new(ModelParams::new(3, 1.5).unwrap(), 10).unwrap();
        assert!(ode_survival_oracle(&gen, &[2.0, 1.0], 1e-8).is_err());
        assert!(ode_survival_oracle(&gen, &[1.0], 0.0).is_err());
        let two_state = NormChainGenerator::new(ModelParams::new(2, 2.0).unwrap(), 1).unwrap();
        // two levels: 0 -> 1 at 4/7, 1 -> 0 at 3/7
        let t = 1.3;
        let r = ode_survival_oracle(&two_state, &[t], 1e-12).unwrap();
        let exact = 3.0 / 7.0 + 4.0 / 7.0 * (-t).exp();
        assert!((r[0].1 - exact).abs() < 1e-10);
    }
}
