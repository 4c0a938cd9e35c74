use super::{RadialModeSolution, SolverConfig};
use crate::error::{LabError, Result};
use num_complex::Complex64;

/// Solves u'' + u'/r - m²u/r² + (q_total(r) + κ²)u = 0 with u regular at 0.
///
/// Works with w = u / r^m in t = ln r, where the equation reads
/// w_tt + 2m w_t + c(r) r² w = 0, starting from the Frobenius series.
pub fn solve_radial_mode<F>(
    q_total: F,
    kappa2: f64,
    m: usize,
    cfg: &SolverConfig,
) -> Result<RadialModeSolution>
where
    F: Fn(f64) -> Complex64,
{
    if m > cfg.m_trunc {
        return Err(LabError::Parameter(format!(
            "degree {m} above M_trunc={}",
            cfg.m_trunc
        )));
    }
    let steps = cfg.ode_steps.max(1);
    let r_start = cfg.ode_start;
    let t0 = r_start.ln();
    let h = -t0 / steps as f64;
    let mf = m as f64;
    let coef = |t: f64| -> Complex64 {
        let r = t.exp();
        (q_total(r) + kappa2) * (r * r)
    };

    // w(r) = Σ_k (-c r²/4)^k m!/(k!(m+k)!), w_t = Σ 2k·term
    let c0 = q_total(0.0) + kappa2;
    let z = -c0 * (r_start * r_start) / 4.0;
    let mut term = Complex64::new(1.0, 0.0);
    let mut w = term;
    let mut wt = Complex64::new(0.0, 0.0);
    for k in 1..=3 {
        term = term * z / (k as f64 * (m + k) as f64);
        w += term;
        wt += term * (2 * k) as f64;
    }

    let f = |t: f64, w: Complex64, wt: Complex64| -> (Complex64, Complex64) {
        (wt, -2.0 * mf * wt - coef(t) * w)
    };

    let mut grid = Vec::with_capacity(steps + 1);
    let mut ws = Vec::with_capacity(steps + 1);
    grid.push(r_start);
    ws.push(w);
    let mut t = t0;
    for i in 0..steps {
        let (k1w, k1v) = f(t, w, wt);
        let (k2w, k2v) = f(t + h / 2.0, w + k1w * (h / 2.0), wt + k1v * (h / 2.0));
        let (k3w, k3v) = f(t + h / 2.0, w + k2w * (h / 2.0), wt + k2v * (h / 2.0));
        let (k4w, k4v) = f(t + h, w + k3w * h, wt + k3v * h);
        w += (k1w + 2.0 * k2w + 2.0 * k3w + k4w) * (h / 6.0);
        wt += (k1v + 2.0 * k2v + 2.0 * k3v + k4v) * (h / 6.0);
        t = t0 + (i + 1) as f64 * h;
        let r = if i + 1 == steps { 1.0 } else { t.exp() };
        grid.push(r);
        ws.push(w);
    }

    let u_one = ws[steps];
    let mut values: Vec<Complex64> = grid
        .iter()
        .zip(&ws)
        .map(|(r, w)| w * r.powi(m as i32))
        .collect();
    let peak = values.iter().fold(0.0f64, |a, u| a.max(u.norm()));
    if !(u_one.norm() >= cfg.resonance_ratio * peak) || !u_one.norm().is_finite() {
        return Err(LabError::Resonance(format!(
            "|u_{m}(1)| = {:.3e} against max {:.3e} at κ²={kappa2}",
            u_one.norm(),
            peak
        )));
    }
    values.iter_mut().for_each(|u| *u /= u_one);
    Ok(RadialModeSolution {
        m,
        grid,
        values,
        boundary_derivative: mf + wt / u_one,
        kappa2,
    })
}
