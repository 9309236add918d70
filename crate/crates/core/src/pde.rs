//! Independent checks of `H̄`: the long-time growth rate of the parabolic
//! equation and, for `G(p) = p²/2`, the principal eigenvalue of the
//! Hopf-Cole transformed operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian1D;
use crate::numeric::CyclicTridiagonal;
use crate::potential::PeriodicPotential;

/// Settings for [`long_time_slope`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdeOptions {
    pub n_x: usize,
    pub t_end: f64,
    /// Requested step; reduced when `dt max|G'|² > 1`.
    pub dt: f64,
    /// Fit window starts at this fraction of `t_end`.
    pub fit_from: f64,
    pub max_retries: usize,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self { n_x: 2048, t_end: 40.0, dt: 0.01, fit_from: 0.5, max_retries: 4 }
    }
}

/// One row of the run log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub mean_w: f64,
    pub max_w: f64,
    pub min_w: f64,
}

/// Result of a long-time run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParabolicRun {
    pub theta: f64,
    pub n_x: usize,
    /// Largest step actually taken.
    pub dt: f64,
    pub t_end: f64,
    /// Least-squares growth rate of the spatial mean of `w`.
    pub slope: f64,
    /// RMS residual of that fit.
    pub slope_ci: f64,
    pub retries: usize,
    #[serde(skip)]
    pub log: Vec<LogRow>,
}

/// Run `w_t = w_xx + G(θ + w_x) + V` from `w = 0` and fit the growth rate.
///
/// Diffusion is implicit, the Hamiltonian term explicit with the average of
/// the forward and backward difference quotients, and `V` enters through
/// its cell averages so that thin features of `V` are not missed.
pub fn long_time_slope(g: &Hamiltonian1D, v: &PeriodicPotential, theta: f64, opts: &PdeOptions) -> Result<ParabolicRun> {
    if opts.n_x < 256 || !(opts.t_end >= 10.0) || !(opts.dt > 0.0) || !(opts.fit_from > 0.0 && opts.fit_from < 1.0) {
        return Err(Error::InvalidInput("PDE run needs N_x >= 256, T >= 10, dt > 0 and a fit window in (0, 1)".into()));
    }
    let mut dt = opts.dt;
    let mut last = String::new();
    for attempt in 0..=opts.max_retries {
        match run_once(g, v, theta, opts, dt) {
            Ok(mut run) => {
                run.retries = attempt;
                return Ok(run);
            }
            Err(reason) => {
                last = reason;
                dt *= 0.5;
            }
        }
    }
    Err(Error::Instability { retries: opts.max_retries, reason: last })
}

fn run_once(
    g: &Hamiltonian1D,
    v: &PeriodicPotential,
    theta: f64,
    opts: &PdeOptions,
    dt_req: f64,
) -> std::result::Result<ParabolicRun, String> {
    let n = opts.n_x;
    let h = 1.0 / n as f64;
    let vbar: Vec<f64> = (0..n).map(|i| v.integral((i as f64 - 0.5) * h, (i as f64 + 0.5) * h) / h).collect();
    let gt = g.eval(theta);
    let bound_rate = (gt + v.min()).abs().max((gt + v.max()).abs());
    let mut w = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut factored: Option<(f64, CyclicTridiagonal)> = None;
    let mut t = 0.0;
    let mut dt_max = 0.0f64;
    let mut log = vec![LogRow { t: 0.0, mean_w: 0.0, max_w: 0.0, min_w: 0.0 }];
    while t < opts.t_end * (1.0 - 1e-14) {
        // Explicit Hamiltonian term and the step bound from the current slopes.
        let mut gmax = 0.0f64;
        for i in 0..n {
            let (wl, wr) = (w[(i + n - 1) % n], w[(i + 1) % n]);
            let (sf, sb) = (theta + (wr - w[i]) / h, theta + (w[i] - wl) / h);
            gmax = gmax.max(g.d1(sf).abs()).max(g.d1(sb).abs());
            rhs[i] = 0.5 * (g.eval(sf) + g.eval(sb)) + vbar[i];
        }
        let mut dt = dt_req.min(1.0 / (gmax * gmax).max(1e-300));
        if t + dt > opts.t_end {
            dt = opts.t_end - t;
        }
        if factored.as_ref().map_or(true, |(d, _)| *d != dt) {
            let c = dt / (h * h);
            let m = CyclicTridiagonal::new(vec![-c; n], vec![1.0 + 2.0 * c; n], vec![-c; n]).map_err(|e| e.to_string())?;
            factored = Some((dt, m));
        }
        for i in 0..n {
            rhs[i] = w[i] + dt * rhs[i];
        }
        factored.as_ref().unwrap().1.solve_into(&rhs, &mut next);
        std::mem::swap(&mut w, &mut next);
        t += dt;
        dt_max = dt_max.max(dt);
        let (mut sum, mut lo, mut hi, mut nyq) = (0.0, f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for (i, &x) in w.iter().enumerate() {
            sum += x;
            lo = lo.min(x);
            hi = hi.max(x);
            nyq += if i % 2 == 0 { x } else { -x };
        }
        let mean = sum / n as f64;
        if !mean.is_finite() || !lo.is_finite() || !hi.is_finite() {
            return Err(format!("non-finite values at t = {t}"));
        }
        let spread = hi - lo;
        if (nyq / n as f64).abs() > 1e-3 * spread + 1e-10 {
            return Err(format!("grid-scale oscillation at t = {t}"));
        }
        if lo.abs().max(hi.abs()) > t * bound_rate + 1.0 {
            return Err(format!("solution left the a priori bound at t = {t}"));
        }
        log.push(LogRow { t, mean_w: mean, max_w: hi, min_w: lo });
    }
    let (slope, rms) = fit_slope(&log, opts.fit_from * opts.t_end);
    Ok(ParabolicRun { theta, n_x: n, dt: dt_max, t_end: opts.t_end, slope, slope_ci: rms, retries: 0, log })
}

/// Least-squares slope of `mean_w` against `t` for `t >= from`.
fn fit_slope(log: &[LogRow], from: f64) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = log.iter().filter(|r| r.t >= from).map(|r| (r.t, r.mean_w)).collect();
    let m = pts.len() as f64;
    let (tb, yb) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - tb).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tb) * (p.1 - yb)).sum();
    let slope = sxy / sxx;
    let rms = (pts.iter().map(|p| (p.1 - yb - slope * (p.0 - tb)).powi(2)).sum::<f64>() / m).sqrt();
    (slope, rms)
}

/// `H̄(θ)` for `G(p) = p²/2` as twice the principal eigenvalue of
/// `η'' + θη' + (θ²/4 + V/2)η` on a periodic grid of `n_x` points.
pub fn hopf_cole_oracle(v: &PeriodicPotential, theta: f64, n_x: usize) -> Result<f64> {
    if n_x < 256 {
        return Err(Error::InvalidInput(format!("oracle needs N_x >= 256, got {n_x}")));
    }
    let n = n_x;
    let h = 1.0 / n as f64;
    let q: Vec<f64> = (0..n).map(|i| 0.25 * theta * theta + 0.5 * v.eval(i as f64 * h)).collect();
    let (lo_c, hi_c) = (1.0 / (h * h) - theta / (2.0 * h), 1.0 / (h * h) + theta / (2.0 * h));
    if !(lo_c > 0.0) {
        return Err(Error::InvalidInput(format!("oracle grid too coarse for theta = {theta}")));
    }
    let sigma = q.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let diag: Vec<f64> = q.iter().map(|qi| sigma + 2.0 / (h * h) - qi).collect();
    let shifted = CyclicTridiagonal::new(vec![-lo_c; n], diag, vec![-hi_c; n])?;
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = lo_c * x[(i + n - 1) % n] - 2.0 / (h * h) * x[i] + hi_c * x[(i + 1) % n] + q[i] * x[i];
        }
    };
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut ax = vec![0.0; n];
    // Roundoff floor of the Collatz-Wielandt quotients.
    let floor = 64.0 * f64::EPSILON * 4.0 / (h * h);
    let mut prev = f64::NAN;
    for _ in 0..500 {
        shifted.solve_into(&x, &mut y);
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let mu = sigma - sx / sy;
        let norm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(norm > 0.0) || !norm.is_finite() || y.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::NoPositiveEigenvector);
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if (mu - prev).abs() <= 1e-15 * (1.0 + mu.abs()) {
            apply(&x, &mut ax);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (a, b) in ax.iter().zip(&x) {
                lo = lo.min(a / b);
                hi = hi.max(a / b);
            }
            if mu < lo - floor || mu > hi + floor {
                return Err(Error::NoPositiveEigenvector);
            }
            return Ok(2.0 * mu);
        }
        prev = mu;
    }
    Err(Error::NoPositiveEigenvector)
}

/// Richardson combination of the oracle on `n_x` and `2 n_x` points.
pub fn hopf_cole_refined(v: &PeriodicPotential, theta: f64, n_x: usize) -> Result<f64> {
    let coarse = hopf_cole_oracle(v, theta, n_x)?;
    let fine = hopf_cole_oracle(v, theta, 2 * n_x)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Summary of a PDE cross-check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeReport {
    pub theta: f64,
    pub slope: f64,
    pub hbar_cell: f64,
    pub abs_diff: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{solve_cell, CellConfig, CellProblem};

    #[test]
    fn zero_potential_slope_is_g_theta() {
        let run = long_time_slope(
            &Hamiltonian1D::quadratic(),
            &PeriodicPotential::zero(),
            1.0,
            &PdeOptions { n_x: 256, t_end: 20.0, ..Default::default() },
        )
        .unwrap();
        assert!((run.slope - 0.5).abs() < 1e-4, "{}", run.slope);
        assert_eq!(run.retries, 0);
    }

    #[test]
    fn slope_matches_cell_for_smooth_potential() {
        let g = Hamiltonian1D::default_g1();
        let v = PeriodicPotential::cosine(1.0);
        let run = long_time_slope(&g, &v, 0.3, &PdeOptions { n_x: 512, t_end: 20.0, ..Default::default() }).unwrap();
        let hbar = solve_cell(&g, &v, 0.3).unwrap().hbar;
        assert!((run.slope - hbar).abs() < 5e-3, "{} {}", run.slope, hbar);
        let first = run.log.first().unwrap();
        assert_eq!(first.t, 0.0);
        assert!(run.log.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn bad_options_are_rejected() {
        let g = Hamiltonian1D::quadratic();
        let v = PeriodicPotential::zero();
        assert!(long_time_slope(&g, &v, 0.0, &PdeOptions { n_x: 100, ..Default::default() }).is_err());
        assert!(long_time_slope(&g, &v, 0.0, &PdeOptions { t_end: 5.0, ..Default::default() }).is_err());
    }

    #[test]
    fn oracle_trivial_cases() {
        for theta in [-1.3, 0.0, 0.7] {
            let h = hopf_cole_oracle(&PeriodicPotential::zero(), theta, 256).unwrap();
            assert!((h - 0.5 * theta * theta).abs() < 1e-9);
            let h = hopf_cole_oracle(&PeriodicPotential::constant(0.4), theta, 256).unwrap();
            assert!((h - 0.5 * theta * theta - 0.4).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_agrees_with_cell_solver() {
        let g = Hamiltonian1D::quadratic();
        let v = PeriodicPotential::cosine(1.0);
        let cell = CellProblem::new(g, v.clone(), CellConfig::default()).unwrap();
        for theta in [0.0, 0.8] {
            let oracle = hopf_cole_refined(&v, theta, 1024).unwrap();
            let hbar = cell.solve(theta).unwrap().hbar;
            assert!((oracle - hbar).abs() < 1e-7, "{theta}: {oracle} {hbar}");
        }
    }
}
