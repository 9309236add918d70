//! One-dimensional cell problem: find `H̄(θ)` and the periodic corrector
//! derivative `f` with `f' + G(f) + V = H̄` and `∫ f = θ`, by RK4 shooting.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian1D;
use crate::numeric::{expand_bracket_increasing, find_root_increasing, hermite_panel, linspace, RootOptions};
use crate::potential::PeriodicPotential;

/// Solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellConfig {
    /// Steps per unit length (uniform grid when `V` has no knots).
    pub n: usize,
    /// Minimum steps on each piece of a piecewise potential.
    pub min_per_piece: usize,
    /// `|f|` above this aborts a trajectory.
    pub guard: f64,
    /// Target for `|f(1) - f(0)|`.
    pub tol_period: f64,
    /// Target for `|∫ f - θ|`.
    pub tol_theta: f64,
    /// Use the closed form when `V` is constant.
    pub short_circuit: bool,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self { n: 4096, min_per_piece: 512, guard: 1e6, tol_period: 1e-12, tol_theta: 1e-10, short_circuit: true }
    }
}

/// Integration grid aligned with the knots of `V`, with `V` cached at every
/// node and step midpoint.
#[derive(Clone, Debug)]
pub struct CellGrid {
    pub x: Vec<f64>,
    h: Vec<f64>,
    v0: Vec<f64>,
    vm: Vec<f64>,
    v1: Vec<f64>,
}

impl CellGrid {
    pub fn new(v: &PeriodicPotential, n: usize, min_per_piece: usize) -> Result<Self> {
        if n < 64 {
            return Err(Error::InvalidInput(format!("cell grid needs N >= 64, got {n}")));
        }
        let bps = v.breakpoints();
        let pieces = bps.len() - 1;
        let mut x = vec![0.0];
        let (mut h, mut v0, mut vm, mut v1) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..pieces {
            let (a, b) = (bps[i], bps[i + 1]);
            let len = b - a;
            let m = if pieces == 1 { n } else { min_per_piece.max((n as f64 * len).ceil() as usize) };
            let mf = m as f64;
            for k in 0..m {
                let (t0, t1) = (k as f64 / mf, (k + 1) as f64 / mf);
                h.push(len / mf);
                v0.push(v.eval_piece(i, t0));
                vm.push(v.eval_piece(i, (k as f64 + 0.5) / mf));
                v1.push(v.eval_piece(i, t1));
                x.push(if k + 1 == m { b } else { a + len * t1 });
            }
        }
        Ok(Self { x, h, v0, vm, v1 })
    }

    /// Number of steps.
    pub fn steps(&self) -> usize {
        self.h.len()
    }

    /// `V` at node `i`.
    pub fn v_node(&self, i: usize) -> f64 {
        if i < self.v0.len() {
            self.v0[i]
        } else {
            self.v1[i - 1]
        }
    }
}

/// A trajectory of `f' = λ - G(f) - V` from `f(0) = p0`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub f: Vec<f64>,
    pub df: Vec<f64>,
    pub f_end: f64,
}

/// Periodic corrector at one `θ`.
#[derive(Clone, Debug)]
pub struct CorrectorSolution {
    pub theta: f64,
    pub hbar: f64,
    pub p0: f64,
    /// `|f(1) - f(0)|`.
    pub residual: f64,
    /// `∫ f` by the derivative-corrected trapezoid rule.
    pub mean: f64,
    pub x_grid: Arc<Vec<f64>>,
    pub f_grid: Vec<f64>,
    /// `f'` at the nodes, from the ODE.
    pub df_grid: Vec<f64>,
}

impl CorrectorSolution {
    pub fn min_f(&self) -> f64 {
        self.f_grid.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_f(&self) -> f64 {
        self.f_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫ phi(f)` given `phi(f)` and its `x`-derivative at the nodes.
    pub fn integrate_nodes(&self, phi: &[f64], dphi: &[f64]) -> f64 {
        let x = &self.x_grid;
        (0..x.len() - 1).map(|i| hermite_panel(x[i + 1] - x[i], phi[i], phi[i + 1], dphi[i], dphi[i + 1])).sum()
    }
}

/// Outcome for one point of a sweep.
#[derive(Debug)]
pub struct SweepPoint {
    pub theta: f64,
    pub result: Result<CorrectorSolution>,
}

impl SweepPoint {
    pub fn hbar(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|s| s.hbar)
    }
}

/// Checked properties of a corrector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub mean_error: f64,
    pub period_error: f64,
    pub sandwich: (f64, f64),
    pub momentum: (f64, f64),
    pub within_sandwich: bool,
    pub within_momentum: bool,
}

impl InvariantReport {
    pub fn ok(&self) -> bool {
        self.within_sandwich && self.within_momentum
    }
}

/// A cell problem for fixed `(G, V)`; `θ` varies per solve.
#[derive(Clone, Debug)]
pub struct CellProblem {
    g: Hamiltonian1D,
    v: PeriodicPotential,
    cfg: CellConfig,
    grid: Arc<CellGrid>,
    x_grid: Arc<Vec<f64>>,
}

impl CellProblem {
    pub fn new(g: Hamiltonian1D, v: PeriodicPotential, cfg: CellConfig) -> Result<Self> {
        if !(cfg.guard > 0.0 && cfg.tol_period > 0.0 && cfg.tol_theta > 0.0) {
            return Err(Error::InvalidInput("cell tolerances and guard must be positive".into()));
        }
        let grid = CellGrid::new(&v, cfg.n, cfg.min_per_piece)?;
        let x_grid = Arc::new(grid.x.clone());
        Ok(Self { g, v, cfg, grid: Arc::new(grid), x_grid })
    }

    pub fn hamiltonian(&self) -> &Hamiltonian1D {
        &self.g
    }

    pub fn potential(&self) -> &PeriodicPotential {
        &self.v
    }

    pub fn config(&self) -> &CellConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    /// End value and `∫ f` of the trajectory; `±∞` when it leaves the guard.
    fn shoot(&self, lambda: f64, p0: f64) -> (f64, f64) {
        let g = &self.g;
        let gr = &*self.grid;
        let guard = self.cfg.guard;
        let mut f = p0;
        let mut df = lambda - g.eval(f) - gr.v0[0];
        let mut mass = 0.0;
        for i in 0..gr.h.len() {
            let h = gr.h[i];
            let k1 = df;
            let k2 = lambda - g.eval(f + 0.5 * h * k1) - gr.vm[i];
            let k3 = lambda - g.eval(f + 0.5 * h * k2) - gr.vm[i];
            let k4 = lambda - g.eval(f + h * k3) - gr.v1[i];
            let fnext = f + h / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
            if !(fnext.abs() <= guard) {
                let inf = if fnext > 0.0 || (fnext.is_nan() && lambda > 0.0) { f64::INFINITY } else { f64::NEG_INFINITY };
                return (inf, f64::NAN);
            }
            let dnext = lambda - g.eval(fnext) - gr.v1[i];
            mass += hermite_panel(h, f, fnext, df, dnext);
            f = fnext;
            df = dnext;
        }
        (f, mass)
    }

    /// Full RK4 trajectory of `f' = λ - G(f) - V` from `f(0) = p0`.
    pub fn integrate(&self, lambda: f64, p0: f64) -> Result<Trajectory> {
        let g = &self.g;
        let gr = &*self.grid;
        let n = gr.h.len();
        let mut fs = Vec::with_capacity(n + 1);
        let mut dfs = Vec::with_capacity(n + 1);
        let mut f = p0;
        let mut df = lambda - g.eval(f) - gr.v0[0];
        fs.push(f);
        dfs.push(df);
        for i in 0..n {
            let h = gr.h[i];
            let k1 = df;
            let k2 = lambda - g.eval(f + 0.5 * h * k1) - gr.vm[i];
            let k3 = lambda - g.eval(f + 0.5 * h * k2) - gr.vm[i];
            let k4 = lambda - g.eval(f + h * k3) - gr.v1[i];
            f += h / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
            if !(f.abs() <= self.cfg.guard) {
                return Err(Error::Blowup { x: gr.x[i + 1], lambda, p0, guard: self.cfg.guard });
            }
            df = lambda - g.eval(f) - gr.v1[i];
            fs.push(f);
            dfs.push(df);
        }
        Ok(Trajectory { f_end: f, f: fs, df: dfs })
    }

    /// The unique `λ` making the trajectory from `p0` periodic.
    pub fn solve_lambda(&self, p0: f64) -> Result<f64> {
        if !p0.is_finite() {
            return Err(Error::InvalidInput(format!("p0 must be finite, got {p0}")));
        }
        let gp = self.g.eval(p0);
        let lambda0 = gp + self.v.mean();
        let limit = gp.abs() + 2.0 * self.v.sup_abs() + 10.0 + lambda0.abs();
        let gap = |lambda: f64| -> Result<f64> { Ok(self.shoot(lambda, p0).0 - p0) };
        let step0 = 1e-3 * (1.0 + self.v.sup_abs().min(1e3));
        let (lo, hi) = expand_bracket_increasing(gap, lambda0, step0, limit, "lambda bracket")?;
        let opts = RootOptions { tol_f: 0.01 * self.cfg.tol_period, tol_x: 0.0, max_iter: 300 };
        let root = find_root_increasing(gap, lo, hi, opts)?;
        // A collapsed bracket is as periodic as double precision allows.
        if !(root.fx.abs() <= self.cfg.tol_period || (root.collapsed && root.fx.is_finite())) {
            return Err(Error::BracketFailure { what: "lambda periodicity", last: root.x });
        }
        Ok(root.x)
    }

    /// `∫ f - θ` for the periodic trajectory from `p0`.
    fn mean_gap(&self, p0: f64, theta: f64) -> Result<f64> {
        let lambda = self.solve_lambda(p0)?;
        let (_, mass) = self.shoot(lambda, p0);
        Ok(mass - theta)
    }

    fn closed_form(&self, theta: f64, c: f64) -> CorrectorSolution {
        let len = self.x_grid.len();
        CorrectorSolution {
            theta,
            hbar: self.g.eval(theta) + c,
            p0: theta,
            residual: 0.0,
            mean: theta,
            x_grid: self.x_grid.clone(),
            f_grid: vec![theta; len],
            df_grid: vec![0.0; len],
        }
    }

    /// Solve the cell problem at `θ`.
    pub fn solve(&self, theta: f64) -> Result<CorrectorSolution> {
        if !theta.is_finite() {
            return Err(Error::InvalidInput(format!("theta must be finite, got {theta}")));
        }
        if self.cfg.short_circuit {
            if let Some(c) = self.v.constant_value() {
                return Ok(self.closed_form(theta, c));
            }
        }
        let gap = |p0: f64| self.mean_gap(p0, theta);
        let f0 = gap(theta)?;
        let (lo, hi) = if f0 == 0.0 {
            ((theta, 0.0), (theta, 0.0))
        } else {
            let step0 = f0.abs().max(1e-9);
            let limit = 4.0 * (self.cfg.guard.min(1e4) + theta.abs());
            expand_bracket_increasing(gap, theta, step0, limit, "p0 bracket")?
        };
        let opts = RootOptions { tol_f: 0.01 * self.cfg.tol_theta, tol_x: 0.0, max_iter: 200 };
        let root = find_root_increasing(gap, lo, hi, opts)?;
        if !(root.fx.abs() <= self.cfg.tol_theta) {
            return Err(Error::BracketFailure { what: "p0 for mean", last: root.x });
        }
        let p0 = root.x;
        let lambda = self.solve_lambda(p0)?;
        let traj = self.integrate(lambda, p0)?;
        let x = &self.x_grid;
        let mean = (0..x.len() - 1)
            .map(|i| hermite_panel(x[i + 1] - x[i], traj.f[i], traj.f[i + 1], traj.df[i], traj.df[i + 1]))
            .sum();
        Ok(CorrectorSolution {
            theta,
            hbar: lambda,
            p0,
            residual: (traj.f_end - p0).abs(),
            mean,
            x_grid: self.x_grid.clone(),
            f_grid: traj.f,
            df_grid: traj.df,
        })
    }

    /// Solve at every `θ` in parallel; failures are kept per point.
    pub fn sweep(&self, thetas: &[f64]) -> Vec<SweepPoint> {
        let mut out: Vec<SweepPoint> =
            thetas.par_iter().map(|&theta| SweepPoint { theta, result: self.solve(theta) }).collect();
        out.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        out
    }

    /// `(min_x G(θ) + V, max_x G(θ) + V)`.
    pub fn sandwich(&self, theta: f64) -> (f64, f64) {
        let gt = self.g.eval(theta);
        (gt + self.v.min(), gt + self.v.max())
    }

    /// Extreme momenta `p` with `G(p) <= U(θ) - min V`.
    pub fn momentum_bounds(&self, theta: f64) -> (f64, f64) {
        let level = self.sandwich(theta).1 - self.v.min();
        let lo = self.extreme_in_sublevel(theta, level, -1.0);
        let hi = self.extreme_in_sublevel(theta, level, 1.0);
        (lo, hi)
    }

    fn extreme_in_sublevel(&self, theta: f64, level: f64, dir: f64) -> f64 {
        let g = &self.g;
        let slack = 1e-12 * (1.0 + level.abs());
        let below = |p: f64| g.eval(p) <= level + slack;
        // Reach: growth bound when available, otherwise outward doubling.
        let mut reach = match g.growth() {
            Some(gr) if gr.alpha0 > 0.0 => {
                let r = ((level + gr.alpha1).max(0.0) / gr.alpha0).powf(1.0 / gr.eta);
                (r - dir * theta).max(0.0) + 1e-9
            }
            _ => 0.0,
        };
        if reach == 0.0 {
            reach = 1e-3;
            let mut misses = 0;
            while misses < 4 && reach < 1e12 {
                if below(theta + dir * reach) {
                    misses = 0;
                } else {
                    misses += 1;
                }
                reach *= 2.0;
            }
        }
        let samples = 8193;
        let pts = linspace(0.0, reach, samples);
        let last = (0..samples).rev().find(|&i| below(theta + dir * pts[i])).unwrap_or(0);
        if last + 1 == samples {
            return theta + dir * reach;
        }
        let (mut a, mut b) = (pts[last], pts[last + 1]);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if below(theta + dir * m) {
                a = m;
            } else {
                b = m;
            }
        }
        theta + dir * a
    }

    /// Mean, periodicity, sandwich and momentum-bound checks.
    pub fn check_invariants(&self, sol: &CorrectorSolution) -> InvariantReport {
        let (l, u) = self.sandwich(sol.theta);
        let (pm, pp) = self.momentum_bounds(sol.theta);
        let tol_h = 1e-9 * (1.0 + l.abs().max(u.abs()));
        let tol_p = 1e-9 * (1.0 + pm.abs().max(pp.abs()));
        InvariantReport {
            mean_error: (sol.mean - sol.theta).abs(),
            period_error: sol.residual,
            sandwich: (l, u),
            momentum: (pm, pp),
            within_sandwich: sol.hbar >= l - tol_h && sol.hbar <= u + tol_h,
            within_momentum: sol.min_f() >= pm - tol_p && sol.max_f() <= pp + tol_p,
        }
    }
}

/// Free-function form of [`CellProblem::integrate`] on a fresh grid.
pub fn integrate_cell_ode(
    g: &Hamiltonian1D,
    v: &PeriodicPotential,
    lambda: f64,
    p0: f64,
    n: usize,
) -> Result<Trajectory> {
    let cfg = CellConfig { n, ..CellConfig::default() };
    CellProblem::new(g.clone(), v.clone(), cfg)?.integrate(lambda, p0)
}

/// Free-function form of [`CellProblem::solve_lambda`], returning the grid too.
pub fn solve_lambda_for_periodicity(g: &Hamiltonian1D, v: &PeriodicPotential, p0: f64) -> Result<(f64, Trajectory)> {
    let cell = CellProblem::new(g.clone(), v.clone(), CellConfig { short_circuit: false, ..CellConfig::default() })?;
    let lambda = cell.solve_lambda(p0)?;
    Ok((lambda, cell.integrate(lambda, p0)?))
}

/// Free-function form of [`CellProblem::solve`] with default settings.
pub fn solve_cell(g: &Hamiltonian1D, v: &PeriodicPotential, theta: f64) -> Result<CorrectorSolution> {
    CellProblem::new(g.clone(), v.clone(), CellConfig::default())?.solve(theta)
}

/// Sweep `n_points` equispaced values of `θ` on `[theta_min, theta_max]`.
pub fn sweep_hbar(
    g: &Hamiltonian1D,
    v: &PeriodicPotential,
    theta_min: f64,
    theta_max: f64,
    n_points: usize,
) -> Result<Vec<SweepPoint>> {
    if !(theta_min < theta_max) || n_points < 2 {
        return Err(Error::InvalidInput("sweep needs theta_min < theta_max and at least 2 points".into()));
    }
    let cell = CellProblem::new(g.clone(), v.clone(), CellConfig::default())?;
    Ok(cell.sweep(&linspace(theta_min, theta_max, n_points)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shooting() -> CellConfig {
        CellConfig { short_circuit: false, ..CellConfig::default() }
    }

    #[test]
    fn constant_equilibrium() {
        let t = integrate_cell_ode(&Hamiltonian1D::quadratic(), &PeriodicPotential::zero(), 0.5, 1.0, 4096).unwrap();
        assert!(t.f.iter().all(|&f| f == 1.0));
        assert_eq!(t.f_end, 1.0);
    }

    #[test]
    fn phase_line_decay_matches_reference() {
        // f' = 1/2 - f^2/2 has f(x) = tanh(x/2 + atanh(p0)) for |p0| < 1 and
        // coth(x/2 + acoth(p0)) for p0 > 1.
        let t = integrate_cell_ode(&Hamiltonian1D::quadratic(), &PeriodicPotential::zero(), 0.5, 1.1, 4096).unwrap();
        assert!(t.f.windows(2).all(|w| w[1] < w[0]));
        assert!(t.f_end > 1.0 && t.f_end < 1.1);
        let exact = 1.0 / (0.5 + (1.0f64 / 1.1).atanh()).tanh();
        assert!((t.f_end - exact).abs() < 1e-13);
    }

    #[test]
    fn end_value_increases_with_lambda_and_p0() {
        let g = Hamiltonian1D::default_g1();
        let v = PeriodicPotential::cosine(1.0);
        let cell = CellProblem::new(g, v, shooting()).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..20 {
            let e = cell.integrate(0.1 * k as f64, 0.3).unwrap().f_end;
            assert!(e > prev);
            prev = e;
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..20 {
            let e = cell.integrate(2.0, 0.3 + 0.05 * k as f64).unwrap().f_end;
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn blowup_is_reported() {
        let cell = CellProblem::new(Hamiltonian1D::quadratic(), PeriodicPotential::zero(), shooting()).unwrap();
        assert!(matches!(cell.integrate(0.5, -3.0), Err(Error::Blowup { .. })));
    }

    #[test]
    fn lambda_for_constant_solutions() {
        let (l, t) =
            solve_lambda_for_periodicity(&Hamiltonian1D::quadratic(), &PeriodicPotential::zero(), 1.0).unwrap();
        assert!((l - 0.5).abs() < 1e-12);
        assert!(t.f.iter().all(|f| (f - 1.0).abs() < 1e-12));
        let g = Hamiltonian1D::flat_quartic();
        let (l, _) = solve_lambda_for_periodicity(&g, &PeriodicPotential::constant(0.7), 1.8).unwrap();
        assert!((l - (g.eval(1.8) + 0.7)).abs() < 1e-11);
    }

    #[test]
    fn zero_potential_identity_by_shooting() {
        for g in [Hamiltonian1D::quadratic(), Hamiltonian1D::default_g1()] {
            let cell = CellProblem::new(g.clone(), PeriodicPotential::zero(), shooting()).unwrap();
            for theta in [-1.7, -0.2, 0.0, 0.9, 2.0] {
                let s = cell.solve(theta).unwrap();
                assert!((s.hbar - g.eval(theta)).abs() < 1e-10, "{} {theta}", g.label());
                assert!(s.f_grid.iter().all(|f| (f - theta).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn correctors_are_ordered_and_satisfy_invariants() {
        let cell = CellProblem::new(Hamiltonian1D::quadratic(), PeriodicPotential::cosine(1.0), shooting()).unwrap();
        let a = cell.solve(0.4).unwrap();
        let b = cell.solve(0.45).unwrap();
        assert!(a.f_grid.iter().zip(&b.f_grid).all(|(x, y)| x < y));
        for s in [&a, &b] {
            let r = cell.check_invariants(s);
            assert!(r.ok(), "{r:?}");
            assert!(r.mean_error <= 1e-10 && r.period_error <= 1e-12);
        }
        // Finite-difference ODE residual on the uniform grid.
        let h = 1.0 / 4096.0;
        for i in 1..4096 {
            let fd = (a.f_grid[i + 1] - a.f_grid[i - 1]) / (2.0 * h);
            let r = fd + 0.5 * a.f_grid[i] * a.f_grid[i] + cell.grid().v_node(i) - a.hbar;
            assert!(r.abs() < 1e-4, "{i} {r}");
        }
    }

    #[test]
    fn reflection_reverses_sweep() {
        let g = Hamiltonian1D::default_g1();
        let v = PeriodicPotential::fourier(
            "asym",
            0.0,
            vec![
                crate::potential::FourierTerm { k: 1, a: 0.4, b: 0.3 },
                crate::potential::FourierTerm { k: 2, a: 0.0, b: 0.2 },
            ],
        )
        .unwrap();
        let a = CellProblem::new(g.clone(), v.clone(), shooting()).unwrap();
        let b = CellProblem::new(g.reflected(), v.reflected(), shooting()).unwrap();
        for theta in [-0.8, 0.1, 0.6] {
            let ha = a.solve(theta).unwrap().hbar;
            let hb = b.solve(-theta).unwrap().hbar;
            assert!((ha - hb).abs() < 1e-9, "{theta}: {ha} {hb}");
        }
    }

    #[test]
    fn sweep_is_sorted_and_parallel_safe() {
        let pts = sweep_hbar(&Hamiltonian1D::quadratic(), &PeriodicPotential::zero(), -2.0, 2.0, 9).unwrap();
        assert!(pts.windows(2).all(|w| w[0].theta < w[1].theta));
        for p in &pts {
            assert!((p.hbar().unwrap() - 0.5 * p.theta * p.theta).abs() < 1e-14);
        }
    }
}
