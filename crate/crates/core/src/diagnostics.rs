//! Linearized quantities along correctors and the numerical certificate of
//! non-quasiconvexity for a sampled effective Hamiltonian.

use serde::{Deserialize, Serialize};

use crate::cell::{CellConfig, CellProblem, CorrectorSolution};
use crate::error::{Error, Result};
use crate::hamiltonian::{max_abs_d1, Hamiltonian1D};
use crate::numeric::{best_interior_bump, cumulative_hermite, linspace};
use crate::synth::CounterexampleBundle;

/// Band around zero inside which `I(1)` counts as zero.
pub const I_SIGN_BAND: f64 = 1e-9;
/// Accuracy claimed for `H̄` values.
pub const HBAR_TOLERANCE: f64 = 1e-8;
/// Smallest certificate margin ever accepted.
pub const MIN_MARGIN: f64 = 1e-6;

/// `I(x) = ∫_0^x G'(f)` on the corrector grid.
#[derive(Clone, Debug)]
pub struct IProfile {
    pub i_grid: Vec<f64>,
    pub i_end: f64,
}

pub fn compute_i(corr: &CorrectorSolution, g: &Hamiltonian1D) -> IProfile {
    let phi: Vec<f64> = corr.f_grid.iter().map(|&f| g.d1(f)).collect();
    let dphi: Vec<f64> = corr.f_grid.iter().zip(&corr.df_grid).map(|(&f, &df)| g.d2(f) * df).collect();
    let i_grid = cumulative_hermite(&corr.x_grid, &phi, &dphi);
    let i_end = *i_grid.last().unwrap_or(&0.0);
    IProfile { i_grid, i_end }
}

/// Periodic solution of `g' + G'(f) g = c` with `c` in `{-1, 0, 1}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearizedSolution {
    pub theta: f64,
    pub c_theta: f64,
    /// `g(0)`.
    pub big_c: f64,
    #[serde(skip)]
    pub g_grid: Vec<f64>,
    /// `∫ g`.
    pub b_theta: f64,
    /// `I(1)`.
    pub i_end: f64,
    /// `∫_0^1 e^I`.
    pub b_end: f64,
}

pub fn linearized_periodic_solution(corr: &CorrectorSolution, g: &Hamiltonian1D) -> LinearizedSolution {
    let ip = compute_i(corr, g);
    let gp: Vec<f64> = corr.f_grid.iter().map(|&f| g.d1(f)).collect();
    let e: Vec<f64> = ip.i_grid.iter().map(|i| i.exp()).collect();
    let de: Vec<f64> = e.iter().zip(&gp).map(|(e, d)| e * d).collect();
    let b_grid = cumulative_hermite(&corr.x_grid, &e, &de);
    let b_end = *b_grid.last().unwrap_or(&0.0);
    let i_end = ip.i_end;
    let (c, big_c) = if i_end > I_SIGN_BAND {
        (1.0, b_end / i_end.exp_m1())
    } else if i_end < -I_SIGN_BAND {
        (-1.0, -b_end / i_end.exp_m1())
    } else {
        (0.0, 1.0)
    };
    let g_grid: Vec<f64> =
        b_grid.iter().zip(&ip.i_grid).map(|(b, i)| (c * b + big_c) * (-i).exp()).collect();
    let dg: Vec<f64> = g_grid.iter().zip(&gp).map(|(gv, d)| c - d * gv).collect();
    let b_theta = *cumulative_hermite(&corr.x_grid, &g_grid, &dg).last().unwrap_or(&0.0);
    LinearizedSolution { theta: corr.theta, c_theta: c, big_c, g_grid, b_theta, i_end, b_end }
}

/// Direction in which `H̄` is predicted to exceed its current value nearby.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Critical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPrediction {
    pub theta: f64,
    pub side: Side,
    /// Window scale `b(θ)`: the larger value lies within `h b(θ)` of `θ`.
    pub window: f64,
    pub i_end: f64,
}

pub fn predict_local_growth(corr: &CorrectorSolution, g: &Hamiltonian1D) -> GrowthPrediction {
    let lin = linearized_periodic_solution(corr, g);
    let side = match lin.c_theta {
        c if c > 0.0 => Side::Right,
        c if c < 0.0 => Side::Left,
        _ => Side::Critical,
    };
    GrowthPrediction { theta: corr.theta, side, window: lin.b_theta, i_end: lin.i_end }
}

/// Sampled triple with `H̄(θ_mid)` above both neighbours by `margin`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiconvexityCertificate {
    pub theta_left: f64,
    pub theta_mid: f64,
    pub theta_right: f64,
    pub hbar_left: f64,
    pub hbar_mid: f64,
    pub hbar_right: f64,
    pub margin: f64,
}

impl QuasiconvexityCertificate {
    /// The same certificate seen through `θ -> -θ`.
    pub fn reflected(&self) -> Self {
        Self {
            theta_left: -self.theta_right,
            theta_mid: -self.theta_mid,
            theta_right: -self.theta_left,
            hbar_left: self.hbar_right,
            hbar_mid: self.hbar_mid,
            hbar_right: self.hbar_left,
            margin: self.margin,
        }
    }

    /// `H̄` values shifted by a constant.
    pub fn shifted(&self, by: f64) -> Self {
        Self { hbar_left: self.hbar_left + by, hbar_mid: self.hbar_mid + by, hbar_right: self.hbar_right + by, ..*self }
    }
}

/// Required margin for a given `H̄` accuracy.
pub fn required_margin(hbar_tolerance: f64) -> f64 {
    (10.0 * hbar_tolerance).max(MIN_MARGIN)
}

/// Best interior bump of a curve sorted by `θ`, if it clears the margin.
pub fn certify_nonquasiconvex(curve: &[(f64, f64)], hbar_tolerance: f64) -> Option<QuasiconvexityCertificate> {
    let values: Vec<f64> = curve.iter().map(|p| p.1).collect();
    let bump = best_interior_bump(&values)?;
    if !(bump.margin >= required_margin(hbar_tolerance)) {
        return None;
    }
    let (l, m, r) = (curve[bump.left], curve[bump.mid], curve[bump.right]);
    Some(QuasiconvexityCertificate {
        theta_left: l.0,
        theta_mid: m.0,
        theta_right: r.0,
        hbar_left: l.1,
        hbar_mid: m.1,
        hbar_right: r.1,
        margin: bump.margin,
    })
}

/// Ordering and two-sided band check for a pair of correctors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundsReport {
    pub theta1: f64,
    pub theta2: f64,
    pub k1: f64,
    pub lower: f64,
    pub upper: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    /// `∫ (f2 - f1) - (θ2 - θ1)`.
    pub mean_error: f64,
    pub ordering_violations: Vec<usize>,
    pub band_violations: Vec<usize>,
}

impl BoundsReport {
    pub fn ok(&self) -> bool {
        self.ordering_violations.is_empty() && self.band_violations.is_empty()
    }
}

/// `max |G'|` over the momentum range spanned by two correctors.
pub fn k1_between(a: &CorrectorSolution, b: &CorrectorSolution, g: &Hamiltonian1D) -> f64 {
    let lo = a.min_f().min(b.min_f());
    let hi = a.max_f().max(b.max_f());
    max_abs_d1(g, lo, hi)
}

pub fn check_bounds_lemma(
    corr1: &CorrectorSolution,
    corr2: &CorrectorSolution,
    g: &Hamiltonian1D,
) -> Result<BoundsReport> {
    if !(corr1.theta < corr2.theta) || corr1.f_grid.len() != corr2.f_grid.len() {
        return Err(Error::InvalidInput("bounds check needs theta1 < theta2 on a shared grid".into()));
    }
    let dt = corr2.theta - corr1.theta;
    let k1 = k1_between(corr1, corr2, g);
    let (lower, upper) = (dt * (-k1).exp(), dt * k1.exp());
    let tol = 1e-9 * dt + 1e-10;
    let gap: Vec<f64> = corr1.f_grid.iter().zip(&corr2.f_grid).map(|(a, b)| b - a).collect();
    let dgap: Vec<f64> = corr1.df_grid.iter().zip(&corr2.df_grid).map(|(a, b)| b - a).collect();
    let mean = *cumulative_hermite(&corr1.x_grid, &gap, &dgap).last().unwrap_or(&0.0);
    let ordering_violations = gap.iter().enumerate().filter(|(_, &d)| !(d > 0.0)).map(|(i, _)| i).collect();
    let band_violations = gap
        .iter()
        .enumerate()
        .filter(|(_, &d)| d < lower - tol || d > upper + tol)
        .map(|(i, _)| i)
        .collect();
    Ok(BoundsReport {
        theta1: corr1.theta,
        theta2: corr2.theta,
        k1,
        lower,
        upper,
        min_gap: gap.iter().copied().fold(f64::INFINITY, f64::min),
        max_gap: gap.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_error: mean - dt,
        ordering_violations,
        band_violations,
    })
}

/// Confirmation of a local-growth prediction against sweep samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfirmation {
    pub prediction: GrowthPrediction,
    /// Smallest scanned `h` whose window holds a strictly larger sample.
    pub h: Option<f64>,
    pub witness_theta: Option<f64>,
    pub witness_hbar: Option<f64>,
}

impl GrowthConfirmation {
    pub fn confirmed(&self) -> bool {
        self.h.is_some()
    }
}

/// Scan `h = 2^-20, ..., 2^0` for a sample of `curve` in the predicted
/// window `(θ, θ + h b]` (or its mirror) with `H̄` above `hbar`.
pub fn confirm_local_growth(pred: GrowthPrediction, hbar: f64, curve: &[(f64, f64)]) -> GrowthConfirmation {
    let dir = match pred.side {
        Side::Right => 1.0,
        Side::Left => -1.0,
        Side::Critical => return GrowthConfirmation { prediction: pred, h: None, witness_theta: None, witness_hbar: None },
    };
    let noise = 1e-9 * (1.0 + hbar.abs());
    for k in (0..=20).rev() {
        let h = 1.0 / (1u64 << k) as f64;
        let reach = h * pred.window;
        let hit = curve
            .iter()
            .filter(|(t, _)| {
                let s = dir * (t - pred.theta);
                s > 0.0 && s <= reach
            })
            .filter(|(_, v)| *v > hbar + noise)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some(&(t, v)) = hit {
            return GrowthConfirmation { prediction: pred, h: Some(h), witness_theta: Some(t), witness_hbar: Some(v) };
        }
    }
    GrowthConfirmation { prediction: pred, h: None, witness_theta: None, witness_hbar: None }
}

/// Settings for [`certify_bundle`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyOptions {
    pub cell: CellConfig,
    /// Sweep points on `[θ0 - c, θ0 + c]`.
    pub points: usize,
    /// Exponents `k` of the scan `c = 2^-k (p2 - p1)`.
    pub c_exp_min: u32,
    pub c_exp_max: u32,
    pub hbar_tolerance: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { cell: CellConfig::default(), points: 129, c_exp_min: 3, c_exp_max: 12, hbar_tolerance: HBAR_TOLERANCE }
    }
}

/// Everything produced by the certification pipeline.
#[derive(Clone, Debug)]
pub struct CertificationReport {
    pub theta0: f64,
    pub hbar_theta0: f64,
    pub i_end_theta0: f64,
    /// Half-width that was certified, if any.
    pub c: Option<f64>,
    /// Every half-width tried, with `I(1)` at `θ0 ∓ c`.
    pub c_trials: Vec<(f64, f64, f64)>,
    pub certificate: Option<QuasiconvexityCertificate>,
    pub curve: Vec<(f64, f64)>,
    pub left: Option<GrowthConfirmation>,
    pub right: Option<GrowthConfirmation>,
    pub k1_profile: f64,
    pub k1_window: Option<f64>,
}

impl CertificationReport {
    pub fn certified(&self) -> bool {
        self.certificate.is_some()
    }
}

/// Scan `c` (largest first) until the signs of `I(1)` at `θ0 ∓ c` are right
/// and a sweep over `[θ0 - c, θ0 + c]` shows an interior bump.
pub fn certify_bundle(bundle: &CounterexampleBundle, opts: &CertifyOptions) -> Result<CertificationReport> {
    let cell = CellProblem::new(bundle.g.clone(), bundle.v.clone(), opts.cell)?;
    certify_with(&cell, bundle.theta0, bundle.p2 - bundle.p1, bundle.k1, opts)
}

/// [`certify_bundle`] on an explicit cell problem around `theta0`.
pub fn certify_with(
    cell: &CellProblem,
    theta0: f64,
    scale: f64,
    k1_profile: f64,
    opts: &CertifyOptions,
) -> Result<CertificationReport> {
    let g = cell.hamiltonian();
    let center = cell.solve(theta0)?;
    let i0 = compute_i(&center, g).i_end;
    let mut report = CertificationReport {
        theta0,
        hbar_theta0: center.hbar,
        i_end_theta0: i0,
        c: None,
        c_trials: Vec::new(),
        certificate: None,
        curve: Vec::new(),
        left: None,
        right: None,
        k1_profile,
        k1_window: None,
    };
    for k in opts.c_exp_min..=opts.c_exp_max {
        let c = scale / (1u64 << k) as f64;
        let lo = cell.solve(theta0 - c)?;
        let hi = cell.solve(theta0 + c)?;
        let (il, ir) = (compute_i(&lo, g).i_end, compute_i(&hi, g).i_end);
        report.c_trials.push((c, il, ir));
        if !(il > I_SIGN_BAND && ir < -I_SIGN_BAND) {
            continue;
        }
        let thetas = linspace(theta0 - c, theta0 + c, opts.points);
        let sweep = cell.sweep(&thetas);
        let mut curve = Vec::with_capacity(sweep.len());
        for p in sweep {
            curve.push((p.theta, p.result?.hbar));
        }
        let Some(cert) = certify_nonquasiconvex(&curve, opts.hbar_tolerance) else {
            continue;
        };
        let left = confirm_local_growth(predict_local_growth(&lo, g), lo.hbar, &curve);
        let right = confirm_local_growth(predict_local_growth(&hi, g), hi.hbar, &curve);
        report.c = Some(c);
        report.certificate = Some(cert);
        report.curve = curve;
        report.left = Some(left);
        report.right = Some(right);
        report.k1_window = Some(k1_between(&lo, &hi, g));
        break;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PeriodicPotential;

    fn zero_cell(g: Hamiltonian1D) -> CellProblem {
        CellProblem::new(g, PeriodicPotential::zero(), CellConfig::default()).unwrap()
    }

    #[test]
    fn i_for_constant_correctors() {
        let g = Hamiltonian1D::quadratic();
        let cell = zero_cell(g.clone());
        let s = cell.solve(0.0).unwrap();
        assert_eq!(compute_i(&s, &g).i_end, 0.0);
        let s = cell.solve(0.7).unwrap();
        assert!((compute_i(&s, &g).i_end - 0.7).abs() < 1e-12);
    }

    #[test]
    fn linearized_cases() {
        let g = Hamiltonian1D::quadratic();
        let cell = zero_cell(g.clone());
        let crit = linearized_periodic_solution(&cell.solve(0.0).unwrap(), &g);
        assert_eq!(crit.c_theta, 0.0);
        assert!((crit.b_theta - 1.0).abs() < 1e-14);
        assert!(crit.g_grid.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        for theta in [-0.5, 0.5] {
            let lin = linearized_periodic_solution(&cell.solve(theta).unwrap(), &g);
            assert_eq!(lin.c_theta, theta.signum());
            assert!(lin.big_c > 0.0 && lin.b_theta > 0.0);
            // Constant corrector: g solves g' + θ g = c, periodic, so g = c/θ.
            assert!((lin.b_theta - 1.0 / theta.abs()).abs() < 1e-10);
            assert!((lin.g_grid[0] - lin.g_grid[lin.g_grid.len() - 1]).abs() < 1e-10);
        }
    }

    #[test]
    fn linearized_residual_on_nontrivial_corrector() {
        let g = Hamiltonian1D::quadratic();
        let cell = CellProblem::new(g.clone(), PeriodicPotential::cosine(1.0), CellConfig::default()).unwrap();
        let s = cell.solve(0.6).unwrap();
        let lin = linearized_periodic_solution(&s, &g);
        assert!(lin.g_grid.iter().all(|&v| v > 0.0));
        let n = lin.g_grid.len() - 1;
        assert!((lin.g_grid[0] - lin.g_grid[n]).abs() < 1e-9 * lin.g_grid[0]);
        let h = 1.0 / n as f64;
        for i in 1..n {
            let d = (lin.g_grid[i + 1] - lin.g_grid[i - 1]) / (2.0 * h);
            let r = d + g.d1(s.f_grid[i]) * lin.g_grid[i] - lin.c_theta;
            assert!(r.abs() < 1e-5, "{i}: {r}");
        }
        assert_eq!(lin.c_theta.signum(), lin.i_end.signum());
    }

    #[test]
    fn predictions_for_convex_quadratic() {
        let g = Hamiltonian1D::quadratic();
        let cell = zero_cell(g.clone());
        assert_eq!(predict_local_growth(&cell.solve(0.0).unwrap(), &g).side, Side::Critical);
        assert_eq!(predict_local_growth(&cell.solve(1.0).unwrap(), &g).side, Side::Right);
        assert_eq!(predict_local_growth(&cell.solve(-1.0).unwrap(), &g).side, Side::Left);
    }

    #[test]
    fn no_certificate_for_quasiconvex_curves() {
        let convex: Vec<(f64, f64)> = linspace(-2.0, 2.0, 81).into_iter().map(|t| (t, 0.5 * t * t)).collect();
        assert!(certify_nonquasiconvex(&convex, HBAR_TOLERANCE).is_none());
        let quasi: Vec<(f64, f64)> =
            linspace(-2.0, 2.0, 81).into_iter().map(|t: f64| (t, (t.abs() - 0.5).max(0.0).sqrt())).collect();
        assert!(certify_nonquasiconvex(&quasi, HBAR_TOLERANCE).is_none());
        let bumpy: Vec<(f64, f64)> =
            linspace(-1.0, 1.0, 65).into_iter().map(|t| (t, t * t + 0.2 * (-(t * t) * 50.0).exp())).collect();
        assert!(certify_nonquasiconvex(&bumpy, HBAR_TOLERANCE).is_some());
    }

    #[test]
    fn certificate_reflection_is_involution() {
        let c = QuasiconvexityCertificate {
            theta_left: -0.1,
            theta_mid: 0.02,
            theta_right: 0.1,
            hbar_left: 0.0,
            hbar_mid: 0.3,
            hbar_right: 0.1,
            margin: 0.2,
        };
        assert_eq!(c.reflected().reflected(), c);
        assert_eq!(c.reflected().theta_left, -0.1);
    }

    #[test]
    fn bounds_for_zero_potential() {
        let g = Hamiltonian1D::default_g1();
        let cell = zero_cell(g.clone());
        let r = check_bounds_lemma(&cell.solve(0.1).unwrap(), &cell.solve(0.4).unwrap(), &g).unwrap();
        assert!(r.ok());
        assert!((r.min_gap - 0.3).abs() < 1e-14 && r.mean_error.abs() < 1e-13);
    }
}
