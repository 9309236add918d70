//! Separable d-dimensional systems `G1(p1) + Σ Ğ(p_i)` built on a certified
//! one-dimensional counterexample.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{CellConfig, CellProblem, CorrectorSolution};
use crate::diagnostics::{certify_nonquasiconvex, QuasiconvexityCertificate};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_breve_g, build_j, Hamiltonian1D, JFunction};
use crate::numeric::{golden_max, linspace};
use crate::potential::PeriodicPotential;
use crate::synth::CounterexampleBundle;

/// Lower end of the grid used for the curvature ratio.
pub const M_GRID_MIN: f64 = 1e-4;
/// Upper end of the grid used for the curvature ratio.
pub const M_GRID_MAX: f64 = 1e3;

/// `M = -inf_{p > 0} G1''(p) / G1'(p)^2` and where it is attained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MConstant {
    pub m: f64,
    pub argmin: f64,
}

/// Curvature constant of `G1` on a log grid over `[1e-4, 1e3]` with
/// `points` nodes, refined by golden section around the smallest sample.
pub fn compute_m_with(g1: &Hamiltonian1D, points: usize) -> Result<MConstant> {
    let points = points.max(16);
    let (la, lb) = (M_GRID_MIN.ln(), M_GRID_MAX.ln());
    let ratio = |p: f64| {
        let d1 = g1.d1(p);
        g1.d2(p) / (d1 * d1)
    };
    let mut best = (f64::INFINITY, 0usize);
    let grid: Vec<f64> = (0..points).map(|i| (la + (lb - la) * i as f64 / (points - 1) as f64).exp()).collect();
    for (i, &p) in grid.iter().enumerate() {
        let d1 = g1.d1(p);
        if !(d1 > 0.0) {
            return Err(Error::HypothesisViolation(format!("G1'({p}) = {d1} is not positive")));
        }
        let r = ratio(p);
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("G1''/G1'^2 at p = {p}")));
        }
        if r < best.0 {
            best = (r, i);
        }
    }
    let i = best.1;
    let (a, b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(points - 1)]);
    let refined = golden_max(|p| -ratio(p), a, b, 1e-13 * b);
    let (value, argmin) = if -refined.value < best.0 { (-refined.value, refined.x) } else { (best.0, grid[i]) };
    if !(value < 0.0) {
        return Err(Error::NonPositive(-value));
    }
    Ok(MConstant { m: -value, argmin })
}

/// [`compute_m_with`] on 20001 grid points.
pub fn compute_m(g1: &Hamiltonian1D) -> Result<MConstant> {
    compute_m_with(g1, 20001)
}

/// Settings for [`SeparableSystem::new`].
#[derive(Clone, Debug)]
pub struct MultidOptions {
    pub cell: CellConfig,
    /// Potential in the companion coordinates.
    pub breve_v: PeriodicPotential,
    /// Relative headroom added to the measured first-coordinate level.
    pub budget_slack: f64,
}

impl Default for MultidOptions {
    fn default() -> Self {
        Self { cell: CellConfig::default(), breve_v: PeriodicPotential::zero(), budget_slack: 0.1 }
    }
}

/// Scalar summary of a [`SeparableSystem`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemSummary {
    pub d: usize,
    pub m: f64,
    pub m_argmin: f64,
    pub r: f64,
    pub r1: f64,
    pub breve_r: f64,
    /// The a priori first-coordinate level `max G1(θ0 ± c) + 2 sup|V1|`.
    pub r1_a_priori: f64,
    /// Largest `G1` value reached by correctors at `θ0 ± c`.
    pub r1_measured: f64,
    pub p_r: f64,
    pub c: f64,
    pub theta0: f64,
    pub j_c: f64,
}

/// `G1(p1) + Σ_{i≥2} Ğ(p_i)` with potentials `V1(x1) + Σ V̆(x_i)`.
pub struct SeparableSystem {
    pub d: usize,
    pub g1: Hamiltonian1D,
    pub v1: PeriodicPotential,
    pub breve_g: Hamiltonian1D,
    pub breve_v: PeriodicPotential,
    pub m: MConstant,
    pub j: JFunction,
    pub r: f64,
    pub r1: f64,
    pub breve_r: f64,
    pub r1_a_priori: f64,
    pub r1_measured: f64,
    pub c: f64,
    pub theta0: f64,
    first: CellProblem,
    companion: CellProblem,
    cache: Mutex<HashMap<CacheKey, Coordinate>>,
}

type CacheKey = (String, u64, u64, i64);

/// Effective value and corrector level of one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub theta: f64,
    pub hbar: f64,
    /// `max_x G(f_θ(x))` for this coordinate's Hamiltonian.
    pub level: f64,
}

/// Result of [`SeparableSystem::effective_sum`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveSum {
    pub theta: Vec<f64>,
    pub value: f64,
    pub coordinates: Vec<Coordinate>,
    /// Every first-coordinate level is `<= R1` and every other one `<= Ř`.
    pub within_budget: bool,
}

fn level_of(g: &Hamiltonian1D, sol: &CorrectorSolution) -> f64 {
    sol.f_grid.iter().map(|&f| g.eval(f)).fold(f64::NEG_INFINITY, f64::max)
}

impl SeparableSystem {
    /// Assemble the system around a bundle whose effective Hamiltonian loses
    /// quasiconvexity on `[θ0 - c, θ0 + c]`.
    pub fn new(bundle: &CounterexampleBundle, d: usize, c: f64, opts: &MultidOptions) -> Result<Self> {
        Self::from_parts(bundle.g.clone(), bundle.v.clone(), bundle.theta0, d, c, opts)
    }

    /// Assemble the system from `G1`, `V1` and the segment centre `θ0`.
    pub fn from_parts(
        g1: Hamiltonian1D,
        v1: PeriodicPotential,
        theta0: f64,
        d: usize,
        c: f64,
        opts: &MultidOptions,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!("dimension must be at least 2, got {d}")));
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidInput(format!("half-width c must lie in (0, 1), got {c}")));
        }
        for p in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let (a, b) = (g1.eval(p), g1.eval(-p));
            if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                return Err(Error::HypothesisViolation(format!("G1 is not even: G1({p}) = {a}, G1(-{p}) = {b}")));
            }
        }
        let m = compute_m(&g1)?;
        let j = build_j(m.m, d)?;
        let first = CellProblem::new(g1.clone(), v1.clone(), opts.cell)?;
        let lo = first.solve(theta0 - c)?;
        let hi = first.solve(theta0 + c)?;
        // f_θ is monotone in θ and G1 is even and increasing in |p|, so the
        // extreme G1 values over the segment sit at the endpoint extremes.
        let r1_measured = g1.eval(lo.min_f()).max(g1.eval(hi.max_f())).max(level_of(&g1, &lo)).max(level_of(&g1, &hi));
        let r1 = r1_measured * (1.0 + opts.budget_slack.max(0.0));
        let r1_a_priori = g1.eval(theta0 - c).max(g1.eval(theta0 + c)) + 2.0 * v1.sup_abs();
        let j_c = j.value(c)?;
        let breve_r = j_c + 2.0 * opts.breve_v.sup_abs();
        let r = r1 + (d - 1) as f64 * breve_r;
        let breve_g = build_breve_g(m.m, d, r)?;
        if !(breve_g.eval(c) < r) {
            return Err(Error::HypothesisViolation(format!("companion level at c exceeds R = {r}")));
        }
        let companion = CellProblem::new(breve_g.clone(), opts.breve_v.clone(), opts.cell)?;
        Ok(Self {
            d,
            g1,
            v1,
            breve_g,
            breve_v: opts.breve_v.clone(),
            m,
            j,
            r,
            r1,
            breve_r,
            r1_a_priori,
            r1_measured,
            c,
            theta0,
            first,
            companion,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn summary(&self) -> SystemSummary {
        SystemSummary {
            d: self.d,
            m: self.m.m,
            m_argmin: self.m.argmin,
            r: self.r,
            r1: self.r1,
            breve_r: self.breve_r,
            r1_a_priori: self.r1_a_priori,
            r1_measured: self.r1_measured,
            p_r: self.j.inverse(self.r).unwrap_or(f64::NAN),
            c: self.c,
            theta0: self.theta0,
            j_c: self.j.value(self.c).unwrap_or(f64::NAN),
        }
    }

    /// `G1(p1) + Σ Ğ(p_i)`.
    pub fn value(&self, p: &[f64]) -> f64 {
        self.g1.eval(p[0]) + p[1..].iter().map(|&q| self.breve_g.eval(q)).sum::<f64>()
    }

    fn coordinate(&self, first: bool, theta: f64) -> Result<Coordinate> {
        let (cell, g, v) =
            if first { (&self.first, &self.g1, &self.v1) } else { (&self.companion, &self.breve_g, &self.breve_v) };
        let key = (g.label().to_string(), v.fingerprint(), u64::from(first), (theta * 1e12).round() as i64);
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(*hit);
        }
        let sol = cell.solve(theta)?;
        let coord = Coordinate { theta, hbar: sol.hbar, level: level_of(g, &sol) };
        self.cache.lock().expect("cache poisoned").insert(key, coord);
        Ok(coord)
    }

    /// Whether `theta` lies in `[θ0 - c, θ0 + c] × [-c, c]^{d-1}`.
    pub fn in_box(&self, theta: &[f64]) -> bool {
        let slack = 1e-12 * (1.0 + self.c);
        theta.len() == self.d
            && (theta[0] - self.theta0).abs() <= self.c + slack
            && theta[1..].iter().all(|t| t.abs() <= self.c + slack)
    }

    /// `H̄1(θ1) + Σ H̄̆(θ_i)` inside the validity box.
    pub fn effective_sum(&self, theta: &[f64]) -> Result<EffectiveSum> {
        if !self.in_box(theta) {
            return Err(Error::OutOfBox { theta: theta.to_vec() });
        }
        let coordinates = theta
            .par_iter()
            .enumerate()
            .map(|(i, &t)| self.coordinate(i == 0, t))
            .collect::<Result<Vec<_>>>()?;
        let value = coordinates.iter().map(|c| c.hbar).sum();
        let within_budget = coordinates[0].level <= self.r1
            && coordinates[1..].iter().all(|c| c.level <= self.breve_r * (1.0 + 1e-12) + 1e-15);
        Ok(EffectiveSum { theta: theta.to_vec(), value, coordinates, within_budget })
    }

    /// Scan `θ1` over `[θ0 - c, θ0 + c]` with the other coordinates at 0.
    pub fn scan_segment(&self, points: usize, hbar_tolerance: f64) -> Result<SegmentScan> {
        let shift_coord = self.coordinate(false, 0.0)?;
        let shift = (self.d - 1) as f64 * shift_coord.hbar;
        let thetas = linspace(self.theta0 - self.c, self.theta0 + self.c, points);
        let sums = thetas
            .par_iter()
            .map(|&t| {
                let mut theta = vec![0.0; self.d];
                theta[0] = t;
                self.effective_sum(&theta)
            })
            .collect::<Result<Vec<_>>>()?;
        let curve: Vec<(f64, f64)> = sums.iter().map(|s| (s.theta[0], s.value)).collect();
        let certificate = certify_nonquasiconvex(&curve, hbar_tolerance);
        let max_level_first = sums.iter().map(|s| s.coordinates[0].level).fold(f64::NEG_INFINITY, f64::max);
        let max_level_companion = sums
            .iter()
            .flat_map(|s| s.coordinates[1..].iter().map(|c| c.level))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(SegmentScan {
            shift,
            curve,
            certificate,
            max_level_first,
            max_level_companion,
            within_budget: sums.iter().all(|s| s.within_budget),
        })
    }

    /// Bounding box of `{value <= r}`: each coordinate reaches at most the
    /// point where its own term alone equals `r`.
    pub fn sublevel_box(&self, r: f64) -> Vec<f64> {
        let reach = |g: &Hamiltonian1D, budget: f64| {
            if !(budget > 0.0) {
                return 0.0;
            }
            let mut hi = 1.0;
            while g.eval(hi) < budget {
                hi *= 2.0;
            }
            crate::numeric::bisect_increasing(|p| g.eval(p) - budget, 0.0, hi, 1e-15 * hi)
        };
        let floor1 = self.g1.eval(0.0);
        let floor_b = self.breve_g.eval(0.0);
        let others = (self.d - 1) as f64 * floor_b;
        let mut out = vec![reach(&self.g1, r - others)];
        // Widen slightly so that boundary points are never excluded.
        out[0] *= 1.0 + 1e-9;
        let b = reach(&self.breve_g, r - floor1 - (self.d - 2) as f64 * floor_b) * (1.0 + 1e-9);
        out.extend(std::iter::repeat(b).take(self.d - 1));
        out
    }

    /// Monte-Carlo midpoint test of the sublevel set `{value <= r}` together
    /// with the companion curvature criterion at every accepted sample.
    pub fn check_sublevel_convexity(&self, r: f64, pairs: usize, seed: u64) -> Result<ConvexityReport> {
        if r > self.r * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!("level {r} exceeds R = {}", self.r)));
        }
        let bbox = self.sublevel_box(r);
        let tol = 1e-12 * (1.0 + r.abs());
        let k = self.j.k;
        let criterion = |q: f64| {
            let d1 = self.breve_g.d1(q);
            self.breve_g.d2(q) - k * d1 * d1
        };
        let j_gap = |q: f64| -> f64 {
            let a = q.abs();
            match (self.j.d1(a), self.j.d2(a)) {
                (Ok(d1), Ok(d2)) => d2 - k * d1 * d1,
                _ => f64::NAN,
            }
        };

        const BATCH: usize = 4096;
        let batches = pairs.div_ceil(BATCH);
        let results: Vec<Batch> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                let count = BATCH.min(pairs - b * BATCH);
                let mut out = Batch::fresh();
                let draw = |rng: &mut ChaCha8Rng, out: &mut Batch| -> Vec<f64> {
                    loop {
                        let p: Vec<f64> = bbox.iter().map(|&w| if w > 0.0 { rng.gen_range(-w..=w) } else { 0.0 }).collect();
                        out.draws += 1;
                        if self.value(&p) <= r {
                            return p;
                        }
                    }
                };
                for _ in 0..count {
                    let p = draw(&mut rng, &mut out);
                    let q = draw(&mut rng, &mut out);
                    let mid: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
                    let v = self.value(&mid);
                    out.max_excess = out.max_excess.max(v - r);
                    if v > r + tol && out.violations.len() < 16 {
                        out.violations.push(Violation { p: p.clone(), q: q.clone(), value: v });
                    }
                    for s in [&p, &q] {
                        for &x in &s[1..] {
                            out.criterion_min = out.criterion_min.min(criterion(x));
                            out.j_gap_min = out.j_gap_min.min(j_gap(x));
                        }
                    }
                }
                out
            })
            .collect();

        let mut total = Batch::fresh();
        for b in results {
            total.draws += b.draws;
            total.max_excess = total.max_excess.max(b.max_excess);
            total.criterion_min = total.criterion_min.min(b.criterion_min);
            total.j_gap_min = total.j_gap_min.min(b.j_gap_min);
            total.violations.extend(b.violations);
        }
        // Edges of the companion slice.
        let edge = bbox.get(1).copied().unwrap_or(0.0) / (1.0 + 1e-9);
        for x in [edge, -edge, 0.0] {
            total.criterion_min = total.criterion_min.min(criterion(x));
            total.j_gap_min = total.j_gap_min.min(j_gap(x));
        }
        Ok(ConvexityReport {
            d: self.d,
            level: r,
            pairs,
            draws: total.draws,
            bounding_box: bbox,
            max_excess: total.max_excess,
            criterion_min: total.criterion_min,
            j_inequality_min: total.j_gap_min,
            violations: total.violations,
        })
    }

    /// Smallest centred second difference of `Ğ` on `[-width, width]`.
    pub fn companion_min_second_difference(&self, width: f64, points: usize) -> f64 {
        let xs = linspace(-width, width, points.max(3));
        let h = xs[1] - xs[0];
        xs.windows(3)
            .map(|w| (self.breve_g.eval(w[0]) - 2.0 * self.breve_g.eval(w[1]) + self.breve_g.eval(w[2])) / (h * h))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Default)]
struct Batch {
    draws: usize,
    max_excess: f64,
    criterion_min: f64,
    j_gap_min: f64,
    violations: Vec<Violation>,
}

impl Batch {
    fn fresh() -> Self {
        Self { max_excess: f64::NEG_INFINITY, criterion_min: f64::INFINITY, j_gap_min: f64::INFINITY, ..Self::default() }
    }
}

/// A pair in the sublevel set whose midpoint is not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub value: f64,
}

/// Outcome of [`SeparableSystem::check_sublevel_convexity`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub d: usize,
    pub level: f64,
    pub pairs: usize,
    /// Box draws needed, rejections included.
    pub draws: usize,
    pub bounding_box: Vec<f64>,
    /// Largest `value(midpoint) - r` seen.
    pub max_excess: f64,
    /// Smallest `Ğ'' - M (d-1) Ğ'^2` over sampled companion coordinates.
    pub criterion_min: f64,
    /// Smallest `J'' - M (d-1) J'^2` over the same samples.
    pub j_inequality_min: f64,
    pub violations: Vec<Violation>,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.criterion_min > 0.0 && self.j_inequality_min > 0.0
    }

    /// The report, or the first violating pair as an error.
    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            Some(v) => Err(Error::ConvexityViolation { p: v.p.clone(), q: v.q.clone(), value: v.value, level: self.level }),
            None => Ok(self),
        }
    }
}

/// Output of [`SeparableSystem::scan_segment`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentScan {
    /// `(d - 1) H̄̆(0)`.
    pub shift: f64,
    /// `(θ1, effective sum)`.
    pub curve: Vec<(f64, f64)>,
    pub certificate: Option<QuasiconvexityCertificate>,
    pub max_level_first: f64,
    pub max_level_companion: f64,
    pub within_budget: bool,
}

/// Differences between the segment certificate and the shifted 1-D one.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CertificateAgreement {
    pub theta_diff: f64,
    pub hbar_diff: f64,
    pub margin_diff: f64,
}

impl CertificateAgreement {
    pub fn within(&self, theta_tol: f64, hbar_tol: f64) -> bool {
        self.theta_diff <= theta_tol && self.hbar_diff <= hbar_tol && self.margin_diff <= hbar_tol
    }
}

/// Compare a segment certificate with a 1-D certificate shifted by `shift`.
pub fn compare_certificates(
    segment: &QuasiconvexityCertificate,
    one_d: &QuasiconvexityCertificate,
    shift: f64,
) -> CertificateAgreement {
    let s = one_d.shifted(shift);
    let theta_diff = [
        segment.theta_left - s.theta_left,
        segment.theta_mid - s.theta_mid,
        segment.theta_right - s.theta_right,
    ]
    .iter()
    .fold(0.0f64, |m, d| m.max(d.abs()));
    let hbar_diff = [segment.hbar_left - s.hbar_left, segment.hbar_mid - s.hbar_mid, segment.hbar_right - s.hbar_right]
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()));
    CertificateAgreement { theta_diff, hbar_diff, margin_diff: (segment.margin - s.margin).abs() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_of_default_generator_is_stable_and_scales() {
        let g = Hamiltonian1D::default_g1();
        let a = compute_m_with(&g, 10001).unwrap();
        let b = compute_m_with(&g, 20001).unwrap();
        assert!(a.m > 0.0 && a.m.is_finite());
        assert!((a.m - b.m).abs() < 1e-4 * b.m, "{a:?} {b:?}");
        let scaled = compute_m(&g.scaled(2.0)).unwrap();
        assert!((scaled.m - 0.5 * b.m).abs() < 1e-9 * b.m);
    }

    #[test]
    fn m_rejects_convex_generator() {
        assert!(matches!(compute_m(&Hamiltonian1D::quadratic()), Err(Error::NonPositive(_))));
    }

    #[test]
    fn j_inequality_margin_at_origin() {
        let j = build_j(0.3, 3).unwrap();
        let gap = j.d2(0.0).unwrap() - j.k * j.d1(0.0).unwrap().powi(2);
        assert!((gap - 1.0 / j.k).abs() < 1e-15);
    }

    fn flat_system(d: usize) -> SeparableSystem {
        let opts = MultidOptions::default();
        SeparableSystem::from_parts(Hamiltonian1D::default_g1(), PeriodicPotential::zero(), 0.3, d, 0.5, &opts).unwrap()
    }

    #[test]
    fn zero_potentials_give_the_plain_sum() {
        let sys = flat_system(3);
        assert!((sys.r - (sys.r1 + 2.0 * sys.breve_r)).abs() < 1e-12 * sys.r);
        for theta in [[0.3, 0.0, 0.0], [-0.1, 0.4, -0.2], [0.8, -0.5, 0.5]] {
            let s = sys.effective_sum(&theta).unwrap();
            let exact = sys.value(&theta);
            assert!((s.value - exact).abs() < 1e-12, "{theta:?}: {} vs {exact}", s.value);
            assert!(s.within_budget);
        }
    }

    #[test]
    fn outside_the_box_is_rejected() {
        let sys = flat_system(2);
        assert!(matches!(sys.effective_sum(&[0.3, 0.6]), Err(Error::OutOfBox { .. })));
        assert!(matches!(sys.effective_sum(&[0.9, 0.0]), Err(Error::OutOfBox { .. })));
        assert!(matches!(sys.effective_sum(&[0.3]), Err(Error::OutOfBox { .. })));
    }

    #[test]
    fn sublevel_sets_pass_midpoint_probes() {
        let sys = flat_system(2);
        let origin = sys.check_sublevel_convexity(0.0, 1000, 1).unwrap();
        assert!(origin.passed());
        assert!(origin.bounding_box.iter().all(|&w| w == 0.0));
        for r in [0.5 * sys.r, sys.r] {
            let rep = sys.check_sublevel_convexity(r, 20_000, 3).unwrap().into_result().unwrap();
            assert!(rep.passed() && rep.max_excess <= 0.0);
            assert!((rep.criterion_min - 1.0 / sys.j.k).abs() < 1e-9 / sys.j.k);
        }
        assert!(sys.check_sublevel_convexity(2.0 * sys.r, 10, 1).is_err());
        assert!(sys.companion_min_second_difference(2.0, 801) > 0.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let sys = flat_system(2);
        let a = sys.check_sublevel_convexity(sys.r, 5000, 11).unwrap();
        let b = sys.check_sublevel_convexity(sys.r, 5000, 11).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.max_excess, b.max_excess);
    }
}
