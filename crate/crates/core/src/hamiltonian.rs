//! Scalar Hamiltonians with exact derivatives, the bump modification that
//! turns a convex Hamiltonian into a quasiconvex one with certified points,
//! and the convex companion built from the `J` function.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect_increasing, expand_bracket_increasing, find_root_increasing, sample_extrema, RootOptions};

/// Sample count for dense derivative scans.
pub const DENSE_SAMPLES: usize = 1 << 14;

/// Names accepted by [`catalog`].
pub const CATALOG_NAMES: [&str; 5] = ["quadratic", "fig2_bump", "fig3_flat", "multid_g1", "flat_quartic"];

/// A caller-supplied Hamiltonian with exact derivatives.
pub trait HamiltonianFn: Send + Sync + fmt::Debug {
    fn value(&self, p: f64) -> f64;
    fn d1(&self, p: f64) -> f64;
    fn d2(&self, p: f64) -> f64;
}

/// Power-growth constants: `alpha0 |p|^eta - 1/alpha0 <= G(p) <= alpha1 (|p|^eta + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub eta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
}

impl Growth {
    pub fn lower(&self, p: f64) -> f64 {
        self.alpha0 * p.abs().powf(self.eta) - 1.0 / self.alpha0
    }

    pub fn upper(&self, p: f64) -> f64 {
        self.alpha1 * (p.abs().powf(self.eta) + 1.0)
    }
}

/// Parameters of the additive bump `a * delta * psi((p - p0) / delta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpParams {
    pub a: f64,
    pub p0: f64,
    pub delta: f64,
}

impl BumpParams {
    pub fn new(a: f64, p0: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !(a >= -1.0) || !p0.is_finite() || !a.is_finite() {
            return Err(Error::InvalidInput(format!("bump needs delta > 0 and a >= -1, got a={a}, delta={delta}")));
        }
        Ok(Self { a, p0, delta })
    }

    /// True when `p` lies in the open support `(p0 - delta, p0 + delta)`.
    pub fn covers(&self, p: f64) -> bool {
        ((p - self.p0) / self.delta).abs() < 1.0
    }
}

/// Compactly supported bump `(1 - p^2)^3` on `[-1, 1]`.
pub fn bump_psi(p: f64) -> f64 {
    if p.abs() >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - p * p;
    s * s * s
}

pub fn bump_psi_d1(p: f64) -> f64 {
    if p.abs() >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - p * p;
    -6.0 * p * s * s
}

pub fn bump_psi_d2(p: f64) -> f64 {
    if p.abs() >= 1.0 {
        return 0.0;
    }
    -6.0 * (1.0 - p * p) * (1.0 - 5.0 * p * p)
}

/// Log-barrier profile `J(p) = -(ln(1 - p) + p) / k` on `[0, 1)`, `k = M (d - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JFunction {
    pub k: f64,
}

impl JFunction {
    fn check(p: f64) -> Result<()> {
        if (0.0..1.0).contains(&p) {
            Ok(())
        } else {
            Err(Error::DomainError { p })
        }
    }

    pub fn value(&self, p: f64) -> Result<f64> {
        Self::check(p)?;
        Ok(self.raw(p))
    }

    pub fn d1(&self, p: f64) -> Result<f64> {
        Self::check(p)?;
        Ok(p / ((1.0 - p) * self.k))
    }

    pub fn d2(&self, p: f64) -> Result<f64> {
        Self::check(p)?;
        Ok(1.0 / ((1.0 - p) * (1.0 - p) * self.k))
    }

    fn raw(&self, p: f64) -> f64 {
        // -(ln(1-p) + p) = sum_{n>=2} p^n / n, summed directly for small p
        // to avoid cancellation.
        let s = if p < 0.05 {
            let mut term = p * p;
            let mut acc = 0.0;
            for n in 2..40 {
                acc += term / n as f64;
                term *= p;
            }
            acc
        } else {
            -((-p).ln_1p() + p)
        };
        s / self.k
    }

    /// `J^{-1}(r)` by bisection to `1e-14` absolute.
    pub fn inverse(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidInput(format!("J^-1 needs r >= 0, got {r}")));
        }
        let hi = 1.0 - f64::EPSILON;
        if self.raw(hi) < r {
            return Err(Error::DomainError { p: hi });
        }
        Ok(bisect_increasing(|p| self.raw(p) - r, 0.0, hi, 1e-14))
    }
}

/// Build `J` for the constant `M > 0` and dimension `d >= 2`.
pub fn build_j(m: f64, d: usize) -> Result<JFunction> {
    if !(m > 0.0) || !m.is_finite() || d < 2 {
        return Err(Error::InvalidInput(format!("build_j needs M > 0 and d >= 2, got M={m}, d={d}")));
    }
    Ok(JFunction { k: m * (d - 1) as f64 })
}

/// The even convex companion: `J(|p|)` up to `p_R = J^{-1}(R)`, then the
/// second-order Taylor extension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreveParams {
    pub j: JFunction,
    pub r: f64,
    pub p_r: f64,
    j1_r: f64,
    j2_r: f64,
}

impl BreveParams {
    fn value(&self, p: f64) -> f64 {
        let q = p.abs();
        if q <= self.p_r {
            self.j.raw(q)
        } else {
            let s = q - self.p_r;
            self.r + self.j1_r * s + 0.5 * self.j2_r * s * s
        }
    }

    fn d1(&self, p: f64) -> f64 {
        let q = p.abs();
        let v = if q <= self.p_r { q / ((1.0 - q) * self.j.k) } else { self.j1_r + self.j2_r * (q - self.p_r) };
        v.copysign(p)
    }

    fn d2(&self, p: f64) -> f64 {
        let q = p.abs();
        if q <= self.p_r {
            1.0 / ((1.0 - q) * (1.0 - q) * self.j.k)
        } else {
            self.j2_r
        }
    }
}

/// Build the companion Hamiltonian for level `R`.
pub fn build_breve_g(m: f64, d: usize, r: f64) -> Result<Hamiltonian1D> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("level R must be positive, got {r}")));
    }
    let j = build_j(m, d)?;
    let p_r = j.inverse(r)?;
    let params = BreveParams { j, r, p_r, j1_r: j.d1(p_r)?, j2_r: j.d2(p_r)? };
    Ok(Hamiltonian1D { shape: Shape::Breve(params), label: "breve_g".into(), growth: None })
}

/// Piecewise quintic Hermite interpolant through samples of `G, G', G''`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledTable {
    p: Vec<f64>,
    g: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
}

impl SampledTable {
    pub fn new(p: Vec<f64>, g: Vec<f64>, g1: Vec<f64>, g2: Vec<f64>) -> Result<Self> {
        let n = p.len();
        if n < 2 || g.len() != n || g1.len() != n || g2.len() != n {
            return Err(Error::InvalidInput("sampled Hamiltonian needs >= 2 rows of p,G,G1,G2".into()));
        }
        if p.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("sampled Hamiltonian needs strictly increasing p".into()));
        }
        if [&p, &g, &g1, &g2].iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("sampled Hamiltonian table".into()));
        }
        Ok(Self { p, g, g1, g2 })
    }

    /// Returns `(G, G', G'')` at `p`.
    fn eval3(&self, p: f64) -> (f64, f64, f64) {
        let n = self.p.len();
        let end = |i: usize, s: f64| {
            (self.g[i] + self.g1[i] * s + 0.5 * self.g2[i] * s * s, self.g1[i] + self.g2[i] * s, self.g2[i])
        };
        if p <= self.p[0] {
            return end(0, p - self.p[0]);
        }
        if p >= self.p[n - 1] {
            return end(n - 1, p - self.p[n - 1]);
        }
        let i = self.p.partition_point(|&q| q <= p) - 1;
        let h = self.p[i + 1] - self.p[i];
        let t = (p - self.p[i]) / h;
        let c0 = self.g[i];
        let c1 = h * self.g1[i];
        let c2 = 0.5 * h * h * self.g2[i];
        let a = self.g[i + 1] - (c0 + c1 + c2);
        let b = h * self.g1[i + 1] - (c1 + 2.0 * c2);
        let c = h * h * self.g2[i + 1] - 2.0 * c2;
        let c3 = 10.0 * a - 4.0 * b + 0.5 * c;
        let c4 = -15.0 * a + 7.0 * b - c;
        let c5 = 6.0 * a - 3.0 * b + 0.5 * c;
        let v = c0 + t * (c1 + t * (c2 + t * (c3 + t * (c4 + t * c5))));
        let d = c1 + t * (2.0 * c2 + t * (3.0 * c3 + t * (4.0 * c4 + t * 5.0 * c5)));
        let dd = 2.0 * c2 + t * (6.0 * c3 + t * (12.0 * c4 + t * 20.0 * c5));
        (v, d / h, dd / (h * h))
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Quadratic,
    FlatQuartic,
    DefaultG1,
    Bumped { base: Arc<Shape>, bump: BumpParams },
    Reflected(Arc<Shape>),
    Scaled { factor: f64, base: Arc<Shape> },
    Breve(BreveParams),
    Sampled(Arc<SampledTable>),
    Custom(Arc<dyn HamiltonianFn>),
}

impl Shape {
    fn value(&self, p: f64) -> f64 {
        match self {
            Shape::Quadratic => 0.5 * p * p,
            Shape::FlatQuartic => {
                let q = (p.abs() - 1.0).max(0.0);
                0.5 * q * q * q * q
            }
            Shape::DefaultG1 => {
                let s = p * p;
                s + 6.0 * s / (1.0 + s)
            }
            Shape::Bumped { base, bump } => {
                let q = (p - bump.p0) / bump.delta;
                if q.abs() >= 1.0 {
                    base.value(p)
                } else {
                    base.value(p) + bump.a * bump.delta * bump_psi(q)
                }
            }
            Shape::Reflected(base) => base.value(-p),
            Shape::Scaled { factor, base } => factor * base.value(p),
            Shape::Breve(b) => b.value(p),
            Shape::Sampled(t) => t.eval3(p).0,
            Shape::Custom(f) => f.value(p),
        }
    }

    fn d1(&self, p: f64) -> f64 {
        match self {
            Shape::Quadratic => p,
            Shape::FlatQuartic => {
                let q = (p.abs() - 1.0).max(0.0);
                (2.0 * q * q * q).copysign(p)
            }
            Shape::DefaultG1 => {
                let s = 1.0 + p * p;
                2.0 * p + 12.0 * p / (s * s)
            }
            Shape::Bumped { base, bump } => {
                let q = (p - bump.p0) / bump.delta;
                if q.abs() >= 1.0 {
                    base.d1(p)
                } else {
                    base.d1(p) + bump.a * bump_psi_d1(q)
                }
            }
            Shape::Reflected(base) => -base.d1(-p),
            Shape::Scaled { factor, base } => factor * base.d1(p),
            Shape::Breve(b) => b.d1(p),
            Shape::Sampled(t) => t.eval3(p).1,
            Shape::Custom(f) => f.d1(p),
        }
    }

    fn d2(&self, p: f64) -> f64 {
        match self {
            Shape::Quadratic => 1.0,
            Shape::FlatQuartic => {
                let q = (p.abs() - 1.0).max(0.0);
                6.0 * q * q
            }
            Shape::DefaultG1 => {
                let s = 1.0 + p * p;
                2.0 + 12.0 * (1.0 - 3.0 * p * p) / (s * s * s)
            }
            Shape::Bumped { base, bump } => {
                let q = (p - bump.p0) / bump.delta;
                if q.abs() >= 1.0 {
                    base.d2(p)
                } else {
                    base.d2(p) + bump.a / bump.delta * bump_psi_d2(q)
                }
            }
            Shape::Reflected(base) => base.d2(-p),
            Shape::Scaled { factor, base } => factor * base.d2(p),
            Shape::Breve(b) => b.d2(p),
            Shape::Sampled(t) => t.eval3(p).2,
            Shape::Custom(f) => f.d2(p),
        }
    }
}

/// A scalar Hamiltonian `G` with exact first and second derivatives.
#[derive(Clone, Debug)]
pub struct Hamiltonian1D {
    shape: Shape,
    label: String,
    growth: Option<Growth>,
}

impl Hamiltonian1D {
    /// `p^2 / 2`.
    pub fn quadratic() -> Self {
        Self {
            shape: Shape::Quadratic,
            label: "quadratic".into(),
            growth: Some(Growth { eta: 2.0, alpha0: 0.5, alpha1: 0.5 }),
        }
    }

    /// `((|p| max 1) - 1)^4 / 2`: convex, flat on `[-1, 1]`.
    pub fn flat_quartic() -> Self {
        Self {
            shape: Shape::FlatQuartic,
            label: "flat_quartic".into(),
            growth: Some(Growth { eta: 4.0, alpha0: 1.0 / 32.0, alpha1: 0.5 }),
        }
    }

    /// `p^2 + 6 p^2 / (1 + p^2)`: even, increasing on `p > 0`, concave near `|p| = 1`.
    pub fn default_g1() -> Self {
        Self {
            shape: Shape::DefaultG1,
            label: "multid_g1".into(),
            growth: Some(Growth { eta: 2.0, alpha0: 0.5, alpha1: 6.0 }),
        }
    }

    pub fn from_fn<F: HamiltonianFn + 'static>(label: impl Into<String>, f: F) -> Self {
        Self { shape: Shape::Custom(Arc::new(f)), label: label.into(), growth: None }
    }

    pub fn from_table(label: impl Into<String>, table: SampledTable) -> Self {
        Self { shape: Shape::Sampled(Arc::new(table)), label: label.into(), growth: None }
    }

    #[inline]
    pub fn eval(&self, p: f64) -> f64 {
        self.shape.value(p)
    }

    #[inline]
    pub fn d1(&self, p: f64) -> f64 {
        self.shape.d1(p)
    }

    #[inline]
    pub fn d2(&self, p: f64) -> f64 {
        self.shape.d2(p)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn growth(&self) -> Option<Growth> {
        self.growth
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_growth(mut self, growth: Option<Growth>) -> Self {
        self.growth = growth;
        self
    }

    /// `G + a delta psi((p - p0) / delta)`; identical to `G` outside the support.
    pub fn bumped(&self, bump: BumpParams) -> Self {
        Self {
            shape: Shape::Bumped { base: Arc::new(self.shape.clone()), bump },
            label: format!("{}+bump", self.label),
            growth: None,
        }
    }

    /// The outermost bump, if this Hamiltonian was built by [`Self::bumped`].
    pub fn bump(&self) -> Option<BumpParams> {
        match &self.shape {
            Shape::Bumped { bump, .. } => Some(*bump),
            _ => None,
        }
    }

    /// `p -> G(-p)`.
    pub fn reflected(&self) -> Self {
        let shape = match &self.shape {
            Shape::Reflected(base) => (**base).clone(),
            s => Shape::Reflected(Arc::new(s.clone())),
        };
        Self { shape, label: format!("{}(-p)", self.label), growth: self.growth }
    }

    /// `p -> factor * G(p)`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            shape: Shape::Scaled { factor, base: Arc::new(self.shape.clone()) },
            label: format!("{factor}*{}", self.label),
            growth: None,
        }
    }
}

/// `max |G'|` on `[lo, hi]` by dense sampling.
pub fn max_abs_d1(g: &Hamiltonian1D, lo: f64, hi: f64) -> f64 {
    sample_extrema(|p| g.d1(p).abs(), lo, hi, DENSE_SAMPLES).1.value
}

/// `max |G''|` on `[lo, hi]` by dense sampling.
pub fn max_abs_d2(g: &Hamiltonian1D, lo: f64, hi: f64) -> f64 {
    sample_extrema(|p| g.d2(p).abs(), lo, hi, DENSE_SAMPLES).1.value
}

/// Which form of the curvature condition holds at the certified points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `G''(p1) < 0` and `G''(p1) G'(p2) e^{-K1} < G''(p2) G'(p1) e^{K1}`.
    Direct,
    /// The mirror image under `(p, x) -> (-p, -x)`.
    Reflected,
}

/// Evaluated curvature condition at a pair of momenta.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub orientation: Orientation,
    pub k1: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `(rhs - lhs) / max(|lhs|, |rhs|)`.
    pub margin: f64,
}

fn relative_gap(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

/// Check `G'(p1) < 0 < G'(p2)` and the curvature inequality (direct form
/// preferred, mirrored form otherwise).
pub fn check_theorem_hypotheses(g: &Hamiltonian1D, p1: f64, p2: f64) -> Result<HypothesisCheck> {
    if !(p1 < p2) {
        return Err(Error::HypothesisViolation(format!("need p1 < p2, got {p1}, {p2}")));
    }
    let (d1a, d1b) = (g.d1(p1), g.d1(p2));
    if !(d1a < 0.0 && d1b > 0.0) {
        return Err(Error::HypothesisViolation(format!("need G'(p1) < 0 < G'(p2), got {d1a}, {d1b}")));
    }
    let (d2a, d2b) = (g.d2(p1), g.d2(p2));
    let k1 = max_abs_d1(g, p1, p2);
    let (ep, em) = (k1.exp(), (-k1).exp());
    let direct = (d2a * d1b * em, d2b * d1a * ep);
    let mirror = (d2a * d1b * ep, d2b * d1a * em);
    if d2a < 0.0 && direct.0 < direct.1 {
        return Ok(HypothesisCheck {
            orientation: Orientation::Direct,
            k1,
            lhs: direct.0,
            rhs: direct.1,
            margin: relative_gap(direct.0, direct.1),
        });
    }
    if d2b < 0.0 && mirror.0 < mirror.1 {
        return Ok(HypothesisCheck {
            orientation: Orientation::Reflected,
            k1,
            lhs: mirror.0,
            rhs: mirror.1,
            margin: relative_gap(mirror.0, mirror.1),
        });
    }
    Err(Error::HypothesisViolation(format!(
        "curvature condition fails at p1={p1}, p2={p2} (G''={d2a:.4e}, {d2b:.4e}, K1={k1:.4e})"
    )))
}

/// Which branch of the convex-to-quasiconvex construction was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpCase {
    /// `G' < 0` at the left end: positive bump on the decreasing branch.
    Decreasing,
    /// `G' > 0` at the right end: mirror image of the decreasing case.
    Increasing,
    /// `G' = 0` on the whole interval: negative bump (a dip).
    Flat,
}

/// Output of [`modify_convex_to_quasiconvex`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePoints {
    pub p1: f64,
    pub p2: f64,
    pub bump: BumpParams,
    pub case: BumpCase,
    pub check: HypothesisCheck,
}

/// Optional overrides for [`modify_convex_to_quasiconvex`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModifyOptions {
    /// Use this half-width instead of searching (it is still validated).
    pub delta: Option<f64>,
    /// The certified point on the far side of the minimum of `G`
    /// (`p2` in the decreasing case, `p1` in the increasing case).
    pub partner: Option<f64>,
}

/// Smallest half-width tried by the search.
pub const DELTA_FLOOR: f64 = 1e-6;
/// Relative margin required by the half-width search.
pub const DELTA_MARGIN: f64 = 1e-3;

/// Modify a convex `G` on `(p_star, p_upper)` by a compactly supported bump so
/// that the result is quasiconvex and admits certified points.
pub fn modify_convex_to_quasiconvex(
    g: &Hamiltonian1D,
    p_star: f64,
    p_upper: f64,
    opts: ModifyOptions,
) -> Result<(Hamiltonian1D, CandidatePoints)> {
    if !(p_star < p_upper) || !p_star.is_finite() || !p_upper.is_finite() {
        return Err(Error::InvalidInput(format!("need p_star < p_upper, got {p_star}, {p_upper}")));
    }
    let w = (p_upper - p_star).max(1.0);
    let (lo, hi) = (p_star - 4.0 * w, p_upper + 4.0 * w);
    let (d2min, d2max) = sample_extrema(|p| g.d2(p), lo, hi, DENSE_SAMPLES);
    if d2min.value < -1e-9 * (1.0 + d2max.value.abs()) {
        return Err(Error::NonConvexInput { p: d2min.x, d2: d2min.value });
    }
    let scale = 1.0 + g.d1(p_star).abs().max(g.d1(p_upper).abs());
    let tol = 1e-12 * scale;
    let (bump, p1, p2, case) = if g.d1(p_star) < -tol {
        let (bump, p1, p2) = decreasing_case(g, p_star, p_upper, opts)?;
        (bump, p1, p2, BumpCase::Decreasing)
    } else if g.d1(p_upper) > tol {
        let mirrored = ModifyOptions { delta: opts.delta, partner: opts.partner.map(|p| -p) };
        let (b, q1, q2) = decreasing_case(&g.reflected(), -p_upper, -p_star, mirrored)?;
        (BumpParams { a: b.a, p0: -b.p0, delta: b.delta }, -q2, -q1, BumpCase::Increasing)
    } else {
        let p0 = 0.5 * (p_star + p_upper);
        let delta = 0.5 * (p_upper - p_star);
        (BumpParams::new(-1.0, p0, delta)?, p0 - 0.5 * delta, p0 + 0.5 * delta, BumpCase::Flat)
    };
    let modified = g.bumped(bump);
    let check = check_theorem_hypotheses(&modified, p1, p2)?;
    let expect = match case {
        BumpCase::Increasing => Orientation::Reflected,
        _ => Orientation::Direct,
    };
    if check.orientation != expect {
        return Err(Error::HypothesisViolation(format!("expected {expect:?} orientation, got {:?}", check.orientation)));
    }
    let samples = crate::numeric::linspace(lo, hi, DENSE_SAMPLES + 1);
    let values: Vec<f64> = samples.iter().map(|&p| modified.eval(p)).collect();
    if let Some(b) = crate::numeric::best_interior_bump(&values) {
        if b.margin > 1e-12 * (1.0 + values[b.mid].abs()) {
            return Err(Error::HypothesisViolation(format!(
                "modified Hamiltonian is not quasiconvex near p = {}",
                samples[b.mid]
            )));
        }
    }
    Ok((modified, CandidatePoints { p1, p2, bump, case, check }))
}

fn decreasing_case(g: &Hamiltonian1D, p_star: f64, p_upper: f64, opts: ModifyOptions) -> Result<(BumpParams, f64, f64)> {
    let a = -g.d1(p_star) / 4.0;
    let mid = 0.5 * (p_star + p_upper);
    // Keep G'(p1) well below -2a so that some delta satisfies G'(p1+delta) <= -2a.
    let p1 = if g.d1(mid) <= -3.0 * a {
        mid
    } else {
        let q = bisect_increasing(|p| g.d1(p) + 3.0 * a, p_star, mid, 1e-15 * (1.0 + mid.abs()));
        0.5 * (p_star + q)
    };
    let p2 = match opts.partner {
        Some(p2) => p2,
        None => default_partner(g, p1)?,
    };
    if !(g.d1(p2) > 0.0) {
        return Err(Error::HypothesisViolation(format!("partner point {p2} has G' <= 0")));
    }
    let k1 = max_abs_d1(g, p1, p2);
    let (g1a, g1b, g2a, g2b) = (g.d1(p1), g.d1(p2), g.d2(p1), g.d2(p2));
    let admissible = |delta: f64| -> bool {
        if p1 + delta >= p2 || g.d1(p1 + delta) > -2.0 * a {
            return false;
        }
        let curv = g2a - 6.0 * a / delta;
        if !(curv < 0.0) {
            return false;
        }
        let lhs = curv * g1b * (-k1 - 2.0 * a).exp();
        let rhs = g2b * g1a * (k1 + 2.0 * a).exp();
        relative_gap(lhs, rhs) > DELTA_MARGIN
    };
    let delta = match opts.delta {
        Some(d) => {
            if !(d > 0.0) || !admissible(d) || p1 - d < p_star || p1 + d > p_upper {
                return Err(Error::NoDeltaFound { floor: d });
            }
            d
        }
        None => {
            let mut d = (p1 - p_star).min(p_upper - p1);
            while !admissible(d) {
                d *= 0.5;
                if d < DELTA_FLOOR {
                    return Err(Error::NoDeltaFound { floor: DELTA_FLOOR });
                }
            }
            d
        }
    };
    Ok((BumpParams::new(a, p1, delta)?, p1, p2))
}

/// Mirror `p1` through the minimizer of `G`, moving further out while `G'` vanishes.
fn default_partner(g: &Hamiltonian1D, p1: f64) -> Result<f64> {
    let opts = RootOptions { tol_f: 0.0, tol_x: 1e-14 * (1.0 + p1.abs()), max_iter: 400 };
    let (lo, hi) = expand_bracket_increasing(|p| Ok(g.d1(p)), p1, 1.0, 1e8, "minimizer of G")?;
    let m = find_root_increasing(|p| Ok(g.d1(p)), lo, hi, opts)?.x;
    let gap = (m - p1).max(1e-3);
    let mut p2 = m + gap;
    for _ in 0..64 {
        if g.d1(p2) > 0.0 {
            return Ok(p2);
        }
        p2 += gap;
    }
    Err(Error::HypothesisViolation("no partner point with G' > 0".into()))
}

/// A named Hamiltonian together with its certified points, if any.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub hamiltonian: Hamiltonian1D,
    /// Convex Hamiltonian that was modified, for the modified entries.
    pub base: Option<Hamiltonian1D>,
    pub points: Option<(f64, f64)>,
    pub modification: Option<CandidatePoints>,
}

/// Look up a Hamiltonian by name (see [`CATALOG_NAMES`]).
pub fn catalog(name: &str) -> Result<CatalogEntry> {
    match name {
        "quadratic" => Ok(CatalogEntry { hamiltonian: Hamiltonian1D::quadratic(), base: None, points: None, modification: None }),
        "flat_quartic" => {
            Ok(CatalogEntry { hamiltonian: Hamiltonian1D::flat_quartic(), base: None, points: None, modification: None })
        }
        "multid_g1" => {
            Ok(CatalogEntry { hamiltonian: Hamiltonian1D::default_g1(), base: None, points: Some((-1.0, 1.0)), modification: None })
        }
        "fig2_bump" => {
            let opts = ModifyOptions { delta: Some(1.0 / 50.0), partner: Some(1.5) };
            let base = Hamiltonian1D::quadratic();
            let (g, cand) = modify_convex_to_quasiconvex(&base, -2.0, -1.0, opts)?;
            let g = g.with_label("fig2_bump").with_growth(Some(Growth { eta: 2.0, alpha0: 0.25, alpha1: 0.5 }));
            Ok(CatalogEntry { hamiltonian: g, base: Some(base), points: Some((cand.p1, cand.p2)), modification: Some(cand) })
        }
        "fig3_flat" => {
            let base = Hamiltonian1D::flat_quartic();
            let (g, cand) = modify_convex_to_quasiconvex(&base, -0.5, 0.5, ModifyOptions::default())?;
            let g = g.with_label("fig3_flat").with_growth(Some(Growth { eta: 4.0, alpha0: 1.0 / 32.0, alpha1: 0.5 }));
            Ok(CatalogEntry { hamiltonian: g, base: Some(base), points: Some((cand.p1, cand.p2)), modification: Some(cand) })
        }
        other => Err(Error::InvalidInput(format!(
            "unknown Hamiltonian '{other}' (known: {})",
            CATALOG_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linspace;

    fn all_catalog() -> Vec<Hamiltonian1D> {
        CATALOG_NAMES.iter().map(|n| catalog(n).unwrap().hamiltonian).collect()
    }

    #[test]
    fn psi_anchor_values() {
        assert_eq!(bump_psi(0.0), 1.0);
        assert_eq!(bump_psi_d1(0.0), 0.0);
        assert_eq!(bump_psi_d2(0.0), -6.0);
        assert_eq!(bump_psi(1.0), 0.0);
        assert_eq!(bump_psi(-1.0), 0.0);
        assert_eq!(bump_psi(2.0), 0.0);
        let m = linspace(-1.0, 1.0, 200_001).into_iter().map(|p| bump_psi_d1(p).abs()).fold(0.0, f64::max);
        assert!((m - 96.0 / (25.0 * 5f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn psi_is_c2_across_support_edge() {
        for edge in [-1.0f64, 1.0] {
            let inside = edge * (1.0 - 1e-7);
            assert!(bump_psi(inside).abs() < 1e-18);
            assert!(bump_psi_d1(inside).abs() < 1e-12);
            assert!(bump_psi_d2(inside).abs() < 1e-5);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for g in all_catalog() {
            for p in linspace(-5.0, 5.0, 1001) {
                let fd1 = (g.eval(p + h) - g.eval(p - h)) / (2.0 * h);
                let fd2 = (g.d1(p + h) - g.d1(p - h)) / (2.0 * h);
                let tol1 = 1e-6 * (1.0 + g.d1(p).abs() + g.d2(p).abs());
                assert!((fd1 - g.d1(p)).abs() < tol1, "{} d1 at {p}", g.label());
                // The bump is only C^2: its third derivative jumps at the support edges.
                let near_edge = g.bump().is_some_and(|b| ((p - b.p0).abs() - b.delta).abs() <= 2.0 * h);
                let tol2 = 1e-4 * (1.0 + g.d2(p).abs());
                assert!(near_edge || (fd2 - g.d2(p)).abs() < tol2, "{} d2 at {p}", g.label());
            }
        }
    }

    #[test]
    fn catalog_is_coercive_and_respects_growth() {
        for g in all_catalog() {
            for p in [20.0, -20.0] {
                assert!(g.eval(p) > g.eval(0.0) + 1.0, "{}", g.label());
            }
            let growth = g.growth().expect("catalog entries carry growth data");
            for p in linspace(-50.0, 50.0, 20_001) {
                let v = g.eval(p);
                assert!(growth.lower(p) <= v && v <= growth.upper(p), "{} at {p}", g.label());
            }
        }
    }

    #[test]
    fn fig2_modification_matches_caption() {
        let e = catalog("fig2_bump").unwrap();
        let c = e.modification.unwrap();
        assert_eq!(c.case, BumpCase::Decreasing);
        assert_eq!(c.bump.a, 0.5);
        assert_eq!(c.bump.p0, -1.5);
        assert_eq!(c.p1, -1.5);
        assert_eq!(c.p2, 1.5);
        assert_eq!(c.bump.delta, 1.0 / 50.0);
        assert_eq!(c.check.orientation, Orientation::Direct);
    }

    #[test]
    fn fig2_delta_threshold_is_three_over_one_plus_e5() {
        let q = Hamiltonian1D::quadratic();
        let bound = 3.0 / (1.0 + 5f64.exp());
        let below = ModifyOptions { delta: Some(0.99 * bound), partner: Some(1.5) };
        assert!(modify_convex_to_quasiconvex(&q, -2.0, -1.0, below).is_ok());
        let above = ModifyOptions { delta: Some(1.01 * bound), partner: Some(1.5) };
        assert!(matches!(modify_convex_to_quasiconvex(&q, -2.0, -1.0, above), Err(Error::NoDeltaFound { .. })));
    }

    #[test]
    fn default_search_picks_mirror_partner() {
        let (_, c) =
            modify_convex_to_quasiconvex(&Hamiltonian1D::quadratic(), -2.0, -1.0, ModifyOptions::default()).unwrap();
        assert_eq!(c.p1, -1.5);
        assert!((c.p2 - 1.5).abs() < 1e-12);
        assert!(c.bump.delta < 3.0 / (1.0 + 5f64.exp()));
        assert_eq!(c.bump.delta, 1.0 / 64.0);
    }

    #[test]
    fn fig3_modification_matches_caption() {
        let c = catalog("fig3_flat").unwrap().modification.unwrap();
        assert_eq!(c.case, BumpCase::Flat);
        assert_eq!((c.bump.a, c.bump.p0, c.bump.delta), (-1.0, 0.0, 0.5));
        assert_eq!((c.p1, c.p2), (-0.25, 0.25));
    }

    #[test]
    fn increasing_branch_is_mirrored() {
        let q = Hamiltonian1D::quadratic();
        let (g, c) = modify_convex_to_quasiconvex(&q, 1.0, 2.0, ModifyOptions::default()).unwrap();
        assert_eq!(c.case, BumpCase::Increasing);
        assert_eq!(c.check.orientation, Orientation::Reflected);
        assert_eq!(c.bump.p0, 1.5);
        assert!((c.p1 + 1.5).abs() < 1e-12 && c.p2 == 1.5);
        let (gm, _) = modify_convex_to_quasiconvex(&q, -2.0, -1.0, ModifyOptions::default()).unwrap();
        for p in linspace(-3.0, 3.0, 601) {
            assert_eq!(g.eval(p), gm.eval(-p));
        }
    }

    #[test]
    fn modification_is_bit_exact_outside_support() {
        for (base, lo, hi) in [(Hamiltonian1D::quadratic(), -2.0, -1.0), (Hamiltonian1D::flat_quartic(), -0.5, 0.5)] {
            let (g, _) = modify_convex_to_quasiconvex(&base, lo, hi, ModifyOptions::default()).unwrap();
            for p in linspace(-6.0, 6.0, 12_001) {
                if p <= lo || p >= hi {
                    assert_eq!(g.eval(p).to_bits(), base.eval(p).to_bits());
                    assert_eq!(g.d1(p).to_bits(), base.d1(p).to_bits());
                }
            }
        }
    }

    #[test]
    fn non_convex_input_is_rejected() {
        let g = Hamiltonian1D::default_g1();
        assert!(matches!(
            modify_convex_to_quasiconvex(&g, -2.0, -1.0, ModifyOptions::default()),
            Err(Error::NonConvexInput { .. })
        ));
    }

    #[test]
    fn figure_one_type_points_pass_direct_check() {
        let c = check_theorem_hypotheses(&Hamiltonian1D::default_g1(), -1.0, 1.0).unwrap();
        assert_eq!(c.orientation, Orientation::Direct);
        assert!((c.k1 - 5.188006416).abs() < 1e-8);
        assert!(check_theorem_hypotheses(&Hamiltonian1D::quadratic(), -1.0, 1.0).is_err());
    }

    #[test]
    fn j_anchor_values() {
        let j = build_j(1.0, 2).unwrap();
        assert_eq!(j.value(0.0).unwrap(), 0.0);
        assert_eq!(j.d1(0.0).unwrap(), 0.0);
        assert!((j.value(0.5).unwrap() - (2f64.ln() - 0.5)).abs() < 1e-15);
        assert!(matches!(j.value(1.0), Err(Error::DomainError { .. })));
        assert!(matches!(j.value(-0.1), Err(Error::DomainError { .. })));
        // Quadrature of J' reproduces J.
        let q = crate::numeric::integrate_gl(|p| j.d1(p).unwrap(), 0.0, 0.5, 8);
        assert!((q - j.value(0.5).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn j_satisfies_strict_log_convexity_gap() {
        let (m, d) = (0.04, 3);
        let j = build_j(m, d).unwrap();
        let k = m * (d - 1) as f64;
        for p in linspace(0.0, 0.999, 1000) {
            let gap = j.d2(p).unwrap() - k * j.d1(p).unwrap().powi(2);
            assert!(gap > 0.0);
            assert!((gap - (1.0 + p) / ((1.0 - p) * k)).abs() < 1e-9 * gap);
        }
        assert!((j.d2(0.0).unwrap() - 1.0 / k).abs() < 1e-12);
        let h = 1e-4;
        let fd = (j.value(2.0 * h).unwrap() - 2.0 * j.value(h).unwrap() + j.value(0.0).unwrap()) / (h * h);
        assert!((fd - 1.0 / k).abs() < 1e-2);
    }

    #[test]
    fn breve_g_is_even_convex_and_glued() {
        let g = build_breve_g(0.04, 2, 4.2).unwrap();
        let Shape::Breve(b) = g.shape else { panic!() };
        assert_eq!(g.eval(0.0), 0.0);
        assert!((g.eval(b.p_r) - 4.2).abs() < 1e-12);
        for p in linspace(0.0, 3.0, 3001) {
            assert_eq!(g.eval(p), g.eval(-p));
            assert!(g.d2(p) > 0.0);
        }
        let h = 1e-5;
        let fd = (g.eval(b.p_r + h) - 2.0 * g.eval(b.p_r) + g.eval(b.p_r - h)) / (h * h);
        assert!((fd - b.j2_r).abs() < 1e-3 * b.j2_r);
        let fd1 = (g.eval(b.p_r + h) - g.eval(b.p_r - h)) / (2.0 * h);
        assert!((fd1 - b.j1_r).abs() < 1e-6 * b.j1_r);
    }

    #[test]
    fn sampled_table_reproduces_smooth_hamiltonian() {
        let src = Hamiltonian1D::default_g1();
        let p = linspace(-4.0, 4.0, 161);
        let t = SampledTable::new(
            p.clone(),
            p.iter().map(|&x| src.eval(x)).collect(),
            p.iter().map(|&x| src.d1(x)).collect(),
            p.iter().map(|&x| src.d2(x)).collect(),
        )
        .unwrap();
        let g = Hamiltonian1D::from_table("table", t);
        for x in linspace(-3.99, 3.99, 997) {
            assert!((g.eval(x) - src.eval(x)).abs() < 1e-8);
            assert!((g.d1(x) - src.d1(x)).abs() < 1e-6);
            assert!((g.d2(x) - src.d2(x)).abs() < 1e-3);
        }
        assert!(SampledTable::new(vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn reflection_and_scaling() {
        let g = catalog("fig2_bump").unwrap().hamiltonian;
        let r = g.reflected();
        for p in linspace(-3.0, 3.0, 301) {
            assert_eq!(r.eval(p), g.eval(-p));
            assert_eq!(r.d1(p), -g.d1(-p));
            assert_eq!(r.reflected().eval(p), g.eval(p));
        }
        let s = g.scaled(2.0);
        assert_eq!(s.d2(0.3), 2.0 * g.d2(0.3));
    }
}
