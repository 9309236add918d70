//! Two-plateau corrector profiles and the potentials they induce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{check_theorem_hypotheses, max_abs_d1, max_abs_d2, Hamiltonian1D, Orientation, DENSE_SAMPLES};
use crate::numeric::{bisect_increasing, integrate_gl, sample_extrema};
use crate::potential::PeriodicPotential;

/// Smallest transition budget tried by [`select_ell`].
pub const ELL_FLOOR: f64 = 1.0 / (1u64 << 20) as f64;
/// Relative margin demanded of the curvature inequality and of the ramp budget.
pub const TUNING_MARGIN: f64 = 1e-2;
/// Gauss-Legendre panels per ramp.
const RAMP_PANELS: usize = 32;

/// Quintic smoothstep and its derivatives.
fn smooth(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}
fn smooth_d1(t: f64) -> f64 {
    let u = t * (1.0 - t);
    30.0 * u * u
}
fn smooth_d2(t: f64) -> f64 {
    60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}

/// One piece of the profile on `[x0, x1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    Flat { x0: f64, x1: f64, p: f64 },
    Ramp { x0: f64, x1: f64, from: f64, to: f64 },
}

impl Piece {
    pub fn x0(&self) -> f64 {
        match *self {
            Piece::Flat { x0, .. } | Piece::Ramp { x0, .. } => x0,
        }
    }

    pub fn x1(&self) -> f64 {
        match *self {
            Piece::Flat { x1, .. } | Piece::Ramp { x1, .. } => x1,
        }
    }

    pub fn len(&self) -> f64 {
        self.x1() - self.x0()
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Piece::Flat { .. })
    }

    /// `f` at local parameter `t` in `[0, 1]`.
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Piece::Flat { p, .. } => p,
            Piece::Ramp { from, to, .. } => from + (to - from) * smooth(t),
        }
    }

    /// `f'` at local parameter `t`.
    pub fn d1(&self, t: f64) -> f64 {
        match *self {
            Piece::Flat { .. } => 0.0,
            Piece::Ramp { x0, x1, from, to } => (to - from) / (x1 - x0) * smooth_d1(t),
        }
    }

    /// `f''` at local parameter `t`.
    pub fn d2(&self, t: f64) -> f64 {
        match *self {
            Piece::Flat { .. } => 0.0,
            Piece::Ramp { x0, x1, from, to } => {
                let h = x1 - x0;
                (to - from) / (h * h) * smooth_d2(t)
            }
        }
    }

    /// `int phi(f)` over the piece.
    pub fn integrate<F: Fn(f64) -> f64>(&self, phi: F) -> f64 {
        match *self {
            Piece::Flat { p, .. } => self.len() * phi(p),
            Piece::Ramp { .. } => self.len() * integrate_gl(|t| phi(self.value(t)), 0.0, 1.0, RAMP_PANELS),
        }
    }

    /// Exact `int f` over the piece.
    pub fn mean_mass(&self) -> f64 {
        match *self {
            Piece::Flat { p, .. } => self.len() * p,
            Piece::Ramp { from, to, .. } => self.len() * 0.5 * (from + to),
        }
    }
}

/// Parameters of a two-plateau profile: `p1` on `[0, L - ell]`, `p2` on
/// `[L, 1 - ell]`, and two transition windows that visit `p_min` and `p_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub p1: f64,
    pub p2: f64,
    #[serde(rename = "L")]
    pub big_l: f64,
    pub ell: f64,
    pub ell_prime: f64,
    pub a: f64,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(skip)]
    pieces: Vec<Piece>,
}

impl ProfileSpec {
    /// Lay out the pieces for the given parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn new(p1: f64, p2: f64, big_l: f64, ell: f64, ell_prime: f64, a: f64, p_min: f64, p_max: f64) -> Result<Self> {
        let finite = [p1, p2, big_l, ell, ell_prime, a, p_min, p_max].iter().all(|v| v.is_finite());
        if !finite
            || !(p1 < p2)
            || !(ell > 0.0 && ell_prime > 0.0 && ell_prime <= ell)
            || !(big_l - ell >= 0.0 && big_l + ell <= 1.0)
            || !(0.0..=1.0).contains(&a)
            || !(p1 <= p_min && p_min <= p2 && p1 <= p_max && p_max <= p2)
        {
            return Err(Error::InvalidInput(format!(
                "inconsistent profile parameters p1={p1} p2={p2} L={big_l} ell={ell} ell'={ell_prime} a={a}"
            )));
        }
        let mut spec = Self { p1, p2, big_l, ell, ell_prime, a, p_min, p_max, pieces: Vec::new() };
        spec.pieces = spec.layout();
        Ok(spec)
    }

    /// Re-derive the pieces after deserialization.
    pub fn rebuild(self) -> Result<Self> {
        Self::new(self.p1, self.p2, self.big_l, self.ell, self.ell_prime, self.a, self.p_min, self.p_max)
    }

    fn layout(&self) -> Vec<Piece> {
        let r = self.ell_prime / 3.0;
        let rest = self.ell - self.ell_prime;
        let at_min = rest * (1.0 - self.a);
        let at_max = rest * self.a;
        let mut out = Vec::with_capacity(13);
        let mut x = 0.0;
        let flat = |out: &mut Vec<Piece>, x: &mut f64, len: f64, p: f64| {
            if len > 0.0 {
                out.push(Piece::Flat { x0: *x, x1: *x + len, p });
                *x += len;
            }
        };
        let ramp = |out: &mut Vec<Piece>, x: &mut f64, from: f64, to: f64| {
            out.push(Piece::Ramp { x0: *x, x1: *x + r, from, to });
            *x += r;
        };
        flat(&mut out, &mut x, self.big_l - self.ell, self.p1);
        ramp(&mut out, &mut x, self.p1, self.p_min);
        flat(&mut out, &mut x, at_min, self.p_min);
        ramp(&mut out, &mut x, self.p_min, self.p_max);
        flat(&mut out, &mut x, at_max, self.p_max);
        ramp(&mut out, &mut x, self.p_max, self.p2);
        // Pin the plateau start to the exact target so roundoff does not drift.
        x = self.big_l;
        if let Some(last) = out.last_mut() {
            if let Piece::Ramp { x1, .. } = last {
                *x1 = x;
            }
        }
        flat(&mut out, &mut x, 1.0 - self.ell - self.big_l, self.p2);
        ramp(&mut out, &mut x, self.p2, self.p_max);
        flat(&mut out, &mut x, at_max, self.p_max);
        ramp(&mut out, &mut x, self.p_max, self.p_min);
        flat(&mut out, &mut x, at_min, self.p_min);
        ramp(&mut out, &mut x, self.p_min, self.p1);
        if let Some(Piece::Ramp { x1, .. }) = out.last_mut() {
            *x1 = 1.0;
        }
        out
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Knots from `0` to `1` inclusive.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.pieces.iter().map(|p| p.x0()).collect();
        b.push(1.0);
        b
    }

    /// Piece index and local parameter of `y` in `[0, 1)`.
    pub fn locate(&self, y: f64) -> (usize, f64) {
        let y = y - y.floor();
        let i = self.pieces.partition_point(|p| p.x0() <= y).max(1) - 1;
        let p = &self.pieces[i];
        (i, ((y - p.x0()) / p.len()).clamp(0.0, 1.0))
    }

    pub fn value(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        self.pieces[i].value(t)
    }

    pub fn d1(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        self.pieces[i].d1(t)
    }

    /// `int_0^1 f`, exact.
    pub fn mean(&self) -> f64 {
        self.pieces.iter().map(Piece::mean_mass).sum()
    }

    /// `int_0^1 phi(f)` by piecewise quadrature.
    pub fn integrate<F: Fn(f64) -> f64 + Copy>(&self, phi: F) -> f64 {
        self.pieces.iter().map(|p| p.integrate(phi)).sum()
    }
}

/// `L = G'(p2) / (G'(p2) - G'(p1))`.
pub fn compute_l(g: &Hamiltonian1D, p1: f64, p2: f64) -> Result<f64> {
    let (a, b) = (g.d1(p1), g.d1(p2));
    if !(a < 0.0 && b > 0.0) {
        return Err(Error::HypothesisViolation(format!("need G'(p1) < 0 < G'(p2), got {a}, {b}")));
    }
    Ok(b / (b - a))
}

/// Which curvature inequality fixed the transition budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `G''(p1) < 0` and `G''(p2) < 0`.
    BothConcave,
    /// `G''(p1) < 0 <= G''(p2)`.
    RightConvex,
}

/// Result of [`select_ell`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllChoice {
    pub ell: f64,
    pub regime: Regime,
    pub k1: f64,
    pub k2: f64,
    /// Left-hand side of the chosen inequality (negative when satisfied).
    pub lhs: f64,
}

fn curvature_lhs(regime: Regime, big_l: f64, ell: f64, d2a: f64, d2b: f64, k1: f64, k2: f64) -> (f64, f64) {
    let (em, ep) = ((-k1).exp(), k1.exp());
    let (t1, t2) = match regime {
        Regime::BothConcave => (((big_l - ell) * d2a + (1.0 - big_l - ell) * d2b) * em, 2.0 * ell * k2 * ep),
        Regime::RightConvex => ((big_l - ell) * d2a * em, ((1.0 - big_l - ell) * d2b + 2.0 * ell * k2) * ep),
    };
    (t1 + t2, t1.abs() + t2.abs())
}

/// Largest dyadic `ell = min(L, 1 - L) / 2^k`, `k >= 1`, satisfying the
/// curvature inequality of the applicable regime with relative margin.
pub fn select_ell(g: &Hamiltonian1D, p1: f64, p2: f64) -> Result<EllChoice> {
    let big_l = compute_l(g, p1, p2)?;
    let (d2a, d2b) = (g.d2(p1), g.d2(p2));
    if !(d2a < 0.0) {
        return Err(Error::HypothesisViolation(format!(
            "need G''(p1) < 0 (reflect the system first), got {d2a}"
        )));
    }
    let regime = if d2b < 0.0 { Regime::BothConcave } else { Regime::RightConvex };
    let k1 = max_abs_d1(g, p1, p2);
    let k2 = max_abs_d2(g, p1, p2);
    let base = big_l.min(1.0 - big_l);
    let mut last = f64::NAN;
    for k in 1..64 {
        let ell = base / (1u64 << k) as f64;
        if ell < ELL_FLOOR * (1.0 - 1e-12) {
            break;
        }
        let (lhs, scale) = curvature_lhs(regime, big_l, ell, d2a, d2b, k1, k2);
        last = lhs;
        if lhs < -TUNING_MARGIN * scale {
            return Ok(EllChoice { ell, regime, k1, k2, lhs });
        }
    }
    Err(Error::HypothesisViolation(format!(
        "curvature inequality ({regime:?}) not satisfiable down to ell = 2^-20 (last lhs {last:.3e})"
    )))
}

/// Extremes of `G'` on `[p1, p2]`: `(p_min, m1, p_max, M1)`.
fn d1_extrema(g: &Hamiltonian1D, p1: f64, p2: f64) -> (f64, f64, f64, f64) {
    let (lo, hi) = sample_extrema(|p| g.d1(p), p1, p2, DENSE_SAMPLES + 1);
    (lo.x.clamp(p1, p2), lo.value, hi.x.clamp(p1, p2), hi.value)
}

/// Build the profile for a given budget `ell`, tuning the ramp budget and
/// the plateau mix so that `int G'(f) = 0`.
pub fn build_profile(g: &Hamiltonian1D, p1: f64, p2: f64, ell: f64) -> Result<ProfileSpec> {
    let big_l = compute_l(g, p1, p2)?;
    if !(ell > 0.0 && ell < big_l.min(1.0 - big_l)) {
        return Err(Error::InvalidInput(format!("ell = {ell} outside (0, min(L, 1-L)) with L = {big_l}")));
    }
    let (p_min, m1, p_max, big_m1) = d1_extrema(g, p1, p2);
    let base = g.d1(p1) * (big_l - ell) + g.d1(p2) * (1.0 - big_l - ell);
    let scale = 2.0 * ell * (big_m1 - m1) + base.abs();
    let mut ell_prime = ell / 8.0;
    loop {
        let lower = base + 2.0 * (ell - ell_prime) * m1 + 2.0 * ell_prime * big_m1;
        let upper = base + 2.0 * (ell - ell_prime) * big_m1 + 2.0 * ell_prime * m1;
        if lower < -TUNING_MARGIN * scale && upper > TUNING_MARGIN * scale {
            break;
        }
        ell_prime *= 0.5;
        if ell_prime < ell * 1e-12 {
            return Err(Error::TuningFailure(format!(
                "no ramp budget satisfies the two-sided bound (lower {lower:.3e}, upper {upper:.3e})"
            )));
        }
    }
    let flux = |a: f64| -> Result<f64> {
        let spec = ProfileSpec::new(p1, p2, big_l, ell, ell_prime, a, p_min, p_max)?;
        Ok(spec.integrate(|p| g.d1(p)))
    };
    let (f0, f1) = (flux(0.0)?, flux(1.0)?);
    if !(f0 < 0.0 && f1 > 0.0) {
        return Err(Error::TuningFailure(format!("mix endpoints do not bracket: {f0:.3e}, {f1:.3e}")));
    }
    // The flux is affine in the mix, so the secant root is exact up to roundoff.
    let a_lin = (-f0 / (f1 - f0)).clamp(0.0, 1.0);
    let a = bisect_increasing(
        |a| flux(a).unwrap_or(f64::NAN),
        (a_lin - 1e-9).max(0.0),
        (a_lin + 1e-9).min(1.0),
        1e-17,
    );
    let a = if flux(a)?.abs() <= flux(a_lin)?.abs() { a } else { a_lin };
    let spec = ProfileSpec::new(p1, p2, big_l, ell, ell_prime, a, p_min, p_max)?;
    let residual = spec.integrate(|p| g.d1(p));
    if residual.abs() > 1e-10 {
        return Err(Error::TuningFailure(format!("flux residual {residual:.3e} after tuning the mix")));
    }
    Ok(spec)
}

/// `V = -f' - G(f)` and `theta0 = int f`.
pub fn synthesize_potential(g: &Hamiltonian1D, profile: &ProfileSpec) -> (PeriodicPotential, f64) {
    (PeriodicPotential::from_profile(profile.clone(), g.clone()), profile.mean())
}

/// Everything needed to exhibit and certify a non-quasiconvex effective
/// Hamiltonian.
#[derive(Clone, Debug)]
pub struct CounterexampleBundle {
    pub g: Hamiltonian1D,
    pub v: PeriodicPotential,
    pub theta0: f64,
    /// Profile in the working orientation (see `orientation`).
    pub profile: ProfileSpec,
    pub k1: f64,
    pub k2: f64,
    pub regime: Regime,
    pub orientation: Orientation,
    /// Input momenta in the caller's coordinates.
    pub p1: f64,
    pub p2: f64,
}

impl CounterexampleBundle {
    /// The corrector derivative at `theta0` in the caller's coordinates.
    pub fn profile_value(&self, x: f64) -> f64 {
        match self.orientation {
            Orientation::Direct => self.profile.value(x),
            Orientation::Reflected => -self.profile.value(-x),
        }
    }

    /// Derivative of [`Self::profile_value`].
    pub fn profile_d1(&self, x: f64) -> f64 {
        match self.orientation {
            Orientation::Direct => self.profile.d1(x),
            Orientation::Reflected => self.profile.d1(-x),
        }
    }

    /// Plateau momenta `(low, high)` in the caller's coordinates.
    pub fn plateaus(&self) -> (f64, f64) {
        (self.p1, self.p2)
    }
}

/// Full pipeline: hypothesis check, optional reflection, budget choice,
/// profile tuning and potential synthesis.
pub fn synthesize_bundle(g: &Hamiltonian1D, p1: f64, p2: f64) -> Result<CounterexampleBundle> {
    let check = check_theorem_hypotheses(g, p1, p2)?;
    let (gw, q1, q2) = match check.orientation {
        Orientation::Direct => (g.clone(), p1, p2),
        Orientation::Reflected => (g.reflected(), -p2, -p1),
    };
    let choice = select_ell(&gw, q1, q2)?;
    let profile = build_profile(&gw, q1, q2, choice.ell)?;
    let (vw, theta_w) = synthesize_potential(&gw, &profile);
    let (v, theta0) = match check.orientation {
        Orientation::Direct => (vw, theta_w),
        Orientation::Reflected => (vw.reflected(), -theta_w),
    };
    Ok(CounterexampleBundle {
        g: g.clone(),
        v,
        theta0,
        profile,
        k1: choice.k1,
        k2: choice.k2,
        regime: choice.regime,
        orientation: check.orientation,
        p1,
        p2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::catalog;
    use crate::numeric::linspace;

    #[test]
    fn l_examples() {
        let q = Hamiltonian1D::quadratic();
        assert_eq!(compute_l(&q, -1.0, 1.0).unwrap(), 0.5);
        // G'(p) = p: G'(-2) = -2, G'(1) = 1.
        let l = compute_l(&q, -2.0, 1.0).unwrap();
        assert!((l - 1.0 / 3.0).abs() < 1e-16);
        assert!((-2.0 * l + 1.0 * (1.0 - l)).abs() < 1e-15);
        assert!(compute_l(&q, 1.0, 2.0).is_err());
    }

    #[test]
    fn g1_budget_and_profile() {
        let g = Hamiltonian1D::default_g1();
        let choice = select_ell(&g, -1.0, 1.0).unwrap();
        assert_eq!(choice.regime, Regime::BothConcave);
        assert!(choice.ell > 0.0 && choice.ell < 0.5);
        let spec = build_profile(&g, -1.0, 1.0, choice.ell).unwrap();
        assert!(spec.integrate(|p| g.d1(p)).abs() < 1e-10);
        check_profile(&spec);
    }

    #[test]
    fn limit_of_lhs_is_curvature_average() {
        let g = Hamiltonian1D::default_g1();
        let (d2a, d2b, k1) = (g.d2(-1.0), g.d2(1.0), max_abs_d1(&g, -1.0, 1.0));
        let (lhs, _) = curvature_lhs(Regime::BothConcave, 0.5, 0.0, d2a, d2b, k1, 14.0);
        assert!((lhs - (0.5 * d2a + 0.5 * d2b) * (-k1).exp()).abs() < 1e-15);
        assert!(lhs < 0.0);
    }

    fn check_profile(spec: &ProfileSpec) {
        let (p1, p2, l, ell) = (spec.p1, spec.p2, spec.big_l, spec.ell);
        for x in linspace(0.0, l - ell, 101) {
            assert_eq!(spec.value(x.min(l - ell - 1e-15).max(0.0)), p1);
        }
        for x in linspace(l, 1.0 - ell, 101) {
            let x = x.clamp(l + 1e-15, 1.0 - ell - 1e-15);
            assert_eq!(spec.value(x), p2);
        }
        let bps = spec.breakpoints();
        assert_eq!(bps[0], 0.0);
        assert_eq!(*bps.last().unwrap(), 1.0);
        assert!(bps.windows(2).all(|w| w[1] > w[0]));
        for x in linspace(0.0, 1.0, 20001) {
            let f = spec.value(x);
            assert!(f >= p1 - 1e-15 && f <= p2 + 1e-15);
        }
        // f' continuous across knots.
        for &b in &bps[1..bps.len() - 1] {
            let (i, _) = spec.locate(b);
            let left = spec.pieces()[i - 1].d1(1.0);
            let right = spec.pieces()[i].d1(0.0);
            assert!((left - right).abs() < 1e-12 && left.abs() < 1e-12);
        }
        assert!((spec.value(0.0) - spec.value(1.0 - 1e-15)).abs() < 1e-9);
    }

    #[test]
    fn mix_endpoints_have_opposite_flux() {
        let g = Hamiltonian1D::default_g1();
        let choice = select_ell(&g, -1.0, 1.0).unwrap();
        let spec = build_profile(&g, -1.0, 1.0, choice.ell).unwrap();
        let at = |a: f64| {
            ProfileSpec::new(spec.p1, spec.p2, spec.big_l, spec.ell, spec.ell_prime, a, spec.p_min, spec.p_max)
                .unwrap()
                .integrate(|p| g.d1(p))
        };
        assert!(at(0.0) < 0.0 && at(1.0) > 0.0);
    }

    #[test]
    fn fig2_uses_right_convex_regime() {
        let entry = catalog("fig2_bump").unwrap();
        let (p1, p2) = entry.points.unwrap();
        let choice = select_ell(&entry.hamiltonian, p1, p2).unwrap();
        assert_eq!(choice.regime, Regime::RightConvex);
        let b = synthesize_bundle(&entry.hamiltonian, p1, p2).unwrap();
        check_profile(&b.profile);
        assert!(b.profile.integrate(|p| b.g.d1(p)).abs() < 1e-10);
    }

    #[test]
    fn potential_satisfies_profile_identity() {
        let entry = catalog("fig3_flat").unwrap();
        let (p1, p2) = entry.points.unwrap();
        let b = synthesize_bundle(&entry.hamiltonian, p1, p2).unwrap();
        for x in linspace(0.0, 1.0, 5003) {
            let r = b.profile_d1(x) + b.g.eval(b.profile_value(x)) + b.v.eval(x);
            assert!(r.abs() < 1e-9 * (1.0 + b.v.sup_abs()), "x={x} r={r}");
        }
        assert!((b.v.eval(0.0) - b.v.eval(1.0 - 1e-14)).abs() < 1e-6);
        let mean = crate::numeric::integrate_gl(|x| b.profile_value(x), 0.0, 1.0, 4096);
        assert!((mean - b.theta0).abs() < 1e-6);
    }

    #[test]
    fn profile_json_round_trip() {
        let g = Hamiltonian1D::default_g1();
        let choice = select_ell(&g, -1.0, 1.0).unwrap();
        let spec = build_profile(&g, -1.0, 1.0, choice.ell).unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"L\""));
        let back: ProfileSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back.rebuild().unwrap(), spec);
    }
}
