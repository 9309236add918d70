//! One-periodic potentials `V(x)` with cached bounds, a piece structure that
//! lets integrators align their grids with kinks, and exact primitives.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::TAU;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian1D;
use crate::numeric::{integrate_gl, sample_extrema};
use crate::synth::ProfileSpec;

/// Samples per piece used for the cached bounds.
const STAT_SAMPLES: usize = 512;

/// One Fourier mode `a cos(2 pi k x) + b sin(2 pi k x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierTerm {
    pub k: u32,
    pub a: f64,
    pub b: f64,
}

/// Periodic cubic Hermite interpolant with Catmull-Rom slopes.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicCubic {
    x: Vec<f64>,
    v: Vec<f64>,
    d: Vec<f64>,
}

impl PeriodicCubic {
    /// Samples at strictly increasing `x` in `[0, 1)`.
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || v.len() != n {
            return Err(Error::InvalidInput("sampled potential needs >= 3 rows of x,V".into()));
        }
        if x[0] < 0.0 || x[n - 1] >= 1.0 || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("sampled potential needs strictly increasing x in [0, 1)".into()));
        }
        if v.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("sampled potential".into()));
        }
        let mut xs = x.clone();
        xs.push(x[0] + 1.0);
        let mut vs = v.clone();
        vs.push(v[0]);
        let mut d = Vec::with_capacity(n + 1);
        for i in 0..n {
            let (xl, vl) = if i == 0 { (x[n - 1] - 1.0, v[n - 1]) } else { (x[i - 1], v[i - 1]) };
            let (xr, vr) = (xs[i + 1], vs[i + 1]);
            d.push((vr - vl) / (xr - xl));
        }
        d.push(d[0]);
        Ok(Self { x: xs, v: vs, d })
    }

    fn locate(&self, y: f64) -> (usize, f64, f64) {
        // Shift into [x0, x0 + 1).
        let mut y = y;
        if y < self.x[0] {
            y += 1.0;
        }
        let i = (self.x.partition_point(|&q| q <= y).max(1) - 1).min(self.x.len() - 2);
        let h = self.x[i + 1] - self.x[i];
        (i, (y - self.x[i]) / h, h)
    }

    fn eval(&self, y: f64) -> f64 {
        let (i, t, h) = self.locate(y);
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.v[i]
            + (t3 - 2.0 * t2 + t) * h * self.d[i]
            + (-2.0 * t3 + 3.0 * t2) * self.v[i + 1]
            + (t3 - t2) * h * self.d[i + 1]
    }

    fn deriv(&self, y: f64) -> f64 {
        let (i, t, h) = self.locate(y);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.v[i]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.d[i]
            + (-6.0 * t2 + 6.0 * t) * self.v[i + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.d[i + 1])
            / h
    }

    /// `int_0^y V` for `y` in `[0, 1]`.
    fn cumulative(&self, y: f64) -> f64 {
        // The 16-point rule is exact on each cubic panel.
        let mut knots: Vec<f64> = self.x[..self.x.len() - 1].iter().copied().filter(|&k| k > 0.0 && k < y).collect();
        knots.insert(0, 0.0);
        knots.push(y);
        knots.windows(2).map(|w| integrate_gl(|s| self.eval(s), w[0], w[1], 1)).sum()
    }
}

/// `V = -f' - G(f)` for a synthesized profile `f`.
#[derive(Clone, Debug)]
pub struct ProfilePotential {
    pub profile: ProfileSpec,
    pub g: Hamiltonian1D,
}

impl ProfilePotential {
    fn eval_piece(&self, i: usize, t: f64) -> f64 {
        let piece = &self.profile.pieces()[i];
        -piece.d1(t) - self.g.eval(piece.value(t))
    }

    fn deriv_piece(&self, i: usize, t: f64) -> f64 {
        let piece = &self.profile.pieces()[i];
        let f = piece.value(t);
        let f1 = piece.d1(t);
        -piece.d2(t) - self.g.d1(f) * f1
    }

    /// `int_{x0}^{x0 + t len} V` over piece `i`.
    fn piece_integral(&self, i: usize, t: f64) -> f64 {
        let piece = &self.profile.pieces()[i];
        let len = piece.len();
        if t <= 0.0 {
            return 0.0;
        }
        let df = piece.value(t) - piece.value(0.0);
        let gint = if piece.is_flat() {
            t * self.g.eval(piece.value(0.0))
        } else {
            integrate_gl(|s| self.g.eval(piece.value(s)), 0.0, t, 16)
        };
        -df - len * gint
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Constant(f64),
    Fourier { mean: f64, terms: Vec<FourierTerm> },
    Sampled(Arc<PeriodicCubic>),
    Profile(Arc<ProfilePotential>),
    Reflected(Arc<Kind>),
}

impl Kind {
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Kind::Profile(p) => p.profile.breakpoints(),
            Kind::Reflected(inner) => inner.breakpoints().iter().rev().map(|b| 1.0 - b).collect(),
            _ => vec![0.0, 1.0],
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let y = x - x.floor();
        match self {
            Kind::Constant(c) => *c,
            Kind::Fourier { mean, terms } => {
                mean + terms.iter().map(|t| t.a * (TAU * t.k as f64 * y).cos() + t.b * (TAU * t.k as f64 * y).sin()).sum::<f64>()
            }
            Kind::Sampled(s) => s.eval(y),
            Kind::Profile(p) => {
                let (i, t) = p.profile.locate(y);
                p.eval_piece(i, t)
            }
            Kind::Reflected(inner) => inner.eval(-x),
        }
    }

    fn eval_piece(&self, i: usize, t: f64) -> f64 {
        match self {
            Kind::Profile(p) => p.eval_piece(i, t),
            Kind::Reflected(inner) => {
                let n = inner.breakpoints().len() - 1;
                inner.eval_piece(n - 1 - i, 1.0 - t)
            }
            _ => self.eval(t),
        }
    }

    fn deriv(&self, x: f64) -> f64 {
        let y = x - x.floor();
        match self {
            Kind::Constant(_) => 0.0,
            Kind::Fourier { terms, .. } => terms
                .iter()
                .map(|t| {
                    let w = TAU * t.k as f64;
                    w * (-t.a * (w * y).sin() + t.b * (w * y).cos())
                })
                .sum(),
            Kind::Sampled(s) => s.deriv(y),
            Kind::Profile(p) => {
                let (i, t) = p.profile.locate(y);
                p.deriv_piece(i, t)
            }
            Kind::Reflected(inner) => -inner.deriv(-x),
        }
    }

    fn deriv_piece(&self, i: usize, t: f64) -> f64 {
        match self {
            Kind::Profile(p) => p.deriv_piece(i, t),
            Kind::Reflected(inner) => {
                let n = inner.breakpoints().len() - 1;
                -inner.deriv_piece(n - 1 - i, 1.0 - t)
            }
            _ => self.deriv(t),
        }
    }

    /// `int_0^y V` for `y` in `[0, 1]`.
    fn cumulative(&self, y: f64) -> f64 {
        match self {
            Kind::Constant(c) => c * y,
            Kind::Fourier { mean, terms } => {
                mean * y
                    + terms
                        .iter()
                        .map(|t| {
                            let w = TAU * t.k as f64;
                            (t.a * (w * y).sin() + t.b * (1.0 - (w * y).cos())) / w
                        })
                        .sum::<f64>()
            }
            Kind::Sampled(s) => s.cumulative(y),
            Kind::Profile(p) => {
                let (i, t) = if y >= 1.0 { (p.profile.pieces().len() - 1, 1.0) } else { p.profile.locate(y) };
                (0..i).map(|j| p.piece_integral(j, 1.0)).sum::<f64>() + p.piece_integral(i, t)
            }
            Kind::Reflected(inner) => {
                let total = inner.cumulative(1.0);
                total - inner.cumulative(1.0 - y)
            }
        }
    }

    fn primitive(&self, x: f64) -> f64 {
        let k = x.floor();
        k * self.cumulative(1.0) + self.cumulative(x - k)
    }
}

/// Bounds cached at construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialStats {
    pub min: f64,
    pub max: f64,
    pub sup_abs: f64,
    pub lipschitz: f64,
    pub mean: f64,
}

/// A one-periodic Lipschitz potential.
#[derive(Clone, Debug)]
pub struct PeriodicPotential {
    kind: Kind,
    label: String,
    stats: PotentialStats,
    fingerprint: u64,
}

impl PeriodicPotential {
    fn build(kind: Kind, label: String) -> Self {
        let bps = kind.breakpoints();
        let (mut min, mut max, mut lip) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        let mut scan = |f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64, n: usize| {
            let (lo, hi) = sample_extrema(f, 0.0, 1.0, n);
            let (dlo, dhi) = sample_extrema(df, 0.0, 1.0, n);
            min = min.min(lo.value);
            max = max.max(hi.value);
            lip = lip.max(dlo.value.abs()).max(dhi.value.abs());
        };
        match &kind {
            Kind::Sampled(c) => {
                for w in c.x.windows(2) {
                    scan(&|t| c.eval(w[0] + (w[1] - w[0]) * t), &|t| c.deriv(w[0] + (w[1] - w[0]) * t), 33);
                }
            }
            _ => {
                for i in 0..bps.len() - 1 {
                    scan(&|t| kind.eval_piece(i, t), &|t| kind.deriv_piece(i, t), STAT_SAMPLES + 1);
                }
            }
        }
        if let Kind::Fourier { terms, .. } = &kind {
            // Exact bound from the coefficients.
            lip = lip.max(terms.iter().map(|t| TAU * t.k as f64 * t.a.hypot(t.b)).sum::<f64>());
        }
        let mean = kind.cumulative(1.0);
        let stats = PotentialStats { min, max, sup_abs: min.abs().max(max.abs()), lipschitz: lip, mean };
        let mut h = DefaultHasher::new();
        label.hash(&mut h);
        for j in 0..97 {
            kind.eval(j as f64 / 97.0).to_bits().hash(&mut h);
        }
        for b in &bps {
            b.to_bits().hash(&mut h);
        }
        Self { kind, label, stats, fingerprint: h.finish() }
    }

    pub fn zero() -> Self {
        Self::build(Kind::Constant(0.0), "zero".into())
    }

    pub fn constant(v: f64) -> Self {
        Self::build(Kind::Constant(v), format!("const:{v}"))
    }

    /// `amp cos(2 pi x)`.
    pub fn cosine(amp: f64) -> Self {
        let label = if amp == 1.0 { "cos".to_string() } else { format!("cos:{amp}") };
        Self::build(Kind::Fourier { mean: 0.0, terms: vec![FourierTerm { k: 1, a: amp, b: 0.0 }] }, label)
    }

    pub fn fourier(label: impl Into<String>, mean: f64, terms: Vec<FourierTerm>) -> Result<Self> {
        if terms.iter().any(|t| t.k == 0 || !t.a.is_finite() || !t.b.is_finite()) || !mean.is_finite() {
            return Err(Error::InvalidInput("Fourier modes need k >= 1 and finite coefficients".into()));
        }
        Ok(Self::build(Kind::Fourier { mean, terms }, label.into()))
    }

    pub fn from_samples(label: impl Into<String>, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        Ok(Self::build(Kind::Sampled(Arc::new(PeriodicCubic::new(x, v)?)), label.into()))
    }

    /// `-f' - G(f)` for the profile `f`.
    pub fn from_profile(profile: ProfileSpec, g: Hamiltonian1D) -> Self {
        let label = format!("profile[{}]", g.label());
        Self::build(Kind::Profile(Arc::new(ProfilePotential { profile, g })), label)
    }

    /// `x -> V(-x)`.
    pub fn reflected(&self) -> Self {
        let kind = match &self.kind {
            Kind::Reflected(inner) => (**inner).clone(),
            Kind::Constant(c) => Kind::Constant(*c),
            k => Kind::Reflected(Arc::new(k.clone())),
        };
        Self::build(kind, format!("{}(-x)", self.label))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.kind.eval(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.kind.deriv(x)
    }

    /// Knots of the piecewise structure, from `0` to `1` inclusive.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.kind.breakpoints()
    }

    /// Value at local parameter `t` in `[0, 1]` of piece `i`, evaluated without
    /// reconstructing `x` (exact at the knots even for very short pieces).
    pub fn eval_piece(&self, i: usize, t: f64) -> f64 {
        self.kind.eval_piece(i, t)
    }

    /// `int_a^b V(x) dx`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.kind.primitive(b) - self.kind.primitive(a)
    }

    /// `Some(c)` when `V` is identically `c`.
    pub fn constant_value(&self) -> Option<f64> {
        match self.kind {
            Kind::Constant(c) => Some(c),
            _ => None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn stats(&self) -> PotentialStats {
        self.stats
    }

    pub fn lipschitz_const(&self) -> f64 {
        self.stats.lipschitz
    }

    pub fn sup_abs(&self) -> f64 {
        self.stats.sup_abs
    }

    pub fn min(&self) -> f64 {
        self.stats.min
    }

    pub fn max(&self) -> f64 {
        self.stats.max
    }

    pub fn mean(&self) -> f64 {
        self.stats.mean
    }

    /// Stable hash of the label, knots and a fixed set of samples.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// The synthesized profile behind this potential, if any, and whether it
    /// is seen through a reflection.
    pub fn profile(&self) -> Option<(&ProfileSpec, bool)> {
        match &self.kind {
            Kind::Profile(p) => Some((&p.profile, false)),
            Kind::Reflected(inner) => match &**inner {
                Kind::Profile(p) => Some((&p.profile, true)),
                _ => None,
            },
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linspace;

    fn lipschitz_holds(v: &PeriodicPotential) {
        let xs = linspace(0.0, 1.0, 2001);
        for w in xs.windows(2) {
            let d = (v.eval(w[1]) - v.eval(w[0])).abs();
            assert!(d <= v.lipschitz_const() * (w[1] - w[0]) * (1.0 + 1e-6) + 1e-12, "{}", v.label());
        }
        assert!((v.eval(0.0) - v.eval(1.0 - 1e-12)).abs() < 1e-8 * (1.0 + v.lipschitz_const()));
    }

    #[test]
    fn cosine_bounds_and_integral() {
        let v = PeriodicPotential::cosine(1.0);
        assert!((v.max() - 1.0).abs() < 1e-12 && (v.min() + 1.0).abs() < 1e-12);
        assert!((v.lipschitz_const() - TAU).abs() < 1e-4);
        assert!(v.mean().abs() < 1e-15);
        assert!((v.integral(0.0, 0.25) - 1.0 / TAU).abs() < 1e-15);
        assert!((v.integral(-0.75, 0.25) - 0.0).abs() < 1e-14);
        lipschitz_holds(&v);
    }

    #[test]
    fn reflection_mirrors_values_and_primitive() {
        let v = PeriodicPotential::fourier(
            "mix",
            0.3,
            vec![FourierTerm { k: 1, a: 0.5, b: 0.7 }, FourierTerm { k: 3, a: -0.2, b: 0.1 }],
        )
        .unwrap();
        let r = v.reflected();
        for x in linspace(-1.0, 2.0, 301) {
            assert!((r.eval(x) - v.eval(-x)).abs() < 1e-14);
        }
        for (a, b) in [(0.1, 0.6), (-0.3, 0.45), (0.2, 1.7)] {
            assert!((r.integral(a, b) - v.integral(-b, -a)).abs() < 1e-13);
        }
        assert!((r.mean() - v.mean()).abs() < 1e-14);
        lipschitz_holds(&r);
    }

    #[test]
    fn sampled_potential_interpolates_and_integrates() {
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|x| (TAU * x).sin()).collect();
        let v = PeriodicPotential::from_samples("sin", xs, vs).unwrap();
        for x in linspace(0.0, 1.0, 777) {
            assert!((v.eval(x) - (TAU * x).sin()).abs() < 1e-5);
        }
        assert!(v.integral(0.0, 0.5) - 1.0 / std::f64::consts::PI < 1e-6);
        assert!(v.mean().abs() < 1e-12);
        lipschitz_holds(&v);
        assert!(PeriodicPotential::from_samples("bad", vec![0.0, 0.5, 0.5], vec![0.0; 3]).is_err());
    }

    #[test]
    fn fingerprints_distinguish_potentials() {
        let a = PeriodicPotential::cosine(1.0);
        let b = PeriodicPotential::cosine(1.0 + 1e-9);
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), PeriodicPotential::cosine(1.0).fingerprint());
    }
}
