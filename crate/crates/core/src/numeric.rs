//! Small numerical kernels shared by the solvers: bracketed root finding,
//! extremum search, Gauss-Legendre quadrature and periodic tridiagonal solves.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Stopping rules for [`find_root_increasing`].
#[derive(Clone, Copy, Debug)]
pub struct RootOptions {
    /// Stop once `|f(x)| <= tol_f`.
    pub tol_f: f64,
    /// Stop once the bracket is narrower than `tol_x`.
    pub tol_x: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self { tol_f: 1e-14, tol_x: 0.0, max_iter: 200 }
    }
}

/// Outcome of a bracketed root search.
#[derive(Clone, Copy, Debug)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    /// The search stopped because the bracket shrank to adjacent floats.
    pub collapsed: bool,
}

/// Root of a nondecreasing function on `[lo, hi]` given `f(lo) <= 0 <= f(hi)`.
///
/// Illinois false position with a bisection fallback whenever the bracket
/// fails to halve over three steps or an endpoint value is infinite. The
/// bracket stays valid throughout, so the result never leaves `[lo, hi]`.
pub fn find_root_increasing<F>(
    mut f: F,
    lo: (f64, f64),
    hi: (f64, f64),
    opts: RootOptions,
) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut fa) = lo;
    let (mut b, mut fb) = hi;
    if fa > 0.0 || fb < 0.0 || a > b {
        return Err(Error::BracketFailure { what: "root bracket", last: a });
    }
    let mut best = if fa.abs() <= fb.abs() {
        Root { x: a, fx: fa, iterations: 0, collapsed: false }
    } else {
        Root { x: b, fx: fb, iterations: 0, collapsed: false }
    };
    if best.fx.abs() <= opts.tol_f {
        return Ok(best);
    }
    let mut side = 0i8;
    let mut width_ref = b - a;
    for it in 1..=opts.max_iter {
        let width = b - a;
        let force_bisect = it % 3 == 0 && width > 0.5 * width_ref;
        if it % 3 == 0 {
            width_ref = width;
        }
        let mid = 0.5 * (a + b);
        let mut x = if !force_bisect && fa.is_finite() && fb.is_finite() && fb > fa {
            (a * fb - b * fa) / (fb - fa)
        } else {
            mid
        };
        if !(x > a && x < b) {
            x = mid;
        }
        if !(x > a && x < b) {
            // Adjacent floats: nothing left to refine.
            best.iterations = it;
            best.collapsed = true;
            return Ok(best);
        }
        let fx = f(x)?;
        if fx.is_nan() {
            return Err(Error::NonFinite(format!("root function at {x}")));
        }
        if fx.abs() < best.fx.abs() || !best.fx.is_finite() {
            best = Root { x, fx, iterations: it, collapsed: false };
        }
        if fx.abs() <= opts.tol_f {
            return Ok(Root { x, fx, iterations: it, collapsed: false });
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if b - a <= opts.tol_x {
            best.iterations = it;
            return Ok(best);
        }
    }
    best.iterations = opts.max_iter;
    Ok(best)
}

/// Grow a bracket around `x0` for a nondecreasing `f` by doubling the step
/// outward. Returns `((lo, f(lo)), (hi, f(hi)))` with `f(lo) <= 0 <= f(hi)`.
pub fn expand_bracket_increasing<F>(
    mut f: F,
    x0: f64,
    step0: f64,
    limit: f64,
    what: &'static str,
) -> Result<((f64, f64), (f64, f64))>
where
    F: FnMut(f64) -> Result<f64>,
{
    let f0 = f(x0)?;
    if f0.is_nan() {
        return Err(Error::NonFinite(format!("{what} at {x0}")));
    }
    let mut step = step0.abs().max(f64::MIN_POSITIVE);
    let (mut near, mut fnear) = (x0, f0);
    let up = f0 < 0.0;
    loop {
        let x = if up { x0 + step } else { x0 - step };
        if (x - x0).abs() > limit || !x.is_finite() {
            return Err(Error::BracketFailure { what, last: x });
        }
        let fx = f(x)?;
        if fx.is_nan() {
            return Err(Error::NonFinite(format!("{what} at {x}")));
        }
        if up && fx >= 0.0 {
            return Ok(((near, fnear), (x, fx)));
        }
        if !up && fx <= 0.0 {
            return Ok(((x, fx), (near, fnear)));
        }
        near = x;
        fnear = fx;
        step *= 2.0;
    }
}

/// Plain bisection for a nondecreasing predicate-style function, run until
/// the bracket is below `tol`.
pub fn bisect_increasing<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Location and value of an extremum found by sampling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
}

/// Dense sampling on `[a, b]` followed by golden-section refinement around
/// the best sample. Returns `(min, max)`.
pub fn sample_extrema<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> (Extremum, Extremum) {
    let n = n.max(2);
    let h = (b - a) / (n - 1) as f64;
    let at = |i: usize| if i + 1 == n { b } else { a + h * i as f64 };
    let (mut imin, mut imax) = (0usize, 0usize);
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let v = f(at(i));
        if v < vmin {
            vmin = v;
            imin = i;
        }
        if v > vmax {
            vmax = v;
            imax = i;
        }
    }
    let refine = |i: usize, sign: f64, v0: f64| -> Extremum {
        let lo = at(i.saturating_sub(1));
        let hi = at((i + 1).min(n - 1));
        let g = golden_max(|x| sign * f(x), lo, hi, 1e-13 * (1.0 + lo.abs().max(hi.abs())));
        if sign * v0 >= g.value {
            Extremum { x: at(i), value: v0 }
        } else {
            Extremum { x: g.x, value: sign * g.value }
        }
    };
    (refine(imin, -1.0, vmin), refine(imax, 1.0, vmax))
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Extremum {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        Extremum { x: c, value: fc }
    } else {
        Extremum { x: d, value: fd }
    }
}

/// Indices `left < mid < right` of a sampled sequence maximizing
/// `v[mid] - max(v[left], v[right])`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorBump {
    pub left: usize,
    pub mid: usize,
    pub right: usize,
    pub margin: f64,
}

/// The largest interior bump of `v` (possibly with negative margin), or
/// `None` for fewer than three samples. A sequence is quasiconvex on its
/// index set exactly when the returned margin is `<= 0`.
pub fn best_interior_bump(v: &[f64]) -> Option<InteriorBump> {
    let n = v.len();
    if n < 3 {
        return None;
    }
    let mut right_min = vec![0usize; n];
    right_min[n - 1] = n - 1;
    for i in (0..n - 1).rev() {
        right_min[i] = if v[i] <= v[right_min[i + 1]] { i } else { right_min[i + 1] };
    }
    let mut left = 0usize;
    let mut best: Option<InteriorBump> = None;
    for mid in 1..n - 1 {
        if v[mid - 1] < v[left] {
            left = mid - 1;
        }
        let right = right_min[mid + 1];
        let margin = v[mid] - v[left].max(v[right]);
        if best.map_or(true, |b| margin > b.margin) {
            best = Some(InteriorBump { left, mid, right, margin });
        }
    }
    best
}

/// `n` equally spaced points from `a` to `b` inclusive, with exact endpoints.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let h = (b - a) / (n - 1) as f64;
            (0..n).map(|i| if i + 1 == n { b } else { a + h * i as f64 }).collect()
        }
    }
}

const GL_ORDER: usize = 16;

fn gauss_legendre_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

/// Composite Gauss-Legendre quadrature of `f` over `[a, b]` with `panels`
/// equal panels.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let rule = gauss_legendre_rule();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for &(x, w) in rule {
            s += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Cumulative integral of `phi` on a nonuniform grid using the
/// derivative-corrected trapezoid rule (exact for cubics).
pub fn cumulative_hermite(x: &[f64], phi: &[f64], dphi: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += hermite_panel(x[i] - x[i - 1], phi[i - 1], phi[i], dphi[i - 1], dphi[i]);
        out.push(acc);
    }
    out
}

/// Integral over one panel of width `h` of the cubic Hermite interpolant.
#[inline]
pub fn hermite_panel(h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    0.5 * h * (y0 + y1) + h * h / 12.0 * (d0 - d1)
}

/// Periodic tridiagonal system with the corner entries `sub[0]` (row 0,
/// column n-1) and `sup[n-1]` (row n-1, column 0), factored once for
/// repeated solves via Sherman-Morrison.
#[derive(Clone, Debug)]
pub struct CyclicTridiagonal {
    sub: Vec<f64>,
    cprime: Vec<f64>,
    denom: Vec<f64>,
    z: Vec<f64>,
    gamma: f64,
    corner_lo: f64,
    zfactor: f64,
}

impl CyclicTridiagonal {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n < 3 || sub.len() != n || sup.len() != n {
            return Err(Error::InvalidInput("cyclic tridiagonal needs n >= 3 and matching bands".into()));
        }
        let corner_lo = sub[0];
        let corner_hi = sup[n - 1];
        let gamma = -diag[0];
        let mut b = diag.clone();
        b[0] -= gamma;
        b[n - 1] -= corner_lo * corner_hi / gamma;
        let mut cprime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = b[0];
        cprime[0] = sup[0] / denom[0];
        for i in 1..n {
            denom[i] = b[i] - sub[i] * cprime[i - 1];
            if denom[i] == 0.0 {
                return Err(Error::NonFinite("singular tridiagonal pivot".into()));
            }
            cprime[i] = if i + 1 < n { sup[i] / denom[i] } else { 0.0 };
        }
        let mut me = Self { sub, cprime, denom, z: vec![0.0; n], gamma, corner_lo, zfactor: 0.0 };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = corner_hi;
        let mut z = vec![0.0; n];
        me.thomas(&u, &mut z);
        me.zfactor = 1.0 + z[0] + corner_lo * z[n - 1] / gamma;
        me.z = z;
        Ok(me)
    }

    fn thomas(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        out[0] = rhs[0] / self.denom[0];
        for i in 1..n {
            out[i] = (rhs[i] - self.sub[i] * out[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            out[i] -= self.cprime[i] * out[i + 1];
        }
    }

    /// Solve `A x = rhs`, writing the result into `out`.
    pub fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        self.thomas(rhs, out);
        let fact = (out[0] + self.corner_lo * out[n - 1] / self.gamma) / self.zfactor;
        for (o, z) in out.iter_mut().zip(&self.z) {
            *o -= fact * z;
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Product `A x` (used by tests and residual checks).
    pub fn apply(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| sub[i] * x[(i + n - 1) % n] + diag[i] * x[i] + sup[i] * x[(i + 1) % n])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn illinois_finds_cubic_root() {
        let f = |x: f64| Ok(x * x * x - 2.0);
        let r = find_root_increasing(f, (0.0, -2.0), (2.0, 6.0), RootOptions { tol_f: 1e-15, ..Default::default() })
            .unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-14);
        assert!(r.iterations < 40);
    }

    #[test]
    fn root_handles_infinite_endpoint() {
        let f = |x: f64| Ok(if x < -5.0 { f64::NEG_INFINITY } else { x - 0.25 });
        let r = find_root_increasing(f, (-10.0, f64::NEG_INFINITY), (1.0, 0.75), RootOptions::default()).unwrap();
        assert!((r.x - 0.25).abs() < 1e-14);
    }

    #[test]
    fn bracket_expands_both_ways() {
        let (lo, hi) = expand_bracket_increasing(|x| Ok(x - 37.0), 0.0, 1.0, 1e3, "t").unwrap();
        assert!(lo.1 <= 0.0 && hi.1 >= 0.0 && lo.0 < 37.0 && hi.0 >= 37.0);
        let (lo, hi) = expand_bracket_increasing(|x| Ok(x + 5.0), 0.0, 1.0, 1e3, "t").unwrap();
        assert!(lo.0 <= -5.0 && hi.0 > -5.0);
        assert!(expand_bracket_increasing(|_| Ok(-1.0), 0.0, 1.0, 10.0, "t").is_err());
    }

    #[test]
    fn gauss_legendre_is_exact_for_high_degree() {
        let v = integrate_gl(|x| x.powi(30), 0.0, 1.0, 1);
        assert!((v - 1.0 / 31.0).abs() < 1e-15);
        let v = integrate_gl(f64::exp, -1.0, 2.0, 3);
        assert!((v - (2f64.exp() - (-1f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn hermite_cumulative_is_exact_for_cubics() {
        let x = vec![0.0, 0.1, 0.35, 0.5, 1.0];
        let phi: Vec<f64> = x.iter().map(|t| t * t * t - t).collect();
        let dphi: Vec<f64> = x.iter().map(|t| 3.0 * t * t - 1.0).collect();
        let c = cumulative_hermite(&x, &phi, &dphi);
        for (t, v) in x.iter().zip(&c) {
            assert!((v - (t.powi(4) / 4.0 - t * t / 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn cyclic_solver_matches_product() {
        let n = 17;
        let sub: Vec<f64> = (0..n).map(|i| -1.0 - 0.01 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.5 + 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + 0.1 * i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let rhs = CyclicTridiagonal::apply(&sub, &diag, &sup, &x);
        let solver = CyclicTridiagonal::new(sub, diag, sup).unwrap();
        let mut out = vec![0.0; n];
        solver.solve_into(&rhs, &mut out);
        for (a, b) in out.iter().zip(&x) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn interior_bump_detection() {
        let convex: Vec<f64> = linspace(-1.0, 1.0, 101).iter().map(|x| x * x).collect();
        assert!(best_interior_bump(&convex).unwrap().margin <= 0.0);
        let bumpy = [3.0, 1.0, 2.0, 0.5, 4.0];
        let b = best_interior_bump(&bumpy).unwrap();
        assert_eq!((b.left, b.mid, b.right), (1, 2, 3));
        assert_eq!(b.margin, 1.0);
        assert!(best_interior_bump(&[1.0, 2.0]).is_none());
    }

    #[test]
    fn extrema_are_refined() {
        let (mn, mx) = sample_extrema(|x| (x - 0.3).powi(2), 0.0, 1.0, 11);
        assert!((mn.x - 0.3).abs() < 1e-6 && mn.value < 1e-12);
        assert!((mx.x - 1.0).abs() < 1e-12);
    }
}
