//! Bulk asymptotics in double precision: the action S(u) and its cubic
//! critical point equation, the liquid region and the map z ↔ (α, τ), the
//! two-dimensional inhomogeneous discrete sine kernel with its
//! one-dimensional degenerations, and a harness comparing the exact finite-N
//! kernel with the limit.
//!
//! The exact layer is only read from here (rationals are converted to f64 at
//! the boundary).

use crate::params::{fmt_q, is_compatible, to_f64, ColumnParams, RowSpec, Q};
use crate::process::{kernel_kap, AscendingFG};
use crate::{Error, Result};
use num::{ToPrimitive, Zero};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Global parameters x_*, w_*, y_*, θ_*, s_*.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GlobalParams {
    pub x: f64,
    pub w: f64,
    pub y: f64,
    pub theta: f64,
    pub s: f64,
}

impl GlobalParams {
    /// Requires x_* < w_* < y_* < θ_*⁻²w_* < s_*⁻²y_*.
    pub fn new(x: f64, w: f64, y: f64, theta: f64, s: f64) -> Result<Self> {
        let gp = GlobalParams { x, w, y, theta, s };
        let p = gp.points();
        if p.iter().any(|v| !v.is_finite()) || !p.windows(2).all(|v| v[0] < v[1]) {
            return Err(Error::Ordering(format!(
                "need x < w < y < θ⁻²w < s⁻²y, got {:?}",
                p
            )));
        }
        Ok(gp)
    }

    pub fn from_rationals(x: &Q, w: &Q, y: &Q, theta: &Q, s: &Q) -> Result<Self> {
        Self::new(to_f64(x), to_f64(w), to_f64(y), to_f64(theta), to_f64(s))
    }

    pub fn theta_w(&self) -> f64 {
        self.w / (self.theta * self.theta)
    }

    pub fn s_y(&self) -> f64 {
        self.y / (self.s * self.s)
    }

    /// The five logarithmic singularities in increasing order.
    pub fn points(&self) -> [f64; 5] {
        [self.x, self.w, self.y, self.theta_w(), self.s_y()]
    }
}

/// Coefficients of the five logarithms in S, matched to [`GlobalParams::points`].
fn log_coefficients(alpha: f64, tau: f64) -> [f64; 5] {
    [-1.0, tau, 1.0 - alpha, -tau, alpha]
}

/// log with the cut along the negative imaginary axis, arg ∈ (−π/2, 3π/2].
fn log_upper(v: Complex64) -> Complex64 {
    let mut l = v.ln();
    if l.im <= -PI / 2.0 {
        l.im += 2.0 * PI;
    }
    l
}

fn check_singular(u: Complex64, gp: &GlobalParams) -> Result<()> {
    for p in gp.points() {
        if (u - p).norm() == 0.0 {
            return Err(Error::Pole { root: format!("{p}"), what: "S(u)".into() });
        }
    }
    Ok(())
}

/// S(u) = −log(u−x) + (1−α)log(u−y) + α log(u−s⁻²y) + τ log(u−w) − τ log(u−θ⁻²w),
/// branch cuts in the lower half plane.
pub fn action_s(u: Complex64, gp: &GlobalParams, alpha: f64, tau: f64) -> Result<Complex64> {
    check_singular(u, gp)?;
    Ok(gp
        .points()
        .iter()
        .zip(log_coefficients(alpha, tau))
        .map(|(p, c)| c * log_upper(u - p))
        .sum())
}

pub fn action_s_prime(u: Complex64, gp: &GlobalParams, alpha: f64, tau: f64) -> Result<Complex64> {
    check_singular(u, gp)?;
    Ok(gp.points().iter().zip(log_coefficients(alpha, tau)).map(|(p, c)| c / (u - p)).sum())
}

pub fn action_s_second(u: Complex64, gp: &GlobalParams, alpha: f64, tau: f64) -> Result<Complex64> {
    check_singular(u, gp)?;
    Ok(gp
        .points()
        .iter()
        .zip(log_coefficients(alpha, tau))
        .map(|(p, c)| -c / ((u - p) * (u - p)))
        .sum())
}

// ------------------------------------------------------------------ cubic

type Poly = [f64; 5];

fn poly_mul_linear(p: &Poly, root: f64) -> Poly {
    let mut out = [0.0; 5];
    for k in 0..5 {
        if k > 0 {
            out[k] += p[k - 1];
        }
        out[k] -= root * p[k];
    }
    out
}

/// Σ_k c_k ∏_{j≠k}(u − p_j) for coefficient vector c.
fn cleared_numerator(points: &[f64; 5], c: &[f64; 5]) -> Poly {
    let mut out = [0.0; 5];
    for k in 0..5 {
        if c[k] == 0.0 {
            continue;
        }
        let mut p = [1.0, 0.0, 0.0, 0.0, 0.0];
        for (j, r) in points.iter().enumerate() {
            if j != k {
                p = poly_mul_linear(&p, *r);
            }
        }
        for i in 0..5 {
            out[i] += c[k] * p[i];
        }
    }
    out
}

/// The numerator of S′ split as N₀ + α N_α + τ N_τ, each a cubic (low degree
/// first). The u⁴ terms cancel because every coefficient vector sums to zero.
pub fn cubic_parts(gp: &GlobalParams) -> [[f64; 4]; 3] {
    let pts = gp.points();
    let basis = [
        [-1.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, -1.0, 0.0, 1.0],
        [0.0, 1.0, 0.0, -1.0, 0.0],
    ];
    let mut out = [[0.0; 4]; 3];
    for (o, c) in out.iter_mut().zip(basis.iter()) {
        let p = cleared_numerator(&pts, c);
        debug_assert!(p[4].abs() <= 1e-12 * p.iter().map(|v| v.abs()).fold(1.0, f64::max));
        o.copy_from_slice(&p[..4]);
    }
    out
}

/// Coefficients [c₀, c₁, c₂, c₃] of the critical point cubic at (α, τ).
pub fn cubic_coefficients(gp: &GlobalParams, alpha: f64, tau: f64) -> [f64; 4] {
    let [n0, na, nt] = cubic_parts(gp);
    let mut c = [0.0; 4];
    for i in 0..4 {
        c[i] = n0[i] + alpha * na[i] + tau * nt[i];
    }
    c
}

/// Discriminant of c₃u³ + c₂u² + c₁u + c₀.
pub fn discriminant(c: &[f64; 4]) -> f64 {
    let [d, cc, b, a] = *c;
    18.0 * a * b * cc * d - 4.0 * b.powi(3) * d + b * b * cc * cc - 4.0 * a * cc.powi(3) - 27.0 * a * a * d * d
}

/// The upper half plane root of a real cubic with negative discriminant.
fn upper_root(c: &[f64; 4]) -> Option<Complex64> {
    let [d, cc, b, a] = *c;
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if a.abs() <= 1e-14 * scale {
        let disc = cc * cc - 4.0 * b * d;
        if b == 0.0 || disc >= 0.0 {
            return None;
        }
        return Some(Complex64::new(-cc / (2.0 * b), (-disc).sqrt() / (2.0 * b.abs())));
    }
    let (b, cc, d) = (b / a, cc / a, d / a);
    let p = cc - b * b / 3.0;
    let q = 2.0 * b.powi(3) / 27.0 - b * cc / 3.0 + d;
    let d0 = q * q / 4.0 + p.powi(3) / 27.0;
    if d0 <= 0.0 {
        return None;
    }
    let sq = d0.sqrt();
    let c1 = (-q / 2.0 + sq).cbrt();
    let c2 = (-q / 2.0 - sq).cbrt();
    let re = -(c1 + c2) / 2.0 - b / 3.0;
    let im = (3f64.sqrt() / 2.0 * (c1 - c2)).abs();
    if im == 0.0 {
        return None;
    }
    Some(Complex64::new(re, im))
}

/// The critical point z(α, τ) in the upper half plane, or `None` outside the
/// liquid region.
pub fn critical_point(gp: &GlobalParams, alpha: f64, tau: f64) -> Option<Complex64> {
    let c = cubic_coefficients(gp, alpha, tau);
    if discriminant(&c) >= 0.0 {
        return None;
    }
    let mut z = upper_root(&c)?;
    if let (Ok(d1), Ok(d2)) = (action_s_prime(z, gp, alpha, tau), action_s_second(z, gp, alpha, tau)) {
        let step = d1 / d2;
        if step.is_finite() && (z - step).im > 0.0 {
            z -= step;
        }
    }
    Some(z)
}

pub fn in_liquid_region(gp: &GlobalParams, alpha: f64, tau: f64) -> bool {
    alpha >= 0.0 && tau >= 0.0 && discriminant(&cubic_coefficients(gp, alpha, tau)) < 0.0
}

/// (α, τ) with z(α, τ) = z, from the real and imaginary parts of the cubic.
pub fn inverse_map(z: Complex64, gp: &GlobalParams) -> Result<(f64, f64)> {
    if z.im <= 0.0 {
        return Err(Error::Other(format!("Im z = {} must be positive", z.im)));
    }
    let [n0, na, nt] = cubic_parts(gp);
    let ev = |p: &[f64; 4]| p.iter().rev().fold(Complex64::zero(), |acc, c| acc * z + c);
    let (e0, ea, et) = (ev(&n0), ev(&na), ev(&nt));
    let det = ea.re * et.im - et.re * ea.im;
    if det.abs() < 1e-300 {
        return Err(Error::Degenerate("singular system for (α, τ)".into()));
    }
    let alpha = (-e0.re * et.im + et.re * e0.im) / det;
    let tau = (-ea.re * e0.im + e0.re * ea.im) / det;
    Ok((alpha, tau))
}

// ------------------------------------------------------- local sequences

/// A ℤ-indexed sequence equal to `tail` outside [start, start + len).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BiSeq {
    pub start: i64,
    pub values: Vec<f64>,
    pub tail: f64,
}

impl BiSeq {
    pub fn constant(tail: f64) -> Self {
        BiSeq { start: 0, values: vec![], tail }
    }

    /// Values for indices −L..=L.
    pub fn centered(values: Vec<f64>, tail: f64) -> Self {
        let l = (values.len() / 2) as i64;
        BiSeq { start: -l, values, tail }
    }

    pub fn get(&self, i: i64) -> f64 {
        let k = i - self.start;
        if k >= 0 && (k as usize) < self.values.len() {
            self.values[k as usize]
        } else {
            self.tail
        }
    }

    /// Indices where a value may differ from the tail, widened by one.
    fn span(&self) -> (i64, i64) {
        (self.start - 1, self.start + self.values.len() as i64)
    }

    /// Keeps only |i| ≤ l, with `tail` elsewhere.
    pub fn truncated(&self, l: i64, tail: f64) -> Self {
        let values = (-l..=l).map(|i| self.get(i)).collect();
        BiSeq { start: -l, values, tail }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        BiSeq { start: self.start, values: self.values.iter().map(|v| f(*v)).collect(), tail: f(self.tail) }
    }
}

/// The four parameter sequences of the limit kernel, with constant tails.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalSequences {
    pub w: BiSeq,
    pub theta: BiSeq,
    pub y: BiSeq,
    pub s: BiSeq,
}

fn combine(a: &BiSeq, b: &BiSeq, f: impl Fn(f64, f64) -> f64) -> BiSeq {
    let lo = a.start.min(b.start);
    let hi = (a.start + a.values.len() as i64).max(b.start + b.values.len() as i64);
    BiSeq { start: lo, values: (lo..hi).map(|i| f(a.get(i), b.get(i))).collect(), tail: f(a.tail, b.tail) }
}

fn sup(s: &BiSeq) -> f64 {
    s.values.iter().fold(s.tail, |m, v| m.max(*v))
}

fn inf(s: &BiSeq) -> f64 {
    s.values.iter().fold(s.tail, |m, v| m.min(*v))
}

impl LocalSequences {
    pub fn homogeneous(gp: &GlobalParams) -> Self {
        LocalSequences {
            w: BiSeq::constant(gp.w),
            theta: BiSeq::constant(gp.theta),
            y: BiSeq::constant(gp.y),
            s: BiSeq::constant(gp.s),
        }
    }

    pub fn theta_w(&self) -> BiSeq {
        combine(&self.w, &self.theta, |w, t| w / (t * t))
    }

    pub fn s_y(&self) -> BiSeq {
        combine(&self.y, &self.s, |y, s| y / (s * s))
    }

    /// sup w < inf y ≤ sup y < inf θ⁻²w ≤ sup θ⁻²w < inf s⁻²y.
    pub fn is_ordering(&self) -> bool {
        let tw = self.theta_w();
        let sy = self.s_y();
        sup(&self.w) < inf(&self.y) && sup(&self.y) < inf(&tw) && sup(&tw) < inf(&sy)
    }

    /// The sequences with w and y negated, which leaves every domino weight
    /// unchanged.
    pub fn negated(&self) -> Self {
        LocalSequences { w: self.w.map(|v| -v), theta: self.theta.clone(), y: self.y.map(|v| -v), s: self.s.clone() }
    }

    /// Truncation to |i| ≤ l with global values outside.
    pub fn truncated(&self, l: i64, gp: &GlobalParams) -> Self {
        LocalSequences {
            w: self.w.truncated(l, gp.w),
            theta: self.theta.truncated(l, gp.theta),
            y: self.y.truncated(l, gp.y),
            s: self.s.truncated(l, gp.s),
        }
    }

    fn index_range(&self) -> (i64, i64) {
        [&self.w, &self.theta, &self.y, &self.s]
            .iter()
            .map(|s| s.span())
            .fold((0, 0), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)))
    }

    /// Domino weights (b, c, d) of the w-rows at row i and primed column j:
    /// ((y_{j+1}−w)/(S−w), (S−θ⁻²w)/(S−w), (θ⁻²w−y_{j+1})/(S−w)) with
    /// S = s_j⁻²y_j; the a-weight is 1.
    pub fn panel_weights(&self, i: i64, j: i64) -> [f64; 3] {
        let w = self.w.get(i);
        let th = self.theta.get(i);
        let tw = w / (th * th);
        let sj = self.s.get(j);
        let big_s = self.y.get(j) / (sj * sj);
        let y1 = self.y.get(j + 1);
        let den = big_s - w;
        [(y1 - w) / den, (big_s - tw) / den, (tw - y1) / den]
    }

    /// Every w-row domino weight is finite and positive. With constant tails
    /// finitely many (i, j) pairs cover all distinct values, so positivity is
    /// also separation from zero and infinity.
    pub fn panel_positive(&self) -> bool {
        let (lo, hi) = self.index_range();
        (lo..=hi).all(|i| {
            (lo - 1..=hi).all(|j| self.panel_weights(i, j).iter().all(|v| v.is_finite() && *v > 0.0))
        })
    }

    /// A real crossing point for the arc: left of every w_i when Δt ≥ 0,
    /// between θ⁻²w and s⁻²y otherwise.
    fn crossing(&self, dt: i64) -> Result<f64> {
        let tw = self.theta_w();
        let sy = self.s_y();
        if !self.is_ordering() {
            return Err(Error::Ordering("crossing window empty: sequences violate the bulk ordering".into()));
        }
        if dt >= 0 {
            let lo = inf(&self.w);
            Ok(lo - (sup(&sy) - lo).max(1.0))
        } else {
            Ok(0.5 * (sup(&tw) + inf(&sy)))
        }
    }
}

/// 𝒫_{n,n′}(u | b; c).
pub fn inhom_power(n: i64, n2: i64, u: Complex64, b: impl Fn(i64) -> f64, c: impl Fn(i64) -> f64) -> Result<Complex64> {
    let mut out = Complex64::new(1.0, 0.0);
    let (lo, hi, inverted) = if n <= n2 { (n, n2, false) } else { (n2, n, true) };
    for j in lo + 1..=hi {
        let (num, den) = if inverted { (u - c(j), u - b(j)) } else { (u - b(j), u - c(j)) };
        if den.norm() == 0.0 {
            return Err(Error::Pole { root: format!("{}", u.re), what: "inhomogeneous power".into() });
        }
        out *= num / den;
    }
    Ok(out)
}

/// A kernel value with the quadrature error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelValue {
    pub value: f64,
    pub error: f64,
}

/// −(1/π) Im ∫ f(u) du along the segment from the real point `xc` to z.
fn im_segment_integral(xc: f64, z: Complex64, tol: f64, f: impl Fn(Complex64) -> Complex64) -> KernelValue {
    let dz = z - xc;
    let out = quadrature::integrate(|s| (f(xc + dz * s) * dz).im, 0.0, 1.0, tol * PI);
    KernelValue { value: -out.integral / PI, error: out.error_estimate / PI }
}

fn k2d_integrand(t: i64, a: i64, t2: i64, a2: i64, seqs: &LocalSequences, u: Complex64) -> Complex64 {
    let ya = seqs.y.get(a);
    let sa = seqs.s.get(a);
    let sy = |j: i64| seqs.y.get(j) / (seqs.s.get(j) * seqs.s.get(j));
    let tw = |i: i64| seqs.w.get(i) / (seqs.theta.get(i) * seqs.theta.get(i));
    let pre = ya * (1.0 - 1.0 / (sa * sa)) / ((u - ya) * (u - sy(a2)));
    let pa = inhom_power(a, a2, u, sy, |j| seqs.y.get(j)).unwrap_or(Complex64::new(f64::NAN, 0.0));
    let pt = inhom_power(t, t2, u, |i| seqs.w.get(i), tw).unwrap_or(Complex64::new(f64::NAN, 0.0));
    pre * pa * pt
}

/// K_2d^z(t, a; t′, a′) to absolute tolerance `tol`.
pub fn kernel_k2d(t: i64, a: i64, t2: i64, a2: i64, z: Complex64, seqs: &LocalSequences, tol: f64) -> Result<KernelValue> {
    if z.im <= 0.0 {
        return Err(Error::Other(format!("Im z = {} must be positive", z.im)));
    }
    let xc = seqs.crossing(t2 - t)?;
    Ok(im_segment_integral(xc, z, tol, |u| k2d_integrand(t, a, t2, a2, seqs, u)))
}

/// The equal-time slice K_1d^z(a, a′).
pub fn kernel_k1d(a: i64, a2: i64, z: Complex64, seqs: &LocalSequences, tol: f64) -> Result<KernelValue> {
    kernel_k2d(0, a, 0, a2, z, seqs, tol)
}

/// −arg V_a(z)/π with V_a(u) = (u − y_a)/(u − s_a⁻²y_a).
pub fn density(a: i64, z: Complex64, seqs: &LocalSequences) -> f64 {
    let ya = seqs.y.get(a);
    let sa = seqs.s.get(a);
    let v = (z - ya) / (z - ya / (sa * sa));
    -v.arg() / PI
}

/// |V(z)|^{a−a′} sin(πρ(a′−a)) / (π(a′−a)) for homogeneous y, s.
pub fn discrete_sine(a: i64, a2: i64, z: Complex64, y: f64, s: f64) -> f64 {
    let v = (z - y) / (z - y / (s * s));
    let rho = -v.arg() / PI;
    let d = (a2 - a) as f64;
    if a == a2 {
        return rho;
    }
    v.norm().powf(-d) * (PI * rho * d).sin() / (PI * d)
}

/// The 2-periodic degeneration y_i = s_i²c_i, s → 0, with c_i = c₀ on even
/// and c₁ on odd sites.
pub fn periodic_2block(a: i64, a2: i64, c0: f64, c1: f64, z: Complex64, tol: f64) -> Result<KernelValue> {
    if z.im <= 0.0 {
        return Err(Error::Other(format!("Im z = {} must be positive", z.im)));
    }
    let c = |i: i64| if i.rem_euclid(2) == 0 { c0 } else { c1 };
    let xc = -(c0.abs().max(c1.abs()).max(1.0));
    // −c_a / (u (u − c_{a′})) · 𝒫_{a,a′}(u | c; 0), with the sign flipped
    // into the −(1/π) Im convention.
    Ok(im_segment_integral(xc, z, tol, |u| {
        let pa = inhom_power(a, a2, u, c, |_| 0.0).unwrap_or(Complex64::new(f64::NAN, 0.0));
        -c(a) / (u * (u - c(a2))) * pa
    }))
}

// ----------------------------------------------------------------- harness

/// One global parameter bank in rationals, for building the exact process.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalGlobals {
    pub x: Q,
    pub w: Q,
    pub y: Q,
    pub theta: Q,
    pub s: Q,
}

impl RationalGlobals {
    pub fn to_f64(&self) -> Result<GlobalParams> {
        GlobalParams::from_rationals(&self.x, &self.w, &self.y, &self.theta, &self.s)
    }
}

/// Local sequences in rationals on |i| ≤ L (each of length 2L + 1).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RationalLocal {
    pub w: Vec<Q>,
    pub theta: Vec<Q>,
    pub y: Vec<Q>,
    pub s: Vec<Q>,
}

impl RationalLocal {
    pub fn cutoff(&self) -> i64 {
        (self.w.len().max(self.theta.len()).max(self.y.len()).max(self.s.len()) / 2) as i64
    }

    fn seq(v: &[Q], tail: f64) -> BiSeq {
        if v.is_empty() {
            BiSeq::constant(tail)
        } else {
            BiSeq::centered(v.iter().map(to_f64).collect(), tail)
        }
    }

    pub fn to_f64(&self, gp: &GlobalParams) -> LocalSequences {
        LocalSequences {
            w: Self::seq(&self.w, gp.w),
            theta: Self::seq(&self.theta, gp.theta),
            y: Self::seq(&self.y, gp.y),
            s: Self::seq(&self.s, gp.s),
        }
    }
}

fn local_at<'a>(v: &'a [Q], k: i64, tail: &'a Q) -> &'a Q {
    let l = (v.len() / 2) as i64;
    if v.is_empty() || k.abs() > l {
        tail
    } else {
        &v[(k + l) as usize]
    }
}

/// The ascending FG process at size N with (α, τ) scaling: x_i = x_* for
/// i ≤ N, T = ⌊τN⌋ + t_extra rows, and local parameters placed around ⌊τN⌋
/// and ⌊αN⌋. The normalizer Z is not computed.
pub fn scaled_process(
    g: &RationalGlobals,
    local: &RationalLocal,
    alpha: &Q,
    tau: &Q,
    n: usize,
    t_extra: usize,
) -> Result<AscendingFG> {
    let nq = Q::from_integer(n.into());
    let t0 = (tau * &nq).floor().to_integer().to_i64().unwrap_or(0);
    let a0 = (alpha * &nq).floor().to_integer().to_i64().unwrap_or(0);
    let big_t = t0 + t_extra as i64;
    let x = RowSpec::new(vec![g.x.clone(); n], vec![Q::new(1.into(), 2.into()); n])?;
    let (mut wv, mut tv) = (vec![], vec![]);
    for i in 1..=big_t {
        wv.push(local_at(&local.w, i - t0, &g.w).clone());
        tv.push(local_at(&local.theta, i - t0, &g.theta).clone());
    }
    let w = RowSpec::new(wv, tv)?;
    let l = local.cutoff();
    let (mut yv, mut sv) = (vec![], vec![]);
    for j in 1..=(a0 + l + 1).max(1) {
        yv.push(local_at(&local.y, j - a0, &g.y).clone());
        sv.push(local_at(&local.s, j - a0, &g.s).clone());
    }
    let col = ColumnParams::new(yv, sv, g.y.clone(), g.s.clone());
    let c = is_compatible(&x, &w, &col)?;
    if !c.compatible {
        return Err(Error::Incompatible(fmt_q(&c.ratio)));
    }
    Ok(AscendingFG { x, w, col })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnessRow {
    pub n: usize,
    pub entry: (i64, i64, i64, i64),
    pub k_ap_exact: String,
    pub k_ap: f64,
    pub k_2d: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnessReport {
    pub z: (f64, f64),
    pub alpha: f64,
    pub tau: f64,
    pub rows: Vec<HarnessRow>,
}

/// Evaluates exact K_AP(⌊τN⌋ + t, ⌊αN⌋ + a; ⌊τN⌋ + t′, ⌊αN⌋ + a′) for each N
/// in `schedule` against K_2d^z(t, a; t′, a′) with z = z(α, τ).
pub fn convergence_harness(
    g: &RationalGlobals,
    local: &RationalLocal,
    alpha: &Q,
    tau: &Q,
    entries: &[(i64, i64, i64, i64)],
    schedule: &[usize],
    tol: f64,
) -> Result<HarnessReport> {
    let gp = g.to_f64()?;
    let (af, tf) = (to_f64(alpha), to_f64(tau));
    let z = critical_point(&gp, af, tf)
        .ok_or_else(|| Error::Other(format!("(α, τ) = ({af}, {tf}) is outside the liquid region")))?;
    let seqs = local.to_f64(&gp);
    let limits: Vec<f64> = entries
        .par_iter()
        .map(|&(t, a, t2, a2)| kernel_k2d(t, a, t2, a2, z, &seqs, tol).map(|k| k.value))
        .collect::<Result<_>>()?;
    let t_extra = entries.iter().map(|e| e.0.max(e.2)).max().unwrap_or(0).max(0) as usize + 1;
    let mut rows = vec![];
    for &n in schedule {
        let p = scaled_process(g, local, alpha, tau, n, t_extra)?;
        let nq = Q::from_integer(n.into());
        let t0 = (tau * &nq).floor().to_integer().to_i64().unwrap_or(0);
        let a0 = (alpha * &nq).floor().to_integer().to_i64().unwrap_or(0);
        let vals: Vec<Q> = entries
            .par_iter()
            .map(|&(t, a, t2, a2)| {
                let (tt, tt2) = (t0 + t, t0 + t2);
                if tt < 1 || tt2 < 1 {
                    return Err(Error::Other("harness entry falls below row 1".into()));
                }
                kernel_kap(&p, tt as usize, a0 + a, tt2 as usize, a0 + a2)
            })
            .collect::<Result<_>>()?;
        for ((e, v), lim) in entries.iter().zip(vals).zip(&limits) {
            let k = to_f64(&v);
            rows.push(HarnessRow { n, entry: *e, k_ap_exact: fmt_q(&v), k_ap: k, k_2d: *lim, gap: (k - lim).abs() });
        }
    }
    Ok(HarnessReport { z: (z.re, z.im), alpha: af, tau: tf, rows })
}

/// True when each successive gap ratio g(N)/g(2N) lies within a factor 2 of
/// √2, the ratio of an N^{−1/2} rate under doubling.
pub fn rate_consistent(gaps: &[f64]) -> bool {
    gaps.windows(2).all(|g| {
        let r = g[0] / g[1];
        let target = 2f64.sqrt();
        r.is_finite() && r >= target / 2.0 && r <= target * 2.0
    })
}

/// Default homogeneous bank for bulk runs: x_* = 1/2, w_* = 2/3, y_* = 9/10, θ_* = 4/5, s_* = 1/2.
pub fn standard_globals() -> RationalGlobals {
    use crate::params::q;
    RationalGlobals { x: q(1, 2), w: q(2, 3), y: q(9, 10), theta: q(4, 5), s: q(1, 2) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::q;
    use crate::tiling::{domino_weight, Domino, DominoType, Orient};
    use proptest::prelude::*;

    fn fig() -> GlobalParams {
        standard_globals().to_f64().unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ordering_is_enforced() {
        assert!(GlobalParams::new(0.5, 0.4, 0.9, 0.8, 0.5).is_err());
        assert!(GlobalParams::new(0.5, 2.0 / 3.0, 0.9, 0.8, 0.5).is_ok());
        // θ⁻²w above s⁻²y
        assert!(GlobalParams::new(0.5, 2.0 / 3.0, 0.9, 0.3, 0.5).is_err());
    }

    #[test]
    fn cubic_has_no_quartic_term_and_matches_leading_coefficient() {
        let gp = fig();
        let pts = gp.points();
        for (alpha, tau) in [(0.3, 2.0), (1.5, 1.5), (4.0, 0.1)] {
            let full = cleared_numerator(&pts, &log_coefficients(alpha, tau));
            assert!(full[4].abs() < 1e-12);
            let c3 = alpha * gp.y * (1.0 / (gp.s * gp.s) - 1.0) - tau * gp.w * (1.0 / (gp.theta * gp.theta) - 1.0) + gp.y - gp.x;
            let cf = cubic_coefficients(&gp, alpha, tau);
            assert!((cf[3] - c3).abs() < 1e-12, "{} vs {}", cf[3], c3);
            // S′ vanishes wherever the cubic does (away from the five points)
            let u = c(0.123, 0.456);
            let poly = cf.iter().rev().fold(Complex64::zero(), |acc, k| acc * u + k);
            let prod: Complex64 = pts.iter().map(|p| u - p).product();
            let sp = action_s_prime(u, &gp, alpha, tau).unwrap();
            assert!((sp * prod - poly).norm() < 1e-12);
        }
    }

    #[test]
    fn standard_point_is_liquid() {
        let gp = fig();
        let z = critical_point(&gp, 1.5, 1.5).expect("liquid");
        assert!(z.im > 0.0);
        assert!(action_s_prime(z, &gp, 1.5, 1.5).unwrap().norm() < 1e-10);
        assert!(action_s_second(z, &gp, 1.5, 1.5).unwrap().norm() > 1e-6);
        let (a, t) = inverse_map(z, &gp).unwrap();
        assert!((a - 1.5).abs() < 1e-9 && (t - 1.5).abs() < 1e-9);
    }

    #[test]
    fn frozen_region_has_no_critical_point() {
        let gp = fig();
        assert!(critical_point(&gp, 0.01, 5.0).is_none());
        assert!(critical_point(&gp, 6.0, 0.01).is_none());
        assert!(!in_liquid_region(&gp, 0.01, 5.0));
    }

    #[test]
    fn inverse_map_round_trips() {
        let gp = fig();
        for z in [c(0.8, 0.2), c(1.1, 0.05), c(2.0, 1.3)] {
            let (a, t) = inverse_map(z, &gp).unwrap();
            assert!(a > 0.0 && t > 0.0, "({a}, {t}) for {z}");
            let back = critical_point(&gp, a, t).unwrap();
            assert!((back - z).norm() < 1e-9, "{back} vs {z}");
            let (a2, t2) = inverse_map(back, &gp).unwrap();
            assert!((a2 - a).abs() < 1e-9 * a.max(1.0) && (t2 - t).abs() < 1e-9 * t.max(1.0));
        }
        assert!(inverse_map(c(1.0, 0.0), &gp).is_err());
    }

    #[test]
    fn inverse_map_diverges_near_x() {
        let gp = fig();
        let (a1, t1) = inverse_map(c(gp.x, 1e-2), &gp).unwrap();
        let (a2, t2) = inverse_map(c(gp.x, 1e-4), &gp).unwrap();
        assert!(a2 > 10.0 * a1 && t2 > 10.0 * t1);
    }

    #[test]
    fn unit_point_maps_inside() {
        // points −1 < 1/4 < 1/2 < 1 < 2
        let gp = GlobalParams::new(-1.0, 0.25, 0.5, 0.5, 0.5).unwrap();
        let (a, t) = inverse_map(c(0.0, 1.0), &gp).unwrap();
        assert!(a.is_finite() && t.is_finite() && a > 0.0 && t > 0.0, "({a}, {t})");
        assert!((critical_point(&gp, a, t).unwrap() - c(0.0, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn real_part_vanishes_at_infinity() {
        let gp = fig();
        for k in 0..=8 {
            let p = PI * k as f64 / 8.0;
            let u = Complex64::from_polar(1e6, p);
            assert!(action_s(u, &gp, 1.5, 1.5).unwrap().re.abs() < 1e-4);
        }
    }

    #[test]
    fn signs_at_singularities() {
        let gp = fig();
        let eps = 1e-12;
        let re = |p: f64| action_s(c(p, eps), &gp, 1.5, 1.5).unwrap().re;
        let [x, w, y, tw, sy] = gp.points();
        assert!(re(x) > 10.0);
        assert!(re(w) < -10.0);
        assert!(re(y) > 10.0);
        assert!(re(tw) > 10.0);
        assert!(re(sy) < -10.0);
        assert!(action_s(c(y, eps), &gp, 0.5, 1.5).unwrap().re < -10.0);
        assert!(action_s(c(w, 0.0), &gp, 1.5, 1.5).is_err());
    }

    #[test]
    fn inhomogeneous_power_identities() {
        let u = c(0.3, 0.7);
        let b = |j: i64| 1.0 + 0.1 * j as f64;
        let cc = |j: i64| 3.0 - 0.05 * j as f64;
        assert_eq!(inhom_power(4, 4, u, b, cc).unwrap(), c(1.0, 0.0));
        let p = inhom_power(-2, 5, u, b, cc).unwrap() * inhom_power(5, -2, u, b, cc).unwrap();
        assert!((p - 1.0).norm() < 1e-14);
        let hom = inhom_power(0, 2, u, |_| 1.0, |_| 3.0).unwrap();
        let r = (u - 1.0) / (u - 3.0);
        assert!((hom - r * r).norm() < 1e-14);
    }

    #[test]
    fn density_is_diagonal() {
        let gp = fig();
        let seqs = LocalSequences::homogeneous(&gp);
        for z in [c(0.8, 0.2), c(2.0, 1.3)] {
            for dt in [0, 3] {
                let k = kernel_k2d(dt, 2, dt, 2, z, &seqs, DEFAULT_TOL).unwrap();
                assert!((k.value - density(2, z, &seqs)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn homogeneous_slice_is_discrete_sine() {
        let gp = fig();
        let seqs = LocalSequences::homogeneous(&gp);
        let z = c(1.1, 0.4);
        for (a, a2) in [(0, 0), (0, 1), (3, 0), (-2, 4)] {
            let k = kernel_k1d(a, a2, z, &seqs, DEFAULT_TOL).unwrap().value;
            let ds = discrete_sine(a, a2, z, gp.y, gp.s);
            assert!((k - ds).abs() < 1e-9 * ds.abs().max(1.0), "({a},{a2}): {k} vs {ds}");
        }
    }

    fn local_example() -> (GlobalParams, LocalSequences) {
        let gp = fig();
        let seqs = LocalSequences {
            w: BiSeq::centered(vec![0.6, 0.7, 0.65, 0.62, 0.68], gp.w),
            theta: BiSeq::centered(vec![0.78, 0.82, 0.8, 0.79, 0.81], gp.theta),
            y: BiSeq::centered(vec![0.88, 0.92, 0.9, 0.93, 0.86], gp.y),
            s: BiSeq::centered(vec![0.5, 0.45, 0.52, 0.48, 0.5], gp.s),
        };
        assert!(seqs.is_ordering());
        (gp, seqs)
    }

    #[test]
    fn minors_are_probabilities() {
        let (_, seqs) = local_example();
        let z = c(1.0, 0.3);
        let pts: Vec<(i64, i64)> = vec![(0, 0), (0, 1), (1, 0), (-1, 2), (2, -1), (1, 1)];
        let mut rng = 12345u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 33) as usize
        };
        for _ in 0..30 {
            let m = 1 + next() % 3;
            let mut idx: Vec<usize> = (0..pts.len()).collect();
            for i in 0..m {
                let j = i + next() % (idx.len() - i);
                idx.swap(i, j);
            }
            let sel: Vec<(i64, i64)> = idx[..m].iter().map(|&i| pts[i]).collect();
            let mat: Vec<Vec<f64>> = sel
                .iter()
                .map(|&(t, a)| {
                    sel.iter().map(|&(t2, a2)| kernel_k2d(t, a, t2, a2, z, &seqs, DEFAULT_TOL).unwrap().value).collect()
                })
                .collect();
            let d = det_f64(&mat);
            assert!(d >= -1e-8 && d <= 1.0 + 1e-8, "{sel:?}: {d}");
        }
    }

    fn det_f64(m: &[Vec<f64>]) -> f64 {
        match m.len() {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    #[test]
    fn independent_of_cutoff() {
        let (gp, seqs) = local_example();
        let z = c(0.95, 0.25);
        for l in [3, 5] {
            let cut = seqs.truncated(l, &gp);
            for (t, a, t2, a2) in [(0, 0, 1, 2), (2, 1, -1, 0), (-2, 2, 2, -2)] {
                let k = kernel_k2d(t, a, t2, a2, z, &seqs, DEFAULT_TOL).unwrap().value;
                let kc = kernel_k2d(t, a, t2, a2, z, &cut, DEFAULT_TOL).unwrap().value;
                assert!((k - kc).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quadrature_is_self_consistent() {
        let (_, seqs) = local_example();
        let z = c(1.2, 0.6);
        for (t, a, t2, a2) in [(0, 0, 2, 1), (1, 2, -1, 0)] {
            let k1 = kernel_k2d(t, a, t2, a2, z, &seqs, 1e-8).unwrap();
            let k2 = kernel_k2d(t, a, t2, a2, z, &seqs, 5e-9).unwrap();
            assert!((k1.value - k2.value).abs() <= k1.error + 1e-14);
        }
    }

    #[test]
    fn periodic_kernel_is_limit_and_two_periodic() {
        let (c0, c1) = (1.0, 2.5);
        let z = c(0.7, 0.9);
        let k = |a, b| periodic_2block(a, b, c0, c1, z, DEFAULT_TOL).unwrap().value;
        assert!((k(0, 0) - k(2, 2)).abs() < 1e-10);
        assert!((k(1, 4) - k(3, 6)).abs() < 1e-10);
        assert!((k(0, 0) - k(1, 1)).abs() > 1e-3);
        // small s with y = s²c
        let s = 1e-3;
        let seqs = LocalSequences {
            w: BiSeq::constant(5e-7),
            theta: BiSeq::constant(0.4),
            y: BiSeq { start: -4, values: (-4..=5).map(|i| s * s * if i % 2 == 0 { c0 } else { c1 }).collect(), tail: s * s * c0 },
            s: BiSeq::constant(s),
        };
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 3), (2, -1)] {
            let kk = kernel_k1d(a, b, z, &seqs, DEFAULT_TOL).unwrap().value;
            assert!((kk - k(a, b)).abs() < 1e-4, "({a},{b}) {kk} vs {}", k(a, b));
        }
    }

    #[test]
    fn ordering_violation_is_refused() {
        let gp = fig();
        let mut seqs = LocalSequences::homogeneous(&gp);
        seqs.w = BiSeq::centered(vec![0.95], gp.w);
        assert!(matches!(kernel_k2d(0, 0, 1, 0, c(1.0, 0.3), &seqs, DEFAULT_TOL), Err(Error::Ordering(_))));
    }

    #[test]
    fn panel_matches_tiling_weights() {
        let p = crate::process::tests::test_process();
        let gp = GlobalParams::new(-1.0, to_f64(&p.w.values[0]), 1.0, to_f64(&p.w.spins[0]), 0.5).unwrap();
        let seqs = LocalSequences {
            w: BiSeq { start: 1, values: p.w.values.iter().map(to_f64).collect(), tail: gp.w },
            theta: BiSeq { start: 1, values: p.w.spins.iter().map(to_f64).collect(), tail: gp.theta },
            y: BiSeq { start: 1, values: (1..=4).map(|j| to_f64(&p.col.y(j))).collect(), tail: to_f64(&p.col.y_tail) },
            s: BiSeq { start: 1, values: (1..=4).map(|j| to_f64(&p.col.s(j))).collect(), tail: to_f64(&p.col.s_tail) },
        };
        for i in 1..=2i64 {
            for j in 1..=3i64 {
                let expect = seqs.panel_weights(i, j);
                // primed column j, row i (≤ T)
                let placed = [
                    (DominoType::B, Orient::Nw, 2 * j + 2, 2 * i),
                    (DominoType::C, Orient::Nw, 2 * j + 1, 2 * i + 1),
                    (DominoType::D, Orient::Ne, 2 * j + 1, 2 * i + 1),
                ];
                for (k, (kind, orient, x, y)) in placed.into_iter().enumerate() {
                    let dm = Domino { x, y, orient, kind };
                    let got = to_f64(&domino_weight(&dm, &p).unwrap());
                    assert!((got - expect[k]).abs() < 1e-12, "{kind:?} at ({i},{j}): {got} vs {}", expect[k]);
                }
            }
        }
    }

    fn seq_strategy() -> impl Strategy<Value = LocalSequences> {
        let vals = |lo: f64, hi: f64| prop::collection::vec(lo..hi, 3);
        (vals(-1.0, 1.2), vals(0.3, 0.99), vals(0.5, 1.5), vals(0.2, 0.9), any::<bool>()).prop_map(
            |(w, th, y, s, flip)| {
                let seqs = LocalSequences {
                    w: BiSeq::centered(w[..2].to_vec(), w[2]),
                    theta: BiSeq::centered(th[..2].to_vec(), th[2]),
                    y: BiSeq::centered(y[..2].to_vec(), y[2]),
                    s: BiSeq::centered(s[..2].to_vec(), s[2]),
                };
                if flip {
                    seqs.negated()
                } else {
                    seqs
                }
            },
        )
    }

    proptest! {
        #[test]
        fn ordering_iff_positive_panel(seqs in seq_strategy()) {
            let ordered = seqs.is_ordering() || seqs.negated().is_ordering();
            prop_assert_eq!(ordered, seqs.panel_positive());
        }
    }

    #[test]
    fn ordered_examples_occur() {
        let (_, seqs) = local_example();
        assert!(seqs.panel_positive());
        assert!(seqs.negated().panel_positive());
        assert!(!seqs.negated().is_ordering());
    }

    #[test]
    fn harness_small_n() {
        let g = standard_globals();
        let rep = convergence_harness(&g, &RationalLocal::default(), &q(3, 2), &q(3, 2), &[(0, 0, 0, 0), (0, 0, 1, 1)], &[8, 16], DEFAULT_TOL)
            .unwrap();
        let gaps: Vec<f64> = rep.rows.iter().filter(|r| r.entry == (0, 0, 0, 0)).map(|r| r.gap).collect();
        assert!(gaps[1] < gaps[0]);
        assert!(rep.rows.iter().all(|r| r.gap < 0.1));
    }

    #[test]
    fn harness_with_local_sequences() {
        let g = standard_globals();
        let local = RationalLocal {
            w: vec![q(13, 20), q(7, 10), q(2, 3)],
            theta: vec![q(4, 5), q(41, 50), q(4, 5)],
            y: vec![q(9, 10), q(23, 25), q(89, 100)],
            s: vec![q(1, 2), q(12, 25), q(1, 2)],
        };
        let p = scaled_process(&g, &local, &q(3, 2), &q(3, 2), 8, 2).unwrap();
        assert_eq!(p.w.values[11], q(7, 10));
        assert_eq!(p.w.values[10], q(13, 20));
        assert_eq!(p.col.y(12), q(23, 25));
        assert_eq!(p.col.y(20), q(9, 10));
        let rep = convergence_harness(&g, &local, &q(3, 2), &q(3, 2), &[(0, 1, 0, 0)], &[16, 32], DEFAULT_TOL).unwrap();
        assert!(rep.rows[1].gap < rep.rows[0].gap && rep.rows[1].gap < 1e-3, "{:?}", rep.rows);
    }
}
