//! Ascending FG processes and FG measures: weights, normalization, the Gram
//! matrix, three kernel routes, an enumeration oracle and an exact sampler.

use crate::linalg::{det, Matrix};
use crate::params::{is_compatible, to_f64, ColumnParams, RowParam, RowSpec, Signature, Q};
use crate::ratfun::{separable_double_integral, FactoredRational, Nesting, PoleSet};
use crate::symfun::{h_entry, phi, pi_factor, psi, z_closed};
use crate::{Error, Result};
use num::{One, Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap};

/// The data of an ascending FG process: N row variables x (with spins r),
/// T single-variable specializations (w_t, θ_t), and the column parameters.
#[derive(Clone, Debug)]
pub struct AscendingFG {
    pub x: RowSpec,
    pub w: RowSpec,
    pub col: ColumnParams,
}

impl AscendingFG {
    pub fn new(x: RowSpec, w: RowSpec, col: ColumnParams) -> Result<Self> {
        if !w.is_empty() {
            let c = is_compatible(&x, &w, &col)?;
            if !c.compatible {
                return Err(Error::Incompatible(crate::params::fmt_q(&c.ratio)));
            }
        }
        let p = AscendingFG { x, w, col };
        if p.z()?.is_zero() {
            return Err(Error::Degenerate("Z = 0".into()));
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn t(&self) -> usize {
        self.w.len()
    }

    /// The first t specializations (w_1..w_t).
    pub fn w_prefix(&self, t: usize) -> RowSpec {
        self.w.prefix(t)
    }

    /// Z(ρ) ∏_t Π(ρ; w_t).
    pub fn z(&self) -> Result<Q> {
        Ok(z_closed(&self.x, &self.col)? * pi_factor(&self.x, &self.w))
    }

    pub fn compat_ratio(&self) -> Result<Q> {
        Ok(is_compatible(&self.x, &self.w, &self.col)?.ratio)
    }

    /// G_{λ1}(w_1) G_{λ2/λ1}(w_2) … F_{λT}(x), unnormalized.
    pub fn raw_weight(&self, seq: &[Signature]) -> Result<Q> {
        let mut cache = WeightCache::new(self);
        cache.raw_weight(seq)
    }

    pub fn ascending_weight(&self, seq: &[Signature]) -> Result<Q> {
        Ok(self.raw_weight(seq)? / self.z()?)
    }

    /// The same process with the spins r replaced.
    pub fn with_spins(&self, spins: Vec<Q>) -> Result<Self> {
        Ok(AscendingFG { x: RowSpec::new(self.x.values.clone(), spins)?, w: self.w.clone(), col: self.col.clone() })
    }
}

/// Memoized single-variable entries used by the weight computations.
pub struct WeightCache<'a> {
    p: &'a AscendingFG,
    phix: HashMap<(i64, usize), Q>,
    gent: HashMap<(usize, i64, i64), Q>,
    hent: HashMap<(i64, i64), Q>,
}

impl<'a> WeightCache<'a> {
    pub fn new(p: &'a AscendingFG) -> Self {
        WeightCache { p, phix: HashMap::new(), gent: HashMap::new(), hent: HashMap::new() }
    }

    fn phi_x(&mut self, k: i64, i: usize) -> Result<Q> {
        if let Some(v) = self.phix.get(&(k, i)) {
            return Ok(v.clone());
        }
        let v = phi(k, &self.p.x.values[i], &self.p.col)?;
        self.phix.insert((k, i), v.clone());
        Ok(v)
    }

    /// 𝗀_{l/k}(w_t) from its closed single-variable form.
    pub fn g(&mut self, t: usize, l: i64, k: i64) -> Result<Q> {
        if l < k {
            return Ok(Q::zero());
        }
        if let Some(v) = self.gent.get(&(t, l, k)) {
            return Ok(v.clone());
        }
        let col = &self.p.col;
        let r = self.p.w.row(t);
        let v = if l == k {
            (r.rx() - col.ys(k + 1)) / (&r.x - col.ys(k + 1))
        } else {
            &r.x * (Q::one() - &r.rm2) * phi(k, &r.x, col)? * psi(l, &r.x, col)?
        };
        self.gent.insert((t, l, k), v.clone());
        Ok(v)
    }

    /// 𝗁_{k,p}(w_1).
    pub fn h(&mut self, k: i64, p: i64) -> Q {
        if let Some(v) = self.hent.get(&(k, p)) {
            return v.clone();
        }
        let v = h_entry(k, p, &self.p.w.prefix(1), &self.p.col);
        self.hent.insert((k, p), v.clone());
        v
    }

    /// ∏_{i<j}(s_i⁻²y_i − y_j)/(y_j − y_i) · det[𝗁_{λ_i+N−i, j}(w_1)].
    pub fn g_first(&mut self, lam: &Signature) -> Result<Q> {
        let n = lam.len();
        let pts = lam.points();
        let m: Matrix = (0..n).map(|i| (1..=n as i64).map(|j| self.h(pts[i] - 1, j)).collect()).collect();
        let col = &self.p.col;
        let mut pref = Q::one();
        for i in 1..=n as i64 {
            for j in i + 1..=n as i64 {
                pref *= (col.ys(i) - col.y(j)) / (col.y(j) - col.y(i));
            }
        }
        Ok(pref * det(&m))
    }

    pub fn g_skew(&mut self, t: usize, nu: &Signature, lam: &Signature) -> Result<Q> {
        let n = nu.len();
        let a = nu.points();
        let b = lam.points();
        let mut m: Matrix = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(self.g(t, a[i] - 1, b[j] - 1)?);
            }
            m.push(row);
        }
        Ok(det(&m))
    }

    pub fn f(&mut self, lam: &Signature) -> Result<Q> {
        let n = lam.len();
        let pts = lam.points();
        let mut m: Matrix = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for &k in &pts {
                row.push(self.phi_x(k - 1, i)?);
            }
            m.push(row);
        }
        let rp = self.p.x.rows();
        let mut pref = Q::one();
        for (i, a) in rp.iter().enumerate() {
            pref *= &a.x * (&a.rm2 - Q::one());
            for b in &rp[i + 1..] {
                pref *= (a.rx() - &b.x) / (&a.x - &b.x);
            }
        }
        Ok(pref * det(&m))
    }

    pub fn raw_weight(&mut self, seq: &[Signature]) -> Result<Q> {
        let t = self.p.t();
        if seq.len() != t || t == 0 {
            return Err(Error::Other(format!("expected {t} signatures")));
        }
        if seq.iter().any(|s| s.len() != self.p.n()) {
            return Err(Error::InvalidSignature("every signature needs N parts".into()));
        }
        let mut w = self.g_first(&seq[0])?;
        for k in 1..t {
            if w.is_zero() {
                return Ok(w);
            }
            w *= self.g_skew(k, &seq[k], &seq[k - 1])?;
        }
        Ok(w * self.f(&seq[t - 1])?)
    }
}

// ------------------------------------------------------------- Gram matrix

/// M_ij = 1/(y_i − x_j) ∏_t (x_j − θ_t⁻²w_t)/(x_j − w_t).
pub fn gram_matrix(x: &RowSpec, w: &RowSpec, col: &ColumnParams) -> Result<Matrix> {
    let n = x.len();
    let mut m = Vec::with_capacity(n);
    for i in 1..=n as i64 {
        let mut row = Vec::with_capacity(n);
        for xj in &x.values {
            let d = col.y(i) - xj;
            if d.is_zero() {
                return Err(Error::Genericity(format!("y_{i} = x")));
            }
            let mut v = d.recip();
            for r in w.rows() {
                v *= (xj - r.rx()) / (xj - &r.x);
            }
            row.push(v);
        }
        m.push(row);
    }
    Ok(m)
}

/// Closed-form inverse of the Gram matrix.
pub fn gram_inverse(x: &RowSpec, w: &RowSpec, col: &ColumnParams) -> Result<Matrix> {
    let n = x.len();
    let xs = &x.values;
    let ys: Vec<Q> = (1..=n as i64).map(|k| col.y(k)).collect();
    let mut out = vec![vec![Q::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut v = (&xs[i] - &ys[j]).recip();
            for k in 0..n {
                v *= (&xs[i] - &ys[k]) * (&ys[j] - &xs[k]);
                if k != i {
                    let d = &xs[i] - &xs[k];
                    if d.is_zero() {
                        return Err(Error::Genericity("repeated x".into()));
                    }
                    v /= d;
                }
                if k != j {
                    let d = &ys[j] - &ys[k];
                    if d.is_zero() {
                        return Err(Error::Genericity("repeated y".into()));
                    }
                    v /= d;
                }
            }
            for r in w.rows() {
                v *= (&xs[i] - &r.x) / (&xs[i] - r.rx());
            }
            out[i][j] = v;
        }
    }
    Ok(out)
}

/// M_ij from the defining series with all indices ≤ cutoff.
pub fn gram_series(p: &AscendingFG, cutoff: i64) -> Result<Matrix> {
    let n = p.n();
    let mut c = WeightCache::new(p);
    let mut out = vec![vec![Q::zero(); n]; n];
    for i in 0..n {
        let mut v: Vec<Q> = (0..=cutoff).map(|a| c.h(a, i as i64 + 1)).collect();
        for t in 1..p.t() {
            let mut nv = vec![Q::zero(); v.len()];
            for b in 0..=cutoff {
                for a in 0..=b {
                    if !v[a as usize].is_zero() {
                        nv[b as usize] += &v[a as usize] * c.g(t, b, a)?;
                    }
                }
            }
            v = nv;
        }
        for j in 0..n {
            let mut s = Q::zero();
            for a in 0..=cutoff {
                s += &v[a as usize] * c.phi_x(a, j)?;
            }
            out[i][j] = s;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- kernels

/// The u- and v-integrands of the double contour kernel with the v-side
/// w-product over `wv` and the u-side over `wu`.
pub fn kernel_integrand(
    a: i64,
    a2: i64,
    x: &RowSpec,
    wv: &RowSpec,
    wu: &RowSpec,
    col: &ColumnParams,
) -> (FactoredRational, FactoredRational, PoleSet, PoleSet) {
    let n = x.len() as i64;
    let mut f = FactoredRational::one();
    f.mul_linear(col.y(a2), -1);
    for j in 1..a2 {
        f.mul_linear(col.ys(j), 1);
        f.mul_linear(col.y(j), -1);
    }
    let mut g = FactoredRational::constant(col.y(a) * (Q::one() - col.sm2(a)));
    g.mul_linear(col.ys(a), -1);
    for j in 1..a {
        g.mul_linear(col.y(j), 1);
        g.mul_linear(col.ys(j), -1);
    }
    for k in 1..=n {
        let xk = x.values[(k - 1) as usize].clone();
        f.mul_linear(col.y(k), 1);
        f.mul_linear(xk.clone(), -1);
        g.mul_linear(xk, 1);
        g.mul_linear(col.y(k), -1);
    }
    for r in wv.rows() {
        g.mul_linear(r.rx(), 1);
        g.mul_linear(r.x.clone(), -1);
    }
    for r in wu.rows() {
        f.mul_linear(r.x.clone(), 1);
        f.mul_linear(r.rx(), -1);
    }
    let top = a.max(a2).max(n);
    let ys: Vec<Q> = (1..=top.max(col.tail_start())).map(|j| col.y(j)).collect();
    let fp = PoleSet::new(ys.iter().cloned().chain(wu.rows().iter().map(|r| r.rx())));
    let gp = PoleSet::new(ys.iter().cloned().chain(wv.values.iter().cloned()));
    (f, g, fp, gp)
}

/// K_AP(t, a; t′, a′) by iterated residues; u outside for t ≤ t′.
pub fn kernel_kap(p: &AscendingFG, t: usize, a: i64, t2: usize, a2: i64) -> Result<Q> {
    if t == 0 || t2 == 0 || t > p.t() || t2 > p.t() || a < 1 || a2 < 1 {
        return Err(Error::Other("kernel index out of range".into()));
    }
    let (f, g, fp, gp) = kernel_integrand(a, a2, &p.x, &p.w.prefix(t), &p.w.prefix(t2), &p.col);
    let nest = if t <= t2 { Nesting::FOutside } else { Nesting::GOutside };
    Ok(separable_double_integral(&f, &g, &fp, &gp, nest))
}

/// Kernel of the FG measure with specializations x and w (M variables).
pub fn kernel_km(a: i64, a2: i64, x: &RowSpec, w: &RowSpec, col: &ColumnParams) -> Q {
    let (f, g, fp, gp) = kernel_integrand(a, a2, x, w, w, col);
    separable_double_integral(&f, &g, &fp, &gp, Nesting::FOutside)
}

/// K_AP through the Gram-matrix inverse: finite chains of 𝗁 and 𝗀 entries
/// on one side and φ_{a′−1}(x_j)∏_{τ>t′}(x_j − θ_τ⁻²w_τ)/(x_j − w_τ) on the other.
pub fn kernel_eynard_mehta(p: &AscendingFG, t: usize, a: i64, t2: usize, a2: i64) -> Result<Q> {
    let n = p.n();
    let (k, k2) = (a - 1, a2 - 1);
    let mut c = WeightCache::new(p);
    let minv = gram_inverse(&p.x, &p.w, &p.col)?;
    let mut total = Q::zero();
    if t > t2 {
        let mut u = vec![Q::zero(); (k.max(k2) + 1) as usize];
        u[k2 as usize] = Q::one();
        for tau in t2..t {
            let mut nu = vec![Q::zero(); u.len()];
            for b in 0..u.len() {
                for al in 0..=b {
                    if !u[al].is_zero() {
                        nu[b] += &u[al] * c.g(tau, b as i64, al as i64)?;
                    }
                }
            }
            u = nu;
        }
        total -= &u[k as usize];
    }
    let lefts: Vec<Q> = (0..n)
        .map(|i| {
            let mut v: Vec<Q> = (0..=k).map(|al| c.h(al, i as i64 + 1)).collect();
            for tau in 1..t {
                let mut nv = vec![Q::zero(); v.len()];
                for b in 0..v.len() {
                    for al in 0..=b {
                        if !v[al].is_zero() {
                            nv[b] += &v[al] * c.g(tau, b as i64, al as i64)?;
                        }
                    }
                }
                v = nv;
            }
            Ok(v[k as usize].clone())
        })
        .collect::<Result<_>>()?;
    let tail = p.w.rows()[t2..].to_vec();
    for j in 0..n {
        let xj = &p.x.values[j];
        let mut rj = c.phi_x(k2, j)?;
        for r in &tail {
            rj *= (xj - r.rx()) / (xj - &r.x);
        }
        for (i, li) in lefts.iter().enumerate() {
            total += &minv[j][i] * li * &rj;
        }
    }
    Ok(total)
}

/// Σ_{β ≥ k} 𝗀_{β/k}(w) φ_β(x) truncated at `cutoff`.
pub fn g_phi_series(k: i64, x: &Q, w: &RowParam, col: &ColumnParams, cutoff: i64) -> Result<Q> {
    let mut s = Q::zero();
    for l in k..=cutoff {
        let g = if l == k {
            (w.rx() - col.ys(k + 1)) / (&w.x - col.ys(k + 1))
        } else {
            &w.x * (Q::one() - &w.rm2) * phi(k, &w.x, col)? * psi(l, &w.x, col)?
        };
        s += g * phi(l, x, col)?;
    }
    Ok(s)
}

/// The Schur-measure kernel in the (U, V) variables, with
/// |V| < |U| and the Taylor expansions of the two generating functions.
pub fn schur_measure_kernel(a: i64, a2: i64, x: &[Q], w: &RowSpec, s: &Q) -> Q {
    let n = x.len() as i64;
    let s2 = s * s;
    let one = Q::one();
    let xs: Vec<Q> = x.iter().map(|xi| (&one - &s2 * xi) / (&s2 * (&one - xi))).collect();
    let (wa, wb) = crate::symfun::homogeneous_g_vars(w, s);
    // Φ(U) = ∏ 1/(1 − X_i U) · ∏ (U − 𝗑_j)/(U + 𝗒_j)
    let mut phi_u = FactoredRational::one();
    for xi in &xs {
        phi_u.scale(&(-xi.recip()));
        phi_u.mul_linear(xi.recip(), -1);
    }
    for (aj, bj) in wa.iter().zip(&wb) {
        phi_u.mul_linear(aj.clone(), 1);
        phi_u.mul_linear(-bj.clone(), -1);
    }
    let mut f = phi_u.clone();
    f.mul_linear(Q::zero(), n - a);
    let mut g = phi_u.recip().expect("nonzero");
    g.mul_linear(Q::zero(), a2 - n - 1);
    let fp = PoleSet::new(std::iter::once(Q::zero()).chain(wb.iter().map(|b| -b.clone())));
    let gp = PoleSet::new(std::iter::once(Q::zero()).chain(wa.iter().cloned()));
    separable_double_integral(&f, &g, &fp, &gp, Nesting::FOutside)
}

pub fn det_kernel(points: &[(usize, i64)], kern: &dyn Fn(usize, i64, usize, i64) -> Result<Q>) -> Result<Q> {
    let m: Matrix = points
        .iter()
        .map(|&(t, a)| points.iter().map(|&(t2, a2)| kern(t, a, t2, a2)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(det(&m))
}

// ----------------------------------------------------------- enumeration

/// All signatures ν reachable from λ through one row of the lattice:
/// λ_i ≤ ν_i ≤ λ_{i−1} + 1 (the +1 from the (1,1;1,1) vertex), ν_1 ≤ cutoff.
pub fn interlacing_above(lam: &Signature, cutoff: i64) -> Vec<Signature> {
    let n = lam.len();
    let mut out = Vec::new();
    let mut cur = vec![0i64; n];
    fn rec(i: usize, lam: &[i64], cutoff: i64, cur: &mut Vec<i64>, out: &mut Vec<Signature>) {
        if i == lam.len() {
            out.push(Signature::new(cur.clone()).expect("nonincreasing"));
            return;
        }
        let hi = if i == 0 { cutoff } else { (lam[i - 1] + 1).min(cur[i - 1]) };
        for v in lam[i]..=hi {
            cur[i] = v;
            rec(i + 1, lam, cutoff, cur, out);
        }
    }
    if lam.first() <= cutoff {
        rec(0, lam.parts(), cutoff, &mut cur, &mut out);
    }
    out
}

/// Every admissible trajectory with λ^(T)_1 ≤ cutoff, with its probability.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub cutoff: i64,
    pub trajectories: Vec<(Vec<Signature>, Q)>,
    /// 1 − Σ probabilities: the exact mass outside the cutoff.
    pub missing_mass: Q,
}

pub fn enumerate(p: &AscendingFG, cutoff: i64) -> Result<Enumeration> {
    let z = p.z()?;
    let mut cache = WeightCache::new(p);
    let mut trajectories = Vec::new();
    let mut stack: Vec<(Vec<Signature>, Q)> = Vec::new();
    for l1 in interlacing_above(&Signature::zero(p.n()), cutoff) {
        let w = cache.g_first(&l1)?;
        stack.push((vec![l1], w));
    }
    while let Some((seq, w)) = stack.pop() {
        if w.is_zero() {
            continue;
        }
        let t = seq.len();
        if t == p.t() {
            let full = &w * cache.f(&seq[t - 1])? / &z;
            trajectories.push((seq, full));
            continue;
        }
        for nu in interlacing_above(&seq[t - 1], cutoff) {
            let g = cache.g_skew(t, &nu, &seq[t - 1])?;
            let mut s2 = seq.clone();
            s2.push(nu);
            stack.push((s2, &w * g));
        }
    }
    let total: Q = trajectories.iter().fold(Q::zero(), |s, (_, w)| s + w);
    Ok(Enumeration { cutoff, trajectories, missing_mass: Q::one() - total })
}

/// The point configuration {(t, a)} of a trajectory.
pub fn trajectory_points(seq: &[Signature]) -> BTreeSet<(usize, i64)> {
    seq.iter().enumerate().flat_map(|(t, l)| l.points().into_iter().map(move |a| (t + 1, a))).collect()
}

/// P[A ⊂ 𝒮] restricted to the enumerated trajectories; the true value lies
/// in [value, value + missing_mass] when all weights are nonnegative.
pub fn brute_force_correlation(a: &[(usize, i64)], e: &Enumeration) -> (Q, Q) {
    let mut v = Q::zero();
    for (seq, w) in &e.trajectories {
        let pts = trajectory_points(seq);
        if a.iter().all(|p| pts.contains(p)) {
            v += w;
        }
    }
    (v, e.missing_mass.clone())
}

/// Geometric bound on the mass outside ν_1 ≤ cutoff from the compatibility
/// ratio (heuristic constant one).
pub fn geometric_tail(p: &AscendingFG, cutoff: i64) -> Result<f64> {
    let r = to_f64(&p.compat_ratio()?);
    Ok(r.powi(cutoff as i32 + 1) / (1.0 - r))
}

// ----------------------------------------------------------------- sampling

const DENOM_BITS: u32 = 64;

fn uniform_rational(rng: &mut ChaCha8Rng) -> Q {
    let n = num::BigInt::from(rng.next_u64());
    Q::new(n, num::BigInt::one() << DENOM_BITS)
}

fn pick<T: Clone>(items: &[(T, Q)], u: &Q, total: &Q) -> T {
    let target = u * total;
    let mut acc = Q::zero();
    for (it, w) in items {
        acc += w;
        if acc > target {
            return it.clone();
        }
    }
    items.last().expect("nonempty").0.clone()
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub seed: u64,
    pub signatures: Vec<Signature>,
    pub weight: Q,
}

/// Exact sampler for the ascending process: Markov steps
/// P(ν | λ) = G_{ν/λ}(w_t) F_ν(x) / (F_λ(x) Π(x; w_t)) by inverse CDF over
/// ν_1 ≤ cutoff. Transition tables are cached across draws.
pub struct AscendingSampler<'a> {
    p: &'a AscendingFG,
    cutoff: i64,
    eps: Q,
    cache: WeightCache<'a>,
    tables: HashMap<(usize, Signature), (Vec<(Signature, Q)>, Q)>,
}

impl<'a> AscendingSampler<'a> {
    pub fn new(p: &'a AscendingFG, cutoff: i64, eps: Q) -> Self {
        AscendingSampler { p, cutoff, eps, cache: WeightCache::new(p), tables: HashMap::new() }
    }

    /// Transition law out of λ at step t (0-based) and its missing mass.
    pub fn transitions(&mut self, t: usize, lam: &Signature) -> Result<(Vec<(Signature, Q)>, Q)> {
        if let Some(v) = self.tables.get(&(t, lam.clone())) {
            return Ok(v.clone());
        }
        let wt = self.p.w.prefix(t + 1).rows()[t].clone();
        let mut piv = Q::one();
        for xi in &self.p.x.values {
            piv *= (xi - wt.rx()) / (xi - &wt.x);
        }
        let f_lam = self.cache.f(lam)?;
        let mut items = Vec::new();
        let mut total = Q::zero();
        for nu in interlacing_above(lam, self.cutoff) {
            let g = if t == 0 { self.cache.g_first(&nu)? } else { self.cache.g_skew(t, &nu, lam)? };
            if g.is_zero() {
                continue;
            }
            let pr = g * self.cache.f(&nu)? / (&f_lam * &piv);
            total += &pr;
            items.push((nu, pr));
        }
        let missing = Q::one() - &total;
        if missing > self.eps {
            return Err(Error::Window(format!(
                "transition mass outside cutoff {} is {:.3e}; increase the cutoff",
                self.cutoff,
                to_f64(&missing)
            )));
        }
        self.tables.insert((t, lam.clone()), (items.clone(), total.clone()));
        Ok((items, total))
    }

    pub fn sample(&mut self, seed: u64) -> Result<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lam = Signature::zero(self.p.n());
        let mut out = Vec::new();
        for t in 0..self.p.t() {
            let (items, total) = self.transitions(t, &lam)?;
            let u = uniform_rational(&mut rng);
            lam = pick(&items, &u, &total);
            out.push(lam.clone());
        }
        let weight = self.cache.raw_weight(&out)? / self.p.z()?;
        Ok(Sample { seed, signatures: out, weight })
    }
}

/// All μ with k − 1 parts and λ_{i+1} ≤ μ_i ≤ λ_i + 1, the possible
/// one-row predecessors of λ (k parts) under F.
pub fn interlacing_below(lam: &Signature) -> Vec<Signature> {
    let k = lam.len();
    if k == 0 {
        return vec![];
    }
    let mut out = Vec::new();
    let mut cur = vec![0i64; k - 1];
    fn rec(i: usize, lam: &[i64], cur: &mut Vec<i64>, out: &mut Vec<Signature>) {
        if i == cur.len() {
            out.push(Signature::new(cur.clone()).expect("nonincreasing"));
            return;
        }
        let hi = if i == 0 { lam[0] + 1 } else { (lam[i] + 1).min(cur[i - 1]) };
        for v in lam[i + 1]..=hi {
            cur[i] = v;
            rec(i + 1, lam, cur, out);
        }
    }
    rec(0, lam.parts(), &mut cur, &mut out);
    out
}

/// Samples μ^(N−1), …, μ^(1) below λ = μ^(N) with
/// P(μ^(k−1) | μ^(k)) ∝ F_{μ^(k)/μ^(k−1)}(x_k) F_{μ^(k−1)}(x_1..x_{k−1}).
/// Returns μ^(1), …, μ^(N).
pub fn sample_f_branch(lam: &Signature, x: &RowSpec, col: &ColumnParams, seed: u64) -> Result<Vec<Signature>> {
    let n = lam.len();
    if x.len() != n {
        return Err(Error::Other("need one x per part".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = lam.clone();
    let mut out = vec![cur.clone()];
    for k in (2..=n).rev() {
        let xk = RowSpec::new(vec![x.values[k - 1].clone()], vec![x.spins[k - 1].clone()])?;
        let mut items = Vec::new();
        let mut total = Q::zero();
        for mu in interlacing_below(&cur) {
            let w = crate::symfun::f_skew_partition(&cur, &mu, &xk, col)? * crate::symfun::f_determinant(&mu, &x.prefix(k - 1), col)?;
            if w.is_zero() {
                continue;
            }
            total += &w;
            items.push((mu, w));
        }
        if items.is_empty() {
            return Err(Error::Degenerate("empty branching support".into()));
        }
        let u = uniform_rational(&mut rng);
        cur = pick(&items, &u, &total);
        out.push(cur.clone());
    }
    out.reverse();
    Ok(out)
}

/// Pointwise maximum of |K| over a table, for reporting.
pub fn max_abs(vals: &[Q]) -> Q {
    vals.iter().fold(Q::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::{identity, inverse, matmul};
    use crate::params::{q, qi};

    pub fn test_columns() -> ColumnParams {
        ColumnParams::new(vec![qi(1), q(9, 10), q(11, 10)], vec![q(1, 2), q(3, 5), q(1, 2)], qi(1), q(1, 2))
    }

    pub fn test_process() -> AscendingFG {
        let x = RowSpec::new(vec![q(1, 20), q(1, 10)], vec![q(1, 6), q(1, 4)]).unwrap();
        let w = RowSpec::new(vec![q(17, 20), q(43, 50)], vec![q(7, 10), q(3, 4)]).unwrap();
        AscendingFG::new(x, w, test_columns()).unwrap()
    }

    #[test]
    fn gram_closed_forms() {
        let p = test_process();
        let m = gram_matrix(&p.x, &p.w, &p.col).unwrap();
        let mi = gram_inverse(&p.x, &p.w, &p.col).unwrap();
        assert_eq!(matmul(&m, &mi), identity(2));
        assert_eq!(inverse(&m).unwrap(), mi);
        let bare = gram_matrix(&p.x, &RowSpec::empty(), &p.col).unwrap();
        assert_eq!(bare[0][1], (qi(1) - q(1, 10)).recip());
    }

    #[test]
    fn gram_series_converges() {
        let p = test_process();
        let m = gram_matrix(&p.x, &p.w, &p.col).unwrap();
        let s10 = gram_series(&p, 10).unwrap();
        let s20 = gram_series(&p, 20).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e10 = (&m[i][j] - &s10[i][j]).abs();
                let e20 = (&m[i][j] - &s20[i][j]).abs();
                assert!(e20 < e10);
                assert!(to_f64(&e20) < 1e-8, "{}", to_f64(&e20));
            }
        }
    }

    #[test]
    fn g_phi_series_telescopes() {
        let c = test_columns();
        let w = RowParam::new(q(4, 5), &q(7, 10));
        let x = q(1, 10);
        for k in 0..3 {
            let s = g_phi_series(k, &x, &w, &c, 40).unwrap();
            let exact = phi(k, &x, &c).unwrap() * (&x - w.rx()) / (&x - &w.x);
            assert!(to_f64(&(s - exact).abs()) < 1e-12);
        }
    }

    #[test]
    fn kernel_routes_agree() {
        let p = test_process();
        for t in 1..=2 {
            for t2 in 1..=2 {
                for a in 1..=4 {
                    for a2 in 1..=4 {
                        let k1 = kernel_kap(&p, t, a, t2, a2).unwrap();
                        let k2 = kernel_eynard_mehta(&p, t, a, t2, a2).unwrap();
                        assert_eq!(k1, k2, "({t},{a};{t2},{a2})");
                    }
                }
            }
        }
    }

    #[test]
    fn one_point_matches_enumeration() {
        let p = test_process();
        let e = enumerate(&p, 8).unwrap();
        assert!(e.missing_mass >= Q::zero());
        assert!(to_f64(&e.missing_mass) < 1e-3);
        for t in 1..=2 {
            for a in 1..=6 {
                let k = kernel_kap(&p, t, a, t, a).unwrap();
                let (v, tail) = brute_force_correlation(&[(t, a)], &e);
                assert!(v <= k && k <= &v + &tail, "({t},{a})");
            }
        }
        let pts = [(1usize, 2i64), (2, 3)];
        let d = det_kernel(&pts, &|t, a, t2, a2| kernel_kap(&p, t, a, t2, a2)).unwrap();
        let (v, tail) = brute_force_correlation(&pts, &e);
        assert!(v <= d && d <= v + tail);
    }

    #[test]
    fn particle_count() {
        let p = test_process();
        let s: Q = (1..=30).map(|a| kernel_kap(&p, 2, a, 2, a).unwrap()).fold(Q::zero(), |s, v| s + v);
        assert!((to_f64(&s) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn r_independence() {
        let p = test_process();
        let p2 = p.with_spins(vec![q(1, 5), q(1, 3)]).unwrap();
        let seq = vec![Signature::new(vec![2, 0]).unwrap(), Signature::new(vec![3, 1]).unwrap()];
        assert_eq!(p.ascending_weight(&seq).unwrap(), p2.ascending_weight(&seq).unwrap());
        assert_eq!(kernel_kap(&p, 1, 2, 2, 3).unwrap(), kernel_kap(&p2, 1, 2, 2, 3).unwrap());
        let bad = vec![Signature::new(vec![2, 1]).unwrap(), Signature::new(vec![3, 0]).unwrap()];
        assert_eq!(p.ascending_weight(&bad).unwrap(), qi(0));
    }

    #[test]
    fn measure_kernel_is_process_kernel() {
        let p = test_process();
        for a in 1..=3 {
            for a2 in 1..=3 {
                assert_eq!(kernel_km(a, a2, &p.x, &p.w, &p.col), kernel_kap(&p, 2, a, 2, a2).unwrap());
                assert_eq!(kernel_km(a, a2, &p.x, &p.w.prefix(1), &p.col), kernel_kap(&p, 1, a, 1, a2).unwrap());
            }
        }
    }

    #[test]
    fn schur_measure_reduction() {
        let s = q(1, 2);
        let col = ColumnParams::homogeneous(qi(1), s.clone());
        let x = RowSpec::new(vec![q(1, 10), q(1, 5)], vec![q(1, 4), q(1, 5)]).unwrap();
        let w = RowSpec::new(vec![q(4, 5), q(7, 10)], vec![q(3, 4), q(7, 10)]).unwrap();
        for a in 1..=3 {
            for a2 in 1..=3 {
                let km = kernel_km(a, a2, &x, &w, &col);
                let ks = schur_measure_kernel(a2, a, &x.values, &w, &s);
                assert_eq!(km, ks, "({a},{a2})");
            }
        }
    }

    #[test]
    fn sampler_basics() {
        let p = test_process();
        let mut smp = AscendingSampler::new(&p, 12, q(1, 1000));
        let a = smp.sample(7).unwrap();
        let b = smp.sample(7).unwrap();
        assert_eq!(a.signatures, b.signatures);
        let (items, total) = smp.transitions(1, &Signature::new(vec![1, 0]).unwrap()).unwrap();
        assert!(!items.is_empty());
        assert!(to_f64(&(qi(1) - total)) < 1e-3);
        // w_t = 0 freezes the step
        let x = p.x.clone();
        let w = RowSpec::new(vec![q(4, 5), qi(0)], vec![q(7, 10), q(1, 2)]).unwrap();
        let p0 = AscendingFG { x, w, col: p.col.clone() };
        let mut s0 = AscendingSampler::new(&p0, 12, q(1, 1000));
        let lam = Signature::new(vec![2, 0]).unwrap();
        let (it, _) = s0.transitions(1, &lam).unwrap();
        assert_eq!(it.len(), 1);
        assert_eq!(it[0].0, lam);
        let br = sample_f_branch(&Signature::new(vec![3, 1]).unwrap(), &p.x, &p.col, 3).unwrap();
        assert_eq!(br.len(), 2);
        assert!(br[1].interlaces_over(&Signature::new(vec![br[0].part(1), 0]).unwrap()) || br[0].part(1) <= 3);
    }

    #[test]
    fn sampler_frequencies() {
        let p = test_process();
        let mut smp = AscendingSampler::new(&p, 20, q(1, 1000));
        let n = 3000;
        let mut hits = 0usize;
        for seed in 0..n {
            let s = smp.sample(seed).unwrap();
            if trajectory_points(&s.signatures).contains(&(2, 2)) {
                hits += 1;
            }
        }
        let k = to_f64(&kernel_kap(&p, 2, 2, 2, 2).unwrap());
        let f = hits as f64 / n as f64;
        let se = (k * (1.0 - k) / n as f64).sqrt();
        assert!((f - k).abs() < 4.0 * se, "{f} vs {k}");
    }
}
