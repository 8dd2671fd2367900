//! Fermionic operators on truncated windows [M, N] with M ≤ 0 < N.
//!
//! A window basis vector e_𝒯 stands for the semi-infinite set
//! 𝒯 ∪ {…, M − 2, M − 1}, so the vacuum e_{ℤ≤0} is the window subset [M, 0].
//! Infinite-volume statements are checked as window computations plus
//! explicit geometric tail bounds read off the constant column tails.

use crate::linalg::{det, permutations, Matrix};
use crate::params::{fmt_q, ColumnParams, RowParam, RowSpec, Q};
use crate::process::AscendingFG;
use crate::ratfun::{residue_against_principal_parts, FactoredRational};
use crate::symfun::{pi_factor, z_closed};
use crate::vertex::{apply_normalized, Op, WindowOperator, WindowVector};
use crate::{Error, Result};
use num::{One, Signed, Zero};
use rayon::prelude::*;
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq)]
pub struct FockWindowVector(pub WindowVector);

impl FockWindowVector {
    pub fn new(v: WindowVector) -> Result<Self> {
        if v.lo > 0 || v.hi < 1 {
            return Err(Error::Window(format!("window [{}, {}] must satisfy M <= 0 < N", v.lo, v.hi)));
        }
        Ok(FockWindowVector(v))
    }

    pub fn zero(m: i64, n: i64) -> Result<Self> {
        Self::new(WindowVector::zero(m, n))
    }

    pub fn basis(m: i64, n: i64, sites: &[i64]) -> Result<Self> {
        Self::new(WindowVector::basis(m, n, sites)?)
    }

    pub fn vacuum(m: i64, n: i64) -> Result<Self> {
        Self::basis(m, n, &(m..=0).collect::<Vec<_>>())
    }

    /// e_{ℤ≤k} restricted to the window.
    pub fn filled_to(m: i64, n: i64, k: i64) -> Result<Self> {
        Self::basis(m, n, &(m..=k).collect::<Vec<_>>())
    }

    pub fn window(&self) -> (i64, i64) {
        (self.0.lo, self.0.hi)
    }

    fn occupied(&self, mask: u128, j: i64) -> bool {
        mask >> (j - self.0.lo) & 1 == 1
    }

    /// c(𝒯) = #(𝒯 ∩ ℤ>0) − #(ℤ≤0 ∖ 𝒯).
    pub fn charge_of(&self, mask: u128) -> i64 {
        (self.0.lo..=self.0.hi)
            .map(|s| match (s > 0, self.occupied(mask, s)) {
                (true, true) => 1,
                (false, false) => -1,
                _ => 0,
            })
            .sum()
    }

    /// h_j(𝒯) = #{t ∈ 𝒯 : t > j}.
    pub fn height_of(&self, mask: u128, j: i64) -> i64 {
        (j + 1..=self.0.hi).filter(|&s| self.occupied(mask, s)).count() as i64
    }

    fn check_site(&self, j: i64) -> Result<()> {
        if j < self.0.lo || j > self.0.hi {
            return Err(Error::Window(format!("site {j} outside [{}, {}]", self.0.lo, self.0.hi)));
        }
        Ok(())
    }

    fn flip(&self, j: i64, create: bool) -> Result<Self> {
        self.check_site(j)?;
        let mut out = WindowVector::zero(self.0.lo, self.0.hi);
        let bit = 1u128 << (j - self.0.lo);
        for (m, a) in &self.0.amps {
            if self.occupied(*m, j) == create {
                continue;
            }
            let sign = if self.height_of(*m, j) % 2 == 0 { a.clone() } else { -a };
            out.add_amp(m ^ bit, sign);
        }
        Ok(FockWindowVector(out))
    }

    /// ψ_j: insert j with sign (−1)^{h_j}.
    pub fn psi(&self, j: i64) -> Result<Self> {
        self.flip(j, true)
    }

    /// ψ*_j: remove j with sign (−1)^{h_j}.
    pub fn psi_star(&self, j: i64) -> Result<Self> {
        self.flip(j, false)
    }

    /// (−1)^𝔠.
    pub fn charge_sign(&self) -> Self {
        let mut out = WindowVector::zero(self.0.lo, self.0.hi);
        for (m, a) in &self.0.amps {
            out.add_amp(*m, if self.charge_of(*m) % 2 == 0 { a.clone() } else { -a });
        }
        FockWindowVector(out)
    }

    pub fn amplitude(&self, sites: &[i64]) -> Q {
        self.0.get(sites)
    }

    pub fn axpy(&mut self, a: &Q, other: &Self) {
        self.0.axpy(a, &other.0);
    }

    pub fn dot(&self, other: &Self) -> Q {
        self.0.dot(&other.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

fn quot(num: Q, den: Q, what: &str) -> Result<Q> {
    if den.is_zero() {
        return Err(Error::Pole { root: fmt_q(&num), what: what.into() });
    }
    Ok(num / den)
}

/// Φ_j(x, ·); the second argument of Φ_j never enters.
pub fn phi_j(j: i64, x: &Q, col: &ColumnParams) -> Result<Q> {
    let mut v = quot(col.y(j) * (Q::one() - col.sm2(j)), x - col.ys(j), "Phi_j")?;
    if j >= 1 {
        for k in 1..j {
            v *= quot(x - col.y(k), x - col.ys(k), "Phi_j")?;
        }
    } else {
        for k in j..=0 {
            v *= quot(x - col.ys(k), x - col.y(k), "Phi_j")?;
        }
    }
    Ok(v)
}

/// Φ*_j(x, z).
pub fn phi_star_j(j: i64, x: &Q, z: &Q, col: &ColumnParams) -> Result<Q> {
    let mut v = quot(z - x, z - col.y(j), "Phi*_j")?;
    if j >= 1 {
        for k in 1..j {
            v *= quot(z - col.ys(k), z - col.y(k), "Phi*_j")?;
        }
    } else {
        for k in j..=0 {
            v *= quot(z - col.y(k), z - col.ys(k), "Phi*_j")?;
        }
    }
    Ok(v)
}

fn nonzero(v: &Q, what: &str) -> Result<()> {
    if v.is_zero() {
        return Err(Error::Degenerate(format!("{what} must be nonzero")));
    }
    Ok(())
}

/// The window products behind Ψ(u, ξ) and Ψ*(κ, z), built once per window.
pub struct PsiWindowOps {
    c: WindowOperator,
    dc: WindowOperator,
    b: WindowOperator,
    db: WindowOperator,
}

impl PsiWindowOps {
    pub fn new(m: i64, n: i64, u: &Q, xi: &Q, kappa: &Q, z: &Q, col: &ColumnParams) -> Result<Self> {
        for (v, name) in [(u, "u"), (xi, "xi"), (kappa, "kappa"), (z, "z")] {
            nonzero(v, name)?;
        }
        Ok(PsiWindowOps {
            c: WindowOperator::normalized(Op::C, &RowParam::from_rm2(xi.clone(), u / xi), col, m, n)?,
            dc: WindowOperator::normalized(Op::D, &RowParam::from_rm2(u.clone(), xi / u), col, m, n)?,
            b: WindowOperator::normalized(Op::B, &RowParam::from_rm2(z.clone(), kappa / z), col, m, n)?,
            db: WindowOperator::normalized(Op::D, &RowParam::from_rm2(kappa.clone(), z / kappa), col, m, n)?,
        })
    }

    /// D·C without the charge sign.
    pub fn dc(&self, v: &FockWindowVector) -> Result<FockWindowVector> {
        Ok(FockWindowVector(self.dc.apply(&self.c.apply(&v.0)?)?))
    }

    pub fn psi(&self, v: &FockWindowVector) -> Result<FockWindowVector> {
        self.dc(&v.charge_sign())
    }

    pub fn psi_star(&self, v: &FockWindowVector) -> Result<FockWindowVector> {
        Ok(FockWindowVector(self.db.apply(&self.b.apply(&v.0)?)?))
    }
}

/// D^{[M,N]}(x, √(x/z)) C^{[M,N]}(z, √(z/x)) without the charge sign.
pub fn dc_window(x: &Q, z: &Q, col: &ColumnParams, v: &FockWindowVector) -> Result<FockWindowVector> {
    let (m, n) = v.window();
    PsiWindowOps::new(m, n, x, z, x, z, col)?.dc(v)
}

/// D^{[M,N]}(x, √(x/z)) B^{[M,N]}(z, √(z/x)).
pub fn db_window(x: &Q, z: &Q, col: &ColumnParams, v: &FockWindowVector) -> Result<FockWindowVector> {
    let (m, n) = v.window();
    PsiWindowOps::new(m, n, x, z, x, z, col)?.psi_star(v)
}

/// Ψ(u, ξ) as the window product D·C·(−1)^𝔠.
pub fn psi_window(u: &Q, xi: &Q, col: &ColumnParams, v: &FockWindowVector) -> Result<FockWindowVector> {
    dc_window(u, xi, col, &v.charge_sign())
}

/// Ψ*(κ, v) as the window product D·B.
pub fn psi_star_window(kappa: &Q, z: &Q, col: &ColumnParams, v: &FockWindowVector) -> Result<FockWindowVector> {
    db_window(kappa, z, col, v)
}

/// Σ_j c_j ψ_j (or ψ*_j) over the window, with c indexed from M.
pub fn apply_modes(coefs: &[Q], create: bool, v: &FockWindowVector) -> Result<FockWindowVector> {
    let (m, n) = v.window();
    let mut out = FockWindowVector::zero(m, n)?;
    for (j, c) in (m..=n).zip(coefs) {
        if !c.is_zero() {
            out.axpy(c, &v.flip(j, create)?);
        }
    }
    Ok(out)
}

pub fn phi_coefficients(m: i64, n: i64, u: &Q, col: &ColumnParams) -> Result<Vec<Q>> {
    (m..=n).map(|j| phi_j(j, u, col)).collect()
}

pub fn phi_star_coefficients(m: i64, n: i64, kappa: &Q, z: &Q, col: &ColumnParams) -> Result<Vec<Q>> {
    (m..=n).map(|j| phi_star_j(j, kappa, z, col)).collect()
}

fn expand(
    v: &FockWindowVector,
    coef: &dyn Fn(i64) -> Result<Q>,
    op: &dyn Fn(&FockWindowVector, i64) -> Result<FockWindowVector>,
) -> Result<FockWindowVector> {
    let (m, n) = v.window();
    let mut out = FockWindowVector::zero(m, n)?;
    for j in m..=n {
        let c = coef(j)?;
        if !c.is_zero() {
            out.axpy(&c, &op(v, j)?);
        }
    }
    Ok(out)
}

/// Σ_{j ∈ window} Φ_j(u) ψ_j.
pub fn psi_expansion(u: &Q, col: &ColumnParams, v: &FockWindowVector) -> Result<FockWindowVector> {
    expand(v, &|j| phi_j(j, u, col), &|w, j| w.psi(j))
}

/// Σ_{j ∈ window} Φ*_j(κ, z) ψ*_j.
pub fn psi_star_expansion(kappa: &Q, z: &Q, col: &ColumnParams, v: &FockWindowVector) -> Result<FockWindowVector> {
    expand(v, &|j| phi_star_j(j, kappa, z, col), &|w, j| w.psi_star(j))
}

/// Transpose of [`psi_expansion`].
pub fn psi_expansion_adjoint(u: &Q, col: &ColumnParams, v: &FockWindowVector) -> Result<FockWindowVector> {
    expand(v, &|j| phi_j(j, u, col), &|w, j| w.psi_star(j))
}

/// Transpose of [`psi_star_expansion`].
pub fn psi_star_expansion_adjoint(kappa: &Q, z: &Q, col: &ColumnParams, v: &FockWindowVector) -> Result<FockWindowVector> {
    expand(v, &|j| phi_star_j(j, kappa, z, col), &|w, j| w.psi(j))
}

/// Compares the window products with the ψ-expansions on every basis vector
/// of the window. Returns the first offending basis set, if any.
pub fn check_expansion(
    m: i64,
    n: i64,
    u: &Q,
    xi: &Q,
    kappa: &Q,
    z: &Q,
    col: &ColumnParams,
) -> Result<Option<Vec<i64>>> {
    let width = (n - m + 1) as u32;
    if width > 20 {
        return Err(Error::Window(format!("window of {width} sites is too wide for an exhaustive check")));
    }
    let ops = PsiWindowOps::new(m, n, u, xi, kappa, z, col)?;
    let phis = phi_coefficients(m, n, u, col)?;
    let stars = phi_star_coefficients(m, n, kappa, z, col)?;
    let bad: Vec<Option<Vec<i64>>> = (0..1u128 << width)
        .into_par_iter()
        .map(|mask| -> Result<Option<Vec<i64>>> {
            let mut w = WindowVector::zero(m, n);
            w.add_amp(mask, Q::one());
            let e = FockWindowVector(w);
            let ok = ops.psi(&e)? == apply_modes(&phis, true, &e)? && ops.psi_star(&e)? == apply_modes(&stars, false, &e)?;
            Ok(if ok { None } else { Some(e.0.sites(mask)) })
        })
        .collect::<Result<_>>()?;
    Ok(bad.into_iter().flatten().next())
}

/// ⟨e_𝒯, D^{[M,N]}C^{[M,N]} e_ℛ⟩ for ℛ = 𝒯 ∖ {t_j}, next to the predicted
/// (−1)^{M−j} Φ_{t_j}(x, z). Here j is 1-based in the increasing order of 𝒯.
pub fn phi_action(m: i64, n: i64, tset: &[i64], j: usize, x: &Q, z: &Q, col: &ColumnParams) -> Result<(Q, Q)> {
    let mut t = tset.to_vec();
    t.sort();
    let tj = t[j - 1];
    let r: Vec<i64> = t.iter().copied().filter(|&s| s != tj).collect();
    let out = dc_window(x, z, col, &FockWindowVector::basis(m, n, &r)?)?;
    let sign = if (m - j as i64).rem_euclid(2) == 0 { Q::one() } else { -Q::one() };
    Ok((out.amplitude(&t), sign * phi_j(tj, x, col)?))
}

/// ⟨e_ℛ, D^{[M,N]}B^{[M,N]} e_𝒯⟩ for ℛ = 𝒯 ∖ {t_j}, next to the predicted
/// (−1)^{m−j+1} Φ*_{t_j}(x, z) with |ℛ| = m.
pub fn phi_star_action(m: i64, n: i64, tset: &[i64], j: usize, x: &Q, z: &Q, col: &ColumnParams) -> Result<(Q, Q)> {
    let mut t = tset.to_vec();
    t.sort();
    let tj = t[j - 1];
    let r: Vec<i64> = t.iter().copied().filter(|&s| s != tj).collect();
    let out = db_window(x, z, col, &FockWindowVector::basis(m, n, &t)?)?;
    let e = r.len() as i64 - j as i64 + 1;
    let sign = if e.rem_euclid(2) == 0 { Q::one() } else { -Q::one() };
    Ok((out.amplitude(&r), sign * phi_star_j(tj, x, z, col)?))
}

/// |(s⁻²y − a)(y − b) / ((s⁻²y − b)(y − a))| on the positive column tail;
/// ⊕_{a;b} asks for this to be below 1.
pub fn oplus_ratio(a: &Q, b: &Q, col: &ColumnParams) -> Result<Q> {
    let (y, ys) = (col.y_tail.clone(), &col.y_tail / (&col.s_tail * &col.s_tail));
    Ok(quot((&ys - a) * (&y - b), (&ys - b) * (&y - a), "oplus")?.abs())
}

/// The same ratio on the negative-index tail, for ⊖_{a;b}.
pub fn ominus_ratio(a: &Q, b: &Q, col: &ColumnParams) -> Result<Q> {
    let (y, ys) = (col.y_neg_tail.clone(), &col.y_neg_tail / (&col.s_neg_tail * &col.s_neg_tail));
    Ok(quot((&ys - a) * (&y - b), (&ys - b) * (&y - a), "ominus")?.abs())
}

pub fn require_oplus(a: &Q, b: &Q, col: &ColumnParams, label: &str) -> Result<Q> {
    let r = oplus_ratio(a, b, col)?;
    if r >= Q::one() {
        return Err(Error::Ordering(format!("oplus_{{{label}}} fails: ratio {}", fmt_q(&r))));
    }
    Ok(r)
}

pub fn require_ominus(a: &Q, b: &Q, col: &ColumnParams, label: &str) -> Result<Q> {
    let r = ominus_ratio(a, b, col)?;
    if r >= Q::one() {
        return Err(Error::Ordering(format!("ominus_{{{label}}} fails: ratio {}", fmt_q(&r))));
    }
    Ok(r)
}

/// One factor Ψ(u)Ψ*(κ, v) of a vacuum expectation.
#[derive(Clone, Debug, PartialEq)]
pub struct WickPair {
    pub u: Q,
    pub kappa: Q,
    pub v: Q,
}

impl WickPair {
    pub fn new(u: Q, kappa: Q, v: Q) -> Self {
        WickPair { u, kappa, v }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WickEval {
    pub window: (i64, i64),
    /// ⟨e, Ψ(u_m)Ψ*(v_m)…Ψ(u_1)Ψ*(v_1) e⟩ computed on the window.
    pub value: Q,
    /// Determinant of the window contractions (finite Wick theorem).
    pub contraction_det: Q,
    /// det[(v_j − κ_j)/(u_i − v_j)].
    pub cauchy: Q,
    /// Certified bound on |cauchy − value|.
    pub bound: Q,
}

impl WickEval {
    pub fn gap(&self) -> Q {
        (&self.cauchy - &self.value).abs()
    }

    pub fn within(&self) -> bool {
        self.gap() <= self.bound
    }
}

pub fn cauchy_value(pairs: &[WickPair]) -> Result<Q> {
    let m: Matrix = pairs
        .iter()
        .map(|pi| pairs.iter().map(|pj| quot(&pj.v - &pj.kappa, &pi.u - &pj.v, "Cauchy entry")).collect())
        .collect::<Result<_>>()?;
    Ok(det(&m))
}

/// Window Wick expectation. Pairs are listed innermost first, so the operator
/// is Ψ(u_m)Ψ*(v_m)…Ψ(u_1)Ψ*(v_1); this needs ⊖_{u_i;v_j} for i ≥ j and
/// ⊕_{v_j;u_i} for i < j.
pub fn wick_vacuum(pairs: &[WickPair], col: &ColumnParams, m: i64, n: i64) -> Result<WickEval> {
    let p = pairs.len();
    if -m < col.y_neg.len().max(col.s_neg.len()) as i64 || n < col.tail_start() {
        return Err(Error::Window(format!("window [{m}, {n}] does not reach both constant tails")));
    }
    let mut ratios = vec![vec![Q::zero(); p]; p];
    for i in 0..p {
        for j in 0..p {
            ratios[i][j] = if i >= j {
                require_ominus(&pairs[i].u, &pairs[j].v, col, &format!("u{};v{}", i + 1, j + 1))?
            } else {
                require_oplus(&pairs[j].v, &pairs[i].u, col, &format!("v{};u{}", j + 1, i + 1))?
            };
        }
    }
    let h = p / 2;
    let mut ket = FockWindowVector::vacuum(m, n)?;
    for pr in &pairs[..h] {
        ket = psi_star_expansion(&pr.kappa, &pr.v, col, &ket)?;
        ket = psi_expansion(&pr.u, col, &ket)?;
    }
    let mut bra = FockWindowVector::vacuum(m, n)?;
    for pr in pairs[h..].iter().rev() {
        bra = psi_expansion_adjoint(&pr.u, col, &bra)?;
        bra = psi_star_expansion_adjoint(&pr.kappa, &pr.v, col, &bra)?;
    }
    let value = bra.dot(&ket);

    let mut c: Matrix = vec![vec![Q::zero(); p]; p];
    let mut b: Matrix = vec![vec![Q::zero(); p]; p];
    for i in 0..p {
        for j in 0..p {
            let (u, k, v) = (&pairs[i].u, &pairs[j].kappa, &pairs[j].v);
            let term = |s: i64| -> Result<Q> { Ok(phi_j(s, u, col)? * phi_star_j(s, k, v, col)?) };
            let q = &ratios[i][j];
            let geo = q / (Q::one() - q);
            if i >= j {
                c[i][j] = (m..=0).map(term).sum::<Result<Q>>()?;
                b[i][j] = term(m)?.abs() * geo;
            } else {
                c[i][j] = -(1..=n).map(term).sum::<Result<Q>>()?;
                b[i][j] = term(n)?.abs() * geo;
            }
        }
    }
    let mut bound = Q::zero();
    for (perm, _) in permutations(p) {
        let mut with = Q::one();
        let mut without = Q::one();
        for i in 0..p {
            let a = c[i][perm[i]].abs();
            with *= &a + &b[i][perm[i]];
            without *= a;
        }
        bound += with - without;
    }
    Ok(WickEval { window: (m, n), value, contraction_det: det(&c), cauchy: cauchy_value(pairs)?, bound })
}

/// Doubles the window from [m, n] until the bound drops below `tol`; returns
/// the last two evaluations.
pub fn wick_to_tolerance(pairs: &[WickPair], col: &ColumnParams, m: i64, n: i64, tol: &Q) -> Result<(WickEval, WickEval)> {
    let mut prev = wick_vacuum(pairs, col, m, n)?;
    let (mut m, mut n) = (m, n);
    for _ in 0..6 {
        m *= 2;
        n *= 2;
        if n - m >= 127 {
            break;
        }
        let cur = wick_vacuum(pairs, col, m, n)?;
        if cur.bound < *tol {
            return Ok((prev, cur));
        }
        prev = cur;
    }
    Err(Error::Window(format!("tail bound above {} at the widest window", fmt_q(tol))))
}

/// |⟨e_𝒯, B(x,r)Ψ(u,ξ) e_ℛ⟩ + ((u − r⁻²x)/(u − x))⟨e_𝒯, Ψ(u,ξ)B(x,r) e_ℛ⟩| on
/// the window, with Ψ realized by window products.
pub fn b_psi_gap(x: &RowParam, u: &Q, xi: &Q, col: &ColumnParams, m: i64, n: i64, rset: &[i64], tset: &[i64]) -> Result<Q> {
    let e = FockWindowVector::basis(m, n, rset)?;
    let lhs = apply_normalized(Op::B, x, col, &psi_window(u, xi, col, &e)?.0)?;
    let rhs = psi_window(u, xi, col, &FockWindowVector(apply_normalized(Op::B, x, col, &e.0)?))?;
    let c = quot(u - x.rx(), u - &x.x, "BPsi")?;
    Ok((lhs.get(tset) + c * rhs.amplitude(tset)).abs())
}

/// |⟨e_𝒯, B(x₁)D(x₂) e_ℛ⟩ − ((r₂⁻²x₂ − x₁)/(x₂ − x₁))⟨e_𝒯, D(x₂)B(x₁) e_ℛ⟩|.
pub fn b_d_gap(x1: &RowParam, x2: &RowParam, col: &ColumnParams, m: i64, n: i64, rset: &[i64], tset: &[i64]) -> Result<Q> {
    let e = WindowVector::basis(m, n, rset)?;
    let lhs = apply_normalized(Op::B, x1, col, &apply_normalized(Op::D, x2, col, &e)?)?;
    let rhs = apply_normalized(Op::D, x2, col, &apply_normalized(Op::B, x1, col, &e)?)?;
    let c = quot(x2.rx() - &x1.x, &x2.x - &x1.x, "BD")?;
    Ok((lhs.get(tset) - c * rhs.get(tset)).abs())
}

/// One-row, one-level correlation generating function: both sides of
/// (1/Z)⟨e_{ℤ≤0}, B(x)Ψ(u)Ψ*(v)D(w) e_{ℤ≤1}⟩ = closed product.
#[derive(Clone, Debug, PartialEq)]
pub struct GenfuncCheck {
    pub windows: Vec<(i64, i64)>,
    pub lhs: Vec<Q>,
    pub rhs: Q,
}

impl GenfuncCheck {
    pub fn gaps(&self) -> Vec<Q> {
        self.lhs.iter().map(|l| (l - &self.rhs).abs()).collect()
    }

    /// The gap shrinks along the windows and ends below `tol`.
    pub fn holds(&self, tol: &Q) -> bool {
        let g = self.gaps();
        g.windows(2).all(|w| w[1] < w[0]) && g.last().is_some_and(|l| l < tol)
    }
}

/// With `pair = None` the Ψ insertion is omitted and the right side is 1.
pub fn check_correlation_genfunc(
    xspec: &RowSpec,
    wspec: &RowSpec,
    pair: Option<(&Q, &Q)>,
    col: &ColumnParams,
    windows: &[(i64, i64)],
) -> Result<GenfuncCheck> {
    if xspec.len() != 1 || wspec.len() != 1 {
        return Err(Error::Other("one x row and one w row expected".into()));
    }
    let (x, w) = (&xspec.row(0), &wspec.row(0));
    let z = z_closed(xspec, col)? * pi_factor(xspec, wspec);
    let y1 = col.y(1);
    let rhs = match pair {
        None => Q::one(),
        Some((u, v)) => {
            require_oplus(&x.x, &w.x, col, "x;w")?;
            require_oplus(v, &w.x, col, "v;w")?;
            require_oplus(v, &x.rx(), col, "v;r^-2x")?;
            require_oplus(&x.x, u, col, "x;u")?;
            require_ominus(u, &w.rx(), col, "u;theta^-2w")?;
            require_ominus(u, &x.rx(), col, "u;r^-2x")?;
            require_ominus(u, &x.x, col, "u;x")?;
            require_ominus(u, v, col, "u;v")?;
            quot(v.clone(), u - v, "genfunc")?
                * quot((v - w.rx()) * (u - &w.x), (v - &w.x) * (u - w.rx()), "genfunc")?
                * quot((u - &y1) * (v - &x.x), (v - &y1) * (u - &x.x), "genfunc")?
        }
    };
    let mut lhs = Vec::new();
    for &(m, n) in windows {
        let start = FockWindowVector::filled_to(m, n, 1)?;
        let mut s = FockWindowVector(apply_normalized(Op::D, w, col, &start.0)?);
        if let Some((u, v)) = pair {
            s = psi_star_expansion(&Q::zero(), v, col, &s)?;
            s = psi_expansion(u, col, &s)?;
        }
        let b = apply_normalized(Op::B, x, col, &s.0)?;
        lhs.push(b.get(&(m..=0).collect::<Vec<_>>()) / &z);
    }
    Ok(GenfuncCheck { windows: windows.to_vec(), lhs, rhs })
}

/// K_AP(t, a; t′, a′) as the coefficient [Φ_{a′}(u)Φ*_a(v)] of
///   v/(u − v) ∏_m (u − y_m)(v − x_m)/((v − y_m)(u − x_m))
///   × ∏_{i ≤ t′} (u − w_i)/(u − θ_i⁻²w_i) ∏_{i ≤ t} (v − θ_i⁻²w_i)/(v − w_i),
/// extracted with the single-variable extraction contours: u runs around the
/// y side, v around the s⁻²y side. The v integral is done by the residues on
/// the s⁻²y side plus, when t ≤ t′, the diagonal v = u.
pub fn kernel_fock(p: &AscendingFG, t: usize, a: i64, t2: usize, a2: i64) -> Result<Q> {
    if t == 0 || t2 == 0 || t > p.t() || t2 > p.t() || a < 1 || a2 < 1 {
        return Err(Error::Other("kernel index out of range".into()));
    }
    let col = &p.col;
    let mut f = FactoredRational::one();
    f.mul_linear(col.y(a2), -1);
    for k in 1..a2 {
        f.mul_linear(col.ys(k), 1);
        f.mul_linear(col.y(k), -1);
    }
    let mut g = FactoredRational::constant(col.y(a) * (col.sm2(a) - Q::one()));
    g.mul_linear(col.ys(a), -1);
    for k in 1..a {
        g.mul_linear(col.y(k), 1);
        g.mul_linear(col.ys(k), -1);
    }
    // the extraction weight v^{-1} cancels the v of v/(u − v)
    for (m, xm) in p.x.values.iter().enumerate() {
        let ym = col.y(m as i64 + 1);
        f.mul_linear(ym.clone(), 1);
        f.mul_linear(xm.clone(), -1);
        g.mul_linear(xm.clone(), 1);
        g.mul_linear(ym, -1);
    }
    let rows = p.w.rows();
    for r in &rows[..t2] {
        f.mul_linear(r.x.clone(), 1);
        f.mul_linear(r.rx(), -1);
    }
    for r in &rows[..t] {
        g.mul_linear(r.rx(), 1);
        g.mul_linear(r.x.clone(), -1);
    }
    if g.degree() > -1 {
        return Err(Error::Degenerate("v integrand does not decay at infinity".into()));
    }
    let top = a.max(a2).max(p.n() as i64).max(col.tail_start());
    let ys_side: BTreeSet<Q> = (1..=top).map(|k| col.ys(k)).collect();
    let y_side: BTreeSet<Q> = (1..=top).map(|k| col.y(k)).collect();
    let a_f: BTreeSet<Q> = y_side.iter().cloned().chain(rows[..t2].iter().map(|r| r.rx())).collect();
    let a_g: BTreeSet<Q> = y_side.iter().cloned().chain(rows[..t].iter().map(|r| r.x.clone())).collect();
    for (c, _) in g.poles() {
        if !a_g.contains(&c) && !ys_side.contains(&c) {
            return Err(Error::Genericity(format!("v pole {} on neither side", fmt_q(&c))));
        }
        if a_g.contains(&c) && ys_side.contains(&c) {
            return Err(Error::Genericity(format!("v pole {} on both sides", fmt_q(&c))));
        }
    }
    let pps: Vec<(Q, Vec<Q>)> =
        g.poles().into_iter().filter(|(c, _)| ys_side.contains(c)).map(|(c, _)| (c.clone(), g.principal_part(&c))).collect();
    let mut k = Q::zero();
    for pt in &a_f {
        if ys_side.contains(pt) {
            return Err(Error::Genericity(format!("u pole {} on both sides", fmt_q(pt))));
        }
        k += residue_against_principal_parts(&f, pt, &pps);
    }
    if t <= t2 {
        let fg = f.mul(&g);
        for pt in a_f.union(&a_g) {
            k -= fg.residue_at(pt);
        }
    }
    Ok(k)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::params::{q, qi, to_f64};
    use crate::process::{kernel_kap, tests::test_process};

    /// Near the concrete family y ≈ 1, s ≈ 1/4 on the positive side and
    /// y ≈ 9/10, s ≈ 19/20 on the negative side.
    pub fn fock_columns() -> ColumnParams {
        ColumnParams::new(vec![qi(1), q(101, 100)], vec![q(1, 4), q(6, 25)], qi(1), q(1, 4)).with_negative(
            vec![q(9, 10), q(91, 100)],
            vec![q(19, 20), q(24, 25)],
            q(9, 10),
            q(19, 20),
        )
    }

    #[test]
    fn anticommutation() {
        let (m, n) = (-3, 3);
        for mask in 0..1u128 << 7 {
            let mut w = WindowVector::zero(m, n);
            w.add_amp(mask, qi(1));
            let e = FockWindowVector(w);
            for k in m..=n {
                let mut s = e.psi_star(k).unwrap().psi(k).unwrap();
                s.axpy(&qi(1), &e.psi(k).unwrap().psi_star(k).unwrap());
                assert_eq!(s, e);
                let occ = e.psi_star(k).unwrap().psi(k).unwrap();
                assert_eq!(occ.is_zero(), !e.occupied(mask, k));
                for l in m..=n {
                    if l != k {
                        let mut a = e.psi(k).unwrap().psi(l).unwrap();
                        a.axpy(&qi(1), &e.psi(l).unwrap().psi(k).unwrap());
                        assert!(a.is_zero());
                    }
                }
            }
        }
        let vac = FockWindowVector::vacuum(-3, 3).unwrap();
        assert_eq!(vac.charge_of(*vac.0.amps.keys().next().unwrap()), 0);
    }

    #[test]
    fn phi_branches() {
        let col = fock_columns();
        let x = q(3, 2);
        let p1 = phi_j(1, &x, &col).unwrap();
        assert_eq!(p1, col.y(1) * (qi(1) - col.sm2(1)) / (&x - col.ys(1)));
        let p0 = phi_j(0, &x, &col).unwrap();
        assert_eq!(p0, col.y(0) * (qi(1) - col.sm2(0)) / (&x - col.y(0)));
        assert!(phi_star_j(2, &x, &x, &col).unwrap().is_zero());
        assert!(phi_star_j(-2, &x, &x, &col).unwrap().is_zero());
    }

    #[test]
    fn matrix_elements_of_products() {
        let col = fock_columns();
        let (x, z) = (q(6, 5), q(7, 10));
        for tset in [vec![-3, -1, 0, 2], vec![-4, 1], vec![0, 3, 4], vec![-2, -1, 0, 1, 2]] {
            for j in 1..=tset.len() {
                let (got, want) = phi_action(-4, 4, &tset, j, &x, &z, &col).unwrap();
                assert_eq!(got, want, "{tset:?} {j}");
                let (got, want) = phi_star_action(-4, 4, &tset, j, &x, &z, &col).unwrap();
                assert_eq!(got, want, "{tset:?} {j}");
            }
        }
        // ℛ not a subset of 𝒯
        let out = db_window(&x, &z, &col, &FockWindowVector::basis(-4, 4, &[-2, 0, 3]).unwrap()).unwrap();
        assert!(out.amplitude(&[-1, 0]).is_zero());
        assert!(out.amplitude(&[1, 3]).is_zero());
    }

    #[test]
    fn expansion_on_small_window() {
        let col = fock_columns();
        assert_eq!(check_expansion(-3, 3, &q(6, 5), &q(7, 10), &q(1, 3), &q(5, 4), &col).unwrap(), None);
    }

    #[test]
    fn psi_independent_of_xi() {
        let col = fock_columns();
        let u = q(6, 5);
        for mask in [0b0001_1111u128, 0b0000_1111, 0b0101_0111, 0b1000_0011] {
            let mut w = WindowVector::zero(-3, 4);
            w.add_amp(mask, qi(1));
            let e = FockWindowVector(w);
            let a = psi_window(&u, &q(7, 10), &col, &e).unwrap();
            let b = psi_window(&u, &q(-5, 3), &col, &e).unwrap();
            assert_eq!(a, b);
        }
    }

    fn pair(u: Q, v: Q) -> WickPair {
        WickPair::new(u, qi(0), v)
    }

    #[test]
    fn wick_one_pair() {
        let col = fock_columns();
        let pr = [pair(q(101, 100), q(7, 10))];
        let (a, b) = wick_to_tolerance(&pr, &col, -4, 4, &q(1, 1_000_000_000_000)).unwrap();
        assert_eq!(b.cauchy, q(7, 10) / (q(101, 100) - q(7, 10)));
        assert!(a.within() && b.within());
        assert!(b.bound < a.bound);
        assert_eq!(b.value, b.contraction_det);
        let zero = [WickPair::new(q(101, 100), q(3, 5), q(3, 5))];
        assert!(wick_vacuum(&zero, &col, -6, 6).unwrap().value.is_zero());
    }

    #[test]
    fn wick_two_pairs() {
        let col = fock_columns();
        let pr = [pair(q(101, 100), q(7, 10)), pair(q(51, 50), q(3, 5))];
        let (a, b) = wick_to_tolerance(&pr, &col, -4, 4, &q(1, 1_000_000_000_000)).unwrap();
        assert!(a.within() && b.within(), "{} {}", to_f64(&b.gap()), to_f64(&b.bound));
        assert!(b.bound < a.bound);
        assert_eq!(b.value, b.contraction_det);
        let (u, v) = ([q(101, 100), q(51, 50)], [q(7, 10), q(3, 5)]);
        let closed = &v[0] * &v[1] * (&v[1] - &v[0]) * (&u[0] - &u[1])
            / ((&v[0] - &u[0]) * (&v[0] - &u[1]) * (&v[1] - &u[0]) * (&v[1] - &u[1]));
        assert_eq!(b.cauchy, closed);
    }

    #[test]
    fn wick_refuses_bad_order() {
        let col = fock_columns();
        let pr = [pair(q(7, 10), q(101, 100))];
        assert!(matches!(wick_vacuum(&pr, &col, -6, 6), Err(Error::Ordering(_))));
    }

    #[test]
    fn fock_kernel_matches_contour_kernel() {
        let p = test_process();
        for (t, a) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            for (t2, a2) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                assert_eq!(kernel_fock(&p, t, a, t2, a2).unwrap(), kernel_kap(&p, t, a, t2, a2).unwrap());
            }
        }
    }

    fn concrete_rows() -> (RowSpec, RowSpec) {
        (
            RowSpec::new(vec![q(4, 5)], vec![q(21, 25)]).unwrap(),
            RowSpec::new(vec![q(99, 100)], vec![q(21, 25)]).unwrap(),
        )
    }

    #[test]
    fn genfunc_without_insertions_is_one() {
        let col = fock_columns();
        let (x, w) = concrete_rows();
        let c = check_correlation_genfunc(&x, &w, None, &col, &[(-3, 6), (-6, 12)]).unwrap();
        assert!(c.holds(&q(1, 100_000)), "{:?}", c.gaps().iter().map(to_f64).collect::<Vec<_>>());
    }

    #[test]
    fn genfunc_one_pair() {
        let col = fock_columns();
        let (x, w) = concrete_rows();
        let (u, v) = (q(101, 100), q(7, 10));
        let c = check_correlation_genfunc(&x, &w, Some((&u, &v)), &col, &[(-3, 6), (-6, 12)]).unwrap();
        assert!(c.holds(&q(1, 100_000)), "{:?}", c.gaps().iter().map(to_f64).collect::<Vec<_>>());
    }

    #[test]
    fn commutations_converge() {
        let col = fock_columns();
        let x = RowParam::new(q(4, 5), &q(21, 25));
        let (u, xi) = (q(101, 100), q(99, 100));
        let g: Vec<Q> = [(-3, 4), (-6, 8)]
            .iter()
            .map(|&(m, n)| b_psi_gap(&x, &u, &xi, &col, m, n, &(m..=0).collect::<Vec<_>>(), &(m..=0).collect::<Vec<_>>()).unwrap())
            .collect();
        assert!(g[1] < g[0], "{:?}", g.iter().map(to_f64).collect::<Vec<_>>());
        let w = RowParam::new(q(17, 20), &q(21, 25));
        let g: Vec<Q> = [(-3, 5), (-6, 10)]
            .iter()
            .map(|&(m, n)| {
                let r: Vec<i64> = (m..=1).collect();
                b_d_gap(&x, &w, &col, m, n, &r, &(m..=0).collect::<Vec<_>>()).unwrap()
            })
            .collect();
        assert!(g[1] < g[0], "{:?}", g.iter().map(to_f64).collect::<Vec<_>>());
    }
}
