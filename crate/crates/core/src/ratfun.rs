//! Exact residue calculus over rational functions that factor into linear
//! pieces: c · ∏ (u − root)^exponent.

use crate::params::{fmt_q, Q};
use crate::{Error, Result};
use num::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq)]
pub struct FactoredRational {
    constant: Q,
    factors: BTreeMap<Q, i64>,
}

impl FactoredRational {
    pub fn constant(c: Q) -> Self {
        FactoredRational { constant: c, factors: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn zero() -> Self {
        Self::constant(Q::zero())
    }

    /// (u − root).
    pub fn linear(root: Q) -> Self {
        let mut f = Self::one();
        f.mul_linear(root, 1);
        f
    }

    /// (u − a)/(u − b).
    pub fn ratio(a: Q, b: Q) -> Self {
        let mut f = Self::one();
        f.mul_linear(a, 1);
        f.mul_linear(b, -1);
        f
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero()
    }

    pub fn leading(&self) -> &Q {
        &self.constant
    }

    pub fn factors(&self) -> impl Iterator<Item = (&Q, i64)> {
        self.factors.iter().map(|(r, &e)| (r, e))
    }

    /// Numerator degree minus denominator degree.
    pub fn degree(&self) -> i64 {
        self.factors.values().sum()
    }

    /// Multiplies by (u − root)^exp, merging equal roots.
    pub fn mul_linear(&mut self, root: Q, exp: i64) {
        if exp == 0 || self.is_zero() {
            return;
        }
        let e = self.factors.entry(root).or_insert(0);
        *e += exp;
        if *e == 0 {
            self.factors.retain(|_, e| *e != 0);
        }
    }

    pub fn scale(&mut self, c: &Q) {
        self.constant *= c;
        if self.constant.is_zero() {
            self.factors.clear();
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.scale(&other.constant);
        if !out.is_zero() {
            for (r, &e) in &other.factors {
                out.mul_linear(r.clone(), e);
            }
        }
        out
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Degenerate("reciprocal of the zero function".into()));
        }
        Ok(FactoredRational {
            constant: self.constant.recip(),
            factors: self.factors.iter().map(|(r, &e)| (r.clone(), -e)).collect(),
        })
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn pow(&self, n: i64) -> Result<Self> {
        if n < 0 {
            return self.recip()?.pow(-n);
        }
        if self.is_zero() {
            return Ok(if n == 0 { Self::one() } else { Self::zero() });
        }
        Ok(FactoredRational {
            constant: num::pow(self.constant.clone(), n as usize),
            factors: self.factors.iter().map(|(r, &e)| (r.clone(), e * n)).filter(|(_, e)| *e != 0).collect(),
        })
    }

    /// Exponent of (u − p): negative at poles.
    pub fn order_at(&self, p: &Q) -> i64 {
        self.factors.get(p).copied().unwrap_or(0)
    }

    pub fn poles(&self) -> Vec<(Q, i64)> {
        self.factors.iter().filter(|(_, &e)| e < 0).map(|(r, &e)| (r.clone(), -e)).collect()
    }

    pub fn eval(&self, u: &Q) -> Result<Q> {
        if self.is_zero() {
            return Ok(Q::zero());
        }
        let mut num = self.constant.clone();
        let mut den = Q::one();
        for (r, &e) in &self.factors {
            let d = u - r;
            if d.is_zero() {
                if e < 0 {
                    return Err(Error::Pole { root: fmt_q(r), what: "factored rational".into() });
                }
                return Ok(Q::zero());
            }
            if e > 0 {
                num *= num::pow(d, e as usize);
            } else {
                den *= num::pow(d, (-e) as usize);
            }
        }
        Ok(num / den)
    }

    /// Laurent expansion at p: f(p+h) = Σ_k coeffs[k] h^{order+k}, k < n.
    pub fn laurent_at(&self, p: &Q, n: usize) -> Laurent {
        let order = self.order_at(p);
        if self.is_zero() {
            return Laurent { order: 0, coeffs: vec![Q::zero(); n] };
        }
        if n == 0 {
            return Laurent { order, coeffs: vec![] };
        }
        // regular part g(p+h) = c ∏_{r≠p} (p − r + h)^e; log-derivative recursion
        let mut a0 = self.constant.clone();
        let mut invs: Vec<(Q, i64)> = Vec::new();
        for (r, &e) in &self.factors {
            if r == p {
                continue;
            }
            let d = p - r;
            if e > 0 {
                a0 *= num::pow(d.clone(), e as usize);
            } else {
                a0 /= num::pow(d.clone(), (-e) as usize);
            }
            invs.push((d.recip(), e));
        }
        // L_m = Σ e (−1)^m / d^{m+1}
        let mut ld = vec![Q::zero(); n.saturating_sub(1)];
        for (iv, e) in &invs {
            let eq = Q::from_integer((*e).into());
            let mut pw = iv.clone();
            for (m, slot) in ld.iter_mut().enumerate() {
                let term = &eq * &pw;
                if m % 2 == 0 {
                    *slot += term;
                } else {
                    *slot -= term;
                }
                pw *= iv;
            }
        }
        let mut a = Vec::with_capacity(n);
        a.push(a0);
        for m in 1..n {
            let mut s = Q::zero();
            for j in 0..m {
                s += &a[j] * &ld[m - 1 - j];
            }
            a.push(s / Q::from_integer((m as i64).into()));
        }
        Laurent { order, coeffs: a }
    }

    /// Residue at p (zero when p is not a pole).
    pub fn residue_at(&self, p: &Q) -> Q {
        let m = -self.order_at(p);
        if m <= 0 || self.is_zero() {
            return Q::zero();
        }
        let l = self.laurent_at(p, m as usize);
        l.coeffs[m as usize - 1].clone()
    }

    /// Principal part at p as coefficients b_k of (u − p)^{-k}, k = 1..m.
    pub fn principal_part(&self, p: &Q) -> Vec<Q> {
        let m = -self.order_at(p);
        if m <= 0 || self.is_zero() {
            return vec![];
        }
        let l = self.laurent_at(p, m as usize);
        // coeffs[j] multiplies h^{−m+j}; b_k with k = m − j
        (1..=m as usize).map(|k| l.coeffs[m as usize - k].clone()).collect()
    }

    pub fn contour_integral(&self, poles: &PoleSet) -> Q {
        poles.enclosed.iter().map(|p| self.residue_at(p)).fold(Q::zero(), |a, b| a + b)
    }

    pub fn to_string_pretty(&self) -> String {
        let mut s = fmt_q(&self.constant);
        for (r, e) in &self.factors {
            s.push_str(&format!(" (u-{})^{}", fmt_q(r), e));
        }
        s
    }
}

/// Truncated Laurent series Σ coeffs[k] h^{order+k}.
#[derive(Clone, Debug, PartialEq)]
pub struct Laurent {
    pub order: i64,
    pub coeffs: Vec<Q>,
}

impl Laurent {
    /// Coefficient of h^k (zero outside the stored range).
    pub fn coeff(&self, k: i64) -> Q {
        let idx = k - self.order;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Q::zero()
        } else {
            self.coeffs[idx as usize].clone()
        }
    }
}

/// Points enclosed by a positively oriented contour. Members that are not
/// poles of the integrand simply contribute nothing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoleSet {
    pub enclosed: BTreeSet<Q>,
}

impl PoleSet {
    pub fn new<I: IntoIterator<Item = Q>>(it: I) -> Self {
        PoleSet { enclosed: it.into_iter().collect() }
    }

    pub fn union(&self, other: &PoleSet) -> PoleSet {
        PoleSet { enclosed: self.enclosed.union(&other.enclosed).cloned().collect() }
    }

    /// Members of the set that are genuine poles of f.
    pub fn active(&self, f: &FactoredRational) -> Vec<Q> {
        self.enclosed.iter().filter(|p| f.order_at(p) < 0).cloned().collect()
    }

    /// Members that are not poles of f (reported, then ignored).
    pub fn extraneous(&self, f: &FactoredRational) -> Vec<Q> {
        self.enclosed.iter().filter(|p| f.order_at(p) >= 0).cloned().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nesting {
    /// The u-contour (for f) encloses the v-contour.
    FOutside,
    /// The v-contour (for g) encloses the u-contour.
    GOutside,
}

/// Res_p of f(u)·Σ_c PP_c(g)(u) where PP_c is the principal part of g at c.
pub fn residue_against_principal_parts(f: &FactoredRational, p: &Q, pps: &[(Q, Vec<Q>)]) -> Q {
    let mf = (-f.order_at(p)).max(0) as usize;
    let mut total = Q::zero();
    let max_k = pps.iter().filter(|(c, _)| c == p).map(|(_, b)| b.len()).max().unwrap_or(0);
    // Laurent of f at p long enough for both uses below
    let len = (mf + max_k).max(mf);
    if len == 0 {
        return total;
    }
    let lf = f.laurent_at(p, len);
    for (c, b) in pps {
        if c == p {
            // Res h^{-k} · f = coeff of h^{k-1} in f
            for (k1, bk) in b.iter().enumerate() {
                total += bk * lf.coeff(k1 as i64);
            }
        } else if mf > 0 {
            // (u − c)^{-k} = Σ_n binom(−k, n) (p − c)^{−k−n} h^n, paired with f_{−1−n}
            let d = p - c;
            let dinv = d.recip();
            for (k1, bk) in b.iter().enumerate() {
                let k = k1 as i64 + 1;
                let mut coef = num::pow(dinv.clone(), k as usize); // n = 0 term
                for n in 0..mf as i64 {
                    total += bk * &coef * lf.coeff(-1 - n);
                    // binom(−k, n+1)/binom(−k, n) = −(k + n)/(n + 1)
                    coef = -coef * Q::from_integer((k + n).into()) / Q::from_integer((n + 1).into()) * &dinv;
                }
            }
        }
    }
    total
}

/// (1/(2πi)²)∮∮ f(u) g(v)/(u − v) dv du with f's contour enclosing
/// `f_poles`, g's enclosing `g_poles`, and the given nesting. Coincident
/// poles of f and g are handled through principal parts.
pub fn separable_double_integral(
    f: &FactoredRational,
    g: &FactoredRational,
    f_poles: &PoleSet,
    g_poles: &PoleSet,
    nesting: Nesting,
) -> Q {
    match nesting {
        Nesting::FOutside => {
            let pps: Vec<(Q, Vec<Q>)> =
                g_poles.active(g).into_iter().map(|c| (c.clone(), g.principal_part(&c))).collect();
            let mut pts: BTreeSet<Q> = f_poles.active(f).into_iter().collect();
            pts.extend(pps.iter().map(|(c, _)| c.clone()));
            pts.iter().map(|p| residue_against_principal_parts(f, p, &pps)).fold(Q::zero(), |a, b| a + b)
        }
        Nesting::GOutside => {
            let pps: Vec<(Q, Vec<Q>)> =
                f_poles.active(f).into_iter().map(|d| (d.clone(), f.principal_part(&d))).collect();
            let mut pts: BTreeSet<Q> = g_poles.active(g).into_iter().collect();
            pts.extend(pps.iter().map(|(d, _)| d.clone()));
            -pts.iter().map(|p| residue_against_principal_parts(g, p, &pps)).fold(Q::zero(), |a, b| a + b)
        }
    }
}

/// The simple-pole formula, usable only when f- and g-poles are disjoint and
/// simple. Kept as a cross-check of the general evaluator.
pub fn separable_double_integral_simple(
    f: &FactoredRational,
    g: &FactoredRational,
    f_poles: &PoleSet,
    g_poles: &PoleSet,
    nesting: Nesting,
) -> Result<Q> {
    let ds = f_poles.active(f);
    let cs = g_poles.active(g);
    for d in &ds {
        if cs.contains(d) {
            return Err(Error::Genericity(format!("f and g share the pole {}", fmt_q(d))));
        }
        if f.order_at(d) < -1 {
            return Err(Error::Genericity(format!("pole of order > 1 at {}", fmt_q(d))));
        }
    }
    if cs.iter().any(|c| g.order_at(c) < -1) {
        return Err(Error::Genericity("pole of order > 1 in g".into()));
    }
    let mut total = Q::zero();
    for d in &ds {
        let rd = f.residue_at(d);
        for c in &cs {
            total += &rd * g.residue_at(c) / (d - c);
        }
    }
    match nesting {
        Nesting::FOutside => {
            for c in &cs {
                total += f.eval(c)? * g.residue_at(c);
            }
        }
        Nesting::GOutside => {
            for d in &ds {
                total -= f.residue_at(d) * g.eval(d)?;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{q, qi};
    use proptest::prelude::*;

    fn fr(c: Q, fs: &[(i64, i64)]) -> FactoredRational {
        let mut f = FactoredRational::constant(c);
        for &(r, e) in fs {
            f.mul_linear(qi(r), e);
        }
        f
    }

    #[test]
    fn basic_ops() {
        let f = FactoredRational::ratio(qi(1), qi(1));
        assert_eq!(f, FactoredRational::one());
        let g = fr(qi(1), &[(2, 2), (3, -1)]);
        assert_eq!(g.eval(&qi(4)).unwrap(), qi(4));
        let a = fr(qi(2), &[(5, 1)]).mul(&fr(qi(3), &[(5, -1)]));
        assert_eq!(a, FactoredRational::constant(qi(6)));
        assert!(g.eval(&qi(3)).is_err());
    }

    #[test]
    fn residues() {
        assert_eq!(fr(qi(1), &[(1, -1), (2, -1)]).residue_at(&qi(1)), qi(-1));
        assert_eq!(fr(qi(1), &[(3, -2)]).residue_at(&qi(3)), qi(0));
        assert_eq!(fr(qi(1), &[(5, 1), (1, -2), (2, -1)]).residue_at(&qi(1)), qi(3));
        let c = q(7, 3);
        let mut f = FactoredRational::linear(qi(1)).recip().unwrap();
        f.mul_linear(c.clone(), -1);
        assert_eq!(f.contour_integral(&PoleSet::new([qi(1)])), (qi(1) - c).recip());
        assert_eq!(f.contour_integral(&PoleSet::default()), qi(0));
    }

    #[test]
    fn double_integral_examples() {
        let f = fr(qi(1), &[(2, -1)]);
        let one = FactoredRational::one();
        let v = separable_double_integral(&f, &one, &PoleSet::new([qi(2)]), &PoleSet::default(), Nesting::FOutside);
        assert_eq!(v, qi(0));
        let g = fr(qi(1), &[(3, -1)]);
        let v = separable_double_integral(&one, &g, &PoleSet::default(), &PoleSet::new([qi(3)]), Nesting::FOutside);
        assert_eq!(v, qi(1));
    }

    fn arb_fr() -> impl Strategy<Value = FactoredRational> {
        (
            -5i64..=5,
            1i64..=4,
            prop::collection::vec((-6i64..=6, 1i64..=3, -3i64..=2), 1..6),
        )
            .prop_map(|(cn, cd, fs)| {
                let mut f = FactoredRational::constant(q(if cn == 0 { 1 } else { cn }, cd));
                for (n, d, e) in fs {
                    f.mul_linear(q(n, d), e);
                }
                f
            })
    }

    proptest! {
        #[test]
        fn residue_at_infinity(f in arb_fr()) {
            // add enough poles to make the total degree ≤ −2
            let mut f = f;
            let deg = f.degree();
            if deg > -2 {
                f.mul_linear(q(17, 7), -(deg + 2));
            }
            let total = f.poles().iter().map(|(p, _)| f.residue_at(p)).fold(Q::zero(), |a, b| a + b);
            prop_assert_eq!(total, Q::zero());
        }

        #[test]
        fn nesting_swap_is_diagonal_residue(f in arb_fr(), g in arb_fr()) {
            let fp = PoleSet::new(f.poles().into_iter().map(|(p, _)| p));
            let gp = PoleSet::new(g.poles().into_iter().map(|(p, _)| p));
            let a = separable_double_integral(&f, &g, &fp, &gp, Nesting::FOutside);
            let b = separable_double_integral(&f, &g, &fp, &gp, Nesting::GOutside);
            // the difference is ∮ f(v) g(v) dv around the poles of g that the
            // u-contour crosses; with every pole enclosed by both, the
            // difference is the residue sum of fg over the inner poles
            let fg = f.mul(&g);
            let diag = fg.contour_integral(&gp.union(&fp));
            prop_assert_eq!(a - b, diag);
        }

        #[test]
        fn simple_formula_agrees(fr_ in -5i64..5, gr in 6i64..9, e in 1i64..3) {
            let mut f = fr(qi(1), &[(fr_, -1), (20, -e)]);
            f.mul_linear(qi(30), 1);
            let g = fr(q(1, 3), &[(gr, -1), (40, -1)]);
            let fp = PoleSet::new([qi(fr_)]);
            let gp = PoleSet::new([qi(gr), qi(40)]);
            for n in [Nesting::FOutside, Nesting::GOutside] {
                let a = separable_double_integral(&f, &g, &fp, &gp, n);
                let b = separable_double_integral_simple(&f, &g, &fp, &gp, n).unwrap();
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn contour_additive(f in arb_fr(), g in arb_fr()) {
            let all: Vec<Q> = f.poles().into_iter().chain(g.poles()).map(|(p, _)| p).collect();
            let (a, b): (Vec<Q>, Vec<Q>) = all.iter().cloned().partition(|p| p < &Q::zero());
            let pa = PoleSet::new(a);
            let pb = PoleSet::new(b);
            prop_assert_eq!(f.contour_integral(&pa) + f.contour_integral(&pb), f.contour_integral(&pa.union(&pb)));
        }
    }
}
