//! Vertex weights W, Ŵ, the cross weights R, Yang–Baxter checks and
//! finite-window row operators.

use crate::params::{fmt_q, ColumnParams, RowParam, Q};
use crate::{Error, Result};
use num::{BigInt, Integer, One, Zero};
use std::collections::{BTreeMap, HashMap};

/// Bottom, left, top, right occupancies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeState {
    pub i1: u8,
    pub j1: u8,
    pub i2: u8,
    pub j2: u8,
}

impl EdgeState {
    pub const fn new(i1: u8, j1: u8, i2: u8, j2: u8) -> Self {
        EdgeState { i1, j1, i2, j2 }
    }

    pub fn all() -> Vec<EdgeState> {
        let mut v = Vec::with_capacity(16);
        for b in 0..16u8 {
            v.push(EdgeState::new(b & 1, (b >> 1) & 1, (b >> 2) & 1, (b >> 3) & 1));
        }
        v
    }

    pub fn conserving(&self) -> bool {
        self.i1 + self.j1 == self.i2 + self.j2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    W,
    WHat,
}

/// Row and column data of a single vertex, with spins stored as r^{-2} and
/// s^{-2}.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexParams {
    pub x: Q,
    pub rm2: Q,
    pub y: Q,
    pub sm2: Q,
}

impl VertexParams {
    pub fn new(x: &Q, y: &Q, r: &Q, s: &Q) -> Self {
        VertexParams { x: x.clone(), rm2: (r * r).recip(), y: y.clone(), sm2: (s * s).recip() }
    }

    pub fn at(row: &RowParam, col: &ColumnParams, j: i64) -> Self {
        VertexParams { x: row.x.clone(), rm2: row.rm2.clone(), y: col.y(j), sm2: col.sm2(j) }
    }
}

/// W with the common denominator s⁻²y − x.
pub fn w_weight(e: EdgeState, p: &VertexParams) -> Result<Q> {
    if !e.conserving() {
        return Ok(Q::zero());
    }
    let den = &p.sm2 * &p.y - &p.x;
    if den.is_zero() {
        return Err(Error::Degenerate(format!("s^-2 y = x = {}", fmt_q(&p.x))));
    }
    let rx = &p.rm2 * &p.x;
    let sy = &p.sm2 * &p.y;
    let one = Q::one();
    Ok(match (e.i1, e.j1, e.i2, e.j2) {
        (0, 0, 0, 0) => return Ok(one),
        (1, 1, 1, 1) => (rx - &p.y) / den,
        (1, 0, 1, 0) => (sy - rx) / den,
        (0, 1, 0, 1) => (&p.y - &p.x) / den,
        (1, 0, 0, 1) => &p.x * (&p.rm2 - &one) / den,
        (0, 1, 1, 0) => &p.y * (&p.sm2 - &one) / den,
        _ => unreachable!(),
    })
}

/// Ŵ = W · (s⁻²y − x)/(y − x).
pub fn what_weight(e: EdgeState, p: &VertexParams) -> Result<Q> {
    let d = &p.y - &p.x;
    if d.is_zero() {
        return Err(Error::Degenerate(format!("y = x = {}", fmt_q(&p.x))));
    }
    let w = w_weight(e, p)?;
    Ok(w * (&p.sm2 * &p.y - &p.x) / d)
}

pub fn family_weight(f: Family, e: EdgeState, p: &VertexParams) -> Result<Q> {
    match f {
        Family::W => w_weight(e, p),
        Family::WHat => what_weight(e, p),
    }
}

pub fn weight_w(e: EdgeState, x: &Q, y: &Q, r: &Q, s: &Q) -> Result<Q> {
    w_weight(e, &VertexParams::new(x, y, r, s))
}

pub fn weight_what(e: EdgeState, x: &Q, y: &Q, r: &Q, s: &Q) -> Result<Q> {
    what_weight(e, &VertexParams::new(x, y, r, s))
}

/// Cross weights R(i1,j1;i2,j2 | x1,r1; x2,r2).
pub fn r_weight(e: EdgeState, p1: &RowParam, p2: &RowParam) -> Result<Q> {
    if !e.conserving() {
        return Ok(Q::zero());
    }
    let den = &p1.x - p2.rx();
    if den.is_zero() {
        return Err(Error::Degenerate(format!("x1 = r2^-2 x2 = {}", fmt_q(&p1.x))));
    }
    let one = Q::one();
    Ok(match (e.i1, e.j1, e.i2, e.j2) {
        (0, 0, 0, 0) => return Ok(one),
        (1, 1, 1, 1) => (&p2.x - p1.rx()) / den,
        (1, 0, 1, 0) => (p1.rx() - p2.rx()) / den,
        (0, 1, 0, 1) => (&p1.x - &p2.x) / den,
        (1, 0, 0, 1) => &p1.x * (&one - &p1.rm2) / den,
        (0, 1, 1, 0) => &p2.x * (&one - &p2.rm2) / den,
        _ => unreachable!(),
    })
}

pub fn weight_r(e: EdgeState, x1: &Q, r1: &Q, x2: &Q, r2: &Q) -> Result<Q> {
    r_weight(e, &RowParam::new(x1.clone(), r1), &RowParam::new(x2.clone(), r2))
}

/// The six weights (a1, a2, b1, b2, c1, c2) of a weight function.
pub fn six(f: impl Fn(EdgeState) -> Result<Q>) -> Result<[Q; 6]> {
    Ok([
        f(EdgeState::new(0, 0, 0, 0))?,
        f(EdgeState::new(1, 1, 1, 1))?,
        f(EdgeState::new(1, 0, 1, 0))?,
        f(EdgeState::new(0, 1, 0, 1))?,
        f(EdgeState::new(1, 0, 0, 1))?,
        f(EdgeState::new(0, 1, 1, 0))?,
    ])
}

pub fn is_free_fermion(w: &[Q; 6]) -> bool {
    &w[0] * &w[1] + &w[2] * &w[3] == &w[4] * &w[5]
}

/// Free-fermion condition for both W and Ŵ at the given parameters.
pub fn check_free_fermion(x: &Q, y: &Q, r: &Q, s: &Q) -> Result<bool> {
    let p = VertexParams::new(x, y, r, s);
    Ok(is_free_fermion(&six(|e| w_weight(e, &p))?) && is_free_fermion(&six(|e| what_weight(e, &p))?))
}

/// The first boundary tuple (i1,i2,i3,j1,j2,j3) where the Yang–Baxter
/// equation fails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct YbeFailure {
    pub boundary: [u8; 6],
    pub families: (Family, Family),
}

/// Σ R(i2,i1;k2,k1) W(i3,k1;k3,j1|x1) W(k3,k2;j3,j2|x2)
/// = Σ R(k2,k1;j2,j1) W(i3,i2;k3,k2|x2) W(k3,i1;j3,k1|x1)
/// over all 64 boundary tuples, for all four W/Ŵ placements.
pub fn check_ybe(p1: &RowParam, p2: &RowParam, y: &Q, sm2: &Q) -> Result<std::result::Result<(), YbeFailure>> {
    let v1 = VertexParams { x: p1.x.clone(), rm2: p1.rm2.clone(), y: y.clone(), sm2: sm2.clone() };
    let v2 = VertexParams { x: p2.x.clone(), rm2: p2.rm2.clone(), y: y.clone(), sm2: sm2.clone() };
    let placements = [(Family::W, Family::W), (Family::WHat, Family::W), (Family::W, Family::WHat), (Family::WHat, Family::WHat)];
    let mut rtab = HashMap::new();
    for e in EdgeState::all() {
        rtab.insert(e, r_weight(e, p1, p2)?);
    }
    for (f1, f2) in placements {
        let mut t1 = HashMap::new();
        let mut t2 = HashMap::new();
        for e in EdgeState::all() {
            t1.insert(e, family_weight(f1, e, &v1)?);
            t2.insert(e, family_weight(f2, e, &v2)?);
        }
        let r = |a, b, c, d| &rtab[&EdgeState::new(a, b, c, d)];
        let w1 = |a, b, c, d| &t1[&EdgeState::new(a, b, c, d)];
        let w2 = |a, b, c, d| &t2[&EdgeState::new(a, b, c, d)];
        for bits in 0..64u8 {
            let b: Vec<u8> = (0..6).map(|k| (bits >> k) & 1).collect();
            let (i1, i2, i3, j1, j2, j3) = (b[0], b[1], b[2], b[3], b[4], b[5]);
            let mut lhs = Q::zero();
            let mut rhs = Q::zero();
            for k in 0..8u8 {
                let (k1, k2, k3) = (k & 1, (k >> 1) & 1, (k >> 2) & 1);
                lhs += r(i2, i1, k2, k1) * w1(i3, k1, k3, j1) * w2(k3, k2, j3, j2);
                rhs += r(k2, k1, j2, j1) * w2(i3, i2, k3, k2) * w1(k3, i1, j3, k1);
            }
            if lhs != rhs {
                return Ok(Err(YbeFailure { boundary: [i1, i2, i3, j1, j2, j3], families: (f1, f2) }));
            }
        }
    }
    Ok(Ok(()))
}

/// Sparse vector over occupancy subsets of the window [lo, hi]; bit k of the
/// key is site lo + k.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowVector {
    pub lo: i64,
    pub hi: i64,
    pub amps: BTreeMap<u128, Q>,
}

impl WindowVector {
    pub fn zero(lo: i64, hi: i64) -> Self {
        assert!(hi - lo < 128, "window wider than 128 sites");
        WindowVector { lo, hi, amps: BTreeMap::new() }
    }

    pub fn basis(lo: i64, hi: i64, sites: &[i64]) -> Result<Self> {
        let mut v = Self::zero(lo, hi);
        let m = v.mask(sites)?;
        v.amps.insert(m, Q::one());
        Ok(v)
    }

    pub fn mask(&self, sites: &[i64]) -> Result<u128> {
        let mut m = 0u128;
        for &s in sites {
            if s < self.lo || s > self.hi {
                return Err(Error::Window(format!("site {s} outside [{}, {}]", self.lo, self.hi)));
            }
            m |= 1u128 << (s - self.lo);
        }
        Ok(m)
    }

    pub fn sites(&self, mask: u128) -> Vec<i64> {
        (self.lo..=self.hi).filter(|&s| mask >> (s - self.lo) & 1 == 1).collect()
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn get(&self, sites: &[i64]) -> Q {
        self.mask(sites).ok().and_then(|m| self.amps.get(&m).cloned()).unwrap_or_else(Q::zero)
    }

    pub fn add_amp(&mut self, mask: u128, a: Q) {
        if a.is_zero() {
            return;
        }
        let e = self.amps.entry(mask).or_insert_with(Q::zero);
        *e += a;
        if e.is_zero() {
            self.amps.remove(&mask);
        }
    }

    pub fn axpy(&mut self, a: &Q, other: &WindowVector) {
        for (m, v) in &other.amps {
            self.add_amp(*m, a * v);
        }
    }

    pub fn scaled(&self, a: &Q) -> WindowVector {
        let mut out = WindowVector::zero(self.lo, self.hi);
        out.axpy(a, self);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn dot(&self, other: &WindowVector) -> Q {
        self.amps.iter().filter_map(|(m, a)| other.amps.get(m).map(|b| a * b)).fold(Q::zero(), |s, t| s + t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    A,
    B,
    C,
    D,
}

impl Op {
    /// Horizontal occupancy at the left and right ends.
    pub fn boundary(self) -> (u8, u8) {
        match self {
            Op::A => (1, 1),
            Op::B => (0, 1),
            Op::C => (1, 0),
            Op::D => (0, 0),
        }
    }
}

/// One-row transfer on a window. In the forward direction the input bits are
/// the bottom edges and the output the top edges; backward reads top to
/// bottom. `wt(site, e)` supplies the vertex weight.
pub fn row_transfer(
    lo: i64,
    hi: i64,
    input: u128,
    hl: u8,
    hr: u8,
    backward: bool,
    wt: &dyn Fn(i64, EdgeState) -> Result<Q>,
) -> Result<Vec<(u128, Q)>> {
    let mut states: HashMap<(u8, u128), Q> = HashMap::new();
    states.insert((hl, 0), Q::one());
    for site in lo..=hi {
        let pos = (site - lo) as u32;
        let b = ((input >> pos) & 1) as u8;
        let mut next: HashMap<(u8, u128), Q> = HashMap::new();
        for ((h, out), a) in states {
            for o in 0..2u8 {
                // forward: i1 = b, i2 = o; backward: i2 = b, i1 = o
                let (i1, i2) = if backward { (o, b) } else { (b, o) };
                let j2 = i1 as i8 + h as i8 - i2 as i8;
                if !(0..=1).contains(&j2) {
                    continue;
                }
                let w = wt(site, EdgeState::new(i1, h, i2, j2 as u8))?;
                if w.is_zero() {
                    continue;
                }
                let key = (j2 as u8, out | ((o as u128) << pos));
                let e = next.entry(key).or_insert_with(Q::zero);
                *e += &a * &w;
            }
        }
        next.retain(|_, v| !v.is_zero());
        states = next;
    }
    let mut out: Vec<(u128, Q)> =
        states.into_iter().filter(|((h, _), _)| *h == hr).map(|((_, m), a)| (m, a)).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

fn site_params(row: &RowParam, col: &ColumnParams, lo: i64, hi: i64) -> Vec<VertexParams> {
    (lo..=hi).map(|j| VertexParams::at(row, col, j)).collect()
}

/// A row operator on a fixed window with its per-site weights scaled to
/// integers; the sweep runs over BigInt and the common denominator is divided
/// out once at the end.
#[derive(Clone, Debug)]
pub struct WindowOperator {
    lo: i64,
    hi: i64,
    hl: u8,
    hr: u8,
    backward: bool,
    tables: Vec<[Option<BigInt>; 16]>,
    scale: BigInt,
}

impl WindowOperator {
    fn build(op: Op, fam: Family, backward: bool, row: &RowParam, col: &ColumnParams, lo: i64, hi: i64, extra: &Q) -> Result<Self> {
        let (hl, hr) = op.boundary();
        let mut tables = Vec::with_capacity((hi - lo + 1) as usize);
        let mut scale = extra.denom().clone();
        let extra_num = extra.numer().clone();
        for p in site_params(row, col, lo, hi) {
            let mut ws: Vec<(usize, Q)> = Vec::new();
            for (k, e) in EdgeState::all().into_iter().enumerate() {
                if e.conserving() {
                    let w = family_weight(fam, e, &p)?;
                    if !w.is_zero() {
                        ws.push((k, w));
                    }
                }
            }
            let l = ws.iter().fold(BigInt::one(), |l, (_, w)| l.lcm(w.denom()));
            let mut t: [Option<BigInt>; 16] = Default::default();
            for (k, w) in ws {
                t[k] = Some(w.numer() * (&l / w.denom()));
            }
            scale *= l;
            tables.push(t);
        }
        if let Some(t) = tables.first_mut() {
            for w in t.iter_mut().flatten() {
                *w *= &extra_num;
            }
        }
        Ok(WindowOperator { lo, hi, hl, hr, backward, tables, scale })
    }

    /// The unnormalized operator with weights W (bottom to top).
    pub fn plain(op: Op, row: &RowParam, col: &ColumnParams, lo: i64, hi: i64) -> Result<Self> {
        Self::build(op, Family::W, false, row, col, lo, hi, &Q::one())
    }

    /// The hatted operator with weights Ŵ (top to bottom).
    pub fn hatted(op: Op, row: &RowParam, col: &ColumnParams, lo: i64, hi: i64) -> Result<Self> {
        Self::build(op, Family::WHat, true, row, col, lo, hi, &Q::one())
    }

    /// A^{[M,N]}, B^{[M,N]}, C^{[M,N]}, D^{[M,N]}.
    pub fn normalized(op: Op, row: &RowParam, col: &ColumnParams, lo: i64, hi: i64) -> Result<Self> {
        let n = normalizer(op, row, col, lo, hi)?;
        Self::build(op, Family::W, false, row, col, lo, hi, &n.recip())
    }

    pub fn apply(&self, v: &WindowVector) -> Result<WindowVector> {
        if v.lo != self.lo || v.hi != self.hi {
            return Err(Error::Window(format!(
                "operator on [{}, {}] applied to a vector on [{}, {}]",
                self.lo, self.hi, v.lo, v.hi
            )));
        }
        let d = v.amps.values().fold(BigInt::one(), |l, a| l.lcm(a.denom()));
        // Sweep all inputs together: bits below the current site already hold
        // outputs, bits from it on still hold inputs.
        let mut states: HashMap<(u8, u128), BigInt> =
            v.amps.iter().map(|(m, a)| ((self.hl, *m), a.numer() * (&d / a.denom()))).collect();
        for (pos, table) in self.tables.iter().enumerate() {
            let pos = pos as u32;
            let mut next: HashMap<(u8, u128), BigInt> = HashMap::with_capacity(states.len());
            for ((h, mask), a) in states {
                let b = ((mask >> pos) & 1) as u8;
                for o in 0..2u8 {
                    let (i1, i2) = if self.backward { (o, b) } else { (b, o) };
                    let j2 = i1 as i8 + h as i8 - i2 as i8;
                    if !(0..=1).contains(&j2) {
                        continue;
                    }
                    let idx = (i1 | (h << 1) | (i2 << 2) | ((j2 as u8) << 3)) as usize;
                    let Some(w) = &table[idx] else { continue };
                    let key = (j2 as u8, (mask & !(1u128 << pos)) | ((o as u128) << pos));
                    let term = &a * w;
                    match next.entry(key) {
                        std::collections::hash_map::Entry::Occupied(mut e) => *e.get_mut() += term,
                        std::collections::hash_map::Entry::Vacant(e) => {
                            e.insert(term);
                        }
                    }
                }
            }
            next.retain(|_, v| !v.is_zero());
            states = next;
        }
        let den = d * &self.scale;
        let mut out = WindowVector::zero(v.lo, v.hi);
        for ((h, m), a) in states {
            if h == self.hr {
                out.add_amp(m, Q::new(a, den.clone()));
            }
        }
        Ok(out)
    }
}

/// A, B, C, D acting on the left (bottom to top) with weights W.
pub fn apply_op(op: Op, row: &RowParam, col: &ColumnParams, v: &WindowVector) -> Result<WindowVector> {
    WindowOperator::plain(op, row, col, v.lo, v.hi)?.apply(v)
}

/// Â, B̂, Ĉ, D̂ acting on the right (top to bottom) with weights Ŵ.
pub fn apply_hat_op(op: Op, row: &RowParam, col: &ColumnParams, v: &WindowVector) -> Result<WindowVector> {
    WindowOperator::hatted(op, row, col, v.lo, v.hi)?.apply(v)
}

/// The normalizing product of A^{[M,N]} etc. over the window.
pub fn normalizer(op: Op, row: &RowParam, col: &ColumnParams, lo: i64, hi: i64) -> Result<Q> {
    if lo > 0 || hi < 0 {
        return Err(Error::Window(format!("window [{lo}, {hi}] must contain the split point 0")));
    }
    let mut n = Q::one();
    let (neg, pos) = match op {
        Op::A => (Some(EdgeState::new(1, 1, 1, 1)), Some(EdgeState::new(0, 1, 0, 1))),
        Op::B => (Some(EdgeState::new(1, 0, 1, 0)), Some(EdgeState::new(0, 1, 0, 1))),
        Op::C => (Some(EdgeState::new(1, 1, 1, 1)), None),
        Op::D => (Some(EdgeState::new(1, 0, 1, 0)), None),
    };
    for j in lo..=hi {
        let e = if j <= 0 { neg } else { pos };
        if let Some(e) = e {
            n *= w_weight(e, &VertexParams::at(row, col, j))?;
        }
    }
    if n.is_zero() {
        return Err(Error::Degenerate("vanishing normalizer".into()));
    }
    Ok(n)
}

/// A^{[M,N]}, B^{[M,N]}, C^{[M,N]}, D^{[M,N]}.
pub fn apply_normalized(op: Op, row: &RowParam, col: &ColumnParams, v: &WindowVector) -> Result<WindowVector> {
    WindowOperator::normalized(op, row, col, v.lo, v.hi)?.apply(v)
}

/// A term c · O_1 O_2 … of an operator identity. Unhatted words act on the
/// left (rightmost letter first); hatted words act on the right (leftmost
/// letter first).
#[derive(Clone, Debug)]
pub struct Term {
    pub coef: Q,
    pub word: Vec<(Op, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    A2A1,
    B2B1,
    C2C1,
    D2D1,
    B2D1,
    D2B1,
    D2C1,
    C2D1,
    A2C1,
    ADBC1,
    ADBC2,
    HatA2A1,
    HatB2B1,
    HatBD,
    HatBA,
    HatD2D1,
}

impl Relation {
    pub fn all() -> Vec<Relation> {
        use Relation::*;
        vec![A2A1, B2B1, C2C1, D2D1, B2D1, D2B1, D2C1, C2D1, A2C1, ADBC1, ADBC2, HatA2A1, HatB2B1, HatBD, HatBA, HatD2D1]
    }

    pub fn hatted(self) -> bool {
        use Relation::*;
        matches!(self, HatA2A1 | HatB2B1 | HatBD | HatBA | HatD2D1)
    }

    /// Terms whose sum must vanish; row index 1 or 2 selects the parameter.
    pub fn terms(self, p1: &RowParam, p2: &RowParam) -> Vec<Term> {
        use Op::*;
        use Relation::*;
        let (x1, x2) = (&p1.x, &p2.x);
        let (rx1, rx2) = (p1.rx(), p2.rx());
        let one = Q::one();
        let t = |c: Q, w: &[(Op, usize)]| Term { coef: c, word: w.to_vec() };
        let comm = |o: Op, c: Q| vec![t(one.clone(), &[(o, 2), (o, 1)]), t(-c, &[(o, 1), (o, 2)])];
        match self {
            A2A1 | HatA2A1 => comm(A, one.clone()),
            D2D1 | HatD2D1 => comm(D, one.clone()),
            B2B1 => comm(B, (&rx1 - x2) / (&rx2 - x1)),
            C2C1 => comm(C, (&rx2 - x1) / (&rx1 - x2)),
            HatB2B1 => comm(B, (x2 - &rx1) / (x1 - &rx2)),
            B2D1 | HatBD => vec![
                t(one.clone(), &[(B, 2), (D, 1)]),
                t(-(&rx1 - x2) / (x1 - x2), &[(D, 1), (B, 2)]),
                t(-((&one - &p2.rm2) * x2) / (x1 - x2), &[(D, 2), (B, 1)]),
            ],
            HatBA => vec![
                t(one.clone(), &[(B, 2), (A, 1)]),
                t(-(&rx1 - x2) / (x2 - x1), &[(A, 1), (B, 2)]),
                t(-((&one - &p2.rm2) * x2) / (x2 - x1), &[(A, 2), (B, 1)]),
            ],
            D2B1 => vec![
                t(one.clone(), &[(D, 2), (B, 1)]),
                t(-(&rx1 - x2) / (&rx1 - &rx2), &[(B, 1), (D, 2)]),
                t(-((&one - &p1.rm2) * x1) / (&rx1 - &rx2), &[(B, 2), (D, 1)]),
            ],
            D2C1 => vec![
                t(one.clone(), &[(D, 2), (C, 1)]),
                t(-(&rx2 - x1) / (x2 - x1), &[(C, 1), (D, 2)]),
                t(-((&one - &p2.rm2) * x2) / (x2 - x1), &[(C, 2), (D, 1)]),
            ],
            C2D1 => vec![
                t(one.clone(), &[(C, 2), (D, 1)]),
                t(-(&rx2 - x1) / (&rx2 - &rx1), &[(D, 1), (C, 2)]),
                t(-(x1 * (&one - &p1.rm2)) / (&rx2 - &rx1), &[(D, 2), (C, 1)]),
            ],
            A2C1 => vec![
                t(one.clone(), &[(A, 2), (C, 1)]),
                t(-(&rx2 - x1) / (x1 - x2), &[(C, 1), (A, 2)]),
                t(-(x2 * (&one - &p2.rm2)) / (x1 - x2), &[(C, 2), (A, 1)]),
            ],
            ADBC1 => {
                let d = &rx2 - x1;
                let a = x1 * (&p1.rm2 - &one) / &d;
                vec![
                    t(a.clone(), &[(D, 2), (A, 1)]),
                    t((&rx2 - &rx1) / &d, &[(C, 2), (B, 1)]),
                    t(-a, &[(D, 1), (A, 2)]),
                    t(-(x2 - x1) / &d, &[(B, 1), (C, 2)]),
                ]
            }
            ADBC2 => {
                let d = &rx2 - x1;
                let a = x2 * (&p2.rm2 - &one) / &d;
                vec![
                    t(a.clone(), &[(A, 2), (D, 1)]),
                    t((x2 - x1) / &d, &[(B, 2), (C, 1)]),
                    t(-a, &[(A, 1), (D, 2)]),
                    t(-(&rx2 - &rx1) / &d, &[(C, 1), (B, 2)]),
                ]
            }
        }
    }
}

/// Applies c · word to v; `hatted` selects right action with Ŵ weights.
pub fn apply_word(word: &[(Op, RowParam)], hatted: bool, col: &ColumnParams, v: &WindowVector) -> Result<WindowVector> {
    let mut cur = v.clone();
    if hatted {
        for (o, p) in word {
            cur = apply_hat_op(*o, p, col, &cur)?;
        }
    } else {
        for (o, p) in word.iter().rev() {
            cur = apply_op(*o, p, col, &cur)?;
        }
    }
    Ok(cur)
}

/// Evaluates Σ terms on every basis vector of [lo, hi]; returns the first
/// basis vector (as a site list) where the sum is nonzero.
pub fn check_terms(terms: &[Term], p1: &RowParam, p2: &RowParam, hatted: bool, col: &ColumnParams, lo: i64, hi: i64) -> Result<Option<Vec<i64>>> {
    let width = (hi - lo + 1) as u32;
    for mask in 0..(1u128 << width) {
        let v = WindowVector { lo, hi, amps: [(mask, Q::one())].into_iter().collect() };
        let mut acc = WindowVector::zero(lo, hi);
        for t in terms {
            let word: Vec<(Op, RowParam)> =
                t.word.iter().map(|(o, k)| (*o, if *k == 1 { p1.clone() } else { p2.clone() })).collect();
            acc.axpy(&t.coef, &apply_word(&word, hatted, col, &v)?);
        }
        if !acc.is_zero() {
            return Ok(Some(v.sites(mask)));
        }
    }
    Ok(None)
}

pub fn check_commutation(rel: Relation, p1: &RowParam, p2: &RowParam, col: &ColumnParams, lo: i64, hi: i64) -> Result<Option<Vec<i64>>> {
    check_terms(&rel.terms(p1, p2), p1, p2, rel.hatted(), col, lo, hi)
}

/// The identities at the special spins r⁻² = z/x and x/z, each given as
/// (terms, row 1 = (x, z/x), row 2 = (z, x/z), free row with spin t).
pub fn simplified_relations(x: &Q, z: &Q, t_rm2: &Q) -> Vec<(&'static str, Vec<Term>, [RowParam; 4])> {
    use Op::*;
    let px = RowParam::from_rm2(x.clone(), z / x);
    let pz = RowParam::from_rm2(z.clone(), x / z);
    let xt = RowParam::from_rm2(x.clone(), t_rm2.clone());
    let zt = RowParam::from_rm2(z.clone(), t_rm2.clone());
    let one = Q::one();
    let t = |c: &Q, w: &[(Op, usize)]| Term { coef: c.clone(), word: w.to_vec() };
    let m = -one.clone();
    // row indices: 1 = px, 2 = pz, 3 = xt, 4 = zt
    let rows = [px, pz, xt, zt];
    vec![
        ("BB_x", vec![t(&one, &[(B, 3), (B, 2)])], rows.clone()),
        ("BB_z", vec![t(&one, &[(B, 4), (B, 1)])], rows.clone()),
        ("CC_x", vec![t(&one, &[(C, 1), (C, 4)])], rows.clone()),
        ("CC_z", vec![t(&one, &[(C, 2), (C, 3)])], rows.clone()),
        ("BD+DB", vec![t(&one, &[(B, 2), (D, 1)]), t(&one, &[(D, 2), (B, 1)])], rows.clone()),
        ("DC=CD", vec![t(&one, &[(D, 2), (C, 1)]), t(&m, &[(C, 2), (D, 1)])], rows.clone()),
        (
            "DA-CB",
            vec![t(&one, &[(D, 1), (A, 2)]), t(&m, &[(C, 1), (B, 2)]), t(&m, &[(D, 2), (A, 1)]), t(&m, &[(B, 2), (C, 1)])],
            rows.clone(),
        ),
        (
            "AD-BC",
            vec![t(&one, &[(A, 1), (D, 2)]), t(&m, &[(B, 1), (C, 2)]), t(&m, &[(A, 2), (D, 1)]), t(&m, &[(C, 2), (B, 1)])],
            rows,
        ),
    ]
}

/// Evaluates a simplified relation (row indices 1..=4) on all basis vectors.
pub fn check_simplified(terms: &[Term], rows: &[RowParam; 4], col: &ColumnParams, lo: i64, hi: i64) -> Result<Option<Vec<i64>>> {
    let width = (hi - lo + 1) as u32;
    for mask in 0..(1u128 << width) {
        let v = WindowVector { lo, hi, amps: [(mask, Q::one())].into_iter().collect() };
        let mut acc = WindowVector::zero(lo, hi);
        for t in terms {
            let word: Vec<(Op, RowParam)> = t.word.iter().map(|(o, k)| (*o, rows[k - 1].clone())).collect();
            acc.axpy(&t.coef, &apply_word(&word, false, col, &v)?);
        }
        if !acc.is_zero() {
            return Ok(Some(v.sites(mask)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{q, qi};
    use proptest::prelude::*;

    #[test]
    fn weight_examples() {
        let (x, y, s) = (q(1, 3), qi(1), q(1, 2));
        assert_eq!(weight_w(EdgeState::new(0, 0, 0, 0), &x, &y, &qi(1), &s).unwrap(), qi(1));
        assert_eq!(weight_w(EdgeState::new(1, 0, 0, 1), &x, &y, &qi(1), &s).unwrap(), qi(0));
        assert_eq!(weight_w(EdgeState::new(0, 1, 1, 0), &x, &y, &q(1, 2), &s).unwrap(), q(9, 11));
        assert_eq!(weight_what(EdgeState::new(0, 1, 0, 1), &x, &y, &q(1, 2), &s).unwrap(), qi(1));
        assert_eq!(weight_what(EdgeState::new(0, 0, 0, 0), &x, &y, &q(1, 2), &s).unwrap(), q(11, 2));
        assert_eq!(weight_r(EdgeState::new(0, 0, 0, 0), &qi(1), &q(1, 2), &qi(2), &qi(1)).unwrap(), qi(1));
        assert_eq!(weight_r(EdgeState::new(1, 0, 1, 0), &qi(1), &q(1, 2), &qi(2), &qi(1)).unwrap(), qi(-2));
        assert_eq!(weight_r(EdgeState::new(0, 1, 0, 1), &qi(3), &q(1, 2), &qi(3), &q(1, 3)).unwrap(), qi(0));
        assert!(weight_w(EdgeState::new(0, 1, 0, 1), &qi(4), &qi(1), &qi(1), &q(1, 2)).is_err());
    }

    #[test]
    fn conservation_exhaustive() {
        let p = VertexParams::new(&q(1, 3), &qi(1), &q(1, 2), &q(1, 2));
        for e in EdgeState::all() {
            if !e.conserving() {
                assert_eq!(w_weight(e, &p).unwrap(), qi(0));
                assert_eq!(what_weight(e, &p).unwrap(), qi(0));
            }
        }
    }

    #[test]
    fn ybe_equal_rows() {
        let p = RowParam::new(q(1, 3), &q(1, 2));
        assert_eq!(check_ybe(&p, &RowParam::new(q(2, 5), &q(3, 4)), &qi(1), &qi(4)).unwrap(), Ok(()));
        // x1 = x2, r1 = r2 makes the R-denominator x1 − r^{-2}x1 nonzero as long as r ≠ 1
        assert_eq!(check_ybe(&p, &p, &qi(1), &qi(4)).unwrap(), Ok(()));
    }

    #[test]
    fn commutation_relations_all() {
        let col = ColumnParams::new(vec![qi(1), q(9, 10), q(6, 5), q(4, 5)], vec![q(1, 2), q(2, 3), q(1, 3), q(3, 5)], qi(1), q(1, 2));
        let p1 = RowParam::new(q(1, 3), &q(1, 2));
        let p2 = RowParam::new(q(2, 7), &q(3, 5));
        for rel in Relation::all() {
            assert_eq!(check_commutation(rel, &p1, &p2, &col, 1, 4).unwrap(), None, "{rel:?}");
        }
    }

    #[test]
    fn simplified_relations_hold() {
        let col = ColumnParams::new(vec![qi(1), q(9, 10), q(6, 5)], vec![q(1, 2), q(2, 3), q(1, 3)], qi(1), q(1, 2));
        for (name, terms, rows) in simplified_relations(&q(1, 3), &q(2, 7), &q(5, 2)) {
            assert_eq!(check_simplified(&terms, &rows, &col, 1, 4).unwrap(), None, "{name}");
        }
    }

    #[test]
    fn d_on_empty_is_identity() {
        let col = ColumnParams::homogeneous(qi(1), q(1, 2));
        let v = WindowVector::basis(1, 5, &[]).unwrap();
        assert_eq!(apply_op(Op::D, &RowParam::new(q(1, 3), &q(1, 2)), &col, &v).unwrap(), v);
    }

    #[test]
    fn tensor_associativity_small() {
        // a three-site window computed in one sweep agrees with composing the
        // single-site tensor rules by hand for operator A
        let col = ColumnParams::new(vec![qi(1), q(9, 10), q(6, 5)], vec![q(1, 2), q(2, 3), q(1, 3)], qi(1), q(1, 2));
        let p = RowParam::new(q(1, 3), &q(1, 2));
        for mask in 0..8u128 {
            let v = WindowVector { lo: 1, hi: 3, amps: [(mask, qi(1))].into_iter().collect() };
            let whole = apply_op(Op::A, &p, &col, &v).unwrap();
            // split as V1 ⊗ (V2 ⊗ V3): A = C⊗B + A⊗A
            let mut manual = WindowVector::zero(1, 3);
            let v1 = WindowVector { lo: 1, hi: 1, amps: [(mask & 1, qi(1))].into_iter().collect() };
            let v23 = WindowVector { lo: 1, hi: 2, amps: [(mask >> 1, qi(1))].into_iter().collect() };
            let col23 = ColumnParams::new(vec![q(9, 10), q(6, 5)], vec![q(2, 3), q(1, 3)], qi(1), q(1, 2));
            for (o1, o2) in [(Op::C, Op::B), (Op::A, Op::A)] {
                let a = apply_op(o1, &p, &col, &v1).unwrap();
                let b = apply_op(o2, &p, &col23, &v23).unwrap();
                for (m1, c1) in &a.amps {
                    for (m2, c2) in &b.amps {
                        manual.add_amp(m1 | (m2 << 1), c1 * c2);
                    }
                }
            }
            assert_eq!(whole, manual);
        }
    }

    fn arb_q(lo: i64, hi: i64) -> impl Strategy<Value = Q> {
        (lo..hi, 1i64..13).prop_map(|(n, d)| q(n, d))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn free_fermion_random(x in arb_q(1, 20), y in arb_q(1, 20), r in arb_q(1, 20), s in arb_q(1, 20)) {
            let p = VertexParams::new(&x, &y, &r, &s);
            prop_assume!(&p.sm2 * &p.y != x && y != x);
            prop_assert!(check_free_fermion(&x, &y, &r, &s).unwrap());
        }

        #[test]
        fn free_fermion_r(x1 in arb_q(1, 20), x2 in arb_q(1, 20), r1 in arb_q(1, 20), r2 in arb_q(1, 20)) {
            let p1 = RowParam::new(x1, &r1);
            let p2 = RowParam::new(x2, &r2);
            prop_assume!(p1.x != p2.rx());
            prop_assert!(is_free_fermion(&six(|e| r_weight(e, &p1, &p2)).unwrap()));
        }

        #[test]
        fn ybe_random(x1 in arb_q(1, 20), x2 in arb_q(1, 20), r1 in arb_q(1, 20), r2 in arb_q(1, 20), y in arb_q(1, 20), s in arb_q(1, 12)) {
            let p1 = RowParam::new(x1, &r1);
            let p2 = RowParam::new(x2, &r2);
            let sm2 = (&s * &s).recip();
            prop_assume!(p1.x != p2.rx() && &sm2 * &y != p1.x && &sm2 * &y != p2.x && y != p1.x && y != p2.x);
            prop_assert_eq!(check_ybe(&p1, &p2, &y, &sm2).unwrap(), Ok(()));
        }
    }
}
