//! Six-vertex rows as pairs of five-vertex layers, the resulting dimer
//! model on the rail-yard graph, and its domino tilings of the half-strip.
//!
//! Geometry. The graph has unprimed vertices (j, i) and primed vertices
//! (j, i′) for j ≥ 1 and 1 ≤ i ≤ T + N, with (1,1), …, (N,1) removed. Each
//! vertex is a diamond-shaped unit square; in doubled coordinates the
//! unprimed (j, i) sits at (2j, 2i) and the primed (j, i′) at (2j+1, 2i+1).
//! A domino is a dimer, i.e. two diamonds sharing an edge.
//!
//! Every six-vertex row i splits into a lower layer living between rows i
//! and i′ (no (1,1;1,1) vertex, paths travel arbitrarily far) and an upper
//! layer between i′ and i+1 (no (0,1;0,1) vertex, paths shift by at most
//! one). A tiling is stored as the particle sets crossing between layers:
//! `d[i]` are the unprimed vertices of row i matched downward (the paths
//! entering row i; the removed squares for i = 1) and `u[i]` the primed
//! vertices of row i′ matched upward.

use crate::params::{fmt_q, ColumnParams, RowParam, Signature, Q};
use crate::process::{sample_f_branch, AscendingFG, AscendingSampler};
use crate::vertex::{six, what_weight, w_weight, EdgeState, VertexParams};
use crate::{Error, Result};
use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

// ------------------------------------------------------- six → five vertex

/// Weights in the order (a1, a2, b1, b2, c1, c2), i.e. at (0,0;0,0),
/// (1,1;1,1), (1,0;1,0), (0,1;0,1), (1,0;0,1), (0,1;1,0).
pub type SixWeights = [Q; 6];

pub fn weight_at(w: &SixWeights, e: EdgeState) -> Q {
    match (e.i1, e.j1, e.i2, e.j2) {
        (0, 0, 0, 0) => w[0].clone(),
        (1, 1, 1, 1) => w[1].clone(),
        (1, 0, 1, 0) => w[2].clone(),
        (0, 1, 0, 1) => w[3].clone(),
        (1, 0, 0, 1) => w[4].clone(),
        (0, 1, 1, 0) => w[5].clone(),
        _ => Q::zero(),
    }
}

/// The lower layer has a2 = 0, the upper layer b2 = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct FiveVertexPair {
    pub lower: SixWeights,
    pub upper: SixWeights,
}

/// Splits free-fermion weights into two stacked five-vertex families with
/// lower = (a1, 0, 1, b2, c1, b2/c1) and upper = (1, a2, b1, 0, c1, a2/c1).
pub fn six_to_five(w: &SixWeights) -> Result<FiveVertexPair> {
    let [a1, a2, b1, b2, c1, _] = w;
    if c1.is_zero() {
        return Err(Error::Degenerate("c1 = 0 admits no five-vertex split".into()));
    }
    let z = Q::zero();
    Ok(FiveVertexPair {
        lower: [a1.clone(), z.clone(), Q::one(), b2.clone(), c1.clone(), b2 / c1],
        upper: [Q::one(), a2.clone(), b1.clone(), z, c1.clone(), a2 / c1],
    })
}

/// Σ_{j1+j1′=J1, k} w(I1,j1;k,j2) w′(k,j1′;I2,j2′) for one boundary tuple.
pub fn stacked_weight(p: &FiveVertexPair, i1: u8, big_j1: u8, i2: u8, j2: u8, j2p: u8) -> Q {
    let mut s = Q::zero();
    for j1 in 0..=1u8 {
        if j1 > big_j1 || big_j1 - j1 > 1 {
            continue;
        }
        let j1p = big_j1 - j1;
        for k in 0..=1u8 {
            let lo = weight_at(&p.lower, EdgeState::new(i1, j1, k, j2));
            if lo.is_zero() {
                continue;
            }
            s += lo * weight_at(&p.upper, EdgeState::new(k, j1p, i2, j2p));
        }
    }
    s
}

/// Recombines a split; errors if the stacked weight depends on how the
/// outgoing horizontal arrow is distributed between the two layers.
pub fn five_to_six(p: &FiveVertexPair) -> Result<SixWeights> {
    let mut out: SixWeights = Default::default();
    for (slot, e) in six_states().iter().enumerate() {
        let mut seen: Option<Q> = None;
        for (j2, j2p) in split_outputs(e.j2) {
            let v = stacked_weight(p, e.i1, e.j1, e.i2, j2, j2p);
            match &seen {
                Some(s) if *s != v => {
                    return Err(Error::Other(format!("stacked weight at {e:?} depends on the output split")));
                }
                _ => seen = Some(v),
            }
        }
        out[slot] = seen.unwrap_or_default();
    }
    Ok(out)
}

fn six_states() -> [EdgeState; 6] {
    [
        EdgeState::new(0, 0, 0, 0),
        EdgeState::new(1, 1, 1, 1),
        EdgeState::new(1, 0, 1, 0),
        EdgeState::new(0, 1, 0, 1),
        EdgeState::new(1, 0, 0, 1),
        EdgeState::new(0, 1, 1, 0),
    ]
}

fn split_outputs(total: u8) -> Vec<(u8, u8)> {
    match total {
        0 => vec![(0, 0)],
        _ => vec![(1, 0), (0, 1)],
    }
}

/// Checks all 2^5 boundary tuples (I1, J1, I2, j2, j2′) against the six
/// vertex weight at (I1, J1; I2, j2 + j2′); returns the first failure.
pub fn check_split(w: &SixWeights) -> Result<Option<[u8; 5]>> {
    let p = six_to_five(w)?;
    for b in 0..32u8 {
        let t = [b & 1, (b >> 1) & 1, (b >> 2) & 1, (b >> 3) & 1, (b >> 4) & 1];
        let lhs = stacked_weight(&p, t[0], t[1], t[2], t[3], t[4]);
        let rhs = if t[3] + t[4] > 1 { Q::zero() } else { weight_at(w, EdgeState::new(t[0], t[1], t[2], t[3] + t[4])) };
        if lhs != rhs {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

// ----------------------------------------------------------- row geometry

/// Which family a six-vertex row uses; F rows lose one path to the right.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    G,
    F,
}

/// Product of vertex weights of the unique six-vertex row configuration
/// from `bottom` to `top` (point sets), with right boundary 1 for F rows.
pub fn six_vertex_row_weight(
    bottom: &[i64],
    top: &[i64],
    kind: RowKind,
    row: &RowParam,
    col: &ColumnParams,
) -> Result<Q> {
    let b: BTreeSet<i64> = bottom.iter().copied().collect();
    let t: BTreeSet<i64> = top.iter().copied().collect();
    let hr: i64 = if kind == RowKind::F { 1 } else { 0 };
    if b.len() as i64 != t.len() as i64 + hr {
        return Ok(Q::zero());
    }
    let last = b.iter().chain(t.iter()).max().copied().unwrap_or(0);
    let mut h = 0i64;
    let mut w = Q::one();
    for j in 1..=last {
        let i1 = b.contains(&j) as i64;
        let i2 = t.contains(&j) as i64;
        let j2 = h + i1 - i2;
        if !(0..=1).contains(&j2) {
            return Ok(Q::zero());
        }
        let e = EdgeState::new(i1 as u8, h as u8, i2 as u8, j2 as u8);
        let vp = VertexParams::at(row, col, j);
        w *= match kind {
            RowKind::G => w_weight(e, &vp)?,
            RowKind::F => what_weight(e, &vp)?,
        };
        if w.is_zero() {
            return Ok(w);
        }
        h = j2;
    }
    Ok(if h == hr { w } else { Q::zero() })
}

/// Lower-layer moves: with `exit`, the top path leaves to the right and the
/// others move right strictly below the next old position.
fn lower_ranges(d: &[i64], exit: bool) -> Vec<(i64, i64)> {
    if exit {
        (0..d.len().saturating_sub(1)).map(|k| (d[k + 1], d[k] - 1)).collect()
    } else {
        (0..d.len()).map(|k| (d[k], if k == 0 { i64::MAX } else { d[k - 1] - 1 })).collect()
    }
}

/// All intermediate particle sets between the two layers of one row taking
/// `d` to `d_next` (both decreasing).
pub fn layer_lifts(d: &[i64], d_next: &[i64], exit: bool) -> Vec<Vec<i64>> {
    let ranges = lower_ranges(d, exit);
    if ranges.len() != d_next.len() {
        return vec![];
    }
    let mut opts: Vec<Vec<i64>> = Vec::with_capacity(ranges.len());
    for (k, &(lo, hi)) in ranges.iter().enumerate() {
        let o: Vec<i64> = [d_next[k] - 1, d_next[k]].into_iter().filter(|&v| v >= lo && v <= hi && v >= 1).collect();
        if o.is_empty() {
            return vec![];
        }
        opts.push(o);
    }
    let mut out = vec![vec![]];
    for o in opts {
        let mut next = Vec::with_capacity(out.len() * o.len());
        for prefix in &out {
            for &v in &o {
                let mut p: Vec<i64> = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Vertex states of the two layers of a row on columns 1..=width, lower
/// layer first.
pub fn layer_states(d: &[i64], u: &[i64], d_next: &[i64], width: i64) -> (Vec<EdgeState>, Vec<EdgeState>) {
    let walk = |bottom: &[i64], top: &[i64]| {
        let b: BTreeSet<i64> = bottom.iter().copied().collect();
        let t: BTreeSet<i64> = top.iter().copied().collect();
        let mut h = 0i64;
        let mut out = Vec::new();
        for j in 1..=width {
            let i1 = b.contains(&j) as i64;
            let i2 = t.contains(&j) as i64;
            let j2 = h + i1 - i2;
            out.push(EdgeState::new(i1 as u8, h as u8, i2 as u8, j2 as u8));
            h = j2;
        }
        out
    };
    (walk(d, u), walk(u, d_next))
}

// ---------------------------------------------------------------- dominoes

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orient {
    #[serde(rename = "NE")]
    Ne,
    #[serde(rename = "NW")]
    Nw,
}

/// a: (j,i)–(j,i′); b: (j+1,i)–(j,i′); c: (j,i′)–(j,i+1); d: (j,i′)–(j+1,i+1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DominoType {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "d")]
    D,
}

impl DominoType {
    pub fn letter(self) -> char {
        match self {
            DominoType::A => 'a',
            DominoType::B => 'b',
            DominoType::C => 'c',
            DominoType::D => 'd',
        }
    }

    pub fn orient(self) -> Orient {
        match self {
            DominoType::A | DominoType::D => Orient::Ne,
            DominoType::B | DominoType::C => Orient::Nw,
        }
    }
}

/// A domino by the doubled coordinates of its lower square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Domino {
    pub x: i64,
    pub y: i64,
    pub orient: Orient,
    #[serde(rename = "type")]
    pub kind: DominoType,
}

impl Domino {
    fn new(kind: DominoType, x: i64, y: i64) -> Self {
        Domino { x, y, orient: kind.orient(), kind }
    }

    /// Doubled coordinates of the upper square.
    pub fn upper(&self) -> (i64, i64) {
        match self.orient {
            Orient::Ne => (self.x + 1, self.y + 1),
            Orient::Nw => (self.x - 1, self.y + 1),
        }
    }

    /// The primed vertex (column j, row i of i′) of this domino.
    pub fn primed(&self) -> (i64, i64) {
        let (x, y) = if self.x % 2 != 0 { (self.x, self.y) } else { self.upper() };
        ((x - 1) / 2, (y - 1) / 2)
    }

    /// True for dominoes whose lower square is primed: one per path crossing
    /// between consecutive six-vertex rows.
    pub fn is_particle(&self) -> bool {
        matches!(self.kind, DominoType::C | DominoType::D)
    }
}

// ------------------------------------------------------------------ tiling

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DominoTiling {
    t: usize,
    n: usize,
    /// d[i-1] = paths entering row i (decreasing); d[0] = 1..=N.
    d: Vec<Vec<i64>>,
    /// u[i-1] = particles between the two layers of row i.
    u: Vec<Vec<i64>>,
}

fn packed(n: usize) -> Vec<i64> {
    (1..=n as i64).rev().collect()
}

impl DominoTiling {
    /// Builds a tiling from its particle sets and checks every layer move.
    pub fn from_layers(t: usize, n: usize, d: Vec<Vec<i64>>, u: Vec<Vec<i64>>) -> Result<Self> {
        let rows = t + n;
        if d.len() != rows || u.len() != rows {
            return Err(Error::Other(format!("expected {rows} rows of particle sets")));
        }
        if d.first().map(|v| v.as_slice()) != Some(packed(n).as_slice()) && rows > 0 {
            return Err(Error::Other("paths must enter at columns 1..N".into()));
        }
        for i in 0..rows {
            let next: &[i64] = if i + 1 < rows { &d[i + 1] } else { &[] };
            let exit = i >= t;
            let ok_count = d[i].len() == n - i.saturating_sub(t);
            if !ok_count || !layer_lifts(&d[i], next, exit).contains(&u[i]) {
                return Err(Error::Other(format!("inadmissible layers in row {}", i + 1)));
            }
        }
        Ok(DominoTiling { t, n, d, u })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> (&[Vec<i64>], &[Vec<i64>]) {
        (&self.d, &self.u)
    }

    /// Rightmost column carrying anything but the stable brick pattern.
    pub fn extent(&self) -> i64 {
        self.d.iter().chain(self.u.iter()).flatten().copied().max().unwrap_or(0).max(self.n as i64)
    }

    /// Dominoes with primed column ≤ width (width ≥ extent + 1 shows the
    /// stable pattern), sorted by position.
    pub fn dominoes(&self, width: i64) -> Vec<Domino> {
        let mut out = Vec::new();
        let rows = self.t + self.n;
        for i in 0..rows {
            let row = i as i64 + 1;
            let exit = i >= self.t;
            let dset: BTreeSet<i64> = self.d[i].iter().copied().collect();
            let uset: BTreeSet<i64> = self.u[i].iter().copied().collect();
            let a_top = if exit { width + 1 } else { width };
            let a: Vec<i64> = (1..=a_top).filter(|j| !dset.contains(j)).collect();
            let b: Vec<i64> = (1..=width).filter(|j| !uset.contains(j)).collect();
            for (&ja, &jb) in a.iter().zip(b.iter()) {
                if ja == jb {
                    out.push(Domino::new(DominoType::A, 2 * ja, 2 * row));
                } else {
                    out.push(Domino::new(DominoType::B, 2 * ja, 2 * row));
                }
            }
            if i + 1 < rows {
                for (&ju, &jd) in self.u[i].iter().zip(self.d[i + 1].iter()) {
                    let kind = if ju == jd { DominoType::C } else { DominoType::D };
                    out.push(Domino::new(kind, 2 * ju + 1, 2 * row + 1));
                }
            }
        }
        out.sort();
        out
    }

    /// Particle positions (layer k, column l) read off the upper squares of
    /// the particle dominoes between rows k′ and k+1.
    pub fn particles(&self) -> Vec<(usize, i64)> {
        let mut out = Vec::new();
        for k in 1..self.t + self.n {
            for &l in &self.d[k] {
                out.push((k, l));
            }
        }
        out
    }

    /// Lower-square columns of the same particle dominoes.
    pub fn particle_feet(&self) -> Vec<(usize, i64)> {
        let mut out = Vec::new();
        for k in 1..self.t + self.n {
            for &l in &self.u[k - 1] {
                out.push((k, l));
            }
        }
        out
    }

    /// Canonical tiling of a signature sequence: λ^(1..T) with N parts each
    /// and μ^(N−1), …, μ^(1) with N−1, …, 1 parts. Within each row the
    /// lower layer moves every path as little as possible.
    pub fn from_signatures(lambdas: &[Signature], mus: &[Signature]) -> Result<Self> {
        let (t, n, d) = chain_points(lambdas, mus)?;
        let mut u = Vec::with_capacity(t + n);
        for i in 0..t + n {
            let next: &[i64] = if i + 1 < t + n { &d[i + 1] } else { &[] };
            let lifts = layer_lifts(&d[i], next, i >= t);
            let Some(first) = lifts.into_iter().next() else {
                return Err(Error::InvalidSignature(format!("no tiling realizes row {}", i + 1)));
            };
            u.push(first);
        }
        DominoTiling::from_layers(t, n, d, u)
    }

    /// Every tiling projecting to the given signatures.
    pub fn all_lifts(lambdas: &[Signature], mus: &[Signature]) -> Result<Vec<Self>> {
        let (t, n, d) = chain_points(lambdas, mus)?;
        let mut us: Vec<Vec<Vec<i64>>> = vec![vec![]];
        for i in 0..t + n {
            let next: &[i64] = if i + 1 < t + n { &d[i + 1] } else { &[] };
            let lifts = layer_lifts(&d[i], next, i >= t);
            let mut grown = Vec::new();
            for p in &us {
                for l in &lifts {
                    let mut q = p.clone();
                    q.push(l.clone());
                    grown.push(q);
                }
            }
            us = grown;
        }
        Ok(us.into_iter().map(|u| DominoTiling { t, n, d: d.clone(), u }).collect())
    }

    /// (λ^(1..T), μ^(N−1..1)).
    pub fn to_signatures(&self) -> Result<(Vec<Signature>, Vec<Signature>)> {
        let rows = self.t + self.n;
        let mut lambdas = Vec::with_capacity(self.t);
        for k in 1..=self.t {
            let pts = if k < rows { self.d[k].clone() } else { vec![] };
            lambdas.push(Signature::from_points(pts)?);
        }
        let mut mus = Vec::new();
        for k in self.t + 1..rows {
            mus.push(Signature::from_points(self.d[k].clone())?);
        }
        Ok((lambdas, mus))
    }

    /// Rebuilds a tiling from its dominoes; the list must cover columns
    /// 1..=width for some width ≥ extent + 1.
    pub fn from_dominoes(t: usize, n: usize, dominoes: &[Domino]) -> Result<Self> {
        let rows = t + n;
        let mut d: Vec<Vec<i64>> = vec![vec![]; rows];
        let mut u: Vec<Vec<i64>> = vec![vec![]; rows];
        if rows > 0 {
            d[0] = packed(n);
        }
        let mut width = 0;
        for dm in dominoes {
            let (j, i) = dm.primed();
            width = width.max(j);
            if !dm.is_particle() {
                continue;
            }
            let (ux, _) = (dm.x, dm.y);
            let (tx, ty) = dm.upper();
            let row = (ty / 2) as usize;
            if row < 2 || row > rows {
                return Err(Error::Other(format!("particle domino outside the strip at row {i}")));
            }
            u[row - 2].push((ux - 1) / 2);
            d[row - 1].push(tx / 2);
        }
        for v in d.iter_mut().chain(u.iter_mut()) {
            v.sort_unstable_by(|a, b| b.cmp(a));
        }
        let tiling = DominoTiling::from_layers(t, n, d, u)?;
        if tiling.extent() >= width {
            return Err(Error::Other("domino list does not reach the stable region".into()));
        }
        let mut given = dominoes.to_vec();
        given.sort();
        if tiling.dominoes(width) != given {
            return Err(Error::Other("dominoes do not form a tiling of the strip".into()));
        }
        Ok(tiling)
    }

    pub fn to_json(&self) -> TilingJson {
        TilingJson { t: self.t, n: self.n, dominoes: self.dominoes(self.extent() + 1) }
    }

    pub fn from_json(j: &TilingJson) -> Result<Self> {
        DominoTiling::from_dominoes(j.t, j.n, &j.dominoes)
    }
}

fn chain_points(lambdas: &[Signature], mus: &[Signature]) -> Result<(usize, usize, Vec<Vec<i64>>)> {
    let t = lambdas.len();
    let n = lambdas.first().map_or(mus.len() + 1, |l| l.len());
    if t == 0 {
        return Err(Error::InvalidSignature("need at least one λ".into()));
    }
    if lambdas.iter().any(|l| l.len() != n) {
        return Err(Error::InvalidSignature("every λ needs N parts".into()));
    }
    if mus.len() != n.saturating_sub(1) || mus.iter().enumerate().any(|(m, mu)| mu.len() != n - 1 - m) {
        return Err(Error::InvalidSignature("μ's must have N−1, …, 1 parts".into()));
    }
    let mut d = vec![packed(n)];
    d.extend(lambdas.iter().map(|l| l.points()));
    d.extend(mus.iter().map(|m| m.points()));
    d.truncate(t + n);
    Ok((t, n, d))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilingJson {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub dominoes: Vec<Domino>,
}

// ----------------------------------------------------------------- weights

/// Weight of a single domino. Rows i ≤ T use (w_i, θ_i), rows T+m use
/// (x_m, r_m); j is the primed column and S_j = s_j⁻² y_j:
///
/// | type | rows ≤ T                 | rows > T                  |
/// |------|--------------------------|---------------------------|
/// | a    | 1                        | (S_j − x)/(y_{j+1} − x)   |
/// | b    | (y_{j+1} − w)/(S_j − w)  | 1                         |
/// | c    | (S_j − θ⁻²w)/(S_j − w)   | (S_j − r⁻²x)/(y_{j+1} − x)|
/// | d    | (θ⁻²w − y_{j+1})/(S_j − w)| (r⁻²x − y_{j+1})/(y_{j+1} − x)|
pub fn domino_weight(dm: &Domino, p: &AscendingFG) -> Result<Q> {
    let (j, i) = dm.primed();
    let t = p.t() as i64;
    let col = &p.col;
    let sj = col.ys(j);
    let y1 = col.y(j + 1);
    let ratio = |num: Q, den: Q| -> Result<Q> {
        if den.is_zero() {
            return Err(Error::Degenerate(format!("domino weight pole at column {j}, row {i}")));
        }
        Ok(num / den)
    };
    if i <= t {
        let r = p.w.row(i as usize - 1);
        match dm.kind {
            DominoType::A => Ok(Q::one()),
            DominoType::B => ratio(&y1 - &r.x, &sj - &r.x),
            DominoType::C => ratio(&sj - r.rx(), &sj - &r.x),
            DominoType::D => ratio(r.rx() - &y1, &sj - &r.x),
        }
    } else {
        let r = p.x.row((i - t) as usize - 1);
        match dm.kind {
            DominoType::A => ratio(&sj - &r.x, &y1 - &r.x),
            DominoType::B => Ok(Q::one()),
            DominoType::C => ratio(&sj - r.rx(), &y1 - &r.x),
            DominoType::D => ratio(r.rx() - &y1, &y1 - &r.x),
        }
    }
}

/// Product of domino weights; dominoes outside the window all weigh 1.
pub fn tiling_weight(tl: &DominoTiling, p: &AscendingFG) -> Result<Q> {
    check_shape(tl, p)?;
    let width = tl.extent().max(p.col.tail_start()) + 1;
    let mut w = Q::one();
    for dm in tl.dominoes(width) {
        w *= domino_weight(&dm, p)?;
        if w.is_zero() {
            break;
        }
    }
    Ok(w)
}

/// Product of six-vertex weights of the row configurations underlying a
/// tiling; the lower/upper split inside each row does not enter.
pub fn six_vertex_weight(tl: &DominoTiling, p: &AscendingFG) -> Result<Q> {
    check_shape(tl, p)?;
    let rows = tl.t + tl.n;
    let mut w = Q::one();
    for i in 0..rows {
        let next: &[i64] = if i + 1 < rows { &tl.d[i + 1] } else { &[] };
        let (kind, row) = if i < tl.t { (RowKind::G, p.w.row(i)) } else { (RowKind::F, p.x.row(i - tl.t)) };
        w *= six_vertex_row_weight(&tl.d[i], next, kind, &row, &p.col)?;
    }
    Ok(w)
}

/// Product over the layered vertices of the five-vertex weights obtained
/// from [`six_to_five`] at every site.
pub fn five_vertex_weight(tl: &DominoTiling, p: &AscendingFG) -> Result<Q> {
    check_shape(tl, p)?;
    let rows = tl.t + tl.n;
    let width = tl.extent().max(p.col.tail_start()) + 1;
    let mut w = Q::one();
    for i in 0..rows {
        let next: &[i64] = if i + 1 < rows { &tl.d[i + 1] } else { &[] };
        let (lo, up) = layer_states(&tl.d[i], &tl.u[i], next, width);
        let row = if i < tl.t { p.w.row(i) } else { p.x.row(i - tl.t) };
        for j in 1..=width {
            let vp = VertexParams::at(&row, &p.col, j);
            let six_w = six(|e| if i < tl.t { w_weight(e, &vp) } else { what_weight(e, &vp) })?;
            let pair = six_to_five(&six_w)?;
            w *= weight_at(&pair.lower, lo[j as usize - 1]) * weight_at(&pair.upper, up[j as usize - 1]);
        }
    }
    Ok(w)
}

/// tiling_weight / six-vertex weight = ∏_m (y_1 − x_m)/(x_m(r_m⁻² − 1)).
/// The gauge giving the repeated dominoes of the upper rows weight 1
/// telescopes to 1/c1 of the first column in each of those rows.
pub fn gauge_constant(p: &AscendingFG) -> Result<Q> {
    let mut c = Q::one();
    for r in p.x.rows() {
        let c1 = &r.x * (&r.rm2 - Q::one());
        if c1.is_zero() {
            return Err(Error::Degenerate("x (r^-2 - 1) = 0".into()));
        }
        c *= (p.col.y(1) - &r.x) / c1;
    }
    Ok(c)
}

fn check_shape(tl: &DominoTiling, p: &AscendingFG) -> Result<()> {
    if tl.t != p.t() || tl.n != p.n() {
        return Err(Error::Other(format!("tiling is {}×{}, process is {}×{}", tl.t, tl.n, p.t(), p.n())));
    }
    Ok(())
}

/// Random tiling: λ's from the exact ascending sampler, μ's from the F
/// branching rule, and the within-row layers proportional to their weight.
pub fn sample_tiling(p: &AscendingFG, cutoff: i64, eps: Q, seed: u64) -> Result<DominoTiling> {
    let mut sampler = AscendingSampler::new(p, cutoff, eps);
    let lambdas = sampler.sample(seed)?.signatures;
    let last = lambdas.last().cloned().unwrap_or_else(Signature::empty);
    let mut branch = if p.n() > 0 { sample_f_branch(&last, &p.x, &p.col, seed ^ 0x9e37_79b9)? } else { vec![] };
    branch.pop();
    branch.reverse();
    let base = DominoTiling::from_signatures(&lambdas, &branch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let (t, n) = (base.t, base.n);
    let mut u = Vec::with_capacity(t + n);
    for i in 0..t + n {
        let next: &[i64] = if i + 1 < t + n { &base.d[i + 1] } else { &[] };
        let lifts = layer_lifts(&base.d[i], next, i >= t);
        let mut weighted = Vec::with_capacity(lifts.len());
        for l in lifts {
            let mut trial = base.u.clone();
            trial[i] = l.clone();
            let tl = DominoTiling { t, n, d: base.d.clone(), u: trial };
            let w = row_weight(&tl, p, i)?;
            if w < Q::zero() {
                return Err(Error::Ordering(format!("negative domino weight {} in row {}", fmt_q(&w), i + 1)));
            }
            weighted.push((l, crate::params::to_f64(&w)));
        }
        let total: f64 = weighted.iter().map(|x| x.1).sum();
        let mut target = rng.gen::<f64>() * total;
        let mut pick = weighted[0].0.clone();
        for (l, w) in weighted {
            pick = l;
            if target < w {
                break;
            }
            target -= w;
        }
        u.push(pick);
    }
    DominoTiling::from_layers(t, n, base.d, u)
}

/// Product of the weights of the dominoes touching primed row i+1′.
fn row_weight(tl: &DominoTiling, p: &AscendingFG, i: usize) -> Result<Q> {
    let width = tl.extent().max(p.col.tail_start()) + 1;
    let mut w = Q::one();
    for dm in tl.dominoes(width) {
        if dm.primed().1 == i as i64 + 1 {
            w *= domino_weight(&dm, p)?;
        }
    }
    Ok(w)
}

// ---------------------------------------------------------------- renderers

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderFormat {
    Svg,
    Ascii,
}

pub fn render(tl: &DominoTiling, format: RenderFormat) -> String {
    match format {
        RenderFormat::Svg => render_svg(tl),
        RenderFormat::Ascii => render_ascii(tl),
    }
}

fn cells(tl: &DominoTiling, width: i64) -> BTreeMap<(i64, i64), (DominoType, bool)> {
    let mut m = BTreeMap::new();
    for dm in tl.dominoes(width) {
        m.insert((dm.x, dm.y), (dm.kind, dm.is_particle()));
        m.insert(dm.upper(), (dm.kind, false));
    }
    m
}

/// Rows top to bottom, two characters per square, primed rows shifted by
/// one character. Particle feet are upper-case; removed squares are "..".
pub fn render_ascii(tl: &DominoTiling) -> String {
    let width = tl.extent() + 2;
    let m = cells(tl, width);
    let mut s = String::new();
    let rows = (tl.t + tl.n) as i64;
    for y in (2..=2 * rows + 1).rev() {
        let primed = y % 2 == 1;
        if primed {
            s.push(' ');
        }
        for j in 1..=width {
            let x = if primed { 2 * j + 1 } else { 2 * j };
            match m.get(&(x, y)) {
                Some((k, foot)) => {
                    let c = if *foot { k.letter().to_ascii_uppercase() } else { k.letter() };
                    s.push(c);
                    s.push(' ');
                }
                None if y == 2 && j <= tl.n as i64 => s.push_str(".."),
                None => s.push_str("  "),
            }
        }
        while s.ends_with(' ') {
            s.pop();
        }
        s.push('\n');
    }
    s
}

/// SVG 1.1 with one class per domino type and dots on particle feet.
pub fn render_svg(tl: &DominoTiling) -> String {
    const U: i64 = 10;
    let width = tl.extent() + 2;
    let rows = (tl.t + tl.n) as i64;
    let ymax = 2 * rows + 2;
    let w_px = (2 * width + 3) * U;
    let h_px = (ymax + 1) * U;
    let px = |x: i64, y: i64| (x * U, (ymax - y) * U);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w_px}" height="{h_px}" viewBox="0 0 {w_px} {h_px}">"#
    );
    let _ = writeln!(
        s,
        "<style>.a{{fill:#f2d0a4}}.b{{fill:#a4c8f2}}.c{{fill:#c9f2a4}}.d{{fill:#f2a4c8}}polygon{{stroke:#333;stroke-width:1}}circle{{fill:#1a3fa0}}</style>"
    );
    for dm in tl.dominoes(width) {
        let (x, y) = (dm.x, dm.y);
        let corners = match dm.orient {
            Orient::Ne => [(x - 1, y), (x, y - 1), (x + 2, y + 1), (x + 1, y + 2)],
            Orient::Nw => [(x + 1, y), (x, y - 1), (x - 2, y + 1), (x - 1, y + 2)],
        };
        let pts: Vec<String> = corners
            .iter()
            .map(|&(a, b)| {
                let (p, q) = px(a, b);
                format!("{p},{q}")
            })
            .collect();
        let _ = writeln!(s, r#"<polygon class="{}" points="{}"/>"#, dm.kind.letter(), pts.join(" "));
    }
    for dm in tl.dominoes(width).iter().filter(|d| d.is_particle()) {
        let (cx, cy) = px(dm.x, dm.y);
        let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

/// Every ascending chain λ^(1..T) with N parts bounded by `cap` that admits a
/// tiling, paired with every admissible exit chain μ.
pub fn admissible_chains(t: usize, n: usize, cap: i64) -> Vec<(Vec<Signature>, Vec<Signature>)> {
    let sigs = crate::params::all_signatures(n, cap);
    let mut chains: Vec<Vec<Signature>> = vec![vec![]];
    for _ in 0..t {
        let mut next = Vec::new();
        for c in &chains {
            let prev = c.last().cloned().unwrap_or_else(|| Signature::zero(n));
            for s in &sigs {
                if !layer_pair_exists(&prev.points(), &s.points(), false) {
                    continue;
                }
                let mut c2 = c.clone();
                c2.push(s.clone());
                next.push(c2);
            }
        }
        chains = next;
    }
    let mut out = Vec::new();
    for c in chains {
        for mus in exit_chains(c.last().unwrap()) {
            out.push((c.clone(), mus));
        }
    }
    out
}

fn layer_pair_exists(a: &[i64], b: &[i64], exit: bool) -> bool {
    !layer_lifts(a, b, exit).is_empty()
}

/// Exit chains μ^(N−1), …, μ^(1) below λ that admit a tiling.
pub fn exit_chains(lam: &Signature) -> Vec<Vec<Signature>> {
    let mut out = vec![(lam.clone(), vec![])];
    for _ in 1..lam.len() {
        let mut next = Vec::new();
        for (cur, acc) in &out {
            for mu in crate::process::interlacing_below(cur) {
                if layer_pair_exists(&cur.points(), &mu.points(), true) {
                    let mut a: Vec<Signature> = acc.clone();
                    a.push(mu.clone());
                    next.push((mu, a));
                }
            }
        }
        out = next;
    }
    out.into_iter().map(|(_, a)| a).collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{q, qi};
    use crate::process::tests::{test_columns, test_process};
    use proptest::prelude::*;

    fn sig(p: &[i64]) -> Signature {
        Signature::new(p.to_vec()).unwrap()
    }

    fn six_from(a: [i64; 5]) -> SixWeights {
        // c2 fixed by the free-fermion relation
        let [a1, a2, b1, b2, c1] = a.map(|v| qi(v));
        let c2 = (&a1 * &a2 + &b1 * &b2) / &c1;
        [a1, a2, b1, b2, c1, c2]
    }

    #[test]
    fn split_reproduces_six_vertex_weights() {
        let w = six_from([3, -2, 5, 7, 4]);
        assert_eq!(check_split(&w).unwrap(), None);
        let p = six_to_five(&w).unwrap();
        assert_eq!(five_to_six(&p).unwrap(), w);
        // I1 = I2 = J1 = 1: both exit patterns give a2
        assert_eq!(stacked_weight(&p, 1, 1, 1, 1, 0), w[1]);
        assert_eq!(stacked_weight(&p, 1, 1, 1, 0, 1), w[1]);
        // two outgoing arrows are impossible
        assert!(stacked_weight(&p, 1, 1, 0, 1, 1).is_zero());
        // I1 = 0, J1 = 1, I2 = 1 collects two stacked configurations
        assert_eq!(stacked_weight(&p, 0, 1, 1, 0, 0), w[5]);
        let mut bad = w.clone();
        bad[4] = Q::zero();
        assert!(matches!(six_to_five(&bad), Err(Error::Degenerate(_))));
    }

    #[test]
    fn split_of_model_weights() {
        let col = test_columns();
        for (x, r) in [(q(17, 20), q(7, 10)), (q(1, 20), q(1, 6))] {
            let row = RowParam::new(x, &r);
            for j in 1..=4 {
                let vp = VertexParams::at(&row, &col, j);
                for w in [six(|e| w_weight(e, &vp)).unwrap(), six(|e| what_weight(e, &vp)).unwrap()] {
                    assert_eq!(check_split(&w).unwrap(), None);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn split_holds_for_random_weights(a in prop::array::uniform5(-9i64..9)) {
            prop_assume!(a[4] != 0);
            let w = six_from(a);
            prop_assert_eq!(check_split(&w).unwrap(), None);
        }
    }

    #[test]
    fn worked_example_particles() {
        let lambdas = [sig(&[0, 0, 0]), sig(&[1, 0, 0]), sig(&[3, 2, 0]), sig(&[4, 2, 0])];
        let mus = [sig(&[2, 0]), sig(&[1])];
        let tl = DominoTiling::from_signatures(&lambdas, &mus).unwrap();
        let parts = tl.particles();
        for k in 1..=4 {
            let layer: Vec<i64> = parts.iter().filter(|p| p.0 == k).map(|p| p.1).collect();
            assert_eq!(layer, lambdas[k - 1].points());
        }
        let counts: Vec<usize> = (1..7).map(|k| parts.iter().filter(|p| p.0 == k).count()).collect();
        assert_eq!(counts, vec![3, 3, 3, 3, 2, 1]);
        let (l2, m2) = tl.to_signatures().unwrap();
        assert_eq!(l2, lambdas.to_vec());
        assert_eq!(m2, mus.to_vec());
        let ascii = render_ascii(&tl);
        let feet = ascii.lines().rev().take(8).map(|l| l.chars().filter(|c| c.is_ascii_uppercase()).count());
        assert_eq!(feet.collect::<Vec<_>>(), vec![0, 3, 0, 3, 0, 3, 0, 3]);
    }

    #[test]
    fn zero_signatures_give_bricks() {
        let tl = DominoTiling::from_signatures(&vec![Signature::zero(2); 3], &[sig(&[0])]).unwrap();
        let doms = tl.dominoes(tl.extent() + 3);
        for dm in &doms {
            let (_, i) = dm.primed();
            if dm.is_particle() {
                continue;
            }
            let want = if i <= 3 { DominoType::A } else { DominoType::B };
            assert_eq!(dm.kind, want, "{dm:?}");
        }
        assert!(doms.iter().filter(|d| d.is_particle()).all(|d| d.kind == DominoType::C));
        let empty = DominoTiling::from_signatures(&vec![Signature::empty(); 2], &[]).unwrap();
        assert!(empty.dominoes(4).iter().all(|d| d.kind == DominoType::A));
        assert!(!render_ascii(&empty).contains(['c', 'd', 'C', 'D']));
    }

    #[test]
    fn layers_avoid_forbidden_vertices() {
        let lam = admissible_chains(2, 2, 3);
        for (lambdas, mus) in lam {
            for tl in DominoTiling::all_lifts(&lambdas, &mus).unwrap() {
                let rows = tl.t + tl.n;
                for i in 0..rows {
                    let next: &[i64] = if i + 1 < rows { &tl.d[i + 1] } else { &[] };
                    let (lo, up) = layer_states(&tl.d[i], &tl.u[i], next, tl.extent() + 2);
                    assert!(lo.iter().all(|e| e.conserving() && *e != EdgeState::new(1, 1, 1, 1)));
                    assert!(up.iter().all(|e| e.conserving() && *e != EdgeState::new(0, 1, 0, 1)));
                }
            }
        }
    }

    /// Signature chains (λ's, μ's) admitted by the six-vertex rows, with
    /// λ_1 ≤ cap.
    #[test]
    fn round_trips_exhaustive() {
        for (t, n) in [(1, 1), (2, 2), (3, 2), (2, 3)] {
            for (lambdas, mus) in admissible_chains(t, n, if n < 3 { 4 } else { 3 }) {
                let canon = DominoTiling::from_signatures(&lambdas, &mus).unwrap();
                assert_eq!(canon.to_signatures().unwrap(), (lambdas.clone(), mus.clone()));
                let again = canon.to_signatures().unwrap();
                assert_eq!(DominoTiling::from_signatures(&again.0, &again.1).unwrap(), canon);
                for tl in DominoTiling::all_lifts(&lambdas, &mus).unwrap() {
                    assert_eq!(tl.to_signatures().unwrap(), (lambdas.clone(), mus.clone()));
                    let js = serde_json::to_string(&tl.to_json()).unwrap();
                    let back: TilingJson = serde_json::from_str(&js).unwrap();
                    assert_eq!(DominoTiling::from_json(&back).unwrap(), tl);
                }
            }
        }
    }

    #[test]
    fn inadmissible_sequences_error() {
        // a path cannot move left
        let r = DominoTiling::from_signatures(&[sig(&[2, 0]), sig(&[1, 0])], &[sig(&[0])]);
        assert!(matches!(r, Err(Error::InvalidSignature(_))));
        let r = DominoTiling::from_signatures(&[sig(&[2, 0])], &[]);
        assert!(r.is_err());
    }

    #[test]
    fn row_splits_preserve_row_weights() {
        let p = test_process();
        for (a, b) in [(vec![2, 1], vec![4, 2]), (vec![4, 2], vec![6, 4]), (vec![3, 1], vec![5, 3])] {
            let lifts = layer_lifts(&a, &b, false);
            assert!(!lifts.is_empty());
            let row = p.w.row(0);
            let six_w = six_vertex_row_weight(&a, &b, RowKind::G, &row, &p.col).unwrap();
            let mut sum = Q::zero();
            for u in lifts {
                let (lo, up) = layer_states(&a, &u, &b, 8);
                let mut w = Q::one();
                for j in 1..=8 {
                    let vp = VertexParams::at(&row, &p.col, j);
                    let pair = six_to_five(&six(|e| w_weight(e, &vp)).unwrap()).unwrap();
                    w *= weight_at(&pair.lower, lo[j as usize - 1]) * weight_at(&pair.upper, up[j as usize - 1]);
                }
                sum += w;
            }
            assert_eq!(sum, six_w);
        }
    }

    #[test]
    fn tiling_weights_sum_to_process_weights() {
        let p = test_process();
        let c = gauge_constant(&p).unwrap();
        for (lambdas, mus) in admissible_chains(2, 2, 3) {
            let _ = mus;
            // sum over all μ's and all layer splits
            let mut total = Q::zero();
            let mut six_total = Q::zero();
            for m in exit_chains(lambdas.last().unwrap()) {
                for tl in DominoTiling::all_lifts(&lambdas, &m).unwrap() {
                    let w = tiling_weight(&tl, &p).unwrap();
                    assert_eq!(w, &c * five_vertex_weight(&tl, &p).unwrap());
                    total += w;
                }
                let canon = DominoTiling::from_signatures(&lambdas, &m).unwrap();
                six_total += six_vertex_weight(&canon, &p).unwrap();
            }
            let raw = p.raw_weight(&lambdas).unwrap();
            assert_eq!(six_total, raw, "{lambdas:?}");
            assert_eq!(total, &c * &raw, "{lambdas:?}");
        }
    }

    #[test]
    fn weight_ratio_matches_process_ratio() {
        let p = test_process();
        let l1 = [sig(&[1, 0]), sig(&[2, 1])];
        let l2 = [sig(&[0, 0]), sig(&[3, 0])];
        let sum = |l: &[Signature]| {
            let mut s = Q::zero();
            for m in exit_chains(l.last().unwrap()) {
                for tl in DominoTiling::all_lifts(l, &m).unwrap() {
                    s += tiling_weight(&tl, &p).unwrap();
                }
            }
            s
        };
        let r = sum(&l1) / sum(&l2);
        assert_eq!(r, p.ascending_weight(&l1).unwrap() / p.ascending_weight(&l2).unwrap());
    }

    #[test]
    fn repeated_dominoes_weigh_one() {
        let p = test_process();
        let tl = DominoTiling::from_signatures(&[sig(&[1, 0]), sig(&[2, 1])], &[sig(&[1])]).unwrap();
        let far = tl.extent() + p.col.tail_start() + 3;
        for dm in tl.dominoes(far) {
            if dm.primed().0 > tl.extent() + 1 {
                assert_eq!(domino_weight(&dm, &p).unwrap(), Q::one(), "{dm:?}");
            }
        }
    }

    #[test]
    fn frozen_tiling_weight() {
        // all-zero λ's with the minimal μ's: direct product of row weights
        let p = test_process();
        let tl = DominoTiling::from_signatures(&vec![Signature::zero(2); 2], &[sig(&[0])]).unwrap();
        let w = tiling_weight(&tl, &p).unwrap();
        let mut direct = Q::one();
        for dm in tl.dominoes(tl.extent() + 4) {
            direct *= domino_weight(&dm, &p).unwrap();
        }
        assert_eq!(w, direct);
        assert_eq!(w, gauge_constant(&p).unwrap() * six_vertex_weight(&tl, &p).unwrap());
    }

    #[test]
    fn sampled_tilings_round_trip() {
        let p = test_process();
        let mut svgs = Vec::new();
        for seed in 0..100 {
            let tl = sample_tiling(&p, 16, q(1, 1000), seed).unwrap();
            let (l, m) = tl.to_signatures().unwrap();
            let back = DominoTiling::from_signatures(&l, &m).unwrap();
            assert_eq!(back.to_signatures().unwrap(), (l, m));
            assert!(tiling_weight(&tl, &p).unwrap() > Q::zero());
            if seed == 7 {
                svgs.push(render_svg(&tl));
            }
        }
        let svg = &svgs[0];
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(sample_tiling(&p, 16, q(1, 1000), 7).map(|t| render_svg(&t)).unwrap(), *svg);
    }

    #[test]
    fn svg_golden_checksum() {
        use sha2::{Digest, Sha256};
        let p = test_process();
        let svg = render_svg(&sample_tiling(&p, 16, q(1, 1000), 2024).unwrap());
        let digest = hex::encode(Sha256::digest(svg.as_bytes()));
        assert_eq!(digest, "f08f09fce87e299fb80b8b336109dea20e2d2db69b13adf4bf5da2b4c020a7e7");
    }
}
