//! Rationals, signatures, column/row parameters and the predicates that make
//! the measures well defined.

use crate::{Error, Result};
use num::bigint::BigInt;
use num::{BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Parses "p/q", "p" or a finite decimal such as "0.85".
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((a, b)) = s.split_once('/') {
        let n: BigInt = a.trim().parse().map_err(|_| bad())?;
        let d: BigInt = b.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches(['-', '+']), fp);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num::pow(BigInt::from(10), fp.len());
        let v = Q::new(n, d);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

/// "p/q" (or "p" for integers).
pub fn fmt_q(v: &Q) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

pub fn to_f64(v: &Q) -> f64 {
    match (v.numer().to_f64(), v.denom().to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            // huge numerator/denominator: shift both down first
            let nb = v.numer().bits() as i64;
            let db = v.denom().bits() as i64;
            let shift = (nb.max(db) - 900).max(0) as usize;
            let a = (v.numer() >> shift).to_f64().unwrap_or(0.0);
            let b = (v.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
            a / b
        }
    }
}

/// 15 significant digits, locale independent.
pub fn fmt_dec(v: &Q) -> String {
    format!("{:.15e}", to_f64(v))
}

pub fn inv(v: &Q) -> Result<Q> {
    if v.is_zero() {
        Err(Error::Degenerate("division by zero".into()))
    } else {
        Ok(v.recip())
    }
}

/// λ_1 ≥ … ≥ λ_N ≥ 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    parts: Vec<i64>,
}

impl Signature {
    pub fn new(parts: Vec<i64>) -> Result<Self> {
        if parts.iter().any(|&p| p < 0) {
            return Err(Error::InvalidSignature(format!("negative part in {parts:?}")));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidSignature(format!("{parts:?} is not nonincreasing")));
        }
        Ok(Signature { parts })
    }

    pub fn zero(n: usize) -> Self {
        Signature { parts: vec![0; n] }
    }

    pub fn empty() -> Self {
        Signature { parts: vec![] }
    }

    pub fn parts(&self) -> &[i64] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn part(&self, i: usize) -> i64 {
        self.parts[i - 1]
    }

    pub fn size(&self) -> i64 {
        self.parts.iter().sum()
    }

    pub fn first(&self) -> i64 {
        self.parts.first().copied().unwrap_or(0)
    }

    /// S(λ) = {λ_i + N + 1 − i}, listed in decreasing order.
    pub fn points(&self) -> Vec<i64> {
        let n = self.len() as i64;
        self.parts.iter().enumerate().map(|(i, &p)| p + n - i as i64).collect()
    }

    pub fn point_set(&self) -> BTreeSet<i64> {
        self.points().into_iter().collect()
    }

    pub fn from_points<I: IntoIterator<Item = i64>>(pts: I) -> Result<Self> {
        let mut v: Vec<i64> = pts.into_iter().collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSignature(format!("repeated point in {v:?}")));
        }
        if v.iter().any(|&p| p < 1) {
            return Err(Error::InvalidSignature(format!("non-positive point in {v:?}")));
        }
        let n = v.len() as i64;
        Signature::new(v.iter().enumerate().map(|(i, &p)| p - n + i as i64).collect())
    }

    /// Durfee-type index d with λ_d ≥ d > λ_{d+1}.
    pub fn durfee(&self) -> usize {
        self.parts.iter().enumerate().take_while(|(i, &p)| p > *i as i64).count()
    }

    /// Transposed partition (columns lengths).
    pub fn conjugate(&self) -> Vec<i64> {
        (1..=self.first()).map(|c| self.parts.iter().filter(|&&p| p >= c).count() as i64).collect()
    }

    /// μ ⊆ λ as Young diagrams (same length assumed for comparison purposes).
    pub fn contains(&self, mu: &Signature) -> bool {
        mu.parts.iter().enumerate().all(|(i, &m)| self.parts.get(i).copied().unwrap_or(0) >= m)
    }

    /// λ_{i+1} ≤ μ_i ≤ λ_i for all i (λ ⪰ μ, equal lengths).
    pub fn interlaces_over(&self, mu: &Signature) -> bool {
        self.len() == mu.len()
            && (0..self.len()).all(|i| {
                mu.parts[i] <= self.parts[i] && (i + 1 >= self.len() || mu.parts[i] >= self.parts[i + 1])
            })
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

pub fn signature_points(lambda: &Signature) -> Vec<i64> {
    lambda.points()
}

pub fn points_to_signature(points: &[i64]) -> Result<Signature> {
    Signature::from_points(points.iter().copied())
}

/// All signatures with `n` parts and λ_1 ≤ `max_part`, lexicographically.
pub fn all_signatures(n: usize, max_part: i64) -> Vec<Signature> {
    fn rec(n: usize, cap: i64, cur: &mut Vec<i64>, out: &mut Vec<Signature>) {
        if cur.len() == n {
            out.push(Signature { parts: cur.clone() });
            return;
        }
        for p in 0..=cap {
            cur.push(p);
            rec(n, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, max_part, &mut Vec::new(), &mut out);
    out
}

/// Column parameters y_j, s_j with constant tails. Indices j ≥ 1 are the main
/// sequence; j ≤ 0 are read from the optional negative-index list (index 0
/// first), which only the Fock layer uses.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnParams {
    pub y: Vec<Q>,
    pub s: Vec<Q>,
    pub y_tail: Q,
    pub s_tail: Q,
    pub y_neg: Vec<Q>,
    pub s_neg: Vec<Q>,
    pub y_neg_tail: Q,
    pub s_neg_tail: Q,
}

impl ColumnParams {
    pub fn new(y: Vec<Q>, s: Vec<Q>, y_tail: Q, s_tail: Q) -> Self {
        ColumnParams {
            y,
            s,
            y_neg: vec![],
            s_neg: vec![],
            y_neg_tail: y_tail.clone(),
            s_neg_tail: s_tail.clone(),
            y_tail,
            s_tail,
        }
    }

    pub fn homogeneous(y: Q, s: Q) -> Self {
        Self::new(vec![], vec![], y, s)
    }

    pub fn with_negative(mut self, y_neg: Vec<Q>, s_neg: Vec<Q>, y_neg_tail: Q, s_neg_tail: Q) -> Self {
        self.y_neg = y_neg;
        self.s_neg = s_neg;
        self.y_neg_tail = y_neg_tail;
        self.s_neg_tail = s_neg_tail;
        self
    }

    pub fn y(&self, j: i64) -> Q {
        if j >= 1 {
            self.y.get(j as usize - 1).unwrap_or(&self.y_tail).clone()
        } else {
            self.y_neg.get((-j) as usize).unwrap_or(&self.y_neg_tail).clone()
        }
    }

    pub fn s(&self, j: i64) -> Q {
        if j >= 1 {
            self.s.get(j as usize - 1).unwrap_or(&self.s_tail).clone()
        } else {
            self.s_neg.get((-j) as usize).unwrap_or(&self.s_neg_tail).clone()
        }
    }

    pub fn s2(&self, j: i64) -> Q {
        let s = self.s(j);
        &s * &s
    }

    pub fn sm2(&self, j: i64) -> Q {
        self.s2(j).recip()
    }

    /// s_j^{-2} y_j.
    pub fn ys(&self, j: i64) -> Q {
        self.y(j) * self.sm2(j)
    }

    /// Index after which all positive-index values are the tail.
    pub fn tail_start(&self) -> i64 {
        self.y.len().max(self.s.len()) as i64 + 1
    }

    /// Distinct (y_j, s_j) pairs for j ≥ 1: the materialized ones plus the tail.
    pub fn distinct_pairs(&self) -> Vec<(Q, Q)> {
        let mut out: Vec<(Q, Q)> = Vec::new();
        for j in 1..=self.tail_start() {
            let p = (self.y(j), self.s(j));
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    /// 0 < s_j < 1 and y_j > 0 on every materialized index and the tails.
    pub fn validate(&self) -> Result<()> {
        let zero = Q::zero();
        let one = Q::one();
        let all_y = self.y.iter().chain(self.y_neg.iter()).chain([&self.y_tail, &self.y_neg_tail]);
        let all_s = self.s.iter().chain(self.s_neg.iter()).chain([&self.s_tail, &self.s_neg_tail]);
        for y in all_y {
            if *y <= zero {
                return Err(Error::Ordering(format!("y = {} must be positive", fmt_q(y))));
            }
        }
        for s in all_s {
            if *s <= zero || *s >= one {
                return Err(Error::Ordering(format!("s = {} must lie in (0,1)", fmt_q(s))));
            }
        }
        Ok(())
    }
}

/// One row parameter pair, with the spin stored as r^{-2} so that square
/// roots never have to be taken.
#[derive(Clone, Debug, PartialEq)]
pub struct RowParam {
    pub x: Q,
    pub rm2: Q,
}

impl RowParam {
    pub fn new(x: Q, r: &Q) -> Self {
        RowParam { x, rm2: (r * r).recip() }
    }

    pub fn from_rm2(x: Q, rm2: Q) -> Self {
        RowParam { x, rm2 }
    }

    pub fn rx(&self) -> Q {
        &self.rm2 * &self.x
    }
}

/// Row specialization (x_i, r_i) or (w_i, θ_i).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RowSpec {
    pub values: Vec<Q>,
    pub spins: Vec<Q>,
}

impl RowSpec {
    pub fn new(values: Vec<Q>, spins: Vec<Q>) -> Result<Self> {
        if values.len() != spins.len() {
            return Err(Error::Other(format!(
                "row values and spins differ in length: {} values, {} spins",
                values.len(),
                spins.len()
            )));
        }
        if spins.iter().any(|s| s.is_zero()) {
            return Err(Error::Degenerate("zero spin".into()));
        }
        Ok(RowSpec { values, spins })
    }

    pub fn empty() -> Self {
        RowSpec::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rows(&self) -> Vec<RowParam> {
        self.values.iter().zip(&self.spins).map(|(x, r)| RowParam::new(x.clone(), r)).collect()
    }

    pub fn row(&self, i: usize) -> RowParam {
        RowParam::new(self.values[i].clone(), &self.spins[i])
    }

    pub fn prefix(&self, k: usize) -> RowSpec {
        RowSpec { values: self.values[..k].to_vec(), spins: self.spins[..k].to_vec() }
    }
}

/// x_i < y_j < r_i^{-2} x_i < s_j^{-2} y_j for all i and all distinct column
/// pairs (materialized plus tail); with `allow_negative_x` the lower bound
/// 0 < x_i is waived.
pub fn is_nonnegative_spec(row: &RowSpec, col: &ColumnParams, allow_negative_x: bool) -> bool {
    let pairs = col.distinct_pairs();
    row.rows().iter().all(|rp| {
        if !allow_negative_x && rp.x <= Q::zero() {
            return false;
        }
        let rx = rp.rx();
        pairs.iter().all(|(y, s)| {
            let ys = y / (s * s);
            rp.x < *y && *y < rx && rx < ys
        })
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Compatibility {
    pub compatible: bool,
    /// max over i, j of the tail ratio; δ = 1 − ratio.
    pub ratio: Q,
}

impl Compatibility {
    pub fn delta(&self) -> Q {
        Q::one() - &self.ratio
    }
}

/// Tail ratio |((s⁻²y−x)/(y−x))·((y−w)/(s⁻²y−w))| maximized over x ∈ ρ, w ∈ ρ′.
pub fn is_compatible(rho: &RowSpec, rho_prime: &RowSpec, col: &ColumnParams) -> Result<Compatibility> {
    let y = &col.y_tail;
    let ys = y / (&col.s_tail * &col.s_tail);
    let mut best = Q::zero();
    for x in &rho.values {
        for w in &rho_prime.values {
            let d1 = y - x;
            let d2 = &ys - w;
            if d1.is_zero() || d2.is_zero() {
                return Err(Error::Degenerate(format!(
                    "tail ratio denominator vanishes at x = {}, w = {}",
                    fmt_q(x),
                    fmt_q(w)
                )));
            }
            let r = ((&ys - x) / d1 * (y - w) / d2).abs();
            if r > best {
                best = r;
            }
        }
    }
    Ok(Compatibility { compatible: best < Q::one(), ratio: best })
}

/// JSON parameter bank; rationals are strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BankJson {
    #[serde(default)]
    pub y: Vec<String>,
    #[serde(default)]
    pub s: Vec<String>,
    pub y_tail: String,
    pub s_tail: String,
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub r: Vec<String>,
    #[serde(default)]
    pub w: Vec<String>,
    #[serde(default)]
    pub theta: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamBank {
    pub col: ColumnParams,
    pub x: RowSpec,
    pub w: RowSpec,
}

impl ParamBank {
    pub fn from_json(text: &str) -> Result<Self> {
        let b: BankJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let pv = |v: &[String]| v.iter().map(|s| parse_q(s)).collect::<Result<Vec<Q>>>();
        let col = ColumnParams::new(pv(&b.y)?, pv(&b.s)?, parse_q(&b.y_tail)?, parse_q(&b.s_tail)?);
        col.validate()?;
        Ok(ParamBank { col, x: RowSpec::new(pv(&b.x)?, pv(&b.r)?)?, w: RowSpec::new(pv(&b.w)?, pv(&b.theta)?)? })
    }

    pub fn to_json(&self) -> String {
        let f = |v: &[Q]| v.iter().map(fmt_q).collect::<Vec<_>>();
        let b = BankJson {
            y: f(&self.col.y),
            s: f(&self.col.s),
            y_tail: fmt_q(&self.col.y_tail),
            s_tail: fmt_q(&self.col.s_tail),
            x: f(&self.x.values),
            r: f(&self.x.spins),
            w: f(&self.w.values),
            theta: f(&self.w.spins),
        };
        serde_json::to_string_pretty(&b).expect("bank serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_roundtrip_exhaustive() {
        for n in 0..=6 {
            for lam in all_signatures(n, if n > 4 { 5 } else { 10 }) {
                assert_eq!(Signature::from_points(lam.points()).unwrap(), lam);
            }
        }
    }

    #[test]
    fn points_examples() {
        assert_eq!(Signature::new(vec![3, 1]).unwrap().points(), vec![5, 2]);
        assert_eq!(Signature::zero(3).points(), vec![3, 2, 1]);
        assert!(Signature::empty().points().is_empty());
        assert!(points_to_signature(&[2, 2]).is_err());
        assert!(points_to_signature(&[0, 1]).is_err());
    }

    #[test]
    fn nonnegative_spec_examples() {
        let col = ColumnParams::homogeneous(qi(1), q(1, 2));
        let row = RowSpec::new(vec![q(1, 3)], vec![q(1, 2)]).unwrap();
        assert!(is_nonnegative_spec(&row, &col, false));
        let bad = RowSpec::new(vec![qi(2)], vec![q(1, 2)]).unwrap();
        assert!(!is_nonnegative_spec(&bad, &col, false));
        assert!(is_nonnegative_spec(&RowSpec::empty(), &col, false));
    }

    #[test]
    fn compatibility_examples() {
        let col = ColumnParams::homogeneous(qi(1), q(1, 2));
        let x = RowSpec::new(vec![q(1, 3)], vec![q(1, 2)]).unwrap();
        let w = RowSpec::new(vec![q(1, 2)], vec![q(1, 2)]).unwrap();
        let c = is_compatible(&x, &w, &col).unwrap();
        assert!(c.compatible);
        assert_eq!(c.ratio, q(11, 14));
        let c = is_compatible(&x, &x, &col).unwrap();
        assert_eq!(c.ratio, qi(1));
        assert!(!c.compatible);
        assert!(is_compatible(&x, &RowSpec::empty(), &col).unwrap().compatible);
    }

    #[test]
    fn durfee_and_parse() {
        assert_eq!(Signature::new(vec![3, 2, 0]).unwrap().durfee(), 2);
        assert_eq!(Signature::new(vec![0, 0]).unwrap().durfee(), 0);
        assert_eq!(parse_q("-3/6").unwrap(), q(-1, 2));
        assert_eq!(parse_q("0.85").unwrap(), q(17, 20));
        assert_eq!(fmt_q(&q(4, 2)), "2");
    }

    #[test]
    fn bank_json_roundtrip() {
        let text = r#"{"y":["1","9/10"],"s":["1/2"],"y_tail":"1","s_tail":"1/2",
            "x":["1/3"],"r":["1/2"],"w":["1/2"],"theta":["4/5"]}"#;
        let b = ParamBank::from_json(text).unwrap();
        assert_eq!(b.col.y(2), q(9, 10));
        assert_eq!(b.col.s(5), q(1, 2));
        assert_eq!(ParamBank::from_json(&b.to_json()).unwrap(), b);
    }
}
