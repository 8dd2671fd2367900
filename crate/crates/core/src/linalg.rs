//! Small dense exact linear algebra.

use crate::params::Q;
use crate::{Error, Result};
use num::{One, Zero};

pub type Matrix = Vec<Vec<Q>>;

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect()
}

pub fn det(m: &Matrix) -> Q {
    let n = m.len();
    if n == 0 {
        return Q::one();
    }
    let mut a = m.clone();
    let mut sign = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            a.swap(p, c);
            sign = -sign;
        }
        let piv = a[c][c].clone();
        for r in c + 1..n {
            if a[r][c].is_zero() {
                continue;
            }
            let f = &a[r][c] / &piv;
            for k in c..n {
                let t = &f * &a[c][k];
                a[r][k] -= t;
            }
        }
    }
    (0..n).fold(sign, |acc, i| acc * &a[i][i])
}

pub fn inverse(m: &Matrix) -> Result<Matrix> {
    let n = m.len();
    let mut a = m.clone();
    let mut b = identity(n);
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero()).ok_or_else(|| Error::Degenerate("singular matrix".into()))?;
        a.swap(p, c);
        b.swap(p, c);
        let piv = a[c][c].recip();
        for k in 0..n {
            a[c][k] *= &piv;
            b[c][k] *= &piv;
        }
        for r in 0..n {
            if r == c || a[r][c].is_zero() {
                continue;
            }
            let f = a[r][c].clone();
            for k in 0..n {
                let t = &f * &a[c][k];
                a[r][k] -= t;
                let t = &f * &b[c][k];
                b[r][k] -= t;
            }
        }
    }
    Ok(b)
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b.first().map_or(0, |r| r.len());
    let k = b.len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).fold(Q::zero(), |s, l| s + &a[i][l] * &b[l][j])).collect())
        .collect()
}

/// All permutations of 0..n paired with their signs.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, i64)> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    fn rec(k: usize, p: &mut Vec<usize>, sign: i64, out: &mut Vec<(Vec<usize>, i64)>) {
        if k == p.len() {
            out.push((p.clone(), sign));
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            rec(k + 1, p, if i == k { sign } else { -sign }, out);
            p.swap(k, i);
        }
    }
    rec(0, &mut p, 1, &mut out);
    out
}

/// k-element subsets of 0..n in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{q, qi};

    #[test]
    fn det_and_inverse() {
        let m = vec![vec![qi(2), qi(1), qi(0)], vec![qi(1), qi(3), q(1, 2)], vec![qi(0), qi(4), qi(5)]];
        let by_perm = permutations(3).iter().fold(Q::zero(), |s, (p, sg)| {
            s + (0..3).fold(qi(*sg), |acc, i| acc * &m[i][p[i]])
        });
        assert_eq!(det(&m), by_perm);
        let inv = inverse(&m).unwrap();
        assert_eq!(matmul(&m, &inv), identity(3));
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(subsets(5, 2).len(), 10);
    }
}
