//! F_λ, G_λ and their skew versions as partition functions and through closed
//! formulas; the φ/ψ system; Cauchy identities; Schur-type specializations.

use crate::linalg::{det, permutations, subsets, Matrix};
use crate::params::{all_signatures, fmt_q, q, qi, ColumnParams, RowParam, RowSpec, Signature, Q};
use crate::ratfun::{FactoredRational, PoleSet};
use crate::vertex::{apply_hat_op, apply_op, row_transfer, EdgeState, Op, WindowVector};
use crate::{Error, Result};
use num::{One, Signed, Zero};
use std::collections::HashMap;

// ---------------------------------------------------------------- φ and ψ

/// φ_k(z) = 1/(y_{k+1} − z) ∏_{j≤k} (z − s_j⁻²y_j)/(z − y_j).
pub fn phi_fr(k: i64, col: &ColumnParams) -> FactoredRational {
    let mut f = FactoredRational::constant(-Q::one());
    f.mul_linear(col.y(k + 1), -1);
    for j in 1..=k {
        f.mul_linear(col.ys(j), 1);
        f.mul_linear(col.y(j), -1);
    }
    f
}

/// ψ_k(z) = y_{k+1}(s_{k+1}²−1)/(y_{k+1} − s_{k+1}²z) ∏_{j≤k} s_j²(y_j − z)/(y_j − s_j²z).
pub fn psi_fr(k: i64, col: &ColumnParams) -> FactoredRational {
    let mut f = FactoredRational::constant(col.y(k + 1) * (col.sm2(k + 1) - Q::one()));
    f.mul_linear(col.ys(k + 1), -1);
    for j in 1..=k {
        f.mul_linear(col.y(j), 1);
        f.mul_linear(col.ys(j), -1);
    }
    f
}

pub fn phi(k: i64, x: &Q, col: &ColumnParams) -> Result<Q> {
    phi_fr(k, col).eval(x)
}

pub fn psi(k: i64, x: &Q, col: &ColumnParams) -> Result<Q> {
    psi_fr(k, col).eval(x)
}

/// Contour around y_1, …, y_n (and the tail value when n reaches it).
pub fn y_poles(col: &ColumnParams, n: i64) -> PoleSet {
    PoleSet::new((1..=n.max(col.tail_start())).map(|j| col.y(j)))
}

/// Contour around all y_j and the given extra points (such as the w's).
pub fn yw_poles(col: &ColumnParams, n: i64, w: &[Q]) -> PoleSet {
    let mut p = y_poles(col, n);
    p.enclosed.extend(w.iter().cloned());
    p
}

/// ∮ φ_k ψ_l around the y's; equals 𝟙_{k=l}.
pub fn phi_psi_pairing(k: i64, l: i64, col: &ColumnParams) -> Q {
    phi_fr(k, col).mul(&psi_fr(l, col)).contour_integral(&y_poles(col, k.max(l) + 1))
}

pub fn check_phi_psi_orthogonality(kmax: i64, col: &ColumnParams) -> Option<(i64, i64)> {
    for k in 0..=kmax {
        for l in 0..=kmax {
            let v = phi_psi_pairing(k, l, col);
            let want = if k == l { Q::one() } else { Q::zero() };
            if v != want {
                return Some((k, l));
            }
        }
    }
    None
}

// ------------------------------------------------------- partition functions

fn window_for(parts: usize, first: i64) -> i64 {
    first + parts as i64 + 1
}

/// G_{λ/μ}(x_1..x_k) = ⟨e_{S(λ)}, D(x_k)…D(x_1) e_{S(μ)}⟩.
pub fn g_skew_partition(lambda: &Signature, mu: &Signature, rows: &RowSpec, col: &ColumnParams) -> Result<Q> {
    if lambda.len() != mu.len() {
        return Ok(Q::zero());
    }
    if rows.is_empty() {
        return Ok(if lambda == mu { Q::one() } else { Q::zero() });
    }
    let l = window_for(lambda.len(), lambda.first().max(mu.first()));
    let mut v = WindowVector::basis(1, l, &mu.points())?;
    for rp in rows.rows() {
        v = apply_op(Op::D, &rp, col, &v)?;
    }
    Ok(v.get(&lambda.points()))
}

/// F_{λ/μ}(x_1..x_k) = coefficient of e_{S(λ)} in e_{S(μ)} B̂(x_k)…B̂(x_1),
/// λ with N + k parts and μ with N parts.
pub fn f_skew_partition(lambda: &Signature, mu: &Signature, rows: &RowSpec, col: &ColumnParams) -> Result<Q> {
    if lambda.len() != mu.len() + rows.len() {
        return Ok(Q::zero());
    }
    if rows.is_empty() {
        return Ok(if lambda == mu { Q::one() } else { Q::zero() });
    }
    let l = window_for(lambda.len(), lambda.first().max(mu.first()));
    let mut v = WindowVector::basis(1, l, &mu.points())?;
    for rp in rows.rows().iter().rev() {
        v = apply_hat_op(Op::B, rp, col, &v)?;
    }
    Ok(v.get(&lambda.points()))
}

/// Partition function on [1, L] × rows with arbitrary site weights and the
/// horizontal boundary (hl, hr) in every row; rows listed bottom to top,
/// paths read bottom to top.
pub fn custom_partition(
    bottom: &[i64],
    top: &[i64],
    nrows: usize,
    width: i64,
    hl: u8,
    hr: u8,
    wt: &dyn Fn(usize, i64, EdgeState) -> Result<Q>,
) -> Result<Q> {
    let mut v = WindowVector::basis(1, width, bottom)?;
    for r in 0..nrows {
        let mut out = WindowVector::zero(1, width);
        let f = |site: i64, e: EdgeState| wt(r, site, e);
        for (m, a) in &v.amps {
            for (m2, w) in row_transfer(1, width, *m, hl, hr, false, &f)? {
                out.add_amp(m2, a * w);
            }
        }
        v = out;
    }
    Ok(v.get(top))
}

// ----------------------------------------------------------- closed formulas

fn distinct(xs: &[Q]) -> bool {
    xs.iter().enumerate().all(|(i, a)| xs[i + 1..].iter().all(|b| a != b))
}

/// ∏ x_i(r_i⁻²−1) ∏_{i<j} (r_i⁻²x_i − x_j)/(x_i − x_j).
fn f_prefactor(rows: &[RowParam]) -> Q {
    let mut p = Q::one();
    for (i, a) in rows.iter().enumerate() {
        p *= &a.x * (&a.rm2 - Q::one());
        for b in &rows[i + 1..] {
            p *= (a.rx() - &b.x) / (&a.x - &b.x);
        }
    }
    p
}

/// F_λ through the φ-determinant; repeated x_i fall back to the partition
/// function.
pub fn f_determinant(lambda: &Signature, rows: &RowSpec, col: &ColumnParams) -> Result<Q> {
    let n = lambda.len();
    if rows.len() != n {
        return Err(Error::Other(format!("F_λ needs {n} rows, got {}", rows.len())));
    }
    if !distinct(&rows.values) {
        return f_skew_partition(lambda, &Signature::empty(), rows, col);
    }
    let rp = rows.rows();
    let pts = lambda.points();
    let fs: Vec<FactoredRational> = pts.iter().map(|&k| phi_fr(k - 1, col)).collect();
    let m: Matrix = (0..n).map(|i| (0..n).map(|j| fs[j].eval(&rp[i].x)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    Ok(f_prefactor(&rp) * det(&m))
}

/// F_{0^N} in product form.
pub fn z_closed(rows: &RowSpec, col: &ColumnParams) -> Result<Q> {
    let rp = rows.rows();
    let n = rp.len();
    let mut p = Q::one();
    for i in 0..n {
        p *= &rp[i].x * (&rp[i].rm2 - Q::one());
        for j in i + 1..n {
            p *= (rp[i].rx() - &rp[j].x) * (col.ys(i as i64 + 1) - col.y(j as i64 + 1));
        }
        for j in 0..n {
            let d = col.y(i as i64 + 1) - &rp[j].x;
            if d.is_zero() {
                return Err(Error::Degenerate(format!("y_{} = x_{}", i + 1, j + 1)));
            }
            p /= d;
        }
    }
    Ok(p)
}

/// G_λ in M variables through the double sum over (I, J, σ, ρ).
pub fn g_sergeev_pragacz(lambda: &Signature, rows: &RowSpec, col: &ColumnParams) -> Result<Q> {
    let n = lambda.len();
    let m = rows.len();
    let d = lambda.durfee();
    if d > m {
        return Ok(Q::zero());
    }
    let rp = rows.rows();
    let x: Vec<Q> = rp.iter().map(|r| r.x.clone()).collect();
    let rx: Vec<Q> = rp.iter().map(|r| r.rx()).collect();
    let ni = n as i64;
    let ell: Vec<i64> = (1..=n).map(|h| lambda.part(h) + ni - h as i64 + 1).collect();
    let spts = lambda.point_set();
    let mus: Vec<i64> = (1..=ni).filter(|k| !spts.contains(k)).collect();
    debug_assert_eq!(mus.len(), d);

    let mut pref = Q::one();
    for j in 0..m {
        for k in 1..=ni {
            let s2 = col.s2(k);
            pref *= (col.y(k) - &s2 * &rx[j]) / (col.y(k) - &s2 * &x[j]);
        }
    }
    let hfac = |h: usize, xv: &Q| -> Q {
        let l = ell[h];
        let s2 = col.s2(l);
        let mut v = col.y(l) * (Q::one() - &s2) / (col.y(l) - &s2 * xv);
        for i in ni + 1..l {
            let s2 = col.s2(i);
            v *= &s2 * (col.y(i) - xv) / (col.y(i) - &s2 * xv);
        }
        v
    };
    let mfac = |mm: usize, rxv: &Q| -> Q {
        let mu = mus[mm];
        let s2 = col.s2(mu);
        let mut v = &s2 / (col.y(mu) - &s2 * rxv);
        for k in mu + 1..=ni {
            let s2 = col.s2(k);
            v *= &s2 * (rxv - col.y(k)) / (col.y(k) - &s2 * rxv);
        }
        v
    };
    let mut total = Q::zero();
    let subs = subsets(m, d);
    for ii in &subs {
        let ic: Vec<usize> = (0..m).filter(|i| !ii.contains(i)).collect();
        for jj in &subs {
            let jc: Vec<usize> = (0..m).filter(|j| !jj.contains(j)).collect();
            let mut p = Q::one();
            for &i in &jc {
                for &j in jj {
                    p /= &x[i] - &x[j];
                }
            }
            for (a, &i) in jj.iter().enumerate() {
                for &j in &jj[a + 1..] {
                    p /= &x[j] - &x[i];
                }
            }
            for &i in ii {
                for xj in &x {
                    p *= &rx[i] - xj;
                }
            }
            for &i in &ic {
                for &j in jj {
                    p *= &rx[i] - &x[j];
                }
            }
            for &i in ii {
                for &j in &ic {
                    p /= &rx[i] - &rx[j];
                }
            }
            for (a, &i) in ii.iter().enumerate() {
                for &j in &ii[a + 1..] {
                    p /= &rx[i] - &rx[j];
                }
            }
            let am: Matrix = (0..d).map(|h| (0..d).map(|q_| hfac(h, &x[jj[q_]])).collect()).collect();
            let bm: Matrix = (0..d).map(|mm| (0..d).map(|q_| mfac(mm, &rx[ii[q_]])).collect()).collect();
            total += p * det(&am) * det(&bm);
        }
    }
    Ok(pref * total)
}

/// F*_λ = det[ψ_{λ_j+N−j}(x_i)] ∏_{i>j} (x_j − r_i⁻²x_i)/(x_j − x_i).
pub fn f_star(lambda: &Signature, rows: &RowSpec, col: &ColumnParams) -> Result<Q> {
    let n = lambda.len();
    let rp = rows.rows();
    let pts = lambda.points();
    let m: Matrix = (0..n).map(|i| (0..n).map(|j| psi(pts[j] - 1, &rp[i].x, col)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    let mut p = det(&m);
    for i in 0..n {
        for j in 0..i {
            p *= (&rp[j].x - rp[i].rx()) / (&rp[j].x - &rp[i].x);
        }
    }
    Ok(p)
}

/// The N-fold torus pairing of F_λ with F*_μ, by iterated residues over the
/// y's. After the prefactor cancels, the integrand is det φ · det ψ, which is
/// a signed sum of products of one-variable integrands; `spins` fixes the
/// r_i (checked against the full integrand at a sample point).
pub fn torus_pairing(lambda: &Signature, mu: &Signature, spins: &[Q], col: &ColumnParams) -> Result<Q> {
    let n = lambda.len();
    if mu.len() != n || spins.len() != n {
        return Err(Error::Other("torus pairing needs matching sizes".into()));
    }
    let a = lambda.points();
    let b = mu.points();
    let top = a.iter().chain(&b).copied().max().unwrap_or(0);
    let poles = y_poles(col, top + 1);
    let mut cache: HashMap<(i64, i64), Q> = HashMap::new();
    let mut one_var = |k: i64, l: i64| -> Q {
        cache
            .entry((k, l))
            .or_insert_with(|| phi_fr(k, col).mul(&psi_fr(l, col)).contour_integral(&poles))
            .clone()
    };
    let perms = permutations(n);
    let mut total = Q::zero();
    for (s, ss) in &perms {
        for (t, ts) in &perms {
            let mut p = qi(ss * ts);
            for i in 0..n {
                p *= one_var(a[s[i]] - 1, b[t[i]] - 1);
                if p.is_zero() {
                    break;
                }
            }
            total += p;
        }
    }
    let nf: i64 = (1..=n as i64).product();
    Ok(total / qi(nf))
}

/// Checks that ∏_{i≠j}(z_i−z_j)/∏_{i,j}(r_i⁻²z_i−z_j) · F_λ(z) F*_μ(z) equals
/// det[φ(z_i)] det[ψ(z_i)] at the given point.
pub fn torus_integrand_reduces(lambda: &Signature, mu: &Signature, z: &RowSpec, col: &ColumnParams) -> Result<bool> {
    let n = lambda.len();
    let rp = z.rows();
    let mut pref = Q::one();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pref *= &rp[i].x - &rp[j].x;
            }
            pref /= rp[i].rx() - &rp[j].x;
        }
    }
    let full = pref * f_determinant(lambda, z, col)? * f_star(mu, z, col)?;
    let a = lambda.points();
    let b = mu.points();
    let pm: Matrix = (0..n).map(|i| (0..n).map(|j| phi(a[j] - 1, &rp[i].x, col)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    let sm: Matrix = (0..n).map(|i| (0..n).map(|j| psi(b[j] - 1, &rp[i].x, col)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    Ok(full == det(&pm) * det(&sm))
}

// ------------------------------------------------------------ Jacobi–Trudi

/// ∏_t (z − θ_t⁻²w_t)/(z − w_t).
pub fn w_factor(w: &RowSpec) -> FactoredRational {
    let mut f = FactoredRational::one();
    for rp in w.rows() {
        f.mul_linear(rp.rx(), 1);
        f.mul_linear(rp.x.clone(), -1);
    }
    f
}

/// 𝗁_{k,p}(w) = ∮ ψ_k(z)/(y_p − z) ∏ (z − θ⁻²w)/(z − w), around y's and w's.
pub fn h_entry(k: i64, p: i64, w: &RowSpec, col: &ColumnParams) -> Q {
    let mut f = psi_fr(k, col).mul(&w_factor(w));
    f.scale(&-Q::one());
    f.mul_linear(col.y(p), -1);
    f.contour_integral(&yw_poles(col, k.max(p) + 1, &w.values))
}

/// 𝗀_{l/k}(w) = 𝟙_{l≥k} ∮ φ_k ψ_l ∏ (z − θ⁻²w)/(z − w), around y's and w's.
pub fn g_entry(l: i64, k: i64, w: &RowSpec, col: &ColumnParams) -> Q {
    if l < k {
        return Q::zero();
    }
    phi_fr(k, col).mul(&psi_fr(l, col)).mul(&w_factor(w)).contour_integral(&yw_poles(col, l.max(k) + 1, &w.values))
}

/// G_{ν/λ} = det[𝗀_{(ν_i+N−i)/(λ_j+N−j)}].
pub fn jacobi_trudi_g_skew(nu: &Signature, lambda: &Signature, w: &RowSpec, col: &ColumnParams) -> Result<Q> {
    let n = nu.len();
    if lambda.len() != n {
        return Ok(Q::zero());
    }
    let a = nu.points();
    let b = lambda.points();
    let m: Matrix = (0..n).map(|i| (0..n).map(|j| g_entry(a[i] - 1, b[j] - 1, w, col)).collect()).collect();
    Ok(det(&m))
}

/// G_ν = ∏_{i<j} (s_i⁻²y_i − y_j)/(y_j − y_i) · det[𝗁_{ν_i+N−i, j}].
pub fn jacobi_trudi_g(nu: &Signature, w: &RowSpec, col: &ColumnParams) -> Result<Q> {
    let n = nu.len();
    let a = nu.points();
    let m: Matrix = (0..n).map(|i| (1..=n).map(|j| h_entry(a[i] - 1, j as i64, w, col)).collect()).collect();
    Ok(jt_prefactor(n, col)? * det(&m))
}

fn jt_prefactor(n: usize, col: &ColumnParams) -> Result<Q> {
    let mut p = Q::one();
    for i in 1..=n as i64 {
        for j in i + 1..=n as i64 {
            let d = col.y(j) - col.y(i);
            if d.is_zero() {
                return Err(Error::Genericity(format!("y_{i} = y_{j}")));
            }
            p *= (col.ys(i) - col.y(j)) / d;
        }
    }
    Ok(p)
}

/// G_{ν/λ} from its N-fold contour integral, expanded into products of
/// one-variable residue sums.
pub fn g_contour(nu: &Signature, lambda: &Signature, w: &RowSpec, col: &ColumnParams) -> Result<Q> {
    let n = nu.len();
    let a = lambda.points();
    let b = nu.points();
    let top = a.iter().chain(&b).copied().max().unwrap_or(0);
    let poles = yw_poles(col, top + 1, &w.values);
    let wf = w_factor(w);
    let mut cache: HashMap<(i64, i64), Q> = HashMap::new();
    let mut one = |k: i64, l: i64| -> Q {
        cache.entry((k, l)).or_insert_with(|| phi_fr(k, col).mul(&psi_fr(l, col)).mul(&wf).contour_integral(&poles)).clone()
    };
    let perms = permutations(n);
    let mut total = Q::zero();
    for (s, ss) in &perms {
        for (t, ts) in &perms {
            let mut p = qi(ss * ts);
            for j in 0..n {
                p *= one(a[s[j]] - 1, b[t[j]] - 1);
            }
            total += p;
        }
    }
    let nf: i64 = (1..=n as i64).product();
    Ok(total / qi(nf))
}

/// F_{λ/μ}(x) from its M-fold contour integral (λ has N + M parts, μ has M,
/// x has N entries); the x's fill the first N rows of the big determinant.
pub fn f_skew_contour(lambda: &Signature, mu: &Signature, x: &RowSpec, col: &ColumnParams) -> Result<Q> {
    let m = mu.len();
    let n = x.len();
    if lambda.len() != n + m {
        return Ok(Q::zero());
    }
    let rp = x.rows();
    let a = lambda.points();
    let b = mu.points();
    let top = a.iter().chain(&b).copied().max().unwrap_or(0);
    let poles = y_poles(col, top + 1);
    let mut cross = FactoredRational::one();
    for r in &rp {
        cross.mul_linear(r.rx(), 1);
        cross.mul_linear(r.x.clone(), -1);
    }
    let mut cache: HashMap<(i64, i64), Q> = HashMap::new();
    let mut one = |k: i64, l: i64| -> Q {
        cache.entry((k, l)).or_insert_with(|| phi_fr(k, col).mul(&psi_fr(l, col)).mul(&cross).contour_integral(&poles)).clone()
    };
    let phx: Vec<Vec<Q>> = rp.iter().map(|r| a.iter().map(|&k| phi(k - 1, &r.x, col)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    let big = permutations(n + m);
    let small = permutations(m);
    let mut total = Q::zero();
    for (s, ss) in &big {
        let mut px = qi(*ss);
        for i in 0..n {
            px *= &phx[i][s[i]];
        }
        if px.is_zero() {
            continue;
        }
        for (t, ts) in &small {
            let mut p = &px * qi(*ts);
            for i in 0..m {
                p *= one(a[s[n + i]] - 1, b[t[i]] - 1);
            }
            total += p;
        }
    }
    let mf: i64 = (1..=m as i64).product();
    Ok(f_prefactor(&rp) * total / qi(mf))
}

// ---------------------------------------------------------------- Cauchy

/// Π(ρ; ρ′) = ∏ (x_i − θ_j⁻²w_j)/(x_i − w_j).
pub fn pi_factor(x: &RowSpec, w: &RowSpec) -> Q {
    let mut p = Q::one();
    for xi in &x.values {
        for wr in w.rows() {
            p *= (xi - wr.rx()) / (xi - &wr.x);
        }
    }
    p
}

pub fn cauchy_rhs(x: &RowSpec, w: &RowSpec, col: &ColumnParams) -> Result<Q> {
    Ok(z_closed(x, col)? * pi_factor(x, w))
}

#[derive(Clone, Debug)]
pub struct CauchyCheck {
    pub rhs: Q,
    /// Σ_{ν_1 ≤ c} F_ν G_ν for c = 0..=cutoff.
    pub partial: Vec<Q>,
    pub gap: Q,
    /// Rigorous bound on Σ_{ν_1 > cutoff} |F_ν G_ν|.
    pub tail_bound: Q,
    pub compat_ratio: Q,
    /// (gap(cutoff)/gap(cutoff − 10))^{1/10}.
    pub decay: f64,
}

impl CauchyCheck {
    pub fn within_bound(&self) -> bool {
        self.gap <= self.tail_bound
    }
}

/// Σ_ν F_ν(x) G_ν(w) truncated at ν_1 ≤ cutoff, with a certified tail bound
/// built from column sums of the φ- and 𝗁-matrices and their geometric decay
/// beyond the inhomogeneous prefix.
pub fn check_cauchy(x: &RowSpec, w: &RowSpec, col: &ColumnParams, cutoff: i64) -> Result<CauchyCheck> {
    let compat = crate::params::is_compatible(x, w, col)?;
    if !compat.compatible {
        return Err(Error::Incompatible(format!("tail ratio {} ≥ 1", fmt_q(&compat.ratio))));
    }
    let n = x.len();
    let ni = n as i64;
    let rhs = cauchy_rhs(x, w, col)?;
    let rp = x.rows();
    let kmax = cutoff + ni;
    let k0 = (col.tail_start() - 1).max(ni);
    let top = kmax.max(k0);
    let phis: Vec<Vec<Q>> = (0..=top).map(|k| rp.iter().map(|r| phi(k, &r.x, col)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    let hs: Vec<Vec<Q>> = (0..=top).map(|k| (1..=ni).map(|p| h_entry(k, p, w, col)).collect()).collect();
    let pf = f_prefactor(&rp);
    let pg = jt_prefactor(n, col)?;
    let mut partial = vec![Q::zero(); cutoff as usize + 1];
    for nu in all_signatures(n, cutoff) {
        let pts = nu.points();
        let fm: Matrix = (0..n).map(|i| (0..n).map(|j| phis[(pts[j] - 1) as usize][i].clone()).collect()).collect();
        let gm: Matrix = (0..n).map(|i| hs[(pts[i] - 1) as usize].clone()).collect();
        partial[nu.first() as usize] += &pf * det(&fm) * &pg * det(&gm);
    }
    for c in 1..partial.len() {
        let prev = partial[c - 1].clone();
        partial[c] += prev;
    }
    // tail bound
    let rho = compat.ratio.clone();
    let one = Q::one();
    let a = |k: usize| phis[k].iter().fold(Q::zero(), |s, v| s + v.abs());
    let b = |k: usize| hs[k].iter().fold(Q::zero(), |s, v| s + v.abs());
    // b' at k0: split 𝗁 into its residues at each w to bound its decay
    let mut bk0 = Q::zero();
    for p in 1..=ni {
        let mut f = psi_fr(k0, col).mul(&w_factor(w));
        f.scale(&-one.clone());
        f.mul_linear(col.y(p), -1);
        for wv in &w.values {
            bk0 += f.residue_at(wv).abs();
        }
        if k0 < p {
            return Err(Error::Other("tail index below row count".into()));
        }
    }
    let ck0 = a(k0 as usize) * &bk0;
    let geo = (&one - &rho).recip();
    let full: Q = (0..k0 as usize).fold(Q::zero(), |s, k| s + a(k) * b(k)) + &ck0 * &geo;
    let start = cutoff + ni; // smallest k_1 with ν_1 > cutoff
    let head_tail = if start >= k0 {
        &ck0 * num::pow(rho.clone(), (start - k0) as usize) * &geo
    } else {
        (start as usize..k0 as usize).fold(Q::zero(), |s, k| s + a(k) * b(k)) + &ck0 * &geo
    };
    let tail_bound = pf.abs() * pg.abs() * head_tail * num::pow(full, n.saturating_sub(1));
    let gap = (&rhs - &partial[cutoff as usize]).abs();
    let decay = if cutoff >= 10 {
        let g0 = crate::params::to_f64(&(&rhs - &partial[(cutoff - 10) as usize]).abs());
        let g1 = crate::params::to_f64(&gap);
        if g0 > 0.0 && g1 > 0.0 {
            (g1 / g0).powf(0.1)
        } else {
            0.0
        }
    } else {
        f64::NAN
    };
    Ok(CauchyCheck { rhs, partial, gap, tail_bound, compat_ratio: rho, decay })
}

// ------------------------------------------------------ Schur-type families

/// Complete homogeneous h_k of the given variables.
pub fn complete_h(k: i64, vars: &[Q]) -> Q {
    if k < 0 {
        return Q::zero();
    }
    let mut h = vec![Q::zero(); k as usize + 1];
    h[0] = Q::one();
    for v in vars {
        for d in 1..=k as usize {
            let t = &h[d - 1] * v;
            h[d] += t;
        }
    }
    h[k as usize].clone()
}

/// Skew Schur s_{λ/μ} through det[h_{λ_i − μ_j − i + j}].
pub fn skew_schur_jt(lambda: &[i64], mu: &[i64], vars: &[Q]) -> Q {
    let n = lambda.len().max(mu.len());
    let lam = |i: usize| lambda.get(i).copied().unwrap_or(0);
    let mu_ = |i: usize| mu.get(i).copied().unwrap_or(0);
    let m: Matrix = (0..n).map(|i| (0..n).map(|j| complete_h(lam(i) - mu_(j) - i as i64 + j as i64, vars)).collect()).collect();
    det(&m)
}

pub fn schur_jt(lambda: &[i64], vars: &[Q]) -> Q {
    skew_schur_jt(lambda, &[], vars)
}

/// s_λ(x_1..x_N) as a ratio of alternants (needs distinct variables and
/// ℓ(λ) ≤ N, padding with zeros).
pub fn schur(lambda: &[i64], vars: &[Q]) -> Result<Q> {
    let n = vars.len();
    if lambda.iter().filter(|&&p| p > 0).count() > n {
        return Ok(Q::zero());
    }
    if !distinct(vars) {
        return Ok(schur_jt(lambda, vars));
    }
    let lam = |j: usize| lambda.get(j).copied().unwrap_or(0);
    let num: Matrix = (0..n).map(|i| (0..n).map(|j| num::pow(vars[i].clone(), (lam(j) + (n - 1 - j) as i64) as usize)).collect()).collect();
    let mut vdm = Q::one();
    for i in 0..n {
        for j in i + 1..n {
            vdm *= &vars[i] - &vars[j];
        }
    }
    Ok(det(&num) / vdm)
}

/// Supersymmetric Schur s_λ(a/b) = Σ_{μ⊆λ} s_μ(a) s_{λ'/μ'}(b).
pub fn supersymmetric_schur(lambda: &[i64], a: &[Q], b: &[Q]) -> Q {
    let lam: Vec<i64> = lambda.iter().copied().filter(|&p| p > 0).collect();
    let lc = Signature::new(lam.clone()).map(|s| s.conjugate()).unwrap_or_default();
    let mut total = Q::zero();
    // all μ ⊆ λ
    fn rec(i: usize, lam: &[i64], cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if i == lam.len() {
            out.push(cur.clone());
            return;
        }
        let cap = if i == 0 { lam[0] } else { lam[i].min(cur[i - 1]) };
        for p in 0..=cap {
            cur.push(p);
            rec(i + 1, lam, cur, out);
            cur.pop();
        }
    }
    let mut mus = Vec::new();
    rec(0, &lam, &mut Vec::new(), &mut mus);
    for mu in mus {
        let mc = Signature::new(mu.clone()).map(|s| s.conjugate()).unwrap_or_default();
        let sa = schur_jt(&mu, a);
        if sa.is_zero() {
            continue;
        }
        total += sa * skew_schur_jt(&lc, &mc, b);
    }
    total
}

/// The (I, J) sum expressing s_λ(𝗑/𝗒) with τ = (λ_i − d)_{i≤d}, η = (λ_{d+1}, …).
pub fn super_schur_formula(lambda: &Signature, xs: &[Q], ys: &[Q]) -> Result<Q> {
    let m = xs.len();
    let d = lambda.durfee();
    if d > m {
        return Ok(Q::zero());
    }
    let tau: Vec<i64> = (1..=d).map(|i| lambda.part(i) - d as i64).collect();
    let eta = Signature::new(lambda.parts()[d..].to_vec())?;
    let etac = eta.conjugate();
    let mut total = Q::zero();
    for ii in subsets(m, d) {
        let ic: Vec<usize> = (0..m).filter(|i| !ii.contains(i)).collect();
        for jj in subsets(m, d) {
            let jc: Vec<usize> = (0..m).filter(|j| !jj.contains(j)).collect();
            let xj: Vec<Q> = jj.iter().map(|&j| xs[j].clone()).collect();
            let yi: Vec<Q> = ii.iter().map(|&i| ys[i].clone()).collect();
            let mut p = schur(&tau, &xj)? * schur(&etac, &yi)?;
            if p.is_zero() {
                continue;
            }
            for &i in &jc {
                for &j in &jj {
                    p /= &xs[j] - &xs[i];
                }
            }
            for &i in &ii {
                for &j in &ic {
                    p /= &ys[i] - &ys[j];
                }
            }
            for &i in &ii {
                for xv in xs {
                    p *= xv + &ys[i];
                }
            }
            for &i in &ic {
                for &j in &jj {
                    p *= &xs[j] + &ys[i];
                }
            }
            total += p;
        }
    }
    Ok(total)
}

/// Variables of the homogeneous reductions (y ≡ 1, s ≡ s).
pub fn homogeneous_f_vars(x: &[Q], s: &Q) -> Vec<Q> {
    let s2 = s * s;
    x.iter().map(|xi| (Q::one() - &s2 * xi) / (&s2 * (Q::one() - xi))).collect()
}

pub fn homogeneous_g_vars(rows: &RowSpec, s: &Q) -> (Vec<Q>, Vec<Q>) {
    let s2 = s * s;
    let one = Q::one();
    let rp = rows.rows();
    let a = rp.iter().map(|r| &s2 * (&one - &r.x) / (&one - &s2 * &r.x)).collect();
    let b = rp.iter().map(|r| &s2 * (r.rx() - &one) / (&one - &s2 * r.rx())).collect();
    (a, b)
}

/// s_λ(𝗑/𝗒) · ∏ ((1 − s²r⁻²x)/(1 − s²x))^N, the homogeneous value of G_λ.
pub fn homogeneous_g_via_super_schur(lambda: &Signature, rows: &RowSpec, s: &Q, use_formula: bool) -> Result<Q> {
    let (a, b) = homogeneous_g_vars(rows, s);
    let ss = if use_formula { super_schur_formula(lambda, &a, &b)? } else { supersymmetric_schur(lambda.parts(), &a, &b) };
    let s2 = s * s;
    let one = Q::one();
    let mut p = Q::one();
    for r in rows.rows() {
        p *= num::pow((&one - &s2 * r.rx()) / (&one - &s2 * &r.x), lambda.len());
    }
    Ok(ss * p)
}

/// (x | y)^k = ∏_{m≤k} (x + y_m).
pub fn rising(x: &Q, y: &[Q], k: i64) -> Q {
    (0..k as usize).fold(Q::one(), |p, m| p * (x + &y[m]))
}

pub fn factorial_schur_alternant(lambda: &Signature, x: &[Q], y: &[Q]) -> Result<Q> {
    let n = lambda.len();
    let pts = lambda.points();
    let m: Matrix = (0..n).map(|i| (0..n).map(|j| rising(&x[i], y, pts[j] - 1)).collect()).collect();
    let mut v = Q::one();
    for i in 0..n {
        for j in i + 1..n {
            let d = &x[i] - &x[j];
            if d.is_zero() {
                return Err(Error::Genericity("repeated variable in the alternant".into()));
            }
            v *= d;
        }
    }
    Ok(det(&m) / v)
}

/// Semistandard tableaux of shape λ with entries in 1..=n.
pub fn ssyt(lambda: &[i64], n: usize) -> Vec<Vec<Vec<usize>>> {
    let cells: Vec<(usize, usize)> =
        lambda.iter().enumerate().flat_map(|(i, &l)| (0..l as usize).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    let mut t: Vec<Vec<usize>> = lambda.iter().map(|&l| vec![0; l as usize]).collect();
    fn rec(idx: usize, cells: &[(usize, usize)], n: usize, t: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if idx == cells.len() {
            out.push(t.clone());
            return;
        }
        let (i, j) = cells[idx];
        let lo_row = if j > 0 { t[i][j - 1] } else { 1 };
        let lo_col = if i > 0 { t[i - 1][j] + 1 } else { 1 };
        for v in lo_row.max(lo_col)..=n {
            t[i][j] = v;
            rec(idx + 1, cells, n, t, out);
        }
        t[i][j] = 0;
    }
    rec(0, &cells, n, &mut t, &mut out);
    out
}

/// Σ_T ∏ (x_{T(i,j)} + y_{T(i,j)+j−i}), 1-based boxes.
pub fn factorial_schur_tableaux(lambda: &Signature, x: &[Q], y: &[Q]) -> Q {
    let n = x.len();
    let mut total = Q::zero();
    for t in ssyt(lambda.parts(), n) {
        let mut p = Q::one();
        for (i, row) in t.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let idx = v as i64 + j as i64 - i as i64; // 1-based: T + (j+1) − (i+1)
                p *= &x[v - 1] + &y[(idx - 1) as usize];
            }
        }
        total += p;
    }
    total
}

/// Five-vertex partition function with Ŵ_fSchur weights: paths enter at
/// S(λ) from below and leave through the right edge of each of the N rows.
pub fn factorial_schur_vertex(lambda: &Signature, x: &[Q], y: &[Q]) -> Result<Q> {
    let n = lambda.len();
    let width = lambda.first() + n as i64 + 1;
    let wt = |row: usize, i: i64, e: EdgeState| -> Result<Q> {
        Ok(match (e.i1, e.j1, e.i2, e.j2) {
            (0, 0, 0, 0) => &x[n - 1 - row] + &y[(i - 1) as usize],
            (1, 1, 1, 1) => Q::zero(),
            _ if e.conserving() => Q::one(),
            _ => Q::zero(),
        })
    };
    custom_partition(&lambda.points(), &[], n, width, 0, 1, &wt)
}

/// The s → 0, r → ∞ limit of F_λ(s⁻²x⁻¹; −y⁻¹; r; s), from the limiting
/// weights (1 + x_j/y_i, 0, x_j/y_i, 1, 1, x_j/y_i).
pub fn f_factorial_limit(lambda: &Signature, x: &[Q], y: &[Q]) -> Result<Q> {
    let n = lambda.len();
    let width = lambda.first() + n as i64 + 1;
    let wt = |row: usize, i: i64, e: EdgeState| -> Result<Q> {
        let r = &x[row] / &y[(i - 1) as usize];
        Ok(match (e.i1, e.j1, e.i2, e.j2) {
            (0, 0, 0, 0) => Q::one() + r,
            (1, 1, 1, 1) => Q::zero(),
            (1, 0, 1, 0) => r,
            (0, 1, 0, 1) => Q::one(),
            (1, 0, 0, 1) => Q::one(),
            (0, 1, 1, 0) => r,
            _ => Q::zero(),
        })
    };
    custom_partition(&lambda.points(), &[], n, width, 0, 1, &wt)
}

/// The prefactor x_1^{N−1}…x_{N−1} / ∏_i y_i^{#{k ∈ S(λ): k > i}}.
pub fn f_factorial_prefactor(lambda: &Signature, x: &[Q], y: &[Q]) -> Q {
    let n = lambda.len();
    let pts = lambda.points();
    let mut p = Q::one();
    for (i, xi) in x.iter().enumerate().take(n) {
        p *= num::pow(xi.clone(), n - 1 - i);
    }
    for i in 1..=lambda.first() + n as i64 {
        let c = pts.iter().filter(|&&k| k > i).count();
        p /= num::pow(y[(i - 1) as usize].clone(), c);
    }
    p
}

/// š_λ(w | y): five-vertex partition function with G boundary conditions and
/// W_fSchur weights 1, 0, 1/(w_j + y_i), …
pub fn s_check(lambda: &Signature, w: &[Q], y: &[Q]) -> Result<Q> {
    let n = lambda.len();
    let width = lambda.first() + n as i64 + 1;
    let wt = |row: usize, i: i64, e: EdgeState| -> Result<Q> {
        Ok(match (e.i1, e.j1, e.i2, e.j2) {
            (0, 0, 0, 0) => Q::one(),
            (1, 1, 1, 1) => Q::zero(),
            _ if e.conserving() => (&w[row] + &y[(i - 1) as usize]).recip(),
            _ => Q::zero(),
        })
    };
    custom_partition(&Signature::zero(n).points(), &lambda.points(), w.len(), width, 0, 0, &wt)
}

/// Σ_{λ_1 ≤ cutoff} s_λ(x|y) š_λ(w|y) and the product ∏ 1/(w_j − x_i).
pub fn factorial_cauchy(x: &[Q], w: &[Q], y: &[Q], cutoff: i64) -> Result<(Q, Q)> {
    let n = x.len();
    let mut lhs = Q::zero();
    for lam in all_signatures(n, cutoff) {
        lhs += factorial_schur_alternant(&lam, x, y)? * s_check(&lam, w, y)?;
    }
    let mut rhs = Q::one();
    for xi in x {
        for wj in w {
            rhs /= wj - xi;
        }
    }
    Ok((lhs, rhs))
}

/// A default inhomogeneous column bank used by examples and tests.
pub fn sample_columns() -> ColumnParams {
    ColumnParams::new(
        vec![qi(1), q(9, 10), q(6, 5), q(11, 10), q(19, 20), q(21, 20)],
        vec![q(1, 2), q(2, 3), q(1, 3), q(3, 5), q(1, 2), q(2, 5)],
        qi(1),
        q(1, 2),
    )
}


/// Elementary symmetric e_k.
pub fn elementary(k: i64, vars: &[Q]) -> Q {
    if k < 0 {
        return Q::zero();
    }
    let mut e = vec![Q::zero(); k as usize + 1];
    e[0] = Q::one();
    for v in vars {
        for d in (1..=k as usize).rev() {
            let t = &e[d - 1] * v;
            e[d] += t;
        }
    }
    e[k as usize].clone()
}
