//! Command-line front end. Every report carries its seed, cutoff and bank so
//! a run can be repeated byte for byte.

use crate::asymptotics::{
    convergence_harness, critical_point, standard_globals, kernel_k2d, rate_consistent, LocalSequences, RationalGlobals,
    RationalLocal,
};
use crate::fock::{kernel_fock, wick_to_tolerance, WickPair};
use crate::linalg::{identity, matmul, subsets};
use crate::params::{all_signatures, fmt_dec, fmt_q, parse_q, to_f64, ColumnParams, ParamBank, RowParam, RowSpec, Signature, Q};
use crate::process::{brute_force_correlation, det_kernel, enumerate, gram_inverse, gram_matrix, kernel_kap, AscendingFG, AscendingSampler};
use crate::symfun::{
    check_cauchy, check_phi_psi_orthogonality, f_determinant, f_skew_partition, f_star, g_sergeev_pragacz, g_skew_partition,
    jacobi_trudi_g, phi, psi,
};
use crate::tiling::{admissible_chains, exit_chains, render, sample_tiling, tiling_weight, DominoTiling, RenderFormat};
use crate::vertex::{check_commutation, check_ybe, Relation};
use crate::{q, qi, Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num::{Signed, Zero};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::path::PathBuf;

/// Bank used when --bank is absent: two x rows, two w rows, three
/// inhomogeneous columns.
pub const DEFAULT_BANK: &str = r#"{
  "y": ["1", "9/10", "11/10"],
  "s": ["1/2", "3/5", "1/2"],
  "y_tail": "1",
  "s_tail": "1/2",
  "x": ["1/20", "1/10"],
  "r": ["1/6", "1/4"],
  "w": ["17/20", "43/50"],
  "theta": ["7/10", "3/4"]
}"#;

#[derive(Parser, Debug)]
#[command(name = "ff6v", version, about = "Exact free-fermion six-vertex computations")]
pub struct Cli {
    /// JSON parameter bank (rationals as strings).
    #[arg(long, global = true)]
    pub bank: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cutoff: Option<i64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
    Ascii,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Ybe,
    Commute,
    Symfun,
    Cauchy,
    Fock,
    Process,
    Tiling,
    All,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    #[value(name = "F")]
    F,
    #[value(name = "G")]
    G,
    #[value(name = "Fstar")]
    Fstar,
    #[value(name = "phi")]
    Phi,
    #[value(name = "psi")]
    Psi,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run identity suites; exit code 0 only when every check passes.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Evaluate F_λ(x), G_λ(w), F*_λ(x) on the bank, or φ_k, ψ_k at a point.
    Eval {
        #[arg(value_enum)]
        family: Family,
        /// Signature "4,2,0" for F/G/Fstar, an index k for phi/psi.
        arg: String,
        /// Evaluation point for phi/psi.
        #[arg(long)]
        at: Option<String>,
    },
    /// Exact K_AP on all pairs of points of {1..T} × {1..amax}.
    Kernel {
        #[arg(long, default_value_t = 4)]
        amax: i64,
    },
    /// Exact samples of the ascending process.
    Sample {
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Also write tiling_<seed>.svg for every sample here.
        #[arg(long)]
        svg_dir: Option<PathBuf>,
    },
    /// K_2d table and the convergence of scaled exact kernels towards it.
    Bulk {
        #[arg(long, default_value = "3/2")]
        alpha: String,
        #[arg(long, default_value = "3/2")]
        tau: String,
        /// Evaluate the table at this z = "re,im" instead of z(α, τ); skips
        /// the convergence table.
        #[arg(long)]
        z: Option<String>,
        /// Table covers t, t' ∈ {0, 1} and |a|, |a'| ≤ radius.
        #[arg(long, default_value_t = 1)]
        radius: i64,
        #[arg(long, default_value = "16,32")]
        schedule: String,
    },
}

/// A finished report and whether everything in it passed.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub text: String,
    pub pass: bool,
}

fn load_bank(cli: &Cli) -> Result<(ParamBank, Value)> {
    let text = match &cli.bank {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?,
        None => DEFAULT_BANK.to_string(),
    };
    let bank = ParamBank::from_json(&text)?;
    let v: Value = serde_json::from_str(&bank.to_json()).map_err(|e| Error::Parse(e.to_string()))?;
    Ok((bank, v))
}

fn process_of(bank: &ParamBank) -> Result<AscendingFG> {
    AscendingFG::new(bank.x.clone(), bank.w.clone(), bank.col.clone())
}

fn tol_q(tol: f64) -> Result<Q> {
    Q::from_float(tol).ok_or_else(|| Error::Parse(format!("tolerance {tol}")))
}

fn parse_sig(s: &str) -> Result<Signature> {
    let parts = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<i64>().map_err(|e| Error::Parse(format!("{p}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Signature::new(parts)
}

fn exact(v: &Q) -> Value {
    json!({ "exact": fmt_q(v), "decimal": fmt_dec(v) })
}

pub fn error_json(e: &Error) -> String {
    let kind = match e {
        Error::Degenerate(_) => "degenerate",
        Error::Pole { .. } => "pole",
        Error::InvalidSignature(_) => "invalid_signature",
        Error::Ordering(_) => "ordering",
        Error::Incompatible(_) => "incompatible",
        Error::Genericity(_) => "genericity",
        Error::Window(_) => "window",
        Error::Parse(_) => "parse",
        Error::Other(_) => "other",
    };
    serde_json::to_string_pretty(&json!({ "error": { "kind": kind, "message": e.to_string() } })).expect("json") + "\n"
}

pub fn execute(cli: &Cli) -> Result<Output> {
    match &cli.cmd {
        Command::Verify { suite } => cmd_verify(cli, *suite),
        Command::Eval { family, arg, at } => cmd_eval(cli, *family, arg, at.as_deref()),
        Command::Kernel { amax } => cmd_kernel(cli, *amax),
        Command::Sample { count, svg_dir } => cmd_sample(cli, *count, svg_dir.as_ref()),
        Command::Bulk { alpha, tau, z, radius, schedule } => cmd_bulk(cli, alpha, tau, z.as_deref(), *radius, schedule),
    }
}

/// Parses arguments, runs, writes the report and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (text, code) = match execute(&cli) {
        Ok(o) => (o.text, if o.pass { 0 } else { 1 }),
        Err(e) => (error_json(&e), 2),
    };
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                eprintln!("cannot write {}: {e}", p.display());
                return 2;
            }
        }
        None => print!("{text}"),
    }
    code
}

// ---------------------------------------------------------------- verify

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), pass, detail: detail.into() }
}

fn suite_ybe(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |lo: i64, hi: i64| q(rng.gen_range(lo..=hi), 20);
    let mut out = vec![];
    let mut k = 0;
    while out.len() < 20 {
        let (p1, p2) = (RowParam::new(r(1, 40), &r(1, 19)), RowParam::new(r(1, 40), &r(1, 19)));
        let (y, s) = (r(1, 40), r(1, 19));
        k += 1;
        match check_ybe(&p1, &p2, &y, &(&s * &s).recip()) {
            Ok(res) => out.push(check(format!("ybe/draw{k}"), res.is_ok(), res.err().map(|f| format!("{f:?}")).unwrap_or_default())),
            Err(_) => continue,
        }
    }
    Ok(out)
}

fn suite_commute(bank: &ParamBank) -> Result<Vec<Check>> {
    let (p1, p2) = two_rows(&bank.x);
    Relation::all()
        .into_iter()
        .map(|rel| {
            let bad = check_commutation(rel, &p1, &p2, &bank.col, 1, 4)?;
            Ok(check(format!("commute/{rel:?}"), bad.is_none(), bad.map(|v| format!("fails at {v:?}")).unwrap_or_default()))
        })
        .collect()
}

fn two_rows(x: &RowSpec) -> (RowParam, RowParam) {
    match x.len() {
        0 => (RowParam::new(q(1, 3), &q(1, 2)), RowParam::new(q(2, 7), &q(3, 5))),
        1 => (x.row(0), RowParam::new(q(2, 7), &q(3, 5))),
        _ => (x.row(0), x.row(1)),
    }
}

fn suite_symfun(bank: &ParamBank) -> Result<Vec<Check>> {
    let mut out = vec![];
    let col = &bank.col;
    let nmax = bank.x.len().min(2);
    let mut f_ok = 0;
    let mut bad = None;
    for n in 1..=nmax {
        for lam in all_signatures(n, 3) {
            let rows = bank.x.prefix(n);
            if f_determinant(&lam, &rows, col)? == f_skew_partition(&lam, &Signature::empty(), &rows, col)? {
                f_ok += 1;
            } else if bad.is_none() {
                bad = Some(lam.to_string());
            }
        }
    }
    out.push(check("symfun/F_determinant", bad.is_none(), bad.map(|l| format!("differs at {l}")).unwrap_or(format!("{f_ok} signatures"))));
    let mut g_ok = 0;
    let mut bad = None;
    let mmax = bank.w.len().min(2);
    for n in 1..=2 {
        for lam in all_signatures(n, 3) {
            for m in 1..=mmax {
                let rows = bank.w.prefix(m);
                let g = g_skew_partition(&lam, &Signature::zero(n), &rows, col)?;
                if g == g_sergeev_pragacz(&lam, &rows, col)? && g == jacobi_trudi_g(&lam, &rows, col)? {
                    g_ok += 1;
                } else if bad.is_none() {
                    bad = Some(format!("{lam}, M = {m}"));
                }
            }
        }
    }
    out.push(check("symfun/G_three_routes", bad.is_none(), bad.map(|l| format!("differs at {l}")).unwrap_or(format!("{g_ok} cases"))));
    let orth = check_phi_psi_orthogonality(6, col);
    out.push(check("symfun/phi_psi_orthogonality", orth.is_none(), orth.map(|p| format!("fails at {p:?}")).unwrap_or("0 ≤ k, l ≤ 6".into())));
    Ok(out)
}

fn suite_cauchy(bank: &ParamBank, cutoff: i64) -> Result<Vec<Check>> {
    let c = check_cauchy(&bank.x, &bank.w, &bank.col, cutoff)?;
    Ok(vec![check(
        "cauchy/within_tail_bound",
        c.within_bound(),
        format!("gap {} ≤ bound {} at cutoff {cutoff}", fmt_dec(&c.gap), fmt_dec(&c.tail_bound)),
    )])
}

fn fock_columns() -> ColumnParams {
    ColumnParams::new(vec![qi(1), q(101, 100)], vec![q(1, 4), q(6, 25)], qi(1), q(1, 4)).with_negative(
        vec![q(9, 10), q(91, 100)],
        vec![q(19, 20), q(24, 25)],
        q(9, 10),
        q(19, 20),
    )
}

fn suite_fock(bank: &ParamBank) -> Result<Vec<Check>> {
    let col = fock_columns();
    let pairs = [WickPair::new(q(101, 100), qi(0), q(7, 10)), WickPair::new(q(51, 50), qi(0), q(3, 5))];
    let mut out = vec![];
    for m in 1..=2 {
        let (a, b) = wick_to_tolerance(&pairs[..m], &col, -4, 4, &q(1, 1_000_000_000))?;
        out.push(check(
            format!("fock/wick_m{m}"),
            a.within() && b.within() && b.bound < a.bound,
            format!("gap {} ≤ {}", fmt_dec(&b.gap()), fmt_dec(&b.bound)),
        ));
    }
    let p = process_of(bank)?;
    for (t, a, t2, a2) in [(1, 1, 1, 2), (p.t(), 2, 1, 1)] {
        let (f, k) = (kernel_fock(&p, t, a, t2, a2)?, kernel_kap(&p, t, a, t2, a2)?);
        out.push(check(format!("fock/kernel({t},{a};{t2},{a2})"), f == k, fmt_q(&k)));
    }
    Ok(out)
}

fn suite_process(bank: &ParamBank, cutoff: i64) -> Result<Vec<Check>> {
    let mut out = vec![];
    let m = gram_matrix(&bank.x, &bank.w, &bank.col)?;
    let mi = gram_inverse(&bank.x, &bank.w, &bank.col)?;
    out.push(check("process/gram_inverse", matmul(&m, &mi) == identity(bank.x.len()), format!("N = {}", bank.x.len())));
    let p = process_of(bank)?;
    let en = enumerate(&p, cutoff)?;
    let sites: Vec<(usize, i64)> = (1..=p.t()).flat_map(|t| (1..=cutoff.min(4)).map(move |a| (t, a))).collect();
    let mut worst = Q::zero();
    let mut pass = true;
    for k in 1..=2 {
        for idx in subsets(sites.len(), k) {
            let a: Vec<(usize, i64)> = idx.iter().map(|&i| sites[i]).collect();
            let d = det_kernel(&a, &|t, x, t2, x2| kernel_kap(&p, t, x, t2, x2))?;
            let (v, tail) = brute_force_correlation(&a, &en);
            pass &= v <= d && d <= &v + &tail;
            let g = (&d - &v).abs();
            if g > worst {
                worst = g;
            }
        }
    }
    out.push(check(
        "process/correlations",
        pass,
        format!("largest gap {} within missing mass {}", fmt_dec(&worst), fmt_dec(&en.missing_mass)),
    ));
    Ok(out)
}

fn suite_tiling(bank: &ParamBank) -> Result<Vec<Check>> {
    let mut n_ok = 0;
    let mut bad = None;
    for t in 1..=2 {
        for n in 1..=2 {
            for (l, m) in admissible_chains(t, n, 3) {
                if DominoTiling::from_signatures(&l, &m)?.to_signatures()? == (l.clone(), m.clone()) {
                    n_ok += 1;
                } else if bad.is_none() {
                    bad = Some(format!("{l:?}"));
                }
            }
        }
    }
    let mut out = vec![check("tiling/round_trip", bad.is_none(), bad.unwrap_or(format!("{n_ok} chains")))];
    let p = process_of(bank)?;
    let total = |l: &[Signature]| -> Result<Q> {
        let mut s = Q::zero();
        for m in exit_chains(l.last().expect("nonempty")) {
            for tl in DominoTiling::all_lifts(l, &m)? {
                s += tiling_weight(&tl, &p)?;
            }
        }
        Ok(s)
    };
    let n = p.n();
    let l1: Vec<Signature> = (0..p.t()).map(|t| Signature::new((0..n).map(|i| (t + 1) as i64 - i as i64).map(|v| v.max(0)).collect())).collect::<Result<_>>()?;
    let l2: Vec<Signature> = (0..p.t()).map(|_| Signature::zero(n)).collect();
    let lhs = total(&l1)? / total(&l2)?;
    let rhs = p.ascending_weight(&l1)? / p.ascending_weight(&l2)?;
    out.push(check("tiling/weight_ratio", lhs == rhs, fmt_q(&lhs)));
    Ok(out)
}

fn cmd_verify(cli: &Cli, suite: Suite) -> Result<Output> {
    let (bank, bank_json) = load_bank(cli)?;
    let cutoff = cli.cutoff.unwrap_or(30);
    let small_cutoff = cli.cutoff.unwrap_or(6);
    let suites: Vec<Suite> = match suite {
        Suite::All => vec![Suite::Ybe, Suite::Commute, Suite::Symfun, Suite::Cauchy, Suite::Fock, Suite::Process, Suite::Tiling],
        s => vec![s],
    };
    let results: Vec<Result<Vec<Check>>> = suites
        .par_iter()
        .map(|s| match s {
            Suite::Ybe => suite_ybe(cli.seed),
            Suite::Commute => suite_commute(&bank),
            Suite::Symfun => suite_symfun(&bank),
            Suite::Cauchy => suite_cauchy(&bank, cutoff),
            Suite::Fock => suite_fock(&bank),
            Suite::Process => suite_process(&bank, small_cutoff),
            Suite::Tiling => suite_tiling(&bank),
            Suite::All => unreachable!(),
        })
        .collect();
    let mut checks = vec![];
    for r in results {
        checks.extend(r?);
    }
    let pass = checks.iter().all(|c| c.pass);
    let report = json!({
        "command": "verify",
        "suite": format!("{suite:?}").to_lowercase(),
        "config": { "seed": cli.seed, "cutoff": cutoff, "enumeration_cutoff": small_cutoff, "bank": bank_json },
        "checks": checks.iter().map(|c| json!({ "name": c.name, "pass": c.pass, "detail": c.detail })).collect::<Vec<_>>(),
        "pass": pass,
    });
    Ok(Output { text: serde_json::to_string_pretty(&report).expect("json") + "\n", pass })
}

// ---------------------------------------------------------------- eval

fn cmd_eval(cli: &Cli, family: Family, arg: &str, at: Option<&str>) -> Result<Output> {
    let (bank, bank_json) = load_bank(cli)?;
    let value = match family {
        Family::Phi | Family::Psi => {
            let k: i64 = arg.trim().parse().map_err(|e| Error::Parse(format!("{arg}: {e}")))?;
            let x = parse_q(at.ok_or_else(|| Error::Parse("--at is required for phi and psi".into()))?)?;
            if family == Family::Phi {
                phi(k, &x, &bank.col)?
            } else {
                psi(k, &x, &bank.col)?
            }
        }
        _ => {
            let lam = parse_sig(arg)?;
            let n = lam.len();
            let rows = if family == Family::G { &bank.w } else { &bank.x };
            if family != Family::G && rows.len() < n {
                return Err(Error::Other(format!("{n} x rows needed, bank has {}", rows.len())));
            }
            match family {
                Family::F => f_determinant(&lam, &rows.prefix(n), &bank.col)?,
                Family::Fstar => f_star(&lam, &rows.prefix(n), &bank.col)?,
                _ => g_sergeev_pragacz(&lam, rows, &bank.col)?,
            }
        }
    };
    let name = match family {
        Family::F => "F",
        Family::G => "G",
        Family::Fstar => "Fstar",
        Family::Phi => "phi",
        Family::Psi => "psi",
    };
    let text = match cli.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let mut v = json!({ "command": "eval", "family": name, "arg": arg, "config": { "bank": bank_json } });
            v["value"] = exact(&value);
            if let Some(a) = at {
                v["at"] = json!(a);
            }
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
        _ => format!("family,arg,exact,decimal\n{name},\"{arg}\",{},{}\n", fmt_q(&value), fmt_dec(&value)),
    };
    Ok(Output { text, pass: true })
}

// ---------------------------------------------------------------- kernel

fn cmd_kernel(cli: &Cli, amax: i64) -> Result<Output> {
    let (bank, bank_json) = load_bank(cli)?;
    let p = process_of(&bank)?;
    let pts: Vec<(usize, i64)> = (1..=p.t()).flat_map(|t| (1..=amax).map(move |a| (t, a))).collect();
    let grid: Vec<((usize, i64), (usize, i64))> = pts.iter().flat_map(|&u| pts.iter().map(move |&v| (u, v))).collect();
    let vals: Vec<Q> = grid.par_iter().map(|&((t, a), (t2, a2))| kernel_kap(&p, t, a, t2, a2)).collect::<Result<_>>()?;
    let text = match cli.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let entries: Vec<Value> = grid
                .iter()
                .zip(&vals)
                .map(|(((t, a), (t2, a2)), v)| json!({ "t": t, "a": a, "t2": t2, "a2": a2, "value": exact(v) }))
                .collect();
            let v = json!({ "command": "kernel", "config": { "amax": amax, "bank": bank_json }, "entries": entries });
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
        _ => {
            let mut s = format!("# ff6v kernel amax={amax} bank={}\nt,a,t2,a2,exact,decimal\n", serde_json::to_string(&bank_json).expect("json"));
            for (((t, a), (t2, a2)), v) in grid.iter().zip(&vals) {
                s += &format!("{t},{a},{t2},{a2},{},{}\n", fmt_q(v), fmt_dec(v));
            }
            s
        }
    };
    Ok(Output { text, pass: true })
}

// ---------------------------------------------------------------- sample

fn cmd_sample(cli: &Cli, count: u64, svg_dir: Option<&PathBuf>) -> Result<Output> {
    let (bank, bank_json) = load_bank(cli)?;
    let p = process_of(&bank)?;
    let cutoff = cli.cutoff.unwrap_or(16);
    let eps = tol_q(cli.tol.unwrap_or(1e-9))?;
    let seeds: Vec<u64> = (0..count).map(|i| cli.seed.wrapping_add(i)).collect();
    let format = cli.format.unwrap_or(Format::Json);
    let needs_tiling = svg_dir.is_some() || matches!(format, Format::Svg | Format::Ascii);
    let tilings: Vec<Option<DominoTiling>> = if needs_tiling {
        seeds.iter().map(|&s| sample_tiling(&p, cutoff, eps.clone(), s).map(Some)).collect::<Result<_>>()?
    } else {
        vec![None; seeds.len()]
    };
    if let Some(dir) = svg_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Other(format!("{}: {e}", dir.display())))?;
        for (s, tl) in seeds.iter().zip(&tilings) {
            let path = dir.join(format!("tiling_{s}.svg"));
            std::fs::write(&path, render(tl.as_ref().expect("tiling"), RenderFormat::Svg))
                .map_err(|e| Error::Other(format!("{}: {e}", path.display())))?;
        }
    }
    let text = match format {
        Format::Svg | Format::Ascii => {
            let f = if format == Format::Svg { RenderFormat::Svg } else { RenderFormat::Ascii };
            tilings.iter().map(|t| render(t.as_ref().expect("tiling"), f)).collect::<Vec<_>>().join("\n")
        }
        _ => {
            let mut sampler = AscendingSampler::new(&p, cutoff, eps);
            let mut samples = vec![];
            for &s in &seeds {
                let smp = sampler.sample(s)?;
                samples.push(json!({
                    "seed": smp.seed,
                    "signatures": smp.signatures.iter().map(|l| l.parts().to_vec()).collect::<Vec<_>>(),
                    "weight": exact(&smp.weight),
                }));
            }
            let v = json!({
                "command": "sample",
                "config": { "seed": cli.seed, "count": count, "cutoff": cutoff, "eps": fmt_q(&tol_q(cli.tol.unwrap_or(1e-9))?), "bank": bank_json },
                "samples": samples,
            });
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
    };
    Ok(Output { text, pass: true })
}

// ---------------------------------------------------------------- bulk

fn globals_of(cli: &Cli) -> Result<RationalGlobals> {
    if cli.bank.is_none() {
        return Ok(standard_globals());
    }
    let (bank, _) = load_bank(cli)?;
    let first = |v: &[Q], what: &str| v.first().cloned().ok_or_else(|| Error::Parse(format!("bank has no {what}")));
    Ok(RationalGlobals {
        x: first(&bank.x.values, "x")?,
        w: first(&bank.w.values, "w")?,
        y: bank.col.y_tail.clone(),
        theta: first(&bank.w.spins, "theta")?,
        s: bank.col.s_tail.clone(),
    })
}

fn cmd_bulk(cli: &Cli, alpha: &str, tau: &str, z: Option<&str>, radius: i64, schedule: &str) -> Result<Output> {
    let g = globals_of(cli)?;
    let gp = g.to_f64()?;
    let (alpha, tau) = (parse_q(alpha)?, parse_q(tau)?);
    let tol = cli.tol.unwrap_or(crate::asymptotics::DEFAULT_TOL);
    let zv = match z {
        Some(s) => {
            let parts: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{p}: {e}")))).collect::<Result<_>>()?;
            if parts.len() != 2 {
                return Err(Error::Parse(format!("z = {s}: expected re,im")));
            }
            Complex64::new(parts[0], parts[1])
        }
        None => critical_point(&gp, to_f64(&alpha), to_f64(&tau))
            .ok_or_else(|| Error::Ordering(format!("(α, τ) = ({}, {}) lies outside the liquid region", fmt_q(&alpha), fmt_q(&tau))))?,
    };
    let seqs = LocalSequences::homogeneous(&gp);
    let entries: Vec<(i64, i64, i64, i64)> = (0..=1)
        .flat_map(|t| (-radius..=radius).flat_map(move |a| (0..=1).flat_map(move |t2| (-radius..=radius).map(move |a2| (t, a, t2, a2)))))
        .collect();
    let table: Vec<_> = entries.par_iter().map(|&(t, a, t2, a2)| kernel_k2d(t, a, t2, a2, zv, &seqs, tol)).collect::<Result<_>>()?;
    let mut s = format!(
        "# ff6v bulk x={} w={} y={} theta={} s={} alpha={} tau={} z={:.15e},{:.15e} tol={tol:e}\n",
        fmt_q(&g.x),
        fmt_q(&g.w),
        fmt_q(&g.y),
        fmt_q(&g.theta),
        fmt_q(&g.s),
        fmt_q(&alpha),
        fmt_q(&tau),
        zv.re,
        zv.im
    );
    s += "t,a,t2,a2,k2d,error\n";
    for (&(t, a, t2, a2), k) in entries.iter().zip(&table) {
        s += &format!("{t},{a},{t2},{a2},{:.15e},{:.3e}\n", k.value, k.error);
    }
    let mut pass = true;
    let sched: Vec<usize> = schedule
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<usize>().map_err(|e| Error::Parse(format!("{p}: {e}"))))
        .collect::<Result<_>>()?;
    if z.is_none() && !sched.is_empty() {
        let conv = [(0, 0, 0, 0), (0, 0, 0, 1), (0, 1, 0, 0)];
        let rep = convergence_harness(&g, &RationalLocal::default(), &alpha, &tau, &conv, &sched, tol)?;
        s += "\nn,t,a,t2,a2,k_ap_exact,k_ap,k_2d,gap\n";
        for r in &rep.rows {
            let (t, a, t2, a2) = r.entry;
            s += &format!("{},{t},{a},{t2},{a2},{},{:.15e},{:.15e},{:.3e}\n", r.n, r.k_ap_exact, r.k_ap, r.k_2d, r.gap);
        }
        for e in conv {
            let gaps: Vec<f64> = rep.rows.iter().filter(|r| r.entry == e).map(|r| r.gap).collect();
            let ok = gaps.windows(2).all(|w| w[1] < w[0]) && rate_consistent(&gaps);
            s += &format!("# entry {e:?} decreasing_at_expected_rate={ok}\n");
            pass &= ok;
        }
    }
    Ok(Output { text: s, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ff6v").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn ybe_suite_passes() {
        let o = execute(&cli(&["verify", "ybe", "--seed", "3"])).unwrap();
        assert!(o.pass);
        assert!(o.text.contains("\"seed\": 3"));
    }

    #[test]
    fn incompatible_bank_is_refused() {
        let dir = std::env::temp_dir().join(format!("ff6v-bank-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.json");
        std::fs::write(&path, r#"{"y_tail":"1","s_tail":"1/2","x":["1/2"],"r":["1/2"],"w":["1/10"],"theta":["1/2"]}"#).unwrap();
        let err = execute(&cli(&["verify", "cauchy", "--bank", path.to_str().unwrap()])).unwrap_err();
        assert!(matches!(err, Error::Incompatible(_)), "{err:?}");
        assert!(error_json(&err).contains("\"kind\": \"incompatible\""));
    }

    #[test]
    fn eval_matches_library() {
        let o = execute(&cli(&["eval", "F", "2,1"])).unwrap();
        let (bank, _) = load_bank(&cli(&["eval", "F", "0"])).unwrap();
        let v = f_determinant(&Signature::new(vec![2, 1]).unwrap(), &bank.x, &bank.col).unwrap();
        assert!(o.text.contains(&fmt_q(&v)));
        let o = execute(&cli(&["eval", "phi", "2", "--at", "1/3", "--format", "json"])).unwrap();
        assert!(o.text.contains(&fmt_q(&phi(2, &q(1, 3), &bank.col).unwrap())));
    }

    #[test]
    fn outputs_are_deterministic() {
        for args in [&["kernel", "--amax", "2"][..], &["sample", "--count", "2", "--seed", "7"][..]] {
            let a = execute(&cli(args)).unwrap();
            let b = execute(&cli(args)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn kernel_csv_shape() {
        let o = execute(&cli(&["kernel", "--amax", "2"])).unwrap();
        let lines: Vec<&str> = o.text.lines().collect();
        assert_eq!(lines[1], "t,a,t2,a2,exact,decimal");
        assert_eq!(lines.len(), 2 + 16);
        assert!(lines[2].split(',').count() == 6);
    }

    #[test]
    fn bulk_table_only_at_given_z() {
        let o = execute(&cli(&["bulk", "--z", "0.8,0.3", "--radius", "0"])).unwrap();
        assert!(o.pass);
        assert_eq!(o.text.lines().count(), 2 + 4);
        let refused = execute(&cli(&["bulk", "--alpha", "0", "--tau", "0"])).unwrap_err();
        assert!(matches!(refused, Error::Ordering(_)));
    }
}
