//! Thin wasm-bindgen layer over `ff6v` for the static page in `www/`.
//! Each export has a plain Rust twin returning `Result<String, String>` so it
//! can be tested natively.

use ff6v::asymptotics::{critical_point, density, GlobalParams, LocalSequences};
use ff6v::cli::DEFAULT_BANK;
use ff6v::params::{to_f64, ParamBank};
use ff6v::process::{kernel_kap, AscendingFG};
use ff6v::tiling::{render_svg, sample_tiling};
use ff6v::Q;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn process(bank: &str) -> Result<AscendingFG, String> {
    let text = if bank.trim().is_empty() { DEFAULT_BANK } else { bank };
    let b = ParamBank::from_json(text).map_err(|e| e.to_string())?;
    AscendingFG::new(b.x, b.w, b.col).map_err(|e| e.to_string())
}

/// K_AP on {1..T} × {1..amax} as JSON `{points, values}`; rows and columns
/// follow `points`.
pub fn heatmap(bank: &str, amax: i64) -> Result<String, String> {
    if !(1..=12).contains(&amax) {
        return Err(format!("amax = {amax} must lie in 1..=12"));
    }
    let p = process(bank)?;
    let pts: Vec<(usize, i64)> = (1..=p.t()).flat_map(|t| (1..=amax).map(move |a| (t, a))).collect();
    let mut values = Vec::with_capacity(pts.len());
    for &(t, a) in &pts {
        let row: Vec<f64> = pts
            .iter()
            .map(|&(t2, a2)| kernel_kap(&p, t, a, t2, a2).map(|v| to_f64(&v)))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        values.push(row);
    }
    Ok(json!({ "points": pts, "values": values }).to_string())
}

/// SVG of an exactly sampled tiling of the bank's process.
pub fn tiling(bank: &str, seed: u64, cutoff: i64) -> Result<String, String> {
    let p = process(bank)?;
    let eps = Q::new(1.into(), 1_000_000_000.into());
    let tl = sample_tiling(&p, cutoff, eps, seed).map_err(|e| e.to_string())?;
    Ok(render_svg(&tl))
}

/// Bulk density on an nα × nτ grid over (0, alpha_max] × (0, tau_max];
/// cells outside the liquid region are null.
pub fn liquid(params: [f64; 5], alpha_max: f64, tau_max: f64, n_alpha: usize, n_tau: usize) -> Result<String, String> {
    let [x, w, y, theta, s] = params;
    let gp = GlobalParams::new(x, w, y, theta, s).map_err(|e| e.to_string())?;
    if n_alpha == 0 || n_tau == 0 || n_alpha * n_tau > 250_000 {
        return Err(format!("grid {n_alpha} × {n_tau} is empty or too large"));
    }
    let seqs = LocalSequences::homogeneous(&gp);
    let rows: Vec<Vec<Option<f64>>> = (1..=n_tau)
        .map(|j| {
            let tau = tau_max * j as f64 / n_tau as f64;
            (1..=n_alpha)
                .map(|i| {
                    let alpha = alpha_max * i as f64 / n_alpha as f64;
                    critical_point(&gp, alpha, tau).map(|z| density(0, z, &seqs))
                })
                .collect()
        })
        .collect();
    Ok(json!({ "alpha_max": alpha_max, "tau_max": tau_max, "density": rows }).to_string())
}

#[wasm_bindgen]
pub fn kernel_heatmap(bank: &str, amax: i32) -> Result<String, JsValue> {
    heatmap(bank, amax as i64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn tiling_svg(bank: &str, seed: u32, cutoff: i32) -> Result<String, JsValue> {
    tiling(bank, seed as u64, cutoff as i64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn liquid_region(x: f64, w: f64, y: f64, theta: f64, s: f64, alpha_max: f64, tau_max: f64, n: u32) -> Result<String, JsValue> {
    liquid([x, w, y, theta, s], alpha_max, tau_max, n as usize, n as usize).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn default_bank() -> String {
    DEFAULT_BANK.to_string()
}
