//! WebAssembly bindings for a static demo page. Each export returns a JSON
//! string; the plain Rust functions behind them are usable natively.

use polaron_core::kernels::{deff_weak_noise, solve_rate_history, KernelParams, Trajectory};
use polaron_core::mft::{default_grid, rate_hat_lambda, solve_stationary_void};
use polaron_core::spectral::{leading_eigs_by_momentum, GeneratorSpec};
use polaron_core::Result;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest chain offered by the page; larger sizes stall a browser tab.
pub const DEMO_MAX_SITES: usize = 10;

#[derive(Debug, Serialize)]
pub struct VoidProfile {
    pub s: f64,
    pub hat_lambda: f64,
    pub z: Vec<f64>,
    pub rho: Vec<f64>,
    pub pi: Vec<f64>,
}

/// Stationary void profile on `z ≤ z_max`, thinned to about 400 points.
pub fn void_profile(s: f64, z_max: f64) -> Result<VoidProfile> {
    let sol = solve_stationary_void(s, default_grid())?;
    let keep = sol.z.iter().take_while(|&&z| z <= z_max).count();
    let stride = (keep / 400).max(1);
    let pick = |v: &[f64]| v[..keep].iter().step_by(stride).copied().collect::<Vec<_>>();
    Ok(VoidProfile { s, hat_lambda: rate_hat_lambda(&sol), z: pick(&sol.z), rho: pick(&sol.rho_hat), pi: pick(&sol.pi_hat) })
}

#[derive(Debug, Serialize)]
pub struct RateCurve {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub r0: f64,
    pub deff: f64,
}

/// Pinned filtering rate `r(t)` from the Volterra closure.
pub fn pinned_rate(d: f64, gamma: f64, s: f64, t_max: f64) -> Result<RateCurve> {
    let p = KernelParams::new(d, gamma, s)?;
    let dt = 0.05;
    let h = solve_rate_history(&Trajectory::pinned(dt, t_max), &p)?;
    let stride = (h.times.len() / 400).max(1);
    let (r0, deff) = if gamma > 0.0 { (p.r0(), deff_weak_noise(&p)?) } else { (0.0, 0.0) };
    Ok(RateCurve {
        // The first grid value duplicates the first step.
        t: h.times.iter().skip(1).step_by(stride).copied().collect(),
        r: h.rates.iter().skip(1).step_by(stride).copied().collect(),
        r0,
        deff,
    })
}

#[derive(Debug, Serialize)]
pub struct Dispersion {
    pub k: Vec<f64>,
    pub lambda: Vec<f64>,
    pub n_magnon: Vec<f64>,
    /// `sin²(k/2) + γ` for comparison.
    pub single_magnon: Vec<f64>,
}

/// Leading decay rate per momentum of the depolarized KLS chain.
pub fn kls_dispersion(l: usize, delta: f64, gamma: f64) -> Result<Dispersion> {
    if l > DEMO_MAX_SITES {
        return Err(polaron_core::Error::Capacity(format!("the demo allows at most {DEMO_MAX_SITES} sites")));
    }
    let t = leading_eigs_by_momentum(GeneratorSpec::new(l, delta, gamma, true)?)?;
    Ok(Dispersion {
        k: t.rows.iter().map(|r| r.k).collect(),
        lambda: t.rows.iter().map(|r| r.lambda).collect(),
        n_magnon: t.rows.iter().map(|r| r.n_magnon_mean).collect(),
        single_magnon: t.rows.iter().map(|r| (r.k / 2.0).sin().powi(2) + gamma).collect(),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    match r {
        Ok(v) => serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())),
        Err(e) => Err(JsValue::from_str(&e.to_string())),
    }
}

#[wasm_bindgen(js_name = voidProfile)]
pub fn void_profile_js(s: f64, z_max: f64) -> std::result::Result<String, JsValue> {
    to_js(void_profile(s, z_max))
}

#[wasm_bindgen(js_name = pinnedRate)]
pub fn pinned_rate_js(d: f64, gamma: f64, s: f64, t_max: f64) -> std::result::Result<String, JsValue> {
    to_js(pinned_rate(d, gamma, s, t_max))
}

#[wasm_bindgen(js_name = klsDispersion)]
pub fn kls_dispersion_js(l: usize, delta: f64, gamma: f64) -> std::result::Result<String, JsValue> {
    to_js(kls_dispersion(l, delta, gamma))
}
