//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; failures come back as `{"error": "..."}`
//! so the page never has to catch a JavaScript exception. The `*_json`
//! functions hold the logic and are callable from native code.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use hybrid_mimo::analog::{design_analog_precoder, PhaseProjConfig};
use hybrid_mimo::channel::steering_vector;
use hybrid_mimo::matdecomp::{svd_ordered, waterfill, WaterfillMode};
use hybrid_mimo::sim::{run_se_sweep, trial_channel, DesignMethod, SweepConfig};
use hybrid_mimo::CMat;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

fn to_string(r: Result<Value>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err("power grid needs step > 0 and stop >= start".into());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 200 {
        return Err("power grid has more than 200 points".into());
    }
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

fn base_config(n: usize, m: usize, l: usize, d: usize, seed: u64) -> SweepConfig {
    let mut cfg = SweepConfig::new(DesignMethod::PhaseProj);
    cfg.n = n;
    cfg.m = m;
    cfg.l = l;
    cfg.d = d;
    cfg.master_seed = seed;
    cfg
}

/// Mean spectral efficiency per method over a mmWave power sweep.
#[allow(clippy::too_many_arguments)]
pub fn se_curves_json(
    n: usize,
    m: usize,
    l: usize,
    d: usize,
    methods: &str,
    start_db: f64,
    stop_db: f64,
    step_db: f64,
    trials: usize,
    seed: u64,
) -> Result<Value> {
    let power_db = grid(start_db, stop_db, step_db)?;
    let mut curves = Vec::new();
    for tag in methods.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let method: DesignMethod = tag.parse().map_err(|e: hybrid_mimo::Error| e.to_string())?;
        let mut cfg = base_config(n, m, l, d, seed);
        cfg.method = method;
        cfg.power_db = power_db.clone();
        cfg.trials = trials;
        let r = run_se_sweep(&cfg).map_err(|e| e.to_string())?;
        curves.push(json!({
            "method": tag,
            "mean": r.points.iter().map(|p| p.mean).collect::<Vec<_>>(),
            "stderr": r.points.iter().map(|p| p.stderr).collect::<Vec<_>>(),
            "failures": r.points.iter().map(|p| p.failures).collect::<Vec<_>>(),
        }));
    }
    if curves.is_empty() {
        return Err("no methods selected".into());
    }
    Ok(json!({ "power_db": power_db, "curves": curves }))
}

/// Gain `|a(θ)ᴴ w|² / ‖w‖²` of column `w` over `angles_deg`.
fn pattern(w: &CMat, col: usize, angles_deg: &[f64], spacing: f64) -> Vec<f64> {
    let c = w.column(col);
    let norm = c.norm_squared().max(f64::MIN_POSITIVE);
    angles_deg
        .iter()
        .map(|a| {
            let s = steering_vector(w.nrows(), a.to_radians(), spacing);
            s.dotc(&c).norm_sqr() * w.nrows() as f64 / norm
        })
        .collect()
}

/// Transmit beam patterns of the phase-shifter precoder next to the
/// unconstrained right singular vectors it approximates, for one mmWave
/// channel draw.
pub fn beam_pattern_json(
    n: usize,
    m: usize,
    l: usize,
    trial: usize,
    seed: u64,
    points: usize,
) -> Result<Value> {
    if !(2..=4096).contains(&points) {
        return Err("points must lie in 2..=4096".into());
    }
    let cfg = base_config(n, m, l, l, seed);
    cfg.validate().map_err(|e| e.to_string())?;
    let h = trial_channel(&cfg, trial).map_err(|e| e.to_string())?;
    let v = svd_ordered(&h)
        .map_err(|e| e.to_string())?
        .v
        .columns(0, l)
        .into_owned();
    let f_a = design_analog_precoder(&v, &PhaseProjConfig::default())
        .map_err(|e| e.to_string())?
        .matrix;
    let spacing = cfg.mmwave.antenna_spacing_wavelengths;
    let angles: Vec<f64> = (0..points)
        .map(|k| -90.0 + 180.0 * k as f64 / (points - 1) as f64)
        .collect();
    let beams: Vec<Value> = (0..l)
        .map(|j| {
            json!({
                "analog": pattern(&f_a, j, &angles, spacing),
                "unconstrained": pattern(&v, j, &angles, spacing),
            })
        })
        .collect();
    Ok(json!({ "angles_deg": angles, "beams": beams }))
}

/// Water-filling allocation; `weights` empty selects the capacity form.
pub fn waterfill_json(gains: &[f64], budget: f64, weights: &[f64]) -> Result<Value> {
    let mode = if weights.is_empty() {
        WaterfillMode::Capacity
    } else {
        WaterfillMode::WeightedMse(weights.to_vec())
    };
    let power = waterfill(gains, budget, &mode).map_err(|e| e.to_string())?;
    // capacity level 1/g + p over the active channels
    let level = gains
        .iter()
        .zip(&power)
        .find(|(_, p)| **p > 0.0)
        .map(|(g, p)| 1.0 / g + p);
    Ok(json!({
        "power": power,
        "floor": gains.iter().map(|g| 1.0 / g).collect::<Vec<_>>(),
        "level": if weights.is_empty() { level } else { None },
    }))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn se_curves(
    n: usize,
    m: usize,
    l: usize,
    d: usize,
    methods: &str,
    start_db: f64,
    stop_db: f64,
    step_db: f64,
    trials: usize,
    seed: u32,
) -> String {
    to_string(se_curves_json(
        n,
        m,
        l,
        d,
        methods,
        start_db,
        stop_db,
        step_db,
        trials,
        u64::from(seed),
    ))
}

#[wasm_bindgen]
pub fn beam_pattern(
    n: usize,
    m: usize,
    l: usize,
    trial: usize,
    seed: u32,
    points: usize,
) -> String {
    to_string(beam_pattern_json(n, m, l, trial, u64::from(seed), points))
}

#[wasm_bindgen(js_name = waterfill)]
pub fn waterfill_js(gains: &[f64], budget: f64, weights: &[f64]) -> String {
    to_string(waterfill_json(gains, budget, weights))
}
