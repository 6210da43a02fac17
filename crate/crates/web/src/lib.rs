//! Browser bindings. Each export takes a frame config as JSON (empty string
//! for the default frame) and returns its result as a JSON string.

use pushpull_core::{crossover_points, guidelines, optimal_q, FrameConfig, TrafficLoad};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn frame(config_json: &str) -> Result<FrameConfig, String> {
    if config_json.trim().is_empty() {
        return Ok(FrameConfig::default());
    }
    serde_json::from_str(config_json).map_err(|e| e.to_string())
}

fn to_json(value: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Per-q weighted success and the best q for one load.
pub fn optimize_json(config_json: &str, lambda_q: f64, lambda_p: f64) -> Result<String, String> {
    let cfg = frame(config_json)?;
    let load = TrafficLoad::new(lambda_q, lambda_p).map_err(|e| e.to_string())?;
    let result = optimal_q(&cfg, &load, None).map_err(|e| e.to_string())?;
    to_json(&json!({
        "frame_duration": cfg.frame_duration(),
        "q_max": cfg.q_max(),
        "result": result,
    }))
}

/// Guideline rows for each success target.
pub fn guidelines_json(config_json: &str, p_th: &[f64]) -> Result<String, String> {
    let cfg = frame(config_json)?;
    let tables = p_th
        .iter()
        .map(|&p| {
            guidelines(&cfg, p)
                .map(|rows| json!({ "p_th": p, "rows": rows }))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    to_json(&tables)
}

/// Weighted success of two q values over a push-rate range at a fixed
/// `lambda_q / lambda_p` ratio, plus every crossing in that range.
pub fn sweep_json(
    config_json: &str,
    q_low: u32,
    q_high: u32,
    ratio: f64,
    lambda_p_max: f64,
    steps: u32,
) -> Result<String, String> {
    let cfg = frame(config_json)?;
    if steps < 2 {
        return Err("need at least 2 steps".into());
    }
    if !(lambda_p_max.is_finite() && lambda_p_max > 0.0) {
        return Err(format!("lambda_p_max must be > 0, got {lambda_p_max}"));
    }
    let lambda_p: Vec<f64> = (1..=steps).map(|i| lambda_p_max * i as f64 / steps as f64).collect();
    let curve = |q: u32| -> Result<Vec<f64>, String> {
        lambda_p
            .iter()
            .map(|&lp| {
                let load = TrafficLoad::new(ratio * lp, lp).map_err(|e| e.to_string())?;
                pushpull_core::metrics(&cfg, &load, q, None)
                    .map(|r| r.p_s_weighted)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let low = curve(q_low)?;
    let high = curve(q_high)?;
    let crossings =
        crossover_points(&cfg, q_low, q_high, ratio, Some(lambda_p_max)).map_err(|e| e.to_string())?;
    to_json(&json!({
        "lambda_p": lambda_p,
        "low": { "q": q_low, "p_s_weighted": low },
        "high": { "q": q_high, "p_s_weighted": high },
        "crossings": crossings,
    }))
}

#[wasm_bindgen]
pub fn optimize(config_json: &str, lambda_q: f64, lambda_p: f64) -> Result<String, JsValue> {
    optimize_json(config_json, lambda_q, lambda_p).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = guidelines)]
pub fn guidelines_js(config_json: &str, p_th: Vec<f64>) -> Result<String, JsValue> {
    guidelines_json(config_json, &p_th).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sweep(
    config_json: &str,
    q_low: u32,
    q_high: u32,
    ratio: f64,
    lambda_p_max: f64,
    steps: u32,
) -> Result<String, JsValue> {
    sweep_json(config_json, q_low, q_high, ratio, lambda_p_max, steps).map_err(|e| JsValue::from_str(&e))
}
