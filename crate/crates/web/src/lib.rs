//! Browser bindings. Each export takes a job configuration as JSON text
//! and returns the same JSON report the command line prints.

use frobkit::cli::{self, JobConfig, Outcome};
use wasm_bindgen::prelude::*;

fn finish(r: frobkit::Result<Outcome>) -> Result<String, JsError> {
    let o = r.map_err(|e| JsError::new(&e.to_string()))?;
    Ok(serde_json::to_string_pretty(&o.report).expect("report serializes"))
}

fn config(text: &str) -> Result<JobConfig, JsError> {
    JobConfig::parse(text).map_err(|e| JsError::new(&e.to_string()))
}

/// Elementary levels, the APF constant and ramification polygons.
#[wasm_bindgen]
pub fn tower(config_json: &str, levels: u32, polygons: u32) -> Result<String, JsError> {
    finish(cli::run_tower(&config(config_json)?, levels, polygons))
}

/// Whether some `φⁿ(f/u)` is a power of `E`, `n ≤ params.N`.
#[wasm_bindgen]
pub fn hypothesis(config_json: &str) -> Result<String, JsError> {
    finish(cli::run_kisin_hypothesis(&config(config_json)?))
}

/// Gauge trace of `Y_n` for the matrix in `params.matrix`.
#[wasm_bindgen]
pub fn xi_gauges(config_json: &str) -> Result<String, JsError> {
    finish(cli::run_kisin_xi(&config(config_json)?))
}

/// Explicit configurations of the named presets.
#[wasm_bindgen]
pub fn presets(p: u32) -> Result<String, JsError> {
    finish(cli::run_presets(p as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exports_return_reports() {
        let cfg = r#"{"field": {"p": 3}, "preset": "twisted", "params": {"N": 3}}"#;
        let v: serde_json::Value = serde_json::from_str(&hypothesis(cfg).unwrap()).unwrap();
        assert_eq!(v, serde_json::json!({"found": true, "n": 1, "k": 2}));
        let t: serde_json::Value = serde_json::from_str(&tower(cfg, 2, 1).unwrap()).unwrap();
        assert_eq!(t["levels"].as_array().unwrap().len(), 2);
        let xi = r#"{"field": {"p": 3}, "preset": "classical", "f": [9, 0, 1], "precision": {"u_order": 12},
                    "params": {"matrix": [[[3, 0, 1]]], "steps": 3}}"#;
        let x: serde_json::Value = serde_json::from_str(&xi_gauges(xi).unwrap()).unwrap();
        assert_eq!(x["gauges"].as_array().unwrap().len(), 3);
        assert!(presets(5).unwrap().contains("lubin-tate"));
    }
}
