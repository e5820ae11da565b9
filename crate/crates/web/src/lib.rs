//! WebAssembly bindings for the browser demo in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js_err(e: esdnn::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo views serialize")
}

#[wasm_bindgen]
pub fn smtf_table(series_csv: &str, window: usize, covariates: bool) -> Result<String, JsValue> {
    demo::smtf_table(series_csv, window, covariates).map_err(js_err)
}

/// JSON `{m_base, m_pred, ratio_mean}`.
#[wasm_bindgen]
pub fn simulate_scaling(actual: &str, predicted: &str, scenario: &str, threshold: f64) -> Result<String, JsValue> {
    demo::simulate_scaling(actual, predicted, scenario, threshold)
        .map(|v| json(&v))
        .map_err(js_err)
}

/// JSON `{actual, predicted, val_mse}`.
#[wasm_bindgen]
pub fn forecast_sine(kind: &str, len: usize, noise: f64, epochs: usize, seed: u64) -> Result<String, JsValue> {
    demo::forecast_sine(kind, len, noise, epochs, seed)
        .map(|v| json(&v))
        .map_err(js_err)
}
