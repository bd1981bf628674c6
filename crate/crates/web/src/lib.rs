//! Browser bindings for the demo page in `www/`. Every export takes and
//! returns plain strings (JSON for structured results); the logic lives in
//! [`demo`] so it can be tested natively.

use wasm_bindgen::prelude::*;

pub mod demo;

/// Renders one question per entity type. See [`demo::prompts`].
#[wasm_bindgen]
pub fn render_prompts(template: &str, types: &str, fill: &str, five_ws: bool) -> Result<String, JsError> {
    demo::prompts(template, types, fill, five_ws).map_err(|e| JsError::new(&e))
}

/// Converts BIO text to SQuAD 2.0. See [`demo::convert`].
#[wasm_bindgen]
pub fn convert_bio(bio: &str, column_order: &str, template: &str, mode: &str) -> Result<String, JsError> {
    demo::convert(bio, column_order, template, mode).map_err(|e| JsError::new(&e))
}

/// Decodes noisy oracle logits for BIO text. See [`demo::explore`].
#[wasm_bindgen]
pub fn explore_decoding(
    bio: &str,
    column_order: &str,
    threshold: f64,
    n_best: usize,
    noise: f64,
    seed: u64,
    normalization: &str,
) -> Result<String, JsError> {
    let opts = demo::ExploreOptions {
        threshold,
        n_best,
        noise,
        seed,
        normalization: normalization.to_string(),
    };
    demo::explore(bio, column_order, &opts).map_err(|e| JsError::new(&e))
}
