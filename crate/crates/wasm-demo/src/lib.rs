//! WebAssembly bindings for a small interactive page: the threshold curve `E(β₀)`, the
//! lowest band `E₁(p)` and the ground state of `h_{β₀}` on an elliptic cross-section.
//!
//! The computations live in [`compute`] so that they can be tested natively.

use wasm_bindgen::prelude::*;

pub mod compute;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// `[β₀, E(β₀)]` pairs, flattened, for `n` equally spaced β₀ in `[0, beta_max]`.
#[wasm_bindgen]
pub fn threshold_curve(a: f64, b: f64, h: f64, beta_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    compute::threshold_curve(a, b, h, beta_max, n).map(flatten).map_err(js)
}

/// `[p, E₁(p)]` pairs, flattened, on a symmetric grid of `n` points (odd) in `[-p_max, p_max]`.
#[wasm_bindgen]
pub fn band_function(a: f64, b: f64, h: f64, beta0: f64, p_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    compute::band(a, b, h, beta0, p_max, n).map(flatten).map_err(js)
}

/// Ground state on its bounding grid.
#[wasm_bindgen]
pub struct GroundState {
    inner: compute::GroundImage,
}

#[wasm_bindgen]
impl GroundState {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.inner.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.inner.height
    }

    /// Threshold `E(β₀)`.
    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> f64 {
        self.inner.e
    }

    /// Row-major values with `t₂` fastest, normalized to a maximum of 1; `NaN` outside.
    pub fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }
}

#[wasm_bindgen]
pub fn ground_state(a: f64, b: f64, h: f64, beta0: f64) -> Result<GroundState, JsError> {
    compute::ground_image(a, b, h, beta0).map(|inner| GroundState { inner }).map_err(js)
}

fn flatten(points: Vec<(f64, f64)>) -> Vec<f64> {
    points.into_iter().flat_map(|(x, y)| [x, y]).collect()
}
