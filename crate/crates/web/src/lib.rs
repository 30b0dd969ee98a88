//! WebAssembly bindings for the demo page in `www/`. Every export takes plain
//! numbers and returns either a flat `Float64Array` or a JSON string.

use roughcalc::experiments::{run_remainder_scaling, ExperimentConfig};
use roughcalc::gaussian::{sample_ensemble_circulant, RngStream};
use roughcalc::{AdaptedIndex, CovarianceModel, GramContext, TimeGrid};
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_GRID: usize = 1024;
const MAX_PATHS: usize = 64;

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn check_grid(n: usize) -> Result<(), JsError> {
    if n == 0 || n > MAX_GRID {
        return Err(JsError::new(&format!("grid size must be in 1..={MAX_GRID}")));
    }
    Ok(())
}

/// `count` fBM paths on `n` uniform points of `[0, 1]`, row-major.
#[wasm_bindgen]
pub fn fbm_paths(hurst: f64, n: usize, count: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    check_grid(n)?;
    if count == 0 || count > MAX_PATHS {
        return Err(JsError::new(&format!("path count must be in 1..={MAX_PATHS}")));
    }
    let model = CovarianceModel::fbm(hurst).map_err(err)?;
    let grid = TimeGrid::uniform(n, 1.0).map_err(err)?;
    let (ens, _) = sample_ensemble_circulant(&model, &grid, count, RngStream::new(seed, 0)).map_err(err)?;
    Ok(ens.as_slice().to_vec())
}

/// Prediction of `X_1` from the path up to each grid time: for every prefix
/// `j = 0..=n` the conditional variance `|(Id - P_j) k_1|^2`, followed by the
/// coefficients of `P_{n/2} k_1` evaluated at the grid times.
#[wasm_bindgen]
pub fn projection_curves(hurst: f64, n: usize) -> Result<String, JsError> {
    check_grid(n)?;
    let ctx = GramContext::new(CovarianceModel::fbm(hurst).map_err(err)?, TimeGrid::uniform(n, 1.0).map_err(err)?)
        .map_err(err)?;
    let kt = ctx.representer(n - 1).map_err(err)?;
    let mut variance = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let p = ctx.project_adapted(&kt, AdaptedIndex::new(j, &ctx).map_err(err)?).map_err(err)?;
        variance.push(ctx.norm_sq(&kt.sub(&p)).map_err(err)?.max(0.0));
    }
    let half = ctx
        .project_adapted(&kt, AdaptedIndex::new(n / 2, &ctx).map_err(err)?)
        .map_err(err)?;
    let values = ctx.apply_sigma(&half);
    Ok(json!({
        "times": ctx.grid().times(),
        "conditional_variance": variance,
        "half_projection_values": values,
        "half_projection_coeffs": half.coeffs(),
    })
    .to_string())
}

/// Runs the remainder-scaling experiment at browser scale and returns its
/// report as JSON.
#[wasm_bindgen]
pub fn remainder_report(hurst: f64, functional: &str, paths: usize, seed: u64) -> Result<String, JsError> {
    let mut cfg = ExperimentConfig::default();
    cfg.set("hurst", &hurst.to_string()).map_err(err)?;
    cfg.set("functional", functional).map_err(err)?;
    cfg.paths = paths;
    cfg.seed = seed;
    cfg.remainder_grid_n = Some(64);
    Ok(run_remainder_scaling(&cfg).map_err(err)?.to_json())
}
