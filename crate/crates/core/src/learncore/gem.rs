use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generalized-mean pooling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GemParams {
    pub p: f64,
    /// Inputs are clamped to at least this value before exponentiation.
    pub epsilon: f64,
}

impl Default for GemParams {
    fn default() -> Self {
        GemParams { p: 3.0, epsilon: 1e-6 }
    }
}

/// `((1/n) * sum(max(x, eps)^p))^(1/p)` over one channel's cells.
pub fn gem_pool(cells: &[f64], params: &GemParams) -> Result<f64> {
    if cells.is_empty() {
        return Err(Error::Domain("GeM over an empty cell set".into()));
    }
    if !(params.p.is_finite() && params.p > 0.0) {
        return Err(Error::Config(format!("GeM exponent must be finite and > 0, got {}", params.p)));
    }
    let n = cells.len() as f64;
    let mean = cells
        .iter()
        .map(|&x| x.max(params.epsilon).powf(params.p))
        .sum::<f64>()
        / n;
    Ok(mean.powf(1.0 / params.p))
}

/// Pools a channel-major `[channels][cells]` feature map into one value per channel.
pub fn gem_pool_channels(map: &[Vec<f64>], params: &GemParams) -> Result<Vec<f64>> {
    map.iter().map(|c| gem_pool(c, params)).collect()
}
