use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothConfig {
    pub epsilon: f64,
    pub classes: usize,
}

impl SmoothConfig {
    pub fn new(classes: usize) -> Self {
        SmoothConfig { epsilon: 0.1, classes }
    }
}

/// Target distribution `(1 - eps) * onehot(target) + eps / C`.
pub fn smoothed_targets(target: usize, cfg: &SmoothConfig) -> Vec<f64> {
    let c = cfg.classes as f64;
    (0..cfg.classes)
        .map(|k| if k == target { 1.0 - cfg.epsilon } else { 0.0 } + cfg.epsilon / c)
        .collect()
}

/// Cross-entropy against label-smoothed targets. Returns the loss and its
/// gradient with respect to the logits (`softmax - q`).
pub fn ce_label_smooth(logits: &[f64], target: usize, cfg: &SmoothConfig) -> Result<(f64, Vec<f64>)> {
    if cfg.classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {}", cfg.classes)));
    }
    if !(0.0..1.0).contains(&cfg.epsilon) {
        return Err(Error::Config(format!("smoothing epsilon {} outside [0, 1)", cfg.epsilon)));
    }
    if logits.len() != cfg.classes {
        return Err(Error::Domain(format!(
            "{} logits for {} classes",
            logits.len(),
            cfg.classes
        )));
    }
    if target >= cfg.classes {
        return Err(Error::Domain(format!("target {target} out of {} classes", cfg.classes)));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let q = smoothed_targets(target, cfg);
    let loss = -q.iter().zip(logits).map(|(qk, &z)| qk * (z - lse)).sum::<f64>();
    let grad = q.iter().zip(logits).map(|(qk, &z)| (z - lse).exp() - qk).collect();
    Ok((loss, grad))
}
