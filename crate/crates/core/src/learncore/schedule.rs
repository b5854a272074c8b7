use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Warmup, hold and cosine-decay boundaries of the learning-rate ratio curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub warmup_end: f64,
    pub hold_end: f64,
    pub total: f64,
    /// Ratio at epoch 0.
    pub floor: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            warmup_end: 5.0,
            hold_end: 10.0,
            total: 25.0,
            floor: 0.01,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.warmup_end > 0.0
            && self.warmup_end < self.hold_end
            && self.hold_end < self.total
            && (0.0..=1.0).contains(&self.floor);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "schedule needs 0 < warmup_end < hold_end < total and floor in [0, 1], got {self:?}"
            )))
        }
    }
}

/// Multiplier applied to the base learning rate at a (fractional) epoch.
///
/// Linear warmup from `floor` to 1, flat at 1, then half-cosine decay to 0.
pub fn lr_ratio(epoch: f64, cfg: &ScheduleConfig) -> Result<f64> {
    cfg.validate()?;
    if !(0.0..cfg.total).contains(&epoch) {
        return Err(Error::Domain(format!(
            "epoch {epoch} outside [0, {})",
            cfg.total
        )));
    }
    let ratio = if epoch < cfg.warmup_end {
        (1.0 - cfg.floor) * epoch / cfg.warmup_end + cfg.floor
    } else if epoch < cfg.hold_end {
        1.0
    } else {
        let t = (epoch - cfg.hold_end) / (cfg.total - cfg.hold_end);
        0.5 * ((t * PI).cos() + 1.0)
    };
    Ok(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(e: f64) -> f64 {
        lr_ratio(e, &ScheduleConfig::default()).unwrap()
    }

    #[test]
    fn worked_values() {
        assert_eq!(r(0.0), 0.01);
        assert_eq!(r(7.0), 1.0);
        assert!((r(17.5) - 0.5).abs() < 1e-12);
        assert!((r(2.0) - (0.99 * 2.0 / 5.0 + 0.01)).abs() < 1e-12);
    }

    #[test]
    fn continuity_at_boundaries() {
        let below = |e: f64| r(e - 1e-13);
        assert!((below(5.0) - 1.0).abs() < 1e-12);
        assert_eq!(r(5.0), 1.0);
        assert!((below(10.0) - 1.0).abs() < 1e-12);
        assert_eq!(r(10.0), 1.0);
        assert!(r(25.0 - 1e-9) < 1e-12);
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let cfg = ScheduleConfig::default();
        assert!(matches!(lr_ratio(-0.1, &cfg), Err(Error::Domain(_))));
        assert!(matches!(lr_ratio(25.0, &cfg), Err(Error::Domain(_))));
        assert!(matches!(lr_ratio(f64::NAN, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_unordered_config() {
        let cfg = ScheduleConfig { warmup_end: 10.0, hold_end: 5.0, ..Default::default() };
        assert!(matches!(lr_ratio(1.0, &cfg), Err(Error::Config(_))));
    }
}
