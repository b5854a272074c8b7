use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Every model must clear its threshold; then the max.
    Confidence,
    /// Unconditional max.
    Completeness,
}

/// How the scores of several models are fused for one patch pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub criterion: Criterion,
    pub models: Vec<String>,
    #[serde(default)]
    pub thresholds: Vec<f64>,
}

impl EnsembleSpec {
    pub fn completeness(models: Vec<String>) -> Result<Self> {
        let s = EnsembleSpec { criterion: Criterion::Completeness, models, thresholds: Vec::new() };
        s.validate()?;
        Ok(s)
    }

    pub fn confidence(models: Vec<String>, thresholds: Vec<f64>) -> Result<Self> {
        let s = EnsembleSpec { criterion: Criterion::Confidence, models, thresholds };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("ensemble spec lists no models".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(m) = self.models.iter().find(|m| !seen.insert(m.as_str())) {
            return Err(Error::Config(format!("ensemble spec repeats model {m:?}")));
        }
        match self.criterion {
            Criterion::Confidence if self.thresholds.len() != self.models.len() => Err(Error::Config(format!(
                "confidence spec needs one threshold per model ({} models, {} thresholds)",
                self.models.len(),
                self.thresholds.len()
            ))),
            Criterion::Completeness if !self.thresholds.is_empty() => {
                Err(Error::Config("completeness spec takes no thresholds".into()))
            }
            _ if self.thresholds.iter().any(|t| !t.is_finite()) => Err(Error::Config("thresholds must be finite".into())),
            _ => Ok(()),
        }
    }

    /// Fuses per-model scores, looked up by model id. A confidence spec with
    /// a missing model yields `None`; a completeness spec ignores missing
    /// models.
    pub fn evaluate(&self, score_of: impl Fn(&str) -> Option<f64>) -> Option<f64> {
        match self.criterion {
            Criterion::Confidence => {
                let mut gated = Vec::with_capacity(self.models.len());
                for (m, &t) in self.models.iter().zip(&self.thresholds) {
                    gated.push((score_of(m)?, t));
                }
                confidence_ensemble(&gated)
            }
            Criterion::Completeness => {
                let scores: Vec<f64> = self.models.iter().filter_map(|m| score_of(m)).collect();
                completeness_ensemble(&scores)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleFile {
    #[serde(default)]
    pub ensemble: Vec<EnsembleSpec>,
}

/// Parses `[[ensemble]]` tables with `criterion`, `models` and `thresholds`.
pub fn parse_ensemble_specs(text: &str) -> Result<Vec<EnsembleSpec>> {
    let file: EnsembleFile = toml::from_str(text).map_err(|e| Error::Config(format!("ensemble specs: {e}")))?;
    for s in &file.ensemble {
        s.validate()?;
    }
    Ok(file.ensemble)
}

fn max_of(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    values.into_iter().fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

/// `max(scores)` if every score is strictly above its threshold.
pub fn confidence_ensemble(scores: &[(f64, f64)]) -> Option<f64> {
    if scores.iter().all(|&(s, t)| s > t) {
        max_of(scores.iter().map(|p| p.0))
    } else {
        None
    }
}

/// `max(scores)`; `None` for no scores.
pub fn completeness_ensemble(scores: &[f64]) -> Option<f64> {
    max_of(scores.iter().copied())
}

/// Fuses global-local and local-global scores of one image pair.
///
/// Plain mode takes the max of both lists. `top2_average` averages the two
/// largest values of the pooled list (one value is returned as is).
pub fn patch_ensemble(gl: &[f64], lg: &[f64], top2_average: bool) -> Option<f64> {
    if !top2_average {
        return max_of(gl.iter().chain(lg).copied());
    }
    let mut best = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    let mut count = 0;
    for &v in gl.iter().chain(lg) {
        count += 1;
        if v > best {
            second = best;
            best = v;
        } else if v > second {
            second = v;
        }
    }
    match count {
        0 => None,
        1 => Some(best),
        _ => Some((best + second) / 2.0),
    }
}
