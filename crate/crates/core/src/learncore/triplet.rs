use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which space distances are measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripletDistance {
    /// Euclidean distance on the raw embeddings.
    #[default]
    Euclidean,
    /// Euclidean distance after L2-normalizing each embedding.
    NormalizedEuclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TripletConfig {
    pub margin: f64,
    pub distance: TripletDistance,
}

impl Default for TripletConfig {
    fn default() -> Self {
        TripletConfig {
            margin: 0.3,
            distance: TripletDistance::Euclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletOutput {
    pub loss: f64,
    /// Gradient of the loss with respect to each input embedding.
    pub gradient: Vec<Vec<f64>>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_batch(embeddings: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if embeddings.len() != labels.len() {
        return Err(Error::Batch(format!(
            "{} embeddings but {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    let dim = embeddings.first().map(Vec::len).unwrap_or(0);
    if dim == 0 || embeddings.iter().any(|e| e.len() != dim) {
        return Err(Error::Batch("embeddings must share a non-zero dimension".into()));
    }
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::Batch("batch-hard mining needs at least two labels".into()));
    }
    if let Some((l, _)) = counts.iter().find(|(_, &c)| c < 2) {
        return Err(Error::Batch(format!("label {l} has a single sample")));
    }
    Ok(())
}

/// Batch-hard triplet loss: for each anchor, the farthest positive and the
/// nearest negative, hinged at `margin`, averaged over anchors.
///
/// Mining ties resolve to the lowest index. At zero distance the
/// subgradient of the norm is taken as zero.
pub fn triplet_hard_loss(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    cfg: &TripletConfig,
) -> Result<TripletOutput> {
    check_batch(embeddings, labels)?;
    if !cfg.margin.is_finite() || cfg.margin < 0.0 {
        return Err(Error::Config(format!("margin must be finite and >= 0, got {}", cfg.margin)));
    }
    let n = embeddings.len();
    let dim = embeddings[0].len();

    let (points, norms): (Vec<Vec<f64>>, Vec<f64>) = match cfg.distance {
        TripletDistance::Euclidean => (embeddings.to_vec(), vec![1.0; n]),
        TripletDistance::NormalizedEuclidean => embeddings
            .iter()
            .map(|e| {
                let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    (e.clone(), 0.0)
                } else {
                    (e.iter().map(|x| x / norm).collect(), norm)
                }
            })
            .unzip(),
    };
    if norms.iter().any(|&n| n == 0.0) {
        return Err(Error::Batch("cannot normalize a zero embedding".into()));
    }

    let mut loss = 0.0;
    let mut grad = vec![vec![0.0; dim]; n];
    let scale = 1.0 / n as f64;
    for a in 0..n {
        let mut pos: Option<(usize, f64)> = None;
        let mut neg: Option<(usize, f64)> = None;
        for j in 0..n {
            if j == a {
                continue;
            }
            let d = dist(&points[a], &points[j]);
            if labels[j] == labels[a] {
                if pos.is_none_or(|(_, best)| d > best) {
                    pos = Some((j, d));
                }
            } else if neg.is_none_or(|(_, best)| d < best) {
                neg = Some((j, d));
            }
        }
        let ((p, dp), (q, dn)) = (pos.expect("checked"), neg.expect("checked"));
        let hinge = dp - dn + cfg.margin;
        if hinge <= 0.0 {
            continue;
        }
        loss += hinge;
        for k in 0..dim {
            if dp > 0.0 {
                let g = scale * (points[a][k] - points[p][k]) / dp;
                grad[a][k] += g;
                grad[p][k] -= g;
            }
            if dn > 0.0 {
                let g = scale * (points[a][k] - points[q][k]) / dn;
                grad[a][k] -= g;
                grad[q][k] += g;
            }
        }
    }

    if cfg.distance == TripletDistance::NormalizedEuclidean {
        // Chain rule through u = x / |x|: dL/dx = (g - (g . u) u) / |x|.
        for i in 0..n {
            let dot: f64 = grad[i].iter().zip(&points[i]).map(|(g, u)| g * u).sum();
            for k in 0..dim {
                grad[i][k] = (grad[i][k] - dot * points[i][k]) / norms[i];
            }
        }
    }

    Ok(TripletOutput {
        loss: loss * scale,
        gradient: grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn separated_clusters_have_zero_loss() {
        let out = triplet_hard_loss(&one_d(&[0.0, 0.1, 1.0, 0.9]), &[0, 0, 1, 1], &TripletConfig::default()).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.gradient.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn hand_enumerated_anchors() {
        // Anchors: 0.0 -> dp 1.0, dn 0.5 -> 0.8; 1.0 -> dp 1.0, dn 0.4 -> 0.9;
        // 0.5 -> dp 0.1, dn 0.5 -> 0; 0.6 -> dp 0.1, dn 0.4 -> 0.
        let out = triplet_hard_loss(&one_d(&[0.0, 1.0, 0.5, 0.6]), &[0, 0, 1, 1], &TripletConfig::default()).unwrap();
        assert!((out.loss - 0.425).abs() < 1e-12);
    }

    #[test]
    fn zero_margin_separated() {
        let cfg = TripletConfig { margin: 0.0, ..Default::default() };
        let out = triplet_hard_loss(&one_d(&[0.0, 0.0, 5.0, 5.0]), &[3, 3, 8, 8], &cfg).unwrap();
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn batch_errors() {
        let cfg = TripletConfig::default();
        assert!(matches!(triplet_hard_loss(&one_d(&[0.0, 1.0]), &[0, 0], &cfg), Err(Error::Batch(_))));
        assert!(matches!(triplet_hard_loss(&one_d(&[0.0, 1.0, 2.0]), &[0, 0, 1], &cfg), Err(Error::Batch(_))));
        assert!(matches!(triplet_hard_loss(&one_d(&[0.0]), &[0, 0], &cfg), Err(Error::Batch(_))));
    }
}
