//! Pooled ranking metrics: micro average precision, recall at a precision
//! target and the per-rank precision/recall curve.
//!
//! All pairs from all queries are pooled into one list, so a confident match
//! submitted for a distractor query costs precision for everything ranked
//! below it.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::pairs::GroundTruth;
use crate::types::{ImageId, PairScore};

/// Pairs sorted by descending score; ties ordered by `(query, reference)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPairList {
    pairs: Vec<PairScore>,
}

impl RankedPairList {
    /// Sorts the pairs and rejects duplicate `(query, reference)` keys.
    pub fn new(mut pairs: Vec<PairScore>) -> Result<Self> {
        if let Some(p) = pairs.iter().find(|p| !p.score.is_finite()) {
            return Err(Error::Invalid(format!(
                "pair ({}, {}) has non-finite score",
                p.query, p.reference
            )));
        }
        pairs.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.query.cmp(&b.query))
                .then_with(|| a.reference.cmp(&b.reference))
        });
        let mut seen: HashSet<(&ImageId, &ImageId)> = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if !seen.insert((&p.query, &p.reference)) {
                return Err(Error::Invalid(format!(
                    "duplicate pair ({}, {})",
                    p.query, p.reference
                )));
            }
        }
        drop(seen);
        Ok(RankedPairList { pairs })
    }

    pub fn pairs(&self) -> &[PairScore] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn into_pairs(self) -> Vec<PairScore> {
        self.pairs
    }

    fn hits<'a>(&'a self, gt: &'a GroundTruth) -> impl Iterator<Item = bool> + 'a {
        self.pairs.iter().map(|p| gt.is_positive(&p.query, &p.reference))
    }
}

fn total(gt: &GroundTruth) -> Result<f64> {
    match gt.total_positives() {
        0 => Err(Error::Domain("ground truth has no positives".into())),
        n => Ok(n as f64),
    }
}

/// Sum of precision@r over true-positive ranks, divided by the total number
/// of positives (retrieved or not).
pub fn micro_ap(ranked: &RankedPairList, gt: &GroundTruth) -> Result<f64> {
    let total = total(gt)?;
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (i, hit) in ranked.hits(gt).enumerate() {
        if hit {
            hits += 1;
            acc += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(acc / total)
}

/// Recall at the deepest rank whose prefix precision is at least `target`;
/// zero when no prefix qualifies.
pub fn recall_at_precision(ranked: &RankedPairList, gt: &GroundTruth, target: f64) -> Result<f64> {
    let total = total(gt)?;
    let mut hits = 0usize;
    let mut best = 0usize;
    for (i, hit) in ranked.hits(gt).enumerate() {
        hits += usize::from(hit);
        if hits as f64 >= target * (i + 1) as f64 {
            best = hits;
        }
    }
    Ok(best as f64 / total)
}

/// `(recall, precision)` after each rank.
pub fn pr_curve(ranked: &RankedPairList, gt: &GroundTruth) -> Result<Vec<(f64, f64)>> {
    let total = total(gt)?;
    let mut hits = 0usize;
    Ok(ranked
        .hits(gt)
        .enumerate()
        .map(|(i, hit)| {
            hits += usize::from(hit);
            (hits as f64 / total, hits as f64 / (i + 1) as f64)
        })
        .collect())
}
