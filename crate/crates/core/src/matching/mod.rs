//! Patch-pair scoring, model and patch ensembles, test-time tricks and the
//! end-to-end ranking pipeline.
//!
//! Matching modes follow the patch roles: global-global pairs the two
//! original frames, global-local pairs every query patch with the reference
//! original, and local-global pairs the query original with every reference
//! patch.

mod ensemble;
mod kernel;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ensemble::{
    completeness_ensemble, confidence_ensemble, parse_ensemble_specs, patch_ensemble, Criterion, EnsembleFile,
    EnsembleSpec,
};

use crate::error::{Error, Result};
use crate::evaluation::RankedPairList;
use crate::patches::{is_original_patch, ORIGINAL_PATCH};
use crate::types::{FeatureRecord, FeatureStore, ImageId, PairScore};

/// Which patch pairs are scored besides global-global.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchModes {
    pub global_local: bool,
    pub local_global: bool,
}

impl Default for MatchModes {
    fn default() -> Self {
        MatchModes { global_local: true, local_global: true }
    }
}

impl MatchModes {
    pub const GLOBAL_ONLY: MatchModes = MatchModes { global_local: false, local_global: false };
}

/// One raw inner product between a query patch and a reference patch.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub query: ImageId,
    pub query_patch: String,
    pub reference: ImageId,
    pub reference_patch: String,
    pub model: String,
    pub scale: u32,
    pub score: f64,
}

impl ScoreEntry {
    fn sort_key(&self) -> (&str, &str, &str, &str, &str, u32) {
        (
            self.query.as_str(),
            self.query_patch.as_str(),
            self.reference.as_str(),
            self.reference_patch.as_str(),
            self.model.as_str(),
            self.scale,
        )
    }
}

/// Scores keyed by (query, query patch, reference, reference patch, model,
/// scale), kept sorted by that key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    entries: Vec<ScoreEntry>,
}

impl ScoreTable {
    pub fn new(mut entries: Vec<ScoreEntry>) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| !e.score.is_finite()) {
            return Err(Error::Invalid(format!("non-finite score for {:?}", e.sort_key())));
        }
        entries.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        if let Some(w) = entries.windows(2).find(|w| w[0].sort_key() == w[1].sort_key()) {
            return Err(Error::Invalid(format!("duplicate score entry {:?}", w[0].sort_key())));
        }
        Ok(ScoreTable { entries })
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, query: &str, query_patch: &str, reference: &str, reference_patch: &str, model: &str, scale: u32) -> Option<f64> {
        let key = (query, query_patch, reference, reference_patch, model, scale);
        self.entries.binary_search_by(|e| e.sort_key().cmp(&key)).ok().map(|i| self.entries[i].score)
    }
}

type GroupKey<'a> = (&'a str, u32);

/// Records of one store grouped by (model, scale).
fn group_records(store: &FeatureStore) -> BTreeMap<GroupKey<'_>, Vec<&FeatureRecord>> {
    let mut groups: BTreeMap<GroupKey<'_>, Vec<&FeatureRecord>> = BTreeMap::new();
    for r in store.records() {
        groups.entry((r.model.as_str(), r.scale)).or_default().push(r);
    }
    groups
}

fn by_image(store: &FeatureStore) -> BTreeMap<&str, Vec<&FeatureRecord>> {
    let mut m: BTreeMap<&str, Vec<&FeatureRecord>> = BTreeMap::new();
    for r in store.records() {
        m.entry(r.image.as_str()).or_default().push(r);
    }
    m
}

fn check_dims(queries: &FeatureStore, references: &FeatureStore) -> Result<()> {
    if queries.dim() != references.dim() && !queries.is_empty() && !references.is_empty() {
        return Err(Error::Config(format!(
            "query store dim {} differs from reference store dim {}",
            queries.dim(),
            references.dim()
        )));
    }
    Ok(())
}

/// Raw inner products for the patch pairs selected by `modes`, restricted
/// to records of the same model and scale.
pub fn pairwise_scores(queries: &FeatureStore, references: &FeatureStore, modes: MatchModes) -> Result<ScoreTable> {
    check_dims(queries, references)?;
    let ref_groups = group_records(references);
    let per_query: Vec<Vec<ScoreEntry>> = by_image(queries)
        .into_par_iter()
        .map(|(_, qrecs)| {
            let mut out = Vec::new();
            let mut qgroups: BTreeMap<GroupKey<'_>, Vec<&FeatureRecord>> = BTreeMap::new();
            for r in qrecs {
                qgroups.entry((r.model.as_str(), r.scale)).or_default().push(r);
            }
            for (key, qs) in qgroups {
                let Some(rs) = ref_groups.get(&key) else { continue };
                let qv: Vec<&[f32]> = qs.iter().map(|r| r.vector.as_slice()).collect();
                let rv: Vec<&[f32]> = rs.iter().map(|r| r.vector.as_slice()).collect();
                let m = kernel::dot_block(&qv, &rv);
                for (i, q) in qs.iter().enumerate() {
                    let q_orig = q.patch == ORIGINAL_PATCH;
                    for (j, r) in rs.iter().enumerate() {
                        let r_orig = r.patch == ORIGINAL_PATCH;
                        let wanted = (q_orig && r_orig) || (modes.global_local && r_orig) || (modes.local_global && q_orig);
                        if wanted {
                            out.push(ScoreEntry {
                                query: q.image.clone(),
                                query_patch: q.patch.clone(),
                                reference: r.image.clone(),
                                reference_patch: r.patch.clone(),
                                model: q.model.clone(),
                                scale: q.scale,
                                score: m[i * rs.len() + j],
                            });
                        }
                    }
                }
            }
            out
        })
        .collect();
    ScoreTable::new(per_query.into_iter().flatten().collect())
}

/// Predicate marking reference images on which local-global matching is
/// skipped (e.g. images where a face detector fires).
#[derive(Clone, Default)]
pub struct FaceSkip(Option<Arc<dyn Fn(&ImageId) -> bool + Send + Sync>>);

impl FaceSkip {
    pub fn new(f: impl Fn(&ImageId) -> bool + Send + Sync + 'static) -> Self {
        FaceSkip(Some(Arc::new(f)))
    }

    /// Skips the listed references.
    pub fn from_ids(ids: impl IntoIterator<Item = ImageId>) -> Self {
        let set: BTreeSet<ImageId> = ids.into_iter().collect();
        FaceSkip::new(move |id| set.contains(id))
    }

    pub fn skips(&self, reference: &ImageId) -> bool {
        self.0.as_ref().is_some_and(|f| f(reference))
    }
}

impl fmt::Debug for FaceSkip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0.is_some() { "FaceSkip(<predicate>)" } else { "FaceSkip(none)" })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrickConfig {
    /// Factor applied to scores involving a patch other than the original
    /// frame or one of its right-angle rotations.
    pub partial_penalty: f64,
    /// Minimum shorter side of a query crop; applied when patches are cut.
    pub min_patch_side: u32,
    /// Average the two best patch-pair scores instead of taking the best.
    pub top2_average: bool,
    #[serde(skip)]
    pub face_skip: FaceSkip,
}

impl Default for TrickConfig {
    fn default() -> Self {
        TrickConfig { partial_penalty: 0.95, min_patch_side: 32, top2_average: false, face_skip: FaceSkip::default() }
    }
}

impl TrickConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.partial_penalty > 0.0 && self.partial_penalty <= 1.0) {
            return Err(Error::Config(format!("partial_penalty {} outside (0, 1]", self.partial_penalty)));
        }
        Ok(())
    }

    fn factor(&self, query_patch: &str, reference_patch: &str) -> f64 {
        if is_original_patch(query_patch) && is_original_patch(reference_patch) {
            1.0
        } else {
            self.partial_penalty
        }
    }
}

/// Applies the partial-patch penalty and drops local-global entries of
/// references selected by `face_skip`.
pub fn apply_tricks(table: &ScoreTable, cfg: &TrickConfig) -> Result<ScoreTable> {
    cfg.validate()?;
    let entries = table
        .entries()
        .iter()
        .filter(|e| e.reference_patch == ORIGINAL_PATCH || !cfg.face_skip.skips(&e.reference))
        .map(|e| ScoreEntry { score: e.score * cfg.factor(&e.query_patch, &e.reference_patch), ..e.clone() })
        .collect();
    Ok(ScoreTable { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    /// References kept per query patch by raw score; 0 keeps all.
    pub top_t: usize,
    pub modes: MatchModes,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { top_t: 50, modes: MatchModes::default() }
    }
}

struct RefIndex<'a> {
    ids: Vec<&'a ImageId>,
    /// Per group: reference originals and all reference records, each with
    /// the reference index.
    groups: BTreeMap<GroupKey<'a>, RefGroup<'a>>,
}

#[derive(Default)]
struct RefGroup<'a> {
    orig: Vec<(usize, &'a [f32])>,
    local: Vec<(usize, &'a str, &'a [f32])>,
}

impl<'a> RefIndex<'a> {
    fn build(store: &'a FeatureStore) -> Self {
        let mut ids: Vec<&ImageId> = store.records().iter().map(|r| &r.image).collect();
        ids.sort();
        ids.dedup();
        let mut groups: BTreeMap<GroupKey<'a>, RefGroup<'a>> = BTreeMap::new();
        let mut sorted: Vec<&FeatureRecord> = store.records().iter().collect();
        sorted.sort_by(|a, b| a.key().cmp(&b.key()));
        for r in sorted {
            let idx = ids.binary_search(&&r.image).expect("id collected above");
            let g = groups.entry((r.model.as_str(), r.scale)).or_default();
            if r.patch == ORIGINAL_PATCH {
                g.orig.push((idx, r.vector.as_slice()));
            } else {
                g.local.push((idx, r.patch.as_str(), r.vector.as_slice()));
            }
        }
        RefIndex { ids, groups }
    }
}

/// Per reference: (query patch, reference patch) -> model -> best score over scales.
type PairScores<'a> = BTreeMap<(&'a str, &'a str), BTreeMap<&'a str, f64>>;

fn keep_max<'a>(slot: &mut PairScores<'a>, qp: &'a str, rp: &'a str, model: &'a str, s: f64) {
    let m = slot.entry((qp, rp)).or_default().entry(model).or_insert(f64::NEG_INFINITY);
    *m = m.max(s);
}

/// Inserts the top `t` references of `scores` (by score, then index) into `out`.
fn top_refs(scores: &[(usize, f64)], t: usize, out: &mut BTreeSet<usize>) {
    if t == 0 || scores.len() <= t {
        out.extend(scores.iter().map(|s| s.0));
        return;
    }
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out.extend(v[..t].iter().map(|s| s.0));
}

fn fuse_models(models: &BTreeMap<&str, f64>, specs: &[EnsembleSpec]) -> Option<f64> {
    if specs.is_empty() {
        return completeness_ensemble(&models.values().copied().collect::<Vec<_>>());
    }
    let fused: Vec<f64> = specs.iter().filter_map(|s| s.evaluate(|m| models.get(m).copied())).collect();
    completeness_ensemble(&fused)
}

/// Scores every candidate (query, reference) pair and ranks them.
///
/// For each patch pair, the scores of one model are combined over scales by
/// max, then models are fused by `specs` (several specs by max; with no
/// specs, completeness over all models). Thresholds gate raw scores; the
/// partial penalty is applied after fusion. Global-local and local-global
/// lists are then fused by [`patch_ensemble`]. Candidates are the top
/// `top_t` references of each query record.
pub fn match_pipeline(
    queries: &FeatureStore,
    references: &FeatureStore,
    specs: &[EnsembleSpec],
    tricks: &TrickConfig,
    cfg: &MatchConfig,
) -> Result<RankedPairList> {
    tricks.validate()?;
    for s in specs {
        s.validate()?;
    }
    check_dims(queries, references)?;
    let index = RefIndex::build(references);
    let modes = cfg.modes;

    let per_query: Vec<Vec<PairScore>> = by_image(queries)
        .into_par_iter()
        .map(|(_, qrecs)| {
            let qid = &qrecs[0].image;
            let mut candidates = BTreeSet::new();
            let mut slots: BTreeMap<usize, PairScores<'_>> = BTreeMap::new();
            let mut sorted = qrecs.clone();
            sorted.sort_by(|a, b| a.key().cmp(&b.key()));
            for q in &sorted {
                let Some(g) = index.groups.get(&(q.model.as_str(), q.scale)) else { continue };
                let q_orig = q.patch == ORIGINAL_PATCH;
                if q_orig || modes.global_local {
                    let cols: Vec<&[f32]> = g.orig.iter().map(|o| o.1).collect();
                    let row = kernel::dot_block(&[q.vector.as_slice()], &cols);
                    let scored: Vec<(usize, f64)> = g.orig.iter().map(|o| o.0).zip(row).collect();
                    top_refs(&scored, cfg.top_t, &mut candidates);
                    for &(r, s) in &scored {
                        keep_max(slots.entry(r).or_default(), &q.patch, ORIGINAL_PATCH, &q.model, s);
                    }
                }
                if q_orig && modes.local_global && !g.local.is_empty() {
                    let cols: Vec<&[f32]> = g.local.iter().map(|l| l.2).collect();
                    let row = kernel::dot_block(&[q.vector.as_slice()], &cols);
                    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
                    for (&(r, rp, _), s) in g.local.iter().zip(row) {
                        if tricks.face_skip.skips(index.ids[r]) {
                            continue;
                        }
                        let b = best.entry(r).or_insert(f64::NEG_INFINITY);
                        *b = b.max(s);
                        keep_max(slots.entry(r).or_default(), ORIGINAL_PATCH, rp, &q.model, s);
                    }
                    top_refs(&best.into_iter().collect::<Vec<_>>(), cfg.top_t, &mut candidates);
                }
            }

            let mut out = Vec::new();
            for r in candidates {
                let Some(slot) = slots.get(&r) else { continue };
                let mut gl = Vec::new();
                let mut lg = Vec::new();
                for (&(qp, rp), models) in slot {
                    let Some(s) = fuse_models(models, specs) else { continue };
                    let s = s * tricks.factor(qp, rp);
                    if rp == ORIGINAL_PATCH {
                        gl.push(s);
                    } else {
                        lg.push(s);
                    }
                }
                if let Some(score) = patch_ensemble(&gl, &lg, tricks.top2_average) {
                    out.push(PairScore { query: qid.clone(), reference: index.ids[r].clone(), score });
                }
            }
            out
        })
        .collect();
    RankedPairList::new(per_query.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests;
