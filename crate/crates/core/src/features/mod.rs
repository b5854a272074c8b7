//! Descriptor extraction and PCA reduction.
//!
//! Any [`DescriptorModel`] can be plugged in; [`TiledDescriptor`] is the
//! built-in handcrafted one. Learned embeddings computed elsewhere enter
//! through the feature store format instead.

mod pca;
mod tiled;

use log::warn;
use rayon::prelude::*;

pub use pca::{
    default_output_dim, load_pca, pca_fit, pca_project, read_pca, save_pca, write_pca, PcaModel, PcaOptions,
    Projection, PCA_MAGIC,
};
pub use tiled::TiledDescriptor;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::patches::{plan_patches, OverlayDetector, Patch, PatchConfig, PatchPlan, PatchRole};
use crate::types::{normalize_in_place, FeatureRecord, FeatureStore, ImageId};

/// Test-time scales (square side in pixels).
pub const DEFAULT_SCALES: [u32; 3] = [200, 256, 320];

/// A deterministic map from a square raster to a finite vector.
pub trait DescriptorModel: Send + Sync {
    fn model_id(&self) -> &str;
    fn output_dim(&self) -> usize;
    /// Raw descriptor of an image already resampled to the working scale.
    fn describe_raw(&self, img: &ImageBuffer) -> Vec<f32>;
}

/// Resamples the patch to `scale x scale`, describes and L2-normalizes it.
/// An all-zero descriptor becomes the first basis vector.
pub fn describe(model: &dyn DescriptorModel, patch: &Patch, scale: u32) -> Vec<f32> {
    describe_image(model, &patch.pixels, scale)
}

pub fn describe_image(model: &dyn DescriptorModel, img: &ImageBuffer, scale: u32) -> Vec<f32> {
    let resized = img.resize(scale, scale);
    let mut v = model.describe_raw(&resized);
    debug_assert_eq!(v.len(), model.output_dim());
    if !normalize_in_place(&mut v) {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
    }
    v
}

/// How to cut and describe one side of a match.
#[derive(Clone, Copy)]
pub struct ExtractRequest<'a> {
    pub plan: &'a PatchPlan,
    pub patch_cfg: &'a PatchConfig,
    pub role: PatchRole,
    pub detector: Option<&'a dyn OverlayDetector>,
    pub scales: &'a [u32],
    pub pca: Option<&'a PcaModel>,
}

/// An image that could not be processed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractFailure {
    pub image: ImageId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub store: FeatureStore,
    pub failures: Vec<ExtractFailure>,
    /// Records whose PCA projection vanished.
    pub degenerate: usize,
}

/// Describes every (image, patch, scale) for `model`.
///
/// Images are processed in parallel; records come out sorted by key, so the
/// result does not depend on the thread count. Images whose patches cannot
/// be cut are reported in `failures` and skipped.
pub fn extract_all(images: &[(ImageId, ImageBuffer)], model: &dyn DescriptorModel, req: &ExtractRequest<'_>) -> Result<Extraction> {
    if req.scales.is_empty() || req.scales.contains(&0) {
        return Err(Error::Config("scales must be a non-empty list of positive sides".into()));
    }
    if model.model_id().is_empty() {
        return Err(Error::Config("model id must not be empty".into()));
    }
    let dim = match req.pca {
        Some(p) if p.d_raw() != model.output_dim() => {
            return Err(Error::Config(format!(
                "PCA expects dim {} but model {} produces {}",
                p.d_raw(),
                model.model_id(),
                model.output_dim()
            )))
        }
        Some(p) => p.d_out(),
        None => model.output_dim(),
    };
    let per_image: Vec<std::result::Result<(Vec<FeatureRecord>, usize), ExtractFailure>> = images
        .par_iter()
        .map(|(id, img)| {
            let patches = plan_patches(img, id, req.plan, req.patch_cfg, req.detector, req.role)
                .map_err(|e| ExtractFailure { image: id.clone(), reason: e.to_string() })?;
            let jobs: Vec<(&Patch, u32)> = patches.iter().flat_map(|p| req.scales.iter().map(move |&s| (p, s))).collect();
            let described: Vec<(FeatureRecord, bool)> = jobs
                .par_iter()
                .map(|&(p, scale)| {
                    let raw = describe(model, p, scale);
                    let (vector, degenerate) = match req.pca {
                        Some(pca) => {
                            let proj = pca_project(pca, &raw).expect("dimension checked above");
                            (proj.vector, proj.degenerate)
                        }
                        None => (raw, false),
                    };
                    let rec = FeatureRecord {
                        image: id.clone(),
                        patch: p.patch_id.clone(),
                        model: model.model_id().to_string(),
                        scale,
                        vector,
                    };
                    (rec, degenerate)
                })
                .collect();
            let degenerate = described.iter().filter(|d| d.1).count();
            Ok((described.into_iter().map(|d| d.0).collect(), degenerate))
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut degenerate = 0;
    for r in per_image {
        match r {
            Ok((recs, d)) => {
                records.extend(recs);
                degenerate += d;
            }
            Err(f) => {
                warn!("extraction failed for {}: {}", f.image, f.reason);
                failures.push(f);
            }
        }
    }
    let mut store = FeatureStore::new(dim, records)?;
    store.sort_by_key();
    Ok(Extraction { store, failures, degenerate })
}

/// Projects every record of a raw store through `pca`. Returns the new
/// store and the number of degenerate projections.
pub fn project_store(store: &FeatureStore, pca: &PcaModel) -> Result<(FeatureStore, usize)> {
    if store.dim() != pca.d_raw() && !store.is_empty() {
        return Err(Error::Config(format!("store dim {} does not match PCA input dim {}", store.dim(), pca.d_raw())));
    }
    let projected: Vec<(FeatureRecord, bool)> = store
        .records()
        .par_iter()
        .map(|r| {
            let p = pca_project(pca, &r.vector)?;
            Ok((FeatureRecord { vector: p.vector, ..r.clone() }, p.degenerate))
        })
        .collect::<Result<_>>()?;
    let degenerate = projected.iter().filter(|p| p.1).count();
    let out = FeatureStore::new(pca.d_out(), projected.into_iter().map(|p| p.0).collect())?;
    Ok((out, degenerate))
}

/// Concatenates stores of equal dimension into one sorted store.
pub fn merge_stores(stores: Vec<FeatureStore>) -> Result<FeatureStore> {
    let Some(dim) = stores.first().map(FeatureStore::dim) else {
        return Err(Error::Config("nothing to merge".into()));
    };
    if stores.iter().any(|s| s.dim() != dim) {
        return Err(Error::Config("cannot merge stores of different dimensions".into()));
    }
    let mut merged = FeatureStore::new(dim, stores.into_iter().flat_map(FeatureStore::into_records).collect())?;
    merged.sort_by_key();
    Ok(merged)
}
