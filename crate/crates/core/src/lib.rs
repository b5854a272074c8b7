//! Image copy detection built around local verification.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! 1. [`augment`] synthesizes training corpora from basic and advanced
//!    transformations grouped into eleven augmentation sets.
//! 2. [`patches`] cuts query and reference images into the local regions
//!    used for global-local and local-global matching.
//! 3. [`features`] turns patches into unit-norm descriptors, optionally
//!    reduced with PCA.
//! 4. [`matching`] scores patch pairs, ensembles models with the confidence
//!    and completeness criteria, and ranks (query, reference) pairs.
//! 5. [`evaluation`] computes micro average precision and recall at a
//!    precision target over the ranked list.
//!
//! [`learncore`] holds the training-side numerics (schedule, GeM, losses,
//! PK sampling) as standalone functions, and [`synth`] generates an offline
//! benchmark with overlay and crop copies.

pub mod augment;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod image;
pub mod learncore;
pub mod matching;
pub mod pairs;
pub mod patches;
pub mod store;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use image::ImageBuffer;
pub use types::{BoundingBox, FeatureRecord, FeatureStore, ImageId, PairScore};

/// `.ppm`/`.pnm`/`.pgm` files directly inside `dir`, sorted by file name.
pub fn image_files(dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "ppm" | "pnm" | "pgm"));
        if is_image && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
