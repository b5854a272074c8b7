use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;

use super::{augment_variant, ops, AdvancedKind, AssetPool, AugmentationSet, SeedPolicy};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// One manifest row. `variant == None` marks a source that could not be read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub identity: String,
    pub variant: Option<u32>,
    /// Relative to the corpus directory; the source path for skipped rows.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusManifest {
    pub entries: Vec<CorpusEntry>,
}

impl CorpusManifest {
    /// CSV `identity,variant_index,path`; skipped sources carry `skipped` as
    /// their variant index.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["identity", "variant_index", "path"])?;
        for e in &self.entries {
            let variant = e.variant.map_or_else(|| "skipped".to_string(), |v| v.to_string());
            w.write_record([e.identity.as_str(), variant.as_str(), &e.path.to_string_lossy()])?;
        }
        w.flush().map_err(|e| Error::io("<manifest>", e))
    }

    pub fn skipped(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.iter().filter(|e| e.variant.is_none())
    }
}

/// Builds a training corpus under `out_dir`.
///
/// Keeps every `select_every`-th source (starting with the first). Each kept
/// image becomes one identity holding the resized original (variant 0) and
/// `variants` augmented copies, written as `<identity>/<variant>.ppm`. The
/// manifest is also written to `out_dir/manifest.csv`.
pub fn generate_corpus(
    sources: &[PathBuf],
    set: &AugmentationSet,
    policy: SeedPolicy,
    assets: &AssetPool,
    out_dir: &Path,
) -> Result<CorpusManifest> {
    set.params.validate()?;
    if sources.is_empty() {
        return Err(Error::Config("corpus source listing is empty".into()));
    }
    match set.advanced {
        Some(AdvancedKind::SuperFace) if assets.faces.is_empty() => {
            return Err(Error::Config("super-face set needs a non-empty faces asset pool".into()))
        }
        Some(AdvancedKind::SuperOpaque) if assets.images.is_empty() => {
            return Err(Error::Config("super-opaque set needs a non-empty images asset pool".into()))
        }
        _ => {}
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let selected: Vec<(usize, &PathBuf)> = sources.iter().enumerate().step_by(set.params.select_every).collect();
    let per_image: Vec<Result<Vec<CorpusEntry>>> = selected
        .par_iter()
        .map(|&(index, source)| {
            let identity = format!("id{index:07}");
            let img = match ImageBuffer::load(source) {
                Ok(img) => img,
                Err(e) => {
                    warn!("skipping unreadable source {}: {e}", source.display());
                    return Ok(vec![CorpusEntry { identity, variant: None, path: source.clone() }]);
                }
            };
            let dir = out_dir.join(&identity);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            (0..=set.params.variants)
                .into_par_iter()
                .map(|variant| {
                    let out = if variant == 0 {
                        let resized = img.resize(set.params.train_side, set.params.train_side);
                        if set.black_white {
                            ops::grayscale(&resized)
                        } else {
                            resized
                        }
                    } else {
                        augment_variant(&img, set, assets, &mut policy.stream(&identity, variant))?
                    };
                    let rel = PathBuf::from(&identity).join(format!("{variant:02}.ppm"));
                    out.save(out_dir.join(&rel))?;
                    Ok(CorpusEntry { identity: identity.clone(), variant: Some(variant), path: rel })
                })
                .collect()
        })
        .collect();

    let mut entries = Vec::new();
    for r in per_image {
        entries.extend(r?);
    }
    let manifest = CorpusManifest { entries };
    let manifest_path = out_dir.join("manifest.csv");
    let file = std::fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    manifest.write_csv(std::io::BufWriter::new(file))?;
    Ok(manifest)
}
