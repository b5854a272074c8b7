//! Training-data augmentation: fifteen basic transforms, six advanced
//! ("super") transforms, black-white conversion, the eleven augmentation
//! sets and deterministic corpus generation.

mod config;
mod corpus;
pub mod glyphs;
pub mod ops;

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{AugmentConfig, IntRange, Range};
pub use corpus::{generate_corpus, CorpusEntry, CorpusManifest};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::types::BoundingBox;

/// The basic transforms, in the order they are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    ResizedCrop,
    Rotation,
    Pixelization,
    PixelShuffle,
    Perspective,
    Padding,
    ImageUnderlay,
    ColorJitter,
    Blur,
    Grayscale,
    HorizontalFlip,
    EmojiOverlay,
    TextOverlay,
    ImageOverlay,
    Resize,
}

impl TransformKind {
    pub const ALL: [TransformKind; 15] = [
        TransformKind::ResizedCrop,
        TransformKind::Rotation,
        TransformKind::Pixelization,
        TransformKind::PixelShuffle,
        TransformKind::Perspective,
        TransformKind::Padding,
        TransformKind::ImageUnderlay,
        TransformKind::ColorJitter,
        TransformKind::Blur,
        TransformKind::Grayscale,
        TransformKind::HorizontalFlip,
        TransformKind::EmojiOverlay,
        TransformKind::TextOverlay,
        TransformKind::ImageOverlay,
        TransformKind::Resize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::ResizedCrop => "resized-crop",
            TransformKind::Rotation => "rotation",
            TransformKind::Pixelization => "pixelization",
            TransformKind::PixelShuffle => "pixel-shuffle",
            TransformKind::Perspective => "perspective",
            TransformKind::Padding => "padding",
            TransformKind::ImageUnderlay => "image-underlay",
            TransformKind::ColorJitter => "color-jitter",
            TransformKind::Blur => "blur",
            TransformKind::Grayscale => "grayscale",
            TransformKind::HorizontalFlip => "horizontal-flip",
            TransformKind::EmojiOverlay => "emoji-overlay",
            TransformKind::TextOverlay => "text-overlay",
            TransformKind::ImageOverlay => "image-overlay",
            TransformKind::Resize => "resize",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// The advanced transforms. A set carries at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvancedKind {
    SuperBlur,
    SuperColor,
    SuperDark,
    SuperFace,
    SuperOpaque,
    SuperOcclude,
}

impl AdvancedKind {
    pub const ALL: [AdvancedKind; 6] = [
        AdvancedKind::SuperBlur,
        AdvancedKind::SuperColor,
        AdvancedKind::SuperDark,
        AdvancedKind::SuperFace,
        AdvancedKind::SuperOpaque,
        AdvancedKind::SuperOcclude,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdvancedKind::SuperBlur => "super-blur",
            AdvancedKind::SuperColor => "super-color",
            AdvancedKind::SuperDark => "super-dark",
            AdvancedKind::SuperFace => "super-face",
            AdvancedKind::SuperOpaque => "super-opaque",
            AdvancedKind::SuperOcclude => "super-occlude",
        }
    }
}

impl fmt::Display for AdvancedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One basic transform with its fire probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicStep {
    pub kind: TransformKind,
    pub probability: f64,
}

/// A named recipe: basic steps, at most one advanced transform, and the
/// black-white flag.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationSet {
    pub name: String,
    pub basic: Vec<BasicStep>,
    pub advanced: Option<AdvancedKind>,
    pub black_white: bool,
    pub params: AugmentConfig,
}

impl AugmentationSet {
    /// Every basic transform at the configured probabilities.
    pub fn basic(config: &AugmentConfig) -> Self {
        let basic = TransformKind::ALL
            .into_iter()
            .map(|kind| BasicStep {
                kind,
                probability: match kind {
                    TransformKind::Resize => 1.0,
                    k => *config.probabilities.get(k.name()).unwrap_or(&config.probability),
                },
            })
            .collect();
        AugmentationSet {
            name: "basic".into(),
            basic,
            advanced: None,
            black_white: false,
            params: config.clone(),
        }
    }

    pub fn with_advanced(mut self, kind: AdvancedKind) -> Self {
        self.name = format!("{}+{}", self.name, kind.name());
        self.advanced = Some(kind);
        self
    }

    pub fn black_white(mut self) -> Self {
        self.name = format!("{}-bw", self.name);
        self.black_white = true;
        self
    }

    /// Sets the fire probability of one basic step.
    pub fn with_probability(mut self, kind: TransformKind, p: f64) -> Self {
        for s in &mut self.basic {
            if s.kind == kind {
                s.probability = p;
            }
        }
        self
    }

    /// Turns every optional basic step off (resize keeps running).
    pub fn only_resize(mut self) -> Self {
        for s in &mut self.basic {
            if s.kind != TransformKind::Resize {
                s.probability = 0.0;
            }
        }
        self
    }
}

/// The eleven sets: basic alone, basic plus each advanced transform, and
/// black-white variants of basic, +super-blur, +super-color and +super-face.
pub fn enumerate_sets(config: &AugmentConfig) -> Result<Vec<AugmentationSet>> {
    config.validate()?;
    let basic = AugmentationSet::basic(config);
    let mut sets = vec![basic.clone()];
    sets.extend(AdvancedKind::ALL.iter().map(|&k| basic.clone().with_advanced(k)));
    sets.push(basic.clone().black_white());
    for k in [AdvancedKind::SuperBlur, AdvancedKind::SuperColor, AdvancedKind::SuperFace] {
        sets.push(basic.clone().with_advanced(k).black_white());
    }
    Ok(sets)
}

/// Derives per-variant random streams from one global seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub global_seed: u64,
}

impl SeedPolicy {
    pub fn new(global_seed: u64) -> Self {
        SeedPolicy { global_seed }
    }

    /// SHA-256 over (seed, id, variant); independent of scheduling order.
    pub fn stream_seed(&self, image_id: &str, variant: u32) -> u64 {
        let mut h = Sha256::new();
        h.update(self.global_seed.to_le_bytes());
        h.update((image_id.len() as u64).to_le_bytes());
        h.update(image_id.as_bytes());
        h.update(variant.to_le_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn stream(&self, image_id: &str, variant: u32) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.stream_seed(image_id, variant))
    }
}

/// Images used by transforms that composite other content.
#[derive(Debug, Clone, Default)]
pub struct AssetPool {
    /// Face crops for super-face.
    pub faces: Vec<ImageBuffer>,
    /// Backgrounds and overlays for underlay, image-overlay and super-opaque.
    pub images: Vec<ImageBuffer>,
}

impl AssetPool {
    /// Loads every `.ppm`/`.pnm` file of the given directories, in file-name order.
    pub fn load(faces_dir: Option<&Path>, images_dir: Option<&Path>) -> Result<Self> {
        Ok(AssetPool {
            faces: faces_dir.map(load_dir).transpose()?.unwrap_or_default(),
            images: images_dir.map(load_dir).transpose()?.unwrap_or_default(),
        })
    }
}

fn load_dir(dir: &Path) -> Result<Vec<ImageBuffer>> {
    crate::image_files(dir)?.iter().map(ImageBuffer::load).collect()
}

fn draw(rng: &mut impl Rng, r: Range) -> f64 {
    if r.max > r.min {
        rng.random_range(r.min..=r.max)
    } else {
        r.min
    }
}

fn draw_int(rng: &mut impl Rng, r: IntRange) -> u32 {
    rng.random_range(r.min..=r.max)
}

fn random_color(rng: &mut impl Rng) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

/// Attempts a random-area, random-aspect crop; falls back to the full
/// frame after eight degenerate draws.
fn resized_crop_box(img: &ImageBuffer, p: &AugmentConfig, rng: &mut impl Rng) -> BoundingBox {
    let (w, h) = (img.width() as f64, img.height() as f64);
    for _ in 0..=8 {
        let area = draw(rng, p.crop_area) * w * h;
        let log_aspect = draw(rng, Range::new(p.crop_aspect.min.ln(), p.crop_aspect.max.ln()));
        let aspect = log_aspect.exp();
        let cw = (area * aspect).sqrt().round();
        let ch = (area / aspect).sqrt().round();
        if cw >= 1.0 && ch >= 1.0 && cw <= w && ch <= h {
            let x = rng.random_range(0..=(w - cw) as u32);
            let y = rng.random_range(0..=(h - ch) as u32);
            return BoundingBox { x, y, w: cw as u32, h: ch as u32 };
        }
    }
    img.frame()
}

fn random_text(rng: &mut impl Rng, len: u32) -> String {
    let chars: Vec<char> = glyphs::GLYPH_CHARS.chars().collect();
    (0..len).map(|_| chars[rng.random_range(0..chars.len())]).collect()
}

fn apply_kind(
    img: ImageBuffer,
    kind: TransformKind,
    p: &AugmentConfig,
    assets: &AssetPool,
    rng: &mut impl Rng,
) -> ImageBuffer {
    match kind {
        TransformKind::ResizedCrop => {
            let b = resized_crop_box(&img, p, rng);
            img.crop(&b).expect("crop box lies in frame")
        }
        TransformKind::Rotation => {
            if rng.random_bool(p.rotation_discrete_probability) {
                let deg = [90, 180, 270][rng.random_range(0..3)];
                img.rotate_right_angle(deg).expect("right angle")
            } else {
                ops::rotate(&img, draw(rng, p.rotation_degrees), [0, 0, 0])
            }
        }
        TransformKind::Pixelization => ops::pixelize(&img, draw(rng, p.pixelization_ratio)),
        TransformKind::PixelShuffle => {
            let n = (p.shuffle_grid * p.shuffle_grid) as usize;
            let k = ((draw(rng, p.shuffle_fraction) * n as f64).round() as usize).clamp(2, n);
            let mut slots: Vec<usize> = (0..n).collect();
            slots.shuffle(rng);
            let chosen = &slots[..k];
            let mut moved = chosen.to_vec();
            moved.shuffle(rng);
            let mut order: Vec<usize> = (0..n).collect();
            for (&slot, &src) in chosen.iter().zip(&moved) {
                order[slot] = src;
            }
            ops::shuffle_tiles(&img, p.shuffle_grid, &order)
        }
        TransformKind::Perspective => {
            let d = draw(rng, p.perspective_distortion);
            let (w, h) = ((img.width() - 1) as f64, (img.height() - 1) as f64);
            let mut jitter = |base: f64, extent: f64, inward: f64| base + inward * rng.random_range(0.0..=1.0) * d * extent;
            let corners = [
                (jitter(0.0, w, 1.0), jitter(0.0, h, 1.0)),
                (jitter(w, w, -1.0), jitter(0.0, h, 1.0)),
                (jitter(w, w, -1.0), jitter(h, h, -1.0)),
                (jitter(0.0, w, 1.0), jitter(h, h, -1.0)),
            ];
            ops::perspective(&img, corners, [0, 0, 0])
        }
        TransformKind::Padding => {
            let (w, h) = (img.width() as f64, img.height() as f64);
            let mut side = |extent: f64| (draw(rng, p.padding) * extent).round() as u32;
            let (l, t, r, b) = (side(w), side(h), side(w), side(h));
            let color = random_color(rng);
            ops::pad(&img, l, t, r, b, color)
        }
        TransformKind::ImageUnderlay => {
            if assets.images.is_empty() {
                return img;
            }
            let bg = &assets.images[rng.random_range(0..assets.images.len())];
            let bg = bg.resize(img.width(), img.height());
            let s = draw(rng, p.underlay_scale);
            let w = ((img.width() as f64 * s).round() as u32).max(1);
            let h = ((img.height() as f64 * s).round() as u32).max(1);
            let x = rng.random_range(0..=img.width() - w) as i64;
            let y = rng.random_range(0..=img.height() - h) as i64;
            ops::overlay(&bg, &img, x, y, w, h)
        }
        TransformKind::ColorJitter => jitter(&img, p.jitter_strength, rng),
        TransformKind::Blur => ops::gaussian_blur(&img, draw(rng, p.blur_sigma)),
        TransformKind::Grayscale => ops::grayscale(&img),
        TransformKind::HorizontalFlip => img.flip_horizontal(),
        TransformKind::EmojiOverlay => {
            let sprite = glyphs::Sprite(&glyphs::EMOJI[rng.random_range(0..glyphs::EMOJI.len())]);
            let side = draw(rng, p.emoji_scale) * img.width().min(img.height()) as f64;
            let cell = ((side / 8.0).round() as u32).max(1);
            let x = rng.random_range(0..img.width()) as i64 - (4 * cell) as i64;
            let y = rng.random_range(0..img.height()) as i64 - (4 * cell) as i64;
            let color = random_color(rng);
            let mut out = img;
            ops::draw_mask(&mut out, &sprite, x, y, cell, color);
            out
        }
        TransformKind::TextOverlay => {
            let len = draw_int(rng, p.text_length);
            let text = glyphs::TextLine::new(&random_text(rng, len));
            let cell = ((draw(rng, p.text_scale) * img.height() as f64 / 7.0).round() as u32).max(1);
            let x = rng.random_range(0..img.width()) as i64 - (img.width() / 4) as i64;
            let y = rng.random_range(0..img.height()) as i64;
            let color = random_color(rng);
            let mut out = img;
            ops::draw_mask(&mut out, &text, x, y, cell, color);
            out
        }
        TransformKind::ImageOverlay => {
            if assets.images.is_empty() {
                return img;
            }
            let top = &assets.images[rng.random_range(0..assets.images.len())];
            let s = draw(rng, p.overlay_scale);
            let w = ((img.width() as f64 * s).round() as u32).max(1);
            let h = ((img.height() as f64 * s).round() as u32).max(1);
            let x = rng.random_range(0..=img.width() - w) as i64;
            let y = rng.random_range(0..=img.height() - h) as i64;
            ops::overlay(&img, top, x, y, w, h)
        }
        TransformKind::Resize => img.resize(p.train_side, p.train_side),
    }
}

fn jitter(img: &ImageBuffer, strength: f64, rng: &mut impl Rng) -> ImageBuffer {
    let r = Range::new((1.0 - strength).max(0.0), 1.0 + strength);
    let (b, c, s) = (draw(rng, r), draw(rng, r), draw(rng, r));
    ops::color_jitter(img, b, c, s)
}

/// Runs the basic chain of `set`: each step fires independently with its
/// probability, and the output is resized to the training side.
pub fn apply_basic(img: &ImageBuffer, set: &AugmentationSet, assets: &AssetPool, rng: &mut impl Rng) -> ImageBuffer {
    let mut out = img.clone();
    for step in &set.basic {
        if step.kind == TransformKind::Resize {
            continue;
        }
        if rng.random_bool(step.probability.clamp(0.0, 1.0)) {
            out = apply_kind(out, step.kind, &set.params, assets, rng);
        }
    }
    out.resize(set.params.train_side, set.params.train_side)
}

/// Applies one advanced transform unconditionally.
pub fn apply_advanced(
    img: &ImageBuffer,
    kind: AdvancedKind,
    params: &AugmentConfig,
    assets: &AssetPool,
    rng: &mut impl Rng,
) -> Result<ImageBuffer> {
    let out = match kind {
        AdvancedKind::SuperBlur => ops::gaussian_blur(img, draw(rng, params.super_blur_sigma)),
        AdvancedKind::SuperColor => jitter(img, params.super_jitter_strength, rng),
        AdvancedKind::SuperDark => ops::darken(img, draw(rng, params.dark_factor)),
        AdvancedKind::SuperFace => {
            let face = pick(&assets.faces, "faces", kind, rng)?;
            let side = ((draw(rng, params.face_scale) * img.width().min(img.height()) as f64).round() as u32).max(1);
            let aspect = face.width() as f64 / face.height() as f64;
            let (w, h) = if aspect >= 1.0 {
                (side, ((side as f64 / aspect).round() as u32).max(1))
            } else {
                (((side as f64 * aspect).round() as u32).max(1), side)
            };
            let x = rng.random_range(0..=img.width().saturating_sub(w)) as i64;
            let y = rng.random_range(0..=img.height().saturating_sub(h)) as i64;
            ops::overlay(img, face, x, y, w, h)
        }
        AdvancedKind::SuperOpaque => {
            let top = pick(&assets.images, "images", kind, rng)?;
            ops::blend(img, top, draw(rng, params.opacity))
        }
        AdvancedKind::SuperOcclude => {
            let k = draw_int(rng, params.occlusion_count);
            let (w, h) = (img.width() as f64, img.height() as f64);
            let rects: Vec<_> = (0..k)
                .map(|_| {
                    let frac = rng.random_range(0.02..=params.occlusion_max_area.max(0.02));
                    let aspect = rng.random_range(0.5f64..=2.0);
                    let rw = ((frac * w * h * aspect).sqrt().round()).clamp(1.0, w) as u32;
                    let rh = ((frac * w * h / aspect).sqrt().round()).clamp(1.0, h) as u32;
                    // Clamping one side can push the area over the cap; shrink the other.
                    let cap = (params.occlusion_max_area * w * h).floor().max(1.0) as u32;
                    let rh = rh.min((cap / rw).max(1));
                    let x = rng.random_range(0..=img.width() - rw);
                    let y = rng.random_range(0..=img.height() - rh);
                    (BoundingBox { x, y, w: rw, h: rh }, random_color(rng))
                })
                .collect();
            ops::occlude(img, &rects)
        }
    };
    Ok(out)
}

fn pick<'a>(pool: &'a [ImageBuffer], name: &str, kind: AdvancedKind, rng: &mut impl Rng) -> Result<&'a ImageBuffer> {
    if pool.is_empty() {
        return Err(Error::Config(format!("{kind} needs a non-empty {name} asset pool")));
    }
    Ok(&pool[rng.random_range(0..pool.len())])
}

/// One augmented training image: the basic chain, the set's advanced
/// transform (fired with `advanced_probability`), the final resize, and
/// black-white conversion for black-white sets.
pub fn augment_variant(img: &ImageBuffer, set: &AugmentationSet, assets: &AssetPool, rng: &mut impl Rng) -> Result<ImageBuffer> {
    let mut out = apply_basic(img, set, assets, rng);
    if let Some(kind) = set.advanced {
        if rng.random_bool(set.params.advanced_probability) {
            out = apply_advanced(&out, kind, &set.params, assets, rng)?;
        }
    }
    if set.black_white {
        out = ops::grayscale(&out);
    }
    Ok(out)
}
