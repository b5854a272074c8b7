//! Parameter ranges for every transform, read from the `[augment]` config
//! section. Every field has a default so partial overrides are allowed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive real interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.min.is_finite() && self.max.is_finite() && self.min <= self.max {
            Ok(())
        } else {
            Err(Error::Config(format!("augment.{name}: invalid range {:?}", self)))
        }
    }
}

/// Inclusive integer interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Side length of every emitted training image.
    pub train_side: u32,
    /// Fire probability of each basic transform (resize always runs).
    pub probability: f64,
    /// Per-kind override of `probability`, keyed by kebab-case kind name.
    pub probabilities: std::collections::BTreeMap<String, f64>,
    /// Probability that a set's advanced transform fires on an augmented variant.
    pub advanced_probability: f64,
    /// Augmented variants per selected source image (the original is extra).
    pub variants: u32,
    /// Keep one source image out of every `select_every`.
    pub select_every: usize,

    pub crop_area: Range,
    pub crop_aspect: Range,
    pub rotation_degrees: Range,
    /// Probability that a firing rotation takes the discrete {90, 180, 270} path.
    pub rotation_discrete_probability: f64,
    /// Downsampled side as a fraction of the original side.
    pub pixelization_ratio: Range,
    /// Tiles per side of the shuffle grid.
    pub shuffle_grid: u32,
    /// Fraction of tiles permuted.
    pub shuffle_fraction: Range,
    /// Maximum inward corner displacement as a fraction of the side.
    pub perspective_distortion: Range,
    /// Padding per side as a fraction of the side.
    pub padding: Range,
    /// Scale of the input when placed on an underlay image.
    pub underlay_scale: Range,
    /// Brightness/contrast/saturation factors are drawn from [1 - s, 1 + s].
    pub jitter_strength: f64,
    pub super_jitter_strength: f64,
    pub blur_sigma: Range,
    pub super_blur_sigma: Range,
    /// Emoji side as a fraction of the shorter image side.
    pub emoji_scale: Range,
    pub text_length: IntRange,
    /// Text height as a fraction of the image height.
    pub text_scale: Range,
    /// Overlay side as a fraction of the image side.
    pub overlay_scale: Range,
    pub dark_factor: Range,
    /// Face side as a fraction of the shorter image side.
    pub face_scale: Range,
    pub opacity: Range,
    pub occlusion_count: IntRange,
    /// Upper bound on each occluding rectangle's share of the frame.
    pub occlusion_max_area: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            train_side: 256,
            probability: 0.25,
            probabilities: Default::default(),
            advanced_probability: 0.5,
            variants: 19,
            select_every: 10,
            crop_area: Range::new(0.3, 1.0),
            crop_aspect: Range::new(0.75, 4.0 / 3.0),
            rotation_degrees: Range::new(-45.0, 45.0),
            rotation_discrete_probability: 0.5,
            pixelization_ratio: Range::new(0.1, 0.4),
            shuffle_grid: 8,
            shuffle_fraction: Range::new(0.1, 0.35),
            perspective_distortion: Range::new(0.0, 0.15),
            padding: Range::new(0.05, 0.3),
            underlay_scale: Range::new(0.5, 0.9),
            jitter_strength: 0.4,
            super_jitter_strength: 0.8,
            blur_sigma: Range::new(0.5, 2.0),
            super_blur_sigma: Range::new(2.0, 8.0),
            emoji_scale: Range::new(0.1, 0.3),
            text_length: IntRange { min: 3, max: 8 },
            text_scale: Range::new(0.05, 0.15),
            overlay_scale: Range::new(0.2, 0.5),
            dark_factor: Range::new(0.1, 0.5),
            face_scale: Range::new(0.2, 0.5),
            opacity: Range::new(0.35, 0.65),
            occlusion_count: IntRange { min: 1, max: 4 },
            occlusion_max_area: 0.25,
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("augment.{name}: probability {p} outside [0, 1]")))
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_side == 0 {
            return Err(Error::Config("augment.train_side must be positive".into()));
        }
        if self.select_every == 0 {
            return Err(Error::Config("augment.select_every must be positive".into()));
        }
        check_probability("probability", self.probability)?;
        check_probability("advanced_probability", self.advanced_probability)?;
        check_probability("rotation_discrete_probability", self.rotation_discrete_probability)?;
        for (k, &p) in &self.probabilities {
            if super::TransformKind::from_name(k).is_none() {
                return Err(Error::Config(format!("augment.probabilities: unknown transform {k:?}")));
            }
            check_probability(&format!("probabilities.{k}"), p)?;
        }
        for (name, r) in [
            ("crop_area", self.crop_area),
            ("crop_aspect", self.crop_aspect),
            ("rotation_degrees", self.rotation_degrees),
            ("pixelization_ratio", self.pixelization_ratio),
            ("shuffle_fraction", self.shuffle_fraction),
            ("perspective_distortion", self.perspective_distortion),
            ("padding", self.padding),
            ("underlay_scale", self.underlay_scale),
            ("blur_sigma", self.blur_sigma),
            ("super_blur_sigma", self.super_blur_sigma),
            ("emoji_scale", self.emoji_scale),
            ("text_scale", self.text_scale),
            ("overlay_scale", self.overlay_scale),
            ("dark_factor", self.dark_factor),
            ("face_scale", self.face_scale),
            ("opacity", self.opacity),
        ] {
            r.check(name)?;
        }
        if self.crop_area.min <= 0.0 || self.crop_area.max > 1.0 {
            return Err(Error::Config("augment.crop_area must lie in (0, 1]".into()));
        }
        if self.crop_aspect.min <= 0.0 {
            return Err(Error::Config("augment.crop_aspect must be positive".into()));
        }
        if self.pixelization_ratio.min <= 0.0 || self.pixelization_ratio.max > 1.0 {
            return Err(Error::Config("augment.pixelization_ratio must lie in (0, 1]".into()));
        }
        if self.blur_sigma.min <= 0.0 || self.super_blur_sigma.min <= 0.0 {
            return Err(Error::Config("augment blur sigmas must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.opacity.min) || self.opacity.max > 1.0 {
            return Err(Error::Config("augment.opacity must lie in [0, 1]".into()));
        }
        if self.dark_factor.min < 0.0 || self.dark_factor.max > 1.0 {
            return Err(Error::Config("augment.dark_factor must lie in [0, 1]".into()));
        }
        if self.occlusion_count.min == 0 || self.occlusion_count.min > self.occlusion_count.max {
            return Err(Error::Config("augment.occlusion_count must be a range with min >= 1".into()));
        }
        if self.text_length.min == 0 || self.text_length.min > self.text_length.max {
            return Err(Error::Config("augment.text_length must be a range with min >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.occlusion_max_area) || self.occlusion_max_area == 0.0 {
            return Err(Error::Config("augment.occlusion_max_area must lie in (0, 1]".into()));
        }
        if self.shuffle_grid == 0 {
            return Err(Error::Config("augment.shuffle_grid must be positive".into()));
        }
        Ok(())
    }
}
