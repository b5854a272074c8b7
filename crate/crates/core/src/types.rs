//! Domain types shared across the pipeline.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque image identifier such as `Q00031` or `R000512`.
///
/// Ids are CSV-safe: non-empty and free of commas and line breaks.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ImageId(Arc<str>);

impl ImageId {
    pub fn new(value: impl AsRef<str>) -> Result<Self> {
        let value = value.as_ref();
        if value.is_empty() {
            return Err(Error::Invalid("image id must not be empty".into()));
        }
        if value.contains([',', '\n', '\r']) {
            return Err(Error::Invalid(format!(
                "image id {value:?} contains a comma or newline"
            )));
        }
        Ok(ImageId(Arc::from(value)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ImageId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        ImageId::new(value)
    }
}

impl From<ImageId> for String {
    fn from(id: ImageId) -> Self {
        id.0.to_string()
    }
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ImageId({})", self.0)
    }
}

/// Axis-aligned pixel rectangle anchored at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    /// Builds a box and checks it lies inside a `width` x `height` frame.
    pub fn within(x: u32, y: u32, w: u32, h: u32, width: u32, height: u32) -> Result<Self> {
        let b = BoundingBox { x, y, w, h };
        if b.fits(width, height) {
            Ok(b)
        } else {
            Err(Error::Invalid(format!(
                "box {b:?} does not fit a {width}x{height} frame"
            )))
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        BoundingBox {
            x: 0,
            y: 0,
            w: width,
            h: height,
        }
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.x as u64 + self.w as u64 <= width as u64
            && self.y as u64 + self.h as u64 <= height as u64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn intersection(&self, other: &BoundingBox) -> u64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) as u64 * (y1 - y0) as u64
        }
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Smallest box containing both.
    pub fn union_box(&self, other: &BoundingBox) -> BoundingBox {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        BoundingBox {
            x,
            y,
            w: self.right().max(other.right()) - x,
            h: self.bottom().max(other.bottom()) - y,
        }
    }
}

/// One descriptor row, keyed by image, patch, model and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub image: ImageId,
    pub patch: String,
    pub model: String,
    pub scale: u32,
    pub vector: Vec<f32>,
}

/// Tolerance on descriptor norms.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

impl FeatureRecord {
    pub fn key(&self) -> RecordKey<'_> {
        RecordKey {
            image: self.image.as_str(),
            patch: &self.patch,
            model: &self.model,
            scale: self.scale,
        }
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.vector)
    }
}

/// Borrowed `(image, patch, model, scale)` key of a [`FeatureRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey<'a> {
    pub image: &'a str,
    pub patch: &'a str,
    pub model: &'a str,
    pub scale: u32,
}

pub(crate) fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

/// Normalizes `v` in place. Returns `false` when the vector has zero norm.
pub fn normalize_in_place(v: &mut [f32]) -> bool {
    let n = l2_norm(v);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x = (*x as f64 / n) as f32;
    }
    true
}

/// A set of unit-norm descriptors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    records: Vec<FeatureRecord>,
}

impl FeatureStore {
    pub fn empty(dim: usize) -> Self {
        FeatureStore {
            dim,
            records: Vec::new(),
        }
    }

    /// Validates every record: dimension, finiteness, unit norm and key uniqueness.
    pub fn new(dim: usize, records: Vec<FeatureRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            check_record(dim, r)?;
            if !seen.insert(r.key()) {
                return Err(Error::Invalid(format!("duplicate feature key {:?}", r.key())));
            }
        }
        drop(seen);
        Ok(FeatureStore { dim, records })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<FeatureRecord> {
        self.records
    }

    /// Distinct image ids in first-appearance order.
    pub fn image_ids(&self) -> Vec<ImageId> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.image.clone()))
            .map(|r| r.image.clone())
            .collect()
    }

    /// Sorts records by key; extraction output is always in this order.
    pub fn sort_by_key(&mut self) {
        self.records.sort_by(|a, b| a.key().cmp(&b.key()));
    }
}

fn check_record(dim: usize, r: &FeatureRecord) -> Result<()> {
    if r.vector.len() != dim {
        return Err(Error::Invalid(format!(
            "record {:?} has dim {} but store dim is {dim}",
            r.key(),
            r.vector.len()
        )));
    }
    if r.vector.iter().any(|x| !x.is_finite()) {
        return Err(Error::Corruption(format!("record {:?} has a non-finite value", r.key())));
    }
    let n = r.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::Invalid(format!(
            "record {:?} is not unit norm (|v| = {n})",
            r.key()
        )));
    }
    if r.patch.is_empty() || r.model.is_empty() {
        return Err(Error::Invalid("patch and model ids must not be empty".into()));
    }
    Ok(())
}

/// Similarity score for a (query, reference) image pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub query: ImageId,
    pub reference: ImageId,
    pub score: f64,
}
