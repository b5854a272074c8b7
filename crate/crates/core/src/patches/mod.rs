//! Local patches for global-local and local-global matching.
//!
//! A [`PatchPlan`] is an ordered list of rules. The default query plan is
//! the original image, its three right-angle rotations and the two center
//! crops; the default reference plan adds the 2x2 and 3x3 grids, giving 19
//! patches per reference image.

mod detector;
mod proposals;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use detector::{detector_boxes, DetectedBox, OverlayDetector, StubDetector};
pub use proposals::{gradient_magnitude, proposal_regions, ProposalConfig};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::types::{BoundingBox, ImageId};

pub const ORIGINAL_PATCH: &str = "orig";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterMode {
    /// Half width, half height.
    Exact,
    /// One third of each side.
    OneThird,
}

/// One step of a patch plan.
///
/// Written in config files as `identity`, `rot90`, `rot180`, `rot270`,
/// `center-exact`, `center-third`, `grid2`, `grid3`, `proposals:<k>` or
/// `detector`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PatchRule {
    Identity,
    Rotate(u32),
    CenterCrop(CenterMode),
    Grid(u32),
    Proposals(usize),
    Detector,
}

impl fmt::Display for PatchRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatchRule::Identity => f.write_str("identity"),
            PatchRule::Rotate(d) => write!(f, "rot{d}"),
            PatchRule::CenterCrop(CenterMode::Exact) => f.write_str("center-exact"),
            PatchRule::CenterCrop(CenterMode::OneThird) => f.write_str("center-third"),
            PatchRule::Grid(n) => write!(f, "grid{n}"),
            PatchRule::Proposals(k) => write!(f, "proposals:{k}"),
            PatchRule::Detector => f.write_str("detector"),
        }
    }
}

impl FromStr for PatchRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rule = match s.trim() {
            "identity" | "orig" => PatchRule::Identity,
            "rot90" => PatchRule::Rotate(90),
            "rot180" => PatchRule::Rotate(180),
            "rot270" => PatchRule::Rotate(270),
            "center-exact" => PatchRule::CenterCrop(CenterMode::Exact),
            "center-third" => PatchRule::CenterCrop(CenterMode::OneThird),
            "grid2" => PatchRule::Grid(2),
            "grid3" => PatchRule::Grid(3),
            "detector" => PatchRule::Detector,
            other => match other.strip_prefix("proposals:").map(str::parse) {
                Some(Ok(k)) => PatchRule::Proposals(k),
                _ => return Err(Error::Config(format!("unknown patch rule {other:?}"))),
            },
        };
        Ok(rule)
    }
}

impl TryFrom<String> for PatchRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PatchRule> for String {
    fn from(r: PatchRule) -> String {
        r.to_string()
    }
}

/// Ordered patch rules. The identity rule is mandatory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PlanRepr", into = "PlanRepr")]
pub struct PatchPlan {
    name: String,
    rules: Vec<PatchRule>,
}

#[derive(Serialize, Deserialize)]
struct PlanRepr {
    name: String,
    rules: Vec<PatchRule>,
}

impl TryFrom<PlanRepr> for PatchPlan {
    type Error = Error;

    fn try_from(r: PlanRepr) -> Result<Self> {
        PatchPlan::new(r.name, r.rules)
    }
}

impl From<PatchPlan> for PlanRepr {
    fn from(p: PatchPlan) -> Self {
        PlanRepr { name: p.name, rules: p.rules }
    }
}

impl PatchPlan {
    pub fn new(name: impl Into<String>, rules: Vec<PatchRule>) -> Result<Self> {
        let name = name.into();
        if !rules.contains(&PatchRule::Identity) {
            return Err(Error::Config(format!("patch plan {name:?} lacks the identity rule")));
        }
        let mut seen = std::collections::HashSet::new();
        for r in &rules {
            let key = match r {
                PatchRule::Proposals(_) => "proposals".to_string(),
                other => other.to_string(),
            };
            if !seen.insert(key) {
                return Err(Error::Config(format!("patch plan {name:?} repeats rule {r}")));
            }
        }
        Ok(PatchPlan { name, rules })
    }

    pub fn default_query() -> Self {
        PatchPlan::new(
            "query",
            vec![
                PatchRule::Identity,
                PatchRule::Rotate(90),
                PatchRule::Rotate(180),
                PatchRule::Rotate(270),
                PatchRule::CenterCrop(CenterMode::Exact),
                PatchRule::CenterCrop(CenterMode::OneThird),
            ],
        )
        .expect("static plan")
    }

    pub fn default_reference() -> Self {
        PatchPlan::new(
            "reference",
            vec![
                PatchRule::Identity,
                PatchRule::Rotate(90),
                PatchRule::Rotate(180),
                PatchRule::Rotate(270),
                PatchRule::Grid(2),
                PatchRule::Grid(3),
                PatchRule::CenterCrop(CenterMode::Exact),
                PatchRule::CenterCrop(CenterMode::OneThird),
            ],
        )
        .expect("static plan")
    }

    /// Only the whole image; the global-only baseline.
    pub fn global_only() -> Self {
        PatchPlan::new("global", vec![PatchRule::Identity]).expect("static plan")
    }

    /// Appends a rule, rejecting duplicates.
    pub fn with_rule(self, rule: PatchRule) -> Result<Self> {
        let mut rules = self.rules;
        rules.push(rule);
        PatchPlan::new(self.name, rules)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rules(&self) -> &[PatchRule] {
        &self.rules
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchConfig {
    /// Side ratio of the "exact center" crop.
    pub exact_ratio: f64,
    /// Side ratio of the "1/3 center" crop.
    pub third_ratio: f64,
    /// Query crops with a shorter side are dropped.
    pub min_query_side: u32,
    pub proposals: ProposalConfig,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            exact_ratio: 0.5,
            third_ratio: 1.0 / 3.0,
            min_query_side: 32,
            proposals: ProposalConfig::default(),
        }
    }
}

/// A concrete region of a source image, ready for description.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub source: ImageId,
    pub patch_id: String,
    /// Region in source-image coordinates (the full frame for rotations).
    pub bbox: BoundingBox,
    /// Clockwise right-angle rotation applied to the region.
    pub rotation: u32,
    pub pixels: ImageBuffer,
}

/// Whether a patch id names the whole frame (the original or a right-angle
/// rotation of it). Such patches are lossless views of the image.
pub fn is_original_patch(patch_id: &str) -> bool {
    matches!(patch_id, "orig" | "rot90" | "rot180" | "rot270")
}

impl Patch {
    pub fn is_whole_frame(&self) -> bool {
        is_original_patch(&self.patch_id)
    }
}

/// Centered crop of `ratio` of each side, at least 1x1.
pub fn center_crop_ratio(width: u32, height: u32, ratio: f64) -> BoundingBox {
    // The epsilon keeps ratios like 1/3 from flooring 300 * (1/3) to 99.
    let side = |n: u32| ((n as f64 * ratio + 1e-9).floor() as u32).clamp(1, n);
    let (w, h) = (side(width), side(height));
    BoundingBox { x: (width - w) / 2, y: (height - h) / 2, w, h }
}

/// Centered crop for a mode, using the configured ratios.
pub fn center_crop(img: &ImageBuffer, mode: CenterMode, cfg: &PatchConfig) -> BoundingBox {
    let ratio = match mode {
        CenterMode::Exact => cfg.exact_ratio,
        CenterMode::OneThird => cfg.third_ratio,
    };
    center_crop_ratio(img.width(), img.height(), ratio)
}

/// `n x n` cells, row-major, partitioning the frame exactly. Cell edges sit
/// at `floor(i * side / n)`.
pub fn grid_cells(width: u32, height: u32, n: u32) -> Vec<BoundingBox> {
    let edge = |i: u32, side: u32| (i as u64 * side as u64 / n as u64) as u32;
    let mut cells = Vec::with_capacity((n * n) as usize);
    for r in 0..n {
        for c in 0..n {
            let (x0, x1) = (edge(c, width), edge(c + 1, width));
            let (y0, y1) = (edge(r, height), edge(r + 1, height));
            cells.push(BoundingBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 });
        }
    }
    cells
}

/// Which side of a match a patch set is cut for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatchRole {
    Query,
    Reference,
}

/// Applies `plan` to `img`. Query sets drop crops (not whole frames) whose
/// shorter side is below `min_query_side`; the detector is only consulted
/// for queries.
pub fn plan_patches(
    img: &ImageBuffer,
    source: &ImageId,
    plan: &PatchPlan,
    cfg: &PatchConfig,
    detector: Option<&dyn OverlayDetector>,
    role: PatchRole,
) -> Result<Vec<Patch>> {
    let detector = if role == PatchRole::Query { detector } else { None };
    let mut out = Vec::new();
    let crop = |id: String, bbox: BoundingBox| -> Result<Patch> {
        Ok(Patch { source: source.clone(), patch_id: id, bbox, rotation: 0, pixels: img.crop(&bbox)? })
    };
    for rule in plan.rules() {
        match *rule {
            PatchRule::Identity => out.push(Patch {
                source: source.clone(),
                patch_id: ORIGINAL_PATCH.into(),
                bbox: img.frame(),
                rotation: 0,
                pixels: img.clone(),
            }),
            PatchRule::Rotate(deg) => out.push(Patch {
                source: source.clone(),
                patch_id: format!("rot{deg}"),
                bbox: img.frame(),
                rotation: deg,
                pixels: img.rotate_right_angle(deg)?,
            }),
            PatchRule::CenterCrop(mode) => {
                let id = match mode {
                    CenterMode::Exact => "c-exact",
                    CenterMode::OneThird => "c-third",
                };
                out.push(crop(id.into(), center_crop(img, mode, cfg))?);
            }
            PatchRule::Grid(n) => {
                if img.width() < n || img.height() < n {
                    return Err(Error::Invalid(format!(
                        "{}x{} image is too small for a {n}x{n} grid",
                        img.width(),
                        img.height()
                    )));
                }
                for (i, cell) in grid_cells(img.width(), img.height(), n).into_iter().enumerate() {
                    out.push(crop(format!("g{}-{i}", n * n), cell)?);
                }
            }
            PatchRule::Proposals(k) => {
                for (i, b) in proposal_regions(img, k, &cfg.proposals).into_iter().enumerate() {
                    out.push(crop(format!("prop-{i}"), b)?);
                }
            }
            PatchRule::Detector => {
                if let Some(det) = detector {
                    for (i, b) in detector_boxes(det, img).into_iter().enumerate() {
                        out.push(crop(format!("det-{i}"), b)?);
                    }
                }
            }
        }
    }
    if role == PatchRole::Query {
        out.retain(|p| p.is_whole_frame() || p.bbox.w.min(p.bbox.h) >= cfg.min_query_side);
    }
    Ok(out)
}

/// Query patches. Crops whose shorter side is below `min_query_side` are
/// dropped; whole-frame patches are always kept.
pub fn query_patches(
    img: &ImageBuffer,
    source: &ImageId,
    plan: &PatchPlan,
    cfg: &PatchConfig,
    detector: &dyn OverlayDetector,
) -> Result<Vec<Patch>> {
    plan_patches(img, source, plan, cfg, Some(detector), PatchRole::Query)
}

/// Reference patches. No size filtering is applied.
pub fn reference_patches(img: &ImageBuffer, source: &ImageId, plan: &PatchPlan, cfg: &PatchConfig) -> Result<Vec<Patch>> {
    plan_patches(img, source, plan, cfg, None, PatchRole::Reference)
}

/// Writes `image_id,patch_id,x,y,w,h,rot` rows.
pub fn write_patch_csv<W: Write>(patches: &[Patch], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["image_id", "patch_id", "x", "y", "w", "h", "rot"])?;
    for p in patches {
        w.write_record([
            p.source.to_string(),
            p.patch_id.clone(),
            p.bbox.x.to_string(),
            p.bbox.y.to_string(),
            p.bbox.w.to_string(),
            p.bbox.h.to_string(),
            p.rotation.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<patch csv>", e))
}
