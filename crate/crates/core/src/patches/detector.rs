//! Hook for an external overlay detector.

use log::warn;

use crate::image::ImageBuffer;
use crate::types::BoundingBox;

/// A box as reported by a detector; may extend past the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectedBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

/// Source of overlay boxes for query images (e.g. a trained detector
/// behind an adapter).
pub trait OverlayDetector: Send + Sync {
    fn detect_overlay(&self, img: &ImageBuffer) -> Result<Vec<DetectedBox>, String>;
}

/// Detector that never finds anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubDetector;

impl OverlayDetector for StubDetector {
    fn detect_overlay(&self, _img: &ImageBuffer) -> Result<Vec<DetectedBox>, String> {
        Ok(Vec::new())
    }
}

impl<F> OverlayDetector for F
where
    F: Fn(&ImageBuffer) -> Result<Vec<DetectedBox>, String> + Send + Sync,
{
    fn detect_overlay(&self, img: &ImageBuffer) -> Result<Vec<DetectedBox>, String> {
        self(img)
    }
}

/// Runs the detector and sanitizes its output: boxes are clipped to the
/// frame, empty ones dropped and exact duplicates removed (first wins).
/// A detector failure yields no boxes.
pub fn detector_boxes(detector: &dyn OverlayDetector, img: &ImageBuffer) -> Vec<BoundingBox> {
    let raw = match detector.detect_overlay(img) {
        Ok(r) => r,
        Err(e) => {
            warn!("overlay detector failed: {e}");
            return Vec::new();
        }
    };
    let (fw, fh) = (img.width() as i64, img.height() as i64);
    let mut out: Vec<BoundingBox> = Vec::new();
    for b in raw {
        let x0 = b.x.clamp(0, fw);
        let y0 = b.y.clamp(0, fh);
        let x1 = b.x.saturating_add(b.w).clamp(0, fw);
        let y1 = b.y.saturating_add(b.h).clamp(0, fh);
        if x1 <= x0 || y1 <= y0 {
            continue;
        }
        let clipped = BoundingBox { x: x0 as u32, y: y0 as u32, w: (x1 - x0) as u32, h: (y1 - y0) as u32 };
        if !out.contains(&clipped) {
            out.push(clipped);
        }
    }
    out
}
