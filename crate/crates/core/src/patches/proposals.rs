//! Deterministic saliency-component region proposals.
//!
//! Gradient magnitude, thresholded at a percentile (and an absolute floor),
//! split into 8-connected components whose bounding boxes are merged when
//! they overlap heavily.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::image::ImageBuffer;
use crate::types::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalConfig {
    /// Pixels must exceed this percentile of the gradient magnitudes.
    pub percentile: f64,
    /// Pixels must also reach this magnitude (luma contrast in [0, 1]);
    /// keeps smooth shading out of the saliency mask.
    pub min_magnitude: f32,
    /// Box pairs with IoU above this are merged into their union.
    pub merge_iou: f64,
    /// Boxes with a side shorter than this are dropped.
    pub min_side: u32,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            percentile: 0.75,
            min_magnitude: 0.1,
            merge_iou: 0.5,
            min_side: 32,
        }
    }
}

/// Sobel gradient magnitude of luma, scaled so a unit step edge scores 1.
/// Borders replicate the edge pixel.
pub fn gradient_magnitude(img: &ImageBuffer) -> Vec<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let luma = img.luma();
    let at = |x: isize, y: isize| -> f32 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        luma[y * w + x]
    };
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt() / 4.0;
        }
    }
    out
}

/// Nearest-rank percentile of `values` (`q` in [0, 1]).
fn percentile(values: &[f32], q: f64) -> f32 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f32::total_cmp);
    let idx = ((sorted.len() - 1) as f64 * q.clamp(0.0, 1.0)).floor() as usize;
    sorted[idx]
}

fn components(mask: &[bool], w: usize, h: usize) -> Vec<BoundingBox> {
    let mut seen = vec![false; mask.len()];
    let mut boxes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        boxes.push(BoundingBox {
            x: x0 as u32,
            y: y0 as u32,
            w: (x1 - x0 + 1) as u32,
            h: (y1 - y0 + 1) as u32,
        });
    }
    boxes
}

/// Repeatedly replaces the first pair with IoU above `threshold` by its union.
fn merge_overlapping(mut boxes: Vec<BoundingBox>, threshold: f64) -> Vec<BoundingBox> {
    'outer: loop {
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].iou(&boxes[j]) > threshold {
                    boxes[i] = boxes[i].union_box(&boxes[j]);
                    boxes.remove(j);
                    continue 'outer;
                }
            }
        }
        return boxes;
    }
}

/// Up to `max_k` salient regions, largest first.
pub fn proposal_regions(img: &ImageBuffer, max_k: usize, cfg: &ProposalConfig) -> Vec<BoundingBox> {
    if max_k == 0 {
        return Vec::new();
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mag = gradient_magnitude(img);
    let threshold = percentile(&mag, cfg.percentile);
    let mask: Vec<bool> = mag.iter().map(|&m| m > threshold && m >= cfg.min_magnitude).collect();
    let mut boxes: Vec<BoundingBox> = merge_overlapping(components(&mask, w, h), cfg.merge_iou)
        .into_iter()
        .filter(|b| b.w.min(b.h) >= cfg.min_side)
        .collect();
    boxes.sort_by(|a, b| b.area().cmp(&a.area()).then_with(|| (a.y, a.x, a.h, a.w).cmp(&(b.y, b.x, b.h, b.w))));
    boxes.truncate(max_k);
    boxes
}
