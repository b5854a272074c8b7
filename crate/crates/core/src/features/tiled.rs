use serde::{Deserialize, Serialize};

use super::DescriptorModel;
use crate::image::ImageBuffer;

const ORIENTATION_BINS: usize = 8;
const PER_CELL: usize = 3 + ORIENTATION_BINS;

/// Handcrafted descriptor: the frame is split into `grid x grid` cells and
/// each cell contributes its mean R, G, B (in [0, 1]) followed by an 8-bin
/// gradient-orientation histogram weighted by gradient magnitude and
/// divided by the cell's pixel count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiledDescriptor {
    pub id: String,
    #[serde(default = "default_grid")]
    pub grid: u32,
    /// Multiplier on the histogram entries relative to the color means.
    #[serde(default = "default_gradient_weight")]
    pub gradient_weight: f32,
}

fn default_grid() -> u32 {
    8
}

fn default_gradient_weight() -> f32 {
    1.0
}

impl TiledDescriptor {
    pub fn new(id: impl Into<String>, grid: u32) -> Self {
        TiledDescriptor { id: id.into(), grid, gradient_weight: default_gradient_weight() }
    }
}

impl Default for TiledDescriptor {
    fn default() -> Self {
        TiledDescriptor::new("tiled8", default_grid())
    }
}

impl DescriptorModel for TiledDescriptor {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn output_dim(&self) -> usize {
        (self.grid * self.grid) as usize * PER_CELL
    }

    fn describe_raw(&self, img: &ImageBuffer) -> Vec<f32> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let luma = img.luma();
        let data = img.data();
        let grid = self.grid.min(img.width()).min(img.height()).max(1) as usize;
        // Cell index of each column and row; cells partition the frame like
        // the patch grids do.
        let cell_of = |n: usize| -> Vec<usize> {
            let mut v = vec![0; n];
            for c in 0..grid {
                v[c * n / grid..(c + 1) * n / grid].fill(c);
            }
            v
        };
        let (col_cell, row_cell) = (cell_of(w), cell_of(h));
        let mut sums = vec![[0.0f64; PER_CELL]; grid * grid];
        let mut counts = vec![0u64; grid * grid];
        for y in 0..h {
            let up = y.saturating_sub(1) * w;
            let down = (y + 1).min(h - 1) * w;
            let row = y * w;
            for x in 0..w {
                let cell = row_cell[y] * grid + col_cell[x];
                let acc = &mut sums[cell];
                counts[cell] += 1;
                let p = &data[(row + x) * 3..(row + x) * 3 + 3];
                acc[0] += p[0] as f64;
                acc[1] += p[1] as f64;
                acc[2] += p[2] as f64;
                let gx = (luma[row + (x + 1).min(w - 1)] - luma[row + x.saturating_sub(1)]) / 2.0;
                let gy = (luma[down + x] - luma[up + x]) / 2.0;
                if gx != 0.0 || gy != 0.0 {
                    acc[3 + orientation_bin(gx, gy)] += (gx * gx + gy * gy).sqrt() as f64;
                }
            }
        }
        let mut out = vec![0.0f32; self.output_dim()];
        // Cells beyond a too-small frame stay zero.
        for (cell, (acc, &n)) in sums.iter().zip(&counts).enumerate() {
            let (r, c) = (cell / grid, cell % grid);
            let base = (r * self.grid as usize + c) * PER_CELL;
            let n = n as f64;
            for k in 0..3 {
                out[base + k] = (acc[k] / n / 255.0) as f32;
            }
            for b in 0..ORIENTATION_BINS {
                out[base + 3 + b] = (acc[3 + b] / n) as f32 * self.gradient_weight;
            }
        }
        out
    }
}

/// 45-degree sector of the gradient direction, counter-clockwise from +x
/// (with y pointing down the image).
fn orientation_bin(gx: f32, gy: f32) -> usize {
    let (ax, ay) = (gx.abs(), gy.abs());
    if gx > 0.0 && gy >= 0.0 {
        if ay < ax { 0 } else { 1 }
    } else if gx <= 0.0 && gy > 0.0 {
        if ax < ay { 2 } else { 3 }
    } else if gx < 0.0 && gy <= 0.0 {
        if ay < ax { 4 } else { 5 }
    } else if ax < ay {
        6
    } else {
        7
    }
}
