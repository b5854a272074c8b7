//! Parameterized image transforms. Randomness lives in the caller; every
//! function here is a pure function of its arguments.

use image::imageops;
use nalgebra::{SMatrix, SVector};

use super::glyphs::Mask;
use crate::image::ImageBuffer;
use crate::types::BoundingBox;

#[inline]
fn clamp_u8(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Bilinear sample at continuous pixel-center coordinates; `None` outside the frame.
fn sample_bilinear(img: &ImageBuffer, fx: f32, fy: f32) -> Option<[f32; 3]> {
    let (w, h) = (img.width() as f32, img.height() as f32);
    if fx < -0.5 || fy < -0.5 || fx > w - 0.5 || fy > h - 0.5 {
        return None;
    }
    let fx = fx.clamp(0.0, w - 1.0);
    let fy = fy.clamp(0.0, h - 1.0);
    let (x0, y0) = (fx.floor() as u32, fy.floor() as u32);
    let (x1, y1) = ((x0 + 1).min(img.width() - 1), (y0 + 1).min(img.height() - 1));
    let (tx, ty) = (fx - x0 as f32, fy - y0 as f32);
    let (p00, p10, p01, p11) = (img.pixel(x0, y0), img.pixel(x1, y0), img.pixel(x0, y1), img.pixel(x1, y1));
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] as f32 * (1.0 - tx) + p10[c] as f32 * tx;
        let bottom = p01[c] as f32 * (1.0 - tx) + p11[c] as f32 * tx;
        out[c] = top * (1.0 - ty) + bottom * ty;
    }
    Some(out)
}

/// Inverse-maps every output pixel through `map` and samples the source.
fn warp(img: &ImageBuffer, width: u32, height: u32, fill: [u8; 3], map: impl Fn(f32, f32) -> (f32, f32)) -> ImageBuffer {
    ImageBuffer::from_fn(width, height, |x, y| {
        let (sx, sy) = map(x as f32, y as f32);
        match sample_bilinear(img, sx, sy) {
            Some(p) => [clamp_u8(p[0]), clamp_u8(p[1]), clamp_u8(p[2])],
            None => fill,
        }
    })
}

/// Counter-clockwise rotation by an arbitrary angle about the center,
/// keeping the canvas size. Uncovered corners take `fill`.
pub fn rotate(img: &ImageBuffer, degrees: f64, fill: [u8; 3]) -> ImageBuffer {
    let theta = degrees.to_radians() as f32;
    let (s, c) = theta.sin_cos();
    let cx = (img.width() as f32 - 1.0) / 2.0;
    let cy = (img.height() as f32 - 1.0) / 2.0;
    warp(img, img.width(), img.height(), fill, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        // Image y points down, so this is a counter-clockwise turn on screen.
        (c * dx - s * dy + cx, s * dx + c * dy + cy)
    })
}

/// Homography taking each `from[i]` to `to[i]`. `None` for degenerate quads.
pub fn homography(from: [(f64, f64); 4], to: [(f64, f64); 4]) -> Option<SMatrix<f64, 3, 3>> {
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let (x, y) = from[i];
        let (u, v) = to[i];
        a.set_row(2 * i, &SMatrix::<f64, 1, 8>::from_row_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]));
        a.set_row(2 * i + 1, &SMatrix::<f64, 1, 8>::from_row_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]));
        b[2 * i] = u;
        b[2 * i + 1] = v;
    }
    let h = a.lu().solve(&b)?;
    Some(SMatrix::<f64, 3, 3>::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0))
}

/// Perspective warp: the output frame's corners (TL, TR, BR, BL) sample the
/// source at `corners`. Degenerate quads return the input unchanged.
pub fn perspective(img: &ImageBuffer, corners: [(f64, f64); 4], fill: [u8; 3]) -> ImageBuffer {
    let (w, h) = ((img.width() - 1) as f64, (img.height() - 1) as f64);
    let frame = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)];
    let Some(m) = homography(frame, corners) else {
        return img.clone();
    };
    warp(img, img.width(), img.height(), fill, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let d = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
        let sx = (m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)]) / d;
        let sy = (m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)]) / d;
        (sx as f32, sy as f32)
    })
}

/// Downsample to `ratio` of each side, then nearest-neighbour upsample back.
pub fn pixelize(img: &ImageBuffer, ratio: f64) -> ImageBuffer {
    let sw = ((img.width() as f64 * ratio).round() as u32).max(1);
    let sh = ((img.height() as f64 * ratio).round() as u32).max(1);
    let small = img.resize(sw, sh);
    let up = imageops::resize(&small.to_rgb_image(), img.width(), img.height(), imageops::FilterType::Nearest);
    ImageBuffer::from_rgb_image(up)
}

/// Moves whole tiles of a `grid` x `grid` layout: tile `order[i]` is copied
/// into slot `i`. Remainder rows/columns past the last full tile stay put.
pub fn shuffle_tiles(img: &ImageBuffer, grid: u32, order: &[usize]) -> ImageBuffer {
    let (tw, th) = (img.width() / grid, img.height() / grid);
    let n = (grid * grid) as usize;
    if tw == 0 || th == 0 || order.len() != n {
        return img.clone();
    }
    let tile = |i: usize| BoundingBox {
        x: (i as u32 % grid) * tw,
        y: (i as u32 / grid) * th,
        w: tw,
        h: th,
    };
    let mut out = img.clone();
    for (slot, &src) in order.iter().enumerate() {
        if slot != src {
            let patch = img.crop(&tile(src)).expect("tile inside frame");
            let b = tile(slot);
            out.paste(&patch, b.x as i64, b.y as i64);
        }
    }
    out
}

/// Adds borders of the given widths in pixels.
pub fn pad(img: &ImageBuffer, left: u32, top: u32, right: u32, bottom: u32, color: [u8; 3]) -> ImageBuffer {
    let mut out = ImageBuffer::filled(img.width() + left + right, img.height() + top + bottom, color);
    out.paste(img, left as i64, top as i64);
    out
}

/// Brightness, contrast and saturation factors applied in that order.
pub fn color_jitter(img: &ImageBuffer, brightness: f64, contrast: f64, saturation: f64) -> ImageBuffer {
    let mut out = img.clone();
    let b = brightness as f32;
    for v in out.data_mut() {
        *v = clamp_u8(*v as f32 * b);
    }
    let mean = out.luma().iter().sum::<f32>() / (out.width() * out.height()) as f32 * 255.0;
    let c = contrast as f32;
    for v in out.data_mut() {
        *v = clamp_u8((*v as f32 - mean) * c + mean);
    }
    let s = saturation as f32;
    for px in out.data_mut().chunks_exact_mut(3) {
        let gray = 0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32;
        for v in px.iter_mut() {
            *v = clamp_u8((*v as f32 - gray) * s + gray);
        }
    }
    out
}

/// Multiplies every sample by `factor` (< 1 darkens).
pub fn darken(img: &ImageBuffer, factor: f64) -> ImageBuffer {
    let mut out = img.clone();
    let f = factor as f32;
    for v in out.data_mut() {
        *v = clamp_u8(*v as f32 * f);
    }
    out
}

pub fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> ImageBuffer {
    ImageBuffer::from_rgb_image(imageops::blur(&img.to_rgb_image(), sigma as f32))
}

/// Replaces each pixel by its luma on all three channels.
pub fn grayscale(img: &ImageBuffer) -> ImageBuffer {
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let y = clamp_u8(0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32);
        px.fill(y);
    }
    out
}

/// `round(alpha * top + (1 - alpha) * base)` per sample; `top` is resized to the base frame.
pub fn blend(base: &ImageBuffer, top: &ImageBuffer, alpha: f64) -> ImageBuffer {
    let top = top.resize(base.width(), base.height());
    let mut out = base.clone();
    for (o, &t) in out.data_mut().iter_mut().zip(top.data()) {
        *o = (alpha * t as f64 + (1.0 - alpha) * *o as f64).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Paints each rectangle (clipped to the frame) with its color.
pub fn occlude(img: &ImageBuffer, rects: &[(BoundingBox, [u8; 3])]) -> ImageBuffer {
    let mut out = img.clone();
    for (r, color) in rects {
        let x1 = r.right().min(img.width());
        let y1 = r.bottom().min(img.height());
        for y in r.y..y1 {
            for x in r.x..x1 {
                out.set_pixel(x, y, *color);
            }
        }
    }
    out
}

/// Draws a mask scaled so that each set bit becomes a `cell`-pixel square.
pub fn draw_mask(img: &mut ImageBuffer, mask: &dyn Mask, x: i64, y: i64, cell: u32, color: [u8; 3]) {
    let (mw, mh) = mask.size();
    let cell = cell.max(1);
    for row in 0..mh {
        for col in 0..mw {
            if !mask.is_set(col, row) {
                continue;
            }
            for dy in 0..cell {
                let ty = y + (row * cell + dy) as i64;
                if ty < 0 || ty >= img.height() as i64 {
                    continue;
                }
                for dx in 0..cell {
                    let tx = x + (col * cell + dx) as i64;
                    if tx >= 0 && tx < img.width() as i64 {
                        img.set_pixel(tx as u32, ty as u32, color);
                    }
                }
            }
        }
    }
}

/// Scales `top` to `(w, h)` and pastes it opaquely at `(x, y)`.
pub fn overlay(base: &ImageBuffer, top: &ImageBuffer, x: i64, y: i64, w: u32, h: u32) -> ImageBuffer {
    let mut out = base.clone();
    out.paste(&top.resize(w.max(1), h.max(1)), x, y);
    out
}
