//! RGB raster type, PPM I/O and the geometric primitives shared by
//! augmentation, patch generation and description.

use std::path::Path;

use image::{imageops, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::types::BoundingBox;

/// Decoded 8-bit RGB image stored row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ImageBuffer({}x{})", self.width, self.height)
    }
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid(format!("image size {width}x{height} is empty")));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::Invalid(format!(
                "image data has {} bytes, expected {expected}",
                data.len()
            )));
        }
        Ok(ImageBuffer { width, height, data })
    }

    /// Image filled with one color. Panics on a zero dimension.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        ImageBuffer { width, height, data }
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        ImageBuffer { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn frame(&self) -> BoundingBox {
        BoundingBox::full(self.width, self.height)
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn crop(&self, b: &BoundingBox) -> Result<ImageBuffer> {
        if !b.fits(self.width, self.height) {
            return Err(Error::Invalid(format!(
                "crop {b:?} outside {}x{} frame",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(b.area() as usize * 3);
        for y in b.y..b.bottom() {
            let start = self.offset(b.x, y);
            data.extend_from_slice(&self.data[start..start + b.w as usize * 3]);
        }
        Ok(ImageBuffer {
            width: b.w,
            height: b.h,
            data,
        })
    }

    /// Lossless clockwise rotation by a multiple of 90 degrees.
    pub fn rotate_right_angle(&self, degrees: u32) -> Result<ImageBuffer> {
        let (w, h) = (self.width, self.height);
        let out = match degrees % 360 {
            0 => self.clone(),
            90 => ImageBuffer::from_fn(h, w, |x, y| self.pixel(y, h - 1 - x)),
            180 => ImageBuffer::from_fn(w, h, |x, y| self.pixel(w - 1 - x, h - 1 - y)),
            270 => ImageBuffer::from_fn(h, w, |x, y| self.pixel(w - 1 - y, x)),
            other => {
                return Err(Error::Invalid(format!(
                    "rotation {other} is not a right angle"
                )))
            }
        };
        Ok(out)
    }

    pub fn flip_horizontal(&self) -> ImageBuffer {
        let w = self.width;
        ImageBuffer::from_fn(w, self.height, |x, y| self.pixel(w - 1 - x, y))
    }

    /// Resamples with an antialiased triangle filter. Same-size requests return a copy.
    pub fn resize(&self, width: u32, height: u32) -> ImageBuffer {
        assert!(width > 0 && height > 0, "resize target must be positive");
        if width == self.width && height == self.height {
            return self.clone();
        }
        let resized = imageops::resize(&self.to_rgb_image(), width, height, imageops::FilterType::Triangle);
        ImageBuffer::from_rgb_image(resized)
    }

    /// Luma in [0, 1] per pixel (Rec. 601 weights).
    pub fn luma(&self) -> Vec<f32> {
        self.data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32) / 255.0)
            .collect()
    }

    /// Copies `src` into this image with its top-left corner at (x, y), clipped to the frame.
    pub fn paste(&mut self, src: &ImageBuffer, x: i64, y: i64) {
        for sy in 0..src.height {
            let ty = y + sy as i64;
            if ty < 0 || ty >= self.height as i64 {
                continue;
            }
            for sx in 0..src.width {
                let tx = x + sx as i64;
                if tx < 0 || tx >= self.width as i64 {
                    continue;
                }
                self.set_pixel(tx as u32, ty as u32, src.pixel(sx, sy));
            }
        }
    }

    pub(crate) fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length matches dimensions")
    }

    pub(crate) fn from_rgb_image(img: RgbImage) -> ImageBuffer {
        let (width, height) = img.dimensions();
        ImageBuffer {
            width,
            height,
            data: img.into_raw(),
        }
    }

    /// Decodes a binary or ASCII PPM/PGM/PNM stream.
    pub fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)
            .map_err(|e| Error::Format(format!("not a decodable PNM image: {e}")))?;
        Ok(ImageBuffer::from_rgb_image(img.to_rgb8()))
    }

    /// Encodes as binary PPM (P6).
    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ImageBuffer> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        ImageBuffer::decode_ppm(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode_ppm()).map_err(|e| Error::io(path, e))
    }
}
