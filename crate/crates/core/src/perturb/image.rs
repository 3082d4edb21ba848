//! RGB images with channel values in `[0, 1]`.

use std::path::Path;

use image::{ImageFormat, RgbImage};

use super::PerturbError;

/// Interleaved RGB, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, PerturbError> {
        if width == 0 || height == 0 {
            return Err(PerturbError::InvalidImage(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height * Self::CHANNELS {
            return Err(PerturbError::InvalidImage(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height * Self::CHANNELS,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || !(0.0..=1.0).contains(*v)) {
            return Err(PerturbError::InvalidImage(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self, PerturbError> {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Builds an image from a per-pixel closure; values are clamped to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self, PerturbError> {
        let mut data = Vec::with_capacity(width * height * Self::CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(x, y).iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self::new(width, height, data)
    }

    /// Clamps every value into `[0, 1]`; NaN maps to 0.
    pub(crate) fn from_raw_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Self {
        for v in data.iter_mut() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn min_side(&self) -> usize {
        self.width.min(self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * Self::CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Splits into three row-major planes.
    pub(crate) fn planes(&self) -> [Vec<f64>; 3] {
        let n = self.width * self.height;
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c][i] = px[c];
            }
        }
        out
    }

    pub(crate) fn from_planes(width: usize, height: usize, planes: &[Vec<f64>; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for i in 0..width * height {
            data.extend(planes.iter().map(|p| p[i]));
        }
        Self::from_raw_clamped(width, height, data)
    }

    /// True when both images have identical dimensions and bit-identical values.
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let bytes = self
            .data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, bytes).expect("buffer length matches")
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let data = img.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        }
    }

    /// Reads an 8-bit RGB PNG or binary PPM (P6).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PerturbError> {
        let path = path.as_ref();
        let format = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "png" => ImageFormat::Png,
            Some(ext) if ext == "ppm" || ext == "pnm" => ImageFormat::Pnm,
            _ => {
                return Err(PerturbError::Io(format!(
                    "{}: unsupported image extension (expected .png or .ppm)",
                    path.display()
                )))
            }
        };
        let bytes = std::fs::read(path).map_err(|e| PerturbError::Io(format!("{}: {e}", path.display())))?;
        let decoded = image::load_from_memory_with_format(&bytes, format)
            .map_err(|e| PerturbError::Io(format!("{}: {e}", path.display())))?;
        let img = Self::from_rgb8(&decoded.to_rgb8());
        if img.width == 0 || img.height == 0 {
            return Err(PerturbError::Io(format!("{}: empty image", path.display())));
        }
        Ok(img)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), PerturbError> {
        let path = path.as_ref();
        self.to_rgb8()
            .save_with_format(path, ImageFormat::Png)
            .map_err(|e| PerturbError::Io(format!("{}: {e}", path.display())))
    }
}
