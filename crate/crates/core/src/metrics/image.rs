use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major 16-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config("image", "width and height must be at least 1"));
        }
        if width.checked_mul(height) != Some(pixels.len()) {
            return Err(Error::config("image", "pixel count does not match width * height"));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Result<Self> {
        Self::new(width, height, vec![value; width.saturating_mul(height)])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u16) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width.saturating_mul(height));
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }
}

/// Region of interest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Roi {
    Rect {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    /// Per-pixel membership, same size as the image it is applied to.
    Mask {
        width: usize,
        height: usize,
        bits: Vec<bool>,
    },
}

impl Roi {
    pub fn rect(x: usize, y: usize, width: usize, height: usize) -> Self {
        Roi::Rect { x, y, width, height }
    }

    pub fn mask_from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Roi::Mask { width, height, bits }
    }

    /// Checks the ROI is non-empty and inside `img`.
    pub fn validate(&self, img: &GrayImage) -> Result<()> {
        match self {
            Roi::Rect { x, y, width, height } => {
                if *width == 0 || *height == 0 {
                    return Err(Error::config("roi", "rectangle is empty"));
                }
                if x + width > img.width || y + height > img.height {
                    return Err(Error::config("roi", "rectangle extends past the image"));
                }
            }
            Roi::Mask { width, height, bits } => {
                if *width != img.width || *height != img.height || bits.len() != width * height {
                    return Err(Error::config("roi", "mask size differs from the image"));
                }
                if !bits.iter().any(|&b| b) {
                    return Err(Error::config("roi", "mask is empty"));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, px: usize, py: usize) -> bool {
        match self {
            Roi::Rect { x, y, width, height } => px >= *x && px < x + width && py >= *y && py < y + height,
            Roi::Mask { width, height, bits } => px < *width && py < *height && bits[py * width + px],
        }
    }

    /// Member pixel coordinates in row-major order, clipped to `img`.
    pub fn coords(&self, img: &GrayImage) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for py in 0..img.height {
            for px in 0..img.width {
                if self.contains(px, py) {
                    out.push((px, py));
                }
            }
        }
        out
    }

    pub fn overlaps(&self, other: &Roi, img: &GrayImage) -> bool {
        self.coords(img).iter().any(|&(x, y)| other.contains(x, y))
    }
}
