use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::GrayImage;
use crate::error::{Error, Result};

/// Distortion injected into a synthetic scan.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhantomArtifact {
    /// Disk displacement, px.
    pub shift_x: f64,
    pub shift_y: f64,
    /// Linear intensity ramp across the disk as a fraction of the signal,
    /// from `-shading` at the left edge to `+shading` at the right.
    pub shading: f64,
}

/// Disk phantom on a dark background.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub signal_level: f64,
    pub background_level: f64,
    pub noise_std: f64,
    /// px.
    pub disk_radius: f64,
    pub artifact: Option<PhantomArtifact>,
}

impl PhantomSpec {
    pub fn new(width: usize, height: usize, signal_level: f64, noise_std: f64) -> Self {
        Self {
            width,
            height,
            signal_level,
            background_level: 200.0,
            noise_std,
            disk_radius: 0.3 * width.min(height) as f64,
            artifact: None,
        }
    }

    /// Disk centre after any shift, px.
    pub fn center(&self) -> (f64, f64) {
        let a = self.artifact.unwrap_or_default();
        (
            0.5 * self.width as f64 + a.shift_x,
            0.5 * self.height as f64 + a.shift_y,
        )
    }

    /// Whether pixel `(x, y)` lies on the disk (pixel centres, inclusive edge).
    pub fn in_disk(&self, x: usize, y: usize) -> bool {
        let (cx, cy) = self.center();
        let dx = x as f64 + 0.5 - cx;
        let dy = y as f64 + 0.5 - cy;
        dx * dx + dy * dy <= self.disk_radius * self.disk_radius
    }
}

/// Renders `spec` with additive Gaussian noise drawn from `seed`.
pub fn synth_phantom(seed: u64, spec: &PhantomSpec) -> Result<GrayImage> {
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(Error::config("phantom.noise_std", "must be non-negative"));
    }
    let noise = Normal::new(0.0, spec.noise_std).map_err(|_| Error::config("phantom.noise_std", "invalid"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, _) = spec.center();
    let shading = spec.artifact.map_or(0.0, |a| a.shading);
    let mut pixels = alloc::vec::Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let base = if spec.in_disk(x, y) {
                let rel = (x as f64 + 0.5 - cx) / spec.disk_radius;
                spec.signal_level * (1.0 + shading * rel)
            } else {
                spec.background_level
            };
            let v = if spec.noise_std > 0.0 {
                base + noise.sample(&mut rng)
            } else {
                base
            };
            pixels.push(libm::round(v).clamp(0.0, u16::MAX as f64) as u16);
        }
    }
    GrayImage::new(spec.width, spec.height, pixels)
}
