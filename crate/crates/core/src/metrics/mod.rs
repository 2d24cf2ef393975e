//! Image-quality measures used to judge scanner compatibility: SNR,
//! percent integral uniformity, field homogeneity and image subtraction.

mod image;
mod phantom;

use alloc::vec::Vec;

pub use image::{GrayImage, Roi};
pub use phantom::{synth_phantom, PhantomArtifact, PhantomSpec};

use crate::error::{Error, Result};

/// Which homogeneity formula produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HomogeneityDefinition {
    /// `1e6 * (max - min) / mean`.
    PeakToPeakPpm,
    /// `100 * (max - min) / (2 * mean)`, percent.
    FractionalRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Homogeneity {
    pub value: f64,
    pub definition: HomogeneityDefinition,
}

fn roi_values(img: &GrayImage, roi: &Roi) -> Result<Vec<f64>> {
    roi.validate(img)?;
    Ok(roi.coords(img).into_iter().map(|(x, y)| img.get(x, y) as f64).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn population_std(v: &[f64]) -> f64 {
    let m = mean(v);
    libm::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64)
}

/// Mean of the signal ROI over the population standard deviation of the
/// noise ROI. Zero noise gives `f64::INFINITY`.
pub fn snr(img: &GrayImage, signal_roi: &Roi, noise_roi: &Roi) -> Result<f64> {
    let signal = roi_values(img, signal_roi)?;
    let noise = roi_values(img, noise_roi)?;
    if signal_roi.overlaps(noise_roi, img) {
        return Err(Error::config("roi", "signal and noise regions overlap"));
    }
    let sd = population_std(&noise);
    if sd == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(mean(&signal) / sd)
}

/// 3x3 mean of every ROI pixel, averaging only neighbours that are
/// themselves inside the ROI.
pub fn filtered_roi(img: &GrayImage, roi: &Roi) -> Result<Vec<f64>> {
    roi.validate(img)?;
    let coords = roi.coords(img);
    let out = coords
        .iter()
        .map(|&(x, y)| {
            let mut sum = 0.0;
            let mut n = 0u32;
            for ny in y.saturating_sub(1)..=(y + 1).min(img.height() - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(img.width() - 1) {
                    if roi.contains(nx, ny) {
                        sum += img.get(nx, ny) as f64;
                        n += 1;
                    }
                }
            }
            sum / n as f64
        })
        .collect();
    Ok(out)
}

fn extremes(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

/// Percent integral uniformity `100 * (1 - (max - min) / (max + min))` of
/// the 3x3-filtered ROI. An all-zero region counts as perfectly uniform.
pub fn piu(img: &GrayImage, roi: &Roi) -> Result<f64> {
    let f = filtered_roi(img, roi)?;
    let (lo, hi) = extremes(&f);
    if hi + lo == 0.0 {
        return Ok(100.0);
    }
    Ok(100.0 * (1.0 - (hi - lo) / (hi + lo)))
}

pub fn homogeneity(img: &GrayImage, roi: &Roi, definition: HomogeneityDefinition) -> Result<Homogeneity> {
    let f = filtered_roi(img, roi)?;
    let (lo, hi) = extremes(&f);
    let m = mean(&f);
    if m == 0.0 {
        return Err(Error::Undefined("homogeneity of a zero-mean region"));
    }
    let value = match definition {
        HomogeneityDefinition::PeakToPeakPpm => 1e6 * (hi - lo) / m,
        HomogeneityDefinition::FractionalRange => 100.0 * (hi - lo) / (2.0 * m),
    };
    Ok(Homogeneity { value, definition })
}

/// Per-pixel absolute difference.
pub fn subtract(a: &GrayImage, b: &GrayImage) -> Result<GrayImage> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::config("image", "subtraction needs equal dimensions"));
    }
    let pixels = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&p, &q)| p.abs_diff(q))
        .collect();
    GrayImage::new(a.width(), a.height(), pixels)
}

/// Everything computed for one image.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub label: alloc::string::String,
    /// `None` when no noise ROI was given; infinite for a noise-free region.
    pub snr: Option<f64>,
    pub piu: f64,
    pub homogeneity: Homogeneity,
    /// Non-zero pixels of the subtraction against a reference image.
    pub subtraction_nonzero: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_hand_value() {
        // Signal block of 100 on the left, alternating 0/2 noise on the right.
        let img = GrayImage::from_fn(8, 4, |x, y| {
            if x < 4 {
                100
            } else if (x + y) % 2 == 0 {
                0
            } else {
                2
            }
        })
        .unwrap();
        let v = snr(&img, &Roi::rect(0, 0, 4, 4), &Roi::rect(4, 0, 4, 4)).unwrap();
        assert!((v - 100.0).abs() < 1e-12);
    }

    #[test]
    fn snr_noise_free_is_infinite() {
        let img = GrayImage::filled(4, 4, 7).unwrap();
        assert_eq!(
            snr(&img, &Roi::rect(0, 0, 2, 4), &Roi::rect(2, 0, 2, 4)).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn snr_rejects_overlap_and_empty() {
        let img = GrayImage::filled(4, 4, 7).unwrap();
        assert!(snr(&img, &Roi::rect(0, 0, 3, 4), &Roi::rect(2, 0, 2, 4)).is_err());
        assert!(snr(&img, &Roi::rect(0, 0, 0, 4), &Roi::rect(2, 0, 2, 4)).is_err());
        assert!(snr(&img, &Roi::rect(0, 0, 2, 4), &Roi::rect(3, 0, 2, 4)).is_err());
    }

    #[test]
    fn piu_uniform_and_hand_value() {
        let img = GrayImage::filled(10, 10, 300).unwrap();
        assert_eq!(piu(&img, &Roi::rect(1, 1, 8, 8)).unwrap(), 100.0);
        let img = GrayImage::from_fn(12, 6, |x, _| if x < 6 { 100 } else { 200 }).unwrap();
        let v = piu(&img, &Roi::rect(0, 0, 12, 6)).unwrap();
        assert!((v - 100.0 * (1.0 - 100.0 / 300.0)).abs() < 1e-12);
    }

    #[test]
    fn piu_zero_region() {
        let img = GrayImage::filled(5, 5, 0).unwrap();
        assert_eq!(piu(&img, &Roi::rect(0, 0, 5, 5)).unwrap(), 100.0);
    }

    #[test]
    fn homogeneity_hand_values() {
        // Two 3-wide bands so the filtered ROI still holds exact 99 and 101
        // columns, and the mean is 100.
        let img = GrayImage::from_fn(6, 6, |x, _| if x < 3 { 99 } else { 101 }).unwrap();
        let roi = Roi::mask_from_fn(6, 6, |x, _| x != 2 && x != 3);
        let ppm = homogeneity(&img, &roi, HomogeneityDefinition::PeakToPeakPpm).unwrap();
        let frac = homogeneity(&img, &roi, HomogeneityDefinition::FractionalRange).unwrap();
        assert!((ppm.value - 20000.0).abs() < 1e-9);
        assert!((frac.value - 1.0).abs() < 1e-12);
        assert_eq!(frac.definition, HomogeneityDefinition::FractionalRange);
    }

    #[test]
    fn homogeneity_zero_mean_is_undefined() {
        let img = GrayImage::filled(3, 3, 0).unwrap();
        assert!(homogeneity(&img, &Roi::rect(0, 0, 3, 3), HomogeneityDefinition::PeakToPeakPpm).is_err());
    }

    #[test]
    fn subtract_dimension_mismatch() {
        let a = GrayImage::filled(3, 3, 0).unwrap();
        let b = GrayImage::filled(3, 4, 0).unwrap();
        assert!(subtract(&a, &b).is_err());
    }

    #[test]
    fn subtract_saturating_abs() {
        let a = GrayImage::new(2, 1, alloc::vec![0, 65535]).unwrap();
        let b = GrayImage::new(2, 1, alloc::vec![65535, 0]).unwrap();
        assert_eq!(subtract(&a, &b).unwrap().pixels(), &[65535, 65535]);
    }

    #[test]
    fn image_invariants() {
        assert!(GrayImage::new(0, 3, alloc::vec![]).is_err());
        assert!(GrayImage::new(2, 2, alloc::vec![0; 3]).is_err());
    }
}
