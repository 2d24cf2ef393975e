//! Optical encoder on the gearbox output shaft.
//!
//! The encoder watches the slow side of the worm reduction; at full turbine
//! speed the output turns at roughly 200 RPM, which a slotted disk can follow.

use core::f64::consts::PI;

use crate::control::Direction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderConfig {
    pub pulses_per_rev: u32,
    /// Two channels in quadrature resolve direction.
    pub quadrature: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            pulses_per_rev: 360,
            quadrature: true,
        }
    }
}

impl EncoderConfig {
    /// Angle of one pulse, rad.
    pub fn quantum(&self) -> f64 {
        2.0 * PI / self.pulses_per_rev as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.pulses_per_rev == 0 {
            return Err(Error::config("encoder.pulses_per_rev", "must be at least 1"));
        }
        Ok(())
    }

    fn pulse_index(&self, angle: f64) -> i64 {
        // Slack so exact grid angles are not lost to rounding.
        libm::floor(angle / self.quantum() + 1e-9) as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EncoderState {
    pub count: i64,
    /// True output angle at the previous sample, rad.
    pub last_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderSample {
    pub state: EncoderState,
    /// `count * 2 pi / PPR`, rad.
    pub measured_angle: f64,
    /// Set when the shaft moved half a turn or more since the last sample.
    pub aliasing: bool,
}

/// Samples the encoder at `true_angle_out`. Single-channel encoders count
/// forward.
pub fn sample_encoder(true_angle_out: f64, cfg: &EncoderConfig, state: EncoderState) -> EncoderSample {
    sample_encoder_with_direction(true_angle_out, cfg, state, Direction::Forward)
}

/// Like [`sample_encoder`], but a single-channel encoder takes its counting
/// direction from `commanded`, the current solenoid state. Quadrature
/// encoders ignore it.
pub fn sample_encoder_with_direction(
    true_angle_out: f64,
    cfg: &EncoderConfig,
    state: EncoderState,
    commanded: Direction,
) -> EncoderSample {
    let aliasing = libm::fabs(true_angle_out - state.last_angle) >= PI;
    let pulses = cfg
        .pulse_index(true_angle_out)
        .saturating_sub(cfg.pulse_index(state.last_angle));
    let count = if cfg.quadrature {
        state.count.saturating_add(pulses)
    } else {
        state
            .count
            .saturating_add(pulses.saturating_abs() * commanded.sign() as i64)
    };
    EncoderSample {
        state: EncoderState {
            count,
            last_angle: true_angle_out,
        },
        measured_angle: count as f64 * cfg.quantum(),
        aliasing,
    }
}

/// One timestamped count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderReading {
    pub t: f64,
    pub count: i64,
}

/// Backward difference of the measured angle over the last `window` seconds
/// of `readings` (oldest first), rad/s.
pub fn estimate_velocity(readings: &[EncoderReading], window: f64, cfg: &EncoderConfig) -> Result<f64> {
    let latest = readings.last().ok_or(Error::InsufficientData("no encoder readings"))?;
    let horizon = latest.t - window * (1.0 + 1e-9);
    let oldest = readings
        .iter()
        .find(|r| r.t >= horizon)
        .filter(|r| r.t < latest.t)
        .ok_or(Error::InsufficientData("velocity window covers fewer than two samples"))?;
    if latest.count == oldest.count {
        return Ok(0.0);
    }
    Ok((latest.count - oldest.count) as f64 * cfg.quantum() / (latest.t - oldest.t))
}
