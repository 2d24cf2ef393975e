//! Position PID, valve command shaping and pneumatic transport delay.

use alloc::collections::VecDeque;

use crate::error::{Error, Result};

/// Inlet port selected by the solenoid valve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    #[default]
    Forward,
    Reverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }

    pub fn from_sign(v: f64) -> Option<Self> {
        if v > 0.0 {
            Some(Direction::Forward)
        } else if v < 0.0 {
            Some(Direction::Reverse)
        } else {
            None
        }
    }
}

/// Proportional valve voltage plus port selection. `u` is never negative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValveCommand {
    pub u: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PidGains {
    /// V/mm.
    pub kp: f64,
    /// V/(mm s).
    pub ki: f64,
    /// V s/mm.
    pub kd: f64,
    /// Valve voltage ceiling, V.
    pub u_max: f64,
    /// Cap on `|ki * integral|`, V.
    pub integral_clamp: f64,
}

impl PidGains {
    /// Hand-tuned for the calibrated fixture. Not measured values.
    pub fn fixture() -> Self {
        Self {
            kp: 4.0,
            ki: 0.5,
            kd: 2.0,
            u_max: 10.0,
            integral_clamp: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gains.kp", self.kp), ("gains.ki", self.ki), ("gains.kd", self.kd)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be a non-negative number"));
            }
        }
        if !(self.u_max > 0.0 && self.u_max.is_finite()) {
            return Err(Error::config("gains.u_max", "must be positive"));
        }
        if !(self.integral_clamp >= 0.0 && self.integral_clamp <= self.u_max) {
            return Err(Error::config("gains.integral_clamp", "must lie in [0, u_max]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    /// Accumulated error, mm s.
    pub integral: f64,
    pub prev_error: f64,
}

/// One PID update on `e = q - q_d`:
/// `u = -kp * e - ki * integral(e) - kd * q_dot`.
///
/// The integral uses the trapezoid rule, is clamped so `|ki * integral|`
/// stays within `integral_clamp`, and is frozen whenever the output is
/// saturated and integrating would push it further out.
pub fn pid_step(gains: &PidGains, state: PidState, q: f64, q_d: f64, q_dot: f64, dt: f64) -> (f64, PidState) {
    let e = q - q_d;
    let mut integral = state.integral + 0.5 * (e + state.prev_error) * dt;
    if gains.ki > 0.0 {
        let lim = gains.integral_clamp / gains.ki;
        integral = integral.clamp(-lim, lim);
    }
    let output = |i: f64| -gains.kp * e - gains.ki * i - gains.kd * q_dot;
    let u = output(integral);
    if libm::fabs(u) > gains.u_max {
        let winding = -gains.ki * (integral - state.integral);
        if winding * u > 0.0 {
            integral = state.integral;
        }
    }
    let next = PidState {
        integral,
        prev_error: e,
    };
    (output(integral), next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActuationLimits {
    /// Bar.
    pub min_effective_pressure: f64,
    /// Bar.
    pub max_pressure: f64,
    pub max_turbine_rpm: f64,
    /// s.
    pub solenoid_switch_time: f64,
    /// s.
    pub tube_delay: f64,
}

impl Default for ActuationLimits {
    fn default() -> Self {
        Self {
            min_effective_pressure: 0.5,
            max_pressure: 4.0,
            max_turbine_rpm: 13000.0,
            solenoid_switch_time: 0.015,
            tube_delay: 0.030,
        }
    }
}

impl ActuationLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_effective_pressure >= 0.0 && self.min_effective_pressure < self.max_pressure) {
            return Err(Error::config(
                "limits.min_effective_pressure",
                "must be below max_pressure",
            ));
        }
        if !(self.max_turbine_rpm > 0.0) {
            return Err(Error::config("limits.max_turbine_rpm", "must be positive"));
        }
        if !(self.solenoid_switch_time >= 0.0 && self.solenoid_switch_time.is_finite()) {
            return Err(Error::config("limits.solenoid_switch_time", "must be non-negative"));
        }
        if !(self.tube_delay >= 0.0 && self.tube_delay.is_finite()) {
            return Err(Error::config("limits.tube_delay", "must be non-negative"));
        }
        Ok(())
    }
}

/// Turns a signed controller output into a [`ValveCommand`].
///
/// A sign change starts a solenoid switch: the old direction is reported
/// and `u` is held at zero for `solenoid_switch_time`, after which the new
/// direction takes over. A zero output keeps the current direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandShaper {
    direction: Direction,
    pending: Option<Direction>,
    switch_steps_left: u64,
    switch_steps: u64,
    u_max: f64,
}

impl CommandShaper {
    pub fn new(u_max: f64, limits: &ActuationLimits, dt: f64) -> Self {
        let switch_steps = if limits.solenoid_switch_time > 0.0 {
            libm::ceil(limits.solenoid_switch_time / dt - 1e-9) as u64
        } else {
            0
        };
        Self {
            direction: Direction::Forward,
            pending: None,
            switch_steps_left: 0,
            switch_steps,
            u_max,
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Shapes the output for one control period.
    pub fn shape_command(&mut self, u_signed: f64) -> ValveCommand {
        if let Some(wanted) = Direction::from_sign(u_signed) {
            let target = self.pending.unwrap_or(self.direction);
            if wanted != target {
                if wanted == self.direction {
                    self.pending = None;
                    self.switch_steps_left = 0;
                } else {
                    self.pending = Some(wanted);
                    self.switch_steps_left = self.switch_steps;
                }
            }
        }
        if self.pending.is_some() && self.switch_steps_left == 0 {
            self.direction = self.pending.take().unwrap_or(self.direction);
        }
        if self.pending.is_some() {
            self.switch_steps_left -= 1;
            return ValveCommand {
                u: 0.0,
                direction: self.direction,
            };
        }
        ValveCommand {
            u: libm::fabs(u_signed).min(self.u_max),
            direction: self.direction,
        }
    }
}

/// Fixed-delay line: values pushed at step `k` come out at step `k + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine<T> {
    buffer: VecDeque<T>,
}

impl<T: Copy> DelayLine<T> {
    /// `delay` seconds rounded to whole steps of `dt`; the line starts full
    /// of `idle`.
    pub fn new(delay: f64, dt: f64, idle: T) -> Self {
        let steps = libm::round(delay / dt) as usize;
        let mut buffer = VecDeque::with_capacity(steps + 1);
        buffer.extend(core::iter::repeat_n(idle, steps));
        Self { buffer }
    }

    pub fn delay_steps(&self) -> usize {
        self.buffer.len()
    }

    pub fn push(&mut self, value: T) -> T {
        if self.buffer.is_empty() {
            return value;
        }
        self.buffer.push_back(value);
        self.buffer.pop_front().unwrap_or(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn gains(kp: f64, ki: f64, kd: f64) -> PidGains {
        PidGains {
            kp,
            ki,
            kd,
            u_max: 10.0,
            integral_clamp: 2.0,
        }
    }

    #[test]
    fn zero_error_zero_output() {
        let (u, _) = pid_step(&gains(3.0, 1.0, 1.0), PidState::default(), 4.0, 4.0, 0.0, 1e-3);
        assert_eq!(u, 0.0);
    }

    #[test]
    fn proportional_drives_toward_target() {
        let (u, _) = pid_step(&gains(1.0, 0.0, 0.0), PidState::default(), 2.0, 5.0, 0.0, 1e-3);
        assert_eq!(u, 3.0);
    }

    #[test]
    fn derivative_uses_measured_velocity() {
        let (u, _) = pid_step(&gains(2.0, 0.0, 0.5), PidState::default(), 1.0, 0.0, -1.0, 1e-3);
        assert_eq!(u, -1.5);
    }

    #[test]
    fn integral_accumulates_by_trapezoid() {
        let g = gains(0.0, 1.0, 0.0);
        let s = PidState {
            integral: 0.0,
            prev_error: 1.0,
        };
        let (u, s) = pid_step(&g, s, 3.0, 0.0, 0.0, 0.1);
        assert!((s.integral - 0.2).abs() < 1e-15);
        assert!((u + 0.2).abs() < 1e-15);
    }

    #[test]
    fn integral_respects_clamp() {
        let g = gains(0.0, 2.0, 0.0);
        let mut s = PidState::default();
        for _ in 0..10_000 {
            s = pid_step(&g, s, 50.0, 0.0, 0.0, 1e-2).1;
            assert!((g.ki * s.integral).abs() <= g.integral_clamp + 1e-12);
        }
    }

    #[test]
    fn integral_freezes_while_saturated() {
        let g = PidGains {
            integral_clamp: 10.0,
            ..gains(1.0, 1.0, 0.0)
        };
        let mut s = PidState::default();
        for _ in 0..100 {
            s = pid_step(&g, s, 0.0, 20.0, 0.0, 0.01).1;
        }
        assert_eq!(s.integral, 0.0);
    }

    fn limits(switch: f64) -> ActuationLimits {
        ActuationLimits {
            solenoid_switch_time: switch,
            ..ActuationLimits::default()
        }
    }

    #[test]
    fn zero_output_keeps_direction() {
        let mut sh = CommandShaper::new(10.0, &limits(0.0), 1e-3);
        sh.shape_command(-3.0);
        let c = sh.shape_command(0.0);
        assert_eq!(
            c,
            ValveCommand {
                u: 0.0,
                direction: Direction::Reverse
            }
        );
    }

    #[test]
    fn saturates_at_u_max() {
        let mut sh = CommandShaper::new(10.0, &limits(0.0), 1e-3);
        assert_eq!(sh.shape_command(42.0).u, 10.0);
        assert_eq!(sh.shape_command(-42.0).u, 10.0);
    }

    #[test]
    fn sign_flip_inserts_switch_interval() {
        let dt = 1e-3;
        let mut sh = CommandShaper::new(10.0, &limits(0.005), dt);
        let out: Vec<_> = [1.0, 1.0, -2.0, -2.0, -2.0, -2.0, -2.0, -2.0, -2.0]
            .iter()
            .map(|&u| sh.shape_command(u))
            .collect();
        assert_eq!(
            out[1],
            ValveCommand {
                u: 1.0,
                direction: Direction::Forward
            }
        );
        for c in &out[2..7] {
            assert_eq!(
                *c,
                ValveCommand {
                    u: 0.0,
                    direction: Direction::Forward
                }
            );
        }
        assert_eq!(
            out[7],
            ValveCommand {
                u: 2.0,
                direction: Direction::Reverse
            }
        );
    }

    #[test]
    fn flip_back_cancels_switch() {
        let mut sh = CommandShaper::new(10.0, &limits(0.005), 1e-3);
        sh.shape_command(1.0);
        assert_eq!(sh.shape_command(-1.0).u, 0.0);
        let c = sh.shape_command(1.0);
        assert_eq!(
            c,
            ValveCommand {
                u: 1.0,
                direction: Direction::Forward
            }
        );
    }

    #[test]
    fn zero_delay_is_identity() {
        let mut d = DelayLine::new(0.0, 1e-3, 0.0);
        for k in 0..10 {
            assert_eq!(d.push(k as f64), k as f64);
        }
    }

    #[test]
    fn delay_shifts_by_whole_steps() {
        let mut d = DelayLine::new(0.003, 1e-3, -1i32);
        let out: Vec<i32> = (0..6).map(|k| d.push(k)).collect();
        assert_eq!(out, [-1, -1, -1, 0, 1, 2]);
    }

    #[test]
    fn validation() {
        assert!(PidGains::fixture().validate().is_ok());
        assert!(gains(-1.0, 0.0, 0.0).validate().is_err());
        let mut g = gains(1.0, 0.0, 0.0);
        g.integral_clamp = 11.0;
        assert!(g.validate().is_err());
        assert!(ActuationLimits::default().validate().is_ok());
    }
}
