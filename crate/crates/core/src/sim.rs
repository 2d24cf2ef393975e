//! Closed-loop scenario runner and the bench experiments built on it.
//!
//! One simulation step runs, in order: encoder sample, PID, command shaping,
//! tube delay, flow map, load reflection, rotor update. Every sample in the
//! trace records the state at the start of its step together with the
//! commands applied during that step.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::calibration::{reference_motor, stall_force};
use crate::control::{pid_step, ActuationLimits, CommandShaper, DelayLine, PidGains, PidState, ValveCommand};
use crate::drivetrain::{axial_load, reflect_load, screw_position, step_dynamics, LoadModel, MotorParams, RotorState};
use crate::error::{Error, Result};
use crate::sensing::{estimate_velocity, sample_encoder_with_direction, EncoderConfig, EncoderReading, EncoderState};
use crate::turbine::{flow_to_torque, steady_state_speed, MAX_SUPPLY_BAR, MIN_SUPPLY_BAR};
use crate::units::{m_to_mm, rad_s_to_rpm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TargetKind {
    /// Piecewise-constant: each point holds until the next one.
    #[default]
    Steps,
    /// Linear interpolation between points, held after the last.
    Ramp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetPoint {
    /// s.
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetSchedule {
    #[cfg_attr(feature = "serde", serde(default))]
    pub kind: TargetKind,
    pub points: Vec<TargetPoint>,
}

impl TargetSchedule {
    pub fn steps(points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Self {
            kind: TargetKind::Steps,
            points: points
                .into_iter()
                .map(|(time, value)| TargetPoint { time, value })
                .collect(),
        }
    }

    pub fn ramp(points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Self {
            kind: TargetKind::Ramp,
            ..Self::steps(points)
        }
    }

    /// Value at `t`; `before` applies ahead of the first point.
    pub fn value_at(&self, t: f64, before: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.time <= t);
        if idx == 0 {
            return before;
        }
        let cur = self.points[idx - 1];
        match (self.kind, self.points.get(idx)) {
            (TargetKind::Ramp, Some(next)) if next.time > cur.time => {
                cur.value + (next.value - cur.value) * (t - cur.time) / (next.time - cur.time)
            }
            _ => cur.value,
        }
    }

    fn validate(&self, field: &'static str) -> Result<()> {
        for w in self.points.windows(2) {
            if !(w[1].time >= w[0].time) {
                return Err(Error::config(field, "points must be sorted by time"));
            }
        }
        if self.points.iter().any(|p| !p.time.is_finite() || !p.value.is_finite()) {
            return Err(Error::config(field, "points must be finite"));
        }
        Ok(())
    }
}

/// Band and hold time used to decide that a target has been reached.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SettleCriterion {
    /// mm.
    pub band: f64,
    /// s.
    pub hold: f64,
}

impl Default for SettleCriterion {
    fn default() -> Self {
        Self { band: 0.5, hold: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub label: String,
    pub motor: MotorParams,
    pub gains: PidGains,
    pub limits: ActuationLimits,
    pub encoder: EncoderConfig,
    pub load: LoadModel,
    /// Bar.
    pub supply_pressure: f64,
    /// Standard deviation of supply pressure noise, Bar. Drawn from `seed`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub pressure_ripple: f64,
    /// Encoder velocity window, s.
    pub velocity_window: f64,
    /// s.
    pub dt: f64,
    /// s.
    pub duration: f64,
    /// Slide position at t = 0, mm.
    #[cfg_attr(feature = "serde", serde(default))]
    pub initial_position: f64,
    /// Position targets, mm.
    pub targets: TargetSchedule,
    /// Signed valve voltage that replaces the PID output when present, V.
    #[cfg_attr(feature = "serde", serde(default))]
    pub open_loop: Option<TargetSchedule>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub settle: SettleCriterion,
    pub seed: u64,
}

impl Scenario {
    /// Calibrated hardware in free space at 4 Bar with a single `target_mm` step.
    pub fn reference_fixture(target_mm: f64) -> Result<Self> {
        Ok(Self {
            label: String::from("reference-fixture"),
            motor: reference_motor()?,
            gains: PidGains::fixture(),
            limits: ActuationLimits::default(),
            encoder: EncoderConfig::default(),
            load: LoadModel::free_space(),
            supply_pressure: 4.0,
            pressure_ripple: 0.0,
            velocity_window: 0.02,
            dt: 5e-4,
            duration: 20.0,
            initial_position: 0.0,
            targets: TargetSchedule::steps([(0.0, target_mm)]),
            open_loop: None,
            settle: SettleCriterion::default(),
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.motor.validate()?;
        self.gains.validate()?;
        self.limits.validate()?;
        self.encoder.validate()?;
        self.load.validate()?;
        if !(self.dt > 0.0 && self.dt <= crate::drivetrain::MAX_DT) {
            return Err(Error::config("dt", "must be in (0, 10 ms]"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config("duration", "must be positive"));
        }
        if !(self.supply_pressure >= 0.0 && self.supply_pressure <= self.limits.max_pressure) {
            return Err(Error::config("supply_pressure", "must lie in [0, limits.max_pressure]"));
        }
        if !(self.pressure_ripple >= 0.0 && self.pressure_ripple.is_finite()) {
            return Err(Error::config("pressure_ripple", "must be non-negative"));
        }
        if !(self.velocity_window >= self.dt) {
            return Err(Error::config("velocity_window", "must cover at least one step"));
        }
        if !self.initial_position.is_finite() {
            return Err(Error::config("initial_position", "must be finite"));
        }
        if self.open_loop.is_none() && self.targets.points.is_empty() {
            return Err(Error::config("targets", "closed-loop runs need at least one target"));
        }
        self.targets.validate("targets")?;
        if let Some(ol) = &self.open_loop {
            ol.validate("open_loop")?;
        }
        if !(self.settle.band > 0.0 && self.settle.hold >= 0.0) {
            return Err(Error::config("settle", "band must be positive and hold non-negative"));
        }
        Ok(())
    }

    /// Number of samples in the trace.
    pub fn steps(&self) -> usize {
        libm::round(self.duration / self.dt) as usize
    }

    pub fn target_at(&self, t: f64) -> f64 {
        self.targets.value_at(t, self.initial_position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraceFlags {
    /// Turbine speed magnitude above `limits.max_turbine_rpm`.
    pub speed_limit_exceeded: bool,
    pub aliasing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    /// s.
    pub t: f64,
    /// rad.
    pub q_turbine: f64,
    /// RPM.
    pub omega_turbine: f64,
    /// rad.
    pub q_out: f64,
    /// mm.
    pub x: f64,
    pub encoder_count: i64,
    /// Valve voltage reaching the turbine after the tube delay, V.
    pub u: f64,
    pub direction: i8,
    /// N m.
    pub tau_drive: f64,
    /// N m, turbine side.
    pub tau_load: f64,
    /// Axial load on the slide, N.
    pub force: f64,
    /// `x - target`, mm.
    pub error: f64,
    pub flags: TraceFlags,
}

impl TraceSample {
    fn is_finite(&self) -> bool {
        [
            self.t,
            self.q_turbine,
            self.omega_turbine,
            self.q_out,
            self.x,
            self.u,
            self.tau_drive,
            self.tau_load,
            self.force,
            self.error,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Simulates `s` and returns one sample per step.
pub fn run_scenario(s: &Scenario) -> Result<Vec<TraceSample>> {
    s.validate()?;
    let m = &s.motor;
    let dt = s.dt;
    let n = s.steps();

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let ripple = if s.pressure_ripple > 0.0 {
        Some(Normal::new(0.0, s.pressure_ripple).map_err(|_| Error::config("pressure_ripple", "invalid"))?)
    } else {
        None
    };

    let mut rotor = RotorState::default();
    let mut encoder = EncoderState::default();
    let mut readings: VecDeque<EncoderReading> = VecDeque::new();
    let window_len = libm::round(s.velocity_window / dt) as usize + 2;
    let mut pid = PidState::default();
    let mut shaper = CommandShaper::new(s.gains.u_max, &s.limits, dt);
    let mut tube = DelayLine::new(s.limits.tube_delay, dt, ValveCommand::default());

    let lead = m.screw_lead;
    let mut trace = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        let q_out = rotor.q / m.gear_ratio;
        if !(libm::fabs(q_out) < MAX_TRACKED_ANGLE && rotor.q_dot.is_finite()) {
            return Err(Error::Numerical {
                last_valid: k.saturating_sub(1),
                what: "rotor state diverged",
            });
        }
        let x_m = screw_position(q_out, lead);
        let x = s.initial_position + m_to_mm(x_m);

        let sample = sample_encoder_with_direction(q_out, &s.encoder, encoder, shaper.direction());
        encoder = sample.state;
        readings.push_back(EncoderReading {
            t,
            count: encoder.count,
        });
        while readings.len() > window_len {
            readings.pop_front();
        }
        let x_measured = s.initial_position + m_to_mm(screw_position(sample.measured_angle, lead));
        let omega_out_est = estimate_velocity(readings.make_contiguous(), s.velocity_window, &s.encoder).unwrap_or(0.0);
        let x_dot_est = m_to_mm(screw_position(omega_out_est, lead));

        let target = s.target_at(t);
        let u_signed = match &s.open_loop {
            Some(schedule) => schedule.value_at(t, 0.0),
            None => {
                let (u, next) = pid_step(&s.gains, pid, x_measured, target, x_dot_est, dt);
                pid = next;
                u
            }
        };
        let issued = shaper.shape_command(u_signed);
        let applied = tube.push(issued);

        let pressure = match &ripple {
            Some(noise) => (s.supply_pressure + noise.sample(&mut rng)).clamp(0.0, s.limits.max_pressure),
            None => s.supply_pressure,
        };
        let tau_drive = flow_to_torque(&applied, &m.fluid, m.effective_kappa(pressure));
        let x_dot_m = screw_position(rotor.q_dot / m.gear_ratio, lead);
        let force = axial_load(x_m + crate::units::mm_to_m(s.initial_position), x_dot_m, &s.load);
        let tau_load = reflect_load(force, rotor.q_dot, m);

        let omega_rpm = rad_s_to_rpm(rotor.q_dot);
        let rec = TraceSample {
            t,
            q_turbine: rotor.q,
            omega_turbine: omega_rpm,
            q_out,
            x,
            encoder_count: encoder.count,
            u: applied.u,
            direction: applied.direction.sign() as i8,
            tau_drive,
            tau_load,
            force,
            error: x - target,
            flags: TraceFlags {
                speed_limit_exceeded: libm::fabs(omega_rpm) > s.limits.max_turbine_rpm,
                aliasing: sample.aliasing,
            },
        };
        if !rec.is_finite() {
            return Err(Error::Numerical {
                last_valid: k.saturating_sub(1),
                what: "non-finite state",
            });
        }
        trace.push(rec);
        rotor = step_dynamics(rotor, tau_drive, tau_load, m, dt).map_err(|_| Error::Numerical {
            last_valid: k,
            what: "rotor update failed",
        })?;
    }
    Ok(trace)
}

/// Output-shaft angle beyond which pulse counts lose integer precision, rad.
const MAX_TRACKED_ANGLE: f64 = 1e12;

/// Steady speed for each pressure, `(Bar, RPM)`.
pub fn speed_pressure_sweep(motor: &MotorParams, pressures: &[f64]) -> Result<Vec<(f64, f64)>> {
    pressures
        .iter()
        .map(|&p| steady_state_speed(p, motor).map(|w| (p, w)))
        .collect()
}

/// Stalled-slide axial force for each pressure, `(Bar, N)`.
pub fn force_table(motor: &MotorParams, pressures: &[f64]) -> Result<Vec<(f64, f64)>> {
    pressures
        .iter()
        .map(|&p| {
            if !(MIN_SUPPLY_BAR..=MAX_SUPPLY_BAR).contains(&p) {
                return Err(Error::OutOfRange {
                    what: "supply pressure (Bar)",
                    value: p,
                    min: MIN_SUPPLY_BAR,
                    max: MAX_SUPPLY_BAR,
                });
            }
            Ok((p, stall_force(p, motor)))
        })
        .collect()
}

/// How a positioning run commands its targets. Distances are relative to
/// the scenario's initial position, mm.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum PositioningSpec {
    SingleStep {
        distance: f64,
        hold: f64,
    },
    Incremental {
        step: f64,
        count: usize,
        interval: f64,
    },
    /// `speed` in mm/s; `hold` after the ramp ends.
    Ramp {
        distance: f64,
        speed: f64,
        hold: f64,
    },
    /// Explicit absolute `(time s, target mm)` steps.
    Targets {
        points: Vec<(f64, f64)>,
        hold: f64,
    },
}

impl PositioningSpec {
    fn schedule(&self, x0: f64) -> (TargetSchedule, f64) {
        match *self {
            PositioningSpec::SingleStep { distance, hold } => (TargetSchedule::steps([(0.0, x0 + distance)]), hold),
            PositioningSpec::Incremental { step, count, interval } => (
                TargetSchedule::steps((0..count).map(|k| (k as f64 * interval, x0 + (k + 1) as f64 * step))),
                count as f64 * interval,
            ),
            PositioningSpec::Ramp { distance, speed, hold } => {
                let t_end = libm::fabs(distance) / speed;
                (TargetSchedule::ramp([(0.0, x0), (t_end, x0 + distance)]), t_end + hold)
            }
            PositioningSpec::Targets { ref points, hold } => {
                let end = points.last().map_or(0.0, |p| p.0) + hold;
                (TargetSchedule::steps(points.iter().copied()), end)
            }
        }
    }
}

/// Per-target summary of a positioning run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PositioningRow {
    /// mm.
    pub target: f64,
    /// mm, signed.
    pub final_error: f64,
    /// Largest excursion past the target in the direction of travel, mm.
    pub peak_overshoot: f64,
    /// Seconds after the target was issued; `None` when it never settled.
    pub settle_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositioningReport {
    pub rows: Vec<PositioningRow>,
    pub trace: Vec<TraceSample>,
}

impl PositioningReport {
    pub fn max_overshoot(&self) -> f64 {
        self.rows.iter().map(|r| r.peak_overshoot).fold(0.0, f64::max)
    }
}

/// Runs `base` with the targets described by `spec` and summarizes each one.
pub fn positioning_experiment(base: &Scenario, spec: &PositioningSpec) -> Result<PositioningReport> {
    let (targets, duration) = spec.schedule(base.initial_position);
    if targets.points.is_empty() {
        return Ok(PositioningReport {
            rows: Vec::new(),
            trace: Vec::new(),
        });
    }
    let mut s = base.clone();
    s.targets = targets;
    s.duration = duration;
    s.open_loop = None;
    let trace = run_scenario(&s)?;
    let rows = summarize(&s, &trace);
    Ok(PositioningReport { rows, trace })
}

/// Splits a trace at each target point and extracts the per-target metrics.
/// Ramp waypoints are not targets; only the ramp's end point gets a row.
pub fn summarize(s: &Scenario, trace: &[TraceSample]) -> Vec<PositioningRow> {
    let points = &s.targets.points;
    let mut rows = Vec::with_capacity(points.len());
    let mut previous = s.initial_position;
    for (i, p) in points.iter().enumerate() {
        if s.targets.kind == TargetKind::Ramp && i + 1 < points.len() {
            previous = p.value;
            continue;
        }
        let end = points.get(i + 1).map_or(f64::INFINITY, |n| n.time);
        let window: Vec<&TraceSample> = trace.iter().filter(|x| x.t >= p.time && x.t < end).collect();
        let travel = libm::copysign(1.0, p.value - previous);
        previous = p.value;
        let Some(last) = window.last() else {
            rows.push(PositioningRow {
                target: p.value,
                final_error: f64::NAN,
                peak_overshoot: 0.0,
                settle_time: None,
            });
            continue;
        };
        let peak_overshoot = window.iter().map(|x| (x.x - p.value) * travel).fold(0.0, f64::max);
        let final_error = last.x - p.value;
        let settle_start = match window.iter().rposition(|x| libm::fabs(x.x - p.value) >= s.settle.band) {
            None => Some(window[0].t),
            Some(j) => window.get(j + 1).map(|x| x.t),
        };
        let settle_time = settle_start
            .filter(|&t0| last.t + s.dt - t0 >= s.settle.hold)
            .map(|t0| t0 - p.time);
        rows.push(PositioningRow {
            target: p.value,
            final_error,
            peak_overshoot,
            settle_time,
        });
    }
    rows
}
