//! Rotor dynamics, worm reduction, power screw and needle load.

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::turbine::{FluidTorqueParams, TurbineGeometry};

/// Worm reduction of the reference hardware.
pub const GEAR_RATIO: f64 = 60.0;

/// Largest integration step accepted by [`step_dynamics`], s.
pub const MAX_DT: f64 = 0.01;

/// Everything the drive chain needs, from disks to slide.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MotorParams {
    /// Rotor inertia `J`, kg m^2.
    pub inertia: f64,
    /// Viscous friction `b`, N m s/rad.
    pub viscous: f64,
    /// Coulomb friction `c`, N m.
    pub coulomb: f64,
    pub gear_ratio: f64,
    /// Slide travel per output revolution, m.
    pub screw_lead: f64,
    /// Combined worm and screw efficiency in (0, 1].
    pub screw_efficiency: f64,
    /// Static friction of the screw seen at stall, N.
    pub screw_friction_force: f64,
    pub non_backdrivable: bool,
    /// Valve flow gain, flow units per volt at rated pressure.
    pub kappa: f64,
    /// Proportional valve full-scale voltage, V.
    pub valve_full_scale: f64,
    /// Supply pressure at which `kappa` is quoted, Bar.
    pub rated_pressure: f64,
    pub geometry: TurbineGeometry,
    pub fluid: FluidTorqueParams,
}

impl MotorParams {
    /// Hardware constants before the flow map and force chain are fitted.
    /// `J`, `b` and `c` are not published; these values give a roughly
    /// two-second spin-up time constant.
    pub fn uncalibrated() -> Self {
        Self {
            inertia: 1.5e-6,
            viscous: 7.5e-7,
            coulomb: 1.0e-4,
            gear_ratio: GEAR_RATIO,
            screw_lead: 0.002,
            screw_efficiency: 0.3,
            screw_friction_force: 0.0,
            non_backdrivable: true,
            kappa: 0.1,
            valve_full_scale: 10.0,
            rated_pressure: 4.0,
            geometry: TurbineGeometry::reference_fixture(),
            fluid: FluidTorqueParams::uncalibrated(),
        }
    }

    /// Flow gain at a given supply pressure, `kappa * p / p_rated`.
    pub fn effective_kappa(&self, pressure: f64) -> f64 {
        self.kappa * pressure / self.rated_pressure
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.inertia) {
            return Err(Error::config("motor.inertia", "must be positive"));
        }
        if !(self.viscous >= 0.0 && self.viscous.is_finite()) {
            return Err(Error::config("motor.viscous", "must be non-negative"));
        }
        if !(self.coulomb >= 0.0 && self.coulomb.is_finite()) {
            return Err(Error::config("motor.coulomb", "must be non-negative"));
        }
        if !positive(self.gear_ratio) {
            return Err(Error::config("motor.gear_ratio", "must be positive"));
        }
        if !positive(self.screw_lead) {
            return Err(Error::config("motor.screw_lead", "must be positive"));
        }
        if !(self.screw_efficiency > 0.0 && self.screw_efficiency <= 1.0) {
            return Err(Error::config("motor.screw_efficiency", "must be in (0, 1]"));
        }
        if !self.screw_friction_force.is_finite() {
            return Err(Error::config("motor.screw_friction_force", "must be finite"));
        }
        if !positive(self.kappa) {
            return Err(Error::config("motor.kappa", "must be positive"));
        }
        if !positive(self.valve_full_scale) {
            return Err(Error::config("motor.valve_full_scale", "must be positive"));
        }
        if !positive(self.rated_pressure) {
            return Err(Error::config("motor.rated_pressure", "must be positive"));
        }
        self.geometry.validate()?;
        self.fluid.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorState {
    /// Turbine shaft angle, rad.
    pub q: f64,
    /// Turbine shaft velocity, rad/s.
    pub q_dot: f64,
}

/// Advances `J q'' = -b q' - c sgn(q') + tau_L + tau` by one semi-implicit
/// Euler step.
///
/// A rotor at rest stays at rest while `|tau + tau_L| <= c`. A rotor that
/// would reverse within the step stops at zero when friction can hold it,
/// and otherwise continues from zero for the rest of the step.
pub fn step_dynamics(
    state: RotorState,
    tau_drive: f64,
    tau_load: f64,
    params: &MotorParams,
    dt: f64,
) -> Result<RotorState> {
    if !tau_drive.is_finite() {
        return Err(Error::NonFinite("drive torque"));
    }
    if !tau_load.is_finite() {
        return Err(Error::NonFinite("load torque"));
    }
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::OutOfRange {
            what: "dt (s)",
            value: dt,
            min: 0.0,
            max: MAX_DT,
        });
    }
    let net = tau_drive + tau_load;
    let j = params.inertia;
    let c = params.coulomb;
    let v0 = state.q_dot;

    let breakaway = |remaining: f64| (net - c * libm::copysign(1.0, net)) / j * remaining;

    let v1 = if v0 == 0.0 {
        if libm::fabs(net) <= c {
            return Ok(state);
        }
        breakaway(dt)
    } else {
        let s = libm::copysign(1.0, v0);
        let acc = (-params.viscous * v0 - c * s + net) / j;
        let v = v0 + acc * dt;
        if v * s > 0.0 {
            v
        } else if libm::fabs(net) <= c {
            0.0
        } else {
            let t_stop = (-v0 / acc).clamp(0.0, dt);
            breakaway(dt - t_stop)
        }
    };
    Ok(RotorState {
        q: state.q + v1 * dt,
        q_dot: v1,
    })
}

/// Output speed of the worm reduction, same units as the input.
pub fn gearbox_out(omega_turbine: f64) -> f64 {
    omega_turbine / GEAR_RATIO
}

/// Load-side torque that reaches the turbine shaft. A self-locking worm
/// passes nothing back.
pub fn backdrive_filter(tau_from_load_side: f64, params: &MotorParams) -> f64 {
    if params.non_backdrivable {
        0.0
    } else {
        tau_from_load_side
    }
}

/// Turbine-side torque produced by an axial slide force (N, positive along +x).
///
/// A force resisting the current rotor motion is a reaction the worm must
/// push against and always reaches the rotor. Anything that would drive the
/// rotor goes through [`backdrive_filter`].
pub fn reflect_load(axial_force: f64, rotor_velocity: f64, params: &MotorParams) -> f64 {
    let tau_out = axial_force * params.screw_lead / (2.0 * PI * params.screw_efficiency);
    let tau_turbine = tau_out / params.gear_ratio;
    if tau_turbine * rotor_velocity < 0.0 {
        tau_turbine
    } else {
        backdrive_filter(tau_turbine, params)
    }
}

/// Slide position (m) for an output shaft angle.
pub fn screw_position(q_out: f64, lead: f64) -> f64 {
    q_out / (2.0 * PI) * lead
}

/// Output shaft angle (rad) for a slide position.
pub fn screw_angle(x: f64, lead: f64) -> f64 {
    x / lead * (2.0 * PI)
}

/// Axial force (N) from output shaft torque through the power screw.
pub fn axial_force(tau_out: f64, lead: f64, efficiency: f64) -> f64 {
    2.0 * PI * efficiency * tau_out / lead
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LoadMode {
    FreeSpace,
    Phantom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoadModel {
    pub mode: LoadMode,
    /// Slide position where tissue contact begins, m.
    pub entry_depth: f64,
    /// Coulomb-type insertion force inside tissue, N.
    pub resistive_force: f64,
    /// N s/m.
    pub viscous_load: f64,
    /// Constant axial force on the slide along +x, N. Independent of mode.
    #[cfg_attr(feature = "serde", serde(default))]
    pub constant_force: f64,
}

impl LoadModel {
    pub fn free_space() -> Self {
        Self {
            mode: LoadMode::FreeSpace,
            entry_depth: 0.0,
            resistive_force: 0.0,
            viscous_load: 0.0,
            constant_force: 0.0,
        }
    }

    /// Breast-tissue phantom: about 2 N to advance a biopsy needle.
    pub fn phantom() -> Self {
        Self {
            mode: LoadMode::Phantom,
            entry_depth: 0.002,
            resistive_force: 2.0,
            viscous_load: 0.0,
            constant_force: 0.0,
        }
    }

    /// Tumour tissue: up to 4 N axial force.
    pub fn tumour() -> Self {
        Self {
            resistive_force: 4.0,
            ..Self::phantom()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resistive_force >= 0.0 && self.resistive_force.is_finite()) {
            return Err(Error::config("load.resistive_force", "must be non-negative"));
        }
        if !(self.viscous_load >= 0.0 && self.viscous_load.is_finite()) {
            return Err(Error::config("load.viscous_load", "must be non-negative"));
        }
        if !self.entry_depth.is_finite() {
            return Err(Error::config("load.entry_depth", "must be finite"));
        }
        if !self.constant_force.is_finite() {
            return Err(Error::config("load.constant_force", "must be finite"));
        }
        Ok(())
    }
}

/// Tissue force on the slide (N, signed along +x). Always opposes `x_dot`
/// and vanishes at rest, before the entry depth, and in free space.
pub fn tissue_load(x: f64, x_dot: f64, model: &LoadModel) -> f64 {
    if model.mode == LoadMode::FreeSpace || x < model.entry_depth || x_dot == 0.0 {
        return 0.0;
    }
    -(model.resistive_force * libm::copysign(1.0, x_dot) + model.viscous_load * x_dot)
}

/// Total axial force on the slide: tissue plus the constant external force.
pub fn axial_load(x: f64, x_dot: f64, model: &LoadModel) -> f64 {
    tissue_load(x, x_dot, model) + model.constant_force
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MotorParams {
        MotorParams::uncalibrated()
    }

    #[test]
    fn stiction_holds_rotor() {
        let p = params();
        let s = RotorState { q: 0.3, q_dot: 0.0 };
        let next = step_dynamics(s, 0.9 * p.coulomb, 0.0, &p, 5e-4).unwrap();
        assert_eq!(next, s);
        let next = step_dynamics(s, 0.5 * p.coulomb, -1.4 * p.coulomb, &p, 5e-4).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn torque_free_rotor_coasts() {
        let mut p = params();
        p.viscous = 0.0;
        p.coulomb = 0.0;
        let dt = 1e-3;
        let mut s = RotorState { q: 0.0, q_dot: 5.0 };
        for k in 1..=100 {
            s = step_dynamics(s, 0.0, 0.0, &p, dt).unwrap();
            assert_eq!(s.q_dot, 5.0);
            assert!((s.q - 5.0 * dt * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = params();
        let s = RotorState::default();
        assert!(step_dynamics(s, f64::NAN, 0.0, &p, 1e-3).is_err());
        assert!(step_dynamics(s, 0.0, f64::INFINITY, &p, 1e-3).is_err());
        assert!(step_dynamics(s, 0.0, 0.0, &p, 0.0).is_err());
        assert!(step_dynamics(s, 0.0, 0.0, &p, 0.011).is_err());
    }

    #[test]
    fn decelerating_rotor_stops_instead_of_reversing() {
        let p = params();
        let s = RotorState { q: 0.0, q_dot: 1e-3 };
        let next = step_dynamics(s, 0.0, 0.0, &p, 1e-3).unwrap();
        assert_eq!(next.q_dot, 0.0);
    }

    #[test]
    fn gearbox_reduction() {
        assert!((gearbox_out(13000.0) - 216.666_666_666_666_66).abs() < 1e-9);
        assert_eq!(gearbox_out(0.0), 0.0);
    }

    #[test]
    fn backdrive() {
        let mut p = params();
        assert_eq!(backdrive_filter(0.5, &p), 0.0);
        assert_eq!(backdrive_filter(-3.0, &p), 0.0);
        p.non_backdrivable = false;
        assert_eq!(backdrive_filter(0.5, &p), 0.5);
    }

    #[test]
    fn reflected_load_only_resists() {
        let p = params();
        // Opposing a forward-spinning rotor: passes.
        assert!(reflect_load(-2.0, 100.0, &p) < 0.0);
        // Pushing a resting rotor: blocked by the worm.
        assert_eq!(reflect_load(4.0, 0.0, &p), 0.0);
        assert_eq!(reflect_load(-4.0, 0.0, &p), 0.0);
        // Aiding the motion: blocked.
        assert_eq!(reflect_load(2.0, 100.0, &p), 0.0);
    }

    #[test]
    fn screw_kinematics() {
        assert!((screw_position(2.0 * PI, 0.002) - 0.002).abs() < 1e-15);
        assert!((screw_position(10.0 * PI, 0.002) - 0.010).abs() < 1e-15);
        let q = 3.7;
        assert!((screw_angle(screw_position(q, 0.002), 0.002) - q).abs() < 1e-12);
    }

    #[test]
    fn axial_force_values() {
        assert_eq!(axial_force(0.0, 0.002, 0.3), 0.0);
        // 2*pi*0.3*0.02/0.002 = 6*pi
        assert!((axial_force(0.02, 0.002, 0.3) - 18.849_555_921_538_76).abs() < 1e-9);
    }

    #[test]
    fn tissue_forces() {
        let free = LoadModel::free_space();
        assert_eq!(tissue_load(0.05, 0.01, &free), 0.0);
        let ph = LoadModel::phantom();
        assert_eq!(tissue_load(0.01, 0.004, &ph), -2.0);
        assert_eq!(tissue_load(0.01, -0.004, &ph), 2.0);
        assert_eq!(tissue_load(0.01, 0.0, &ph), 0.0);
        assert_eq!(tissue_load(0.001, 0.004, &ph), 0.0);
        assert_eq!(LoadModel::tumour().resistive_force, 4.0);
    }

    #[test]
    fn validation() {
        assert!(params().validate().is_ok());
        let mut p = params();
        p.screw_efficiency = 1.2;
        assert!(matches!(
            p.validate(),
            Err(Error::Config {
                field: "motor.screw_efficiency",
                ..
            })
        ));
        let mut p = params();
        p.inertia = 0.0;
        assert!(p.validate().is_err());
    }
}
