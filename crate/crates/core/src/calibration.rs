//! Bench data and the fitted reference fixture.

use crate::drivetrain::{axial_force, MotorParams};
use crate::error::{Error, Result};
use crate::turbine::{calibrate_torque_map, full_open_torque};

/// Breakaway pressure and top speed on the bench, `(Bar, RPM)`.
pub const SPEED_ANCHORS: [(f64, f64); 2] = [(0.5, 0.0), (4.0, 13000.0)];

/// Measured stall force of the slide, `(Bar, N)`.
pub const PRESSURE_FORCE_TABLE: [(f64, f64); 4] = [(1.5, 11.49), (2.0, 22.05), (2.5, 29.38), (3.0, 36.01)];

/// Rows of [`PRESSURE_FORCE_TABLE`] the force chain is fitted on.
pub const FORCE_FIT_ROWS: [(f64, f64); 2] = [PRESSURE_FORCE_TABLE[0], PRESSURE_FORCE_TABLE[3]];

/// Net torque on a stalled rotor with the valve fully open: drive minus
/// breakaway friction, floored at zero.
pub fn stall_net_torque(pressure: f64, motor: &MotorParams) -> f64 {
    (full_open_torque(pressure, motor) - motor.coulomb).max(0.0)
}

/// Axial force a stalled slide exerts at `pressure`, N.
pub fn stall_force(pressure: f64, motor: &MotorParams) -> f64 {
    let tau_out = stall_net_torque(pressure, motor) * motor.gear_ratio;
    (axial_force(tau_out, motor.screw_lead, motor.screw_efficiency) - motor.screw_friction_force).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceChainFit {
    pub screw_efficiency: f64,
    pub screw_friction_force: f64,
}

/// Fits efficiency and friction offset so that
/// `F = 2 pi eta N (tau - c) / lead - F0` matches `(Bar, N)` rows in the
/// least-squares sense. Two rows give an exact fit.
pub fn fit_force_chain(rows: &[(f64, f64)], motor: &MotorParams) -> Result<ForceChainFit> {
    if rows.len() < 2 {
        return Err(Error::InsufficientData("need two force rows"));
    }
    let n = rows.len() as f64;
    let xs = rows.iter().map(|&(p, _)| stall_net_torque(p, motor));
    let mean_x = xs.clone().sum::<f64>() / n;
    let mean_y = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let (sxy, sxx) = rows.iter().zip(xs).fold((0.0, 0.0), |(sxy, sxx), (&(_, y), x)| {
        (sxy + (x - mean_x) * (y - mean_y), sxx + (x - mean_x) * (x - mean_x))
    });
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("force rows need distinct stall torques"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let per_unit = axial_force(motor.gear_ratio, motor.screw_lead, 1.0);
    let screw_efficiency = slope / per_unit;
    if !(screw_efficiency > 0.0 && screw_efficiency <= 1.0) {
        return Err(Error::OutOfRange {
            what: "fitted screw efficiency",
            value: screw_efficiency,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(ForceChainFit {
        screw_efficiency,
        screw_friction_force: -intercept,
    })
}

/// Hardware constants with the flow map fitted to [`SPEED_ANCHORS`] and the
/// force chain fitted to [`FORCE_FIT_ROWS`].
pub fn reference_motor() -> Result<MotorParams> {
    calibrated_motor(MotorParams::uncalibrated(), &SPEED_ANCHORS, &FORCE_FIT_ROWS)
}

/// Runs both fits on top of `base`.
pub fn calibrated_motor(
    base: MotorParams,
    speed_observations: &[(f64, f64)],
    force_rows: &[(f64, f64)],
) -> Result<MotorParams> {
    base.validate()?;
    let mut motor = base;
    motor.fluid = calibrate_torque_map(speed_observations, &base)?.params;
    let chain = fit_force_chain(force_rows, &motor)?;
    motor.screw_efficiency = chain.screw_efficiency;
    motor.screw_friction_force = chain.screw_friction_force;
    Ok(motor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn force_rows_are_exact_anchors() {
        let m = reference_motor().unwrap();
        assert!((stall_force(1.5, &m) - 11.49).abs() < 1e-9);
        assert!((stall_force(3.0, &m) - 36.01).abs() < 1e-9);
        assert!(m.screw_efficiency > 0.0 && m.screw_efficiency <= 1.0);
    }

    #[test]
    fn one_force_row_is_insufficient() {
        let m = reference_motor().unwrap();
        assert!(fit_force_chain(&[(1.5, 11.49)], &m).is_err());
    }
}
