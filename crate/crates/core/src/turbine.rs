//! Driving torque of the bladeless disk turbine.
//!
//! Two views of the same quantity live here. [`shear_torque`] integrates the
//! wall shear of a parabolic inter-disk velocity profile over the disk radius.
//! [`flow_to_torque`] is the calibrated control-oriented map `i * rho * h(kappa * u)`
//! that the simulation actually uses; its constants come out of
//! [`calibrate_torque_map`] rather than from geometry.

use crate::control::{Direction, ValveCommand};
use crate::drivetrain::MotorParams;
use crate::error::{Error, Result};
use crate::units::{rad_s_to_rpm, rpm_to_rad_s};

/// Default number of Simpson nodes for [`shear_torque`].
pub const DEFAULT_QUADRATURE_NODES: usize = 101;

/// Lowest supply pressure accepted by the steady-state and table helpers, Bar.
pub const MIN_SUPPLY_BAR: f64 = 0.0;
/// Highest supply pressure accepted by the steady-state and table helpers, Bar.
pub const MAX_SUPPLY_BAR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TurbineGeometry {
    pub disk_count: u32,
    /// Exhaust (inner) radius, m.
    pub r1: f64,
    /// Outer disk radius, m.
    pub r2: f64,
    /// Half of the inter-disk spacing, m.
    pub half_gap: f64,
}

impl TurbineGeometry {
    /// Six 55 mm disks on 2 mm spacers.
    pub fn reference_fixture() -> Self {
        Self {
            disk_count: 6,
            r1: 0.008,
            r2: 0.0275,
            half_gap: 0.001,
        }
    }

    pub fn n_gaps(&self) -> u32 {
        self.disk_count.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.disk_count < 2 {
            return Err(Error::config("geometry.disk_count", "need at least two disks"));
        }
        if !(self.r1 > 0.0 && self.r1 < self.r2 && self.r2.is_finite()) {
            return Err(Error::config("geometry.r1", "require 0 < r1 < r2"));
        }
        if !(self.half_gap > 0.0 && self.half_gap.is_finite()) {
            return Err(Error::config("geometry.half_gap", "must be positive"));
        }
        Ok(())
    }
}

/// Fluid and flow-map constants.
///
/// `h(flow)` is zero up to `h_deadband`, rises with `h_slope` above it and is
/// capped at `h_sat`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FluidTorqueParams {
    /// Dynamic viscosity of the working fluid, Pa s.
    pub mu: f64,
    /// Torque per unit of `h`, N m.
    pub rho_gain: f64,
    pub h_deadband: f64,
    pub h_slope: f64,
    pub h_sat: f64,
}

impl FluidTorqueParams {
    /// Air at room temperature with an uncalibrated unit flow map.
    pub fn uncalibrated() -> Self {
        Self {
            mu: 1.81e-5,
            rho_gain: 1.0e-3,
            h_deadband: 0.0,
            h_slope: 1.0,
            h_sat: 1.0,
        }
    }

    pub fn h(&self, flow: f64) -> f64 {
        if flow <= self.h_deadband {
            0.0
        } else {
            (self.h_slope * (flow - self.h_deadband)).min(self.h_sat)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::config("fluid.mu", "must be positive"));
        }
        if !(self.rho_gain > 0.0 && self.rho_gain.is_finite()) {
            return Err(Error::config("fluid.rho_gain", "must be positive"));
        }
        if !(self.h_deadband >= 0.0 && self.h_deadband.is_finite()) {
            return Err(Error::config("fluid.h_deadband", "must be non-negative"));
        }
        if !(self.h_slope >= 0.0 && self.h_slope.is_finite()) {
            return Err(Error::config("fluid.h_slope", "must be non-negative"));
        }
        if !(self.h_sat >= 0.0) {
            return Err(Error::config("fluid.h_sat", "must be non-negative"));
        }
        Ok(())
    }
}

/// Peak (mid-gap) tangential fluid speed as a function of radius.
///
/// Across the gap the profile is parabolic,
/// `v(y) = v_peak * (1 - (y / half_gap)^2)`, so the wall shear slope is
/// `2 * v_peak / half_gap`.
pub trait VelocityProfile {
    fn peak_velocity_at(&self, r: f64) -> f64;
}

impl<F: Fn(f64) -> f64> VelocityProfile for F {
    fn peak_velocity_at(&self, r: f64) -> f64 {
        self(r)
    }
}

/// Tangential velocity at gap coordinate `y` measured from mid-gap.
pub fn velocity_across_gap(v_peak: f64, y: f64, half_gap: f64) -> f64 {
    let s = y / half_gap;
    v_peak * (1.0 - s * s)
}

/// Magnitude of `dv/dy` at the disk wall.
pub fn wall_shear_slope(v_peak: f64, half_gap: f64) -> f64 {
    2.0 * v_peak / half_gap
}

/// Shear torque `n * mu * integral(dv/dy dr)` over `[r1, r2]`, 101 nodes.
pub fn shear_torque(geom: &TurbineGeometry, params: &FluidTorqueParams, profile: &impl VelocityProfile) -> Result<f64> {
    shear_torque_with_nodes(geom, params, profile, DEFAULT_QUADRATURE_NODES)
}

/// Composite Simpson evaluation of the shear torque. An even `nodes` is
/// bumped to the next odd count; fewer than three nodes is rejected.
pub fn shear_torque_with_nodes(
    geom: &TurbineGeometry,
    params: &FluidTorqueParams,
    profile: &impl VelocityProfile,
    nodes: usize,
) -> Result<f64> {
    geom.validate()?;
    if nodes < 3 {
        return Err(Error::config("quadrature nodes", "need at least 3"));
    }
    let nodes = nodes | 1;
    let intervals = nodes - 1;
    let h = (geom.r2 - geom.r1) / intervals as f64;
    let mut acc = 0.0;
    for k in 0..nodes {
        // Last node pinned to r2 so the domain end is exact.
        let r = if k == intervals {
            geom.r2
        } else {
            geom.r1 + k as f64 * h
        };
        let v = profile.peak_velocity_at(r);
        if !v.is_finite() {
            return Err(Error::NonFiniteProfile { radius: r, value: v });
        }
        let w = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * wall_shear_slope(v, geom.half_gap);
    }
    let integral = acc * h / 3.0;
    Ok(geom.n_gaps() as f64 * params.mu * integral)
}

/// Signed driving torque `i * rho * h(kappa * u)`.
pub fn flow_to_torque(cmd: &ValveCommand, params: &FluidTorqueParams, kappa: f64) -> f64 {
    let flow = kappa * cmd.u.max(0.0);
    cmd.direction.sign() * params.rho_gain * params.h(flow)
}

fn check_supply(pressure: f64) -> Result<()> {
    if !(MIN_SUPPLY_BAR..=MAX_SUPPLY_BAR).contains(&pressure) {
        return Err(Error::OutOfRange {
            what: "supply pressure (Bar)",
            value: pressure,
            min: MIN_SUPPLY_BAR,
            max: MAX_SUPPLY_BAR,
        });
    }
    Ok(())
}

/// Torque produced with the proportional valve fully open at `pressure`.
pub fn full_open_torque(pressure: f64, motor: &MotorParams) -> f64 {
    let cmd = ValveCommand {
        u: motor.valve_full_scale,
        direction: Direction::Forward,
    };
    flow_to_torque(&cmd, &motor.fluid, motor.effective_kappa(pressure))
}

/// Steady turbine speed (RPM) with the valve fully open at `supply_pressure`.
///
/// Solves `b * w + c = tau(p)` by bisection. Returns 0 while the drive torque
/// cannot break stiction.
pub fn steady_state_speed(supply_pressure: f64, motor: &MotorParams) -> Result<f64> {
    check_supply(supply_pressure)?;
    let tau = full_open_torque(supply_pressure, motor);
    if tau <= motor.coulomb {
        return Ok(0.0);
    }
    if motor.viscous <= 0.0 {
        return Err(Error::Undefined("steady speed without viscous friction"));
    }
    let residual = |w: f64| tau - motor.coulomb - motor.viscous * w;
    let mut lo = 0.0;
    let mut hi = rpm_to_rad_s(1000.0);
    while residual(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NonFinite("steady speed bracket"));
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(rad_s_to_rpm(0.5 * (lo + hi)))
}

/// Speed the model would settle at if the clipping at zero were removed,
/// `(tau - c) / b`, in RPM. Negative below the breakaway pressure.
pub(crate) fn unclipped_speed(supply_pressure: f64, motor: &MotorParams) -> f64 {
    rad_s_to_rpm((full_open_torque(supply_pressure, motor) - motor.coulomb) / motor.viscous)
}

/// Result of fitting the flow map to speed observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueMapFit {
    pub params: FluidTorqueParams,
    /// RMS of the speed residuals, RPM.
    pub residual_rms: f64,
}

/// Fits `rho_gain` and `h_deadband` to `(pressure Bar, steady RPM)` pairs.
///
/// The zero-speed observation with the highest pressure is the breakaway
/// anchor: the drive torque must equal Coulomb friction there, so its
/// residual is the unclipped model speed. Every other point is compared with
/// [`steady_state_speed`]. Nested golden-section searches minimize the sum of
/// squared residuals, outer over the deadband and inner over the gain.
pub fn calibrate_torque_map(observations: &[(f64, f64)], motor: &MotorParams) -> Result<TorqueMapFit> {
    let mut pressures: alloc::vec::Vec<f64> = observations.iter().map(|o| o.0).collect();
    pressures.sort_by(f64::total_cmp);
    pressures.dedup();
    if pressures.len() < 2 {
        return Err(Error::InsufficientData("need two distinct pressures"));
    }
    for &(p, w) in observations {
        check_supply(p)?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::config("observations", "speeds must be finite and non-negative"));
        }
    }
    let anchor = observations
        .iter()
        .filter(|o| o.1 == 0.0)
        .map(|o| o.0)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))))
        .ok_or(Error::InsufficientData("no zero-speed stiction observation"))?;
    if motor.viscous <= 0.0 {
        return Err(Error::config("motor.viscous", "calibration needs b > 0"));
    }
    let p_top = pressures[pressures.len() - 1];
    let w_top = observations.iter().map(|o| o.1).fold(0.0, f64::max);
    let flow_top = motor.effective_kappa(p_top) * motor.valve_full_scale;

    let model_with = |rho: f64, deadband: f64| {
        let mut m = *motor;
        m.fluid.rho_gain = rho;
        m.fluid.h_deadband = deadband;
        m
    };
    let sse = |m: &MotorParams| -> f64 {
        observations
            .iter()
            .map(|&(p, w)| {
                let predicted = if p == anchor && w == 0.0 {
                    unclipped_speed(p, m)
                } else {
                    steady_state_speed(p, m).unwrap_or(f64::INFINITY)
                };
                let r = predicted - w;
                r * r
            })
            .sum()
    };
    let best_rho = |deadband: f64| -> f64 {
        let probe = model_with(1.0, deadband);
        let h_top = probe.fluid.h(flow_top).max(f64::MIN_POSITIVE);
        let needed = motor.viscous * rpm_to_rad_s(w_top) + motor.coulomb;
        let hi = 4.0 * needed.max(motor.coulomb).max(f64::MIN_POSITIVE) / h_top;
        golden_section(|rho| sse(&model_with(rho, deadband)), 0.0, hi, 1e-13)
    };
    let deadband = golden_section(
        |d| sse(&model_with(best_rho(d), d)),
        0.0,
        flow_top * (1.0 - 1e-6),
        1e-13,
    );
    let rho = best_rho(deadband);
    let fitted = model_with(rho, deadband);
    let residual_rms = libm::sqrt(sse(&fitted) / observations.len() as f64);
    Ok(TorqueMapFit {
        params: fitted.fluid,
        residual_rms,
    })
}

/// Golden-section minimizer over `[lo, hi]`; assumes `f` is unimodal there.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if hi - lo <= rel_tol * (libm::fabs(lo) + libm::fabs(hi)) + f64::MIN_POSITIVE {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}
