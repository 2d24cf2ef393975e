//! Models of a pneumatic Tesla-turbine servo actuator for MR-guided needle
//! insertion, plus the image-quality measures used to check that it leaves
//! scans undisturbed.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the scenario
//! configuration and the command-line front end live in the `tesla-servo`
//! crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod calibration;
pub mod control;
pub mod drivetrain;
pub mod error;
pub mod metrics;
pub mod sensing;
pub mod sim;
pub mod turbine;
pub mod units;

pub use error::{Error, Result};
