//! File formats, scenario configuration and the `tesla-servo` command line
//! for the models in `tesla_servo_core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod pgm;
pub mod tables;
pub mod trace;

pub use error::{HarnessError, Result};
