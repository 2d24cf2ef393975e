//! Small CSV tables: bench observations in, experiment summaries out.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tesla_servo_core::sim::PositioningRow;

use crate::error::{HarnessError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct SpeedRow {
    pressure_bar: f64,
    speed_rpm: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ForceRow {
    pressure_bar: f64,
    force_n: f64,
}

#[derive(Debug, Serialize)]
struct PositionCsvRow {
    target_mm: f64,
    final_error_mm: f64,
    peak_overshoot_mm: f64,
    /// `inf` when the target never settled.
    settle_time_s: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::parse(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| HarnessError::parse(path, e))
}

fn to_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| HarnessError::parse("table", e))?;
    }
    w.into_inner().map_err(|e| HarnessError::parse("table", e.error()))
}

/// `pressure_bar,speed_rpm` observations.
pub fn read_speed_observations(path: &Path) -> Result<Vec<(f64, f64)>> {
    Ok(read_rows::<SpeedRow>(path)?
        .into_iter()
        .map(|r| (r.pressure_bar, r.speed_rpm))
        .collect())
}

/// `pressure_bar,force_n` rows.
pub fn read_force_rows(path: &Path) -> Result<Vec<(f64, f64)>> {
    Ok(read_rows::<ForceRow>(path)?
        .into_iter()
        .map(|r| (r.pressure_bar, r.force_n))
        .collect())
}

pub fn speed_table_csv(rows: &[(f64, f64)]) -> Result<Vec<u8>> {
    to_bytes(rows.iter().map(|&(pressure_bar, speed_rpm)| SpeedRow {
        pressure_bar,
        speed_rpm,
    }))
}

pub fn force_table_csv(rows: &[(f64, f64)]) -> Result<Vec<u8>> {
    to_bytes(
        rows.iter()
            .map(|&(pressure_bar, force_n)| ForceRow { pressure_bar, force_n }),
    )
}

pub fn positioning_csv(rows: &[PositioningRow]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Ok(b"target_mm,final_error_mm,peak_overshoot_mm,settle_time_s\n".to_vec());
    }
    to_bytes(rows.iter().map(|r| PositionCsvRow {
        target_mm: r.target,
        final_error_mm: r.final_error,
        peak_overshoot_mm: r.peak_overshoot,
        settle_time_s: r.settle_time.unwrap_or(f64::INFINITY),
    }))
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    f.sync_all().map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}
