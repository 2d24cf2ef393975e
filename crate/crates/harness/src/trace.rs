//! CSV form of a simulation trace: a header row, then one sample per line
//! in [`COLUMNS`] order. Floats use the shortest representation that parses
//! back to the same value, so a written trace reads back bit-exact.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use tesla_servo_core::sim::{TraceFlags, TraceSample};

use crate::error::{HarnessError, Result};

pub const COLUMNS: [&str; 13] = [
    "t",
    "q_turbine",
    "omega_turbine",
    "q_out",
    "x",
    "encoder_count",
    "u",
    "direction",
    "tau_drive",
    "tau_load",
    "force",
    "error",
    "flags",
];

const SPEED_LIMIT: &str = "speed_limit_exceeded";
const ALIASING: &str = "aliasing";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: f64,
    q_turbine: f64,
    omega_turbine: f64,
    q_out: f64,
    x: f64,
    encoder_count: i64,
    u: f64,
    direction: i8,
    tau_drive: f64,
    tau_load: f64,
    force: f64,
    error: f64,
    flags: String,
}

fn flags_to_string(f: TraceFlags) -> String {
    let mut parts = Vec::new();
    if f.speed_limit_exceeded {
        parts.push(SPEED_LIMIT);
    }
    if f.aliasing {
        parts.push(ALIASING);
    }
    parts.join("|")
}

fn flags_from_str(s: &str) -> std::result::Result<TraceFlags, String> {
    let mut f = TraceFlags::default();
    for part in s.split('|').filter(|p| !p.is_empty()) {
        match part {
            SPEED_LIMIT => f.speed_limit_exceeded = true,
            ALIASING => f.aliasing = true,
            other => return Err(format!("unknown flag {other:?}")),
        }
    }
    Ok(f)
}

impl From<&TraceSample> for Row {
    fn from(s: &TraceSample) -> Self {
        Row {
            t: s.t,
            q_turbine: s.q_turbine,
            omega_turbine: s.omega_turbine,
            q_out: s.q_out,
            x: s.x,
            encoder_count: s.encoder_count,
            u: s.u,
            direction: s.direction,
            tau_drive: s.tau_drive,
            tau_load: s.tau_load,
            force: s.force,
            error: s.error,
            flags: flags_to_string(s.flags),
        }
    }
}

pub fn write_trace<W: Write>(out: W, trace: &[TraceSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if trace.is_empty() {
        w.write_record(COLUMNS).map_err(|e| HarnessError::parse("trace", e))?;
    }
    for s in trace {
        w.serialize(Row::from(s)).map_err(|e| HarnessError::parse("trace", e))?;
    }
    w.flush().map_err(|e| HarnessError::io("trace", e))
}

pub fn trace_to_bytes(trace: &[TraceSample]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace)?;
    Ok(buf)
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceSample>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| HarnessError::parse("trace", e))?;
    if header.iter().ne(COLUMNS) {
        return Err(HarnessError::parse("trace", "unexpected header"));
    }
    r.deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(|e| HarnessError::parse("trace", e))?;
            Ok(TraceSample {
                t: row.t,
                q_turbine: row.q_turbine,
                omega_turbine: row.omega_turbine,
                q_out: row.q_out,
                x: row.x,
                encoder_count: row.encoder_count,
                u: row.u,
                direction: row.direction,
                tau_drive: row.tau_drive,
                tau_load: row.tau_load,
                force: row.force,
                error: row.error,
                flags: flags_from_str(&row.flags).map_err(|e| HarnessError::parse("trace", e))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_for_empty_trace() {
        let bytes = trace_to_bytes(&[]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap().trim_end(), COLUMNS.join(","));
    }

    #[test]
    fn flags_encode_both_ways() {
        let f = TraceFlags {
            speed_limit_exceeded: true,
            aliasing: true,
        };
        assert_eq!(flags_from_str(&flags_to_string(f)).unwrap(), f);
        assert_eq!(flags_from_str("").unwrap(), TraceFlags::default());
        assert!(flags_from_str("bogus").is_err());
    }
}
