//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tesla_servo_core::calibration::{fit_force_chain, PRESSURE_FORCE_TABLE};
use tesla_servo_core::drivetrain::MotorParams;
use tesla_servo_core::metrics::{self, HomogeneityDefinition, MetricsReport, Roi};
use tesla_servo_core::sim::{force_table, positioning_experiment, run_scenario, speed_pressure_sweep, Scenario};
use tesla_servo_core::turbine::calibrate_torque_map;

use crate::config;
use crate::error::{HarnessError, Result};
use crate::{pgm, tables, trace};

/// Relative tolerance on the bench forces in `force-table --check`.
pub const FORCE_CHECK_TOLERANCE: f64 = 0.15;

#[derive(Debug, Parser)]
#[command(name = "tesla-servo", version, about = "Pneumatic Tesla-turbine servo simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Output directory.
    #[arg(long, global = true, default_value = "./out")]
    pub out: PathBuf,
    /// Override the scenario integration step, s.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Verify the result and exit with code 4 when it fails.
    #[arg(long, global = true)]
    pub check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DefinitionArg {
    PeakToPeakPpm,
    FractionalRange,
}

impl From<DefinitionArg> for HomogeneityDefinition {
    fn from(d: DefinitionArg) -> Self {
        match d {
            DefinitionArg::PeakToPeakPpm => HomogeneityDefinition::PeakToPeakPpm,
            DefinitionArg::FractionalRange => HomogeneityDefinition::FractionalRange,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one or more scenarios and write their traces.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Steady speed against supply pressure.
    Sweep {
        /// Scenario or parameter file providing `[motor]`; `@reference` for the fixture.
        params: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        pressures: Vec<f64>,
    },
    /// Stalled-slide force against supply pressure.
    ForceTable {
        params: PathBuf,
        /// Defaults to the bench pressures 1.5, 2.0, 2.5, 3.0 Bar.
        #[arg(long, value_delimiter = ',')]
        pressures: Option<Vec<f64>>,
    },
    /// Run the scenario's `[positioning]` experiment and summarize each target.
    Position { scenario: PathBuf },
    /// Fit the flow map (and optionally the force chain) to bench data.
    Calibrate {
        /// CSV with `pressure_bar,speed_rpm` columns.
        observations: PathBuf,
        /// Base motor parameters; defaults to the built-in fixture.
        #[arg(long)]
        params: Option<PathBuf>,
        /// CSV with `pressure_bar,force_n` columns.
        #[arg(long)]
        forces: Option<PathBuf>,
    },
    /// Image-quality metrics of a PGM scan.
    Metrics {
        image: PathBuf,
        /// Reference scan for image subtraction.
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        /// Uniformity and signal region `x,y,w,h`.
        #[arg(long, value_parser = parse_rect)]
        roi: RectArg,
        /// Background region `x,y,w,h` for SNR.
        #[arg(long, value_parser = parse_rect)]
        noise_roi: Option<RectArg>,
        #[arg(long, value_enum, default_value = "peak-to-peak-ppm")]
        definition: DefinitionArg,
        #[arg(long)]
        label: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RectArg {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl RectArg {
    fn roi(self) -> Roi {
        Roi::rect(self.x, self.y, self.w, self.h)
    }
}

fn parse_rect(s: &str) -> std::result::Result<RectArg, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] => Ok(RectArg { x, y, w, h }),
        _ => Err("expected x,y,w,h".into()),
    }
}

fn apply_overrides(s: &mut Scenario, g: &GlobalOpts) -> Result<()> {
    if let Some(dt) = g.dt {
        s.dt = dt;
    }
    if let Some(seed) = g.seed {
        s.seed = seed;
    }
    s.validate()?;
    Ok(())
}

fn load_motor(path: &Path) -> Result<MotorParams> {
    let doc = config::load_document(path)?;
    let motor = doc
        .get("motor")
        .cloned()
        .ok_or_else(|| HarnessError::parse(path, "missing [motor] table"))?;
    let m: MotorParams = motor
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::parse(path, e))?;
    m.validate()?;
    Ok(m)
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Runs a parsed command line and returns what should go to stdout.
pub fn execute(cli: &Cli) -> Result<String> {
    let g = &cli.global;
    ensure_out(&g.out)?;
    let mut out = String::new();
    match &cli.command {
        Command::Run { scenarios } => {
            let results: Vec<Result<String>> = std::thread::scope(|scope| {
                let handles: Vec<_> = scenarios
                    .iter()
                    .map(|path| scope.spawn(move || run_one(path, g)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| {
                        h.join().unwrap_or_else(|_| {
                            Err(tesla_servo_core::Error::Numerical {
                                last_valid: 0,
                                what: "scenario thread panicked",
                            }
                            .into())
                        })
                    })
                    .collect()
            });
            for r in results {
                out.push_str(&r?);
            }
        }
        Command::Sweep { params, pressures } => {
            let motor = load_motor(params)?;
            let rows = speed_pressure_sweep(&motor, pressures)?;
            let bytes = tables::speed_table_csv(&rows)?;
            tables::write_atomic(&g.out.join("sweep.csv"), &bytes)?;
            out.push_str(&String::from_utf8_lossy(&bytes));
            if g.check && rows.windows(2).any(|w| w[1].0 >= w[0].0 && w[1].1 < w[0].1) {
                return Err(HarnessError::Check("speed is not monotone in pressure".into()));
            }
        }
        Command::ForceTable { params, pressures } => {
            let motor = load_motor(params)?;
            let pressures = pressures
                .clone()
                .unwrap_or_else(|| PRESSURE_FORCE_TABLE.iter().map(|r| r.0).collect());
            let rows = force_table(&motor, &pressures)?;
            let bytes = tables::force_table_csv(&rows)?;
            tables::write_atomic(&g.out.join("force_table.csv"), &bytes)?;
            out.push_str(&String::from_utf8_lossy(&bytes));
            if g.check {
                for &(p, f) in &rows {
                    if let Some(&(_, measured)) = PRESSURE_FORCE_TABLE.iter().find(|r| r.0 == p) {
                        if (f - measured).abs() > FORCE_CHECK_TOLERANCE * measured {
                            return Err(HarnessError::Check(format!(
                                "{p} Bar: predicted {f:.2} N, measured {measured} N"
                            )));
                        }
                    }
                }
            }
        }
        Command::Position { scenario } => {
            let doc = config::load_document(scenario)?;
            let spec = config::positioning_spec(&doc, scenario)?
                .ok_or_else(|| HarnessError::parse(scenario, "missing [positioning] table"))?;
            let mut s = config::scenario_from_table(doc, scenario)?;
            apply_overrides(&mut s, g)?;
            let report = positioning_experiment(&s, &spec)?;
            let stem = file_stem(&s.label);
            tables::write_atomic(
                &g.out.join(format!("{stem}.csv")),
                &trace::trace_to_bytes(&report.trace)?,
            )?;
            let bytes = tables::positioning_csv(&report.rows)?;
            tables::write_atomic(&g.out.join(format!("{stem}_position.csv")), &bytes)?;
            out.push_str(&String::from_utf8_lossy(&bytes));
            if g.check {
                if let Some(bad) = report
                    .rows
                    .iter()
                    .find(|r| r.settle_time.is_none() || !(r.final_error.abs() < s.settle.band))
                {
                    return Err(HarnessError::Check(format!("target {} mm did not settle", bad.target)));
                }
            }
        }
        Command::Calibrate {
            observations,
            params,
            forces,
        } => {
            let base = match params {
                Some(p) => load_motor(p)?,
                None => MotorParams::uncalibrated(),
            };
            let obs = tables::read_speed_observations(observations)?;
            let fit = calibrate_torque_map(&obs, &base)?;
            let mut motor = base;
            motor.fluid = fit.params;
            if let Some(f) = forces {
                let rows = tables::read_force_rows(f)?;
                let chain = fit_force_chain(&rows, &motor)?;
                motor.screw_efficiency = chain.screw_efficiency;
                motor.screw_friction_force = chain.screw_friction_force;
            }
            let mut doc = toml::Table::new();
            doc.insert(
                "motor".into(),
                toml::Value::try_from(motor).map_err(|e| HarnessError::parse("motor", e))?,
            );
            let text = toml::to_string(&doc).map_err(|e| HarnessError::parse("motor", e))?;
            tables::write_atomic(&g.out.join("calibrated_motor.toml"), text.as_bytes())?;
            writeln!(out, "residual_rms_rpm = {}", fit.residual_rms).ok();
            out.push_str(&text);
            if g.check && !(fit.residual_rms < 1.0) {
                return Err(HarnessError::Check(format!("residual RMS {} RPM", fit.residual_rms)));
            }
        }
        Command::Metrics {
            image,
            reference,
            roi,
            noise_roi,
            definition,
            label,
        } => {
            let img = pgm::read(image)?;
            let label = label.clone().unwrap_or_else(|| {
                image
                    .file_stem()
                    .map_or("image".into(), |s| s.to_string_lossy().into_owned())
            });
            let region = roi.roi();
            let snr = noise_roi.map(|n| metrics::snr(&img, &region, &n.roi())).transpose()?;
            let piu = metrics::piu(&img, &region)?;
            let homogeneity = metrics::homogeneity(&img, &region, (*definition).into())?;
            let stem = file_stem(&label);
            let subtraction_nonzero = match reference {
                Some(r) => {
                    let diff = metrics::subtract(&img, &pgm::read(r)?)?;
                    pgm::write(&g.out.join(format!("{stem}_subtraction.pgm")), &diff)?;
                    Some(diff.pixels().iter().filter(|&&p| p != 0).count())
                }
                None => None,
            };
            let report = MetricsReport {
                label,
                snr,
                piu,
                homogeneity,
                subtraction_nonzero,
            };
            let text = metrics_report_text(&report, *roi, *noise_roi)?;
            tables::write_atomic(&g.out.join(format!("{stem}_metrics.toml")), text.as_bytes())?;
            out.push_str(&text);
        }
    }
    Ok(out)
}

/// Structured-text report: the metric values plus the ROIs they came from.
pub fn metrics_report_text(report: &MetricsReport, roi: RectArg, noise_roi: Option<RectArg>) -> Result<String> {
    let mut doc = toml::Table::try_from(report).map_err(|e| HarnessError::parse("report", e))?;
    let rect = |r: RectArg| {
        toml::Value::Array(
            [r.x, r.y, r.w, r.h]
                .iter()
                .map(|&v| toml::Value::Integer(v as i64))
                .collect(),
        )
    };
    let mut rois = toml::Table::new();
    rois.insert("signal".into(), rect(roi));
    if let Some(n) = noise_roi {
        rois.insert("noise".into(), rect(n));
    }
    doc.insert("rois".into(), toml::Value::Table(rois));
    toml::to_string(&doc).map_err(|e| HarnessError::parse("report", e))
}

fn run_one(path: &Path, g: &GlobalOpts) -> Result<String> {
    let mut s = config::load_scenario(path)?;
    apply_overrides(&mut s, g)?;
    let samples = run_scenario(&s)?;
    let bytes = trace::trace_to_bytes(&samples)?;
    let target = g.out.join(format!("{}.csv", file_stem(&s.label)));
    tables::write_atomic(&target, &bytes)?;
    let last = samples.last();
    let final_error = last.map_or(0.0, |x| x.error);
    if g.check && s.open_loop.is_none() && !(final_error.abs() < s.settle.band) {
        return Err(HarnessError::Check(format!(
            "{}: final error {final_error:.3} mm outside {} mm",
            s.label, s.settle.band
        )));
    }
    Ok(format!(
        "{}: {} samples, final x = {:.3} mm, final error = {:.3} mm -> {}\n",
        s.label,
        samples.len(),
        last.map_or(s.initial_position, |x| x.x),
        final_error,
        target.display()
    ))
}
