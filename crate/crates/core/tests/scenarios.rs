use tesla_servo_core::calibration::reference_motor;
use tesla_servo_core::drivetrain::LoadModel;
use tesla_servo_core::sim::*;

fn step(target: f64, load: LoadModel) -> Scenario {
    let mut s = Scenario::reference_fixture(target).unwrap();
    s.load = load;
    s
}

fn crossing(trace: &[TraceSample], level: f64) -> Option<f64> {
    trace.iter().find(|x| x.x >= level).map(|x| x.t)
}

#[test]
fn no_gains_no_motion() {
    let mut s = step(0.0, LoadModel::free_space());
    s.gains.kp = 0.0;
    s.gains.ki = 0.0;
    s.gains.kd = 0.0;
    s.duration = 2.0;
    let trace = run_scenario(&s).unwrap();
    assert!(trace.iter().all(|x| x.x == 0.0 && x.u == 0.0));
}

#[test]
fn trace_timestamps_and_length() {
    let mut s = step(5.0, LoadModel::free_space());
    s.duration = 1.0;
    let trace = run_scenario(&s).unwrap();
    assert_eq!(trace.len(), 2000);
    for (k, x) in trace.iter().enumerate() {
        assert_eq!(x.t, k as f64 * s.dt);
    }
}

#[test]
fn phantom_reaches_each_depth_later() {
    let free = run_scenario(&step(32.0, LoadModel::free_space())).unwrap();
    let phantom = run_scenario(&step(32.0, LoadModel::phantom())).unwrap();
    for level in [4.0, 8.0, 12.0, 16.0, 20.0, 24.0, 28.0, 31.0, 32.0] {
        let a = crossing(&free, level).unwrap();
        let b = crossing(&phantom, level).unwrap();
        assert!(b > a, "level {level}: free {a}, phantom {b}");
    }
}

#[test]
fn loaded_run_never_leads_on_approach() {
    let free = run_scenario(&step(32.0, LoadModel::free_space())).unwrap();
    let phantom = run_scenario(&step(32.0, LoadModel::phantom())).unwrap();
    let reach = crossing(&free, 32.0).unwrap();
    for (a, b) in free.iter().zip(&phantom).take_while(|(a, _)| a.t <= reach) {
        assert!(b.x <= a.x, "t = {}", a.t);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let mut s = step(20.0, LoadModel::phantom());
    s.pressure_ripple = 0.05;
    s.seed = 99;
    s.duration = 5.0;
    let a = run_scenario(&s).unwrap();
    let b = run_scenario(&s).unwrap();
    assert_eq!(a, b);
    s.seed = 100;
    let c = run_scenario(&s).unwrap();
    assert_ne!(a, c);
}

#[test]
fn speed_flag_iff_speed_above_limit() {
    let mut s = step(60.0, LoadModel::free_space());
    s.limits.max_turbine_rpm = 9000.0;
    s.duration = 10.0;
    let trace = run_scenario(&s).unwrap();
    assert!(trace.iter().any(|x| x.flags.speed_limit_exceeded));
    for x in &trace {
        assert_eq!(x.flags.speed_limit_exceeded, x.omega_turbine.abs() > 9000.0);
    }
}

#[test]
fn self_locking_worm_holds_slide_under_load() {
    let mut s = step(0.0, LoadModel::free_space());
    s.load.constant_force = -4.0;
    s.open_loop = Some(TargetSchedule::steps([(0.0, 0.0)]));
    s.duration = 10.0;
    let trace = run_scenario(&s).unwrap();
    assert!(trace.iter().all(|x| x.x == 0.0));

    // A backdrivable chain under a larger push does move.
    s.motor.non_backdrivable = false;
    s.load.constant_force = -20.0;
    let trace = run_scenario(&s).unwrap();
    assert!(trace.last().unwrap().x < 0.0);
}

#[test]
fn incremental_targets_each_settle() {
    let base = step(0.0, LoadModel::free_space());
    let report = positioning_experiment(
        &base,
        &PositioningSpec::Incremental {
            step: 10.0,
            count: 6,
            interval: 8.0,
        },
    )
    .unwrap();
    assert_eq!(report.rows.len(), 6);
    for (k, row) in report.rows.iter().enumerate() {
        assert_eq!(row.target, 10.0 * (k + 1) as f64);
        assert!(row.final_error.abs() < 0.5, "{row:?}");
        assert!(row.settle_time.is_some(), "{row:?}");
    }
}

#[test]
fn large_step_overshoots_more_than_increments() {
    let base = step(0.0, LoadModel::free_space());
    let single = positioning_experiment(
        &base,
        &PositioningSpec::SingleStep {
            distance: 60.0,
            hold: 25.0,
        },
    )
    .unwrap();
    let inc = positioning_experiment(
        &base,
        &PositioningSpec::Incremental {
            step: 10.0,
            count: 6,
            interval: 8.0,
        },
    )
    .unwrap();
    assert!(single.max_overshoot() > inc.max_overshoot());
}

#[test]
fn ramp_target_tracks_and_settles() {
    let base = step(0.0, LoadModel::free_space());
    let r = positioning_experiment(
        &base,
        &PositioningSpec::Ramp {
            distance: 30.0,
            speed: 3.0,
            hold: 8.0,
        },
    )
    .unwrap();
    assert_eq!(r.rows.len(), 1);
    let last = r.rows[0];
    assert_eq!(last.target, 30.0);
    assert!(last.final_error.abs() < 0.5);
}

#[test]
fn unreachable_target_reports_unsettled() {
    let mut base = step(0.0, LoadModel::free_space());
    base.supply_pressure = 0.3;
    let r = positioning_experiment(
        &base,
        &PositioningSpec::SingleStep {
            distance: 10.0,
            hold: 3.0,
        },
    )
    .unwrap();
    assert_eq!(r.rows[0].settle_time, None);
}

#[test]
fn sweep_values() {
    let m = reference_motor().unwrap();
    let rows = speed_pressure_sweep(&m, &[0.3, 0.5, 4.0]).unwrap();
    assert_eq!(rows[0].1, 0.0);
    assert!(rows[1].1 < 1.0);
    assert!((rows[2].1 - 13000.0).abs() < 650.0);
    assert!(speed_pressure_sweep(&m, &[4.5]).is_err());
}

#[test]
fn force_table_rows() {
    let m = reference_motor().unwrap();
    let rows = force_table(&m, &[1.5, 2.0, 2.5, 3.0]).unwrap();
    assert!((rows[0].1 - 11.49).abs() < 1e-9);
    assert!((rows[3].1 - 36.01).abs() < 1e-9);
    assert!((rows[1].1 - 22.05).abs() <= 0.15 * 22.05);
    assert!((rows[2].1 - 29.38).abs() <= 0.15 * 29.38);
}
