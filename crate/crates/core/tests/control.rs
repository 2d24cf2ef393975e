use proptest::prelude::*;
use tesla_servo_core::control::*;
use tesla_servo_core::sim::{run_scenario, Scenario, TargetSchedule};

proptest! {
    #[test]
    fn integral_never_exceeds_clamp(
        kp in 0.0f64..10.0,
        ki in 0.01f64..5.0,
        kd in 0.0f64..5.0,
        clamp in 0.0f64..10.0,
        err in -100.0f64..100.0,
        dt in 1e-4f64..1e-2,
    ) {
        let g = PidGains { kp, ki, kd, u_max: 10.0, integral_clamp: clamp };
        let mut s = PidState::default();
        for _ in 0..500 {
            s = pid_step(&g, s, err, 0.0, 0.0, dt).1;
            prop_assert!((ki * s.integral).abs() <= clamp * (1.0 + 1e-12));
        }
    }

    #[test]
    fn valve_voltage_is_never_negative(outputs in prop::collection::vec(-50.0f64..50.0, 1..200)) {
        let limits = ActuationLimits::default();
        let mut sh = CommandShaper::new(10.0, &limits, 1e-3);
        for u in outputs {
            let c = sh.shape_command(u);
            prop_assert!(c.u >= 0.0 && c.u <= 10.0);
        }
    }
}

/// Open-loop scenario that opens the valve to `volts` from t = 0.
fn open_loop(delay: f64, command: TargetSchedule) -> Scenario {
    let mut s = Scenario::reference_fixture(0.0).unwrap();
    s.limits.tube_delay = delay;
    s.duration = 0.4;
    s.open_loop = Some(command);
    s
}

#[test]
fn tube_delay_postpones_torque_onset() {
    let s = open_loop(0.030, TargetSchedule::steps([(0.0, 5.0)]));
    let trace = run_scenario(&s).unwrap();
    let onset = trace.iter().find(|x| x.tau_drive != 0.0).unwrap().t;
    assert!((onset - 0.030).abs() <= s.dt, "onset {onset}");
}

#[test]
fn zero_delay_applies_commands_immediately() {
    let s = open_loop(0.0, TargetSchedule::steps([(0.0, 5.0)]));
    let trace = run_scenario(&s).unwrap();
    assert!(trace[0].tau_drive > 0.0);
    assert_eq!(trace[0].u, 5.0);
}

#[test]
fn delay_shows_up_as_cross_correlation_peak() {
    let pulses = TargetSchedule::steps([(0.0, 6.0), (0.05, 0.0), (0.12, 8.0), (0.16, 3.0), (0.22, 0.0)]);
    let a = run_scenario(&open_loop(0.010, pulses.clone())).unwrap();
    let b = run_scenario(&open_loop(0.060, pulses)).unwrap();
    let dt = 5e-4;
    let ta: Vec<f64> = a.iter().map(|x| x.tau_drive).collect();
    let tb: Vec<f64> = b.iter().map(|x| x.tau_drive).collect();
    let best = (0..200)
        .map(|lag| {
            let c: f64 = (0..ta.len() - lag).map(|i| ta[i] * tb[i + lag]).sum();
            (lag, c)
        })
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
        .0;
    assert_eq!(best as f64 * dt, 0.05);
    // Shifted copies, not merely correlated ones.
    for i in 0..ta.len() - 100 {
        assert_eq!(ta[i], tb[i + 100]);
    }
}

#[test]
fn flipped_output_holds_direction_during_switch() {
    let dt = 5e-4;
    let limits = ActuationLimits {
        solenoid_switch_time: 0.015,
        ..ActuationLimits::default()
    };
    let mut sh = CommandShaper::new(10.0, &limits, dt);
    let mut script = vec![4.0; 20];
    script.extend(vec![-4.0; 60]);
    let out: Vec<_> = script.iter().map(|&u| sh.shape_command(u)).collect();
    let switch_steps = (0.015f64 / dt).round() as usize;
    for c in &out[20..20 + switch_steps] {
        assert_eq!(
            *c,
            ValveCommand {
                u: 0.0,
                direction: Direction::Forward
            }
        );
    }
    for c in &out[20 + switch_steps..] {
        assert_eq!(
            *c,
            ValveCommand {
                u: 4.0,
                direction: Direction::Reverse
            }
        );
    }
}
