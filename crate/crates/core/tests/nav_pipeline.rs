use compliance_core::analysis::correlation_matrix;
use compliance_core::nav::fusion::InitialSigma;
use compliance_core::nav::*;
use nalgebra::{SMatrix, SymmetricEigen};
use proptest::prelude::*;

fn odometer_for(sc: &Scenario, d: &GaitData) -> Vec<OdometerSample> {
    let ev = detect_strides(&d.frames, 0).unwrap();
    let stats = stride_stats(&d.frames, &ev).unwrap();
    odometer_stream(&OdometerModel::matching(&sc.gait), &stats).unwrap()
}

fn end_error(states: &[NavState], truth: &[NavState]) -> f64 {
    states.last().unwrap().distance_to(truth.last().unwrap())
}

// Single points (end, worst) can sit near a cancellation of the error.
fn rms_error(states: &[NavState], truth: &[NavState]) -> f64 {
    let sum: f64 = states.iter().zip(truth).map(|(a, b)| a.distance_to(b).powi(2)).sum();
    (sum / states.len() as f64).sqrt()
}

#[test]
fn fused_loop_beats_inertial_only() {
    let sc = Scenario::default();
    let d = generate_gait_data(&sc).unwrap();
    let cfg = FusionConfig::default();
    let run = kf_fuse(&d.imu, &odometer_for(&sc, &d), d.truth[0], ErrorState::initial(&cfg.initial), &cfg).unwrap();
    let ins = ins_only(&d.imu, d.truth[0], &ErrorState::initial(&InitialSigma::default())).unwrap();
    let (fused, inertial) = (end_error(&run.states, &d.truth), end_error(&ins, &d.truth));
    assert!(fused < 0.2 * inertial, "{fused} vs {inertial}");
    let b = run.final_error.accel_bias[0];
    assert!((b - 0.05).abs() < 0.005, "{b}");
}

#[test]
fn streams_survive_csv() {
    let sc = Scenario {
        waypoints: vec![[0.0, 0.0], [5.0, 0.0], [5.0, 4.0]],
        ..Scenario::default()
    };
    let d = generate_gait_data(&sc).unwrap();
    let imu = io::read_imu(io::imu_to_csv(&d.imu).unwrap().as_bytes()).unwrap();
    let frames = io::read_gait(io::gait_to_csv(&d.frames).unwrap().as_bytes()).unwrap();
    assert_eq!(imu, d.imu);
    let ev_a = detect_strides(&frames, 1).unwrap();
    assert_eq!(ev_a, detect_strides(&d.frames, 1).unwrap());
}

#[test]
fn heading_indicator_follows_turns() {
    let sc = Scenario {
        waypoints: vec![[0.0, 0.0], [6.0, 0.0], [6.0, 6.0], [12.0, 6.0], [12.0, 0.0], [18.0, 0.0]],
        ..Scenario::default()
    };
    let d = generate_gait_data(&sc).unwrap();
    let ev = detect_strides(&d.frames, 0).unwrap();
    let truth = stride_truth(&d.truth, &ev).unwrap();
    let table = build_indicator_table(&d.frames, &truth, &[Indicator::HipDifference, Indicator::HipSum]).unwrap();
    let m = correlation_matrix(&table).unwrap();
    assert!(m.get("hip_diff", "delta_heading").unwrap() > 0.9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn halving_the_step_cuts_the_error(side in 6.0f64..9.0, v in 0.3f64..0.7, radius in 0.6f64..1.2) {
        let run = |rate: f64| {
            let sc = Scenario {
                waypoints: vec![[0.0, 0.0], [side, 0.0], [side, side], [0.0, side], [0.0, 0.0]],
                corner_radius: radius,
                speeds: vec![v, 0.5 * v],
                imu_rate: rate,
                noise: NoiseParams::none(),
                ..Scenario::default()
            };
            let d = generate_gait_data(&sc).unwrap();
            rms_error(&integrate(&d.imu, d.truth[0], &Biases::default()).unwrap(), &d.truth)
        };
        let (coarse, fine) = (run(100.0), run(200.0));
        prop_assert!(coarse >= 3.0 * fine, "{} {}", coarse, fine);
    }

    #[test]
    fn covariance_stays_psd(seed in 0u64..1000, odo in 0.005f64..0.2, walk in 0.0f64..1e-3) {
        let sc = Scenario {
            waypoints: vec![[0.0, 0.0], [5.0, 0.0], [5.0, 5.0]],
            seed,
            ..Scenario::default()
        };
        let d = generate_gait_data(&sc).unwrap();
        let cfg = FusionConfig { odometer_noise: odo, accel_bias_walk: walk, ..FusionConfig::default() };
        let run = kf_fuse(&d.imu, &odometer_for(&sc, &d), d.truth[0], ErrorState::initial(&cfg.initial), &cfg).unwrap();
        for u in &run.history {
            let p = SMatrix::<f64, 9, 9>::from_fn(|i, j| u.state.covariance[i][j]);
            prop_assert!((p - p.transpose()).abs().max() == 0.0);
            prop_assert!(SymmetricEigen::new(p).eigenvalues.min() >= -1e-10);
        }
    }
}
