use std::fs::File;

use tlssc_core::behavior::{validate_label, BehaviorCategory, BehaviorLabel, DEFAULT_MOTION_THRESHOLD};
use tlssc_core::calibration::{calibrate, CalibrationProblem};
use tlssc_core::fvdm::FvdmParams;
use tlssc_core::quality::summarize_by_category;
use tlssc_core::synth::{
    synth_accelerating, synth_oscillation, synth_stopping, AcceleratingConfig, OscillationConfig, StoppingConfig,
};
use tlssc_core::trajectory::{
    interpolate_gaps, project_to_path, read_segment_dir, smooth_segment, write_segment, Schema, SegmentMeta,
};
use tlssc_core::units::mph_to_mps;
use tlssc_core::{OptimizerConfig, TrajectorySegment};

fn fixtures() -> Vec<TrajectorySegment> {
    let stop = FvdmParams::new(0.7510, 0.8127, 5.5761, 18.9590, mph_to_mps(35.0));
    let acc = FvdmParams::new(0.0926, 0.0926, 5.0, 18.8944, mph_to_mps(25.0));
    let follow = FvdmParams::new(0.0171, 3.3368, 9.9108, 19.7680, mph_to_mps(45.0));
    vec![
        synth_stopping("a-stop", &stop, &StoppingConfig { noise_std: 0.05, seed: 1, ..Default::default() }).unwrap(),
        synth_accelerating("b-acc", &acc, &AcceleratingConfig { noise_std: 0.05, seed: 2, ..Default::default() })
            .unwrap(),
        synth_oscillation("c-follow", &follow, &OscillationConfig { noise_std: 0.05, seed: 3, ..Default::default() })
            .unwrap(),
    ]
}

#[test]
fn files_round_trip_through_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    for seg in fixtures() {
        let path = dir.path().join(format!("{}.csv", seg.id));
        write_segment(File::create(&path).unwrap(), &seg, None, &[]).unwrap();
        if let Some(ann) = &seg.annotation {
            std::fs::write(path.with_extension("ann.json"), ann.to_json(seg.utc_offset_s).unwrap()).unwrap();
        }
    }
    let back = read_segment_dir(dir.path(), &Schema::default(), &SegmentMeta::default()).unwrap();
    let orig = fixtures();
    assert_eq!(back.len(), 3);
    for (a, b) in back.iter().zip(&orig) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.behavior, b.behavior);
        assert_eq!(a.points, b.points);
        assert_eq!(a.annotation.is_some(), b.annotation.is_some());
        if let (Some(x), Some(y)) = (&a.annotation, &b.annotation) {
            assert!((x.stop_line_lat - y.stop_line_lat).abs() < 1e-12);
            assert_eq!(x.permission_time, y.permission_time);
        }
    }
}

#[test]
fn smoothing_gap_repair_and_assessment() {
    let segs: Vec<TrajectorySegment> = fixtures()
        .into_iter()
        .map(|mut s| {
            // knock out two samples to exercise gap filling
            s.points.drain(40..42);
            let s = interpolate_gaps(&s, 1.0).unwrap();
            smooth_segment(&s, 10).unwrap()
        })
        .collect();
    for s in &segs {
        assert!(s.has_smoothed());
        let report = validate_label(s, DEFAULT_MOTION_THRESHOLD);
        assert!(report.passed, "{}: {:?}", s.id, report.reasons);
        project_to_path(s).unwrap();
    }
    let rows = summarize_by_category(&segs, 10).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3].category, BehaviorCategory::All);
    assert_eq!(rows[3].segment_count, 3);
    for r in &rows {
        assert!(r.anomaly_jerk_pct_smoothed <= r.anomaly_jerk_pct_raw);
    }
}

#[test]
fn calibrating_noisy_following_stays_near_noise_floor() {
    let seg = fixtures().pop().unwrap();
    assert_eq!(seg.behavior, BehaviorLabel::StandardFollow(4));
    let seg = smooth_segment(&seg, 10).unwrap();
    let mut prob = CalibrationProblem::new(vec![seg]);
    prob.optimizer = OptimizerConfig { max_evals: 600, epsilon: 1e-4 };
    let r = calibrate(&prob).unwrap();
    assert!(r.rmse < 0.3, "{r:?}");
    assert_eq!(r.per_segment_rmse.len(), 1);
}
