use sts_core::dsp::ConditioningConfig;
use sts_core::model::SkeletonSeries;
use sts_core::sts::{derive_signals_skeleton, derive_signals_wearable, extract_features, segment_sts, AnalysisSignals, Feature, SegmentationParams};
use sts_core::synth::{generate, perturb, Artifact, Recording, SynthConfig};

fn skeleton_signals(s: &SkeletonSeries) -> AnalysisSignals {
    derive_signals_skeleton(s, &ConditioningConfig::skeleton_default()).unwrap()
}

fn all_signals(r: &Recording) -> Vec<AnalysisSignals> {
    vec![
        skeleton_signals(&r.radar),
        skeleton_signals(&r.kinect),
        derive_signals_wearable(&r.gyros, &ConditioningConfig::wearable_default()).unwrap(),
    ]
}

/// Worst absolute error per feature plus boundaries, over all sensors.
fn check(r: &Recording) -> (usize, f64, [f64; 6]) {
    let params = SegmentationParams::default();
    let mut worst_boundary: f64 = 0.0;
    let mut worst = [0.0f64; 6];
    let mut count_mismatch = 0;
    for s in all_signals(r) {
        let reps = segment_sts(&s, &params);
        if reps.len() != r.truth.reps.len() {
            count_mismatch += 1;
            eprintln!("{}: {} reps, expected {}", s.sensor, reps.len(), r.truth.reps.len());
            continue;
        }
        let mut w = [0.0f64; 6];
        let mut b: f64 = 0.0;
        for (rep, truth) in reps.iter().zip(&r.truth.reps) {
            let f = extract_features(rep, &s, &params);
            b = b.max((rep.t_start - truth.t_start).abs()).max((rep.t_end - truth.t_end).abs());
            for feat in Feature::ALL {
                w[feat.index()] = w[feat.index()].max((f.value(feat) - truth.value(feat)).abs());
            }
        }
        eprintln!("  {}: boundary {b:.3} {w:.2?}", s.sensor);
        for (rep, truth) in reps.iter().zip(&r.truth.reps) {
            worst_boundary = worst_boundary
                .max((rep.t_start - truth.t_start).abs())
                .max((rep.t_end - truth.t_end).abs());
            let f = extract_features(rep, &s, &params);
            for feat in Feature::ALL {
                let e = (f.value(feat) - truth.value(feat)).abs();
                worst[feat.index()] = worst[feat.index()].max(if e.is_nan() { f64::INFINITY } else { e });
            }
        }
    }
    (count_mismatch, worst_boundary, worst)
}

#[test]
fn noiseless_recording_matches_truth() {
    let r = generate(&SynthConfig::default().noiseless()).unwrap();
    let (mismatch, boundary, worst) = check(&r);
    eprintln!("noiseless: boundary {boundary:.4}, features {worst:?}");
    assert_eq!(mismatch, 0);
    assert!(boundary < 0.1);
    assert!(worst[0] < 0.1);
    for i in [1, 4, 5] {
        assert!(worst[i] < 1.0, "{:?}", Feature::ALL[i]);
    }
    for i in [2, 3] {
        assert!(worst[i] < 3.0, "{:?}", Feature::ALL[i]);
    }
}

#[test]
fn noisy_recordings_match_truth() {
    for seed in 1..=5 {
        let r = generate(&SynthConfig {
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let (mismatch, boundary, worst) = check(&r);
        eprintln!("seed {seed}: boundary {boundary:.4}, features {worst:?}");
        assert_eq!(mismatch, 0);
        assert!(boundary < 0.25);
        assert!(worst[0] < 0.15);
        for i in [1, 4, 5] {
            assert!(worst[i] < 2.0, "{:?}", Feature::ALL[i]);
        }
        for i in [2, 3] {
            assert!(worst[i] < 5.0, "{:?}", Feature::ALL[i]);
        }
    }
}

#[test]
fn repetition_count_is_exact_for_1_to_20() {
    for n in [1, 2, 3, 7, 12, 20] {
        let r = generate(&SynthConfig {
            repetitions: n,
            seed: n as u64,
            ..SynthConfig::default().noiseless()
        })
        .unwrap();
        for s in all_signals(&r) {
            assert_eq!(segment_sts(&s, &SegmentationParams::default()).len(), n, "{} with {n}", s.sensor);
        }
    }
}

#[test]
fn aborted_rise_is_not_a_repetition() {
    let r = generate(&SynthConfig::default()).unwrap();
    let p = perturb(&r, &Artifact::AbortedRise { after_rep: 2 }).unwrap();
    for s in all_signals(&p) {
        let reps = segment_sts(&s, &SegmentationParams::default());
        assert_eq!(reps.len(), 5, "{}", s.sensor);
        for (rep, truth) in reps.iter().zip(&p.truth.reps) {
            assert!((rep.t_start - truth.t_start).abs() < 0.25);
        }
    }
}
