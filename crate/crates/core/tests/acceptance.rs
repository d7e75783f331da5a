//! End-to-end acceptance checks. Each check prints one PASS/FAIL line to the
//! real stdout (so it shows even when test output is captured) and the suite
//! fails if any check fails.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use sts_core::dsp::{whittaker_smooth, ConditioningConfig, UniformSignal};
use sts_core::fmcw::{
    angular_resolution, process_cube, range_resolution, synthesize_if_cube, velocity_resolution, RadarConfig,
    Scatterer,
};
use sts_core::kinematics::{
    euler_zxy, forward_kinematics, pose_from_local, rotation_between, solve_ik, RotationMatrix,
};
use sts_core::model::{
    JointId, Placement, SensorKind, SkeletonSeries, TPoseModel, Vec3, ROTATING_JOINT_COUNT,
};
use sts_core::pipeline::{
    process_participant, run_pipeline, write_dataset, ParticipantData, ParticipantMeta, PipelineConfig,
};
use sts_core::stats::{agreement_table, bland_altman, icc_two_way, AgreementConfig, IccVariant, LongTable, PairedSample};
use sts_core::sts::{derive_signals_skeleton, derive_signals_wearable, extract_features, segment_sts, Feature, SegmentationParams};
use sts_core::synth::{generate, generate_dataset, perturb, Artifact, NoiseConfig, Recording, SynthConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Runs a check, folds the runtime limit into its verdict and prints it.
fn run(name: &str, limit: Option<Duration>, check: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let mut o = check();
    let elapsed = t0.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            o.pass = false;
            o.detail.push_str(&format!("; over the {:.0} s limit", limit.as_secs_f64()));
        }
    }
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "[{}] {name}: {} ({:.2} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    o.pass
}

fn participant(id: &str, rec: &Recording) -> ParticipantData {
    ParticipantData {
        id: id.into(),
        radar: rec.radar.clone(),
        kinect: rec.kinect.clone(),
        gyros: rec.gyros.clone(),
        meta: ParticipantMeta {
            wearable_file_mtime_s: Some(rec.wearable_mtime_s),
        },
    }
}

fn fmcw_self_consistency() -> Outcome {
    const SCENES: u64 = 100;
    const REQUIRED: usize = 98;
    // unit amplitude against complex noise of total variance 0.01: 20 dB per sample
    const NOISE_STD: f64 = 0.1;
    let cfg = RadarConfig {
        clutter_removal: false,
        ..RadarConfig::default()
    };
    let (dr, dv) = (range_resolution(&cfg) / 2.0, velocity_resolution(&cfg) / 2.0);
    let hits = (0..SCENES)
        .into_par_iter()
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let s = Scatterer::new(
                rng.random_range(1.0..6.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-45f64..45.0).to_radians(),
                1.0,
            )
            .unwrap();
            let cube = synthesize_if_cube(&cfg, &[s], NOISE_STD, seed).unwrap();
            let Some(d) = process_cube(&cfg, &cube).unwrap().into_iter().next() else {
                return false;
            };
            let da = angular_resolution(&cfg, s.azimuth_rad).unwrap() / 2.0;
            (d.range_m - s.range_m).abs() <= dr
                && (d.velocity_mps - s.velocity_mps).abs() <= dv
                && (d.azimuth_rad - s.azimuth_rad).abs() <= da
        })
        .count();
    outcome(hits >= REQUIRED, format!("{hits}/{SCENES} scenes within half resolution (need {REQUIRED})"))
}

fn random_rotation(rng: &mut ChaCha8Rng) -> RotationMatrix {
    let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let q = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    RotationMatrix::from_matrix_unchecked(*q.to_rotation_matrix().matrix())
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let v = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
    let v: Vec3 = v;
    v.normalize()
}

fn rotation_round_trips() -> Outcome {
    const EULER_TOL: f64 = 1e-9;
    const MAP_TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_euler: f64 = 0.0;
    for _ in 0..10_000 {
        let r = random_rotation(&mut rng);
        worst_euler = worst_euler.max(euler_zxy(&r).to_rotation().frobenius_distance(&r));
    }
    let mut worst_map: f64 = 0.0;
    for i in 0..10_000 {
        let u = random_unit(&mut rng);
        let v = match i % 4 {
            0 => u,
            1 => -u,
            _ => random_unit(&mut rng),
        };
        let r = rotation_between(&(u * 1.7), &(v * 0.4)).unwrap();
        worst_map = worst_map.max((r * u - v).norm());
    }
    for (u, v) in [(Vec3::x(), Vec3::x()), (Vec3::y(), -Vec3::y()), (Vec3::z(), -Vec3::z())] {
        let r = rotation_between(&u, &v).unwrap();
        worst_map = worst_map.max((r * u - v).norm());
    }
    outcome(
        worst_euler < EULER_TOL && worst_map < MAP_TOL,
        format!("Euler Frobenius error {worst_euler:.1e} (< {EULER_TOL:e}), |Ru - v| {worst_map:.1e} (< {MAP_TOL:e})"),
    )
}

/// Random poses the solver can reproduce exactly: any root rotation,
/// swing-only joint rotations, and SpineMid unrotated (the pelvis frame is
/// built from the SpineBase to SpineShoulder axis).
fn recoverable_local(rng: &mut ChaCha8Rng, tpose: &TPoseModel) -> [RotationMatrix; ROTATING_JOINT_COUNT] {
    std::array::from_fn(|ri| {
        let joint = JointId::ROTATING[ri];
        match joint.driving_child() {
            None => random_rotation(rng),
            Some(_) if joint == JointId::SpineMid => RotationMatrix::identity(),
            Some(child) => rotation_between(&tpose.direction(child), &random_unit(rng)).unwrap(),
        }
    })
}

fn fk_ik_identity() -> Outcome {
    const TOL_M: f64 = 1e-6;
    let tpose = TPoseModel::default();
    let mut worst: f64 = 0.0;
    let mut degenerate = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames: Vec<_> = (0..200)
            .map(|i| {
                let root = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(1.0..4.0), rng.random_range(0.0..1.5));
                pose_from_local(&recoverable_local(&mut rng, &tpose), &tpose, root, i as f64 / 20.0)
            })
            .collect();
        let series = SkeletonSeries {
            frames,
            rate_hz: 20.0,
            sensor: SensorKind::Kinect,
        };
        let ik = solve_ik(&series, &tpose).unwrap();
        degenerate += ik.degenerate.len();
        let roots: Vec<Vec3> = series.frames.iter().map(|f| f.position(JointId::SpineBase)).collect();
        let fk = forward_kinematics(&ik, &tpose, &roots, 20.0, SensorKind::Kinect).unwrap();
        for (a, b) in series.frames.iter().zip(&fk.frames) {
            for j in JointId::ALL {
                worst = worst.max((a.position(j) - b.position(j)).norm());
            }
        }
    }
    outcome(
        worst < TOL_M && degenerate == 0,
        format!("100 series x 200 frames, worst joint error {worst:.1e} m (< {TOL_M:e}), {degenerate} degenerate joints"),
    )
}

fn oracle_end_to_end() -> Outcome {
    const BOUNDARY_S: f64 = 0.25;
    const DURATION_S: f64 = 0.15;
    const ROM_DEG: f64 = 2.0;
    const VELOCITY_DPS: f64 = 5.0;
    let recs = generate_dataset(&SynthConfig::default(), 5).unwrap();
    let params = SegmentationParams::default();
    let skeleton = ConditioningConfig::skeleton_default();
    let wearable = ConditioningConfig::wearable_default();

    let mut counts: BTreeMap<SensorKind, usize> = BTreeMap::new();
    let mut boundary: f64 = 0.0;
    let mut worst = [0.0f64; 6];
    for (_, rec) in &recs {
        let signals = [
            derive_signals_skeleton(&rec.radar, &skeleton).unwrap(),
            derive_signals_skeleton(&rec.kinect, &skeleton).unwrap(),
            derive_signals_wearable(&rec.gyros, &wearable).unwrap(),
        ];
        for s in &signals {
            let reps = segment_sts(s, &params);
            *counts.entry(s.sensor).or_default() += reps.len();
            if reps.len() != rec.truth.reps.len() {
                continue;
            }
            for (rep, truth) in reps.iter().zip(&rec.truth.reps) {
                boundary = boundary
                    .max((rep.t_start - truth.t_start).abs())
                    .max((rep.t_end - truth.t_end).abs());
                let f = extract_features(rep, s, &params);
                for feat in Feature::ALL {
                    let e = (f.value(feat) - truth.value(feat)).abs();
                    worst[feat.index()] = worst[feat.index()].max(if e.is_nan() { f64::INFINITY } else { e });
                }
            }
        }
    }
    let limits = Feature::ALL.map(|f| match f {
        Feature::Duration => DURATION_S,
        Feature::TrunkFlexionPeakVelocity | Feature::TrunkExtensionPeakVelocity => VELOCITY_DPS,
        _ => ROM_DEG,
    });
    let counts_ok = SensorKind::ALL.iter().all(|s| counts.get(s) == Some(&25));
    let features_ok = worst.iter().zip(&limits).all(|(w, l)| w < l);
    let errors: Vec<String> = Feature::ALL
        .iter()
        .map(|f| format!("{} {:.3}", f.name(), worst[f.index()]))
        .collect();
    outcome(
        counts_ok && boundary < BOUNDARY_S && features_ok,
        format!(
            "reps per sensor {:?}, worst boundary {boundary:.3} s, worst errors [{}]",
            counts.values().collect::<Vec<_>>(),
            errors.join(", ")
        ),
    )
}

fn sync_recovery() -> Outcome {
    const LAG_TOL_S: f64 = 0.05;
    let cfg = PipelineConfig::default();
    let mut worst: f64 = 0.0;
    for offset in [-3.0, 0.7, 5.2] {
        let rec = generate(&SynthConfig {
            wearable_offset_s: offset,
            ..SynthConfig::default()
        })
        .unwrap();
        let r = process_participant(&participant("P01", &rec), &cfg).unwrap();
        worst = worst.max((r.sync.lag_s - offset).abs());
    }
    let rec = generate(&SynthConfig::default()).unwrap();
    let rev = perturb(&rec, &Artifact::ReversedSensor { placement: Placement::ThighLeft }).unwrap();
    let r = process_participant(&participant("P01", &rev), &cfg).unwrap();
    let flipped = r
        .sync
        .reversal
        .iter()
        .any(|c| c.placement == Placement::ThighLeft && c.flipped);
    let flagged = r.flags.iter().any(|f| f == "reversed:thigh_l");
    let others_clean = r
        .sync
        .reversal
        .iter()
        .all(|c| c.placement == Placement::ThighLeft || !c.flipped);
    outcome(
        worst < LAG_TOL_S && flipped && flagged && others_clean,
        format!("worst lag error {worst:.4} s (< {LAG_TOL_S}), reversed thigh flipped {flipped}, flagged {flagged}"),
    )
}

fn statistics() -> Outcome {
    const INDEPENDENT_ICC: f64 = 0.1;
    const LINEAR_TOL: f64 = 1e-9;
    let mut failures = Vec::new();
    let sample = |a: Vec<f64>, b: Vec<f64>| PairedSample::new("f", "x", a, b).unwrap();

    let a: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin() * 10.0 + i as f64).collect();
    for v in [IccVariant::Absolute, IccVariant::Consistency] {
        let icc = icc_two_way(&sample(a.clone(), a.clone()), v).unwrap().icc;
        if icc != 1.0 {
            failures.push(format!("identical {v} ICC {icc}"));
        }
    }
    let shifted: Vec<f64> = a.iter().map(|x| x + 3.0).collect();
    let c1 = icc_two_way(&sample(a.clone(), shifted.clone()), IccVariant::Consistency).unwrap().icc;
    let a1 = icc_two_way(&sample(a.clone(), shifted), IccVariant::Absolute).unwrap().icc;
    if (c1 - 1.0).abs() > 1e-12 || a1 >= 1.0 {
        failures.push(format!("offset pairs C1 {c1}, A1 {a1}"));
    }

    let mut worst_indep: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..1000).map(|_| n.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..1000).map(|_| n.sample(&mut rng)).collect();
        for v in [IccVariant::Absolute, IccVariant::Consistency] {
            worst_indep = worst_indep.max(icc_two_way(&sample(x.clone(), y.clone()), v).unwrap().icc.abs());
        }
    }
    if worst_indep >= INDEPENDENT_ICC {
        failures.push(format!("independent |ICC| {worst_indep}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = Normal::new(0.0, 2.0).unwrap();
    let x: Vec<f64> = (0..200).map(|_| 50.0 + 10.0 * n.sample(&mut rng)).collect();
    let y: Vec<f64> = x.iter().map(|v| v + 1.0 + n.sample(&mut rng)).collect();
    let coverage = bland_altman(&sample(x, y)).unwrap().fraction_within();
    if !(0.91..=0.99).contains(&coverage) {
        failures.push(format!("Bland-Altman coverage {coverage}"));
    }

    let noisy: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin() + 0.01 * i as f64).collect();
    let sig = UniformSignal::new(0.0, 0.05, noisy.clone()).unwrap();
    if whittaker_smooth(&sig, 0.0, 2).unwrap().samples != noisy {
        failures.push("Whittaker lambda 0 changed the signal".into());
    }
    let mut worst_line: f64 = 0.0;
    for lambda in [0.5, 10.0, 1e3, 1e5] {
        let line: Vec<f64> = (0..300).map(|i| 2.0 - 0.03 * i as f64).collect();
        let sig = UniformSignal::new(0.0, 0.05, line.clone()).unwrap();
        let out = whittaker_smooth(&sig, lambda, 2).unwrap();
        for (p, q) in line.iter().zip(&out.samples) {
            worst_line = worst_line.max((p - q).abs());
        }
    }
    if worst_line >= LINEAR_TOL {
        failures.push(format!("Whittaker line error {worst_line:e}"));
    }
    let detail = format!(
        "offset C1 {c1:.12}, A1 {a1:.4}, independent |ICC| max {worst_indep:.4}, BA coverage {coverage:.3}, line error {worst_line:.1e}"
    );
    if failures.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, format!("{detail}; {}", failures.join("; ")))
    }
}

/// Absolute-agreement ICC per (feature, pair) over an 8-participant dataset.
fn dataset_iccs(noise: NoiseConfig) -> BTreeMap<(Feature, String), f64> {
    let base = SynthConfig {
        noise,
        seed: 11,
        ..SynthConfig::default()
    };
    let recs = generate_dataset(&base, 8).unwrap();
    let cfg = PipelineConfig::default();
    let rows: Vec<_> = recs
        .par_iter()
        .map(|(id, rec)| process_participant(&participant(id, rec), &cfg).unwrap().long_rows())
        .collect();
    let table = LongTable {
        rows: rows.into_iter().flatten().collect(),
    };
    agreement_table(&table, &AgreementConfig::default())
        .rows
        .into_iter()
        .map(|r| ((r.feature, r.pair), r.icc_a1.map_or(f64::NAN, |i| i.icc)))
        .collect()
}

fn scaled(k: f64) -> NoiseConfig {
    let d = NoiseConfig::default();
    NoiseConfig {
        radar_position_m: d.radar_position_m * k,
        radar_jitter_m: d.radar_jitter_m * k,
        kinect_position_m: d.kinect_position_m * k,
        kinect_lower_leg_m: 0.0,
        gyro_dps: d.gyro_dps * k,
    }
}

fn icc_noise_ordering() -> Outcome {
    const LEVELS: [f64; 3] = [0.5, 2.0, 4.0];
    const LOWER_LEG_M: f64 = 0.04;
    let per_level: Vec<_> = LEVELS.iter().map(|&k| dataset_iccs(scaled(k))).collect();
    let mut violations = Vec::new();
    for (key, low) in &per_level[0] {
        let series = [*low, per_level[1][key], per_level[2][key]];
        if !(series[0] >= series[1] && series[1] >= series[2]) {
            violations.push(format!("{} {}: {series:.3?}", key.0.name(), key.1));
        }
    }
    let leg = dataset_iccs(NoiseConfig {
        kinect_lower_leg_m: LOWER_LEG_M,
        ..NoiseConfig::default()
    });
    let mut contrasts = Vec::new();
    for pair in ["K-R", "K-W"] {
        let d = leg[&(Feature::Duration, pair.to_string())];
        let k = leg[&(Feature::KneeRom, pair.to_string())];
        contrasts.push(format!("{pair} Duration {d:.3} vs KneeROM {k:.3}"));
        if !(d > k) {
            violations.push(format!("{pair}: Duration {d:.3} <= KneeROM {k:.3}"));
        }
    }
    let detail = format!(
        "{} feature/pair ICCs non-increasing over noise x{LEVELS:?}; lower-leg noise: {}",
        per_level[0].len(),
        contrasts.join(", ")
    );
    if violations.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, format!("{detail}; violations: {}", violations.join("; ")))
    }
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_dataset(&input, &generate_dataset(&SynthConfig::default(), 3).unwrap()).unwrap();
    let again = tmp.path().join("in2");
    write_dataset(&again, &generate_dataset(&SynthConfig::default(), 3).unwrap()).unwrap();
    let synth_same = files(&input) == files(&again);

    let outputs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = tmp.path().join(name);
            run_pipeline(&PipelineConfig {
                input_dir: input.clone(),
                output_dir: out.clone(),
                ..PipelineConfig::default()
            })
            .unwrap();
            files(&out)
        })
        .collect();
    let differing: Vec<_> = outputs[0]
        .iter()
        .filter(|(k, v)| outputs[1].get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let same = differing.is_empty() && outputs[0].len() == outputs[1].len();
    outcome(
        same && synth_same,
        format!(
            "{} output files compared, {} differ; synthetic inputs identical {synth_same}",
            outputs[0].len(),
            differing.len()
        ),
    )
}

#[test]
fn acceptance() {
    let s = Duration::from_secs;
    let results = [
        run("FMCW self-consistency", Some(s(30)), fmcw_self_consistency),
        run("rotation and Euler round trips", Some(s(5)), rotation_round_trips),
        run("FK after IK identity", Some(s(10)), fk_ik_identity),
        run("synthetic oracle end to end", Some(s(60)), oracle_end_to_end),
        run("wearable sync and reversal", None, sync_recovery),
        run("agreement statistics and smoothing", Some(s(10)), statistics),
        run("ICC ordering under noise", None, icc_noise_ordering),
        run("pipeline determinism", None, determinism),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    assert_eq!(failed, 0, "{failed} acceptance checks failed");
}
