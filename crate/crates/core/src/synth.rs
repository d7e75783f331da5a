//! Deterministic synthetic sit-to-stand recordings with analytic ground truth.
//!
//! Segment pitches follow raised-cosine ramps between postures. Each
//! repetition runs: seated dwell, trunk flexion, extension (rise), standing
//! dwell, sit-down. Skeletons are placed with forward kinematics, gyro
//! streams are the analytic pitch rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StsError};
use crate::kinematics::{pose_from_local, RotationMatrix};
use crate::model::{
    BoneLengths, GyroSample, GyroStream, JointId, Placement, SensorKind, SkeletonFrame, SkeletonSeries, TPoseModel,
    Vec3, ROTATING_JOINT_COUNT,
};
use crate::sts::Feature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepTiming {
    pub sit_dwell_s: f64,
    pub flexion_s: f64,
    pub extension_s: f64,
    pub stand_dwell_s: f64,
    pub sit_down_s: f64,
}

impl Default for RepTiming {
    fn default() -> Self {
        Self {
            sit_dwell_s: 1.5,
            flexion_s: 1.0,
            extension_s: 1.2,
            stand_dwell_s: 1.5,
            sit_down_s: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Per-joint position noise of the radar-like skeleton (m).
    pub radar_position_m: f64,
    /// Whole-body jitter added per radar frame (m).
    pub radar_jitter_m: f64,
    pub kinect_position_m: f64,
    /// Extra noise on kinect knees and ankles (m).
    pub kinect_lower_leg_m: f64,
    pub gyro_dps: f64,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            radar_position_m: 0.0,
            radar_jitter_m: 0.0,
            kinect_position_m: 0.0,
            kinect_lower_leg_m: 0.0,
            gyro_dps: 0.0,
        }
    }

    /// The same noise level for every sensor.
    pub fn uniform(position_m: f64, gyro_dps: f64) -> Self {
        Self {
            radar_position_m: position_m,
            radar_jitter_m: position_m,
            kinect_position_m: position_m,
            kinect_lower_leg_m: 0.0,
            gyro_dps,
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            radar_position_m: 0.004,
            radar_jitter_m: 0.01,
            kinect_position_m: 0.003,
            kinect_lower_leg_m: 0.0,
            gyro_dps: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub repetitions: usize,
    pub timing: RepTiming,
    pub lead_in_s: f64,
    pub tail_s: f64,
    pub trunk_flexion_deg: f64,
    /// Seated knee flexion; the thigh is horizontal at 90.
    pub knee_excursion_deg: f64,
    /// Relative spread of per-repetition durations and amplitudes.
    pub rep_variation: f64,
    pub noise: NoiseConfig,
    /// Wearable clock minus true time (s).
    pub wearable_offset_s: f64,
    pub reversed: Vec<Placement>,
    /// An aborted half-rise is inserted after each listed repetition index.
    pub aborted_rises: Vec<usize>,
    pub skeleton_rate_hz: f64,
    pub gyro_rate_hz: f64,
    /// Epoch time of the first sample (s).
    pub start_time_s: f64,
    /// Distance of the ankles from the radar along +Y (m).
    pub depth_m: f64,
    pub bones: BoneLengths,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            repetitions: 5,
            timing: RepTiming::default(),
            lead_in_s: 2.0,
            tail_s: 2.0,
            trunk_flexion_deg: 40.0,
            knee_excursion_deg: 90.0,
            rep_variation: 0.1,
            noise: NoiseConfig::default(),
            wearable_offset_s: 0.0,
            reversed: Vec::new(),
            aborted_rises: Vec::new(),
            skeleton_rate_hz: 20.0,
            gyro_rate_hz: 100.0,
            start_time_s: 1_700_000_000.0,
            depth_m: 2.5,
            bones: BoneLengths::default(),
        }
    }
}

impl SynthConfig {
    pub fn noiseless(mut self) -> Self {
        self.noise = NoiseConfig::none();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.timing;
        let durations = [
            ("sit_dwell_s", t.sit_dwell_s),
            ("flexion_s", t.flexion_s),
            ("extension_s", t.extension_s),
            ("stand_dwell_s", t.stand_dwell_s),
            ("sit_down_s", t.sit_down_s),
            ("lead_in_s", self.lead_in_s),
            ("tail_s", self.tail_s),
            ("skeleton_rate_hz", self.skeleton_rate_hz),
            ("gyro_rate_hz", self.gyro_rate_hz),
        ];
        for (name, v) in durations {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StsError::param(format!("{name} must be positive, got {v}")));
            }
        }
        let amplitudes = [
            ("trunk_flexion_deg", self.trunk_flexion_deg),
            ("knee_excursion_deg", self.knee_excursion_deg),
            ("noise.radar_position_m", self.noise.radar_position_m),
            ("noise.radar_jitter_m", self.noise.radar_jitter_m),
            ("noise.kinect_position_m", self.noise.kinect_position_m),
            ("noise.kinect_lower_leg_m", self.noise.kinect_lower_leg_m),
            ("noise.gyro_dps", self.noise.gyro_dps),
        ];
        for (name, v) in amplitudes {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(StsError::param(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..0.5).contains(&self.rep_variation) {
            return Err(StsError::param(format!(
                "rep_variation must lie in [0, 0.5), got {}",
                self.rep_variation
            )));
        }
        if !self.wearable_offset_s.is_finite() || !self.start_time_s.is_finite() {
            return Err(StsError::param("offsets must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRep {
    pub t_start: f64,
    pub t_end: f64,
    /// Values in [`Feature::ALL`] order.
    pub features: [f64; 6],
}

impl TruthRep {
    pub fn value(&self, f: Feature) -> f64 {
        self.features[f.index()]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub reps: Vec<TruthRep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub config: SynthConfig,
    pub radar: SkeletonSeries,
    pub kinect: SkeletonSeries,
    /// Timestamps on the wearable clock.
    pub gyros: Vec<GyroStream>,
    /// Wearable clock time of the last gyro sample.
    pub wearable_mtime_s: f64,
    pub truth: GroundTruth,
    pub profile: MotionProfile,
}

/// Pitches of waist, thigh and shank (degrees).
pub type Posture = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ramp {
    t0: f64,
    t1: f64,
    from: Posture,
    to: Posture,
}

/// Piecewise raised-cosine posture trajectory on relative time.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionProfile {
    ramps: Vec<Ramp>,
    duration: f64,
}

impl MotionProfile {
    fn new(initial: Posture) -> Self {
        Self {
            ramps: vec![Ramp {
                t0: 0.0,
                t1: 0.0,
                from: initial,
                to: initial,
            }],
            duration: 0.0,
        }
    }

    fn last(&self) -> Posture {
        self.ramps.last().map_or([0.0; 3], |r| r.to)
    }

    fn hold(&mut self, d: f64) {
        let p = self.last();
        self.ramp(d, p);
    }

    fn ramp(&mut self, d: f64, to: Posture) {
        let from = self.last();
        self.ramps.push(Ramp {
            t0: self.duration,
            t1: self.duration + d,
            from,
            to,
        });
        self.duration += d;
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    fn find(&self, t: f64) -> &Ramp {
        let i = self.ramps.partition_point(|r| r.t1 < t);
        &self.ramps[i.min(self.ramps.len() - 1)]
    }

    /// Posture at relative time `t`.
    pub fn posture(&self, t: f64) -> Posture {
        let r = self.find(t);
        if r.t1 <= r.t0 {
            return r.to;
        }
        let u = ((t - r.t0) / (r.t1 - r.t0)).clamp(0.0, 1.0);
        let w = 0.5 * (1.0 - (std::f64::consts::PI * u).cos());
        std::array::from_fn(|k| r.from[k] + (r.to[k] - r.from[k]) * w)
    }

    /// Pitch rates at relative time `t` (degrees per second).
    pub fn rates(&self, t: f64) -> Posture {
        let r = self.find(t);
        let d = r.t1 - r.t0;
        if d <= 0.0 || t < r.t0 || t > r.t1 {
            return [0.0; 3];
        }
        let u = (t - r.t0) / d;
        let s = std::f64::consts::PI / (2.0 * d) * (std::f64::consts::PI * u).sin();
        std::array::from_fn(|k| (r.to[k] - r.from[k]) * s)
    }
}

struct RepDraw {
    timing: RepTiming,
    trunk: f64,
    knee: f64,
}

fn draw_reps(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<RepDraw> {
    let v = cfg.rep_variation;
    let mut jitter = |x: f64| {
        if v > 0.0 {
            x * (1.0 + rng.random_range(-v..=v))
        } else {
            x
        }
    };
    (0..cfg.repetitions.max(1))
        .map(|_| {
            let t = cfg.timing;
            RepDraw {
                timing: RepTiming {
                    sit_dwell_s: jitter(t.sit_dwell_s),
                    flexion_s: jitter(t.flexion_s),
                    extension_s: jitter(t.extension_s),
                    stand_dwell_s: jitter(t.stand_dwell_s),
                    sit_down_s: jitter(t.sit_down_s),
                },
                trunk: jitter(cfg.trunk_flexion_deg),
                knee: jitter(cfg.knee_excursion_deg),
            }
        })
        .collect()
}

fn build_profile(cfg: &SynthConfig, draws: &[RepDraw]) -> (MotionProfile, GroundTruth) {
    let seated = |knee: f64| [0.0, -knee, 0.0];
    let mut prof = MotionProfile::new(seated(draws[0].knee));
    let mut truth = GroundTruth::default();
    prof.hold(cfg.lead_in_s);
    for k in 0..cfg.repetitions {
        let d = &draws[k];
        let next_knee = draws.get(k + 1).map_or(d.knee, |n| n.knee);
        let t = d.timing;
        prof.hold(t.sit_dwell_s);
        let t_start = prof.duration();
        prof.ramp(t.flexion_s, [d.trunk, -d.knee, 0.0]);
        prof.ramp(t.extension_s, [0.0, 0.0, 0.0]);
        let t_end = prof.duration();
        prof.hold(t.stand_dwell_s);
        prof.ramp(t.sit_down_s, seated(next_knee));
        let pi = std::f64::consts::PI;
        let mut features = [0.0; 6];
        features[Feature::Duration.index()] = t.flexion_s + t.extension_s;
        features[Feature::TrunkRom.index()] = d.trunk;
        features[Feature::TrunkFlexionPeakVelocity.index()] = d.trunk * pi / (2.0 * t.flexion_s);
        features[Feature::TrunkExtensionPeakVelocity.index()] = d.trunk * pi / (2.0 * t.extension_s);
        features[Feature::WaistThighRom.index()] = d.knee + d.trunk;
        features[Feature::KneeRom.index()] = d.knee;
        truth.reps.push(TruthRep {
            t_start: cfg.start_time_s + t_start,
            t_end: cfg.start_time_s + t_end,
            features,
        });
        if cfg.aborted_rises.contains(&k) {
            prof.hold(1.0);
            prof.ramp(t.flexion_s, [0.5 * d.trunk, -next_knee, 0.0]);
            prof.ramp(0.5 * t.extension_s, [0.25 * d.trunk, -0.5 * next_knee, 0.0]);
            prof.ramp(0.5 * t.extension_s + 0.5, seated(next_knee));
        }
    }
    prof.hold(cfg.tail_s);
    (prof, truth)
}

/// Local joint rotations for a posture; only the root, hips and knees move.
fn local_rotations(p: Posture) -> [RotationMatrix; ROTATING_JOINT_COUNT] {
    let [w, th, sh] = p.map(f64::to_radians);
    let mut local = [RotationMatrix::identity(); ROTATING_JOINT_COUNT];
    let set = |local: &mut [RotationMatrix; ROTATING_JOINT_COUNT], j: JointId, r: RotationMatrix| {
        if let Some(i) = j.rotating_index() {
            local[i] = r;
        }
    };
    // body up (+y) maps to world +Z, body forward (+z) to world -Y
    set(&mut local, JointId::SpineBase, RotationMatrix::about_x(std::f64::consts::FRAC_PI_2 + w));
    for (hip, knee) in [(JointId::HipLeft, JointId::KneeLeft), (JointId::HipRight, JointId::KneeRight)] {
        set(&mut local, hip, RotationMatrix::about_x(th - w));
        set(&mut local, knee, RotationMatrix::about_x(sh - th));
    }
    local
}

/// Noiseless skeleton at relative time `t`, ankles pinned in place.
fn true_frame(prof: &MotionProfile, tpose: &TPoseModel, cfg: &SynthConfig, t: f64) -> SkeletonFrame {
    let local = local_rotations(prof.posture(t));
    let f0 = pose_from_local(&local, tpose, Vec3::zeros(), cfg.start_time_s + t);
    let ankle = f0.position(JointId::AnkleLeft);
    let target = Vec3::new(ankle.x, cfg.depth_m, 0.08);
    let shift = target - ankle;
    SkeletonFrame {
        timestamp: f0.timestamp,
        positions: f0.positions.map(|p| p + shift),
    }
}

fn gaussian(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd.max(0.0)).unwrap_or_else(|_| unreachable!("non-negative sd"))
}

fn skeleton(
    prof: &MotionProfile,
    tpose: &TPoseModel,
    cfg: &SynthConfig,
    sensor: SensorKind,
    rng: &mut ChaCha8Rng,
) -> SkeletonSeries {
    let n = (prof.duration() * cfg.skeleton_rate_hz).floor() as usize + 1;
    let nz = &cfg.noise;
    let (joint_sd, global_sd, leg_sd) = match sensor {
        SensorKind::Radar => (nz.radar_position_m, nz.radar_jitter_m, 0.0),
        _ => (nz.kinect_position_m, 0.0, nz.kinect_lower_leg_m),
    };
    let (gj, gg, gl) = (gaussian(joint_sd), gaussian(global_sd), gaussian(leg_sd));
    let lower_leg = [JointId::KneeLeft, JointId::KneeRight, JointId::AnkleLeft, JointId::AnkleRight];
    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / cfg.skeleton_rate_hz;
            let mut f = true_frame(prof, tpose, cfg, t);
            f.timestamp = cfg.start_time_s + t;
            let global = Vec3::new(gg.sample(rng), gg.sample(rng), gg.sample(rng));
            for j in JointId::ALL {
                let mut e = Vec3::new(gj.sample(rng), gj.sample(rng), gj.sample(rng)) + global;
                if lower_leg.contains(&j) {
                    e += Vec3::new(gl.sample(rng), gl.sample(rng), gl.sample(rng));
                }
                f.positions[j.index()] += e;
            }
            f
        })
        .collect();
    SkeletonSeries {
        frames,
        rate_hz: cfg.skeleton_rate_hz,
        sensor,
    }
}

fn gyros(prof: &MotionProfile, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<GyroStream> {
    let n = (prof.duration() * cfg.gyro_rate_hz).floor() as usize + 1;
    let g = gaussian(cfg.noise.gyro_dps);
    let mut streams: Vec<GyroStream> = Placement::ALL
        .into_iter()
        .map(|placement| GyroStream {
            placement,
            samples: Vec::with_capacity(n),
            rate_hz: cfg.gyro_rate_hz,
        })
        .collect();
    for i in 0..n {
        let t = i as f64 / cfg.gyro_rate_hz;
        let [w, th, sh] = prof.rates(t);
        let stamp = cfg.start_time_s + t + cfg.wearable_offset_s;
        for s in streams.iter_mut() {
            let rate = match s.placement {
                Placement::Waist => w,
                Placement::ThighLeft | Placement::ThighRight => th,
                Placement::ShankLeft | Placement::ShankRight => sh,
            };
            let sign = if cfg.reversed.contains(&s.placement) { -1.0 } else { 1.0 };
            s.samples.push(GyroSample {
                timestamp: stamp,
                omega: [
                    sign * (rate + g.sample(rng)),
                    sign * g.sample(rng),
                    sign * g.sample(rng),
                ],
            });
        }
    }
    streams
}

/// Generates radar-like and kinect-like skeletons, five gyro streams and the
/// analytic ground truth. Identical configs give identical output.
pub fn generate(cfg: &SynthConfig) -> Result<Recording> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws = draw_reps(cfg, &mut rng);
    let (profile, truth) = build_profile(cfg, &draws);
    let tpose = TPoseModel::from_bone_lengths(&cfg.bones);
    let radar = skeleton(&profile, &tpose, cfg, SensorKind::Radar, &mut rng);
    let kinect = skeleton(&profile, &tpose, cfg, SensorKind::Kinect, &mut rng);
    let gyros = gyros(&profile, cfg, &mut rng);
    let wearable_mtime_s = gyros[0].samples.last().map_or(cfg.start_time_s, |s| s.timestamp);
    Ok(Recording {
        config: cfg.clone(),
        radar,
        kinect,
        gyros,
        wearable_mtime_s,
        truth,
        profile,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Artifact {
    /// Insert an aborted half-rise after the given repetition.
    AbortedRise { after_rep: usize },
    /// Remove skeleton frames in `[start_s, start_s + duration_s)` relative to
    /// the recording start.
    Dropout {
        sensor: SensorKind,
        start_s: f64,
        duration_s: f64,
    },
    ReversedSensor { placement: Placement },
}

/// Injects one artifact deterministically.
pub fn perturb(rec: &Recording, artifact: &Artifact) -> Result<Recording> {
    match artifact {
        Artifact::AbortedRise { after_rep } => {
            if *after_rep >= rec.config.repetitions {
                return Err(StsError::param(format!(
                    "aborted rise after repetition {after_rep} of {}",
                    rec.config.repetitions
                )));
            }
            let mut cfg = rec.config.clone();
            cfg.aborted_rises.push(*after_rep);
            generate(&cfg)
        }
        Artifact::Dropout {
            sensor,
            start_s,
            duration_s,
        } => {
            let mut out = rec.clone();
            let series = match sensor {
                SensorKind::Radar => &mut out.radar,
                SensorKind::Kinect => &mut out.kinect,
                SensorKind::Wearable => {
                    return Err(StsError::param("dropout applies to skeleton sensors only"));
                }
            };
            let (a, b) = (
                rec.config.start_time_s + start_s,
                rec.config.start_time_s + start_s + duration_s,
            );
            series.frames.retain(|f| f.timestamp < a || f.timestamp >= b);
            Ok(out)
        }
        Artifact::ReversedSensor { placement } => {
            let mut out = rec.clone();
            for s in out.gyros.iter_mut().filter(|s| s.placement == *placement) {
                for x in s.samples.iter_mut() {
                    x.omega = x.omega.map(|v| -v);
                }
            }
            if !out.config.reversed.contains(placement) {
                out.config.reversed.push(*placement);
            }
            Ok(out)
        }
    }
}

/// A multi-participant dataset. Participant `i` uses seed `seed + i` and a
/// participant-specific scaling of amplitudes and durations so features vary
/// between participants.
pub fn generate_dataset(base: &SynthConfig, participants: usize) -> Result<Vec<(String, Recording)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed ^ 0x5354_5344);
    (0..participants)
        .map(|i| {
            let mut cfg = base.clone();
            cfg.seed = base.seed.wrapping_add(i as u64 * 7919);
            let amp: f64 = rng.random_range(0.8..1.2);
            let speed: f64 = rng.random_range(0.85..1.15);
            cfg.trunk_flexion_deg *= amp;
            cfg.knee_excursion_deg *= rng.random_range(0.92..1.08);
            cfg.timing.flexion_s *= speed;
            cfg.timing.extension_s *= speed;
            let pid = format!("P{:02}", i + 1);
            generate(&cfg).map(|r| (pid, r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::integrate_gyro;
    use crate::model::validate_series;

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.radar, c.radar);
    }

    #[test]
    fn zero_repetitions_hold_posture() {
        let cfg = SynthConfig {
            repetitions: 0,
            ..SynthConfig::default().noiseless()
        };
        let r = generate(&cfg).unwrap();
        assert!(r.truth.reps.is_empty());
        let first = &r.radar.frames[0];
        for f in &r.radar.frames {
            for (a, b) in f.positions.iter().zip(&first.positions) {
                assert!((a - b).norm() < 1e-12);
            }
        }
        assert!(r.gyros.iter().all(|g| g.samples.iter().all(|s| s.omega == [0.0; 3])));
    }

    #[test]
    fn skeletons_are_valid_and_bones_rigid() {
        let r = generate(&SynthConfig::default().noiseless()).unwrap();
        assert!(validate_series(&r.radar).is_empty());
        assert!(validate_series(&r.kinect).is_empty());
        let len = |f: &SkeletonFrame, a: JointId, b: JointId| (f.position(a) - f.position(b)).norm();
        for f in &r.radar.frames {
            assert!((len(f, JointId::HipLeft, JointId::KneeLeft) - 0.45).abs() < 1e-9);
            assert!((len(f, JointId::KneeRight, JointId::AnkleRight) - 0.42).abs() < 1e-9);
            // ankles stay on the floor at the configured depth
            let a = f.position(JointId::AnkleLeft);
            assert!((a.y - 2.5).abs() < 1e-9 && (a.z - 0.08).abs() < 1e-9);
        }
    }

    #[test]
    fn gyro_integrates_to_pitch() {
        let r = generate(&SynthConfig::default().noiseless()).unwrap();
        for (placement, k) in [(Placement::Waist, 0), (Placement::ThighLeft, 1), (Placement::ShankRight, 2)] {
            let g = r.gyros.iter().find(|g| g.placement == placement).unwrap();
            let a = integrate_gyro(g, 0).unwrap();
            let p0 = r.profile.posture(0.0)[k];
            for (i, v) in a.samples.iter().enumerate() {
                let truth = r.profile.posture(i as f64 / 100.0)[k] - p0;
                assert!((v - truth).abs() < 0.1, "{placement}: {v} vs {truth}");
            }
        }
    }

    #[test]
    fn truth_is_closed_form() {
        let cfg = SynthConfig {
            rep_variation: 0.0,
            ..SynthConfig::default()
        };
        let r = generate(&cfg).unwrap();
        assert_eq!(r.truth.reps.len(), 5);
        let pi = std::f64::consts::PI;
        for rep in &r.truth.reps {
            assert!((rep.value(Feature::Duration) - 2.2).abs() < 1e-12);
            assert!((rep.t_end - rep.t_start - 2.2).abs() < 1e-6);
            assert_eq!(rep.value(Feature::TrunkRom), 40.0);
            assert_eq!(rep.value(Feature::KneeRom), 90.0);
            assert_eq!(rep.value(Feature::WaistThighRom), 130.0);
            assert!((rep.value(Feature::TrunkFlexionPeakVelocity) - 40.0 * pi / 2.0).abs() < 1e-12);
            assert!((rep.value(Feature::TrunkExtensionPeakVelocity) - 40.0 * pi / 2.4).abs() < 1e-12);
        }
        // posture at the truth boundaries
        let t0 = r.truth.reps[0].t_start - cfg.start_time_s;
        assert_eq!(r.profile.posture(t0), [0.0, -90.0, 0.0]);
        let t1 = r.truth.reps[0].t_end - cfg.start_time_s;
        assert!(r.profile.posture(t1).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn wearable_offset_moves_clock() {
        let cfg = SynthConfig {
            wearable_offset_s: 5.2,
            ..SynthConfig::default()
        };
        let r = generate(&cfg).unwrap();
        let g = &r.gyros[0];
        assert!((g.samples[0].timestamp - (cfg.start_time_s + 5.2)).abs() < 1e-6);
        assert_eq!(r.wearable_mtime_s, g.samples.last().unwrap().timestamp);
    }

    #[test]
    fn perturbations() {
        let r = generate(&SynthConfig::default()).unwrap();
        let rev = perturb(&r, &Artifact::ReversedSensor { placement: Placement::ThighLeft }).unwrap();
        let a = r.gyros.iter().find(|g| g.placement == Placement::ThighLeft).unwrap();
        let b = rev.gyros.iter().find(|g| g.placement == Placement::ThighLeft).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.omega.map(|v| -v), y.omega);
        }
        let drop = perturb(
            &r,
            &Artifact::Dropout {
                sensor: SensorKind::Kinect,
                start_s: 5.0,
                duration_s: 2.0,
            },
        )
        .unwrap();
        assert_eq!(drop.kinect.len(), r.kinect.len() - 40);
        assert!(drop.kinect.frames.windows(2).all(|w| w[1].timestamp > w[0].timestamp));
        let ab = perturb(&r, &Artifact::AbortedRise { after_rep: 2 }).unwrap();
        assert_eq!(ab.truth.reps.len(), 5);
        assert!(ab.profile.duration() > r.profile.duration());
        assert!(perturb(&r, &Artifact::AbortedRise { after_rep: 9 }).is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = SynthConfig {
            timing: RepTiming {
                flexion_s: 0.0,
                ..RepTiming::default()
            },
            ..SynthConfig::default()
        };
        assert!(generate(&bad).is_err());
        let bad = SynthConfig {
            trunk_flexion_deg: -1.0,
            ..SynthConfig::default()
        };
        assert!(generate(&bad).is_err());
    }
}
