//! Skeleton definition and timestamped stream containers.
//!
//! World coordinates follow the sensor convention: X = azimuth (lateral),
//! Y = depth (away from the sensor), Z = elevation (up). The T-pose frame is
//! body-fixed: x = subject's left, y = up, z = forward.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Number of joints in the canonical skeleton.
pub const JOINT_COUNT: usize = 17;

/// Number of joints that carry a rotation (every joint that has a child).
pub const ROTATING_JOINT_COUNT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JointId {
    SpineBase,
    SpineMid,
    SpineShoulder,
    Neck,
    Head,
    ShoulderLeft,
    ElbowLeft,
    WristLeft,
    ShoulderRight,
    ElbowRight,
    WristRight,
    HipLeft,
    KneeLeft,
    AnkleLeft,
    HipRight,
    KneeRight,
    AnkleRight,
}

impl JointId {
    /// All joints in file/storage order.
    pub const ALL: [JointId; JOINT_COUNT] = [
        JointId::SpineBase,
        JointId::SpineMid,
        JointId::SpineShoulder,
        JointId::Neck,
        JointId::Head,
        JointId::ShoulderLeft,
        JointId::ElbowLeft,
        JointId::WristLeft,
        JointId::ShoulderRight,
        JointId::ElbowRight,
        JointId::WristRight,
        JointId::HipLeft,
        JointId::KneeLeft,
        JointId::AnkleLeft,
        JointId::HipRight,
        JointId::KneeRight,
        JointId::AnkleRight,
    ];

    /// Joints that carry a rotation, in the order of the second axis of a
    /// [`crate::kinematics::JointRotationSeries`].
    pub const ROTATING: [JointId; ROTATING_JOINT_COUNT] = [
        JointId::SpineBase,
        JointId::SpineMid,
        JointId::SpineShoulder,
        JointId::Neck,
        JointId::ShoulderLeft,
        JointId::ElbowLeft,
        JointId::ShoulderRight,
        JointId::ElbowRight,
        JointId::HipLeft,
        JointId::KneeLeft,
        JointId::HipRight,
        JointId::KneeRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<JointId> {
        JointId::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            JointId::SpineBase => "SpineBase",
            JointId::SpineMid => "SpineMid",
            JointId::SpineShoulder => "SpineShoulder",
            JointId::Neck => "Neck",
            JointId::Head => "Head",
            JointId::ShoulderLeft => "ShoulderLeft",
            JointId::ElbowLeft => "ElbowLeft",
            JointId::WristLeft => "WristLeft",
            JointId::ShoulderRight => "ShoulderRight",
            JointId::ElbowRight => "ElbowRight",
            JointId::WristRight => "WristRight",
            JointId::HipLeft => "HipLeft",
            JointId::KneeLeft => "KneeLeft",
            JointId::AnkleLeft => "AnkleLeft",
            JointId::HipRight => "HipRight",
            JointId::KneeRight => "KneeRight",
            JointId::AnkleRight => "AnkleRight",
        }
    }

    pub fn parent(self) -> Option<JointId> {
        use JointId::*;
        match self {
            SpineBase => None,
            SpineMid | HipLeft | HipRight => Some(SpineBase),
            SpineShoulder => Some(SpineMid),
            Neck | ShoulderLeft | ShoulderRight => Some(SpineShoulder),
            Head => Some(Neck),
            ElbowLeft => Some(ShoulderLeft),
            WristLeft => Some(ElbowLeft),
            ElbowRight => Some(ShoulderRight),
            WristRight => Some(ElbowRight),
            KneeLeft => Some(HipLeft),
            AnkleLeft => Some(KneeLeft),
            KneeRight => Some(HipRight),
            AnkleRight => Some(KneeRight),
        }
    }

    pub fn children(self) -> impl Iterator<Item = JointId> {
        JointId::ALL
            .into_iter()
            .filter(move |j| j.parent() == Some(self))
    }

    pub fn is_leaf(self) -> bool {
        self.children().next().is_none()
    }

    /// The child whose bone direction defines this joint's rotation.
    ///
    /// `None` for leaves and for the root, whose rotation comes from the
    /// pelvis/spine frame instead.
    pub fn driving_child(self) -> Option<JointId> {
        use JointId::*;
        match self {
            SpineMid => Some(SpineShoulder),
            SpineShoulder => Some(Neck),
            Neck => Some(Head),
            ShoulderLeft => Some(ElbowLeft),
            ElbowLeft => Some(WristLeft),
            ShoulderRight => Some(ElbowRight),
            ElbowRight => Some(WristRight),
            HipLeft => Some(KneeLeft),
            KneeLeft => Some(AnkleLeft),
            HipRight => Some(KneeRight),
            KneeRight => Some(AnkleRight),
            _ => None,
        }
    }

    /// Position of this joint in [`JointId::ROTATING`], if it rotates.
    pub fn rotating_index(self) -> Option<usize> {
        JointId::ROTATING.iter().position(|&j| j == self)
    }

    /// Left/right mirror partner; spine joints map to themselves.
    pub fn mirror(self) -> JointId {
        use JointId::*;
        match self {
            ShoulderLeft => ShoulderRight,
            ElbowLeft => ElbowRight,
            WristLeft => WristRight,
            HipLeft => HipRight,
            KneeLeft => KneeRight,
            AnkleLeft => AnkleRight,
            ShoulderRight => ShoulderLeft,
            ElbowRight => ElbowLeft,
            WristRight => WristLeft,
            HipRight => HipLeft,
            KneeRight => KneeLeft,
            AnkleRight => AnkleLeft,
            other => other,
        }
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Free function form of [`JointId::parent`].
pub fn parent_of(joint: JointId) -> Option<JointId> {
    joint.parent()
}

/// Reference posture: unit offset direction and bone length per joint,
/// both relative to the joint's parent. The root entry is unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TPoseModel {
    directions: [Vec3; JOINT_COUNT],
    lengths: [f64; JOINT_COUNT],
}

/// Segment lengths used to build a default T-pose (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoneLengths {
    pub spine_link: f64,
    pub neck: f64,
    pub head: f64,
    pub shoulder_half_width: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub hip_half_width: f64,
    pub thigh: f64,
    pub shank: f64,
}

impl Default for BoneLengths {
    fn default() -> Self {
        Self {
            spine_link: 0.20,
            neck: 0.10,
            head: 0.15,
            shoulder_half_width: 0.18,
            upper_arm: 0.30,
            forearm: 0.27,
            hip_half_width: 0.12,
            thigh: 0.45,
            shank: 0.42,
        }
    }
}

impl TPoseModel {
    /// Canonical unit offsets: spine and head up, arms out to the side,
    /// pelvis lateral, legs down. Right side mirrors left under x -> -x.
    pub fn canonical_direction(joint: JointId) -> Vec3 {
        use JointId::*;
        match joint {
            SpineBase | SpineMid | SpineShoulder | Neck | Head => Vec3::new(0.0, 1.0, 0.0),
            ShoulderLeft | ElbowLeft | WristLeft | HipLeft => Vec3::new(1.0, 0.0, 0.0),
            ShoulderRight | ElbowRight | WristRight | HipRight => Vec3::new(-1.0, 0.0, 0.0),
            KneeLeft | AnkleLeft | KneeRight | AnkleRight => Vec3::new(0.0, -1.0, 0.0),
        }
    }

    pub fn from_bone_lengths(b: &BoneLengths) -> Self {
        use JointId::*;
        let mut lengths = [0.0; JOINT_COUNT];
        for j in JointId::ALL {
            lengths[j.index()] = match j {
                SpineBase => 0.0,
                SpineMid | SpineShoulder => b.spine_link,
                Neck => b.neck,
                Head => b.head,
                ShoulderLeft | ShoulderRight => b.shoulder_half_width,
                ElbowLeft | ElbowRight => b.upper_arm,
                WristLeft | WristRight => b.forearm,
                HipLeft | HipRight => b.hip_half_width,
                KneeLeft | KneeRight => b.thigh,
                AnkleLeft | AnkleRight => b.shank,
            };
        }
        Self::with_lengths(lengths)
    }

    /// Canonical directions with caller-supplied lengths (root entry ignored).
    pub fn with_lengths(lengths: [f64; JOINT_COUNT]) -> Self {
        let directions = JointId::ALL.map(Self::canonical_direction);
        Self {
            directions,
            lengths,
        }
    }

    pub fn direction(&self, joint: JointId) -> Vec3 {
        self.directions[joint.index()]
    }

    pub fn length(&self, joint: JointId) -> f64 {
        self.lengths[joint.index()]
    }

    pub fn lengths(&self) -> &[f64; JOINT_COUNT] {
        &self.lengths
    }

    /// Scaled offset `L_i * u_i`.
    pub fn offset(&self, joint: JointId) -> Vec3 {
        self.directions[joint.index()] * self.lengths[joint.index()]
    }

    /// Lists broken invariants (unit directions, positive lengths).
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for j in JointId::ALL.into_iter().filter(|j| j.parent().is_some()) {
            let n = self.direction(j).norm();
            if (n - 1.0).abs() > 1e-12 {
                problems.push(format!("{j}: offset direction norm {n}"));
            }
            let l = self.length(j);
            if !(l > 0.0 && l.is_finite()) {
                problems.push(format!("{j}: bone length {l}"));
            }
        }
        problems
    }
}

impl Default for TPoseModel {
    fn default() -> Self {
        Self::from_bone_lengths(&BoneLengths::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Radar,
    Kinect,
    Wearable,
}

impl SensorKind {
    pub const ALL: [SensorKind; 3] = [SensorKind::Radar, SensorKind::Kinect, SensorKind::Wearable];

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Radar => "radar",
            SensorKind::Kinect => "kinect",
            SensorKind::Wearable => "wearable",
        }
    }

    pub fn letter(self) -> char {
        match self {
            SensorKind::Radar => 'R',
            SensorKind::Kinect => 'K',
            SensorKind::Wearable => 'W',
        }
    }

    pub fn parse(s: &str) -> Option<SensorKind> {
        SensorKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
    pub positions: [Vec3; JOINT_COUNT],
}

impl SkeletonFrame {
    pub fn position(&self, joint: JointId) -> Vec3 {
        self.positions[joint.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSeries {
    pub frames: Vec<SkeletonFrame>,
    pub rate_hz: f64,
    pub sensor: SensorKind,
}

impl SkeletonSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.timestamp).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Placement {
    Waist,
    ThighLeft,
    ThighRight,
    ShankLeft,
    ShankRight,
}

impl Placement {
    pub const ALL: [Placement; 5] = [
        Placement::Waist,
        Placement::ThighLeft,
        Placement::ThighRight,
        Placement::ShankLeft,
        Placement::ShankRight,
    ];

    /// File stem used for gyro CSV files.
    pub fn file_stem(self) -> &'static str {
        match self {
            Placement::Waist => "waist",
            Placement::ThighLeft => "thigh_l",
            Placement::ThighRight => "thigh_r",
            Placement::ShankLeft => "shank_l",
            Placement::ShankRight => "shank_r",
        }
    }

    pub fn from_file_stem(stem: &str) -> Option<Placement> {
        Placement::ALL.into_iter().find(|p| p.file_stem() == stem)
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_stem())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroSample {
    pub timestamp: f64,
    /// Angular velocity in degrees per second, sensor axes (x = lateral/left).
    pub omega: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GyroStream {
    pub placement: Placement,
    pub samples: Vec<GyroSample>,
    pub rate_hz: f64,
}

impl GyroStream {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    MonotonicTime,
    FiniteTimestamp,
    FinitePositions,
    PositiveRate,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::MonotonicTime => "monotonic-time",
            Rule::FiniteTimestamp => "finite-timestamp",
            Rule::FinitePositions => "finite-positions",
            Rule::PositiveRate => "positive-rate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub frame: usize,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frame {}: {}", self.frame, self.rule)
    }
}

/// Checks container invariants; never aborts.
pub fn validate_series(series: &SkeletonSeries) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(series.rate_hz > 0.0 && series.rate_hz.is_finite()) {
        out.push(Violation {
            frame: 0,
            rule: Rule::PositiveRate,
        });
    }
    let mut prev: Option<f64> = None;
    for (i, frame) in series.frames.iter().enumerate() {
        if !frame.timestamp.is_finite() {
            out.push(Violation {
                frame: i,
                rule: Rule::FiniteTimestamp,
            });
        } else {
            if let Some(p) = prev {
                if frame.timestamp <= p {
                    out.push(Violation {
                        frame: i,
                        rule: Rule::MonotonicTime,
                    });
                }
            }
            prev = Some(frame.timestamp);
        }
        if frame
            .positions
            .iter()
            .any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            out.push(Violation {
                frame: i,
                rule: Rule::FinitePositions,
            });
        }
    }
    out
}

/// Same checks for a gyro stream (angular velocities stand in for positions).
pub fn validate_gyro(stream: &GyroStream) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(stream.rate_hz > 0.0 && stream.rate_hz.is_finite()) {
        out.push(Violation {
            frame: 0,
            rule: Rule::PositiveRate,
        });
    }
    for (i, s) in stream.samples.iter().enumerate() {
        if !s.timestamp.is_finite() {
            out.push(Violation {
                frame: i,
                rule: Rule::FiniteTimestamp,
            });
        } else if i > 0 && s.timestamp <= stream.samples[i - 1].timestamp {
            out.push(Violation {
                frame: i,
                rule: Rule::MonotonicTime,
            });
        }
        if s.omega.iter().any(|w| !w.is_finite()) {
            out.push(Violation {
                frame: i,
                rule: Rule::FinitePositions,
            });
        }
    }
    out
}
