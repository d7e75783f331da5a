//! Sit-to-stand analysis: sagittal angle signals, repetition segmentation,
//! feature extraction and cross-sensor matching.
//!
//! Angle conventions (degrees, world X lateral, Y depth, Z up, subject
//! facing -Y):
//!
//! - segment pitch `psi` is the rotation about +X (subject's left); forward
//!   lean of the trunk and forward swing of thigh or shank are positive for
//!   the trunk, negative for the thigh (hip flexion), positive for the shank
//!   (knee ahead of ankle);
//! - trunk angle is `-psi_waist` (0 upright, negative in flexion);
//! - knee angle is the flexion angle `psi_shank - psi_thigh` (0 straight,
//!   high when seated);
//! - waist-thigh angle is the interior hip angle `180 + psi_thigh - psi_waist`.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dsp::{condition, differentiate, integrate_gyro, resample_linear, ConditioningConfig, UniformSignal};
use crate::error::{Result, StsError};
use crate::model::{GyroStream, JointId, Placement, SensorKind, SkeletonSeries, Vec3};
use crate::sync::{common_range, TimeBase};

/// The six per-repetition features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    Duration,
    TrunkRom,
    TrunkFlexionPeakVelocity,
    TrunkExtensionPeakVelocity,
    WaistThighRom,
    KneeRom,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::Duration,
        Feature::TrunkRom,
        Feature::TrunkFlexionPeakVelocity,
        Feature::TrunkExtensionPeakVelocity,
        Feature::WaistThighRom,
        Feature::KneeRom,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Duration => "Duration",
            Feature::TrunkRom => "TrunkROM",
            Feature::TrunkFlexionPeakVelocity => "TrunkFlexionPeakVelocity",
            Feature::TrunkExtensionPeakVelocity => "TrunkExtensionPeakVelocity",
            Feature::WaistThighRom => "WaistThighROM",
            Feature::KneeRom => "KneeROM",
        }
    }

    /// CSV column name.
    pub fn column(self) -> &'static str {
        match self {
            Feature::Duration => "duration_s",
            Feature::TrunkRom => "trunk_rom_deg",
            Feature::TrunkFlexionPeakVelocity => "trunk_flex_pkvel_dps",
            Feature::TrunkExtensionPeakVelocity => "trunk_ext_pkvel_dps",
            Feature::WaistThighRom => "waist_thigh_rom_deg",
            Feature::KneeRom => "knee_rom_deg",
        }
    }

    pub fn parse(s: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == s || f.column() == s)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw (unfiltered) sagittal pitch per body segment on one uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPitches {
    pub waist: UniformSignal,
    pub thigh: [UniformSignal; 2],
    pub shank: [UniformSignal; 2],
    pub flags: Vec<String>,
}

impl SegmentPitches {
    pub fn get(&self, placement: Placement) -> &UniformSignal {
        match placement {
            Placement::Waist => &self.waist,
            Placement::ThighLeft => &self.thigh[0],
            Placement::ThighRight => &self.thigh[1],
            Placement::ShankLeft => &self.shank[0],
            Placement::ShankRight => &self.shank[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSignals {
    pub sensor: SensorKind,
    pub trunk: UniformSignal,
    pub knee: UniformSignal,
    pub waist_thigh: UniformSignal,
    pub trunk_velocity: UniformSignal,
    pub flags: Vec<String>,
}

impl AnalysisSignals {
    pub fn time_base(&self) -> TimeBase {
        self.knee.time_base()
    }

    /// Interior knee angle (180 = straight leg).
    pub fn knee_interior(&self) -> UniformSignal {
        self.knee.map(|v| 180.0 - v)
    }
}

/// Pitch about +X of a segment pointing from `from` to `to`, with `rest`
/// selecting the zero direction (`+1` up, `-1` down).
fn pitch(from: Vec3, to: Vec3, rest: f64) -> Option<f64> {
    let d = to - from;
    let (dy, dz) = (d.y, d.z);
    if dy.hypot(dz) < 1e-9 {
        return None;
    }
    Some(if rest > 0.0 {
        (-dy).atan2(dz).to_degrees()
    } else {
        dy.atan2(-dz).to_degrees()
    })
}

/// Fills `None` entries from the previous valid value (the first valid value
/// for leading gaps). Returns the number of filled entries.
fn carry_forward(v: &mut [Option<f64>]) -> usize {
    let first = v.iter().flatten().next().copied();
    let mut last = first;
    let mut filled = 0;
    for x in v.iter_mut() {
        match x {
            Some(val) => last = Some(*val),
            None => {
                *x = last;
                filled += 1;
            }
        }
    }
    filled
}

/// Per-frame segment pitches of a skeleton series, interpolated onto a
/// uniform grid at the series rate.
pub fn segment_pitches_skeleton(series: &SkeletonSeries) -> Result<SegmentPitches> {
    let n = series.len();
    if n < 3 {
        return Err(StsError::TooShort { needed: 3, got: n });
    }
    if !(series.rate_hz > 0.0) {
        return Err(StsError::param("skeleton rate must be positive"));
    }
    use JointId::*;
    let specs: [(JointId, JointId, f64, &str); 5] = [
        (SpineBase, SpineShoulder, 1.0, "waist"),
        (HipLeft, KneeLeft, -1.0, "thigh_l"),
        (HipRight, KneeRight, -1.0, "thigh_r"),
        (KneeLeft, AnkleLeft, -1.0, "shank_l"),
        (KneeRight, AnkleRight, -1.0, "shank_r"),
    ];
    let times = series.timestamps();
    let dt = 1.0 / series.rate_hz;
    let base = TimeBase::covering(times[0], times[n - 1], dt)?;
    let mut flags = Vec::new();
    let mut out = Vec::with_capacity(5);
    for (a, b, rest, name) in specs {
        let mut vals: Vec<Option<f64>> = series
            .frames
            .iter()
            .map(|f| pitch(f.position(a), f.position(b), rest))
            .collect();
        if vals.iter().all(Option::is_none) {
            return Err(StsError::Degenerate(format!("segment {name} has zero length in every frame")));
        }
        let filled = carry_forward(&mut vals);
        if filled > 0 {
            warn!("{}: {filled} degenerate {name} frames carried forward", series.sensor);
            flags.push(format!("degenerate_{name}"));
        }
        let vals: Vec<f64> = vals.into_iter().map(|v| v.unwrap_or(0.0)).collect();
        out.push(interpolate_irregular(&times, &vals, &base));
    }
    let mut it = out.into_iter();
    let waist = it.next().unwrap_or_else(|| unreachable!());
    let tl = it.next().unwrap_or_else(|| unreachable!());
    let tr = it.next().unwrap_or_else(|| unreachable!());
    let sl = it.next().unwrap_or_else(|| unreachable!());
    let sr = it.next().unwrap_or_else(|| unreachable!());
    Ok(SegmentPitches {
        waist,
        thigh: [tl, tr],
        shank: [sl, sr],
        flags,
    })
}

/// Linear interpolation of samples at increasing instants `t` onto `base`.
fn interpolate_irregular(t: &[f64], v: &[f64], base: &TimeBase) -> UniformSignal {
    let mut out = Vec::with_capacity(base.count);
    let mut j = 0;
    for i in 0..base.count {
        let x = base.time(i);
        while j + 2 < t.len() && t[j + 1] < x {
            j += 1;
        }
        let (t0, t1) = (t[j], t[(j + 1).min(t.len() - 1)]);
        let val = if t1 > t0 {
            let f = ((x - t0) / (t1 - t0)).clamp(0.0, 1.0);
            v[j] + f * (v[(j + 1).min(t.len() - 1)] - v[j])
        } else {
            v[j]
        };
        out.push(val);
    }
    UniformSignal {
        start: base.t0,
        dt: base.dt,
        samples: out,
    }
}

/// Sagittal pitch of each wearable segment by trapezoidal integration of the
/// lateral gyro axis, on a common grid at the waist sensor's rate.
pub fn segment_pitches_wearable(streams: &[GyroStream]) -> Result<SegmentPitches> {
    let find = |p: Placement| {
        streams
            .iter()
            .find(|s| s.placement == p)
            .ok_or_else(|| StsError::MissingPlacement(p.file_stem().to_string()))
    };
    let mut raw = Vec::with_capacity(5);
    for p in Placement::ALL {
        raw.push(integrate_gyro(find(p)?, 0)?);
    }
    let dt = raw[0].dt;
    let bases: Vec<TimeBase> = raw.iter().map(UniformSignal::time_base).collect();
    let (start, end) = common_range(&bases)?;
    let grid = TimeBase::covering(start, end, dt)?;
    let mut res = Vec::with_capacity(5);
    for r in &raw {
        res.push(resample_linear(r, &grid)?);
    }
    let mut it = res.into_iter();
    let mut next = || it.next().unwrap_or_else(|| unreachable!());
    let waist = next();
    let tl = next();
    let tr = next();
    let sl = next();
    let sr = next();
    Ok(SegmentPitches {
        waist,
        thigh: [tl, tr],
        shank: [sl, sr],
        flags: Vec::new(),
    })
}

fn combine(p: &SegmentPitches) -> (UniformSignal, UniformSignal, UniformSignal) {
    let n = p.waist.len();
    let mut trunk = Vec::with_capacity(n);
    let mut knee = Vec::with_capacity(n);
    let mut wt = Vec::with_capacity(n);
    for i in 0..n {
        let w = p.waist.samples[i];
        let kl = p.shank[0].samples[i] - p.thigh[0].samples[i];
        let kr = p.shank[1].samples[i] - p.thigh[1].samples[i];
        let thigh = 0.5 * (p.thigh[0].samples[i] + p.thigh[1].samples[i]);
        trunk.push(-w);
        knee.push(0.5 * (kl + kr));
        wt.push(180.0 + thigh - w);
    }
    (
        p.waist.with_samples(trunk),
        p.waist.with_samples(knee),
        p.waist.with_samples(wt),
    )
}

/// Trunk, knee, waist-thigh angle and trunk velocity from a skeleton series.
pub fn derive_signals_skeleton(series: &SkeletonSeries, cfg: &ConditioningConfig) -> Result<AnalysisSignals> {
    let p = segment_pitches_skeleton(series)?;
    let (trunk, knee, wt) = combine(&p);
    let trunk = condition(&trunk, cfg)?;
    let trunk_velocity = differentiate(&trunk)?;
    Ok(AnalysisSignals {
        sensor: series.sensor,
        trunk,
        knee: condition(&knee, cfg)?,
        waist_thigh: condition(&wt, cfg)?,
        trunk_velocity,
        flags: p.flags,
    })
}

/// Same signals from the five wearable gyro streams. The trunk velocity is
/// the conditioned waist rate itself rather than a derivative.
pub fn derive_signals_wearable(streams: &[GyroStream], cfg: &ConditioningConfig) -> Result<AnalysisSignals> {
    let p = segment_pitches_wearable(streams)?;
    let (trunk, knee, wt) = combine(&p);
    let waist = streams
        .iter()
        .find(|s| s.placement == Placement::Waist)
        .ok_or_else(|| StsError::MissingPlacement("waist".into()))?;
    let rate = UniformSignal::new(
        waist.samples[0].timestamp,
        1.0 / waist.rate_hz,
        waist.samples.iter().map(|s| -s.omega[0]).collect(),
    )?;
    let rate = resample_linear(&rate, &trunk.time_base())?;
    Ok(AnalysisSignals {
        sensor: SensorKind::Wearable,
        trunk: condition(&trunk, cfg)?,
        knee: condition(&knee, cfg)?,
        waist_thigh: condition(&wt, cfg)?,
        trunk_velocity: condition(&rate, cfg)?,
        flags: p.flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub value: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub high: Vec<Peak>,
    pub low: Vec<Peak>,
}

/// Local maxima with their prominence. A side that reaches the signal edge
/// without meeting a higher sample does not bound the peak, so plateaus that
/// touch the recording edge still count.
fn maxima(x: &[f64], min_prominence: f64, min_separation: usize) -> Vec<Peak> {
    let n = x.len();
    let mut cands = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                cands.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    // edges: a flat run touching the edge counts from its middle
    let mut j = 0;
    while j + 1 < n && x[j + 1] == x[0] {
        j += 1;
    }
    if j + 1 < n && x[j + 1] < x[0] {
        cands.insert(0, j / 2);
    }
    let mut j = n - 1;
    while j > 0 && x[j - 1] == x[n - 1] {
        j -= 1;
    }
    if j > 0 && x[j - 1] < x[n - 1] {
        cands.push((j + n - 1) / 2);
    }

    let mut peaks: Vec<Peak> = cands
        .into_iter()
        .filter_map(|p| {
            let v = x[p];
            let mut left_min = v;
            let mut left_closed = false;
            for k in (0..p).rev() {
                if x[k] > v {
                    left_closed = true;
                    break;
                }
                left_min = left_min.min(x[k]);
            }
            let mut right_min = v;
            let mut right_closed = false;
            for &xk in &x[p + 1..] {
                if xk > v {
                    right_closed = true;
                    break;
                }
                right_min = right_min.min(xk);
            }
            let base = match (left_closed, right_closed) {
                (true, true) => left_min.max(right_min),
                (true, false) => left_min,
                (false, true) => right_min,
                (false, false) => left_min.min(right_min),
            };
            let prominence = v - base;
            (prominence >= min_prominence && prominence > 0.0).then_some(Peak {
                index: p,
                value: v,
                prominence,
            })
        })
        .collect();

    // Enforce separation, keeping taller peaks first.
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| peaks[b].value.total_cmp(&peaks[a].value).then(a.cmp(&b)));
    let mut keep = vec![true; peaks.len()];
    for (rank, &a) in order.iter().enumerate() {
        if !keep[a] {
            continue;
        }
        for &b in &order[rank + 1..] {
            if keep[b] && peaks[a].index.abs_diff(peaks[b].index) < min_separation {
                keep[b] = false;
            }
        }
    }
    let mut k = keep.into_iter();
    peaks.retain(|_| k.next().unwrap_or(false));
    peaks
}

/// High and low peaks exceeding `min_prominence`, at least
/// `min_separation_s` apart. Low peak values and prominences are reported
/// on the original scale (value is the signal minimum, prominence positive).
pub fn detect_peaks(sig: &UniformSignal, min_prominence: f64, min_separation_s: f64) -> PeakSet {
    if sig.len() < 3 {
        return PeakSet::default();
    }
    let sep = (min_separation_s / sig.dt).round().max(1.0) as usize;
    let high = maxima(&sig.samples, min_prominence, sep);
    let neg: Vec<f64> = sig.samples.iter().map(|v| -v).collect();
    let low = maxima(&neg, min_prominence, sep)
        .into_iter()
        .map(|p| Peak {
            value: -p.value,
            ..p
        })
        .collect();
    PeakSet { high, low }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edge {
    /// Signal leaves the plateau after the peak.
    Departure,
    /// Signal reaches the plateau before the peak.
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PlateauEdge {
    time: f64,
    level: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Locates where a smooth ramp leaves (or joins) the plateau around a peak.
///
/// Near the plateau a C1 ramp is quadratic in time, so with crossing times
/// `t1` at depth `d` and `t2` at depth `4d` below the plateau level the
/// onset is `2 t1 - t2`. The plateau level is re-estimated from the median
/// of the samples next to the onset.
fn plateau_edge(sig: &UniformSignal, peak: &Peak, high: bool, edge: Edge, depth_fraction: f64) -> Option<PlateauEdge> {
    let s: Vec<f64> = if high {
        sig.samples.clone()
    } else {
        sig.samples.iter().map(|v| -v).collect()
    };
    let n = s.len() as i64;
    let step: i64 = if edge == Edge::Departure { 1 } else { -1 };
    // depth of the ramp on the searched side, up to the next higher sample
    let top = s[peak.index];
    let mut floor = top;
    let mut j = peak.index as i64 + step;
    while j >= 0 && j < n && s[j as usize] <= top {
        floor = floor.min(s[j as usize]);
        j += step;
    }
    let delta = depth_fraction * (top - floor).max(peak.prominence);
    let window = (0.5 / sig.dt).round().max(2.0) as i64;
    let mut level = s[peak.index];
    let mut result = None;
    for _ in 0..3 {
        let crossing = |lvl: f64, from: i64| -> Option<(f64, i64)> {
            let mut j = from;
            while j + step >= 0 && j + step < n {
                let k = j + step;
                if s[k as usize] < lvl {
                    let (a, b) = (s[j as usize], s[k as usize]);
                    let frac = if a > b { (a - lvl) / (a - b) } else { 0.0 };
                    return Some((j as f64 + frac * step as f64, k));
                }
                j = k;
            }
            None
        };
        let (p1, k1) = crossing(level - delta, peak.index as i64)?;
        let (p2, _) = crossing(level - 4.0 * delta, k1 - step)?;
        let p0 = 2.0 * p1 - p2;
        result = Some(PlateauEdge {
            time: sig.start + p0 * sig.dt,
            level: if high { level } else { -level },
        });
        // plateau samples on the peak side of the onset
        let i0 = p0.round() as i64;
        let (lo, hi) = if step > 0 {
            (i0 - window, i0)
        } else {
            (i0, i0 + window)
        };
        let (lo, hi) = (lo.clamp(0, n - 1), hi.clamp(0, n - 1));
        if hi <= lo {
            break;
        }
        level = median(s[lo as usize..=hi as usize].to_vec());
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    pub knee_prominence: f64,
    pub waist_prominence: f64,
    pub min_separation_s: f64,
    /// Search window for the trunk onset before the knee departure.
    pub left_window_s: f64,
    /// Search window for the waist-thigh arrival after the knee arrival.
    pub right_window_s: f64,
    /// Plateau depth used for onset extrapolation, as a fraction of prominence.
    pub onset_depth_fraction: f64,
    /// Allowed disagreement between the knee and waist-thigh arrival.
    pub boundary_tolerance_s: f64,
    /// Rises whose knee drop is below this fraction of the median drop are
    /// treated as aborted.
    pub abort_ratio: f64,
    pub velocity_prominence: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            knee_prominence: 15.0,
            waist_prominence: 5.0,
            min_separation_s: 1.0,
            left_window_s: 1.5,
            right_window_s: 1.5,
            onset_depth_fraction: 0.05,
            boundary_tolerance_s: 0.25,
            abort_ratio: 0.6,
            velocity_prominence: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsRepetition {
    pub t_start: f64,
    pub t_end: f64,
    /// Instant the knee leaves the seated plateau.
    pub sit_peak: f64,
    /// Instant the knee reaches the standing plateau.
    pub stand_trough: f64,
    pub trunk: SignalRange,
    pub knee: SignalRange,
    pub waist_thigh: SignalRange,
}

fn range_in(sig: &UniformSignal, t0: f64, t1: f64) -> SignalRange {
    let (a, b) = (sig.index_of(t0), sig.index_of(t1));
    let slice = &sig.samples[a..=b.max(a)];
    SignalRange {
        min: slice.iter().copied().fold(f64::INFINITY, f64::min),
        max: slice.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

struct Candidate {
    sit: PlateauEdge,
    stand: PlateauEdge,
}

/// Splits a recording into sit-to-stand repetitions.
///
/// Each knee high peak (seated) followed by a knee low peak (standing)
/// before the next high peak is a candidate. The start is the onset of
/// trunk flexion (departure from the preceding trunk high plateau) and the
/// end is the arrival of the waist-thigh angle at its standing plateau.
pub fn segment_sts(signals: &AnalysisSignals, params: &SegmentationParams) -> Vec<StsRepetition> {
    let knee = &signals.knee;
    if knee.len() < 3 {
        return Vec::new();
    }
    let kp = detect_peaks(knee, params.knee_prominence, params.min_separation_s);
    let frac = params.onset_depth_fraction;

    let mut cands = Vec::new();
    for (i, h) in kp.high.iter().enumerate() {
        let next_high = kp.high.get(i + 1).map_or(usize::MAX, |p| p.index);
        let Some(l) = kp.low.iter().find(|l| l.index > h.index && l.index < next_high) else {
            continue;
        };
        let (Some(sit), Some(stand)) = (
            plateau_edge(knee, h, true, Edge::Departure, frac),
            plateau_edge(knee, l, false, Edge::Arrival, frac),
        ) else {
            continue;
        };
        if sit.time <= stand.time {
            cands.push(Candidate { sit, stand });
        }
    }
    if cands.is_empty() {
        return Vec::new();
    }
    let drops: Vec<f64> = cands.iter().map(|c| c.sit.level - c.stand.level).collect();
    let median_drop = median(drops.clone());

    let tp = detect_peaks(&signals.trunk, params.waist_prominence, params.min_separation_s);
    let wp = detect_peaks(&signals.waist_thigh, params.waist_prominence, params.min_separation_s);
    let trunk_edges: Vec<PlateauEdge> = tp
        .high
        .iter()
        .filter_map(|p| plateau_edge(&signals.trunk, p, true, Edge::Departure, frac))
        .collect();
    let wt_edges: Vec<PlateauEdge> = wp
        .high
        .iter()
        .filter_map(|p| plateau_edge(&signals.waist_thigh, p, true, Edge::Arrival, frac))
        .collect();

    let tol = params.boundary_tolerance_s;
    let (span0, span1) = (knee.start, knee.end());
    let mut reps: Vec<StsRepetition> = Vec::new();
    for (c, drop) in cands.iter().zip(drops) {
        if drop < params.abort_ratio * median_drop {
            continue;
        }
        let Some(start) = trunk_edges
            .iter()
            .filter(|e| e.time <= c.sit.time + tol && e.time >= c.sit.time - params.left_window_s)
            .map(|e| e.time)
            .reduce(f64::max)
        else {
            continue;
        };
        let Some(end) = wt_edges
            .iter()
            .filter(|e| e.time >= c.stand.time - tol && e.time <= c.stand.time + params.right_window_s)
            .map(|e| e.time)
            .reduce(f64::min)
        else {
            continue;
        };
        let sit_peak = c.sit.time.max(start);
        let stand_trough = c.stand.time.min(end);
        if !(start < end && start >= span0 && end <= span1 && sit_peak <= stand_trough) {
            continue;
        }
        if reps.last().is_some_and(|r| r.t_end > start) {
            continue;
        }
        reps.push(StsRepetition {
            t_start: start,
            t_end: end,
            sit_peak,
            stand_trough,
            trunk: range_in(&signals.trunk, start, end),
            knee: range_in(knee, start, end),
            waist_thigh: range_in(&signals.waist_thigh, start, end),
        });
    }
    reps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub sensor: SensorKind,
    pub rep_start_s: f64,
    pub duration_s: f64,
    pub trunk_rom_deg: f64,
    /// Magnitude of the first (negative) trunk-velocity peak.
    pub trunk_flex_pkvel_dps: Option<f64>,
    /// Magnitude of the following positive trunk-velocity peak.
    pub trunk_ext_pkvel_dps: Option<f64>,
    pub waist_thigh_rom_deg: f64,
    pub knee_rom_deg: f64,
    pub flags: Vec<String>,
}

impl FeatureRecord {
    pub fn is_complete(&self) -> bool {
        self.trunk_flex_pkvel_dps.is_some() && self.trunk_ext_pkvel_dps.is_some()
    }

    /// Values in [`Feature::ALL`] order; missing velocities are NaN.
    pub fn values(&self) -> [f64; 6] {
        [
            self.duration_s,
            self.trunk_rom_deg,
            self.trunk_flex_pkvel_dps.unwrap_or(f64::NAN),
            self.trunk_ext_pkvel_dps.unwrap_or(f64::NAN),
            self.waist_thigh_rom_deg,
            self.knee_rom_deg,
        ]
    }

    pub fn value(&self, feature: Feature) -> f64 {
        self.values()[feature.index()]
    }
}

/// The six features of one repetition.
pub fn extract_features(rep: &StsRepetition, signals: &AnalysisSignals, params: &SegmentationParams) -> FeatureRecord {
    let v = &signals.trunk_velocity;
    let (a, b) = (v.index_of(rep.t_start), v.index_of(rep.t_end));
    let seg = UniformSignal {
        start: v.time(a),
        dt: v.dt,
        samples: v.samples[a..=b.max(a)].to_vec(),
    };
    let peaks = detect_peaks(&seg, params.velocity_prominence, 0.2);
    let flex = peaks.low.iter().find(|p| p.value < 0.0).copied();
    let ext = flex.and_then(|f| peaks.high.iter().find(|p| p.index > f.index && p.value > 0.0).copied());
    let mut flags = Vec::new();
    if flex.is_none() || ext.is_none() {
        flags.push("incomplete".to_string());
    }
    let rom = |r: SignalRange| (r.max - r.min).max(0.0);
    FeatureRecord {
        sensor: signals.sensor,
        rep_start_s: rep.t_start,
        duration_s: rep.t_end - rep.t_start,
        trunk_rom_deg: rom(range_in(&signals.trunk, rep.t_start, rep.t_end)),
        trunk_flex_pkvel_dps: flex.map(|p| p.value.abs()),
        trunk_ext_pkvel_dps: ext.map(|p| p.value.abs()),
        waist_thigh_rom_deg: rom(range_in(&signals.waist_thigh, rep.t_start, rep.t_end)),
        knee_rom_deg: rom(range_in(&signals.knee, rep.t_start, rep.t_end)),
        flags,
    }
}

/// Indices of one matched repetition in the radar, kinect and wearable lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedTriple {
    pub radar: usize,
    pub kinect: usize,
    pub wearable: usize,
}

fn nearest(records: &[FeatureRecord], used: &[bool], t: f64, tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in records.iter().enumerate() {
        if used[i] {
            continue;
        }
        let d = (r.rep_start_s - t).abs();
        if d > tol {
            continue;
        }
        let better = match best {
            None => true,
            Some((j, bd)) => d < bd || (d == bd && r.rep_start_s < records[j].rep_start_s),
        };
        if better {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Greedy nearest-start matching with the radar as reference.
pub fn match_repetitions(
    radar: &[FeatureRecord],
    kinect: &[FeatureRecord],
    wearable: &[FeatureRecord],
    tol: f64,
) -> Vec<MatchedTriple> {
    let mut used_k = vec![false; kinect.len()];
    let mut used_w = vec![false; wearable.len()];
    let mut out = Vec::new();
    let mut order: Vec<usize> = (0..radar.len()).collect();
    order.sort_by(|&a, &b| radar[a].rep_start_s.total_cmp(&radar[b].rep_start_s));
    for r in order {
        let t = radar[r].rep_start_s;
        let (Some(k), Some(w)) = (nearest(kinect, &used_k, t, tol), nearest(wearable, &used_w, t, tol)) else {
            continue;
        };
        used_k[k] = true;
        used_w[w] = true;
        out.push(MatchedTriple {
            radar: r,
            kinect: k,
            wearable: w,
        });
    }
    out
}
