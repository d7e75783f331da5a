//! Wearable timestamp reconstruction and cross-sensor time alignment.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dsp::UniformSignal;
use crate::error::{Result, StsError};

/// Uniform time grid `t0 + i * dt`, `i < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBase {
    pub t0: f64,
    pub dt: f64,
    pub count: usize,
}

impl TimeBase {
    pub fn new(t0: f64, dt: f64, count: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !t0.is_finite() {
            return Err(StsError::param(format!("invalid time base t0={t0} dt={dt}")));
        }
        if count < 2 {
            return Err(StsError::TooShort { needed: 2, got: count });
        }
        Ok(Self { t0, dt, count })
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.count.saturating_sub(1))
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.time(i)).collect()
    }

    /// Grid of spacing `dt` covering `[start, end]`.
    pub fn covering(start: f64, end: f64, dt: f64) -> Result<Self> {
        let count = ((end - start) / dt + 1e-9).floor() as usize + 1;
        Self::new(start, dt, count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    /// Delay of the second signal relative to the reference, seconds.
    pub lag_s: f64,
    pub peak_rho: f64,
    pub common_range: (f64, f64),
    /// Peak correlation was negative.
    pub anticorrelated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncConfig {
    pub grid_hz: f64,
    pub max_lag_s: f64,
    pub min_overlap_s: f64,
    pub flip_threshold: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            grid_hz: 20.0,
            max_lag_s: 10.0,
            min_overlap_s: 5.0,
            flip_threshold: 0.6,
        }
    }
}

/// Time base of a wearable file whose last frame was written at `file_mtime`.
pub fn reconstruct_wearable_times(file_mtime: f64, frame_count: usize, fs: f64) -> Result<TimeBase> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(StsError::param(format!("sample rate must be positive, got {fs}")));
    }
    if frame_count < 2 {
        return Err(StsError::TooShort {
            needed: 2,
            got: frame_count,
        });
    }
    TimeBase::new(file_mtime - (frame_count - 1) as f64 / fs, 1.0 / fs, frame_count)
}

/// Intersection `[max start, min end]` of several time bases.
pub fn common_range(bases: &[TimeBase]) -> Result<(f64, f64)> {
    if bases.len() < 2 {
        return Err(StsError::param("common range needs at least two time bases"));
    }
    let start = bases.iter().map(|b| b.t0).fold(f64::NEG_INFINITY, f64::max);
    let end = bases.iter().map(|b| b.end()).fold(f64::INFINITY, f64::min);
    if start > end {
        return Err(StsError::DisjointRanges);
    }
    Ok((start, end))
}

pub fn apply_lag(base: &TimeBase, lag: f64) -> TimeBase {
    TimeBase {
        t0: base.t0 + lag,
        ..*base
    }
}

/// Shifts a signal's time axis by `lag` seconds.
pub fn shift_signal(sig: &UniformSignal, lag: f64) -> UniformSignal {
    UniformSignal {
        start: sig.start + lag,
        ..sig.clone()
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let den = (saa * sbb).sqrt();
    if den > 0.0 {
        (sab / den).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Normalized cross-correlation lag between `reference` and `other`.
///
/// A positive lag means `other` is delayed: `other(t + lag) ≈ reference(t)`.
/// The correlation is the Pearson coefficient over the overlapping samples
/// at each integer shift; the extremum of `|rho|` is refined with a parabola
/// through its neighbours.
pub fn estimate_lag(
    reference: &UniformSignal,
    other: &UniformSignal,
    max_lag: f64,
    min_overlap: f64,
) -> Result<SyncResult> {
    let dt = reference.dt;
    if (other.dt - dt).abs() > 1e-9 * dt {
        return Err(StsError::DimensionMismatch(format!(
            "signals must share dt ({} vs {})",
            reference.dt, other.dt
        )));
    }
    let common = common_range(&[reference.time_base(), other.time_base()])?;
    let overlap = common.1 - common.0;
    if overlap < min_overlap {
        return Err(StsError::InsufficientOverlap {
            overlap_s: overlap,
            required_s: min_overlap,
        });
    }
    let (nr, no) = (reference.len() as i64, other.len() as i64);
    let offset = other.start - reference.start;
    let min_samples = (min_overlap / dt).ceil().max(3.0) as i64;
    let k_lo = ((-max_lag - offset) / dt).ceil() as i64;
    let k_hi = ((max_lag - offset) / dt).floor() as i64;

    // rho[k] pairs reference[i] with other[i + k]; lag = offset + k dt.
    let mut rhos: Vec<(i64, f64)> = Vec::new();
    for k in k_lo..=k_hi {
        let i0 = 0.max(-k);
        let i1 = nr.min(no - k);
        if i1 - i0 < min_samples {
            continue;
        }
        let a = &reference.samples[i0 as usize..i1 as usize];
        let b = &other.samples[(i0 + k) as usize..(i1 + k) as usize];
        rhos.push((k, pearson(a, b)));
    }
    if rhos.is_empty() {
        return Err(StsError::InsufficientOverlap {
            overlap_s: overlap,
            required_s: min_overlap,
        });
    }
    let best = (0..rhos.len())
        .max_by(|&a, &b| rhos[a].1.abs().total_cmp(&rhos[b].1.abs()))
        .unwrap_or(0);
    let (k, rho) = rhos[best];
    let sign = rho.signum();
    let mut frac = 0.0;
    if best > 0 && best + 1 < rhos.len() && rhos[best - 1].0 == k - 1 && rhos[best + 1].0 == k + 1 {
        let (ym, y0, yp) = (sign * rhos[best - 1].1, sign * rho, sign * rhos[best + 1].1);
        let den = ym - 2.0 * y0 + yp;
        if den < 0.0 {
            frac = (0.5 * (ym - yp) / den).clamp(-0.5, 0.5);
        }
    }
    let anticorrelated = rho < 0.0;
    if anticorrelated {
        warn!("cross-correlation peak is negative (rho = {rho:.3})");
    }
    Ok(SyncResult {
        lag_s: offset + (k as f64 + frac) * dt,
        peak_rho: rho,
        common_range: common,
        anticorrelated,
    })
}

/// Outcome of checking one wearable stream for reversed mounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReversalCheck {
    pub rho: f64,
    pub flipped: bool,
}

/// Decides whether a wearable-derived angle is sign-reversed relative to the
/// matching skeleton-derived angle.
pub fn check_reversal(
    skeleton: &UniformSignal,
    wearable: &UniformSignal,
    cfg: &SyncConfig,
) -> Result<ReversalCheck> {
    let r = estimate_lag(skeleton, wearable, cfg.max_lag_s, cfg.min_overlap_s)?;
    let flipped = r.peak_rho < 0.0 && r.peak_rho.abs() > cfg.flip_threshold;
    Ok(ReversalCheck { rho: r.peak_rho, flipped })
}
