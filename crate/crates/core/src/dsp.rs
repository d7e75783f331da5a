//! Signal conditioning for uniformly sampled angle and rate signals.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StsError};
use crate::model::GyroStream;
use crate::sync::TimeBase;

/// A uniformly sampled real signal. Units are carried by convention
/// (degrees for angles, degrees/second for rates).
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSignal {
    pub start: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl UniformSignal {
    pub fn new(start: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(StsError::param(format!("sample interval must be positive, got {dt}")));
        }
        if !start.is_finite() || samples.iter().any(|x| !x.is_finite()) {
            return Err(StsError::param("signal contains non-finite values"));
        }
        Ok(Self { start, dt, samples })
    }

    /// Same time base, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            start: self.start,
            dt: self.dt,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn time_base(&self) -> TimeBase {
        TimeBase {
            t0: self.start,
            dt: self.dt,
            count: self.len(),
        }
    }

    /// Index of the sample nearest to `t`, clamped to the signal.
    pub fn index_of(&self, t: f64) -> usize {
        let i = ((t - self.start) / self.dt).round();
        (i.max(0.0) as usize).min(self.len().saturating_sub(1))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        self.with_samples(self.samples.iter().map(|&x| f(x)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Highpass,
    Lowpass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub cutoff_hz: f64,
    pub order: usize,
}

impl FilterSpec {
    pub fn lowpass(cutoff_hz: f64, order: usize) -> Self {
        Self {
            kind: FilterKind::Lowpass,
            cutoff_hz,
            order,
        }
    }

    pub fn highpass(cutoff_hz: f64, order: usize) -> Self {
        Self {
            kind: FilterKind::Highpass,
            cutoff_hz,
            order,
        }
    }
}

/// One second-order section in transposed direct form II (`a0 = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that produces a steady output for a constant input `x0`.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let y = self.dc_gain() * x0;
        let z2 = self.b[2] * x0 - self.a[1] * y;
        let z1 = self.b[1] * x0 - self.a[0] * y + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z[0];
            z[0] = self.b[1] * input - self.a[0] * y + z[1];
            z[1] = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Butterworth sections via the bilinear transform with prewarping.
fn butterworth_sections(spec: &FilterSpec, fs: f64) -> Vec<Biquad> {
    let k = (std::f64::consts::PI * spec.cutoff_hz / fs).tan();
    let n = spec.order;
    let mut sections = Vec::with_capacity(n.div_ceil(2));
    for i in 1..=n / 2 {
        let theta = (2 * i - 1) as f64 * std::f64::consts::PI / (2 * n) as f64;
        let q = 1.0 / (2.0 * theta.cos());
        let norm = 1.0 / (1.0 + k / q + k * k);
        let a = [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm];
        let b = match spec.kind {
            FilterKind::Lowpass => {
                let b0 = k * k * norm;
                [b0, 2.0 * b0, b0]
            }
            FilterKind::Highpass => [norm, -2.0 * norm, norm],
        };
        sections.push(Biquad { b, a });
    }
    if n % 2 == 1 {
        let norm = 1.0 / (1.0 + k);
        let a = [(k - 1.0) * norm, 0.0];
        let b = match spec.kind {
            FilterKind::Lowpass => [k * norm, k * norm, 0.0],
            FilterKind::Highpass => [norm, -norm, 0.0],
        };
        sections.push(Biquad { b, a });
    }
    sections
}

fn run_cascade(sections: &[Biquad], x: &mut [f64]) {
    let mut level = x.first().copied().unwrap_or(0.0);
    for s in sections {
        let z = s.steady_state(level);
        level *= s.dc_gain();
        s.run(x, z);
    }
}

/// Zero-phase Butterworth filtering (forward then backward pass).
///
/// Edges are handled with odd reflection and steady-state initial
/// conditions, so constants pass a lowpass unchanged and vanish under a
/// highpass.
pub fn butterworth_filtfilt(sig: &UniformSignal, spec: &FilterSpec) -> Result<UniformSignal> {
    let fs = sig.rate_hz();
    let nyquist = fs / 2.0;
    if spec.order == 0 {
        return Err(StsError::param("filter order must be at least 1"));
    }
    if !(spec.cutoff_hz > 0.0 && spec.cutoff_hz < nyquist) {
        return Err(StsError::param(format!(
            "cutoff {} Hz must lie in (0, {nyquist}) Hz",
            spec.cutoff_hz
        )));
    }
    let n = sig.len();
    if n <= 3 * spec.order {
        return Err(StsError::TooShort {
            needed: 3 * spec.order + 1,
            got: n,
        });
    }
    let sections = butterworth_sections(spec, fs);
    let pad = (3 * (spec.order + 1)).min(n - 1);
    let x = &sig.samples;
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    run_cascade(&sections, &mut ext);
    ext.reverse();
    run_cascade(&sections, &mut ext);
    ext.reverse();
    Ok(sig.with_samples(ext[pad..pad + n].to_vec()))
}

/// Binomial difference-operator coefficients of order `d`.
fn difference_coefficients(d: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for _ in 0..d {
        let mut next = vec![0.0; c.len() + 1];
        for (i, &v) in c.iter().enumerate() {
            next[i + 1] += v;
            next[i] -= v;
        }
        c = next;
    }
    c
}

/// Whittaker–Eilers smoother: minimizes `sum (y - z)^2 + lambda * sum (D^d z)^2`
/// by solving the banded system `(I + lambda D^T D) z = y` with a banded
/// Cholesky factorization.
pub fn whittaker_smooth(sig: &UniformSignal, lambda: f64, order: usize) -> Result<UniformSignal> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(StsError::param(format!("lambda must be non-negative, got {lambda}")));
    }
    let n = sig.len();
    if n <= order {
        return Err(StsError::TooShort {
            needed: order + 1,
            got: n,
        });
    }
    if lambda == 0.0 {
        return Ok(sig.clone());
    }
    let w = order; // half bandwidth
    let c = difference_coefficients(order);
    // band[i][k] = A[i][i + k]
    let mut band = vec![vec![0.0; w + 1]; n];
    for row in band.iter_mut() {
        row[0] = 1.0;
    }
    for r in 0..n - order {
        for k1 in 0..=order {
            for k2 in k1..=order {
                band[r + k1][k2 - k1] += lambda * c[k1] * c[k2];
            }
        }
    }
    // A = L L^T, stored as lower[i][k] = L[i][i - k]
    let mut lower = vec![vec![0.0; w + 1]; n];
    for i in 0..n {
        for k in (0..=w.min(i)).rev() {
            let j = i - k;
            let mut s = band[j][k];
            for m in 1..=(w - k).min(j) {
                // L[i][j - m] * L[j][j - m]
                s -= lower[i][k + m] * lower[j][m];
            }
            if k == 0 {
                if !(s > 0.0) {
                    return Err(StsError::Degenerate("smoothing system is not positive definite".into()));
                }
                lower[i][0] = s.sqrt();
            } else {
                lower[i][k] = s / lower[j][0];
            }
        }
    }
    let mut z = sig.samples.clone();
    for i in 0..n {
        let mut s = z[i];
        for k in 1..=w.min(i) {
            s -= lower[i][k] * z[i - k];
        }
        z[i] = s / lower[i][0];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in 1..=w.min(n - 1 - i) {
            s -= lower[i + k][k] * z[i + k];
        }
        z[i] = s / lower[i][0];
    }
    Ok(sig.with_samples(z))
}

/// Central differences inside, second-order one-sided differences at the
/// ends. Converts degrees to degrees per second.
pub fn differentiate(sig: &UniformSignal) -> Result<UniformSignal> {
    let n = sig.len();
    if n < 3 {
        return Err(StsError::TooShort { needed: 3, got: n });
    }
    let x = &sig.samples;
    let h2 = 2.0 * sig.dt;
    let mut d = Vec::with_capacity(n);
    d.push((-3.0 * x[0] + 4.0 * x[1] - x[2]) / h2);
    d.extend(x.windows(3).map(|w| (w[2] - w[0]) / h2));
    d.push((3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / h2);
    Ok(sig.with_samples(d))
}

/// Trapezoidal cumulative integral of one gyro axis, starting at 0.
///
/// The time base is taken from the first timestamp and the nominal rate.
pub fn integrate_gyro(stream: &GyroStream, axis: usize) -> Result<UniformSignal> {
    if axis > 2 {
        return Err(StsError::param(format!("gyro axis must be 0..=2, got {axis}")));
    }
    let n = stream.len();
    if n < 2 {
        return Err(StsError::TooShort { needed: 2, got: n });
    }
    let dt = 1.0 / stream.rate_hz;
    let mut angle = Vec::with_capacity(n);
    let mut acc = 0.0;
    angle.push(acc);
    for w in stream.samples.windows(2) {
        acc += 0.5 * (w[0].omega[axis] + w[1].omega[axis]) * dt;
        angle.push(acc);
    }
    UniformSignal::new(stream.samples[0].timestamp, dt, angle)
}

/// Linear interpolation of `sig` at the instants of `base`.
pub fn resample_linear(sig: &UniformSignal, base: &TimeBase) -> Result<UniformSignal> {
    if sig.is_empty() {
        return Err(StsError::TooShort { needed: 1, got: 0 });
    }
    let (start, end) = (sig.start, sig.end());
    let slack = 1e-9 * sig.dt;
    let last = sig.len() - 1;
    let mut out = Vec::with_capacity(base.count);
    for i in 0..base.count {
        let t = base.time(i);
        if t < start - slack || t > end + slack {
            return Err(StsError::Extrapolation { t, start, end });
        }
        let mut pos = ((t - start) / sig.dt).clamp(0.0, last as f64);
        if (pos - pos.round()).abs() < 1e-9 {
            pos = pos.round();
        }
        let lo = (pos.floor() as usize).min(last);
        let frac = pos - lo as f64;
        let v = if lo == last || frac == 0.0 {
            sig.samples[lo]
        } else {
            sig.samples[lo] + frac * (sig.samples[lo + 1] - sig.samples[lo])
        };
        out.push(v);
    }
    UniformSignal::new(base.t0, base.dt, out)
}

/// Subtracts the least-squares line. Removes the linear drift that a
/// constant gyro bias leaves in an integrated angle.
pub fn detrend_linear(sig: &UniformSignal) -> UniformSignal {
    let n = sig.len();
    if n < 2 {
        return sig.clone();
    }
    let nf = n as f64;
    let mi = (nf - 1.0) / 2.0;
    let my = sig.samples.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in sig.samples.iter().enumerate() {
        let di = i as f64 - mi;
        sxy += di * (y - my);
        sxx += di * di;
    }
    let slope = sxy / sxx;
    sig.with_samples(
        sig.samples
            .iter()
            .enumerate()
            .map(|(i, y)| y - my - slope * (i as f64 - mi))
            .collect(),
    )
}

/// Drift removal, Butterworth filters and Whittaker parameters for one
/// stream rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditioningConfig {
    pub detrend: bool,
    pub highpass_hz: Option<f64>,
    pub lowpass_hz: Option<f64>,
    pub filter_order: usize,
    pub whittaker_lambda: f64,
    pub whittaker_order: usize,
}

impl ConditioningConfig {
    /// Defaults for 20 Hz skeleton streams. Positions carry no drift, so no
    /// high-pass stage. A third-order penalty keeps velocity peaks sharper
    /// than second order at the same noise suppression.
    pub fn skeleton_default() -> Self {
        Self {
            detrend: false,
            highpass_hz: None,
            lowpass_hz: Some(5.0),
            filter_order: 2,
            whittaker_lambda: 30.0,
            whittaker_order: 3,
        }
    }

    /// Defaults for 100 Hz wearable streams: integrated angles are detrended
    /// instead of high-passed.
    pub fn wearable_default() -> Self {
        Self {
            detrend: true,
            whittaker_lambda: 500.0,
            whittaker_order: 2,
            ..Self::skeleton_default()
        }
    }
}

/// Optional detrend, high-pass, low-pass, then Whittaker smoothing.
pub fn condition(sig: &UniformSignal, cfg: &ConditioningConfig) -> Result<UniformSignal> {
    let mut out = if cfg.detrend { detrend_linear(sig) } else { sig.clone() };
    if let Some(hp) = cfg.highpass_hz {
        out = butterworth_filtfilt(&out, &FilterSpec::highpass(hp, cfg.filter_order))?;
    }
    if let Some(lp) = cfg.lowpass_hz {
        out = butterworth_filtfilt(&out, &FilterSpec::lowpass(lp, cfg.filter_order))?;
    }
    whittaker_smooth(&out, cfg.whittaker_lambda, cfg.whittaker_order)
}
