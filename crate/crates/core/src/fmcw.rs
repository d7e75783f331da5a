//! Point-scatterer FMCW radar simulator and processing chain.
//!
//! The IF cube is indexed `[rx][chirp][sample]`. Processing runs a Hann
//! windowed range FFT over fast time, optional static clutter removal (mean
//! subtraction over slow time), a Hann windowed Doppler FFT, noncoherent
//! integration across receivers, 1-D cell-averaging CFAR along range and an
//! FFT beamformer across the array at every detection.
//!
//! FFTs are unnormalized: a forward transform of length `n` multiplies total
//! energy by `n`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StsError};
use crate::io::format_float;

/// Propagation speed used throughout (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfarConfig {
    /// Training cells on each side of the cell under test.
    pub training: usize,
    /// Guard cells on each side of the cell under test.
    pub guard: usize,
    pub false_alarm_rate: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            training: 8,
            guard: 2,
            // about 0.015 false alarms per default frame
            false_alarm_rate: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarConfig {
    pub carrier_hz: f64,
    /// Chirp slope k (Hz/s).
    pub slope_hz_per_s: f64,
    /// Chirp duration T_c, also the chirp repetition interval.
    pub chirp_s: f64,
    pub samples_per_chirp: usize,
    pub chirps_per_frame: usize,
    pub adc_rate_hz: f64,
    pub rx_count: usize,
    pub rx_spacing_m: f64,
    pub angle_fft_len: usize,
    pub clutter_removal: bool,
    pub cfar: CfarConfig,
}

impl Default for RadarConfig {
    /// 60–64 GHz sweep in 100 µs, 256 samples × 64 chirps, 8 receivers at λ/2.
    fn default() -> Self {
        let carrier_hz = 60e9;
        Self {
            carrier_hz,
            slope_hz_per_s: 4e13,
            chirp_s: 100e-6,
            samples_per_chirp: 256,
            chirps_per_frame: 64,
            adc_rate_hz: 2.56e6,
            rx_count: 8,
            rx_spacing_m: SPEED_OF_LIGHT / carrier_hz / 2.0,
            angle_fft_len: 256,
            clutter_removal: true,
            cfar: CfarConfig::default(),
        }
    }
}

impl RadarConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// B = k·T_c.
    pub fn bandwidth(&self) -> f64 {
        self.slope_hz_per_s * self.chirp_s
    }

    /// Physical array length (first to last element).
    pub fn aperture(&self) -> f64 {
        (self.rx_count.saturating_sub(1)) as f64 * self.rx_spacing_m
    }

    /// Range spanned by one FFT bin. Equals the range resolution when the
    /// ADC window covers the whole chirp.
    pub fn range_bin_m(&self) -> f64 {
        self.adc_rate_hz / self.samples_per_chirp as f64 * SPEED_OF_LIGHT / (2.0 * self.slope_hz_per_s)
    }

    pub fn max_range(&self) -> f64 {
        self.samples_per_chirp as f64 * self.range_bin_m()
    }

    /// Unambiguous velocity interval is (−v_max, v_max).
    pub fn max_velocity(&self) -> f64 {
        self.wavelength() / (4.0 * self.chirp_s)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("slope_hz_per_s", self.slope_hz_per_s),
            ("chirp_s", self.chirp_s),
            ("adc_rate_hz", self.adc_rate_hz),
            ("rx_spacing_m", self.rx_spacing_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(StsError::param(format!("{name} must be positive, got {v}")));
            }
        }
        if self.samples_per_chirp < 4 || self.chirps_per_frame < 4 {
            return Err(StsError::param("need at least 4 samples per chirp and 4 chirps per frame"));
        }
        if self.rx_count < 2 {
            return Err(StsError::param("angle estimation needs at least 2 receivers"));
        }
        if self.angle_fft_len < self.rx_count {
            return Err(StsError::param("angle FFT shorter than the array"));
        }
        if self.rx_spacing_m > self.wavelength() / 2.0 * (1.0 + 1e-12) {
            return Err(StsError::param(format!(
                "element spacing {} m exceeds λ/2 = {} m",
                self.rx_spacing_m,
                self.wavelength() / 2.0
            )));
        }
        let sampled = self.samples_per_chirp as f64 / self.adc_rate_hz;
        if sampled > self.chirp_s * (1.0 + 1e-9) {
            return Err(StsError::param(format!(
                "ADC window {sampled} s is longer than the chirp {} s",
                self.chirp_s
            )));
        }
        let c = &self.cfar;
        if c.training == 0 || !(c.false_alarm_rate > 0.0 && c.false_alarm_rate < 1.0) {
            return Err(StsError::param("CFAR needs training cells and a false-alarm rate in (0, 1)"));
        }
        if 2 * (c.training + c.guard) + 1 > self.samples_per_chirp {
            return Err(StsError::param("CFAR window wider than the range axis"));
        }
        Ok(())
    }
}

/// Beat frequency k·τ of a target at range `range_m` (τ = 2R/c).
pub fn beat_frequency(cfg: &RadarConfig, range_m: f64) -> Result<f64> {
    if !(range_m > 0.0) {
        return Err(StsError::param(format!("range must be positive, got {range_m}")));
    }
    Ok(cfg.slope_hz_per_s * 2.0 * range_m / SPEED_OF_LIGHT)
}

/// ΔR = c / 2B.
pub fn range_resolution(cfg: &RadarConfig) -> f64 {
    SPEED_OF_LIGHT / (2.0 * cfg.bandwidth())
}

/// Δv = λ / (2·N_d·T_c).
pub fn velocity_resolution(cfg: &RadarConfig) -> f64 {
    cfg.wavelength() / (2.0 * cfg.chirps_per_frame as f64 * cfg.chirp_s)
}

/// Δθ = λ / (2·L·cos θ).
pub fn angular_resolution(cfg: &RadarConfig, theta: f64) -> Result<f64> {
    check_angle(theta)?;
    Ok(cfg.wavelength() / (2.0 * cfg.aperture() * theta.cos()))
}

/// f_D = 2v / λ.
pub fn doppler_shift(cfg: &RadarConfig, velocity: f64) -> f64 {
    2.0 * velocity / cfg.wavelength()
}

/// Δφ = 2π·d·sin θ / λ between adjacent receivers.
pub fn ula_phase_delta(cfg: &RadarConfig, theta: f64) -> Result<f64> {
    check_angle(theta)?;
    Ok(2.0 * PI * cfg.rx_spacing_m * theta.sin() / cfg.wavelength())
}

fn check_angle(theta: f64) -> Result<()> {
    if !(theta.abs() < PI / 2.0) {
        return Err(StsError::param(format!("angle {theta} rad outside (−π/2, π/2)")));
    }
    Ok(())
}

/// A point target. Positive velocity means the range is increasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub azimuth_rad: f64,
    pub amplitude: f64,
}

impl Scatterer {
    pub fn new(range_m: f64, velocity_mps: f64, azimuth_rad: f64, amplitude: f64) -> Result<Self> {
        if !(range_m > 0.0) {
            return Err(StsError::param(format!("range must be positive, got {range_m}")));
        }
        check_angle(azimuth_rad)?;
        if !velocity_mps.is_finite() || !amplitude.is_finite() {
            return Err(StsError::param("velocity and amplitude must be finite"));
        }
        Ok(Self {
            range_m,
            velocity_mps,
            azimuth_rad,
            amplitude,
        })
    }
}

/// JSON form of a scatterer; angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub azimuth_deg: f64,
    #[serde(default = "unit_amplitude")]
    pub amplitude: f64,
}

fn unit_amplitude() -> f64 {
    1.0
}

impl From<&Scatterer> for SceneEntry {
    fn from(s: &Scatterer) -> Self {
        Self {
            range_m: s.range_m,
            velocity_mps: s.velocity_mps,
            azimuth_deg: s.azimuth_rad.to_degrees(),
            amplitude: s.amplitude,
        }
    }
}

pub fn scene_from_json(text: &str) -> Result<Vec<Scatterer>> {
    let entries: Vec<SceneEntry> = serde_json::from_str(text)?;
    entries
        .iter()
        .map(|e| Scatterer::new(e.range_m, e.velocity_mps, e.azimuth_deg.to_radians(), e.amplitude))
        .collect()
}

pub fn scene_to_json(scene: &[Scatterer]) -> String {
    let entries: Vec<SceneEntry> = scene.iter().map(SceneEntry::from).collect();
    serde_json::to_string_pretty(&entries).expect("plain structs serialize")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarDetection {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub azimuth_rad: f64,
    pub power_db: f64,
}

pub fn write_detections_csv<W: Write>(mut w: W, detections: &[RadarDetection]) -> std::io::Result<()> {
    writeln!(w, "range_m,velocity_mps,azimuth_deg,power_db")?;
    for d in detections {
        writeln!(
            w,
            "{},{},{},{}",
            format_float(d.range_m),
            format_float(d.velocity_mps),
            format_float(d.azimuth_rad.to_degrees()),
            format_float(d.power_db)
        )?;
    }
    Ok(())
}

/// Complex samples indexed `[rx][chirp][sample]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IfCube {
    pub rx: usize,
    pub chirps: usize,
    pub samples: usize,
    pub data: Vec<Complex64>,
}

impl IfCube {
    pub fn zeros(rx: usize, chirps: usize, samples: usize) -> Self {
        Self {
            rx,
            chirps,
            samples,
            data: vec![Complex64::new(0.0, 0.0); rx * chirps * samples],
        }
    }

    pub fn index(&self, rx: usize, chirp: usize, sample: usize) -> usize {
        (rx * self.chirps + chirp) * self.samples + sample
    }

    pub fn get(&self, rx: usize, chirp: usize, sample: usize) -> Complex64 {
        self.data[self.index(rx, chirp, sample)]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    fn check(&self, cfg: &RadarConfig) -> Result<()> {
        let want = (cfg.rx_count, cfg.chirps_per_frame, cfg.samples_per_chirp);
        let got = (self.rx, self.chirps, self.samples);
        if want != got || self.data.len() != self.rx * self.chirps * self.samples {
            return Err(StsError::DimensionMismatch(format!(
                "cube is {got:?} (rx, chirps, samples), config expects {want:?}"
            )));
        }
        Ok(())
    }
}

/// Synthesizes the IF cube of `scene` under stop-and-hop motion: τ is fixed
/// within a chirp and advances by 2·v·T_c/c between chirps. Receiver `n`
/// carries an extra phase `n·Δφ`. Complex Gaussian noise has total variance
/// `noise_std²` per sample.
pub fn synthesize_if_cube(cfg: &RadarConfig, scene: &[Scatterer], noise_std: f64, seed: u64) -> Result<IfCube> {
    cfg.validate()?;
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(StsError::param(format!("noise std must be non-negative, got {noise_std}")));
    }
    let mut cube = IfCube::zeros(cfg.rx_count, cfg.chirps_per_frame, cfg.samples_per_chirp);
    let k = cfg.slope_hz_per_s;
    for s in scene {
        let dphi = ula_phase_delta(cfg, s.azimuth_rad)?;
        for m in 0..cube.chirps {
            let range = s.range_m + s.velocity_mps * m as f64 * cfg.chirp_s;
            let tau = 2.0 * range / SPEED_OF_LIGHT;
            // phase in cycles, wrapped before the large carrier term loses precision
            let constant = (cfg.carrier_hz * tau).fract() + (0.5 * k * tau * tau).fract();
            for i in 0..cube.samples {
                let t = i as f64 / cfg.adc_rate_hz;
                let cycles = constant - k * tau * t;
                let base = Complex64::from_polar(s.amplitude, -2.0 * PI * cycles.fract());
                for n in 0..cube.rx {
                    let idx = cube.index(n, m, i);
                    cube.data[idx] += base * Complex64::from_polar(1.0, n as f64 * dphi);
                }
            }
        }
    }
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std / 2f64.sqrt()).expect("finite std");
        for z in &mut cube.data {
            *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(cube)
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Fast-time FFT of every chirp; the result has the cube's layout with
/// range bins in place of samples.
pub fn range_fft(cube: &IfCube, window: Option<&[f64]>) -> IfCube {
    let mut out = cube.clone();
    let fft = FftPlanner::new().plan_fft_forward(cube.samples);
    for row in out.data.chunks_mut(cube.samples) {
        if let Some(w) = window {
            for (z, &wi) in row.iter_mut().zip(w) {
                *z *= wi;
            }
        }
        fft.process(row);
    }
    out
}

/// Range–Doppler spectra per receiver plus their noncoherent sum.
#[derive(Debug, Clone)]
pub struct RangeDoppler {
    pub rx: usize,
    pub doppler_bins: usize,
    pub range_bins: usize,
    /// `[rx][doppler][range]`, Doppler axis shifted so bin `N_d/2` is zero.
    pub spectra: Vec<Complex64>,
    /// `[doppler][range]`.
    pub power: Vec<f64>,
}

impl RangeDoppler {
    fn spectrum(&self, rx: usize, d: usize, r: usize) -> Complex64 {
        self.spectra[(rx * self.doppler_bins + d) * self.range_bins + r]
    }

    pub fn power_at(&self, d: usize, r: usize) -> f64 {
        self.power[d * self.range_bins + r]
    }
}

pub fn range_doppler(cfg: &RadarConfig, cube: &IfCube) -> Result<RangeDoppler> {
    cfg.validate()?;
    cube.check(cfg)?;
    let (nrx, nd, nr) = (cube.rx, cube.chirps, cube.samples);
    let rf = range_fft(cube, Some(&hann(nr)));
    let wd = hann(nd);
    let fft = FftPlanner::new().plan_fft_forward(nd);
    let mut spectra = vec![Complex64::new(0.0, 0.0); nrx * nd * nr];
    let mut column = vec![Complex64::new(0.0, 0.0); nd];
    for n in 0..nrx {
        for r in 0..nr {
            for (m, c) in column.iter_mut().enumerate() {
                *c = rf.get(n, m, r);
            }
            if cfg.clutter_removal {
                let mean = column.iter().sum::<Complex64>() / nd as f64;
                for c in &mut column {
                    *c -= mean;
                }
            }
            for (c, &w) in column.iter_mut().zip(&wd) {
                *c *= w;
            }
            fft.process(&mut column);
            for (d, &c) in column.iter().enumerate() {
                let shifted = (d + nd / 2) % nd;
                spectra[(n * nd + shifted) * nr + r] = c;
            }
        }
    }
    let mut power = vec![0.0; nd * nr];
    for n in 0..nrx {
        for (p, z) in power.iter_mut().zip(&spectra[n * nd * nr..(n + 1) * nd * nr]) {
            *p += z.norm_sqr();
        }
    }
    Ok(RangeDoppler {
        rx: nrx,
        doppler_bins: nd,
        range_bins: nr,
        spectra,
        power,
    })
}

/// Correlation coefficient between FFT bins `lag` apart when white noise is
/// windowed by `window` before the transform.
fn bin_correlation(window: &[f64], lag: usize) -> f64 {
    let n = window.len();
    let total: f64 = window.iter().map(|w| w * w).sum();
    let re: f64 = window
        .iter()
        .enumerate()
        .map(|(i, w)| w * w * (2.0 * PI * (lag * i) as f64 / n as f64).cos())
        .sum();
    re / total
}

/// False-alarm probability of `X > alpha·S`, where X is the sum of `m` unit
/// exponentials and S is a weighted sum of independent unit exponentials.
fn false_alarm_probability(weights: &[f64], m: usize, alpha: f64) -> f64 {
    // Taylor coefficients of the Laplace transform of S around alpha
    let b: Vec<f64> = weights.iter().map(|c| c / (1.0 + alpha * c)).collect();
    let log0: f64 = -weights.iter().map(|c| (alpha * c).ln_1p()).sum::<f64>();
    let g: Vec<f64> = (0..m)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * b.iter().map(|bj| bj.powi(i as i32)).sum::<f64>() / i as f64
            }
        })
        .collect();
    let mut a = vec![0.0; m];
    a[0] = log0.exp();
    for k in 1..m {
        a[k] = (1..=k).map(|i| i as f64 * g[i] * a[k - i]).sum::<f64>() / k as f64;
    }
    (0..m).map(|k| (-alpha).powi(k as i32) * a[k]).sum()
}

/// Threshold factor on the training-cell mean that meets the configured
/// false-alarm rate exactly for Hann-correlated range bins summed over all
/// receivers. The guard band must span the window's bin correlation so the
/// cell under test stays independent of its training cells.
pub fn cfar_threshold_factor(cfg: &RadarConfig) -> f64 {
    let c = &cfg.cfar;
    let window = hann(cfg.samples_per_chirp);
    let n = c.training;
    let mut corr = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            corr[(i, j)] = bin_correlation(&window, i.abs_diff(j));
        }
    }
    let eig = SymmetricEigen::new(corr);
    let mut weights = Vec::with_capacity(2 * n * cfg.rx_count);
    for _ in 0..2 * cfg.rx_count {
        weights.extend(eig.eigenvalues.iter().map(|l| l.max(0.0) / (2 * n) as f64));
    }
    let pfa = |alpha: f64| false_alarm_probability(&weights, cfg.rx_count, alpha);
    let mut hi = 1.0;
    while pfa(hi) > c.false_alarm_rate {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pfa(mid) > c.false_alarm_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// CFAR output: crossing cells `(doppler, range)` and how many cells were
/// tested (cells without a full training window on both sides are skipped).
#[derive(Debug, Clone, PartialEq)]
pub struct CfarResult {
    pub hits: Vec<(usize, usize)>,
    pub tested: usize,
}

pub fn cfar_detect(cfg: &RadarConfig, rd: &RangeDoppler) -> CfarResult {
    let c = &cfg.cfar;
    let alpha = cfar_threshold_factor(cfg);
    let reach = c.training + c.guard;
    let nr = rd.range_bins;
    let mut hits = Vec::new();
    let mut tested = 0;
    for d in 0..rd.doppler_bins {
        let row = &rd.power[d * nr..(d + 1) * nr];
        for r in reach..nr - reach {
            let train: f64 = row[r - reach..r - c.guard].iter().sum::<f64>()
                + row[r + c.guard + 1..=r + reach].iter().sum::<f64>();
            tested += 1;
            if row[r] > alpha * train / (2 * c.training) as f64 {
                hits.push((d, r));
            }
        }
    }
    CfarResult { hits, tested }
}

/// Peak power of the window's spectrum over frequency offsets within half a
/// bin of `m`, relative to the main-lobe peak.
fn leakage_envelope(window: &[f64], m: usize) -> f64 {
    let n = window.len();
    let m = m.min(n - m.min(n));
    if m == 0 {
        return 1.0;
    }
    let response = |f: f64| -> f64 {
        let z: Complex64 = window
            .iter()
            .enumerate()
            .map(|(i, &w)| Complex64::from_polar(w, -2.0 * PI * f * i as f64 / n as f64))
            .sum();
        z.norm_sqr()
    };
    let peak = response(0.0);
    (0..=32)
        .map(|s| response(m as f64 - 0.5 + s as f64 / 32.0))
        .fold(0.0, f64::max)
        / peak
}

/// Allowance for noise riding on a sidelobe before it counts as a target.
const SIDELOBE_MARGIN: f64 = 4.0;

/// Full chain: range/Doppler FFTs, CFAR, 3×3 peak picking, sidelobe
/// masking and angle estimation. Detections are sorted by power, strongest
/// first.
pub fn process_cube(cfg: &RadarConfig, cube: &IfCube) -> Result<Vec<RadarDetection>> {
    let rd = range_doppler(cfg, cube)?;
    let (nd, nr) = (rd.doppler_bins, rd.range_bins);
    let cfar = cfar_detect(cfg, &rd);
    let mut peaks: Vec<(usize, usize)> = cfar
        .hits
        .into_iter()
        .filter(|&(d, r)| {
            let p = rd.power_at(d, r);
            (-1i64..=1).all(|dd| {
                (-1i64..=1).all(|dr| {
                    let rr = r as i64 + dr;
                    if (dd == 0 && dr == 0) || rr < 0 || rr >= nr as i64 {
                        return true;
                    }
                    let dq = (d as i64 + dd).rem_euclid(nd as i64) as usize;
                    p >= rd.power_at(dq, rr as usize)
                })
            })
        })
        .collect();
    peaks.sort_by(|a, b| rd.power_at(b.0, b.1).total_cmp(&rd.power_at(a.0, a.1)));

    let env_r: Vec<f64> = (0..=nr / 2).map(|m| leakage_envelope(&hann(nr), m)).collect();
    let env_d: Vec<f64> = (0..=nd / 2).map(|m| leakage_envelope(&hann(nd), m)).collect();
    let circ = |a: usize, b: usize, n: usize| {
        let d = a.abs_diff(b);
        d.min(n - d)
    };
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for &(d, r) in &peaks {
        let p = rd.power_at(d, r);
        let masked = kept.iter().any(|&(kd, kr)| {
            let leak = env_d[circ(d, kd, nd)] * env_r[circ(r, kr, nr)];
            p <= SIDELOBE_MARGIN * leak * rd.power_at(kd, kr)
        });
        if !masked {
            kept.push((d, r));
        }
    }
    Ok(kept.into_iter().map(|(d, r)| estimate(cfg, &rd, d, r)).collect())
}

/// Parabolic vertex offset from three log-power samples, within ±0.5.
fn vertex(lm: f64, l0: f64, lp: f64) -> f64 {
    let den = lm - 2.0 * l0 + lp;
    if den.abs() < 1e-300 || !den.is_finite() {
        return 0.0;
    }
    (0.5 * (lm - lp) / den).clamp(-0.5, 0.5)
}

fn ln_power(p: f64) -> f64 {
    p.max(f64::MIN_POSITIVE).ln()
}

fn estimate(cfg: &RadarConfig, rd: &RangeDoppler, d: usize, r: usize) -> RadarDetection {
    let (nd, nr) = (rd.doppler_bins, rd.range_bins);
    let p0 = rd.power_at(d, r);
    let r_frac = if r > 0 && r + 1 < nr {
        vertex(
            ln_power(rd.power_at(d, r - 1)),
            ln_power(p0),
            ln_power(rd.power_at(d, r + 1)),
        )
    } else {
        0.0
    };
    let d_frac = vertex(
        ln_power(rd.power_at((d + nd - 1) % nd, r)),
        ln_power(p0),
        ln_power(rd.power_at((d + 1) % nd, r)),
    );
    let range_m = (r as f64 + r_frac) * cfg.range_bin_m();
    let doppler_cycles = (d as f64 + d_frac - (nd / 2) as f64) / nd as f64;
    let velocity_mps = -doppler_cycles * cfg.wavelength() / (2.0 * cfg.chirp_s);

    let len = cfg.angle_fft_len;
    let mut array: Vec<Complex64> = (0..rd.rx).map(|n| rd.spectrum(n, d, r)).collect();
    array.resize(len, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut array);
    let spatial: Vec<f64> = (0..len).map(|k| array[(k + len / 2) % len].norm_sqr()).collect();
    let k = (0..len).max_by(|&a, &b| spatial[a].total_cmp(&spatial[b])).unwrap_or(0);
    let k_frac = vertex(
        ln_power(spatial[(k + len - 1) % len]),
        ln_power(spatial[k]),
        ln_power(spatial[(k + 1) % len]),
    );
    let cycles_per_element = (k as f64 + k_frac - (len / 2) as f64) / len as f64;
    let sin_theta = (cycles_per_element * cfg.wavelength() / cfg.rx_spacing_m).clamp(-1.0, 1.0);

    RadarDetection {
        range_m,
        velocity_mps,
        azimuth_rad: sin_theta.asin(),
        power_db: 10.0 * p0.max(f64::MIN_POSITIVE).log10(),
    }
}
