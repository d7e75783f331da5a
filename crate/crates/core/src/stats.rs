//! Agreement statistics: Z-score outlier removal, two-way ICC and
//! Bland–Altman limits of agreement.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StsError};
use crate::model::SensorKind;
use crate::sts::Feature;

/// Sensor pairs in report order. The first sensor is `a`, the second `b`.
pub const SENSOR_PAIRS: [(SensorKind, SensorKind); 3] = [
    (SensorKind::Kinect, SensorKind::Radar),
    (SensorKind::Kinect, SensorKind::Wearable),
    (SensorKind::Radar, SensorKind::Wearable),
];

pub fn pair_label(a: SensorKind, b: SensorKind) -> String {
    format!("{}-{}", a.letter(), b.letter())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub feature: String,
    pub pair: String,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PairedSample {
    pub fn new(feature: impl Into<String>, pair: impl Into<String>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(StsError::DimensionMismatch(format!(
                "paired vectors differ in length ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(StsError::param("paired sample contains non-finite values"));
        }
        Ok(Self {
            feature: feature.into(),
            pair: pair.into(),
            a,
            b,
        })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IccVariant {
    /// ICC(C,1)
    Consistency,
    /// ICC(A,1)
    #[default]
    Absolute,
}

impl IccVariant {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "consistency" | "c" | "c1" | "icc_c1" => Some(Self::Consistency),
            "absolute" | "a" | "a1" | "icc_a1" => Some(Self::Absolute),
            _ => None,
        }
    }
}

impl fmt::Display for IccVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Consistency => "consistency",
            Self::Absolute => "absolute",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc: f64,
    pub variant: IccVariant,
    pub n: usize,
    pub msr: f64,
    pub mse: f64,
    pub msc: f64,
    /// Zero variance in the denominator; `icc` is defined as 1.0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanResult {
    pub mean_diff: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    /// `(mean, diff)` per pair.
    pub points: Vec<(f64, f64)>,
}

impl BlandAltmanResult {
    pub fn fraction_within(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let inside = self
            .points
            .iter()
            .filter(|(_, d)| *d >= self.lower && *d <= self.upper)
            .count();
        inside as f64 / self.points.len() as f64
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Drops points with `|x - mean| / sd > threshold` in a single pass, using
/// the sample standard deviation. Returns the kept values and the removed
/// indices.
pub fn remove_outliers_zscore(values: &[f64], threshold: f64) -> (Vec<f64>, Vec<usize>) {
    let removed = outlier_indices(values, threshold);
    let kept = values
        .iter()
        .enumerate()
        .filter(|(i, _)| removed.binary_search(i).is_err())
        .map(|(_, &v)| v)
        .collect();
    (kept, removed)
}

/// Indices (ascending) that the Z-score rule would remove.
pub fn outlier_indices(values: &[f64], threshold: f64) -> Vec<usize> {
    if values.len() < 2 {
        return Vec::new();
    }
    let m = mean(values);
    let sd = sample_sd(values);
    if !(sd > 0.0) {
        return Vec::new();
    }
    let removed: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| ((v - m) / sd).abs() > threshold)
        .map(|(i, _)| i)
        .collect();
    debug_assert!(threshold < 3.0 || 2 * removed.len() <= values.len());
    removed
}

/// Two-way ICC from the closed-form ANOVA of an `n x 2` table.
pub fn icc_two_way(sample: &PairedSample, variant: IccVariant) -> Result<IccResult> {
    let n = sample.len();
    if n < 3 {
        return Err(StsError::TooShort { needed: 3, got: n });
    }
    let k = 2.0;
    let nf = n as f64;
    let grand = (sample.a.iter().sum::<f64>() + sample.b.iter().sum::<f64>()) / (k * nf);
    let (ma, mb) = (mean(&sample.a), mean(&sample.b));
    let mut ssr = 0.0;
    let mut sst = 0.0;
    for (x, y) in sample.a.iter().zip(&sample.b) {
        let row = 0.5 * (x + y);
        ssr += k * (row - grand).powi(2);
        sst += (x - grand).powi(2) + (y - grand).powi(2);
    }
    let ssc = nf * ((ma - grand).powi(2) + (mb - grand).powi(2));
    let sse = (sst - ssr - ssc).max(0.0);
    let msr = ssr / (nf - 1.0);
    let msc = ssc / (k - 1.0);
    let mse = sse / ((nf - 1.0) * (k - 1.0));

    let den = match variant {
        IccVariant::Consistency => msr + (k - 1.0) * mse,
        IccVariant::Absolute => msr + (k - 1.0) * mse + k / nf * (msc - mse),
    };
    let scale = sst.max(f64::MIN_POSITIVE);
    let (icc, degenerate) = if sst == 0.0 || den.abs() <= 1e-14 * scale {
        (1.0, true)
    } else {
        ((msr - mse) / den, false)
    };
    Ok(IccResult {
        icc,
        variant,
        n,
        msr,
        mse,
        msc,
        degenerate,
    })
}

/// Differences `a - b` against means, with limits `mean ± 1.96 sd`.
pub fn bland_altman(sample: &PairedSample) -> Result<BlandAltmanResult> {
    let n = sample.len();
    if n < 2 {
        return Err(StsError::TooShort { needed: 2, got: n });
    }
    let diffs: Vec<f64> = sample.a.iter().zip(&sample.b).map(|(x, y)| x - y).collect();
    let points = sample
        .a
        .iter()
        .zip(&sample.b)
        .zip(&diffs)
        .map(|((x, y), d)| (0.5 * (x + y), *d))
        .collect();
    let mean_diff = mean(&diffs);
    let sd = sample_sd(&diffs);
    Ok(BlandAltmanResult {
        mean_diff,
        sd,
        lower: mean_diff - 1.96 * sd,
        upper: mean_diff + 1.96 * sd,
        points,
    })
}

/// One row of the long feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub participant_id: String,
    pub sensor: SensorKind,
    pub rep_index: usize,
    pub rep_start_s: f64,
    /// Values in [`Feature::ALL`] order.
    pub features: [f64; 6],
    pub flags: String,
}

impl LongRow {
    pub fn is_incomplete(&self) -> bool {
        self.flags.split(';').any(|f| f == "incomplete")
    }

    pub fn value(&self, feature: Feature) -> f64 {
        self.features[feature.index()]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LongTable {
    pub rows: Vec<LongRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMode {
    /// Z-scores over each sensor's values of one feature.
    #[default]
    PerSensor,
    /// Z-scores over the paired differences.
    PairDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgreementConfig {
    pub z_threshold: f64,
    pub outlier_mode: OutlierMode,
}

impl Default for AgreementConfig {
    fn default() -> Self {
        Self {
            z_threshold: 3.0,
            outlier_mode: OutlierMode::PerSensor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub feature: Feature,
    pub pair: String,
    pub n: usize,
    /// `None` when fewer than three pairs remain.
    pub icc_a1: Option<IccResult>,
    pub icc_c1: Option<IccResult>,
    pub bland_altman: Option<BlandAltmanResult>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub rows: Vec<AgreementRow>,
}

type RepKey = (String, usize);

/// Per-feature, per-pair ICC and Bland–Altman over matched repetitions.
///
/// Repetitions are paired by `(participant, rep_index)`. Rows flagged
/// incomplete are excluded. Pairs with fewer than three points are reported
/// without statistics.
pub fn agreement_table(table: &LongTable, cfg: &AgreementConfig) -> AgreementReport {
    if table.rows.is_empty() {
        return AgreementReport::default();
    }
    let mut by_sensor: BTreeMap<SensorKind, BTreeMap<RepKey, &LongRow>> = BTreeMap::new();
    for row in table.rows.iter().filter(|r| !r.is_incomplete()) {
        by_sensor
            .entry(row.sensor)
            .or_default()
            .insert((row.participant_id.clone(), row.rep_index), row);
    }
    let empty = BTreeMap::new();
    let mut rows = Vec::new();
    for feature in Feature::ALL {
        // Surviving keys per sensor after per-sensor outlier removal.
        let mut kept: BTreeMap<SensorKind, BTreeMap<&RepKey, f64>> = BTreeMap::new();
        for (sensor, recs) in &by_sensor {
            let keys: Vec<&RepKey> = recs.keys().collect();
            let vals: Vec<f64> = recs.values().map(|r| r.value(feature)).collect();
            let removed = match cfg.outlier_mode {
                OutlierMode::PerSensor => outlier_indices(&vals, cfg.z_threshold),
                OutlierMode::PairDifference => Vec::new(),
            };
            let m = keys
                .into_iter()
                .zip(vals)
                .enumerate()
                .filter(|(i, _)| removed.binary_search(i).is_err())
                .map(|(_, kv)| kv)
                .collect();
            kept.insert(*sensor, m);
        }
        for (sa, sb) in SENSOR_PAIRS {
            let ka = kept.get(&sa).unwrap_or(&empty);
            let kb = kept.get(&sb).unwrap_or(&empty);
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (key, va) in ka {
                if let Some(vb) = kb.get(key) {
                    a.push(*va);
                    b.push(*vb);
                }
            }
            if cfg.outlier_mode == OutlierMode::PairDifference {
                let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                let removed = outlier_indices(&d, cfg.z_threshold);
                let keep = |v: Vec<f64>| -> Vec<f64> {
                    v.into_iter()
                        .enumerate()
                        .filter(|(i, _)| removed.binary_search(i).is_err())
                        .map(|(_, x)| x)
                        .collect()
                };
                a = keep(a);
                b = keep(b);
            }
            let label = pair_label(sa, sb);
            let n = a.len();
            let sample = PairedSample::new(feature.name(), label.clone(), a, b);
            let (icc_a1, icc_c1, ba) = match sample {
                Ok(s) if n >= 3 => (
                    icc_two_way(&s, IccVariant::Absolute).ok(),
                    icc_two_way(&s, IccVariant::Consistency).ok(),
                    bland_altman(&s).ok(),
                ),
                _ => (None, None, None),
            };
            rows.push(AgreementRow {
                feature,
                pair: label,
                n,
                icc_a1,
                icc_c1,
                bland_altman: ba,
            });
        }
    }
    AgreementReport { rows }
}
