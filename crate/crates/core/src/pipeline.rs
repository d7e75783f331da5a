//! Batch driver: ingest participant folders, align wearables, segment,
//! extract and match features, then aggregate agreement statistics.
//!
//! Input layout, one folder per participant:
//!
//! ```text
//! <input>/<participant>/radar.csv
//! <input>/<participant>/kinect.csv
//! <input>/<participant>/{waist,thigh_l,thigh_r,shank_l,shank_r}.csv
//! <input>/<participant>/meta.json      (optional)
//! ```
//!
//! `meta.json` may carry `wearable_file_mtime_s`; when present the wearable
//! time axes are rebuilt from it and the CSV timestamps are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{condition, detrend_linear, resample_linear, ConditioningConfig, UniformSignal};
use crate::error::{Result, StsError};
use crate::io;
use crate::model::{GyroStream, Placement, SensorKind, SkeletonSeries};
use crate::stats::{agreement_table, AgreementConfig, AgreementReport, IccVariant, LongRow, LongTable};
use crate::sts::{
    derive_signals_skeleton, derive_signals_wearable, extract_features, match_repetitions, segment_pitches_skeleton,
    segment_pitches_wearable, segment_sts, AnalysisSignals, FeatureRecord, MatchedTriple, SegmentationParams,
};
use crate::sync::{check_reversal, estimate_lag, reconstruct_wearable_times, SyncConfig, SyncResult, TimeBase};
use crate::synth::Recording;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub skeleton_conditioning: ConditioningConfig,
    pub wearable_conditioning: ConditioningConfig,
    pub segmentation: SegmentationParams,
    pub sync: SyncConfig,
    pub match_tolerance_s: f64,
    /// Variant shown in the console summary and `agreement.json`; the CSV
    /// report always lists both.
    pub icc_variant: IccVariant,
    pub agreement: AgreementConfig,
    pub write_svg: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            skeleton_conditioning: ConditioningConfig::skeleton_default(),
            wearable_conditioning: ConditioningConfig::wearable_default(),
            segmentation: SegmentationParams::default(),
            sync: SyncConfig::default(),
            match_tolerance_s: 0.5,
            icc_variant: IccVariant::default(),
            agreement: AgreementConfig::default(),
            write_svg: true,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.match_tolerance_s > 0.0) {
            return Err(StsError::param(format!(
                "match tolerance must be positive, got {}",
                self.match_tolerance_s
            )));
        }
        if !(self.sync.grid_hz > 0.0 && self.sync.max_lag_s > 0.0 && self.sync.min_overlap_s > 0.0) {
            return Err(StsError::param("sync grid rate, max lag and overlap must be positive"));
        }
        if !(self.agreement.z_threshold > 0.0) {
            return Err(StsError::param("outlier z threshold must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticipantMeta {
    pub wearable_file_mtime_s: Option<f64>,
}

/// Everything needed to process one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantData {
    pub id: String,
    pub radar: SkeletonSeries,
    pub kinect: SkeletonSeries,
    pub gyros: Vec<GyroStream>,
    pub meta: ParticipantMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementCheck {
    pub placement: Placement,
    pub rho: f64,
    pub flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub lag_s: f64,
    pub peak_rho: f64,
    pub common_range: (f64, f64),
    pub anticorrelated: bool,
    pub reversal: Vec<PlacementCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantResult {
    pub id: String,
    pub sync: SyncReport,
    pub radar: Vec<FeatureRecord>,
    pub kinect: Vec<FeatureRecord>,
    pub wearable: Vec<FeatureRecord>,
    pub matched: Vec<MatchedTriple>,
    pub flags: Vec<String>,
}

impl ParticipantResult {
    pub fn records(&self, sensor: SensorKind) -> &[FeatureRecord] {
        match sensor {
            SensorKind::Radar => &self.radar,
            SensorKind::Kinect => &self.kinect,
            SensorKind::Wearable => &self.wearable,
        }
    }

    /// One row per sensor per matched repetition.
    pub fn long_rows(&self) -> Vec<LongRow> {
        let mut rows = Vec::with_capacity(3 * self.matched.len());
        for (rep, t) in self.matched.iter().enumerate() {
            for (sensor, idx) in [
                (SensorKind::Radar, t.radar),
                (SensorKind::Kinect, t.kinect),
                (SensorKind::Wearable, t.wearable),
            ] {
                let r = &self.records(sensor)[idx];
                rows.push(LongRow {
                    participant_id: self.id.clone(),
                    sensor,
                    rep_index: rep,
                    rep_start_s: r.rep_start_s,
                    features: r.values(),
                    flags: r.flags.join(";"),
                });
            }
        }
        rows
    }
}

pub fn load_participant(dir: &Path) -> Result<ParticipantData> {
    let id = dir
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| StsError::param(format!("{}: not a participant folder", dir.display())))?
        .to_string();
    let radar = io::read_skeleton_csv(&dir.join("radar.csv"))?;
    let kinect = io::read_skeleton_csv(&dir.join("kinect.csv"))?;
    let gyros = Placement::ALL
        .iter()
        .map(|p| io::read_gyro_csv(&dir.join(format!("{}.csv", p.file_stem()))))
        .collect::<Result<Vec<_>>>()?;
    let meta_path = dir.join("meta.json");
    let meta = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(|e| StsError::io(&meta_path, e))?;
        serde_json::from_str(&text)?
    } else {
        ParticipantMeta::default()
    };
    Ok(ParticipantData {
        id,
        radar,
        kinect,
        gyros,
        meta,
    })
}

/// Rewrites gyro timestamps on a uniform grid ending at the file mtime.
fn rebuild_wearable_times(gyros: &mut [GyroStream], mtime: f64) -> Result<()> {
    for g in gyros {
        let base = reconstruct_wearable_times(mtime, g.len(), g.rate_hz)?;
        for (i, s) in g.samples.iter_mut().enumerate() {
            s.timestamp = base.time(i);
        }
    }
    Ok(())
}

fn shift_gyros(gyros: &mut [GyroStream], by: f64) {
    for g in gyros {
        for s in &mut g.samples {
            s.timestamp += by;
        }
    }
}

/// Resamples onto a grid at `hz` covering the signal.
fn regrid(sig: &UniformSignal, hz: f64) -> Result<UniformSignal> {
    let base = TimeBase::covering(sig.start, sig.end(), 1.0 / hz)?;
    resample_linear(sig, &base)
}

/// Flips wearable streams whose segment pitch anticorrelates with the radar
/// skeleton's pitch of the same segment.
fn correct_reversals(
    radar: &SkeletonSeries,
    gyros: &mut [GyroStream],
    cfg: &PipelineConfig,
) -> Result<Vec<PlacementCheck>> {
    let reference = segment_pitches_skeleton(radar)?;
    let worn = segment_pitches_wearable(gyros)?;
    let lowpass = ConditioningConfig {
        detrend: true,
        whittaker_lambda: 0.0,
        ..cfg.skeleton_conditioning
    };
    let mut checks = Vec::with_capacity(Placement::ALL.len());
    for p in Placement::ALL {
        let a = regrid(&condition(reference.get(p), &lowpass)?, cfg.sync.grid_hz)?;
        let b = regrid(&detrend_linear(worn.get(p)), cfg.sync.grid_hz)?;
        let r = check_reversal(&a, &b, &cfg.sync)?;
        if r.flipped {
            warn!("{p} sensor appears reversed (rho = {:.3}); flipping its sign", r.rho);
            for g in gyros.iter_mut().filter(|g| g.placement == p) {
                for s in &mut g.samples {
                    s.omega = s.omega.map(|w| -w);
                }
            }
        }
        checks.push(PlacementCheck {
            placement: p,
            rho: r.rho,
            flipped: r.flipped,
        });
    }
    Ok(checks)
}

/// Wearable-to-radar lag from the knee angle on the common grid.
fn knee_lag(radar: &AnalysisSignals, wearable: &AnalysisSignals, cfg: &SyncConfig) -> Result<SyncResult> {
    let a = regrid(&radar.knee, cfg.grid_hz)?;
    let b = regrid(&wearable.knee, cfg.grid_hz)?;
    estimate_lag(&a, &b, cfg.max_lag_s, cfg.min_overlap_s)
}

fn features(signals: &AnalysisSignals, params: &SegmentationParams) -> Vec<FeatureRecord> {
    segment_sts(signals, params)
        .iter()
        .map(|rep| extract_features(rep, signals, params))
        .collect()
}

pub fn process_participant(data: &ParticipantData, cfg: &PipelineConfig) -> Result<ParticipantResult> {
    let mut gyros = data.gyros.clone();
    if let Some(mtime) = data.meta.wearable_file_mtime_s {
        rebuild_wearable_times(&mut gyros, mtime)?;
    }
    let reversal = correct_reversals(&data.radar, &mut gyros, cfg)?;

    let radar = derive_signals_skeleton(&data.radar, &cfg.skeleton_conditioning)?;
    let kinect = derive_signals_skeleton(&data.kinect, &cfg.skeleton_conditioning)?;
    let unaligned = derive_signals_wearable(&gyros, &cfg.wearable_conditioning)?;
    let sync = knee_lag(&radar, &unaligned, &cfg.sync)?;
    shift_gyros(&mut gyros, -sync.lag_s);
    let wearable = derive_signals_wearable(&gyros, &cfg.wearable_conditioning)?;

    let mut flags: Vec<String> = Vec::new();
    for s in [&radar, &kinect, &wearable] {
        flags.extend(s.flags.iter().map(|f| format!("{}:{f}", s.sensor)));
    }
    if sync.anticorrelated {
        flags.push("sync:anticorrelated".into());
    }
    for c in reversal.iter().filter(|c| c.flipped) {
        flags.push(format!("reversed:{}", c.placement));
    }

    let params = &cfg.segmentation;
    let (fr, fk, fw) = (features(&radar, params), features(&kinect, params), features(&wearable, params));
    let matched = match_repetitions(&fr, &fk, &fw, cfg.match_tolerance_s);
    info!(
        "{}: lag {:.3} s, reps radar/kinect/wearable {}/{}/{}, matched {}",
        data.id,
        sync.lag_s,
        fr.len(),
        fk.len(),
        fw.len(),
        matched.len()
    );
    Ok(ParticipantResult {
        id: data.id.clone(),
        sync: SyncReport {
            lag_s: sync.lag_s,
            peak_rho: sync.peak_rho,
            common_range: sync.common_range,
            anticorrelated: sync.anticorrelated,
            reversal,
        },
        radar: fr,
        kinect: fk,
        wearable: fw,
        matched,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantOutcome {
    pub id: String,
    pub matched: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub participants: Vec<ParticipantOutcome>,
    pub long_table_rows: usize,
}

impl PipelineSummary {
    pub fn succeeded(&self) -> usize {
        self.participants.iter().filter(|p| p.error.is_none()).count()
    }
}

/// Participant folders under `input`, sorted by name.
pub fn participant_dirs(input: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(input).map_err(|e| StsError::io(input, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| StsError::io(input, e))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(StsError::param(format!(
            "no participant folders found in {}",
            input.display()
        )));
    }
    Ok(dirs)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    io::save_with(path, |w| w.write_all(text.as_bytes()).map_err(|e| StsError::io(path, e)))
}

fn write_participant_outputs(dir: &Path, result: &ParticipantResult) -> Result<()> {
    for sensor in SensorKind::ALL {
        let path = dir.join(format!("features_{sensor}.csv"));
        io::save_with(&path, |w| io::write_features_csv(w, &result.id, result.records(sensor)))?;
    }
    #[derive(Serialize)]
    struct Report<'a> {
        id: &'a str,
        sync: &'a SyncReport,
        repetitions: BTreeMap<&'static str, usize>,
        matched: usize,
        flags: &'a [String],
    }
    let repetitions = SensorKind::ALL
        .iter()
        .map(|&s| (s.name(), result.records(s).len()))
        .collect();
    write_json(
        &dir.join("report.json"),
        &Report {
            id: &result.id,
            sync: &result.sync,
            repetitions,
            matched: result.matched.len(),
            flags: &result.flags,
        },
    )
}

/// Agreement CSV, JSON summary and Bland–Altman plot data for a long table.
pub fn write_agreement_outputs(dir: &Path, report: &AgreementReport, variant: IccVariant, svg: bool) -> Result<()> {
    io::save_with(&dir.join("agreement.csv"), |w| io::write_report_csv(w, report))?;
    #[derive(Serialize)]
    struct Row<'a> {
        feature: &'a str,
        pair: &'a str,
        n: usize,
        icc: Option<f64>,
        degenerate: bool,
    }
    let rows: Vec<Row> = report
        .rows
        .iter()
        .map(|r| {
            let icc = match variant {
                IccVariant::Absolute => r.icc_a1.as_ref(),
                IccVariant::Consistency => r.icc_c1.as_ref(),
            };
            Row {
                feature: r.feature.name(),
                pair: &r.pair,
                n: r.n,
                icc: icc.map(|i| i.icc),
                degenerate: icc.is_some_and(|i| i.degenerate),
            }
        })
        .collect();
    #[derive(Serialize)]
    struct Agreement<'a> {
        variant: String,
        rows: Vec<Row<'a>>,
    }
    write_json(
        &dir.join("agreement.json"),
        &Agreement {
            variant: variant.to_string(),
            rows,
        },
    )?;
    let plots = dir.join("bland_altman");
    for r in &report.rows {
        let Some(ba) = &r.bland_altman else { continue };
        let stem = format!("{}_{}", r.feature.name(), r.pair);
        io::save_with(&plots.join(format!("{stem}.csv")), |w| io::write_bland_altman_csv(w, ba))?;
        if svg {
            let title = format!("{} {}", r.feature.name(), r.pair);
            let text = io::bland_altman_svg(ba, &title);
            let path = plots.join(format!("{stem}.svg"));
            io::save_with(&path, |w| w.write_all(text.as_bytes()).map_err(|e| StsError::io(&path, e)))?;
        }
    }
    Ok(())
}

/// Runs every participant folder in parallel, then aggregates.
///
/// Participant failures are logged and recorded in the summary; the run
/// fails only if the input folder is unusable or no participant succeeds.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    cfg.validate()?;
    let dirs = participant_dirs(&cfg.input_dir)?;
    let results: Vec<(String, Result<ParticipantResult>)> = dirs
        .par_iter()
        .map(|dir| {
            let id = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let res = load_participant(dir)
                .and_then(|data| process_participant(&data, cfg))
                .and_then(|r| {
                    write_participant_outputs(&cfg.output_dir.join(&r.id), &r)?;
                    Ok(r)
                });
            (id, res)
        })
        .collect();

    let mut table = LongTable::default();
    let mut outcomes = Vec::with_capacity(results.len());
    for (id, res) in results {
        match res {
            Ok(r) => {
                table.rows.extend(r.long_rows());
                outcomes.push(ParticipantOutcome {
                    id,
                    matched: Some(r.matched.len()),
                    error: None,
                });
            }
            Err(e) => {
                warn!("{id}: skipped: {e}");
                outcomes.push(ParticipantOutcome {
                    id,
                    matched: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let summary = PipelineSummary {
        long_table_rows: table.rows.len(),
        participants: outcomes,
    };
    write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    if summary.succeeded() == 0 {
        return Err(StsError::param(format!(
            "no participant in {} could be processed",
            cfg.input_dir.display()
        )));
    }
    io::save_with(&cfg.output_dir.join("long_table.csv"), |w| io::write_long_table(w, &table))?;
    let report = agreement_table(&table, &cfg.agreement);
    write_agreement_outputs(&cfg.output_dir, &report, cfg.icc_variant, cfg.write_svg)?;
    Ok(summary)
}

/// Writes a synthetic recording in the pipeline's input layout, plus its
/// ground truth as `truth.json`.
pub fn write_recording(dir: &Path, rec: &Recording) -> Result<()> {
    io::save_skeleton_csv(&dir.join("radar.csv"), &rec.radar)?;
    io::save_skeleton_csv(&dir.join("kinect.csv"), &rec.kinect)?;
    for g in &rec.gyros {
        io::save_gyro_csv(&dir.join(format!("{}.csv", g.placement.file_stem())), g)?;
    }
    write_json(
        &dir.join("meta.json"),
        &ParticipantMeta {
            wearable_file_mtime_s: Some(rec.wearable_mtime_s),
        },
    )?;
    write_json(&dir.join("truth.json"), &rec.truth)
}

pub fn write_dataset(dir: &Path, recordings: &[(String, Recording)]) -> Result<()> {
    recordings
        .par_iter()
        .map(|(id, rec)| write_recording(&dir.join(id), rec))
        .collect::<Result<Vec<()>>>()?;
    Ok(())
}
