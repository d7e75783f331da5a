//! File formats: skeleton and gyro CSV, feature tables, reports.
//!
//! Floats are written with 9 significant digits and timestamps with
//! microsecond resolution, so files written by this module read back to the
//! same bytes when written again.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Result, StsError};
use crate::model::{
    validate_gyro, validate_series, GyroSample, GyroStream, JointId, Placement, SensorKind, SkeletonFrame,
    SkeletonSeries, Violation, JOINT_COUNT,
};
use crate::stats::{AgreementReport, BlandAltmanResult, LongRow, LongTable};
use crate::sts::{Feature, FeatureRecord};

pub const SKELETON_COLUMNS: usize = 1 + 3 * JOINT_COUNT;
pub const GYRO_HEADER: [&str; 4] = ["timestamp_s", "wx_dps", "wy_dps", "wz_dps"];

pub fn skeleton_header() -> Vec<String> {
    let mut h = vec!["timestamp_s".to_string()];
    for j in JointId::ALL {
        for axis in ["x", "y", "z"] {
            h.push(format!("{}_{axis}", j.name()));
        }
    }
    h
}

fn format_error(path: &Path, line: usize, message: impl Into<String>) -> StsError {
    StsError::Format {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> StsError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => StsError::io(path, source),
        other => format_error(path, line, format!("{other:?}")),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| StsError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| StsError::io(dir, e))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| StsError::io(path, e))?))
}

/// Reads a headed numeric CSV into rows of exactly `columns` values.
fn read_numeric<R: Read>(reader: R, source: &Path, columns: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    if header.len() != columns {
        return Err(format_error(
            source,
            1,
            format!("expected {columns} columns in header, found {}", header.len()),
        ));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != columns {
            return Err(format_error(
                source,
                line,
                format!("expected {columns} columns, found {}", record.len()),
            ));
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    format_error(
                        source,
                        line,
                        format!("column {} ({}): invalid number {field:?}", c + 1, &header[c]),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

/// Sample rate from the median timestamp step.
fn median_rate(source: &Path, timestamps: &[f64]) -> Result<f64> {
    if timestamps.len() < 2 {
        return Err(format_error(source, 0, "need at least two rows to infer the sample rate"));
    }
    let mut steps: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    steps.sort_by(f64::total_cmp);
    let step = steps[steps.len() / 2];
    if !(step > 0.0) {
        return Err(format_error(source, 0, "timestamps do not increase"));
    }
    // epoch timestamps carry ~0.2 µs of float resolution; snap near-integer rates
    let rate = 1.0 / step;
    Ok(if (rate - rate.round()).abs() < 1e-4 * rate { rate.round() } else { rate })
}

fn check_violations(source: &Path, lines: &[usize], violations: &[Violation]) -> Result<()> {
    match violations.first() {
        None => Ok(()),
        Some(v) => {
            let line = lines.get(v.frame).copied().unwrap_or(0);
            let more = if violations.len() > 1 {
                format!(" ({} more violations)", violations.len() - 1)
            } else {
                String::new()
            };
            Err(format_error(source, line, format!("{}{more}", v.rule)))
        }
    }
}

pub fn parse_skeleton_csv<R: Read>(reader: R, source: &Path, sensor: SensorKind) -> Result<SkeletonSeries> {
    let rows = read_numeric(reader, source, SKELETON_COLUMNS)?;
    let lines: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let frames: Vec<SkeletonFrame> = rows
        .into_iter()
        .map(|(_, v)| SkeletonFrame {
            timestamp: v[0],
            positions: std::array::from_fn(|j| Vector3::new(v[1 + 3 * j], v[2 + 3 * j], v[3 + 3 * j])),
        })
        .collect();
    let timestamps: Vec<f64> = frames.iter().map(|f| f.timestamp).collect();
    let series = SkeletonSeries {
        rate_hz: median_rate(source, &timestamps)?,
        frames,
        sensor,
    };
    check_violations(source, &lines, &validate_series(&series))?;
    Ok(series)
}

/// Reads `radar.csv` or `kinect.csv`; the sensor comes from the file stem.
pub fn read_skeleton_csv(path: &Path) -> Result<SkeletonSeries> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let sensor = match SensorKind::parse(stem) {
        Some(k @ (SensorKind::Radar | SensorKind::Kinect)) => k,
        _ => {
            return Err(StsError::param(format!(
                "{}: skeleton files must be named radar.csv or kinect.csv",
                path.display()
            )))
        }
    };
    parse_skeleton_csv(open(path)?, path, sensor)
}

pub fn write_skeleton_csv<W: Write>(w: W, series: &SkeletonSeries) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let sink = Path::new("<skeleton>");
    out.write_record(skeleton_header()).map_err(|e| csv_error(sink, e))?;
    for f in &series.frames {
        let mut rec = Vec::with_capacity(SKELETON_COLUMNS);
        rec.push(format_timestamp(f.timestamp));
        for p in &f.positions {
            rec.extend([format_float(p.x), format_float(p.y), format_float(p.z)]);
        }
        out.write_record(rec).map_err(|e| csv_error(sink, e))?;
    }
    out.flush().map_err(|e| StsError::io(sink, e))
}

pub fn save_skeleton_csv(path: &Path, series: &SkeletonSeries) -> Result<()> {
    write_skeleton_csv(create(path)?, series)
}

pub fn parse_gyro_csv<R: Read>(reader: R, source: &Path, placement: Placement) -> Result<GyroStream> {
    let rows = read_numeric(reader, source, GYRO_HEADER.len())?;
    let lines: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let samples: Vec<GyroSample> = rows
        .into_iter()
        .map(|(_, v)| GyroSample {
            timestamp: v[0],
            omega: [v[1], v[2], v[3]],
        })
        .collect();
    let timestamps: Vec<f64> = samples.iter().map(|s| s.timestamp).collect();
    let stream = GyroStream {
        placement,
        rate_hz: median_rate(source, &timestamps)?,
        samples,
    };
    check_violations(source, &lines, &validate_gyro(&stream))?;
    Ok(stream)
}

/// Reads a gyro file; the placement comes from the file stem (`waist`,
/// `thigh_l`, ...).
pub fn read_gyro_csv(path: &Path) -> Result<GyroStream> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let placement = Placement::from_file_stem(stem).ok_or_else(|| {
        StsError::param(format!("{}: unknown gyro placement {stem:?}", path.display()))
    })?;
    parse_gyro_csv(open(path)?, path, placement)
}

pub fn write_gyro_csv<W: Write>(w: W, stream: &GyroStream) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let sink = Path::new("<gyro>");
    out.write_record(GYRO_HEADER).map_err(|e| csv_error(sink, e))?;
    for s in &stream.samples {
        out.write_record([
            format_timestamp(s.timestamp),
            format_float(s.omega[0]),
            format_float(s.omega[1]),
            format_float(s.omega[2]),
        ])
        .map_err(|e| csv_error(sink, e))?;
    }
    out.flush().map_err(|e| StsError::io(sink, e))
}

pub fn save_gyro_csv(path: &Path, stream: &GyroStream) -> Result<()> {
    write_gyro_csv(create(path)?, stream)
}

fn optional(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn feature_field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format_float(v)
    }
}

pub fn feature_header() -> Vec<&'static str> {
    let mut h = vec!["participant_id", "sensor", "rep_start_s"];
    h.extend(Feature::ALL.iter().map(|f| f.column()));
    h.push("flags");
    h
}

/// Per-sensor feature file; missing velocity peaks are empty fields.
pub fn write_features_csv<W: Write>(w: W, participant: &str, records: &[FeatureRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let sink = Path::new("<features>");
    out.write_record(feature_header()).map_err(|e| csv_error(sink, e))?;
    for r in records {
        let mut rec = vec![
            participant.to_string(),
            r.sensor.name().to_string(),
            format_timestamp(r.rep_start_s),
        ];
        rec.extend(r.values().iter().map(|&v| feature_field(v)));
        rec.push(r.flags.join(";"));
        out.write_record(rec).map_err(|e| csv_error(sink, e))?;
    }
    out.flush().map_err(|e| StsError::io(sink, e))
}

pub fn long_table_header() -> Vec<&'static str> {
    let mut h = vec!["participant_id", "sensor", "rep_index", "rep_start_s"];
    h.extend(Feature::ALL.iter().map(|f| f.column()));
    h.push("flags");
    h
}

pub fn write_long_table<W: Write>(w: W, table: &LongTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let sink = Path::new("<long table>");
    out.write_record(long_table_header()).map_err(|e| csv_error(sink, e))?;
    for r in &table.rows {
        let mut rec = vec![
            r.participant_id.clone(),
            r.sensor.name().to_string(),
            r.rep_index.to_string(),
            format_timestamp(r.rep_start_s),
        ];
        rec.extend(r.features.iter().map(|&v| feature_field(v)));
        rec.push(r.flags.clone());
        out.write_record(rec).map_err(|e| csv_error(sink, e))?;
    }
    out.flush().map_err(|e| StsError::io(sink, e))
}

pub fn parse_long_table<R: Read>(reader: R, source: &Path) -> Result<LongTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let expected = long_table_header();
    if header.iter().ne(expected.iter().copied()) {
        return Err(format_error(source, 1, format!("expected header {}", expected.join(","))));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(source, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let number = |c: usize| -> Result<f64> {
            let field = &record[c];
            if field.is_empty() {
                return Ok(f64::NAN);
            }
            field.parse().map_err(|_| {
                format_error(source, line, format!("column {} ({}): invalid number {field:?}", c + 1, expected[c]))
            })
        };
        let sensor = SensorKind::parse(&record[1])
            .ok_or_else(|| format_error(source, line, format!("column 2 (sensor): unknown sensor {:?}", &record[1])))?;
        let rep_index = record[2]
            .parse()
            .map_err(|_| format_error(source, line, format!("column 3 (rep_index): invalid index {:?}", &record[2])))?;
        let mut features = [0.0; 6];
        for (i, f) in features.iter_mut().enumerate() {
            *f = number(4 + i)?;
        }
        rows.push(LongRow {
            participant_id: record[0].to_string(),
            sensor,
            rep_index,
            rep_start_s: number(3)?,
            features,
            flags: record[10].to_string(),
        });
    }
    Ok(LongTable { rows })
}

pub fn read_long_table(path: &Path) -> Result<LongTable> {
    parse_long_table(open(path)?, path)
}

pub const REPORT_HEADER: [&str; 8] = [
    "feature",
    "pair",
    "n",
    "icc_a1",
    "icc_c1",
    "mean_diff",
    "loa_low",
    "loa_high",
];

/// Agreement report; statistics that could not be computed are empty.
pub fn write_report_csv<W: Write>(w: W, report: &AgreementReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let sink = Path::new("<report>");
    out.write_record(REPORT_HEADER).map_err(|e| csv_error(sink, e))?;
    for r in &report.rows {
        let ba = r.bland_altman.as_ref();
        out.write_record([
            r.feature.name().to_string(),
            r.pair.clone(),
            r.n.to_string(),
            optional(r.icc_a1.as_ref().map(|i| i.icc)),
            optional(r.icc_c1.as_ref().map(|i| i.icc)),
            optional(ba.map(|b| b.mean_diff)),
            optional(ba.map(|b| b.lower)),
            optional(ba.map(|b| b.upper)),
        ])
        .map_err(|e| csv_error(sink, e))?;
    }
    out.flush().map_err(|e| StsError::io(sink, e))
}

/// Bland–Altman plot data: three `#` header constants, then one
/// `mean,diff` row per pair.
pub fn write_bland_altman_csv<W: Write>(mut w: W, ba: &BlandAltmanResult) -> Result<()> {
    let sink = Path::new("<bland-altman>");
    let mut body = String::new();
    body.push_str(&format!("# mean_diff,{}\n", format_float(ba.mean_diff)));
    body.push_str(&format!("# loa_low,{}\n", format_float(ba.lower)));
    body.push_str(&format!("# loa_high,{}\n", format_float(ba.upper)));
    body.push_str("mean,diff\n");
    for &(m, d) in &ba.points {
        body.push_str(&format!("{},{}\n", format_float(m), format_float(d)));
    }
    w.write_all(body.as_bytes()).map_err(|e| StsError::io(sink, e))
}

/// Scatter of differences against means with a solid red mean line and
/// dashed black limits of agreement.
pub fn bland_altman_svg(ba: &BlandAltmanResult, title: &str) -> String {
    let (width, height, margin) = (640.0, 420.0, 60.0);
    let xs = ba.points.iter().map(|p| p.0);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    let ys = ba.points.iter().map(|p| p.1).chain([ba.lower, ba.upper, ba.mean_diff]);
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let pad = |lo: f64, hi: f64| {
        let span = if hi - lo > 1e-12 { hi - lo } else { lo.abs().max(1.0) };
        (lo - 0.1 * span, hi + 0.1 * span)
    };
    (x0, x1) = pad(x0, x1);
    (y0, y1) = pad(y0, y1);
    let px = |x: f64| margin + (x - x0) / (x1 - x0) * (width - 2.0 * margin);
    let py = |y: f64| height - margin - (y - y0) / (y1 - y0) * (height - 2.0 * margin);
    let f = |v: f64| format!("{v:.2}");

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        width / 2.0,
        xml_escape(title)
    ));
    svg.push_str(&format!(
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n",
        width - 2.0 * margin,
        height - 2.0 * margin
    ));
    let hline = |y: f64, color: &str, dash: &str, label: &str| {
        format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{label} {}</text>\n",
            f(margin),
            f(py(y)),
            f(width - margin),
            f(py(y)),
            f(width - margin - 110.0),
            f(py(y) - 4.0),
            format_float(y)
        )
    };
    svg.push_str(&hline(ba.mean_diff, "red", "", "mean"));
    svg.push_str(&hline(ba.upper, "black", " stroke-dasharray=\"6 4\"", "+1.96 sd"));
    svg.push_str(&hline(ba.lower, "black", " stroke-dasharray=\"6 4\"", "-1.96 sd"));
    for &(m, d) in &ba.points {
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"steelblue\"/>\n",
            f(px(m)),
            f(py(d))
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">mean of pair</text>\n",
        width / 2.0,
        height - 20.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" transform=\"rotate(-90 18 {})\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">difference</text>\n",
        height / 2.0,
        height / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn save_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(path)?;
    write(&mut w)?;
    w.flush().map_err(|e| StsError::io(path, e))
}

/// Formats a float with 9 significant digits, `%g` style: trailing zeros are
/// dropped and very small or large magnitudes switch to exponent notation.
pub fn format_float(x: f64) -> String {
    format_sig(x, 9)
}

/// Timestamps keep microsecond resolution regardless of magnitude.
pub fn format_timestamp(t: f64) -> String {
    trim_fraction(format!("{t:.6}"))
}

fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // rounding first fixes the exponent (9.9999999996 -> 1.00000000e1)
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_fraction(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    }
}

fn trim_fraction(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{bland_altman, PairedSample};
    use crate::synth::{generate, SynthConfig};

    fn recording() -> crate::synth::Recording {
        generate(&SynthConfig {
            repetitions: 1,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn to_string<F: FnOnce(&mut Vec<u8>) -> Result<()>>(f: F) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn skeleton_csv_round_trips() {
        let rec = recording();
        let text = to_string(|b| write_skeleton_csv(b, &rec.radar));
        assert_eq!(text.lines().next().unwrap().split(',').count(), 52);
        let back = parse_skeleton_csv(text.as_bytes(), Path::new("radar.csv"), SensorKind::Radar).unwrap();
        assert_eq!(back.len(), rec.radar.len());
        assert_eq!(back.rate_hz, rec.radar.rate_hz);
        for (a, b) in back.frames.iter().zip(&rec.radar.frames) {
            assert!((a.timestamp - b.timestamp).abs() < 1e-6);
            for (p, q) in a.positions.iter().zip(&b.positions) {
                assert!((p - q).norm() < 1e-8);
            }
        }
        assert_eq!(to_string(|b| write_skeleton_csv(b, &back)), text);
    }

    #[test]
    fn short_row_names_line_and_count() {
        let rec = recording();
        let text = to_string(|b| write_skeleton_csv(b, &rec.kinect));
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let cut: Vec<&str> = lines[16].split(',').take(50).collect();
        lines[16] = cut.join(",");
        let err = parse_skeleton_csv(lines.join("\n").as_bytes(), Path::new("kinect.csv"), SensorKind::Kinect)
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 17: expected 52 columns"), "{err}");
    }

    #[test]
    fn bad_number_names_column() {
        let text = "timestamp_s,wx_dps,wy_dps,wz_dps\n0,1,2,3\n0.01,1,abc,3\n";
        let err = parse_gyro_csv(text.as_bytes(), Path::new("waist.csv"), Placement::Waist)
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("column 3 (wy_dps)"), "{err}");
    }

    #[test]
    fn non_monotonic_time_is_reported_with_line() {
        let text = "timestamp_s,wx_dps,wy_dps,wz_dps\n0,1,2,3\n0.01,1,2,3\n0.005,1,2,3\n0.02,0,0,0\n";
        let err = parse_gyro_csv(text.as_bytes(), Path::new("waist.csv"), Placement::Waist)
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 4: monotonic-time"), "{err}");
    }

    #[test]
    fn gyro_csv_round_trips() {
        let rec = recording();
        for g in &rec.gyros {
            let text = to_string(|b| write_gyro_csv(b, g));
            let back = parse_gyro_csv(text.as_bytes(), Path::new("x.csv"), g.placement).unwrap();
            assert_eq!(back.rate_hz, 100.0);
            assert_eq!(back.len(), g.len());
            assert_eq!(to_string(|b| write_gyro_csv(b, &back)), text);
        }
    }

    #[test]
    fn file_stems_select_sensor_and_placement() {
        let dir = tempfile::tempdir().unwrap();
        let rec = recording();
        save_skeleton_csv(&dir.path().join("kinect.csv"), &rec.kinect).unwrap();
        save_gyro_csv(&dir.path().join("thigh_r.csv"), &rec.gyros[2]).unwrap();
        assert_eq!(read_skeleton_csv(&dir.path().join("kinect.csv")).unwrap().sensor, SensorKind::Kinect);
        assert_eq!(read_gyro_csv(&dir.path().join("thigh_r.csv")).unwrap().placement, Placement::ThighRight);
        std::fs::copy(dir.path().join("kinect.csv"), dir.path().join("camera.csv")).unwrap();
        assert!(read_skeleton_csv(&dir.path().join("camera.csv")).is_err());
        assert!(read_gyro_csv(&dir.path().join("waist.csv")).is_err());
    }

    #[test]
    fn long_table_round_trips_with_missing_values() {
        let table = LongTable {
            rows: vec![
                LongRow {
                    participant_id: "P01".into(),
                    sensor: SensorKind::Radar,
                    rep_index: 0,
                    rep_start_s: 1700000003.25,
                    features: [2.2, 40.1, 62.8, 52.3, 129.5, 89.9],
                    flags: String::new(),
                },
                LongRow {
                    participant_id: "P01".into(),
                    sensor: SensorKind::Wearable,
                    rep_index: 0,
                    rep_start_s: 1700000003.3,
                    features: [2.2, 40.1, f64::NAN, 52.3, 129.5, 89.9],
                    flags: "incomplete".into(),
                },
            ],
        };
        let text = to_string(|b| write_long_table(b, &table));
        assert!(text.contains("1700000003.3,2.2,40.1,,52.3"));
        let back = parse_long_table(text.as_bytes(), Path::new("long.csv")).unwrap();
        assert!(back.rows[1].features[2].is_nan());
        assert!(back.rows[1].is_incomplete());
        assert_eq!(to_string(|b| write_long_table(b, &back)), text);
    }

    #[test]
    fn bland_altman_plot_data_layout() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.5 * (x * 1.7).sin()).collect();
        let ba = bland_altman(&PairedSample::new("Duration", "K-R", a, b).unwrap()).unwrap();
        let text = to_string(|w| write_bland_altman_csv(w, &ba));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.iter().filter(|l| l.starts_with('#')).count(), 3);
        assert_eq!(lines[3], "mean,diff");
        assert_eq!(lines.len() - 4, 10);

        let svg = bland_altman_svg(&ba, "Duration K-R");
        assert_eq!(svg.matches("<circle").count(), 10);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(svg.contains("stroke=\"red\""));
    }

    #[test]
    fn zero_spread_limits_coincide() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let ba = bland_altman(&PairedSample::new("Duration", "K-R", a.clone(), a).unwrap()).unwrap();
        let text = to_string(|w| write_bland_altman_csv(w, &ba));
        assert!(text.starts_with("# mean_diff,0\n# loa_low,0\n# loa_high,0\n"));
        assert!(bland_altman_svg(&ba, "t").contains("</svg>"));
    }

    #[test]
    fn float_format_matches_printf_g() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(-2.5), "-2.5");
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333");
        assert_eq!(format_float(123456.789012), "123456.789");
        assert_eq!(format_float(9.9999999996), "10");
        assert_eq!(format_float(1.5e-7), "1.5e-07");
        assert_eq!(format_float(0.0001), "0.0001");
        assert_eq!(format_float(1.0e9), "1e+09");
        assert_eq!(format_float(123456789.0), "123456789");
        assert_eq!(format_float(-1.0e-300), "-1e-300");
    }

    #[test]
    fn timestamps_keep_microseconds() {
        assert_eq!(format_timestamp(1700000000.123456), "1700000000.123456");
        assert_eq!(format_timestamp(1700000000.5), "1700000000.5");
        assert_eq!(format_timestamp(12.0), "12");
    }

    #[test]
    fn formatted_floats_parse_back_to_nine_digits() {
        for &x in &[std::f64::consts::PI, -0.000123456789123, 6.02214076e23, 42.0] {
            let y: f64 = format_float(x).parse().unwrap();
            assert!(((y - x) / x).abs() < 5e-9, "{x} -> {y}");
        }
    }
}
