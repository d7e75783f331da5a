use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sts_core::io;
use sts_core::model::{Placement, SensorKind};
use sts_core::pipeline::{run_pipeline, write_dataset, PipelineConfig};
use sts_core::synth::{generate_dataset, SynthConfig};

fn dataset(dir: &Path, participants: usize) {
    let recs = generate_dataset(&SynthConfig::default(), participants).unwrap();
    write_dataset(dir, &recs).unwrap();
}

fn config(input: &Path, output: &Path) -> PipelineConfig {
    PipelineConfig {
        input_dir: input.to_path_buf(),
        output_dir: output.to_path_buf(),
        ..PipelineConfig::default()
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

#[test]
fn three_participants_give_equal_rep_counts_per_sensor() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, output) = (tmp.path().join("in"), tmp.path().join("out"));
    dataset(&input, 3);
    let summary = run_pipeline(&config(&input, &output)).unwrap();
    assert_eq!(summary.succeeded(), 3);

    let table = io::read_long_table(&output.join("long_table.csv")).unwrap();
    let mut counts: BTreeMap<(String, SensorKind), usize> = BTreeMap::new();
    for r in &table.rows {
        *counts.entry((r.participant_id.clone(), r.sensor)).or_default() += 1;
    }
    for pid in ["P01", "P02", "P03"] {
        let c: Vec<usize> = SensorKind::ALL.iter().map(|&s| counts[&(pid.to_string(), s)]).collect();
        assert!(c.iter().all(|&n| n == c[0] && n == 5), "{pid}: {c:?}");
    }
    assert!(output.join("agreement.csv").exists());
    assert!(output.join("bland_altman/Duration_K-R.csv").exists());
    assert!(output.join("bland_altman/KneeROM_R-W.svg").exists());
    assert!(output.join("P02/features_wearable.csv").exists());
    assert!(output.join("P02/report.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    dataset(&input, 2);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_pipeline(&config(&input, &a)).unwrap();
    run_pipeline(&config(&input, &b)).unwrap();
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.len() > 10);
    assert_eq!(fa, fb);
}

#[test]
fn empty_input_folder_is_an_error_naming_it() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("nothing_here");
    fs::create_dir_all(&input).unwrap();
    let err = run_pipeline(&config(&input, &tmp.path().join("out"))).unwrap_err().to_string();
    assert!(err.contains("nothing_here"), "{err}");
}

#[test]
fn broken_participant_is_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, output) = (tmp.path().join("in"), tmp.path().join("out"));
    dataset(&input, 2);
    fs::remove_file(input.join("P02/thigh_l.csv")).unwrap();
    let summary = run_pipeline(&config(&input, &output)).unwrap();
    assert_eq!(summary.succeeded(), 1);
    let failed = &summary.participants[1];
    assert_eq!(failed.id, "P02");
    assert!(failed.error.as_deref().unwrap().contains("thigh_l.csv"));

    fs::remove_file(input.join("P01/radar.csv")).unwrap();
    assert!(run_pipeline(&config(&input, &output)).is_err());
}

#[test]
fn synth_files_round_trip_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), 1);
    let dir = tmp.path().join("P01");
    for name in ["radar.csv", "kinect.csv"] {
        let path = dir.join(name);
        let mut buf = Vec::new();
        io::write_skeleton_csv(&mut buf, &io::read_skeleton_csv(&path).unwrap()).unwrap();
        assert_eq!(buf, fs::read(&path).unwrap(), "{name}");
    }
    for p in Placement::ALL {
        let path = dir.join(format!("{}.csv", p.file_stem()));
        let mut buf = Vec::new();
        io::write_gyro_csv(&mut buf, &io::read_gyro_csv(&path).unwrap()).unwrap();
        assert_eq!(buf, fs::read(&path).unwrap(), "{p}");
    }
}
