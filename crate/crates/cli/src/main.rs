use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Deserialize;

use sts_core::fmcw::{
    self, angular_resolution, range_resolution, velocity_resolution, RadarConfig, Scatterer,
};
use sts_core::io;
use sts_core::pipeline::{self, PipelineConfig};
use sts_core::stats::{agreement_table, IccVariant};
use sts_core::synth::{generate_dataset, SynthConfig};
use sts_core::StsError;

/// Sit-to-stand analysis across radar, depth-camera and wearable sensors.
#[derive(Debug, Parser)]
#[command(name = "sts", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic multi-participant dataset with ground truth.
    Synth(Common),
    /// Run the full pipeline over a dataset folder.
    Process(Common),
    /// Simulate and process one FMCW radar frame.
    Fmcw(Common),
    /// Recompute agreement statistics from an existing long table.
    Stats(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input folder (process), long-table CSV (stats) or scene JSON (fmcw).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output folder, or detections CSV for fmcw.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Maximum start-time difference when matching repetitions (s).
    #[arg(long)]
    match_tol_s: Option<f64>,
    /// ICC variant shown in summaries: absolute or consistency.
    #[arg(long, value_parser = parse_variant)]
    icc_variant: Option<IccVariant>,
    /// Random seed for synth and fmcw.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of synthetic participants.
    #[arg(long)]
    participants: Option<usize>,
}

fn parse_variant(s: &str) -> Result<IccVariant, String> {
    IccVariant::parse(s).ok_or_else(|| format!("unknown ICC variant {s:?} (use absolute or consistency)"))
}

/// Contents of `--config`; every section is optional.
#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    pipeline: PipelineConfig,
    synth: SynthConfig,
    participants: usize,
    radar: RadarConfig,
    /// Complex noise standard deviation of the simulated IF samples.
    fmcw_noise_std: f64,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            synth: SynthConfig::default(),
            participants: 5,
            radar: RadarConfig::default(),
            fmcw_noise_std: 0.1,
        }
    }
}

#[derive(Debug)]
enum CliError {
    /// Bad configuration or arguments (exit 2).
    Config(String),
    /// Processing failed (exit 1).
    Run(String),
}

impl From<StsError> for CliError {
    fn from(e: StsError) -> Self {
        CliError::Run(e.to_string())
    }
}

fn config_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Config(format!("--{flag} is required")))
}

fn synth(args: &Common, cfg: FileConfig) -> Result<(), CliError> {
    let output = required(&args.output, "output")?;
    let mut base = cfg.synth;
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    let participants = args.participants.unwrap_or(cfg.participants);
    if participants == 0 {
        return Err(CliError::Config("--participants must be at least 1".into()));
    }
    base.validate().map_err(config_error)?;
    let recordings = generate_dataset(&base, participants)?;
    pipeline::write_dataset(output, &recordings)?;
    println!("wrote {participants} participants to {}", output.display());
    Ok(())
}

fn pipeline_config(args: &Common, cfg: FileConfig) -> Result<PipelineConfig, CliError> {
    let mut p = cfg.pipeline;
    if let Some(input) = &args.input {
        p.input_dir = input.clone();
    }
    if let Some(output) = &args.output {
        p.output_dir = output.clone();
    }
    if let Some(tol) = args.match_tol_s {
        p.match_tolerance_s = tol;
    }
    if let Some(v) = args.icc_variant {
        p.icc_variant = v;
    }
    p.validate().map_err(config_error)?;
    Ok(p)
}

fn print_agreement(path: &Path) {
    if let Ok(text) = fs::read_to_string(path) {
        print!("{text}");
    }
}

fn process(args: &Common, cfg: FileConfig) -> Result<(), CliError> {
    let p = pipeline_config(args, cfg)?;
    if !p.input_dir.is_dir() {
        return Err(CliError::Config(format!("input folder {} does not exist", p.input_dir.display())));
    }
    let summary = pipeline::run_pipeline(&p)?;
    for o in &summary.participants {
        match (&o.matched, &o.error) {
            (Some(n), _) => println!("{}: {n} matched repetitions", o.id),
            (_, Some(e)) => println!("{}: failed: {e}", o.id),
            _ => {}
        }
    }
    print_agreement(&p.output_dir.join("agreement.csv"));
    Ok(())
}

fn stats(args: &Common, cfg: FileConfig) -> Result<(), CliError> {
    let input = required(&args.input, "input")?;
    let output = required(&args.output, "output")?;
    let p = pipeline_config(args, cfg)?;
    let table = io::read_long_table(input)?;
    let report = agreement_table(&table, &p.agreement);
    pipeline::write_agreement_outputs(output, &report, p.icc_variant, p.write_svg)?;
    print_agreement(&output.join("agreement.csv"));
    Ok(())
}

fn fmcw_demo(args: &Common, cfg: FileConfig) -> Result<(), CliError> {
    let radar = cfg.radar;
    radar.validate().map_err(config_error)?;
    let scene = match &args.input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            fmcw::scene_from_json(&text).map_err(config_error)?
        }
        None => vec![Scatterer::new(3.5, 0.5, 10f64.to_radians(), 1.0)?],
    };
    let cube = fmcw::synthesize_if_cube(&radar, &scene, cfg.fmcw_noise_std, args.seed.unwrap_or(1))?;
    let detections = fmcw::process_cube(&radar, &cube)?;
    info!(
        "resolution: range {:.4} m, velocity {:.4} m/s, angle {:.2} deg at broadside",
        range_resolution(&radar),
        velocity_resolution(&radar),
        angular_resolution(&radar, 0.0)?.to_degrees()
    );
    let write = |w: &mut dyn Write| fmcw::write_detections_csv(w, &detections);
    match &args.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::Run(format!("{}: {e}", dir.display())))?;
            }
            let mut f = fs::File::create(path).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
            write(&mut f).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
            println!("{} detections written to {}", detections.len(), path.display());
        }
        None => write(&mut std::io::stdout().lock()).map_err(|e| CliError::Run(e.to_string()))?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, handler): (&Common, fn(&Common, FileConfig) -> Result<(), CliError>) = match &cli.command {
        Command::Synth(a) => (a, synth),
        Command::Process(a) => (a, process),
        Command::Fmcw(a) => (a, fmcw_demo),
        Command::Stats(a) => (a, stats),
    };
    let cfg = load_config(args.config.as_deref())?;
    handler(args, cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
