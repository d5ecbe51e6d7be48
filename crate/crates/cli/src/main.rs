//! `ocula`: command-line access to synthesis, filtering, EOG derivation,
//! SSVEP detection, EpiDeNet training/quantization/inference, evaluation
//! and the simulated acquisition stream.
//!
//! Failures print one JSON line `{"error": kind, "message": text}` on
//! stderr and exit with status 1 (2 for usage errors).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ocula_core::ConfigId;

#[derive(Debug, Parser)]
#[command(name = "ocula", version, about = "EEG/EOG smart-glasses signal stack")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Channel configuration of generated or streamed data.
    #[arg(long, global = true, value_enum)]
    pub config: Option<ConfigArg>,
    /// Sample rate in Hz (500 or 1000).
    #[arg(long, global = true, default_value = "500", value_parser = parse_fs)]
    pub fs: f64,
}

fn parse_fs(s: &str) -> Result<f64, String> {
    match s {
        "500" => Ok(500.0),
        "1000" => Ok(1000.0),
        _ => Err(format!("sample rate must be 500 or 1000, got {s}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConfigArg {
    EegOnly,
    Combined,
}

impl From<ConfigArg> for ConfigId {
    fn from(c: ConfigArg) -> Self {
        match c {
            ConfigArg::EegOnly => ConfigId::EegOnly,
            ConfigArg::Combined => ConfigId::Combined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Labeled eye-movement session (3 EOG electrodes, or 7 channels with `--config combined`).
    Eog,
    /// Steady-state visually evoked response on the 8-channel layout.
    Ssvep,
    /// Alternating eyes-open / eyes-closed alpha EEG.
    Alpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterArg {
    Lowpass,
    Highpass,
    Bandpass,
    Notch,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic recording (and label file for `eog`).
    Synth(SynthArgs),
    /// Design a filter and apply it causally to every channel.
    Filter(FilterArgs),
    /// Turn V_R/V_L/V_C electrodes into the V_H/V_V pair.
    DeriveEog(IoArgs),
    /// NCCA scores per stimulus frequency and window length (CSV).
    Ssvep(SsvepArgs),
    /// Train EpiDeNet on labeled trials and write the parameter file.
    Train(TrainArgs),
    /// Post-training INT8 quantization calibrated on labeled trials.
    Quantize(QuantizeArgs),
    /// Sliding-window predictions over a recording (CSV).
    Infer(InferArgs),
    /// Cross-validated or held-out metrics, confusion matrix and ITR curve (CSV).
    Eval(EvalArgs),
    /// Encode a recording into acquisition frames over a lossy link.
    StreamSim(StreamArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Eog)]
    pub kind: SynthKind,
    #[arg(long)]
    pub output: PathBuf,
    /// Label file (`eog` only).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub trials_per_class: usize,
    /// Seconds per trial (`eog`) or per record (`ssvep`, `alpha`).
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    pub amplitude_uv: f64,
    #[arg(long, default_value_t = 5.0)]
    pub noise_uv: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tilt_db: f64,
    #[arg(long, default_value_t = 0.0)]
    pub drift_uvps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mains_uv: f64,
    #[arg(long, default_value_t = 0.0)]
    pub jitter_ms: f64,
    #[arg(long, default_value_t = 0.0)]
    pub walking_uv: f64,
    /// Stimulus frequency (`ssvep`).
    #[arg(long, default_value_t = 11.5)]
    pub freq: f64,
    #[arg(long, default_value_t = 2)]
    pub harmonics: usize,
    /// Signal-to-noise amplitude ratio (`ssvep`); 0 gives noise only.
    #[arg(long, default_value_t = 1.0)]
    pub snr: f64,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, value_enum)]
    pub kind: FilterArg,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Cutoff(s) in Hz; two for band-pass, the centre for notch.
    #[arg(long, value_delimiter = ',', required = true)]
    pub cutoff: Vec<f64>,
    /// Notch quality factor.
    #[arg(long, default_value_t = 30.0)]
    pub q: f64,
}

#[derive(Debug, Args)]
pub struct SsvepArgs {
    /// Trials as `FREQ:PATH`; repeat for more. Without inputs, trials are synthesized.
    #[arg(long)]
    pub input: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "7.5,11.5,13.5,15.5")]
    pub freqs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub windows: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub harmonics: usize,
    #[arg(long, default_value_t = 1.1)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    /// Average sliding windows with this hop (s) instead of scoring the last window.
    #[arg(long)]
    pub hop: Option<f64>,
    /// Synthesized trials per frequency.
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 25.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1.0)]
    pub snr: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Epoch length in seconds.
    #[arg(long, default_value_t = 2.0)]
    pub window: f64,
    /// Number of classes; defaults to the largest label + 1.
    #[arg(long)]
    pub classes: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct TrainOpts {
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    /// Height of the channel pool (1 for EOG, 4 for EEG).
    #[arg(long, default_value_t = 1)]
    pub pool_d: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub opts: TrainOpts,
    #[arg(long)]
    pub model: PathBuf,
    /// Per-epoch loss/accuracy CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 200.0)]
    pub hop_ms: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Score this model on the trials instead of cross-validating.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Window fractions for the accuracy/ITR curve (cross-validation only).
    #[arg(long, value_delimiter = ',')]
    pub fractions: Vec<f64>,
    /// Binary tasks: class reported as positive.
    #[arg(long)]
    pub positive: Option<usize>,
    /// Directory for confusion.csv, metrics.csv and itr_curve.csv; stdout otherwise.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Concatenated encoded frames.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the reassembled recording here.
    #[arg(long)]
    pub reassembled: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    pub frame_len: usize,
    #[arg(long, default_value_t = 0.0)]
    pub loss_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub jitter_ms: f64,
    #[arg(long, default_value_t = 12)]
    pub gain: u32,
    #[arg(long, default_value_t = 2.4)]
    pub vref: f64,
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
