use std::path::PathBuf;

use cdmdc::compressive::RecoveryPath;
use cdmdc::measurement::MeasurementKind;
use cdmdc::testbed::MatrixFormat;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cdmdc", version, about = "Compressive dynamic mode decomposition with control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a lifted low-rank plant and write snapshots plus ground truth.
    Synth(SynthArgs),
    /// Fit one decomposition and write the model.
    Run(RunArgs),
    /// Run a parameter sweep described by a TOML file.
    Sweep(SweepArgs),
    /// Check the compression identities on noiseless or noisy data.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlantKind {
    /// Two states, `Ã = [[0.9, 0.2], [−0.1, 0.9]]`, `B̃ = [0.1, 0.01]ᵀ`.
    TwoState,
    /// Nine states, one input.
    RankNine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Dmd,
    Dmdc,
    Cdmd,
    Cdmdc,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dmd => "dmd",
            Algorithm::Dmdc => "dmdc",
            Algorithm::Cdmd => "cdmd",
            Algorithm::Cdmdc => "cdmdc",
        }
    }
}

fn parse_kind(s: &str) -> Result<MeasurementKind, String> {
    s.parse().map_err(|e: cdmdc::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<MatrixFormat, String> {
    s.parse().map_err(|e: cdmdc::Error| e.to_string())
}

fn parse_path(s: &str) -> Result<RecoveryPath, String> {
    match s.to_ascii_lowercase().as_str() {
        "compressed" | "projection" | "compressed-projection" => Ok(RecoveryPath::CompressedProjection),
        "sensing" | "compressed-sensing" => Ok(RecoveryPath::CompressedSensing),
        other => Err(format!("unknown recovery path '{other}' (use compressed or sensing)")),
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "two-state")]
    pub plant: PlantKind,
    /// State dimension.
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    /// Number of state snapshots, including the initial condition.
    #[arg(long, default_value_t = 301)]
    pub steps: usize,
    /// Seed of the forcing record (and of the plant for `rank-nine`).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub forcing_std: f64,
    #[arg(long, value_parser = parse_format, default_value = "binary")]
    pub format: MatrixFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(value_enum)]
    pub algorithm: Algorithm,
    /// Directory written by `synth` (or any saved snapshot set).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub r_tilde: Option<usize>,
    /// Known actuation matrix `B` (n×q matrix file).
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Compressed snapshots `Y` (p×m matrix file).
    #[arg(long, requires = "y_shifted")]
    pub y: Option<PathBuf>,
    /// Compressed shifted snapshots `Y′`.
    #[arg(long, requires = "y")]
    pub y_shifted: Option<PathBuf>,
    /// Dense measurement matrix `C` (p×n matrix file).
    #[arg(long, conflicts_with = "measurement")]
    pub c: Option<PathBuf>,
    /// Generate `C` of this kind (and compress `--data` when no `--y`).
    #[arg(long, value_parser = parse_kind)]
    pub measurement: Option<MeasurementKind>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub measurement_seed: u64,
    /// State dimension when neither `--data` nor `--c` provides it.
    #[arg(long)]
    pub n: Option<usize>,
    /// Input snapshots `Υ` when no `--data` is given.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Time step when no `--data` is given.
    #[arg(long)]
    pub dt: Option<f64>,
    /// `compressed` lifts through `--data`; `sensing` recovers modes by
    /// sparse approximation.
    #[arg(long, value_parser = parse_path)]
    pub path: Option<RecoveryPath>,
    #[arg(long, default_value_t = 4)]
    pub sparsity: usize,
    #[arg(long)]
    pub b_sparsity: Option<usize>,
    /// Directory with `truth.json`; defaults to `--data` when it has one.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Saved snapshot set; synthesized from the two-state plant otherwise.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 301)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Measurement kinds to check (repeatable); all four by default.
    #[arg(long, value_parser = parse_kind)]
    pub measurement: Vec<MeasurementKind>,
    #[arg(long, default_value_t = 128)]
    pub p: usize,
    /// Number of measurement seeds per kind, starting at `--measurement-seed`.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub measurement_seed: u64,
    /// Dense measurement matrix instead of generated ones.
    #[arg(long)]
    pub c: Option<PathBuf>,
    /// Compressed snapshots to check against `C X`.
    #[arg(long, requires = "y_shifted")]
    pub y: Option<PathBuf>,
    #[arg(long, requires = "y")]
    pub y_shifted: Option<PathBuf>,
    /// Noise level `η` added to the state; any positive value makes the
    /// report advisory.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub r_tilde: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub k_max: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
