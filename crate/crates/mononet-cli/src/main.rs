//! `mononet`: train, audit, and export monotone networks from the shell.
//!
//! Every subcommand is deterministic for a fixed `--seed`: rerunning with
//! the same flags rewrites byte-identical artifacts. Exit codes are stable
//! for CI: 0 success, 1 usage/data/verification failure, 2 numerical
//! failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use mononet::error::Error;

#[derive(Parser)]
#[command(
    name = "mononet",
    version,
    about = "Monotone-by-construction neural networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network on a dataset and write model, descriptor, and report.
    Train(TrainArgs),
    /// Evaluate a trained model on a CSV with the descriptor saved at training time.
    Eval(EvalArgs),
    /// Audit a model's declared monotonicity with random pairwise probes.
    Verify(VerifyArgs),
    /// Reproduce the cubic-fit comparison curves (x^3 on [-1, 1]).
    FitDemo(FitDemoArgs),
    /// Run the two-feature synthetic experiment and emit prediction surfaces.
    Synth(SynthArgs),
    /// Exhaustive width/depth/activation search; writes the leaderboard.
    Grid(GridArgs),
    /// Sweep one input feature of a saved model and emit the response curve.
    ExportCurve(ExportCurveArgs),
}

/// Flags shared by the training-style commands. Precedence per field:
/// explicit flag, then `--config` file, then built-in default; the seed
/// additionally falls back to `MONONET_SEED` before its default.
#[derive(clap::Args, Clone, Default)]
struct TrainArgs {
    /// Built-in dataset name (auto-mpg, heart-disease, compas,
    /// blog-feedback, loan-defaulter, synthetic).
    #[arg(long)]
    dataset: String,
    /// CSV file with the dataset's columns; optional for `synthetic`.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON file with any of the long flag names as keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Architecture: type1 or type2.
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// Base activation: relu, elu, or selu.
    #[arg(long)]
    kind: Option<String>,
    /// Unit split "convex,concave,saturated"; must sum to the width.
    #[arg(long)]
    selector: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// sgd or adam.
    #[arg(long)]
    optimizer: Option<String>,
    /// mse or cross-entropy (default chosen by the dataset's task).
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Repeat training this many times with consecutive seeds.
    #[arg(long)]
    runs: Option<usize>,
    /// Aggregate the best K of --runs (default 5 when --runs is given).
    #[arg(long)]
    best: Option<usize>,
    /// Points to generate when `--dataset synthetic` has no --csv.
    #[arg(long)]
    points: Option<usize>,
    /// Noise level for generated synthetic data.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value = "model.json")]
    model_out: PathBuf,
    #[arg(long, default_value = "report.json")]
    report_out: PathBuf,
    #[arg(long, default_value = "descriptor.json")]
    descriptor_out: PathBuf,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Descriptor JSON written by `train` (carries the fitted normalization).
    #[arg(long)]
    descriptor: PathBuf,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value = "eval-report.json")]
    report_out: PathBuf,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Descriptor JSON; provides the monotonicity claim and, with --csv,
    /// the sampling region.
    #[arg(long)]
    descriptor: Option<PathBuf>,
    /// Data to derive the sampling region from.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Claim as comma-separated -1/0/1 per input; alternative to --descriptor.
    #[arg(long)]
    indicator: Option<String>,
    /// Half-width of the symmetric sampling box used without --csv.
    #[arg(long, default_value_t = 3.0)]
    half_width: f64,
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "verify-report.json")]
    report_out: PathBuf,
}

#[derive(clap::Args)]
struct FitDemoArgs {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 2500)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value = "elu")]
    kind: String,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, default_value_t = 1500)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    width: usize,
    #[arg(long, default_value = "elu")]
    kind: String,
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
}

#[derive(clap::Args)]
struct GridArgs {
    #[arg(long)]
    dataset: String,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    arch: Option<String>,
    /// Comma-separated candidate widths.
    #[arg(long, default_value = "4,8,16,32,64")]
    widths: String,
    /// Comma-separated candidate depths.
    #[arg(long, default_value = "1,2")]
    depths: String,
    /// Comma-separated candidate activations.
    #[arg(long, default_value = "elu,relu")]
    kinds: String,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 5e-3)]
    lr: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value = "grid-report.json")]
    report_out: PathBuf,
}

#[derive(clap::Args)]
struct ExportCurveArgs {
    #[arg(long)]
    model: PathBuf,
    /// Zero-based input feature to sweep.
    #[arg(long, default_value_t = 0)]
    feature: usize,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    lo: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    hi: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Value the remaining features are held at.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    at: f64,
    #[arg(long, default_value = "curve.csv")]
    out: PathBuf,
}

/// Seed precedence: explicit value (flag or config) beats the MONONET_SEED
/// environment variable, which beats zero.
fn resolve_seed(explicit: Option<u64>) -> Result<u64, Error> {
    if let Some(seed) = explicit {
        return Ok(seed);
    }
    match std::env::var("MONONET_SEED") {
        Ok(raw) => raw
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("MONONET_SEED is not an integer: {raw}"))),
        Err(_) => Ok(0),
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Diverged { .. } | Error::NonFiniteGradient | Error::NonFinite(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Train(args) => commands::run_train(&args),
        Command::Eval(args) => commands::run_eval(&args),
        Command::Verify(args) => commands::run_verify(&args),
        Command::FitDemo(args) => commands::run_fit_demo(&args),
        Command::Synth(args) => commands::run_synth(&args),
        Command::Grid(args) => commands::run_grid(&args),
        Command::ExportCurve(args) => commands::run_export_curve(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
