mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "legible", version, about = "Reach and gaze modeling pipeline")]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set em.components=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Fit per-label trajectory models.
    Fit(FitArgs),
    /// Write GMR mean trajectories and variance envelopes.
    Reconstruct(ReconstructArgs),
    /// Write gaze scripts and eye/head timelines for every label and pattern.
    Gaze(GazeArgs),
    /// Align the streams of one trial onto a master timeline.
    Align(AlignArgs),
    /// Check a dataset directory.
    Validate(ValidateArgs),
    /// Classify one trial at one gate.
    Classify(ClassifyArgs),
    /// Run the gated evaluation on a test dataset.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Per-label counts in P_L,P_M,P_R,G_L,G_M,G_R order.
    #[arg(long)]
    pub counts: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub first_trial_id: Option<u32>,
    /// Disable all synthesis noise.
    #[arg(long)]
    pub noise_free: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fit one (t, x, y, z) model per label.
    #[arg(long)]
    pub joint: bool,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GazeArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Sampling rate of the eye/head timelines, Hz.
    #[arg(long, default_value_t = 120.0)]
    pub rate: f64,
}

#[derive(Args, Debug)]
pub struct AlignArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub trial: u32,
    #[arg(long)]
    pub out: PathBuf,
    /// Policy for every stream, overriding the configured default.
    #[arg(long)]
    pub policy: Option<String>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub trial: u32,
    #[arg(long, default_value = "GHA+")]
    pub gate: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "G,GH,GHA,GHA+")]
    pub gates: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `empirical` or `uniform`.
    #[arg(long)]
    pub priors: Option<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = commands::Context::new(cli.config, cli.sets);
    match cli.command {
        Command::Synth(a) => commands::synth(&ctx, &a),
        Command::Fit(a) => commands::fit(&ctx, &a),
        Command::Reconstruct(a) => commands::reconstruct(&ctx, &a),
        Command::Gaze(a) => commands::gaze(&ctx, &a),
        Command::Align(a) => commands::align(&ctx, &a),
        Command::Validate(a) => commands::validate(&ctx, &a),
        Command::Classify(a) => commands::classify(&ctx, &a),
        Command::Eval(a) => commands::eval(&ctx, &a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            eprintln!("legible: {}", CliError::config(e.to_string().trim().to_string()));
            return ExitCode::from(error::EXIT_IO);
        }
        Err(e) => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("legible: {e}");
            ExitCode::from(e.code)
        }
    }
}
