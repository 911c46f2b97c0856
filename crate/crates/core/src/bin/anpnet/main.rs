mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anpnet_core::analysis::AnrMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "anpnet",
    version,
    about = "Adjective-noun pair fusion: train, evaluate and explain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its vocabulary from a TOML config.
    Synth(SynthArgs),
    /// Stratified train/test split of a dataset.
    Split(SplitArgs),
    /// Train a fusion network and write a checkpoint plus history.
    Train(TrainArgs),
    /// Overall, per-class, histogram and co-detection accuracy tables.
    Eval(EvalArgs),
    /// Adjective and noun contributions for one sample.
    Explain(ExplainArgs),
    /// ANR, orientation, equivalence or related-concept tables.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Vocabulary directory to write (default: OUT_DIR/vocab).
    #[arg(long)]
    vocab_dir: Option<PathBuf>,
    /// Dataset file to write (default: OUT_DIR/dataset.anpd).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples_per_anp: Option<usize>,
    #[arg(long)]
    noise_temp: Option<f64>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    vocab_dir: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    vocab_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Checkpoint to write (default: OUT_DIR/model.anpm).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// TOML file with training settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    validation_fraction: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Binary dataset, or a CSV file with one header row.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    vocab_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Histogram bin width in percentage points.
    #[arg(long, default_value_t = 10.0)]
    bin_width: f64,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Sample index in the dataset.
    #[arg(long)]
    sample: usize,
    /// Target ANP as an index or "adjective noun"; defaults to the top prediction.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Anr,
    Orientation,
    Equiv,
    Related,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum)]
    which: Which,
    #[arg(long, default_value = "all-top5", value_parser = parse_mode)]
    mode: AnrMode,
}

fn parse_mode(s: &str) -> Result<AnrMode, String> {
    s.parse().map_err(|e: anpnet_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Split(a) => commands::split(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Explain(a) => commands::explain(a),
        Command::Analyze(a) => commands::analyze(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
