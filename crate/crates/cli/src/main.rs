//! `whonet`: synthesize data, train error predictors and evaluate them over
//! simulated GNSS outages.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use whonet::model::CellKind;

use crate::error::{CliError, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "whonet", version, about = "Wheel-odometry positioning with learned error correction")]
pub struct Cli {
    /// Seed for data generation, weight initialization, dropout and shuffling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: whonet-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic drive as CSV plus manifest.
    Synth(SynthArgs),
    /// Train an error predictor on recordings matched by a glob.
    Train(TrainArgs),
    /// Evaluate physical and corrected positioning over simulated outages.
    Eval(EvalArgs),
    /// Print trainable-parameter counts.
    Params(ParamsArgs),
    /// Convert an external CSV recording to the native format.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Drive length in seconds [default: 600].
    #[arg(long)]
    pub duration: Option<f64>,
    /// Radius bias factor of both rear wheels (1.05 = +5%).
    #[arg(long)]
    pub rear_bias: Option<f64>,
    /// Wheel-speed noise standard deviation, rad/s.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Mean random slip events per minute.
    #[arg(long)]
    pub slip_rate: Option<f64>,
    /// File name stem of the outputs.
    #[arg(long, default_value = "synthetic")]
    pub stem: String,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Glob of recording CSV files.
    #[arg(long)]
    pub data: String,
    /// TOML column/unit schema of the CSV files [default: native format].
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hidden-layer architecture [default: srnn].
    #[arg(long)]
    pub cell: Option<CellKind>,
    /// Hidden units [default: 72].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Dropout rate [default: 0.05].
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Adamax learning rate [default: 0.0007].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size [default: 128].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Training epochs [default: 100].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Reset recurrent state before every window.
    #[arg(long)]
    pub stateless: bool,
    /// Nominal wheel radius for the odometry, meters [default: 0.3].
    #[arg(long)]
    pub wheel_radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Trained model file.
    #[arg(long, required_unless_present_any = ["null_model", "oracle_model"])]
    pub model: Option<PathBuf>,
    /// Outage length in seconds; repeat for several [default: all].
    #[arg(long, value_parser = ["10", "30", "60", "120", "180"])]
    pub outage: Vec<String>,
    /// Predict zero error (corrected equals physical).
    #[arg(long, conflicts_with_all = ["model", "oracle_model"])]
    pub null_model: bool,
    /// Predict the true error (corrected error vanishes).
    #[arg(long, conflicts_with = "model")]
    pub oracle_model: bool,
    /// Wheel radius when no model supplies one, meters [default: 0.3].
    #[arg(long)]
    pub wheel_radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    /// Print counts for all architectures at the standard widths.
    #[arg(long)]
    pub table: bool,
    #[arg(long)]
    pub cell: Option<CellKind>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Input features per window.
    #[arg(long, default_value_t = whonet::dataset::FEATURES)]
    pub input_dim: usize,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// CSV file to convert.
    #[arg(long)]
    pub input: PathBuf,
    /// TOML column/unit schema of the input.
    #[arg(long)]
    pub schema: PathBuf,
    /// File name stem of the outputs [default: input file stem].
    #[arg(long)]
    pub stem: Option<String>,
    /// Wheel radius used to count windows, meters [default: 0.3].
    #[arg(long)]
    pub wheel_radius: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CliError::exit_code(&e) as u8)
        }
    }
}
