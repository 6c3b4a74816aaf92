use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "tilenca", version, about = "Train and simulate self-classifying tile automata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on the 4×5 digits and write a weight file.
    Train(TrainArgs),
    /// Run one shape and print its report and per-update panels.
    Simulate(SimulateArgs),
    /// Run every shape of a catalog under several seeds.
    Experiment(ExperimentArgs),
    /// Write the weights as firmware constant arrays.
    Export(ExportArgs),
    /// Render panels from a saved run report.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2500)]
    iterations: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    /// Clip the batch gradient to global norm 1.0.
    #[arg(long)]
    clip: bool,
    #[arg(long, default_value = "weights.bin")]
    out: PathBuf,
    /// Suppress the per-iteration log.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    max_updates: usize,
    #[arg(long, default_value_t = 2000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 100)]
    jitter_ms: u64,
    #[arg(long, default_value_t = 0.0)]
    loss_rate: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    weights: PathBuf,
    /// `canonical:<d>`, `down:<d>`, `up:<d>` or a shape file path.
    shape: String,
    /// sync, listing1 or firmware.
    #[arg(value_name = "MODE", conflicts_with = "mode")]
    mode_arg: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    sim: SimArgs,
    /// Also write the report export to this file.
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// canonical, scaled_down or scaled_up.
    name: String,
    weights: PathBuf,
    #[arg(long)]
    mode: Option<String>,
    /// Repeat for several seeds; defaults to 1..=5.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 30)]
    max_updates: usize,
    #[arg(long, default_value_t = 2000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 100)]
    jitter_ms: u64,
    #[arg(long, default_value_t = 0.0)]
    loss_rate: f64,
    /// Write each run's report export into this directory.
    #[arg(long)]
    export_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    weights: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Report export file.
    report: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::Export(a) => commands::export(a),
        Command::Render(a) => commands::render(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e.message().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}
