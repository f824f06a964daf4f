use std::process::ExitCode;

use clap::{Parser, Subcommand};
use graphguide_service::commands::{self, EvaluateArgs, GenDatasetArgs, SampleArgs, ServeArgs, TrainArgs};

#[derive(Parser)]
#[command(name = "graphguide", version, about = "Discrete edge diffusion with structural constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file with its manifest.
    GenDataset(GenDatasetArgs),
    /// Train a denoiser and write a checkpoint.
    Train(TrainArgs),
    /// Draw graphs from a checkpoint, optionally under constraints.
    Sample(SampleArgs),
    /// Compare generated graphs with training and validation sets.
    Evaluate(EvaluateArgs),
    /// Run the HTTP steering service.
    Serve(ServeArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match Cli::parse().command {
        Command::GenDataset(a) => commands::gen_dataset(&a),
        Command::Train(a) => commands::train(&a).map(|_| ()),
        Command::Sample(a) => commands::sample(&a),
        Command::Evaluate(a) => commands::evaluate(&a).map(|r| println!("{}", serde_json::to_string(&r).unwrap_or_default())),
        Command::Serve(a) => commands::serve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
