use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use truelearn::params::ConfigError;
use truelearn::ModelParams;

mod cmd;
mod error;

use error::{CliError, CliResult};

/// Online Bayesian learner models for engagement prediction.
#[derive(Parser, Debug)]
#[command(name = "truelearn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prequential evaluation of one or all models over an events file.
    Evaluate(cmd::evaluate::EvaluateArgs),
    /// Generate a synthetic dataset with known ground truth.
    Simulate(cmd::simulate::SimulateArgs),
    /// Show a learner's skills from a snapshot.
    Inspect(cmd::inspect::InspectArgs),
    /// Turn transcripts, annotations and watch logs into an events file.
    Ingest(cmd::ingest::IngestArgs),
}

/// Model parameters: a TOML file of `field = value` lines, then per-field
/// overrides.
#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// TOML file whose keys are model parameter names
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one parameter, e.g. `--set perf_noise=0.25`; repeatable and
    /// applied after --config
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ParamArgs {
    pub fn resolve(&self) -> CliResult<ModelParams> {
        let usage = |e: ConfigError| CliError::Usage(e.to_string());
        let mut params = match &self.config {
            Some(path) => ModelParams::from_file(path).map_err(usage)?,
            None => ModelParams::default(),
        };
        for item in &self.overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
            params.set(key.trim(), value.trim()).map_err(usage)?;
        }
        Ok(params)
    }
}

pub fn write_file(path: &Path, contents: &[u8]) -> CliResult {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(a) => cmd::evaluate::run(a),
        Command::Simulate(a) => cmd::simulate::run(a),
        Command::Inspect(a) => cmd::inspect::run(a),
        Command::Ingest(a) => cmd::ingest::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
