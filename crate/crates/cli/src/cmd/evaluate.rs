use std::path::PathBuf;

use clap::{Args, ValueEnum};
use sha2::{Digest, Sha256};
use truelearn::data::{parse_events, EventFormat, ParseOptions};
use truelearn::eval::{evaluate, group_by_learner, RunOptions};
use truelearn::store::save_snapshot;
use truelearn::ModelKind;

use crate::error::{CliError, CliResult};
use crate::{write_file, ParamArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Truelearn,
    Vanilla,
    Kt,
    Persistence,
    Majority,
    All,
}

impl ModelChoice {
    fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelChoice::Truelearn => vec![ModelKind::TrueLearn],
            ModelChoice::Vanilla => vec![ModelKind::Vanilla],
            ModelChoice::Kt => vec![ModelKind::Kt],
            ModelChoice::Persistence => vec![ModelKind::Persistence],
            ModelChoice::Majority => vec![ModelKind::Majority],
            ModelChoice::All => ModelKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Events file (.jsonl, or .csv)
    #[arg(long, value_name = "PATH")]
    events: PathBuf,
    /// Model to evaluate
    #[arg(long, value_enum, default_value = "all")]
    model: ModelChoice,
    #[command(flatten)]
    params: ParamArgs,
    /// Write the JSON report here
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// What to print on standard output
    #[arg(long, value_enum, default_value = "table")]
    format: OutputFormat,
    /// Learn from each learner's first event without scoring it
    #[arg(long)]
    skip_first: bool,
    /// Recorded in the report; evaluation itself draws no random numbers
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available parallelism)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Evaluate the valid lines even if some lines are malformed
    #[arg(long)]
    allow_invalid: bool,
    /// Save final learner states to this snapshot. The TrueLearn states are
    /// saved when TrueLearn is evaluated, otherwise the selected model's
    #[arg(long, value_name = "PATH")]
    snapshot: Option<PathBuf>,
}

pub fn run(args: EvaluateArgs) -> CliResult {
    let params = args.params.resolve()?;
    let path = &args.events;
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read events file {}: {e}", path.display())))?;
    let opts = ParseOptions {
        label_threshold: params.label_threshold,
        max_topics: params.topics_per_event,
    };
    let parsed = parse_events(bytes.as_slice(), EventFormat::from_path(path), opts)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    for e in &parsed.errors {
        eprintln!("{}:{}: {}", path.display(), e.line_no, e.reason);
    }
    if !parsed.errors.is_empty() && !args.allow_invalid {
        return Err(CliError::Data(format!(
            "{} malformed line(s) in {} (first at line {}); rerun with --allow-invalid to skip them",
            parsed.errors.len(),
            path.display(),
            parsed.errors[0].line_no
        )));
    }
    if parsed.records.is_empty() {
        return Err(CliError::Data(format!("{} contains no events", path.display())));
    }

    let kinds = args.model.kinds();
    let run_opts = RunOptions {
        skip_first: args.skip_first,
        workers: args.workers.map(|n| n as usize),
    };
    let streams = group_by_learner(parsed.records);
    let evaluation = evaluate(
        &streams,
        &kinds,
        &params,
        run_opts,
        hex::encode(Sha256::digest(&bytes)),
        parsed.errors.len() as u64,
        args.seed,
    )
    .map_err(|e| CliError::Internal(e.to_string()))?;
    let report = &evaluation.report;

    if let Some(out) = &args.report {
        write_file(out, report.to_json().as_bytes())?;
    }
    if let Some(out) = &args.snapshot {
        let kind = if kinds.contains(&ModelKind::TrueLearn) {
            ModelKind::TrueLearn
        } else {
            kinds[0]
        };
        save_snapshot(&evaluation.states[&kind], &params.fingerprint(), out)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", out.display())))?;
    }
    match args.format {
        OutputFormat::Table => print!("{}", report.render_table()),
        OutputFormat::Json => print!("{}", report.to_json()),
    }
    Ok(())
}
