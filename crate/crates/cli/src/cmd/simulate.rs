use std::path::PathBuf;

use clap::Args;
use truelearn::synthetic::{generate_dataset, MarginSpec, SyntheticConfig, SyntheticError, DEFAULT_EPSILON};

use crate::error::{CliError, CliResult};
use crate::{write_file, ParamArgs};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of learners
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    learners: u64,
    /// Events per learner
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    events: u64,
    /// Size of the KC universe
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    topics: u64,
    /// Distinct KCs per event (default: the topics_per_event parameter)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    per_event: Option<u64>,
    /// Engagement margin shared by all learners; accepts `inf`
    #[arg(long, default_value_t = DEFAULT_EPSILON, conflicts_with = "epsilon_range")]
    epsilon: f64,
    /// Draw each learner's margin uniformly from LO:HI instead
    #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
    epsilon_range: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives events.jsonl and ground_truth.json
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads (default: available parallelism); output does not depend on it
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    #[command(flatten)]
    params: ParamArgs,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(lo)?, num(hi)?))
}

pub fn run(args: SimulateArgs) -> CliResult {
    let params = args.params.resolve()?;
    let margin = match args.epsilon_range {
        Some((lo, hi)) => MarginSpec::PerLearner { lo, hi },
        None => MarginSpec::Global { epsilon: args.epsilon },
    };
    let config = SyntheticConfig {
        topics_per_event: args.per_event.map_or(params.topics_per_event, |n| n as usize),
        params,
        margin,
        workers: args.workers.map(|n| n as usize),
        ..SyntheticConfig::new(args.learners as usize, args.events as usize, args.topics as usize, args.seed)
    };
    let dataset = generate_dataset(&config).map_err(|e| match e {
        SyntheticError::Pool(_) => CliError::Internal(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", args.out.display())))?;
    write_file(&args.out.join("events.jsonl"), dataset.to_jsonl().as_bytes())?;
    write_file(&args.out.join("ground_truth.json"), dataset.truth.to_json().as_bytes())?;

    let engaged = dataset.events.iter().filter(|e| e.label).count();
    println!(
        "wrote {} events for {} learners to {} ({} engaged)",
        dataset.events.len(),
        args.learners,
        args.out.display(),
        engaged
    );
    Ok(())
}
