use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::Args;
use truelearn::data::{ingest, EventFormat, FragmentAnnotation, IngestConfig, IngestIssue, Interaction};

use crate::error::{CliError, CliResult};
use crate::write_file;

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Directory of `<lecture_id>.txt` transcripts
    #[arg(long, value_name = "DIR")]
    transcripts: PathBuf,
    /// JSONL file, one fragment annotation per line
    #[arg(long, value_name = "PATH")]
    annotations: PathBuf,
    /// Watch log (.jsonl, or .csv with learner_id,fragment_id,timestamp,watch_ratio[,event_id])
    #[arg(long, value_name = "PATH")]
    interactions: PathBuf,
    /// Watch ratio at or above which an event is labelled engaged, in (0, 1]
    #[arg(long, default_value_t = 0.75, value_parser = parse_threshold)]
    threshold: f64,
    /// Target fragment length in characters
    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    target_len: u64,
    /// Top-ranked KCs kept per fragment
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    topics_per_event: u64,
    /// Events file to write
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("`{s}`: {e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn load_transcripts(dir: &Path, issues: &mut Vec<IngestIssue>) -> CliResult<Vec<(String, String)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Data(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let lecture = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match std::fs::read_to_string(&p) {
            Ok(text) => out.push((lecture, text)),
            Err(e) => issues.push(IngestIssue {
                source: "transcripts".into(),
                item: p.display().to_string(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

fn line_issue(source: &str, path: &Path, line_no: usize, reason: String) -> IngestIssue {
    IngestIssue {
        source: source.into(),
        item: format!("{}:{line_no}", path.display()),
        reason,
    }
}

fn load_annotations(path: &Path, issues: &mut Vec<IngestIssue>) -> CliResult<HashMap<String, FragmentAnnotation>> {
    let text = read_text(path)?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<FragmentAnnotation>(line) {
            Ok(a) if out.contains_key(&a.fragment_id) => issues.push(line_issue(
                "annotations",
                path,
                i + 1,
                format!("duplicate annotation for `{}`", a.fragment_id),
            )),
            Ok(a) => {
                out.insert(a.fragment_id.clone(), a);
            }
            Err(e) => issues.push(line_issue("annotations", path, i + 1, e.to_string())),
        }
    }
    Ok(out)
}

fn load_interactions(path: &Path, issues: &mut Vec<IngestIssue>) -> CliResult<Vec<Interaction>> {
    let mut out = Vec::new();
    match EventFormat::from_path(path) {
        EventFormat::Jsonl => {
            for (i, line) in read_text(path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Interaction>(line) {
                    Ok(it) => out.push(it),
                    Err(e) => issues.push(line_issue("interactions", path, i + 1, e.to_string())),
                }
            }
        }
        EventFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .flexible(true)
                .from_path(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            for row in reader.deserialize::<Interaction>() {
                match row {
                    Ok(it) => out.push(it),
                    Err(e) => {
                        let line = e.position().map_or(0, |p| p.line() as usize);
                        issues.push(line_issue("interactions", path, line, e.to_string()));
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn run(args: IngestArgs) -> CliResult {
    let mut issues = Vec::new();
    let transcripts = load_transcripts(&args.transcripts, &mut issues)?;
    let annotations = load_annotations(&args.annotations, &mut issues)?;
    let interactions = load_interactions(&args.interactions, &mut issues)?;
    let config = IngestConfig {
        target_len: args.target_len as usize,
        topics_per_event: args.topics_per_event as usize,
        label_threshold: args.threshold,
    };
    let outcome = ingest(&transcripts, &annotations, &interactions, &config)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    issues.extend(outcome.issues.iter().cloned());

    let mut body = String::new();
    for e in &outcome.events {
        body += &e.to_json_line();
        body.push('\n');
    }
    write_file(&args.out, body.as_bytes())?;

    let fragments: usize = outcome.fragments.values().map(Vec::len).sum();
    println!(
        "lectures: {}  fragments: {fragments}  learners: {}  events: {}  engagement rate: {:.4}",
        transcripts.len(),
        outcome.learner_count(),
        outcome.events.len(),
        outcome.engagement_rate()
    );
    if issues.is_empty() {
        return Ok(());
    }
    for i in &issues {
        eprintln!("{} {}: {}", i.source, i.item, i.reason);
    }
    Err(CliError::Data(format!(
        "{} item(s) could not be ingested; the remaining {} events were written to {}",
        issues.len(),
        outcome.events.len(),
        args.out.display()
    )))
}
