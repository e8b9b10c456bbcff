//! Ingestion: transcripts to fragments, annotations to topics, watch ratios
//! to labels, and validated event streams.

mod annotation;
mod events;
mod fragment;
pub mod wikifier;

pub use annotation::{top_k_topics, Candidate, FragmentAnnotation};
pub use events::{
    binarize_label, parse_events, EventFormat, EventRecord, EventStream, OrderWarning,
    ParseOptions, ParsedEvents, RecordError,
};
pub use fragment::{fragment_transcript, SNAP_WINDOW};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("transcript is empty")]
    EmptyText,
    #[error("fragment target length must be >= 1, got {0}")]
    InvalidTarget(usize),
    #[error("annotation for fragment `{0}` has no candidates")]
    NoCandidates(String),
    #[error("invalid annotation for fragment `{fragment_id}`: {reason}")]
    InvalidAnnotation { fragment_id: String, reason: String },
    #[error("watch ratio must be finite and >= 0, got {0}")]
    InvalidRatio(f64),
    #[error("label threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("cannot read source: {0}")]
    UnreadableSource(String),
}

/// One row of `interactions.jsonl`: how much of a fragment a learner watched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub learner_id: String,
    pub fragment_id: String,
    pub timestamp: i64,
    pub watch_ratio: f64,
    #[serde(default)]
    pub event_id: Option<String>,
}

/// Identifier of the `index`-th (0-based) fragment of a lecture.
pub fn fragment_id(lecture_id: &str, index: usize) -> String {
    format!("{lecture_id}#{index}")
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub target_len: usize,
    pub topics_per_event: usize,
    pub label_threshold: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            target_len: 5000,
            topics_per_event: 5,
            label_threshold: 0.75,
        }
    }
}

/// A problem with one input item; ingestion continues past it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestIssue {
    pub source: String,
    pub item: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct IngestOutcome {
    /// Fragment ids produced per lecture, in lecture order.
    pub fragments: BTreeMap<String, Vec<String>>,
    pub events: Vec<EventRecord>,
    pub issues: Vec<IngestIssue>,
}

impl IngestOutcome {
    pub fn learner_count(&self) -> usize {
        let mut ids: Vec<_> = self.events.iter().map(|e| e.learner_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn engagement_rate(&self) -> f64 {
        if self.events.is_empty() {
            return 0.0;
        }
        self.events.iter().filter(|e| e.label).count() as f64 / self.events.len() as f64
    }
}

/// Joins fragmented transcripts, their annotations and learner interactions
/// into labelled events. Interactions come out sorted by (learner, timestamp).
pub fn ingest(
    transcripts: &[(String, String)],
    annotations: &HashMap<String, FragmentAnnotation>,
    interactions: &[Interaction],
    config: &IngestConfig,
) -> Result<IngestOutcome, DataError> {
    if !(config.label_threshold > 0.0 && config.label_threshold <= 1.0) {
        return Err(DataError::InvalidThreshold(config.label_threshold));
    }
    let mut out = IngestOutcome::default();
    let mut topics_by_fragment = HashMap::new();
    for (lecture, text) in transcripts {
        let parts = match fragment_transcript(text, config.target_len) {
            Ok(p) => p,
            Err(e) => {
                out.issues.push(IngestIssue {
                    source: "transcripts".into(),
                    item: lecture.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let ids: Vec<String> = (0..parts.len()).map(|i| fragment_id(lecture, i)).collect();
        for id in &ids {
            let topics = annotations
                .get(id)
                .ok_or_else(|| "no annotation for fragment".to_string())
                .and_then(|a| {
                    a.validate().map_err(|e| e.to_string())?;
                    top_k_topics(a, config.topics_per_event).map_err(|e| e.to_string())
                });
            match topics {
                Ok(t) => {
                    topics_by_fragment.insert(id.clone(), t);
                }
                Err(reason) => out.issues.push(IngestIssue {
                    source: "annotations".into(),
                    item: id.clone(),
                    reason,
                }),
            }
        }
        out.fragments.insert(lecture.clone(), ids);
    }

    let mut ordered: Vec<&Interaction> = interactions.iter().collect();
    ordered.sort_by(|a, b| {
        a.learner_id
            .cmp(&b.learner_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    for it in ordered {
        let issue = |reason: String| IngestIssue {
            source: "interactions".into(),
            item: format!("{}@{}", it.learner_id, it.fragment_id),
            reason,
        };
        let Some(topics) = topics_by_fragment.get(&it.fragment_id) else {
            out.issues.push(issue("fragment unknown or unannotated".into()));
            continue;
        };
        match binarize_label(it.watch_ratio, config.label_threshold) {
            Ok(label) => out.events.push(EventRecord {
                learner_id: it.learner_id.clone(),
                event_id: it.event_id.clone().unwrap_or_else(|| {
                    format!("{}:{}:{}", it.learner_id, it.fragment_id, it.timestamp)
                }),
                timestamp: it.timestamp,
                fragment_id: it.fragment_id.clone(),
                topics: topics.clone(),
                watch_ratio: it.watch_ratio,
                label,
            }),
            Err(e) => out.issues.push(issue(e.to_string())),
        }
    }
    Ok(out)
}
