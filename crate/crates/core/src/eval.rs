//! Prequential (predict, then update) evaluation and F1 reporting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::EventRecord;
use crate::models::{EngagementModel, LearnerState, ModelError, ModelKind};
use crate::params::ModelParams;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{model} failed on learner `{learner_id}`, event `{event_id}`: {source}")]
    Model {
        model: ModelKind,
        learner_id: String,
        event_id: String,
        source: ModelError,
    },
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when either is undefined.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Unweighted mean over learners.
    Macro,
    /// Mean over learners weighted by their event counts.
    Weighted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

pub fn aggregate(
    per_learner: &BTreeMap<String, ConfusionCounts>,
    mode: Aggregation,
) -> Result<Summary, EvalError> {
    if per_learner.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let weight = |c: &ConfusionCounts| match mode {
        Aggregation::Macro => 1.0,
        Aggregation::Weighted => c.total() as f64,
    };
    let total: f64 = per_learner.values().map(weight).sum();
    if total == 0.0 {
        // every learner is empty: weights are meaningless, fall back to macro
        return aggregate(per_learner, Aggregation::Macro);
    }
    let mut s = Summary::default();
    for c in per_learner.values() {
        let w = weight(c) / total;
        s.precision += w * c.precision();
        s.recall += w * c.recall();
        s.f1 += w * c.f1();
        s.accuracy += w * c.accuracy();
    }
    Ok(s)
}

/// Groups events per learner, each stream stably sorted by timestamp.
pub fn group_by_learner(records: Vec<EventRecord>) -> BTreeMap<String, Vec<EventRecord>> {
    let mut streams: BTreeMap<String, Vec<EventRecord>> = BTreeMap::new();
    for r in records {
        streams.entry(r.learner_id.clone()).or_default().push(r);
    }
    for events in streams.values_mut() {
        events.sort_by_key(|e| e.timestamp);
    }
    streams
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Update on each learner's first event without scoring it.
    pub skip_first: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

/// Replays one learner's events in order, predicting each before learning from it.
pub fn run_learner(
    model: &dyn EngagementModel,
    events: &[EventRecord],
    skip_first: bool,
) -> Result<(ConfusionCounts, LearnerState), EvalError> {
    let mut counts = ConfusionCounts::default();
    let mut state = LearnerState::new();
    let ctx = |e: &EventRecord, source| EvalError::Model {
        model: model.kind(),
        learner_id: e.learner_id.clone(),
        event_id: e.event_id.clone(),
        source,
    };
    for (i, e) in events.iter().enumerate() {
        let decision = model.decide(&state, &e.topics).map_err(|s| ctx(e, s))?;
        if !(skip_first && i == 0) {
            counts.record(decision, e.label);
        }
        model.update(&mut state, &e.topics, e.label).map_err(|s| ctx(e, s))?;
    }
    Ok((counts, state))
}

/// Per-learner outcome of a prequential run.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub kind: ModelKind,
    pub counts: BTreeMap<String, ConfusionCounts>,
    pub states: BTreeMap<String, LearnerState>,
}

pub fn prequential_run(
    streams: &BTreeMap<String, Vec<EventRecord>>,
    kind: ModelKind,
    params: &ModelParams,
    opts: RunOptions,
) -> Result<ModelRun, EvalError> {
    let model = kind.build(params.clone());
    let work = || -> Result<Vec<_>, EvalError> {
        streams
            .par_iter()
            .map(|(id, events)| {
                run_learner(model.as_ref(), events, opts.skip_first).map(|r| (id.clone(), r))
            })
            .collect()
    };
    let results = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| EvalError::Pool(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let mut run = ModelRun {
        kind,
        counts: BTreeMap::new(),
        states: BTreeMap::new(),
    };
    for (id, (counts, state)) in results {
        run.counts.insert(id.clone(), counts);
        run.states.insert(id, state);
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelKind,
    #[serde(rename = "macro")]
    pub macro_avg: Summary,
    pub weighted: Summary,
    pub learners: BTreeMap<String, ConfusionCounts>,
}

impl ModelReport {
    pub fn from_counts(model: ModelKind, learners: BTreeMap<String, ConfusionCounts>) -> Result<Self, EvalError> {
        Ok(Self {
            model,
            macro_avg: aggregate(&learners, Aggregation::Macro)?,
            weighted: aggregate(&learners, Aggregation::Weighted)?,
            learners,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub params: ModelParams,
    pub params_hash: String,
    pub label_threshold: f64,
    pub decision_threshold: f64,
    pub dataset_sha256: String,
    pub events_total: u64,
    pub learners_total: u64,
    pub engaged_total: u64,
    /// Events whose watch ratio exceeded 1 (labelled engaged).
    pub watch_ratio_above_one: u64,
    pub parse_errors: u64,
    pub skip_first: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub metadata: RunMetadata,
    pub models: Vec<ModelReport>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn render_table(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "events: {}  learners: {}  engaged: {}  label threshold: watch_ratio >= {}  decision threshold: {}",
            m.events_total, m.learners_total, m.engaged_total, m.label_threshold, m.decision_threshold
        );
        if m.watch_ratio_above_one > 0 {
            let _ = writeln!(
                out,
                "note: {} events have watch_ratio > 1 and are labelled engaged",
                m.watch_ratio_above_one
            );
        }
        if m.skip_first {
            let _ = writeln!(out, "first event of each learner not scored");
        }
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8} {:>8} {:>8}   {:>8} {:>8} {:>8} {:>8}",
            "model", "P(mac)", "R(mac)", "F1(mac)", "Acc(mac)", "P(wtd)", "R(wtd)", "F1(wtd)", "Acc(wtd)"
        );
        for r in &self.models {
            let (a, b) = (&r.macro_avg, &r.weighted);
            let _ = writeln!(
                out,
                "{:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4}   {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                r.model.name(),
                a.precision,
                a.recall,
                a.f1,
                a.accuracy,
                b.precision,
                b.recall,
                b.f1,
                b.accuracy
            );
        }
        out
    }
}

/// A finished evaluation: the report plus each model's final learner states.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub states: BTreeMap<ModelKind, BTreeMap<String, LearnerState>>,
}

/// Runs every requested model over the same streams and assembles the report.
pub fn evaluate(
    streams: &BTreeMap<String, Vec<EventRecord>>,
    kinds: &[ModelKind],
    params: &ModelParams,
    opts: RunOptions,
    dataset_sha256: String,
    parse_errors: u64,
    seed: u64,
) -> Result<Evaluation, EvalError> {
    let all = streams.values().flatten();
    let metadata = RunMetadata {
        params: params.clone(),
        params_hash: params.fingerprint(),
        label_threshold: params.label_threshold,
        decision_threshold: params.decision_threshold,
        dataset_sha256,
        events_total: all.clone().count() as u64,
        learners_total: streams.len() as u64,
        engaged_total: all.clone().filter(|e| e.label).count() as u64,
        watch_ratio_above_one: all.filter(|e| e.watch_ratio > 1.0).count() as u64,
        parse_errors,
        skip_first: opts.skip_first,
        seed,
    };
    let mut models = Vec::with_capacity(kinds.len());
    let mut states = BTreeMap::new();
    for &k in kinds {
        let run = prequential_run(streams, k, params, opts)?;
        models.push(ModelReport::from_counts(k, run.counts)?);
        states.insert(k, run.states);
    }
    Ok(Evaluation {
        report: EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            metadata,
            models,
        },
        states,
    })
}
