//! Ranked knowledge-component annotations of fragments.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::models::{EventTopics, Topic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kc_id: String,
    #[serde(default)]
    pub kc_title: String,
    pub coverage: f64,
    pub rank: u32,
}

/// Entity-linker output for one fragment, one line of `annotations.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentAnnotation {
    pub fragment_id: String,
    pub candidates: Vec<Candidate>,
}

impl FragmentAnnotation {
    /// Ranks must be exactly 1..=n, coverages finite and non-negative, ids distinct.
    pub fn validate(&self) -> Result<(), DataError> {
        let invalid = |reason: String| {
            Err(DataError::InvalidAnnotation {
                fragment_id: self.fragment_id.clone(),
                reason,
            })
        };
        let mut ranks: Vec<u32> = self.candidates.iter().map(|c| c.rank).collect();
        ranks.sort_unstable();
        if ranks.iter().enumerate().any(|(i, &r)| r as usize != i + 1) {
            return invalid(format!("ranks must be 1..={}, got {:?}", ranks.len(), ranks));
        }
        let mut ids = HashSet::new();
        for c in &self.candidates {
            if !(c.coverage >= 0.0 && c.coverage.is_finite()) {
                return invalid(format!("coverage of `{}` is {}", c.kc_id, c.coverage));
            }
            if !ids.insert(c.kc_id.as_str()) {
                return invalid(format!("duplicate kc_id `{}`", c.kc_id));
            }
        }
        Ok(())
    }
}

/// The `k` best-ranked candidates as event topics, depth = coverage.
pub fn top_k_topics(ann: &FragmentAnnotation, k: usize) -> Result<EventTopics, DataError> {
    if ann.candidates.is_empty() {
        return Err(DataError::NoCandidates(ann.fragment_id.clone()));
    }
    let mut ranked: Vec<&Candidate> = ann.candidates.iter().collect();
    ranked.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.kc_id.cmp(&b.kc_id)));
    let topics = ranked
        .into_iter()
        .take(k.max(1))
        .map(|c| Topic::new(c.kc_id.clone(), c.coverage))
        .collect();
    EventTopics::new(topics).map_err(|e| DataError::InvalidAnnotation {
        fragment_id: ann.fragment_id.clone(),
        reason: e.to_string(),
    })
}
