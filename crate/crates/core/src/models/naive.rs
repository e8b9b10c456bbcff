//! History-only baselines that ignore the topics entirely.

use super::{EngagementModel, EventTopics, LearnerState, ModelError, ModelKind};
use crate::params::ModelParams;

/// Predicts that the learner repeats their last outcome; engaged on a first event.
#[derive(Debug, Clone)]
pub struct NaivePersistence {
    params: ModelParams,
}

impl NaivePersistence {
    pub fn new(params: ModelParams) -> Self {
        Self { params }
    }
}

impl EngagementModel for NaivePersistence {
    fn kind(&self) -> ModelKind {
        ModelKind::Persistence
    }

    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn predict(&self, state: &LearnerState, topics: &EventTopics) -> Result<f64, ModelError> {
        topics.require_nonempty()?;
        Ok(if state.last_label.unwrap_or(true) { 1.0 } else { 0.0 })
    }

    fn update(&self, state: &mut LearnerState, topics: &EventTopics, label: bool) -> Result<(), ModelError> {
        topics.require_nonempty()?;
        state.record_outcome(label);
        Ok(())
    }
}

/// Predicts the learner's mean past engagement; 0.5 before any history.
#[derive(Debug, Clone)]
pub struct NaiveMajority {
    params: ModelParams,
}

impl NaiveMajority {
    pub fn new(params: ModelParams) -> Self {
        Self { params }
    }
}

impl EngagementModel for NaiveMajority {
    fn kind(&self) -> ModelKind {
        ModelKind::Majority
    }

    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn predict(&self, state: &LearnerState, topics: &EventTopics) -> Result<f64, ModelError> {
        topics.require_nonempty()?;
        Ok(state.engagement_rate().unwrap_or(0.5))
    }

    fn update(&self, state: &mut LearnerState, topics: &EventTopics, label: bool) -> Result<(), ModelError> {
        topics.require_nonempty()?;
        state.record_outcome(label);
        Ok(())
    }
}
