//! Multi-skill knowledge tracing: binary mastery per KC, engagement requires
//! mastery of every topic in the event (noisy-AND with guess and slip).

use super::{EngagementModel, EventTopics, LearnerState, ModelError, ModelKind};
use crate::params::ModelParams;

/// Mastery probabilities are kept inside `[KT_BOUND, 1 − KT_BOUND]`.
const KT_BOUND: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MultiSkillKt {
    params: ModelParams,
}

impl MultiSkillKt {
    pub fn new(params: ModelParams) -> Self {
        Self { params }
    }

    fn masteries(&self, state: &LearnerState, topics: &EventTopics) -> Vec<f64> {
        topics
            .iter()
            .map(|t| state.kt_or_prior(&t.kc_id, &self.params))
            .collect()
    }

    /// Mean-field posterior of each mastery given the outcome, before the
    /// learning transition.
    fn posteriors(&self, probs: &[f64], label: bool) -> Vec<f64> {
        let (g, s) = (self.params.kt_guess, self.params.kt_slip);
        (0..probs.len())
            .map(|i| {
                let others: f64 = probs
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, p)| p)
                    .product();
                let p = probs[i];
                let (mastered, unmastered) = if label {
                    ((1.0 - s) * others + g * (1.0 - others), g)
                } else {
                    (s * others + (1.0 - g) * (1.0 - others), 1.0 - g)
                };
                let num = p * mastered;
                num / (num + (1.0 - p) * unmastered)
            })
            .collect()
    }
}

impl EngagementModel for MultiSkillKt {
    fn kind(&self) -> ModelKind {
        ModelKind::Kt
    }

    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn predict(&self, state: &LearnerState, topics: &EventTopics) -> Result<f64, ModelError> {
        topics.require_nonempty()?;
        let all: f64 = self.masteries(state, topics).iter().product();
        Ok((1.0 - self.params.kt_slip) * all + self.params.kt_guess * (1.0 - all))
    }

    fn update(
        &self,
        state: &mut LearnerState,
        topics: &EventTopics,
        label: bool,
    ) -> Result<(), ModelError> {
        topics.require_nonempty()?;
        let probs = self.masteries(state, topics);
        let learn = self.params.kt_learn;
        for (topic, post) in topics.iter().zip(self.posteriors(&probs, label)) {
            let next = post + (1.0 - post) * learn;
            state
                .kt_skills
                .insert(topic.kc_id.clone(), next.clamp(KT_BOUND, 1.0 - KT_BOUND));
        }
        state.record_outcome(label);
        Ok(())
    }
}
