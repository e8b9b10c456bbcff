//! TrueSkill-style models: the learner team is the event's skills (each with
//! performance noise β²), the content team is the fixed sum of topic depths.

use super::{EngagementModel, EventTopics, LearnerState, ModelError, ModelKind, SkillBelief};
use crate::gaussian::{std_normal_cdf, std_normal_inv_cdf, v_draw, v_win, w_draw, w_win, GaussianError};
use crate::params::ModelParams;

/// Latent performance difference between learner and content for one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoveltyGap {
    /// Σ skill means − Σ depths.
    pub mean_diff: f64,
    /// sqrt(Σ skill variances + T·β²).
    pub total_std: f64,
}

fn gap_of(beliefs: &[SkillBelief], topics: &EventTopics, params: &ModelParams) -> NoveltyGap {
    let mean: f64 = beliefs.iter().map(|b| b.mean).sum();
    let var: f64 = beliefs.iter().map(|b| b.variance).sum::<f64>()
        + beliefs.len() as f64 * params.perf_noise;
    NoveltyGap {
        mean_diff: mean - topics.total_depth(),
        total_std: var.sqrt(),
    }
}

pub fn novelty_gap(
    state: &LearnerState,
    topics: &EventTopics,
    params: &ModelParams,
) -> Result<NoveltyGap, ModelError> {
    topics.require_nonempty()?;
    let beliefs: Vec<_> = topics
        .iter()
        .map(|t| state.skill_or_prior(&t.kc_id, params))
        .collect();
    Ok(gap_of(&beliefs, topics, params))
}

/// Engagement margin ε_ℓ derived from the learner's empirical engagement rate:
/// the draw margin whose draw probability at zero skill gap equals the rate,
/// with `topic_count` noise terms on the learner side.
pub fn dynamic_margin(state: &LearnerState, topic_count: usize, params: &ModelParams) -> f64 {
    let (lo, hi) = params.rate_clamp;
    let rate = state.engagement_rate().map_or(0.5, |r| r.clamp(lo, hi));
    // rate ∈ (0,1) so the quantile argument is in (0.5, 1)
    let z = std_normal_inv_cdf(0.5 * (rate + 1.0)).unwrap_or(0.0);
    (z * (topic_count.max(1) as f64).sqrt() * params.perf_std()).max(params.margin_floor)
}

/// Post-dynamics beliefs for the event's skills.
fn diffused_beliefs(state: &LearnerState, topics: &EventTopics, params: &ModelParams) -> Vec<SkillBelief> {
    topics
        .iter()
        .map(|t| {
            let mut b = state.skill_or_prior(&t.kc_id, params);
            b.variance += params.dynamics;
            b
        })
        .collect()
}

/// Applies a truncation correction `(v, w)` oriented by `sign` (+1 when the
/// learner side is pushed up) and commits the new beliefs.
fn commit(
    state: &mut LearnerState,
    topics: &EventTopics,
    beliefs: Vec<SkillBelief>,
    gap: NoveltyGap,
    (sign, v, w): (f64, f64, f64),
    label: bool,
) {
    let c = gap.total_std;
    let c2 = c * c;
    for (topic, mut b) in topics.iter().zip(beliefs) {
        let var = b.variance;
        b.mean += sign * (var / c) * v;
        b.variance = var * (1.0 - (var / c2) * w);
        b.observations += 1;
        state.skills.insert(topic.kc_id.clone(), b);
    }
    state.record_outcome(label);
}

/// Knowledge-and-novelty model: a learner engages when the performance gap
/// falls inside their margin ε_ℓ (a TrueSkill draw).
#[derive(Debug, Clone)]
pub struct TrueLearnNovelty {
    params: ModelParams,
}

impl TrueLearnNovelty {
    pub fn new(params: ModelParams) -> Self {
        Self { params }
    }

    fn draw_correction(&self, t: f64, eps: f64, c: f64) -> Result<(f64, f64), GaussianError> {
        match v_draw(t, eps).and_then(|v| Ok((v, w_draw(t, eps)?))) {
            Err(GaussianError::DegenerateMargin { .. }) => {
                let floor = self.params.margin_floor / c;
                Ok((v_draw(t, floor)?, w_draw(t, floor)?))
            }
            other => other,
        }
    }
}

impl EngagementModel for TrueLearnNovelty {
    fn kind(&self) -> ModelKind {
        ModelKind::TrueLearn
    }

    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn predict(&self, state: &LearnerState, topics: &EventTopics) -> Result<f64, ModelError> {
        let gap = novelty_gap(state, topics, &self.params)?;
        let eps = dynamic_margin(state, topics.len(), &self.params);
        let c = gap.total_std;
        let p = std_normal_cdf((eps - gap.mean_diff) / c) - std_normal_cdf((-eps - gap.mean_diff) / c);
        Ok(p.clamp(0.0, 1.0))
    }

    fn update(
        &self,
        state: &mut LearnerState,
        topics: &EventTopics,
        label: bool,
    ) -> Result<(), ModelError> {
        topics.require_nonempty()?;
        let eps = dynamic_margin(state, topics.len(), &self.params);
        let beliefs = diffused_beliefs(state, topics, &self.params);
        let gap = gap_of(&beliefs, topics, &self.params);
        let c = gap.total_std;
        let t = gap.mean_diff / c;
        let (sign, v, w) = if label {
            let (v, w) = self.draw_correction(t, eps / c, c)?;
            (1.0, v, w)
        } else if gap.mean_diff >= 0.0 {
            // learner ahead: the content was too easy
            (1.0, v_win(t, eps / c), w_win(t, eps / c))
        } else {
            (-1.0, v_win(-t, eps / c), w_win(-t, eps / c))
        };
        commit(state, topics, beliefs, gap, (sign, v, w), label);
        Ok(())
    }
}

/// Plain TrueSkill: engagement is a learner win, disengagement a content win.
#[derive(Debug, Clone)]
pub struct VanillaTrueSkill {
    params: ModelParams,
}

impl VanillaTrueSkill {
    pub fn new(params: ModelParams) -> Self {
        Self { params }
    }
}

impl EngagementModel for VanillaTrueSkill {
    fn kind(&self) -> ModelKind {
        ModelKind::Vanilla
    }

    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn predict(&self, state: &LearnerState, topics: &EventTopics) -> Result<f64, ModelError> {
        let gap = novelty_gap(state, topics, &self.params)?;
        Ok(std_normal_cdf(gap.mean_diff / gap.total_std))
    }

    fn update(
        &self,
        state: &mut LearnerState,
        topics: &EventTopics,
        label: bool,
    ) -> Result<(), ModelError> {
        topics.require_nonempty()?;
        let beliefs = diffused_beliefs(state, topics, &self.params);
        let gap = gap_of(&beliefs, topics, &self.params);
        let t = gap.mean_diff / gap.total_std;
        let (sign, t) = if label { (1.0, t) } else { (-1.0, -t) };
        commit(state, topics, beliefs, gap, (sign, v_win(t, 0.0), w_win(t, 0.0)), label);
        Ok(())
    }
}
