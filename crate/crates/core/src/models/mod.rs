//! Engagement predictors applied per learner in an online fashion.
//!
//! All five models share the [`EngagementModel`] contract: `predict` reads a
//! [`LearnerState`] without touching it, `update` folds one labelled event
//! into it. Events of one learner must be fed in timestamp order; distinct
//! learners are independent.

mod kt;
mod naive;
mod skill;

pub use kt::MultiSkillKt;
pub use naive::{NaiveMajority, NaivePersistence};
pub use skill::{dynamic_margin, novelty_gap, NoveltyGap, TrueLearnNovelty, VanillaTrueSkill};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian::GaussianError;
use crate::params::ModelParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("event has no topics")]
    EmptyTopics,
    #[error("duplicate topic `{0}` in event")]
    DuplicateTopic(String),
    #[error("topic `{kc_id}` has invalid depth {depth}")]
    InvalidDepth { kc_id: String, depth: f64 },
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

/// Gaussian belief over a learner's skill in one knowledge component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillBelief {
    pub mean: f64,
    pub variance: f64,
    /// Number of events in which this skill took part.
    #[serde(default)]
    pub observations: u64,
}

impl SkillBelief {
    pub fn prior(params: &ModelParams) -> Self {
        Self {
            mean: params.prior_mean,
            variance: params.prior_variance,
            observations: 0,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Everything any of the models remembers about one learner.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub skills: BTreeMap<String, SkillBelief>,
    pub engaged_count: u64,
    pub event_count: u64,
    pub last_label: Option<bool>,
    /// Mastery probabilities for knowledge tracing.
    pub kt_skills: BTreeMap<String, f64>,
}

impl LearnerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// The stored belief, or the prior if this KC has not been seen yet.
    pub fn skill_or_prior(&self, kc_id: &str, params: &ModelParams) -> SkillBelief {
        self.skills
            .get(kc_id)
            .copied()
            .unwrap_or_else(|| SkillBelief::prior(params))
    }

    pub fn kt_or_prior(&self, kc_id: &str, params: &ModelParams) -> f64 {
        self.kt_skills.get(kc_id).copied().unwrap_or(params.kt_prior)
    }

    /// Fraction of past events labelled engaged, if there are any.
    pub fn engagement_rate(&self) -> Option<f64> {
        (self.event_count > 0).then(|| self.engaged_count as f64 / self.event_count as f64)
    }

    fn record_outcome(&mut self, label: bool) {
        self.event_count += 1;
        if label {
            self.engaged_count += 1;
        }
        self.last_label = Some(label);
    }
}

/// Fresh state: empty maps, zero counters. Skills appear lazily at the prior.
pub fn init_state(_params: &ModelParams) -> LearnerState {
    LearnerState::new()
}

/// One knowledge component annotated on a fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub kc_id: String,
    /// Coverage of the KC in the fragment; the content side of the match.
    pub depth: f64,
}

impl Topic {
    pub fn new(kc_id: impl Into<String>, depth: f64) -> Self {
        Self {
            kc_id: kc_id.into(),
            depth,
        }
    }
}

/// The top-ranked topics of a fragment, in annotation rank order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventTopics(Vec<Topic>);

impl EventTopics {
    pub fn new(topics: Vec<Topic>) -> Result<Self, ModelError> {
        let mut seen = HashSet::with_capacity(topics.len());
        for t in &topics {
            if !(t.depth >= 0.0 && t.depth.is_finite()) {
                return Err(ModelError::InvalidDepth {
                    kc_id: t.kc_id.clone(),
                    depth: t.depth,
                });
            }
            if !seen.insert(t.kc_id.as_str()) {
                return Err(ModelError::DuplicateTopic(t.kc_id.clone()));
            }
        }
        Ok(Self(topics))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Topic> {
        self.0.iter()
    }

    pub fn total_depth(&self) -> f64 {
        self.0.iter().map(|t| t.depth).sum()
    }

    pub fn as_slice(&self) -> &[Topic] {
        &self.0
    }

    fn require_nonempty(&self) -> Result<(), ModelError> {
        if self.0.is_empty() {
            Err(ModelError::EmptyTopics)
        } else {
            Ok(())
        }
    }
}

impl<'a> IntoIterator for &'a EventTopics {
    type Item = &'a Topic;
    type IntoIter = std::slice::Iter<'a, Topic>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[serde(rename = "truelearn")]
    TrueLearn,
    Vanilla,
    Kt,
    Persistence,
    Majority,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::TrueLearn,
        ModelKind::Vanilla,
        ModelKind::Kt,
        ModelKind::Persistence,
        ModelKind::Majority,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::TrueLearn => "truelearn",
            ModelKind::Vanilla => "vanilla",
            ModelKind::Kt => "kt",
            ModelKind::Persistence => "persistence",
            ModelKind::Majority => "majority",
        }
    }

    pub fn build(self, params: ModelParams) -> Box<dyn EngagementModel> {
        match self {
            ModelKind::TrueLearn => Box::new(TrueLearnNovelty::new(params)),
            ModelKind::Vanilla => Box::new(VanillaTrueSkill::new(params)),
            ModelKind::Kt => Box::new(MultiSkillKt::new(params)),
            ModelKind::Persistence => Box::new(NaivePersistence::new(params)),
            ModelKind::Majority => Box::new(NaiveMajority::new(params)),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model `{s}`"))
    }
}

pub trait EngagementModel: Send + Sync {
    fn kind(&self) -> ModelKind;

    fn params(&self) -> &ModelParams;

    /// Probability that the learner engages with a fragment covering `topics`.
    fn predict(&self, state: &LearnerState, topics: &EventTopics) -> Result<f64, ModelError>;

    /// Folds one observed outcome into `state`. On error the state is left
    /// untouched.
    fn update(
        &self,
        state: &mut LearnerState,
        topics: &EventTopics,
        label: bool,
    ) -> Result<(), ModelError>;

    /// Binary decision; ties at the threshold resolve to engaged.
    fn decide(&self, state: &LearnerState, topics: &EventTopics) -> Result<bool, ModelError> {
        Ok(self.predict(state, topics)? >= self.params().decision_threshold)
    }
}
