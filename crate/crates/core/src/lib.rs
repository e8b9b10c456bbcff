//! Online Bayesian learner models for predicting engagement with educational
//! video fragments, plus the data, evaluation and persistence plumbing around
//! them.

pub mod data;
pub mod eval;
pub mod gaussian;
pub mod models;
pub mod params;
pub mod store;
pub mod synthetic;

pub use models::{EngagementModel, EventTopics, LearnerState, ModelError, ModelKind, SkillBelief, Topic};
pub use params::ModelParams;
