//! Sampler for the knowledge-and-novelty engagement process with known
//! ground truth, used for recovery tests and benchmark datasets.
//!
//! Each learner owns a skill for every KC in the universe. Each event draws
//! `topics_per_event` distinct KCs with depths `|N(μ₀, σ₀²)|`, a performance
//! `skill + N(0, β²)` per topic, and is engaged iff
//! `|Σ performance − Σ depth| ≤ ε`.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::EventRecord;
use crate::models::{EventTopics, LearnerState, Topic};
use crate::params::ModelParams;

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticError {
    #[error("{0} must be >= 1")]
    ZeroCount(&'static str),
    #[error("topic universe ({universe}) smaller than topics per event ({per_event})")]
    UniverseTooSmall { universe: usize, per_event: usize },
    #[error("invalid margin: {0}")]
    InvalidMargin(String),
    #[error("learner `{0}` not present in the ground truth")]
    UnknownLearner(String),
    #[error("need at least {needed} qualifying (learner, KC) pairs, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("correlation undefined: one side has zero variance")]
    ZeroVariance,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Margin used to label synthetic events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginSpec {
    /// One ε for every learner; may be `+inf`.
    Global {
        #[serde(with = "extended_f64")]
        epsilon: f64,
    },
    /// ε_ℓ ~ Uniform(lo, hi) per learner.
    PerLearner { lo: f64, hi: f64 },
}

/// Default synthetic margin. Roughly 38% of events come out engaged at the
/// default prior, depth and noise settings.
pub const DEFAULT_EPSILON: f64 = 3.0;

impl Default for MarginSpec {
    fn default() -> Self {
        MarginSpec::Global {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub learners: usize,
    pub events_per_learner: usize,
    /// Size of the KC universe.
    pub topics: usize,
    pub topics_per_event: usize,
    pub params: ModelParams,
    pub margin: MarginSpec,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Output does not depend on it.
    pub workers: Option<usize>,
}

impl SyntheticConfig {
    pub fn new(learners: usize, events_per_learner: usize, topics: usize, seed: u64) -> Self {
        Self {
            learners,
            events_per_learner,
            topics,
            topics_per_event: 5,
            params: ModelParams::default(),
            margin: MarginSpec::default(),
            seed,
            workers: None,
        }
    }

    fn validate(&self) -> Result<(), SyntheticError> {
        for (name, n) in [
            ("learners", self.learners),
            ("events", self.events_per_learner),
            ("topics", self.topics),
            ("topics per event", self.topics_per_event),
        ] {
            if n == 0 {
                return Err(SyntheticError::ZeroCount(name));
            }
        }
        if self.topics < self.topics_per_event {
            return Err(SyntheticError::UniverseTooSmall {
                universe: self.topics,
                per_event: self.topics_per_event,
            });
        }
        match self.margin {
            MarginSpec::Global { epsilon } if epsilon.is_nan() || epsilon < 0.0 => {
                Err(SyntheticError::InvalidMargin(format!("epsilon {epsilon}")))
            }
            MarginSpec::PerLearner { lo, hi } if !(lo >= 0.0 && lo <= hi && hi.is_finite()) => {
                Err(SyntheticError::InvalidMargin(format!("range [{lo}, {hi}]")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFragment {
    pub learner_id: String,
    pub topics: EventTopics,
    /// Performance noise sampled for each topic, in topic order.
    pub noise: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub params: ModelParams,
    pub margin: MarginSpec,
    /// Margin actually applied to each learner.
    #[serde(with = "extended_f64_map")]
    pub epsilons: BTreeMap<String, f64>,
    pub skills: BTreeMap<String, BTreeMap<String, f64>>,
    pub fragments: BTreeMap<String, TruthFragment>,
}

fn engaged(skills: &BTreeMap<String, f64>, topics: &EventTopics, noise: &[f64], epsilon: f64) -> bool {
    let performance: f64 = topics
        .iter()
        .zip(noise)
        .map(|(t, n)| skills[&t.kc_id] + n)
        .sum();
    (performance - topics.total_depth()).abs() <= epsilon
}

impl GroundTruth {
    /// Recomputes the label of a stored fragment from the stored skills,
    /// depths, noise and margin.
    pub fn label_of(&self, fragment_id: &str) -> Option<bool> {
        let f = self.fragments.get(fragment_id)?;
        Some(engaged(
            self.skills.get(&f.learner_id)?,
            &f.topics,
            &f.noise,
            *self.epsilons.get(&f.learner_id)?,
        ))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("ground truth always serializes");
        s.push('\n');
        s
    }
}

pub fn learner_id(index: usize) -> String {
    format!("learner-{index:04}")
}

pub fn kc_id(index: usize) -> String {
    format!("kc-{index:03}")
}

const BASE_TIMESTAMP: i64 = 1_600_000_000;

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub events: Vec<EventRecord>,
    pub truth: GroundTruth,
}

impl SyntheticDataset {
    /// The events in `events.jsonl` form.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_json_line());
            out.push('\n');
        }
        out
    }
}

pub fn generate_dataset(config: &SyntheticConfig) -> Result<SyntheticDataset, SyntheticError> {
    config.validate()?;
    let params = &config.params;
    let skill_dist = Normal::new(params.prior_mean, params.prior_variance.sqrt())
        .map_err(|e| SyntheticError::InvalidMargin(e.to_string()))?;
    let noise_dist = Normal::new(0.0, params.perf_std())
        .map_err(|e| SyntheticError::InvalidMargin(e.to_string()))?;
    let kcs: Vec<String> = (0..config.topics).map(kc_id).collect();

    let generate = || -> Vec<LearnerSample> {
        (0..config.learners)
            .into_par_iter()
            .map(|li| sample_learner(config, li, &kcs, &skill_dist, &noise_dist))
            .collect()
    };
    let learners = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SyntheticError::Pool(e.to_string()))?
            .install(generate),
        None => generate(),
    };

    let mut truth = GroundTruth {
        seed: config.seed,
        params: params.clone(),
        margin: config.margin,
        epsilons: BTreeMap::new(),
        skills: BTreeMap::new(),
        fragments: BTreeMap::new(),
    };
    let mut events = Vec::with_capacity(config.learners * config.events_per_learner);
    for l in learners {
        truth.epsilons.insert(l.id.clone(), l.epsilon);
        truth.skills.insert(l.id, l.skills);
        truth.fragments.extend(l.fragments);
        events.extend(l.events);
    }
    Ok(SyntheticDataset { events, truth })
}

struct LearnerSample {
    id: String,
    epsilon: f64,
    skills: BTreeMap<String, f64>,
    events: Vec<EventRecord>,
    fragments: Vec<(String, TruthFragment)>,
}

fn sample_learner(
    config: &SyntheticConfig,
    li: usize,
    kcs: &[String],
    skill_dist: &Normal<f64>,
    noise_dist: &Normal<f64>,
) -> LearnerSample {
    let lid = learner_id(li);
    // one stream per learner keeps learners independent of each other
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2 * li as u64);
    let epsilon = match config.margin {
        MarginSpec::Global { epsilon } => epsilon,
        MarginSpec::PerLearner { lo, hi } => {
            let mut side = ChaCha8Rng::seed_from_u64(config.seed);
            side.set_stream(2 * li as u64 + 1);
            side.random_range(lo..=hi)
        }
    };
    let skills: BTreeMap<String, f64> = kcs
        .iter()
        .map(|k| (k.clone(), skill_dist.sample(&mut rng)))
        .collect();

    let mut events = Vec::with_capacity(config.events_per_learner);
    let mut fragments = Vec::with_capacity(config.events_per_learner);
    for ei in 0..config.events_per_learner {
        let picked = sample(&mut rng, config.topics, config.topics_per_event);
        let topics: Vec<Topic> = picked
            .iter()
            .map(|k| Topic::new(kcs[k].clone(), skill_dist.sample(&mut rng).abs()))
            .collect();
        let noise: Vec<f64> = (0..topics.len()).map(|_| noise_dist.sample(&mut rng)).collect();
        let topics = EventTopics::new(topics).expect("distinct KCs with finite depths");
        let label = engaged(&skills, &topics, &noise, epsilon);
        let fragment_id = format!("frag-{li:04}-{ei:04}");
        events.push(EventRecord {
            learner_id: lid.clone(),
            event_id: format!("ev-{li:04}-{ei:04}"),
            timestamp: BASE_TIMESTAMP + 600 * ei as i64,
            fragment_id: fragment_id.clone(),
            topics: topics.clone(),
            watch_ratio: if label { 1.0 } else { 0.0 },
            label,
        });
        fragments.push((
            fragment_id,
            TruthFragment {
                learner_id: lid.clone(),
                topics,
                noise,
            },
        ));
    }
    LearnerSample {
        id: lid,
        epsilon,
        skills,
        events,
        fragments,
    }
}

/// Pearson correlation between true skills and fitted posterior means over
/// (learner, KC) pairs observed at least `min_observations` times.
pub fn skill_recovery_score(
    truth: &GroundTruth,
    fitted: &BTreeMap<String, LearnerState>,
    min_observations: u64,
) -> Result<f64, SyntheticError> {
    const MIN_PAIRS: usize = 10;
    let mut pairs = Vec::new();
    for (lid, state) in fitted {
        let true_skills = truth
            .skills
            .get(lid)
            .ok_or_else(|| SyntheticError::UnknownLearner(lid.clone()))?;
        for (kc, belief) in &state.skills {
            if belief.observations < min_observations {
                continue;
            }
            if let Some(&s) = true_skills.get(kc) {
                pairs.push((s, belief.mean));
            }
        }
    }
    if pairs.len() < MIN_PAIRS {
        return Err(SyntheticError::InsufficientData {
            needed: MIN_PAIRS,
            found: pairs.len(),
        });
    }
    pearson(&pairs).ok_or(SyntheticError::ZeroVariance)
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// JSON has no infinities; encode them as strings.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Num(f64),
        Text(String),
    }

    pub(super) fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(E::custom),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

mod extended_f64_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::extended_f64::{from_repr, Repr};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        struct Ext(f64);
        impl serde::Serialize for Ext {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::extended_f64::serialize(&self.0, s)
            }
        }
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &Ext(*v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        BTreeMap::<String, Repr>::deserialize(d)?
            .into_iter()
            .map(|(k, r)| Ok((k, from_repr(r)?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SkillBelief;

    fn small(epsilon: f64) -> SyntheticConfig {
        SyntheticConfig {
            margin: MarginSpec::Global { epsilon },
            ..SyntheticConfig::new(3, 40, 8, 7)
        }
    }

    fn rate(d: &SyntheticDataset) -> f64 {
        d.events.iter().filter(|e| e.label).count() as f64 / d.events.len() as f64
    }

    #[test]
    fn infinite_margin_engages_everything() {
        assert_eq!(rate(&generate_dataset(&small(f64::INFINITY)).unwrap()), 1.0);
    }

    #[test]
    fn zero_margin_engages_nothing() {
        assert_eq!(rate(&generate_dataset(&small(0.0)).unwrap()), 0.0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_dataset(&small(1.0)).unwrap();
        let b = generate_dataset(&small(1.0)).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.truth.to_json(), b.truth.to_json());
        let c = generate_dataset(&SyntheticConfig { seed: 8, ..small(1.0) }).unwrap();
        assert_ne!(a.to_jsonl(), c.to_jsonl());
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let one = generate_dataset(&SyntheticConfig { workers: Some(1), ..small(1.0) }).unwrap();
        let four = generate_dataset(&SyntheticConfig { workers: Some(4), ..small(1.0) }).unwrap();
        assert_eq!(one.to_jsonl(), four.to_jsonl());
        assert_eq!(one.truth.to_json(), four.truth.to_json());
    }

    #[test]
    fn shape_and_labels_consistent() {
        let d = generate_dataset(&small(1.5)).unwrap();
        assert_eq!(d.events.len(), 120);
        for e in &d.events {
            assert_eq!(e.topics.len(), 5);
            assert_eq!(d.truth.label_of(&e.fragment_id), Some(e.label));
            assert_eq!(e.watch_ratio, if e.label { 1.0 } else { 0.0 });
        }
        let back: GroundTruth = serde_json::from_str(&d.truth.to_json()).unwrap();
        assert_eq!(back, d.truth);
    }

    #[test]
    fn infinite_margin_survives_json() {
        let d = generate_dataset(&small(f64::INFINITY)).unwrap();
        let back: GroundTruth = serde_json::from_str(&d.truth.to_json()).unwrap();
        assert_eq!(back.epsilons["learner-0000"], f64::INFINITY);
    }

    #[test]
    fn engagement_rate_monotone_in_margin() {
        let mut prev = 0.0;
        for eps in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let r = rate(&generate_dataset(&small(eps)).unwrap());
            assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn per_learner_margins_within_range() {
        let cfg = SyntheticConfig {
            margin: MarginSpec::PerLearner { lo: 0.5, hi: 3.0 },
            ..small(0.0)
        };
        let d = generate_dataset(&cfg).unwrap();
        assert!(d.truth.epsilons.values().all(|e| (0.5..=3.0).contains(e)));
        for e in &d.events {
            assert_eq!(d.truth.label_of(&e.fragment_id), Some(e.label));
        }
    }

    #[test]
    fn validation() {
        let mut cfg = small(1.0);
        cfg.topics = 4;
        assert_eq!(
            generate_dataset(&cfg).unwrap_err(),
            SyntheticError::UniverseTooSmall { universe: 4, per_event: 5 }
        );
        cfg.topics = 8;
        cfg.learners = 0;
        assert!(matches!(generate_dataset(&cfg), Err(SyntheticError::ZeroCount(_))));
    }

    fn fitted_from(truth: &GroundTruth, mut f: impl FnMut(f64) -> f64) -> BTreeMap<String, LearnerState> {
        truth
            .skills
            .iter()
            .map(|(lid, skills)| {
                let mut s = LearnerState::new();
                for (kc, &v) in skills {
                    s.skills.insert(kc.clone(), SkillBelief { mean: f(v), variance: 0.1, observations: 9 });
                }
                (lid.clone(), s)
            })
            .collect()
    }

    #[test]
    fn recovery_score_extremes() {
        let d = generate_dataset(&small(1.0)).unwrap();
        let exact = skill_recovery_score(&d.truth, &fitted_from(&d.truth, |v| v), 5).unwrap();
        assert!((exact - 1.0).abs() < 1e-12);
        let neg = skill_recovery_score(&d.truth, &fitted_from(&d.truth, |v| -v), 5).unwrap();
        assert!((neg + 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovery_score_null_distribution() {
        let d = generate_dataset(&SyntheticConfig::new(50, 1, 20, 3)).unwrap();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let fitted = fitted_from(&d.truth, |_| normal.sample(&mut rng));
        let r = skill_recovery_score(&d.truth, &fitted, 5).unwrap();
        assert!(r.abs() < 0.1, "r = {r}");
    }

    #[test]
    fn recovery_score_errors() {
        let d = generate_dataset(&small(1.0)).unwrap();
        let mut few = fitted_from(&d.truth, |v| v);
        for s in few.values_mut() {
            for b in s.skills.values_mut() {
                b.observations = 1;
            }
        }
        assert!(matches!(
            skill_recovery_score(&d.truth, &few, 5),
            Err(SyntheticError::InsufficientData { .. })
        ));
        let stranger = BTreeMap::from([("nobody".to_string(), LearnerState::new())]);
        assert!(matches!(
            skill_recovery_score(&d.truth, &stranger, 5),
            Err(SyntheticError::UnknownLearner(_))
        ));
    }
}
