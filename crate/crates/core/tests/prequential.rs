use std::collections::BTreeMap;

use proptest::prelude::*;
use truelearn::data::EventRecord;
use truelearn::eval::{evaluate, group_by_learner, RunOptions};
use truelearn::synthetic::{generate_dataset, SyntheticConfig};
use truelearn::{EventTopics, LearnerState, ModelKind, ModelParams, Topic};

fn event(i: usize, kcs: &[(u8, f64)], label: bool) -> EventRecord {
    EventRecord {
        learner_id: "l".into(),
        event_id: format!("e{i}"),
        timestamp: i as i64,
        fragment_id: format!("f{i}"),
        topics: EventTopics::new(kcs.iter().map(|&(k, d)| Topic::new(format!("k{k}"), d)).collect()).unwrap(),
        watch_ratio: if label { 1.0 } else { 0.0 },
        label,
    }
}

fn predictions(kind: ModelKind, events: &[EventRecord]) -> Vec<f64> {
    let model = kind.build(ModelParams::default());
    let mut state = LearnerState::new();
    events
        .iter()
        .map(|e| {
            let p = model.predict(&state, &e.topics).unwrap();
            model.update(&mut state, &e.topics, e.label).unwrap();
            p
        })
        .collect()
}

fn stream() -> impl Strategy<Value = Vec<(Vec<(u8, f64)>, bool)>> {
    prop::collection::vec(
        (prop::collection::btree_map(0u8..6, 0.0f64..1.5, 1..4).prop_map(|m| m.into_iter().collect()), any::<bool>()),
        2..25,
    )
}

proptest! {
    // Rewriting the labels from position k onward leaves predictions up to k untouched.
    #[test]
    fn no_leakage_from_future_labels(raw in stream(), cut in 0usize..25, flip in any::<bool>()) {
        let cut = cut % raw.len();
        let events: Vec<_> = raw.iter().enumerate().map(|(i, (k, l))| event(i, k, *l)).collect();
        let altered: Vec<_> = raw
            .iter()
            .enumerate()
            .map(|(i, (k, l))| event(i, k, if i >= cut { *l ^ flip ^ (i % 2 == 0) } else { *l }))
            .collect();
        for kind in ModelKind::ALL {
            let a = predictions(kind, &events);
            let b = predictions(kind, &altered);
            prop_assert_eq!(&a[..=cut], &b[..=cut]);
        }
    }
}

#[test]
fn report_does_not_depend_on_worker_count() {
    let data = generate_dataset(&SyntheticConfig::new(30, 40, 8, 5)).unwrap();
    let streams: BTreeMap<_, _> = group_by_learner(data.events);
    let run = |workers| {
        let opts = RunOptions { skip_first: false, workers: Some(workers) };
        evaluate(&streams, &ModelKind::ALL, &ModelParams::default(), opts, String::new(), 0, 1)
            .unwrap()
            .report
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
}
