use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use truelearn::store::save_snapshot;
use truelearn::{LearnerState, SkillBelief};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn truelearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_truelearn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn assert_json_close(got: &Value, want: &Value, path: &str) {
    match (got, want) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            assert!((a - b).abs() <= 1e-12, "{path}: {a} vs {b}");
        }
        (Value::Object(a), Value::Object(b)) => {
            assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>(), "{path}");
            for (k, v) in a {
                assert_json_close(v, &b[k], &format!("{path}.{k}"));
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            assert_eq!(a.len(), b.len(), "{path}");
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                assert_json_close(x, y, &format!("{path}[{i}]"));
            }
        }
        _ => assert_eq!(got, want, "{path}"),
    }
}

fn events20() -> PathBuf {
    fixture("events20.jsonl")
}

#[test]
fn evaluate_all_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = truelearn(&["evaluate", "--events", s(&events20()), "--model", "all", "--report", s(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let table = stdout(&out);
    let rows: Vec<&str> = table
        .lines()
        .filter(|l| ["truelearn", "vanilla", "kt", "persistence", "majority"].iter().any(|m| l.starts_with(m)))
        .collect();
    assert_eq!(rows.len(), 5);

    let got: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let want: Value = serde_json::from_str(&std::fs::read_to_string(fixture("events20.report.json")).unwrap()).unwrap();
    assert_json_close(&got, &want, "$");
}

#[test]
fn golden_report_baselines_match_hand_trace() {
    // Labels by learner (watch_ratio >= 0.75):
    //   ana 1 1 0 1 0 1 0 1, ben 0 1 1 0 1 0 1, cy 0 0 1 0 1
    let want: Value = serde_json::from_str(&std::fs::read_to_string(fixture("events20.report.json")).unwrap()).unwrap();
    let counts = |model: &str, learner: &str| -> [u64; 4] {
        let m = want["models"].as_array().unwrap().iter().find(|m| m["model"] == model).unwrap();
        let c = &m["learners"][learner];
        ["tp", "fp", "fn", "tn"].map(|k| c[k].as_u64().unwrap())
    };
    assert_eq!(counts("persistence", "ana"), [2, 3, 3, 0]);
    assert_eq!(counts("persistence", "ben"), [1, 3, 3, 0]);
    assert_eq!(counts("persistence", "cy"), [0, 2, 2, 1]);
    assert_eq!(counts("majority", "ana"), [5, 3, 0, 0]);
    assert_eq!(counts("majority", "ben"), [3, 3, 1, 0]);
    assert_eq!(counts("majority", "cy"), [0, 1, 2, 2]);
}

#[test]
fn evaluate_json_validates_against_schema() {
    let out = truelearn(&["evaluate", "--events", s(&events20()), "--format", "json"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report-schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn evaluate_is_deterministic_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let ev = events20();
    assert_eq!(code(&truelearn(&["evaluate", "--events", s(&ev), "--report", s(&a), "--workers", "1"])), 0);
    assert_eq!(code(&truelearn(&["evaluate", "--events", s(&ev), "--report", s(&b), "--workers", "4"])), 0);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn evaluate_missing_file_is_data_error() {
    let out = truelearn(&["evaluate", "--events", "/nonexistent/events.jsonl"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("/nonexistent/events.jsonl"));
}

#[test]
fn evaluate_malformed_line_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    let mut text = std::fs::read_to_string(events20()).unwrap();
    text.insert_str(0, "{not json}\n");
    std::fs::write(&path, text).unwrap();

    let out = truelearn(&["evaluate", "--events", s(&path)]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains(&format!("{}:1:", path.display())), "{}", stderr(&out));

    let out = truelearn(&["evaluate", "--events", s(&path), "--allow-invalid", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["metadata"]["parse_errors"], 1);
    assert_eq!(report["metadata"]["events_total"], 20);
}

#[test]
fn evaluate_single_model_and_skip_first() {
    let out = truelearn(&["evaluate", "--events", s(&events20()), "--model", "persistence", "--skip-first", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let models = report["models"].as_array().unwrap();
    assert_eq!(models.len(), 1);
    // ana's first event, a cold-start true positive, is not scored
    assert_eq!(models[0]["learners"]["ana"]["tp"], 1);
    assert_eq!(report["metadata"]["skip_first"], true);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("params.toml");
    std::fs::write(&cfg, "label_threshold = 0.5\nperf_noise = 0.25\n").unwrap();
    let ev = events20();
    let out = truelearn(&["evaluate", "--events", s(&ev), "--config", s(&cfg), "--set", "perf_noise=0.3", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["metadata"]["label_threshold"], 0.5);
    assert_eq!(report["metadata"]["params"]["perf_noise"], 0.3);
    // 0.74 now counts as engaged
    assert_eq!(report["metadata"]["engaged_total"], 12);

    assert_eq!(code(&truelearn(&["evaluate", "--events", s(&ev), "--set", "bogus=1"])), 2);
    assert_eq!(code(&truelearn(&["evaluate", "--events", s(&ev), "--set", "kt_guess=2"])), 2);
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(code(&truelearn(&["evaluate", "--events", s(&ev), "--config", s(&cfg)])), 2);
    assert_eq!(code(&truelearn(&["evaluate", "--events", s(&ev), "--config", "/nonexistent.toml"])), 2);
}

#[test]
fn bad_arguments_exit_2() {
    let ev = events20();
    assert_eq!(code(&truelearn(&["evaluate", "--events", s(&ev), "--model", "nope"])), 2);
    assert_eq!(code(&truelearn(&["evaluate", "--events", s(&ev), "--frobnicate"])), 2);
    assert_eq!(code(&truelearn(&["evaluate"])), 2);
    assert_eq!(code(&truelearn(&["nonsense"])), 2);
    assert_eq!(code(&truelearn(&["simulate", "--learners", "0", "--events", "1", "--topics", "5", "--out", "x"])), 2);
}

#[test]
fn help_documents_every_flag() {
    let expected: [(&str, &[&str]); 4] = [
        (
            "evaluate",
            &["--events", "--model", "--config", "--set", "--report", "--format", "--skip-first", "--seed", "--workers", "--allow-invalid", "--snapshot"],
        ),
        (
            "simulate",
            &["--learners", "--events", "--topics", "--per-event", "--epsilon", "--epsilon-range", "--seed", "--out", "--workers", "--config", "--set"],
        ),
        ("inspect", &["--snapshot", "--learner", "--top"]),
        (
            "ingest",
            &["--transcripts", "--annotations", "--interactions", "--threshold", "--target-len", "--topics-per-event", "--out"],
        ),
    ];
    for (cmd, flags) in expected {
        let out = truelearn(&[cmd, "--help"]);
        assert_eq!(code(&out), 0);
        let help = stdout(&out);
        for f in flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

#[test]
fn simulate_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = truelearn(&["simulate", "--learners", "2", "--events", "3", "--topics", "6", "--seed", "9", "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let events = std::fs::read_to_string(out_dir.join("events.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 6);
    let truth: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["seed"], 9);
    assert_eq!(truth["skills"].as_object().unwrap().len(), 2);

    // the generated file evaluates cleanly
    let eval = truelearn(&["evaluate", "--events", s(&out_dir.join("events.jsonl"))]);
    assert_eq!(code(&eval), 0, "{}", stderr(&eval));
}

#[test]
fn simulate_same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let d = dir.path().join(name);
        let out = truelearn(&[
            "simulate", "--learners", "4", "--events", "10", "--topics", "8", "--seed", "3", "--workers", workers, "--out", s(&d),
        ]);
        assert_eq!(code(&out), 0);
        (
            std::fs::read(d.join("events.jsonl")).unwrap(),
            std::fs::read(d.join("ground_truth.json")).unwrap(),
        )
    };
    assert_eq!(run("a", "1"), run("b", "3"));
}

#[test]
fn simulate_rejects_universe_smaller_than_plate() {
    let dir = tempfile::tempdir().unwrap();
    let out = truelearn(&["simulate", "--learners", "1", "--events", "1", "--topics", "4", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("smaller than topics per event"));
}

#[test]
fn simulate_infinite_margin_engages_everything() {
    let dir = tempfile::tempdir().unwrap();
    let out = truelearn(&["simulate", "--learners", "2", "--events", "5", "--topics", "5", "--epsilon", "inf", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let events = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    for line in events.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["watch_ratio"], 1.0);
    }
}

fn three_skill_snapshot(dir: &Path) -> PathBuf {
    let mut state = LearnerState::new();
    for (kc, mean, obs) in [("Algebra", 0.2, 4), ("Calculus", 1.1, 2), ("Topology", -0.7, 9)] {
        state.skills.insert(kc.into(), SkillBelief { mean, variance: 0.36, observations: obs });
    }
    state.event_count = 9;
    state.engaged_count = 5;
    let states: BTreeMap<String, LearnerState> = [
        ("learner-0001".to_owned(), state),
        ("learner-0002".to_owned(), LearnerState::new()),
        ("someone-else".to_owned(), LearnerState::new()),
    ]
    .into_iter()
    .collect();
    let path = dir.join("snapshot.jsonl");
    save_snapshot(&states, "test", &path).unwrap();
    path
}

#[test]
fn inspect_lists_skills_by_mean() {
    let dir = tempfile::tempdir().unwrap();
    let snap = three_skill_snapshot(dir.path());
    let out = truelearn(&["inspect", "--snapshot", s(&snap), "--learner", "learner-0001"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().skip(2).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["Calculus", "Algebra", "Topology"]);
    assert_eq!(rows[0][1..], ["1.1000", "0.6000", "2"]);

    let out = truelearn(&["inspect", "--snapshot", s(&snap), "--learner", "learner-0001", "--top", "1"]);
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("Calculus"));
}

#[test]
fn inspect_unknown_learner_suggests_ids() {
    let dir = tempfile::tempdir().unwrap();
    let snap = three_skill_snapshot(dir.path());
    let out = truelearn(&["inspect", "--snapshot", s(&snap), "--learner", "learner-001"]);
    assert_eq!(code(&out), 3);
    let err = stderr(&out);
    assert!(err.contains("learner-0001") && err.contains("learner-0002"), "{err}");
}

#[test]
fn inspect_missing_or_corrupt_snapshot_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&truelearn(&["inspect", "--snapshot", "/nonexistent.jsonl", "--learner", "x"])), 3);
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "garbage\n").unwrap();
    assert_eq!(code(&truelearn(&["inspect", "--snapshot", s(&bad), "--learner", "x"])), 3);
}

#[test]
fn evaluate_snapshot_feeds_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("snap.jsonl");
    let out = truelearn(&["evaluate", "--events", s(&events20()), "--snapshot", s(&snap)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = truelearn(&["inspect", "--snapshot", s(&snap), "--learner", "ana"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.starts_with("learner ana: 8 events, 5 engaged"), "{text}");
    // ana saw algebra, calculus and stats/prob
    assert_eq!(text.lines().skip(2).count(), 4);
}

fn ingest_args(annotations: &str, out: &Path) -> Vec<String> {
    let base = fixture("ingest");
    vec![
        "ingest".into(),
        "--transcripts".into(),
        base.join("transcripts").display().to_string(),
        "--annotations".into(),
        base.join(annotations).display().to_string(),
        "--interactions".into(),
        base.join("interactions.jsonl").display().to_string(),
        "--target-len".into(),
        "40".into(),
        "--out".into(),
        out.display().to_string(),
    ]
}

fn run_owned(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    truelearn(&refs)
}

#[test]
fn ingest_fixture_gives_four_events() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("events.jsonl");
    let out = run_owned(&ingest_args("annotations.jsonl", &out_path));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("fragments: 4") && text.contains("learners: 1") && text.contains("events: 4"), "{text}");
    assert!(text.contains("engagement rate: 0.7500"), "{text}");

    let events = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(events.lines().count(), 4);
    let eval = truelearn(&["evaluate", "--events", s(&out_path), "--format", "json"]);
    assert_eq!(code(&eval), 0);
    let report: Value = serde_json::from_str(&stdout(&eval)).unwrap();
    assert_eq!(report["metadata"]["engaged_total"], 3);
}

#[test]
fn ingest_rejects_threshold_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = ingest_args("annotations.jsonl", &dir.path().join("e.jsonl"));
    args.extend(["--threshold".into(), "1.01".into()]);
    assert_eq!(code(&run_owned(&args)), 2);
}

#[test]
fn ingest_reports_unannotated_fragment_and_keeps_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("events.jsonl");
    let out = run_owned(&ingest_args("annotations_partial.jsonl", &out_path));
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("nt-201#1"), "{}", stderr(&out));
    let events = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(events.lines().count(), 3);
    assert!(!events.contains("nt-201#1"));
}
