use cberlab::harness::{list_experiments, run_experiment, ExperimentConfig, Report, REPORT_SCHEMA};
use serde_json::{json, Value};

const SCHEMA: &str = include_str!("../schema/report.schema.json");

fn config(v: Value) -> ExperimentConfig {
    ExperimentConfig::from_json_str(&v.to_string()).unwrap()
}

fn small_suite() -> ExperimentConfig {
    config(json!({
        "id": "small",
        "experiment": "acceptance",
        "seed": 11,
        "params": {"jobs": [
            {"experiment": "walk-frequencies", "params": {"steps": 20000, "walks": 4, "tolerance": 0.05}},
            {"experiment": "bijection-equivariance", "params": {"cases": 12}},
            {"experiment": "dyadic", "params": {"successor_len": 8, "transitivity_len": 5, "flip_len": 6, "conjugation_len": 6}},
            {"experiment": "determinism"}
        ]}
    }))
}

fn schema_errors(report: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path())).collect()
}

fn validate(report: &Report) -> Vec<String> {
    schema_errors(&report.to_json())
}

#[test]
fn small_suite_passes_and_validates() {
    let r = run_experiment(&small_suite()).unwrap();
    assert!(r.pass, "{}", serde_json::to_string_pretty(&r.to_json()).unwrap());
    assert_eq!(r.schema, REPORT_SCHEMA);
    assert_eq!(r.jobs.len(), 4);
    assert_eq!(validate(&r), Vec::<String>::new());
    let mut broken = r.to_json();
    broken["jobs"][0]["checks"][0]["pass"] = json!(false);
    assert!(!schema_errors(&broken).is_empty(), "a FAIL without a replay blob must not validate");
    broken = r.to_json();
    broken.as_object_mut().unwrap().remove("timing");
    assert!(!schema_errors(&broken).is_empty());
    // Jobs without a seed take split seeds, all distinct.
    let mut seeds: Vec<u64> = r.jobs.iter().map(|j| j.seed).collect();
    seeds.dedup();
    assert_eq!(seeds.len(), 4);
}

#[test]
fn replaying_a_config_is_byte_identical() {
    let a = run_experiment(&small_suite()).unwrap();
    let b = run_experiment(&small_suite()).unwrap();
    assert_eq!(a.deterministic_bytes(), b.deterministic_bytes());
    let mut other = small_suite();
    other.seed += 1;
    let c = run_experiment(&other).unwrap();
    assert_ne!(a.deterministic_bytes(), c.deterministic_bytes());
}

#[test]
fn broken_tolerance_fails_with_a_replay_blob() {
    let cfg = config(json!({
        "id": "broken",
        "experiment": "walk-frequencies",
        "seed": 7,
        "params": {"steps": 2000, "walks": 2, "tolerance": 1e-12}
    }));
    let r = run_experiment(&cfg).unwrap();
    assert!(!r.pass);
    assert_eq!(validate(&r), Vec::<String>::new());
    let failed: Vec<_> = r.checks().filter(|(_, c)| !c.pass).collect();
    assert!(!failed.is_empty());
    for (_, c) in &failed {
        let replay = c.replay.as_ref().expect("failing checks carry a replay blob");
        assert_eq!(replay["job"]["experiment"], "walk-frequencies");
        assert_eq!(replay["job"]["seed"], 7);
        assert_eq!(replay["job"]["params"]["tolerance"], 1e-12);
    }
    for (_, c) in r.checks().filter(|(_, c)| c.pass) {
        assert!(c.replay.is_none());
    }
    // The blob is itself a runnable job that fails the same way.
    let blob = &failed[0].1.replay.as_ref().unwrap()["job"];
    let again = config(json!({"id": "replay", "experiment": blob["experiment"], "seed": blob["seed"], "params": blob["params"]}));
    assert_eq!(run_experiment(&again).unwrap().jobs[0].checks, r.jobs[0].checks);
}

#[test]
fn acceptance_config_covers_the_catalogue() {
    let cfg = ExperimentConfig::acceptance();
    let jobs = cfg.jobs().unwrap();
    for e in list_experiments().iter().filter(|e| e.id != "acceptance") {
        assert!(jobs.iter().any(|j| j.experiment == e.id), "{} missing from the acceptance config", e.id);
    }
    assert_eq!(jobs.last().unwrap().experiment, "determinism");
}

#[test]
fn outputs_are_written() {
    let dir = std::env::temp_dir().join(format!("cberlab-outputs-{}", std::process::id()));
    let mut cfg = config(json!({
        "id": "curve",
        "experiment": "ramsey-obstruction",
        "seed": 3,
        "params": {"brute_max_n": 6, "per_n": 3, "large_n": 16, "large_samples": 10, "band": [2.0, 16.0], "curve_max": 3}
    }));
    cfg.outputs.report = Some(dir.join("report.json"));
    cfg.outputs.csv_dir = Some(dir.join("csv"));
    let r = run_experiment(&cfg).unwrap();
    let written = r.write_outputs().unwrap();
    assert_eq!(written.len(), 2, "{written:?}");
    let back: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(back, r.to_json());
    let csv = std::fs::read_to_string(dir.join("csv").join("delta_star.csv")).unwrap();
    assert!(csv.lines().count() >= 4, "{csv}");
    std::fs::remove_dir_all(dir).unwrap();
}
