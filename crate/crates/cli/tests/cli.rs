use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn cberlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cberlab")).args(args).current_dir(dir).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr)))
}

/// A scratch directory removed on drop.
struct Scratch(PathBuf);

impl Scratch {
    fn new(name: &str) -> Scratch {
        let dir = std::env::temp_dir().join(format!("cberlab-cli-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn write(&self, name: &str, v: &Value) -> PathBuf {
        let p = self.0.join(name);
        std::fs::write(&p, v.to_string()).unwrap();
        p
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

#[test]
fn list_prints_the_catalogue() {
    let s = Scratch::new("list");
    let out = cberlab(&["list", "--json"], &s.0);
    assert!(out.status.success());
    let ids: Vec<String> = stdout_json(&out).as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap().to_string()).collect();
    assert!(ids.contains(&"acceptance".to_string()) && ids.contains(&"determinism".to_string()));
    let text = cberlab(&["list"], &s.0);
    assert_eq!(String::from_utf8(text.stdout).unwrap().lines().count(), ids.len());
}

#[test]
fn run_exit_code_follows_the_checks() {
    let s = Scratch::new("run");
    let good = s.write("good.json", &json!({"id": "g", "experiment": "walk-frequencies", "seed": 7,
        "params": {"steps": 20000, "walks": 4, "tolerance": 0.05}}));
    let out = cberlab(&["run", good.to_str().unwrap(), "--report", "r.json"], &s.0);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(s.0.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS [walk-frequencies]"));

    let bad = s.write("bad.json", &json!({"id": "b", "experiment": "walk-frequencies", "seed": 7,
        "params": {"steps": 2000, "walks": 2, "tolerance": 1e-12}}));
    let out = cberlab(&["run", bad.to_str().unwrap()], &s.0);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_json(&out);
    assert_eq!(report["pass"], false);
    assert!(report["jobs"][0]["checks"].as_array().unwrap().iter().any(|c| c["pass"] == false && c["replay"]["job"]["seed"] == 7));

    let unknown = s.write("unknown.json", &json!({"id": "u", "experiment": "nope", "seed": 1}));
    let out = cberlab(&["run", unknown.to_str().unwrap()], &s.0);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown experiment 'nope'"));
}

#[test]
fn walk_frequency_verdict() {
    let s = Scratch::new("walk");
    let out = cberlab(&["walk", "freq", "--target", "3Z", "--steps", "50000", "--walks", "4", "--seed", "7"], &s.0);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "PASS");
    assert!((v["estimate"].as_f64().unwrap() - 1.0 / 3.0).abs() < 0.02);
}

#[test]
fn ire_writes_certificates() {
    let s = Scratch::new("ire");
    let out = cberlab(&["ire", "max-density", "--window", "3", "--certificate", "c.json"], &s.0);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["delta_star"], "3/4");
    let cert: Value = serde_json::from_str(&std::fs::read_to_string(s.0.join("c.json")).unwrap()).unwrap();
    assert!(cert.get("certificate").is_some());

    let out = cberlab(&["ire", "feasible", "--problem", "linearization", "--window", "4"], &s.0);
    assert_eq!(stdout_json(&out)["verdict"], "FEASIBLE");
    let out = cberlab(&["ire", "feasible", "--problem", "ramsey", "--window", "4", "--min-density", "9/10"], &s.0);
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "INFEASIBLE");
    assert_eq!(v["certificate_kind"], "farkas");
}

#[test]
fn gallery_verbs() {
    let s = Scratch::new("gallery");
    let out = cberlab(&["gallery", "dyadic", "--check", "successor", "--len", "8"], &s.0);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["counterexamples"], 0);
    let out = cberlab(&["gallery", "dyadic", "--check", "flip", "--len", "40"], &s.0);
    assert_eq!(out.status.code(), Some(2));

    let out = cberlab(&["gallery", "ramsey-clique", "--n", "12", "--samples", "5", "--seed", "7"], &s.0);
    let v = stdout_json(&out);
    assert_eq!(v["samples"], 5);
    assert!(v["min"].as_u64().unwrap() >= 2);

    for problem in ["ramsey", "linearization", "zline"] {
        let out = cberlab(&["gallery", "adversary", "--problem", problem], &s.0);
        assert!(out.status.success(), "{problem}: {}", String::from_utf8_lossy(&out.stderr));
        let v = stdout_json(&out);
        assert!(v.get("defeat").is_some(), "{problem}: {v}");
        assert_eq!(v["replayed"], true, "{problem}");
    }
}

fn pattern(relations: Value, language: Value, universe: std::ops::RangeInclusive<i64>) -> Value {
    json!({"group": "Z", "language": language, "universe": universe.collect::<Vec<_>>(), "relations": relations})
}

fn tuples(p: &Value, name: &str) -> Vec<Vec<i64>> {
    serde_json::from_value(p["relations"][name].clone()).unwrap()
}

#[test]
fn expand_decorates_patterns() {
    let s = Scratch::new("expand");
    let ab = s.write("ab.json", &pattern(json!({"A": [[0], [2]], "B": [[1], [3], [4]]}),
        json!([{"name": "A", "arity": 1}, {"name": "B", "arity": 1}]), -4..=4));
    let out = cberlab(&["expand", "bijection", ab.to_str().unwrap()], &s.0);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let phi = tuples(&stdout_json(&out), "Phi");
    assert_eq!(phi.len(), 2);
    let (dom, ran): (Vec<i64>, Vec<i64>) = phi.iter().map(|t| (t[0], t[1])).unzip();
    assert_eq!({ let mut d = dom.clone(); d.sort(); d }, vec![0, 2]);
    assert!(ran.iter().all(|y| [1, 3, 4].contains(y)));

    let edges: Vec<[i64; 2]> = (-3..3).flat_map(|x| [[x, x + 1], [x + 1, x]]).collect();
    let line = s.write("line.json", &pattern(json!({"E": edges}), json!([{"name": "E", "arity": 2}]), -3..=3));
    let out = cberlab(&["expand", "forest", line.to_str().unwrap(), "--out", "forest.json"], &s.0);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let forest: Value = serde_json::from_str(&std::fs::read_to_string(s.0.join("forest.json")).unwrap()).unwrap();
    assert_eq!(tuples(&forest, "T").len(), 12);

    let out = cberlab(&["expand", "colouring", line.to_str().unwrap()], &s.0);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(report["uncoloured"], 0);
    assert!(report["colours_used"].as_u64().unwrap() <= 3);

    let p = s.write("p.json", &pattern(json!({"P": [[0, 1], [2, 3]]}), json!([{"name": "P", "arity": 2}]), 0..=3));
    let out = cberlab(&["expand", "linearize", p.to_str().unwrap()], &s.0);
    let l = tuples(&stdout_json(&out), "L");
    assert_eq!(l.len(), 6);
    assert!(l.contains(&vec![0, 1]) && l.contains(&vec![2, 3]));

    let t = s.write("t.json", &pattern(json!({"T": [[0, 1], [1, 2], [1, 3]]}), json!([{"name": "T", "arity": 2}]), 0..=3));
    let out = cberlab(&["expand", "tree-order", t.to_str().unwrap()], &s.0);
    assert_eq!(tuples(&stdout_json(&out), "L").len(), 6);

    let z = s.write("z.json", &json!({"group": "Z", "blocks": [{"kind": "z"}, {"kind": "fin", "size": 1}],
        "assign": [[0, 0, 0, 0], [1, 0, 0, 1], [2, 1, 0, 0]], "freqs": {"0": 0.6, "1": 0.4}}));
    let out = cberlab(&["expand", "zline", z.to_str().unwrap()], &s.0);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_json(&out)["relations"].get("L").is_some());

    let out = cberlab(&["expand", "linearize", line.to_str().unwrap()], &s.0);
    assert_eq!(out.status.code(), Some(2));
}
