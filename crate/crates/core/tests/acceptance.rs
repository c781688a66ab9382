//! Runs the shipped acceptance config and prints one line per criterion.
//! Criterion 12 is checked twice: by the suite's own determinism job, which
//! replays every job on a different thread count, and by replaying the whole
//! config and comparing report bytes.

use std::process::ExitCode;

use cberlab::harness::{run_experiment, ExperimentConfig, Report};

const CRITERIA: [(u32, &str, &str); 12] = [
    (1, "bijection-recursion", "bijection recursion"),
    (2, "bijection-equivariance", "bijection equivariance"),
    (3, "colouring", "equivariant colouring"),
    (4, "spanning-forest", "spanning forest"),
    (5, "walk-frequencies", "visit frequencies"),
    (6, "visit-profiles", "visit profiles"),
    (7, "mass-transport", "mass transport"),
    (8, "ramsey-obstruction", "Ramsey obstruction"),
    (9, "lp-soundness", "LP soundness"),
    (10, "dyadic", "dyadic gallery"),
    (11, "adversaries", "adversaries"),
    (12, "determinism", "determinism"),
];

fn run() -> Report {
    let cfg = ExperimentConfig::acceptance();
    run_experiment(&cfg).unwrap_or_else(|e| panic!("acceptance config did not run: {e}"))
}

fn main() -> ExitCode {
    let first = run();
    let second = run();
    let replayed = first.deterministic_bytes() == second.deterministic_bytes();
    let mut all = true;
    for (n, id, title) in CRITERIA {
        let jobs: Vec<_> = first.jobs.iter().filter(|j| j.experiment == id).collect();
        let mut pass = !jobs.is_empty() && jobs.iter().all(|j| j.pass);
        let checks: usize = jobs.iter().map(|j| j.checks.len()).sum();
        let failed: Vec<&str> =
            jobs.iter().flat_map(|j| j.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str())).collect();
        let mut detail = format!("{} checks", checks);
        if n == 12 {
            pass &= replayed;
            detail += if replayed { ", full config replays byte-identically" } else { ", full config replay DIFFERS" };
        }
        if !failed.is_empty() {
            detail += &format!("; failed: {}", failed.join("; "));
        }
        println!("{} criterion {n}: {title} ({detail})", if pass { "PASS" } else { "FAIL" });
        all &= pass;
    }
    println!("acceptance: {}", if all { "all criteria PASS" } else { "some criteria FAIL" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
