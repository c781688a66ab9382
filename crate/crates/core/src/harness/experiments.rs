//! The experiments behind the acceptance suite.
//!
//! Each one recomputes what it checks by a second route where one exists:
//! a two-valued re-run of the bijection recursion on random completions, a
//! union-find count of components for spanning forests, plain top-`k` sums
//! for visit profiles, subset enumeration for homogeneous sets.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use petgraph::unionfind::UnionFind;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{case_rng, run_job, Check, ExperimentInfo, HarnessError, JobOutput, JobReport, JobSpec, Table};
use crate::expansions::bijection::{greedy_bijection, BijectionTrace, Dichotomy};
use crate::expansions::colouring::{bad_witness, equivariant_colouring, sample_marked_subgraph};
use crate::expansions::forest::spanning_forest;
use crate::expansions::Frame;
use crate::gallery::adversary::{adversary, replay, shipped_rules};
use crate::gallery::dyadic::{check_conjugation, check_flip, check_successor, check_transitivity, DyadicCheck};
use crate::gallery::ramsey::{
    clique_statistics, max_homogeneous, max_homogeneous_brute_force, sample_pair_colouring, PairColouring,
};
use crate::groups::{ball_elements, Element, GroupModel, Window};
use crate::ire_lp::{
    build_lp, density_obstruction, max_marked_density, ratio_f64, verify, BaseSpec, Certificate, Decoration,
    HardConstraints, LpProblem, WindowModel,
};
use crate::patterns::{Language, Pattern};
use crate::walks::{
    freq_estimate, marked_successor, mass_transport_check, sample_walk_indexed, visit_profile, HalfLineMarks,
    IidMarks, Target, TransportConfig, WalkConfig, WalkPath,
};

pub const DETERMINISM: &str = "determinism";

pub(super) static CATALOGUE: &[ExperimentInfo] = &[
    ExperimentInfo { id: "acceptance", topic: "run a list of jobs with split seeds (the acceptance suite)" },
    ExperimentInfo {
        id: "bijection-recursion",
        topic: "greedy bijection between two subsets of Z: stage recursion, disjointness, interior dichotomy",
    },
    ExperimentInfo {
        id: "bijection-equivariance",
        topic: "greedy bijection commutes with translating both sets",
    },
    ExperimentInfo {
        id: "colouring",
        topic: "equivariant (d+1)-colouring of marked bounded-degree subgraphs; no colouring of the unmarked line",
    },
    ExperimentInfo { id: "spanning-forest", topic: "spanning forests along a finite exhaustion of a connected graph" },
    ExperimentInfo { id: "walk-frequencies", topic: "visit frequencies of random walks on Z" },
    ExperimentInfo { id: "visit-profiles", topic: "top-k visit sums along random walks: subadditivity and class averages" },
    ExperimentInfo { id: "mass-transport", topic: "mass transport identity for the next-mark map under iid marks" },
    ExperimentInfo {
        id: "ramsey-obstruction",
        topic: "largest homogeneous sets of random pair colourings and the marked-density LP curve",
    },
    ExperimentInfo { id: "lp-soundness", topic: "exact re-verification of window LP certificates" },
    ExperimentInfo { id: "dyadic", topic: "the dyadic order, its successor map and the head flip on truncations" },
    ExperimentInfo { id: "adversaries", topic: "shipped finite-radius rules against their adversaries, with replay" },
    ExperimentInfo { id: DETERMINISM, topic: "replaying jobs gives byte-identical reports" },
];

/// Dispatches one job.
pub(super) fn run(id: &str, params: &Value, seed: u64) -> Result<JobOutput, HarnessError> {
    match id {
        "bijection-recursion" => bijection_recursion(parse(id, params)?, seed),
        "bijection-equivariance" => bijection_equivariance(parse(id, params)?, seed),
        "colouring" => colouring(parse(id, params)?, seed),
        "spanning-forest" => forest(parse(id, params)?, seed),
        "walk-frequencies" => frequencies(parse(id, params)?, seed),
        "visit-profiles" => profiles(parse(id, params)?, seed),
        "mass-transport" => transport(parse(id, params)?, seed),
        "ramsey-obstruction" => ramsey(parse(id, params)?, seed),
        "lp-soundness" => lp_soundness(parse(id, params)?),
        "dyadic" => dyadic(parse(id, params)?, seed),
        "adversaries" => adversaries(parse(id, params)?, seed),
        DETERMINISM => determinism(params, &[], &[], seed),
        other => Err(HarnessError::UnknownExperiment(other.into())),
    }
}

fn parse<T: DeserializeOwned>(id: &str, params: &Value) -> Result<T, HarnessError> {
    let v = if params.is_null() { json!({}) } else { params.clone() };
    serde_json::from_value(v).map_err(|e| HarnessError::Params { id: id.into(), msg: e.to_string() })
}

fn bad_params(id: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Params { id: id.into(), msg: msg.into() }
}

fn failed(id: &str, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Failed { id: id.into(), msg: e.to_string() }
}

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

fn parse_ratio(id: &str, s: &str) -> Result<BigRational, HarnessError> {
    let bad = || bad_params(id, format!("'{s}' is not a rational number"));
    let r = match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (BigInt, BigInt) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if b.is_zero() {
                return Err(bad());
            }
            BigRational::new(a, b)
        }
        None => BigRational::from_integer(s.trim().parse().map_err(|_| bad())?),
    };
    Ok(r)
}

fn set_json(s: &BTreeSet<Element>) -> Value {
    Value::Array(s.iter().map(Element::to_json).collect())
}

fn random_subset(elems: impl IntoIterator<Item = Element>, p: f64, rng: &mut impl Rng) -> BTreeSet<Element> {
    elems.into_iter().filter(|_| rng.gen_bool(p)).collect()
}

// ---------------------------------------------------------------------------
// Greedy bijection

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BijectionParams {
    cases: usize,
    radius: usize,
    padding: usize,
    /// Random completions per case.
    completions: usize,
    /// Extra width of each completion on both sides of the window.
    margin: usize,
    min_density: f64,
    max_density: f64,
}

impl Default for BijectionParams {
    fn default() -> Self {
        BijectionParams { cases: 1000, radius: 16, padding: 48, completions: 2, margin: 96, min_density: 0.2, max_density: 0.8 }
    }
}

/// Passing verdicts: one inclusion holds in every extension.
fn dichotomy_holds(d: Dichotomy) -> bool {
    matches!(d, Dichotomy::Both | Dichotomy::Domain | Dichotomy::Range | Dichotomy::EitherSide)
}

/// Stage sets pairwise disjoint, their images pairwise disjoint, and `φ`
/// agreeing with the stages and mapping `A` into `B`.
fn disjointness_violations(t: &BijectionTrace, a: &BTreeSet<Element>, b: &BTreeSet<Element>) -> usize {
    let mut dom = BTreeSet::new();
    let mut ran = BTreeSet::new();
    let mut bad = 0;
    for s in &t.stages {
        for x in &s.members {
            let y = x.mul(&s.gamma);
            bad += usize::from(!dom.insert(x.clone()));
            bad += usize::from(!ran.insert(y.clone()));
            bad += usize::from(t.phi.get(x) != Some(&y) || !a.contains(x) || !b.contains(&y));
        }
    }
    bad + usize::from(dom.len() != t.phi.len())
}

/// The recursion in ordinary two-valued logic on the integers `lo..lo+len`,
/// with nothing outside. Returns the stage of each point of `A` (if matched)
/// and whether each point of `B` is hit.
fn plain_recursion(a: &[bool], b: &[bool], gammas: &[i64]) -> (Vec<Option<usize>>, Vec<bool>) {
    let n = a.len();
    let mut stage: Vec<Option<usize>> = vec![None; n];
    let mut hit = vec![false; n];
    for (s, g) in gammas.iter().enumerate() {
        let fresh: Vec<usize> = (0..n)
            .filter(|&i| {
                let j = i as i64 + g;
                a[i] && stage[i].is_none() && (0..n as i64).contains(&j) && b[j as usize] && !hit[j as usize]
            })
            .collect();
        for i in fresh {
            stage[i] = Some(s);
            hit[(i as i64 + g) as usize] = true;
        }
    }
    (stage, hit)
}

struct RecursionCase {
    disjoint: usize,
    mismatches: usize,
    dichotomy: Dichotomy,
    completion_failures: usize,
    instance: Value,
}

fn bijection_recursion(p: BijectionParams, seed: u64) -> Result<JobOutput, HarnessError> {
    const ID: &str = "bijection-recursion";
    if !(0.0..=1.0).contains(&p.min_density) || !(p.min_density..=1.0).contains(&p.max_density) {
        return Err(bad_params(ID, "densities must satisfy 0 ≤ min_density ≤ max_density ≤ 1"));
    }
    let window = Window::padded(GroupModel::Z, p.radius, p.padding);
    let total = (p.radius + p.padding) as i64;
    let lo = -(total + p.margin as i64);
    let len = (2 * (total + p.margin as i64) + 1) as usize;
    let cases: Vec<RecursionCase> = (0..p.cases as u64)
        .into_par_iter()
        .map(|k| -> Result<RecursionCase, HarnessError> {
            let mut rng = case_rng(seed, k);
            let da = rng.gen_range(p.min_density..=p.max_density);
            let db = rng.gen_range(p.min_density..=p.max_density);
            let a = random_subset(window.elements.iter().cloned(), da, &mut rng);
            let b = random_subset(window.elements.iter().cloned(), db, &mut rng);
            let t = greedy_bijection(&a, &b, &window, None, Frame::Window).map_err(|e| failed(ID, e))?;
            let gammas: Vec<i64> = t.stages.iter().map(|s| s.gamma.as_int().expect("integer stages")).collect();
            let interior: Vec<i64> = t.interior.iter().map(|x| x.as_int().expect("integer points")).collect();

            let mut mismatches = 0;
            let mut completion_failures = 0;
            for _ in 0..p.completions {
                let fill = |set: &BTreeSet<Element>, d: f64, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<bool> {
                    (0..len as i64)
                        .map(|i| {
                            let x = lo + i;
                            if x.abs() <= total {
                                set.contains(&Element::Int(x))
                            } else {
                                rng.gen_bool(d)
                            }
                        })
                        .collect()
                };
                let ca = fill(&a, da, &mut rng);
                let cb = fill(&b, db, &mut rng);
                let (stage, hit) = plain_recursion(&ca, &cb, &gammas);
                let at = |x: i64| (x - lo) as usize;
                // Every definite stage membership of the trace holds here.
                for (s, st) in t.stages.iter().enumerate() {
                    for x in -total..=total {
                        let e = Element::Int(x);
                        let here = stage[at(x)] == Some(s);
                        if st.members.contains(&e) {
                            mismatches += usize::from(!here);
                        } else if !st.unknown.contains(&e) {
                            mismatches += usize::from(here);
                        }
                    }
                }
                // Definite interior statuses, including the inferred ones.
                for x in &interior {
                    let e = Element::Int(*x);
                    let matched = stage[at(*x)].is_some();
                    if t.phi.contains_key(&e) || t.inferred_a.contains(&e) {
                        mismatches += usize::from(!matched);
                    }
                    if t.unmatched_a.contains(&e) {
                        mismatches += usize::from(matched);
                    }
                    if t.inferred_b.contains(&e) || t.phi.values().any(|y| *y == e) {
                        mismatches += usize::from(!hit[at(*x)]);
                    }
                    if t.unmatched_b.contains(&e) {
                        mismatches += usize::from(hit[at(*x)]);
                    }
                }
                let dom = interior.iter().all(|x| !ca[at(*x)] || stage[at(*x)].is_some());
                let ran = interior.iter().all(|x| !cb[at(*x)] || hit[at(*x)]);
                completion_failures += usize::from(!dom && !ran);
            }
            Ok(RecursionCase {
                disjoint: disjointness_violations(&t, &a, &b),
                mismatches,
                dichotomy: t.dichotomy(),
                completion_failures,
                instance: json!({"case": k, "density_a": da, "density_b": db, "a": set_json(&a), "b": set_json(&b)}),
            })
        })
        .collect::<Result<_, _>>()?;

    let first = |f: &dyn Fn(&RecursionCase) -> bool| cases.iter().find(|c| f(c)).map(|c| c.instance.clone());
    let mut verdicts: BTreeMap<String, usize> = BTreeMap::new();
    for c in &cases {
        *verdicts.entry(serde_json::to_value(c.dichotomy).expect("verdict").as_str().unwrap_or("?").to_string()).or_default() += 1;
    }
    let disjoint: usize = cases.iter().map(|c| c.disjoint).sum();
    let mismatches: usize = cases.iter().map(|c| c.mismatches).sum();
    let holds = cases.iter().filter(|c| dichotomy_holds(c.dichotomy)).count();
    let completion: usize = cases.iter().map(|c| c.completion_failures).sum();
    Ok(JobOutput {
        checks: vec![
            Check::new("stage recursion agrees with two-valued re-evaluation on random completions", mismatches == 0, json!(mismatches), json!(0))
                .first_failure(first(&|c| c.mismatches > 0)),
            Check::new("stages and their images are pairwise disjoint", disjoint == 0, json!(disjoint), json!(0))
                .first_failure(first(&|c| c.disjoint > 0)),
            Check::new("interior dichotomy holds", holds == cases.len(), json!(format!("{holds}/{}", cases.len())), json!(format!("{0}/{0}", cases.len())))
                .first_failure(first(&|c| !dichotomy_holds(c.dichotomy))),
            Check::new("dichotomy holds in every completion", completion == 0, json!(completion), json!(0))
                .first_failure(first(&|c| c.completion_failures > 0)),
        ],
        data: json!({"cases": p.cases, "completions": p.completions, "verdicts": verdicts}),
        tables: vec![],
    })
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EquivarianceParams {
    cases: usize,
    min_density: f64,
    max_density: f64,
}

impl Default for EquivarianceParams {
    fn default() -> Self {
        EquivarianceParams { cases: 200, min_density: 0.2, max_density: 0.8 }
    }
}

/// What the trace says about `x` on one side.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Status {
    To(Element),
    Matched,
    Unmatched,
    Open,
}

fn domain_status(t: &BijectionTrace, x: &Element) -> Option<Status> {
    if let Some(y) = t.phi.get(x) {
        return Some(Status::To(y.clone()));
    }
    if t.inferred_a.contains(x) {
        Some(Status::Matched)
    } else if t.unmatched_a.contains(x) {
        Some(Status::Unmatched)
    } else if t.undetermined_a.contains(x) {
        Some(Status::Open)
    } else {
        None
    }
}

fn range_status(t: &BijectionTrace, inverse: &BTreeMap<Element, Element>, y: &Element) -> Option<Status> {
    if let Some(x) = inverse.get(y) {
        return Some(Status::To(x.clone()));
    }
    if t.inferred_b.contains(y) {
        Some(Status::Matched)
    } else if t.unmatched_b.contains(y) {
        Some(Status::Unmatched)
    } else if t.undetermined_b.contains(y) {
        Some(Status::Open)
    } else {
        None
    }
}

fn shift_status(s: Option<Status>, g: &Element) -> Option<Status> {
    s.map(|s| match s {
        Status::To(y) => Status::To(g.mul(&y)),
        other => other,
    })
}

/// Two definite statuses must agree; `Matched` agrees with any `To`.
fn conflicts(a: &Option<Status>, b: &Option<Status>) -> bool {
    match (a, b) {
        (Some(Status::To(x)), Some(Status::To(y))) => x != y,
        (Some(Status::Unmatched), Some(Status::To(_) | Status::Matched))
        | (Some(Status::To(_) | Status::Matched), Some(Status::Unmatched)) => true,
        // One side says the point is not in the set at all.
        (None, Some(_)) | (Some(_), None) => true,
        _ => false,
    }
}

fn bijection_equivariance(p: EquivarianceParams, seed: u64) -> Result<JobOutput, HarnessError> {
    const ID: &str = "bijection-equivariance";
    // (group, interior radius, padding, largest shift)
    let setups = [(GroupModel::Z, 16, 48, 8), (GroupModel::Zd(2), 2, 4, 2), (GroupModel::Free(2), 1, 2, 1)];
    let rows: Vec<(usize, usize, usize, Value)> = (0..p.cases as u64)
        .into_par_iter()
        .map(|k| -> Result<_, HarnessError> {
            let (group, radius, padding, reach) = setups[k as usize % setups.len()];
            let mut rng = case_rng(seed, k);
            let w = Window::padded(group, radius, padding);
            let shifts: Vec<Element> = ball_elements(group, reach).into_iter().filter(|g| !g.is_identity()).collect();
            let g = shifts.choose(&mut rng).expect("nontrivial ball").clone();
            let da = rng.gen_range(p.min_density..=p.max_density);
            let db = rng.gen_range(p.min_density..=p.max_density);
            let big = ball_elements(group, radius + padding + reach);
            let a_all = random_subset(big.iter().cloned(), da, &mut rng);
            let b_all = random_subset(big.iter().cloned(), db, &mut rng);
            let inside = |s: &BTreeSet<Element>, w: &Window| -> BTreeSet<Element> { s.iter().filter(|x| w.contains(x)).cloned().collect() };
            let shifted = |s: &BTreeSet<Element>| -> BTreeSet<Element> { s.iter().map(|x| g.mul(x)).collect() };
            let run = |a: &BTreeSet<Element>, b: &BTreeSet<Element>, w: &Window| {
                greedy_bijection(a, b, w, None, Frame::Window).map_err(|e| failed(ID, e))
            };
            let (a, b) = (inside(&a_all, &w), inside(&b_all, &w));
            let base = run(&a, &b, &w)?;

            // Translating window and data together gives the translated trace.
            let moved_w = w.translate(&g);
            let moved = run(&shifted(&a), &shifted(&b), &moved_w)?;
            let image = |s: &BTreeSet<Element>| -> BTreeSet<Element> { s.iter().map(|x| g.mul(x)).collect() };
            let phi: BTreeMap<Element, Element> = base.phi.iter().map(|(x, y)| (g.mul(x), g.mul(y))).collect();
            let whole_ok = moved.phi == phi
                && moved.unmatched_a == image(&base.unmatched_a)
                && moved.unmatched_b == image(&base.unmatched_b)
                && moved.undetermined_a == image(&base.undetermined_a)
                && moved.undetermined_b == image(&base.undetermined_b)
                && moved.inferred_a == image(&base.inferred_a)
                && moved.inferred_b == image(&base.inferred_b)
                && moved.interior == image(&base.interior);

            // Same window, translated data: compare where both windows see.
            let other = run(&inside(&shifted(&a_all), &w), &inside(&shifted(&b_all), &w), &w)?;
            let inv_base: BTreeMap<Element, Element> = base.phi.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
            let inv_other: BTreeMap<Element, Element> = other.phi.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
            let mut compared = 0;
            let mut bad = 0;
            for x in &base.interior {
                let gx = g.mul(x);
                if !other.interior.contains(&gx) {
                    continue;
                }
                let pairs = [
                    (shift_status(domain_status(&base, x), &g), domain_status(&other, &gx)),
                    (shift_status(range_status(&base, &inv_base, x), &g), range_status(&other, &inv_other, &gx)),
                ];
                for (s, t) in pairs {
                    if matches!((&s, &t), (Some(Status::To(_)), Some(Status::To(_)))) {
                        compared += 1;
                    }
                    bad += usize::from(conflicts(&s, &t));
                }
            }
            let instance = json!({
                "case": k, "group": group.to_string(), "gamma": g.to_json(),
                "a": set_json(&a_all), "b": set_json(&b_all),
            });
            Ok((usize::from(!whole_ok), bad, compared, instance))
        })
        .collect::<Result<_, _>>()?;

    let whole: usize = rows.iter().map(|r| r.0).sum();
    let overlap: usize = rows.iter().map(|r| r.1).sum();
    let compared: usize = rows.iter().map(|r| r.2).sum();
    let first = |f: &dyn Fn(&(usize, usize, usize, Value)) -> bool| rows.iter().find(|r| f(r)).map(|r| r.3.clone());
    Ok(JobOutput {
        checks: vec![
            Check::new("translating window and sets translates the whole trace", whole == 0, json!(whole), json!(0))
                .first_failure(first(&|r| r.0 > 0)),
            Check::new("phi of the translated sets is the translate of phi on the common interior", overlap == 0 && compared > 0,
                json!({"conflicts": overlap, "pairs_compared": compared}), json!({"conflicts": 0, "pairs_compared": "> 0"}))
                .first_failure(first(&|r| r.1 > 0)),
        ],
        data: json!({"cases": p.cases, "groups": ["Z", "Z^2", "F2"]}),
        tables: vec![],
    })
}

// ---------------------------------------------------------------------------
// Colouring

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ColouringParams {
    cases: usize,
    radius: usize,
    /// Word length of the translations tried.
    max_shift: usize,
    line_radius: usize,
    line_padding: usize,
}

impl Default for ColouringParams {
    fn default() -> Self {
        ColouringParams { cases: 500, radius: 6, max_shift: 3, line_radius: 6, line_padding: 6 }
    }
}

fn colouring(p: ColouringParams, seed: u64) -> Result<JobOutput, HarnessError> {
    const ID: &str = "colouring";
    let groups = [GroupModel::Z, GroupModel::Zd(2), GroupModel::Free(2)];
    let rows: Vec<[usize; 5]> = (0..p.cases as u64)
        .into_par_iter()
        .map(|k| -> Result<_, HarnessError> {
            let group = groups[k as usize % 3];
            let d = 2 + (k as usize / 3) % 3;
            let mut rng = case_rng(seed, k);
            let sample_seed: u64 = rng.gen();
            let w = Window::ball(group, p.radius);
            let g = sample_marked_subgraph(&w, d, sample_seed);
            let s = equivariant_colouring(&g, &w, d, Frame::Closed).map_err(|e| failed(ID, e))?;
            let improper = g
                .tuples("E")
                .filter(|t| t[0] != t[1])
                .filter(|t| match (s.colour.get(&t[0]), s.colour.get(&t[1])) {
                    (Some(a), Some(b)) => a == b,
                    _ => false,
                })
                .count();
            let used: BTreeSet<usize> = s.colour.values().copied().collect();
            let too_many = usize::from(used.len() > d + 1 || used.iter().any(|c| *c > d));
            let shifts: Vec<Element> = ball_elements(group, p.max_shift).into_iter().filter(|x| !x.is_identity()).collect();
            let gamma = shifts.choose(&mut rng).expect("nontrivial ball").clone();
            let moved = equivariant_colouring(&g.translate(&gamma), &w.translate(&gamma), d, Frame::Closed).map_err(|e| failed(ID, e))?;
            let expected: BTreeMap<Element, usize> = s.colour.iter().map(|(v, c)| (gamma.mul(v), *c)).collect();
            let not_equivariant = usize::from(moved.colour != expected);
            Ok([improper, too_many, not_equivariant, s.uncoloured.len(), sample_seed as usize])
        })
        .collect::<Result<_, _>>()?;
    let instance = |k: usize| {
        json!({"case": k, "group": groups[k % 3].to_string(), "d": 2 + (k / 3) % 3, "radius": p.radius, "sample_seed": rows[k][4]})
    };
    let first = |i: usize| rows.iter().position(|r| r[i] > 0).map(instance);
    let sum = |i: usize| rows.iter().map(|r| r[i]).sum::<usize>();

    // The unmarked line: every view looks the same, so nothing may be coloured.
    let w = Window::padded(GroupModel::Z, p.line_radius, p.line_padding);
    let lang = Language::new([("E", 2), ("M", 1)]).map_err(|e| failed(ID, e))?;
    let mut line = Pattern::new(GroupModel::Z, lang, w.elements.iter().cloned());
    for x in &w.elements {
        let y = Element::Int(x.as_int().expect("integer") + 1);
        if w.contains(&y) {
            line.insert_symmetric("E", x.clone(), y).map_err(|e| failed(ID, e))?;
        }
    }
    let s = equivariant_colouring(&line, &w, 2, Frame::Window).map_err(|e| failed(ID, e))?;
    let coloured = s.interior.iter().filter(|v| s.colour.contains_key(*v)).count();
    let witness = bad_witness(&line, &w, 1);

    Ok(JobOutput {
        checks: vec![
            Check::new("colourings are proper", sum(0) == 0, json!(sum(0)), json!(0)).first_failure(first(0)),
            Check::new("at most d+1 colours", sum(1) == 0, json!(sum(1)), json!(0)).first_failure(first(1)),
            Check::new("translated input gets translated colours", sum(2) == 0, json!(sum(2)), json!(0)).first_failure(first(2)),
            Check::new("every vertex of a finite sample is coloured", sum(3) == 0, json!(sum(3)), json!(0)).first_failure(first(3)),
            Check::new("unmarked line: no interior vertex coloured", coloured == 0, json!(coloured), json!(0))
                .instance(|| line.to_json()),
            Check::new("unmarked line: a translation symmetry witnesses badness", witness.is_some(),
                json!(witness.as_ref().map(|(g, d)| json!([g.to_json(), d.to_json()]))), json!("some"))
                .instance(|| line.to_json()),
        ],
        data: json!({"cases": p.cases, "radius": p.radius, "d": [2, 3, 4], "groups": ["Z", "Z^2", "F2"]}),
        tables: vec![],
    })
}

// ---------------------------------------------------------------------------
// Spanning forests

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ForestParams {
    graphs: usize,
    vertices: usize,
    /// Edges added on top of a random spanning tree.
    extra_edges: usize,
    stages: u32,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { graphs: 100, vertices: 10_000, extra_edges: 5_000, stages: 10 }
    }
}

fn forest(p: ForestParams, seed: u64) -> Result<JobOutput, HarnessError> {
    const ID: &str = "spanning-forest";
    if p.vertices < 2 || !(1..=20).contains(&p.stages) {
        return Err(bad_params(ID, "need vertices ≥ 2 and 1 ≤ stages ≤ 20"));
    }
    let n = p.vertices;
    let rows: Vec<[usize; 6]> = (0..p.graphs as u64)
        .into_par_iter()
        .map(|k| -> Result<_, HarnessError> {
            let mut rng = case_rng(seed, k);
            let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
            for i in 1..n {
                edges.insert((rng.gen_range(0..i), i));
            }
            for _ in 0..p.extra_edges {
                let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
                if x != y {
                    edges.insert((x.min(y), x.max(y)));
                }
            }
            let top = 1u64 << (p.stages - 1);
            let label: Vec<u64> = (0..n).map(|_| rng.gen_range(0..top)).collect();
            let lang = Language::new([("E", 2)]).map_err(|e| failed(ID, e))?;
            let el = |i: usize| Element::Int(i as i64);
            let mut g = Pattern::new(GroupModel::Z, lang, (0..n).map(el));
            for (x, y) in &edges {
                g.insert_symmetric("E", el(*x), el(*y)).map_err(|e| failed(ID, e))?;
            }
            let exhaustion: Vec<Vec<BTreeSet<Element>>> = (0..p.stages)
                .map(|t| {
                    let mut classes: BTreeMap<u64, BTreeSet<Element>> = BTreeMap::new();
                    for (i, l) in label.iter().enumerate() {
                        classes.entry(l >> t).or_default().insert(el(i));
                    }
                    classes.into_values().collect()
                })
                .collect();
            let trace = spanning_forest(&g, &exhaustion).map_err(|e| failed(ID, e))?;

            let (mut foreign, mut crossing, mut shrinking, mut cycles, mut short) = (0, 0, 0, 0, 0);
            let mut previous: BTreeSet<(usize, usize)> = BTreeSet::new();
            for (t, stage) in trace.stages.iter().enumerate() {
                let tree: BTreeSet<(usize, usize)> = stage
                    .iter()
                    .map(|(x, y)| (x.as_int().expect("integer") as usize, y.as_int().expect("integer") as usize))
                    .collect();
                foreign += tree.difference(&edges).count();
                let class = |i: usize| label[i] >> t;
                crossing += tree.iter().filter(|(x, y)| class(*x) != class(*y)).count();
                shrinking += previous.difference(&tree).count();
                let mut uf = UnionFind::<usize>::new(n);
                cycles += tree.iter().filter(|(x, y)| !uf.union(*x, *y)).count();
                // A maximal forest inside the classes has n minus the number of
                // components of G restricted to the classes.
                let mut comp = UnionFind::<usize>::new(n);
                for (x, y) in edges.iter().filter(|(x, y)| class(*x) == class(*y)) {
                    comp.union(*x, *y);
                }
                let components = (0..n).filter(|i| comp.find(*i) == *i).count();
                short += usize::from(tree.len() + components != n);
                previous = tree;
            }
            let spanning = usize::from(previous.len() != n - 1 || trace.stages.len() != p.stages as usize);
            Ok([foreign + crossing, shrinking, cycles, short, spanning, k as usize])
        })
        .collect::<Result<_, _>>()?;
    let sum = |i: usize| rows.iter().map(|r| r[i]).sum::<usize>();
    let first = |i: usize| rows.iter().find(|r| r[i] > 0).map(|r| json!({"graph": r[5], "vertices": n, "extra_edges": p.extra_edges}));
    Ok(JobOutput {
        checks: vec![
            Check::new("forest edges are graph edges inside the stage classes", sum(0) == 0, json!(sum(0)), json!(0)).first_failure(first(0)),
            Check::new("stages are monotone", sum(1) == 0, json!(sum(1)), json!(0)).first_failure(first(1)),
            Check::new("every stage is acyclic", sum(2) == 0, json!(sum(2)), json!(0)).first_failure(first(2)),
            Check::new("every stage spans each class component", sum(3) == 0, json!(sum(3)), json!(0)).first_failure(first(3)),
            Check::new("final stage is a spanning tree of the final class", sum(4) == 0, json!(sum(4)), json!(0)).first_failure(first(4)),
        ],
        data: json!({"graphs": p.graphs, "vertices": n, "extra_edges": p.extra_edges, "stages": p.stages}),
        tables: vec![],
    })
}

// ---------------------------------------------------------------------------
// Walks

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FrequencyParams {
    steps: usize,
    walks: usize,
    /// Overrides the job seed.
    seed: Option<u64>,
    tolerance: f64,
    hold: f64,
}

impl Default for FrequencyParams {
    fn default() -> Self {
        FrequencyParams { steps: 200_000, walks: 20, seed: None, tolerance: 0.01, hold: 0.5 }
    }
}

fn frequencies(p: FrequencyParams, seed: u64) -> Result<JobOutput, HarnessError> {
    const ID: &str = "walk-frequencies";
    let seed = p.seed.unwrap_or(seed);
    let three: Target = "3Z".parse().map_err(|e| failed(ID, e))?;
    let evens: Target = "evens".parse().map_err(|e| failed(ID, e))?;
    let simple = WalkConfig::simple(GroupModel::Z, p.steps, seed);
    let lazy = WalkConfig::simple(GroupModel::Z, p.steps, seed).lazy(p.hold);
    let a = freq_estimate(|x| three.contains(x), &simple, p.walks).map_err(|e| failed(ID, e))?;
    let b = freq_estimate(|x| evens.contains(x), &lazy, p.walks).map_err(|e| failed(ID, e))?;
    let replay = |cfg: &WalkConfig, target: &Target| json!({"walk": cfg.to_json(), "target": target.to_string(), "walks": p.walks});
    let third = 1.0 / 3.0;
    Ok(JobOutput {
        checks: vec![
            Check::new("3Z: |estimate - 1/3| below tolerance", (a.estimate - third).abs() < p.tolerance,
                json!(a.estimate), json!({"target": third, "abs": p.tolerance}))
                .instance(|| replay(&simple, &three)),
            Check::new("3Z: within 3 standard errors of 1/3", a.agrees_with(third), json!({"estimate": a.estimate, "se": a.se}), json!("3 se"))
                .instance(|| replay(&simple, &three)),
            Check::new("evens, lazy walk: |estimate - 1/2| below tolerance", (b.estimate - 0.5).abs() < p.tolerance,
                json!(b.estimate), json!({"target": 0.5, "abs": p.tolerance}))
                .instance(|| replay(&lazy, &evens)),
        ],
        data: json!({"three_z": a.to_json(), "evens_lazy": b.to_json()}),
        tables: vec![],
    })
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ProfileParams {
    walks: usize,
    length: usize,
    /// Split points per walk.
    splits: usize,
    /// Prefix lengths per walk at which the class averages are checked.
    prefixes: usize,
    min_splits: usize,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams { walks: 100, length: 2_000, splits: 1_000, prefixes: 20, min_splits: 100_000 }
    }
}

/// `F_k` for `k = 1..=classes` by counting and sorting.
fn top_k(labels: &[usize], classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; classes];
    for l in labels {
        counts[*l] += 1;
    }
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts
        .iter()
        .scan(0, |acc, c| {
            *acc += c;
            Some(*acc)
        })
        .collect()
}

fn profiles(p: ProfileParams, seed: u64) -> Result<JobOutput, HarnessError> {
    const ID: &str = "visit-profiles";
    // (group, number of classes, class of a point)
    type ClassFn = fn(&Element) -> usize;
    let families: [(GroupModel, usize, ClassFn); 2] = [
        (GroupModel::Z, 5, |x| x.as_int().expect("integer").rem_euclid(5) as usize),
        (GroupModel::Zd(2), 3, |x| match x {
            Element::Vector(v) => (v[0] + v[1]).rem_euclid(3) as usize,
            _ => 0,
        }),
    ];
    let rows: Vec<[usize; 5]> = (0..p.walks as u64)
        .into_par_iter()
        .map(|k| -> Result<_, HarnessError> {
            let (group, classes, class) = families[k as usize % 2];
            let cfg = WalkConfig::simple(group, p.length, seed);
            let path = sample_walk_indexed(&cfg, k).map_err(|e| failed(ID, e))?;
            let labels: Vec<usize> = path.points.iter().map(class).collect();
            let profile = visit_profile(class, &path, classes, p.splits);
            let (mut violations, mut mismatches) = (0, 0);
            for s in &profile.splits {
                let whole = top_k(&labels, classes);
                let head = top_k(&labels[..s.i], classes);
                let tail = top_k(&labels[s.i..], classes);
                let parts: Vec<usize> = head.iter().zip(&tail).map(|(a, b)| a + b).collect();
                mismatches += usize::from(s.whole != whole || s.parts != parts || s.i + s.j != labels.len());
                violations += whole.iter().zip(&parts).filter(|(a, b)| a > b).count();
            }
            let mut identity = 0;
            for j in 1..=p.prefixes {
                let n = j * p.length / p.prefixes;
                if n == 0 {
                    continue;
                }
                let prefix = WalkPath { offset: 0, points: path.points[..n].to_vec() };
                let prof = visit_profile(class, &prefix, classes, 0);
                let own = top_k(&labels[..n], classes);
                for (rank, (c, count)) in prof.counts.iter().enumerate() {
                    let k = rank + 1;
                    let diff = prof.f_k(k) - prof.f_k(k - 1);
                    let alpha = prof.alpha(c);
                    let own_diff = own[rank] - if rank == 0 { 0 } else { own[rank - 1] };
                    identity += usize::from(
                        *count != diff || own_diff != diff || (alpha - diff as f64 / n as f64).abs() > 1e-12,
                    );
                }
            }
            Ok([profile.splits.len(), violations, mismatches, identity, k as usize])
        })
        .collect::<Result<_, _>>()?;
    let sum = |i: usize| rows.iter().map(|r| r[i]).sum::<usize>();
    let first = |i: usize| rows.iter().find(|r| r[i] > 0).map(|r| json!({"walk": r[4], "length": p.length, "seed": seed}));
    Ok(JobOutput {
        checks: vec![
            Check::new("split points sampled", sum(0) >= p.min_splits, json!(sum(0)), json!(format!(">= {}", p.min_splits))),
            Check::new("no subadditivity violations of F^n_k", sum(1) == 0, json!(sum(1)), json!(0)).first_failure(first(1)),
            Check::new("split sums agree with direct top-k sums", sum(2) == 0, json!(sum(2)), json!(0)).first_failure(first(2)),
            Check::new("class averages are consecutive differences of F^n_k", sum(3) == 0, json!(sum(3)), json!(0)).first_failure(first(3)),
        ],
        data: json!({"walks": p.walks, "length": p.length, "splits_per_walk": p.splits, "families": ["Z mod 5", "Z^2 (x+y) mod 3"]}),
        tables: vec![],
    })
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TransportParams {
    samples: usize,
    radius: usize,
    p: f64,
    tolerance: f64,
    control_samples: usize,
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams { samples: 1_000_000, radius: 16, p: 0.5, tolerance: 0.01, control_samples: 20_000 }
    }
}

fn transport(p: TransportParams, seed: u64) -> Result<JobOutput, HarnessError> {
    const ID: &str = "mass-transport";
    if !(0.0..=1.0).contains(&p.p) {
        return Err(bad_params(ID, "p must lie in [0, 1]"));
    }
    let cfg = TransportConfig { radius: p.radius, samples: p.samples, seed };
    let r = mass_transport_check(&IidMarks { group: GroupModel::Z, p: p.p }, marked_successor, &cfg);
    let control_cfg = TransportConfig { radius: p.radius, samples: p.control_samples, seed };
    let c = mass_transport_check(&HalfLineMarks { p: p.p }, marked_successor, &control_cfg);
    let replay = || json!({"sampler": "iid marks on Z", "p": p.p, "radius": p.radius, "samples": p.samples, "seed": seed});
    Ok(JobOutput {
        checks: vec![
            Check::new("sent and received mass agree within 3 combined SE", r.pass,
                json!({"out": r.out_mean, "in": r.in_mean, "combined_se": r.combined_se}), json!("3 se"))
                .instance(replay),
            Check::new("sent mass is within tolerance of P[marked]", (r.out_mean - p.p).abs() <= p.tolerance,
                json!(r.out_mean), json!({"target": p.p, "abs": p.tolerance}))
                .instance(replay),
            Check::new("received mass is within tolerance of P[marked]", (r.in_mean - p.p).abs() <= p.tolerance,
                json!(r.in_mean), json!({"target": p.p, "abs": p.tolerance}))
                .instance(replay),
            Check::new("half-line marks fail the identity and are flagged", !c.pass && c.warning.is_some(),
                json!({"verdict": if c.pass { "PASS" } else { "FAIL" }, "warning": c.warning.is_some()}), json!({"verdict": "FAIL", "warning": true}))
                .instance(|| json!({"sampler": "half-line marks", "p": p.p, "samples": p.control_samples, "seed": seed})),
        ],
        data: json!({"iid": r.to_json(), "half_line": c.to_json()}),
        tables: vec![],
    })
}

// ---------------------------------------------------------------------------
// Ramsey and the LP

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RamseyParams {
    brute_max_n: usize,
    per_n: usize,
    large_n: usize,
    large_samples: usize,
    band: (f64, f64),
    curve_max: usize,
}

impl Default for RamseyParams {
    fn default() -> Self {
        RamseyParams { brute_max_n: 18, per_n: 100, large_n: 64, large_samples: 200, band: (7.0, 11.0), curve_max: 5 }
    }
}

/// `E[largest homogeneous set of K_n]` at `p = ½`, averaging the subset
/// brute force over every colouring.
fn enumerated_expectation(n: usize) -> Result<BigRational, HarnessError> {
    let pairs = n * (n - 1) / 2;
    let mut total = 0usize;
    for bits in 0u64..1 << pairs {
        let c = PairColouring::from_fn(n, |i, j| {
            let (i, j) = (i.min(j), i.max(j));
            bits >> (j * (j - 1) / 2 + i) & 1 == 1
        });
        total += max_homogeneous_brute_force(&c).map_err(|e| failed("ramsey-obstruction", e))?;
    }
    Ok(BigRational::new(total.into(), BigInt::from(1u64 << pairs)))
}

fn ramsey(p: RamseyParams, seed: u64) -> Result<JobOutput, HarnessError> {
    const ID: &str = "ramsey-obstruction";
    if p.curve_max == 0 || p.curve_max > 5 || p.brute_max_n > 20 {
        return Err(bad_params(ID, "need 1 ≤ curve_max ≤ 5 and brute_max_n ≤ 20"));
    }
    let ps = [q(1, 2), q(1, 3), q(2, 3)];
    let jobs: Vec<(usize, usize)> = (1..=p.brute_max_n).flat_map(|n| (0..p.per_n).map(move |i| (n, i))).collect();
    let disagreements: Vec<Option<Value>> = jobs
        .par_iter()
        .enumerate()
        .map(|(k, (n, i))| -> Result<_, HarnessError> {
            let prob = &ps[i % ps.len()];
            let s = super::split_seed(seed, k as u64);
            let c = sample_pair_colouring(*n, prob, s).map_err(|e| failed(ID, e))?;
            let fast = max_homogeneous(&c).map_err(|e| failed(ID, e))?;
            let slow = max_homogeneous_brute_force(&c).map_err(|e| failed(ID, e))?;
            let members = fast.members.iter().fold(0u128, |m, v| m | 1u128 << v);
            let ok = fast.size == slow && fast.members.len() == slow && c.is_homogeneous(members);
            Ok((!ok).then(|| json!({"n": n, "p": prob.to_string(), "seed": s, "exact": fast.size, "brute_force": slow})))
        })
        .collect::<Result<_, _>>()?;
    let bad = disagreements.iter().flatten().count();

    let half = q(1, 2);
    let stats = clique_statistics(p.large_n, &half, p.large_samples, seed).map_err(|e| failed(ID, e))?;

    let mut curve = Vec::new();
    let mut unverified = 0;
    for n in 1..=p.curve_max {
        let r = max_marked_density(&half, n).map_err(|e| failed(ID, e))?;
        unverified += usize::from(verify(&r.lp, &r.certificate).is_err());
        curve.push(r);
    }
    let top = p.curve_max;
    let bound = enumerated_expectation(top)? / BigRational::from_integer(top.into());
    let last = &curve[top - 1].delta;
    let nonincreasing = curve.windows(2).all(|w| w[1].delta <= w[0].delta);
    let leading: Vec<bool> = curve.iter().take(2).map(|r| r.delta.is_one()).collect();

    let mut rows = Vec::new();
    for r in &curve {
        let b = enumerated_expectation(r.n)? / BigRational::from_integer(r.n.into());
        rows.push(vec![
            r.n.to_string(),
            r.delta.to_string(),
            format!("{:.6}", ratio_f64(&r.delta)),
            b.to_string(),
            format!("{:.6}", ratio_f64(&b)),
        ]);
    }
    let table = Table {
        name: "delta_star".into(),
        header: ["n", "delta_star", "delta_star_float", "expected_max_over_n", "expected_max_over_n_float"].map(String::from).to_vec(),
        rows,
    };
    let curve_json: Vec<Value> = curve.iter().map(|r| json!([r.n, r.delta.to_string()])).collect();
    Ok(JobOutput {
        checks: vec![
            Check::new("branch and bound equals subset brute force", bad == 0,
                json!({"disagreements": bad, "colourings": jobs.len()}), json!({"disagreements": 0}))
                .first_failure(disagreements.into_iter().flatten().next()),
            Check::new(format!("mean largest homogeneous set at n = {}", p.large_n), (p.band.0..=p.band.1).contains(&stats.mean),
                json!(stats.mean), json!([p.band.0, p.band.1]))
                .instance(|| stats.to_json()),
            Check::new("density LP certificates verify exactly", unverified == 0, json!(unverified), json!(0))
                .instance(|| json!({"curve": curve_json})),
            Check::new("delta* is nonincreasing in the window", nonincreasing, json!(curve_json), json!("nonincreasing")),
            Check::new("delta*(1) = delta*(2) = 1", leading.iter().all(|b| *b) && leading.len() == 2.min(top),
                json!(curve_json.iter().take(2).collect::<Vec<_>>()), json!(["1", "1"])),
            Check::new(format!("delta*({top}) <= E[largest homogeneous set]/{top}"), *last <= bound,
                json!(last.to_string()), json!(format!("<= {bound}"))),
        ],
        data: json!({"large": stats.to_json(), "curve": curve_json, "bound": bound.to_string()}),
        tables: vec![table],
    })
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LpParams {
    linearization_max: usize,
    base_max: usize,
    curve_max: usize,
    obstruction_window: usize,
    obstruction_density: String,
}

impl Default for LpParams {
    fn default() -> Self {
        LpParams { linearization_max: 6, base_max: 4, curve_max: 4, obstruction_window: 6, obstruction_density: "9/10".into() }
    }
}

/// A certificate altered so that it cannot verify.
fn tampered(c: &Certificate) -> Certificate {
    let nudge = |v: &BigRational| v + q(1, 7);
    match c {
        Certificate::Feasible { x } => {
            let mut x = x.clone();
            if let Some(first) = x.first_mut() {
                first.1 = nudge(&first.1);
            }
            Certificate::Feasible { x }
        }
        Certificate::Optimal { x, y, value } => Certificate::Optimal { x: x.clone(), y: y.clone(), value: nudge(value) },
        // Farkas vectors form a cone, so a nudge can land on another valid
        // one. Negating flips the sign of yᵀb.
        Certificate::Infeasible { y } => Certificate::Infeasible { y: y.iter().map(|v| -v).collect() },
    }
}

fn lp_soundness(p: LpParams) -> Result<JobOutput, HarnessError> {
    const ID: &str = "lp-soundness";
    let delta = parse_ratio(ID, &p.obstruction_density)?;
    let fail = |e| failed(ID, e);
    let mut emitted: Vec<(String, LpProblem, Certificate)> = Vec::new();
    let mut infeasible_orders = Vec::new();
    for n in 1..=p.linearization_max {
        let model = WindowModel::new(n, BaseSpec::Empty, Decoration::LinearOrder).map_err(fail)?;
        let lp = build_lp(&model, &HardConstraints::default(), false).map_err(fail)?;
        let cert = crate::ire_lp::solve(&lp).map_err(fail)?;
        if !cert.is_feasible() {
            infeasible_orders.push(n);
        }
        emitted.push((format!("linearization n={n}"), lp, cert));
    }
    let bases = [("empty", BaseSpec::Empty), ("iid marks 1/3", BaseSpec::IidMarks { p: q(1, 3) }), ("iid pairs 1/2", BaseSpec::IidPairs { p: q(1, 2) })];
    for (name, base) in bases {
        for n in 1..=p.base_max {
            let model = WindowModel::new(n, base.clone(), Decoration::Identity).map_err(fail)?;
            let lp = build_lp(&model, &HardConstraints::default(), false).map_err(fail)?;
            let cert = crate::ire_lp::solve(&lp).map_err(fail)?;
            emitted.push((format!("{name}, no decoration, n={n}"), lp, cert));
        }
    }
    for n in 1..=p.curve_max {
        let r = max_marked_density(&q(1, 2), n).map_err(fail)?;
        emitted.push((format!("marked density n={n}"), r.lp, r.certificate));
    }
    let (lp, cert) = density_obstruction(&q(1, 2), &delta, p.obstruction_window, true).map_err(fail)?;
    let farkas = matches!(cert, Certificate::Infeasible { .. });
    emitted.push((format!("density {delta} obstruction n={}", p.obstruction_window), lp, cert));

    let failures: Vec<&String> = emitted.iter().filter(|(_, lp, c)| verify(lp, c).is_err()).map(|e| &e.0).collect();
    let accepted: Vec<&String> = emitted.iter().filter(|(_, lp, c)| verify(lp, &tampered(c)).is_ok()).map(|e| &e.0).collect();
    let kinds: Vec<Value> = emitted
        .iter()
        .map(|(name, lp, c)| {
            let kind = match c {
                Certificate::Feasible { .. } => "feasible",
                Certificate::Optimal { .. } => "optimal",
                Certificate::Infeasible { .. } => "farkas",
            };
            json!({"lp": name, "rows": lp.num_rows(), "columns": lp.num_cols(), "certificate": kind})
        })
        .collect();
    Ok(JobOutput {
        checks: vec![
            Check::new("every emitted certificate re-verifies exactly", failures.is_empty(),
                json!({"verified": emitted.len() - failures.len(), "emitted": emitted.len()}), json!({"failures": 0}))
                .instance(|| json!(failures)),
            Check::new(format!("linearization of the empty order is feasible for n <= {}", p.linearization_max), infeasible_orders.is_empty(),
                json!(infeasible_orders), json!([]))
                .instance(|| json!(infeasible_orders)),
            Check::new("the density obstruction is a Farkas certificate", farkas, json!(farkas), json!(true)),
            Check::new("perturbed certificates are rejected", accepted.is_empty(), json!(accepted.len()), json!(0))
                .instance(|| json!(accepted)),
        ],
        data: json!({"certificates": kinds}),
        tables: vec![],
    })
}

// ---------------------------------------------------------------------------
// Gallery

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DyadicParams {
    successor_len: usize,
    transitivity_len: usize,
    transitivity_samples: Option<u64>,
    flip_len: usize,
    conjugation_len: usize,
}

impl Default for DyadicParams {
    fn default() -> Self {
        DyadicParams { successor_len: 16, transitivity_len: 10, transitivity_samples: Some(1_000_000), flip_len: 12, conjugation_len: 12 }
    }
}

fn dyadic(p: DyadicParams, seed: u64) -> Result<JobOutput, HarnessError> {
    const ID: &str = "dyadic";
    for (name, len, lo) in [("successor_len", p.successor_len, 2), ("transitivity_len", p.transitivity_len, 1), ("flip_len", p.flip_len, 1), ("conjugation_len", p.conjugation_len, 1)] {
        if !(lo..=20).contains(&len) {
            return Err(bad_params(ID, format!("{name} = {len} is outside {lo}..=20")));
        }
    }
    let runs: Vec<(&str, DyadicCheck)> = vec![
        ("successor is the exact L-successor on every truncation", check_successor(p.successor_len)),
        ("L is transitive and antisymmetric on in-class triples", check_transitivity(p.transitivity_len, p.transitivity_samples, seed)),
        ("head flip is an order-reversing involution leaving the class", check_flip(p.flip_len)),
        ("successor conjugated by the flip is the predecessor", check_conjugation(p.conjugation_len)),
    ];
    let checks = runs
        .iter()
        .map(|(name, c)| {
            Check::new(*name, c.passed(), json!({"checked": c.checked, "counterexamples": c.counterexamples}), json!({"counterexamples": 0}))
                .instance(|| c.to_json())
        })
        .collect();
    Ok(JobOutput { checks, data: json!(runs.iter().map(|(_, c)| c.to_json()).collect::<Vec<_>>()), tables: vec![] })
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AdversaryParams {
    max_radius: usize,
}

impl Default for AdversaryParams {
    fn default() -> Self {
        AdversaryParams { max_radius: 3 }
    }
}

fn adversaries(p: AdversaryParams, seed: u64) -> Result<JobOutput, HarnessError> {
    const ID: &str = "adversaries";
    if p.max_radius == 0 || p.max_radius > crate::gallery::adversary::MAX_RADIUS {
        return Err(bad_params(ID, format!("max_radius must lie in 1..={}", crate::gallery::adversary::MAX_RADIUS)));
    }
    let cases: Vec<(usize, usize)> = (1..=p.max_radius).flat_map(|r| (0..shipped_rules(r).len()).map(move |i| (r, i))).collect();
    let rows: Vec<(String, bool, bool, Value)> = cases
        .par_iter()
        .map(|(r, i)| -> Result<_, HarnessError> {
            let (problem, rule) = shipped_rules(*r).swap_remove(*i);
            let outcome = adversary(problem, &rule, seed).map_err(|e| failed(ID, e))?;
            let replayed = match outcome.defeat() {
                Some(d) => replay(&rule, d).map_err(|e| failed(ID, e))?,
                None => false,
            };
            let name = format!("{problem} rule '{}' at radius {r}", rule.name);
            Ok((name, outcome.defeat().is_some(), replayed, outcome.to_json()))
        })
        .collect::<Result<_, _>>()?;
    let checks = rows
        .iter()
        .map(|(name, defeated, replayed, outcome)| {
            let witness = outcome.pointer("/defeat/witness/kind").cloned().unwrap_or(Value::Null);
            Check::new(format!("{name}: defeated, witness replays"), *defeated && *replayed,
                json!({"defeated": defeated, "replayed": replayed, "witness": witness}), json!({"defeated": true, "replayed": true}))
                .instance(|| outcome.clone())
        })
        .collect();
    Ok(JobOutput { checks, data: json!({"rules": rows.len(), "seed": seed}), tables: vec![] })
}

// ---------------------------------------------------------------------------
// Determinism

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct DeterminismParams {
    /// Jobs to run twice. Inside a suite, the default is every earlier job.
    jobs: Option<Vec<JobSpec>>,
    /// Worker count for the replay; differs from the first run by default.
    threads: Option<usize>,
}

/// Re-runs jobs and compares serialized reports byte for byte. Inside a
/// suite the first runs are the suite's own; otherwise every job runs twice.
pub(super) fn determinism(params: &Value, earlier: &[JobSpec], reports: &[JobReport], seed: u64) -> Result<JobOutput, HarnessError> {
    let p: DeterminismParams = parse(DETERMINISM, params)?;
    let current = super::thread_cap().unwrap_or_else(rayon::current_num_threads);
    let threads = p.threads.unwrap_or(if current > 1 { current / 2 } else { 2 });
    let (firsts, specs): (Vec<JobReport>, Vec<JobSpec>) = match p.jobs {
        Some(jobs) => {
            let mut firsts = Vec::new();
            for (i, job) in jobs.iter().enumerate() {
                let s = job.seed.unwrap_or_else(|| super::split_seed(seed, i as u64));
                firsts.push(run_job(i, job, s, None)?);
            }
            (firsts, jobs)
        }
        None => {
            let keep: Vec<usize> = (0..reports.len()).filter(|i| reports[*i].experiment != DETERMINISM).collect();
            (keep.iter().map(|i| reports[*i].clone()).collect(), keep.iter().map(|i| earlier[*i].clone()).collect())
        }
    };
    if firsts.is_empty() {
        return Err(bad_params(DETERMINISM, "nothing to replay: give params.jobs or run inside a suite"));
    }
    let mut checks = Vec::new();
    for (first, spec) in firsts.iter().zip(&specs) {
        if spec.experiment == DETERMINISM || spec.experiment == super::SUITE {
            return Err(bad_params(DETERMINISM, format!("cannot replay '{}'", spec.experiment)));
        }
        let again = run_job(first.index, spec, first.seed, Some(threads))?;
        let (a, b) = (first.digest(), again.digest());
        checks.push(
            Check::new(format!("job {} ({}) replays byte-identically", first.index, first.experiment), a == b,
                json!({"first": a, "replay": b}), json!("equal digests"))
                .instance(|| json!({"experiment": spec.experiment, "seed": first.seed, "params": spec.params, "replay_threads": threads})),
        );
    }
    Ok(JobOutput { checks, data: json!({"replayed": firsts.len()}), tables: vec![] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_recursion_matches_by_hand() {
        // A = {0, 1}, B = {1, 2}: γ = 0 takes 1 → 1 first, which blocks 0 → 1.
        let (stage, hit) = plain_recursion(&[true, true, false], &[false, true, true], &[0, 1, -1]);
        assert_eq!(stage, vec![None, Some(0), None]);
        assert_eq!(hit, vec![false, true, false]);
        // A = {0, 2}, B = {1}: 0 → 1 at γ = 1 before 2 → 1 at γ = -1.
        let (stage, hit) = plain_recursion(&[true, false, true], &[false, true, false], &[0, 1, -1]);
        assert_eq!(stage, vec![Some(1), None, None]);
        assert_eq!(hit, vec![false, true, false]);
    }

    #[test]
    fn top_k_sums() {
        assert_eq!(top_k(&[0, 1, 1, 2, 1, 0], 3), vec![3, 5, 6]);
        assert_eq!(top_k(&[], 2), vec![0, 0]);
    }

    #[test]
    fn statuses_conflict_only_when_definite() {
        let x = Element::Int(3);
        assert!(conflicts(&Some(Status::To(x.clone())), &Some(Status::Unmatched)));
        assert!(!conflicts(&Some(Status::To(x.clone())), &Some(Status::Matched)));
        assert!(!conflicts(&Some(Status::Open), &Some(Status::Unmatched)));
        assert!(conflicts(&None, &Some(Status::Open)));
        assert!(!conflicts(&None, &None));
        assert!(conflicts(&None, &Some(Status::To(x))));
    }

    #[test]
    fn ratios_parse() {
        assert_eq!(parse_ratio("t", "9/10").unwrap(), q(9, 10));
        assert_eq!(parse_ratio("t", "1").unwrap(), q(1, 1));
        assert!(parse_ratio("t", "1/0").is_err());
        assert!(parse_ratio("t", "half").is_err());
    }

    #[test]
    fn expectation_by_enumeration() {
        assert_eq!(enumerated_expectation(3).unwrap(), q(9, 4));
    }
}
