//! Finite configurations that defeat candidate local rules.
//!
//! Each search builds the configuration from the corresponding
//! non-existence argument, applies the rule to it and checks the resulting
//! decorations. A defeat is only returned after [`replay`] confirms it.
//!
//! * Linearization: two far apart copies of a window on which the rule puts
//!   `γ₀ L γ₁`, joined by `γ₁ P γγ₀` and `γγ₁ P γ₀`. The rule and `P ⊆ L`
//!   then force the cycle `γ₀ L γ₁ L γγ₀ L γγ₁ L γ₀`.
//! * Ramsey: two copies of a window with two marked points `γ₀, γ₁`, with
//!   every cross pair coloured like `{γ₀, γ₁}` except `{γ₀, γγ₀}`. All three
//!   points are marked but they see both colours.
//! * ℤ-line: copies of a window whose centre the rule marks, laid out as
//!   consecutive `L`-intervals at dyadic positions in `[0, 1]`. Each gadget
//!   extends the previous one and adds marks between the two outer ones, so
//!   the union of the chain has infinitely many marked points between two
//!   marked points, and the marked set cannot have order type ℤ.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::groups::{ball_elements, Element, GroupModel};
use crate::local_rules::{apply_rule, Decoration, DecoratedWindow, LocalRule, RuleError};
use crate::patterns::{is_strict_linear_order, is_strict_partial_order, Pattern, PatternError, ProblemSpec, Verdict};

/// Largest rule radius the searches accept.
pub const MAX_RADIUS: usize = 3;
/// Depth of the ℤ-line gadget chain.
pub const ZLINE_DEPTH: usize = 3;
const EXHAUSTIVE_LIMIT: usize = 5040;
const RANDOM_CANDIDATES: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("rule radius {0} exceeds {MAX_RADIUS}")]
    RadiusTooLarge(usize),
    #[error("rule language does not match the {0} problem")]
    Language(String),
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdversaryProblem {
    Ramsey,
    Linearization,
    ZLine,
}

impl AdversaryProblem {
    pub fn spec(&self) -> ProblemSpec {
        match self {
            AdversaryProblem::Ramsey => ProblemSpec::Ramsey,
            AdversaryProblem::Linearization => ProblemSpec::Linearization,
            AdversaryProblem::ZLine => ProblemSpec::ZLine,
        }
    }
}

impl fmt::Display for AdversaryProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdversaryProblem::Ramsey => "ramsey",
            AdversaryProblem::Linearization => "linearization",
            AdversaryProblem::ZLine => "zline",
        })
    }
}

impl FromStr for AdversaryProblem {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ramsey" => Ok(AdversaryProblem::Ramsey),
            "linearization" => Ok(AdversaryProblem::Linearization),
            "zline" => Ok(AdversaryProblem::ZLine),
            other => Err(AdversaryError::UnknownProblem(other.to_string())),
        }
    }
}

/// What the rule's decorations contradict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// A cycle of `L`; each step comes from the rule or from `P ⊆ L`.
    OrderCycle { steps: Vec<(Element, Element, Source)> },
    /// Two determined points within the rule radius that the rule leaves unordered.
    Unordered { x: Element, y: Element },
    /// `a, b, c` are marked, `{a, b}` has colour `red_ab` and `{a, c}` the other.
    MixedColours { a: Element, b: Element, c: Element, red_ab: bool },
    /// In gadget `d`, at least `between[d]` marked points lie `L`-between the
    /// marked points `low` and `high`.
    DenseMarks { low: Element, high: Element, between: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Rule,
    Base,
}

impl Witness {
    pub fn to_json(&self) -> Value {
        let e = Element::to_json;
        match self {
            Witness::OrderCycle { steps } => json!({
                "kind": "order-cycle",
                "steps": steps.iter().map(|(x, y, s)| json!([e(x), e(y), if *s == Source::Rule { "rule" } else { "P" }])).collect::<Vec<_>>(),
            }),
            Witness::Unordered { x, y } => json!({"kind": "unordered", "x": e(x), "y": e(y)}),
            Witness::MixedColours { a, b, c, red_ab } => json!({
                "kind": "mixed-colours", "a": e(a), "b": e(b), "c": e(c),
                "ab": if *red_ab { "R" } else { "S" }, "ac": if *red_ab { "S" } else { "R" },
            }),
            Witness::DenseMarks { low, high, between } => {
                json!({"kind": "dense-marks", "low": e(low), "high": e(high), "between": between})
            }
        }
    }
}

/// A configuration, the rule's name and the inconsistency it exhibits.
#[derive(Debug, Clone, PartialEq)]
pub struct Defeat {
    pub problem: AdversaryProblem,
    pub rule: String,
    /// One pattern, or the gadget chain for the ℤ-line.
    pub patterns: Vec<Pattern>,
    pub witness: Witness,
}

impl Defeat {
    pub fn to_json(&self) -> Value {
        json!({
            "problem": self.problem.to_string(),
            "rule": self.rule,
            "witness": self.witness.to_json(),
            "patterns": self.patterns.iter().map(Pattern::to_json).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryOutcome {
    Defeated(Defeat),
    /// Inconclusive: the rule survived every configuration tried.
    NoDefeatFound { tried: usize },
}

impl AdversaryOutcome {
    pub fn defeat(&self) -> Option<&Defeat> {
        match self {
            AdversaryOutcome::Defeated(d) => Some(d),
            AdversaryOutcome::NoDefeatFound { .. } => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            AdversaryOutcome::Defeated(d) => json!({"verdict": "DEFEATED", "defeat": d.to_json()}),
            AdversaryOutcome::NoDefeatFound { tried } => json!({"verdict": "NO-DEFEAT-FOUND", "tried": tried}),
        }
    }
}

/// `x L x·δ` for every `δ > 0` in the ball: the order of ℤ, seen locally.
pub fn coordinate_linearization(radius: usize) -> LocalRule {
    let lang = ProblemSpec::Linearization.base_language();
    let offsets: BTreeSet<Element> = (1..=radius as i64).map(Element::Int).collect();
    LocalRule::from_fn("coordinate-order", GroupModel::Z, radius, lang, move |_| Decoration::Offsets(offsets.clone()))
}

/// Marks `x` iff every pair in its ball is `R`.
pub fn all_red_ball_marker(group: GroupModel, radius: usize) -> LocalRule {
    let lang = ProblemSpec::Ramsey.base_language();
    LocalRule::from_fn("all-R-ball", group, radius, lang, |p| {
        let u: Vec<&Element> = p.universe().iter().collect();
        let all_red = u.iter().enumerate().all(|(i, x)| u[i + 1..].iter().all(|y| p.holds("R", &[(*x).clone(), (*y).clone()])));
        Decoration::mark(all_red)
    })
}

/// The coordinate order on `B(r)`, as a ℤ-line window.
pub fn coordinate_order_window(group: GroupModel, radius: usize) -> Pattern {
    let ball = ball_elements(group, radius);
    let rank: BTreeMap<Element, usize> = sort_by_coordinates(&ball).into_iter().enumerate().map(|(i, x)| (x, i)).collect();
    order_pattern(group, ball, |x, y| rank[x] < rank[y])
}

fn sort_by_coordinates(xs: &[Element]) -> Vec<Element> {
    let mut v = xs.to_vec();
    v.sort_by_key(|x| match x {
        Element::Int(a) => vec![*a],
        Element::Vector(c) => c.clone(),
        Element::Word(w) => w.iter().map(|l| *l as i64).collect(),
    });
    v
}

/// Marks `x` iff its ball, moved to the identity, equals `a0`.
pub fn fixed_pattern_marker(a0: Pattern, radius: usize) -> LocalRule {
    let lang = ProblemSpec::ZLine.base_language();
    LocalRule::from_fn("fixed-pattern", a0.group, radius, lang, move |p| Decoration::mark(*p == a0))
}

/// The three shipped rules, in the order ramsey, linearization, ℤ-line.
pub fn shipped_rules(radius: usize) -> Vec<(AdversaryProblem, LocalRule)> {
    vec![
        (AdversaryProblem::Ramsey, all_red_ball_marker(GroupModel::Z, radius)),
        (AdversaryProblem::Linearization, coordinate_linearization(radius)),
        (AdversaryProblem::ZLine, fixed_pattern_marker(coordinate_order_window(GroupModel::Z, radius), radius)),
    ]
}

fn order_pattern(group: GroupModel, universe: Vec<Element>, less: impl Fn(&Element, &Element) -> bool) -> Pattern {
    let mut p = Pattern::new(group, ProblemSpec::ZLine.base_language(), universe.iter().cloned());
    for x in &universe {
        for y in &universe {
            if less(x, y) {
                p.insert("L", vec![x.clone(), y.clone()]).expect("in universe");
            }
        }
    }
    p
}

fn pair_pattern(group: GroupModel, universe: &[Element], red: impl Fn(&Element, &Element) -> bool) -> Pattern {
    let mut p = Pattern::new(group, ProblemSpec::Ramsey.base_language(), universe.iter().cloned());
    for (i, x) in universe.iter().enumerate() {
        for y in &universe[i + 1..] {
            let name = if red(x, y) { "R" } else { "S" };
            p.insert_symmetric(name, x.clone(), y.clone()).expect("in universe");
        }
    }
    p
}

fn power(group: GroupModel, k: usize) -> Element {
    let g = group.generators().into_iter().next().expect("a generator");
    (0..k).fold(group.identity(), |acc, _| acc.mul(&g))
}

/// A translate of the pattern's universe disjoint from it and more than
/// `2r` away.
fn far_shift(p: &Pattern, r: usize) -> Element {
    let reach = p.universe().iter().map(Element::length).max().unwrap_or(0);
    power(p.group, 2 * reach + 2 * r + 2)
}

fn union(a: &Pattern, b: &Pattern) -> Pattern {
    let mut out = a.clone();
    out.extend_universe(b.universe().iter().cloned());
    for s in b.language().symbols() {
        for t in b.tuples(&s.name) {
            out.insert(&s.name, t.clone()).expect("same language");
        }
    }
    out
}

/// `L`-pairs the rule asserts, `x L x·δ` for each offset `δ` at `x`.
fn rule_edges(w: &DecoratedWindow) -> BTreeSet<(Element, Element)> {
    let mut out = BTreeSet::new();
    for (x, d) in &w.decorations {
        if let Decoration::Offsets(s) = d {
            for delta in s {
                let y = x.mul(delta);
                if w.base.universe().contains(&y) {
                    out.insert((x.clone(), y));
                }
            }
        }
    }
    out
}

fn check_rule(problem: AdversaryProblem, rule: &LocalRule) -> Result<(), AdversaryError> {
    if rule.radius > MAX_RADIUS {
        return Err(AdversaryError::RadiusTooLarge(rule.radius));
    }
    if rule.language != problem.spec().base_language() {
        return Err(AdversaryError::Language(problem.to_string()));
    }
    Ok(())
}

/// Searches for a configuration defeating `rule`; `seed` drives the random
/// part of the fallback search.
pub fn adversary(problem: AdversaryProblem, rule: &LocalRule, seed: u64) -> Result<AdversaryOutcome, AdversaryError> {
    check_rule(problem, rule)?;
    match problem {
        AdversaryProblem::Linearization => linearization(rule),
        AdversaryProblem::Ramsey => ramsey(rule, seed),
        AdversaryProblem::ZLine => zline(rule, seed),
    }
}

fn confirmed(rule: &LocalRule, d: Defeat) -> Result<Option<Defeat>, AdversaryError> {
    Ok(replay(rule, &d)?.then_some(d))
}

fn linearization(rule: &LocalRule) -> Result<AdversaryOutcome, AdversaryError> {
    let g = rule.group;
    let r = rule.radius;
    let a0 = Pattern::new(g, rule.language.clone(), ball_elements(g, r + 1));
    let w0 = apply_rule(rule, &a0)?;
    let Some((g0, g1)) = rule_edges(&w0).into_iter().next() else {
        let x = g.identity();
        let y = g.generators().into_iter().next().expect("a generator");
        let d = Defeat {
            problem: AdversaryProblem::Linearization,
            rule: rule.name.clone(),
            patterns: vec![a0],
            witness: Witness::Unordered { x, y },
        };
        return Ok(match confirmed(rule, d)? {
            Some(d) => AdversaryOutcome::Defeated(d),
            None => AdversaryOutcome::NoDefeatFound { tried: 1 },
        });
    };
    let gamma = far_shift(&a0, r);
    let mut a1 = union(&a0, &a0.translate(&gamma));
    let (h0, h1) = (gamma.mul(&g0), gamma.mul(&g1));
    a1.insert("P", vec![g1.clone(), h0.clone()])?;
    a1.insert("P", vec![h1.clone(), g0.clone()])?;
    let steps = vec![
        (g0.clone(), g1.clone(), Source::Rule),
        (g1, h0.clone(), Source::Base),
        (h0, h1.clone(), Source::Rule),
        (h1, g0, Source::Base),
    ];
    let d = Defeat {
        problem: AdversaryProblem::Linearization,
        rule: rule.name.clone(),
        patterns: vec![a1],
        witness: Witness::OrderCycle { steps },
    };
    Ok(match confirmed(rule, d)? {
        Some(d) => AdversaryOutcome::Defeated(d),
        None => AdversaryOutcome::NoDefeatFound { tried: 1 },
    })
}

/// Colourings of the window to try: constant ones, then all of them if
/// there are few pairs, else seeded random ones.
fn colourings(window: &[Element], seed: u64) -> Vec<Vec<bool>> {
    let pairs = window.len() * (window.len().saturating_sub(1)) / 2;
    let mut out = vec![vec![true; pairs], vec![false; pairs]];
    if pairs <= 12 {
        out.extend((0..1u32 << pairs).map(|m| (0..pairs).map(|i| m >> i & 1 == 1).collect()));
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        out.extend((0..RANDOM_CANDIDATES).map(|_| (0..pairs).map(|_| rng.gen_bool(0.5)).collect()));
    }
    out
}

fn colouring_pattern(group: GroupModel, window: &[Element], colours: &[bool]) -> Pattern {
    let index: BTreeMap<&Element, usize> = window.iter().enumerate().map(|(i, x)| (x, i)).collect();
    pair_pattern(group, window, |x, y| {
        let (i, j) = (index[x].min(index[y]), index[x].max(index[y]));
        colours[j * (j - 1) / 2 + i]
    })
}

fn ramsey(rule: &LocalRule, seed: u64) -> Result<AdversaryOutcome, AdversaryError> {
    let g = rule.group;
    let r = rule.radius;
    let window = ball_elements(g, r + 1);
    let candidates = colourings(&window, seed);
    let tried = candidates.len();
    for colours in candidates {
        let mut a0 = colouring_pattern(g, &window, &colours);
        let mut marked: Vec<Element> = apply_rule(rule, &a0)?.marked().into_iter().collect();
        if marked.len() == 1 {
            // One mark per window: two copies joined by R give two marks.
            let shift = far_shift(&a0, r);
            let copy = a0.translate(&shift);
            let mut doubled = union(&a0, &copy);
            for x in a0.universe() {
                for y in copy.universe() {
                    doubled.insert_symmetric("R", x.clone(), y.clone())?;
                }
            }
            a0 = doubled;
            marked = apply_rule(rule, &a0)?.marked().into_iter().collect();
        }
        if marked.len() < 2 {
            continue;
        }
        let (m0, m1) = (marked[0].clone(), marked[1].clone());
        let red = a0.holds("R", &[m0.clone(), m1.clone()]);
        let gamma = far_shift(&a0, r);
        let copy = a0.translate(&gamma);
        let mut a1 = union(&a0, &copy);
        let h0 = gamma.mul(&m0);
        for x in a0.universe() {
            for y in copy.universe() {
                let same = !(x == &m0 && y == &h0);
                let name = if same == red { "R" } else { "S" };
                a1.insert_symmetric(name, x.clone(), y.clone())?;
            }
        }
        let d = Defeat {
            problem: AdversaryProblem::Ramsey,
            rule: rule.name.clone(),
            patterns: vec![a1],
            witness: Witness::MixedColours { a: m0, b: m1, c: h0, red_ab: red },
        };
        if let Some(d) = confirmed(rule, d)? {
            return Ok(AdversaryOutcome::Defeated(d));
        }
    }
    Ok(AdversaryOutcome::NoDefeatFound { tried })
}

/// Linear orders of the window to try, as lists from least to greatest.
fn orders(window: &[Element], seed: u64) -> Vec<Vec<Element>> {
    let coord = sort_by_coordinates(window);
    let mut out = vec![coord.clone(), coord.iter().rev().cloned().collect()];
    let exhaustive = (1..=window.len()).try_fold(1usize, |acc, k| acc.checked_mul(k)).is_some_and(|f| f <= EXHAUSTIVE_LIMIT);
    if exhaustive {
        let mut perm = coord.clone();
        permute(&mut perm, 0, &mut out);
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..RANDOM_CANDIDATES {
            let mut p = coord.clone();
            p.shuffle(&mut rng);
            out.push(p);
        }
    }
    out
}

fn permute(v: &mut Vec<Element>, k: usize, out: &mut Vec<Vec<Element>>) {
    if k == v.len() {
        out.push(v.clone());
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, out);
        v.swap(k, i);
    }
}

/// Position of block `j` in `[0, 2^depth]`: the two ends, then dyadic
/// points level by level.
fn block_value(j: usize, depth: usize) -> u64 {
    match j {
        0 => 0,
        1 => 1 << depth,
        _ => {
            let k = j - 1;
            let level = usize::BITS - k.leading_zeros();
            let first = 1usize << (level - 1);
            let odd = 2 * (k - first) + 1;
            (odd as u64) << (depth - level as usize)
        }
    }
}

/// Gadget `d`: blocks `0 .. 2^d + 1`, each a copy of the window ordered by
/// `order`, the blocks forming consecutive `L`-intervals by value.
fn zline_gadget(group: GroupModel, r: usize, order: &[Element], d: usize) -> (Pattern, Vec<Element>) {
    let rank: BTreeMap<&Element, usize> = order.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let blocks = (1 << d) + 1;
    let centres: Vec<Element> = (0..blocks).map(|j| power(group, j * (2 * r + 1))).collect();
    let mut key: BTreeMap<Element, (u64, usize)> = BTreeMap::new();
    for (j, c) in centres.iter().enumerate() {
        for o in order {
            key.insert(c.mul(o), (block_value(j, ZLINE_DEPTH), rank[o]));
        }
    }
    let universe: Vec<Element> = key.keys().cloned().collect();
    (order_pattern(group, universe, |x, y| key[x] < key[y]), centres)
}

fn zline(rule: &LocalRule, seed: u64) -> Result<AdversaryOutcome, AdversaryError> {
    let g = rule.group;
    let r = rule.radius;
    let window = ball_elements(g, r);
    let candidates = orders(&window, seed);
    let tried = candidates.len();
    for order in candidates {
        let rank: BTreeMap<&Element, usize> = order.iter().enumerate().map(|(i, x)| (x, i)).collect();
        let a0 = order_pattern(g, window.clone(), |x, y| rank[x] < rank[y]);
        if !apply_rule(rule, &a0)?.get(&g.identity()).is_some_and(Decoration::is_marked) {
            continue;
        }
        let mut patterns = Vec::new();
        let mut ends = None;
        for d in 1..=ZLINE_DEPTH {
            let (p, centres) = zline_gadget(g, r, &order, d);
            ends.get_or_insert((centres[0].clone(), centres[1].clone()));
            patterns.push(p);
        }
        let (low, high) = ends.expect("depth ≥ 1");
        let between = (1..=ZLINE_DEPTH).map(|d| (1 << d) - 1).collect();
        let defeat = Defeat {
            problem: AdversaryProblem::ZLine,
            rule: rule.name.clone(),
            patterns,
            witness: Witness::DenseMarks { low, high, between },
        };
        if let Some(d) = confirmed(rule, defeat)? {
            return Ok(AdversaryOutcome::Defeated(d));
        }
    }
    Ok(AdversaryOutcome::NoDefeatFound { tried })
}

/// Re-applies `rule` to the defeat's patterns and checks that the stated
/// inconsistency holds exactly, including that the patterns are valid
/// inputs.
pub fn replay(rule: &LocalRule, d: &Defeat) -> Result<bool, AdversaryError> {
    let spec = d.problem.spec();
    let base_ok = |p: &Pattern| match d.problem {
        AdversaryProblem::Linearization => is_strict_partial_order(p, "P"),
        AdversaryProblem::Ramsey => spec.check_base(p) != Verdict::Reject,
        AdversaryProblem::ZLine => is_strict_linear_order(p, "L"),
    };
    if d.patterns.is_empty() || !d.patterns.iter().all(base_ok) {
        return Ok(false);
    }
    let p = &d.patterns[0];
    let w = apply_rule(rule, p)?;
    let marked = |w: &DecoratedWindow, x: &Element| w.get(x).is_some_and(Decoration::is_marked);
    Ok(match &d.witness {
        Witness::OrderCycle { steps } => {
            let edges = rule_edges(&w);
            let closed = steps.iter().zip(steps.iter().cycle().skip(1)).all(|(a, b)| a.1 == b.0);
            closed
                && steps.len() >= 2
                && steps.iter().all(|(x, y, s)| match s {
                    Source::Rule => edges.contains(&(x.clone(), y.clone())),
                    Source::Base => p.holds("P", &[x.clone(), y.clone()]),
                })
        }
        Witness::Unordered { x, y } => {
            let edges = rule_edges(&w);
            w.get(x).is_some()
                && w.get(y).is_some()
                && x != y
                && !edges.contains(&(x.clone(), y.clone()))
                && !edges.contains(&(y.clone(), x.clone()))
        }
        Witness::MixedColours { a, b, c, red_ab } => {
            let colour = |u: &Element, v: &Element| p.holds("R", &[u.clone(), v.clone()]);
            [a, b, c].iter().all(|x| marked(&w, x))
                && colour(a, b) == *red_ab
                && colour(a, c) != *red_ab
                && p.holds(if *red_ab { "S" } else { "R" }, &[a.clone(), c.clone()])
        }
        Witness::DenseMarks { low, high, between } => {
            if between.len() != d.patterns.len() || between.windows(2).any(|b| b[0] >= b[1]) {
                return Ok(false);
            }
            for (k, p) in d.patterns.iter().enumerate() {
                if let Some(next) = d.patterns.get(k + 1) {
                    if next.restrict(p.universe())? != *p {
                        return Ok(false);
                    }
                }
                let w = apply_rule(rule, p)?;
                let lt = |x: &Element, y: &Element| p.holds("L", &[x.clone(), y.clone()]);
                let inner = w.marked().iter().filter(|x| lt(low, x) && lt(x, high)).count();
                if !marked(&w, low) || !marked(&w, high) || !lt(low, high) || inner < between[k] {
                    return Ok(false);
                }
            }
            true
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_values_are_dyadic_levels() {
        let v: Vec<u64> = (0..9).map(|j| block_value(j, 3)).collect();
        assert_eq!(v, vec![0, 8, 4, 2, 6, 1, 3, 5, 7]);
    }

    #[test]
    fn shipped_rules_are_defeated() {
        for r in 1..=MAX_RADIUS {
            for (problem, rule) in shipped_rules(r) {
                let out = adversary(problem, &rule, 5).unwrap();
                let d = out.defeat().unwrap_or_else(|| panic!("{problem} r={r} not defeated"));
                assert!(replay(&rule, d).unwrap());
            }
        }
    }

    #[test]
    fn linearization_cycle_shape() {
        let rule = coordinate_linearization(2);
        let d = adversary(AdversaryProblem::Linearization, &rule, 0).unwrap().defeat().cloned().unwrap();
        let Witness::OrderCycle { steps } = &d.witness else { panic!() };
        assert_eq!(steps.len(), 4);
        assert_eq!(steps.iter().filter(|s| s.2 == Source::Base).count(), 2);
    }

    #[test]
    fn tampered_witnesses_fail_replay() {
        for (problem, rule) in shipped_rules(1) {
            let mut d = adversary(problem, &rule, 0).unwrap().defeat().cloned().unwrap();
            match &mut d.witness {
                Witness::OrderCycle { steps } => steps.swap(0, 1),
                Witness::MixedColours { red_ab, .. } => *red_ab = !*red_ab,
                Witness::DenseMarks { between, .. } => between[0] += 5,
                Witness::Unordered { .. } => unreachable!(),
            }
            assert!(!replay(&rule, &d).unwrap(), "{problem}");
        }
    }

    #[test]
    fn silent_rules() {
        let lang = ProblemSpec::Linearization.base_language();
        let never = LocalRule::from_fn("never", GroupModel::Z, 1, lang, |_| Decoration::Offsets(BTreeSet::new()));
        let out = adversary(AdversaryProblem::Linearization, &never, 0).unwrap();
        assert!(matches!(out.defeat().unwrap().witness, Witness::Unordered { .. }));

        // A marker that never marks cannot be refuted on finite windows.
        let lang = ProblemSpec::Ramsey.base_language();
        let none = LocalRule::from_fn("none", GroupModel::Z, 1, lang, |_| Decoration::mark(false));
        assert!(matches!(adversary(AdversaryProblem::Ramsey, &none, 0).unwrap(), AdversaryOutcome::NoDefeatFound { .. }));
    }

    #[test]
    fn rules_beyond_the_budget_are_refused() {
        let rule = coordinate_linearization(4);
        assert_eq!(adversary(AdversaryProblem::Linearization, &rule, 0), Err(AdversaryError::RadiusTooLarge(4)));
        assert!(matches!(adversary(AdversaryProblem::Ramsey, &coordinate_linearization(1), 0), Err(AdversaryError::Language(_))));
    }

    #[test]
    fn ramsey_on_other_groups() {
        for g in [GroupModel::Zd(2), GroupModel::Free(2)] {
            let rule = all_red_ball_marker(g, 1);
            let out = adversary(AdversaryProblem::Ramsey, &rule, 1).unwrap();
            assert!(replay(&rule, out.defeat().unwrap()).unwrap(), "{g:?}");
        }
    }
}
