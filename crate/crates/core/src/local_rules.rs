//! Finite-radius equivariant decoration rules.
//!
//! A [`LocalRule`] of radius `r` looks at the pattern on `x·B(r)`, moved to
//! the identity by `x⁻¹`, and returns the decoration of `x`. Rules see group
//! coordinates of the local pattern (not just its isomorphism type): this is
//! exactly equivariance, which is weaker than isomorphism invariance.
//!
//! Decorations are only produced on the determined interior
//! `{x ∈ W : x·B(r) ⊆ W}`; nothing is extrapolated past the window.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::groups::{ball_elements, Element, GroupError, GroupModel};
use crate::patterns::{Language, Pattern, PatternError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("{x} is too close to the window boundary for radius {radius}")]
    Undetermined { x: String, radius: usize },
    #[error("malformed rule table: {0}")]
    Table(String),
}

/// The value a rule assigns to one vertex.
///
/// `Int` covers colours and mark bits. `Offsets` is a set of group elements
/// `δ` meaning "`x` is related to `x·δ`", used for binary decorations such as
/// linear orders.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Decoration {
    Int(i64),
    Offsets(BTreeSet<Element>),
}

impl Decoration {
    pub fn mark(b: bool) -> Decoration {
        Decoration::Int(b as i64)
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Decoration::Int(v) => Some(*v),
            Decoration::Offsets(_) => None,
        }
    }

    pub fn is_marked(&self) -> bool {
        matches!(self, Decoration::Int(v) if *v != 0)
    }

    pub fn to_json(&self) -> Value {
        match self {
            Decoration::Int(v) => json!(v),
            Decoration::Offsets(s) => json!({"offsets": s.iter().map(Element::to_json).collect::<Vec<_>>()}),
        }
    }

    pub fn from_json(group: GroupModel, v: &Value) -> Result<Decoration, RuleError> {
        if let Some(i) = v.as_i64() {
            return Ok(Decoration::Int(i));
        }
        let offs = v
            .get("offsets")
            .and_then(Value::as_array)
            .ok_or_else(|| RuleError::Table(format!("bad decoration {v}")))?;
        Ok(Decoration::Offsets(
            offs.iter().map(|x| group.parse_element(x)).collect::<Result<_, _>>()?,
        ))
    }
}

type BodyFn = dyn Fn(&Pattern) -> Decoration + Send + Sync;

#[derive(Clone)]
enum Body {
    Code(Arc<BodyFn>),
    Table { table: BTreeMap<String, Decoration>, default: Decoration },
}

/// A deterministic decoration rule of fixed radius.
#[derive(Clone)]
pub struct LocalRule {
    pub name: String,
    pub group: GroupModel,
    pub radius: usize,
    pub language: Language,
    body: Body,
}

impl std::fmt::Debug for LocalRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalRule")
            .field("name", &self.name)
            .field("group", &self.group)
            .field("radius", &self.radius)
            .finish_non_exhaustive()
    }
}

impl LocalRule {
    /// A rule given as code. The body receives the local pattern with universe
    /// `B(radius)` (already moved to the identity).
    pub fn from_fn(
        name: impl Into<String>,
        group: GroupModel,
        radius: usize,
        language: Language,
        body: impl Fn(&Pattern) -> Decoration + Send + Sync + 'static,
    ) -> LocalRule {
        LocalRule { name: name.into(), group, radius, language, body: Body::Code(Arc::new(body)) }
    }

    /// A rule given as a lookup table keyed by canonical pattern hashes.
    pub fn from_table(
        name: impl Into<String>,
        group: GroupModel,
        radius: usize,
        language: Language,
        table: BTreeMap<String, Decoration>,
        default: Decoration,
    ) -> LocalRule {
        LocalRule { name: name.into(), group, radius, language, body: Body::Table { table, default } }
    }

    /// Decoration of the identity for a local pattern on `B(radius)`.
    pub fn evaluate(&self, local: &Pattern) -> Decoration {
        match &self.body {
            Body::Code(f) => f(local),
            Body::Table { table, default } => {
                table.get(&local.canonical_hash()).cloned().unwrap_or_else(|| default.clone())
            }
        }
    }

    /// `translate(x⁻¹, restrict(A, x·B(r)))`, or `None` if `x·B(r)` leaves the window.
    pub fn local_view(&self, a: &Pattern, x: &Element) -> Option<Pattern> {
        local_view(a, x, self.radius)
    }

    pub fn decorate_at(&self, a: &Pattern, x: &Element) -> Option<Decoration> {
        self.local_view(a, x).map(|p| self.evaluate(&p))
    }

    /// Tabulates the rule on the given local patterns.
    pub fn tabulate(&self, inputs: impl IntoIterator<Item = Pattern>, default: Decoration) -> LocalRule {
        let table = inputs
            .into_iter()
            .map(|p| (p.canonical_hash(), self.evaluate(&p)))
            .collect();
        LocalRule::from_table(self.name.clone(), self.group, self.radius, self.language.clone(), table, default)
    }

    pub fn is_table(&self) -> bool {
        matches!(self.body, Body::Table { .. })
    }

    /// JSON form of a table rule; `None` for code rules.
    pub fn table_json(&self) -> Option<Value> {
        let Body::Table { table, default } = &self.body else { return None };
        let mut t = Map::new();
        for (k, v) in table {
            t.insert(k.clone(), v.to_json());
        }
        let language: Vec<Value> = self
            .language
            .symbols()
            .iter()
            .map(|s| json!({"name": s.name, "arity": s.arity}))
            .collect();
        Some(json!({
            "name": self.name,
            "group": self.group.to_string(),
            "radius": self.radius,
            "language": language,
            "default": default.to_json(),
            "table": t,
        }))
    }

    pub fn from_table_json(v: &Value) -> Result<LocalRule, RuleError> {
        let bad = |m: &str| RuleError::Table(m.to_string());
        let group: GroupModel = v
            .get("group")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing group"))?
            .parse()?;
        let radius = v.get("radius").and_then(Value::as_u64).ok_or_else(|| bad("missing radius"))? as usize;
        let mut syms = Vec::new();
        for s in v.get("language").and_then(Value::as_array).ok_or_else(|| bad("missing language"))? {
            let name = s.get("name").and_then(Value::as_str).ok_or_else(|| bad("symbol name"))?;
            let arity = s.get("arity").and_then(Value::as_u64).ok_or_else(|| bad("symbol arity"))?;
            syms.push((name.to_string(), arity as usize));
        }
        let language = Language::new(syms)?;
        let default = Decoration::from_json(group, v.get("default").ok_or_else(|| bad("missing default"))?)?;
        let mut table = BTreeMap::new();
        for (k, d) in v.get("table").and_then(Value::as_object).ok_or_else(|| bad("missing table"))? {
            table.insert(k.clone(), Decoration::from_json(group, d)?);
        }
        let name = v.get("name").and_then(Value::as_str).unwrap_or("table").to_string();
        Ok(LocalRule::from_table(name, group, radius, language, table, default))
    }
}

/// `translate(x⁻¹, restrict(A, x·B(r)))` if `x·B(r)` lies in the universe.
pub fn local_view(a: &Pattern, x: &Element, r: usize) -> Option<Pattern> {
    let ball: BTreeSet<Element> = ball_elements(a.group, r).into_iter().map(|g| x.mul(&g)).collect();
    if !ball.is_subset(a.universe()) {
        return None;
    }
    Some(a.restrict_unchecked(&ball).translate(&x.inverse()))
}

/// Elements `x` of the universe with `x·B(r)` inside the universe.
pub fn determined_interior(a: &Pattern, r: usize) -> BTreeSet<Element> {
    let ball = ball_elements(a.group, r);
    a.universe()
        .iter()
        .filter(|x| ball.iter().all(|g| a.universe().contains(&x.mul(g))))
        .cloned()
        .collect()
}

/// A window together with the decorations a rule determines on it.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoratedWindow {
    pub base: Pattern,
    pub radius: usize,
    pub decorations: BTreeMap<Element, Decoration>,
    pub undetermined: BTreeSet<Element>,
}

impl DecoratedWindow {
    pub fn get(&self, x: &Element) -> Option<&Decoration> {
        self.decorations.get(x)
    }

    /// Elements whose decoration is a nonzero integer.
    pub fn marked(&self) -> BTreeSet<Element> {
        self.decorations.iter().filter(|(_, d)| d.is_marked()).map(|(x, _)| x.clone()).collect()
    }

    pub fn to_json(&self) -> Value {
        let decorations: Vec<Value> = self
            .decorations
            .iter()
            .map(|(x, d)| json!([x.to_json(), d.to_json()]))
            .collect();
        json!({
            "base": self.base.to_json(),
            "radius": self.radius,
            "decorations": decorations,
            "undetermined": self.undetermined.iter().map(Element::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Applies `rule` at every point of the determined interior of `a`.
pub fn apply_rule(rule: &LocalRule, a: &Pattern) -> Result<DecoratedWindow, RuleError> {
    let base = a.reduct(&rule.language)?;
    let points: Vec<&Element> = base.universe().iter().collect();
    let decided: Vec<Option<Decoration>> = points.par_iter().map(|x| rule.decorate_at(&base, x)).collect();
    let mut decorations = BTreeMap::new();
    let mut undetermined = BTreeSet::new();
    for (x, d) in points.into_iter().zip(decided) {
        match d {
            Some(d) => {
                decorations.insert(x.clone(), d);
            }
            None => {
                undetermined.insert(x.clone());
            }
        }
    }
    Ok(DecoratedWindow { base, radius: rule.radius, decorations, undetermined })
}

/// Anything that decorates the points of a finite window.
pub trait WindowMap: Sync {
    fn decorate_window(&self, a: &Pattern) -> BTreeMap<Element, Decoration>;
}

impl WindowMap for LocalRule {
    fn decorate_window(&self, a: &Pattern) -> BTreeMap<Element, Decoration> {
        apply_rule(self, a).map(|w| w.decorations).unwrap_or_default()
    }
}

/// A window map that also sees absolute coordinates. It is evaluated on the
/// determined interior for `radius`, but nothing forces it to be
/// equivariant; [`check_equivariance`] is how such maps get audited.
pub struct AbsoluteMap<F> {
    pub radius: usize,
    pub f: F,
}

impl<F: Fn(&Pattern, &Element) -> Decoration + Sync> WindowMap for AbsoluteMap<F> {
    fn decorate_window(&self, a: &Pattern) -> BTreeMap<Element, Decoration> {
        determined_interior(a, self.radius)
            .into_iter()
            .map(|x| {
                let d = (self.f)(a, &x);
                (x, d)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub sample: usize,
    pub x: Element,
    pub gamma: Element,
    pub original: Decoration,
    pub shifted: Decoration,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquivarianceReport {
    pub compared: usize,
    pub violations: Vec<Violation>,
}

impl EquivarianceReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `decoration_{γA}(γx) = decoration_A(x)` wherever both sides are
/// determined, for every sample `(A, γ)`.
pub fn check_equivariance(map: &dyn WindowMap, samples: &[(Pattern, Element)]) -> EquivarianceReport {
    let per_sample: Vec<(usize, Vec<Violation>)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, (a, gamma))| {
            let left = map.decorate_window(a);
            let right = map.decorate_window(&a.translate(gamma));
            let mut compared = 0;
            let mut bad = Vec::new();
            for (x, d) in &left {
                if let Some(e) = right.get(&gamma.mul(x)) {
                    compared += 1;
                    if d != e {
                        bad.push(Violation {
                            sample: i,
                            x: x.clone(),
                            gamma: gamma.clone(),
                            original: d.clone(),
                            shifted: e.clone(),
                        });
                    }
                }
            }
            (compared, bad)
        })
        .collect();
    let mut report = EquivarianceReport::default();
    for (c, v) in per_sample {
        report.compared += c;
        report.violations.extend(v);
    }
    report
}

/// The pulled-back structure `F(x)` on `B(r)`:
/// `R^{F(x)}(γ₁,…,γₙ) ⇔ R^A(γ₁⁻¹x, …, γₙ⁻¹x)`.
///
/// Needs `γ⁻¹x` in the window for all `γ ∈ B(r)`.
pub fn structure_to_map(a: &Pattern, x: &Element, r: usize) -> Result<Pattern, RuleError> {
    let ball = ball_elements(a.group, r);
    let sources: BTreeSet<Element> = ball.iter().map(|g| g.inverse().mul(x)).collect();
    if !sources.is_subset(a.universe()) {
        return Err(RuleError::Undetermined { x: x.to_string(), radius: r });
    }
    let mut out = Pattern::new(a.group, a.language().clone(), ball);
    for s in a.language().symbols() {
        for t in a.tuples(&s.name) {
            if t.iter().all(|y| sources.contains(y)) {
                // y = γ⁻¹x  ⇔  γ = x·y⁻¹
                let pulled: Vec<Element> = t.iter().map(|y| x.mul(&y.inverse())).collect();
                out.insert(&s.name, pulled)?;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::Element::Int;
    use crate::patterns::cayley_graph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rlang() -> Language {
        Language::new([("R", 2)]).unwrap()
    }

    fn random_r_pattern(seed: u64, radius: i64) -> Pattern {
        let mut p = Pattern::new(GroupModel::Z, rlang(), (-radius..=radius).map(Int));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in -radius..=radius {
            for d in 1..=3 {
                if rng.gen_bool(0.125) && x + d <= radius {
                    p.insert_symmetric("R", Int(x), Int(x + d)).unwrap();
                }
            }
        }
        p
    }

    // mark the identity iff the nearest R-neighbour is at even distance
    fn parity_rule() -> LocalRule {
        LocalRule::from_fn("nearest-r-parity", GroupModel::Z, 3, rlang(), |p| {
            let zero = Int(0);
            let nearest = p
                .out_neighbours("R", &zero)
                .into_iter()
                .map(|y| y.as_int().unwrap().abs())
                .min();
            Decoration::mark(nearest.is_some_and(|d| d % 2 == 0))
        })
    }

    #[test]
    fn apply_rule_matches_per_vertex_evaluation() {
        let a = random_r_pattern(11, 20);
        let rule = parity_rule();
        let w = apply_rule(&rule, &a).unwrap();
        for x in -20i64..=20 {
            let inside = (-17..=17).contains(&x);
            assert_eq!(w.get(&Int(x)).is_some(), inside);
            if inside {
                let nearest = (1..=3)
                    .find(|d| a.holds("R", &[Int(x), Int(x - d)]) || a.holds("R", &[Int(x), Int(x + d)]));
                assert_eq!(w.get(&Int(x)).unwrap().is_marked(), nearest.is_some_and(|d| d % 2 == 0));
            }
        }
        assert_eq!(w.undetermined.len(), 6);
    }

    #[test]
    fn radius_zero_constant_rule() {
        let a = random_r_pattern(3, 5);
        let rule = LocalRule::from_fn("const", GroupModel::Z, 0, rlang(), |_| Decoration::Int(7));
        let w = apply_rule(&rule, &a).unwrap();
        assert_eq!(w.decorations.len(), 11);
        assert!(w.decorations.values().all(|d| *d == Decoration::Int(7)));
        assert!(w.undetermined.is_empty());
    }

    #[test]
    fn translated_input_shifts_decorations() {
        let a = random_r_pattern(5, 20);
        let rule = parity_rule();
        let w = apply_rule(&rule, &a).unwrap();
        let ws = apply_rule(&rule, &a.translate(&Int(4))).unwrap();
        for (x, d) in &w.decorations {
            assert_eq!(ws.get(&x.mul(&Int(4))), Some(d));
        }
    }

    #[test]
    fn coordinate_absolute_map_is_caught() {
        let samples: Vec<(Pattern, Element)> = (0..5).map(|i| (random_r_pattern(i, 10), Int(3))).collect();
        let rule = parity_rule();
        assert!(check_equivariance(&rule, &samples).is_clean());
        let absolute = AbsoluteMap { radius: 0, f: |_: &Pattern, x: &Element| Decoration::mark(x.is_identity()) };
        let report = check_equivariance(&absolute, &samples);
        // x = 0 and x = -3 disagree in every sample
        assert_eq!(report.violations.len(), 10);
    }

    #[test]
    fn monotone_determinedness() {
        let big = random_r_pattern(9, 25);
        let small = big.restrict(&(-12..=12).map(Int).collect()).unwrap();
        let rule = parity_rule();
        let ws = apply_rule(&rule, &small).unwrap();
        let wb = apply_rule(&rule, &big).unwrap();
        for (x, d) in &ws.decorations {
            assert_eq!(wb.get(x), Some(d));
        }
    }

    #[test]
    fn table_rule_round_trips_and_agrees() {
        let rule = parity_rule();
        let a = random_r_pattern(21, 15);
        let views: Vec<Pattern> = determined_interior(&a, 3).iter().map(|x| rule.local_view(&a, x).unwrap()).collect();
        let table = rule.tabulate(views, Decoration::Int(-1));
        let back = LocalRule::from_table_json(&table.table_json().unwrap()).unwrap();
        assert!(back.is_table());
        assert_eq!(apply_rule(&back, &a).unwrap().decorations, apply_rule(&rule, &a).unwrap().decorations);
    }

    #[test]
    fn structure_to_map_at_identity_reflects() {
        let a = random_r_pattern(2, 10);
        let f = structure_to_map(&a, &Int(0), 4).unwrap();
        for x in -4i64..=4 {
            for y in -4i64..=4 {
                assert_eq!(f.holds("R", &[Int(x), Int(y)]), a.holds("R", &[Int(-x), Int(-y)]));
            }
        }
        assert!(matches!(structure_to_map(&a, &Int(8), 4), Err(RuleError::Undetermined { .. })));
    }

    #[test]
    fn structure_to_map_biconditional_on_free_group() {
        let g = GroupModel::Free(2);
        let a = cayley_graph(g, &g.ball(4).elements);
        let x = crate::groups::parse_word("ab").unwrap();
        let f = structure_to_map(&a, &x, 2).unwrap();
        let ball = ball_elements(g, 2);
        for u in &ball {
            for v in &ball {
                let lhs = f.holds("E", &[u.clone(), v.clone()]);
                let rhs = a.holds("E", &[u.inverse().mul(&x), v.inverse().mul(&x)]);
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn structure_to_map_is_equivariant() {
        let a = random_r_pattern(4, 30);
        for (x, g) in [(0i64, 3i64), (2, -5), (-4, 7)] {
            let fx = structure_to_map(&a, &Int(x), 5).unwrap();
            let fgx = structure_to_map(&a, &Int(g + x), 5).unwrap();
            let moved = fx.translate(&Int(g));
            let common: BTreeSet<Element> =
                fgx.universe().intersection(moved.universe()).cloned().collect();
            assert_eq!(fgx.restrict(&common).unwrap(), moved.restrict(&common).unwrap());
        }
    }

    #[test]
    fn empty_relations_pull_back_empty() {
        let a = Pattern::new(GroupModel::Z, rlang(), (-5..=5).map(Int));
        let f = structure_to_map(&a, &Int(1), 3).unwrap();
        assert_eq!(f.tuples("R").count(), 0);
    }
}
