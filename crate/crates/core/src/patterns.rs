//! Finite relational structures whose universe is a finite subset of a group.
//!
//! A [`Pattern`] is the finite analogue of a structure on the whole group:
//! it is used for the finite pieces of a structure (its age), for the basic
//! clopen neighbourhoods `N(A0)` via [`occurs_at`], and for whole windows.
//! Relations are stored as sorted sets of tuples; symmetric relations such as
//! graph edges are stored in both orientations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::groups::{Element, GroupError, GroupModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatternError {
    #[error("unknown relation symbol '{0}'")]
    UnknownSymbol(String),
    #[error("duplicate relation symbol '{0}'")]
    DuplicateSymbol(String),
    #[error("symbol '{name}' has arity {arity}, got a tuple of length {got}")]
    Arity { name: String, arity: usize, got: usize },
    #[error("symbol '{0}' must have positive arity")]
    ZeroArity(String),
    #[error("tuple entry {0} lies outside the universe")]
    OutsideUniverse(String),
    #[error("language is not a sublanguage: symbol '{0}' missing")]
    NotSublanguage(String),
    #[error("set is not contained in the universe: {0} missing")]
    NotSubset(String),
    #[error("malformed pattern JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
}

/// A finite relational language.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Language {
    symbols: Vec<Symbol>,
}

impl Language {
    pub fn new(symbols: impl IntoIterator<Item = (impl Into<String>, usize)>) -> Result<Self, PatternError> {
        let mut out = Language::default();
        for (name, arity) in symbols {
            out.push(Symbol { name: name.into(), arity })?;
        }
        Ok(out)
    }

    fn push(&mut self, s: Symbol) -> Result<(), PatternError> {
        if s.arity == 0 {
            return Err(PatternError::ZeroArity(s.name));
        }
        if self.get(&s.name).is_some() {
            return Err(PatternError::DuplicateSymbol(s.name));
        }
        self.symbols.push(s);
        Ok(())
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.symbols.iter().find(|s| s.name == name)
    }

    pub fn is_sublanguage_of(&self, other: &Language) -> bool {
        self.symbols.iter().all(|s| other.get(&s.name) == Some(s))
    }

    fn first_missing_from(&self, other: &Language) -> Option<String> {
        self.symbols
            .iter()
            .find(|s| other.get(&s.name) != Some(*s))
            .map(|s| s.name.clone())
    }

    /// Union of two languages; symbols of `self` come first.
    pub fn extend(&self, other: &Language) -> Result<Language, PatternError> {
        let mut out = self.clone();
        for s in &other.symbols {
            match out.get(&s.name) {
                Some(t) if t == s => {}
                Some(_) => return Err(PatternError::DuplicateSymbol(s.name.clone())),
                None => out.push(s.clone())?,
            }
        }
        Ok(out)
    }
}

pub type Tuple = Vec<Element>;

/// A finite structure on a subset of a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub group: GroupModel,
    language: Language,
    universe: BTreeSet<Element>,
    relations: BTreeMap<String, BTreeSet<Tuple>>,
}

impl Pattern {
    pub fn new(group: GroupModel, language: Language, universe: impl IntoIterator<Item = Element>) -> Self {
        let relations = language
            .symbols
            .iter()
            .map(|s| (s.name.clone(), BTreeSet::new()))
            .collect();
        Pattern { group, language, universe: universe.into_iter().collect(), relations }
    }

    pub fn language(&self) -> &Language {
        &self.language
    }

    pub fn universe(&self) -> &BTreeSet<Element> {
        &self.universe
    }

    pub fn relation(&self, name: &str) -> Option<&BTreeSet<Tuple>> {
        self.relations.get(name)
    }

    /// Tuples of `name`, or an empty set if the symbol is absent.
    pub fn tuples(&self, name: &str) -> impl Iterator<Item = &Tuple> {
        self.relations.get(name).into_iter().flatten()
    }

    pub fn holds(&self, name: &str, tuple: &[Element]) -> bool {
        self.relations.get(name).is_some_and(|r| r.contains(tuple))
    }

    /// Members of a unary relation.
    pub fn unary(&self, name: &str) -> BTreeSet<Element> {
        self.tuples(name).map(|t| t[0].clone()).collect()
    }

    pub fn insert(&mut self, name: &str, tuple: Tuple) -> Result<bool, PatternError> {
        let sym = self
            .language
            .get(name)
            .ok_or_else(|| PatternError::UnknownSymbol(name.to_string()))?;
        if sym.arity != tuple.len() {
            return Err(PatternError::Arity { name: name.to_string(), arity: sym.arity, got: tuple.len() });
        }
        if let Some(x) = tuple.iter().find(|x| !self.universe.contains(x)) {
            return Err(PatternError::OutsideUniverse(x.to_string()));
        }
        Ok(self.relations.get_mut(name).expect("symbol present").insert(tuple))
    }

    /// Inserts both orientations of a binary pair.
    pub fn insert_symmetric(&mut self, name: &str, x: Element, y: Element) -> Result<(), PatternError> {
        self.insert(name, vec![x.clone(), y.clone()])?;
        self.insert(name, vec![y, x])?;
        Ok(())
    }

    pub fn remove(&mut self, name: &str, tuple: &[Element]) -> bool {
        self.relations.get_mut(name).is_some_and(|r| r.remove(tuple))
    }

    /// Adds elements to the universe (no tuples).
    pub fn extend_universe(&mut self, xs: impl IntoIterator<Item = Element>) {
        self.universe.extend(xs);
    }

    /// The logic action: the translate `γ·A`.
    pub fn translate(&self, gamma: &Element) -> Pattern {
        Pattern {
            group: self.group,
            language: self.language.clone(),
            universe: self.universe.iter().map(|x| gamma.mul(x)).collect(),
            relations: self
                .relations
                .iter()
                .map(|(k, r)| {
                    (k.clone(), r.iter().map(|t| t.iter().map(|x| gamma.mul(x)).collect()).collect())
                })
                .collect(),
        }
    }

    /// Reduct to a sublanguage.
    pub fn reduct(&self, sub: &Language) -> Result<Pattern, PatternError> {
        if let Some(name) = sub.first_missing_from(&self.language) {
            return Err(PatternError::NotSublanguage(name));
        }
        Ok(Pattern {
            group: self.group,
            language: sub.clone(),
            universe: self.universe.clone(),
            relations: sub
                .symbols
                .iter()
                .map(|s| (s.name.clone(), self.relations[&s.name].clone()))
                .collect(),
        })
    }

    /// Restriction to a subset of the universe.
    pub fn restrict(&self, set: &BTreeSet<Element>) -> Result<Pattern, PatternError> {
        if let Some(x) = set.iter().find(|x| !self.universe.contains(x)) {
            return Err(PatternError::NotSubset(x.to_string()));
        }
        Ok(self.restrict_unchecked(set))
    }

    /// Restriction to `set ∩ universe`.
    pub fn restrict_unchecked(&self, set: &BTreeSet<Element>) -> Pattern {
        Pattern {
            group: self.group,
            language: self.language.clone(),
            universe: self.universe.intersection(set).cloned().collect(),
            relations: self
                .relations
                .iter()
                .map(|(k, r)| {
                    (k.clone(), r.iter().filter(|t| t.iter().all(|x| set.contains(x))).cloned().collect())
                })
                .collect(),
        }
    }

    /// True iff `self` (in a larger language) reducts exactly to `base`.
    pub fn is_expansion_of(&self, base: &Pattern) -> bool {
        is_expansion(self, base)
    }

    pub fn to_json(&self) -> Value {
        let language: Vec<Value> = self
            .language
            .symbols
            .iter()
            .map(|s| json!({"name": s.name, "arity": s.arity}))
            .collect();
        let universe: Vec<Value> = self.universe.iter().map(Element::to_json).collect();
        let mut rels = Map::new();
        for s in &self.language.symbols {
            let tuples: Vec<Value> = self.relations[&s.name]
                .iter()
                .map(|t| Value::Array(t.iter().map(Element::to_json).collect()))
                .collect();
            rels.insert(s.name.clone(), Value::Array(tuples));
        }
        json!({
            "group": self.group.to_string(),
            "language": language,
            "universe": universe,
            "relations": rels,
        })
    }

    /// Parses the JSON form. A missing `"group"` key is inferred from the
    /// first universe element (integers → Z, arrays → Z^d, strings → the free
    /// group on the letters used).
    pub fn from_json(v: &Value) -> Result<Pattern, PatternError> {
        let bad = |m: &str| PatternError::Json(m.to_string());
        let obj = v.as_object().ok_or_else(|| bad("expected an object"))?;
        let universe_json = obj
            .get("universe")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing 'universe' array"))?;
        let group = match obj.get("group") {
            Some(Value::String(s)) => s.parse::<GroupModel>()?,
            Some(_) => return Err(bad("'group' must be a string")),
            None => infer_group(universe_json).ok_or_else(|| bad("cannot infer group"))?,
        };
        let mut language = Language::default();
        for s in obj
            .get("language")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing 'language' array"))?
        {
            let sym: Symbol = serde_json::from_value(s.clone()).map_err(|e| bad(&e.to_string()))?;
            language.push(sym)?;
        }
        let universe = universe_json
            .iter()
            .map(|x| group.parse_element(x))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let mut p = Pattern::new(group, language, universe);
        if let Some(rels) = obj.get("relations") {
            let rels = rels.as_object().ok_or_else(|| bad("'relations' must be an object"))?;
            for (name, tuples) in rels {
                for t in tuples.as_array().ok_or_else(|| bad("relation must be an array"))? {
                    let t = t
                        .as_array()
                        .ok_or_else(|| bad("tuple must be an array"))?
                        .iter()
                        .map(|x| group.parse_element(x))
                        .collect::<Result<Vec<_>, _>>()?;
                    p.insert(name, t)?;
                }
            }
        }
        Ok(p)
    }

    /// Compact JSON with sorted keys; identical patterns give identical strings.
    pub fn canonical_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("pattern JSON serializes")
    }

    /// SHA-256 of [`Pattern::canonical_string`], hex encoded.
    pub fn canonical_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_string().as_bytes()))
    }

    /// Neighbours of `x` in the binary relation `name` (out-neighbours).
    pub fn out_neighbours(&self, name: &str, x: &Element) -> BTreeSet<Element> {
        let Some(rel) = self.relations.get(name) else { return BTreeSet::new() };
        let lo = vec![x.clone()];
        rel.range(lo..)
            .take_while(|t| &t[0] == x)
            .map(|t| t[1].clone())
            .collect()
    }
}

fn infer_group(universe: &[Value]) -> Option<GroupModel> {
    match universe.first()? {
        Value::Number(_) => Some(GroupModel::Z),
        Value::Array(xs) if xs.len() == 1 => Some(GroupModel::Z),
        Value::Array(xs) => Some(GroupModel::Zd(xs.len())),
        Value::String(_) => {
            let max = universe
                .iter()
                .filter_map(Value::as_str)
                .flat_map(|s| s.bytes().filter(u8::is_ascii_lowercase))
                .max()
                .unwrap_or(b'a');
            Some(GroupModel::Free((max - b'a' + 1) as usize))
        }
        _ => None,
    }
}

/// True iff `reduct(expanded, language(base)) == base`.
pub fn is_expansion(expanded: &Pattern, base: &Pattern) -> bool {
    match expanded.reduct(&base.language) {
        Ok(r) => r == *base,
        Err(_) => false,
    }
}

/// Does the translate `γ·A0` occur in `a`? This is membership of `a` in the
/// basic clopen set `N(γ·A0)`.
pub fn occurs_at(a0: &Pattern, a: &Pattern, gamma: &Element) -> bool {
    let shifted: BTreeSet<Element> = a0.universe.iter().map(|x| gamma.mul(x)).collect();
    if !shifted.is_subset(&a.universe) {
        return false;
    }
    let Ok(reduced) = a.reduct(&a0.language) else { return false };
    reduced.restrict_unchecked(&shifted) == a0.translate(gamma)
}

/// All `γ` with `γ·A0 ⊑ A`.
pub fn occurrences(a0: &Pattern, a: &Pattern) -> BTreeSet<Element> {
    let Some(anchor) = a0.universe.first() else {
        return a.universe.clone();
    };
    let anchor_inv = anchor.inverse();
    a.universe
        .iter()
        .map(|y| y.mul(&anchor_inv))
        .filter(|g| occurs_at(a0, a, g))
        .collect()
}

/// The equality type of a tuple: all index pairs `(i, j)`, `i < j`, with
/// equal entries.
pub fn equality_type(t: &[Element]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            if t[i] == t[j] {
                out.insert((i, j));
            }
        }
    }
    out
}

/// The Cayley graph (relation `E`, both orientations) of the standard
/// generators, restricted to `set`.
pub fn cayley_graph(group: GroupModel, set: &BTreeSet<Element>) -> Pattern {
    let lang = Language::new([("E", 2)]).expect("valid language");
    let mut p = Pattern::new(group, lang, set.iter().cloned());
    let gens = group.generators();
    for x in set {
        for s in &gens {
            let y = x.mul(s);
            if set.contains(&y) {
                p.insert("E", vec![x.clone(), y]).expect("edge inside universe");
            }
        }
    }
    p
}

/// Three-valued membership of a finite pattern in a class of structures.
///
/// `Accept`: the pattern is a restriction of some member and the defining
/// property is decided by finite data. `Reject`: no member restricts to it.
/// `Undetermined`: consistent, but the property (connectivity, infinitude,
/// absence of endpoints, ...) cannot be decided on a truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
    Undetermined,
}

impl Verdict {
    fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Reject, _) | (_, Verdict::Reject) => Verdict::Reject,
            (Verdict::Undetermined, _) | (_, Verdict::Undetermined) => Verdict::Undetermined,
            _ => Verdict::Accept,
        }
    }

    fn reject_if(bad: bool) -> Verdict {
        if bad {
            Verdict::Reject
        } else {
            Verdict::Accept
        }
    }
}

/// The expansion problems implemented by this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemSpec {
    /// `(X, A, B)` with `A, B` infinite; expand by the graph `T` of a bijection `A → B`.
    Bijection,
    /// Pair colouring `(R, S)`; expand by an infinite homogeneous set `T`.
    Ramsey,
    /// Partial order `P`; expand by a linear order `L ⊇ P`.
    Linearization,
    /// Connected graph `E` (with optional marks `M`) of max degree ≤ d;
    /// expand by a proper colouring `S0, …, Sd`.
    Colouring { d: usize },
    /// Connected graph `E`; expand by a spanning tree `T ⊆ E`.
    SpanningTree,
    /// Linear order `L` without endpoints; expand by `Z` with `(Z, L) ≅ (ℤ, <)`.
    ZLine,
}

impl ProblemSpec {
    pub fn base_language(&self) -> Language {
        let syms: Vec<(String, usize)> = match self {
            ProblemSpec::Bijection => vec![("A".into(), 1), ("B".into(), 1)],
            ProblemSpec::Ramsey => vec![("R".into(), 2), ("S".into(), 2)],
            ProblemSpec::Linearization => vec![("P".into(), 2)],
            ProblemSpec::Colouring { .. } => vec![("E".into(), 2), ("M".into(), 1)],
            ProblemSpec::SpanningTree => vec![("E".into(), 2)],
            ProblemSpec::ZLine => vec![("L".into(), 2)],
        };
        Language::new(syms).expect("valid language")
    }

    /// Symbols added by the expansion.
    pub fn decoration_language(&self) -> Language {
        let syms: Vec<(String, usize)> = match self {
            ProblemSpec::Bijection => vec![("T".into(), 2)],
            ProblemSpec::Ramsey => vec![("T".into(), 1)],
            ProblemSpec::Linearization => vec![("L".into(), 2)],
            ProblemSpec::Colouring { d } => (0..=*d).map(|i| (format!("S{i}"), 1)).collect(),
            ProblemSpec::SpanningTree => vec![("T".into(), 2)],
            ProblemSpec::ZLine => vec![("Z".into(), 1)],
        };
        Language::new(syms).expect("valid language")
    }

    pub fn expanded_language(&self) -> Language {
        self.base_language()
            .extend(&self.decoration_language())
            .expect("disjoint decoration symbols")
    }

    /// Membership of a finite window in the age of the base class.
    pub fn check_base(&self, p: &Pattern) -> Verdict {
        if !self.base_language().is_sublanguage_of(p.language()) {
            return Verdict::Reject;
        }
        match self {
            // infinitude of A and B is not visible on a window
            ProblemSpec::Bijection => Verdict::Undetermined,
            ProblemSpec::Ramsey => Verdict::reject_if(!is_pair_partition(p)),
            ProblemSpec::Linearization => Verdict::reject_if(!is_strict_partial_order(p, "P")),
            ProblemSpec::Colouring { d } => {
                let bad = !is_simple_graph(p, "E")
                    || p.universe().iter().any(|x| p.out_neighbours("E", x).len() > *d);
                // connectivity is a global property
                Verdict::reject_if(bad).and(Verdict::Undetermined)
            }
            ProblemSpec::SpanningTree => {
                Verdict::reject_if(!is_simple_graph(p, "E")).and(Verdict::Undetermined)
            }
            ProblemSpec::ZLine => {
                Verdict::reject_if(!is_strict_linear_order(p, "L")).and(Verdict::Undetermined)
            }
        }
    }

    /// Membership of a finite window in the age of the expanded class.
    pub fn check_expanded(&self, p: &Pattern) -> Verdict {
        if !self.expanded_language().is_sublanguage_of(p.language()) {
            return Verdict::Reject;
        }
        let base = self.check_base(p);
        let own = match self {
            ProblemSpec::Bijection => {
                let a = p.unary("A");
                let b = p.unary("B");
                let mut dom = BTreeSet::new();
                let mut ran = BTreeSet::new();
                let mut bad = false;
                for t in p.tuples("T") {
                    bad |= !a.contains(&t[0]) || !b.contains(&t[1]);
                    bad |= !dom.insert(t[0].clone()) || !ran.insert(t[1].clone());
                }
                // totality and surjectivity may be completed off-window
                Verdict::reject_if(bad).and(Verdict::Undetermined)
            }
            ProblemSpec::Ramsey => {
                let t: Vec<Element> = p.unary("T").into_iter().collect();
                let mut seen_r = false;
                let mut seen_s = false;
                for i in 0..t.len() {
                    for j in i + 1..t.len() {
                        let pair = [t[i].clone(), t[j].clone()];
                        seen_r |= p.holds("R", &pair);
                        seen_s |= p.holds("S", &pair);
                    }
                }
                Verdict::reject_if(seen_r && seen_s).and(Verdict::Undetermined)
            }
            ProblemSpec::Linearization => {
                let contains_p = p.tuples("P").all(|t| p.holds("L", t));
                Verdict::reject_if(!contains_p || !is_strict_linear_order(p, "L"))
            }
            ProblemSpec::Colouring { d } => {
                let mut colour: BTreeMap<&Element, usize> = BTreeMap::new();
                let mut bad = false;
                for i in 0..=*d {
                    for t in p.tuples(&format!("S{i}")) {
                        bad |= colour.insert(&t[0], i).is_some();
                    }
                }
                for e in p.tuples("E") {
                    if let (Some(a), Some(b)) = (colour.get(&e[0]), colour.get(&e[1])) {
                        bad |= a == b;
                    }
                }
                let complete = colour.len() == p.universe().len();
                Verdict::reject_if(bad).and(if complete { Verdict::Accept } else { Verdict::Undetermined })
            }
            ProblemSpec::SpanningTree => {
                let inside = p.tuples("T").all(|t| p.holds("E", t));
                let acyclic = is_forest(p, "T");
                Verdict::reject_if(!inside || !acyclic).and(Verdict::Undetermined)
            }
            ProblemSpec::ZLine => Verdict::Undetermined,
        };
        base.and(own)
    }
}

fn is_pair_partition(p: &Pattern) -> bool {
    let u: Vec<&Element> = p.universe().iter().collect();
    let ok_tuples = ["R", "S"].iter().all(|name| {
        p.tuples(name).all(|t| t[0] != t[1] && p.holds(name, &[t[1].clone(), t[0].clone()]))
    });
    ok_tuples
        && u.iter().enumerate().all(|(i, x)| {
            u[i + 1..].iter().all(|y| {
                let pair = [(*x).clone(), (*y).clone()];
                p.holds("R", &pair) != p.holds("S", &pair)
            })
        })
}

fn is_simple_graph(p: &Pattern, name: &str) -> bool {
    p.tuples(name).all(|t| t[0] != t[1] && p.holds(name, &[t[1].clone(), t[0].clone()]))
}

pub(crate) fn is_strict_partial_order(p: &Pattern, name: &str) -> bool {
    let irreflexive = p.tuples(name).all(|t| t[0] != t[1]);
    let transitive = p.tuples(name).all(|t| {
        p.out_neighbours(name, &t[1]).iter().all(|z| p.holds(name, &[t[0].clone(), z.clone()]))
    });
    // irreflexive + transitive implies antisymmetric
    irreflexive && transitive
}

pub(crate) fn is_strict_linear_order(p: &Pattern, name: &str) -> bool {
    let u: Vec<&Element> = p.universe().iter().collect();
    is_strict_partial_order(p, name)
        && u.iter().enumerate().all(|(i, x)| {
            u[i + 1..].iter().all(|y| {
                p.holds(name, &[(*x).clone(), (*y).clone()]) || p.holds(name, &[(*y).clone(), (*x).clone()])
            })
        })
}

fn is_forest(p: &Pattern, name: &str) -> bool {
    let idx: BTreeMap<&Element, usize> = p.universe().iter().enumerate().map(|(i, x)| (x, i)).collect();
    let mut parent: Vec<usize> = (0..idx.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut edges = BTreeSet::new();
    for t in p.tuples(name) {
        let (a, b) = (idx[&t[0]], idx[&t[1]]);
        if a == b {
            return false;
        }
        edges.insert((a.min(b), a.max(b)));
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::Element::Int;
    use proptest::prelude::*;

    fn graph_lang() -> Language {
        Language::new([("E", 2)]).unwrap()
    }

    fn path_012() -> Pattern {
        let mut p = Pattern::new(GroupModel::Z, graph_lang(), (0..3).map(Int));
        p.insert_symmetric("E", Int(0), Int(1)).unwrap();
        p.insert_symmetric("E", Int(1), Int(2)).unwrap();
        p
    }

    #[test]
    fn language_rejects_bad_symbols() {
        assert!(matches!(Language::new([("E", 0)]), Err(PatternError::ZeroArity(_))));
        assert!(matches!(Language::new([("E", 2), ("E", 1)]), Err(PatternError::DuplicateSymbol(_))));
    }

    #[test]
    fn insert_checks_arity_and_universe() {
        let mut p = Pattern::new(GroupModel::Z, graph_lang(), [Int(0), Int(1)]);
        assert!(matches!(p.insert("E", vec![Int(0)]), Err(PatternError::Arity { .. })));
        assert!(matches!(p.insert("E", vec![Int(0), Int(5)]), Err(PatternError::OutsideUniverse(_))));
        assert!(matches!(p.insert("F", vec![Int(0), Int(1)]), Err(PatternError::UnknownSymbol(_))));
    }

    #[test]
    fn translate_examples() {
        let p = path_012();
        assert_eq!(p.translate(&Int(0)), p);
        let mut edge = Pattern::new(GroupModel::Z, graph_lang(), [Int(0), Int(1)]);
        edge.insert_symmetric("E", Int(0), Int(1)).unwrap();
        let mut want = Pattern::new(GroupModel::Z, graph_lang(), [Int(2), Int(3)]);
        want.insert_symmetric("E", Int(2), Int(3)).unwrap();
        assert_eq!(edge.translate(&Int(2)), want);
    }

    #[test]
    fn reduct_examples() {
        let p = path_012();
        assert_eq!(p.reduct(p.language()).unwrap(), p);
        let lang = Language::new([("E", 2), ("S0", 1)]).unwrap();
        let mut coloured = Pattern::new(GroupModel::Z, lang, (0..3).map(Int));
        coloured.insert_symmetric("E", Int(0), Int(1)).unwrap();
        coloured.insert_symmetric("E", Int(1), Int(2)).unwrap();
        coloured.insert("S0", vec![Int(0)]).unwrap();
        assert_eq!(coloured.reduct(&graph_lang()).unwrap(), p);
        let other = Language::new([("Q", 1)]).unwrap();
        assert!(matches!(p.reduct(&other), Err(PatternError::NotSublanguage(_))));
    }

    #[test]
    fn restrict_examples() {
        let p = path_012();
        assert_eq!(p.restrict(p.universe()).unwrap(), p);
        let empty = p.restrict(&BTreeSet::new()).unwrap();
        assert!(empty.universe().is_empty() && empty.tuples("E").next().is_none());
        let ends = p.restrict(&BTreeSet::from([Int(0), Int(2)])).unwrap();
        assert_eq!(ends.universe().len(), 2);
        assert_eq!(ends.tuples("E").count(), 0);
        assert!(matches!(p.restrict(&BTreeSet::from([Int(9)])), Err(PatternError::NotSubset(_))));
    }

    #[test]
    fn expansion_examples() {
        let g = path_012();
        let lang = graph_lang().extend(&Language::new([("S0", 1), ("S1", 1)]).unwrap()).unwrap();
        let mut c = Pattern::new(GroupModel::Z, lang, (0..3).map(Int));
        for t in g.tuples("E") {
            c.insert("E", t.clone()).unwrap();
        }
        c.insert("S0", vec![Int(0)]).unwrap();
        c.insert("S1", vec![Int(1)]).unwrap();
        c.insert("S0", vec![Int(2)]).unwrap();
        assert!(is_expansion(&c, &g));
        let mut c2 = c.clone();
        c2.remove("E", &[Int(0), Int(1)]);
        c2.remove("E", &[Int(1), Int(0)]);
        assert!(!is_expansion(&c2, &g));
        assert!(is_expansion(&g, &g));
    }

    #[test]
    fn occurs_at_examples() {
        let line = cayley_graph(GroupModel::Z, &GroupModel::Z.ball(10).elements);
        let point = Pattern::new(GroupModel::Z, graph_lang(), [Int(0)]);
        for g in line.universe() {
            assert!(occurs_at(&point, &line, g));
        }
        let mut edge = Pattern::new(GroupModel::Z, graph_lang(), [Int(0), Int(1)]);
        edge.insert_symmetric("E", Int(0), Int(1)).unwrap();
        assert!(occurs_at(&edge, &line, &Int(5)));
        let mut long = Pattern::new(GroupModel::Z, graph_lang(), [Int(0), Int(2)]);
        long.insert_symmetric("E", Int(0), Int(2)).unwrap();
        assert!((-12..=12).all(|g| !occurs_at(&long, &line, &Int(g))));
        assert!(occurrences(&long, &line).is_empty());
        assert_eq!(occurrences(&edge, &line).len(), 20);
    }

    #[test]
    fn equality_type_examples() {
        let (a, b) = (Int(1), Int(2));
        assert_eq!(equality_type(&[a.clone(), a.clone(), b.clone()]), BTreeSet::from([(0, 1)]));
        assert!(equality_type(&[a.clone(), b.clone(), Int(3)]).is_empty());
        assert_eq!(
            equality_type(&[a.clone(), a.clone(), a]),
            BTreeSet::from([(0, 1), (0, 2), (1, 2)])
        );
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let p = path_012();
        let s = p.canonical_string();
        let q = Pattern::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(q, p);
        assert_eq!(q.canonical_string(), s);
        assert_eq!(q.canonical_hash(), p.canonical_hash());
        let f2 = cayley_graph(GroupModel::Free(2), &GroupModel::Free(2).ball(1).elements);
        let back = Pattern::from_json(&f2.to_json()).unwrap();
        assert_eq!(back.canonical_string(), f2.canonical_string());
    }

    #[test]
    fn group_is_inferred_when_absent() {
        let v = serde_json::json!({
            "language": [{"name": "E", "arity": 2}],
            "universe": ["1", "a", "b^-1"],
            "relations": {"E": [["1", "a"]]}
        });
        let p = Pattern::from_json(&v).unwrap();
        assert_eq!(p.group, GroupModel::Free(2));
        assert_eq!(p.tuples("E").count(), 1);
    }

    #[test]
    fn problem_verdicts() {
        let lin = ProblemSpec::Linearization;
        let lang = lin.expanded_language();
        let mut p = Pattern::new(GroupModel::Z, lang, (0..3).map(Int));
        p.insert("P", vec![Int(0), Int(2)]).unwrap();
        for (x, y) in [(0, 1), (1, 2), (0, 2)] {
            p.insert("L", vec![Int(x), Int(y)]).unwrap();
        }
        assert_eq!(lin.check_base(&p), Verdict::Accept);
        assert_eq!(lin.check_expanded(&p), Verdict::Accept);
        p.remove("L", &[Int(0), Int(2)]);
        assert_eq!(lin.check_expanded(&p), Verdict::Reject);

        let col = ProblemSpec::Colouring { d: 2 };
        let mut g = Pattern::new(GroupModel::Z, col.expanded_language(), (0..3).map(Int));
        g.insert_symmetric("E", Int(0), Int(1)).unwrap();
        assert_eq!(col.check_base(&g), Verdict::Undetermined);
        g.insert("S0", vec![Int(0)]).unwrap();
        g.insert("S0", vec![Int(1)]).unwrap();
        assert_eq!(col.check_expanded(&g), Verdict::Reject);
    }

    fn arb_pattern() -> impl Strategy<Value = Pattern> {
        (prop::collection::btree_set(-6i64..6, 0..8), prop::collection::vec((0usize..8, 0usize..8), 0..10), prop::collection::vec(0usize..8, 0..4))
            .prop_map(|(u, edges, marks)| {
                let lang = Language::new([("E", 2), ("M", 1)]).unwrap();
                let us: Vec<Element> = u.iter().map(|&x| Int(x)).collect();
                let mut p = Pattern::new(GroupModel::Z, lang, us.clone());
                if !us.is_empty() {
                    for (a, b) in edges {
                        p.insert("E", vec![us[a % us.len()].clone(), us[b % us.len()].clone()]).unwrap();
                    }
                    for m in marks {
                        p.insert("M", vec![us[m % us.len()].clone()]).unwrap();
                    }
                }
                p
            })
    }

    proptest! {
        #[test]
        fn translate_is_an_action(p in arb_pattern(), g in -20i64..20, h in -20i64..20) {
            prop_assert_eq!(p.translate(&Int(0)), p.clone());
            prop_assert_eq!(p.translate(&Int(h)).translate(&Int(g)), p.translate(&Int(g + h)));
        }

        #[test]
        fn reduct_and_restrict_commute(p in arb_pattern(), keep in prop::collection::vec(any::<bool>(), 8)) {
            let s: BTreeSet<Element> = p.universe().iter().zip(keep).filter(|(_, k)| *k).map(|(x, _)| x.clone()).collect();
            let sub = Language::new([("M", 1)]).unwrap();
            let a = p.restrict(&s).unwrap().reduct(&sub).unwrap();
            let b = p.reduct(&sub).unwrap().restrict(&s).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn reduct_of_expansion_is_identity(p in arb_pattern()) {
            let base = p.reduct(&Language::new([("E", 2)]).unwrap()).unwrap();
            prop_assert!(is_expansion(&p, &base));
        }

        #[test]
        fn occurs_at_is_equivariant(p in arb_pattern(), d in -9i64..9, g in -9i64..9, pick in 0usize..8) {
            prop_assume!(!p.universe().is_empty());
            let x = p.universe().iter().nth(pick % p.universe().len()).unwrap().clone();
            let window: BTreeSet<Element> = [x.clone(), x.mul(&Int(1))].into_iter().filter(|y| p.universe().contains(y)).collect();
            let a0 = p.restrict(&window).unwrap().translate(&x.inverse());
            let left = occurs_at(&a0, &p.translate(&Int(d)), &Int(d + g));
            prop_assert_eq!(left, occurs_at(&a0, &p, &Int(g)));
        }

        #[test]
        fn json_round_trip(p in arb_pattern()) {
            let q = Pattern::from_json(&p.to_json()).unwrap();
            prop_assert_eq!(q.canonical_string(), p.canonical_string());
        }
    }
}
