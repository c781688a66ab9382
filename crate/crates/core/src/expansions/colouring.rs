//! Equivariant proper `(d+1)`-colourings of bounded-degree graphs on a group.
//!
//! The colour of `v` is a function of the pointed structure `v⁻¹G`. A vertex
//! is *witnessed* at level `k` when its radius-`k` view differs from the
//! radius-`k` view of every neighbour. Vertices are indexed by
//! `(k, code of the view)` with `k` minimal; adjacent vertices never share an
//! index, and colours are assigned in index order, each vertex taking the
//! least colour not used by an earlier-indexed neighbour.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{json, Value};
use thiserror::Error;

use super::Frame;
use crate::groups::{ball_elements, Element, GroupModel, Window};
use crate::patterns::{Language, Pattern, PatternError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColouringError {
    #[error("pattern has no binary relation E")]
    NoEdges,
    #[error("vertex {vertex} has degree {degree} > {d}")]
    Degree { vertex: String, degree: usize, d: usize },
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// A view `v⁻¹G` cut down to `B(k)`: tuples tagged by relation position.
type View = Vec<(usize, Vec<Element>)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColouringState {
    pub frame: Frame,
    pub d: usize,
    /// Longest edge `|x⁻¹y|` in the input; neighbourhoods are read this far.
    pub span: usize,
    /// Witness level of each witnessed vertex.
    pub level: BTreeMap<Element, usize>,
    /// Canonical code of the witnessing view.
    pub code: BTreeMap<Element, String>,
    /// For vertices with no witness found: every level below this fails.
    pub lower_bound: BTreeMap<Element, usize>,
    pub colour: BTreeMap<Element, usize>,
    /// Radius around `v` that determines its colour.
    pub support: BTreeMap<Element, usize>,
    pub interior: BTreeSet<Element>,
    /// Interior vertices left without a colour.
    pub uncoloured: BTreeSet<Element>,
}

impl ColouringState {
    /// The classes `Yₙ`, keyed by index `(level, code)`.
    pub fn classes(&self) -> BTreeMap<(usize, String), BTreeSet<Element>> {
        let mut out: BTreeMap<(usize, String), BTreeSet<Element>> = BTreeMap::new();
        for (v, k) in &self.level {
            out.entry((*k, self.code[v].clone())).or_default().insert(v.clone());
        }
        out
    }

    /// The input with unary colour classes `S0..Sd` added on coloured vertices.
    pub fn decorate(&self, g: &Pattern) -> Result<Pattern, PatternError> {
        let extra = Language::new((0..=self.d).map(|i| (format!("S{i}"), 1)))?;
        let mut out = Pattern::new(g.group, g.language().extend(&extra)?, g.universe().iter().cloned());
        for s in g.language().symbols() {
            for t in g.tuples(&s.name) {
                out.insert(&s.name, t.clone())?;
            }
        }
        for (v, c) in &self.colour {
            if out.universe().contains(v) {
                out.insert(&format!("S{c}"), vec![v.clone()])?;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let map = |m: &BTreeMap<Element, usize>| m.iter().map(|(v, c)| json!([v.to_json(), c])).collect::<Vec<_>>();
        json!({
            "frame": self.frame,
            "d": self.d,
            "span": self.span,
            "colour": map(&self.colour),
            "level": map(&self.level),
            "support": map(&self.support),
            "uncoloured": self.uncoloured.iter().map(Element::to_json).collect::<Vec<_>>(),
        })
    }
}

fn edges(g: &Pattern) -> Result<BTreeMap<Element, BTreeSet<Element>>, ColouringError> {
    let rel = g.relation("E").ok_or(ColouringError::NoEdges)?;
    let mut adj: BTreeMap<Element, BTreeSet<Element>> = BTreeMap::new();
    for t in rel {
        if t[0] != t[1] {
            adj.entry(t[0].clone()).or_default().insert(t[1].clone());
            adj.entry(t[1].clone()).or_default().insert(t[0].clone());
        }
    }
    Ok(adj)
}

/// Tuples indexed by first coordinate, with the relation's position in the
/// language.
type Index<'a> = HashMap<&'a Element, Vec<(usize, &'a Vec<Element>)>>;

/// The radius-`k` view at `v`: tuples of `g` inside `v·B(k)` translated by
/// `v⁻¹`, sorted. A tuple inside `v·B(k)` has its first coordinate there, so
/// it is enough to scan `v·B(k)` or the indexed first coordinates, whichever
/// is smaller.
fn view(index: &Index, balls: &mut Vec<Vec<Element>>, group: GroupModel, v: &Element, k: usize) -> View {
    let vinv = v.inverse();
    let mut out = Vec::new();
    let mut take = |ts: &Vec<(usize, &Vec<Element>)>| {
        for (ri, t) in ts {
            let moved: Vec<Element> = t.iter().map(|x| vinv.mul(x)).collect();
            if moved.iter().all(|x| x.length() <= k) {
                out.push((*ri, moved));
            }
        }
    };
    if group.ball_size(k) <= index.len() {
        while balls.len() <= k {
            balls.push(ball_elements(group, balls.len()));
        }
        for off in &balls[k] {
            if let Some(ts) = index.get(&v.mul(off)) {
                take(ts);
            }
        }
    } else {
        for ts in index.values() {
            take(ts);
        }
    }
    out.sort();
    out
}

/// Computes the colouring on `window`.
///
/// `g` must carry a binary relation `E`; every other relation (marks) is part
/// of the views. In [`Frame::Window`] a radius-`k` view at `v` is known only
/// when `v·B(k)` lies in the window; in [`Frame::Closed`] the structure is
/// empty outside `g`'s universe and everything is known.
pub fn equivariant_colouring(
    g: &Pattern,
    window: &Window,
    d: usize,
    frame: Frame,
) -> Result<ColouringState, ColouringError> {
    let adj = edges(g)?;
    for (v, ns) in &adj {
        if ns.len() > d {
            return Err(ColouringError::Degree { vertex: v.to_string(), degree: ns.len(), d });
        }
    }
    let span = adj
        .iter()
        .flat_map(|(x, ns)| ns.iter().map(move |y| x.inverse().mul(y).length()))
        .max()
        .unwrap_or(0);
    let group = window.group;
    let vertices: Vec<Element> = window.elements.iter().cloned().collect();
    let total = window.radius + window.padding;
    // Beyond this every view in a closed frame contains the whole input.
    let kmax = match frame {
        Frame::Window => total,
        Frame::Closed => 2 * total + span,
    };
    let rels: Vec<String> = g.language().symbols().iter().map(|s| s.name.clone()).collect();
    let mut index: Index = HashMap::new();
    for (ri, name) in rels.iter().enumerate() {
        for t in g.tuples(name) {
            if let Some(x) = t.first() {
                index.entry(x).or_default().push((ri, t));
            }
        }
    }

    // Largest k with v·B(k) inside the window.
    let known = |v: &Element| -> Option<usize> {
        match frame {
            Frame::Closed => Some(usize::MAX),
            Frame::Window => total.checked_sub(window.centre.inverse().mul(v).length()),
        }
    };
    let mut balls = Vec::new();
    let empty = BTreeSet::new();
    let mut level = BTreeMap::new();
    let mut lower_bound = BTreeMap::new();
    let mut witness_view = BTreeMap::new();
    for v in &vertices {
        let kv = known(v);
        if !matches!(kv, Some(r) if r >= span) {
            lower_bound.insert(v.clone(), 0);
            continue;
        }
        let ns = adj.get(v).unwrap_or(&empty);
        // Views at v and its neighbours are known up to this level.
        let limit = ns.iter().map(known).chain([kv, Some(kmax)]).collect::<Option<Vec<_>>>().and_then(|r| r.into_iter().min());
        let mut found = None;
        let mut k = 0;
        while limit.is_some_and(|l| k <= l) {
            let vv = view(&index, &mut balls, group, v, k);
            if ns.iter().all(|u| view(&index, &mut balls, group, u, k) != vv) {
                found = Some((k, vv));
                break;
            }
            k += 1;
        }
        match found {
            Some((k, vv)) => {
                level.insert(v.clone(), k);
                witness_view.insert(v.clone(), vv);
            }
            None => {
                lower_bound.insert(v.clone(), k);
            }
        }
    }

    let mut code = BTreeMap::new();
    for (v, k) in &level {
        let mut p = Pattern::new(group, g.language().clone(), ball_elements(group, *k));
        for (ri, t) in &witness_view[v] {
            p.insert(&rels[*ri], t.clone())?;
        }
        code.insert(v.clone(), p.canonical_string());
    }

    // Colours in index order.
    let mut order: Vec<&Element> = level.keys().collect();
    order.sort_by(|a, b| (level[*a], &code[*a]).cmp(&(level[*b], &code[*b])).then(a.cmp(b)));
    let mut colour: BTreeMap<Element, usize> = BTreeMap::new();
    let mut support: BTreeMap<Element, usize> = BTreeMap::new();
    for v in order {
        let kv = level[v];
        let idx = (kv, &code[v]);
        let mut used = BTreeSet::new();
        let mut sup = kv + 2 * span;
        let mut ok = true;
        for u in adj.get(v).unwrap_or(&empty) {
            let dist = v.inverse().mul(u).length();
            match level.get(u) {
                Some(ku) if (*ku, &code[u]) < idx => match colour.get(u) {
                    Some(c) => {
                        used.insert(*c);
                        sup = sup.max(dist + support[u]);
                    }
                    None => ok = false,
                },
                Some(_) => {}
                None => {
                    if lower_bound.get(u).map_or(true, |lb| *lb <= kv) {
                        ok = false;
                    }
                }
            }
        }
        if !ok {
            continue;
        }
        let c = (0..=d).find(|c| !used.contains(c)).expect("degree at most d");
        colour.insert(v.clone(), c);
        support.insert(v.clone(), sup);
    }

    let interior = match frame {
        Frame::Window => window.interior(),
        Frame::Closed => window.elements.clone(),
    };
    let uncoloured = interior.iter().filter(|v| !colour.contains_key(*v)).cloned().collect();
    Ok(ColouringState { frame, d, span, level, code, lower_bound, colour, support, interior, uncoloured })
}

/// Searches for a symmetry that rules out any equivariant colouring: some
/// `γ ≠ 1` with `γ·G = G` on the overlap of the window with its translate,
/// and some `δ` with `δ G γδ`. Shifts are tried up to word length
/// `max_shift`.
pub fn bad_witness(g: &Pattern, window: &Window, max_shift: usize) -> Option<(Element, Element)> {
    let adj = edges(g).ok()?;
    for gamma in ball_elements(window.group, max_shift) {
        if gamma.is_identity() {
            continue;
        }
        let shifted = g.translate(&gamma);
        let overlap: BTreeSet<Element> =
            window.elements.iter().filter(|x| window.contains(&gamma.inverse().mul(x))).cloned().collect();
        if overlap.is_empty() || shifted.restrict_unchecked(&overlap) != g.restrict_unchecked(&overlap) {
            continue;
        }
        for (delta, ns) in &adj {
            if ns.contains(&gamma.mul(delta)) {
                return Some((gamma, delta.clone()));
            }
        }
    }
    None
}

/// A random marked subgraph of the Cayley graph on `window`: each generator
/// edge is kept with probability ¾ (in enumeration order, skipping edges that
/// would push a degree past `d`) and each vertex is marked with probability ½.
pub fn sample_marked_subgraph(window: &Window, d: usize, seed: u64) -> Pattern {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let lang = Language::new([("E", 2), ("M", 1)]).expect("valid language");
    let mut p = Pattern::new(window.group, lang, window.elements.iter().cloned());
    let mut degree: HashMap<Element, usize> = HashMap::new();
    let gens = window.group.generators();
    for x in &window.elements {
        if rng.gen_bool(0.5) {
            p.insert("M", vec![x.clone()]).expect("vertex in universe");
        }
        for s in gens.iter().filter(|s| s.length() == 1 && **s > s.inverse()) {
            let y = x.mul(s);
            if !window.contains(&y) || !rng.gen_bool(0.75) {
                continue;
            }
            if degree.get(x).copied().unwrap_or(0) < d && degree.get(&y).copied().unwrap_or(0) < d {
                p.insert_symmetric("E", x.clone(), y.clone()).expect("edge in universe");
                *degree.entry(x.clone()).or_default() += 1;
                *degree.entry(y).or_default() += 1;
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{Element::Int, GroupModel};
    use proptest::prelude::*;

    fn line(window: &Window, marks: impl Fn(i64) -> bool) -> Pattern {
        let lang = Language::new([("E", 2), ("M", 1)]).unwrap();
        let mut p = Pattern::new(GroupModel::Z, lang, window.elements.iter().cloned());
        for x in &window.elements {
            let n = x.as_int().unwrap();
            if marks(n) {
                p.insert("M", vec![x.clone()]).unwrap();
            }
            if window.contains(&Int(n + 1)) {
                p.insert_symmetric("E", x.clone(), Int(n + 1)).unwrap();
            }
        }
        p
    }

    fn thue_morse(n: i64) -> bool {
        (n + 1024).count_ones() % 2 == 1
    }

    /// Independent check: adjacent coloured vertices differ, colours ≤ d.
    fn proper(g: &Pattern, colour: &BTreeMap<Element, usize>, d: usize) -> bool {
        colour.values().all(|c| *c <= d)
            && g.tuples("E").all(|t| t[0] == t[1] || colour.get(&t[0]).is_none() || colour.get(&t[0]) != colour.get(&t[1]))
    }

    #[test]
    fn single_vertex_gets_least_colour() {
        for frame in [Frame::Window, Frame::Closed] {
            let w = Window::ball(GroupModel::Z, 0);
            let g = line(&w, |_| false);
            let s = equivariant_colouring(&g, &w, 2, frame).unwrap();
            assert_eq!(s.colour.get(&Int(0)), Some(&0));
            assert!(s.uncoloured.is_empty());
        }
    }

    #[test]
    fn unmarked_line_is_bad() {
        let w = Window::padded(GroupModel::Z, 10, 10);
        let g = line(&w, |_| false);
        let s = equivariant_colouring(&g, &w, 2, Frame::Window).unwrap();
        assert!(s.colour.is_empty());
        assert_eq!(s.uncoloured, s.interior);
        assert_eq!(bad_witness(&g, &w, 2), Some((Int(-1), Int(0))));
        // Every level the window can see fails at every interior vertex.
        for v in &s.interior {
            assert_eq!(s.lower_bound[v], 20 - v.as_int().unwrap().unsigned_abs() as usize);
        }
    }

    #[test]
    fn thue_morse_line_is_three_coloured() {
        let w = Window::padded(GroupModel::Z, 12, 8);
        let g = line(&w, thue_morse);
        let s = equivariant_colouring(&g, &w, 2, Frame::Window).unwrap();
        assert!(s.uncoloured.is_empty(), "{:?}", s.uncoloured);
        assert!(proper(&g, &s.colour, 2));
        assert!(s.level.values().all(|k| *k <= 1));
        assert_eq!(bad_witness(&g, &w, 3), None);
        for (v, c) in &s.colour {
            let ball = Window::ball(GroupModel::Z, s.support[v]).translate(v);
            if ball.elements.is_subset(&w.elements) {
                let sub = g.restrict_unchecked(&ball.elements);
                let again = equivariant_colouring(&sub, &ball, 2, Frame::Window).unwrap();
                assert_eq!(again.colour.get(v), Some(c), "at {v}");
            }
        }
    }

    #[test]
    fn same_class_never_adjacent() {
        let w = Window::ball(GroupModel::Zd(2), 4);
        let g = sample_marked_subgraph(&w, 4, 7);
        let s = equivariant_colouring(&g, &w, 4, Frame::Closed).unwrap();
        for class in s.classes().values() {
            for t in g.tuples("E") {
                assert!(!(class.contains(&t[0]) && class.contains(&t[1])));
            }
        }
        assert!(s.uncoloured.is_empty());
    }

    #[test]
    fn degree_bound_is_enforced() {
        let w = Window::ball(GroupModel::Zd(2), 2);
        let g = crate::patterns::cayley_graph(GroupModel::Zd(2), &w.elements);
        assert!(matches!(equivariant_colouring(&g, &w, 3, Frame::Closed), Err(ColouringError::Degree { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn closed_colourings_are_proper_and_equivariant(
            gi in 0usize..3, d in 2usize..5, seed in any::<u64>(), shift in 0usize..20,
        ) {
            let group = [GroupModel::Z, GroupModel::Zd(2), GroupModel::Free(2)][gi];
            let w = Window::ball(group, if gi == 2 { 3 } else { 5 });
            let g = sample_marked_subgraph(&w, d, seed);
            let s = equivariant_colouring(&g, &w, d, Frame::Closed).unwrap();
            prop_assert!(s.uncoloured.is_empty());
            prop_assert!(proper(&g, &s.colour, d));
            let gamma = group.enumerate(shift + 1).pop().unwrap();
            let moved = equivariant_colouring(&g.translate(&gamma), &w.translate(&gamma), d, Frame::Closed).unwrap();
            let expected: BTreeMap<Element, usize> = s.colour.iter().map(|(v, c)| (gamma.mul(v), *c)).collect();
            prop_assert_eq!(moved.colour, expected);
        }
    }
}
