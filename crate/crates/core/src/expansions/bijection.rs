//! The greedy bijection `φ^{A,B}`.
//!
//! With `{γₙ}` the global enumeration,
//! `Xₙ = (A ∖ ⋃_{m<n} Xₘ) ∩ (B ∖ ⋃_{m<n} Xₘ·γₘ)·γₙ⁻¹` and `φ(x) = x·γₙ` on `Xₙ`.
//! On a window the recursion is evaluated in three-valued logic: a point
//! outside the window has unknown membership in `A` and `B`, and unknowns
//! propagate only where they can change the answer. Every definite value is
//! therefore the value of the recursion for every extension of the window.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{json, Value};
use thiserror::Error;

use super::{tri_and, tri_not, tri_or, Frame, Tri};
use crate::groups::{Element, Window};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BijectionError {
    #[error("stage cap needs padding {needed}, window has {padding}")]
    Truncation { needed: usize, padding: usize },
    #[error("{0} lies outside the window")]
    OutsideWindow(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub gamma: Element,
    /// Definite members of `Xₙ` (anywhere in the window).
    pub members: BTreeSet<Element>,
    /// Window points whose membership in `Xₙ` is undetermined.
    pub unknown: BTreeSet<Element>,
}

/// Which side of the dichotomy holds on the interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dichotomy {
    /// Both `A ∩ int ⊆ dom φ` and `B ∩ int ⊆ ran φ`.
    Both,
    Domain,
    Range,
    /// Neither side covered: contradicts the recursion unless the witnessing
    /// pair is further apart than the stage cap reaches.
    Neither,
    /// No side is fixed by the window, but every pair of possibly unmatched
    /// interior points is within reach of the stage cap, so one of the two
    /// inclusions holds in every extension.
    EitherSide,
    /// Some interior point of `A` or `B` has undetermined status.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BijectionTrace {
    pub frame: Frame,
    pub stages: Vec<Stage>,
    /// Definite pairs `x ↦ x·γₙ`.
    pub phi: BTreeMap<Element, Element>,
    pub interior: BTreeSet<Element>,
    pub unmatched_a: BTreeSet<Element>,
    pub unmatched_b: BTreeSet<Element>,
    pub undetermined_a: BTreeSet<Element>,
    pub undetermined_b: BTreeSet<Element>,
    /// Points of `A` (resp. `B`) whose stage is undetermined but which are
    /// matched in every extension: if `y ∈ B` were unmatched, a definitely
    /// unmatched `x ∈ A` with `x⁻¹y = γₙ` inside the cap would lie in `Xₙ`.
    pub inferred_a: BTreeSet<Element>,
    pub inferred_b: BTreeSet<Element>,
    /// The stage elements `γ₀, …, γ_{cap-1}`.
    pub reach: BTreeSet<Element>,
}

impl BijectionTrace {
    pub fn dichotomy(&self) -> Dichotomy {
        let dom = self.unmatched_a.is_empty() && self.undetermined_a.is_empty();
        let ran = self.unmatched_b.is_empty() && self.undetermined_b.is_empty();
        match (dom, ran) {
            (true, true) => Dichotomy::Both,
            (true, false) => Dichotomy::Domain,
            (false, true) => Dichotomy::Range,
            _ if !self.unmatched_a.is_empty() && !self.unmatched_b.is_empty() => Dichotomy::Neither,
            _ => {
                let open_a = self.unmatched_a.iter().chain(&self.undetermined_a);
                let covered = open_a.into_iter().all(|x| {
                    let xinv = x.inverse();
                    self.unmatched_b
                        .iter()
                        .chain(&self.undetermined_b)
                        .all(|y| self.reach.contains(&xinv.mul(y)))
                });
                if covered {
                    Dichotomy::EitherSide
                } else {
                    Dichotomy::Undetermined
                }
            }
        }
    }

    /// `φ` restricted to the interior (domain side).
    pub fn phi_on_interior(&self) -> BTreeMap<Element, Element> {
        self.phi
            .iter()
            .filter(|(x, _)| self.interior.contains(x))
            .map(|(x, y)| (x.clone(), y.clone()))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let pairs: Vec<Value> = self.phi.iter().map(|(x, y)| json!([x.to_json(), y.to_json()])).collect();
        let set = |s: &BTreeSet<Element>| s.iter().map(Element::to_json).collect::<Vec<_>>();
        let stages: Vec<Value> = self
            .stages
            .iter()
            .filter(|s| !s.members.is_empty() || !s.unknown.is_empty())
            .map(|s| json!({"gamma": s.gamma.to_json(), "members": set(&s.members), "unknown": set(&s.unknown)}))
            .collect();
        json!({
            "frame": self.frame,
            "phi": pairs,
            "stages": stages,
            "unmatched_a": set(&self.unmatched_a),
            "unmatched_b": set(&self.unmatched_b),
            "undetermined_a": set(&self.undetermined_a),
            "undetermined_b": set(&self.undetermined_b),
            "inferred_a": set(&self.inferred_a),
            "inferred_b": set(&self.inferred_b),
            "dichotomy": self.dichotomy(),
        })
    }
}

/// Default stage cap: every `γ` with `|γ| ≤ 2·radius`, which covers `x⁻¹y`
/// for all interior `x, y`.
pub fn default_cap(window: &Window) -> usize {
    window.group.ball_size(2 * window.radius)
}

/// Runs the recursion for stages `0..cap` on `window`.
///
/// In [`Frame::Window`] the interior is `window.interior()` and the padding
/// must be at least the word length of the last stage element. In
/// [`Frame::Closed`], `A` and `B` are taken to be exactly the given finite
/// sets and every window point is reported.
pub fn greedy_bijection(
    a: &BTreeSet<Element>,
    b: &BTreeSet<Element>,
    window: &Window,
    cap: Option<usize>,
    frame: Frame,
) -> Result<BijectionTrace, BijectionError> {
    if let Some(x) = a.iter().chain(b).find(|x| !window.contains(x)) {
        return Err(BijectionError::OutsideWindow(x.to_string()));
    }
    let cap = cap.unwrap_or_else(|| match frame {
        Frame::Window => default_cap(window),
        Frame::Closed => window.group.ball_size(2 * (window.radius + window.padding)),
    });
    let gammas = window.group.enumerate(cap);
    let needed = gammas.iter().map(Element::length).max().unwrap_or(0);
    if frame == Frame::Window && needed > window.padding {
        return Err(BijectionError::Truncation { needed, padding: window.padding });
    }

    let elems: Vec<Element> = window.elements.iter().cloned().collect();
    let index: HashMap<&Element, usize> = elems.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let outside: Tri = match frame {
        Frame::Window => None,
        Frame::Closed => Some(false),
    };
    let in_a: Vec<Tri> = elems.iter().map(|x| Some(a.contains(x))).collect();
    let in_b: Vec<Tri> = elems.iter().map(|x| Some(b.contains(x))).collect();
    let mut dom: Vec<Tri> = vec![Some(false); elems.len()];
    let mut ran: Vec<Tri> = vec![Some(false); elems.len()];
    let mut stages = Vec::with_capacity(cap);
    let mut phi = BTreeMap::new();

    for g in &gammas {
        let ginv = g.inverse();
        let right: Vec<Option<usize>> = elems.iter().map(|x| index.get(&x.mul(g)).copied()).collect();
        let left: Vec<Option<usize>> = elems.iter().map(|x| index.get(&x.mul(&ginv)).copied()).collect();
        let xn: Vec<Tri> = (0..elems.len())
            .map(|i| {
                let (b_next, ran_next) = match right[i] {
                    Some(j) => (in_b[j], ran[j]),
                    None => (outside, outside),
                };
                tri_and(tri_and(in_a[i], tri_not(dom[i])), tri_and(b_next, tri_not(ran_next)))
            })
            .collect();
        let mut members = BTreeSet::new();
        let mut unknown = BTreeSet::new();
        for i in 0..elems.len() {
            match xn[i] {
                Some(true) => {
                    members.insert(elems[i].clone());
                    phi.insert(elems[i].clone(), elems[i].mul(g));
                }
                None => {
                    unknown.insert(elems[i].clone());
                }
                Some(false) => {}
            }
            dom[i] = tri_or(dom[i], xn[i]);
        }
        for j in 0..elems.len() {
            let hit = match left[j] {
                Some(i) => xn[i],
                None => outside,
            };
            ran[j] = tri_or(ran[j], hit);
        }
        stages.push(Stage { gamma: g.clone(), members, unknown });
    }

    let interior: BTreeSet<Element> = match frame {
        Frame::Window => window.interior(),
        Frame::Closed => window.elements.clone(),
    };
    let mut trace = BijectionTrace {
        frame,
        stages,
        phi,
        interior: interior.clone(),
        unmatched_a: BTreeSet::new(),
        unmatched_b: BTreeSet::new(),
        undetermined_a: BTreeSet::new(),
        undetermined_b: BTreeSet::new(),
        inferred_a: BTreeSet::new(),
        inferred_b: BTreeSet::new(),
        reach: gammas.iter().cloned().collect(),
    };
    for x in &interior {
        let i = index[x];
        if a.contains(x) {
            match dom[i] {
                Some(false) => trace.unmatched_a.insert(x.clone()),
                None => trace.undetermined_a.insert(x.clone()),
                Some(true) => false,
            };
        }
        if b.contains(x) {
            match ran[i] {
                Some(false) => trace.unmatched_b.insert(x.clone()),
                None => trace.undetermined_b.insert(x.clone()),
                Some(true) => false,
            };
        }
    }
    let reach = trace.reach.clone();
    let forced = |unmatched: &BTreeSet<Element>, y: &Element, forward: bool| {
        unmatched.iter().any(|x| {
            let g = if forward { x.inverse().mul(y) } else { y.inverse().mul(x) };
            reach.contains(&g)
        })
    };
    let (inf_b, und_b): (BTreeSet<_>, BTreeSet<_>) = std::mem::take(&mut trace.undetermined_b)
        .into_iter()
        .partition(|y| forced(&trace.unmatched_a, y, true));
    let (inf_a, und_a): (BTreeSet<_>, BTreeSet<_>) = std::mem::take(&mut trace.undetermined_a)
        .into_iter()
        .partition(|x| forced(&trace.unmatched_b, x, false));
    trace.inferred_a = inf_a;
    trace.inferred_b = inf_b;
    trace.undetermined_a = und_a;
    trace.undetermined_b = und_b;
    Ok(trace)
}

/// Structural checks on a trace: disjointness of `{Xₙ}` and `{Xₙγₙ}`,
/// `φ(x) = x·γₙ`, injectivity, and `dom φ ⊆ A`, `ran φ ⊆ B`.
pub fn verify_trace(trace: &BijectionTrace, a: &BTreeSet<Element>, b: &BTreeSet<Element>) -> Result<(), String> {
    let mut seen_dom = BTreeSet::new();
    let mut seen_ran = BTreeSet::new();
    for s in &trace.stages {
        for x in &s.members {
            let y = x.mul(&s.gamma);
            if !seen_dom.insert(x.clone()) {
                return Err(format!("{x} lies in two stages"));
            }
            if !seen_ran.insert(y.clone()) {
                return Err(format!("{y} is hit twice"));
            }
            if trace.phi.get(x) != Some(&y) {
                return Err(format!("phi({x}) is not {x}·{}", s.gamma));
            }
            if !a.contains(x) || !b.contains(&y) {
                return Err(format!("pair ({x}, {y}) leaves A × B"));
            }
        }
    }
    if seen_dom.len() != trace.phi.len() {
        return Err("phi has pairs outside the stages".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::Element::Int;
    use crate::groups::GroupModel;

    fn ints(r: impl IntoIterator<Item = i64>) -> BTreeSet<Element> {
        r.into_iter().map(Int).collect()
    }

    fn window() -> Window {
        Window::padded(GroupModel::Z, 16, 48)
    }

    #[test]
    fn equal_sets_give_identity() {
        let w = window();
        let all = w.elements.clone();
        let t = greedy_bijection(&all, &all, &w, None, Frame::Window).unwrap();
        for x in &t.interior {
            assert_eq!(t.phi.get(x), Some(x));
        }
        assert_eq!(t.dichotomy(), Dichotomy::Both);
        verify_trace(&t, &all, &all).unwrap();
    }

    #[test]
    fn evens_to_odds_shift_down() {
        let w = window();
        let evens = ints((-64..=64).filter(|x| x % 2 == 0));
        let odds = ints((-64..=64).filter(|x| x % 2 != 0));
        let t = greedy_bijection(&evens, &odds, &w, None, Frame::Window).unwrap();
        for x in t.interior.iter().filter(|x| evens.contains(x)) {
            assert_eq!(t.phi.get(x), Some(&Int(x.as_int().unwrap() - 1)));
        }
        assert_eq!(t.stages[1].gamma, Int(-1));
        assert!(t.stages[0].members.is_empty());
        assert_eq!(t.dichotomy(), Dichotomy::Both);
    }

    #[test]
    fn all_to_evens_covers_range() {
        let w = window();
        let all = w.elements.clone();
        let evens = ints((-64..=64).filter(|x| x % 2 == 0));
        let t = greedy_bijection(&all, &evens, &w, None, Frame::Window).unwrap();
        assert!(t.unmatched_b.is_empty() && t.undetermined_b.is_empty());
        assert!(!t.unmatched_a.is_empty());
        assert_eq!(t.dichotomy(), Dichotomy::Range);
    }

    #[test]
    fn insufficient_padding_is_reported() {
        let w = Window::padded(GroupModel::Z, 16, 8);
        let all = w.elements.clone();
        assert_eq!(
            greedy_bijection(&all, &all, &w, None, Frame::Window),
            Err(BijectionError::Truncation { needed: 32, padding: 8 })
        );
    }

    #[test]
    fn closed_frame_is_exact_on_finite_sets() {
        let w = Window::ball(GroupModel::Z, 10);
        let a = ints([-3, 0, 4]);
        let b = ints([1, 5, 9]);
        let t = greedy_bijection(&a, &b, &w, None, Frame::Closed).unwrap();
        verify_trace(&t, &a, &b).unwrap();
        assert_eq!(t.phi.len(), 3);
        assert_eq!(t.dichotomy(), Dichotomy::Both);
    }

    #[test]
    fn free_group_window_is_consistent() {
        let g = GroupModel::Free(2);
        let w = Window::padded(g, 1, 2);
        let a: BTreeSet<Element> = w.elements.iter().filter(|x| x.length() % 2 == 0).cloned().collect();
        let b: BTreeSet<Element> = w.elements.iter().filter(|x| x.length() % 2 == 1).cloned().collect();
        let t = greedy_bijection(&a, &b, &w, None, Frame::Window).unwrap();
        verify_trace(&t, &a, &b).unwrap();
        // the identity is matched at the first stage whose γ has odd length
        assert_eq!(t.phi.get(&g.identity()).map(Element::length), Some(1));
    }
}
