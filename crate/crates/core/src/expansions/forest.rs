//! Spanning forests along an exhaustion by finite equivalence relations.
//!
//! Given `E₀ ⊆ E₁ ⊆ …` with finite classes, stage `t` extends the forest of
//! stage `t-1` by Kruskal's rule inside each `Eₜ`-class: edges are scanned in
//! a fixed order and kept when they join two different components. Each
//! stage is then a spanning forest of `G` restricted to every `Eₜ`-class.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};
use thiserror::Error;

use crate::groups::{Element, Window};
use crate::patterns::Pattern;

pub type Edge = (Element, Element);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForestError {
    #[error("pattern has no binary relation E")]
    NoEdges,
    #[error("stage {stage} is not a partition of the vertex set")]
    NotAPartition { stage: usize },
    #[error("stage {stage} does not coarsen stage {}", stage - 1)]
    NotCoarsening { stage: usize },
    #[error("{} final class(es) are disconnected in G", .0.len())]
    Disconnected(Vec<ClassFailure>),
}

/// A final class on which `G` is not connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassFailure {
    pub class: usize,
    pub size: usize,
    /// Components of `G` restricted to the class, by least element.
    pub components: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestTrace {
    /// `T₀ ⊆ T₁ ⊆ …`, edges as `(min, max)`.
    pub stages: Vec<BTreeSet<Edge>>,
}

impl ForestTrace {
    pub fn edges(&self) -> &BTreeSet<Edge> {
        static EMPTY: BTreeSet<Edge> = BTreeSet::new();
        self.stages.last().unwrap_or(&EMPTY)
    }

    pub fn to_json(&self) -> Value {
        let edge = |(x, y): &Edge| json!([x.to_json(), y.to_json()]);
        json!({
            "stages": self.stages.iter().map(|s| s.len()).collect::<Vec<_>>(),
            "edges": self.edges().iter().map(edge).collect::<Vec<_>>(),
        })
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            std::cmp::Ordering::Less => self.parent[a] = b,
            std::cmp::Ordering::Greater => self.parent[b] = a,
            std::cmp::Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] += 1;
            }
        }
        true
    }
}

/// Undirected edges of `E` as `(min, max)`, loops dropped, in edge order.
pub fn graph_edges(g: &Pattern) -> Result<BTreeSet<Edge>, ForestError> {
    let rel = g.relation("E").ok_or(ForestError::NoEdges)?;
    Ok(rel
        .iter()
        .filter(|t| t[0] != t[1])
        .map(|t| if t[0] < t[1] { (t[0].clone(), t[1].clone()) } else { (t[1].clone(), t[0].clone()) })
        .collect())
}

/// Runs the construction. Each stage of `exhaustion` is a partition of
/// `g.universe()`; later stages must coarsen earlier ones.
pub fn spanning_forest(g: &Pattern, exhaustion: &[Vec<BTreeSet<Element>>]) -> Result<ForestTrace, ForestError> {
    let verts: Vec<&Element> = g.universe().iter().collect();
    let pos: BTreeMap<&Element, usize> = verts.iter().enumerate().map(|(i, x)| (*x, i)).collect();
    let edges = graph_edges(g)?;
    let edge_ix: Vec<(usize, usize)> = edges.iter().map(|(x, y)| (pos[x], pos[y])).collect();

    let mut labels: Vec<Vec<usize>> = Vec::with_capacity(exhaustion.len());
    for (t, stage) in exhaustion.iter().enumerate() {
        let mut lab = vec![usize::MAX; verts.len()];
        for (c, class) in stage.iter().enumerate() {
            for x in class {
                match pos.get(x) {
                    Some(&i) if lab[i] == usize::MAX => lab[i] = c,
                    _ => return Err(ForestError::NotAPartition { stage: t }),
                }
            }
        }
        if lab.contains(&usize::MAX) {
            return Err(ForestError::NotAPartition { stage: t });
        }
        if let Some(prev) = labels.last() {
            let mut image: BTreeMap<usize, usize> = BTreeMap::new();
            for i in 0..verts.len() {
                if *image.entry(prev[i]).or_insert(lab[i]) != lab[i] {
                    return Err(ForestError::NotCoarsening { stage: t });
                }
            }
        }
        labels.push(lab);
    }

    let mut uf = UnionFind::new(verts.len());
    let mut current = BTreeSet::new();
    let mut stages = Vec::with_capacity(labels.len());
    for lab in &labels {
        for (e, &(a, b)) in edges.iter().zip(&edge_ix) {
            if lab[a] == lab[b] && uf.union(a, b) {
                current.insert(e.clone());
            }
        }
        stages.push(current.clone());
    }

    if let (Some(lab), Some(last)) = (labels.last(), exhaustion.last()) {
        let mut failures = Vec::new();
        for (c, class) in last.iter().enumerate() {
            debug_assert!(class.iter().all(|x| lab[pos[x]] == c));
            let mut roots: BTreeMap<usize, &Element> = BTreeMap::new();
            for x in class {
                roots.entry(uf.find(pos[x])).or_insert(x);
            }
            if roots.len() > 1 {
                let mut components: Vec<Element> = roots.into_values().cloned().collect();
                components.sort();
                failures.push(ClassFailure { class: c, size: class.len(), components });
            }
        }
        if !failures.is_empty() {
            return Err(ForestError::Disconnected(failures));
        }
    }
    Ok(ForestTrace { stages })
}

/// The exhaustion `Eₜ = {centre·B(t)} ∪ singletons` for `t = 0..=radius+padding`.
pub fn ball_exhaustion(window: &Window) -> Vec<Vec<BTreeSet<Element>>> {
    (0..=window.radius + window.padding)
        .map(|t| {
            let ball: BTreeSet<Element> =
                window.elements.iter().filter(|x| window.centre.inverse().mul(x).length() <= t).cloned().collect();
            let mut stage = vec![ball.clone()];
            stage.extend(window.elements.iter().filter(|x| !ball.contains(*x)).map(|x| BTreeSet::from([x.clone()])));
            stage
        })
        .collect()
}

/// Dyadic blocks `[k·2ᵗ, (k+1)·2ᵗ)` of a set of integers, `t = 0..=levels`.
pub fn dyadic_exhaustion(points: &BTreeSet<Element>, levels: u32) -> Vec<Vec<BTreeSet<Element>>> {
    (0..=levels)
        .map(|t| {
            let mut blocks: BTreeMap<i64, BTreeSet<Element>> = BTreeMap::new();
            for x in points {
                let n = x.as_int().expect("integer points");
                blocks.entry(n.div_euclid(1 << t)).or_default().insert(x.clone());
            }
            blocks.into_values().collect()
        })
        .collect()
}

/// `true` when `edges` is acyclic and spans every class of `partition` as a
/// single tree (union-find check, independent of the construction order).
pub fn spans_classes(edges: &BTreeSet<Edge>, partition: &[BTreeSet<Element>]) -> bool {
    let mut pos = BTreeMap::new();
    for (c, class) in partition.iter().enumerate() {
        for x in class {
            pos.insert(x.clone(), (c, pos.len()));
        }
    }
    let mut uf = UnionFind::new(pos.len());
    for (x, y) in edges {
        match (pos.get(x), pos.get(y)) {
            (Some((cx, a)), Some((cy, b))) if cx == cy => {
                if !uf.union(*a, *b) {
                    return false;
                }
            }
            _ => return false,
        }
    }
    let used: usize = partition.iter().map(|c| c.len().saturating_sub(1)).sum();
    used == edges.len()
}
