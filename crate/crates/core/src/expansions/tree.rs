//! Linear orders from directed trees.
//!
//! Along the undirected path from `x` to `y`, forward edges weigh `+1` and
//! backward edges `-1`; `d(x, y)` is the sum. With a potential `h` on each
//! component (`h(y) = h(x) + 1` for an edge `x → y`) this is `h(y) - h(x)`,
//! and `x < y` iff `h(x) < h(y)`, ties broken by a fixed order on vertices.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde_json::{json, Value};
use thiserror::Error;

use crate::groups::Element;
use crate::patterns::Pattern;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("pattern has no binary relation {0}")]
    MissingRelation(String),
    #[error("not a tree: the edge {x} - {y} closes a cycle")]
    NotATree { x: String, y: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeOrder {
    /// Potential of each vertex, zero at the least vertex of its component.
    pub height: BTreeMap<Element, i64>,
    pub component: BTreeMap<Element, usize>,
    /// Each component listed in increasing order.
    pub orders: Vec<Vec<Element>>,
}

impl TreeOrder {
    /// `d(x, y)`, defined when `x` and `y` share a component.
    pub fn distance(&self, x: &Element, y: &Element) -> Option<i64> {
        (self.component.get(x)? == self.component.get(y)?).then(|| self.height[y] - self.height[x])
    }

    pub fn less(&self, x: &Element, y: &Element) -> Option<bool> {
        let c = self.component.get(x)?;
        (c == self.component.get(y)?).then(|| {
            let o = &self.orders[*c];
            o.iter().position(|z| z == x) < o.iter().position(|z| z == y)
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "orders": self.orders.iter().map(|o| o.iter().map(Element::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

/// Orders each component of the directed forest `T`. Ties are broken by
/// `tiebreak`, or by the enumeration order when it is `None`.
pub fn tree_linearization(
    p: &Pattern,
    tiebreak: Option<&dyn Fn(&Element, &Element) -> Ordering>,
) -> Result<TreeOrder, TreeError> {
    tree_linearization_with(p, "T", tiebreak)
}

pub fn tree_linearization_with(
    p: &Pattern,
    rel: &str,
    tiebreak: Option<&dyn Fn(&Element, &Element) -> Ordering>,
) -> Result<TreeOrder, TreeError> {
    let edges = p.relation(rel).ok_or_else(|| TreeError::MissingRelation(rel.into()))?;
    // Undirected adjacency with edge weights.
    let mut adj: BTreeMap<&Element, Vec<(&Element, i64)>> = BTreeMap::new();
    let mut seen_pairs = BTreeSet::new();
    for t in edges {
        let (x, y) = (&t[0], &t[1]);
        let key = if x < y { (x, y) } else { (y, x) };
        if x == y || !seen_pairs.insert(key) {
            return Err(TreeError::NotATree { x: x.to_string(), y: y.to_string() });
        }
        adj.entry(x).or_default().push((y, 1));
        adj.entry(y).or_default().push((x, -1));
    }

    let mut height = BTreeMap::new();
    let mut component = BTreeMap::new();
    let mut orders = Vec::new();
    for root in p.universe() {
        if height.contains_key(root) {
            continue;
        }
        let c = orders.len();
        let mut members = vec![root.clone()];
        height.insert(root.clone(), 0i64);
        component.insert(root.clone(), c);
        let mut queue = VecDeque::from([(root, None::<&Element>)]);
        while let Some((x, parent)) = queue.pop_front() {
            let hx = height[x];
            let mut parent_skipped = false;
            for (y, w) in adj.get(x).map(Vec::as_slice).unwrap_or(&[]) {
                if Some(*y) == parent && !parent_skipped {
                    parent_skipped = true;
                    continue;
                }
                if height.contains_key(*y) {
                    return Err(TreeError::NotATree { x: x.to_string(), y: y.to_string() });
                }
                height.insert((*y).clone(), hx + w);
                component.insert((*y).clone(), c);
                members.push((*y).clone());
                queue.push_back((y, Some(x)));
            }
        }
        members.sort_by(|a, b| {
            height[a].cmp(&height[b]).then_with(|| match tiebreak {
                Some(f) => f(a, b),
                None => a.cmp(b),
            })
        });
        orders.push(members);
    }
    Ok(TreeOrder { height, component, orders })
}
