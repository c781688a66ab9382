//! Merging linearizations of pieces into a linearization of the whole.
//!
//! Pieces `Y₀, Y₁, …` with linear orders `Lₙ` extending `P` are added one at a
//! time. A new point `x` is placed after the initial segment
//! `I_x = {y old : y ≤ z for some old z P x}` of the current order; new points
//! with the same `I_x` keep the order of the piece that introduced them.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};
use thiserror::Error;

use crate::groups::{Element, GroupModel};
use crate::patterns::{is_strict_partial_order, Language, Pattern, PatternError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearizeError {
    #[error("pattern has no binary relation {0}")]
    MissingRelation(String),
    #[error("{0} is not a strict partial order")]
    NotPartialOrder(String),
    #[error("piece {piece} lists {x} twice or outside the universe")]
    BadPiece { piece: usize, x: String },
    #[error("piece {piece} puts {y} before {x} although {x} P {y}")]
    Violation { piece: usize, x: String, y: String },
    #[error("{0} is not covered by any piece")]
    Uncovered(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// One piece: its points listed in increasing `Lₙ` order.
pub type Piece = Vec<Element>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeTrace {
    /// `L̄₁ ⊆ L̄₂ ⊆ …`, each listed in increasing order.
    pub stages: Vec<Vec<Element>>,
}

impl MergeTrace {
    pub fn order(&self) -> &[Element] {
        self.stages.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn to_json(&self) -> Value {
        json!({
            "order": self.order().iter().map(Element::to_json).collect::<Vec<_>>(),
            "stage_sizes": self.stages.iter().map(Vec::len).collect::<Vec<_>>(),
        })
    }
}

/// Merges `pieces` into a linear order extending the relation `P` of `p`.
pub fn merge_linearizations(p: &Pattern, pieces: &[Piece]) -> Result<MergeTrace, LinearizeError> {
    merge_with(p, "P", pieces)
}

/// As [`merge_linearizations`] for the partial order named `rel`.
pub fn merge_with(p: &Pattern, rel: &str, pieces: &[Piece]) -> Result<MergeTrace, LinearizeError> {
    if p.relation(rel).is_none() {
        return Err(LinearizeError::MissingRelation(rel.into()));
    }
    if !is_strict_partial_order(p, rel) {
        return Err(LinearizeError::NotPartialOrder(rel.into()));
    }
    for (n, piece) in pieces.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for x in piece {
            if !p.universe().contains(x) || !seen.insert(x) {
                return Err(LinearizeError::BadPiece { piece: n, x: x.to_string() });
            }
        }
        for (i, y) in piece.iter().enumerate() {
            if let Some(x) = piece[i + 1..].iter().find(|x| p.holds(rel, &[(*x).clone(), y.clone()])) {
                return Err(LinearizeError::Violation { piece: n, x: x.to_string(), y: y.to_string() });
            }
        }
    }

    let mut order: Vec<Element> = Vec::new();
    let mut rank: BTreeMap<Element, usize> = BTreeMap::new();
    let mut stages = Vec::with_capacity(pieces.len());
    for piece in pieces {
        // New points, bucketed by |I_x| and kept in piece order.
        let mut buckets: BTreeMap<usize, Vec<Element>> = BTreeMap::new();
        for x in piece.iter().filter(|x| !rank.contains_key(*x)) {
            let cut = order
                .iter()
                .enumerate()
                .filter(|(_, z)| p.holds(rel, &[(*z).clone(), x.clone()]))
                .map(|(i, _)| i + 1)
                .max()
                .unwrap_or(0);
            buckets.entry(cut).or_default().push(x.clone());
        }
        let mut next = Vec::with_capacity(order.len() + piece.len());
        let mut old = order.into_iter();
        let mut taken = 0;
        for (cut, xs) in buckets {
            next.extend(old.by_ref().take(cut - taken));
            taken = cut;
            next.extend(xs);
        }
        next.extend(old);
        order = next;
        rank = order.iter().enumerate().map(|(i, x)| (x.clone(), i)).collect();
        stages.push(order.clone());
    }
    if let Some(x) = p.universe().iter().find(|x| !rank.contains_key(*x)) {
        return Err(LinearizeError::Uncovered(x.to_string()));
    }
    Ok(MergeTrace { stages })
}

/// Singleton pieces `{γ₀}, {γ₁}, …` in enumeration order.
pub fn singleton_pieces(universe: &BTreeSet<Element>) -> Vec<Piece> {
    universe.iter().map(|x| vec![x.clone()]).collect()
}

/// `order` as a pattern with the strict order relation `name`.
pub fn order_pattern(group: GroupModel, order: &[Element], name: &str) -> Result<Pattern, PatternError> {
    let mut p = Pattern::new(group, Language::new([(name, 2)])?, order.iter().cloned());
    for (i, x) in order.iter().enumerate() {
        for y in &order[i + 1..] {
            p.insert(name, vec![x.clone(), y.clone()])?;
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::Element::Int;
    use proptest::prelude::*;

    fn poset(n: i64, pairs: &[(i64, i64)]) -> Pattern {
        let mut p = Pattern::new(GroupModel::Z, Language::new([("P", 2)]).unwrap(), (0..n).map(Int));
        for (a, b) in pairs {
            p.insert("P", vec![Int(*a), Int(*b)]).unwrap();
        }
        p
    }

    fn ints(xs: &[i64]) -> Vec<Element> {
        xs.iter().map(|x| Int(*x)).collect()
    }

    /// The five-case definition, evaluated pair by pair.
    fn oracle(p: &Pattern, pieces: &[Piece]) -> Vec<Element> {
        let mut lbar: BTreeSet<(Element, Element)> = BTreeSet::new();
        let mut z: BTreeSet<Element> = BTreeSet::new();
        for piece in pieces {
            let pos = |x: &Element| piece.iter().position(|y| y == x).unwrap();
            let c: BTreeSet<Element> = z.iter().chain(piece).cloned().collect();
            let i_of = |x: &Element| -> BTreeSet<Element> {
                z.iter()
                    .filter(|y| z.iter().any(|w| p.holds("P", &[w.clone(), x.clone()]) && (*y == w || lbar.contains(&((*y).clone(), w.clone())))))
                    .cloned()
                    .collect()
            };
            let mut next = BTreeSet::new();
            for x in &c {
                for y in &c {
                    if x == y {
                        continue;
                    }
                    let holds = match (z.contains(x), z.contains(y)) {
                        (true, true) => lbar.contains(&(x.clone(), y.clone())),
                        (true, false) => i_of(y).contains(x),
                        (false, true) => !i_of(x).contains(y),
                        (false, false) => {
                            let (ix, iy) = (i_of(x), i_of(y));
                            (ix.is_subset(&iy) && ix != iy) || (ix == iy && pos(x) < pos(y))
                        }
                    };
                    if holds {
                        next.insert((x.clone(), y.clone()));
                    }
                }
            }
            lbar = next;
            z = c;
            for x in &z {
                for y in &z {
                    assert!(x == y || lbar.contains(&(x.clone(), y.clone())) != lbar.contains(&(y.clone(), x.clone())));
                }
            }
        }
        let mut out: Vec<Element> = z.into_iter().collect();
        out.sort_by_key(|x| lbar.iter().filter(|(a, _)| a == x).count());
        out.reverse();
        out
    }

    #[test]
    fn one_piece_is_returned() {
        let p = poset(4, &[(0, 2)]);
        let t = merge_linearizations(&p, &[ints(&[3, 0, 1, 2])]).unwrap();
        assert_eq!(t.order(), ints(&[3, 0, 1, 2]).as_slice());
    }

    #[test]
    fn chain_is_forced() {
        let p = poset(4, &[(2, 0), (2, 1), (2, 3), (0, 1), (0, 3), (1, 3)]);
        let t = merge_linearizations(&p, &[ints(&[1, 3]), ints(&[2]), ints(&[0])]).unwrap();
        assert_eq!(t.order(), ints(&[2, 0, 1, 3]).as_slice());
    }

    #[test]
    fn empty_order_two_halves() {
        let p = poset(8, &[]);
        let pieces = vec![ints(&[3, 1, 0, 2]), ints(&[7, 4, 6, 5])];
        let t = merge_linearizations(&p, &pieces).unwrap();
        // Every new I_x is empty, so the second piece goes first.
        assert_eq!(t.order(), ints(&[7, 4, 6, 5, 3, 1, 0, 2]).as_slice());
        assert_eq!(t.order(), oracle(&p, &pieces).as_slice());
        assert_eq!(t.stages[0], pieces[0]);
    }

    #[test]
    fn violation_names_the_pair() {
        let p = poset(3, &[(0, 1)]);
        assert_eq!(
            merge_linearizations(&p, &[ints(&[1, 2, 0])]),
            Err(LinearizeError::Violation { piece: 0, x: "0".into(), y: "1".into() })
        );
        assert!(matches!(merge_linearizations(&p, &[ints(&[0, 1])]), Err(LinearizeError::Uncovered(_))));
    }

    fn arb_case() -> impl Strategy<Value = (Pattern, Vec<Piece>)> {
        (2i64..=8, any::<u64>()).prop_map(|(n, seed)| {
            use rand::{seq::SliceRandom, Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // A random order-compatible relation closed transitively.
            let perm: Vec<i64> = {
                let mut v: Vec<i64> = (0..n).collect();
                v.shuffle(&mut rng);
                v
            };
            let mut rel = BTreeSet::new();
            for i in 0..n as usize {
                for j in i + 1..n as usize {
                    if rng.gen_bool(0.3) {
                        rel.insert((perm[i], perm[j]));
                    }
                }
            }
            loop {
                let extra: Vec<(i64, i64)> = rel
                    .iter()
                    .flat_map(|(a, b)| rel.iter().filter(move |(c, _)| c == b).map(move |(_, d)| (*a, *d)))
                    .filter(|e| !rel.contains(e))
                    .collect();
                if extra.is_empty() {
                    break;
                }
                rel.extend(extra);
            }
            let p = poset(n, &rel.into_iter().collect::<Vec<_>>());
            // Random pieces, each ordered by a linear extension of P on it.
            let mut pieces: Vec<Piece> = Vec::new();
            let mut pts: Vec<i64> = (0..n).collect();
            pts.shuffle(&mut rng);
            while !pts.is_empty() {
                let k = rng.gen_range(1..=pts.len());
                let mut piece: Vec<i64> = pts.drain(..k).collect();
                if rng.gen_bool(0.3) && !pieces.is_empty() {
                    piece.push(pieces[0][0].as_int().unwrap());
                }
                piece.sort_by_key(|x| perm.iter().position(|y| y == x).unwrap());
                piece.dedup();
                pieces.push(ints(&piece));
            }
            (p, pieces)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn merge_matches_five_cases((p, pieces) in arb_case()) {
            let t = merge_linearizations(&p, &pieces).unwrap();
            let expected = oracle(&p, &pieces);
            prop_assert_eq!(t.order(), expected.as_slice());
            let order = order_pattern(GroupModel::Z, t.order(), "L").unwrap();
            for tup in p.tuples("P") {
                prop_assert!(order.holds("L", tup));
            }
            for w in t.stages.windows(2) {
                let later: Vec<&Element> = w[1].iter().filter(|x| w[0].contains(x)).collect();
                prop_assert_eq!(later, w[0].iter().collect::<Vec<_>>());
            }
        }
    }
}
