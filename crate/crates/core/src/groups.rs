//! Finitely generated groups with exact canonical forms.
//!
//! Three families are supported: the integers, free abelian groups `Z^d`
//! and free groups `F_k`. Every element has a unique canonical form, so
//! equality of [`Element`] values is equality of group elements.
//!
//! Elements are totally ordered by the global enumeration: shorter words
//! first, ties broken lexicographically with negatives / inverse letters
//! before positives. `BTreeSet<Element>` therefore iterates in enumeration
//! order, which is what every deterministic tie-break in this crate relies on.

use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("element {element} does not belong to group {group}")]
    ModelMismatch { group: String, element: String },
    #[error("unknown group '{0}' (expected Z, Z^d or F<k>)")]
    UnknownGroup(String),
    #[error("cannot parse element '{text}' for group {group}")]
    BadElement { group: String, text: String },
}

/// A supported group, selected by a config string such as `"Z"`, `"Z^2"`
/// or `"F2"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupModel {
    Z,
    /// Free abelian group of the given rank (rank ≥ 1).
    Zd(usize),
    /// Free group of the given rank (rank ≥ 1).
    Free(usize),
}

/// A group element in canonical form.
///
/// Free-group words use signed letters: generator `i` (0-based) is `i + 1`,
/// its inverse is `-(i + 1)`. Words are always freely reduced.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Element {
    Int(i64),
    Vector(Vec<i64>),
    Word(Vec<i8>),
}

impl GroupModel {
    pub fn identity(&self) -> Element {
        match *self {
            GroupModel::Z => Element::Int(0),
            GroupModel::Zd(d) => Element::Vector(vec![0; d]),
            GroupModel::Free(_) => Element::Word(Vec::new()),
        }
    }

    /// The symmetric generating set, in enumeration order.
    pub fn generators(&self) -> Vec<Element> {
        let mut gens: Vec<Element> = match *self {
            GroupModel::Z => vec![Element::Int(-1), Element::Int(1)],
            GroupModel::Zd(d) => (0..d)
                .flat_map(|i| {
                    [-1i64, 1].into_iter().map(move |s| {
                        let mut v = vec![0; d];
                        v[i] = s;
                        Element::Vector(v)
                    })
                })
                .collect(),
            GroupModel::Free(k) => (1..=k as i8)
                .flat_map(|g| [Element::Word(vec![-g]), Element::Word(vec![g])])
                .collect(),
        };
        gens.sort();
        gens
    }

    /// True iff `g` is an element of this group.
    pub fn contains(&self, g: &Element) -> bool {
        match (self, g) {
            (GroupModel::Z, Element::Int(_)) => true,
            (GroupModel::Zd(d), Element::Vector(v)) => v.len() == *d,
            (GroupModel::Free(k), Element::Word(w)) => {
                w.iter().all(|&l| l != 0 && (l.unsigned_abs() as usize) <= *k)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            _ => false,
        }
    }

    fn check(&self, g: &Element) -> Result<(), GroupError> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(GroupError::ModelMismatch { group: self.to_string(), element: g.to_string() })
        }
    }

    pub fn mul(&self, g: &Element, h: &Element) -> Result<Element, GroupError> {
        self.check(g)?;
        self.check(h)?;
        Ok(mul_unchecked(g, h))
    }

    pub fn inv(&self, g: &Element) -> Result<Element, GroupError> {
        self.check(g)?;
        Ok(g.inverse())
    }

    /// The ball of radius `r` around the identity.
    pub fn ball(&self, r: usize) -> Window {
        Window::ball(*self, r)
    }

    /// The first `n` terms of the length-lexicographic enumeration.
    pub fn enumerate(&self, n: usize) -> Vec<Element> {
        let mut r = 0;
        loop {
            let b = ball_elements(*self, r);
            if b.len() >= n {
                return b.into_iter().take(n).collect();
            }
            r += 1;
        }
    }

    /// Number of elements of word length ≤ r.
    pub fn ball_size(&self, r: usize) -> usize {
        match *self {
            GroupModel::Z => 2 * r + 1,
            GroupModel::Zd(d) => {
                // |B(r)| = sum_k 2^k C(d,k) C(r,k)
                (0..=d.min(r))
                    .map(|k| (1usize << k) * binom(d, k) * binom(r, k))
                    .sum()
            }
            GroupModel::Free(k) => {
                if r == 0 {
                    return 1;
                }
                let s = 2 * k - 1;
                // 1 + 2k * (s^r - 1)/(s - 1), with s = 1 meaning F_1 = Z
                if s == 1 {
                    2 * r + 1
                } else {
                    1 + 2 * k * (s.pow(r as u32) - 1) / (s - 1)
                }
            }
        }
    }

    /// Parses an element from its JSON form: an integer for `Z`, an integer
    /// array for `Z^d`, a word string such as `"ab^-1a"` for free groups.
    pub fn parse_element(&self, v: &Value) -> Result<Element, GroupError> {
        let bad = || GroupError::BadElement { group: self.to_string(), text: v.to_string() };
        let e = match (self, v) {
            (GroupModel::Z, Value::Number(n)) => Element::Int(n.as_i64().ok_or_else(bad)?),
            (GroupModel::Zd(_), Value::Array(xs)) => Element::Vector(
                xs.iter().map(|x| x.as_i64().ok_or_else(bad)).collect::<Result<_, _>>()?,
            ),
            (GroupModel::Free(_), Value::String(s)) => parse_word(s).ok_or_else(bad)?,
            _ => return Err(bad()),
        };
        self.check(&e)?;
        Ok(e)
    }
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

impl fmt::Display for GroupModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupModel::Z => write!(f, "Z"),
            GroupModel::Zd(d) => write!(f, "Z^{d}"),
            GroupModel::Free(k) => write!(f, "F{k}"),
        }
    }
}

impl FromStr for GroupModel {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || GroupError::UnknownGroup(s.to_string());
        if t == "Z" {
            return Ok(GroupModel::Z);
        }
        if let Some(d) = t.strip_prefix("Z^") {
            let d: usize = d.parse().map_err(|_| err())?;
            return match d {
                0 => Err(err()),
                1 => Ok(GroupModel::Z),
                _ => Ok(GroupModel::Zd(d)),
            };
        }
        if let Some(k) = t.strip_prefix('F') {
            let k: usize = k.parse().map_err(|_| err())?;
            if (1..=26).contains(&k) {
                return Ok(GroupModel::Free(k));
            }
        }
        Err(err())
    }
}

impl serde::Serialize for GroupModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for GroupModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Free reduction of a concatenated word.
fn reduce_into(out: &mut Vec<i8>, letters: impl IntoIterator<Item = i8>) {
    for l in letters {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
}

/// Multiplication for operands already known to share a group.
pub(crate) fn mul_unchecked(g: &Element, h: &Element) -> Element {
    match (g, h) {
        (Element::Int(a), Element::Int(b)) => Element::Int(a + b),
        (Element::Vector(a), Element::Vector(b)) => {
            Element::Vector(a.iter().zip(b).map(|(x, y)| x + y).collect())
        }
        (Element::Word(a), Element::Word(b)) => {
            let mut out = a.clone();
            reduce_into(&mut out, b.iter().copied());
            Element::Word(out)
        }
        _ => panic!("mul_unchecked on mixed groups: {g} * {h}"),
    }
}

impl Element {
    pub fn inverse(&self) -> Element {
        match self {
            Element::Int(a) => Element::Int(-a),
            Element::Vector(v) => Element::Vector(v.iter().map(|x| -x).collect()),
            Element::Word(w) => Element::Word(w.iter().rev().map(|l| -l).collect()),
        }
    }

    /// `self · other`. Panics on mixed groups; use [`GroupModel::mul`] for
    /// checked multiplication of untrusted input.
    pub fn mul(&self, other: &Element) -> Element {
        mul_unchecked(self, other)
    }

    /// Word length with respect to the standard symmetric generators.
    pub fn length(&self) -> usize {
        match self {
            Element::Int(a) => a.unsigned_abs() as usize,
            Element::Vector(v) => v.iter().map(|x| x.unsigned_abs() as usize).sum(),
            Element::Word(w) => w.len(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.length() == 0
    }

    pub fn to_json(&self) -> Value {
        match self {
            Element::Int(a) => Value::from(*a),
            Element::Vector(v) => Value::from(v.clone()),
            Element::Word(_) => Value::from(self.to_string()),
        }
    }

    /// Integer coordinate, for elements of `Z`.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Element::Int(a) => Some(*a),
            _ => None,
        }
    }

    fn variant_rank(&self) -> u8 {
        match self {
            Element::Int(_) => 0,
            Element::Vector(_) => 1,
            Element::Word(_) => 2,
        }
    }
}

/// Sort key of a free-group letter: a^-1 < a < b^-1 < b < ...
fn letter_key(l: i8) -> i16 {
    2 * (l.unsigned_abs() as i16) + if l > 0 { 1 } else { 0 }
}

impl Ord for Element {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Element::Int(a), Element::Int(b)) => {
                // 0, -1, 1, -2, 2, ...
                a.unsigned_abs().cmp(&b.unsigned_abs()).then(a.cmp(b))
            }
            (Element::Vector(a), Element::Vector(b)) => {
                self.length().cmp(&other.length()).then_with(|| a.cmp(b))
            }
            (Element::Word(a), Element::Word(b)) => a.len().cmp(&b.len()).then_with(|| {
                a.iter().map(|&l| letter_key(l)).cmp(b.iter().map(|&l| letter_key(l)))
            }),
            _ => self.variant_rank().cmp(&other.variant_rank()),
        }
    }
}

impl PartialOrd for Element {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Int(a) => write!(f, "{a}"),
            Element::Vector(v) => {
                write!(f, "(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            Element::Word(w) => {
                if w.is_empty() {
                    return write!(f, "1");
                }
                for &l in w {
                    let c = (b'a' + l.unsigned_abs() - 1) as char;
                    if l > 0 {
                        write!(f, "{c}")?;
                    } else {
                        write!(f, "{c}^-1")?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// Parses `"1"`, `""` or words like `"ab^-1a"`; the result is freely reduced.
pub fn parse_word(s: &str) -> Option<Element> {
    let s = s.trim();
    if s.is_empty() || s == "1" {
        return Some(Element::Word(Vec::new()));
    }
    let bytes = s.as_bytes();
    let mut letters = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if !c.is_ascii_lowercase() {
            return None;
        }
        let g = (c - b'a' + 1) as i8;
        i += 1;
        if bytes[i..].starts_with(b"^-1") {
            letters.push(-g);
            i += 3;
        } else {
            letters.push(g);
        }
    }
    let mut out = Vec::new();
    reduce_into(&mut out, letters);
    Some(Element::Word(out))
}

/// A finite truncation of the group: the translate `centre · B(radius + padding)`.
///
/// Operations that need room to look around a point (right multiplication,
/// local rules) read data on all of `elements` but only report results on the
/// unpadded interior `centre · B(radius)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub group: GroupModel,
    pub centre: Element,
    pub radius: usize,
    pub padding: usize,
    pub elements: BTreeSet<Element>,
}

impl Window {
    pub fn ball(group: GroupModel, radius: usize) -> Window {
        Window::padded(group, radius, 0)
    }

    pub fn padded(group: GroupModel, radius: usize, padding: usize) -> Window {
        Window {
            group,
            centre: group.identity(),
            radius,
            padding,
            elements: ball_elements(group, radius + padding).into_iter().collect(),
        }
    }

    /// Left translate `γ · W`.
    pub fn translate(&self, gamma: &Element) -> Window {
        Window {
            group: self.group,
            centre: gamma.mul(&self.centre),
            radius: self.radius,
            padding: self.padding,
            elements: self.elements.iter().map(|x| gamma.mul(x)).collect(),
        }
    }

    /// The unpadded interior `centre · B(radius)`.
    pub fn interior(&self) -> BTreeSet<Element> {
        ball_elements(self.group, self.radius)
            .into_iter()
            .map(|x| self.centre.mul(&x))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, g: &Element) -> bool {
        self.elements.contains(g)
    }
}

/// Elements of word length ≤ r, in enumeration order.
pub fn ball_elements(group: GroupModel, r: usize) -> Vec<Element> {
    let mut out: Vec<Element> = match group {
        GroupModel::Z => (-(r as i64)..=r as i64).map(Element::Int).collect(),
        GroupModel::Zd(d) => {
            let mut acc = Vec::new();
            let mut cur = vec![0i64; d];
            zd_ball(d, r as i64, 0, &mut cur, &mut acc);
            acc.into_iter().map(Element::Vector).collect()
        }
        GroupModel::Free(k) => {
            let mut acc = vec![Vec::<i8>::new()];
            let mut queue = VecDeque::from([Vec::<i8>::new()]);
            while let Some(w) = queue.pop_front() {
                if w.len() == r {
                    continue;
                }
                for g in 1..=k as i8 {
                    for l in [-g, g] {
                        if w.last() == Some(&-l) {
                            continue;
                        }
                        let mut nw = w.clone();
                        nw.push(l);
                        acc.push(nw.clone());
                        queue.push_back(nw);
                    }
                }
            }
            acc.into_iter().map(Element::Word).collect()
        }
    };
    out.sort();
    out
}

fn zd_ball(d: usize, budget: i64, i: usize, cur: &mut Vec<i64>, acc: &mut Vec<Vec<i64>>) {
    if i == d {
        acc.push(cur.clone());
        return;
    }
    for x in -budget..=budget {
        cur[i] = x;
        zd_ball(d, budget - x.abs(), i + 1, cur, acc);
    }
    cur[i] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Element {
        parse_word(s).unwrap()
    }

    #[test]
    fn mul_examples() {
        let z = GroupModel::Z;
        assert_eq!(z.mul(&Element::Int(3), &Element::Int(-5)).unwrap(), Element::Int(-2));
        let f2 = GroupModel::Free(2);
        assert_eq!(f2.mul(&w("ab"), &w("b^-1a")).unwrap(), w("aa"));
        let z2 = GroupModel::Zd(2);
        assert_eq!(
            z2.mul(&Element::Vector(vec![1, 2]), &Element::Vector(vec![-1, 0])).unwrap(),
            Element::Vector(vec![0, 2])
        );
    }

    #[test]
    fn mixed_operands_are_rejected() {
        let err = GroupModel::Z.mul(&Element::Int(1), &Element::Vector(vec![1, 0]));
        assert!(matches!(err, Err(GroupError::ModelMismatch { .. })));
        // a word using letter c is not in F2
        assert!(GroupModel::Free(2).mul(&w("c"), &w("a")).is_err());
    }

    #[test]
    fn inv_examples() {
        assert_eq!(GroupModel::Z.inv(&Element::Int(4)).unwrap(), Element::Int(-4));
        assert_eq!(GroupModel::Free(2).inv(&w("ab^-1")).unwrap(), w("ba^-1"));
        for g in [GroupModel::Z, GroupModel::Zd(3), GroupModel::Free(2)] {
            assert_eq!(g.inv(&g.identity()).unwrap(), g.identity());
        }
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(GroupModel::Z.ball(3).len(), 7);
        let b: Vec<i64> = GroupModel::Z.ball(3).elements.iter().map(|e| e.as_int().unwrap()).collect();
        assert_eq!(b.len(), 7);
        assert!(b.iter().all(|x| x.abs() <= 3));
        assert_eq!(GroupModel::Free(2).ball(2).len(), 17);
        assert_eq!(GroupModel::Zd(2).ball(1).len(), 5);
    }

    #[test]
    fn free_ball_matches_brute_force_reduction() {
        // all words of length <= 2 over {a, a^-1, b, b^-1}, reduced, deduplicated
        let letters = [1i8, -1, 2, -2];
        let mut seen = BTreeSet::new();
        seen.insert(Element::Word(vec![]));
        for &x in &letters {
            seen.insert(Element::Word(vec![x]));
            for &y in &letters {
                let mut out = Vec::new();
                reduce_into(&mut out, [x, y]);
                seen.insert(Element::Word(out));
            }
        }
        assert_eq!(seen.len(), 17);
        let ball: BTreeSet<Element> = GroupModel::Free(2).ball(2).elements;
        assert_eq!(seen, ball);
    }

    #[test]
    fn closed_form_ball_sizes() {
        for g in [GroupModel::Z, GroupModel::Zd(2), GroupModel::Zd(3), GroupModel::Free(1), GroupModel::Free(2), GroupModel::Free(3)] {
            for r in 0..5 {
                assert_eq!(ball_elements(g, r).len(), g.ball_size(r), "{g} r={r}");
            }
        }
    }

    #[test]
    fn enumeration_examples() {
        let e: Vec<i64> = GroupModel::Z.enumerate(5).iter().map(|x| x.as_int().unwrap()).collect();
        assert_eq!(e, vec![0, -1, 1, -2, 2]);
        assert_eq!(GroupModel::Free(1).enumerate(3), vec![w("1"), w("a^-1"), w("a")]);
        for g in [GroupModel::Z, GroupModel::Zd(2), GroupModel::Free(2)] {
            assert_eq!(g.enumerate(1), vec![g.identity()]);
        }
    }

    #[test]
    fn enumeration_is_stable_prefix_and_bijective_on_balls() {
        for g in [GroupModel::Z, GroupModel::Zd(2), GroupModel::Free(2)] {
            let long = g.enumerate(200);
            for r in 0..4 {
                let n = g.ball_size(r);
                let prefix: BTreeSet<Element> = long[..n].iter().cloned().collect();
                assert_eq!(prefix.len(), n);
                assert_eq!(prefix, g.ball(r).elements);
                assert_eq!(&g.enumerate(n)[..], &long[..n]);
            }
        }
    }

    #[test]
    fn group_laws_on_ball_four() {
        for g in [GroupModel::Z, GroupModel::Zd(2), GroupModel::Free(2)] {
            let b: Vec<Element> = g.ball(if g == GroupModel::Free(2) { 2 } else { 4 }).elements.into_iter().collect();
            let e = g.identity();
            for x in &b {
                assert_eq!(x.mul(&x.inverse()), e);
                assert_eq!(x.inverse().inverse(), *x);
                for y in &b {
                    assert!(x.mul(y).length() <= x.length() + y.length());
                    for z in b.iter().step_by(3) {
                        assert_eq!(x.mul(y).mul(z), x.mul(&y.mul(z)));
                    }
                }
            }
        }
    }

    #[test]
    fn ball_products_stay_in_sum_ball() {
        for g in [GroupModel::Z, GroupModel::Zd(2), GroupModel::Free(2)] {
            let b3 = g.ball(3).elements;
            for x in g.ball(1).elements.iter() {
                for y in g.ball(2).elements.iter() {
                    assert!(b3.contains(&x.mul(y)));
                }
            }
        }
    }

    #[test]
    fn config_strings_and_serialization() {
        assert_eq!("Z".parse::<GroupModel>().unwrap(), GroupModel::Z);
        assert_eq!("Z^2".parse::<GroupModel>().unwrap(), GroupModel::Zd(2));
        assert_eq!("F2".parse::<GroupModel>().unwrap(), GroupModel::Free(2));
        assert!("Q".parse::<GroupModel>().is_err());
        let x = w("ab^-1a");
        assert_eq!(x.to_string(), "ab^-1a");
        assert_eq!(GroupModel::Free(2).parse_element(&x.to_json()).unwrap(), x);
        let v = Element::Vector(vec![3, -1]);
        assert_eq!(GroupModel::Zd(2).parse_element(&v.to_json()).unwrap(), v);
    }

    #[test]
    fn ball_is_nested() {
        for g in [GroupModel::Z, GroupModel::Zd(2), GroupModel::Free(2)] {
            assert_eq!(g.ball(0).elements, BTreeSet::from([g.identity()]));
            for r in 0..4 {
                let small = g.ball(r).elements;
                let big = g.ball(r + 1).elements;
                assert!(small.is_subset(&big));
                assert!(small.iter().all(|x| x.length() <= r));
            }
        }
    }
}
