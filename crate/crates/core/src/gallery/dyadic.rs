//! Points of Cantor space, the index-two subrelation `F₀` of `E₀`, the order
//! `L` on its classes, the successor map `f` and the head flip `g`.
//!
//! A point is an explicit prefix followed by a tail: all zeros, all ones, or
//! an abstract sequence `t` that is never inspected. Every computation only
//! reads coordinates up to the last place two points differ, or up to the
//! first `1` after the head, so it reduces to the explicit prefixes. Reading
//! a coordinate of an abstract tail is reported as undetermined.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DyadicError {
    #[error("{0} and {1} have incomparable tails")]
    Undetermined(String, String),
    #[error("{0} needs a coordinate of its abstract tail")]
    NeedsTail(String),
    #[error("{0} and {1} are not F0-equivalent")]
    NotEquivalent(String, String),
    #[error("{0} is outside the domain of the successor map")]
    Excluded(String),
    #[error("a point with an abstract tail needs a nonempty prefix")]
    EmptyPrefix,
    #[error("cannot parse {0:?} as a point")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tail {
    Zeros,
    Ones,
    /// An arbitrary fixed sequence, named by an id.
    Symbolic(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicPoint {
    prefix: Vec<bool>,
    tail: Tail,
}

impl DyadicPoint {
    /// The point `prefix⌢tail`. Constant tails absorb trailing prefix bits.
    pub fn new(prefix: Vec<bool>, tail: Tail) -> Result<DyadicPoint, DyadicError> {
        let mut p = DyadicPoint { prefix, tail };
        match tail {
            Tail::Zeros | Tail::Ones => {
                let c = tail == Tail::Ones;
                while p.prefix.last() == Some(&c) {
                    p.prefix.pop();
                }
            }
            Tail::Symbolic(_) if p.prefix.is_empty() => return Err(DyadicError::EmptyPrefix),
            Tail::Symbolic(_) => {}
        }
        Ok(p)
    }

    pub fn from_bits(bits: &[u8], tail: Tail) -> Result<DyadicPoint, DyadicError> {
        DyadicPoint::new(bits.iter().map(|b| *b != 0).collect(), tail)
    }

    /// Bits `0..len` of `word`, least significant first, with an abstract tail.
    pub fn from_word(word: u32, len: usize, tail: u32) -> DyadicPoint {
        DyadicPoint { prefix: (0..len).map(|i| word >> i & 1 == 1).collect(), tail: Tail::Symbolic(tail) }
    }

    pub fn prefix(&self) -> &[bool] {
        &self.prefix
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// Coordinate `i`, or `None` inside an abstract tail.
    pub fn bit(&self, i: usize) -> Option<bool> {
        match self.prefix.get(i) {
            Some(b) => Some(*b),
            None => match self.tail {
                Tail::Zeros => Some(false),
                Tail::Ones => Some(true),
                Tail::Symbolic(_) => None,
            },
        }
    }

    fn need(&self, i: usize) -> Result<bool, DyadicError> {
        self.bit(i).ok_or_else(|| DyadicError::NeedsTail(self.to_string()))
    }

    /// Coordinates where `self` and `other` differ, if that is decidable.
    /// `None` means the tails are constant and different.
    fn differences(&self, other: &DyadicPoint) -> Result<Option<Vec<usize>>, DyadicError> {
        let len = match (self.tail, other.tail) {
            (Tail::Symbolic(a), Tail::Symbolic(b)) if a == b && self.prefix.len() == other.prefix.len() => {
                self.prefix.len()
            }
            (Tail::Zeros, Tail::Zeros) | (Tail::Ones, Tail::Ones) => self.prefix.len().max(other.prefix.len()),
            (Tail::Zeros, Tail::Ones) | (Tail::Ones, Tail::Zeros) => return Ok(None),
            _ => return Err(DyadicError::Undetermined(self.to_string(), other.to_string())),
        };
        Ok(Some((0..len).filter(|i| self.bit(*i) != other.bit(*i)).collect()))
    }

    pub fn to_json(&self) -> Value {
        json!(self.to_string())
    }
}

impl fmt::Display for DyadicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.prefix {
            write!(f, "{}", *b as u8)?;
        }
        match self.tail {
            Tail::Zeros => write!(f, "|0"),
            Tail::Ones => write!(f, "|1"),
            Tail::Symbolic(id) => write!(f, "|t{id}"),
        }
    }
}

/// `0110|0`, `01|1` or `01|t3`; a bare `|t` is tail id 0.
impl FromStr for DyadicPoint {
    type Err = DyadicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DyadicError::Parse(s.to_string());
        let (bits, tail) = s.trim().split_once('|').ok_or_else(bad)?;
        let prefix = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let tail = match tail {
            "0" => Tail::Zeros,
            "1" => Tail::Ones,
            t => match t.strip_prefix('t') {
                Some("") => Tail::Symbolic(0),
                Some(id) => Tail::Symbolic(id.parse().map_err(|_| bad())?),
                None => return Err(bad()),
            },
        };
        DyadicPoint::new(prefix, tail)
    }
}

/// `x F₀ y`: finitely many differences, and an even number of them.
pub fn f0_equivalent(x: &DyadicPoint, y: &DyadicPoint) -> Result<bool, DyadicError> {
    Ok(x.differences(y)?.is_some_and(|d| d.len() % 2 == 0))
}

/// `x L y` for `x ≠ y` iff `Σ_{i<n} x(i)` is even, `n` the last place they differ.
pub fn l_compare(x: &DyadicPoint, y: &DyadicPoint) -> Result<Ordering, DyadicError> {
    let not_equiv = || DyadicError::NotEquivalent(x.to_string(), y.to_string());
    let diff = x.differences(y)?.ok_or_else(not_equiv)?;
    if diff.len() % 2 == 1 {
        return Err(not_equiv());
    }
    let Some(&n) = diff.last() else { return Ok(Ordering::Equal) };
    let ones = (0..n).filter(|i| x.bit(*i) == Some(true)).count();
    Ok(if ones % 2 == 0 { Ordering::Less } else { Ordering::Greater })
}

/// `f(0⌢i⌢x) = 1⌢(1-i)⌢x` and `f(1⌢0ⁿ⌢1⌢i⌢x) = 0ⁿ⁺¹⌢1⌢(1-i)⌢x`.
pub fn dyadic_successor(x: &DyadicPoint) -> Result<DyadicPoint, DyadicError> {
    let mut bits: Vec<bool> = Vec::new();
    let rest_from = if !x.need(0)? {
        bits.push(true);
        bits.push(!x.need(1)?);
        2
    } else {
        let mut m = 1;
        loop {
            if m >= x.prefix.len() && x.tail == Tail::Zeros {
                return Err(DyadicError::Excluded(x.to_string()));
            }
            if x.need(m)? {
                break;
            }
            m += 1;
        }
        bits.extend(std::iter::repeat(false).take(m));
        bits.push(true);
        bits.push(!x.need(m + 1)?);
        m + 2
    };
    bits.extend(x.prefix.iter().skip(rest_from));
    DyadicPoint::new(bits, x.tail)
}

/// `g`: flips coordinate 0.
pub fn flip_head(x: &DyadicPoint) -> DyadicPoint {
    let mut prefix = x.prefix.clone();
    if prefix.is_empty() {
        prefix.push(x.tail != Tail::Ones);
    } else {
        prefix[0] = !prefix[0];
    }
    DyadicPoint::new(prefix, x.tail).expect("nonempty prefix")
}

/// Outcome of an exhaustive or sampled check over truncations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicCheck {
    pub check: String,
    pub len: usize,
    pub checked: u64,
    pub counterexamples: u64,
    /// First failure, for replay.
    pub first_failure: Option<String>,
}

impl DyadicCheck {
    pub fn passed(&self) -> bool {
        self.counterexamples == 0 && self.checked > 0
    }

    pub fn to_json(&self) -> Value {
        json!({
            "check": self.check,
            "len": self.len,
            "checked": self.checked,
            "counterexamples": self.counterexamples,
            "first_failure": self.first_failure,
            "verdict": if self.passed() { "PASS" } else { "FAIL" },
        })
    }

    fn merge(check: &str, len: usize, parts: Vec<(u64, u64, Option<String>)>) -> DyadicCheck {
        DyadicCheck {
            check: check.into(),
            len,
            checked: parts.iter().map(|p| p.0).sum(),
            counterexamples: parts.iter().map(|p| p.1).sum(),
            first_failure: parts.into_iter().find_map(|p| p.2),
        }
    }
}

/// The two `F₀`-classes of words of length `len` over a common abstract tail.
fn classes(len: usize) -> [Vec<DyadicPoint>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for w in 0..1u32 << len {
        out[(w.count_ones() % 2) as usize].push(DyadicPoint::from_word(w, len, 0));
    }
    out
}

/// Sorts each class by `L` and checks that `f` maps every point to the next
/// one. The class is an `L`-interval of the full class, so only its maximum
/// may have an undetermined successor, and it must.
pub fn check_successor(len: usize) -> DyadicCheck {
    assert!((2..=20).contains(&len), "length {len} out of range");
    let parts = classes(len)
        .into_par_iter()
        .map(|mut class| {
            class.sort_by(|a, b| l_compare(a, b).expect("same class"));
            let mut bad = 0;
            let mut first = None;
            for (k, x) in class.iter().enumerate() {
                let ok = match (dyadic_successor(x), class.get(k + 1)) {
                    (Ok(fx), Some(next)) => fx == *next,
                    (Err(DyadicError::NeedsTail(_)), None) => true,
                    _ => false,
                };
                if !ok {
                    bad += 1;
                    first.get_or_insert_with(|| x.to_string());
                }
            }
            (class.len() as u64, bad, first)
        })
        .collect();
    DyadicCheck::merge("successor", len, parts)
}

/// Transitivity and antisymmetry of `L` on in-class triples of length-`len`
/// words: all of them, or `samples` random ones.
pub fn check_transitivity(len: usize, samples: Option<u64>, seed: u64) -> DyadicCheck {
    assert!((1..=20).contains(&len), "length {len} out of range");
    let classes = classes(len);
    let triple_ok = |x: &DyadicPoint, y: &DyadicPoint, z: &DyadicPoint| {
        let xy = l_compare(x, y).unwrap();
        let yz = l_compare(y, z).unwrap();
        let xz = l_compare(x, z).unwrap();
        let anti = l_compare(y, x).unwrap() == xy.reverse();
        let trans = !(xy.is_lt() && yz.is_lt()) || xz.is_lt();
        anti && trans
    };
    let parts: Vec<(u64, u64, Option<String>)> = match samples {
        None => classes
            .par_iter()
            .flat_map(|class| {
                class.par_iter().map(move |x| {
                    let mut bad = 0;
                    let mut first = None;
                    for y in class {
                        for z in class {
                            if !triple_ok(x, y, z) {
                                bad += 1;
                                first.get_or_insert_with(|| format!("{x} {y} {z}"));
                            }
                        }
                    }
                    ((class.len() * class.len()) as u64, bad, first)
                })
            })
            .collect(),
        Some(n) => {
            let blocks = 64u64;
            (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(b);
                    let count = n / blocks + u64::from(b < n % blocks);
                    let mut bad = 0;
                    let mut first = None;
                    for _ in 0..count {
                        let class = &classes[rng.gen_range(0..2)];
                        let mut pick = || &class[rng.gen_range(0..class.len())];
                        let (x, y, z) = (pick(), pick(), pick());
                        if !triple_ok(x, y, z) {
                            bad += 1;
                            first.get_or_insert_with(|| format!("{x} {y} {z}"));
                        }
                    }
                    (count, bad, first)
                })
                .collect()
        }
    };
    DyadicCheck::merge("transitivity", len, parts)
}

/// `g` is an involution leaving the `F₀`-class, and `x L y` iff `g(y) L g(x)`
/// for every pair in a class of length-`len` words.
pub fn check_flip(len: usize) -> DyadicCheck {
    assert!((1..=16).contains(&len), "length {len} out of range");
    let parts = classes(len)
        .into_par_iter()
        .flat_map(|class| {
            let flipped: Vec<DyadicPoint> = class.iter().map(flip_head).collect();
            (0..class.len())
                .into_par_iter()
                .map(|i| {
                    let x = &class[i];
                    let gx = &flipped[i];
                    let mut bad = u64::from(flip_head(gx) != *x || f0_equivalent(x, gx) != Ok(false));
                    let mut first = (bad > 0).then(|| x.to_string());
                    for (y, gy) in class.iter().zip(&flipped) {
                        if l_compare(x, y).unwrap() != l_compare(gy, gx).unwrap() {
                            bad += 1;
                            first.get_or_insert_with(|| format!("{x} {y}"));
                        }
                    }
                    (class.len() as u64, bad, first)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    DyadicCheck::merge("flip", len, parts)
}

/// `g ∘ f ∘ g` is the `L`-predecessor map: `f(g(f(x))) = g(x)` wherever both
/// successors are determined.
pub fn check_conjugation(len: usize) -> DyadicCheck {
    assert!((2..=20).contains(&len), "length {len} out of range");
    let parts = classes(len)
        .into_par_iter()
        .map(|class| {
            let (mut checked, mut bad, mut first) = (0, 0, None);
            for x in &class {
                let Ok(fx) = dyadic_successor(x) else { continue };
                let Ok(back) = dyadic_successor(&flip_head(&fx)) else { continue };
                checked += 1;
                if back != flip_head(x) {
                    bad += 1;
                    first.get_or_insert_with(|| x.to_string());
                }
            }
            (checked, bad, first)
        })
        .collect();
    DyadicCheck::merge("conjugation", len, parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(s: &str) -> DyadicPoint {
        s.parse().unwrap()
    }

    #[test]
    fn parsing_and_canonical_form() {
        assert_eq!(pt("0100|0"), pt("01|0"));
        assert_eq!(pt("011|1").prefix(), &[false]);
        assert_eq!(pt("01|t").tail(), Tail::Symbolic(0));
        assert_eq!(pt("01|t7").to_string(), "01|t7");
        assert_eq!("|t".parse::<DyadicPoint>(), Err(DyadicError::EmptyPrefix));
        assert!("012|0".parse::<DyadicPoint>().is_err());
        assert!("01".parse::<DyadicPoint>().is_err());
    }

    #[test]
    fn equivalence() {
        assert!(f0_equivalent(&pt("0|t"), &pt("0|t")).unwrap());
        assert!(f0_equivalent(&pt("00|t"), &pt("11|t")).unwrap());
        assert!(!f0_equivalent(&pt("0|t"), &pt("1|t")).unwrap());
        assert!(!f0_equivalent(&pt("|0"), &pt("|1")).unwrap());
        assert!(f0_equivalent(&pt("11|0"), &pt("|0")).unwrap());
        assert!(f0_equivalent(&pt("0|t1"), &pt("0|t2")).is_err());
        assert!(f0_equivalent(&pt("0|t"), &pt("00|t")).is_err());
        assert!(f0_equivalent(&pt("0|t"), &pt("|0")).is_err());
    }

    #[test]
    fn comparison() {
        assert_eq!(l_compare(&pt("01|t"), &pt("01|t")), Ok(Ordering::Equal));
        assert_eq!(l_compare(&pt("00|t"), &pt("11|t")), Ok(Ordering::Less));
        assert_eq!(l_compare(&pt("11|t"), &pt("00|t")), Ok(Ordering::Greater));
        assert!(matches!(l_compare(&pt("0|t"), &pt("1|t")), Err(DyadicError::NotEquivalent(..))));
    }

    #[test]
    fn successor_formulas() {
        assert_eq!(dyadic_successor(&pt("01|t")).unwrap(), pt("10|t"));
        assert_eq!(dyadic_successor(&pt("110|t")).unwrap(), pt("011|t"));
        assert_eq!(dyadic_successor(&pt("10011|t")).unwrap(), pt("00010|t"));
        assert_eq!(dyadic_successor(&pt("|1")).unwrap(), pt("010|1"));
        assert!(matches!(dyadic_successor(&pt("1|0")), Err(DyadicError::Excluded(_))));
        assert!(matches!(dyadic_successor(&pt("100|t")), Err(DyadicError::NeedsTail(_))));
        assert!(matches!(dyadic_successor(&pt("0|t")), Err(DyadicError::NeedsTail(_))));
    }

    #[test]
    fn head_flip() {
        assert_eq!(flip_head(&pt("0|t")), pt("1|t"));
        assert_eq!(flip_head(&pt("|0")), pt("1|0"));
        assert_eq!(flip_head(&pt("|1")), pt("0|1"));
        for s in ["0110|t3", "|0", "1|0", "01|1"] {
            assert_eq!(flip_head(&flip_head(&pt(s))), pt(s));
        }
    }

    /// Independent bit-level rendering of `L` and `f` on words, least
    /// significant bit first.
    fn word_less(x: u32, y: u32) -> bool {
        let n = 31 - (x ^ y).leading_zeros();
        (x & ((1 << n) - 1)).count_ones() % 2 == 0
    }

    fn word_successor(x: u32, len: u32) -> Option<u32> {
        (0..1u32 << len)
            .filter(|z| z.count_ones() % 2 == x.count_ones() % 2 && *z != x && word_less(x, *z))
            .find(|z| {
                (0..1u32 << len).all(|w| {
                    w.count_ones() % 2 != x.count_ones() % 2 || w == x || w == *z || !(word_less(x, w) && word_less(w, *z))
                })
            })
    }

    #[test]
    fn successor_against_brute_force() {
        for len in 2..=8u32 {
            for w in 0..1u32 << len {
                let x = DyadicPoint::from_word(w, len as usize, 0);
                let expected = word_successor(w, len).map(|z| DyadicPoint::from_word(z, len as usize, 0));
                assert_eq!(dyadic_successor(&x).ok(), expected, "{x}");
            }
        }
    }

    #[test]
    fn exhaustive_checks_at_small_lengths() {
        for len in 2..=10 {
            assert!(check_successor(len).passed(), "{len}");
            assert!(check_conjugation(len).passed(), "{len}");
        }
        assert!(check_transitivity(6, None, 0).passed());
        assert!(check_flip(8).passed());
        let sampled = check_transitivity(10, Some(10_000), 3);
        assert_eq!(sampled.checked, 10_000);
        assert_eq!(sampled, check_transitivity(10, Some(10_000), 3));
    }

    #[test]
    fn a_wrong_order_is_caught() {
        // Reversing L breaks the successor property, and the check says so.
        let mut class: Vec<DyadicPoint> = (0..16u32).filter(|w| w.count_ones() % 2 == 0).map(|w| DyadicPoint::from_word(w, 4, 0)).collect();
        class.sort_by(|a, b| l_compare(b, a).unwrap());
        assert!(class.windows(2).any(|p| dyadic_successor(&p[0]).ok().as_ref() != Some(&p[1])));
    }

    proptest::proptest! {
        #[test]
        fn word_order_agrees(x in 0u32..1 << 12, y in 0u32..1 << 12) {
            proptest::prop_assume!(x != y && (x ^ y).count_ones() % 2 == 0);
            let (px, py) = (DyadicPoint::from_word(x, 12, 0), DyadicPoint::from_word(y, 12, 0));
            proptest::prop_assert_eq!(l_compare(&px, &py).unwrap().is_lt(), word_less(x, y));
        }

        #[test]
        fn constant_tails_agree_with_long_prefixes(x in 0u32..1 << 10, ones: bool) {
            // A constant tail is the same point as its explicit expansion.
            let tail = if ones { Tail::Ones } else { Tail::Zeros };
            let short = DyadicPoint::new((0..10).map(|i| x >> i & 1 == 1).collect(), tail).unwrap();
            let long = DyadicPoint::new((0..14).map(|i| if i < 10 { x >> i & 1 == 1 } else { ones }).collect(), tail).unwrap();
            proptest::prop_assert_eq!(&short, &long);
            if let Ok(fx) = dyadic_successor(&short) {
                proptest::prop_assert_eq!(l_compare(&short, &fx).unwrap(), Ordering::Less);
                proptest::prop_assert!(f0_equivalent(&short, &fx).unwrap());
            }
        }
    }
}
