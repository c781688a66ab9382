//! Selecting a ℤ-interval of a linear order.
//!
//! A linear order is described symbolically as a finite sequence of blocks,
//! each a copy of ℤ, of a dense order, or of a finite chain; a block may stand
//! for infinitely many consecutive copies of itself. The intervals of order
//! type ℤ are exactly the single ℤ-blocks. The selector picks the order-least
//! ℤ-block of maximal frequency, provided the maximum is positive and
//! attained by finitely many intervals.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::Rational64;
use serde_json::{json, Value};
use thiserror::Error;

use crate::groups::{Element, GroupError, GroupModel};
use crate::patterns::{Language, Pattern, PatternError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZlineError {
    #[error("no frequency for Z-block {0}")]
    MissingFrequency(usize),
    #[error("{0} is assigned twice")]
    Duplicate(String),
    #[error("bad position for {x} in block {block}")]
    BadPosition { x: String, block: usize },
    #[error("malformed order spec: {0}")]
    Malformed(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Z,
    Dense,
    Fin(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    /// The block stands for infinitely many consecutive copies.
    pub repeated: bool,
}

/// A point's place in the order. Dense blocks use rational positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Position {
    pub block: usize,
    pub copy: i64,
    pub at: Rational64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSpec {
    pub group: GroupModel,
    pub blocks: Vec<Block>,
    pub assign: BTreeMap<Element, Position>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZlineVerdict {
    Selected(usize),
    /// The order lies outside the classified set.
    NotInX(&'static str),
}

impl OrderSpec {
    pub fn new(group: GroupModel, blocks: Vec<Block>) -> Self {
        OrderSpec { group, blocks, assign: BTreeMap::new() }
    }

    /// Places `x` at `at` in copy `copy` of `block`.
    pub fn place(&mut self, x: Element, block: usize, copy: i64, at: Rational64) -> Result<(), ZlineError> {
        let b = self.blocks.get(block).ok_or(ZlineError::BadPosition { x: x.to_string(), block })?;
        let ok = (b.repeated || copy == 0)
            && match b.kind {
                BlockKind::Z => at.is_integer(),
                BlockKind::Dense => true,
                BlockKind::Fin(k) => at.is_integer() && *at.numer() >= 0 && *at.numer() < k as i64,
            };
        if !ok {
            return Err(ZlineError::BadPosition { x: x.to_string(), block });
        }
        let pos = Position { block, copy, at };
        if self.assign.values().any(|p| *p == pos) || self.assign.contains_key(&x) {
            return Err(ZlineError::Duplicate(x.to_string()));
        }
        self.assign.insert(x, pos);
        Ok(())
    }

    /// Copies of a repeated block are indexed by ℤ, so a repeated finite
    /// block would itself be a ℤ-interval; such blocks must be written as
    /// ℤ-blocks.
    pub fn validate(&self) -> Result<(), ZlineError> {
        match self.blocks.iter().position(|b| b.repeated && matches!(b.kind, BlockKind::Fin(_))) {
            Some(i) => Err(ZlineError::Malformed(format!("block {i}: repeated finite block"))),
            None => Ok(()),
        }
    }

    pub fn compare(&self, x: &Element, y: &Element) -> Option<Ordering> {
        Some(self.assign.get(x)?.cmp(self.assign.get(y)?))
    }

    /// The successor position within a ℤ-block (or a finite block, when it
    /// exists).
    pub fn successor(&self, p: &Position) -> Option<Position> {
        match self.blocks.get(p.block)?.kind {
            BlockKind::Z => Some(Position { at: p.at + 1, ..*p }),
            BlockKind::Fin(k) if *p.at.numer() + 1 < k as i64 => Some(Position { at: p.at + 1, ..*p }),
            _ => None,
        }
    }

    pub fn predecessor(&self, p: &Position) -> Option<Position> {
        match self.blocks.get(p.block)?.kind {
            BlockKind::Z => Some(Position { at: p.at - 1, ..*p }),
            BlockKind::Fin(_) if *p.at.numer() > 0 => Some(Position { at: p.at - 1, ..*p }),
            _ => None,
        }
    }

    /// Relabels points by left multiplication; the block structure is unchanged.
    pub fn translate(&self, gamma: &Element) -> OrderSpec {
        OrderSpec {
            group: self.group,
            blocks: self.blocks.clone(),
            assign: self.assign.iter().map(|(x, p)| (gamma.mul(x), *p)).collect(),
        }
    }

    /// The order `L` on the assigned points.
    pub fn to_pattern(&self) -> Result<Pattern, ZlineError> {
        let mut p = Pattern::new(self.group, Language::new([("L", 2)])?, self.assign.keys().cloned());
        for (x, px) in &self.assign {
            for (y, py) in &self.assign {
                if px < py {
                    p.insert("L", vec![x.clone(), y.clone()])?;
                }
            }
        }
        Ok(p)
    }

    /// `L` plus `Z` marking the points of the selected block.
    pub fn decorate(&self, block: usize) -> Result<Pattern, ZlineError> {
        let base = self.to_pattern()?;
        let lang = base.language().extend(&Language::new([("Z", 1)])?)?;
        let mut p = Pattern::new(self.group, lang, base.universe().iter().cloned());
        for t in base.tuples("L") {
            p.insert("L", t.clone())?;
        }
        for (x, pos) in &self.assign {
            if pos.block == block {
                p.insert("Z", vec![x.clone()])?;
            }
        }
        Ok(p)
    }

    pub fn to_json(&self) -> Value {
        let blocks: Vec<Value> = self
            .blocks
            .iter()
            .map(|b| {
                let mut v = match b.kind {
                    BlockKind::Z => json!({"kind": "z"}),
                    BlockKind::Dense => json!({"kind": "dense"}),
                    BlockKind::Fin(k) => json!({"kind": "fin", "size": k}),
                };
                if b.repeated {
                    v["repeated"] = json!(true);
                }
                v
            })
            .collect();
        let assign: Vec<Value> = self
            .assign
            .iter()
            .map(|(x, p)| json!([x.to_json(), p.block, p.copy, p.at.to_string()]))
            .collect();
        json!({"group": self.group.to_string(), "blocks": blocks, "assign": assign})
    }

    /// Reads `{"group", "blocks": [{"kind", "size"?, "repeated"?}], "assign": [[x, block, copy, "p/q"]]}`.
    pub fn from_json(v: &Value) -> Result<OrderSpec, ZlineError> {
        let bad = |m: &str| ZlineError::Malformed(m.into());
        let group: GroupModel = v["group"]
            .as_str()
            .ok_or_else(|| bad("missing group"))?
            .parse()
            .map_err(|_| bad("unknown group"))?;
        let mut blocks = Vec::new();
        for b in v["blocks"].as_array().ok_or_else(|| bad("missing blocks"))? {
            let kind = match b["kind"].as_str() {
                Some("z") => BlockKind::Z,
                Some("dense") => BlockKind::Dense,
                Some("fin") => BlockKind::Fin(b["size"].as_u64().ok_or_else(|| bad("fin block needs size"))? as usize),
                _ => return Err(bad("block kind must be z, dense or fin")),
            };
            blocks.push(Block { kind, repeated: b["repeated"].as_bool().unwrap_or(false) });
        }
        let mut spec = OrderSpec::new(group, blocks);
        spec.validate()?;
        for a in v["assign"].as_array().map(Vec::as_slice).unwrap_or(&[]) {
            let a = a.as_array().ok_or_else(|| bad("assignment must be an array"))?;
            if a.len() != 4 {
                return Err(bad("assignment is [x, block, copy, position]"));
            }
            let x = group.parse_element(&a[0])?;
            let block = a[1].as_u64().ok_or_else(|| bad("block index"))? as usize;
            let copy = a[2].as_i64().ok_or_else(|| bad("copy index"))?;
            let at: Rational64 = match &a[3] {
                Value::String(s) => s.parse().map_err(|_| bad("position"))?,
                other => Rational64::from_integer(other.as_i64().ok_or_else(|| bad("position"))?),
            };
            spec.place(x, block, copy, at)?;
        }
        Ok(spec)
    }
}

/// Picks the order-least ℤ-block of maximal frequency. `freqs` maps block
/// index to frequency and must cover every ℤ-block.
pub fn zline_select(spec: &OrderSpec, freqs: &BTreeMap<usize, f64>) -> Result<ZlineVerdict, ZlineError> {
    spec.validate()?;
    let zs: Vec<usize> = (0..spec.blocks.len()).filter(|i| spec.blocks[*i].kind == BlockKind::Z).collect();
    if zs.is_empty() {
        return Ok(ZlineVerdict::NotInX("no ℤ-interval"));
    }
    let mut best: Option<(f64, usize)> = None;
    let mut infinite_at_best = false;
    for &i in &zs {
        let f = *freqs.get(&i).ok_or(ZlineError::MissingFrequency(i))?;
        match best {
            Some((b, _)) if f < b => {}
            Some((b, _)) if f == b => infinite_at_best |= spec.blocks[i].repeated,
            _ => {
                best = Some((f, i));
                infinite_at_best = spec.blocks[i].repeated;
            }
        }
    }
    let (f, i) = best.expect("at least one ℤ-block");
    if f.is_nan() || f <= 0.0 {
        Ok(ZlineVerdict::NotInX("maximal frequency is zero"))
    } else if infinite_at_best {
        Ok(ZlineVerdict::NotInX("maximum attained infinitely often"))
    } else {
        Ok(ZlineVerdict::Selected(i))
    }
}
