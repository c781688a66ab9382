//! Shift-consistent window distributions on ℤ as linear programs.
//!
//! A random expansion of an invariant random structure on ℤ gives, for each
//! window `{0, …, n-1}`, a distribution on decorated patterns. Its left and
//! right `(n-1)`-marginals agree and its reduct is the base distribution.
//! These are linear constraints on the pattern weights; infeasibility at any
//! `n` rules out an invariant random expansion.

mod float;
mod simplex;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::patterns::ProblemSpec;

pub use simplex::solve_exact;

/// Above this many variables `build_lp` refuses.
pub const MAX_VARIABLES: usize = 2_000_000;

/// Dense exact simplex is used up to this many tableau cells.
const DENSE_LIMIT: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("window {n} needs {count} variables (limit {limit})")]
    TooLarge { n: usize, count: usize, limit: usize },
    #[error("window size {0} is out of range")]
    BadWindow(usize),
    #[error("{0:?} is not supported on ℤ-windows")]
    Unsupported(String),
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("certificate does not verify: {0}")]
    Verification(String),
}

/// The random structure on ℤ being expanded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaseSpec {
    /// No relations (for instance the empty partial order).
    Empty,
    /// Each point marked independently with probability `p`.
    IidMarks { p: BigRational },
    /// Each pair coloured `R` independently with probability `p`, else `S`.
    IidPairs { p: BigRational },
}

/// What is added on top of the base.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoration {
    /// `𝓛* = 𝓛`.
    Identity,
    /// A linear order `L` of the window.
    LinearOrder,
    /// A marked set `T`, homogeneous for the pair colouring.
    MarkedSet,
}

impl Decoration {
    pub fn for_problem(problem: &ProblemSpec) -> Result<Decoration, LpError> {
        match problem {
            ProblemSpec::Linearization => Ok(Decoration::LinearOrder),
            ProblemSpec::Ramsey => Ok(Decoration::MarkedSet),
            other => Err(LpError::Unsupported(format!("{other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HardConstraints {
    /// `T ∩ window` is nonempty.
    pub nonempty: bool,
    /// `P[0 ∈ T] ≥ δ`.
    pub min_density: Option<BigRational>,
    /// `T` is a largest homogeneous subset of the window.
    pub largest_only: bool,
}

/// A decorated pattern on `{0, …, n-1}`: base and decoration codes.
///
/// Pair colourings use bit `j(j-1)/2 + i` for the pair `i < j`, so the
/// left restriction keeps the low bits. Marks use bit `i`. A linear order
/// stores the rank of position `i` in bits `4i..4i+4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub base: u64,
    pub deco: u64,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}/{:x}", self.base, self.deco)
    }
}

fn pair_bit(i: usize, j: usize) -> usize {
    j * (j - 1) / 2 + i
}

fn pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn rank(code: u64, i: usize) -> u64 {
    (code >> (4 * i)) & 0xf
}

/// Relative order of the ranks at `positions`.
fn restrict_order(code: u64, positions: impl Iterator<Item = usize> + Clone) -> u64 {
    let mut out = 0;
    for (k, i) in positions.clone().enumerate() {
        let r = rank(code, i);
        let below = positions.clone().filter(|j| rank(code, *j) < r).count() as u64;
        out |= below << (4 * k);
    }
    out
}

fn permutations(n: usize) -> Vec<u64> {
    fn go(n: usize, used: u32, k: usize, code: u64, out: &mut Vec<u64>) {
        if k == n {
            out.push(code);
            return;
        }
        for r in 0..n {
            if used & (1 << r) == 0 {
                go(n, used | (1 << r), k + 1, code | ((r as u64) << (4 * k)), out);
            }
        }
    }
    let mut out = Vec::new();
    go(n, 0, 0, 0, &mut out);
    out
}

/// Enumeration and restriction of decorated patterns for one window size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowModel {
    pub n: usize,
    pub base: BaseSpec,
    pub decoration: Decoration,
    /// `(source, target)` bits carrying pair `(i, j)` to `(i-1, j-1)`.
    right_pairs: Vec<(usize, usize)>,
}

impl WindowModel {
    pub fn new(n: usize, base: BaseSpec, decoration: Decoration) -> Result<WindowModel, LpError> {
        if n == 0 || n > 15 || (matches!(base, BaseSpec::IidPairs { .. }) && n > 11) {
            return Err(LpError::BadWindow(n));
        }
        match &base {
            BaseSpec::IidMarks { p } | BaseSpec::IidPairs { p } if p.is_negative() || *p > BigRational::one() => {
                return Err(LpError::BadProbability(p.to_string()));
            }
            _ => {}
        }
        if decoration == Decoration::LinearOrder && base != BaseSpec::Empty {
            return Err(LpError::Unsupported("linear orders over a nonempty base".into()));
        }
        if decoration == Decoration::MarkedSet && matches!(base, BaseSpec::IidMarks { .. }) {
            return Err(LpError::Unsupported("marked sets over marked bases".into()));
        }
        let mut right_pairs = Vec::new();
        for j in 2..n {
            for i in 1..j {
                right_pairs.push((pair_bit(i, j), pair_bit(i - 1, j - 1)));
            }
        }
        Ok(WindowModel { n, base, decoration, right_pairs })
    }

    /// The same model one window smaller.
    pub fn shrink(&self) -> Option<WindowModel> {
        (self.n > 1).then(|| WindowModel::new(self.n - 1, self.base.clone(), self.decoration).expect("smaller window"))
    }

    fn base_bits(&self) -> usize {
        match self.base {
            BaseSpec::Empty => 0,
            BaseSpec::IidMarks { .. } => self.n,
            BaseSpec::IidPairs { .. } => pairs(self.n),
        }
    }

    /// Base patterns with their probabilities, in code order.
    pub fn base_patterns(&self) -> Vec<(u64, BigRational)> {
        let bits = self.base_bits();
        let p = match &self.base {
            BaseSpec::Empty => return vec![(0, BigRational::one())],
            BaseSpec::IidMarks { p } | BaseSpec::IidPairs { p } => p.clone(),
        };
        let q = BigRational::one() - &p;
        let powers = |x: &BigRational| {
            let mut v = vec![BigRational::one()];
            for k in 0..bits {
                let next = &v[k] * x;
                v.push(next);
            }
            v
        };
        let (pp, qq) = (powers(&p), powers(&q));
        (0..1u64 << bits)
            .map(|b| {
                let ones = b.count_ones() as usize;
                (b, &pp[ones] * &qq[bits - ones])
            })
            .filter(|(_, w)| !w.is_zero())
            .collect()
    }

    /// Mask of the pair bits inside the point set `t`.
    fn pair_mask(&self, t: u64) -> u64 {
        let mut m = 0;
        for j in 1..self.n {
            for i in 0..j {
                if t >> i & 1 == 1 && t >> j & 1 == 1 {
                    m |= 1 << pair_bit(i, j);
                }
            }
        }
        m
    }

    pub fn is_homogeneous(&self, base: u64, t: u64) -> bool {
        let m = self.pair_mask(t);
        base & m == 0 || base & m == m
    }

    /// Decorations of `base` allowed by the hard constraints.
    pub fn decorations(&self, base: u64, hard: &HardConstraints) -> Vec<u64> {
        match self.decoration {
            Decoration::Identity => vec![0],
            Decoration::LinearOrder => permutations(self.n),
            Decoration::MarkedSet => {
                let mut ts: Vec<u64> = (0..1u64 << self.n)
                    .filter(|t| !(hard.nonempty && *t == 0))
                    .filter(|t| !matches!(self.base, BaseSpec::IidPairs { .. }) || self.is_homogeneous(base, *t))
                    .collect();
                if hard.largest_only {
                    let best = ts.iter().map(|t| t.count_ones()).max().unwrap_or(0);
                    ts.retain(|t| t.count_ones() == best);
                }
                ts
            }
        }
    }

    /// Size of a largest homogeneous subset of the window.
    pub fn max_homogeneous(&self, base: u64) -> u32 {
        (0..1u64 << self.n).filter(|t| self.is_homogeneous(base, *t)).map(u64::count_ones).max().unwrap_or(0)
    }

    /// Restriction to `{0, …, n-2}`.
    pub fn left(&self, c: Cell) -> Cell {
        let n = self.n;
        let base = match self.base {
            BaseSpec::Empty => 0,
            BaseSpec::IidMarks { .. } => c.base & ((1 << (n - 1)) - 1),
            BaseSpec::IidPairs { .. } => c.base & ((1 << pairs(n - 1)) - 1),
        };
        let deco = match self.decoration {
            Decoration::Identity => 0,
            Decoration::MarkedSet => c.deco & ((1 << (n - 1)) - 1),
            Decoration::LinearOrder => restrict_order(c.deco, 0..n - 1),
        };
        Cell { base, deco }
    }

    /// Restriction to `{1, …, n-1}`, shifted down by one.
    pub fn right(&self, c: Cell) -> Cell {
        let n = self.n;
        let base = match self.base {
            BaseSpec::Empty => 0,
            BaseSpec::IidMarks { .. } => c.base >> 1,
            BaseSpec::IidPairs { .. } => {
                self.right_pairs.iter().fold(0, |acc, (s, t)| acc | ((c.base >> s) & 1) << t)
            }
        };
        let deco = match self.decoration {
            Decoration::Identity => 0,
            Decoration::MarkedSet => c.deco >> 1,
            Decoration::LinearOrder => restrict_order(c.deco, 1..n),
        };
        Cell { base, deco }
    }

    /// `0 ∈ T` (or `0` marked, for the identity decoration of marks).
    pub fn marks_origin(&self, c: Cell) -> bool {
        match (self.decoration, &self.base) {
            (Decoration::MarkedSet, _) => c.deco & 1 == 1,
            (Decoration::Identity, BaseSpec::IidMarks { .. }) => c.base & 1 == 1,
            _ => false,
        }
    }

    /// All allowed decorated patterns, sorted.
    pub fn cells(&self, hard: &HardConstraints) -> Result<Vec<Cell>, LpError> {
        let bases = self.base_patterns();
        let count: usize = bases.iter().map(|(b, _)| self.decorations(*b, hard).len()).sum();
        if count > MAX_VARIABLES {
            return Err(LpError::TooLarge { n: self.n, count, limit: MAX_VARIABLES });
        }
        let mut out = Vec::with_capacity(count);
        for (b, _) in bases {
            out.extend(self.decorations(b, hard).into_iter().map(|deco| Cell { base: b, deco }));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Ge,
    Le,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RowKind {
    /// Left marginal minus right marginal at an `(n-1)`-pattern.
    Shift(Cell),
    /// Reduct marginal at a base pattern.
    Reduct(u64),
    Normalization,
    /// `P[0 ∈ T] ≥ δ`.
    Density,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub kind: RowKind,
    pub sense: Sense,
    pub rhs: BigRational,
}

/// `A x (sense) b`, `x ≥ 0`, optionally maximizing `c·x`. Coefficients are
/// small integers, stored column by column.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub model: WindowModel,
    pub hard: HardConstraints,
    pub columns: Vec<Cell>,
    pub rows: Vec<Row>,
    col_start: Vec<usize>,
    entries: Vec<(u32, i8)>,
    /// Objective coefficients to maximize; empty for a feasibility problem.
    pub objective: Vec<i8>,
}

impl LpProblem {
    pub fn column(&self, j: usize) -> &[(u32, i8)] {
        &self.entries[self.col_start[j]..self.col_start[j + 1]]
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn objective_coeff(&self, j: usize) -> i64 {
        self.objective.get(j).copied().unwrap_or(0) as i64
    }

    /// Builds the LP from explicit rows and integer columns.
    pub fn from_parts(
        model: WindowModel,
        hard: HardConstraints,
        columns: Vec<Cell>,
        rows: Vec<Row>,
        column_entries: Vec<Vec<(u32, i8)>>,
        objective: Vec<i8>,
    ) -> LpProblem {
        let mut col_start = vec![0];
        let mut entries = Vec::new();
        for col in column_entries {
            entries.extend(col);
            col_start.push(entries.len());
        }
        LpProblem { model, hard, columns, rows, col_start, entries, objective }
    }

    pub fn summary(&self) -> Value {
        json!({
            "window": self.model.n,
            "variables": self.num_cols(),
            "constraints": self.num_rows(),
            "nonzeros": self.entries.len(),
        })
    }
}

/// The LP whose feasible points are the shift-consistent distributions on
/// decorated `n`-patterns with the given base marginal, within `hard`.
pub fn build_lp(model: &WindowModel, hard: &HardConstraints, maximize_density: bool) -> Result<LpProblem, LpError> {
    let columns = model.cells(hard)?;
    let bases = model.base_patterns();
    let mut rows = Vec::new();
    let mut shift_row: HashMap<Cell, u32> = HashMap::new();
    if let Some(small) = model.shrink() {
        for c in small.cells(&HardConstraints::default())? {
            shift_row.insert(c, rows.len() as u32);
            rows.push(Row { kind: RowKind::Shift(c), sense: Sense::Eq, rhs: BigRational::zero() });
        }
    }
    let mut reduct_row: HashMap<u64, u32> = HashMap::new();
    for (b, w) in &bases {
        reduct_row.insert(*b, rows.len() as u32);
        rows.push(Row { kind: RowKind::Reduct(*b), sense: Sense::Eq, rhs: w.clone() });
    }
    let norm = rows.len() as u32;
    rows.push(Row { kind: RowKind::Normalization, sense: Sense::Eq, rhs: BigRational::one() });
    let density = hard.min_density.as_ref().map(|d| {
        rows.push(Row { kind: RowKind::Density, sense: Sense::Ge, rhs: d.clone() });
        rows.len() as u32 - 1
    });

    let mut column_entries = Vec::with_capacity(columns.len());
    for &c in &columns {
        let mut col: Vec<(u32, i8)> = Vec::with_capacity(5);
        if model.n > 1 {
            let (l, r) = (model.left(c), model.right(c));
            if l != r {
                col.push((shift_row[&l], 1));
                col.push((shift_row[&r], -1));
            }
        }
        col.push((reduct_row[&c.base], 1));
        col.push((norm, 1));
        if let Some(d) = density {
            if model.marks_origin(c) {
                col.push((d, 1));
            }
        }
        col.sort();
        column_entries.push(col);
    }
    let objective =
        if maximize_density { columns.iter().map(|c| model.marks_origin(*c) as i8).collect() } else { Vec::new() };
    Ok(LpProblem::from_parts(model.clone(), hard.clone(), columns, rows, column_entries, objective))
}

/// Outcome of a solve, re-verifiable in exact arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// A feasible point, as `(column, weight)` for the nonzero weights.
    Feasible { x: Vec<(usize, BigRational)> },
    /// A feasible point and a dual point with equal objective values.
    Optimal { x: Vec<(usize, BigRational)>, y: Vec<BigRational>, value: BigRational },
    /// `y` with `yᵀA ≤ 0` on every column and `yᵀb > 0`, signed as the rows
    /// require (`y ≥ 0` on `≥` rows, `y ≤ 0` on `≤` rows).
    Infeasible { y: Vec<BigRational> },
}

impl Certificate {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, Certificate::Infeasible { .. })
    }

    pub fn value(&self) -> Option<&BigRational> {
        match self {
            Certificate::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn to_json(&self, lp: &LpProblem) -> Value {
        let xs = |x: &[(usize, BigRational)]| {
            x.iter().map(|(j, w)| json!([lp.columns[*j].to_string(), w.to_string()])).collect::<Vec<_>>()
        };
        let ys = |y: &[BigRational]| {
            y.iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(i, v)| json!([row_label(&lp.rows[i].kind), v.to_string()]))
                .collect::<Vec<_>>()
        };
        match self {
            Certificate::Feasible { x } => json!({ "kind": "feasible", "x": xs(x) }),
            Certificate::Optimal { x, y, value } => {
                json!({ "kind": "optimal", "value": value.to_string(), "x": xs(x), "y": ys(y) })
            }
            Certificate::Infeasible { y } => json!({ "kind": "infeasible", "y": ys(y) }),
        }
    }
}

fn row_label(kind: &RowKind) -> String {
    match kind {
        RowKind::Shift(c) => format!("shift:{c}"),
        RowKind::Reduct(b) => format!("reduct:{b:x}"),
        RowKind::Normalization => "sum".into(),
        RowKind::Density => "density".into(),
    }
}

fn sense_ok(s: Sense, lhs: &BigRational, rhs: &BigRational) -> bool {
    match s {
        Sense::Eq => lhs == rhs,
        Sense::Ge => lhs >= rhs,
        Sense::Le => lhs <= rhs,
    }
}

fn check_primal(lp: &LpProblem, x: &[(usize, BigRational)]) -> Result<BigRational, LpError> {
    let mut ax = vec![BigRational::zero(); lp.num_rows()];
    let mut obj = BigRational::zero();
    for (j, w) in x {
        if w.is_negative() || *j >= lp.num_cols() {
            return Err(LpError::Verification(format!("bad weight at column {j}")));
        }
        for (i, a) in lp.column(*j) {
            ax[*i as usize] += w * BigRational::from_integer(BigInt::from(*a));
        }
        obj += w * BigRational::from_integer(BigInt::from(lp.objective_coeff(*j)));
    }
    for (i, row) in lp.rows.iter().enumerate() {
        if !sense_ok(row.sense, &ax[i], &row.rhs) {
            return Err(LpError::Verification(format!("row {} has {} against {}", row_label(&row.kind), ax[i], row.rhs)));
        }
    }
    Ok(obj)
}

fn check_signs(lp: &LpProblem, y: &[BigRational], flip: bool) -> Result<(), LpError> {
    if y.len() != lp.num_rows() {
        return Err(LpError::Verification("dual vector has the wrong length".into()));
    }
    for (row, v) in lp.rows.iter().zip(y) {
        let v = if flip { -v } else { v.clone() };
        let bad = match row.sense {
            Sense::Eq => false,
            Sense::Ge => v.is_negative(),
            Sense::Le => v.is_positive(),
        };
        if bad {
            return Err(LpError::Verification(format!("multiplier on {} has the wrong sign", row_label(&row.kind))));
        }
    }
    Ok(())
}

/// `yᵀA_j` for every column, using a common denominator.
fn dual_products(lp: &LpProblem, y: &[BigRational]) -> (Vec<BigInt>, BigInt) {
    let den = y.iter().fold(BigInt::one(), |acc, v| num_integer::lcm(acc, v.denom().clone()));
    let nums: Vec<BigInt> = y.iter().map(|v| v.numer() * (&den / v.denom())).collect();
    let prods = (0..lp.num_cols())
        .map(|j| lp.column(j).iter().fold(BigInt::zero(), |acc, (i, a)| acc + &nums[*i as usize] * BigInt::from(*a)))
        .collect();
    (prods, den)
}

fn dual_objective(lp: &LpProblem, y: &[BigRational]) -> BigRational {
    lp.rows.iter().zip(y).map(|(r, v)| &r.rhs * v).fold(BigRational::zero(), |a, b| a + b)
}

/// Re-checks a certificate against `lp` in exact arithmetic.
pub fn verify(lp: &LpProblem, cert: &Certificate) -> Result<(), LpError> {
    match cert {
        Certificate::Feasible { x } => check_primal(lp, x).map(|_| ()),
        Certificate::Optimal { x, y, value } => {
            let obj = check_primal(lp, x)?;
            // max c·x ≤ min b·y over y ≤ 0 on ≥ rows, y ≥ 0 on ≤ rows, Aᵀy ≥ c.
            check_signs(lp, y, true)?;
            let (prods, den) = dual_products(lp, y);
            for (j, p) in prods.iter().enumerate() {
                if *p < BigInt::from(lp.objective_coeff(j)) * &den {
                    return Err(LpError::Verification(format!("dual constraint fails at {}", lp.columns[j])));
                }
            }
            let dual = dual_objective(lp, y);
            if obj != *value || dual != *value {
                return Err(LpError::Verification(format!("primal {obj}, dual {dual}, claimed {value}")));
            }
            Ok(())
        }
        Certificate::Infeasible { y } => {
            check_signs(lp, y, false)?;
            let (prods, _) = dual_products(lp, y);
            if let Some(j) = prods.iter().position(|p| p.is_positive()) {
                return Err(LpError::Verification(format!("yᵀA > 0 at {}", lp.columns[j])));
            }
            let yb = dual_objective(lp, y);
            if !yb.is_positive() {
                return Err(LpError::Verification(format!("yᵀb = {yb} is not positive")));
            }
            Ok(())
        }
    }
}

/// Solves `lp` and verifies the answer. Small problems use the exact dense
/// simplex; larger ones are solved in floating point and the answer is
/// rounded to rationals, then checked exactly.
pub fn solve(lp: &LpProblem) -> Result<Certificate, LpError> {
    let cert = if lp.num_rows() * (lp.num_cols() + 2 * lp.num_rows()) <= DENSE_LIMIT {
        solve_exact(lp)?
    } else {
        float::solve_guided(lp)?
    };
    verify(lp, &cert)?;
    Ok(cert)
}

/// Carries an infeasibility certificate for window `n - 1` to window `n`.
///
/// Each row of the smaller LP, read on the left `(n-1)`-marginal, is a sum
/// of rows of the larger one, so `y` spreads over those rows unchanged. The
/// result certifies the larger LP when every allowed `n`-pattern restricts
/// to an allowed `(n-1)`-pattern.
pub fn lift_farkas(small: &LpProblem, y: &[BigRational], large: &LpProblem) -> Result<Vec<BigRational>, LpError> {
    if large.model.n != small.model.n + 1 {
        return Err(LpError::Verification("lifting goes up one window at a time".into()));
    }
    let index: HashMap<&RowKind, usize> = small.rows.iter().enumerate().map(|(i, r)| (&r.kind, i)).collect();
    let small_model = &small.model;
    let mut out = Vec::with_capacity(large.num_rows());
    for row in &large.rows {
        let key = match &row.kind {
            RowKind::Shift(c) => small_model.shrink().map(|_| RowKind::Shift(small_model.left(*c))),
            RowKind::Reduct(b) => Some(RowKind::Reduct(large.model.left(Cell { base: *b, deco: 0 }).base)),
            other => Some(other.clone()),
        };
        out.push(key.and_then(|k| index.get(&k)).map_or_else(BigRational::zero, |i| y[*i].clone()));
    }
    Ok(out)
}

/// Infeasibility of `P[0 ∈ T] ≥ δ` for homogeneous marked sets on
/// `n`-windows, with `T` nonempty on every window when `nonempty` is set.
///
/// The smallest window where the LP without the nonempty rule is
/// infeasible is solved exactly and its Farkas vector is lifted one window
/// at a time. The nonempty rule only removes columns, so the lifted vector
/// is checked against the final LP with it.
pub fn density_obstruction(
    p: &BigRational,
    delta: &BigRational,
    n: usize,
    nonempty: bool,
) -> Result<(LpProblem, Certificate), LpError> {
    let loose = HardConstraints { min_density: Some(delta.clone()), ..HardConstraints::default() };
    let mut found: Option<(LpProblem, Vec<BigRational>)> = None;
    for k in 1..=n {
        let model = WindowModel::new(k, BaseSpec::IidPairs { p: p.clone() }, Decoration::MarkedSet)?;
        let last = k == n;
        let hard = if last { HardConstraints { nonempty, ..loose.clone() } } else { loose.clone() };
        let lp = build_lp(&model, &hard, false)?;
        found = match found {
            Some((small, y)) => {
                let y = lift_farkas(&small, &y, &lp)?;
                Some((lp, y))
            }
            None if last => match solve(&lp)? {
                Certificate::Infeasible { y } => Some((lp, y)),
                _ => return Err(LpError::Verification(format!("feasible at window {k}"))),
            },
            None => match solve(&lp)? {
                Certificate::Infeasible { y } => Some((lp, y)),
                _ => None,
            },
        };
    }
    let (lp, y) = found.ok_or(LpError::BadWindow(n))?;
    let cert = Certificate::Infeasible { y };
    verify(&lp, &cert)?;
    Ok((lp, cert))
}

/// A distribution on decorated `n`-patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternDistribution {
    pub model: WindowModel,
    pub weights: BTreeMap<Cell, BigRational>,
}

impl PatternDistribution {
    pub fn from_certificate(lp: &LpProblem, cert: &Certificate) -> Option<PatternDistribution> {
        let x = match cert {
            Certificate::Feasible { x } | Certificate::Optimal { x, .. } => x,
            Certificate::Infeasible { .. } => return None,
        };
        Some(PatternDistribution {
            model: lp.model.clone(),
            weights: x.iter().map(|(j, w)| (lp.columns[*j], w.clone())).collect(),
        })
    }

    /// Uniform over the linear orders of each window, over the empty base.
    pub fn uniform_orders(n: usize) -> PatternDistribution {
        let model = WindowModel::new(n, BaseSpec::Empty, Decoration::LinearOrder).expect("window");
        let perms = permutations(n);
        let w = BigRational::new(BigInt::one(), BigInt::from(perms.len()));
        PatternDistribution { model, weights: perms.into_iter().map(|d| (Cell { base: 0, deco: d }, w.clone())).collect() }
    }

    /// The base distribution with the identity decoration.
    pub fn base_only(n: usize, base: BaseSpec) -> PatternDistribution {
        let model = WindowModel::new(n, base, Decoration::Identity).expect("window");
        let weights = model.base_patterns().into_iter().map(|(b, w)| (Cell { base: b, deco: 0 }, w)).collect();
        PatternDistribution { model, weights }
    }

    fn marginal(&self, f: impl Fn(Cell) -> Cell) -> BTreeMap<Cell, BigRational> {
        let mut m: BTreeMap<Cell, BigRational> = BTreeMap::new();
        for (c, w) in &self.weights {
            *m.entry(f(*c)).or_insert_with(BigRational::zero) += w;
        }
        m.retain(|_, w| !w.is_zero());
        m
    }

    pub fn left_marginal(&self) -> BTreeMap<Cell, BigRational> {
        self.marginal(|c| self.model.left(c))
    }

    pub fn right_marginal(&self) -> BTreeMap<Cell, BigRational> {
        self.marginal(|c| self.model.right(c))
    }

    /// Weights are nonnegative and sum to one, the two marginals agree, and
    /// the reduct is the base distribution.
    pub fn check(&self) -> Result<(), String> {
        if self.weights.values().any(|w| w.is_negative()) {
            return Err("negative weight".into());
        }
        let total = self.weights.values().fold(BigRational::zero(), |a, b| a + b);
        if !total.is_one() {
            return Err(format!("weights sum to {total}"));
        }
        if self.model.n > 1 && self.left_marginal() != self.right_marginal() {
            return Err("left and right marginals differ".into());
        }
        let reduct = self.marginal(|c| Cell { base: c.base, deco: 0 });
        let base: BTreeMap<Cell, BigRational> =
            self.model.base_patterns().into_iter().map(|(b, w)| (Cell { base: b, deco: 0 }, w)).collect();
        if reduct != base {
            return Err("reduct differs from the base distribution".into());
        }
        Ok(())
    }

    /// As a feasible-point certificate for `lp`.
    pub fn to_certificate(&self, lp: &LpProblem) -> Option<Certificate> {
        let index: HashMap<Cell, usize> = lp.columns.iter().enumerate().map(|(j, c)| (*c, j)).collect();
        let x = self
            .weights
            .iter()
            .filter(|(_, w)| !w.is_zero())
            .map(|(c, w)| index.get(c).map(|j| (*j, w.clone())))
            .collect::<Option<Vec<_>>>()?;
        Some(Certificate::Feasible { x })
    }
}

/// `δ*(n)`: the largest `P[0 ∈ T]` over shift-consistent distributions of
/// homogeneous marked sets on `n`-windows of an iid pair colouring.
#[derive(Debug, Clone)]
pub struct DensityResult {
    pub n: usize,
    pub delta: BigRational,
    pub lp: LpProblem,
    pub certificate: Certificate,
}

impl DensityResult {
    pub fn to_json(&self) -> Value {
        json!({
            "window": self.n,
            "delta_star": self.delta.to_string(),
            "delta_star_float": ratio_f64(&self.delta),
            "lp": self.lp.summary(),
        })
    }
}

pub fn ratio_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Computes `δ*(n)` with an exact optimality certificate.
///
/// Every column has `|T| ≤ m(b)`, the largest homogeneous size for its
/// colouring `b`, so `n·P[0 ∈ T] = E|T| ≤ E[m]` and `δ*(n) ≤ E[m]/n`. This
/// bound is tried first: a feasible point supported on largest sets attains
/// it, and [`clique_dual`] certifies it. Otherwise the full LP is solved.
pub fn max_marked_density(p: &BigRational, n: usize) -> Result<DensityResult, LpError> {
    let model = WindowModel::new(n, BaseSpec::IidPairs { p: p.clone() }, Decoration::MarkedSet)?;
    let lp = build_lp(&model, &HardConstraints::default(), true)?;
    let tight = HardConstraints { largest_only: true, ..HardConstraints::default() };
    let narrow = build_lp(&model, &tight, false)?;
    let guess = match solve(&narrow) {
        Ok(Certificate::Feasible { x }) => {
            let index: HashMap<Cell, usize> = lp.columns.iter().enumerate().map(|(j, c)| (*c, j)).collect();
            let x: Vec<(usize, BigRational)> = x.into_iter().map(|(j, w)| (index[&narrow.columns[j]], w)).collect();
            let value = x
                .iter()
                .filter(|(j, _)| lp.objective[*j] == 1)
                .fold(BigRational::zero(), |acc, (_, w)| acc + w);
            Some(Certificate::Optimal { x, y: clique_dual(&lp), value })
        }
        _ => None,
    };
    let certificate = match guess {
        Some(c) if verify(&lp, &c).is_ok() => c,
        _ => solve(&lp)?,
    };
    let delta = certificate.value().cloned().ok_or_else(|| LpError::Solver("no optimum".into()))?;
    Ok(DensityResult { n, delta, lp, certificate })
}

/// The dual point behind `δ*(n) ≤ E[m]/n`: weight `m(b)/n` on each reduct
/// row and `h(q) = Σ_i (n-1-i)/n · 1(i ∈ T_q)` on each shift row, so that
/// `yᵀA_x = 1(0 ∈ T) + (m(b) - |T|)/n` on every column.
pub fn clique_dual(lp: &LpProblem) -> Vec<BigRational> {
    let n = lp.model.n as i64;
    let over_n = |k: i64| BigRational::new(BigInt::from(k), BigInt::from(n));
    lp.rows
        .iter()
        .map(|row| match &row.kind {
            RowKind::Reduct(b) => over_n(lp.model.max_homogeneous(*b) as i64),
            RowKind::Shift(q) => (0..n - 1).filter(|i| q.deco >> i & 1 == 1).map(|i| over_n(n - 1 - i)).sum(),
            _ => BigRational::zero(),
        })
        .collect()
}

/// `E[largest homogeneous subset of K_n]` under iid pair colours with
/// `P[R] = p`, by enumerating every colouring and every subset.
pub fn expected_max_homogeneous(p: &BigRational, n: usize) -> Result<BigRational, LpError> {
    let model = WindowModel::new(n, BaseSpec::IidPairs { p: p.clone() }, Decoration::MarkedSet)?;
    let masks: Vec<(u32, u64)> = (0..1u64 << n).map(|t| (t.count_ones(), model.pair_mask(t))).collect();
    let mut total = BigRational::zero();
    for (b, w) in model.base_patterns() {
        let best = masks.iter().filter(|(_, m)| b & m == 0 || b & m == *m).map(|(k, _)| *k).max().unwrap_or(0);
        total += w * BigRational::from_integer(BigInt::from(best));
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
