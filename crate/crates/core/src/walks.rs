//! Random walks, frequency estimates, visit profiles and mass transport.
//!
//! Walk `k` of a run with seed `s` draws from ChaCha8 seeded with `s` on
//! stream `k`, so any walk can be replayed alone and parallel runs reduce in
//! index order to the same bits as serial ones.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::groups::{Element, GroupModel};

const TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("step {0} is not an element of the group")]
    Foreign(String),
    #[error("negative or non-finite probability at {0}")]
    BadProbability(String),
    #[error("step distribution is not symmetric: mu({g}) = {p} but mu({inv}) = {q}")]
    Asymmetric { g: String, inv: String, p: f64, q: f64 },
    #[error("step probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("support of the step distribution does not generate the group (checked up to radius {0})")]
    NotGenerating(usize),
    #[error("start element {0} is not in the group")]
    BadStart(String),
    #[error("cannot parse target '{0}'")]
    BadTarget(String),
}

/// A finitely supported symmetric step distribution, a walk length, a seed
/// and a start point.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub group: GroupModel,
    /// `μ` off the identity. Each step appears once.
    pub steps: Vec<(Element, f64)>,
    /// Probability of staying put.
    pub hold: f64,
    pub length: usize,
    pub seed: u64,
    pub start: Element,
}

impl WalkConfig {
    /// The simple random walk: uniform on the standard generators.
    pub fn simple(group: GroupModel, length: usize, seed: u64) -> WalkConfig {
        let gens = group.generators();
        let p = 1.0 / gens.len() as f64;
        WalkConfig {
            group,
            steps: gens.into_iter().map(|g| (g, p)).collect(),
            hold: 0.0,
            length,
            seed,
            start: group.identity(),
        }
    }

    /// Holds with probability `hold`, otherwise steps as before.
    pub fn lazy(mut self, hold: f64) -> WalkConfig {
        for (_, p) in &mut self.steps {
            *p *= 1.0 - hold;
        }
        self.hold = hold + (1.0 - hold) * self.hold;
        self
    }

    pub fn validate(&self) -> Result<(), WalkError> {
        if !self.group.contains(&self.start) {
            return Err(WalkError::BadStart(self.start.to_string()));
        }
        let mut mu: BTreeMap<&Element, f64> = BTreeMap::new();
        for (g, p) in &self.steps {
            if !self.group.contains(g) {
                return Err(WalkError::Foreign(g.to_string()));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(WalkError::BadProbability(g.to_string()));
            }
            *mu.entry(g).or_default() += p;
        }
        if !self.hold.is_finite() || self.hold < 0.0 {
            return Err(WalkError::BadProbability(self.group.identity().to_string()));
        }
        for (g, p) in &mu {
            let inv = g.inverse();
            let q = mu.get(&inv).copied().unwrap_or(0.0);
            if (p - q).abs() > TOL {
                return Err(WalkError::Asymmetric { g: g.to_string(), inv: inv.to_string(), p: *p, q });
            }
        }
        let total = self.hold + mu.values().sum::<f64>();
        if (total - 1.0).abs() > TOL {
            return Err(WalkError::NotNormalized(total));
        }
        let support: Vec<Element> =
            mu.iter().filter(|(g, p)| **p > 0.0 && !g.is_identity()).map(|(g, _)| (*g).clone()).collect();
        generates(self.group, &support)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "group": self.group.to_string(),
            "steps": self.steps.iter().map(|(g, p)| json!([g.to_json(), p])).collect::<Vec<_>>(),
            "hold": self.hold,
            "length": self.length,
            "seed": self.seed,
            "rng": "ChaCha8",
            "start": self.start.to_json(),
        })
    }

    fn sampler(&self) -> (Vec<Element>, WeightedIndex<f64>) {
        let mut moves: Vec<Element> = self.steps.iter().map(|(g, _)| g.clone()).collect();
        let mut weights: Vec<f64> = self.steps.iter().map(|(_, p)| *p).collect();
        moves.push(self.group.identity());
        weights.push(self.hold.max(0.0));
        (moves, WeightedIndex::new(weights).expect("validated weights"))
    }
}

/// Exact for `Z` (gcd of the support); elsewhere a breadth-first search for
/// the standard generators inside a ball of radius four times the longest
/// step.
fn generates(group: GroupModel, support: &[Element]) -> Result<(), WalkError> {
    if let GroupModel::Z = group {
        let g = support.iter().filter_map(Element::as_int).fold(0i64, |a, b| num_integer::gcd(a, b));
        return if g == 1 { Ok(()) } else { Err(WalkError::NotGenerating(0)) };
    }
    let radius = 4 * support.iter().map(Element::length).max().unwrap_or(0);
    let mut seen = BTreeSet::from([group.identity()]);
    let mut queue = VecDeque::from([group.identity()]);
    while let Some(x) = queue.pop_front() {
        for s in support {
            let y = x.mul(s);
            if y.length() <= radius && seen.insert(y.clone()) {
                queue.push_back(y);
            }
        }
    }
    if group.generators().iter().all(|g| seen.contains(g)) {
        Ok(())
    } else {
        Err(WalkError::NotGenerating(radius))
    }
}

/// `Z_i` for `i` in `offset .. offset + points.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkPath {
    pub offset: i64,
    pub points: Vec<Element>,
}

impl WalkPath {
    pub fn get(&self, i: i64) -> Option<&Element> {
        usize::try_from(i - self.offset).ok().and_then(|k| self.points.get(k))
    }

    /// Steps `Z_i⁻¹ Z_{i+1}`.
    pub fn increments(&self) -> impl Iterator<Item = Element> + '_ {
        self.points.windows(2).map(|w| w[0].inverse().mul(&w[1]))
    }

    /// The shifted path `S^i Z`, re-indexed from 0.
    pub fn shift(&self, i: i64) -> WalkPath {
        WalkPath { offset: self.offset - i, points: self.points.clone() }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Steps {
    moves: Vec<Element>,
    dist: WeightedIndex<f64>,
    rng: ChaCha8Rng,
    at: Element,
    left: usize,
}

impl Iterator for Steps {
    type Item = Element;
    fn next(&mut self) -> Option<Element> {
        if self.left == 0 {
            return None;
        }
        self.left -= 1;
        let out = self.at.clone();
        let s = &self.moves[self.dist.sample(&mut self.rng)];
        self.at = self.at.mul(s);
        Some(out)
    }
}

fn steps(cfg: &WalkConfig, stream: u64) -> Steps {
    let (moves, dist) = cfg.sampler();
    Steps { moves, dist, rng: rng_for(cfg.seed, stream), at: cfg.start.clone(), left: cfg.length }
}

/// `Z_0, …, Z_{n-1}` of walk 0.
pub fn sample_walk(cfg: &WalkConfig) -> Result<WalkPath, WalkError> {
    sample_walk_indexed(cfg, 0)
}

/// `Z_0, …, Z_{n-1}` of walk `index`.
pub fn sample_walk_indexed(cfg: &WalkConfig, index: u64) -> Result<WalkPath, WalkError> {
    cfg.validate()?;
    Ok(WalkPath { offset: 0, points: steps(cfg, index).collect() })
}

/// `Z_{-n}, …, Z_n`: two independent one-sided walks glued at the start.
pub fn sample_two_sided(cfg: &WalkConfig, index: u64) -> Result<WalkPath, WalkError> {
    cfg.validate()?;
    let n = cfg.length;
    let long = WalkConfig { length: n + 1, ..cfg.clone() };
    let fwd: Vec<Element> = steps(&long, 2 * index).collect();
    let mut back: Vec<Element> = steps(&long, 2 * index + 1).collect();
    back.reverse();
    back.pop();
    back.extend(fwd);
    Ok(WalkPath { offset: -(n as i64), points: back })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyEstimate {
    pub estimate: f64,
    pub se: f64,
    pub walks: usize,
    pub steps: usize,
    pub seed: u64,
}

impl FrequencyEstimate {
    /// Within three standard errors of `r`.
    pub fn agrees_with(&self, r: f64) -> bool {
        (self.estimate - r).abs() <= 3.0 * self.se
    }

    pub fn to_json(&self) -> Value {
        json!({ "estimate": self.estimate, "se": self.se, "walks": self.walks, "steps": self.steps, "seed": self.seed })
    }
}

/// Grand mean over `walks` walks of `(1/n) Σ 1(Z_i ∈ W)`, with the standard
/// error of the per-walk means.
pub fn freq_estimate<W>(w: W, cfg: &WalkConfig, walks: usize) -> Result<FrequencyEstimate, WalkError>
where
    W: Fn(&Element) -> bool + Sync,
{
    cfg.validate()?;
    let n = cfg.length.max(1) as f64;
    let means: Vec<f64> = (0..walks as u64)
        .into_par_iter()
        .map(|k| steps(cfg, k).filter(|z| w(z)).count() as f64 / n)
        .collect();
    let (estimate, se) = mean_se(&means);
    Ok(FrequencyEstimate { estimate, se, walks, steps: cfg.length, seed: cfg.seed })
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, (var / xs.len() as f64).sqrt())
}

/// A target set for the command line: `all`, `evens`, `odds`, or a coset
/// `kZ` / `kZ+r` of `Z`, read on the first coordinate in `Z^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    All,
    Coset { modulus: i64, residue: i64 },
}

impl Target {
    pub fn contains(&self, x: &Element) -> bool {
        match *self {
            Target::All => true,
            Target::Coset { modulus, residue } => {
                let c = match x {
                    Element::Int(a) => *a,
                    Element::Vector(v) => v.first().copied().unwrap_or(0),
                    Element::Word(w) => w.iter().map(|l| l.signum() as i64).sum(),
                };
                c.rem_euclid(modulus) == residue
            }
        }
    }

    /// The frequency when the walk equidistributes on the cosets.
    pub fn density(&self) -> f64 {
        match *self {
            Target::All => 1.0,
            Target::Coset { modulus, .. } => 1.0 / modulus as f64,
        }
    }
}

impl FromStr for Target {
    type Err = WalkError;
    fn from_str(s: &str) -> Result<Target, WalkError> {
        let bad = || WalkError::BadTarget(s.into());
        let t = s.replace(' ', "");
        match t.as_str() {
            "all" | "G" => return Ok(Target::All),
            "evens" => return Ok(Target::Coset { modulus: 2, residue: 0 }),
            "odds" => return Ok(Target::Coset { modulus: 2, residue: 1 }),
            _ => {}
        }
        let (m, r) = t.split_once("Z").ok_or_else(bad)?;
        let modulus: i64 = if m.is_empty() { 1 } else { m.parse().map_err(|_| bad())? };
        let residue: i64 = match r.strip_prefix('+') {
            Some(r) => r.parse().map_err(|_| bad())?,
            None if r.is_empty() => 0,
            None => return Err(bad()),
        };
        if modulus < 1 {
            return Err(bad());
        }
        Ok(Target::Coset { modulus, residue: residue.rem_euclid(modulus) })
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::All => write!(f, "all"),
            Target::Coset { modulus, residue: 0 } => write!(f, "{modulus}Z"),
            Target::Coset { modulus, residue } => write!(f, "{modulus}Z+{residue}"),
        }
    }
}

/// `α^n_m(C, Z) = (1/(n-m)) Σ_{m ≤ i < n} 1(Z_i ∈ C)`.
pub fn alpha(path: &WalkPath, m: i64, n: i64, in_c: impl Fn(&Element) -> bool) -> f64 {
    assert!(m < n, "alpha needs m < n");
    let hits = (m..n).filter(|i| path.get(*i).is_some_and(&in_c)).count();
    hits as f64 / (n - m) as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitCheck {
    pub i: usize,
    pub j: usize,
    /// `F^{i+j}_k` for `k = 1..=K`.
    pub whole: Vec<usize>,
    /// `F^i_k + F^j_k(S^i Z)`.
    pub parts: Vec<usize>,
}

impl SplitCheck {
    pub fn holds(&self) -> bool {
        self.whole.iter().zip(&self.parts).all(|(a, b)| a <= b)
    }
}

/// Visit counts of `Z_0, …, Z_{n-1}` by class.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitProfile<C> {
    pub n: usize,
    /// Classes met, most visited first (ties by class order), with counts.
    pub counts: Vec<(C, usize)>,
    /// `F^n_k` for `k = 1..=K`: the visits to the `k` most visited classes.
    pub f: Vec<usize>,
    pub splits: Vec<SplitCheck>,
}

impl<C: Ord + Clone> VisitProfile<C> {
    /// `α^n_0(C)`.
    pub fn alpha(&self, c: &C) -> f64 {
        self.counts.iter().find(|(d, _)| d == c).map_or(0, |(_, k)| *k) as f64 / self.n as f64
    }

    /// `F^n_k`, for any `k ≥ 0`.
    pub fn f_k(&self, k: usize) -> usize {
        self.counts.iter().take(k).map(|(_, c)| c).sum()
    }

    pub fn violations(&self) -> usize {
        self.splits.iter().filter(|s| !s.holds()).count()
    }
}

impl<C: fmt::Display> VisitProfile<C> {
    pub fn to_json(&self) -> Value {
        let n = self.n as f64;
        json!({
            "n": self.n,
            "alpha": self.counts.iter().map(|(c, k)| json!([c.to_string(), *k as f64 / n])).collect::<Vec<_>>(),
            "F": self.f,
            "splits_checked": self.splits.len(),
            "violations": self.splits.iter().filter(|s| !s.holds()).count(),
        })
    }
}

fn top_sums<C: Ord + Clone>(labels: &[C], k: usize) -> (Vec<(C, usize)>, Vec<usize>) {
    let mut counts: BTreeMap<&C, usize> = BTreeMap::new();
    for c in labels {
        *counts.entry(c).or_default() += 1;
    }
    let mut counts: Vec<(C, usize)> = counts.into_iter().map(|(c, n)| (c.clone(), n)).collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let f = (1..=k).map(|k| counts.iter().take(k).map(|(_, n)| n).sum()).collect();
    (counts, f)
}

/// Classifies `Z_0, …, Z_{n-1}` with `class`, computes `F^n_k` for
/// `k ≤ max_k`, and checks `F^{i+j}_k ≤ F^i_k + F^j_k(S^i Z)` at up to
/// `splits` split points `i` (with `j = n - i`).
pub fn visit_profile<C, F>(class: F, path: &WalkPath, max_k: usize, splits: usize) -> VisitProfile<C>
where
    C: Ord + Clone,
    F: Fn(&Element) -> C,
{
    let labels: Vec<C> = path.points.iter().map(class).collect();
    let n = labels.len();
    let (counts, f) = top_sums(&labels, max_k);
    let mut checks = Vec::new();
    if n >= 2 && splits > 0 {
        let mut cuts: Vec<usize> = (1..=splits).map(|s| s * n / (splits + 1)).filter(|i| *i >= 1 && *i < n).collect();
        cuts.dedup();
        for i in cuts {
            let (_, head) = top_sums(&labels[..i], max_k);
            let (_, tail) = top_sums(&labels[i..], max_k);
            checks.push(SplitCheck {
                i,
                j: n - i,
                whole: f.clone(),
                parts: head.iter().zip(&tail).map(|(a, b)| a + b).collect(),
            });
        }
    }
    VisitProfile { n, counts, f, splits: checks }
}

/// A random decoration of a group, sampled on a ball around the identity.
pub trait DecoratedSampler: Sync {
    type Sample: Send;
    fn group(&self) -> GroupModel;
    fn sample(&self, radius: usize, rng: &mut ChaCha8Rng) -> Self::Sample;
    /// A bounded local statistic at `x`; its mean should not depend on `x`.
    fn observe(&self, s: &Self::Sample, x: &Element) -> f64;
}

/// Independent marks with probability `p` on every element.
#[derive(Debug, Clone, Copy)]
pub struct IidMarks {
    pub group: GroupModel,
    pub p: f64,
}

/// Independent marks with probability `p`, but only on `x ≥ 0` in `Z`.
/// Not invariant.
#[derive(Debug, Clone, Copy)]
pub struct HalfLineMarks {
    pub p: f64,
}

pub type Marks = BTreeSet<Element>;

impl DecoratedSampler for IidMarks {
    type Sample = Marks;
    fn group(&self) -> GroupModel {
        self.group
    }
    fn sample(&self, radius: usize, rng: &mut ChaCha8Rng) -> Marks {
        crate::groups::ball_elements(self.group, radius).into_iter().filter(|_| rng.gen_bool(self.p)).collect()
    }
    fn observe(&self, s: &Marks, x: &Element) -> f64 {
        s.contains(x) as u8 as f64
    }
}

impl DecoratedSampler for HalfLineMarks {
    type Sample = Marks;
    fn group(&self) -> GroupModel {
        GroupModel::Z
    }
    fn sample(&self, radius: usize, rng: &mut ChaCha8Rng) -> Marks {
        let r = radius as i64;
        (-r..=r).filter(|x| *x >= 0 && rng.gen_bool(self.p)).map(Element::Int).collect()
    }
    fn observe(&self, s: &Marks, x: &Element) -> f64 {
        s.contains(x) as u8 as f64
    }
}

/// `g(x, y) = 1` when `x` and `y` are marked points of `Z` and `y` is the
/// next marked point after `x`.
pub fn marked_successor(marks: &Marks, x: &Element, y: &Element) -> f64 {
    let (Some(a), Some(b)) = (x.as_int(), y.as_int()) else { return 0.0 };
    let ok = a < b
        && marks.contains(x)
        && marks.contains(y)
        && (a + 1..b).all(|c| !marks.contains(&Element::Int(c)));
    ok as u8 as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportConfig {
    /// Mass is only sent between points at distance ≤ `radius`.
    pub radius: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportReport {
    /// `E[Σ_y g(e, y)]`.
    pub out_mean: f64,
    pub out_se: f64,
    /// `E[Σ_x g(x, e)]`.
    pub in_mean: f64,
    pub in_se: f64,
    /// Standard error of the per-sample difference of the two sums.
    pub combined_se: f64,
    pub pass: bool,
    pub warning: Option<String>,
    pub samples: usize,
    pub seed: u64,
}

impl TransportReport {
    pub fn to_json(&self) -> Value {
        json!({
            "out": { "mean": self.out_mean, "se": self.out_se },
            "in": { "mean": self.in_mean, "se": self.in_se },
            "combined_se": self.combined_se,
            "verdict": if self.pass { "PASS" } else { "FAIL" },
            "warning": self.warning,
            "samples": self.samples,
            "seed": self.seed,
        })
    }
}

/// Estimates both sides of the mass transport identity
/// `E[Σ_y g(e, y)] = E[Σ_x g(x, e)]`. Samples cover `B(2·radius)` so that
/// `g(x, ·)` can look a further `radius` around each `x ∈ B(radius)`.
///
/// Before the check, the mean of [`DecoratedSampler::observe`] at `e` is
/// compared with its mean at each generator and at the far points of
/// `B(radius)`; a difference beyond three standard errors is reported as a
/// warning.
pub fn mass_transport_check<S, G>(sampler: &S, g: G, cfg: &TransportConfig) -> TransportReport
where
    S: DecoratedSampler,
    G: Fn(&S::Sample, &Element, &Element) -> f64 + Sync,
{
    let group = sampler.group();
    let e = group.identity();
    let ball = crate::groups::ball_elements(group, cfg.radius);
    let mut probes = group.generators();
    probes.extend(ball.iter().filter(|x| x.length() == cfg.radius).cloned());
    probes.sort();
    probes.dedup();
    probes.retain(|x| !x.is_identity());

    let rows: Vec<(f64, f64, Vec<f64>)> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(cfg.seed, k);
            let s = sampler.sample(2 * cfg.radius, &mut rng);
            let out: f64 = ball.iter().map(|y| g(&s, &e, y)).sum();
            let inn: f64 = ball.iter().map(|x| g(&s, x, &e)).sum();
            let at_e = sampler.observe(&s, &e);
            let shifts = probes.iter().map(|x| sampler.observe(&s, x) - at_e).collect();
            (out, inn, shifts)
        })
        .collect();

    let outs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ins: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diffs: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    let (out_mean, out_se) = mean_se(&outs);
    let (in_mean, in_se) = mean_se(&ins);
    let (diff, combined_se) = mean_se(&diffs);

    let mut drifted = Vec::new();
    for (i, x) in probes.iter().enumerate() {
        let d: Vec<f64> = rows.iter().map(|r| r.2[i]).collect();
        let (m, se) = mean_se(&d);
        if m.abs() > 3.0 * se {
            drifted.push(x.to_string());
        }
    }
    let warning = (!drifted.is_empty())
        .then(|| format!("sampler looks non-invariant: local statistic shifts at {}", drifted.join(", ")));
    TransportReport {
        out_mean,
        out_se,
        in_mean,
        in_se,
        combined_se,
        pass: diff.abs() <= 3.0 * combined_se,
        warning,
        samples: cfg.samples,
        seed: cfg.seed,
    }
}
