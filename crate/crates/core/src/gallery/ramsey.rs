//! Pair colourings of `{0, …, n-1}` and their largest homogeneous sets.

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

/// Largest `n` accepted by the exact solver.
pub const MAX_EXACT: usize = 80;
/// Largest `n` accepted by the subset enumeration.
pub const MAX_BRUTE: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RamseyError {
    #[error("n = {n} exceeds the limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("probability {0} must lie strictly between 0 and 1")]
    BadProbability(String),
}

/// Every pair is `R` or `S`; `red[i]` holds the `R`-neighbours of `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PairColouring {
    n: usize,
    red: Vec<u128>,
}

impl PairColouring {
    /// All pairs `R` (or all `S`).
    pub fn constant(n: usize, red: bool) -> PairColouring {
        assert!(n <= 128, "at most 128 vertices");
        let all = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
        let red = (0..n).map(|i| if red { all & !(1 << i) } else { 0 }).collect();
        PairColouring { n, red }
    }

    pub fn from_fn(n: usize, is_red: impl Fn(usize, usize) -> bool) -> PairColouring {
        let mut c = PairColouring::constant(n, false);
        for j in 1..n {
            for i in 0..j {
                c.set(i, j, is_red(i, j));
            }
        }
        c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_red(&self, i: usize, j: usize) -> bool {
        self.red[i] >> j & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, red: bool) {
        assert!(i != j && i < self.n && j < self.n);
        if red {
            self.red[i] |= 1 << j;
            self.red[j] |= 1 << i;
        } else {
            self.red[i] &= !(1 << j);
            self.red[j] &= !(1 << i);
        }
    }

    fn blue(&self) -> Vec<u128> {
        let all = if self.n == 128 { u128::MAX } else { (1u128 << self.n) - 1 };
        (0..self.n).map(|i| all & !self.red[i] & !(1 << i)).collect()
    }

    pub fn red_pairs(&self) -> usize {
        self.red.iter().map(|r| r.count_ones() as usize).sum::<usize>() / 2
    }

    /// Whether every pair inside `set` has the same colour.
    pub fn is_homogeneous(&self, set: u128) -> bool {
        let members = bits(set);
        let all_red = members.iter().all(|&i| set & !(1 << i) & !self.red[i] == 0);
        let all_blue = members.iter().all(|&i| set & self.red[i] == 0);
        all_red || all_blue
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<String> = (0..self.n)
            .map(|i| (0..self.n).map(|j| if i == j { '-' } else if self.is_red(i, j) { 'R' } else { 'S' }).collect())
            .collect();
        json!({"n": self.n, "rows": rows})
    }
}

fn bits(set: u128) -> Vec<usize> {
    (0..128).filter(|i| set >> i & 1 == 1).collect()
}

/// Each pair `R` independently with probability `p`, pairs drawn in the
/// order `(0,1), (0,2), (1,2), (0,3), …`.
pub fn sample_pair_colouring(n: usize, p: &BigRational, seed: u64) -> Result<PairColouring, RamseyError> {
    if !p.is_positive() || *p >= BigRational::from_integer(1.into()) {
        return Err(RamseyError::BadProbability(p.to_string()));
    }
    if n > 128 {
        return Err(RamseyError::TooLarge { n, limit: 128 });
    }
    let coin = match (p.numer().to_u32(), p.denom().to_u32()) {
        (Some(a), Some(b)) => Bernoulli::from_ratio(a, b),
        _ => Bernoulli::new(p.to_f64().unwrap_or(0.5)),
    }
    .map_err(|_| RamseyError::BadProbability(p.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = PairColouring::constant(n, false);
    for j in 1..n {
        for i in 0..j {
            if coin.sample(&mut rng) {
                c.set(i, j, true);
            }
        }
    }
    Ok(c)
}

/// A largest homogeneous set and its colour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Homogeneous {
    pub size: usize,
    pub members: Vec<usize>,
    pub red: bool,
}

/// Exact maximum by branch and bound on each colour class, pruning with a
/// greedy colouring of the candidates.
pub fn max_homogeneous(c: &PairColouring) -> Result<Homogeneous, RamseyError> {
    if c.n > MAX_EXACT {
        return Err(RamseyError::TooLarge { n: c.n, limit: MAX_EXACT });
    }
    let red = max_clique(&c.red, c.n);
    let blue = max_clique(&c.blue(), c.n);
    let (set, is_red) = if red.count_ones() >= blue.count_ones() { (red, true) } else { (blue, false) };
    debug_assert!(c.is_homogeneous(set));
    Ok(Homogeneous { size: set.count_ones() as usize, members: bits(set), red: is_red })
}

fn max_clique(adj: &[u128], n: usize) -> u128 {
    let all = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let mut best = if n > 0 { 1 } else { 0 };
    expand(adj, 0, all, &mut best);
    best
}

fn expand(adj: &[u128], current: u128, mut cand: u128, best: &mut u128) {
    // Greedy colouring: vertices in order with the colour count so far,
    // which bounds the clique size among the vertices up to that point.
    let mut order: Vec<(usize, u32)> = Vec::with_capacity(cand.count_ones() as usize);
    let mut uncoloured = cand;
    let mut colour = 0;
    while uncoloured != 0 {
        colour += 1;
        let mut q = uncoloured;
        while q != 0 {
            let v = q.trailing_zeros() as usize;
            q &= !(1 << v) & !adj[v];
            uncoloured &= !(1 << v);
            order.push((v, colour));
        }
    }
    let size = current.count_ones();
    for &(v, bound) in order.iter().rev() {
        if size + bound <= best.count_ones() {
            return;
        }
        let next = current | 1 << v;
        let inner = cand & adj[v];
        if inner == 0 {
            if next.count_ones() > best.count_ones() {
                *best = next;
            }
        } else {
            expand(adj, next, inner, best);
        }
        cand &= !(1 << v);
    }
}

/// The largest homogeneous set by enumerating all subsets, for small `n`.
pub fn max_homogeneous_brute_force(c: &PairColouring) -> Result<usize, RamseyError> {
    if c.n > MAX_BRUTE {
        return Err(RamseyError::TooLarge { n: c.n, limit: MAX_BRUTE });
    }
    // red[m] / blue[m]: m is a clique of that colour, built by adding the top vertex.
    let size = 1usize << c.n;
    let mut red = vec![true; size];
    let mut blue = vec![true; size];
    let mut best = 0;
    for m in 1..size {
        let v = 63 - (m as u64).leading_zeros() as usize;
        let rest = m & !(1 << v);
        let nbrs = c.red[v] as usize;
        red[m] = red[rest] && rest & !nbrs == 0;
        blue[m] = blue[rest] && rest & nbrs == 0;
        if red[m] || blue[m] {
            best = best.max(m.count_ones() as usize);
        }
    }
    Ok(best)
}

/// Largest homogeneous set sizes over seeded samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueStats {
    pub n: usize,
    pub p: String,
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub mean: f64,
}

impl CliqueStats {
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "p": self.p,
            "seed": self.seed,
            "samples": self.sizes.len(),
            "mean": self.mean,
            "min": self.sizes.iter().min(),
            "max": self.sizes.iter().max(),
        })
    }
}

/// Sample `k` uses seed `seed + k`.
pub fn clique_statistics(n: usize, p: &BigRational, samples: usize, seed: u64) -> Result<CliqueStats, RamseyError> {
    let sizes = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let c = sample_pair_colouring(n, p, seed.wrapping_add(k))?;
            max_homogeneous(&c).map(|h| h.size)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mean = sizes.iter().sum::<usize>() as f64 / samples.max(1) as f64;
    Ok(CliqueStats { n, p: p.to_string(), seed, sizes, mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> BigRational {
        BigRational::new(1.into(), 2.into())
    }

    #[test]
    fn constant_colourings() {
        for n in [1, 5, 40, 80] {
            assert_eq!(max_homogeneous(&PairColouring::constant(n, true)).unwrap().size, n);
            assert_eq!(max_homogeneous(&PairColouring::constant(n, false)).unwrap().size, n);
        }
        assert_eq!(max_homogeneous(&PairColouring::constant(0, true)).unwrap().size, 0);
        assert!(matches!(max_homogeneous(&PairColouring::constant(81, true)), Err(RamseyError::TooLarge { .. })));
    }

    #[test]
    fn pentagon() {
        // R is the 5-cycle and S is its complement, another 5-cycle.
        let c = PairColouring::from_fn(5, |i, j| (j - i) % 5 == 1 || (j - i) % 5 == 4);
        assert_eq!(max_homogeneous(&c).unwrap().size, 2);
        assert_eq!(max_homogeneous_brute_force(&c).unwrap(), 2);
    }

    #[test]
    fn single_pair() {
        let seen: std::collections::BTreeSet<bool> =
            (0..64).map(|s| sample_pair_colouring(2, &half(), s).unwrap().is_red(0, 1)).collect();
        assert_eq!(seen.len(), 2);
        for s in 0..8 {
            assert_eq!(max_homogeneous(&sample_pair_colouring(2, &half(), s).unwrap()).unwrap().size, 2);
        }
    }

    #[test]
    fn sampling_is_reproducible_and_binomial() {
        let p = BigRational::new(3.into(), 10.into());
        let a = sample_pair_colouring(100, &p, 9).unwrap();
        assert_eq!(a, sample_pair_colouring(100, &p, 9).unwrap());
        assert_ne!(a, sample_pair_colouring(100, &p, 10).unwrap());
        let pairs = 100.0 * 99.0 / 2.0;
        let sd = (pairs * 0.3 * 0.7f64).sqrt();
        assert!((a.red_pairs() as f64 - 0.3 * pairs).abs() < 3.0 * sd);
        assert!(sample_pair_colouring(4, &BigRational::from_integer(1.into()), 0).is_err());
    }

    /// Independent check by testing every subset with explicit pair loops.
    fn naive(c: &PairColouring) -> usize {
        let n = c.n();
        (0u32..1 << n)
            .filter(|m| {
                let v: Vec<usize> = (0..n).filter(|i| m >> i & 1 == 1).collect();
                let cols: std::collections::BTreeSet<bool> =
                    v.iter().flat_map(|&i| v.iter().filter(move |&&j| j > i).map(move |&j| c.is_red(i, j))).collect();
                cols.len() <= 1
            })
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap()
    }

    #[test]
    fn solvers_agree_with_naive_enumeration() {
        for seed in 0..40 {
            let n = 3 + seed as usize % 9;
            let c = sample_pair_colouring(n, &half(), seed).unwrap();
            let h = max_homogeneous(&c).unwrap();
            assert_eq!(h.size, naive(&c));
            assert_eq!(max_homogeneous_brute_force(&c).unwrap(), h.size);
            assert!(c.is_homogeneous(h.members.iter().fold(0, |m, i| m | 1 << i)));
        }
    }

    #[test]
    fn statistics_are_reproducible() {
        let a = clique_statistics(30, &half(), 10, 4).unwrap();
        assert_eq!(a, clique_statistics(30, &half(), 10, 4).unwrap());
        assert!(a.sizes.iter().all(|s| (4..=30).contains(s)));
    }

    proptest::proptest! {
        #[test]
        fn exact_equals_subsets(seed: u64, n in 1usize..15) {
            let c = sample_pair_colouring(n, &half(), seed).unwrap();
            proptest::prop_assert_eq!(max_homogeneous(&c).unwrap().size, max_homogeneous_brute_force(&c).unwrap());
        }
    }
}
