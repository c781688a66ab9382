//! Dense two-phase simplex over exact rationals with Bland's rule.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{Certificate, LpError, LpProblem, Sense};

struct Tableau {
    /// `m` constraint rows, each `cols` wide, then the right-hand side.
    rows: Vec<Vec<BigRational>>,
    /// Reduced costs, then minus the objective value.
    z: Vec<BigRational>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = BigRational::one() / &self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        let nz: Vec<usize> = (0..=self.cols).filter(|j| !self.rows[r][*j].is_zero()).collect();
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<BigRational>| {
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            for &j in &nz {
                row[j] -= &f * &pivot_row[j];
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.z);
        self.basis[r] = c;
    }

    /// Bland's rule on columns `< allowed`. Returns false if unbounded.
    fn run(&mut self, allowed: usize, skip: &[bool]) -> bool {
        loop {
            let Some(c) = (0..allowed).find(|j| self.z[*j].is_negative()) else { return true };
            let mut best: Option<(BigRational, usize)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if skip[i] || !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[self.cols] / &row[c];
                let better = match &best {
                    None => true,
                    Some((b, k)) => ratio < *b || (ratio == *b && self.basis[i] < self.basis[*k]),
                };
                if better {
                    best = Some((ratio, i));
                }
            }
            match best {
                Some((_, r)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Exact solve. Farkas and dual vectors are read off the artificial columns.
pub fn solve_exact(lp: &LpProblem) -> Result<Certificate, LpError> {
    let (m, n) = (lp.num_rows(), lp.num_cols());
    let slack_rows: Vec<usize> = (0..m).filter(|i| lp.rows[*i].sense != Sense::Eq).collect();
    let ns = slack_rows.len();
    let art = n + ns;
    let cols = art + m;
    let sigma: Vec<BigRational> = lp
        .rows
        .iter()
        .map(|r| if r.rhs.is_negative() { -BigRational::one() } else { BigRational::one() })
        .collect();

    let mut rows = vec![vec![BigRational::zero(); cols + 1]; m];
    for j in 0..n {
        for (i, a) in lp.column(j) {
            let i = *i as usize;
            rows[i][j] = &sigma[i] * BigRational::from_integer(BigInt::from(*a));
        }
    }
    for (k, &i) in slack_rows.iter().enumerate() {
        let s = if lp.rows[i].sense == Sense::Ge { -BigRational::one() } else { BigRational::one() };
        rows[i][n + k] = &sigma[i] * s;
    }
    for i in 0..m {
        rows[i][art + i] = BigRational::one();
        rows[i][cols] = &sigma[i] * &lp.rows[i].rhs;
    }
    let mut z = vec![BigRational::zero(); cols + 1];
    for row in &rows {
        for j in (0..art).chain(std::iter::once(cols)) {
            z[j] -= &row[j];
        }
    }
    let mut t = Tableau { rows, z, basis: (art..cols).collect(), cols };
    let mut skip = vec![false; m];
    t.run(art, &skip);

    if t.z[cols].is_negative() {
        // Phase-one optimum is positive: u_i = 1 - r(art_i), y = σ u.
        let y = (0..m).map(|i| &sigma[i] * (BigRational::one() - &t.z[art + i])).collect();
        return Ok(Certificate::Infeasible { y });
    }

    // Drive artificials out of the basis; rows where that fails are redundant.
    for r in 0..m {
        if t.basis[r] >= art {
            match (0..art).find(|j| !t.rows[r][*j].is_zero()) {
                Some(c) => t.pivot(r, c),
                None => skip[r] = true,
            }
        }
    }

    let cost = |j: usize| -> BigRational {
        if j < n {
            BigRational::from_integer(BigInt::from(-lp.objective_coeff(j)))
        } else {
            BigRational::zero()
        }
    };
    let mut z = (0..cols).map(cost).collect::<Vec<_>>();
    z.push(BigRational::zero());
    for (r, &b) in t.basis.iter().enumerate() {
        let cb = cost(b);
        if cb.is_zero() {
            continue;
        }
        for j in 0..=cols {
            if !t.rows[r][j].is_zero() {
                z[j] -= &cb * &t.rows[r][j];
            }
        }
    }
    t.z = z;
    if !t.run(art, &skip) {
        return Err(LpError::Solver("unbounded".into()));
    }

    let mut x = Vec::new();
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n && !t.rows[r][cols].is_zero() {
            x.push((b, t.rows[r][cols].clone()));
        }
    }
    x.sort_by_key(|(j, _)| *j);
    if lp.objective.is_empty() {
        return Ok(Certificate::Feasible { x });
    }
    // Minimizing -c·x: u_i = -r(art_i), and y = -σ u is dual to the maximum.
    let y = (0..m).map(|i| &sigma[i] * &t.z[art + i]).collect();
    let value = t.z[cols].clone();
    Ok(Certificate::Optimal { x, y, value })
}
