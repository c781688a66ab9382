//! Floating-point solves rounded to exact certificates.
//!
//! microlp finds a primal vertex, and for optimization problems a vertex of
//! the dual. Each coordinate is replaced by the simplest fraction within
//! `1e-9`; the caller re-verifies the result exactly, so a bad rounding
//! shows up as a verification error and never as a wrong answer.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap};

use super::{Certificate, LpError, LpProblem, Sense};

const SNAP: f64 = 1e-9;
const MAX_DEN: i64 = 1 << 40;
const BOX: f64 = 1e4;

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// The fraction with least denominator within `SNAP` of `v`, by walking the
/// continued fraction expansion.
pub(crate) fn snap(v: f64) -> BigRational {
    if v.abs() < SNAP {
        return BigRational::zero();
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0i128, 1i128, 1i128, 0i128);
    let mut rest = v;
    for _ in 0..64 {
        let a = rest.floor();
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > MAX_DEN as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (v - h1 as f64 / k1 as f64).abs() < SNAP || (rest - a).abs() < 1e-15 {
            break;
        }
        rest = 1.0 / (rest - a);
    }
    BigRational::new(BigInt::from(h1), BigInt::from(k1))
}

fn op(s: Sense) -> ComparisonOp {
    match s {
        Sense::Eq => ComparisonOp::Eq,
        Sense::Ge => ComparisonOp::Ge,
        Sense::Le => ComparisonOp::Le,
    }
}

fn err(e: microlp::Error) -> LpError {
    LpError::Solver(e.to_string())
}

/// Row-wise transposed copy of the column storage.
fn row_lists(lp: &LpProblem) -> Vec<Vec<(usize, f64)>> {
    let mut rows = vec![Vec::new(); lp.num_rows()];
    for j in 0..lp.num_cols() {
        for (i, a) in lp.column(j) {
            rows[*i as usize].push((j, *a as f64));
        }
    }
    rows
}

/// Bounds for a multiplier on a row, with `flip` for the dual of a maximum.
/// microlp mishandles free variables here, so multipliers live in a box;
/// the exact check catches a box that was too small.
fn multiplier_bounds(s: Sense, flip: bool) -> (f64, f64) {
    let (lo, hi) = match s {
        Sense::Eq => (-BOX, BOX),
        Sense::Ge => (0.0, BOX),
        Sense::Le => (-BOX, 0.0),
    };
    if flip {
        (-hi, -lo)
    } else {
        (lo, hi)
    }
}

pub fn solve_guided(lp: &LpProblem) -> Result<Certificate, LpError> {
    let mut primal = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..lp.num_cols()).map(|j| primal.add_var(lp.objective_coeff(j) as f64, (0.0, f64::INFINITY))).collect();
    for (row, list) in lp.rows.iter().zip(row_lists(lp)) {
        let expr: LinearExpr = list.into_iter().map(|(j, a)| (vars[j], a)).collect();
        primal.add_constraint(expr, op(row.sense), to_f64(&row.rhs));
    }
    let solution = match primal.solve() {
        Ok(out) => out.into_solution().map_err(|_| LpError::Solver("interrupted".into()))?,
        Err(microlp::Error::Infeasible) => return farkas(lp),
        Err(e) => return Err(err(e)),
    };
    let raw: Vec<f64> = vars.iter().map(|v| solution.var_value_raw(*v)).collect();
    let x = polish(lp, &raw).unwrap_or_else(|| {
        raw.iter().enumerate().map(|(j, v)| (j, snap(*v))).filter(|(_, w)| !w.is_zero()).collect()
    });
    if lp.objective.is_empty() {
        return Ok(Certificate::Feasible { x });
    }
    let value = x.iter().fold(BigRational::zero(), |acc, (j, w)| acc + w * BigRational::from_integer(lp.objective_coeff(*j).into()));

    // min b·y subject to Aᵀy ≥ c, signs flipped relative to Farkas.
    let mut dual = Problem::new(OptimizationDirection::Minimize);
    let ys: Vec<_> = lp.rows.iter().map(|r| dual.add_var(to_f64(&r.rhs), multiplier_bounds(r.sense, true))).collect();
    for j in 0..lp.num_cols() {
        let expr: LinearExpr = lp.column(j).iter().map(|(i, a)| (ys[*i as usize], *a as f64)).collect();
        dual.add_constraint(expr, ComparisonOp::Ge, lp.objective_coeff(j) as f64);
    }
    let dsol = dual.solve().map_err(|e| LpError::Solver(format!("dual: {e}")))?.into_solution().map_err(|_| LpError::Solver("interrupted".into()))?;
    let y = ys.iter().map(|v| snap(dsol.var_value_raw(*v))).collect();
    Ok(Certificate::Optimal { x, y, value })
}

/// Recovers the exact vertex behind a float solution: keep the columns with
/// positive value, treat every row that is tight as an equation, and solve
/// that system by sparse rational elimination. Free columns are set to zero.
/// Returns `None` if the system is inconsistent or the result is negative.
pub(crate) fn polish(lp: &LpProblem, raw: &[f64]) -> Option<Vec<(usize, BigRational)>> {
    let support: Vec<usize> = (0..raw.len()).filter(|j| raw[*j] > SNAP).collect();
    let local: HashMap<usize, usize> = support.iter().enumerate().map(|(k, j)| (*j, k)).collect();
    let mut rows: Vec<(BTreeMap<usize, BigRational>, BigRational)> =
        lp.rows.iter().map(|r| (BTreeMap::new(), r.rhs.clone())).collect();
    let mut activity = vec![0.0; lp.num_rows()];
    for &j in &support {
        for (i, a) in lp.column(j) {
            rows[*i as usize].0.insert(local[&j], BigRational::from_integer(BigInt::from(*a)));
            activity[*i as usize] += *a as f64 * raw[j];
        }
    }
    let tol = 1e-7 * (1.0 + support.len() as f64).sqrt();
    let mut pivots: BTreeMap<usize, (BTreeMap<usize, BigRational>, BigRational)> = BTreeMap::new();
    for (i, (mut row, mut rhs)) in rows.into_iter().enumerate() {
        let r = &lp.rows[i];
        if r.sense != Sense::Eq && (activity[i] - to_f64(&r.rhs)).abs() > tol {
            continue;
        }
        loop {
            let Some((&c, _)) = row.iter().next() else {
                if !rhs.is_zero() {
                    return None;
                }
                break;
            };
            let Some((prow, prhs)) = pivots.get(&c) else {
                let lead = row[&c].clone();
                for v in row.values_mut() {
                    *v /= &lead;
                }
                rhs /= lead;
                pivots.insert(c, (row, rhs));
                break;
            };
            let f = row[&c].clone();
            for (k, v) in prow {
                let e = row.entry(*k).or_insert_with(BigRational::zero);
                *e -= &f * v;
                if e.is_zero() {
                    row.remove(k);
                }
            }
            rhs -= &f * prhs;
        }
    }
    let mut value = vec![BigRational::zero(); support.len()];
    for (c, (row, rhs)) in pivots.iter().rev() {
        let mut v = rhs.clone();
        for (k, a) in row.range(c + 1..) {
            v -= a * &value[*k];
        }
        value[*c] = v;
    }
    if value.iter().any(|v| v.is_negative()) {
        return None;
    }
    Some(support.into_iter().zip(value).filter(|(_, v)| !v.is_zero()).collect())
}

/// max b·y subject to Aᵀy ≤ 0 and b·y ≤ 1.
fn farkas(lp: &LpProblem) -> Result<Certificate, LpError> {
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let ys: Vec<_> = lp.rows.iter().map(|r| p.add_var(to_f64(&r.rhs), multiplier_bounds(r.sense, false))).collect();
    for j in 0..lp.num_cols() {
        let expr: LinearExpr = lp.column(j).iter().map(|(i, a)| (ys[*i as usize], *a as f64)).collect();
        p.add_constraint(expr, ComparisonOp::Le, 0.0);
    }
    let expr: LinearExpr = lp.rows.iter().zip(&ys).map(|(r, v)| (*v, to_f64(&r.rhs))).collect();
    p.add_constraint(expr, ComparisonOp::Le, 1.0);
    let sol = p.solve().map_err(err)?.into_solution().map_err(|_| LpError::Solver("interrupted".into()))?;
    Ok(Certificate::Infeasible { y: ys.iter().map(|v| snap(sol.var_value_raw(*v))).collect() })
}
