//! Exact rational linear algebra: determinants, linear solves, and rank
//! over the complex rationals. Dimensions here are tiny (d ≤ 3 for spaces,
//! tens of rows for spanning checks), so plain fraction arithmetic with
//! partial pivoting by magnitude is plenty.

use crate::scalar::{CRat, Rat};
use num::{One, Signed, Zero};

/// Outcome of solving a square rational linear system A·x = b exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinSolve {
    /// Exactly one solution.
    Unique(Vec<Rat>),
    /// No solution.
    Inconsistent,
    /// An affine solution space of dimension ≥ 1.
    Underdetermined,
}

/// Exact determinant of a square rational matrix (row-major).
pub fn det(a: &[Vec<Rat>]) -> Rat {
    let n = a.len();
    let mut m: Vec<Vec<Rat>> = a.to_vec();
    let mut sign = Rat::one();
    let mut acc = Rat::one();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero());
        let piv = match piv {
            Some(p) => p,
            None => return Rat::zero(),
        };
        if piv != col {
            m.swap(piv, col);
            sign = -sign;
        }
        let p = m[col][col].clone();
        acc *= &p;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] / &p;
            for c in col..n {
                let sub = &f * &m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    sign * acc
}

/// Solves A·x = b exactly for square rational A.
pub fn solve(a: &[Vec<Rat>], b: &[Rat]) -> LinSolve {
    let n = a.len();
    let mut m: Vec<Vec<Rat>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let mut pivot_cols = Vec::new();
    let mut rank = 0usize;
    for col in 0..n {
        let piv = (rank..n).find(|&r| !m[r][col].is_zero());
        let piv = match piv {
            Some(p) => p,
            None => continue,
        };
        m.swap(piv, rank);
        let p = m[rank][col].clone();
        for c in col..=n {
            m[rank][c] = &m[rank][c] / &p;
        }
        for r in 0..n {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..=n {
                    let sub = &f * &m[rank][c];
                    m[r][c] -= sub;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
    }
    for row in m.iter().skip(rank) {
        if !row[n].is_zero() {
            return LinSolve::Inconsistent;
        }
    }
    if rank < n {
        return LinSolve::Underdetermined;
    }
    let mut x = vec![Rat::zero(); n];
    for (r, &c) in pivot_cols.iter().enumerate() {
        x[c] = m[r][n].clone();
    }
    LinSolve::Unique(x)
}

/// Exact rank of a complex-rational matrix given as rows.
pub fn rank_crat(rows: &[Vec<CRat>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut m: Vec<Vec<CRat>> = rows.to_vec();
    let mut rank = 0usize;
    for col in 0..ncols {
        // Prefer pivots with small numerators/denominators to limit blowup.
        let piv = (rank..m.len())
            .filter(|&r| !m[r][col].is_zero())
            .min_by_key(|&r| pivot_weight(&m[r][col]));
        let piv = match piv {
            Some(p) => p,
            None => continue,
        };
        m.swap(piv, rank);
        let p = m[rank][col].clone();
        for r in rank + 1..m.len() {
            if m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] / &p;
            for c in col..ncols {
                let sub = &f * &m[rank][c];
                m[r][c] = &m[r][c] - &sub;
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

fn pivot_weight(z: &CRat) -> usize {
    let bits = |r: &Rat| r.numer().bits() as usize + r.denom().bits() as usize;
    bits(&z.re) + bits(&z.im)
}

/// Exact matrix-vector product A·x over the rationals.
pub fn mat_vec(a: &[Vec<Rat>], x: &[Rat]) -> Vec<Rat> {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(x)
                .fold(Rat::zero(), |acc, (aij, xj)| acc + aij * xj)
        })
        .collect()
}

/// Exact matrix product A·B over the rationals.
pub fn mat_mul(a: &[Vec<Rat>], b: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let n = a.len();
    let inner = b.len();
    let m = if inner == 0 { 0 } else { b[0].len() };
    let mut out = vec![vec![Rat::zero(); m]; n];
    for i in 0..n {
        for k in 0..inner {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..m {
                let add = &a[i][k] * &b[k][j];
                out[i][j] += add;
            }
        }
    }
    out
}

/// Gershgorin-style certified upper bound for the largest singular value:
/// σ_max² ≤ max_i Σ_j |AᵀA|_{ij}, computed exactly.
pub fn singular_upper_sq(a: &[Vec<Rat>]) -> Rat {
    let n = a.len();
    if n == 0 {
        return Rat::zero();
    }
    let at: Vec<Vec<Rat>> = (0..n)
        .map(|i| (0..n).map(|j| a[j][i].clone()).collect())
        .collect();
    let ata = mat_mul(&at, a);
    ata.iter()
        .map(|row| row.iter().map(|v| v.abs()).fold(Rat::zero(), |s, v| s + v))
        .max()
        .unwrap_or_else(Rat::zero)
}
