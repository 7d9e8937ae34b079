//! Sparse matrix representations over a truncated orbit basis.
//!
//! A `SparseOp` is an exact complex-rational matrix indexed by basis
//! points, together with the sets of columns and rows on which the
//! truncation agrees with the untruncated operator. Operator identities
//! are always asserted on valid columns only; validity propagates through
//! sums, products and adjoints so that both sides of an identity carry
//! matching guarantees.

use crate::basis::OrbitBasis;
use crate::chains::{chain_from, Bichain, BichainFn, Chain, ChainError, ChainFn};
use crate::conditions::{check_graph_separation, ConditionError, Tri};
use crate::ifs::AffineIfs;
use crate::scalar::{conj, czero, norm_sqr, rat_to_f64, CRat, Rat};
use crate::word::IndexWord;
use num::complex::Complex64;
use num::Zero;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_NORM_ITERATIONS: u32 = 200;
pub const DEFAULT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("operands live on different orbit bases")]
    BasisMismatch,
    #[error("function arity {got} does not match the representation degree {expected}")]
    Arity { expected: usize, got: usize },
    #[error("degree {n} exceeds the basis depth {depth}")]
    DepthExceeded { n: u32, depth: u32 },
    #[error("branch decomposition requires graph separation: {notes}")]
    NotSeparated { notes: String },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

/// First column where two operators disagree on jointly valid columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMismatch {
    pub column: usize,
    pub row: usize,
    pub left: CRat,
    pub right: CRat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EqOutcome {
    Equal { columns: usize },
    Differs(ColumnMismatch),
}

impl EqOutcome {
    pub fn is_equal(&self) -> bool {
        matches!(self, EqOutcome::Equal { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationClass {
    Diagonal,
    QuasiMonomial,
    General,
}

/// Exact sparse operator on the span of an orbit basis.
#[derive(Debug, Clone)]
pub struct SparseOp {
    pub basis: Arc<OrbitBasis>,
    entries: BTreeMap<(usize, usize), CRat>,
    valid_cols: BTreeSet<usize>,
    valid_rows: BTreeSet<usize>,
}

impl SparseOp {
    fn empty(basis: &Arc<OrbitBasis>) -> Self {
        SparseOp {
            basis: Arc::clone(basis),
            entries: BTreeMap::new(),
            valid_cols: BTreeSet::new(),
            valid_rows: BTreeSet::new(),
        }
    }

    /// The zero operator, exact everywhere.
    pub fn zero(basis: &Arc<OrbitBasis>) -> Self {
        let all: BTreeSet<usize> = (0..basis.len()).collect();
        SparseOp {
            basis: Arc::clone(basis),
            entries: BTreeMap::new(),
            valid_cols: all.clone(),
            valid_rows: all,
        }
    }

    /// The identity operator ρ₀(1), exact everywhere.
    pub fn identity(basis: &Arc<OrbitBasis>) -> Self {
        let mut op = SparseOp::zero(basis);
        for i in 0..basis.len() {
            op.entries.insert((i, i), crate::scalar::cone());
        }
        op
    }

    fn insert(&mut self, row: usize, col: usize, v: CRat) {
        if !v.is_zero() {
            let slot = self.entries.entry((row, col)).or_insert_with(czero);
            *slot += v;
            if slot.is_zero() {
                self.entries.remove(&(row, col));
            }
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> CRat {
        self.entries.get(&(row, col)).cloned().unwrap_or_else(czero)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &CRat)> {
        self.entries.iter().map(|(&(r, c), v)| (r, c, v))
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn valid_cols(&self) -> &BTreeSet<usize> {
        &self.valid_cols
    }

    pub fn valid_rows(&self) -> &BTreeSet<usize> {
        &self.valid_rows
    }

    fn same_basis(&self, other: &SparseOp) -> Result<(), MatrixError> {
        if Arc::ptr_eq(&self.basis, &other.basis) {
            Ok(())
        } else {
            Err(MatrixError::BasisMismatch)
        }
    }

    fn cols(&self) -> BTreeMap<usize, Vec<(usize, &CRat)>> {
        let mut m: BTreeMap<usize, Vec<(usize, &CRat)>> = BTreeMap::new();
        for (&(r, c), v) in &self.entries {
            m.entry(c).or_default().push((r, v));
        }
        m
    }

    fn rows(&self) -> BTreeMap<usize, Vec<(usize, &CRat)>> {
        let mut m: BTreeMap<usize, Vec<(usize, &CRat)>> = BTreeMap::new();
        for (&(r, c), v) in &self.entries {
            m.entry(r).or_default().push((c, v));
        }
        m
    }

    pub fn add(&self, other: &SparseOp) -> Result<SparseOp, MatrixError> {
        self.same_basis(other)?;
        let mut out = SparseOp::empty(&self.basis);
        out.valid_cols = self.valid_cols.intersection(&other.valid_cols).cloned().collect();
        out.valid_rows = self.valid_rows.intersection(&other.valid_rows).cloned().collect();
        for (&(r, c), v) in &self.entries {
            out.insert(r, c, v.clone());
        }
        for (&(r, c), v) in &other.entries {
            out.insert(r, c, v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SparseOp) -> Result<SparseOp, MatrixError> {
        self.add(&other.scale(&-crate::scalar::cone()))
    }

    pub fn scale(&self, z: &CRat) -> SparseOp {
        let mut out = SparseOp::empty(&self.basis);
        out.valid_cols = self.valid_cols.clone();
        out.valid_rows = self.valid_rows.clone();
        for (&(r, c), v) in &self.entries {
            out.insert(r, c, v * z);
        }
        out
    }

    /// Matrix product. A column of the product is exact when the
    /// corresponding column of `other` is exact and feeds only exact
    /// columns of `self`; dually for rows.
    pub fn mul(&self, other: &SparseOp) -> Result<SparseOp, MatrixError> {
        self.same_basis(other)?;
        let a_cols = self.cols();
        let b_cols = other.cols();
        let mut out = SparseOp::empty(&self.basis);
        for (&y, col) in &b_cols {
            for &(s, bv) in col {
                if let Some(ac) = a_cols.get(&s) {
                    for &(r, av) in ac {
                        out.insert(r, y, av * bv);
                    }
                }
            }
        }
        out.valid_cols = other
            .valid_cols
            .iter()
            .filter(|y| {
                b_cols
                    .get(y)
                    .map(|col| col.iter().all(|(s, _)| self.valid_cols.contains(s)))
                    .unwrap_or(true)
            })
            .cloned()
            .collect();
        let a_rows = self.rows();
        out.valid_rows = self
            .valid_rows
            .iter()
            .filter(|x| {
                a_rows
                    .get(x)
                    .map(|row| row.iter().all(|(s, _)| other.valid_rows.contains(s)))
                    .unwrap_or(true)
            })
            .cloned()
            .collect();
        Ok(out)
    }

    /// Conjugate transpose; valid rows and columns swap roles.
    pub fn adjoint(&self) -> SparseOp {
        let mut out = SparseOp::empty(&self.basis);
        out.valid_cols = self.valid_rows.clone();
        out.valid_rows = self.valid_cols.clone();
        for (&(r, c), v) in &self.entries {
            out.insert(c, r, conj(v));
        }
        out
    }

    /// No stored entry sits in a valid column.
    pub fn is_zero_on_valid(&self) -> bool {
        self.entries.keys().all(|(_, c)| !self.valid_cols.contains(c))
    }

    /// Exact comparison on the jointly valid columns, reporting the first
    /// difference.
    pub fn eq_on_valid(&self, other: &SparseOp) -> Result<EqOutcome, MatrixError> {
        self.same_basis(other)?;
        let common: BTreeSet<usize> =
            self.valid_cols.intersection(&other.valid_cols).cloned().collect();
        let a_cols = self.cols();
        let b_cols = other.cols();
        let none: Vec<(usize, &CRat)> = Vec::new();
        for &y in &common {
            let ac = a_cols.get(&y).unwrap_or(&none);
            let bc = b_cols.get(&y).unwrap_or(&none);
            let rows: BTreeSet<usize> =
                ac.iter().map(|(r, _)| *r).chain(bc.iter().map(|(r, _)| *r)).collect();
            for r in rows {
                let left = self.entry(r, y);
                let right = other.entry(r, y);
                if left != right {
                    return Ok(EqOutcome::Differs(ColumnMismatch {
                        column: y,
                        row: r,
                        left,
                        right,
                    }));
                }
            }
        }
        Ok(EqOutcome::Equal {
            columns: common.len(),
        })
    }
}

/// Basis index of γ_w(x) reached by walking the child table.
fn image_index(basis: &OrbitBasis, x: usize, word: &IndexWord) -> Option<usize> {
    let mut i = x;
    for k in word.application_order() {
        i = basis.child(i, k)?;
    }
    Some(i)
}

/// Chain of basis points from `x` along `word`, also returning the index
/// of the final point.
fn chain_in_basis(basis: &OrbitBasis, x: usize, word: &IndexWord) -> Option<(Chain, usize)> {
    let mut i = x;
    let mut points = vec![basis.point(x).clone()];
    for k in word.application_order() {
        i = basis.child(i, k)?;
        points.push(basis.point(i).clone());
    }
    Some((
        Chain {
            points,
            witness: word.clone(),
        },
        i,
    ))
}

/// ρ_n(f): the column of a basis point x of depth ≤ D−n carries the
/// entries f(γ_w(x), …, x) at the rows γ_w(x), w ∈ I^n.
pub fn rho_n(basis: &Arc<OrbitBasis>, n: u32, f: &ChainFn) -> Result<SparseOp, MatrixError> {
    if f.arity != n as usize {
        return Err(MatrixError::Arity {
            expected: n as usize,
            got: f.arity,
        });
    }
    if n > basis.depth {
        return Err(MatrixError::DepthExceeded {
            n,
            depth: basis.depth,
        });
    }
    let mut op = SparseOp::empty(basis);
    let words = IndexWord::all_of_length(basis.ifs.n_maps(), n as usize);
    for x in 0..basis.len() {
        if basis.depth_of(x) + n <= basis.depth {
            op.valid_cols.insert(x);
            for w in &words {
                let (chain, row) =
                    chain_in_basis(basis, x, w).expect("children exist below the depth cut");
                op.insert(row, x, f.eval(&chain));
            }
        }
        if basis.depth_of(x) >= n {
            op.valid_rows.insert(x);
        }
    }
    Ok(op)
}

/// ρ_{m,n}(f): the column of y = γ_k(x), |k| = n, carries the entries
/// f(γ_j(x), …, x; y, …, x) at the rows γ_j(x), j ∈ I^m. Columns whose
/// witness word is shorter than n are zero and invalid.
pub fn rho_mn(
    basis: &Arc<OrbitBasis>,
    m: u32,
    n: u32,
    f: &BichainFn,
) -> Result<SparseOp, MatrixError> {
    if f.left_arity != m as usize || f.right_arity != n as usize {
        return Err(MatrixError::Arity {
            expected: (m + n) as usize,
            got: f.left_arity + f.right_arity,
        });
    }
    if m.max(n) > basis.depth {
        return Err(MatrixError::DepthExceeded {
            n: m.max(n),
            depth: basis.depth,
        });
    }
    let ifs = &basis.ifs;
    let mut op = SparseOp::empty(basis);
    let left_words = IndexWord::all_of_length(ifs.n_maps(), m as usize);
    for y in 0..basis.len() {
        let wordlen = basis.depth_of(y);
        if wordlen >= n && wordlen - n + m <= basis.depth {
            op.valid_cols.insert(y);
        }
        if wordlen >= m && wordlen - m + n <= basis.depth {
            op.valid_rows.insert(y);
        }
        let Some(x) = basis.strip(y, n) else { continue };
        let k = basis.outer_word(y, n).expect("strip succeeded");
        let right = chain_from(ifs, basis.point(x), &k)?;
        for j in &left_words {
            let Some((left, row)) = chain_in_basis(basis, x, j) else {
                continue; // rows past the depth cut are truncated away
            };
            op.insert(
                row,
                y,
                f.eval(&Bichain {
                    left,
                    right: right.clone(),
                }),
            );
        }
    }
    Ok(op)
}

/// The diagonal compression Φ(a): keeps exactly the diagonal entries.
/// Its column at y is exact once either the column or the row of `a` at y
/// is exact.
pub fn diag_expectation(a: &SparseOp) -> SparseOp {
    let mut out = SparseOp::empty(&a.basis);
    let valid: BTreeSet<usize> = a.valid_cols.union(&a.valid_rows).cloned().collect();
    out.valid_cols = valid.clone();
    out.valid_rows = valid;
    for (&(r, c), v) in &a.entries {
        if r == c {
            out.insert(r, c, v.clone());
        }
    }
    out
}

/// Diagonal / quasi-monomial (at most one entry per row and per column) /
/// general, judged on the stored entries.
pub fn classify_relation(a: &SparseOp) -> RelationClass {
    if a.entries.keys().all(|(r, c)| r == c) {
        return RelationClass::Diagonal;
    }
    let mut row_count: BTreeMap<usize, usize> = BTreeMap::new();
    let mut col_count: BTreeMap<usize, usize> = BTreeMap::new();
    for (r, c) in a.entries.keys() {
        *row_count.entry(*r).or_default() += 1;
        *col_count.entry(*c).or_default() += 1;
    }
    if row_count.values().all(|&n| n <= 1) && col_count.values().all(|&n| n <= 1) {
        RelationClass::QuasiMonomial
    } else {
        RelationClass::General
    }
}

/// The k-th entry function of `a`: the table (x, j) ↦ ⟨e_{γ_j(x)}, a e_x⟩
/// over basis points x of depth ≤ D−k and words |j| = k, zeros included.
pub fn entry_function(
    a: &SparseOp,
    k: u32,
) -> Result<BTreeMap<(usize, IndexWord), CRat>, MatrixError> {
    let basis = &a.basis;
    if k > basis.depth {
        return Err(MatrixError::DepthExceeded {
            n: k,
            depth: basis.depth,
        });
    }
    let words = IndexWord::all_of_length(basis.ifs.n_maps(), k as usize);
    let mut table = BTreeMap::new();
    for x in 0..basis.len() {
        if basis.depth_of(x) + k > basis.depth {
            continue;
        }
        for j in &words {
            let row = image_index(basis, x, j).expect("children exist below the depth cut");
            table.insert((x, j.clone()), a.entry(row, x));
        }
    }
    Ok(table)
}

/// Inner product ⟨f, g⟩(y) = Σ_k conj f(γ_k(y), y) · g(γ_k(y), y) as an
/// exact polynomial on the space.
pub fn inner_product_fn(
    ifs: &AffineIfs,
    f: &ChainFn,
    g: &ChainFn,
) -> Result<ChainFn, MatrixError> {
    Ok(crate::chains::inner_product(ifs, f, g)?)
}

/// One branch of a decomposed degree-1 function: the pair (branch letter,
/// function), acting only along that branch's graph.
#[derive(Debug, Clone)]
pub struct BranchFn {
    pub branch: u32,
    pub f: ChainFn,
}

/// Splits a degree-1 function along the branch graphs. Sound only when
/// the graphs are pairwise disjoint, i.e. under graph separation; anything
/// less is an error.
pub fn split_by_branch(ifs: &AffineIfs, f: &ChainFn) -> Result<Vec<BranchFn>, MatrixError> {
    if f.arity != 1 {
        return Err(MatrixError::Arity {
            expected: 1,
            got: f.arity,
        });
    }
    let sep = check_graph_separation(ifs)?;
    if sep.holds != Tri::True {
        return Err(MatrixError::NotSeparated { notes: sep.notes });
    }
    Ok((1..=ifs.n_maps() as u32)
        .map(|branch| BranchFn {
            branch,
            f: f.clone(),
        })
        .collect())
}

/// Matrix image of a single branch: entries only at (γ_b(x), x). Summing
/// over all branches recovers ρ₁(f).
pub fn rho_one_branch(basis: &Arc<OrbitBasis>, bf: &BranchFn) -> Result<SparseOp, MatrixError> {
    if bf.f.arity != 1 {
        return Err(MatrixError::Arity {
            expected: 1,
            got: bf.f.arity,
        });
    }
    if basis.depth == 0 {
        return Err(MatrixError::DepthExceeded {
            n: 1,
            depth: basis.depth,
        });
    }
    let word = IndexWord::new(vec![bf.branch]);
    let mut op = SparseOp::empty(basis);
    for x in 0..basis.len() {
        if basis.depth_of(x) + 1 <= basis.depth {
            op.valid_cols.insert(x);
            let (chain, row) =
                chain_in_basis(basis, x, &word).expect("children exist below the depth cut");
            op.insert(row, x, bf.f.eval(&chain));
        }
        if basis.depth_of(x) >= 1 {
            op.valid_rows.insert(x);
        }
    }
    Ok(op)
}

#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    /// Power-iteration estimate of the operator norm, floored by the
    /// certified lower bound.
    pub estimate: f64,
    /// Exact lower bound: the largest column 2-norm.
    pub lower_bound: f64,
    pub iterations_used: u32,
    pub converged: bool,
}

/// Operator norm of the truncated matrix via power iteration on a*a with
/// a deterministic all-ones start. The reported estimate is never below
/// the exact max-column-norm lower bound.
pub fn op_norm_estimate(a: &SparseOp, iterations: u32, tol: f64) -> NormEstimate {
    let dim = a.basis.len();
    let mut col_sq: BTreeMap<usize, Rat> = BTreeMap::new();
    for (&(_, c), v) in &a.entries {
        let sq = norm_sqr(v);
        col_sq
            .entry(c)
            .and_modify(|acc| *acc += &sq)
            .or_insert(sq);
    }
    let lower_sq = col_sq.values().map(rat_to_f64).fold(0.0f64, f64::max);
    let lower_bound = lower_sq.sqrt();

    // a*a in f64, applied as two sparse passes: v ↦ a v ↦ a* (a v).
    let fwd: Vec<((usize, usize), Complex64)> = a
        .entries
        .iter()
        .map(|(&(r, c), v)| ((r, c), Complex64::new(rat_to_f64(&v.re), rat_to_f64(&v.im))))
        .collect();
    let apply_gram = |v: &[Complex64]| -> Vec<Complex64> {
        let mut mid = vec![Complex64::new(0.0, 0.0); dim];
        for ((r, c), z) in &fwd {
            mid[*r] += z * v[*c];
        }
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for ((r, c), z) in &fwd {
            out[*c] += z.conj() * mid[*r];
        }
        out
    };

    let mut v: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); dim];
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let n0 = norm(&v);
    if n0 > 0.0 {
        for z in &mut v {
            *z /= n0;
        }
    }
    let mut lambda = 0.0f64;
    let mut used = 0;
    let mut converged = false;
    for it in 1..=iterations {
        let w = apply_gram(&v);
        let rayleigh: f64 = v
            .iter()
            .zip(&w)
            .map(|(x, y)| (x.conj() * y).re)
            .sum();
        let wn = norm(&w);
        used = it;
        if wn == 0.0 {
            lambda = 0.0;
            converged = true;
            break;
        }
        for (z, y) in v.iter_mut().zip(&w) {
            *z = y / wn;
        }
        let rel = if lambda == 0.0 {
            f64::INFINITY
        } else {
            ((rayleigh - lambda) / lambda).abs()
        };
        lambda = rayleigh;
        if rel < tol {
            converged = true;
            break;
        }
    }
    let estimate = lambda.max(0.0).sqrt().max(lower_bound);
    NormEstimate {
        estimate,
        lower_bound,
        iterations_used: used,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::OrbitBasis;
    use crate::chains::{boxdot, boxtimes, left_action};
    use crate::ifs::{AffineMap, OpenSetSpec, SpaceDescriptor};
    use crate::scalar::{cone, creal, rat, rat_int};
    use proptest::prelude::*;

    fn cantor_ifs() -> AffineIfs {
        AffineIfs::new(
            SpaceDescriptor::CantorTernary,
            vec![
                AffineMap::one_d(rat(1, 3), rat_int(0)),
                AffineMap::one_d(rat(1, 3), rat(2, 3)),
            ],
            Some(OpenSetSpec {
                pieces: vec![vec![(rat_int(0), rat_int(1))]],
            }),
        )
        .unwrap()
    }

    fn cantor_basis() -> Arc<OrbitBasis> {
        Arc::new(OrbitBasis::build(cantor_ifs(), vec![vec![rat(2, 3)]], 2).unwrap())
    }

    fn half_maps_ifs() -> AffineIfs {
        AffineIfs::new(
            SpaceDescriptor::Interval {
                lo: rat_int(0),
                hi: rat_int(1),
            },
            vec![
                AffineMap::one_d(rat(1, 2), rat_int(0)),
                AffineMap::one_d(rat(-1, 2), rat_int(1)),
            ],
            None,
        )
        .unwrap()
    }

    fn one(n: usize) -> ChainFn {
        ChainFn::one(n, 1)
    }

    #[test]
    fn rho_zero_is_the_diagonal_of_point_values() {
        let b = cantor_basis();
        let a = rho_n(&b, 0, &ChainFn::parse("t0", 0, 1).unwrap()).unwrap();
        assert_eq!(classify_relation(&a), RelationClass::Diagonal);
        for i in 0..b.len() {
            assert_eq!(a.entry(i, i), creal(b.point(i)[0].clone()));
        }
        assert_eq!(a.valid_cols().len(), 7);
        assert_eq!(a.valid_rows().len(), 7);

        let unit = rho_n(&b, 0, &one(0)).unwrap();
        assert!(unit.eq_on_valid(&SparseOp::identity(&b)).unwrap().is_equal());
    }

    #[test]
    fn rho_one_has_unit_entries_under_both_branches() {
        let b = cantor_basis();
        let e = rho_n(&b, 1, &one(1)).unwrap();
        // Column of 2/3 (index 0): rows 2/9 (index 1) and 8/9 (index 2).
        assert_eq!(e.entry(1, 0), cone());
        assert_eq!(e.entry(2, 0), cone());
        assert_eq!(e.entry(0, 0), czero());
        let vc: Vec<usize> = e.valid_cols().iter().cloned().collect();
        assert_eq!(vc, vec![0, 1, 2]);
        let vr: Vec<usize> = e.valid_rows().iter().cloned().collect();
        assert_eq!(vr, vec![1, 2, 3, 4, 5, 6]);
        // Depth-2 columns are truncated away entirely.
        assert!(e.entries().all(|(_, c, _)| c <= 2));
    }

    #[test]
    fn rho_one_rejects_wrong_arity() {
        let b = cantor_basis();
        let err = rho_n(&b, 1, &one(2)).unwrap_err();
        assert!(matches!(err, MatrixError::Arity { expected: 1, got: 2 }));
        let err = rho_n(&b, 3, &one(3)).unwrap_err();
        assert!(matches!(err, MatrixError::DepthExceeded { n: 3, depth: 2 }));
    }

    #[test]
    fn rho_mn_strips_witness_words() {
        let b = cantor_basis();
        let f = boxtimes(&one(1), &one(1));
        let e = rho_mn(&b, 1, 1, &f).unwrap();
        // Column of 2/9 = γ₁(2/3): strips to 2/3, rows 2/9 and 8/9.
        assert_eq!(e.entry(1, 1), cone());
        assert_eq!(e.entry(2, 1), cone());
        // Column of 2/3 has witness word () shorter than n = 1: zero and
        // invalid.
        assert!(e.entries().all(|(_, c, _)| c != 0));
        assert!(!e.valid_cols().contains(&0));
        assert_eq!(e.valid_cols().len(), 6);
        // Column of 2/27 = γ₁(2/9): strips to 2/9, rows 2/27 and 20/27.
        assert_eq!(e.entry(3, 3), cone());
        assert_eq!(e.entry(5, 3), cone());
    }

    #[test]
    fn rho_mn_with_unequal_degrees_has_zero_diagonal() {
        let b = cantor_basis();
        let f = boxtimes(&one(2), &one(0));
        let e = rho_mn(&b, 2, 0, &f).unwrap();
        // Column of the seed: rows at depth 2, all four unit entries.
        for r in 3..=6 {
            assert_eq!(e.entry(r, 0), cone());
        }
        let vc: Vec<usize> = e.valid_cols().iter().cloned().collect();
        assert_eq!(vc, vec![0]);
        assert!(diag_expectation(&e).is_zero_on_valid());
    }

    #[test]
    fn inner_product_identity_holds_exactly() {
        let b = cantor_basis();
        let f = ChainFn::parse("t1 + i*t0", 1, 1).unwrap();
        let g = ChainFn::parse("t0*t1 - 1/2", 1, 1).unwrap();
        let lhs = rho_n(&b, 1, &f).unwrap().adjoint().mul(&rho_n(&b, 1, &g).unwrap()).unwrap();
        let rhs = rho_n(&b, 0, &inner_product_fn(&b.ifs, &f, &g).unwrap()).unwrap();
        let out = lhs.eq_on_valid(&rhs).unwrap();
        assert_eq!(out, EqOutcome::Equal { columns: 3 });
        assert_eq!(classify_relation(&lhs), RelationClass::Diagonal);
    }

    #[test]
    fn module_identity_holds_exactly() {
        let b = cantor_basis();
        let a = ChainFn::parse("t0^2 - 1/3", 0, 1).unwrap();
        let f = ChainFn::parse("t1 - t0", 1, 1).unwrap();
        let lhs = rho_n(&b, 0, &a).unwrap().mul(&rho_n(&b, 1, &f).unwrap()).unwrap();
        let rhs = rho_n(&b, 1, &left_action(&a, &f)).unwrap();
        assert!(lhs.eq_on_valid(&rhs).unwrap().is_equal());
    }

    #[test]
    fn box_product_identity_holds_exactly() {
        let b = cantor_basis();
        let f = ChainFn::parse("t1", 1, 1).unwrap();
        let g = ChainFn::parse("t0 + 1/4", 1, 1).unwrap();
        let lhs = rho_n(&b, 1, &f).unwrap().mul(&rho_n(&b, 1, &g).unwrap()).unwrap();
        let rhs = rho_n(&b, 2, &boxdot(&f, &g)).unwrap();
        let out = lhs.eq_on_valid(&rhs).unwrap();
        // Only the seed column survives two applications at depth 2.
        assert_eq!(out, EqOutcome::Equal { columns: 1 });
        assert_eq!(
            lhs.valid_cols().iter().cloned().collect::<Vec<_>>(),
            vec![0]
        );
    }

    #[test]
    fn box_adjoint_product_identity_holds_exactly() {
        let b = cantor_basis();
        let f = ChainFn::parse("t0 - i", 1, 1).unwrap();
        let g = ChainFn::parse("t1*t0", 1, 1).unwrap();
        let lhs = rho_n(&b, 1, &f)
            .unwrap()
            .mul(&rho_n(&b, 1, &g).unwrap().adjoint())
            .unwrap();
        let rhs = rho_mn(&b, 1, 1, &boxtimes(&f, &g)).unwrap();
        assert_eq!(
            lhs.valid_cols().iter().cloned().collect::<Vec<_>>(),
            rhs.valid_cols().iter().cloned().collect::<Vec<_>>()
        );
        let out = lhs.eq_on_valid(&rhs).unwrap();
        assert_eq!(out, EqOutcome::Equal { columns: 6 });
    }

    #[test]
    fn adjoint_symmetry_holds_exactly() {
        let b = cantor_basis();
        let f = BichainFn::parse("t1 + i*t2 - t0*t3", 1, 2, 1).unwrap();
        let lhs = rho_mn(&b, 1, 2, &f).unwrap().adjoint();
        let rhs = rho_mn(&b, 2, 1, &f.tilde()).unwrap();
        assert_eq!(
            lhs.valid_cols().iter().cloned().collect::<Vec<_>>(),
            rhs.valid_cols().iter().cloned().collect::<Vec<_>>()
        );
        assert!(lhs.eq_on_valid(&rhs).unwrap().is_equal());
    }

    #[test]
    fn diag_expectation_annihilates_rho_one_and_is_idempotent() {
        let b = cantor_basis();
        let e = rho_n(&b, 1, &one(1)).unwrap();
        let phi = diag_expectation(&e);
        assert!(phi.is_zero_on_valid());
        assert_eq!(phi.valid_cols().len(), 7);
        let a = e.adjoint().mul(&e).unwrap(); // diagonal with column norms²
        let phi_a = diag_expectation(&a);
        assert!(phi_a.eq_on_valid(&a).unwrap().is_equal());
        assert!(diag_expectation(&phi_a).eq_on_valid(&phi_a).unwrap().is_equal());
    }

    #[test]
    fn classification_matches_the_frozen_examples() {
        let b = cantor_basis();
        let e = rho_n(&b, 1, &one(1)).unwrap();
        assert_eq!(classify_relation(&e), RelationClass::General);
        let branch = rho_one_branch(
            &b,
            &BranchFn {
                branch: 2,
                f: one(1),
            },
        )
        .unwrap();
        assert_eq!(classify_relation(&branch), RelationClass::QuasiMonomial);
        assert_eq!(classify_relation(&SparseOp::identity(&b)), RelationClass::Diagonal);
    }

    #[test]
    fn entry_functions_read_rows_at_images() {
        let b = cantor_basis();
        // ρ_{1,0}(1): first entry function is constantly 1.
        let e = rho_mn(&b, 1, 0, &boxtimes(&one(1), &one(0))).unwrap();
        let table = entry_function(&e, 1).unwrap();
        assert_eq!(table.len(), 6); // 3 bases × 2 letters
        assert!(table.values().all(|v| *v == cone()));
        // ρ₀(a): zeroth entry function tabulates a.
        let a = ChainFn::parse("t0", 0, 1).unwrap();
        let d = rho_n(&b, 0, &a).unwrap();
        let table = entry_function(&d, 0).unwrap();
        assert_eq!(table.len(), 7);
        for ((x, _), v) in &table {
            assert_eq!(*v, creal(b.point(*x)[0].clone()));
        }
    }

    #[test]
    fn split_by_branch_requires_graph_separation() {
        let f = one(1);
        let err = split_by_branch(&half_maps_ifs(), &f).unwrap_err();
        assert!(matches!(err, MatrixError::NotSeparated { .. }));

        let parts = split_by_branch(&cantor_ifs(), &f).unwrap();
        assert_eq!(parts.len(), 2);
        let b = cantor_basis();
        let total = parts
            .iter()
            .map(|bf| rho_one_branch(&b, bf).unwrap())
            .reduce(|acc, op| acc.add(&op).unwrap())
            .unwrap();
        let e = rho_n(&b, 1, &f).unwrap();
        assert!(total.eq_on_valid(&e).unwrap().is_equal());
        assert_eq!(
            total.valid_cols().iter().cloned().collect::<Vec<_>>(),
            e.valid_cols().iter().cloned().collect::<Vec<_>>()
        );
    }

    #[test]
    fn norm_of_rho_one_is_sqrt_two() {
        let b = cantor_basis();
        let e = rho_n(&b, 1, &one(1)).unwrap();
        let est = op_norm_estimate(&e, DEFAULT_NORM_ITERATIONS, DEFAULT_NORM_TOL);
        assert!((est.estimate - 2f64.sqrt()).abs() < 1e-9);
        assert!(est.lower_bound <= est.estimate + 1e-15);
        assert!(est.converged);

        let d = rho_n(&b, 0, &ChainFn::parse("t0", 0, 1).unwrap()).unwrap();
        let est = op_norm_estimate(&d, DEFAULT_NORM_ITERATIONS, DEFAULT_NORM_TOL);
        assert!((est.estimate - 26.0 / 27.0).abs() < 1e-9);

        let z = SparseOp::zero(&b);
        let est = op_norm_estimate(&z, DEFAULT_NORM_ITERATIONS, DEFAULT_NORM_TOL);
        assert_eq!(est.estimate, 0.0);
    }

    #[test]
    fn validity_survives_products_the_right_way() {
        let b = cantor_basis();
        let e1 = rho_n(&b, 1, &one(1)).unwrap();
        // ρ₁(1)* ρ₁(1): valid on all depth ≤ 1 columns.
        let g = e1.adjoint().mul(&e1).unwrap();
        assert_eq!(
            g.valid_cols().iter().cloned().collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        // ρ₁(1) ρ₁(1)*: valid exactly where ρ_{1,1} is.
        let h = e1.mul(&e1.adjoint()).unwrap();
        assert_eq!(
            h.valid_cols().iter().cloned().collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5, 6]
        );
        // The identity is neutral without shrinking validity.
        let id = SparseOp::identity(&b);
        let m = id.mul(&e1).unwrap();
        assert!(m.eq_on_valid(&e1).unwrap().is_equal());
        assert_eq!(m.valid_cols().len(), e1.valid_cols().len());
    }

    #[test]
    fn eq_on_valid_reports_the_first_difference() {
        let b = cantor_basis();
        let e = rho_n(&b, 1, &one(1)).unwrap();
        let f = rho_n(&b, 1, &ChainFn::parse("t0", 1, 1).unwrap()).unwrap();
        match e.eq_on_valid(&f).unwrap() {
            EqOutcome::Differs(m) => {
                assert_eq!(e.entry(m.row, m.column), m.left);
                assert_eq!(f.entry(m.row, m.column), m.right);
                assert_ne!(m.left, m.right);
            }
            EqOutcome::Equal { .. } => panic!("operators must differ"),
        }

        let other = Arc::new(OrbitBasis::build(cantor_ifs(), vec![vec![rat(2, 3)]], 2).unwrap());
        let g = rho_n(&other, 1, &one(1)).unwrap();
        assert!(matches!(e.eq_on_valid(&g), Err(MatrixError::BasisMismatch)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // ρ₀ is a *-homomorphism on diagonal functions.
        #[test]
        fn rho_zero_is_multiplicative(
            c in -4i64..5, d in -4i64..5, e in -4i64..5, f in -4i64..5,
        ) {
            let b = cantor_basis();
            let a1 = ChainFn::parse(&format!("{c} + {d}*t0 + i*{e}"), 0, 1).unwrap();
            let a2 = ChainFn::parse(&format!("{f} - {c}*t0^2"), 0, 1).unwrap();
            let prod = ChainFn::new(0, 1, a1.poly.mul(&a2.poly)).unwrap();
            let lhs = rho_n(&b, 0, &a1).unwrap().mul(&rho_n(&b, 0, &a2).unwrap()).unwrap();
            let rhs = rho_n(&b, 0, &prod).unwrap();
            prop_assert!(lhs.eq_on_valid(&rhs).unwrap().is_equal());

            let adj = rho_n(&b, 0, &a1).unwrap().adjoint();
            let conj = rho_n(&b, 0, &a1.conj()).unwrap();
            prop_assert!(adj.eq_on_valid(&conj).unwrap().is_equal());
        }
    }
}
