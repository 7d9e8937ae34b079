//! γ-chains, γ-bichains, and the ⊡ / ⊠ operators on polynomial functions
//! over them.
//!
//! A chain of length n is (x_n, …, x_0) with x_i = γ_{k_i}(x_{i-1});
//! internally points are stored base first (points[i] = x_i), matching
//! the variable layout t0 ↔ x_0, …, tn ↔ x_n.  A bichain is a pair of
//! chains sharing a base; its variable layout is the left block
//! t0..t_m followed by the right block t_{m+1}..t_{m+1+n}.

use thiserror::Error;

use crate::basis::OrbitBasis;
use crate::ifs::{AffineIfs, IfsError, Point};
use crate::poly::{Poly, PolyError};
use crate::scalar::CRat;
use crate::word::IndexWord;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("chain length {n} exceeds the basis depth {depth}")]
    DepthExceeded { n: u32, depth: u32 },
    #[error("expected arity {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Ifs(#[from] IfsError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    /// points[i] = x_i, base first.
    pub points: Vec<Point>,
    /// (k_n, …, k_1), outermost letter first, with x_i = γ_{k_i}(x_{i-1}).
    pub witness: IndexWord,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.witness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.witness.is_empty()
    }

    pub fn base(&self) -> &Point {
        &self.points[0]
    }

    pub fn top(&self) -> &Point {
        self.points.last().expect("chains hold at least the base")
    }

    /// Recomputes every point from the witness word; true iff the stored
    /// points match exactly.
    pub fn revalidates(&self, ifs: &AffineIfs) -> bool {
        if self.points.len() != self.witness.len() + 1 {
            return false;
        }
        let mut x = self.points[0].clone();
        for (letter, expect) in self.witness.application_order().zip(&self.points[1..]) {
            x = match ifs.map(letter) {
                Ok(m) => m.apply(&x),
                Err(_) => return false,
            };
            if &x != expect {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bichain {
    pub left: Chain,
    pub right: Chain,
}

impl Bichain {
    pub fn new(left: Chain, right: Chain) -> Self {
        assert_eq!(left.base(), right.base(), "bichains share a base point");
        Bichain { left, right }
    }
}

/// All truncated chains of length n: bases of depth ≤ depth − n, one
/// chain per length-n word, in basis-then-word order.
pub fn enumerate_chains(basis: &OrbitBasis, n: u32) -> Result<Vec<Chain>, ChainError> {
    if n > basis.depth {
        return Err(ChainError::DepthExceeded {
            n,
            depth: basis.depth,
        });
    }
    let ifs = &basis.ifs;
    let mut out = Vec::new();
    for bp in basis.iter() {
        if bp.word.len() as u32 > basis.depth - n {
            continue;
        }
        for word in IndexWord::all_of_length(ifs.n_maps(), n as usize) {
            let mut points = Vec::with_capacity(n as usize + 1);
            points.push(bp.point.clone());
            let mut x = bp.point.clone();
            for letter in word.application_order() {
                x = ifs.map(letter)?.apply(&x);
                points.push(x.clone());
            }
            out.push(Chain {
                points,
                witness: word,
            });
        }
    }
    Ok(out)
}

/// All truncated bichains with left length m and right length n.
pub fn enumerate_bichains(
    basis: &OrbitBasis,
    m: u32,
    n: u32,
) -> Result<Vec<Bichain>, ChainError> {
    let deeper = m.max(n);
    if deeper > basis.depth {
        return Err(ChainError::DepthExceeded {
            n: deeper,
            depth: basis.depth,
        });
    }
    let ifs = &basis.ifs;
    let mut out = Vec::new();
    for bp in basis.iter() {
        if bp.word.len() as u32 > basis.depth - deeper {
            continue;
        }
        for lw in IndexWord::all_of_length(ifs.n_maps(), m as usize) {
            let left = chain_from(ifs, &bp.point, &lw)?;
            for rw in IndexWord::all_of_length(ifs.n_maps(), n as usize) {
                let right = chain_from(ifs, &bp.point, &rw)?;
                out.push(Bichain {
                    left: left.clone(),
                    right,
                });
            }
        }
    }
    Ok(out)
}

/// The chain obtained by driving `base` through `word` (innermost letter
/// first), recording every intermediate point.
pub fn chain_from(ifs: &AffineIfs, base: &Point, word: &IndexWord) -> Result<Chain, ChainError> {
    let mut points = Vec::with_capacity(word.len() + 1);
    points.push(base.clone());
    let mut x = base.clone();
    for letter in word.application_order() {
        x = ifs.map(letter)?.apply(&x);
        points.push(x.clone());
    }
    Ok(Chain {
        points,
        witness: word.clone(),
    })
}

/// Polynomial function on chains of length `arity`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainFn {
    pub arity: usize,
    pub dim: usize,
    pub poly: Poly,
}

impl ChainFn {
    pub fn new(arity: usize, dim: usize, poly: Poly) -> Result<Self, ChainError> {
        let expected = (arity + 1) * dim;
        if poly.nvars() != expected {
            return Err(ChainError::ArityMismatch {
                expected,
                got: poly.nvars(),
            });
        }
        Ok(ChainFn { arity, dim, poly })
    }

    pub fn parse(src: &str, arity: usize, dim: usize) -> Result<Self, ChainError> {
        Ok(ChainFn {
            arity,
            dim,
            poly: Poly::parse(src, arity + 1, dim)?,
        })
    }

    pub fn one(arity: usize, dim: usize) -> Self {
        ChainFn {
            arity,
            dim,
            poly: Poly::one((arity + 1) * dim),
        }
    }

    pub fn conj(&self) -> Self {
        ChainFn {
            arity: self.arity,
            dim: self.dim,
            poly: self.poly.conj(),
        }
    }

    pub fn eval(&self, chain: &Chain) -> CRat {
        assert_eq!(chain.len(), self.arity, "chain length must match arity");
        let flat: Vec<_> = chain
            .points
            .iter()
            .flat_map(|p| p.iter().cloned())
            .collect();
        self.poly.eval(&flat)
    }
}

/// Polynomial function on bichains; left block first, then right block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BichainFn {
    pub left_arity: usize,
    pub right_arity: usize,
    pub dim: usize,
    pub poly: Poly,
}

impl BichainFn {
    pub fn new(
        left_arity: usize,
        right_arity: usize,
        dim: usize,
        poly: Poly,
    ) -> Result<Self, ChainError> {
        let expected = (left_arity + right_arity + 2) * dim;
        if poly.nvars() != expected {
            return Err(ChainError::ArityMismatch {
                expected,
                got: poly.nvars(),
            });
        }
        Ok(BichainFn {
            left_arity,
            right_arity,
            dim,
            poly,
        })
    }

    pub fn parse(
        src: &str,
        left_arity: usize,
        right_arity: usize,
        dim: usize,
    ) -> Result<Self, ChainError> {
        Ok(BichainFn {
            left_arity,
            right_arity,
            dim,
            poly: Poly::parse(src, left_arity + right_arity + 2, dim)?,
        })
    }

    pub fn eval(&self, z: &Bichain) -> CRat {
        assert_eq!(z.left.len(), self.left_arity);
        assert_eq!(z.right.len(), self.right_arity);
        let flat: Vec<_> = z
            .left
            .points
            .iter()
            .chain(z.right.points.iter())
            .flat_map(|p| p.iter().cloned())
            .collect();
        self.poly.eval(&flat)
    }

    /// f̃(x⃗, y⃗) = conj f(y⃗, x⃗): swaps the blocks and conjugates.
    pub fn tilde(&self) -> BichainFn {
        let (m, n, d) = (self.left_arity, self.right_arity, self.dim);
        let nvars = (m + n + 2) * d;
        let mut map = vec![0usize; nvars];
        for p in 0..=m {
            for c in 0..d {
                // f's left position p reads the new right block.
                map[p * d + c] = (n + 1 + p) * d + c;
            }
        }
        for q in 0..=n {
            for c in 0..d {
                // f's right position q reads the new left block.
                map[(m + 1 + q) * d + c] = q * d + c;
            }
        }
        BichainFn {
            left_arity: n,
            right_arity: m,
            dim: d,
            poly: self.poly.conj().rename_vars(nvars, &map),
        }
    }
}

/// (f ⊡ g)(x_{m+n}, …, x_0) = f(x_{m+n}, …, x_n)·g(x_n, …, x_0).
pub fn boxdot(f: &ChainFn, g: &ChainFn) -> ChainFn {
    assert_eq!(f.dim, g.dim, "dimension mismatch");
    let (m, n, d) = (f.arity, g.arity, f.dim);
    let nvars = (m + n + 1) * d;
    let fp = f.poly.embed(nvars, n * d);
    let gp = g.poly.embed(nvars, 0);
    ChainFn {
        arity: m + n,
        dim: d,
        poly: fp.mul(&gp),
    }
}

/// (f ⊠ g)(x⃗, y⃗) = f(x⃗)·conj g(y⃗).
pub fn boxtimes(f: &ChainFn, g: &ChainFn) -> BichainFn {
    assert_eq!(f.dim, g.dim, "dimension mismatch");
    let (m, n, d) = (f.arity, g.arity, f.dim);
    let nvars = (m + n + 2) * d;
    let fp = f.poly.embed(nvars, 0);
    let gp = g.poly.conj().embed(nvars, (m + 1) * d);
    BichainFn {
        left_arity: m,
        right_arity: n,
        dim: d,
        poly: fp.mul(&gp),
    }
}

/// (a·f)(x_n, …, x_0) = a(x_n)·f(x_n, …, x_0) for a on X₀.
pub fn left_action(a: &ChainFn, f: &ChainFn) -> ChainFn {
    assert_eq!(a.arity, 0, "left action needs a function on X");
    assert_eq!(a.dim, f.dim);
    let lifted = a.poly.embed((f.arity + 1) * f.dim, f.arity * f.dim);
    ChainFn {
        arity: f.arity,
        dim: f.dim,
        poly: lifted.mul(&f.poly),
    }
}

/// (f·a)(x_n, …, x_0) = f(x_n, …, x_0)·a(x_0) for a on X₀.
pub fn right_action(f: &ChainFn, a: &ChainFn) -> ChainFn {
    assert_eq!(a.arity, 0, "right action needs a function on X");
    assert_eq!(a.dim, f.dim);
    let lifted = a.poly.embed((f.arity + 1) * f.dim, 0);
    ChainFn {
        arity: f.arity,
        dim: f.dim,
        poly: lifted.mul(&f.poly),
    }
}

/// ⟨f, g⟩(y) = Σ_k conj f(γ_k(y), y) · g(γ_k(y), y), a function on X.
pub fn inner_product(
    ifs: &AffineIfs,
    f: &ChainFn,
    g: &ChainFn,
) -> Result<ChainFn, ChainError> {
    for h in [f, g] {
        if h.arity != 1 {
            return Err(ChainError::ArityMismatch {
                expected: 1,
                got: h.arity,
            });
        }
    }
    let d = ifs.dim();
    if f.dim != d || g.dim != d {
        return Err(ChainError::DimMismatch {
            left: f.dim,
            right: d,
        });
    }
    let prod = f.poly.conj().mul(&g.poly);
    let mut acc = Poly::zero(d);
    for m in &ifs.maps {
        // Substitution: position 0 stays the base, position 1 becomes
        // the affine image of the base.
        let mut subst = Vec::with_capacity(2 * d);
        for c in 0..d {
            subst.push(Poly::var(d, c));
        }
        for c in 0..d {
            let mut row = Poly::constant(d, crate::scalar::creal(m.offset[c].clone()));
            for (j, a) in m.linear[c].iter().enumerate() {
                row = row.add(
                    &Poly::var(d, j).scale(&crate::scalar::creal(a.clone())),
                );
            }
            subst.push(row);
        }
        acc = acc.add(&prod.subst(&subst));
    }
    ChainFn::new(0, d, acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::OrbitBasis;
    use crate::ifs::{AffineMap, SpaceDescriptor};
    use crate::scalar::{crat, rat, rat_int};
    use proptest::prelude::*;

    fn cantor_basis() -> OrbitBasis {
        let ifs = AffineIfs::new(
            SpaceDescriptor::CantorTernary,
            vec![
                AffineMap::one_d(rat(1, 3), rat_int(0)),
                AffineMap::one_d(rat(1, 3), rat(2, 3)),
            ],
            None,
        )
        .unwrap();
        OrbitBasis::build(ifs, vec![vec![rat(2, 3)]], 2).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        let b = cantor_basis();
        assert_eq!(enumerate_chains(&b, 0).unwrap().len(), 7);
        let ones = enumerate_chains(&b, 1).unwrap();
        assert_eq!(ones.len(), 6);
        let twos = enumerate_chains(&b, 2).unwrap();
        assert_eq!(twos.len(), 4);
        assert!(twos.iter().all(|c| c.base() == &vec![rat(2, 3)]));
        assert!(matches!(
            enumerate_chains(&b, 3),
            Err(ChainError::DepthExceeded { .. })
        ));
        assert_eq!(enumerate_bichains(&b, 1, 1).unwrap().len(), 12);
    }

    #[test]
    fn chains_revalidate() {
        let b = cantor_basis();
        for n in 0..=2 {
            for c in enumerate_chains(&b, n).unwrap() {
                assert!(c.revalidates(&b.ifs));
            }
        }
        // A corrupted chain does not.
        let mut c = enumerate_chains(&b, 1).unwrap().remove(0);
        c.points[1][0] += rat(1, 100);
        assert!(!c.revalidates(&b.ifs));
    }

    #[test]
    fn boxdot_formula() {
        // m = n = 1, f = t1, g = t0 → x2·x0 on X₂.
        let f = ChainFn::parse("t1", 1, 1).unwrap();
        let g = ChainFn::parse("t0", 1, 1).unwrap();
        let h = boxdot(&f, &g);
        assert_eq!(h.poly, Poly::parse("t2*t0", 3, 1).unwrap());
        // m = 0: f reads the top coordinate.
        let f0 = ChainFn::parse("t0", 0, 1).unwrap();
        let g2 = ChainFn::one(2, 1);
        assert_eq!(boxdot(&f0, &g2).poly, Poly::parse("t2", 3, 1).unwrap());
        // Unit law.
        let h2 = boxdot(&ChainFn::one(1, 1), &ChainFn::one(1, 1));
        assert_eq!(h2.poly, Poly::one(3));
    }

    #[test]
    fn boxtimes_conjugates_the_right_factor() {
        let one = ChainFn::one(0, 1);
        let gi = ChainFn::parse("i", 0, 1).unwrap();
        let z = boxtimes(&one, &gi);
        assert_eq!(
            z.poly,
            Poly::constant(2, crat(rat_int(0), rat_int(-1)))
        );
        let f = ChainFn::parse("t1", 1, 1).unwrap();
        let w = boxtimes(&f, &f);
        assert_eq!(w.poly, Poly::parse("t1*t3", 4, 1).unwrap());
    }

    #[test]
    fn tilde_swaps_blocks() {
        let f = ChainFn::parse("t1 + i", 1, 1).unwrap();
        let g = ChainFn::parse("t0^2", 1, 1).unwrap();
        assert_eq!(boxtimes(&f, &g).tilde(), boxtimes(&g, &f));
        // Involution.
        let z = boxtimes(&f, &g);
        assert_eq!(z.tilde().tilde(), z);
    }

    #[test]
    fn inner_product_on_cantor() {
        let b = cantor_basis();
        let one = ChainFn::one(1, 1);
        let ip = inner_product(&b.ifs, &one, &one).unwrap();
        assert_eq!(ip.poly, Poly::constant(1, crat(rat_int(2), rat_int(0))));
        let t1 = ChainFn::parse("t1", 1, 1).unwrap();
        let ip2 = inner_product(&b.ifs, &t1, &t1).unwrap();
        // (y/3)² + (y/3 + 2/3)² = 2/9 y² + 4/9 y + 4/9.
        assert_eq!(
            ip2.poly,
            Poly::parse("2/9*t0^2 + 4/9*t0 + 4/9", 1, 1).unwrap()
        );
    }

    #[test]
    fn actions_read_the_right_ends() {
        let a = ChainFn::parse("t0", 0, 1).unwrap();
        let f = ChainFn::parse("t1*t0", 1, 1).unwrap();
        assert_eq!(left_action(&a, &f).poly, Poly::parse("t1^2*t0", 2, 1).unwrap());
        assert_eq!(right_action(&f, &a).poly, Poly::parse("t1*t0^2", 2, 1).unwrap());
    }

    fn arb_chain_fn(arity: usize) -> impl Strategy<Value = ChainFn> {
        let nvars = arity + 1;
        proptest::collection::vec(
            (
                proptest::collection::vec(0u32..3, nvars),
                -3i64..4,
                -3i64..4,
            ),
            0..4,
        )
        .prop_map(move |terms| {
            let mut p = Poly::zero(nvars);
            for (exp, re, im) in terms {
                let mono = exp
                    .iter()
                    .enumerate()
                    .fold(Poly::one(nvars), |acc, (i, &e)| {
                        acc.mul(&Poly::var(nvars, i).pow(e))
                    });
                p = p.add(&mono.scale(&crat(rat_int(re), rat_int(im))));
            }
            ChainFn::new(arity, 1, p).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn boxdot_is_associative(
            f in arb_chain_fn(1),
            g in arb_chain_fn(0),
            h in arb_chain_fn(2),
        ) {
            let lhs = boxdot(&boxdot(&f, &g), &h);
            let rhs = boxdot(&f, &boxdot(&g, &h));
            prop_assert_eq!(lhs.poly, rhs.poly);
        }

        #[test]
        fn boxdot_evaluates_as_a_product(f in arb_chain_fn(1), g in arb_chain_fn(1)) {
            let b = cantor_basis();
            let prod = boxdot(&f, &g);
            for c in enumerate_chains(&b, 2).unwrap() {
                let upper = Chain {
                    points: c.points[1..].to_vec(),
                    witness: c.witness.outer(1).unwrap(),
                };
                let lower = Chain {
                    points: c.points[..2].to_vec(),
                    witness: c.witness.inner(1).unwrap(),
                };
                prop_assert_eq!(prod.eval(&c), f.eval(&upper) * g.eval(&lower));
            }
        }
    }
}
