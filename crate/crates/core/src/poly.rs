//! Multivariate polynomials with complex-rational coefficients, used as
//! the exactly evaluable function class on chain and bichain spaces.
//!
//! Variables are `t0, t1, …` (one block per chain position, base first);
//! in dimension d > 1 the coordinate form `tK_C` selects coordinate C of
//! position K, so the flat variable index is K·d + C.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, One, Zero};
use thiserror::Error;

use crate::scalar::{conj, CRat, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("variable at position {position}, coordinate {coord} out of range (positions 0..{max_pos}, dimension {dim})")]
    VarOutOfRange {
        position: usize,
        coord: usize,
        max_pos: usize,
        dim: usize,
    },
    #[error("expected a polynomial in {expected} variables, got {got}")]
    ArityMismatch { expected: usize, got: usize },
}

/// Sparse polynomial: exponent vector → nonzero coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, CRat>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: CRat) -> Self {
        let mut p = Poly::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Poly::constant(nvars, CRat::one())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index out of range");
        let mut exp = vec![0; nvars];
        exp[i] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.insert(exp, CRat::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    fn insert_term(&mut self, exp: Vec<u32>, c: CRat) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exp) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    o.insert(s);
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert_term(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exp: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.insert_term(exp, ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, c: &CRat) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, k)| (e.clone(), k * c))
                .collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one(self.nvars);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Coefficient-wise conjugate.  Since all variables take rational
    /// values, this is the pointwise complex conjugate of the function.
    pub fn conj(&self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), conj(c)))
                .collect(),
        }
    }

    pub fn eval(&self, x: &[Rat]) -> CRat {
        assert_eq!(x.len(), self.nvars, "evaluation point has wrong arity");
        // Power table: x_i^e for every exponent that occurs, so each term
        // costs one multiplication per active variable.
        let mut maxdeg = vec![0u32; self.nvars];
        for exp in self.terms.keys() {
            for (m, &e) in maxdeg.iter_mut().zip(exp) {
                *m = (*m).max(e);
            }
        }
        let powers: Vec<Vec<Rat>> = x
            .iter()
            .zip(&maxdeg)
            .map(|(xi, &top)| {
                let mut row = Vec::with_capacity(top as usize + 1);
                row.push(Rat::one());
                for e in 1..=top as usize {
                    let next = &row[e - 1] * xi;
                    row.push(next);
                }
                row
            })
            .collect();
        let mut re = Rat::zero();
        let mut im = Rat::zero();
        for (exp, c) in &self.terms {
            let mut m = Rat::one();
            for (i, &e) in exp.iter().enumerate() {
                if e > 0 {
                    m = &m * &powers[i][e as usize];
                }
            }
            re += &c.re * &m;
            im += &c.im * &m;
        }
        CRat::new(re, im)
    }

    /// Substitute `map[i]` for variable i; all images share a variable set.
    pub fn subst(&self, map: &[Poly]) -> Poly {
        assert_eq!(map.len(), self.nvars, "substitution has wrong arity");
        let target = map.first().map(|p| p.nvars).unwrap_or(0);
        let mut out = Poly::zero(target);
        for (exp, c) in &self.terms {
            let mut term = Poly::constant(target, c.clone());
            for (p, &e) in map.iter().zip(exp) {
                if e > 0 {
                    term = term.mul(&p.pow(e));
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Re-index into a wider variable set: old variable i becomes
    /// `shift + i` among `new_nvars` variables.
    pub fn embed(&self, new_nvars: usize, shift: usize) -> Poly {
        let mut out = Poly::zero(new_nvars);
        for (exp, c) in &self.terms {
            let mut e = vec![0; new_nvars];
            for (i, &k) in exp.iter().enumerate() {
                e[shift + i] = k;
            }
            out.insert_term(e, c.clone());
        }
        out
    }

    /// General re-indexing: old variable i becomes `map[i]`.
    pub fn rename_vars(&self, new_nvars: usize, map: &[usize]) -> Poly {
        assert_eq!(map.len(), self.nvars);
        assert!(map.iter().all(|&j| j < new_nvars));
        let mut out = Poly::zero(new_nvars);
        for (exp, c) in &self.terms {
            let mut e = vec![0; new_nvars];
            for (i, &k) in exp.iter().enumerate() {
                e[map[i]] += k;
            }
            out.insert_term(e, c.clone());
        }
        out
    }

    pub fn parse(src: &str, positions: usize, dim: usize) -> Result<Poly, PolyError> {
        Parser {
            src: src.as_bytes(),
            pos: 0,
            positions,
            dim,
        }
        .parse_all()
    }
}

/// Coefficient as a re-parseable sub-expression.
fn coeff_expr(c: &CRat) -> String {
    use crate::scalar::rat_to_string;
    use num::Signed;
    if c.im.is_zero() {
        rat_to_string(&c.re)
    } else if c.re.is_zero() {
        format!("{}*i", rat_to_string(&c.im))
    } else {
        let sign = if c.im.is_negative() { "-" } else { "+" };
        format!(
            "({} {} {}*i)",
            rat_to_string(&c.re),
            sign,
            rat_to_string(&c.im.abs())
        )
    }
}

impl fmt::Display for Poly {
    /// Prints with dimension-1 variable names (`t0, t1, …` over flat
    /// indices); the output re-parses to the same polynomial with
    /// positions = nvars, dim = 1.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (exp, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", coeff_expr(c))?;
            for (i, &e) in exp.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                write!(f, "*t{i}")?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    positions: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn nvars(&self) -> usize {
        self.positions * self.dim
    }

    fn parse_all(mut self) -> Result<Poly, PolyError> {
        let p = self.expr()?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.err("trailing input"));
        }
        Ok(p)
    }

    fn err(&self, msg: &str) -> PolyError {
        PolyError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn expr(&mut self) -> Result<Poly, PolyError> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                b'-' => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Poly, PolyError> {
        let mut acc = self.factor()?;
        while let Some(b'*') = self.peek() {
            self.bump();
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Poly, PolyError> {
        let base = self.atom()?;
        if let Some(b'^') = self.peek() {
            self.bump();
            let n = self.uint()?;
            return Ok(base.pow(n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly, PolyError> {
        match self.peek() {
            Some(b'-') => {
                self.bump();
                Ok(self.atom()?.neg())
            }
            Some(b'(') => {
                self.bump();
                let p = self.expr()?;
                if self.bump() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(p)
            }
            Some(b'i') => {
                self.bump();
                Ok(Poly::constant(
                    self.nvars(),
                    CRat::new(Rat::zero(), Rat::one()),
                ))
            }
            Some(b't') => {
                self.bump();
                let position = self.uint()? as usize;
                let coord = if self.src.get(self.pos) == Some(&b'_') {
                    self.pos += 1;
                    self.uint()? as usize
                } else {
                    0
                };
                if position >= self.positions || coord >= self.dim {
                    return Err(PolyError::VarOutOfRange {
                        position,
                        coord,
                        max_pos: self.positions,
                        dim: self.dim,
                    });
                }
                Ok(Poly::var(self.nvars(), position * self.dim + coord))
            }
            Some(c) if c.is_ascii_digit() => {
                let num = self.bigint()?;
                let den = if self.peek() == Some(b'/') {
                    self.bump();
                    let d = self.bigint()?;
                    if d.is_zero() {
                        return Err(self.err("zero denominator"));
                    }
                    d
                } else {
                    BigInt::one()
                };
                Ok(Poly::constant(
                    self.nvars(),
                    CRat::new(Rat::new(num, den), Rat::zero()),
                ))
            }
            Some(_) => Err(self.err("expected a number, variable, 'i', or '('")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn uint(&mut self) -> Result<u32, PolyError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected digits"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("integer too large"))
    }

    fn bigint(&mut self) -> Result<BigInt, PolyError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected digits"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .expect("digit run parses as integer"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{crat, rat, rat_int};
    use proptest::prelude::*;

    fn ev1(src: &str, x: i64, y: i64) -> CRat {
        Poly::parse(src, 2, 1).unwrap().eval(&[rat_int(x), rat_int(y)])
    }

    #[test]
    fn parse_and_eval() {
        assert_eq!(ev1("t0^2 - 2*t1 + 3", 2, 1), crat(rat_int(5), rat_int(0)));
        assert_eq!(ev1("i*t0", 3, 0), crat(rat_int(0), rat_int(3)));
        let p = Poly::parse("1/2*t0*t1 - 1/3", 2, 1).unwrap();
        assert_eq!(
            p.eval(&[rat(2, 3), rat(1, 2)]),
            crat(rat(1, 6) - rat(1, 3), rat_int(0))
        );
        assert_eq!(
            Poly::parse("(t0 + 1)^2", 1, 1).unwrap(),
            Poly::parse("t0^2 + 2*t0 + 1", 1, 1).unwrap()
        );
        assert_eq!(ev1("-t0 - -t1", 3, 5), crat(rat_int(2), rat_int(0)));
    }

    #[test]
    fn multiplication_must_be_explicit() {
        assert!(matches!(
            Poly::parse("2t0", 1, 1),
            Err(PolyError::Parse { .. })
        ));
        assert!(matches!(
            Poly::parse("t0 t1", 2, 1),
            Err(PolyError::Parse { .. })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Poly::parse("1/0", 1, 1),
            Err(PolyError::Parse { .. })
        ));
        assert!(matches!(
            Poly::parse("t5", 2, 1),
            Err(PolyError::VarOutOfRange { position: 5, .. })
        ));
        assert!(matches!(
            Poly::parse("t0_1", 1, 1),
            Err(PolyError::VarOutOfRange { coord: 1, .. })
        ));
        assert!(Poly::parse("t0 +", 1, 1).is_err());
        assert!(Poly::parse("(t0", 1, 1).is_err());
    }

    #[test]
    fn coordinate_variables() {
        let p = Poly::parse("t0_0*t1_1", 2, 2).unwrap();
        let v = p.eval(&[rat_int(2), rat_int(3), rat_int(5), rat_int(7)]);
        assert_eq!(v, crat(rat_int(14), rat_int(0)));
    }

    #[test]
    fn conjugation_and_zero_pruning() {
        let p = Poly::parse("i*t0 + 1", 1, 1).unwrap();
        let q = p.conj();
        assert_eq!(q.eval(&[rat_int(2)]), crat(rat_int(1), rat_int(-2)));
        assert!(p.sub(&p).is_zero());
        assert_eq!(Poly::zero(1).total_degree(), 0);
        assert_eq!(Poly::parse("t0^3*t1 + t0", 2, 1).unwrap().total_degree(), 4);
    }

    #[test]
    fn substitution_composes() {
        // f(t0, t1) = t0*t1 + t1; substitute t0 → t0 + 1, t1 → 2.
        let f = Poly::parse("t0*t1 + t1", 2, 1).unwrap();
        let g = f.subst(&[
            Poly::parse("t0 + 1", 1, 1).unwrap(),
            Poly::parse("2", 1, 1).unwrap(),
        ]);
        assert_eq!(g, Poly::parse("2*t0 + 4", 1, 1).unwrap());
    }

    #[test]
    fn embed_shifts_variables() {
        let f = Poly::parse("t0^2", 1, 1).unwrap();
        let g = f.embed(3, 2);
        assert_eq!(
            g.eval(&[rat_int(9), rat_int(9), rat_int(4)]),
            crat(rat_int(16), rat_int(0))
        );
    }

    #[test]
    fn display_round_trips() {
        for src in ["t0^2 + 1/2*t1 + 2", "i*t0 + 3/4", "-t0 + t1^3"] {
            let p = Poly::parse(src, 2, 1).unwrap();
            let q = Poly::parse(&p.to_string(), 2, 1).unwrap();
            assert_eq!(p, q, "display of {src} re-parses to the same polynomial");
        }
    }

    fn arb_poly() -> impl Strategy<Value = Poly> {
        proptest::collection::vec(
            (
                proptest::collection::vec(0u32..3, 2),
                -4i64..5,
                -4i64..5,
            ),
            0..4,
        )
        .prop_map(|terms| {
            let mut p = Poly::zero(2);
            for (exp, re, im) in terms {
                p.insert_term(exp, crat(rat_int(re), rat_int(im)));
            }
            p
        })
    }

    proptest! {
        #[test]
        fn ring_laws_at_points(a in arb_poly(), b in arb_poly(), x in -5i64..6, y in -5i64..6) {
            let pt = [rat_int(x), rat_int(y)];
            let sum = a.add(&b).eval(&pt);
            prop_assert_eq!(sum, a.eval(&pt) + b.eval(&pt));
            let prod = a.mul(&b).eval(&pt);
            prop_assert_eq!(prod, a.eval(&pt) * b.eval(&pt));
            prop_assert_eq!(a.conj().eval(&pt), crate::scalar::conj(&a.eval(&pt)));
        }

        #[test]
        fn zero_coefficients_never_stored(a in arb_poly(), b in arb_poly()) {
            let d = a.sub(&b);
            prop_assert!(d.terms.values().all(|c| !c.is_zero()));
            prop_assert!(a.sub(&a).is_zero());
        }
    }
}
