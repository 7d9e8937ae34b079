//! Runtime verification suites: deterministic fuzzing of the operator
//! identities, graded laws, condition-witness re-verification, and
//! verdict-engine sanity, with machine-re-checkable counterexamples on
//! failure.

use crate::basis::OrbitBasis;
use crate::chains::{
    boxdot, boxtimes, enumerate_bichains, enumerate_chains, left_action, right_action,
    BichainFn, ChainError, ChainFn,
};
use crate::conditions::{
    check_clopen_iterated_image, check_embeddings, check_essential_freeness,
    check_graph_separation, check_open_set_condition, construct_left_inverse, refine_seed_set,
    ConditionError, Tri,
};
use crate::ifs::{AffineIfs, Point};
use crate::linalg::rank_crat;
use crate::matrix::{
    classify_relation, diag_expectation, op_norm_estimate, rho_mn, rho_n, rho_one_branch,
    split_by_branch, BranchFn, EqOutcome, MatrixError, RelationClass, SparseOp,
    DEFAULT_NORM_ITERATIONS, DEFAULT_NORM_TOL,
};
use crate::poly::Poly;
use crate::region::point_in_closed;
use crate::scalar::{crat_to_string, creal, norm_sqr, rat, rat_int, rat_to_f64, CRat, Rat};
use crate::verdict::{Evidence, Verdict, VerdictError};
use crate::word::IndexWord;
use crate::graded::{graded_adjoint, graded_expectation, graded_multiply, GradedOp};
use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

pub const SUITE_NAMES: [&str; 4] = ["conditions", "identities", "graded", "verdict"];

/// Everything needed to re-run a failed check by hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub description: String,
    /// Source forms of the polynomials involved.
    pub polynomials: Vec<String>,
    /// Operator degrees involved, in the order the description uses them.
    pub degrees: Vec<i64>,
    pub column: Option<usize>,
    pub row: Option<usize>,
    pub left: Option<String>,
    pub right: Option<String>,
}

impl Counterexample {
    fn text(description: impl Into<String>) -> Self {
        Counterexample {
            description: description.into(),
            polynomials: Vec::new(),
            degrees: Vec::new(),
            column: None,
            row: None,
            left: None,
            right: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantResult {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub counterexample: Option<Counterexample>,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub suite: String,
    pub invariants: Vec<InvariantResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.passed)
    }
}

/// Running tally for one named invariant: counts checks, keeps the first
/// counterexample.
struct Acc {
    name: &'static str,
    checked: usize,
    failure: Option<Counterexample>,
    notes: String,
}

impl Acc {
    fn new(name: &'static str) -> Self {
        Acc {
            name,
            checked: 0,
            failure: None,
            notes: String::new(),
        }
    }

    fn pass(&mut self) {
        self.checked += 1;
    }

    fn fail(&mut self, ce: Counterexample) {
        self.checked += 1;
        if self.failure.is_none() {
            self.failure = Some(ce);
        }
    }

    fn check(&mut self, ok: bool, ce: impl FnOnce() -> Counterexample) {
        if ok {
            self.pass();
        } else {
            self.fail(ce());
        }
    }

    fn finish(self) -> InvariantResult {
        InvariantResult {
            name: self.name.to_string(),
            passed: self.failure.is_none(),
            checked: self.checked,
            counterexample: self.failure,
            notes: self.notes,
        }
    }
}

fn rand_rat(rng: &mut ChaCha8Rng) -> Rat {
    rat(rng.gen_range(-3i64..=3), rng.gen_range(1i64..=3))
}

fn rand_crat(rng: &mut ChaCha8Rng) -> CRat {
    let re = rand_rat(rng);
    let im = if rng.gen_bool(0.5) {
        rat_int(0)
    } else {
        rand_rat(rng)
    };
    CRat::new(re, im)
}

/// Random polynomial of total degree ≤ `maxdeg` with small rational
/// coefficients; at most four terms.
fn rand_poly(rng: &mut ChaCha8Rng, nvars: usize, maxdeg: u32) -> Poly {
    let terms = rng.gen_range(1..=4usize);
    let mut p = Poly::zero(nvars);
    for _ in 0..terms {
        let deg = rng.gen_range(0..=maxdeg);
        let mut mono = Poly::constant(nvars, rand_crat(rng));
        for _ in 0..deg {
            mono = mono.mul(&Poly::var(nvars, rng.gen_range(0..nvars)));
        }
        p = p.add(&mono);
    }
    p
}

pub(crate) fn rand_chain_fn(rng: &mut ChaCha8Rng, arity: usize, dim: usize) -> ChainFn {
    ChainFn::new(arity, dim, rand_poly(rng, (arity + 1) * dim, 2)).expect("nvars match")
}

pub(crate) fn rand_bichain_fn(rng: &mut ChaCha8Rng, m: usize, n: usize, dim: usize) -> BichainFn {
    BichainFn::new(m, n, dim, rand_poly(rng, (m + n + 2) * dim, 2)).expect("nvars match")
}

fn mismatch_payload(
    description: String,
    polys: Vec<String>,
    degrees: Vec<i64>,
    outcome: &EqOutcome,
) -> Counterexample {
    match outcome {
        EqOutcome::Differs(m) => Counterexample {
            description,
            polynomials: polys,
            degrees,
            column: Some(m.column),
            row: Some(m.row),
            left: Some(crat_to_string(&m.left)),
            right: Some(crat_to_string(&m.right)),
        },
        EqOutcome::Equal { .. } => Counterexample {
            description,
            polynomials: polys,
            degrees,
            column: None,
            row: None,
            left: None,
            right: None,
        },
    }
}

/// What the left side's valid-column set must satisfy relative to the
/// right side's. `Equal` is reserved for identities whose validity is
/// purely structural; where a vanishing entry can empty a column, the
/// product rules legitimately widen the left set, so only ⊇ holds.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Validity {
    Ignore,
    Superset,
    Equal,
}

fn validity_ok(v: Validity, lhs: &SparseOp, rhs: &SparseOp) -> bool {
    match v {
        Validity::Ignore => true,
        Validity::Superset => rhs.valid_cols().is_subset(lhs.valid_cols()),
        Validity::Equal => lhs.valid_cols() == rhs.valid_cols(),
    }
}

/// Compares two operators on valid columns, enforcing the declared
/// validity relation, and records the outcome.
#[allow(clippy::too_many_arguments)]
fn record_eq(
    acc: &mut Acc,
    lhs: &SparseOp,
    rhs: &SparseOp,
    validity: Validity,
    description: &str,
    polys: &[&Poly],
    degrees: &[i64],
) {
    let poly_strings: Vec<String> = polys.iter().map(|p| p.to_string()).collect();
    match lhs.eq_on_valid(rhs) {
        Ok(EqOutcome::Equal { .. }) => {
            if !validity_ok(validity, lhs, rhs) {
                acc.fail(Counterexample {
                    description: format!("{description}: valid-column sets violate the law"),
                    polynomials: poly_strings,
                    degrees: degrees.to_vec(),
                    column: None,
                    row: None,
                    left: Some(format!("{:?}", lhs.valid_cols())),
                    right: Some(format!("{:?}", rhs.valid_cols())),
                });
            } else {
                acc.pass();
            }
        }
        Ok(outcome) => acc.fail(mismatch_payload(
            description.to_string(),
            poly_strings,
            degrees.to_vec(),
            &outcome,
        )),
        Err(e) => acc.fail(Counterexample::text(format!("{description}: {e}"))),
    }
}

/// Identity suite: the representation identities fuzzed over `trials`
/// random polynomial draws, plus the spanning-rank checks.
pub fn run_identities_suite(basis: &Arc<OrbitBasis>, rng_seed: u64, trials: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let ifs = &basis.ifs;
    let dim = ifs.dim();
    let depth = basis.depth;
    let max_deg = depth.min(2) as usize;

    let mut inner = Acc::new("inner-product-identity");
    let mut module = Acc::new("module-identity");
    let mut rmodule = Acc::new("right-module-identity");
    let mut boxp = Acc::new("box-product-identity");
    let mut boxa = Acc::new("box-adjoint-product-identity");
    let mut adjsym = Acc::new("adjoint-symmetry");
    let mut endiag = Acc::new("en-star-en-diagonality");
    let mut unit = Acc::new("unit-identity");
    let mut faithful = Acc::new("faithfulness-evidence");

    for _ in 0..trials {
        let f: Vec<ChainFn> = (0..=max_deg).map(|m| rand_chain_fn(&mut rng, m, dim)).collect();
        let g: Vec<ChainFn> = (0..=max_deg).map(|n| rand_chain_fn(&mut rng, n, dim)).collect();
        let rho_f: Vec<SparseOp> = f
            .iter()
            .enumerate()
            .map(|(m, fm)| rho_n(basis, m as u32, fm).expect("degree within depth"))
            .collect();
        let rho_g: Vec<SparseOp> = g
            .iter()
            .enumerate()
            .map(|(n, gn)| rho_n(basis, n as u32, gn).expect("degree within depth"))
            .collect();

        if max_deg >= 1 {
            // ρ₁(f)*ρ₁(g) = ρ₀(⟨f,g⟩)
            match crate::chains::inner_product(ifs, &f[1], &g[1]) {
                Ok(ip) => {
                    let lhs = rho_f[1].adjoint().mul(&rho_g[1]).expect("same basis");
                    let rhs = rho_n(basis, 0, &ip).expect("degree 0");
                    record_eq(
                        &mut inner,
                        &lhs,
                        &rhs,
                        Validity::Ignore,
                        "rho_1(f)* rho_1(g) = rho_0(<f,g>)",
                        &[&f[1].poly, &g[1].poly, &ip.poly],
                        &[1, 1],
                    );
                }
                Err(e) => inner.fail(Counterexample::text(format!("inner product failed: {e}"))),
            }

            // ρ₀(a)ρ₁(f) = ρ₁(a·f) and ρ₁(f)ρ₀(a) = ρ₁(f·a)
            let lhs = rho_f[0].mul(&rho_g[1]).expect("same basis");
            let rhs = rho_n(basis, 1, &left_action(&f[0], &g[1])).expect("degree 1");
            record_eq(
                &mut module,
                &lhs,
                &rhs,
                Validity::Equal,
                "rho_0(a) rho_1(f) = rho_1(a.f)",
                &[&f[0].poly, &g[1].poly],
                &[0, 1],
            );
            let lhs = rho_g[1].mul(&rho_f[0]).expect("same basis");
            let rhs = rho_n(basis, 1, &right_action(&g[1], &f[0])).expect("degree 1");
            record_eq(
                &mut rmodule,
                &lhs,
                &rhs,
                Validity::Superset,
                "rho_1(f) rho_0(a) = rho_1(f.a)",
                &[&g[1].poly, &f[0].poly],
                &[1, 0],
            );
        }

        // ρ_m(f)ρ_n(g) = ρ_{m+n}(f ⊡ g) wherever m+n fits the depth
        for m in 0..=max_deg {
            for n in 0..=max_deg {
                if m + n <= depth as usize {
                    let lhs = rho_f[m].mul(&rho_g[n]).expect("same basis");
                    let rhs =
                        rho_n(basis, (m + n) as u32, &boxdot(&f[m], &g[n])).expect("fits depth");
                    record_eq(
                        &mut boxp,
                        &lhs,
                        &rhs,
                        Validity::Superset,
                        "rho_m(f) rho_n(g) = rho_{m+n}(f boxdot g)",
                        &[&f[m].poly, &g[n].poly],
                        &[m as i64, n as i64],
                    );
                }

                // ρ_m(f)ρ_n(g)* = ρ_{m,n}(f ⊠ g)
                let lhs = rho_f[m].mul(&rho_g[n].adjoint()).expect("same basis");
                let rhs =
                    rho_mn(basis, m as u32, n as u32, &boxtimes(&f[m], &g[n])).expect("fits");
                record_eq(
                    &mut boxa,
                    &lhs,
                    &rhs,
                    Validity::Superset,
                    "rho_m(f) rho_n(g)* = rho_{m,n}(f boxtimes g)",
                    &[&f[m].poly, &g[n].poly],
                    &[m as i64, n as i64],
                );

                // ρ_{m,n}(h)* = ρ_{n,m}(h̃)
                let h = rand_bichain_fn(&mut rng, m, n, dim);
                let lhs = rho_mn(basis, m as u32, n as u32, &h).expect("fits").adjoint();
                let rhs = rho_mn(basis, n as u32, m as u32, &h.tilde()).expect("fits");
                record_eq(
                    &mut adjsym,
                    &lhs,
                    &rhs,
                    Validity::Equal,
                    "rho_{m,n}(h)* = rho_{n,m}(h tilde)",
                    &[&h.poly],
                    &[m as i64, n as i64],
                );
            }
        }

        // ρ_n(f)*ρ_n(g) is diagonal
        for n in 1..=max_deg {
            let prod = rho_f[n].adjoint().mul(&rho_g[n]).expect("same basis");
            endiag.check(classify_relation(&prod) == RelationClass::Diagonal, || {
                Counterexample {
                    description: "rho_n(f)* rho_n(g) is not diagonal".into(),
                    polynomials: vec![f[n].poly.to_string(), g[n].poly.to_string()],
                    degrees: vec![n as i64],
                    column: None,
                    row: None,
                    left: None,
                    right: None,
                }
            });
        }

        // ρ₀(1) is a two-sided unit
        if max_deg >= 1 {
            let id = SparseOp::identity(basis);
            let a = &rho_f[1];
            let lhs = id.mul(a).expect("same basis");
            record_eq(&mut unit, &lhs, a, Validity::Equal, "rho_0(1) a = a", &[&f[1].poly], &[1]);
            let rhs = a.mul(&id).expect("same basis");
            record_eq(&mut unit, &rhs, a, Validity::Equal, "a rho_0(1) = a", &[&f[1].poly], &[1]);
        }

        // Φ(α*α) vanishes at x exactly when column x of α is empty
        if max_deg >= 1 {
            let alpha = &rho_g[1];
            let phi = diag_expectation(&alpha.adjoint().mul(alpha).expect("same basis"));
            let occupied: BTreeSet<usize> = alpha.entries().map(|(_, c, _)| c).collect();
            for &x in alpha.valid_cols() {
                let diag = phi.entry(x, x);
                faithful.check(diag.is_zero() != occupied.contains(&x), || Counterexample {
                    description: "diag expectation of alpha* alpha disagrees with column support"
                        .into(),
                    polynomials: vec![g[1].poly.to_string()],
                    degrees: vec![1],
                    column: Some(x),
                    row: Some(x),
                    left: Some(crat_to_string(&diag)),
                    right: Some(if occupied.contains(&x) { "occupied" } else { "empty" }.into()),
                });
            }
        }
    }

    let mut spandot = Acc::new("boxdot-spanning");
    let mut spantimes = Acc::new("boxtimes-spanning");
    if depth >= 2 {
        match boxdot_spanning(basis, 1, 1, 2) {
            Ok(s) => {
                spandot.notes = format!(
                    "{} chains, product rank {}, full rank {}",
                    s.chains, s.product_rank, s.full_rank
                );
                spandot.check(s.product_rank == s.full_rank, || {
                    Counterexample::text(format!(
                        "boxdot products span rank {} of {}",
                        s.product_rank, s.full_rank
                    ))
                });
            }
            Err(e) => spandot.fail(Counterexample::text(format!("enumeration failed: {e}"))),
        }
    }
    if depth >= 1 {
        match boxtimes_spanning(basis, 1, 1, 2) {
            Ok(s) => {
                spantimes.notes = format!(
                    "{} bichains, product rank {}, full rank {}",
                    s.chains, s.product_rank, s.full_rank
                );
                spantimes.check(s.product_rank == s.full_rank, || {
                    Counterexample::text(format!(
                        "boxtimes products span rank {} of {}",
                        s.product_rank, s.full_rank
                    ))
                });
            }
            Err(e) => spantimes.fail(Counterexample::text(format!("enumeration failed: {e}"))),
        }
    }

    SuiteReport {
        suite: "identities".into(),
        invariants: vec![
            inner.finish(),
            module.finish(),
            rmodule.finish(),
            boxp.finish(),
            boxa.finish(),
            adjsym.finish(),
            endiag.finish(),
            unit.finish(),
            faithful.finish(),
            spandot.finish(),
            spantimes.finish(),
        ],
    }
}

/// Basis index of γ_w(x), or None past the depth cut.
fn walk(basis: &OrbitBasis, x: usize, word: &IndexWord) -> Option<usize> {
    let mut i = x;
    for k in word.application_order() {
        i = basis.child(i, k)?;
    }
    Some(i)
}

/// All (γ_j(x), γ_k(x)) index pairs with |j| = m, |k| = n.
fn pair_set(basis: &OrbitBasis, m: u32, n: u32) -> BTreeSet<(usize, usize)> {
    let nm = basis.ifs.n_maps();
    let mut out = BTreeSet::new();
    let rows = IndexWord::all_of_length(nm, m as usize);
    let cols = IndexWord::all_of_length(nm, n as usize);
    for x in 0..basis.len() {
        if basis.depth_of(x) + m.max(n) > basis.depth {
            continue;
        }
        for j in &rows {
            let r = walk(basis, x, j).expect("within depth");
            for k in &cols {
                let c = walk(basis, x, k).expect("within depth");
                out.insert((r, c));
            }
        }
    }
    out
}

/// Graded suite: grading laws, support discipline, degree vanishing,
/// entry functions, norm sandwich, and the normalizer fuzz.
pub fn run_graded_suite(basis: &Arc<OrbitBasis>, rng_seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let ifs = &basis.ifs;
    let dim = ifs.dim();
    let depth = basis.depth;
    let max_deg = depth.min(2) as usize;
    let n_maps = ifs.n_maps();

    let mut degadd = Acc::new("graded-degrees-add");
    let mut degneg = Acc::new("graded-adjoint-negates");
    let mut idem = Acc::new("graded-expectation-idempotent");
    let mut annih = Acc::new("graded-expectation-annihilates");
    for _ in 0..20 {
        let m = rng.gen_range(0..=max_deg);
        let n = rng.gen_range(0..=max_deg);
        let f = rand_chain_fn(&mut rng, m, dim);
        let g = rand_chain_fn(&mut rng, n, dim);
        let a = GradedOp::from_component(m as i64, rho_n(basis, m as u32, &f).expect("fits"));
        let b = GradedOp::from_component(n as i64, rho_n(basis, n as u32, &g).expect("fits"));
        match graded_multiply(&a, &b) {
            Ok(p) => degadd.check(p.degrees() == vec![(m + n) as i64], || {
                Counterexample {
                    description: "product degrees are not {m+n}".into(),
                    polynomials: vec![f.poly.to_string(), g.poly.to_string()],
                    degrees: vec![m as i64, n as i64],
                    column: None,
                    row: None,
                    left: None,
                    right: None,
                }
            }),
            Err(e) => degadd.fail(Counterexample::text(format!("product failed: {e}"))),
        }

        let mixed = a.add(&graded_adjoint(&b)).expect("same basis");
        let star = graded_adjoint(&mixed);
        let negated: Vec<i64> = mixed.degrees().iter().map(|k| -k).rev().collect();
        degneg.check(star.degrees() == negated, || {
            Counterexample::text("adjoint degrees are not the negation")
        });
        let back = graded_adjoint(&star);
        let ok = back.degrees() == mixed.degrees()
            && back.degrees().iter().all(|&k| {
                back.component(k)
                    .unwrap()
                    .eq_on_valid(mixed.component(k).unwrap())
                    .map(|o| o.is_equal())
                    .unwrap_or(false)
            });
        degneg.check(ok, || Counterexample::text("adjoint is not an involution"));

        let exp = graded_expectation(&mixed);
        let twice = graded_expectation(&exp);
        let ok = exp.degrees() == twice.degrees()
            && exp.degrees().iter().all(|&k| {
                twice
                    .component(k)
                    .unwrap()
                    .eq_on_valid(exp.component(k).unwrap())
                    .map(|o| o.is_equal())
                    .unwrap_or(false)
            });
        idem.check(ok, || Counterexample::text("expectation is not idempotent"));
        annih.check(exp.support().iter().all(|&k| k == 0), || Counterexample {
            description: "graded expectation kept a nonzero degree".into(),
            polynomials: vec![f.poly.to_string(), g.poly.to_string()],
            degrees: exp.support(),
            column: None,
            row: None,
            left: None,
            right: None,
        });
    }

    // Support discipline and the pair-set grading.
    let mut support = Acc::new("support-discipline");
    let mut disjoint = Acc::new("pair-set-disjointness");
    let mut by_degree: BTreeMap<i64, BTreeSet<(usize, usize)>> = BTreeMap::new();
    for m in 0..=max_deg as u32 {
        for n in 0..=max_deg as u32 {
            let pairs = pair_set(basis, m, n);
            for _ in 0..4 {
                let h = rand_bichain_fn(&mut rng, m as usize, n as usize, dim);
                let op = rho_mn(basis, m, n, &h).expect("fits");
                for (r, c, _) in op.entries() {
                    support.check(pairs.contains(&(r, c)), || Counterexample {
                        description: "entry outside the (m,n) pair set".into(),
                        polynomials: vec![h.poly.to_string()],
                        degrees: vec![m as i64, n as i64],
                        column: Some(c),
                        row: Some(r),
                        left: None,
                        right: None,
                    });
                }
            }
            by_degree
                .entry(m as i64 - n as i64)
                .or_default()
                .extend(pairs);
        }
    }
    let keys: Vec<i64> = by_degree.keys().cloned().collect();
    for (i, a) in keys.iter().enumerate() {
        for b in keys.iter().skip(i + 1) {
            let inter: Vec<_> = by_degree[a].intersection(&by_degree[b]).collect();
            disjoint.check(inter.is_empty(), || Counterexample {
                description: format!("pair sets of degrees {a} and {b} intersect"),
                polynomials: Vec::new(),
                degrees: vec![*a, *b],
                column: inter.first().map(|p| p.1),
                row: inter.first().map(|p| p.0),
                left: None,
                right: None,
            });
        }
    }

    // Off-degree diagonal vanishing, m ≠ n up to 3.
    let mut vanish = Acc::new("degree-off-diagonal-vanishing");
    let mut nonzero_found = 0usize;
    let top = depth.min(3);
    let mut combos: Vec<(u32, u32)> = Vec::new();
    for m in 0..=top {
        for n in 0..=top {
            if m != n {
                combos.push((m, n));
            }
        }
    }
    if !combos.is_empty() {
        for t in 0..100 {
            let (m, n) = combos[t % combos.len()];
            let h = rand_bichain_fn(&mut rng, m as usize, n as usize, dim);
            let op = rho_mn(basis, m, n, &h).expect("fits");
            let bad: Vec<usize> = op
                .entries()
                .filter(|(r, c, _)| r == c)
                .map(|(r, _, _)| r)
                .collect();
            nonzero_found += bad.len();
            vanish.check(bad.is_empty(), || Counterexample {
                description: "off-degree component has a diagonal entry".into(),
                polynomials: vec![h.poly.to_string()],
                degrees: vec![m as i64, n as i64],
                column: bad.first().cloned(),
                row: bad.first().cloned(),
                left: Some(crat_to_string(&op.entry(bad[0], bad[0]))),
                right: Some("0".into()),
            });
        }
    }
    vanish.notes = format!("{nonzero_found} nonzero diagonal entries found");

    // Entry function of ρ_{1,0}(1) is constantly one.
    let mut entryfn = Acc::new("entry-function-constant");
    if depth >= 1 {
        let one = boxtimes(&ChainFn::one(1, dim), &ChainFn::one(0, dim));
        let op = rho_mn(basis, 1, 0, &one).expect("depth >= 1");
        match crate::matrix::entry_function(&op, 1) {
            Ok(table) => {
                for ((x, j), v) in &table {
                    entryfn.check(*v == crate::scalar::cone(), || Counterexample {
                        description: format!("entry function of rho_{{1,0}}(1) at word {j}"),
                        polynomials: vec!["1".into()],
                        degrees: vec![1, 0],
                        column: Some(*x),
                        row: None,
                        left: Some(crat_to_string(v)),
                        right: Some("1".into()),
                    });
                }
            }
            Err(e) => entryfn.fail(Counterexample::text(format!("entry function failed: {e}"))),
        }
    }

    // Norm sandwich for ρ_n(f).
    let mut sandwich = Acc::new("norm-sandwich");
    for _ in 0..20 {
        let n = rng.gen_range(1..=max_deg.max(1)).min(depth as usize);
        if n == 0 {
            continue;
        }
        let f = rand_chain_fn(&mut rng, n, dim);
        let op = rho_n(basis, n as u32, &f).expect("fits");
        let est = op_norm_estimate(&op, DEFAULT_NORM_ITERATIONS, DEFAULT_NORM_TOL);
        let chains = enumerate_chains(basis, n as u32).expect("fits");
        let max_f = chains
            .iter()
            .map(|c| rat_to_f64(&norm_sqr(&f.eval(c))).sqrt())
            .fold(0.0f64, f64::max);
        let upper = (n_maps as f64).powf(n as f64 / 2.0) * max_f + 1e-9;
        let lower = max_f - 1e-9;
        let ok = est.estimate >= lower && est.estimate <= upper;
        sandwich.check(ok, || Counterexample {
            description: format!(
                "norm estimate {} outside [{lower}, {upper}]",
                est.estimate
            ),
            polynomials: vec![f.poly.to_string()],
            degrees: vec![n as i64],
            column: None,
            row: None,
            left: Some(format!("{}", est.estimate)),
            right: Some(format!("[{lower}, {upper}]")),
        });
    }

    // Normalizer law: quasi-monomial α, diagonal β ⇒ α*βα and αβα* diagonal.
    let mut normalizer = Acc::new("normalizer-law");
    if depth >= 1 {
        for _ in 0..100 {
            let factors = if depth >= 2 && rng.gen_bool(0.5) { 2 } else { 1 };
            let mut alpha = SparseOp::identity(basis);
            let mut poly_srcs = Vec::new();
            for _ in 0..factors {
                let branch = rng.gen_range(1..=n_maps as u32);
                let bf = BranchFn {
                    branch,
                    f: rand_chain_fn(&mut rng, 1, dim),
                };
                poly_srcs.push(bf.f.poly.to_string());
                let op = rho_one_branch(basis, &bf).expect("depth >= 1");
                alpha = alpha.mul(&op).expect("same basis");
            }
            let qm = classify_relation(&alpha);
            if qm == RelationClass::General {
                normalizer.fail(Counterexample {
                    description: "branch product is not quasi-monomial".into(),
                    polynomials: poly_srcs.clone(),
                    degrees: vec![factors as i64],
                    column: None,
                    row: None,
                    left: None,
                    right: None,
                });
                continue;
            }
            let b = rand_chain_fn(&mut rng, 0, dim);
            let beta = rho_n(basis, 0, &b).expect("degree 0");
            let left = alpha
                .adjoint()
                .mul(&beta)
                .and_then(|p| p.mul(&alpha))
                .expect("same basis");
            let right = alpha
                .mul(&beta)
                .and_then(|p| p.mul(&alpha.adjoint()))
                .expect("same basis");
            let ok = classify_relation(&left) == RelationClass::Diagonal
                && classify_relation(&right) == RelationClass::Diagonal;
            poly_srcs.push(b.poly.to_string());
            normalizer.check(ok, || Counterexample {
                description: "conjugate of a diagonal by a quasi-monomial is not diagonal".into(),
                polynomials: poly_srcs.clone(),
                degrees: vec![factors as i64],
                column: None,
                row: None,
                left: None,
                right: None,
            });
        }
    }

    // Branch decomposition sums back to ρ₁(f) where separation holds.
    let mut branchdec = Acc::new("branch-decomposition");
    if depth >= 1 {
        for _ in 0..10 {
            let f = rand_chain_fn(&mut rng, 1, dim);
            match split_by_branch(ifs, &f) {
                Ok(parts) => {
                    let total = parts
                        .iter()
                        .map(|bf| rho_one_branch(basis, bf).expect("depth >= 1"))
                        .reduce(|a, b| a.add(&b).expect("same basis"))
                        .expect("at least one branch");
                    let whole = rho_n(basis, 1, &f).expect("depth >= 1");
                    record_eq(
                        &mut branchdec,
                        &total,
                        &whole,
                        Validity::Equal,
                        "sum of branch restrictions = rho_1(f)",
                        &[&f.poly],
                        &[1],
                    );
                }
                Err(MatrixError::NotSeparated { notes }) => {
                    branchdec.notes =
                        format!("decomposition unavailable: graph separation fails ({notes})");
                    branchdec.pass();
                }
                Err(e) => branchdec.fail(Counterexample::text(format!("split failed: {e}"))),
            }
        }
    }

    SuiteReport {
        suite: "graded".into(),
        invariants: vec![
            degadd.finish(),
            degneg.finish(),
            idem.finish(),
            annih.finish(),
            support.finish(),
            disjoint.finish(),
            vanish.finish(),
            entryfn.finish(),
            sandwich.finish(),
            normalizer.finish(),
            branchdec.finish(),
        ],
    }
}

/// Conditions suite: runs every structural check and re-verifies the
/// witnesses it returns by independent exact computation.
pub fn run_conditions_suite(
    ifs: &AffineIfs,
    seeds: &[Point],
    depth: u32,
    resolution: u32,
) -> SuiteReport {
    let mut embed = Acc::new("embeddings-check");
    let r = check_embeddings(ifs);
    let all_invertible = ifs.maps.iter().all(|m| !m.det().is_zero());
    embed.check((r.holds == Tri::True) == all_invertible, || {
        Counterexample::text("embeddings verdict disagrees with the determinants")
    });
    embed.notes = r.notes;

    let mut osc = Acc::new("osc-witness");
    match check_open_set_condition(ifs, None, resolution) {
        Ok(res) => {
            osc.notes = res.notes.clone();
            if res.holds == Tri::False {
                if let Some(w) = &res.witness {
                    let mut verified = w.point.is_some();
                    if let (Some(p), Some((j, k))) = (&w.point, &w.words) {
                        // The system's hull must map over the witness under
                        // both offending branches.
                        let hull = ifs.space.hull();
                        for word in [j, k] {
                            if let Ok(m) = ifs.compose_word(word) {
                                if let Some(bx) = m.image_box(&hull) {
                                    verified &= point_in_closed(p, &bx);
                                }
                            }
                        }
                        if ifs.space.contains(p) == Some(false) {
                            verified = false;
                        }
                    }
                    osc.check(verified, || {
                        Counterexample::text("open-set-condition witness failed re-verification")
                    });
                } else {
                    osc.fail(Counterexample::text("failed check carries no witness"));
                }
            } else {
                osc.pass();
            }
        }
        Err(ConditionError::OpenSetRequired) => {
            osc.notes = "no candidate open set supplied; check skipped".into();
        }
        Err(e) => osc.fail(Counterexample::text(format!("checker error: {e}"))),
    }

    let mut sep = Acc::new("graph-separation-witness");
    match check_graph_separation(ifs) {
        Ok(res) => {
            sep.notes = res.notes.clone();
            if res.holds == Tri::False {
                let ok = match &res.witness {
                    Some(w) => match (&w.point, &w.words) {
                        (Some(p), Some((j, k))) => {
                            let a = ifs.compose_word(j).map(|m| m.apply(p));
                            let b = ifs.compose_word(k).map(|m| m.apply(p));
                            matches!((a, b), (Ok(x), Ok(y)) if x == y)
                        }
                        _ => false,
                    },
                    None => false,
                };
                sep.check(ok, || {
                    Counterexample::text("graph-separation witness failed exact re-verification")
                });
            } else {
                sep.pass();
            }
        }
        Err(e) => sep.fail(Counterexample::text(format!("checker error: {e}"))),
    }

    let mut free = Acc::new("essential-freeness-witness");
    match check_essential_freeness(ifs, depth) {
        Ok(res) => {
            free.notes = res.notes.clone();
            if res.holds == Tri::False {
                let ok = match &res.witness {
                    Some(w) => match &w.words {
                        Some((u, v)) => {
                            let a = ifs.compose_word(u);
                            let b = ifs.compose_word(v);
                            matches!(
                                (a, b),
                                (Ok(x), Ok(y)) if x.linear == y.linear && x.offset == y.offset
                            )
                        }
                        None => false,
                    },
                    None => false,
                };
                free.check(ok, || {
                    Counterexample::text("freeness witness words do not compose to equal maps")
                });
            } else {
                free.pass();
            }
        }
        Err(e) => free.fail(Counterexample::text(format!("checker error: {e}"))),
    }

    let mut sigma = Acc::new("sigma-consistency");
    match construct_left_inverse(ifs) {
        Ok(res) => {
            sigma.notes = res.notes.clone();
            if res.consistent {
                // σ really is a left inverse: σ∘γ_k = id on samples.
                let mut samples: Vec<Point> = crate::ifs::box_vertices(&ifs.space.hull());
                if let Ok(s) = ifs.space_sample() {
                    samples.push(s);
                }
                for (k, branch) in res.branches.iter().enumerate() {
                    if let Ok(map) = ifs.map(k as u32 + 1) {
                        for x in &samples {
                            let image = map.apply(x);
                            sigma.check(branch.inverse.apply(&image) == *x, || {
                                Counterexample::text(format!(
                                    "sigma branch {} is not a left inverse",
                                    k + 1
                                ))
                            });
                        }
                    }
                }
            } else {
                // Every witness must genuinely sit in two branch regions,
                // and at least one must exhibit an exact disagreement.
                let mut disagrees = false;
                for v in &res.overlap_witnesses {
                    let mut shared = false;
                    for (i, bi) in res.branches.iter().enumerate() {
                        for bj in res.branches.iter().skip(i + 1) {
                            if point_in_closed(v, &bi.region) && point_in_closed(v, &bj.region) {
                                shared = true;
                                if bi.inverse.apply(v) != bj.inverse.apply(v) {
                                    disagrees = true;
                                }
                            }
                        }
                    }
                    sigma.check(shared, || {
                        Counterexample::text("overlap witness lies in fewer than two regions")
                    });
                }
                sigma.check(disagrees, || {
                    Counterexample::text("inconsistent sigma shows no branch disagreement")
                });
            }
        }
        Err(e) => {
            sigma.notes = format!("left inverse unavailable: {e}");
            sigma.pass();
        }
    }

    let mut clopen = Acc::new("clopen-witness");
    let res = check_clopen_iterated_image(ifs, depth.max(1));
    clopen.notes = res.notes.clone();
    if res.holds == Tri::False {
        let ok = match &res.witness {
            Some(w) => match &w.point {
                Some(p) => {
                    let hull = ifs.space.hull();
                    let in_space = ifs.space.contains(p) != Some(false);
                    let uncovered = ifs.maps.iter().all(|m| {
                        m.image_box(&hull)
                            .map(|bx| !point_in_closed(p, &bx))
                            .unwrap_or(false)
                    });
                    in_space && uncovered
                }
                None => false,
            },
            None => false,
        };
        clopen.check(ok, || {
            Counterexample::text("clopen-image witness is covered after all")
        });
    } else {
        clopen.pass();
    }

    let mut refine = Acc::new("seed-refinement-idempotent");
    match refine_seed_set(ifs, seeds, depth) {
        Ok(out) => {
            for removed in &out.removed {
                let ok = match (&removed.words, &removed.at_point) {
                    // Wordless removals are only issued for seeds outside
                    // the declared open set; re-check membership directly.
                    (None, None) => ifs
                        .open_set
                        .as_ref()
                        .map(|u| {
                            !u.pieces
                                .iter()
                                .any(|b| crate::region::point_in_open(&removed.seed, b))
                        })
                        .unwrap_or(false),
                    (Some((u, v)), Some(p)) => {
                        let hits_v = ifs
                            .compose_word(v)
                            .map(|m| m.apply(&removed.seed) == *p)
                            .unwrap_or(false);
                        let hits_u = ifs
                            .compose_word(u)
                            .map(|m| m.apply(&removed.seed) == *p)
                            .unwrap_or(false)
                            || out.kept.iter().any(|s| {
                                ifs.compose_word(u).map(|m| m.apply(s) == *p).unwrap_or(false)
                            });
                        hits_v && hits_u
                    }
                    _ => false,
                };
                refine.check(ok, || {
                    Counterexample::text("removed seed's collision words failed re-verification")
                });
            }
            match refine_seed_set(ifs, &out.kept, depth) {
                Ok(again) => {
                    refine.check(again.removed.is_empty() && again.kept == out.kept, || {
                        Counterexample::text("refinement is not idempotent on survivors")
                    });
                }
                Err(e) => refine.fail(Counterexample::text(format!("re-refinement failed: {e}"))),
            }
        }
        Err(e) => {
            refine.notes = format!("refinement unavailable: {e}");
        }
    }

    SuiteReport {
        suite: "conditions".into(),
        invariants: vec![
            embed.finish(),
            osc.finish(),
            sep.finish(),
            free.finish(),
            sigma.finish(),
            clopen.finish(),
            refine.finish(),
        ],
    }
}

/// Verdict suite: structural sanity of an already-computed verdict.
pub fn run_verdict_suite(outcome: &Result<Verdict, VerdictError>) -> SuiteReport {
    let mut monotone = Acc::new("cartan-implies-masa");
    let mut citations = Acc::new("citation-completeness");
    let mut consistent = Acc::new("evidence-consistency");
    match outcome {
        Ok(v) => {
            monotone.check(
                v.cartan != crate::verdict::CartanVerdict::True
                    || v.masa == crate::verdict::MasaVerdict::True,
                || Counterexample::text("cartan = true without masa = true"),
            );
            let masa_ok = if v.masa == crate::verdict::MasaVerdict::Inconclusive {
                !v.failed_hypotheses.is_empty()
            } else {
                !v.applied.is_empty()
            };
            citations.check(masa_ok, || {
                Counterexample::text("decided verdict without citations, or inconclusive without blockers")
            });
            let cartan_ok = match v.cartan {
                crate::verdict::CartanVerdict::True | crate::verdict::CartanVerdict::False => {
                    v.applied.iter().any(|c| c == crate::verdict::CITE_CARTAN)
                }
                _ => true,
            };
            citations.check(cartan_ok, || {
                Counterexample::text("cartan decided without citing its theorem")
            });
            consistent.pass();
        }
        Err(VerdictError::Contradiction(msg)) => {
            consistent.fail(Counterexample::text(format!(
                "evidence contradicts the theorem-derived conclusion: {msg}"
            )));
        }
        Err(e) => {
            consistent.fail(Counterexample::text(format!("verdict unavailable: {e}")));
        }
    }
    SuiteReport {
        suite: "verdict".into(),
        invariants: vec![monotone.finish(), citations.finish(), consistent.finish()],
    }
}

/// Advisory evidence assembled from suite outcomes, for the verdict
/// engine's contradiction check.
pub fn evidence_from_reports(reports: &[SuiteReport]) -> Evidence {
    let mut ev = Evidence::default();
    for rep in reports {
        match rep.suite.as_str() {
            "identities" => {
                for inv in &rep.invariants {
                    if inv.passed {
                        ev.identity_checks_passed += inv.checked;
                    } else {
                        ev.identity_checks_failed += 1;
                    }
                }
            }
            "graded" => {
                for inv in &rep.invariants {
                    if inv.name == "degree-off-diagonal-vanishing" && !inv.passed {
                        ev.off_degree_diagonal_nonzero += 1;
                    }
                }
            }
            _ => {}
        }
    }
    ev.notes = format!(
        "{} identity checks passed, {} invariants failed",
        ev.identity_checks_passed, ev.identity_checks_failed
    );
    ev
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanningRank {
    pub chains: usize,
    pub product_rank: usize,
    pub full_rank: usize,
}

fn monomials(nvars: usize, maxdeg: u32) -> Vec<Vec<u32>> {
    fn rec(i: usize, nvars: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == nvars {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(i + 1, nvars, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, nvars, maxdeg, &mut Vec::new(), &mut out);
    out
}

fn eval_monomial(mono: &[u32], coords: &[Rat]) -> Rat {
    let mut v = rat_int(1);
    for (e, x) in mono.iter().zip(coords) {
        for _ in 0..*e {
            v *= x;
        }
    }
    v
}

fn flat(points: &[Point]) -> Vec<Rat> {
    points.iter().flat_map(|p| p.iter().cloned()).collect()
}

/// Rank of the ⊡-product evaluation matrix vs. the full polynomial matrix
/// on the enumerated chains of X_{m+n}; the two agree exactly when the
/// products span.
pub fn boxdot_spanning(
    basis: &OrbitBasis,
    m: u32,
    n: u32,
    factor_deg: u32,
) -> Result<SpanningRank, ChainError> {
    let dim = basis.ifs.dim();
    let chains = enumerate_chains(basis, m + n)?;
    let top = monomials((m as usize + 1) * dim, factor_deg);
    let bottom = monomials((n as usize + 1) * dim, factor_deg);
    let mut rows: Vec<Vec<CRat>> = Vec::new();
    for pm in &top {
        for qm in &bottom {
            rows.push(
                chains
                    .iter()
                    .map(|c| {
                        let pts = flat(&c.points);
                        let split = (n as usize) * dim;
                        creal(eval_monomial(pm, &pts[split..]) * eval_monomial(qm, &pts[..=split + dim - 1]))
                    })
                    .collect(),
            );
        }
    }
    let full: Vec<Vec<CRat>> = monomials((m as usize + n as usize + 1) * dim, 2 * factor_deg)
        .iter()
        .map(|mono| {
            chains
                .iter()
                .map(|c| creal(eval_monomial(mono, &flat(&c.points))))
                .collect()
        })
        .collect();
    Ok(SpanningRank {
        chains: chains.len(),
        product_rank: rank_crat(&rows),
        full_rank: rank_crat(&full),
    })
}

/// Same comparison for ⊠ products on the X_{m,n} bichains.
pub fn boxtimes_spanning(
    basis: &OrbitBasis,
    m: u32,
    n: u32,
    factor_deg: u32,
) -> Result<SpanningRank, ChainError> {
    let dim = basis.ifs.dim();
    let bichains = enumerate_bichains(basis, m, n)?;
    let left = monomials((m as usize + 1) * dim, factor_deg);
    let right = monomials((n as usize + 1) * dim, factor_deg);
    let mut rows: Vec<Vec<CRat>> = Vec::new();
    for pm in &left {
        for qm in &right {
            rows.push(
                bichains
                    .iter()
                    .map(|b| {
                        creal(
                            eval_monomial(pm, &flat(&b.left.points))
                                * eval_monomial(qm, &flat(&b.right.points)),
                        )
                    })
                    .collect(),
            );
        }
    }
    let full: Vec<Vec<CRat>> =
        monomials((m as usize + n as usize + 2) * dim, 2 * factor_deg)
            .iter()
            .map(|mono| {
                bichains
                    .iter()
                    .map(|b| {
                        let mut coords = flat(&b.left.points);
                        coords.extend(flat(&b.right.points));
                        creal(eval_monomial(mono, &coords))
                    })
                    .collect()
            })
            .collect();
    Ok(SpanningRank {
        chains: bichains.len(),
        product_rank: rank_crat(&rows),
        full_rank: rank_crat(&full),
    })
}
