//! Structural conditions on an affine IFS: open set condition, graph
//! separation, essential freeness, seed refinement, branchwise left
//! inverses, and clopen iterated images.
//!
//! Every definite verdict (`True`/`False`) is decided in exact rational
//! arithmetic and, when negative, carries a witness that re-checks by
//! evaluating the relevant maps. `Unknown` records why certification was
//! not possible.

use crate::cantor;
use crate::chains::{Chain, ChainFn};
use crate::ifs::{
    box_vertices, point_to_string, AffineIfs, AffineMap, IfsError, OpenSetSpec, Point,
    SpaceDescriptor,
};
use crate::linalg::{self, LinSolve};
use crate::region::{self, BoxR};
use crate::scalar::{czero, rat, rat_to_string, Rat};
use crate::word::IndexWord;
use num::Zero;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Depth of the orbit outer approximation used when a coincidence point
/// must be located inside a generic attractor.
const ATTRACTOR_APPROX_DEPTH: u32 = 12;

/// Cell resolution for the certificate recorded by internal open-set
/// checks (the fast essential-freeness path).
const INTERNAL_CERT_RESOLUTION: u32 = 6;

#[derive(Debug, Error)]
pub enum ConditionError {
    #[error("open set required: no candidate open set U was supplied")]
    OpenSetRequired,
    #[error("map {index} is not invertible, so it admits no branchwise left inverse")]
    NotInvertible { index: u32 },
    #[error("no admissible seeds: all {count} candidates were removed")]
    NoAdmissibleSeeds { count: usize },
    #[error("seed {point} lies outside the space")]
    SeedOutsideSpace { point: String },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Ifs(#[from] IfsError),
}

/// Three-valued outcome of a structural check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    Unknown,
}

/// How a condition result was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExactAffine,
    ContractionCriterion,
    CoverApproximate,
    UserAsserted,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::ExactAffine => "exact-affine",
            Method::ContractionCriterion => "contraction-criterion",
            Method::CoverApproximate => "cover-approximate",
            Method::UserAsserted => "user-asserted",
        }
    }
}

/// Certificate attached to a definite negative (and occasionally positive)
/// answer: a point, a pair of words, or both.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Witness {
    pub point: Option<Point>,
    pub words: Option<(IndexWord, IndexWord)>,
}

#[derive(Debug, Clone)]
pub struct ConditionResult {
    pub holds: Tri,
    pub witness: Option<Witness>,
    pub method: Method,
    /// Cell or orbit resolution, recorded whenever a cover-based
    /// certificate participated in the answer.
    pub resolution: Option<u32>,
    pub notes: String,
}

impl ConditionResult {
    fn definite(holds: Tri, method: Method, notes: String) -> Self {
        ConditionResult {
            holds,
            witness: None,
            method,
            resolution: None,
            notes,
        }
    }
}

/// One branch of a left inverse: an exact inverse map valid on a closed
/// box region containing the branch image.
#[derive(Debug, Clone)]
pub struct SigmaBranch {
    pub region: BoxR,
    pub inverse: AffineMap,
}

#[derive(Debug, Clone)]
pub struct SigmaResult {
    pub branches: Vec<SigmaBranch>,
    pub consistent: bool,
    /// Points where two branch regions meet; when `consistent` is true,
    /// all branch inverses agree exactly at every one of them.
    pub overlap_witnesses: Vec<Point>,
    pub notes: String,
}

/// A seed discarded by `refine_seed_set`, with the exact collision that
/// disqualified it.
#[derive(Debug, Clone)]
pub struct RemovedSeed {
    pub seed: Point,
    pub words: Option<(IndexWord, IndexWord)>,
    pub at_point: Option<Point>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub kept: Vec<Point>,
    pub removed: Vec<RemovedSeed>,
}

/// Are all maps embeddings, i.e. injective affine maps (nonzero
/// determinant)?
pub fn check_embeddings(ifs: &AffineIfs) -> ConditionResult {
    for (k, m) in ifs.maps.iter().enumerate() {
        if m.det().is_zero() {
            let w = IndexWord::new(vec![k as u32 + 1]);
            return ConditionResult {
                holds: Tri::False,
                witness: Some(Witness {
                    point: None,
                    words: Some((w.clone(), w)),
                }),
                method: Method::ExactAffine,
                resolution: None,
                notes: format!("map {} has determinant 0 and is not injective", k + 1),
            };
        }
    }
    ConditionResult::definite(
        Tri::True,
        Method::ExactAffine,
        "all maps have nonzero determinant".into(),
    )
}

/// The open set condition for the candidate set `u` (falling back to the
/// one attached to the system): the images γ_k(U) must be pairwise
/// disjoint, contained in U, and U must be dense in X.
pub fn check_open_set_condition(
    ifs: &AffineIfs,
    u: Option<&OpenSetSpec>,
    resolution: u32,
) -> Result<ConditionResult, ConditionError> {
    let u = u
        .or(ifs.open_set.as_ref())
        .ok_or(ConditionError::OpenSetRequired)?;
    match &ifs.space {
        SpaceDescriptor::CantorTernary => Ok(osc_cantor(ifs, u, resolution)),
        SpaceDescriptor::Interval { .. } | SpaceDescriptor::Box { .. } => Ok(osc_box(ifs, u)),
        SpaceDescriptor::AttractorGeneric { .. } => Ok(ConditionResult {
            holds: Tri::Unknown,
            witness: None,
            method: Method::CoverApproximate,
            resolution: Some(resolution),
            notes: "generic attractor: exact image regions are unavailable, so none of the \
                    three sub-checks was certified"
                .into(),
        }),
    }
}

/// Per-axis intersection of an open box with the closed hull; `None` when
/// empty. Points on the hull boundary are conservatively treated as
/// outside U.
fn clip_open_box(p: &BoxR, hull: &BoxR) -> Option<BoxR> {
    let mut out = Vec::with_capacity(p.len());
    for ((lo, hi), (hlo, hhi)) in p.iter().zip(hull) {
        let lo = std::cmp::max(lo, hlo).clone();
        let hi = std::cmp::min(hi, hhi).clone();
        if lo >= hi {
            return None;
        }
        out.push((lo, hi));
    }
    Some(out)
}

fn osc_box(ifs: &AffineIfs, u: &OpenSetSpec) -> ConditionResult {
    let hull = ifs.space.hull();
    let mut pieces: Vec<BoxR> = Vec::new();
    let mut clipped = false;
    for p in &u.pieces {
        match clip_open_box(p, &hull) {
            Some(q) => {
                clipped |= q != *p;
                pieces.push(q);
            }
            None => clipped = true,
        }
    }

    // images[k] = image boxes of the clipped pieces under map k+1
    let mut images: Vec<Vec<BoxR>> = Vec::new();
    for m in &ifs.maps {
        let mut per = Vec::new();
        for p in &pieces {
            match m.image_box(p) {
                Some(b) => per.push(b),
                None => {
                    return ConditionResult::definite(
                        Tri::Unknown,
                        Method::ExactAffine,
                        "non-diagonal linear part in dimension ≥ 2: exact open-set region \
                         arithmetic is unavailable"
                            .into(),
                    );
                }
            }
        }
        images.push(per);
    }

    let half = rat(1, 2);
    let mut disjoint_fail: Option<(usize, usize, Point)> = None;
    'pairs: for j in 0..images.len() {
        for k in j + 1..images.len() {
            for a in &images[j] {
                for b in &images[k] {
                    if !region::open_disjoint(a, b) {
                        let mid: Point = a
                            .iter()
                            .zip(b)
                            .map(|((l1, h1), (l2, h2))| {
                                (std::cmp::max(l1, l2) + std::cmp::min(h1, h2)) * &half
                            })
                            .collect();
                        disjoint_fail = Some((j, k, mid));
                        break 'pairs;
                    }
                }
            }
        }
    }

    let mut contain_fail: Option<(usize, Point)> = None;
    'maps: for (k, per) in images.iter().enumerate() {
        for img in per {
            if let Err(p) = region::open_subset_of_union(img, &pieces) {
                contain_fail = Some((k, p));
                break 'maps;
            }
        }
    }

    let dense_fail = region::open_union_dense_in(&hull, &pieces).err();

    assemble_osc(
        disjoint_fail,
        contain_fail,
        dense_fail,
        None,
        if clipped {
            vec!["pieces exceeding the hull were clipped, shrinking U conservatively".into()]
        } else {
            vec![]
        },
    )
}

fn osc_cantor(ifs: &AffineIfs, u: &OpenSetSpec, resolution: u32) -> ConditionResult {
    let zero = Rat::zero();
    let one = Rat::from_integer(1.into());
    let mut pieces: Vec<(Rat, Rat)> = Vec::new();
    let mut clipped = false;
    for p in &u.pieces {
        let (lo, hi) = &p[0];
        let lo = std::cmp::max(lo, &zero).clone();
        let hi = std::cmp::min(hi, &one).clone();
        if lo < hi {
            clipped |= (lo.clone(), hi.clone()) != p[0];
            pieces.push((lo, hi));
        } else {
            clipped = true;
        }
    }

    // Cell maps carry C onto C ∩ cell, so γ_k(U ∩ C) = γ_k(U) ∩ C and
    // every sub-check reduces to "does C meet this rational interval".
    let image = |m: &AffineMap, (lo, hi): &(Rat, Rat)| -> (Rat, Rat) {
        (m.apply(&[lo.clone()])[0].clone(), m.apply(&[hi.clone()])[0].clone())
    };

    let mut disjoint_fail: Option<(usize, usize, Point)> = None;
    'pairs: for j in 0..ifs.maps.len() {
        for k in j + 1..ifs.maps.len() {
            for p in &pieces {
                for q in &pieces {
                    let (a1, b1) = image(&ifs.maps[j], p);
                    let (a2, b2) = image(&ifs.maps[k], q);
                    let lo = std::cmp::max(a1, a2);
                    let hi = std::cmp::min(b1, b2);
                    if let Some(w) = cantor::find_witness(&lo, true, &hi, true) {
                        disjoint_fail = Some((j, k, vec![w]));
                        break 'pairs;
                    }
                }
            }
        }
    }

    let merged = merge_open_intervals(&pieces);
    let gaps = gaps_in_unit(&merged);

    let mut contain_fail: Option<(usize, Point)> = None;
    'maps: for (k, m) in ifs.maps.iter().enumerate() {
        for p in &pieces {
            let (a, b) = image(m, p);
            for (g1, g2) in &gaps {
                let lo = std::cmp::max(&a, g1);
                let hi = std::cmp::min(&b, g2);
                if let Some(w) = cantor::find_witness(lo, &a >= g1, hi, &b <= g2) {
                    contain_fail = Some((k, vec![w]));
                    break 'maps;
                }
            }
        }
    }

    let mut dense_fail: Option<Point> = None;
    for (g1, g2) in &gaps {
        if g1 < g2 {
            if let Some(w) = cantor::find_witness(g1, true, g2, true) {
                dense_fail = Some(vec![w]);
                break;
            }
        }
    }

    let mut extra = Vec::new();
    if clipped {
        extra.push("pieces exceeding [0, 1] were clipped, shrinking U conservatively".into());
    }
    if dense_fail.is_none() {
        // Independent cover certificate: every admissible cell of the
        // given depth meets U, exactly.
        let mut cert = true;
        for (clo, chi) in cantor::cells(resolution) {
            let hit = pieces.iter().any(|(a, b)| {
                let lo = std::cmp::max(&clo, a);
                let hi = std::cmp::min(&chi, b);
                cantor::meets(lo, a >= &clo, hi, b <= &chi)
            });
            if !hit {
                cert = false;
                extra.push(format!(
                    "cell certificate at resolution {resolution}: fail at the cell starting {}",
                    rat_to_string(&clo)
                ));
                break;
            }
        }
        if cert {
            extra.push(format!("cell certificate at resolution {resolution}: pass"));
        }
    }

    assemble_osc(disjoint_fail, contain_fail, dense_fail, Some(resolution), extra)
}

fn assemble_osc(
    disjoint_fail: Option<(usize, usize, Point)>,
    contain_fail: Option<(usize, Point)>,
    dense_fail: Option<Point>,
    resolution: Option<u32>,
    extra: Vec<String>,
) -> ConditionResult {
    let mut parts = Vec::new();
    let mut witness = None;

    match &disjoint_fail {
        None => parts.push("disjoint images: pass".to_string()),
        Some((j, k, p)) => {
            parts.push(format!(
                "disjoint images: fail (maps {} and {} overlap at {})",
                j + 1,
                k + 1,
                point_to_string(p)
            ));
            witness = Some(Witness {
                point: Some(p.clone()),
                words: Some((
                    IndexWord::new(vec![*j as u32 + 1]),
                    IndexWord::new(vec![*k as u32 + 1]),
                )),
            });
        }
    }
    match &contain_fail {
        None => parts.push("invariance: pass".to_string()),
        Some((k, p)) => {
            parts.push(format!(
                "invariance: fail (the image of U under map {} reaches {} outside U)",
                k + 1,
                point_to_string(p)
            ));
            if witness.is_none() {
                witness = Some(Witness {
                    point: Some(p.clone()),
                    words: None,
                });
            }
        }
    }
    match &dense_fail {
        None => parts.push("density: pass".to_string()),
        Some(p) => {
            parts.push(format!(
                "density: fail ({} lies in X but not in the closure of U)",
                point_to_string(p)
            ));
            if witness.is_none() {
                witness = Some(Witness {
                    point: Some(p.clone()),
                    words: None,
                });
            }
        }
    }
    parts.extend(extra);

    let holds = if witness.is_none() { Tri::True } else { Tri::False };
    ConditionResult {
        holds,
        witness,
        method: Method::ExactAffine,
        resolution,
        notes: parts.join("; "),
    }
}

/// Sorted union of open intervals; touching intervals stay separate
/// because their shared endpoint is not covered.
fn merge_open_intervals(pieces: &[(Rat, Rat)]) -> Vec<(Rat, Rat)> {
    let mut sorted = pieces.to_vec();
    sorted.sort();
    let mut out: Vec<(Rat, Rat)> = Vec::new();
    for (lo, hi) in sorted {
        match out.last_mut() {
            Some((_, chi)) if lo < *chi => {
                if hi > *chi {
                    *chi = hi;
                }
            }
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Closed complement intervals of a merged open union within [0, 1];
/// degenerate single-point gaps are kept.
fn gaps_in_unit(merged: &[(Rat, Rat)]) -> Vec<(Rat, Rat)> {
    let one = Rat::from_integer(1.into());
    let mut gaps = Vec::new();
    let mut cur = Rat::zero();
    for (lo, hi) in merged {
        if *lo >= cur && *lo <= one {
            gaps.push((cur.clone(), lo.clone()));
        }
        if *hi > cur {
            cur = hi.clone();
        }
    }
    if cur <= one {
        gaps.push((cur, one));
    }
    gaps
}

/// Graph separation: γ_j(x) ≠ γ_k(x) for all x ∈ X and all single
/// letters j ≠ k, decided by solving (A_j − A_k)x = b_k − b_j exactly.
pub fn check_graph_separation(ifs: &AffineIfs) -> Result<ConditionResult, ConditionError> {
    let n = ifs.n_maps();
    if n == 1 {
        return Ok(ConditionResult::definite(
            Tri::True,
            Method::ExactAffine,
            "a single map has no pairs to separate".into(),
        ));
    }
    let d = ifs.dim();
    for j in 0..n {
        for k in j + 1..n {
            let (mj, mk) = (&ifs.maps[j], &ifs.maps[k]);
            let pair_words = (
                IndexWord::new(vec![j as u32 + 1]),
                IndexWord::new(vec![k as u32 + 1]),
            );
            if mj.linear == mk.linear && mj.offset == mk.offset {
                let x = ifs.space_sample()?;
                return Ok(ConditionResult {
                    holds: Tri::False,
                    witness: Some(Witness {
                        point: Some(x),
                        words: Some(pair_words),
                    }),
                    method: Method::ExactAffine,
                    resolution: None,
                    notes: format!(
                        "maps {} and {} are identical and agree at every point of X",
                        j + 1,
                        k + 1
                    ),
                });
            }
            let a: Vec<Vec<Rat>> = (0..d)
                .map(|r| (0..d).map(|c| &mj.linear[r][c] - &mk.linear[r][c]).collect())
                .collect();
            let rhs: Vec<Rat> = (0..d).map(|r| &mk.offset[r] - &mj.offset[r]).collect();
            match linalg::solve(&a, &rhs) {
                LinSolve::Inconsistent => continue,
                LinSolve::Unique(x) => match ifs.space.contains(&x) {
                    Some(false) => continue,
                    Some(true) => {
                        return Ok(ConditionResult {
                            holds: Tri::False,
                            witness: Some(Witness {
                                point: Some(x.clone()),
                                words: Some(pair_words),
                            }),
                            method: Method::ExactAffine,
                            resolution: None,
                            notes: format!(
                                "maps {} and {} agree at {}",
                                j + 1,
                                k + 1,
                                point_to_string(&x)
                            ),
                        });
                    }
                    None => {
                        if ifs.contains_approx(&x, ATTRACTOR_APPROX_DEPTH)? {
                            return Ok(ConditionResult {
                                holds: Tri::Unknown,
                                witness: None,
                                method: Method::CoverApproximate,
                                resolution: Some(ATTRACTOR_APPROX_DEPTH),
                                notes: format!(
                                    "the coincidence candidate {} of maps {} and {} could not \
                                     be excluded from the attractor by the depth-{} outer cover",
                                    point_to_string(&x),
                                    j + 1,
                                    k + 1,
                                    ATTRACTOR_APPROX_DEPTH
                                ),
                            });
                        }
                        continue;
                    }
                },
                LinSolve::Underdetermined => {
                    return Ok(ConditionResult::definite(
                        Tri::Unknown,
                        Method::ExactAffine,
                        format!(
                            "maps {} and {} coincide on a proper affine subspace; its \
                             intersection with X was not decided",
                            j + 1,
                            k + 1
                        ),
                    ));
                }
            }
        }
    }
    Ok(ConditionResult::definite(
        Tri::True,
        Method::ExactAffine,
        format!("all {} map pairs are separated at every point of X", n * (n - 1) / 2),
    ))
}

/// Essential freeness. The fast path certifies it outright for injective,
/// certified proper contractions on a space without isolated points once
/// the open set condition has been verified exactly; the exact path scans
/// all distinct word pairs up to `depth` for identical composed maps,
/// which on an affinely fat space leaves only nowhere dense coincidence
/// sets.
pub fn check_essential_freeness(
    ifs: &AffineIfs,
    depth: u32,
) -> Result<ConditionResult, ConditionError> {
    // Exact scan first: a pair of words composing to the same affine map
    // is a definite violation regardless of any fast-path hypothesis.
    let words = IndexWord::all_up_to(ifs.n_maps(), depth as usize);
    let mut seen: BTreeMap<Vec<Rat>, IndexWord> = BTreeMap::new();
    for w in &words {
        let m = ifs.compose_word(w)?;
        let mut key: Vec<Rat> = m.linear.iter().flatten().cloned().collect();
        key.extend(m.offset.iter().cloned());
        if let Some(prev) = seen.get(&key) {
            let x = ifs.space_sample()?;
            return Ok(ConditionResult {
                holds: Tri::False,
                witness: Some(Witness {
                    point: Some(x),
                    words: Some((prev.clone(), w.clone())),
                }),
                method: Method::ExactAffine,
                resolution: None,
                notes: format!(
                    "γ_{prev} and γ_{w} are the same affine map, so their coincidence set is \
                     all of X"
                ),
            });
        }
        seen.insert(key, w.clone());
    }

    let embeddings = ifs.maps.iter().all(|m| !m.det().is_zero());
    if embeddings
        && ifs.all_proper_contractions_certified()
        && ifs.space.no_isolated_points() == Some(true)
        && ifs.open_set.is_some()
    {
        let osc = check_open_set_condition(ifs, None, INTERNAL_CERT_RESOLUTION)?;
        if osc.holds == Tri::True {
            return Ok(ConditionResult::definite(
                Tri::True,
                Method::ContractionCriterion,
                "injective certified proper contractions on a space without isolated points, \
                 with the open set condition verified exactly: distinct words yield distinct \
                 maps whose coincidence sets are nowhere dense (Lem 6.1.5)"
                    .into(),
            ));
        }
    }

    let scanned = words.len();
    let notes = match ifs.space.affinely_fat() {
        Some(true) => format!(
            "no coincidence among the {scanned} words of length ≤ {depth}; every scanned pair \
             has a nowhere dense coincidence set, so the system is essentially free up to depth \
             {depth}, but longer words were not examined"
        ),
        _ => format!(
            "no identical composed maps among the {scanned} words of length ≤ {depth}; nowhere \
             density of the remaining coincidence sets could not be certified on this space"
        ),
    };
    Ok(ConditionResult::definite(Tri::Unknown, Method::ExactAffine, notes))
}

/// All points γ_w(p), |w| ≤ depth, labelled by their words (outermost
/// letter first), in breadth-first order starting at the empty word.
fn orbit_with_words(
    ifs: &AffineIfs,
    p: &Point,
    depth: u32,
) -> Result<Vec<(Point, IndexWord)>, ConditionError> {
    let mut out = vec![(p.clone(), IndexWord::empty())];
    let mut level = vec![(p.clone(), IndexWord::empty())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (x, w) in &level {
            for k in 1..=ifs.n_maps() as u32 {
                let y = ifs.map(k)?.apply(x);
                let mut letters = vec![k];
                letters.extend_from_slice(w.letters());
                let nw = IndexWord::new(letters);
                out.push((y.clone(), nw.clone()));
                next.push((y, nw));
            }
        }
        level = next;
    }
    Ok(out)
}

fn word_key(w: &IndexWord) -> (usize, Vec<u32>) {
    (w.len(), w.letters().to_vec())
}

/// The first collision γ_j(p) = γ_l(p) with distinct words |j|, |l| ≤
/// depth at an orbit point p = γ_w(seed), |w| ≤ depth, if any.
fn seed_self_violation(
    ifs: &AffineIfs,
    seed: &Point,
    depth: u32,
) -> Result<Option<RemovedSeed>, ConditionError> {
    for (p, _) in orbit_with_words(ifs, seed, depth)? {
        let mut vals = orbit_with_words(ifs, &p, depth)?;
        vals.sort_by(|(pa, wa), (pb, wb)| pa.cmp(pb).then_with(|| word_key(wa).cmp(&word_key(wb))));
        // Among all collisions at this orbit point, report the one with
        // the shortest word pair.
        let hit = vals
            .windows(2)
            .filter(|pair| pair[0].0 == pair[1].0)
            .map(|pair| (pair[0].1.clone(), pair[1].1.clone()))
            .min_by_key(|(j, l)| (word_key(j), word_key(l)));
        if let Some((j, l)) = hit {
            return Ok(Some(RemovedSeed {
                reason: format!(
                    "γ_{j} and γ_{l} collide at the orbit point {}",
                    point_to_string(&p)
                ),
                seed: seed.clone(),
                words: Some((j, l)),
                at_point: Some(p),
            }));
        }
    }
    Ok(None)
}

/// Discards seeds whose truncated orbits carry a word collision, then
/// seeds whose orbits intersect an earlier kept seed's orbit. Errors when
/// nothing survives.
pub fn refine_seed_set(
    ifs: &AffineIfs,
    seeds: &[Point],
    depth: u32,
) -> Result<RefineOutcome, ConditionError> {
    let mut kept: Vec<Point> = Vec::new();
    let mut removed: Vec<RemovedSeed> = Vec::new();
    let mut occupied: BTreeMap<Point, (usize, IndexWord)> = BTreeMap::new();
    for s in seeds {
        if ifs.space.contains(s) == Some(false) {
            return Err(ConditionError::SeedOutsideSpace {
                point: point_to_string(s),
            });
        }
        if let Some(r) = seed_self_violation(ifs, s, depth)? {
            removed.push(r);
            continue;
        }
        // Collision-free seeds must still lie in U when one is declared;
        // a violation is a reported removal, not a hard error.
        if let Some(u) = &ifs.open_set {
            if !u.pieces.iter().any(|b| region::point_in_open(s, b)) {
                removed.push(RemovedSeed {
                    seed: s.clone(),
                    words: None,
                    at_point: None,
                    reason: format!(
                        "seed {} lies outside the open set U",
                        point_to_string(s)
                    ),
                });
                continue;
            }
        }
        let orbit = orbit_with_words(ifs, s, depth)?;
        if let Some((p, w)) = orbit.iter().find(|(p, _)| occupied.contains_key(p)) {
            let (prev_seed, prev_word) = &occupied[p];
            removed.push(RemovedSeed {
                seed: s.clone(),
                words: Some((prev_word.clone(), w.clone())),
                at_point: Some(p.clone()),
                reason: format!(
                    "orbit point {} is already generated by kept seed {} via γ_{}",
                    point_to_string(p),
                    point_to_string(&kept[*prev_seed]),
                    prev_word
                ),
            });
            continue;
        }
        let idx = kept.len();
        for (p, w) in orbit {
            occupied.insert(p, (idx, w));
        }
        kept.push(s.clone());
    }
    if kept.is_empty() {
        return Err(ConditionError::NoAdmissibleSeeds { count: seeds.len() });
    }
    Ok(RefineOutcome { kept, removed })
}

/// Branchwise left inverse: γ_k⁻¹ on the closed region γ_k(X), with exact
/// agreement checked at every point where two regions meet (the box
/// vertices of each pairwise intersection, which affinely span it).
pub fn construct_left_inverse(ifs: &AffineIfs) -> Result<SigmaResult, ConditionError> {
    let hull = ifs.space.hull();
    let mut branches = Vec::new();
    for (k, m) in ifs.maps.iter().enumerate() {
        let inverse = m.inverse().ok_or(ConditionError::NotInvertible {
            index: k as u32 + 1,
        })?;
        let region = m.image_box(&hull).ok_or_else(|| {
            ConditionError::Unsupported(
                "left-inverse regions require diagonal linear parts in dimension ≥ 2".into(),
            )
        })?;
        branches.push(SigmaBranch { region, inverse });
    }

    let mut witnesses: BTreeSet<Point> = BTreeSet::new();
    let mut consistent = true;
    let mut disagreements = Vec::new();
    for j in 0..branches.len() {
        for k in j + 1..branches.len() {
            let Some(ov) = region::closed_intersection(&branches[j].region, &branches[k].region)
            else {
                continue;
            };
            for v in box_vertices(&ov) {
                let a = branches[j].inverse.apply(&v);
                let b = branches[k].inverse.apply(&v);
                if a != b {
                    consistent = false;
                    disagreements.push(format!(
                        "branches {} and {} disagree at {}: {} vs {}",
                        j + 1,
                        k + 1,
                        point_to_string(&v),
                        point_to_string(&a),
                        point_to_string(&b)
                    ));
                }
                witnesses.insert(v);
            }
        }
    }

    let mut notes = format!(
        "{} branches with {} overlap witness point(s)",
        branches.len(),
        witnesses.len()
    );
    if matches!(ifs.space, SpaceDescriptor::AttractorGeneric { .. }) {
        notes.push_str("; regions are bounding-box outer approximations, overlaps may be spurious");
    }
    for d in disagreements {
        notes.push_str("; ");
        notes.push_str(&d);
    }
    Ok(SigmaResult {
        branches,
        consistent,
        overlap_witnesses: witnesses.into_iter().collect(),
        notes,
    })
}

/// Is γ^n(X) = ⋃_{|w|=n} γ_w(X) clopen in X for every n? On a connected
/// interval or box this reduces to γ(X) = X; on the Cantor set the images
/// of cell maps are finite unions of admissible cells, which are always
/// clopen.
pub fn check_clopen_iterated_image(ifs: &AffineIfs, n_max: u32) -> ConditionResult {
    match &ifs.space {
        SpaceDescriptor::CantorTernary => ConditionResult::definite(
            Tri::True,
            Method::ExactAffine,
            "every iterated image is a finite union of admissible ternary cells, each clopen \
             in the Cantor set (all n)"
                .into(),
        ),
        SpaceDescriptor::Interval { .. } | SpaceDescriptor::Box { .. } => {
            let hull = ifs.space.hull();
            let mut images = Vec::new();
            for m in &ifs.maps {
                match m.image_box(&hull) {
                    Some(b) => images.push(b),
                    None => {
                        return ConditionResult::definite(
                            Tri::Unknown,
                            Method::ExactAffine,
                            "non-diagonal linear part in dimension ≥ 2: the image region could \
                             not be computed exactly"
                                .into(),
                        );
                    }
                }
            }
            match region::closed_covered_by(&hull, &images) {
                Ok(()) => ConditionResult::definite(
                    Tri::True,
                    Method::ExactAffine,
                    format!("γ(X) = X, hence γ^n(X) = X is clopen for every n ≤ {n_max} and beyond"),
                ),
                Err(p) => ConditionResult {
                    holds: Tri::False,
                    witness: Some(Witness {
                        point: Some(p.clone()),
                        words: None,
                    }),
                    method: Method::ExactAffine,
                    resolution: None,
                    notes: format!(
                        "{} lies in X but not in γ(X); a nonempty proper closed subset of the \
                         connected space X is never open (n = 1)",
                        point_to_string(&p)
                    ),
                },
            }
        }
        SpaceDescriptor::AttractorGeneric { .. } => ConditionResult::definite(
            Tri::Unknown,
            Method::ExactAffine,
            "generic attractor: iterated images were not computed exactly".into(),
        ),
    }
}

/// Does `a` vanish exactly on γ(X), sampled at the given points? `a` must
/// be a function of a single point (arity 0).
pub fn vanishes_on_image(
    ifs: &AffineIfs,
    a: &ChainFn,
    sample: &[Point],
) -> Result<bool, ConditionError> {
    if a.arity != 0 {
        return Err(ConditionError::Unsupported(format!(
            "vanishes_on_image needs an arity-0 function, got arity {}",
            a.arity
        )));
    }
    for x in sample {
        for k in 1..=ifs.n_maps() as u32 {
            let y = ifs.map(k)?.apply(x);
            let chain = Chain {
                points: vec![y],
                witness: IndexWord::empty(),
            };
            if a.eval(&chain) != czero() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{AffineMap, OpenSetSpec, SpaceDescriptor};
    use crate::scalar::{rat, rat_int};
    use proptest::prelude::*;

    fn unit_interval() -> SpaceDescriptor {
        SpaceDescriptor::Interval {
            lo: rat_int(0),
            hi: rat_int(1),
        }
    }

    fn open_unit() -> OpenSetSpec {
        OpenSetSpec {
            pieces: vec![vec![(rat_int(0), rat_int(1))]],
        }
    }

    fn half_maps() -> AffineIfs {
        AffineIfs::new(
            unit_interval(),
            vec![
                AffineMap::one_d(rat(1, 2), rat_int(0)),
                AffineMap::one_d(rat(-1, 2), rat_int(1)),
            ],
            Some(open_unit()),
        )
        .unwrap()
    }

    fn cantor_pair() -> AffineIfs {
        AffineIfs::new(
            SpaceDescriptor::CantorTernary,
            vec![
                AffineMap::one_d(rat(1, 3), rat_int(0)),
                AffineMap::one_d(rat(1, 3), rat(2, 3)),
            ],
            Some(open_unit()),
        )
        .unwrap()
    }

    fn duplicated_half() -> AffineIfs {
        AffineIfs::new(
            unit_interval(),
            vec![
                AffineMap::one_d(rat(1, 2), rat_int(0)),
                AffineMap::one_d(rat(1, 2), rat_int(0)),
            ],
            Some(open_unit()),
        )
        .unwrap()
    }

    #[test]
    fn osc_holds_for_half_maps() {
        let r = check_open_set_condition(&half_maps(), None, 6).unwrap();
        assert_eq!(r.holds, Tri::True);
        assert_eq!(r.method, Method::ExactAffine);
        assert!(r.notes.contains("disjoint images: pass"));
        assert!(r.notes.contains("density: pass"));
    }

    #[test]
    fn osc_holds_for_cantor_pair() {
        let r = check_open_set_condition(&cantor_pair(), None, 6).unwrap();
        assert_eq!(r.holds, Tri::True);
        assert_eq!(r.resolution, Some(6));
        assert!(r.notes.contains("cell certificate at resolution 6: pass"));
    }

    #[test]
    fn osc_requires_an_open_set() {
        let mut ifs = half_maps();
        ifs.open_set = None;
        let err = check_open_set_condition(&ifs, None, 6).unwrap_err();
        assert!(err.to_string().contains("open set required"));
    }

    #[test]
    fn osc_overlap_witness_re_checks() {
        // γ₂ shifted left so the two images of (0, 1) overlap.
        let ifs = AffineIfs::new(
            unit_interval(),
            vec![
                AffineMap::one_d(rat(1, 2), rat_int(0)),
                AffineMap::one_d(rat(1, 2), rat(1, 4)),
            ],
            Some(open_unit()),
        )
        .unwrap();
        let r = check_open_set_condition(&ifs, None, 6).unwrap();
        assert_eq!(r.holds, Tri::False);
        let w = r.witness.unwrap();
        let p = w.point.unwrap();
        // The witness lies in both open image intervals.
        assert!(p[0] > rat_int(0) && p[0] < rat(1, 2));
        assert!(p[0] > rat(1, 4) && p[0] < rat(3, 4));
        assert!(r.notes.contains("disjoint images: fail"));
    }

    #[test]
    fn osc_cantor_invariance_failure_is_witnessed() {
        let ifs = AffineIfs::new(
            SpaceDescriptor::CantorTernary,
            vec![
                AffineMap::one_d(rat(1, 3), rat_int(0)),
                AffineMap::one_d(rat(1, 3), rat(2, 3)),
            ],
            Some(OpenSetSpec {
                pieces: vec![vec![(rat_int(0), rat(1, 3))]],
            }),
        )
        .unwrap();
        let r = check_open_set_condition(&ifs, None, 4).unwrap();
        assert_eq!(r.holds, Tri::False);
        // γ₂((0, 1/3)) = (2/3, 7/9) escapes U entirely, and U is far from
        // dense; the first recorded witness must be a Cantor point
        // outside U.
        let p = r.witness.unwrap().point.unwrap();
        assert!(cantor::contains(&p[0]));
        assert!(p[0] >= rat(1, 3));
        assert!(r.notes.contains("invariance: fail"));
        assert!(r.notes.contains("density: fail"));
    }

    #[test]
    fn graph_separation_fails_for_half_maps_at_one() {
        let r = check_graph_separation(&half_maps()).unwrap();
        assert_eq!(r.holds, Tri::False);
        let w = r.witness.unwrap();
        let x = w.point.unwrap();
        assert_eq!(x, vec![rat_int(1)]);
        let ifs = half_maps();
        assert_eq!(ifs.maps[0].apply(&x), ifs.maps[1].apply(&x));
        assert_eq!(w.words.unwrap().0.letters(), &[1]);
    }

    #[test]
    fn graph_separation_holds_for_cantor_pair() {
        let r = check_graph_separation(&cantor_pair()).unwrap();
        assert_eq!(r.holds, Tri::True);
        assert_eq!(r.method, Method::ExactAffine);
    }

    #[test]
    fn identical_maps_fail_separation_everywhere() {
        let r = check_graph_separation(&duplicated_half()).unwrap();
        assert_eq!(r.holds, Tri::False);
        assert!(r.notes.contains("identical"));
        assert!(r.witness.unwrap().point.is_some());
    }

    #[test]
    fn essential_freeness_fast_path_on_galleries() {
        for ifs in [half_maps(), cantor_pair()] {
            let r = check_essential_freeness(&ifs, 3).unwrap();
            assert_eq!(r.holds, Tri::True);
            assert_eq!(r.method, Method::ContractionCriterion);
            assert!(r.notes.contains("Lem 6.1.5"));
        }
    }

    #[test]
    fn essential_freeness_detects_identical_words() {
        let r = check_essential_freeness(&duplicated_half(), 2).unwrap();
        assert_eq!(r.holds, Tri::False);
        let w = r.witness.unwrap();
        let (j, l) = w.words.unwrap();
        assert_eq!(j.letters(), &[1]);
        assert_eq!(l.letters(), &[2]);
        // The witness point re-checks exactly.
        let x = w.point.unwrap();
        let ifs = duplicated_half();
        assert_eq!(ifs.apply_word(&j, &x).unwrap(), ifs.apply_word(&l, &x).unwrap());
    }

    #[test]
    fn contractivity_alone_does_not_certify_freeness() {
        // γ₂∘γ₂ = γ₁ (and γ₁, γ₂ commute) even though every map is a
        // proper contraction; the scan must find an identical pair and
        // the fast path must stay quiet.
        let ifs = AffineIfs::new(
            unit_interval(),
            vec![
                AffineMap::one_d(rat(1, 4), rat_int(0)),
                AffineMap::one_d(rat(1, 2), rat_int(0)),
                AffineMap::one_d(rat(1, 2), rat(1, 2)),
            ],
            Some(open_unit()),
        )
        .unwrap();
        let r = check_essential_freeness(&ifs, 2).unwrap();
        assert_eq!(r.holds, Tri::False);
        assert_eq!(r.method, Method::ExactAffine);
        let (j, l) = r.witness.unwrap().words.unwrap();
        assert_eq!(j.letters(), &[1, 2]); // γ₁∘γ₂ = x/8 = γ₂∘γ₁
        assert_eq!(l.letters(), &[2, 1]);
        assert_ne!(j, l);
        let (a, b) = (ifs.compose_word(&j).unwrap(), ifs.compose_word(&l).unwrap());
        assert_eq!((a.linear, a.offset), (b.linear, b.offset));
    }

    #[test]
    fn essential_freeness_without_open_set_is_depth_bounded() {
        let ifs = AffineIfs::new(
            unit_interval(),
            vec![
                AffineMap::one_d(rat(1, 2), rat_int(0)),
                AffineMap::one_d(rat(1, 3), rat(1, 3)),
            ],
            None,
        )
        .unwrap();
        let r = check_essential_freeness(&ifs, 3).unwrap();
        assert_eq!(r.holds, Tri::Unknown);
        assert!(r.notes.contains("up to depth 3"));
    }

    #[test]
    fn refine_keeps_two_thirds_on_cantor() {
        let out = refine_seed_set(&cantor_pair(), &[vec![rat(2, 3)]], 3).unwrap();
        assert_eq!(out.kept, vec![vec![rat(2, 3)]]);
        assert!(out.removed.is_empty());
    }

    #[test]
    fn refine_removes_periodic_and_fixed_seeds() {
        let out = refine_seed_set(&cantor_pair(), &[vec![rat(1, 4)], vec![rat(2, 3)]], 3).unwrap();
        assert_eq!(out.kept, vec![vec![rat(2, 3)]]);
        assert_eq!(out.removed.len(), 1);
        let r = &out.removed[0];
        let (j, l) = r.words.clone().unwrap();
        assert!(j.is_empty());
        assert_eq!(l.letters(), &[1, 2]);
        assert_eq!(r.at_point.clone().unwrap(), vec![rat(1, 4)]);

        let out = refine_seed_set(&cantor_pair(), &[vec![rat_int(0)], vec![rat(2, 3)]], 3).unwrap();
        let (j, l) = out.removed[0].words.clone().unwrap();
        assert!(j.is_empty());
        assert_eq!(l.letters(), &[1]);
    }

    #[test]
    fn refine_errors_when_nothing_survives() {
        let err = refine_seed_set(&cantor_pair(), &[vec![rat_int(0)]], 3).unwrap_err();
        assert!(err.to_string().contains("no admissible seeds"));
    }

    #[test]
    fn refine_flags_collision_free_seeds_outside_the_open_set() {
        // Maps x/3 and x/3 + 2/3 on [0,1], but U only covers (0, 1/2):
        // the seed 4/5 has a collision-free truncated orbit yet lies
        // outside U, so it is removed without witness words.
        let ifs = AffineIfs::new(
            unit_interval(),
            vec![
                AffineMap::one_d(rat(1, 3), rat_int(0)),
                AffineMap::one_d(rat(1, 3), rat(2, 3)),
            ],
            Some(OpenSetSpec {
                pieces: vec![vec![(rat_int(0), rat(1, 2))]],
            }),
        )
        .unwrap();
        let out = refine_seed_set(&ifs, &[vec![rat(4, 5)], vec![rat(1, 5)]], 3).unwrap();
        assert_eq!(out.kept, vec![vec![rat(1, 5)]]);
        assert_eq!(out.removed.len(), 1);
        let r = &out.removed[0];
        assert!(r.words.is_none() && r.at_point.is_none());
        assert!(r.reason.contains("open set"));
    }

    #[test]
    fn refine_drops_cross_seed_collisions_keeping_the_earlier_seed() {
        let out =
            refine_seed_set(&cantor_pair(), &[vec![rat(2, 3)], vec![rat(8, 9)]], 2).unwrap();
        assert_eq!(out.kept, vec![vec![rat(2, 3)]]);
        let r = &out.removed[0];
        let (j, l) = r.words.clone().unwrap();
        assert_eq!(j.letters(), &[2]); // 8/9 = γ₂(2/3)
        assert!(l.is_empty());
        assert_eq!(r.at_point.clone().unwrap(), vec![rat(8, 9)]);
    }

    #[test]
    fn refine_is_idempotent_on_survivors() {
        let seeds = vec![vec![rat(1, 4)], vec![rat(2, 3)], vec![rat(8, 9)]];
        let once = refine_seed_set(&cantor_pair(), &seeds, 3).unwrap();
        let twice = refine_seed_set(&cantor_pair(), &once.kept, 3).unwrap();
        assert_eq!(once.kept, twice.kept);
        assert!(twice.removed.is_empty());
    }

    #[test]
    fn sigma_for_half_maps_is_consistent_at_the_overlap() {
        let s = construct_left_inverse(&half_maps()).unwrap();
        assert!(s.consistent);
        assert_eq!(s.overlap_witnesses, vec![vec![rat(1, 2)]]);
        assert_eq!(s.branches[0].region, vec![(rat_int(0), rat(1, 2))]);
        assert_eq!(s.branches[1].region, vec![(rat(1, 2), rat_int(1))]);
        // σ really inverts each branch.
        let ifs = half_maps();
        for x in [rat_int(0), rat(1, 3), rat(1, 2), rat_int(1)] {
            for (k, m) in ifs.maps.iter().enumerate() {
                let y = m.apply(&[x.clone()]);
                assert!(crate::region::point_in_closed(&y, &s.branches[k].region));
                assert_eq!(s.branches[k].inverse.apply(&y), vec![x.clone()]);
            }
        }
    }

    #[test]
    fn sigma_flags_the_translated_pair_as_inconsistent() {
        let ifs = AffineIfs::new(
            unit_interval(),
            vec![
                AffineMap::one_d(rat(1, 2), rat_int(0)),
                AffineMap::one_d(rat(1, 2), rat(1, 2)),
            ],
            None,
        )
        .unwrap();
        let s = construct_left_inverse(&ifs).unwrap();
        assert!(!s.consistent);
        assert_eq!(s.overlap_witnesses, vec![vec![rat(1, 2)]]);
        assert_eq!(s.branches[0].inverse.apply(&[rat(1, 2)]), vec![rat_int(1)]);
        assert_eq!(s.branches[1].inverse.apply(&[rat(1, 2)]), vec![rat_int(0)]);
    }

    #[test]
    fn sigma_for_cantor_pair_has_no_overlaps() {
        let s = construct_left_inverse(&cantor_pair()).unwrap();
        assert!(s.consistent);
        assert!(s.overlap_witnesses.is_empty());
    }

    #[test]
    fn sigma_rejects_singular_maps() {
        let ifs = AffineIfs::new(
            unit_interval(),
            vec![AffineMap::one_d(rat_int(0), rat(1, 2))],
            None,
        )
        .unwrap();
        let err = construct_left_inverse(&ifs).unwrap_err();
        assert!(matches!(err, ConditionError::NotInvertible { index: 1 }));
    }

    #[test]
    fn clopen_images_cover_or_fail() {
        assert_eq!(check_clopen_iterated_image(&half_maps(), 3).holds, Tri::True);
        assert_eq!(check_clopen_iterated_image(&cantor_pair(), 3).holds, Tri::True);

        let ifs = AffineIfs::new(
            unit_interval(),
            vec![
                AffineMap::one_d(rat(1, 3), rat_int(0)),
                AffineMap::one_d(rat(1, 3), rat(1, 3)),
            ],
            None,
        )
        .unwrap();
        let r = check_clopen_iterated_image(&ifs, 3);
        assert_eq!(r.holds, Tri::False);
        let p = r.witness.unwrap().point.unwrap();
        assert!(p[0] > rat(2, 3)); // outside γ(X) = [0, 2/3]
    }

    #[test]
    fn embeddings_check_spots_singular_maps() {
        assert_eq!(check_embeddings(&half_maps()).holds, Tri::True);
        let ifs = AffineIfs::new(
            unit_interval(),
            vec![AffineMap::one_d(rat_int(0), rat(1, 2))],
            None,
        )
        .unwrap();
        assert_eq!(check_embeddings(&ifs).holds, Tri::False);
    }

    #[test]
    fn vanishing_on_the_image_is_exact() {
        let ifs = cantor_pair();
        let sample = vec![vec![rat(2, 3)]];
        // γ₁(2/3) = 2/9 and γ₂(2/3) = 8/9 are the roots.
        let a = ChainFn::parse("(t0 - 2/9)*(t0 - 8/9)", 0, 1).unwrap();
        assert!(vanishes_on_image(&ifs, &a, &sample).unwrap());
        let b = ChainFn::parse("t0", 0, 1).unwrap();
        assert!(!vanishes_on_image(&ifs, &b, &sample).unwrap());
        let bad = ChainFn::parse("t0*t1", 1, 1).unwrap();
        assert!(vanishes_on_image(&ifs, &bad, &sample).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        // Systems built to satisfy the open set condition by construction:
        // the fast path certifies essential freeness, and the exact scan
        // must never contradict it.
        #[test]
        fn fast_and_exact_paths_agree(cuts in proptest::collection::btree_set(1u32..4000, 4)) {
            let v: Vec<Rat> = cuts.into_iter().map(|c| rat(c as i64, 4000)).collect();
            let maps = vec![
                AffineMap::one_d(&v[1] - &v[0], v[0].clone()),
                AffineMap::one_d(&v[3] - &v[2], v[2].clone()),
            ];
            let ifs = AffineIfs::new(unit_interval(), maps, Some(open_unit())).unwrap();
            let fast = check_essential_freeness(&ifs, 3).unwrap();
            prop_assert_eq!(fast.holds, Tri::True);
            prop_assert_eq!(fast.method, Method::ContractionCriterion);

            let mut bare = ifs.clone();
            bare.open_set = None;
            let exact = check_essential_freeness(&bare, 3).unwrap();
            // The depth-bounded scan finds no violation, so it cannot
            // disagree with the certificate.
            prop_assert_eq!(exact.holds, Tri::Unknown);
        }
    }
}
