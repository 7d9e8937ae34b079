//! Exact predicates for the middle-thirds Cantor set C ⊆ [0,1].
//!
//! A rational x lies in C iff some base-3 expansion of x uses only the
//! digits {0,2}. Because the admissible depth-1 cells [0,1/3] and [2/3,1]
//! are disjoint, the digit choice is forced at every step, so membership
//! reduces to iterating x ↦ 3x (x ≤ 1/3) or x ↦ 3x−2 (x ≥ 2/3) and
//! detecting the inevitable cycle of a rational orbit.

use crate::scalar::Rat;
use num::{One, Zero};
use std::collections::BTreeSet;

/// Exact membership of a rational in the Cantor set.
pub fn contains(x: &Rat) -> bool {
    if x < &Rat::zero() || x > &Rat::one() {
        return false;
    }
    let third = Rat::new(1.into(), 3.into());
    let two_thirds = Rat::new(2.into(), 3.into());
    let mut seen = BTreeSet::new();
    let mut cur = x.clone();
    loop {
        if !seen.insert(cur.clone()) {
            // Revisited state: the admissible expansion continues forever.
            return true;
        }
        if cur <= third {
            cur = &cur * Rat::from_integer(3.into());
        } else if cur >= two_thirds {
            cur = &cur * Rat::from_integer(3.into()) - Rat::from_integer(2.into());
        } else {
            return false;
        }
    }
}

/// Whether the Cantor set meets the given rational interval. Endpoint
/// strictness flags select open/closed ends; a degenerate closed interval
/// reduces to membership.
pub fn meets(lo: &Rat, lo_strict: bool, hi: &Rat, hi_strict: bool) -> bool {
    if lo > hi {
        return false;
    }
    if lo == hi {
        return !lo_strict && !hi_strict && contains(lo);
    }
    if !lo_strict && contains(lo) {
        return true;
    }
    if !hi_strict && contains(hi) {
        return true;
    }
    meets_open(lo, hi)
}

/// Whether C meets the open interval (a, b), a < b.
///
/// Recursion over the two admissible subcells; the interval triples in
/// relative length at each level, so the depth is bounded by
/// log₃(1/(b−a)) and no cycle detection is needed. Every cell endpoint
/// belongs to C, which justifies the two boundary shortcuts.
fn meets_open(a: &Rat, b: &Rat) -> bool {
    let zero = Rat::zero();
    let one = Rat::one();
    if b <= &zero || a >= &one {
        return false;
    }
    if a < &zero || b > &one {
        // The current cell's endpoint 0 or 1 lies strictly inside (a, b).
        return true;
    }
    let three = Rat::from_integer(3.into());
    let two = Rat::from_integer(2.into());
    let (la, lb) = (a * &three, b * &three);
    if meets_open(&la, &lb) {
        return true;
    }
    let (ra, rb) = (&la - &two, &lb - &two);
    meets_open(&ra, &rb)
}

/// A point of C strictly inside the open interval (a, b), if one exists.
/// Mirrors `meets_open`: whenever that predicate is true, this returns a
/// witness, always a cell endpoint.
fn point_in_open(a: &Rat, b: &Rat) -> Option<Rat> {
    let zero = Rat::zero();
    let one = Rat::one();
    if b <= &zero || a >= &one {
        return None;
    }
    if a < &zero {
        return Some(zero); // 0 ∈ C and a < 0 < b
    }
    if b > &one {
        return Some(one); // 1 ∈ C and a < 1 < b
    }
    let three = Rat::from_integer(3.into());
    let two = Rat::from_integer(2.into());
    let (la, lb) = (a * &three, b * &three);
    if let Some(x) = point_in_open(&la, &lb) {
        return Some(x / &three);
    }
    let (ra, rb) = (&la - &two, &lb - &two);
    point_in_open(&ra, &rb).map(|x| (x + &two) / &three)
}

/// A point of C ∩ [lo, hi] (ends opened per the strictness flags), if one
/// exists. Complete relative to `meets`: equal truth values, and the
/// returned point re-checks under `contains`.
pub fn find_witness(lo: &Rat, lo_strict: bool, hi: &Rat, hi_strict: bool) -> Option<Rat> {
    if lo > hi || (lo == hi && (lo_strict || hi_strict)) {
        return None;
    }
    if !lo_strict && contains(lo) {
        return Some(lo.clone());
    }
    if !hi_strict && contains(hi) {
        return Some(hi.clone());
    }
    point_in_open(lo, hi)
}

/// The 2^depth admissible closed cells of the given depth, in increasing
/// order, each of width 3^(−depth).
pub fn cells(depth: u32) -> Vec<(Rat, Rat)> {
    let width = Rat::new(1.into(), num::BigInt::from(3).pow(depth));
    let mut offsets = vec![Rat::zero()];
    for level in 1..=depth {
        let step = Rat::new(2.into(), num::BigInt::from(3).pow(level));
        let mut next = Vec::with_capacity(offsets.len() * 2);
        for o in &offsets {
            next.push(o.clone());
            next.push(o + &step);
        }
        offsets = next;
    }
    offsets.sort();
    offsets.into_iter().map(|o| (o.clone(), o + &width)).collect()
}

/// If the 1-D affine map x ↦ linear·x + offset equals γ_w for some word w
/// over the canonical generators x/3 and x/3 + 2/3, returns |w|.
/// Such maps send C onto a single admissible cell.
pub fn cell_map_depth(linear: &Rat, offset: &Rat) -> Option<u32> {
    if linear <= &Rat::zero() {
        return None;
    }
    // linear must be exactly 3^(−m), m ≥ 1.
    let mut m = 0u32;
    let mut scale = Rat::one();
    let third = Rat::new(1.into(), 3.into());
    while &scale > linear {
        scale *= &third;
        m += 1;
        if m > 64 {
            return None;
        }
    }
    if &scale != linear || m == 0 {
        return None;
    }
    // offset·3^m must be an integer with base-3 digits in {0,2}.
    let scaled = offset * Rat::from_integer(num::BigInt::from(3).pow(m));
    if !scaled.denom().is_one() || scaled < Rat::zero() {
        return None;
    }
    let mut t = scaled.numer().clone();
    let three = num::BigInt::from(3);
    for _ in 0..m {
        let digit = &t % &three;
        if digit == num::BigInt::from(1) {
            return None;
        }
        t /= &three;
    }
    if t.is_zero() {
        Some(m)
    } else {
        None
    }
}
