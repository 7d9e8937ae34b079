//! Exact rational interval/box geometry for the structural condition
//! checks: disjointness, subset-of-union, coverage, and density are all
//! decided on the arrangement induced by the participating boxes, whose
//! cells never cross a box boundary — so one rational representative per
//! cell decides the whole cell.

use crate::scalar::Rat;

/// Per-axis rational bounds; openness is contextual (each predicate states
/// how it reads the bounds).
pub type BoxR = Vec<(Rat, Rat)>;

pub fn point_in_open(x: &[Rat], b: &BoxR) -> bool {
    x.iter()
        .zip(b)
        .all(|(xi, (lo, hi))| lo < xi && xi < hi)
}

pub fn point_in_closed(x: &[Rat], b: &BoxR) -> bool {
    x.iter()
        .zip(b)
        .all(|(xi, (lo, hi))| lo <= xi && xi <= hi)
}

/// Open boxes are disjoint iff they fail to overlap strictly on some axis.
pub fn open_disjoint(a: &BoxR, b: &BoxR) -> bool {
    a.iter()
        .zip(b)
        .any(|((alo, ahi), (blo, bhi))| ahi <= blo || bhi <= alo || alo >= ahi || blo >= bhi)
}

/// Closed intersection of two boxes, if nonempty.
pub fn closed_intersection(a: &BoxR, b: &BoxR) -> Option<BoxR> {
    let mut out = Vec::with_capacity(a.len());
    for ((alo, ahi), (blo, bhi)) in a.iter().zip(b) {
        let lo = alo.max(blo).clone();
        let hi = ahi.min(bhi).clone();
        if lo > hi {
            return None;
        }
        out.push((lo, hi));
    }
    Some(out)
}

enum AxisElem {
    Point(Rat),
    Segment(Rat, Rat),
}

impl AxisElem {
    fn rep(&self) -> Rat {
        match self {
            AxisElem::Point(p) => p.clone(),
            AxisElem::Segment(a, b) => (a + b) / Rat::from_integer(2.into()),
        }
    }
}

fn axis_elements(lo: &Rat, hi: &Rat, closed: bool, cuts: &[Rat]) -> Vec<AxisElem> {
    if lo > hi {
        return Vec::new();
    }
    if lo == hi {
        return if closed {
            vec![AxisElem::Point(lo.clone())]
        } else {
            Vec::new()
        };
    }
    let mut inner: Vec<Rat> = cuts
        .iter()
        .filter(|c| *c > lo && *c < hi)
        .cloned()
        .collect();
    inner.sort();
    inner.dedup();
    let mut elems = Vec::new();
    if closed {
        elems.push(AxisElem::Point(lo.clone()));
    }
    let mut prev = lo.clone();
    for c in inner {
        elems.push(AxisElem::Segment(prev.clone(), c.clone()));
        elems.push(AxisElem::Point(c.clone()));
        prev = c;
    }
    elems.push(AxisElem::Segment(prev, hi.clone()));
    if closed {
        elems.push(AxisElem::Point(hi.clone()));
    }
    elems
}

fn cell_reps(domain: &BoxR, closed: bool, cutters: &[&BoxR], full_dim_only: bool) -> Vec<Vec<Rat>> {
    let d = domain.len();
    let mut per_axis: Vec<Vec<AxisElem>> = Vec::with_capacity(d);
    for axis in 0..d {
        let cuts: Vec<Rat> = cutters
            .iter()
            .flat_map(|b| [b[axis].0.clone(), b[axis].1.clone()])
            .collect();
        let mut elems = axis_elements(&domain[axis].0, &domain[axis].1, closed, &cuts);
        if full_dim_only {
            elems.retain(|e| matches!(e, AxisElem::Segment(..)));
        }
        if elems.is_empty() {
            return Vec::new();
        }
        per_axis.push(elems);
    }
    let mut reps = vec![Vec::new()];
    for elems in &per_axis {
        let mut next = Vec::with_capacity(reps.len() * elems.len());
        for prefix in &reps {
            for e in elems {
                let mut p = prefix.clone();
                p.push(e.rep());
                next.push(p);
            }
        }
        reps = next;
    }
    reps
}

/// Is the open box `p` contained in the union of the open boxes `qs`?
/// Returns a witness point of p outside every q when not.
pub fn open_subset_of_union(p: &BoxR, qs: &[BoxR]) -> Result<(), Vec<Rat>> {
    let cutters: Vec<&BoxR> = qs.iter().collect();
    for rep in cell_reps(p, false, &cutters, false) {
        if !qs.iter().any(|q| point_in_open(&rep, q)) {
            return Err(rep);
        }
    }
    Ok(())
}

/// Is the closed box `x` covered by the union of the closed boxes `qs`?
pub fn closed_covered_by(x: &BoxR, qs: &[BoxR]) -> Result<(), Vec<Rat>> {
    let cutters: Vec<&BoxR> = qs.iter().collect();
    for rep in cell_reps(x, true, &cutters, false) {
        if !qs.iter().any(|q| point_in_closed(&rep, q)) {
            return Err(rep);
        }
    }
    Ok(())
}

/// Is the union of the open boxes `qs` dense in the closed box `x`?
/// Density holds iff every full-dimensional arrangement cell lies inside
/// some q (a cell crossing no q-boundary either misses U or sits in it).
pub fn open_union_dense_in(x: &BoxR, qs: &[BoxR]) -> Result<(), Vec<Rat>> {
    let cutters: Vec<&BoxR> = qs.iter().collect();
    for rep in cell_reps(x, true, &cutters, true) {
        if !qs.iter().any(|q| point_in_open(&rep, q)) {
            return Err(rep);
        }
    }
    Ok(())
}
