//! Affine iterated function systems on exact rational state spaces.

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::cantor;
use crate::linalg::{self, LinSolve};
use crate::region::BoxR;
use crate::scalar::{rat_int, rat_to_f64, rat_to_string, Rat};
use crate::word::IndexWord;

pub type Point = Vec<Rat>;

pub fn point_to_string(p: &[Rat]) -> String {
    if p.len() == 1 {
        rat_to_string(&p[0])
    } else {
        let coords: Vec<String> = p.iter().map(rat_to_string).collect();
        format!("({})", coords.join(", "))
    }
}

#[derive(Debug, Error)]
pub enum IfsError {
    #[error("iterated function system needs at least one map")]
    NoMaps,
    #[error("linear part of map {index} is not square")]
    NotSquare { index: usize },
    #[error("map {index} acts on dimension {map_dim}, space has dimension {space_dim}")]
    DimensionMismatch {
        index: usize,
        map_dim: usize,
        space_dim: usize,
    },
    #[error("map {index} sends {point} outside the space")]
    NotInvariant { index: usize, point: String },
    #[error("map {index} is not a ternary cell map x/3^m + t with admissible t")]
    NotCellMap { index: usize },
    #[error("open set piece {index} is empty or has mismatched dimension")]
    BadOpenPiece { index: usize },
    #[error("letter {letter} out of range for {n_maps} maps")]
    LetterOutOfRange { letter: u32, n_maps: usize },
    #[error("fixed set of γ_{word} is not a single point")]
    FixedSetNotPoint { word: String },
    #[error("map {index} is not invertible")]
    NotInvertible { index: usize },
}

/// x ↦ Ax + b with exact rational entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineMap {
    pub linear: Vec<Vec<Rat>>,
    pub offset: Vec<Rat>,
}

impl AffineMap {
    pub fn new(linear: Vec<Vec<Rat>>, offset: Vec<Rat>) -> Result<Self, IfsError> {
        let d = offset.len();
        if linear.len() != d || linear.iter().any(|row| row.len() != d) {
            return Err(IfsError::NotSquare { index: 0 });
        }
        Ok(AffineMap { linear, offset })
    }

    pub fn one_d(a: Rat, b: Rat) -> Self {
        AffineMap {
            linear: vec![vec![a]],
            offset: vec![b],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut linear = vec![vec![Rat::zero(); d]; d];
        for (i, row) in linear.iter_mut().enumerate() {
            row[i] = Rat::one();
        }
        AffineMap {
            linear,
            offset: vec![Rat::zero(); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &[Rat]) -> Point {
        let mut y = linalg::mat_vec(&self.linear, x);
        for (yi, bi) in y.iter_mut().zip(&self.offset) {
            *yi += bi;
        }
        y
    }

    /// self ∘ inner: x ↦ self(inner(x)).
    pub fn compose(&self, inner: &Self) -> Self {
        AffineMap {
            linear: linalg::mat_mul(&self.linear, &inner.linear),
            offset: self.apply(&inner.offset),
        }
    }

    pub fn det(&self) -> Rat {
        linalg::det(&self.linear)
    }

    pub fn is_diagonal(&self) -> bool {
        self.linear
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, a)| i == j || a.is_zero()))
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.dim();
        let mut linear = Vec::with_capacity(d);
        for i in 0..d {
            let mut e = vec![Rat::zero(); d];
            e[i] = Rat::one();
            match linalg::solve(&self.linear, &e) {
                LinSolve::Unique(col) => linear.push(col),
                _ => return None,
            }
        }
        // `linear` holds columns of A⁻¹; transpose into rows.
        let inv_linear: Vec<Vec<Rat>> = (0..d)
            .map(|i| (0..d).map(|j| linear[j][i].clone()).collect())
            .collect();
        let offset: Vec<Rat> = linalg::mat_vec(&inv_linear, &self.offset)
            .into_iter()
            .map(|v| -v)
            .collect();
        Some(AffineMap {
            linear: inv_linear,
            offset,
        })
    }

    /// Unique solution of (I − A)x = b, when the fixed set is a point.
    pub fn fixed_point(&self) -> Result<Point, IfsError> {
        let d = self.dim();
        let mut m = vec![vec![Rat::zero(); d]; d];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = if i == j {
                    Rat::one() - &self.linear[i][j]
                } else {
                    -self.linear[i][j].clone()
                };
            }
        }
        match linalg::solve(&m, &self.offset) {
            LinSolve::Unique(x) => Ok(x),
            _ => Err(IfsError::FixedSetNotPoint {
                word: String::new(),
            }),
        }
    }

    /// Exact image of a closed box, available when the linear part is
    /// diagonal (always in dimension one).
    pub fn image_box(&self, b: &BoxR) -> Option<BoxR> {
        if !self.is_diagonal() {
            return None;
        }
        let mut out = Vec::with_capacity(b.len());
        for (i, (lo, hi)) in b.iter().enumerate() {
            let a = &self.linear[i][i];
            let u = a * lo + &self.offset[i];
            let v = a * hi + &self.offset[i];
            out.push(if u <= v { (u, v) } else { (v, u) });
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpaceDescriptor {
    Interval { lo: Rat, hi: Rat },
    Box { bounds: BoxR },
    CantorTernary,
    /// Attractor of the system itself inside an invariant hull box;
    /// membership is only decidable approximately.
    AttractorGeneric { hull: BoxR },
}

impl SpaceDescriptor {
    pub fn dim(&self) -> usize {
        match self {
            SpaceDescriptor::Interval { .. } | SpaceDescriptor::CantorTernary => 1,
            SpaceDescriptor::Box { bounds } => bounds.len(),
            SpaceDescriptor::AttractorGeneric { hull } => hull.len(),
        }
    }

    pub fn hull(&self) -> BoxR {
        match self {
            SpaceDescriptor::Interval { lo, hi } => vec![(lo.clone(), hi.clone())],
            SpaceDescriptor::Box { bounds } => bounds.clone(),
            SpaceDescriptor::CantorTernary => vec![(rat_int(0), rat_int(1))],
            SpaceDescriptor::AttractorGeneric { hull } => hull.clone(),
        }
    }

    /// Exact membership; `None` when only approximate answers exist.
    pub fn contains(&self, x: &[Rat]) -> Option<bool> {
        match self {
            SpaceDescriptor::Interval { lo, hi } => Some(x.len() == 1 && *lo <= x[0] && x[0] <= *hi),
            SpaceDescriptor::Box { bounds } => {
                Some(x.len() == bounds.len() && crate::region::point_in_closed(x, bounds))
            }
            SpaceDescriptor::CantorTernary => Some(x.len() == 1 && cantor::contains(&x[0])),
            SpaceDescriptor::AttractorGeneric { .. } => None,
        }
    }

    pub fn no_isolated_points(&self) -> Option<bool> {
        match self {
            SpaceDescriptor::Interval { lo, hi } => Some(lo < hi),
            SpaceDescriptor::Box { bounds } => Some(bounds.iter().any(|(lo, hi)| lo < hi)),
            SpaceDescriptor::CantorTernary => Some(true),
            SpaceDescriptor::AttractorGeneric { .. } => None,
        }
    }

    /// Does every proper affine subspace meet the space in a set with
    /// empty interior?  Needed to promote coincidence-set computations
    /// from ℝ^d to the space itself.
    pub fn affinely_fat(&self) -> Option<bool> {
        match self {
            SpaceDescriptor::Interval { lo, hi } => Some(lo < hi),
            SpaceDescriptor::Box { bounds } => Some(bounds.iter().all(|(lo, hi)| lo < hi)),
            SpaceDescriptor::CantorTernary => Some(true),
            SpaceDescriptor::AttractorGeneric { .. } => None,
        }
    }
}

/// Finite union of open rational boxes, used as the candidate open set U.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenSetSpec {
    pub pieces: Vec<BoxR>,
}

#[derive(Debug, Clone)]
pub struct ContractionBounds {
    pub ratio_lower: f64,
    pub ratio_upper: f64,
    /// Present when the operator norm is a single rational (1-D or
    /// diagonal linear part).
    pub exact_ratio: Option<Rat>,
    /// Exactly certified ‖A‖ < 1.
    pub proper_certified: bool,
}

#[derive(Debug, Clone)]
pub struct AffineIfs {
    pub space: SpaceDescriptor,
    pub maps: Vec<AffineMap>,
    pub open_set: Option<OpenSetSpec>,
}

impl AffineIfs {
    pub fn new(
        space: SpaceDescriptor,
        maps: Vec<AffineMap>,
        open_set: Option<OpenSetSpec>,
    ) -> Result<Self, IfsError> {
        if maps.is_empty() {
            return Err(IfsError::NoMaps);
        }
        let d = space.dim();
        for (index, m) in maps.iter().enumerate() {
            if m.linear.len() != m.offset.len() || m.linear.iter().any(|r| r.len() != m.offset.len())
            {
                return Err(IfsError::NotSquare { index });
            }
            if m.dim() != d {
                return Err(IfsError::DimensionMismatch {
                    index,
                    map_dim: m.dim(),
                    space_dim: d,
                });
            }
        }
        match &space {
            SpaceDescriptor::CantorTernary => {
                for (index, m) in maps.iter().enumerate() {
                    if cantor::cell_map_depth(&m.linear[0][0], &m.offset[0]).is_none() {
                        return Err(IfsError::NotCellMap { index });
                    }
                }
            }
            _ => {
                // Image of a box is the convex hull of the vertex images,
                // so vertex containment decides invariance exactly.
                let hull = space.hull();
                for (index, m) in maps.iter().enumerate() {
                    for v in box_vertices(&hull) {
                        let img = m.apply(&v);
                        if !crate::region::point_in_closed(&img, &hull) {
                            return Err(IfsError::NotInvariant {
                                index,
                                point: point_to_string(&v),
                            });
                        }
                    }
                }
            }
        }
        if let Some(u) = &open_set {
            for (index, piece) in u.pieces.iter().enumerate() {
                if piece.len() != d || piece.iter().any(|(lo, hi)| lo >= hi) {
                    return Err(IfsError::BadOpenPiece { index });
                }
            }
        }
        Ok(AffineIfs {
            space,
            maps,
            open_set,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn n_maps(&self) -> usize {
        self.maps.len()
    }

    /// Map for a 1-based letter.
    pub fn map(&self, letter: u32) -> Result<&AffineMap, IfsError> {
        self.maps
            .get(letter as usize - 1)
            .ok_or(IfsError::LetterOutOfRange {
                letter,
                n_maps: self.maps.len(),
            })
    }

    pub fn apply_word(&self, w: &IndexWord, x: &[Rat]) -> Result<Point, IfsError> {
        let mut y = x.to_vec();
        for letter in w.application_order() {
            y = self.map(letter)?.apply(&y);
        }
        Ok(y)
    }

    pub fn compose_word(&self, w: &IndexWord) -> Result<AffineMap, IfsError> {
        let mut acc = AffineMap::identity(self.dim());
        for letter in w.letters() {
            acc = acc.compose(self.map(*letter)?);
        }
        Ok(acc)
    }

    pub fn word_fixed_point(&self, w: &IndexWord) -> Result<Point, IfsError> {
        self.compose_word(w)?
            .fixed_point()
            .map_err(|_| IfsError::FixedSetNotPoint {
                word: w.to_string(),
            })
    }

    pub fn contraction_bounds(&self) -> Vec<ContractionBounds> {
        self.maps.iter().map(map_contraction_bounds).collect()
    }

    pub fn all_proper_contractions_certified(&self) -> bool {
        self.contraction_bounds().iter().all(|b| b.proper_certified)
    }

    pub fn contains(&self, x: &[Rat]) -> Option<bool> {
        self.space.contains(x)
    }

    /// Outer approximation for a generic attractor: x lies in the image
    /// γ^depth(hull) iff some depth-word inverse pulls it into the hull.
    /// A `false` is certain; a `true` is within Hausdorff slack of the
    /// attractor.  Exact spaces answer exactly.
    pub fn contains_approx(&self, x: &[Rat], depth: u32) -> Result<bool, IfsError> {
        if let Some(ans) = self.space.contains(x) {
            return Ok(ans);
        }
        let hull = self.space.hull();
        let mut inverses = Vec::with_capacity(self.maps.len());
        for (index, m) in self.maps.iter().enumerate() {
            inverses.push(m.inverse().ok_or(IfsError::NotInvertible { index })?);
        }
        let mut frontier = vec![x.to_vec()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for p in &frontier {
                for inv in &inverses {
                    let q = inv.apply(p);
                    if crate::region::point_in_closed(&q, &hull) {
                        next.push(q);
                    }
                }
            }
            if next.is_empty() {
                return Ok(false);
            }
            next.sort();
            next.dedup();
            frontier = next;
        }
        Ok(!frontier.is_empty())
    }

    /// An exact point of the space (an attractor point for the generic
    /// case: the fixed point of the first map).
    pub fn space_sample(&self) -> Result<Point, IfsError> {
        match &self.space {
            SpaceDescriptor::Interval { lo, .. } => Ok(vec![lo.clone()]),
            SpaceDescriptor::Box { bounds } => {
                Ok(bounds.iter().map(|(lo, _)| lo.clone()).collect())
            }
            SpaceDescriptor::CantorTernary => Ok(vec![rat_int(0)]),
            SpaceDescriptor::AttractorGeneric { .. } => {
                self.word_fixed_point(&IndexWord::new(vec![1]))
            }
        }
    }
}

pub fn box_vertices(b: &BoxR) -> Vec<Point> {
    let d = b.len();
    (0..(1usize << d))
        .map(|mask| {
            (0..d)
                .map(|j| {
                    if mask & (1 << j) != 0 {
                        b[j].1.clone()
                    } else {
                        b[j].0.clone()
                    }
                })
                .collect()
        })
        .collect()
}

fn map_contraction_bounds(m: &AffineMap) -> ContractionBounds {
    let one = Rat::one();
    if m.is_diagonal() {
        let d = m.dim();
        let ratio = (0..d)
            .map(|i| m.linear[i][i].abs())
            .max()
            .unwrap_or_else(|| Rat::zero());
        let f = rat_to_f64(&ratio);
        return ContractionBounds {
            ratio_lower: f,
            ratio_upper: f,
            proper_certified: ratio < one,
            exact_ratio: Some(ratio),
        };
    }
    // ‖A‖² is sandwiched between the largest column norm squared and the
    // Gershgorin bound on AᵀA; both sides are exact rationals.
    let d = m.dim();
    let mut col_sq_max = Rat::zero();
    for j in 0..d {
        let mut s = Rat::zero();
        for row in &m.linear {
            s += &row[j] * &row[j];
        }
        col_sq_max = col_sq_max.max(s);
    }
    let upper_sq = linalg::singular_upper_sq(&m.linear);
    ContractionBounds {
        ratio_lower: rat_to_f64(&col_sq_max).sqrt(),
        ratio_upper: rat_to_f64(&upper_sq).sqrt(),
        proper_certified: upper_sq < one,
        exact_ratio: None,
    }
}
