//! Truncated orbit bases: the finite index sets on which all matrix
//! representations act.  A basis point is γ_w(s) for a seed s and a word
//! w of length ≤ depth; the construction fails loudly on any point
//! collision, which is exactly the situation seed refinement removes.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ifs::{point_to_string, AffineIfs, IfsError, Point};
use crate::word::IndexWord;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("no admissible seeds")]
    NoSeeds,
    #[error("seed {point} lies outside the space")]
    SeedOutsideSpace { point: String },
    #[error(
        "orbit collision at {point}: seed {first_seed} word {first_word} meets seed {second_seed} word {second_word}; refine the seed set"
    )]
    Collision {
        point: String,
        first_seed: usize,
        first_word: IndexWord,
        second_seed: usize,
        second_word: IndexWord,
    },
    #[error(transparent)]
    Ifs(#[from] IfsError),
}

#[derive(Debug, Clone)]
pub struct BasisPoint {
    pub point: Point,
    pub seed: usize,
    pub word: IndexWord,
}

#[derive(Debug, Clone)]
pub struct OrbitBasis {
    pub ifs: AffineIfs,
    pub seeds: Vec<Point>,
    pub depth: u32,
    points: Vec<BasisPoint>,
    index: BTreeMap<Point, usize>,
    /// children[i][k-1] = index of γ_k(point i), for depth(i) < depth.
    children: Vec<Vec<usize>>,
}

impl OrbitBasis {
    /// Enumerates seed-major, then depth-major, then word-lexicographic.
    pub fn build(ifs: AffineIfs, seeds: Vec<Point>, depth: u32) -> Result<Self, BasisError> {
        if seeds.is_empty() {
            return Err(BasisError::NoSeeds);
        }
        for s in &seeds {
            if ifs.contains(s) == Some(false) {
                return Err(BasisError::SeedOutsideSpace {
                    point: point_to_string(s),
                });
            }
        }
        let n_maps = ifs.n_maps();
        let mut points: Vec<BasisPoint> = Vec::new();
        let mut index: BTreeMap<Point, usize> = BTreeMap::new();
        for (seed_id, s) in seeds.iter().enumerate() {
            for len in 0..=depth {
                for word in IndexWord::all_of_length(n_maps, len as usize) {
                    let p = ifs.apply_word(&word, s)?;
                    if let Some(&prev) = index.get(&p) {
                        let first = &points[prev];
                        return Err(BasisError::Collision {
                            point: point_to_string(&p),
                            first_seed: first.seed,
                            first_word: first.word.clone(),
                            second_seed: seed_id,
                            second_word: word,
                        });
                    }
                    index.insert(p.clone(), points.len());
                    points.push(BasisPoint {
                        point: p,
                        seed: seed_id,
                        word,
                    });
                }
            }
        }
        let mut children = Vec::with_capacity(points.len());
        for bp in &points {
            if (bp.word.len() as u32) < depth {
                let mut kids = Vec::with_capacity(n_maps);
                for k in 1..=n_maps as u32 {
                    let img = ifs.map(k)?.apply(&bp.point);
                    kids.push(*index.get(&img).expect("child enumerated with the basis"));
                }
                children.push(kids);
            } else {
                children.push(Vec::new());
            }
        }
        Ok(OrbitBasis {
            ifs,
            seeds,
            depth,
            points,
            index,
            children,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i].point
    }

    pub fn meta(&self, i: usize) -> &BasisPoint {
        &self.points[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &BasisPoint> {
        self.points.iter()
    }

    pub fn depth_of(&self, i: usize) -> u32 {
        self.points[i].word.len() as u32
    }

    pub fn index_of(&self, p: &Point) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// Index of γ_k(point i); defined when depth(i) < depth.
    pub fn child(&self, i: usize, k: u32) -> Option<usize> {
        self.children[i].get(k as usize - 1).copied()
    }

    /// Strips the n outermost letters of i's witness word, yielding the
    /// basis index of the unique x with point(i) = γ_{outer n}(x).
    pub fn strip(&self, i: usize, n: u32) -> Option<usize> {
        let bp = &self.points[i];
        let stripped = bp.word.strip_outer(n as usize)?;
        let x = self
            .ifs
            .apply_word(&stripped, &self.seeds[bp.seed])
            .expect("stripped word reuses validated letters");
        Some(*self.index.get(&x).expect("suffix orbit point is enumerated"))
    }

    /// The n outermost letters of i's witness word.
    pub fn outer_word(&self, i: usize, n: u32) -> Option<IndexWord> {
        self.points[i].word.outer(n as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{AffineMap, SpaceDescriptor};
    use crate::scalar::{rat, rat_int};

    fn cantor_ifs() -> AffineIfs {
        AffineIfs::new(
            SpaceDescriptor::CantorTernary,
            vec![
                AffineMap::one_d(rat(1, 3), rat_int(0)),
                AffineMap::one_d(rat(1, 3), rat(2, 3)),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn cantor_basis_enumeration() {
        let b = OrbitBasis::build(cantor_ifs(), vec![vec![rat(2, 3)]], 2).unwrap();
        let got: Vec<_> = b.iter().map(|bp| bp.point[0].clone()).collect();
        let want = [
            rat(2, 3),
            rat(2, 9),
            rat(8, 9),
            rat(2, 27),
            rat(8, 27),
            rat(20, 27),
            rat(26, 27),
        ];
        assert_eq!(got, want);
        let depths: Vec<u32> = (0..b.len()).map(|i| b.depth_of(i)).collect();
        assert_eq!(depths, [0, 1, 1, 2, 2, 2, 2]);
        // Children follow the maps: γ₂(2/9) = 20/27.
        assert_eq!(b.child(0, 1), Some(1));
        assert_eq!(b.child(1, 2), Some(5));
        assert_eq!(b.child(3, 1), None);
        // Stripping outermost letters: (2,1) strips to (1).
        let i21 = b.index_of(&vec![rat(20, 27)]).unwrap();
        assert_eq!(b.strip(i21, 1), Some(1));
        assert_eq!(b.strip(i21, 2), Some(0));
        assert_eq!(b.strip(i21, 3), None);
        assert_eq!(b.outer_word(i21, 1), Some(IndexWord::new(vec![2])));
    }

    #[test]
    fn periodic_seed_collides() {
        // 1/4 is fixed by γ₁∘γ₂, so the words (1,2) and () collide there.
        let err = OrbitBasis::build(cantor_ifs(), vec![vec![rat(1, 4)]], 2).unwrap_err();
        match err {
            BasisError::Collision {
                point,
                first_word,
                second_word,
                ..
            } => {
                assert_eq!(point, "1/4");
                assert_eq!(first_word, IndexWord::empty());
                assert_eq!(second_word, IndexWord::new(vec![1, 2]));
            }
            other => panic!("expected a collision, got {other:?}"),
        }
    }

    #[test]
    fn no_seeds_is_an_error() {
        assert!(matches!(
            OrbitBasis::build(cantor_ifs(), vec![], 2),
            Err(BasisError::NoSeeds)
        ));
        assert!(matches!(
            OrbitBasis::build(cantor_ifs(), vec![vec![rat(1, 2)]], 1),
            Err(BasisError::SeedOutsideSpace { .. })
        ));
    }

    #[test]
    fn half_maps_seed_one_fifth() {
        let ifs = crate::ifs::AffineIfs::new(
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
        .unwrap();
        let b = OrbitBasis::build(ifs, vec![vec![rat(1, 5)]], 2).unwrap();
        assert_eq!(b.len(), 7);
        let got: Vec<_> = b.iter().map(|bp| bp.point[0].clone()).collect();
        let want = [
            rat(1, 5),
            rat(1, 10),
            rat(9, 10),
            rat(1, 20),
            rat(9, 20),
            rat(19, 20),
            rat(11, 20),
        ];
        assert_eq!(got, want);
    }
}
