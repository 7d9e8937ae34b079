//! Index words over the alphabet {1..N}.
//!
//! Letters are stored in the written order of γ_{k_n,…,k_1}: the first
//! stored letter is the outermost (last applied) map, the final stored
//! letter is applied first. The empty word is the identity.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct IndexWord {
    letters: Vec<u32>,
}

impl IndexWord {
    pub fn new(letters: Vec<u32>) -> Self {
        IndexWord { letters }
    }

    pub fn empty() -> Self {
        IndexWord::default()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Letters in written order: outermost (last applied) first.
    pub fn letters(&self) -> &[u32] {
        &self.letters
    }

    /// Letters in application order: innermost (first applied) first.
    pub fn application_order(&self) -> impl Iterator<Item = u32> + '_ {
        self.letters.iter().rev().copied()
    }

    /// True iff every letter lies in {1..=n_maps}.
    pub fn valid_for(&self, n_maps: usize) -> bool {
        self.letters
            .iter()
            .all(|&k| k >= 1 && (k as usize) <= n_maps)
    }

    /// γ_w ∘ γ_v as words: the letters of `self` followed by those of `v`.
    pub fn compose(&self, v: &IndexWord) -> IndexWord {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&v.letters);
        IndexWord { letters }
    }

    /// Prefix in the word-tree sense: the outermost letters agree.
    pub fn is_initial_segment_of(&self, v: &IndexWord) -> bool {
        v.letters.starts_with(&self.letters)
    }

    /// Removes the `n` outermost letters; `None` if the word is shorter.
    pub fn strip_outer(&self, n: usize) -> Option<IndexWord> {
        if n > self.letters.len() {
            return None;
        }
        Some(IndexWord {
            letters: self.letters[n..].to_vec(),
        })
    }

    /// The `n` outermost letters; `None` if the word is shorter.
    pub fn outer(&self, n: usize) -> Option<IndexWord> {
        if n > self.letters.len() {
            return None;
        }
        Some(IndexWord {
            letters: self.letters[..n].to_vec(),
        })
    }

    /// The word built from the `i` innermost letters (those applied first).
    pub fn inner(&self, i: usize) -> Option<IndexWord> {
        if i > self.letters.len() {
            return None;
        }
        Some(IndexWord {
            letters: self.letters[self.letters.len() - i..].to_vec(),
        })
    }

    /// All words of the given length over {1..=n_maps}, in lexicographic
    /// order of the written letters.
    pub fn all_of_length(n_maps: usize, len: usize) -> Vec<IndexWord> {
        let mut out = Vec::with_capacity(n_maps.pow(len as u32));
        let mut cur = vec![1u32; len];
        loop {
            out.push(IndexWord {
                letters: cur.clone(),
            });
            // next tuple in lex order
            let mut i = len;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if (cur[i] as usize) < n_maps {
                    cur[i] += 1;
                    for c in cur.iter_mut().skip(i + 1) {
                        *c = 1;
                    }
                    break;
                }
            }
        }
    }

    /// All words of length ≤ max_len, shortest first, lexicographic within
    /// a length.
    pub fn all_up_to(n_maps: usize, max_len: usize) -> Vec<IndexWord> {
        (0..=max_len)
            .flat_map(|l| IndexWord::all_of_length(n_maps, l))
            .collect()
    }
}

impl fmt::Display for IndexWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}
