use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::{OnceLock, RwLock};

use super::labels::Labels;
use crate::error::{Error, Result};

/// A subset of a class's hypotheses, as a bitset over hypothesis indices.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VersionSpace {
    words: Box<[u64]>,
}

impl VersionSpace {
    fn empty(m: usize) -> Self {
        VersionSpace {
            words: vec![0u64; m.div_ceil(64)].into_boxed_slice(),
        }
    }

    fn full(m: usize) -> Self {
        let mut vs = Self::empty(m);
        for i in 0..m {
            vs.insert(i);
        }
        vs
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    fn and(&self, other: &VersionSpace) -> VersionSpace {
        VersionSpace {
            words: self
                .words
                .iter()
                .zip(other.words.iter())
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    /// True when `self` is a subset of `other`.
    pub fn is_subset(&self, other: &VersionSpace) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }
}

impl fmt::Debug for VersionSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Explicit finite hypothesis class: a deduplicated label matrix over the
/// domain `0..domain_size`.
pub struct HypothesisClass {
    domain_size: usize,
    hypotheses: Vec<Labels>,
    // columns[x][y] = hypotheses h with h(x) = y
    columns: Vec<[VersionSpace; 2]>,
    memo: RwLock<HashMap<VersionSpace, i32>>,
    ldim_cache: OnceLock<u32>,
}

impl HypothesisClass {
    /// Builds a class from label vectors, dropping duplicates (first
    /// occurrence wins).
    pub fn new(domain_size: usize, label_vectors: Vec<Labels>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut hypotheses = Vec::with_capacity(label_vectors.len());
        for (index, l) in label_vectors.into_iter().enumerate() {
            if l.len() != domain_size {
                return Err(Error::LabelLength {
                    index,
                    len: l.len(),
                    domain_size,
                });
            }
            if seen.insert(l.clone()) {
                hypotheses.push(l);
            }
        }
        let m = hypotheses.len();
        let columns = (0..domain_size)
            .map(|x| {
                let mut zero = VersionSpace::empty(m);
                let mut one = VersionSpace::empty(m);
                for (i, h) in hypotheses.iter().enumerate() {
                    if h.get(x) {
                        one.insert(i);
                    } else {
                        zero.insert(i);
                    }
                }
                [zero, one]
            })
            .collect();
        Ok(HypothesisClass {
            domain_size,
            hypotheses,
            columns,
            memo: RwLock::new(HashMap::new()),
            ldim_cache: OnceLock::new(),
        })
    }

    pub fn from_bit_rows(domain_size: usize, rows: &[Vec<bool>]) -> Result<Self> {
        Self::new(
            domain_size,
            rows.iter().map(|r| Labels::from_bits(r.iter().copied())).collect(),
        )
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn hypotheses(&self) -> &[Labels] {
        &self.hypotheses
    }

    pub fn hypothesis(&self, i: usize) -> &Labels {
        &self.hypotheses[i]
    }

    pub fn full_space(&self) -> VersionSpace {
        VersionSpace::full(self.len())
    }

    pub fn check_point(&self, x: usize) -> Result<()> {
        if x < self.domain_size {
            Ok(())
        } else {
            Err(Error::PointOutOfRange {
                x,
                domain_size: self.domain_size,
            })
        }
    }

    /// `{h ∈ vs : h(x) = y}`; `x` must already be range-checked.
    pub fn restrict_space(&self, vs: &VersionSpace, x: usize, y: bool) -> VersionSpace {
        vs.and(&self.columns[x][y as usize])
    }

    /// The subclass of hypotheses labelling `x` as `y`. May be empty.
    pub fn restrict(&self, x: usize, y: bool) -> Result<HypothesisClass> {
        self.check_point(x)?;
        let kept = self
            .hypotheses
            .iter()
            .filter(|h| h.get(x) == y)
            .cloned()
            .collect();
        HypothesisClass::new(self.domain_size, kept)
    }

    /// Littlestone dimension of the whole class.
    pub fn ldim(&self) -> Result<u32> {
        if self.is_empty() {
            return Err(Error::EmptyClass);
        }
        Ok(*self
            .ldim_cache
            .get_or_init(|| self.ldim_of(&self.full_space()) as u32))
    }

    /// Littlestone dimension of a version space; the empty space scores −1.
    pub fn ldim_of(&self, vs: &VersionSpace) -> i32 {
        let size = vs.len();
        if size == 0 {
            return -1;
        }
        if size == 1 {
            return 0;
        }
        if let Some(&d) = self.memo.read().expect("memo poisoned").get(vs) {
            return d;
        }
        // |vs| ≥ 2 distinct vectors, so some point splits it.
        let mut best = 0;
        let upper = size.ilog2() as i32;
        for x in 0..self.domain_size {
            let zero = self.restrict_space(vs, x, false);
            if zero.is_empty() || zero.len() == size {
                continue;
            }
            let one = self.restrict_space(vs, x, true);
            let d0 = self.ldim_of(&zero);
            if d0 < best {
                continue;
            }
            let d = 1 + d0.min(self.ldim_of(&one));
            best = best.max(d);
            if best == upper {
                break;
            }
        }
        self.memo
            .write()
            .expect("memo poisoned")
            .insert(vs.clone(), best);
        best
    }
}

impl Clone for HypothesisClass {
    fn clone(&self) -> Self {
        HypothesisClass {
            domain_size: self.domain_size,
            hypotheses: self.hypotheses.clone(),
            columns: self.columns.clone(),
            memo: RwLock::new(self.memo.read().expect("memo poisoned").clone()),
            ldim_cache: self.ldim_cache.clone(),
        }
    }
}

impl fmt::Debug for HypothesisClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HypothesisClass")
            .field("domain_size", &self.domain_size)
            .field("hypotheses", &self.hypotheses.len())
            .finish()
    }
}
