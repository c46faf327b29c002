use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// Fixed-length bit vector of labels over a finite domain.
///
/// Storage is shared, so clones are cheap; equality short-circuits on
/// shared storage before comparing words.
#[derive(Clone)]
pub struct Labels {
    words: Arc<[u64]>,
    len: usize,
}

impl Labels {
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for (i, b) in bits.into_iter().enumerate() {
            if i % 64 == 0 {
                words.push(0u64);
            }
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
            len = i + 1;
        }
        Labels {
            words: words.into(),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range ({})", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Smallest index where the two vectors differ.
    pub fn first_difference(&self, other: &Labels) -> Option<usize> {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(other.words.iter())
            .enumerate()
            .find_map(|(w, (a, b))| {
                let diff = a ^ b;
                (diff != 0).then(|| w * 64 + diff.trailing_zeros() as usize)
            })
    }

    pub fn ptr_eq(&self, other: &Labels) -> bool {
        Arc::ptr_eq(&self.words, &other.words)
    }
}

impl PartialEq for Labels {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && (self.ptr_eq(other) || self.words == other.words)
    }
}

impl Eq for Labels {}

impl Hash for Labels {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.len.hash(state);
        self.words.hash(state);
    }
}

/// Lexicographic order on the bit sequence, index 0 first, with 0 < 1.
impl Ord for Labels {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.first_difference(other) {
            Some(i) => self.get(i).cmp(&other.get(i)),
            None => self.len.cmp(&other.len),
        }
    }
}

impl PartialOrd for Labels {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Labels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Labels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Labels({self})")
    }
}

/// A hypothesis fingerprint: the labels it assigns to every domain point, or
/// the sentinel `Bottom`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Predictor {
    Bottom,
    Labels(Labels),
}

impl Predictor {
    pub fn is_bottom(&self) -> bool {
        matches!(self, Predictor::Bottom)
    }

    pub fn labels(&self) -> Option<&Labels> {
        match self {
            Predictor::Bottom => None,
            Predictor::Labels(l) => Some(l),
        }
    }

    pub fn eval(&self, x: usize) -> Option<bool> {
        self.labels().map(|l| l.get(x))
    }

    /// Prediction used when the fingerprint must answer: `Bottom` predicts 0.
    pub fn predict(&self, x: usize) -> bool {
        self.eval(x).unwrap_or(false)
    }

    /// Point at which two predictors disagree, taking the smallest index.
    /// `Bottom` disagrees with every non-`Bottom` predictor at point 0.
    pub fn disagreement(&self, other: &Predictor) -> Option<usize> {
        match (self, other) {
            (Predictor::Labels(a), Predictor::Labels(b)) => a.first_difference(b),
            (Predictor::Bottom, Predictor::Bottom) => None,
            _ => Some(0),
        }
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predictor::Bottom => f.write_str("⊥"),
            Predictor::Labels(l) => write!(f, "{l}"),
        }
    }
}
