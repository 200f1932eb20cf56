//! Fixed-width bitsets over a proposition universe.
//!
//! A [`StateSet`] is used both for world states and for conditions; which
//! role it plays is decided by the caller. Every set remembers the width of
//! the universe it was built for so that mixing sets from different
//! universes can be reported instead of silently producing garbage.

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

const WORD_BITS: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct StateSet {
    width: usize,
    words: SmallVec<[u64; 2]>,
}

fn word_count(width: usize) -> usize {
    width.div_ceil(WORD_BITS)
}

impl StateSet {
    pub fn empty(width: usize) -> Self {
        StateSet {
            width,
            words: SmallVec::from_elem(0, word_count(width)),
        }
    }

    pub fn full(width: usize) -> Self {
        let mut s = Self::empty(width);
        for w in s.words.iter_mut() {
            *w = u64::MAX;
        }
        s.trim();
        s
    }

    /// Builds a set from the low `width` bits of `bits`. Only meaningful for
    /// universes of at most 64 propositions.
    pub fn from_bits(width: usize, bits: u64) -> Self {
        assert!(width <= WORD_BITS, "from_bits needs width <= 64");
        let mut s = Self::empty(width);
        if width > 0 {
            s.words[0] = bits;
            s.trim();
        }
        s
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(width: usize, indices: I) -> Self {
        let mut s = Self::empty(width);
        for i in indices {
            s.insert(i);
        }
        s
    }

    fn trim(&mut self) {
        let rem = self.width % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The low word, i.e. the numeric value of the set for widths up to 64.
    pub fn as_bits(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.width, "index {i} outside universe of {}", self.width);
        self.words[i / WORD_BITS] |= 1u64 << (i % WORD_BITS);
    }

    pub fn remove(&mut self, i: usize) {
        assert!(i < self.width, "index {i} outside universe of {}", self.width);
        self.words[i / WORD_BITS] &= !(1u64 << (i % WORD_BITS));
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.width && self.words[i / WORD_BITS] & (1u64 << (i % WORD_BITS)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn same_universe(&self, other: &StateSet) -> bool {
        self.width == other.width
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        debug_assert!(self.same_universe(other));
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &StateSet) -> bool {
        debug_assert!(self.same_universe(other));
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & b == 0)
    }

    pub fn intersects(&self, other: &StateSet) -> bool {
        !self.is_disjoint(other)
    }

    fn zip_with(&self, other: &StateSet, f: impl Fn(u64, u64) -> u64) -> StateSet {
        debug_assert!(self.same_universe(other));
        StateSet {
            width: self.width,
            words: self
                .words
                .iter()
                .zip(other.words.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &StateSet) -> StateSet {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &StateSet) -> StateSet {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> StateSet {
        let mut s = StateSet {
            width: self.width,
            words: self.words.iter().map(|w| !w).collect(),
        };
        s.trim();
        s
    }

    pub fn union_with(&mut self, other: &StateSet) {
        debug_assert!(self.same_universe(other));
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a |= b;
        }
    }

    pub fn difference_with(&mut self, other: &StateSet) {
        debug_assert!(self.same_universe(other));
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a &= !b;
        }
    }

    /// Member indices in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * WORD_BITS + bit)
            })
        })
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Advances the set as a binary counter. Returns false (and leaves the
    /// set empty) when it wraps past the full set.
    pub fn increment(&mut self) -> bool {
        for w in self.words.iter_mut() {
            let (next, overflow) = w.overflowing_add(1);
            *w = next;
            if !overflow {
                break;
            }
        }
        let rem = self.width % WORD_BITS;
        let wrapped = if rem == 0 {
            self.is_empty()
        } else {
            let last = *self.words.last().unwrap();
            last >> rem != 0
        };
        if wrapped {
            for w in self.words.iter_mut() {
                *w = 0;
            }
            false
        } else {
            self.width > 0
        }
    }
}

impl Ord for StateSet {
    /// Numeric order of the underlying bit pattern (most significant word
    /// first), then by width.
    fn cmp(&self, other: &Self) -> Ordering {
        self.width.cmp(&other.width).then_with(|| {
            for (a, b) in self.words.iter().rev().zip(other.words.iter().rev()) {
                match a.cmp(b) {
                    Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for StateSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "p{i}")?;
        }
        write!(f, "}}/{}", self.width)
    }
}
