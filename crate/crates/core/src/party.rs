use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// A set of zero-based party indices stored as a bitset.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartySet {
    words: SmallVec<[u64; 2]>,
}

impl PartySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn full(n: usize) -> Self {
        (0..n).collect()
    }

    pub fn insert(&mut self, party: usize) -> bool {
        let (w, b) = (party / 64, party % 64);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn remove(&mut self, party: usize) -> bool {
        let (w, b) = (party / 64, party % 64);
        if w >= self.words.len() {
            return false;
        }
        let present = self.words[w] & (1 << b) != 0;
        self.words[w] &= !(1 << b);
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
        present
    }

    pub fn contains(&self, party: usize) -> bool {
        self.words
            .get(party / 64)
            .is_some_and(|w| w & (1 << (party % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                (rest != 0).then(|| {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    wi * 64 + b
                })
            })
        })
    }

    pub fn first(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    /// Smallest member not in `other`.
    pub fn first_outside(&self, other: &PartySet) -> Option<usize> {
        self.words.iter().enumerate().find_map(|(i, &w)| {
            let left = w & !other.words.get(i).copied().unwrap_or(0);
            (left != 0).then(|| i * 64 + left.trailing_zeros() as usize)
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for PartySet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = PartySet::new();
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl fmt::Debug for PartySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set()
            .entries(self.iter().map(|p| format!("P{}", p + 1)))
            .finish()
    }
}

impl Serialize for PartySet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for PartySet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Vec::<usize>::deserialize(d)?.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_operations() {
        let mut s = PartySet::new();
        assert!(s.insert(3));
        assert!(!s.insert(3));
        assert!(s.insert(100));
        assert_eq!(s.to_vec(), vec![3, 100]);
        assert_eq!(s.len(), 2);
        assert!(s.remove(100));
        assert_eq!(s, [3].into_iter().collect());
        assert!(!s.contains(100));
    }
}
