//! Fixed-length bit strings.
//!
//! Bit `0` is the first character of the textual form and the least
//! significant bit of the integer form (little-endian), so `"01"` is the
//! integer `2`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString {
    len: usize,
    words: SmallVec<[u64; 1]>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            len,
            words: SmallVec::from_elem(0, len.div_ceil(64)),
        }
    }

    /// Builds a string from the low `len` bits of `value`; `len` must be at most 64.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        let mut s = Self::zeros(len);
        if len > 0 {
            s.words[0] = value & mask(len);
        }
        s
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut s = Self::zeros(len);
        for w in s.words.iter_mut() {
            *w = rng.gen();
        }
        s.trim();
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::zeros(text.len());
        for (i, c) in text.chars().enumerate() {
            match c {
                '0' => {}
                '1' => s.set(i, true),
                _ => {
                    return Err(Error::Malformed(format!(
                        "invalid bit character {c:?} in {text:?}"
                    )))
                }
            }
        }
        Ok(s)
    }

    pub fn concat(parts: &[BitString]) -> Self {
        let total = parts.iter().map(|p| p.len).sum();
        let mut out = Self::zeros(total);
        let mut at = 0;
        for p in parts {
            for i in 0..p.len {
                if p.bit(i) {
                    out.set(at + i, true);
                }
            }
            at += p.len;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        let w = &mut self.words[i / 64];
        if value {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    /// Integer value for strings of at most 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        match self.len {
            0 => Some(0),
            1..=64 => Some(self.words[0]),
            _ => None,
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn parity(&self) -> bool {
        self.count_ones() % 2 == 1
    }

    pub fn xor_assign(&mut self, other: &BitString) {
        assert_eq!(
            self.len, other.len,
            "xor of bit strings with different lengths"
        );
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a ^= b;
        }
    }

    /// The `len` bits starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len);
        let mut out = Self::zeros(len);
        for i in 0..len {
            if self.bit(start + i) {
                out.set(i, true);
            }
        }
        out
    }

    fn trim(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= mask(rem);
            }
        }
    }
}

fn mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        BitString::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn text_and_integer_forms_are_little_endian() {
        let s = BitString::parse("01").unwrap();
        assert_eq!(s.to_u64(), Some(2));
        assert_eq!(BitString::from_u64(2, 2).to_string(), "01");
        assert_eq!(BitString::from_u64(0b1011, 3).to_string(), "110");
    }

    #[test]
    fn xor_and_parity() {
        let mut a = BitString::parse("01").unwrap();
        a.xor_assign(&BitString::parse("11").unwrap());
        assert_eq!(a.to_string(), "10");
        assert!(a.parity());
    }

    #[test]
    fn rejects_garbage() {
        assert!(BitString::parse("012").is_err());
    }

    #[test]
    fn long_strings_span_words() {
        let mut s = BitString::zeros(130);
        s.set(129, true);
        s.set(64, true);
        assert_eq!(s.count_ones(), 2);
        assert_eq!(s.slice(64, 2).to_string(), "10");
        assert_eq!(s.to_u64(), None);
    }

    proptest! {
        #[test]
        fn concat_then_slice_recovers_parts(a in 0u64..256, b in 0u64..(1 << 20), la in 1usize..9, lb in 1usize..21) {
            let x = BitString::from_u64(a, la);
            let y = BitString::from_u64(b, lb);
            let joined = BitString::concat(&[x.clone(), y.clone()]);
            prop_assert_eq!(joined.slice(0, la), x.clone());
            prop_assert_eq!(joined.slice(la, lb), y);
            prop_assert_eq!(BitString::parse(&x.to_string()).unwrap(), x);
        }
    }
}
