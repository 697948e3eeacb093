//! Dense binary vectors over GF(2).

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use fixedbitset::FixedBitSet;

/// A fixed-length binary vector. Addition is XOR.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits(FixedBitSet);

/// Binary detector-outcome vector of one shot.
pub type Syndrome = Bits;

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits(FixedBitSet::with_capacity(len))
    }

    /// Builds a vector of length `len` with the given positions set. Repeated
    /// positions cancel.
    pub fn from_ones<I>(len: usize, ones: I) -> Self
    where
        I: IntoIterator,
        I::Item: Into<usize>,
    {
        let mut bits = Bits::zeros(len);
        for i in ones {
            bits.toggle(i.into());
        }
        bits
    }

    pub fn from_bools(values: &[bool]) -> Self {
        let mut bits = Bits::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            if v {
                bits.set(i, true);
            }
        }
        bits
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        self.0.set(i, value);
    }

    #[inline]
    pub fn toggle(&mut self, i: usize) {
        self.0.toggle(i);
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_clear()
    }

    pub fn clear(&mut self) {
        self.0.clear();
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    /// Packs into bytes, bit `i` at byte `i / 8`, position `i % 8`.
    pub fn to_bytes_le(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len().div_ceil(8)];
        for i in self.iter_ones() {
            out[i / 8] |= 1 << (i % 8);
        }
        out
    }

    pub fn from_bytes_le(len: usize, bytes: &[u8]) -> Self {
        let mut bits = Bits::zeros(len);
        for i in 0..len {
            if bytes[i / 8] >> (i % 8) & 1 == 1 {
                bits.set(i, true);
            }
        }
        bits
    }
}

impl BitXorAssign<&Bits> for Bits {
    fn bitxor_assign(&mut self, rhs: &Bits) {
        assert_eq!(self.len(), rhs.len(), "length mismatch in xor");
        self.0.symmetric_difference_with(&rhs.0);
    }
}

impl BitXor<&Bits> for &Bits {
    type Output = Bits;

    fn bitxor(self, rhs: &Bits) -> Bits {
        let mut out = self.clone();
        out ^= rhs;
        out
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}
