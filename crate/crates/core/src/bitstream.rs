//! MSB-first bit strings.
//!
//! Bit index 0 is the most significant bit of byte 0, bit index 7 its least
//! significant bit, bit index 8 the most significant bit of byte 1, and so on.
//! Every other module reads and writes bits through this convention.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitError {
    #[error("bit length {0} is not a multiple of 8")]
    NonByteAligned(usize),
    #[error("range {start}..{end} exceeds bit length {len}")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error("invalid bit character {0:?}")]
    InvalidChar(char),
}

/// Reads bit `index` of `bytes` in MSB-first order.
#[inline]
pub fn get_bit(bytes: &[u8], index: usize) -> bool {
    (bytes[index >> 3] >> (7 - (index & 7))) & 1 == 1
}

/// Sets bit `index` of `bytes` in MSB-first order. Only sets, never clears.
#[inline]
pub fn set_bit(bytes: &mut [u8], index: usize) {
    bytes[index >> 3] |= 0x80 >> (index & 7);
}

/// Immutable sequence of bits stored MSB-first.
///
/// Surplus bits in the final storage byte are always zero, so derived
/// equality on the storage is bit equality.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: usize,
    storage: Vec<u8>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bytes(data: &[u8]) -> Self {
        Self {
            bits: data.len() * 8,
            storage: data.to_vec(),
        }
    }

    /// Takes ownership of `storage`, keeping the first `bit_length` bits and
    /// zeroing the rest of the final byte.
    pub fn from_storage(mut storage: Vec<u8>, bit_length: usize) -> Result<Self, BitError> {
        if bit_length > storage.len() * 8 {
            return Err(BitError::OutOfRange {
                start: 0,
                end: bit_length,
                len: storage.len() * 8,
            });
        }
        storage.truncate(bit_length.div_ceil(8));
        let rem = bit_length % 8;
        if rem != 0 {
            if let Some(last) = storage.last_mut() {
                *last &= 0xFFu8 << (8 - rem);
            }
        }
        Ok(Self {
            bits: bit_length,
            storage,
        })
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut out = BitString::new();
        for b in iter {
            out.push(b);
        }
        out
    }

    /// Parses a string of `'0'`/`'1'` characters. Whitespace is ignored.
    pub fn parse_binary(s: &str) -> Result<Self, BitError> {
        let mut out = BitString::new();
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                c if c.is_whitespace() => {}
                c => return Err(BitError::InvalidChar(c)),
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn as_storage(&self) -> &[u8] {
        &self.storage
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        (index < self.bits).then(|| get_bit(&self.storage, index))
    }

    fn push(&mut self, bit: bool) {
        if self.bits.is_multiple_of(8) {
            self.storage.push(0);
        }
        if bit {
            set_bit(&mut self.storage, self.bits);
        }
        self.bits += 1;
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.bits).map(move |i| get_bit(&self.storage, i))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, BitError> {
        if !self.bits.is_multiple_of(8) {
            return Err(BitError::NonByteAligned(self.bits));
        }
        Ok(self.storage.clone())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>, BitError> {
        if !self.bits.is_multiple_of(8) {
            return Err(BitError::NonByteAligned(self.bits));
        }
        Ok(self.storage)
    }

    pub fn slice(&self, start: usize, length: usize) -> Result<BitString, BitError> {
        let end = start.saturating_add(length);
        if end > self.bits {
            return Err(BitError::OutOfRange {
                start,
                end,
                len: self.bits,
            });
        }
        if start.is_multiple_of(8) {
            let bytes = self.storage[start / 8..end.div_ceil(8)].to_vec();
            return BitString::from_storage(bytes, length);
        }
        let mut storage = vec![0u8; length.div_ceil(8)];
        for i in 0..length {
            if get_bit(&self.storage, start + i) {
                set_bit(&mut storage, i);
            }
        }
        Ok(BitString {
            bits: length,
            storage,
        })
    }

    pub fn concat<'a, I>(parts: I) -> BitString
    where
        I: IntoIterator<Item = &'a BitString>,
    {
        let mut out = BitString::new();
        for part in parts {
            out.append(part);
        }
        out
    }

    fn append(&mut self, other: &BitString) {
        if self.bits.is_multiple_of(8) {
            self.storage.extend_from_slice(&other.storage);
            self.bits += other.bits;
            return;
        }
        for bit in other.iter() {
            self.push(bit);
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.storage.iter().map(|b| u64::from(b.count_ones())).sum()
    }

    /// Number of positions where `self` and `other` differ; lengths must match.
    pub fn hamming_distance(&self, other: &BitString) -> Option<u64> {
        (self.bits == other.bits).then(|| hamming_bytes(&self.storage, &other.storage))
    }
}

/// Popcount of the XOR of two equal-length byte slices.
pub fn hamming_bytes(a: &[u8], b: &[u8]) -> u64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| u64::from((x ^ y).count_ones()))
        .sum()
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in self.iter() {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({}, \"{}\")", self.bits, self)
    }
}

impl From<&[u8]> for BitString {
    fn from(data: &[u8]) -> Self {
        BitString::from_bytes(data)
    }
}
