//! Session keys: sixteen (matrix order, block count) portions that partition
//! a message's bit stream.
//!
//! The key carries no secret material beyond the partition itself, so anyone
//! holding the key file can decrypt. The cipher is a pure bit transposition
//! and offers no real-world confidentiality; treat it as an educational and
//! benchmarking construction.
//!
//! Key file layout (149 bytes):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `SMBK`                            |
//! | 4      | 1    | version `0x01`                          |
//! | 5      | 9×16 | records: order byte, u64 BE block count |

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::permutation::MatrixOrder;

pub const PORTIONS: usize = 16;
pub const KEY_MAGIC: [u8; 4] = *b"SMBK";
pub const KEY_VERSION: u8 = 0x01;
pub const KEY_FILE_LEN: usize = 5 + PORTIONS * 9;

/// Orders drawn for portions 1 through 15 during generation.
const GENERATED_ORDERS: [MatrixOrder; 4] = [
    MatrixOrder::SIXTEEN,
    MatrixOrder::TWELVE,
    MatrixOrder::EIGHT,
    MatrixOrder::FOUR,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortionSpec {
    pub order: MatrixOrder,
    pub block_count: u64,
}

impl PortionSpec {
    pub fn new(order: MatrixOrder, block_count: u64) -> Self {
        Self { order, block_count }
    }

    pub fn bits(&self) -> u128 {
        self.block_count as u128 * self.order.block_bits() as u128
    }
}

/// How block counts for portions 1–15 are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// Any non-negative count.
    #[default]
    Free,
    /// Counts restricted to 0 or a power of three.
    Pow3,
}

impl std::str::FromStr for CountMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "free" => Ok(CountMode::Free),
            "pow3" => Ok(CountMode::Pow3),
            other => Err(format!("unknown count mode {other:?} (expected free or pow3)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("bad magic, expected \"SMBK\"")]
    BadMagic,
    #[error("unsupported key version {0:#04x}")]
    BadVersion(u8),
    #[error("key file is {0} bytes, expected {KEY_FILE_LEN}")]
    BadLength(usize),
    #[error("record {record} has invalid matrix order {order}")]
    InvalidOrder { record: usize, order: u8 },
    #[error("final portion has order {0}, must be 2")]
    FinalPortionOrder(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    FinalPortionOrder(MatrixOrder),
    LengthMismatch { key_bits: u128, data_bits: u128 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FinalPortionOrder(o) => {
                write!(f, "final portion must have order 2 (found {o})")
            }
            Violation::LengthMismatch { key_bits, data_bits } => {
                write!(f, "length mismatch: key covers {key_bits} bits, data has {data_bits}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SessionKey {
    portions: [PortionSpec; PORTIONS],
}

/// Largest value in {0, 1, 3, 9, 27, ...} not exceeding `x`.
fn floor_pow3(x: u64) -> u64 {
    if x == 0 {
        return 0;
    }
    let mut p = 1u64;
    while let Some(next) = p.checked_mul(3) {
        if next > x {
            break;
        }
        p = next;
    }
    p
}

impl SessionKey {
    /// Wraps sixteen portions without checking invariants; see [`SessionKey::validate`].
    pub fn from_portions(portions: [PortionSpec; PORTIONS]) -> Self {
        Self { portions }
    }

    /// Key whose first portion is `count` blocks of `order` and every other
    /// portion is empty.
    pub fn single_portion(order: MatrixOrder, count: u64) -> Self {
        let mut portions = [PortionSpec::new(MatrixOrder::FOUR, 0); PORTIONS];
        portions[PORTIONS - 1].order = MatrixOrder::TWO;
        portions[0] = PortionSpec::new(order, count);
        Self { portions }
    }

    /// Seeded key covering exactly `8 * total_bytes` bits.
    ///
    /// Portions 1–15 each draw an order uniformly from {16, 12, 8, 4} and a
    /// count uniformly from `0..=R / (s² · (17 − i))`, where `R` is the budget
    /// still uncovered. The final portion absorbs the remainder in 4-bit blocks.
    pub fn generate(total_bytes: u64, seed: u64, mode: CountMode) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut remaining = total_bytes as u128 * 8;
        let mut portions = [PortionSpec::new(MatrixOrder::TWO, 0); PORTIONS];
        for (idx, portion) in portions.iter_mut().take(PORTIONS - 1).enumerate() {
            let i = idx as u128 + 1;
            let order = *GENERATED_ORDERS.choose(&mut rng).unwrap();
            let block_bits = order.block_bits() as u128;
            let max = remaining / (block_bits * (17 - i));
            let max = u64::try_from(max).unwrap_or(u64::MAX);
            let mut count = rng.gen_range(0..=max);
            if mode == CountMode::Pow3 {
                count = floor_pow3(count);
            }
            remaining -= count as u128 * block_bits;
            *portion = PortionSpec::new(order, count);
        }
        debug_assert_eq!(remaining % 4, 0);
        portions[PORTIONS - 1] = PortionSpec::new(MatrixOrder::TWO, (remaining / 4) as u64);
        Self { portions }
    }

    pub fn portions(&self) -> &[PortionSpec; PORTIONS] {
        &self.portions
    }

    pub fn total_bits(&self) -> u128 {
        self.portions.iter().map(PortionSpec::bits).sum()
    }

    pub fn validate(&self, total_bytes: u64) -> Result<(), Vec<Violation>> {
        let mut violations = Vec::new();
        let last = self.portions[PORTIONS - 1].order;
        if last != MatrixOrder::TWO {
            violations.push(Violation::FinalPortionOrder(last));
        }
        let key_bits = self.total_bits();
        let data_bits = total_bytes as u128 * 8;
        if key_bits != data_bits {
            violations.push(Violation::LengthMismatch { key_bits, data_bits });
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(KEY_FILE_LEN);
        out.extend_from_slice(&KEY_MAGIC);
        out.push(KEY_VERSION);
        for p in &self.portions {
            out.push(p.order.get());
            out.extend_from_slice(&p.block_count.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, KeyError> {
        if data.len() != KEY_FILE_LEN {
            return Err(KeyError::BadLength(data.len()));
        }
        if data[..4] != KEY_MAGIC {
            return Err(KeyError::BadMagic);
        }
        if data[4] != KEY_VERSION {
            return Err(KeyError::BadVersion(data[4]));
        }
        let mut portions = [PortionSpec::new(MatrixOrder::TWO, 0); PORTIONS];
        for (record, (chunk, portion)) in data[5..].chunks_exact(9).zip(portions.iter_mut()).enumerate() {
            let order = MatrixOrder::new(chunk[0]).map_err(|_| KeyError::InvalidOrder {
                record: record + 1,
                order: chunk[0],
            })?;
            let count = u64::from_be_bytes(chunk[1..].try_into().unwrap());
            *portion = PortionSpec::new(order, count);
        }
        let last = portions[PORTIONS - 1].order;
        if last != MatrixOrder::TWO {
            return Err(KeyError::FinalPortionOrder(last.get()));
        }
        Ok(Self { portions })
    }
}

impl fmt::Display for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.portions.iter().enumerate() {
            writeln!(f, "portion {:>2}: order {:>2} x {}", i + 1, p.order, p.block_count)?;
        }
        write!(f, "total bits: {}", self.total_bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow3_floor() {
        let cases = [(0, 0), (1, 1), (2, 1), (3, 3), (8, 3), (9, 9), (26, 9), (27, 27)];
        for (x, want) in cases {
            assert_eq!(floor_pow3(x), want, "x = {x}");
        }
        assert_eq!(floor_pow3(u64::MAX), 3u64.pow(40));
    }

    #[test]
    fn zero_bytes_gives_empty_key() {
        for mode in [CountMode::Free, CountMode::Pow3] {
            let key = SessionKey::generate(0, 99, mode);
            assert!(key.portions().iter().all(|p| p.block_count == 0));
            assert_eq!(key.total_bits(), 0);
            assert_eq!(key.validate(0), Ok(()));
        }
    }

    #[test]
    fn generate_covers_input() {
        for bytes in [1u64, 2, 3, 7, 100, 882, 65_536, 6_542_640] {
            for seed in 0..20 {
                for mode in [CountMode::Free, CountMode::Pow3] {
                    let key = SessionKey::generate(bytes, seed, mode);
                    assert_eq!(key.total_bits(), bytes as u128 * 8);
                    assert_eq!(key.validate(bytes), Ok(()));
                    if mode == CountMode::Pow3 {
                        for p in &key.portions()[..15] {
                            assert_eq!(floor_pow3(p.block_count), p.block_count);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn generate_is_deterministic() {
        let a = SessionKey::generate(4096, 7, CountMode::Free);
        assert_eq!(a, SessionKey::generate(4096, 7, CountMode::Free));
        assert_ne!(a, SessionKey::generate(4096, 8, CountMode::Free));
    }

    #[test]
    fn two_byte_keys_are_valid_partitions() {
        // either sixteen bits of order-2 blocks, or one 16-bit block somewhere
        for seed in 0..64 {
            let key = SessionKey::generate(2, seed, CountMode::Free);
            let nonzero: Vec<_> = key.portions().iter().filter(|p| p.block_count > 0).collect();
            assert!(
                nonzero == [&PortionSpec::new(MatrixOrder::TWO, 4)]
                    || nonzero == [&PortionSpec::new(MatrixOrder::FOUR, 1)],
                "{key}"
            );
        }
    }

    #[test]
    fn total_bits_single_block() {
        assert_eq!(SessionKey::single_portion(MatrixOrder::FOUR, 1).total_bits(), 16);
    }

    #[test]
    fn validate_reports_each_violation() {
        let mut portions = *SessionKey::single_portion(MatrixOrder::FOUR, 1).portions();
        portions[15].order = MatrixOrder::FOUR;
        portions[1] = PortionSpec::new(MatrixOrder::TWO, 2);
        let key = SessionKey::from_portions(portions);
        let violations = key.validate(2).unwrap_err();
        assert_eq!(
            violations,
            vec![
                Violation::FinalPortionOrder(MatrixOrder::FOUR),
                Violation::LengthMismatch { key_bits: 24, data_bits: 16 },
            ]
        );
        assert!(violations[0].to_string().contains("final portion must have order 2"));
        assert!(violations[1].to_string().contains("length mismatch"));
    }

    #[test]
    fn serialized_layout() {
        let key = SessionKey::single_portion(MatrixOrder::FOUR, 1);
        let bytes = key.to_bytes();
        assert_eq!(bytes.len(), 149);
        assert_eq!(&bytes[..5], &[0x53, 0x4D, 0x42, 0x4B, 0x01]);
        assert_eq!(&bytes[5..14], &[4, 0, 0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(&bytes[140..149], &[2, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(SessionKey::from_bytes(&bytes), Ok(key));

        let empty = SessionKey::generate(0, 1, CountMode::Free).to_bytes();
        for record in empty[5..].chunks(9) {
            assert!(SessionKey::from_bytes(&empty).is_ok());
            assert!(MatrixOrder::new(record[0]).is_ok());
            assert!(record[1..].iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn deserialize_errors() {
        let good = SessionKey::generate(1000, 3, CountMode::Free).to_bytes();
        assert_eq!(SessionKey::from_bytes(&good[..100]), Err(KeyError::BadLength(100)));
        let mut extra = good.clone();
        extra.push(0);
        assert_eq!(SessionKey::from_bytes(&extra), Err(KeyError::BadLength(150)));

        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert_eq!(SessionKey::from_bytes(&bad), Err(KeyError::BadMagic));

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(SessionKey::from_bytes(&bad), Err(KeyError::BadVersion(2)));

        let mut bad = good.clone();
        bad[5 + 9 * 3] = 6;
        assert_eq!(
            SessionKey::from_bytes(&bad),
            Err(KeyError::InvalidOrder { record: 4, order: 6 })
        );

        let mut bad = good;
        bad[5 + 9 * 15] = 16;
        assert_eq!(SessionKey::from_bytes(&bad), Err(KeyError::FinalPortionOrder(16)));
    }
}
