//! Spiral fill and 2×2 tile readout, fused into per-order permutation tables.
//!
//! A block of `s²` bits is written into an `s × s` matrix clockwise from the
//! top-left cell, ring by ring inward. The matrix is then cut into 2×2 tiles,
//! visited left to right and top to bottom, and each tile is read down its
//! first column and then down its second column. The composition of the two
//! traversals is a fixed bijection on bit positions, built once per order.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstream::{get_bit, set_bit, BitString};

/// Matrix orders accepted by [`MatrixOrder`]. Block lengths are the squares:
/// 4, 16, 64, 144 and 256 bits.
pub const SUPPORTED_ORDERS: [u8; 5] = [2, 4, 8, 12, 16];

/// Largest block length in bits across [`SUPPORTED_ORDERS`].
pub const MAX_BLOCK_BITS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PermutationError {
    #[error("unsupported matrix order {0}")]
    UnsupportedOrder(usize),
    #[error("block has {actual} bits, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// A matrix order drawn from [`SUPPORTED_ORDERS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct MatrixOrder(u8);

impl MatrixOrder {
    pub const TWO: MatrixOrder = MatrixOrder(2);
    pub const FOUR: MatrixOrder = MatrixOrder(4);
    pub const EIGHT: MatrixOrder = MatrixOrder(8);
    pub const TWELVE: MatrixOrder = MatrixOrder(12);
    pub const SIXTEEN: MatrixOrder = MatrixOrder(16);

    pub fn new(order: u8) -> Result<Self, PermutationError> {
        if SUPPORTED_ORDERS.contains(&order) {
            Ok(MatrixOrder(order))
        } else {
            Err(PermutationError::UnsupportedOrder(order as usize))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Bits per block, `order²`.
    pub fn block_bits(self) -> usize {
        let s = self.0 as usize;
        s * s
    }

    fn slot(self) -> usize {
        SUPPORTED_ORDERS.iter().position(|&o| o == self.0).unwrap()
    }
}

impl TryFrom<u8> for MatrixOrder {
    type Error = PermutationError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        MatrixOrder::new(value)
    }
}

impl From<MatrixOrder> for u8 {
    fn from(order: MatrixOrder) -> u8 {
        order.0
    }
}

impl fmt::Display for MatrixOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn check_even(order: usize) -> Result<(), PermutationError> {
    if order < 2 || !order.is_multiple_of(2) {
        return Err(PermutationError::UnsupportedOrder(order));
    }
    Ok(())
}

/// Row-major cell indices in clockwise spiral visiting order, starting at the
/// top-left cell. Entry `k` is the cell that receives block bit `k`.
pub fn spiral_order(order: usize) -> Result<Vec<usize>, PermutationError> {
    check_even(order)?;
    let s = order;
    let mut cells = Vec::with_capacity(s * s);
    let (mut top, mut left) = (0usize, 0usize);
    let (mut bottom, mut right) = (s - 1, s - 1);
    // even order: every ring has at least two rows and two columns
    while top < bottom {
        cells.extend((left..=right).map(|c| top * s + c));
        cells.extend((top + 1..=bottom).map(|r| r * s + right));
        cells.extend((left..right).rev().map(|c| bottom * s + c));
        cells.extend((top + 1..bottom).rev().map(|r| r * s + left));
        top += 1;
        left += 1;
        bottom -= 1;
        right -= 1;
    }
    Ok(cells)
}

/// Row-major cell indices in tile readout order: tiles row-major, each tile
/// read as top-left, bottom-left, top-right, bottom-right.
pub fn tile_column_order(order: usize) -> Result<Vec<usize>, PermutationError> {
    check_even(order)?;
    let s = order;
    let mut cells = Vec::with_capacity(s * s);
    for tr in (0..s).step_by(2) {
        for tc in (0..s).step_by(2) {
            cells.extend([tr * s + tc, (tr + 1) * s + tc, tr * s + tc + 1, (tr + 1) * s + tc + 1]);
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Fixed bit permutation for one matrix order.
///
/// `forward[j]` is the plaintext bit index that lands on ciphertext bit `j`;
/// `inverse[forward[j]] == j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPermutation {
    order: MatrixOrder,
    forward: Vec<u16>,
    inverse: Vec<u16>,
}

impl BlockPermutation {
    pub fn build(order: MatrixOrder) -> Self {
        let s = order.get() as usize;
        let spiral = spiral_order(s).expect("supported orders are even");
        let tiles = tile_column_order(s).expect("supported orders are even");

        // bit index stored in each cell by the spiral fill
        let mut bit_in_cell = vec![0u16; s * s];
        for (k, &cell) in spiral.iter().enumerate() {
            bit_in_cell[cell] = k as u16;
        }
        let forward: Vec<u16> = tiles.iter().map(|&cell| bit_in_cell[cell]).collect();
        let mut inverse = vec![0u16; forward.len()];
        for (j, &k) in forward.iter().enumerate() {
            inverse[k as usize] = j as u16;
        }
        BlockPermutation {
            order,
            forward,
            inverse,
        }
    }

    /// Shared table for `order`, built on first use.
    pub fn cached(order: MatrixOrder) -> &'static BlockPermutation {
        static TABLES: [OnceLock<BlockPermutation>; SUPPORTED_ORDERS.len()] =
            [const { OnceLock::new() }; SUPPORTED_ORDERS.len()];
        TABLES[order.slot()].get_or_init(|| BlockPermutation::build(order))
    }

    pub fn order(&self) -> MatrixOrder {
        self.order
    }

    pub fn block_bits(&self) -> usize {
        self.forward.len()
    }

    pub fn forward(&self) -> &[u16] {
        &self.forward
    }

    pub fn inverse(&self) -> &[u16] {
        &self.inverse
    }

    pub fn table(&self, direction: Direction) -> &[u16] {
        match direction {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        }
    }

    pub fn apply(&self, block: &BitString, direction: Direction) -> Result<BitString, PermutationError> {
        if block.len() != self.block_bits() {
            return Err(PermutationError::LengthMismatch {
                expected: self.block_bits(),
                actual: block.len(),
            });
        }
        let mut out = vec![0u8; block.len().div_ceil(8)];
        permute_bits(self.table(direction), block.as_storage(), 0, &mut out, 0);
        Ok(BitString::from_storage(out, block.len()).expect("sized above"))
    }
}

/// Writes `dst[dst_base + j] = src[src_base + table[j]]` for every `j`.
/// `dst` must be zeroed over the written range.
#[inline]
pub(crate) fn permute_bits(table: &[u16], src: &[u8], src_base: usize, dst: &mut [u8], dst_base: usize) {
    if dst_base.is_multiple_of(8) && table.len().is_multiple_of(8) {
        let out = &mut dst[dst_base / 8..(dst_base + table.len()) / 8];
        for (byte, idx) in out.iter_mut().zip(table.chunks_exact(8)) {
            let mut v = 0u8;
            for &k in idx {
                let p = src_base + k as usize;
                v = (v << 1) | ((src[p / 8] >> (7 - p % 8)) & 1);
            }
            *byte = v;
        }
        return;
    }
    for (j, &k) in table.iter().enumerate() {
        if get_bit(src, src_base + k as usize) {
            set_bit(dst, dst_base + j);
        }
    }
}
