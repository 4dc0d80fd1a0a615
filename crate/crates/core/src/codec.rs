//! Whole-stream encryption and decryption.
//!
//! The key partitions the bit stream into sixteen portions of equal-sized
//! blocks; every block is permuted independently with the table for its
//! order. Blocks are independent, so the in-memory path splits the output
//! into byte-aligned chunks and fills them in parallel when the `parallel`
//! feature is enabled. File operations stream block by block in constant
//! memory.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

use crate::bitstream::{get_bit, set_bit, BitString};
use crate::permutation::{permute_bits, BlockPermutation, Direction, MatrixOrder, MAX_BLOCK_BITS};
use crate::session_key::SessionKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CipherDirection {
    Encrypt,
    Decrypt,
}

impl CipherDirection {
    fn table_direction(self) -> Direction {
        match self {
            CipherDirection::Encrypt => Direction::Forward,
            CipherDirection::Decrypt => Direction::Inverse,
        }
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("length mismatch: key covers {expected_bits} bits, input has {actual_bits}")]
    LengthMismatch { expected_bits: u128, actual_bits: u128 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Output bytes per parallel work unit.
#[cfg(feature = "parallel")]
const CHUNK_BYTES: usize = 1 << 16;

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: usize,
    block_bits: usize,
    blocks: usize,
    perm: &'static BlockPermutation,
}

impl Segment {
    fn end(&self) -> usize {
        self.start + self.block_bits * self.blocks
    }
}

fn segments(key: &SessionKey) -> Vec<Segment> {
    let mut start = 0usize;
    let mut out = Vec::new();
    for p in key.portions() {
        if p.block_count == 0 {
            continue;
        }
        let seg = Segment {
            start,
            block_bits: p.order.block_bits(),
            blocks: p.block_count as usize,
            perm: BlockPermutation::cached(p.order),
        };
        start = seg.end();
        out.push(seg);
    }
    out
}

fn check_len(key: &SessionKey, bits: u128) -> Result<(), CodecError> {
    let expected = key.total_bits();
    if expected != bits {
        return Err(CodecError::LengthMismatch {
            expected_bits: expected,
            actual_bits: bits,
        });
    }
    Ok(())
}

fn nibble_lut(direction: Direction) -> &'static [u8; 256] {
    static LUTS: OnceLock<[[u8; 256]; 2]> = OnceLock::new();
    let luts = LUTS.get_or_init(|| {
        let perm = BlockPermutation::cached(MatrixOrder::TWO);
        [Direction::Forward, Direction::Inverse].map(|dir| {
            let mut lut = [0u8; 256];
            for (b, out) in lut.iter_mut().enumerate() {
                let src = [b as u8];
                let mut dst = [0u8];
                permute_bits(perm.table(dir), &src, 0, &mut dst, 0);
                permute_bits(perm.table(dir), &src, 4, &mut dst, 4);
                *out = dst[0];
            }
            lut
        })
    });
    match direction {
        Direction::Forward => &luts[0],
        Direction::Inverse => &luts[1],
    }
}

/// Fills output bits `lo..lo + 8 * dst.len()` (clipped to the stream) into `dst`.
fn fill_range(segs: &[Segment], src: &[u8], dst: &mut [u8], lo: usize, direction: Direction) {
    let hi = lo + dst.len() * 8;
    for seg in segs {
        if seg.end() <= lo || seg.start >= hi {
            continue;
        }
        let table = seg.perm.table(direction);
        if seg.block_bits == 4 && seg.start % 8 == 0 {
            // two order-2 blocks per byte: translate whole bytes through a lookup table
            let from = lo.max(seg.start);
            let to = hi.min(seg.end());
            let lut = nibble_lut(direction);
            let whole = (to - from) / 8;
            let (s0, d0) = (from / 8, (from - lo) / 8);
            for (d, s) in dst[d0..d0 + whole].iter_mut().zip(&src[s0..s0 + whole]) {
                *d = lut[*s as usize];
            }
            let tail = from + whole * 8;
            if tail < to {
                permute_bits(table, src, tail, dst, tail - lo);
            }
            continue;
        }
        let first = (lo.max(seg.start) - seg.start) / seg.block_bits;
        let last = (hi.min(seg.end()) - seg.start).div_ceil(seg.block_bits);
        for block in first..last {
            let base = seg.start + block * seg.block_bits;
            if base >= lo && base + seg.block_bits <= hi {
                permute_bits(table, src, base, dst, base - lo);
            } else {
                for (j, &k) in table.iter().enumerate() {
                    let p = base + j;
                    if (lo..hi).contains(&p) && get_bit(src, base + k as usize) {
                        set_bit(dst, p - lo);
                    }
                }
            }
        }
    }
}

/// Single-threaded transform of `bit_len` bits of `src`.
pub fn transform_sequential(
    src: &[u8],
    bit_len: usize,
    key: &SessionKey,
    direction: CipherDirection,
) -> Result<Vec<u8>, CodecError> {
    check_len(key, bit_len as u128)?;
    let mut dst = vec![0u8; bit_len.div_ceil(8)];
    fill_range(&segments(key), src, &mut dst, 0, direction.table_direction());
    Ok(dst)
}

/// Chunk-parallel transform; output is identical to [`transform_sequential`].
#[cfg(feature = "parallel")]
pub fn transform_parallel(
    src: &[u8],
    bit_len: usize,
    key: &SessionKey,
    direction: CipherDirection,
) -> Result<Vec<u8>, CodecError> {
    use rayon::prelude::*;

    check_len(key, bit_len as u128)?;
    let segs = segments(key);
    let dir = direction.table_direction();
    let mut dst = vec![0u8; bit_len.div_ceil(8)];
    dst.par_chunks_mut(CHUNK_BYTES)
        .enumerate()
        .for_each(|(i, chunk)| fill_range(&segs, src, chunk, i * CHUNK_BYTES * 8, dir));
    Ok(dst)
}

fn transform_raw(
    src: &[u8],
    bit_len: usize,
    key: &SessionKey,
    direction: CipherDirection,
) -> Result<Vec<u8>, CodecError> {
    #[cfg(feature = "parallel")]
    if src.len() > CHUNK_BYTES {
        return transform_parallel(src, bit_len, key, direction);
    }
    transform_sequential(src, bit_len, key, direction)
}

pub fn transform(
    input: &BitString,
    key: &SessionKey,
    direction: CipherDirection,
) -> Result<BitString, CodecError> {
    let out = transform_raw(input.as_storage(), input.len(), key, direction)?;
    Ok(BitString::from_storage(out, input.len()).expect("output sized to input"))
}

pub fn encrypt_bytes(plain: &[u8], key: &SessionKey) -> Result<Vec<u8>, CodecError> {
    transform_raw(plain, plain.len() * 8, key, CipherDirection::Encrypt)
}

pub fn decrypt_bytes(cipher: &[u8], key: &SessionKey) -> Result<Vec<u8>, CodecError> {
    transform_raw(cipher, cipher.len() * 8, key, CipherDirection::Decrypt)
}

const IO_CHUNK: usize = 1 << 16;

/// Bit cursor over a reader, refilled in `IO_CHUNK` slabs.
struct BitSource<R> {
    reader: R,
    buf: Vec<u8>,
    /// bit offset of the next unread bit within `buf`
    pos: usize,
    total_bytes: u64,
    eof: bool,
}

impl<R: Read> BitSource<R> {
    fn new(reader: R) -> Self {
        Self {
            reader,
            buf: Vec::with_capacity(IO_CHUNK + MAX_BLOCK_BITS / 8),
            pos: 0,
            total_bytes: 0,
            eof: false,
        }
    }

    /// Ensures at least `bits` unread bits are buffered; false on early EOF.
    fn ensure(&mut self, bits: usize) -> io::Result<bool> {
        while self.buf.len() * 8 - self.pos < bits {
            if self.eof {
                return Ok(false);
            }
            let consumed = self.pos / 8;
            self.buf.drain(..consumed);
            self.pos -= consumed * 8;
            let old = self.buf.len();
            self.buf.resize(old + IO_CHUNK, 0);
            let n = self.reader.read(&mut self.buf[old..])?;
            self.buf.truncate(old + n);
            self.total_bytes += n as u64;
            if n == 0 {
                self.eof = true;
            }
        }
        Ok(true)
    }

    fn at_end(&mut self) -> io::Result<bool> {
        Ok(!self.ensure(1)?)
    }
}

/// Bit-granular output accumulator flushing whole bytes.
struct BitSink<W: Write> {
    writer: W,
    buf: Vec<u8>,
    pos: usize,
}

impl<W: Write> BitSink<W> {
    fn new(writer: W) -> Self {
        Self {
            writer,
            buf: Vec::with_capacity(IO_CHUNK + MAX_BLOCK_BITS / 8),
            pos: 0,
        }
    }

    fn reserve(&mut self, bits: usize) -> io::Result<()> {
        if self.pos / 8 >= IO_CHUNK {
            let full = self.pos / 8;
            self.writer.write_all(&self.buf[..full])?;
            self.buf.drain(..full);
            self.pos -= full * 8;
        }
        let need = (self.pos + bits).div_ceil(8);
        if self.buf.len() < need {
            self.buf.resize(need, 0);
        }
        Ok(())
    }

    fn finish(mut self) -> io::Result<W> {
        debug_assert_eq!(self.pos % 8, 0);
        self.writer.write_all(&self.buf[..self.pos / 8])?;
        self.writer.flush()?;
        Ok(self.writer)
    }
}

/// Streams `reader` through the cipher into `writer`, one block at a time.
/// The input must hold exactly `key.total_bits() / 8` bytes.
pub fn transform_stream<R: Read, W: Write>(
    reader: R,
    writer: W,
    key: &SessionKey,
    direction: CipherDirection,
) -> Result<u64, CodecError> {
    let expected = key.total_bits();
    if !expected.is_multiple_of(8) {
        return Err(CodecError::LengthMismatch {
            expected_bits: expected,
            actual_bits: expected.next_multiple_of(8),
        });
    }
    let dir = direction.table_direction();
    let mut source = BitSource::new(reader);
    let mut sink = BitSink::new(writer);
    for seg in segments(key) {
        let table = seg.perm.table(dir);
        for _ in 0..seg.blocks {
            if !source.ensure(seg.block_bits)? {
                return Err(CodecError::LengthMismatch {
                    expected_bits: expected,
                    actual_bits: source.total_bytes as u128 * 8,
                });
            }
            sink.reserve(seg.block_bits)?;
            permute_bits(table, &source.buf, source.pos, &mut sink.buf, sink.pos);
            source.pos += seg.block_bits;
            sink.pos += seg.block_bits;
        }
    }
    if !source.at_end()? {
        let mut rest = Vec::new();
        source.reader.read_to_end(&mut rest)?;
        let actual = source.total_bytes + rest.len() as u64;
        return Err(CodecError::LengthMismatch {
            expected_bits: expected,
            actual_bits: actual as u128 * 8,
        });
    }
    sink.finish()?;
    Ok(source.total_bytes)
}

fn transform_file(
    path_in: &Path,
    key: &SessionKey,
    path_out: &Path,
    direction: CipherDirection,
) -> Result<u64, CodecError> {
    let input = File::open(path_in)?;
    check_len(key, input.metadata()?.len() as u128 * 8)?;
    let output = File::create(path_out)?;
    transform_stream(BufReader::new(input), BufWriter::new(output), key, direction)
}

/// Encrypts a file into `path_out`, returning the number of bytes processed.
pub fn encrypt_file(
    path_in: impl AsRef<Path>,
    key: &SessionKey,
    path_out: impl AsRef<Path>,
) -> Result<u64, CodecError> {
    transform_file(path_in.as_ref(), key, path_out.as_ref(), CipherDirection::Encrypt)
}

pub fn decrypt_file(
    path_in: impl AsRef<Path>,
    key: &SessionKey,
    path_out: impl AsRef<Path>,
) -> Result<u64, CodecError> {
    transform_file(path_in.as_ref(), key, path_out.as_ref(), CipherDirection::Decrypt)
}
