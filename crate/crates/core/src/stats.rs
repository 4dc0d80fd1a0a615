//! Evaluation metrics: byte histograms, Pearson χ², single-bit-flip trials
//! (avalanche, strict avalanche, bit independence) and wall-clock timing.
//!
//! Flip-trial definitions, with `C` the ciphertext of the plaintext, `N` its
//! bit length and `E = N / 2`:
//!
//! * avalanche: `1 − SD / E` where `SD` is the root mean square of
//!   `d_t − E` over trials and `d_t` the Hamming distance between `C` and the
//!   ciphertext of the plaintext with one bit flipped.
//! * strict avalanche: `1 − RMS_j(p_j − ½) / ½` where `p_j` is the fraction
//!   of trials that flipped output position `j`.
//! * bit independence: `1 − mean |ρ(j, k)|` over sampled position pairs,
//!   `ρ` being the Pearson correlation of the two flip indicators across
//!   trials.
//!
//! Outputs longer than [`FlipConfig::max_positions`] bits are tracked per
//! position class `j mod aggregation_width` instead of per bit.

use std::collections::HashSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitstream::{get_bit, hamming_bytes};
use crate::cipher::{CipherError, CipherUnderTest};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("input is empty")]
    EmptyInput,
    #[error("{got} trials requested, at least {min} required")]
    TooFewTrials { min: usize, got: usize },
    #[error("pair sample must be at least 1")]
    EmptyPairSample,
    #[error("histogram totals differ: observed {observed}, expected {expected}")]
    TotalsMismatch { observed: u64, expected: u64 },
    #[error("expected histogram has no nonzero category")]
    EmptyExpected,
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error(transparent)]
    Cipher(#[from] CipherError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: [u64; 256],
}

impl Default for Histogram {
    fn default() -> Self {
        Self { counts: [0; 256] }
    }
}

impl Histogram {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of byte values that occur at least once.
    pub fn distinct(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

pub fn byte_histogram(data: &[u8]) -> Histogram {
    let mut counts = [0u64; 256];
    for &b in data {
        counts[b as usize] += 1;
    }
    Histogram { counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub included_categories: usize,
}

/// Pearson χ² of `observed` against `expected`, skipping categories whose
/// expected count is zero.
pub fn chi_square(observed: &Histogram, expected: &Histogram) -> Result<ChiSquareResult, StatsError> {
    let (o_total, e_total) = (observed.total(), expected.total());
    if o_total != e_total {
        return Err(StatsError::TotalsMismatch {
            observed: o_total,
            expected: e_total,
        });
    }
    let mut statistic = 0.0;
    let mut included = 0;
    for (&o, &e) in observed.counts.iter().zip(&expected.counts) {
        if e == 0 {
            continue;
        }
        included += 1;
        let diff = o as f64 - e as f64;
        statistic += diff * diff / e as f64;
    }
    if included == 0 {
        return Err(StatsError::EmptyExpected);
    }
    Ok(ChiSquareResult {
        statistic,
        degrees_of_freedom: included - 1,
        included_categories: included,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipTrialReport {
    pub trials: usize,
    /// True when every plaintext bit was flipped exactly once.
    pub exhaustive: bool,
    pub avalanche: f64,
    pub mean_hamming_distance: f64,
    pub strict_avalanche: Option<f64>,
    pub bit_independence: Option<f64>,
    /// Pairs left out of the bit-independence mean because one indicator
    /// was constant and the other was not.
    pub skipped_pairs: Option<usize>,
}

/// Which flip-trial metrics to compute; avalanche is always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metrics {
    pub strict_avalanche: bool,
    pub bit_independence: bool,
}

impl Metrics {
    pub const ALL: Metrics = Metrics {
        strict_avalanche: true,
        bit_independence: true,
    };
    pub const AVALANCHE_ONLY: Metrics = Metrics {
        strict_avalanche: false,
        bit_independence: false,
    };

    fn needs_indicators(self) -> bool {
        self.strict_avalanche || self.bit_independence
    }
}

#[derive(Debug, Clone)]
pub struct FlipConfig {
    pub trials: usize,
    pub seed: u64,
    pub pair_sample: usize,
    /// Plaintexts with at most this many bits are flipped exhaustively.
    pub exhaustive_limit_bits: usize,
    /// Outputs above this many bits are aggregated by position class.
    pub max_positions: usize,
    pub aggregation_width: usize,
    /// Run trials on the rayon pool (ignored without the `parallel` feature).
    pub parallel: bool,
}

impl Default for FlipConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            pair_sample: 256,
            exhaustive_limit_bits: 4096,
            max_positions: 1 << 16,
            aggregation_width: 64,
            parallel: true,
        }
    }
}

pub const MIN_INDICATOR_TRIALS: usize = 8;

enum Indicator {
    Bits(Vec<u8>),
    Classes(Vec<u32>),
}

struct Trial {
    distance: u64,
    indicator: Option<Indicator>,
}

/// How output positions map onto tracked indicator columns.
#[derive(Clone, Copy)]
enum Layout {
    PerBit { bits: usize },
    Aggregated { width: usize, bits: usize },
}

impl Layout {
    fn columns(self) -> usize {
        match self {
            Layout::PerBit { bits } => bits,
            Layout::Aggregated { width, bits } => width.min(bits),
        }
    }

    /// Number of output positions folded into column `j`.
    fn column_size(self, j: usize) -> usize {
        match self {
            Layout::PerBit { .. } => 1,
            Layout::Aggregated { width, bits } => (bits - j).div_ceil(width),
        }
    }
}

/// Bitwise difference of `base` and `other` over `base`'s length; bytes
/// missing from `other` count as fully flipped.
fn diff_bytes(base: &[u8], other: &[u8]) -> Vec<u8> {
    base.iter()
        .enumerate()
        .map(|(i, b)| other.get(i).map_or(0xFF, |o| b ^ o))
        .collect()
}

fn run_trial<C: CipherUnderTest + ?Sized>(
    cipher: &C,
    plaintext: &[u8],
    base: &[u8],
    position: usize,
    layout: Option<Layout>,
) -> Result<Trial, CipherError> {
    let mut flipped = plaintext.to_vec();
    flipped[position / 8] ^= 0x80 >> (position % 8);
    let out = cipher.encrypt(&flipped)?;
    let common = base.len().min(out.len());
    let distance = hamming_bytes(&base[..common], &out[..common])
        + 8 * (base.len().abs_diff(out.len()) as u64);
    let indicator = layout.map(|layout| {
        let diff = diff_bytes(base, &out);
        match layout {
            Layout::PerBit { .. } => Indicator::Bits(diff),
            Layout::Aggregated { width, bits } => {
                let mut counts = vec![0u32; layout.columns()];
                for p in 0..bits {
                    if get_bit(&diff, p) {
                        counts[p % width] += 1;
                    }
                }
                Indicator::Classes(counts)
            }
        }
    });
    Ok(Trial {
        distance,
        indicator,
    })
}

fn run_trials<C: CipherUnderTest + ?Sized>(
    cipher: &C,
    plaintext: &[u8],
    base: &[u8],
    positions: &[usize],
    layout: Option<Layout>,
    parallel: bool,
) -> Result<Vec<Trial>, CipherError> {
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return positions
            .par_iter()
            .map(|&p| run_trial(cipher, plaintext, base, p, layout))
            .collect();
    }
    let _ = parallel;
    positions
        .iter()
        .map(|&p| run_trial(cipher, plaintext, base, p, layout))
        .collect()
}

fn flip_positions(bits: usize, config: &FlipConfig) -> (Vec<usize>, bool) {
    if bits <= config.exhaustive_limit_bits {
        return ((0..bits).collect(), true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    ((0..config.trials).map(|_| rng.gen_range(0..bits)).collect(), false)
}

fn indicator_value(trial: &Trial, j: usize) -> f64 {
    match trial.indicator.as_ref().expect("indicators collected") {
        Indicator::Bits(diff) => get_bit(diff, j) as u8 as f64,
        Indicator::Classes(counts) => counts[j] as f64,
    }
}

fn strict_avalanche_value(trials: &[Trial], layout: Layout) -> f64 {
    let n = trials.len() as f64;
    let cols = layout.columns();
    let mut sum_sq = 0.0;
    for j in 0..cols {
        let flips: f64 = trials.iter().map(|t| indicator_value(t, j)).sum();
        let p = flips / (n * layout.column_size(j) as f64);
        sum_sq += (p - 0.5) * (p - 0.5);
    }
    1.0 - (sum_sq / cols as f64).sqrt() / 0.5
}

fn sample_pairs(cols: usize, want: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = cols * cols.saturating_sub(1) / 2;
    if want >= total {
        return (0..cols)
            .flat_map(|j| (j + 1..cols).map(move |k| (j, k)))
            .collect();
    }
    // separate stream from the flip-position draws
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut seen = HashSet::with_capacity(want);
    let mut pairs = Vec::with_capacity(want);
    while pairs.len() < want {
        let j = rng.gen_range(0..cols);
        let k = rng.gen_range(0..cols);
        if j == k {
            continue;
        }
        let pair = (j.min(k), j.max(k));
        if seen.insert(pair) {
            pairs.push(pair);
        }
    }
    pairs
}

/// Returns (bit independence, skipped pairs).
fn bit_independence_value(trials: &[Trial], layout: Layout, pair_sample: usize, seed: u64) -> (f64, usize) {
    let n = trials.len() as f64;
    let mut sum = 0.0;
    let mut counted = 0usize;
    let mut skipped = 0usize;
    for (j, k) in sample_pairs(layout.columns(), pair_sample, seed) {
        let xs: Vec<f64> = trials.iter().map(|t| indicator_value(t, j)).collect();
        let ys: Vec<f64> = trials.iter().map(|t| indicator_value(t, k)).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        if sxx == 0.0 || syy == 0.0 {
            if xs == ys {
                sum += 1.0;
                counted += 1;
            } else {
                skipped += 1;
            }
            continue;
        }
        sum += (sxy / (sxx * syy).sqrt()).abs();
        counted += 1;
    }
    let bic = if counted == 0 { 1.0 } else { 1.0 - sum / counted as f64 };
    (bic, skipped)
}

/// Runs one batch of single-bit-flip trials and derives the requested metrics.
pub fn flip_trials<C: CipherUnderTest + ?Sized>(
    cipher: &C,
    plaintext: &[u8],
    config: &FlipConfig,
    metrics: Metrics,
) -> Result<FlipTrialReport, StatsError> {
    if plaintext.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let bits = plaintext.len() * 8;
    let (positions, exhaustive) = flip_positions(bits, config);
    let min = if metrics.needs_indicators() { MIN_INDICATOR_TRIALS } else { 1 };
    if positions.len() < min {
        return Err(StatsError::TooFewTrials {
            min,
            got: positions.len(),
        });
    }
    if metrics.bit_independence && config.pair_sample == 0 {
        return Err(StatsError::EmptyPairSample);
    }

    let base = cipher.encrypt(plaintext)?;
    if base.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let out_bits = base.len() * 8;
    let layout = metrics.needs_indicators().then(|| {
        if out_bits <= config.max_positions {
            Layout::PerBit { bits: out_bits }
        } else {
            Layout::Aggregated {
                width: config.aggregation_width.max(1),
                bits: out_bits,
            }
        }
    });
    let trials = run_trials(cipher, plaintext, &base, &positions, layout, config.parallel)?;

    let expected = out_bits as f64 / 2.0;
    let n = trials.len() as f64;
    let mean_distance = trials.iter().map(|t| t.distance as f64).sum::<f64>() / n;
    let sd = (trials
        .iter()
        .map(|t| (t.distance as f64 - expected).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();

    let strict_avalanche = match layout {
        Some(layout) if metrics.strict_avalanche => Some(strict_avalanche_value(&trials, layout)),
        _ => None,
    };
    let (bit_independence, skipped_pairs) = match layout {
        Some(layout) if metrics.bit_independence => {
            let (bic, skipped) = bit_independence_value(&trials, layout, config.pair_sample, config.seed);
            (Some(bic), Some(skipped))
        }
        _ => (None, None),
    };

    Ok(FlipTrialReport {
        trials: trials.len(),
        exhaustive,
        avalanche: 1.0 - sd / expected,
        mean_hamming_distance: mean_distance,
        strict_avalanche,
        bit_independence,
        skipped_pairs,
    })
}

pub fn avalanche_test<C: CipherUnderTest + ?Sized>(
    cipher: &C,
    plaintext: &[u8],
    trials: usize,
    seed: u64,
) -> Result<FlipTrialReport, StatsError> {
    if trials == 0 {
        return Err(StatsError::TooFewTrials { min: 1, got: 0 });
    }
    let config = FlipConfig {
        trials,
        seed,
        ..FlipConfig::default()
    };
    flip_trials(cipher, plaintext, &config, Metrics::AVALANCHE_ONLY)
}

pub fn strict_avalanche_test<C: CipherUnderTest + ?Sized>(
    cipher: &C,
    plaintext: &[u8],
    trials: usize,
    seed: u64,
) -> Result<FlipTrialReport, StatsError> {
    if trials < MIN_INDICATOR_TRIALS {
        return Err(StatsError::TooFewTrials {
            min: MIN_INDICATOR_TRIALS,
            got: trials,
        });
    }
    let config = FlipConfig {
        trials,
        seed,
        ..FlipConfig::default()
    };
    let metrics = Metrics {
        strict_avalanche: true,
        bit_independence: false,
    };
    flip_trials(cipher, plaintext, &config, metrics)
}

pub fn bit_independence_test<C: CipherUnderTest + ?Sized>(
    cipher: &C,
    plaintext: &[u8],
    trials: usize,
    pair_sample: usize,
    seed: u64,
) -> Result<FlipTrialReport, StatsError> {
    if trials < MIN_INDICATOR_TRIALS {
        return Err(StatsError::TooFewTrials {
            min: MIN_INDICATOR_TRIALS,
            got: trials,
        });
    }
    let config = FlipConfig {
        trials,
        seed,
        pair_sample,
        ..FlipConfig::default()
    };
    let metrics = Metrics {
        strict_avalanche: false,
        bit_independence: true,
    };
    flip_trials(cipher, plaintext, &config, metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    pub bytes_processed: u64,
    pub repetitions: usize,
    pub encrypt_millis: f64,
    pub decrypt_millis: f64,
    /// Encryption throughput; absent when the median time rounds to zero.
    pub throughput_bytes_per_ms: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len().is_multiple_of(2) {
        (xs[mid - 1] + xs[mid]) / 2.0
    } else {
        xs[mid]
    }
}

/// Median wall-clock milliseconds of encryption and decryption.
pub fn timing_run<C: CipherUnderTest + ?Sized>(
    cipher: &C,
    plaintext: &[u8],
    repetitions: usize,
) -> Result<TimingResult, StatsError> {
    if repetitions == 0 {
        return Err(StatsError::NoRepetitions);
    }
    let mut enc = Vec::with_capacity(repetitions);
    let mut dec = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let ct = cipher.encrypt(plaintext)?;
        enc.push(start.elapsed().as_secs_f64() * 1e3);
        let start = Instant::now();
        let pt = cipher.decrypt(&ct)?;
        dec.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(pt);
    }
    let encrypt_millis = median(enc);
    let decrypt_millis = median(dec);
    Ok(TimingResult {
        bytes_processed: plaintext.len() as u64,
        repetitions,
        encrypt_millis,
        decrypt_millis,
        throughput_bytes_per_ms: (encrypt_millis > 0.0).then(|| plaintext.len() as f64 / encrypt_millis),
    })
}
