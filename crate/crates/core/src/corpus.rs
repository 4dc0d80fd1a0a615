//! Deterministic synthetic test files.

use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusKind {
    /// Uniform random bytes, a stand-in for compressed or executable data.
    Random,
    /// Printable characters with English-like skewed frequencies.
    TextLike,
    /// A short seeded phrase repeated to length.
    Repetitive,
    /// All zero bytes.
    Sparse,
}

impl FromStr for CorpusKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(CorpusKind::Random),
            "text-like" | "text" => Ok(CorpusKind::TextLike),
            "repetitive" => Ok(CorpusKind::Repetitive),
            "sparse" => Ok(CorpusKind::Sparse),
            other => Err(format!(
                "unknown corpus kind {other:?} (expected random, text-like, repetitive or sparse)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub kind: CorpusKind,
    pub size_bytes: usize,
    pub seed: u64,
}

// Relative weights per mille, roughly English letter frequencies.
const LETTERS: &[(u8, u32)] = &[
    (b'e', 127), (b't', 91), (b'a', 82), (b'o', 75), (b'i', 70), (b'n', 67),
    (b's', 63), (b'h', 61), (b'r', 60), (b'd', 43), (b'l', 40), (b'c', 28),
    (b'u', 28), (b'm', 24), (b'w', 24), (b'f', 22), (b'g', 20), (b'y', 20),
    (b'p', 19), (b'b', 15), (b'v', 10), (b'k', 8), (b'j', 2), (b'x', 2),
    (b'q', 1), (b'z', 1),
];

fn text_alphabet() -> (Vec<u8>, Vec<u32>) {
    let mut symbols = Vec::new();
    let mut weights = Vec::new();
    for &(c, w) in LETTERS {
        symbols.push(c);
        weights.push(w * 10);
        symbols.push(c.to_ascii_uppercase());
        weights.push(w / 2 + 1);
    }
    for (c, w) in [(b' ', 1800), (b'\n', 120), (b'.', 65), (b',', 60), (b'\'', 10), (b'-', 8)] {
        symbols.push(c);
        weights.push(w);
    }
    for d in b'0'..=b'9' {
        symbols.push(d);
        weights.push(5);
    }
    (symbols, weights)
}

pub fn generate(spec: &CorpusSpec) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.size_bytes;
    match spec.kind {
        CorpusKind::Sparse => vec![0; n],
        CorpusKind::Random => {
            let mut out = vec![0u8; n];
            rng.fill(&mut out[..]);
            out
        }
        CorpusKind::TextLike => {
            let (symbols, weights) = text_alphabet();
            let dist = WeightedIndex::new(&weights).expect("weights are positive");
            (0..n).map(|_| symbols[dist.sample(&mut rng)]).collect()
        }
        CorpusKind::Repetitive => {
            let len = rng.gen_range(4..=32);
            let phrase: Vec<u8> = (0..len).map(|_| rng.gen_range(b' '..=b'~')).collect();
            phrase.iter().copied().cycle().take(n).collect()
        }
    }
}
