//! Runs the evaluation battery for each (file, cipher) pair.

use std::collections::BTreeSet;
use std::str::FromStr;

use smbbot::cipher::{CipherError, CipherUnderTest};
use smbbot::report::AnalysisRecord;
use smbbot::stats::{self, FlipConfig, Metrics};

use crate::external::AdapterError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Test {
    Freq,
    Chi2,
    Avalanche,
    Sac,
    Bic,
    Timing,
}

impl FromStr for Test {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "freq" => Test::Freq,
            "chi2" => Test::Chi2,
            "avalanche" => Test::Avalanche,
            "sac" => Test::Sac,
            "bic" => Test::Bic,
            "timing" => Test::Timing,
            other => return Err(format!("unknown test {other:?}")),
        })
    }
}

pub fn parse_tests(list: &str) -> Result<BTreeSet<Test>, String> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub tests: BTreeSet<Test>,
    pub flip: FlipConfig,
    pub repetitions: usize,
}

/// Outcome of one (file, cipher) job.
pub struct Outcome {
    pub record: AnalysisRecord,
    /// Set when the cipher failed or broke its contract.
    pub cipher_failure: bool,
}

fn describe(err: &CipherError) -> String {
    if let CipherError::Other(inner) = err {
        if let Some(a) = inner.downcast_ref::<AdapterError>() {
            return a.to_string();
        }
    }
    err.to_string()
}

/// Runs the requested tests. Cipher failures are recorded in the returned
/// record rather than aborting.
pub fn analyze_one(
    file: &str,
    data: &[u8],
    cipher: &mut dyn CipherUnderTest,
    opts: &AnalysisOptions,
) -> Outcome {
    let mut record = AnalysisRecord {
        file: file.to_string(),
        cipher: cipher.name(),
        bytes: data.len() as u64,
        ..Default::default()
    };
    let mut errors: Vec<String> = Vec::new();
    let fail = |record: &mut AnalysisRecord, msg: String| -> Outcome {
        record.error = Some(msg);
        Outcome {
            record: record.clone(),
            cipher_failure: true,
        }
    };

    if let Err(e) = cipher.setup(data) {
        return fail(&mut record, format!("setup: {}", describe(&e)));
    }
    let ciphertext = match cipher.encrypt(data) {
        Ok(c) => c,
        Err(e) => return fail(&mut record, format!("encrypt: {}", describe(&e))),
    };
    if cipher.length_preserving() && ciphertext.len() != data.len() {
        let e = AdapterError::LengthViolation {
            input: data.len(),
            output: ciphertext.len(),
        };
        return fail(&mut record, e.to_string());
    }
    match cipher.decrypt(&ciphertext) {
        Ok(p) if p == data => {}
        Ok(_) => {
            let e = AdapterError::RoundTripViolation {
                detail: "decrypted output differs from input".into(),
            };
            return fail(&mut record, e.to_string());
        }
        Err(e) => return fail(&mut record, format!("decrypt: {}", describe(&e))),
    }

    let tests = &opts.tests;
    let plain_hist = stats::byte_histogram(data);
    let cipher_hist = stats::byte_histogram(&ciphertext);
    if tests.contains(&Test::Freq) {
        record.plain_histogram = Some(plain_hist.counts().to_vec());
        record.cipher_histogram = Some(cipher_hist.counts().to_vec());
    }
    if tests.contains(&Test::Chi2) {
        match stats::chi_square(&cipher_hist, &plain_hist) {
            Ok(r) => record.chi_square = Some(r),
            Err(e) => errors.push(format!("chi2: {e}")),
        }
    }

    let metrics = Metrics {
        strict_avalanche: tests.contains(&Test::Sac),
        bit_independence: tests.contains(&Test::Bic),
    };
    let mut cipher_failure = false;
    if tests.contains(&Test::Avalanche) || metrics.strict_avalanche || metrics.bit_independence {
        match stats::flip_trials(&*cipher, data, &opts.flip, metrics) {
            Ok(r) => record.flip = Some(r),
            Err(stats::StatsError::Cipher(e)) => {
                cipher_failure = true;
                errors.push(format!("flip trials: {}", describe(&e)));
            }
            Err(e) => errors.push(format!("flip trials: {e}")),
        }
    }
    if tests.contains(&Test::Timing) {
        match stats::timing_run(&*cipher, data, opts.repetitions) {
            Ok(t) => record.timing = Some(t),
            Err(stats::StatsError::Cipher(e)) => {
                cipher_failure = true;
                errors.push(format!("timing: {}", describe(&e)));
            }
            Err(e) => errors.push(format!("timing: {e}")),
        }
    }

    if !errors.is_empty() {
        record.error = Some(errors.join("; "));
    }
    Outcome {
        record,
        cipher_failure,
    }
}
