//! Analysis results and their JSON / CSV renderings.
//!
//! JSON is an array with one object per (file, cipher) pair. CSV has a fixed
//! header row followed by one row per pair; byte histograms appear only in
//! JSON, CSV carries their distinct-value counts instead.

use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{ChiSquareResult, FlipTrialReport, TimingResult};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?} (expected json or csv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub file: String,
    pub cipher: String,
    pub bytes: u64,
    pub plain_histogram: Option<Vec<u64>>,
    pub cipher_histogram: Option<Vec<u64>>,
    pub chi_square: Option<ChiSquareResult>,
    pub flip: Option<FlipTrialReport>,
    pub timing: Option<TimingResult>,
    pub error: Option<String>,
}

pub const CSV_HEADER: [&str; 20] = [
    "file",
    "cipher",
    "bytes",
    "plain_distinct",
    "cipher_distinct",
    "chi2_statistic",
    "chi2_df",
    "chi2_categories",
    "trials",
    "exhaustive",
    "avalanche",
    "mean_hamming_distance",
    "strict_avalanche",
    "bit_independence",
    "bic_skipped_pairs",
    "timing_repetitions",
    "encrypt_millis",
    "decrypt_millis",
    "throughput_bytes_per_ms",
    "error",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn distinct(h: &Option<Vec<u64>>) -> Option<usize> {
    h.as_ref().map(|h| h.iter().filter(|&&c| c > 0).count())
}

fn csv_row(r: &AnalysisRecord) -> [String; 20] {
    let flip = r.flip.as_ref();
    let timing = r.timing.as_ref();
    [
        r.file.clone(),
        r.cipher.clone(),
        r.bytes.to_string(),
        opt(distinct(&r.plain_histogram)),
        opt(distinct(&r.cipher_histogram)),
        opt(r.chi_square.map(|c| c.statistic)),
        opt(r.chi_square.map(|c| c.degrees_of_freedom)),
        opt(r.chi_square.map(|c| c.included_categories)),
        opt(flip.map(|f| f.trials)),
        opt(flip.map(|f| f.exhaustive)),
        opt(flip.map(|f| f.avalanche)),
        opt(flip.map(|f| f.mean_hamming_distance)),
        opt(flip.and_then(|f| f.strict_avalanche)),
        opt(flip.and_then(|f| f.bit_independence)),
        opt(flip.and_then(|f| f.skipped_pairs)),
        opt(timing.map(|t| t.repetitions)),
        opt(timing.map(|t| t.encrypt_millis)),
        opt(timing.map(|t| t.decrypt_millis)),
        opt(timing.and_then(|t| t.throughput_bytes_per_ms)),
        r.error.clone().unwrap_or_default(),
    ]
}

struct Counting<W> {
    inner: W,
    written: u64,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Writes `records` to `dest` and returns the number of bytes written.
pub fn emit_report<W: Write>(records: &[AnalysisRecord], format: ReportFormat, dest: W) -> Result<u64, ReportError> {
    let mut out = Counting { inner: dest, written: 0 };
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, records)?;
            out.write_all(b"\n")?;
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
            w.write_record(CSV_HEADER)?;
            for r in records {
                w.write_record(csv_row(r))?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(out.written)
}

pub fn parse_json_report(data: &[u8]) -> Result<Vec<AnalysisRecord>, ReportError> {
    Ok(serde_json::from_slice(data)?)
}
