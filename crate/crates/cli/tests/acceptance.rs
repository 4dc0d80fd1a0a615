//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::panic;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use smbbot::cipher::{CipherError, CipherUnderTest, SmbbotCipher};
use smbbot::corpus::{self, CorpusKind, CorpusSpec};
use smbbot::permutation::{BlockPermutation, Direction, MatrixOrder, SUPPORTED_ORDERS};
use smbbot::session_key::{CountMode, KeyError, SessionKey};
use smbbot::stats::{self, byte_histogram, chi_square, FlipConfig, Histogram, Metrics};
use smbbot::{decrypt_bytes, encrypt_bytes, BitString};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_bytes(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill(&mut v[..]);
    v
}

fn ones(v: &[u8]) -> u64 {
    v.iter().map(|b| u64::from(b.count_ones())).sum()
}

fn ac1_golden() -> Outcome {
    let key = SessionKey::single_portion(MatrixOrder::FOUR, 1);
    let ct = encrypt_bytes(&[0x47, 0x6F], &key).map_err(|e| e.to_string())?;
    ensure!(ct == [0x34, 0xEF], "ciphertext {ct:02X?}");
    let pt = decrypt_bytes(&ct, &key).map_err(|e| e.to_string())?;
    ensure!(pt == [0x47, 0x6F], "plaintext {pt:02X?}");
    Ok(format!("\"Go\" -> {} -> \"Go\"", BitString::from_bytes(&ct)))
}

fn ac2_round_trip_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC02);
    let mut cases: Vec<(usize, u64)> = vec![(0, 1), (1, 2), (882, 3)];
    cases.extend((0..1000).map(|_| (rng.gen_range(0..=64 * 1024), rng.gen())));
    for (i, &(size, seed)) in cases.iter().enumerate() {
        let mode = if i % 2 == 0 { CountMode::Free } else { CountMode::Pow3 };
        let data = random_bytes(&mut rng, size);
        let key = SessionKey::generate(size as u64, seed, mode);
        let ct = encrypt_bytes(&data, &key).map_err(|e| e.to_string())?;
        ensure!(ct.len() == size, "length changed for size {size}");
        ensure!(ones(&ct) == ones(&data), "popcount changed for size {size} seed {seed}");
        let pt = decrypt_bytes(&ct, &key).map_err(|e| e.to_string())?;
        ensure!(pt == data, "round trip failed for size {size} seed {seed}");
    }
    Ok(format!("{} cases byte-exact, popcount preserved", cases.len()))
}

fn ac3_permutations() -> Outcome {
    for &s in &SUPPORTED_ORDERS {
        let p = BlockPermutation::build(MatrixOrder::new(s).unwrap());
        let mut sorted = p.forward().to_vec();
        sorted.sort_unstable();
        ensure!(
            sorted.iter().enumerate().all(|(i, &v)| i == v as usize),
            "order {s} forward table is not a bijection"
        );
        for j in 0..p.block_bits() {
            ensure!(p.inverse()[p.forward()[j] as usize] as usize == j, "order {s} inverse∘forward ≠ id");
            ensure!(p.forward()[p.inverse()[j] as usize] as usize == j, "order {s} forward∘inverse ≠ id");
        }
    }
    let p2 = BlockPermutation::build(MatrixOrder::TWO);
    ensure!(p2.forward() == [0, 3, 1, 2], "order 2 forward = {:?}", p2.forward());
    for v in 0u8..16 {
        let block = BitString::from_storage(vec![v << 4], 4).unwrap();
        let enc = p2.apply(&block, Direction::Forward).unwrap();
        ensure!(p2.apply(&enc, Direction::Inverse).unwrap() == block, "block {v:04b} failed");
    }
    Ok("orders 2/4/8/12/16 bijective; order 2 = [0,3,1,2]; 16/16 blocks round-trip".into())
}

fn ac4_transposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC04);
    let mut trials = 0;
    while trials < 10_000 {
        let size = rng.gen_range(1..=4096);
        let data = random_bytes(&mut rng, size);
        let key = SessionKey::generate(size as u64, rng.gen(), CountMode::Free);
        let base = encrypt_bytes(&data, &key).map_err(|e| e.to_string())?;
        ensure!(ones(&base) == ones(&data), "popcount changed");
        for _ in 0..100 {
            let pos = rng.gen_range(0..size * 8);
            let mut flipped = data.clone();
            flipped[pos / 8] ^= 0x80 >> (pos % 8);
            let ct = encrypt_bytes(&flipped, &key).map_err(|e| e.to_string())?;
            let d: u32 = base.iter().zip(&ct).map(|(a, b)| (a ^ b).count_ones()).sum();
            ensure!(d == 1, "flip at bit {pos} of {size}-byte input changed {d} bits");
            trials += 1;
        }
    }
    Ok(format!("{trials} single-bit flips, Hamming distance 1 every time"))
}

fn ac5_key_format() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC05);
    for _ in 0..1000 {
        let mode = if rng.gen() { CountMode::Free } else { CountMode::Pow3 };
        let key = SessionKey::generate(rng.gen_range(0..1u64 << 40), rng.gen(), mode);
        let bytes = key.to_bytes();
        ensure!(bytes.len() == 149, "key file is {} bytes", bytes.len());
        ensure!(SessionKey::from_bytes(&bytes).as_ref() == Ok(&key), "round trip failed");
    }
    let good = SessionKey::generate(1234, 5, CountMode::Free).to_bytes();
    let mut magic = good.clone();
    magic[..4].copy_from_slice(b"XXXX");
    let mut version = good.clone();
    version[4] = 0x02;
    let mut order = good.clone();
    order[5] = 6;
    let mut last = good.clone();
    last[5 + 9 * 15] = 4;
    let checks = [
        (SessionKey::from_bytes(&magic), KeyError::BadMagic),
        (SessionKey::from_bytes(&version), KeyError::BadVersion(2)),
        (SessionKey::from_bytes(&good[..100]), KeyError::BadLength(100)),
        (SessionKey::from_bytes(&order), KeyError::InvalidOrder { record: 1, order: 6 }),
        (SessionKey::from_bytes(&last), KeyError::FinalPortionOrder(4)),
    ];
    for (got, want) in checks {
        ensure!(got.as_ref().err() == Some(&want), "expected {want:?}, got {got:?}");
    }
    Ok("1000 keys round-trip; magic/version/length/order/final-order rejected".into())
}

fn ac6_chi_square() -> Outcome {
    let h = byte_histogram(b"the quick brown fox jumps over the lazy dog");
    ensure!(chi_square(&h, &h).unwrap().statistic == 0.0, "chi2(h,h) != 0");
    let mut o = [0u64; 256];
    let mut e = [0u64; 256];
    o[0] = 10;
    e[0] = 5;
    e[1] = 5;
    let r = chi_square(&Histogram::from_counts(o), &Histogram::from_counts(e)).unwrap();
    ensure!(r.statistic == 10.0 && r.degrees_of_freedom == 1, "two-category case gave {r:?}");

    let text = corpus::generate(&CorpusSpec {
        kind: CorpusKind::TextLike,
        size_bytes: 1 << 20,
        seed: 0xAC06,
    });
    let key = SessionKey::generate(text.len() as u64, 0xAC06, CountMode::Free);
    let ct = encrypt_bytes(&text, &key).map_err(|e| e.to_string())?;
    let r = chi_square(&byte_histogram(&ct), &byte_histogram(&text)).unwrap();
    ensure!(r.statistic > 400.0, "1 MiB text chi2 = {}", r.statistic);
    Ok(format!("identity 0, hand case 10.0, 1 MiB text chi2 = {:.0} (df {})", r.statistic, r.degrees_of_freedom))
}

/// Output is a pseudorandom function of the whole input, so each output bit
/// flips independently with probability one half.
struct FairCoin;

impl CipherUnderTest for FairCoin {
    fn name(&self) -> String {
        "fair-coin".into()
    }

    fn encrypt(&self, data: &[u8]) -> Result<Vec<u8>, CipherError> {
        let mut h = DefaultHasher::new();
        data.hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        let mut out = vec![0u8; data.len()];
        rng.fill(&mut out[..]);
        Ok(out)
    }

    fn decrypt(&self, _data: &[u8]) -> Result<Vec<u8>, CipherError> {
        Err(CipherError::NotSetUp)
    }
}

/// Ciphertext never depends on the plaintext.
struct NeverFlip;

impl CipherUnderTest for NeverFlip {
    fn name(&self) -> String {
        "never-flip".into()
    }

    fn encrypt(&self, data: &[u8]) -> Result<Vec<u8>, CipherError> {
        Ok(vec![0xA5; data.len()])
    }

    fn decrypt(&self, _data: &[u8]) -> Result<Vec<u8>, CipherError> {
        Err(CipherError::NotSetUp)
    }
}

fn ac7_metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC07);
    let plain = random_bytes(&mut rng, 1024);
    let cfg = FlipConfig {
        trials: 10_000,
        seed: 0xAC07,
        ..FlipConfig::default()
    };
    let r = stats::flip_trials(&FairCoin, &plain, &cfg, Metrics::ALL).map_err(|e| e.to_string())?;
    let (sac, bic) = (r.strict_avalanche.unwrap(), r.bit_independence.unwrap());
    ensure!(r.trials == 10_000, "ran {} trials", r.trials);
    ensure!(sac >= 0.95, "fair-coin SAC {sac}");
    ensure!(bic >= 0.9, "fair-coin BIC {bic}");

    let never = stats::strict_avalanche_test(&NeverFlip, &plain, 100, 1).map_err(|e| e.to_string())?;
    ensure!(never.strict_avalanche == Some(0.0), "never-flip SAC {:?}", never.strict_avalanche);

    let mut smbbot = SmbbotCipher::new(0xAC07, CountMode::Free);
    smbbot.setup(b"Go").map_err(|e| e.to_string())?;
    let s = stats::strict_avalanche_test(&smbbot, b"Go", 16, 0).map_err(|e| e.to_string())?;
    ensure!(s.exhaustive && s.trials == 16, "2-byte case was not exhaustive");
    ensure!(s.strict_avalanche == Some(0.125), "SMBBOT 2-byte SAC {:?}", s.strict_avalanche);
    Ok(format!("fair-coin SAC {sac:.4} BIC {bic:.4}; never-flip SAC 0; SMBBOT 2-byte SAC 0.125"))
}

fn median_encrypt_millis(data: &[u8], key: &SessionKey, reps: usize) -> f64 {
    let mut times: Vec<f64> = (0..reps)
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(encrypt_bytes(data, key).unwrap());
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[reps / 2]
}

fn ac8_performance() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plain = dir.path().join("source.bin");
    let enc = dir.path().join("source.enc");
    let data = corpus::generate(&CorpusSpec {
        kind: CorpusKind::Random,
        size_bytes: 6_542_640,
        seed: 0xAC08,
    });
    std::fs::write(&plain, &data).map_err(|e| e.to_string())?;
    let key = SessionKey::generate(data.len() as u64, 0xAC08, CountMode::Free);
    let start = Instant::now();
    let n = smbbot::encrypt_file(&plain, &key, &enc).map_err(|e| e.to_string())?;
    let file_secs = start.elapsed().as_secs_f64();
    ensure!(n == 6_542_640, "processed {n} bytes");
    ensure!(std::fs::metadata(&enc).unwrap().len() == 6_542_640, "output length changed");
    ensure!(file_secs <= 10.0, "6,542,640-byte file took {file_secs:.2}s");

    let small = &data[..1 << 20];
    let large: Vec<u8> = data.iter().chain(&data[..(8 << 20) - data.len()]).copied().collect();
    let k1 = SessionKey::generate(small.len() as u64, 1, CountMode::Free);
    let k8 = SessionKey::generate(large.len() as u64, 8, CountMode::Free);
    let t1 = median_encrypt_millis(small, &k1, 7);
    let t8 = median_encrypt_millis(&large, &k8, 7);
    let ratio = t8 / (8.0 * t1);
    ensure!((1.0 / 3.0..=3.0).contains(&ratio), "8 MiB / (8 x 1 MiB) time ratio {ratio:.2}");
    Ok(format!(
        "6,542,640-byte file in {:.0} ms; 1 MiB {t1:.1} ms, 8 MiB {t8:.1} ms, linearity ratio {ratio:.2}",
        file_secs * 1e3
    ))
}

fn run_analyze(bin: &str, args: &[&str]) -> Result<Vec<Value>, String> {
    let out = Command::new(bin).arg("analyze").args(args).output().map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "analyze exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn ac9_adapter_equivalence() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_smbbot");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("input.txt");
    let text = corpus::generate(&CorpusSpec {
        kind: CorpusKind::TextLike,
        size_bytes: 1500,
        seed: 9,
    });
    std::fs::write(&input, text).map_err(|e| e.to_string())?;
    let spec = serde_json::json!({
        "name": "self",
        "encrypt_command": format!("'{bin}' encrypt --key-seed 42 --in - --out -"),
        "decrypt_command": format!("'{bin}' decrypt --key-seed 42 --in - --out -"),
        "timeout_secs": 60,
    });
    let spec_path = dir.path().join("self.json");
    std::fs::write(&spec_path, spec.to_string()).map_err(|e| e.to_string())?;
    let ext = format!("ext:{}", spec_path.display());
    let input = input.display().to_string();
    let common = ["--in", &input, "--tests", "freq,chi2,avalanche,sac,bic", "--trials", "200", "--seed", "42"];

    let mut args = common.to_vec();
    args.extend(["--cipher", "smbbot", "--cipher", &ext]);
    let records = run_analyze(bin, &args)?;
    ensure!(records.len() == 2, "expected 2 records, got {}", records.len());
    let strip = |v: &Value| {
        let mut v = v.clone();
        v.as_object_mut().unwrap().remove("cipher");
        v
    };
    ensure!(records[0]["error"].is_null() && records[1]["error"].is_null(), "errors: {records:?}");
    ensure!(
        strip(&records[0]) == strip(&records[1]),
        "in-process {} vs adapter {}",
        records[0]["flip"],
        records[1]["flip"]
    );
    Ok(format!(
        "in-process and subprocess results identical (avalanche {}, SAC {}, BIC {})",
        records[0]["flip"]["avalanche"], records[0]["flip"]["strict_avalanche"], records[0]["flip"]["bit_independence"]
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1 golden example", ac1_golden),
        ("AC2 round-trip fuzzing", ac2_round_trip_fuzz),
        ("AC3 permutation correctness", ac3_permutations),
        ("AC4 transposition invariants", ac4_transposition),
        ("AC5 key format", ac5_key_format),
        ("AC6 chi-square oracle", ac6_chi_square),
        ("AC7 metric oracles", ac7_metric_oracles),
        ("AC8 performance", ac8_performance),
        ("AC9 adapter equivalence", ac9_adapter_equivalence),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.2}s): {why}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
