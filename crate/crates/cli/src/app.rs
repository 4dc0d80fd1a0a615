//! Command-line surface.
//!
//! Exit codes: 0 success, 2 I/O failure, 3 invalid arguments,
//! 4 key/input length mismatch, 5 cipher failure or contract violation
//! during analysis (the run still completes for the other files).

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use smbbot::cipher::{CipherUnderTest, IdentityCipher, SmbbotCipher};
use smbbot::codec::{self, CodecError};
use smbbot::corpus::{self, CorpusKind, CorpusSpec};
use smbbot::report::{emit_report, ReportFormat};
use smbbot::session_key::{CountMode, KeyError, SessionKey};
use smbbot::stats::FlipConfig;
use thiserror::Error;

use crate::analyze::{analyze_one, parse_tests, AnalysisOptions};
use crate::external::{ExternalCipher, ExternalCipherSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_LENGTH: i32 = 4;
pub const EXIT_CIPHER: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "smbbot", version, about = "Spiral-matrix bit transposition cipher and analysis battery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate a session key sized for a byte count or an input file.
    Keygen(KeygenArgs),
    /// Encrypt a file.
    Encrypt(CryptArgs),
    /// Decrypt a file.
    Decrypt(CryptArgs),
    /// Write a deterministic synthetic test file.
    Corpus(CorpusArgs),
    /// Run frequency, chi-square, flip-trial and timing tests.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["size", "input"])))]
pub struct KeygenArgs {
    /// Plaintext size in bytes.
    #[arg(long)]
    pub size: Option<u64>,
    /// Size the key for this file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "free")]
    pub mode: CountMode,
    /// Seed from OS entropy instead of --seed.
    #[arg(long)]
    pub fresh: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("keysrc").required(true).args(["key", "key_seed"])))]
pub struct CryptArgs {
    /// Key file.
    #[arg(long)]
    pub key: Option<PathBuf>,
    /// Derive the key from the input length and this seed instead of a key file.
    #[arg(long)]
    pub key_seed: Option<u64>,
    #[arg(long, default_value = "free", requires = "key_seed")]
    pub mode: CountMode,
    /// Input file, or `-` for standard input.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output file, or `-` for standard output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub kind: CorpusKind,
    #[arg(long)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// smbbot, identity, or ext:<spec.json>; repeat for several ciphers.
    #[arg(long = "cipher", default_value = "smbbot")]
    pub ciphers: Vec<String>,
    #[arg(long, default_value = "freq,chi2,avalanche,sac,bic,timing")]
    pub tests: String,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Session keys from OS entropy instead of --seed.
    #[arg(long)]
    pub fresh: bool,
    #[arg(long, default_value = "free")]
    pub mode: CountMode,
    #[arg(long, default_value_t = 256)]
    pub pair_sample: usize,
    #[arg(long, default_value_t = 64)]
    pub aggregation_width: usize,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    #[arg(long, default_value = "json")]
    pub format: ReportFormat,
    /// Report path, or `-` for standard output.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("length mismatch: key expects {expected_bits} bits, input has {actual_bits} bits")]
    Length { expected_bits: u128, actual_bits: u128 },
    #[error("invalid key file {path}: {source}")]
    Key {
        path: String,
        #[source]
        source: KeyError,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Key { .. } => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Length { .. } => EXIT_LENGTH,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::LengthMismatch {
                expected_bits,
                actual_bits,
            } => CliError::Length {
                expected_bits,
                actual_bits,
            },
            CodecError::Io(source) => CliError::Io {
                context: "transform".into(),
                source,
            },
        }
    }
}

fn is_stdio(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn read_input(p: &Path) -> Result<Vec<u8>, CliError> {
    if is_stdio(p) {
        let mut buf = Vec::new();
        io::stdin().lock().read_to_end(&mut buf).map_err(io_err("stdin"))?;
        return Ok(buf);
    }
    fs::read(p).map_err(io_err(p.display().to_string()))
}

fn write_output(p: &Path, data: &[u8]) -> Result<(), CliError> {
    if is_stdio(p) {
        let mut out = io::stdout().lock();
        out.write_all(data).and_then(|_| out.flush()).map_err(io_err("stdout"))
    } else {
        fs::write(p, data).map_err(io_err(p.display().to_string()))
    }
}

fn pick_seed(seed: u64, fresh: bool) -> u64 {
    if fresh {
        let s = rand::random();
        eprintln!("using fresh seed {s}");
        s
    } else {
        seed
    }
}

fn cmd_keygen(args: &KeygenArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let bytes = match (&args.size, &args.input) {
        (Some(n), None) => *n,
        (None, Some(path)) => fs::metadata(path)
            .map_err(io_err(path.display().to_string()))?
            .len(),
        _ => return Err(CliError::Usage("exactly one of --size or --input is required".into())),
    };
    let key = SessionKey::generate(bytes, pick_seed(args.seed, args.fresh), args.mode);
    fs::write(&args.out, key.to_bytes()).map_err(io_err(args.out.display().to_string()))?;
    writeln!(stdout, "{key}").map_err(io_err("stdout"))?;
    Ok(())
}

fn load_key(path: &Path) -> Result<SessionKey, CliError> {
    let data = fs::read(path).map_err(io_err(path.display().to_string()))?;
    SessionKey::from_bytes(&data).map_err(|source| CliError::Key {
        path: path.display().to_string(),
        source,
    })
}

fn cmd_crypt(args: &CryptArgs, decrypt: bool) -> Result<(), CliError> {
    let transform = |data: &[u8], key: &SessionKey| {
        if decrypt {
            codec::decrypt_bytes(data, key)
        } else {
            codec::encrypt_bytes(data, key)
        }
    };
    match (&args.key, args.key_seed) {
        (Some(key_path), _) => {
            let key = load_key(key_path)?;
            if is_stdio(&args.input) || is_stdio(&args.out) {
                let data = read_input(&args.input)?;
                let out = transform(&data, &key)?;
                write_output(&args.out, &out)
            } else {
                let res = if decrypt {
                    codec::decrypt_file(&args.input, &key, &args.out)
                } else {
                    codec::encrypt_file(&args.input, &key, &args.out)
                };
                res.map(|_| ()).map_err(|e| match e {
                    CodecError::Io(source) => CliError::Io {
                        context: format!("{} -> {}", args.input.display(), args.out.display()),
                        source,
                    },
                    other => other.into(),
                })
            }
        }
        (None, Some(seed)) => {
            let data = read_input(&args.input)?;
            let key = SessionKey::generate(data.len() as u64, seed, args.mode);
            let out = transform(&data, &key)?;
            write_output(&args.out, &out)
        }
        (None, None) => Err(CliError::Usage("one of --key or --key-seed is required".into())),
    }
}

fn cmd_corpus(args: &CorpusArgs) -> Result<(), CliError> {
    let data = corpus::generate(&CorpusSpec {
        kind: args.kind,
        size_bytes: args.size,
        seed: args.seed,
    });
    write_output(&args.out, &data)
}

fn build_cipher(name: &str, seed: u64, mode: CountMode) -> Result<Box<dyn CipherUnderTest>, CliError> {
    match name {
        "smbbot" => Ok(Box::new(SmbbotCipher::new(seed, mode))),
        "identity" => Ok(Box::new(IdentityCipher)),
        other => match other.strip_prefix("ext:") {
            Some(path) => {
                let spec = ExternalCipherSpec::load(Path::new(path)).map_err(|e| CliError::Usage(e.to_string()))?;
                let cipher = ExternalCipher::new(spec).map_err(|e| CliError::Usage(e.to_string()))?;
                Ok(Box::new(cipher))
            }
            None => Err(CliError::Usage(format!(
                "unknown cipher {other:?} (expected smbbot, identity or ext:<spec.json>)"
            ))),
        },
    }
}

/// Returns the exit code: 0, or 5 when any job recorded a failure.
fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32, CliError> {
    let tests = parse_tests(&args.tests).map_err(CliError::Usage)?;
    if tests.is_empty() {
        return Err(CliError::Usage("--tests must name at least one test".into()));
    }
    let seed = pick_seed(args.seed, args.fresh);
    let mut ciphers = args
        .ciphers
        .iter()
        .map(|c| build_cipher(c, seed, args.mode))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = AnalysisOptions {
        tests,
        flip: FlipConfig {
            trials: args.trials,
            seed: args.seed,
            pair_sample: args.pair_sample,
            aggregation_width: args.aggregation_width,
            ..FlipConfig::default()
        },
        repetitions: args.repetitions,
    };

    let mut records = Vec::new();
    let mut code = EXIT_OK;
    for path in &args.inputs {
        let data = fs::read(path).map_err(io_err(path.display().to_string()))?;
        for cipher in ciphers.iter_mut() {
            let outcome = analyze_one(&path.display().to_string(), &data, cipher.as_mut(), &opts);
            if let Some(err) = &outcome.record.error {
                eprintln!("{} [{}]: {err}", outcome.record.file, outcome.record.cipher);
                code = EXIT_CIPHER;
            }
            records.push(outcome.record);
        }
    }

    let written = if is_stdio(&args.out) {
        emit_report(&records, args.format, io::stdout().lock())
    } else {
        let file = File::create(&args.out).map_err(io_err(args.out.display().to_string()))?;
        emit_report(&records, args.format, BufWriter::new(file))
    };
    written.map_err(|e| CliError::Io {
        context: "writing report".into(),
        source: io::Error::other(e),
    })?;
    Ok(code)
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Cmd::Keygen(a) => cmd_keygen(a, &mut io::stdout().lock()).map(|_| EXIT_OK),
        Cmd::Encrypt(a) => cmd_crypt(a, false).map(|_| EXIT_OK),
        Cmd::Decrypt(a) => cmd_crypt(a, true).map(|_| EXIT_OK),
        Cmd::Corpus(a) => cmd_corpus(a).map(|_| EXIT_OK),
        Cmd::Analyze(a) => cmd_analyze(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("smbbot: {e}");
            e.exit_code()
        }
    }
}
