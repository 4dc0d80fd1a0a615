//! Subprocess adapter: drives an external encrypt/decrypt command pair over
//! raw bytes on standard input and standard output.
//!
//! Commands are shell templates run through `sh -c`. A nonzero exit status
//! is a failure; standard error is captured for the message.

use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use smbbot::cipher::{CipherError, CipherUnderTest};
use smbbot::CipherDirection;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("failed to spawn `{command}`: {source}")]
    SpawnFailure {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{command}` timed out after {secs}s")]
    Timeout { command: String, secs: f64 },
    #[error("`{command}` exited with {status}: {stderr}")]
    NonZeroExit {
        command: String,
        status: String,
        stderr: String,
    },
    #[error("round-trip violation: decrypt(encrypt(x)) differs from x ({detail})")]
    RoundTripViolation { detail: String },
    #[error("length violation: {input} input bytes produced {output} output bytes")]
    LengthViolation { input: usize, output: usize },
    #[error("invalid external cipher spec: {0}")]
    InvalidSpec(String),
}

impl AdapterError {
    /// True for failures that mean the external cipher broke its contract.
    pub fn is_contract_violation(&self) -> bool {
        matches!(
            self,
            AdapterError::RoundTripViolation { .. } | AdapterError::LengthViolation { .. }
        )
    }
}

fn default_timeout() -> f64 {
    30.0
}

fn default_true() -> bool {
    true
}

/// External cipher description, loaded from a JSON file.
///
/// ```json
/// { "name": "aes", "encrypt_command": "openssl enc ...", "decrypt_command": "openssl enc -d ...",
///   "timeout_secs": 30, "length_preserving": false }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalCipherSpec {
    #[serde(default)]
    pub name: String,
    pub encrypt_command: String,
    pub decrypt_command: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_true")]
    pub length_preserving: bool,
}

impl ExternalCipherSpec {
    pub fn new(encrypt_command: impl Into<String>, decrypt_command: impl Into<String>) -> Self {
        Self {
            name: String::new(),
            encrypt_command: encrypt_command.into(),
            decrypt_command: decrypt_command.into(),
            timeout_secs: default_timeout(),
            length_preserving: true,
        }
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        if self.encrypt_command.trim().is_empty() || self.decrypt_command.trim().is_empty() {
            return Err(AdapterError::InvalidSpec("both commands are required".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(AdapterError::InvalidSpec("timeout must be positive".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AdapterError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AdapterError::InvalidSpec(format!("{}: {e}", path.display())))?;
        let mut spec: ExternalCipherSpec = serde_json::from_str(&text)
            .map_err(|e| AdapterError::InvalidSpec(format!("{}: {e}", path.display())))?;
        if spec.name.is_empty() {
            spec.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "external".into());
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Feeds `data` to the command for `direction` and returns its standard output.
pub fn run_external_cipher(
    spec: &ExternalCipherSpec,
    direction: CipherDirection,
    data: &[u8],
) -> Result<Vec<u8>, AdapterError> {
    let command = match direction {
        CipherDirection::Encrypt => &spec.encrypt_command,
        CipherDirection::Decrypt => &spec.decrypt_command,
    };
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| AdapterError::SpawnFailure {
            command: command.clone(),
            source,
        })?;

    let mut stdin = child.stdin.take().expect("piped");
    let mut stdout = child.stdout.take().expect("piped");
    let mut stderr = child.stderr.take().expect("piped");
    let input = data.to_vec();
    // a child that exits without reading gives EPIPE here, reported via its status
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut buf = Vec::new();
        let res = stdout.read_to_end(&mut buf).map(|_| buf);
        let _ = tx.send(res);
    });

    let output = match rx.recv_timeout(Duration::from_secs_f64(spec.timeout_secs)) {
        Ok(res) => res,
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(AdapterError::Timeout {
                command: command.clone(),
                secs: spec.timeout_secs,
            });
        }
    };
    let status = child.wait().map_err(|source| AdapterError::SpawnFailure {
        command: command.clone(),
        source,
    })?;
    let _ = writer.join();
    let stderr = err_reader.join().unwrap_or_default();
    if !status.success() {
        return Err(AdapterError::NonZeroExit {
            command: command.clone(),
            status: status.to_string(),
            stderr: String::from_utf8_lossy(&stderr).trim().to_string(),
        });
    }
    output.map_err(|source| AdapterError::SpawnFailure {
        command: command.clone(),
        source,
    })
}

/// [`CipherUnderTest`] backed by an external command pair.
#[derive(Debug, Clone)]
pub struct ExternalCipher {
    spec: ExternalCipherSpec,
}

impl ExternalCipher {
    pub fn new(spec: ExternalCipherSpec) -> Result<Self, AdapterError> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &ExternalCipherSpec {
        &self.spec
    }

    fn run(&self, direction: CipherDirection, data: &[u8]) -> Result<Vec<u8>, AdapterError> {
        let out = run_external_cipher(&self.spec, direction, data)?;
        if self.spec.length_preserving && out.len() != data.len() {
            return Err(AdapterError::LengthViolation {
                input: data.len(),
                output: out.len(),
            });
        }
        Ok(out)
    }

    /// Checks decrypt(encrypt(x)) = x for `sample`.
    pub fn verify_round_trip(&self, sample: &[u8]) -> Result<(), AdapterError> {
        let ct = self.run(CipherDirection::Encrypt, sample)?;
        let pt = self.run(CipherDirection::Decrypt, &ct)?;
        if pt != sample {
            let detail = match pt.iter().zip(sample).position(|(a, b)| a != b) {
                Some(i) => format!("first difference at byte {i}"),
                None => format!("length {} vs {}", pt.len(), sample.len()),
            };
            return Err(AdapterError::RoundTripViolation { detail });
        }
        Ok(())
    }
}

impl CipherUnderTest for ExternalCipher {
    fn name(&self) -> String {
        format!("ext:{}", self.spec.name)
    }

    fn setup(&mut self, plaintext: &[u8]) -> Result<(), CipherError> {
        self.verify_round_trip(plaintext)
            .map_err(|e| CipherError::Other(Box::new(e)))
    }

    fn encrypt(&self, data: &[u8]) -> Result<Vec<u8>, CipherError> {
        self.run(CipherDirection::Encrypt, data)
            .map_err(|e| CipherError::Other(Box::new(e)))
    }

    fn decrypt(&self, data: &[u8]) -> Result<Vec<u8>, CipherError> {
        self.run(CipherDirection::Decrypt, data)
            .map_err(|e| CipherError::Other(Box::new(e)))
    }

    fn length_preserving(&self) -> bool {
        self.spec.length_preserving
    }
}
