//! Byte-stream ciphers that the analysis battery can drive.

use thiserror::Error;

use crate::codec::{self, CodecError};
use crate::session_key::{CountMode, SessionKey};

#[derive(Debug, Error)]
pub enum CipherError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("cipher not set up for this input")]
    NotSetUp,
    #[error("{0}")]
    Other(Box<dyn std::error::Error + Send + Sync>),
}

/// An encrypt/decrypt pair over byte sequences.
///
/// `setup` runs once per plaintext before any other call and may derive
/// size-dependent state (SMBBOT derives its session key there). `encrypt`
/// and `decrypt` must be callable concurrently.
pub trait CipherUnderTest: Sync {
    fn name(&self) -> String;

    fn setup(&mut self, _plaintext: &[u8]) -> Result<(), CipherError> {
        Ok(())
    }

    fn encrypt(&self, data: &[u8]) -> Result<Vec<u8>, CipherError>;

    fn decrypt(&self, data: &[u8]) -> Result<Vec<u8>, CipherError>;

    /// False when ciphertext may be longer than plaintext (padding, tags).
    fn length_preserving(&self) -> bool {
        true
    }
}

/// SMBBOT with a session key generated from the input length and a seed.
#[derive(Debug, Clone)]
pub struct SmbbotCipher {
    seed: u64,
    mode: CountMode,
    key: Option<SessionKey>,
}

impl SmbbotCipher {
    pub fn new(seed: u64, mode: CountMode) -> Self {
        Self {
            seed,
            mode,
            key: None,
        }
    }

    /// Uses `key` as-is; `setup` will not replace it.
    pub fn with_key(key: SessionKey) -> Self {
        Self {
            seed: 0,
            mode: CountMode::Free,
            key: Some(key),
        }
    }

    pub fn key(&self) -> Option<&SessionKey> {
        self.key.as_ref()
    }

    fn key_for(&self, len: usize) -> Result<&SessionKey, CipherError> {
        match &self.key {
            Some(k) if k.total_bits() == len as u128 * 8 => Ok(k),
            _ => Err(CipherError::NotSetUp),
        }
    }
}

impl CipherUnderTest for SmbbotCipher {
    fn name(&self) -> String {
        "smbbot".into()
    }

    fn setup(&mut self, plaintext: &[u8]) -> Result<(), CipherError> {
        let fits = self
            .key
            .as_ref()
            .is_some_and(|k| k.total_bits() == plaintext.len() as u128 * 8);
        if !fits {
            self.key = Some(SessionKey::generate(plaintext.len() as u64, self.seed, self.mode));
        }
        Ok(())
    }

    fn encrypt(&self, data: &[u8]) -> Result<Vec<u8>, CipherError> {
        Ok(codec::encrypt_bytes(data, self.key_for(data.len())?)?)
    }

    fn decrypt(&self, data: &[u8]) -> Result<Vec<u8>, CipherError> {
        Ok(codec::decrypt_bytes(data, self.key_for(data.len())?)?)
    }
}

/// Copies input to output; the degenerate baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCipher;

impl CipherUnderTest for IdentityCipher {
    fn name(&self) -> String {
        "identity".into()
    }

    fn encrypt(&self, data: &[u8]) -> Result<Vec<u8>, CipherError> {
        Ok(data.to_vec())
    }

    fn decrypt(&self, data: &[u8]) -> Result<Vec<u8>, CipherError> {
        Ok(data.to_vec())
    }
}
