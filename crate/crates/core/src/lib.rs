//! SMBBOT: a session-keyed bit transposition cipher built on spiral-matrix
//! fills, plus a cipher-agnostic statistical evaluation battery.
//!
//! The cipher only reorders bits. It preserves popcount and a single flipped
//! plaintext bit flips exactly one ciphertext bit, so it provides no
//! real-world confidentiality; use it for study and benchmarking only.

pub mod bitstream;
pub mod cipher;
pub mod codec;
pub mod corpus;
pub mod permutation;
pub mod report;
pub mod session_key;
pub mod stats;

pub use bitstream::BitString;
pub use cipher::{CipherError, CipherUnderTest, IdentityCipher, SmbbotCipher};
pub use codec::{decrypt_bytes, decrypt_file, encrypt_bytes, encrypt_file, transform, CipherDirection, CodecError};
pub use permutation::{BlockPermutation, Direction, MatrixOrder, SUPPORTED_ORDERS};
pub use session_key::{CountMode, PortionSpec, SessionKey};
