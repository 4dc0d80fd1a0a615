//! Command-line front end for the `smbbot` cipher: key generation, file
//! encryption, corpus generation, the analysis battery and an adapter for
//! external ciphers driven over standard input and output.

pub mod analyze;
pub mod app;
pub mod external;

pub use app::run;
