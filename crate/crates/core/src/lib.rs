//! Phrase-embedding lexicon expansion, human-in-the-loop comment
//! classification, and engagement regressions for threaded discussion corpora.

pub mod corpus;
pub mod embed;
pub mod engagement;
pub mod error;
pub mod features;
pub mod importance;
pub mod learner;
pub mod lexicon;
pub mod sampling;
pub mod stats;
pub mod synth;
pub mod textprep;

pub use error::{Error, Result};

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
