use std::fmt;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

/// SHA-256 digest of a file's bytes, as 64 lowercase hex characters.
///
/// Used as the idempotency key for stored records.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentHash(String);

#[derive(Debug, thiserror::Error)]
pub enum HashError {
    #[error("failed to read {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a 64-character hex digest: {0:?}")]
    Malformed(String),
}

impl ContentHash {
    pub fn from_hex(hex: &str) -> Result<Self, HashError> {
        if hex.len() == 64 && hex.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(Self(hex.to_string()))
        } else {
            Err(HashError::Malformed(hex.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// First eight hex characters, used for collision suffixes.
    pub fn short(&self) -> &str {
        &self.0[..8]
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn content_hash(bytes: &[u8]) -> ContentHash {
    ContentHash(hex::encode(Sha256::digest(bytes)))
}

/// Streams a file through SHA-256.
pub fn content_hash_file(path: &Path) -> Result<ContentHash, HashError> {
    let io_err = |source| HashError::IoFailure {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::fs::File::open(path).map_err(io_err)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(io_err)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(ContentHash(hex::encode(hasher.finalize())))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference digests computed with Python's hashlib.
    const EMPTY: &str = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
    const SAMPLE: &str = "1ff62e3229c98c58285f1e4a0db3cec99d3bcfaa39f717a04bd9ff69eba9ccb1";
    const SAMPLE_FLIPPED: &str = "8786a641a160db535d823e0e05ad7b3138d13bc4c5ab53da62f5c99dbbf3692e";

    #[test]
    fn empty_input_digest() {
        assert_eq!(content_hash(b"").as_str(), EMPTY);
    }

    #[test]
    fn deterministic_and_bit_sensitive() {
        let mut bytes = b"erpa-id-document".to_vec();
        assert_eq!(content_hash(&bytes), content_hash(&bytes));
        assert_eq!(content_hash(&bytes).as_str(), SAMPLE);
        bytes[0] ^= 1;
        assert_eq!(content_hash(&bytes).as_str(), SAMPLE_FLIPPED);
    }

    #[test]
    fn file_digest_matches_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        std::fs::write(&p, b"erpa-id-document").unwrap();
        assert_eq!(content_hash_file(&p).unwrap().as_str(), SAMPLE);
        assert!(matches!(
            content_hash_file(&dir.path().join("missing")),
            Err(HashError::IoFailure { .. })
        ));
    }

    #[test]
    fn hex_parsing() {
        assert!(ContentHash::from_hex(EMPTY).is_ok());
        assert!(ContentHash::from_hex("abc").is_err());
        assert_eq!(ContentHash::from_hex(EMPTY).unwrap().short(), "e3b0c442");
    }
}
