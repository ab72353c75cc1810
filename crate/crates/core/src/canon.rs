//! Canonical JSON bytes (sorted object keys) and content hashing for locks.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Serialize to JSON with object keys sorted, suitable for hashing.
/// `serde_json::Value` maps are BTree-backed, so key order is canonical.
pub fn canonical_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_vec(&v)?)
}

/// Hex-encoded SHA-256.
pub fn sha256_hex(chunks: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for c in chunks {
        hasher.update(c);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn map_keys_are_sorted() {
        let mut m = HashMap::new();
        m.insert("zeta", 1);
        m.insert("alpha", 2);
        let bytes = canonical_json_bytes(&m).unwrap();
        assert_eq!(bytes, br#"{"alpha":2,"zeta":1}"#);
    }

    #[test]
    fn serialize_twice_is_identical() {
        let v = vec![("b", 1.5), ("a", 2.25)];
        assert_eq!(
            canonical_json_bytes(&v).unwrap(),
            canonical_json_bytes(&v).unwrap()
        );
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(&[b"abc"]),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
