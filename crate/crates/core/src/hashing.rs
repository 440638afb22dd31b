//! Content hashes used to tie artifacts to the topology and configuration
//! that produced them.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the compact JSON encoding of `value`.
///
/// Struct fields serialize in declaration order and maps used in hashed
/// configs are `BTreeMap`s, so equal values always give equal hashes.
pub fn json_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(sha256_hex(&bytes))
}
