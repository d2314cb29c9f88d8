use sha2::{Digest, Sha256};

/// Name pinned in dataset headers and artifacts for every digest this crate emits.
pub const DIGEST_NAME: &str = "sha256";

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}
