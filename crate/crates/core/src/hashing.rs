use alloc::string::String;
use core::fmt::Write;
use sha2::{Digest, Sha256};

/// Lower-case hex SHA-256 of `bytes`.
pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Stable in-process hash of a state for hash-table bucketing.
pub(crate) fn hash_state(state: &crate::engine::GameState) -> u64 {
    use core::hash::{BuildHasher, Hash, Hasher};
    let mut h = foldhash::fast::FixedState::default().build_hasher();
    state.hash(&mut h);
    h.finish()
}
