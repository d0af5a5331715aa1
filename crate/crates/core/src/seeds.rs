//! Derivation of stage seeds from the single master seed.

use sha2::{Digest, Sha256};

/// Derives an independent 64-bit seed for `(label, index)` under `master`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_distinct() {
        assert_eq!(derive_seed(7, "gold", 0), derive_seed(7, "gold", 0));
        assert_ne!(derive_seed(7, "gold", 0), derive_seed(7, "alt", 0));
        assert_ne!(derive_seed(7, "alt", 0), derive_seed(7, "alt", 1));
        assert_ne!(derive_seed(7, "alt", 0), derive_seed(8, "alt", 0));
    }
}
