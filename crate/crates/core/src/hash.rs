//! Content hashes for checkpoint lineage and topology fingerprints.

use sha2::{Digest, Sha256};

/// Incremental SHA-256 over little-endian encoded fields.
#[derive(Default, Clone)]
pub struct Hasher(Sha256);

impl Hasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.update(v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.0.update(v.to_bits().to_le_bytes());
        self
    }

    pub fn finish(&self) -> [u8; 32] {
        self.0.clone().finalize().into()
    }

    /// First eight bytes of the digest as a little-endian integer.
    pub fn finish_u64(&self) -> u64 {
        let d = self.finish();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }
}
