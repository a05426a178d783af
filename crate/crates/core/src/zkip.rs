//! Integrity proofs for noisy deltas.
//!
//! Despite the "zero-knowledge" name used by the protocol, this is a keyed
//! hash commitment: anyone holding the shared secret can both create and
//! check proofs. It shows that an update came from a holder of the secret and
//! was not modified in transit. It does not hide anything from, or prove
//! anything to, a verifier outside the federation.
//!
//! Digest preimage (frozen wire layout):
//!
//! ```text
//! canonical_serialize(delta) || client_id (u64 BE) || round (u64 BE) || secret
//! ```
//!
//! Binding the client id and round stops a valid proof from being replayed
//! under another identity or in a later round.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{canonical_serialize, DeltaVector};

pub const MIN_SECRET_LEN: usize = 16;

#[derive(Clone, PartialEq, Eq)]
pub struct SharedSecret(Vec<u8>);

impl SharedSecret {
    pub fn new(bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() < MIN_SECRET_LEN {
            return Err(Error::InvalidConfig(format!(
                "shared secret must be at least {MIN_SECRET_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl std::fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SharedSecret({} bytes)", self.0.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegrityProof {
    pub digest: [u8; 32],
    pub client_id: u64,
    pub round: u64,
}

fn digest(d: &DeltaVector, secret: &SharedSecret, client_id: u64, round: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(canonical_serialize(d).as_bytes());
    h.update(client_id.to_be_bytes());
    h.update(round.to_be_bytes());
    h.update(secret.as_bytes());
    h.finalize().into()
}

pub fn generate_proof(
    d: &DeltaVector,
    secret: &SharedSecret,
    client_id: u64,
    round: u64,
) -> IntegrityProof {
    IntegrityProof {
        digest: digest(d, secret, client_id, round),
        client_id,
        round,
    }
}

/// Recomputes the digest for `proof.client_id` and `proof.round` and compares
/// all 32 bytes without early exit.
pub fn verify_proof(d: &DeltaVector, proof: &IntegrityProof, secret: &SharedSecret) -> bool {
    let expected = digest(d, secret, proof.client_id, proof.round);
    expected
        .iter()
        .zip(proof.digest.iter())
        .fold(0u8, |acc, (a, b)| acc | (a ^ b))
        == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secret() -> SharedSecret {
        SharedSecret::new(b"federation-secret-0123".to_vec()).unwrap()
    }

    fn delta() -> DeltaVector {
        DeltaVector::new(vec![0.5, -1.25, 3.0]).unwrap()
    }

    #[test]
    fn sha256_primitive_is_pinned() {
        let empty: [u8; 32] = Sha256::digest(b"").into();
        assert_eq!(
            hex::encode(empty),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn preimage_layout() {
        let d = DeltaVector::new(vec![1.0]).unwrap();
        let s = secret();
        let mut pre = vec![0, 0, 0, 1, 0x3F, 0xF0, 0, 0, 0, 0, 0, 0];
        pre.extend_from_slice(&7u64.to_be_bytes());
        pre.extend_from_slice(&3u64.to_be_bytes());
        pre.extend_from_slice(s.as_bytes());
        let expected: [u8; 32] = Sha256::digest(&pre).into();
        assert_eq!(generate_proof(&d, &s, 7, 3).digest, expected);
    }

    #[test]
    fn short_secret_rejected() {
        assert!(SharedSecret::new(vec![0; 15]).is_err());
        assert!(SharedSecret::new(vec![0; 16]).is_ok());
    }

    #[test]
    fn honest_round_trip() {
        let p = generate_proof(&delta(), &secret(), 2, 5);
        assert_eq!(p, generate_proof(&delta(), &secret(), 2, 5));
        assert!(verify_proof(&delta(), &p, &secret()));
    }

    #[test]
    fn wrong_secret_fails() {
        let p = generate_proof(&delta(), &secret(), 2, 5);
        let other = SharedSecret::new(b"federation-secret-0124".to_vec()).unwrap();
        assert!(!verify_proof(&delta(), &p, &other));
    }

    #[test]
    fn tiny_perturbation_fails() {
        let p = generate_proof(&delta(), &secret(), 2, 5);
        let mut v = delta().into_values();
        v[0] += 1e-15;
        let tampered = DeltaVector::new(v).unwrap();
        assert!(!verify_proof(&tampered, &p, &secret()));
    }

    #[test]
    fn replay_into_next_round_fails() {
        let p = generate_proof(&delta(), &secret(), 2, 5);
        let replayed = IntegrityProof { round: 6, ..p };
        assert!(!verify_proof(&delta(), &replayed, &secret()));
        let spoofed = IntegrityProof { client_id: 3, ..p };
        assert!(!verify_proof(&delta(), &spoofed, &secret()));
    }
}
