//! Hashing and signatures.
//!
//! SHA-256 is the only digest function in the system. Two signature backends
//! share one verify contract:
//!
//! * `Keyed`: a deterministic keyed digest, `H(tag || public_key || digest)`.
//!   It binds a signature to one key and one digest, which is all the
//!   simulator needs, but anyone holding the public key can produce it. It is
//!   not a defence against a forging adversary.
//! * `Secp256k1`: ECDSA over secp256k1 (feature `secp256k1`).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::types::{Address, HashDigest};

/// SHA-256 of `bytes`.
pub fn hash(bytes: &[u8]) -> HashDigest {
    HashDigest(Sha256::digest(bytes).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash_parts(parts: &[&[u8]]) -> HashDigest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    HashDigest(h.finalize().into())
}

const KEYED_PK_TAG: &[u8] = b"edsc/keyed/pk";
const KEYED_SIG_TAG: &[u8] = b"edsc/keyed/sig";

/// Identity of an event publisher or message sender.
///
/// Contracts and the system never sign; they are identified by the
/// `Contract` and `System` variants so that publisher filters can still name
/// them.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "scheme", content = "key", rename_all = "snake_case")]
pub enum PublicKey {
    Keyed(HashDigest),
    Secp256k1(#[serde(with = "crate::types::hex_bytes")] Vec<u8>),
    Contract(Address),
    System,
}

impl PublicKey {
    /// Raw key bytes, as exposed to constraint expressions.
    pub fn raw_bytes(&self) -> Vec<u8> {
        match self {
            PublicKey::Keyed(d) => d.0.to_vec(),
            PublicKey::Secp256k1(b) => b.clone(),
            PublicKey::Contract(a) => a.0.to_vec(),
            PublicKey::System => Vec::new(),
        }
    }

    /// Account address controlled by this key.
    pub fn address(&self) -> Address {
        match self {
            PublicKey::Contract(a) => *a,
            PublicKey::System => Address::ZERO,
            other => hash_parts(&[b"edsc/addr", &other.raw_bytes()]).truncate_address(),
        }
    }

    pub fn can_sign(&self) -> bool {
        matches!(self, PublicKey::Keyed(_) | PublicKey::Secp256k1(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "scheme", content = "sig", rename_all = "snake_case")]
pub enum Signature {
    Keyed(HashDigest),
    Secp256k1(#[serde(with = "crate::types::hex_bytes")] Vec<u8>),
}

/// Secret key material plus its public half.
#[derive(Clone)]
pub struct KeyPair {
    secret: Secret,
    public: PublicKey,
}

#[derive(Clone)]
enum Secret {
    /// The keyed scheme signs with the public digest; the secret only
    /// seeds it.
    Keyed,
    #[cfg(feature = "secp256k1")]
    Secp256k1(k256::ecdsa::SigningKey),
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl KeyPair {
    /// Keyed-digest key pair from 32 secret bytes.
    pub fn keyed(secret: [u8; 32]) -> Self {
        let public = PublicKey::Keyed(hash_parts(&[KEYED_PK_TAG, &secret]));
        Self { secret: Secret::Keyed, public }
    }

    /// Keyed-digest key pair derived from a label (simulation identities).
    pub fn keyed_from_label(label: &str) -> Self {
        Self::keyed(hash_parts(&[b"edsc/keyed/secret", label.as_bytes()]).0)
    }

    #[cfg(feature = "secp256k1")]
    pub fn secp256k1(secret: [u8; 32]) -> Option<Self> {
        let sk = k256::ecdsa::SigningKey::from_bytes((&secret).into()).ok()?;
        let vk = sk.verifying_key();
        let public = PublicKey::Secp256k1(vk.to_encoded_point(true).as_bytes().to_vec());
        Some(Self { secret: Secret::Secp256k1(sk), public })
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn address(&self) -> Address {
        self.public.address()
    }

    pub fn sign(&self, digest: &HashDigest) -> Signature {
        match &self.secret {
            Secret::Keyed => {
                let PublicKey::Keyed(pk) = &self.public else { unreachable!() };
                Signature::Keyed(hash_parts(&[KEYED_SIG_TAG, &pk.0, &digest.0]))
            }
            #[cfg(feature = "secp256k1")]
            Secret::Secp256k1(sk) => {
                use k256::ecdsa::signature::hazmat::PrehashSigner;
                let sig: k256::ecdsa::Signature =
                    sk.sign_prehash(&digest.0).expect("32-byte prehash");
                Signature::Secp256k1(sig.to_bytes().to_vec())
            }
        }
    }
}

/// True iff `sig` was produced over exactly `digest` by the key behind `pk`.
pub fn verify(pk: &PublicKey, digest: &HashDigest, sig: &Signature) -> bool {
    match (pk, sig) {
        (PublicKey::Keyed(pk), Signature::Keyed(s)) => {
            hash_parts(&[KEYED_SIG_TAG, &pk.0, &digest.0]) == *s
        }
        #[cfg(feature = "secp256k1")]
        (PublicKey::Secp256k1(pk), Signature::Secp256k1(s)) => {
            use k256::ecdsa::signature::hazmat::PrehashVerifier;
            let Ok(vk) = k256::ecdsa::VerifyingKey::from_sec1_bytes(pk) else {
                return false;
            };
            let Ok(sig) = k256::ecdsa::Signature::from_slice(s) else {
                return false;
            };
            vk.verify_prehash(&digest.0, &sig).is_ok()
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_input_digest_is_the_published_sha256_constant() {
        assert_eq!(
            hash(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn hashing_is_deterministic_and_sensitive_to_a_trailing_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let len = rng.gen_range(0..96);
            let mut x = vec![0u8; len];
            rng.fill_bytes(&mut x);
            assert_eq!(hash(&x), hash(&x));
            let mut extended = x.clone();
            extended.push(0);
            assert_ne!(hash(&x), hash(&extended));
        }
    }

    #[test]
    fn keyed_signatures_verify_only_over_the_signed_digest() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kp = KeyPair::keyed_from_label("alice");
        let other = KeyPair::keyed_from_label("bob");
        for _ in 0..1000 {
            let mut d = [0u8; 32];
            rng.fill_bytes(&mut d);
            let digest = HashDigest(d);
            let sig = kp.sign(&digest);
            assert!(verify(kp.public(), &digest, &sig));
            assert!(!verify(other.public(), &digest, &sig));
            let mut altered = d;
            let byte = rng.gen_range(0..32);
            altered[byte] ^= 1 << rng.gen_range(0..8);
            assert!(!verify(kp.public(), &HashDigest(altered), &sig));
        }
    }

    #[test]
    fn contract_and_system_keys_never_verify() {
        let d = hash(b"x");
        let sig = KeyPair::keyed_from_label("a").sign(&d);
        assert!(!verify(&PublicKey::Contract(Address::ZERO), &d, &sig));
        assert!(!verify(&PublicKey::System, &d, &sig));
    }

    #[cfg(feature = "secp256k1")]
    #[test]
    fn secp256k1_backend_meets_the_same_contract() {
        let kp = KeyPair::secp256k1([7u8; 32]).unwrap();
        let d = hash(b"payload");
        let sig = kp.sign(&d);
        assert!(verify(kp.public(), &d, &sig));
        assert!(!verify(kp.public(), &hash(b"payload!"), &sig));
    }
}
