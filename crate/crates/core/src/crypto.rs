//! Symmetric and hybrid encryption used throughout the trading pipeline.
//!
//! - Shards are sealed with AES-256-GCM. A ciphertext serializes as
//!   `nonce (12) ‖ body ‖ tag (16)`.
//! - Per-shard keys come from a master key: `K_i = SHA-256(master ‖ i as u64 BE)`.
//! - Keys travel to the consumer sealed to a one-off X25519 key pair: an
//!   ephemeral Diffie-Hellman, HKDF-SHA256 over the shared secret, then
//!   AES-256-GCM over the key material.

use std::fmt;

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Key, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;
use x25519_dalek::{PublicKey as DhPublic, StaticSecret};

pub const KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
/// Longest message the hybrid scheme accepts; it only ever carries keys.
pub const MAX_SEALED_MESSAGE: usize = 64;

const HYBRID_INFO: &[u8] = b"fairtrade/hybrid/v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("decryption failed")]
    Decrypt,
    #[error("ciphertext too short")]
    Truncated,
}

fn hex_serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&hex::encode(bytes))
}

fn hex_deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<[u8; 32], D::Error> {
    let s = String::deserialize(deserializer)?;
    let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
    bytes.try_into().map_err(|_| serde::de::Error::custom("expected 32 bytes"))
}

macro_rules! key_newtype {
    ($name:ident) => {
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; 32]);

        impl $name {
            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            pub fn from_slice(bytes: &[u8]) -> Option<Self> {
                Some($name(bytes.try_into().ok()?))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                hex_serialize(&self.0, serializer)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                hex_deserialize(deserializer).map($name)
            }
        }
    };
}

key_newtype!(SymKey);
key_newtype!(PublicKey);
key_newtype!(PrivateKey);

impl fmt::Debug for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymKey(..)")
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrivateKey(..)")
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &hex::encode(self.0)[..16])
    }
}

impl SymKey {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> SymKey {
        let mut k = [0u8; KEY_LEN];
        rng.fill_bytes(&mut k);
        SymKey(k)
    }
}

impl PrivateKey {
    pub fn public(&self) -> PublicKey {
        let secret = StaticSecret::from(self.0);
        PublicKey(DhPublic::from(&secret).to_bytes())
    }
}

pub fn derive_key(master: &SymKey, index: u64) -> SymKey {
    let mut h = Sha256::new();
    h.update(master.0);
    h.update(index.to_be_bytes());
    SymKey(h.finalize().into())
}

/// `n` shard keys derived from `master`; the first `m` outputs do not depend on `n`.
pub fn derive_keys(master: &SymKey, n: usize) -> Result<Vec<SymKey>, CryptoError> {
    if n == 0 {
        return Err(CryptoError::InvalidInput("key count must be at least 1"));
    }
    Ok((0..n as u64).map(|i| derive_key(master, i)).collect())
}

/// Nonce for the `index`-th message under one key.
pub fn indexed_nonce(index: u64) -> [u8; NONCE_LEN] {
    let mut nonce = [0u8; NONCE_LEN];
    nonce[4..].copy_from_slice(&index.to_be_bytes());
    nonce
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub nonce: [u8; NONCE_LEN],
    /// Encrypted body followed by the GCM tag.
    pub body: Vec<u8>,
}

impl Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(NONCE_LEN + self.body.len());
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Ciphertext, CryptoError> {
        if bytes.len() < NONCE_LEN + TAG_LEN {
            return Err(CryptoError::Truncated);
        }
        Ok(Ciphertext { nonce: bytes[..NONCE_LEN].try_into().unwrap(), body: bytes[NONCE_LEN..].to_vec() })
    }
}

fn cipher(key: &SymKey) -> Aes256Gcm {
    Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(&key.0))
}

/// Encrypts under a fresh random nonce.
pub fn sym_encrypt(key: &SymKey, plaintext: &[u8]) -> Ciphertext {
    let mut nonce = [0u8; NONCE_LEN];
    rand::thread_rng().fill_bytes(&mut nonce);
    sym_encrypt_with_nonce(key, nonce, plaintext)
}

/// Encrypts under a caller-chosen nonce. The caller guarantees the
/// `(key, nonce)` pair is never reused for a different plaintext.
pub fn sym_encrypt_with_nonce(key: &SymKey, nonce: [u8; NONCE_LEN], plaintext: &[u8]) -> Ciphertext {
    let body = cipher(key)
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("AES-GCM encryption of an in-memory buffer cannot fail");
    Ciphertext { nonce, body }
}

pub fn sym_decrypt(key: &SymKey, ct: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
    cipher(key).decrypt(Nonce::from_slice(&ct.nonce), ct.body.as_slice()).map_err(|_| CryptoError::Decrypt)
}

/// [`sym_decrypt`] over the serialized form.
pub fn sym_decrypt_bytes(key: &SymKey, bytes: &[u8]) -> Result<Vec<u8>, CryptoError> {
    sym_decrypt(key, &Ciphertext::from_bytes(bytes)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

/// Deterministic key pair: the same seed always yields the same pair.
pub fn pk_keygen(seed: &[u8; 32]) -> KeyPair {
    let mut h = Sha256::new();
    h.update(b"fairtrade/keypair");
    h.update(seed);
    let private = PrivateKey(h.finalize().into());
    KeyPair { public: private.public(), private }
}

fn hybrid_key(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> SymKey {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(ephemeral);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut okm = [0u8; KEY_LEN];
    hk.expand(HYBRID_INFO, &mut okm).expect("32 bytes is a valid HKDF output length");
    SymKey(okm)
}

/// Seals `message` to `public`. Output: `ephemeral public (32) ‖ nonce ‖ body ‖ tag`.
pub fn pk_encrypt<R: RngCore + CryptoRng>(
    public: &PublicKey,
    message: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>, CryptoError> {
    if message.len() > MAX_SEALED_MESSAGE {
        return Err(CryptoError::InvalidInput("hybrid messages are limited to 64 bytes"));
    }
    let mut eph = [0u8; 32];
    rng.fill_bytes(&mut eph);
    let eph = StaticSecret::from(eph);
    let eph_pub = DhPublic::from(&eph).to_bytes();
    let shared = eph.diffie_hellman(&DhPublic::from(public.0));
    let key = hybrid_key(shared.as_bytes(), &eph_pub, &public.0);
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let ct = sym_encrypt_with_nonce(&key, nonce, message);
    let mut out = Vec::with_capacity(32 + NONCE_LEN + ct.body.len());
    out.extend_from_slice(&eph_pub);
    out.extend_from_slice(&ct.to_bytes());
    Ok(out)
}

pub fn pk_decrypt(private: &PrivateKey, sealed: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if sealed.len() < 32 + NONCE_LEN + TAG_LEN {
        return Err(CryptoError::Truncated);
    }
    let eph_pub: [u8; 32] = sealed[..32].try_into().unwrap();
    let secret = StaticSecret::from(private.0);
    let shared = secret.diffie_hellman(&DhPublic::from(eph_pub));
    let key = hybrid_key(shared.as_bytes(), &eph_pub, &private.public().0);
    sym_decrypt_bytes(&key, &sealed[32..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn derive_keys_deterministic_and_distinct() {
        let k = SymKey([7; 32]);
        assert_eq!(derive_keys(&k, 1).unwrap(), derive_keys(&k, 1).unwrap());
        let keys = derive_keys(&k, 8).unwrap();
        for i in 0..8 {
            for j in i + 1..8 {
                assert_ne!(keys[i], keys[j]);
            }
        }
        let other = SymKey([8; 32]);
        assert_ne!(derive_keys(&k, 2).unwrap()[0], derive_keys(&other, 2).unwrap()[0]);
        assert_eq!(derive_keys(&k, 0), Err(CryptoError::InvalidInput("key count must be at least 1")));
    }

    #[test]
    fn derive_key_formula() {
        let k = SymKey([3; 32]);
        let mut h = Sha256::new();
        h.update([3u8; 32]);
        h.update(5u64.to_be_bytes());
        let expected: [u8; 32] = h.finalize().into();
        assert_eq!(derive_key(&k, 5).0, expected);
    }

    #[test]
    fn sym_roundtrip_and_failures() {
        let k = SymKey([1; 32]);
        let ct = sym_encrypt(&k, b"shard contents");
        assert_eq!(sym_decrypt(&k, &ct).unwrap(), b"shard contents");
        assert_eq!(sym_decrypt(&SymKey([2; 32]), &ct), Err(CryptoError::Decrypt));
        let mut flipped = ct.clone();
        flipped.body[0] ^= 0x80;
        assert_eq!(sym_decrypt(&k, &flipped), Err(CryptoError::Decrypt));
        assert_eq!(Ciphertext::from_bytes(&[0u8; 10]), Err(CryptoError::Truncated));
    }

    #[test]
    fn pk_roundtrip_and_failures() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let pair = pk_keygen(&[9; 32]);
        assert_eq!(pair, pk_keygen(&[9; 32]));
        let sealed = pk_encrypt(&pair.public, &[42; 32], &mut rng).unwrap();
        assert_eq!(pk_decrypt(&pair.private, &sealed).unwrap(), vec![42; 32]);
        let other = pk_keygen(&[10; 32]);
        assert_eq!(pk_decrypt(&other.private, &sealed), Err(CryptoError::Decrypt));
        assert!(pk_encrypt(&pair.public, &[0; 65], &mut rng).is_err());
    }

    #[test]
    fn keys_serialize_as_hex() {
        let pair = pk_keygen(&[1; 32]);
        let json = serde_json::to_string(&pair).unwrap();
        let back: KeyPair = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pair);
    }
}
