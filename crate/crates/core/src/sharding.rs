//! Splitting data into slot-sized shards, the seller's per-shard encryption
//! layer, the provider's second layer, and on-disk shard persistence.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::crypto::{self, CryptoError, SymKey};
use crate::merkle::{mproof, mtree, Digest, MerkleError, MerkleProof, MerkleTree};
use crate::meter::{Meter, Op};

pub const DEFAULT_SLOT: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum ShardError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Merkle(#[from] MerkleError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("persisted shards do not match the manifest root")]
    Corrupt,
}

/// Splits `data` into `⌈len / slot⌉` pieces; the last one keeps its true length.
pub fn split(data: &[u8], slot: usize) -> Result<Vec<Vec<u8>>, ShardError> {
    if data.is_empty() {
        return Err(ShardError::InvalidInput("data must not be empty"));
    }
    if slot == 0 {
        return Err(ShardError::InvalidInput("slot must be at least 1 byte"));
    }
    Ok(data.chunks(slot).map(<[u8]>::to_vec).collect())
}

pub fn shard_count(len: usize, slot: usize) -> usize {
    len.div_ceil(slot)
}

pub fn reassemble<S: AsRef<[u8]>>(shards: &[S]) -> Vec<u8> {
    let mut out = Vec::with_capacity(shards.iter().map(|s| s.as_ref().len()).sum());
    for s in shards {
        out.extend_from_slice(s.as_ref());
    }
    out
}

/// Seller-side encryption of shard `index` under `K_index`.
pub fn encrypt_shard(master: &SymKey, index: usize, plain: &[u8]) -> Vec<u8> {
    let key = crypto::derive_key(master, index as u64);
    crypto::sym_encrypt_with_nonce(&key, crypto::indexed_nonce(index as u64), plain).to_bytes()
}

pub fn decrypt_shard(master: &SymKey, index: usize, enc: &[u8]) -> Result<Vec<u8>, CryptoError> {
    crypto::sym_decrypt_bytes(&crypto::derive_key(master, index as u64), enc)
}

#[derive(Debug, Clone)]
pub struct ShardSet {
    pub n: usize,
    pub slot: usize,
    pub data_len: usize,
    pub plain_shards: Vec<Vec<u8>>,
    pub enc_shards: Vec<Vec<u8>>,
    pub tree_plain: MerkleTree,
    pub tree_enc: MerkleTree,
}

impl ShardSet {
    pub fn r_d(&self) -> Digest {
        self.tree_plain.root()
    }

    pub fn r_ed(&self) -> Digest {
        self.tree_enc.root()
    }

    pub fn proof_plain(&self, i: usize) -> Result<MerkleProof, MerkleError> {
        mproof(&self.tree_plain, i)
    }

    pub fn proof_enc(&self, i: usize) -> Result<MerkleProof, MerkleError> {
        mproof(&self.tree_enc, i)
    }

    pub fn manifest(&self) -> Manifest {
        Manifest { n: self.n, slot: self.slot, data_len: self.data_len, r_d: self.r_d(), r_ed: self.r_ed() }
    }
}

pub fn shard_encrypt(master: &SymKey, data: &[u8], slot: usize) -> Result<ShardSet, ShardError> {
    shard_encrypt_metered(master, data, slot, &Meter::disabled())
}

pub fn shard_encrypt_metered(master: &SymKey, data: &[u8], slot: usize, meter: &Meter) -> Result<ShardSet, ShardError> {
    let plain_shards = split(data, slot)?;
    let enc_shards: Vec<Vec<u8>> = plain_shards.iter().enumerate().map(|(i, p)| encrypt_shard(master, i, p)).collect();
    meter.record_n(Op::SymEncrypt, enc_shards.len() as u64);
    let tree_plain = mtree(&plain_shards)?;
    let tree_enc = mtree(&enc_shards)?;
    meter.record_n(Op::TreeBuild, 2);
    Ok(ShardSet { n: plain_shards.len(), slot, data_len: data.len(), plain_shards, enc_shards, tree_plain, tree_enc })
}

#[derive(Debug, Clone)]
pub struct ProviderPackage {
    pub eed_shards: Vec<Vec<u8>>,
    pub tree_eed: MerkleTree,
    pub key: SymKey,
}

impl ProviderPackage {
    pub fn r_eed(&self) -> Digest {
        self.tree_eed.root()
    }

    pub fn proof(&self, i: usize) -> Result<MerkleProof, MerkleError> {
        mproof(&self.tree_eed, i)
    }
}

/// The provider key `K_sp` for a seed.
pub fn provider_key(sp_seed: &[u8; 32]) -> SymKey {
    let mut h = Sha256::new();
    h.update(b"fairtrade/provider-key");
    h.update(sp_seed);
    SymKey(h.finalize().into())
}

pub fn provider_encrypt<S: AsRef<[u8]>>(enc_shards: &[S], sp_seed: &[u8; 32]) -> Result<ProviderPackage, ShardError> {
    provider_encrypt_metered(enc_shards, sp_seed, &Meter::disabled())
}

pub fn provider_encrypt_metered<S: AsRef<[u8]>>(
    enc_shards: &[S],
    sp_seed: &[u8; 32],
    meter: &Meter,
) -> Result<ProviderPackage, ShardError> {
    provider_wrap(enc_shards, provider_key(sp_seed), meter)
}

/// Second-layer encryption of arbitrary shard bytes under `key`.
pub fn provider_wrap<S: AsRef<[u8]>>(shards: &[S], key: SymKey, meter: &Meter) -> Result<ProviderPackage, ShardError> {
    if shards.is_empty() {
        return Err(ShardError::InvalidInput("nothing to package"));
    }
    let eed_shards: Vec<Vec<u8>> = shards
        .iter()
        .enumerate()
        .map(|(i, d)| crypto::sym_encrypt_with_nonce(&key, crypto::indexed_nonce(i as u64), d.as_ref()).to_bytes())
        .collect();
    meter.record_n(Op::SymEncrypt, eed_shards.len() as u64);
    let tree_eed = mtree(&eed_shards)?;
    meter.record(Op::TreeBuild);
    Ok(ProviderPackage { eed_shards, tree_eed, key })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub slot: usize,
    pub data_len: usize,
    pub r_d: Digest,
    pub r_ed: Digest,
}

fn shard_dir(root: &Path, data_id: &str) -> PathBuf {
    root.join(data_id)
}

/// Writes `<root>/<data_id>/<index>.shard` (ciphertext bytes) plus `manifest.json`.
pub fn persist(root: &Path, data_id: &str, set: &ShardSet) -> Result<PathBuf, ShardError> {
    let dir = shard_dir(root, data_id);
    fs::create_dir_all(&dir)?;
    for (i, s) in set.enc_shards.iter().enumerate() {
        fs::write(dir.join(format!("{i}.shard")), s)?;
    }
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&set.manifest())?)?;
    Ok(dir)
}

/// Reads persisted ciphertext shards back and checks them against `r_ed`.
pub fn load(root: &Path, data_id: &str) -> Result<(Manifest, Vec<Vec<u8>>), ShardError> {
    let dir = shard_dir(root, data_id);
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    let shards = (0..manifest.n).map(|i| fs::read(dir.join(format!("{i}.shard")))).collect::<Result<Vec<_>, _>>()?;
    let tree = mtree(&shards)?;
    if tree.root() != manifest.r_ed {
        return Err(ShardError::Corrupt);
    }
    Ok((manifest, shards))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merkle::mvrfy;

    fn master() -> SymKey {
        SymKey([0x5a; 32])
    }

    #[test]
    fn tiny_input_is_one_shard() {
        let set = shard_encrypt(&master(), b"z", 1024).unwrap();
        assert_eq!(set.n, 1);
        assert_eq!(decrypt_shard(&master(), 0, &set.enc_shards[0]).unwrap(), b"z");
    }

    #[test]
    fn ten_kib_roundtrip() {
        let data: Vec<u8> = (0..10 * 1024u32).map(|i| (i * 31 % 251) as u8).collect();
        let set = shard_encrypt(&master(), &data, 1024).unwrap();
        assert_eq!(set.n, 10);
        let plain: Vec<Vec<u8>> =
            set.enc_shards.iter().enumerate().map(|(i, d)| decrypt_shard(&master(), i, d).unwrap()).collect();
        assert_eq!(reassemble(&plain), data);
        assert_eq!(mtree(&plain).unwrap().root(), set.r_d());
    }

    #[test]
    fn last_shard_unpadded() {
        let set = shard_encrypt(&master(), &[7u8; 2500], 1000).unwrap();
        assert_eq!(set.n, 3);
        assert_eq!(set.plain_shards[2].len(), 500);
        assert_eq!(reassemble(&set.plain_shards).len(), 2500);
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(shard_encrypt(&master(), b"", 8), Err(ShardError::InvalidInput(_))));
        assert!(matches!(split(b"abc", 0), Err(ShardError::InvalidInput(_))));
        assert!(reassemble::<Vec<u8>>(&[]).is_empty());
        let empty: [&[u8]; 0] = [];
        assert!(provider_encrypt(&empty, &[0; 32]).is_err());
    }

    #[test]
    fn reordered_shards_break_reassembly() {
        let data = b"abcdefgh".to_vec();
        let mut shards = split(&data, 2).unwrap();
        shards.swap(0, 1);
        assert_ne!(reassemble(&shards), data);
    }

    #[test]
    fn provider_layer_roundtrip_and_proofs() {
        let set = shard_encrypt(&master(), &[1u8; 4096], 512).unwrap();
        let pkg = provider_encrypt(&set.enc_shards, &[3; 32]).unwrap();
        for i in 0..set.n {
            let d = crypto::sym_decrypt_bytes(&pkg.key, &pkg.eed_shards[i]).unwrap();
            assert_eq!(d, set.enc_shards[i]);
            assert_eq!(decrypt_shard(&master(), i, &d).unwrap(), set.plain_shards[i]);
            assert!(mvrfy(i, &pkg.r_eed(), &pkg.eed_shards[i], &pkg.proof(i).unwrap()));
        }
        let other = provider_encrypt(&set.enc_shards, &[4; 32]).unwrap();
        assert_ne!(other.key, pkg.key);
        assert_ne!(other.r_eed(), pkg.r_eed());
    }

    #[test]
    fn metered_counts() {
        let meter = Meter::new();
        let set = shard_encrypt_metered(&master(), &[0u8; 80], 10, &meter).unwrap();
        provider_encrypt_metered(&set.enc_shards, &[1; 32], &meter).unwrap();
        assert_eq!(meter.snapshot().upload.as_tuple(), (16, 0, 0, 0, 3, 0));
    }

    #[test]
    fn persist_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let set = shard_encrypt(&master(), b"persist me please", 5).unwrap();
        let path = persist(dir.path(), "d1", &set).unwrap();
        assert_eq!(fs::read(path.join("2.shard")).unwrap(), set.enc_shards[2]);
        let (manifest, shards) = load(dir.path(), "d1").unwrap();
        assert_eq!(manifest, set.manifest());
        assert_eq!(shards, set.enc_shards);
        fs::write(path.join("1.shard"), b"tampered bytes that are long enough").unwrap();
        assert!(matches!(load(dir.path(), "d1"), Err(ShardError::Corrupt)));
    }
}
