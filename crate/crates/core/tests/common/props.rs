//! Property bodies shared by the proptest suites and the acceptance runner.

use fairtrade_core::crypto::{pk_decrypt, pk_encrypt, pk_keygen, sym_decrypt, sym_encrypt, SymKey};
use fairtrade_core::merkle::{mproof, mtree, mvrfy, Digest, Side};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const ACCEPTANCE_CASES: u32 = 1000;

pub fn key() -> impl Strategy<Value = SymKey> {
    any::<[u8; 32]>().prop_map(SymKey)
}

pub fn payload() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(any::<u8>(), 0..512)
}

pub fn sym_roundtrip(k: &SymKey, msg: &[u8]) -> Result<(), TestCaseError> {
    let ct = sym_encrypt(k, msg);
    prop_assert_eq!(sym_decrypt(k, &ct).map_err(|e| TestCaseError::fail(e.to_string()))?, msg.to_vec());
    Ok(())
}

/// Flipping any bit of the body, or the nonce, or using another key must fail.
pub fn sym_tamper(k: &SymKey, other: &SymKey, msg: &[u8], pos: usize, bit: u8) -> Result<(), TestCaseError> {
    let ct = sym_encrypt(k, msg);
    let mut bad = ct.clone();
    let i = pos % bad.body.len();
    bad.body[i] ^= 1 << (bit % 8);
    prop_assert!(sym_decrypt(k, &bad).is_err());
    let mut bad = ct.clone();
    bad.nonce[pos % bad.nonce.len()] ^= 1 << (bit % 8);
    prop_assert!(sym_decrypt(k, &bad).is_err());
    if other != k {
        prop_assert!(sym_decrypt(other, &ct).is_err());
    }
    Ok(())
}

pub fn pk_roundtrip(seed: &[u8; 32], msg: &[u8], rng_seed: u64, pos: usize) -> Result<(), TestCaseError> {
    let pair = pk_keygen(seed);
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let sealed = pk_encrypt(&pair.public, msg, &mut rng).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(pk_decrypt(&pair.private, &sealed).map_err(|e| TestCaseError::fail(e.to_string()))?, msg.to_vec());
    let mut bad = sealed.clone();
    let i = pos % bad.len();
    bad[i] ^= 0x01;
    prop_assert!(pk_decrypt(&pair.private, &bad).is_err());
    let mut other_seed = *seed;
    other_seed[0] ^= 0xff;
    prop_assert!(pk_decrypt(&pk_keygen(&other_seed).private, &sealed).is_err());
    Ok(())
}

pub fn leaves() -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(any::<u8>(), 0..48), 1..40)
}

pub fn merkle_valid(leaves: &[Vec<u8>], pick: usize) -> Result<(), TestCaseError> {
    let tree = mtree(leaves).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let i = pick % leaves.len();
    let proof = mproof(&tree, i).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(mvrfy(i, &tree.root(), &leaves[i], &proof));
    let back = fairtrade_core::merkle::MerkleProof::from_bytes(&proof.to_bytes())
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(back, proof);
    Ok(())
}

/// A proof must fail for a changed leaf, a wrong index, a flipped sibling,
/// a truncated path, or a different root.
pub fn merkle_invalid(leaves: &[Vec<u8>], pick: usize, shift: usize, byte: u8) -> Result<(), TestCaseError> {
    let tree = mtree(leaves).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let n = leaves.len();
    let i = pick % n;
    let root = tree.root();
    let proof = mproof(&tree, i).map_err(|e| TestCaseError::fail(e.to_string()))?;

    let mut leaf = leaves[i].clone();
    if leaf.is_empty() {
        leaf.push(byte);
    } else {
        let j = shift % leaf.len();
        leaf[j] ^= byte | 1;
    }
    prop_assert!(!mvrfy(i, &root, &leaf, &proof));

    if n > 1 {
        let j = (i + 1 + shift % (n - 1)) % n;
        if leaves[j] != leaves[i] {
            prop_assert!(!mvrfy(j, &root, &leaves[i], &proof));
            let mut moved = proof.clone();
            moved.index = j;
            prop_assert!(!mvrfy(j, &root, &leaves[i], &moved));
        }
    }

    if !proof.siblings.is_empty() {
        let s = shift % proof.siblings.len();
        let mut flipped = proof.clone();
        let mut d = *flipped.siblings[s].0.as_bytes();
        d[shift % 32] ^= byte | 1;
        flipped.siblings[s].0 = Digest(d);
        prop_assert!(!mvrfy(i, &root, &leaves[i], &flipped));

        let mut swapped = proof.clone();
        swapped.siblings[s].1 = match swapped.siblings[s].1 {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        prop_assert!(!mvrfy(i, &root, &leaves[i], &swapped));

        let mut short = proof.clone();
        short.siblings.pop();
        prop_assert!(!mvrfy(i, &root, &leaves[i], &short));
    }

    let mut other = *root.as_bytes();
    other[0] ^= 0x80;
    prop_assert!(!mvrfy(i, &Digest(other), &leaves[i], &proof));
    Ok(())
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

/// Runs one named suite for `cases` cases; returns the number run.
pub fn run_suite(name: &str, cases: u32) -> Result<u32, String> {
    let mut r = runner(cases);
    let res = match name {
        "sym_roundtrip" => r.run(&(key(), payload()), |(k, m)| sym_roundtrip(&k, &m)).map_err(|e| e.to_string()),
        "sym_tamper" => r
            .run(&(key(), key(), payload(), any::<usize>(), any::<u8>()), |(k, o, m, p, b)| {
                sym_tamper(&k, &o, &m, p, b)
            })
            .map_err(|e| e.to_string()),
        "pk_roundtrip" => r
            .run(
                &(any::<[u8; 32]>(), prop::collection::vec(any::<u8>(), 0..=64), any::<u64>(), any::<usize>()),
                |(s, m, rs, p)| pk_roundtrip(&s, &m, rs, p),
            )
            .map_err(|e| e.to_string()),
        "merkle_valid" => r.run(&(leaves(), any::<usize>()), |(l, p)| merkle_valid(&l, p)).map_err(|e| e.to_string()),
        "merkle_invalid" => r
            .run(&(leaves(), any::<usize>(), any::<usize>(), any::<u8>()), |(l, p, s, b)| merkle_invalid(&l, p, s, b))
            .map_err(|e| e.to_string()),
        other => return Err(format!("unknown suite {other}")),
    };
    res.map(|_| cases)
}

pub const SUITES: [&str; 5] = ["sym_roundtrip", "sym_tamper", "pk_roundtrip", "merkle_valid", "merkle_invalid"];
