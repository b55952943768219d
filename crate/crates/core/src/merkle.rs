//! Binary Merkle trees over opaque byte strings.
//!
//! Leaves are hashed as `SHA-256(0x00 ‖ leaf)` and internal nodes as
//! `SHA-256(0x01 ‖ left ‖ right)`. A layer of odd width pairs its last digest
//! with itself. A proof carries one sibling per level together with the side
//! the sibling sits on; verification rejects side flags that disagree with the
//! claimed leaf index.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MerkleError {
    #[error("cannot build a Merkle tree without leaves")]
    NoLeaves,
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("malformed proof encoding")]
    MalformedProof,
}

/// A 32-byte SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    /// Plain SHA-256 of `bytes`, without any domain prefix.
    pub fn of(bytes: &[u8]) -> Digest {
        Digest(Sha256::digest(bytes).into())
    }

    /// SHA-256 over the concatenation of `parts`.
    pub fn of_parts(parts: &[&[u8]]) -> Digest {
        let mut hasher = Sha256::new();
        for part in parts {
            hasher.update(part);
        }
        Digest(hasher.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Digest> {
        let bytes = hex::decode(s).ok()?;
        Some(Digest(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex characters"))
    }
}

pub fn hash_leaf(leaf: &[u8]) -> Digest {
    Digest::of_parts(&[&[LEAF_PREFIX], leaf])
}

pub fn hash_node(left: &Digest, right: &Digest) -> Digest {
    Digest::of_parts(&[&[NODE_PREFIX], &left.0, &right.0])
}

/// Which side of the running hash a proof sibling is concatenated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub index: usize,
    pub siblings: Vec<(Digest, Side)>,
}

impl MerkleProof {
    /// Compact binary form: index (u64 BE), sibling count (u32 BE), then
    /// `side byte ‖ digest` per sibling.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.siblings.len() * 33);
        out.extend_from_slice(&(self.index as u64).to_be_bytes());
        out.extend_from_slice(&(self.siblings.len() as u32).to_be_bytes());
        for (digest, side) in &self.siblings {
            out.push(match side {
                Side::Left => 0,
                Side::Right => 1,
            });
            out.extend_from_slice(&digest.0);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<MerkleProof, MerkleError> {
        if bytes.len() < 12 {
            return Err(MerkleError::MalformedProof);
        }
        let index = u64::from_be_bytes(bytes[..8].try_into().unwrap());
        let count = u32::from_be_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() != count * 33 {
            return Err(MerkleError::MalformedProof);
        }
        let siblings = body
            .chunks_exact(33)
            .map(|chunk| {
                let side = match chunk[0] {
                    0 => Side::Left,
                    1 => Side::Right,
                    _ => return Err(MerkleError::MalformedProof),
                };
                Ok((Digest(chunk[1..].try_into().unwrap()), side))
            })
            .collect::<Result<_, _>>()?;
        let index = usize::try_from(index).map_err(|_| MerkleError::MalformedProof)?;
        Ok(MerkleProof { index, siblings })
    }
}

/// A fully materialized tree. `levels[0]` holds the leaf digests and the last
/// level holds the root alone. Leaf contents are not retained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleTree {
    levels: Vec<Vec<Digest>>,
}

impl MerkleTree {
    pub fn root(&self) -> Digest {
        self.levels.last().expect("tree has at least one level")[0]
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[0].len()
    }

    /// Number of hashing levels above the leaves, i.e. the proof length.
    pub fn height(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Vec<Digest>] {
        &self.levels
    }

    pub fn proof(&self, index: usize) -> Result<MerkleProof, MerkleError> {
        mproof(self, index)
    }
}

/// Builds the tree over `leaves` in order.
pub fn mtree<L: AsRef<[u8]>>(leaves: &[L]) -> Result<MerkleTree, MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::NoLeaves);
    }
    let base: Vec<Digest> = leaves.iter().map(|l| hash_leaf(l.as_ref())).collect();
    Ok(tree_from_leaf_digests(base))
}

pub(crate) fn tree_from_leaf_digests(base: Vec<Digest>) -> MerkleTree {
    debug_assert!(!base.is_empty());
    let mut levels = vec![base];
    while levels.last().unwrap().len() > 1 {
        let prev = levels.last().unwrap();
        let next = prev
            .chunks(2)
            .map(|pair| match pair {
                [l, r] => hash_node(l, r),
                [only] => hash_node(only, only),
                _ => unreachable!(),
            })
            .collect();
        levels.push(next);
    }
    MerkleTree { levels }
}

pub fn mproof(tree: &MerkleTree, index: usize) -> Result<MerkleProof, MerkleError> {
    let len = tree.leaf_count();
    if index >= len {
        return Err(MerkleError::IndexOutOfRange { index, len });
    }
    let mut siblings = Vec::with_capacity(tree.height());
    let mut pos = index;
    for level in &tree.levels[..tree.levels.len() - 1] {
        let (sibling, side) = if pos % 2 == 0 {
            // the last node of an odd layer is paired with itself
            (*level.get(pos + 1).unwrap_or(&level[pos]), Side::Right)
        } else {
            (level[pos - 1], Side::Left)
        };
        siblings.push((sibling, side));
        pos /= 2;
    }
    Ok(MerkleProof { index, siblings })
}

/// True iff `leaf` at position `index` hashes up to `root` along `proof`.
pub fn mvrfy(index: usize, root: &Digest, leaf: &[u8], proof: &MerkleProof) -> bool {
    if proof.index != index {
        return false;
    }
    if proof.siblings.len() < usize::BITS as usize && index >> proof.siblings.len() != 0 {
        return false;
    }
    let mut acc = hash_leaf(leaf);
    for (level, (sibling, side)) in proof.siblings.iter().enumerate() {
        let expected = if (index >> level) & 1 == 0 { Side::Right } else { Side::Left };
        if *side != expected {
            return false;
        }
        acc = match side {
            Side::Right => hash_node(&acc, sibling),
            Side::Left => hash_node(sibling, &acc),
        };
    }
    acc == *root
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::Sha256;

    fn sha(parts: &[&[u8]]) -> [u8; 32] {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        h.finalize().into()
    }

    fn leaves(n: usize) -> Vec<Vec<u8>> {
        (0..n).map(|i| format!("leaf-{i}").into_bytes()).collect()
    }

    #[test]
    fn single_leaf_root_is_leaf_digest() {
        let tree = mtree(&[b"x"]).unwrap();
        assert_eq!(tree.root().0, sha(&[&[0x00], b"x"]));
        let proof = mproof(&tree, 0).unwrap();
        assert!(proof.siblings.is_empty());
        assert!(mvrfy(0, &tree.root(), b"x", &proof));
    }

    #[test]
    fn four_leaf_root_matches_straight_line_script() {
        let l = [b"alpha".as_ref(), b"beta", b"gamma", b"delta"];
        let h0 = sha(&[&[0], l[0]]);
        let h1 = sha(&[&[0], l[1]]);
        let h2 = sha(&[&[0], l[2]]);
        let h3 = sha(&[&[0], l[3]]);
        let n01 = sha(&[&[1], &h0, &h1]);
        let n23 = sha(&[&[1], &h2, &h3]);
        let root = sha(&[&[1], &n01, &n23]);

        let tree = mtree(&l).unwrap();
        assert_eq!(tree.root().0, root);

        let proof = mproof(&tree, 2).unwrap();
        assert_eq!(proof.siblings, vec![(Digest(h3), Side::Right), (Digest(n01), Side::Left)]);
        assert!(mvrfy(2, &tree.root(), l[2], &proof));
    }

    #[test]
    fn odd_layers_duplicate_last_digest() {
        let l = [b"a".as_ref(), b"b", b"c"];
        let h: Vec<[u8; 32]> = l.iter().map(|x| sha(&[&[0], x])).collect();
        let n01 = sha(&[&[1], &h[0], &h[1]]);
        let n22 = sha(&[&[1], &h[2], &h[2]]);
        let root = sha(&[&[1], &n01, &n22]);
        let tree = mtree(&l).unwrap();
        assert_eq!(tree.root().0, root);
        for (i, leaf) in l.iter().enumerate() {
            assert!(mvrfy(i, &tree.root(), leaf, &mproof(&tree, i).unwrap()));
        }
    }

    #[test]
    fn empty_and_out_of_range() {
        let empty: [&[u8]; 0] = [];
        assert_eq!(mtree(&empty).unwrap_err(), MerkleError::NoLeaves);
        let tree = mtree(&leaves(4)).unwrap();
        assert_eq!(mproof(&tree, 4).unwrap_err(), MerkleError::IndexOutOfRange { index: 4, len: 4 });
    }

    #[test]
    fn deterministic() {
        let l = leaves(13);
        assert_eq!(mtree(&l).unwrap().root(), mtree(&l).unwrap().root());
    }

    #[test]
    fn flipped_leaf_bit_rejected() {
        let l = leaves(5);
        let tree = mtree(&l).unwrap();
        let proof = mproof(&tree, 3).unwrap();
        let mut bad = l[3].clone();
        bad[0] ^= 1;
        assert!(!mvrfy(3, &tree.root(), &bad, &proof));
    }

    #[test]
    fn wrong_index_rejected() {
        let l = leaves(8);
        let tree = mtree(&l).unwrap();
        let proof = mproof(&tree, 5).unwrap();
        assert!(!mvrfy(4, &tree.root(), &l[5], &proof));
        let mut relabeled = proof.clone();
        relabeled.index = 4;
        assert!(!mvrfy(4, &tree.root(), &l[5], &relabeled));
    }

    fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let head = rest.remove(i);
            for mut tail in permutations(&rest) {
                tail.insert(0, head.clone());
                out.push(tail);
            }
        }
        out
    }

    #[test]
    fn no_sibling_permutation_verifies() {
        // 16 distinct leaves: every proof has 4 distinct siblings, 23 non-identity orders.
        let l = leaves(16);
        let tree = mtree(&l).unwrap();
        for (i, leaf) in l.iter().enumerate() {
            let proof = mproof(&tree, i).unwrap();
            let perms = permutations(&proof.siblings);
            assert_eq!(perms.len(), 24);
            for perm in perms {
                let candidate = MerkleProof { index: i, siblings: perm.clone() };
                assert_eq!(mvrfy(i, &tree.root(), leaf, &candidate), perm == proof.siblings);
            }
        }
    }

    #[test]
    fn transposing_distinct_leaves_changes_root() {
        for n in 2..=8 {
            let l = leaves(n);
            let root = mtree(&l).unwrap().root();
            for a in 0..n {
                for b in a + 1..n {
                    let mut swapped = l.clone();
                    swapped.swap(a, b);
                    assert_ne!(mtree(&swapped).unwrap().root(), root, "n={n} swap {a},{b}");
                }
            }
        }
    }

    #[test]
    fn proof_bytes_roundtrip() {
        let tree = mtree(&leaves(11)).unwrap();
        let proof = mproof(&tree, 7).unwrap();
        assert_eq!(MerkleProof::from_bytes(&proof.to_bytes()).unwrap(), proof);
        assert_eq!(MerkleProof::from_bytes(&[1, 2, 3]), Err(MerkleError::MalformedProof));
    }
}
