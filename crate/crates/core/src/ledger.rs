//! Deterministic single-process chain: integer token balances, an append-only
//! log of transfers and contract events, and explicitly mined blocks whose
//! hashes double as public randomness.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::merkle::Digest;

/// Token amounts are integers in base units.
pub type Amount = u64;

/// Base units per whole token. Fees such as 4 tokens spread over 8 shards
/// need sub-token resolution.
pub const CENTS_PER_TOKEN: Amount = 100;

pub const fn tokens(whole: u64) -> Amount {
    whole * CENTS_PER_TOKEN
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("insufficient balance: need {needed}, have {available}")]
    InsufficientBalance { needed: Amount, available: Amount },
    #[error("transfer amount must be positive")]
    ZeroAmount,
    #[error("no block at height {0}")]
    NotFound(u64),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(pub [u8; 20]);

impl Address {
    /// Addresses are trusted labels: the first 20 bytes of SHA-256(label).
    pub fn from_label(label: &str) -> Address {
        let h: [u8; 32] = Sha256::digest(label.as_bytes()).into();
        let mut a = [0u8; 20];
        a.copy_from_slice(&h[..20]);
        Address(a)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Address> {
        let bytes = hex::decode(s).ok()?;
        Some(Address(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", &self.to_hex()[..10])
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Address::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 20 hex bytes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub address: Address,
    pub balance: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub parent: Digest,
    pub tx_digest: Digest,
    pub hash: Digest,
}

impl Block {
    pub fn compute_hash(height: u64, parent: &Digest, tx_digest: &Digest) -> Digest {
        Digest::of_parts(&[&height.to_be_bytes(), parent.as_bytes(), tx_digest.as_bytes()])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub from: Address,
    pub to: Address,
    pub amount: Amount,
    pub memo: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferStatus {
    Applied,
    Rejected,
}

/// One line of the exported log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Genesis { height: u64, to: Address, amount: Amount },
    Transfer { height: u64, memo: String, from: Address, to: Address, amount: Amount, status: TransferStatus },
    Event { height: u64, name: String, data: serde_json::Value },
}

impl LogEntry {
    pub fn height(&self) -> u64 {
        match self {
            LogEntry::Genesis { height, .. } | LogEntry::Transfer { height, .. } | LogEntry::Event { height, .. } => {
                *height
            }
        }
    }
}

/// Work queued for [`Ledger::mine_block`].
#[derive(Debug, Clone, PartialEq)]
pub enum Pending {
    Transfer(Transfer),
    Event { name: String, data: serde_json::Value },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ledger {
    balances: BTreeMap<Address, Amount>,
    blocks: Vec<Block>,
    log: Vec<LogEntry>,
    /// Index into `log` of the first entry not yet sealed into a block.
    sealed: usize,
    supply: Amount,
}

fn digest_entries(entries: &[LogEntry]) -> Digest {
    let mut h = Sha256::new();
    for e in entries {
        h.update(serde_json::to_vec(e).expect("log entries serialize"));
        h.update(b"\n");
    }
    Digest(h.finalize().into())
}

impl Ledger {
    /// Creates the chain with block 0 recording the initial allocations.
    pub fn genesis(allocations: &[(Address, Amount)]) -> Ledger {
        let mut balances = BTreeMap::new();
        let mut log = Vec::new();
        let mut supply: Amount = 0;
        for &(to, amount) in allocations {
            *balances.entry(to).or_insert(0) += amount;
            supply += amount;
            log.push(LogEntry::Genesis { height: 0, to, amount });
        }
        let tx_digest = digest_entries(&log);
        let hash = Block::compute_hash(0, &Digest::ZERO, &tx_digest);
        let sealed = log.len();
        Ledger {
            balances,
            blocks: vec![Block { height: 0, parent: Digest::ZERO, tx_digest, hash }],
            log,
            sealed,
            supply,
        }
    }

    pub fn height(&self) -> u64 {
        self.blocks.last().map(|b| b.height).unwrap_or(0)
    }

    /// Height of the block currently being assembled.
    pub fn next_height(&self) -> u64 {
        self.height() + 1
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn balance(&self, who: &Address) -> Amount {
        self.balances.get(who).copied().unwrap_or(0)
    }

    pub fn accounts(&self) -> Vec<Account> {
        self.balances.iter().map(|(&address, &balance)| Account { address, balance }).collect()
    }

    pub fn total_supply(&self) -> Amount {
        self.supply
    }

    pub fn total_balances(&self) -> Amount {
        self.balances.values().sum()
    }

    /// Applies a transfer immediately into the open block. A transfer that
    /// would overdraw `from` is logged as rejected and changes nothing.
    pub fn transfer(&mut self, from: Address, to: Address, amount: Amount, memo: &str) -> Result<(), LedgerError> {
        let available = self.balance(&from);
        let result = if amount == 0 {
            Err(LedgerError::ZeroAmount)
        } else if available < amount {
            Err(LedgerError::InsufficientBalance { needed: amount, available })
        } else {
            Ok(())
        };
        let status = if result.is_ok() {
            *self.balances.entry(from).or_insert(0) -= amount;
            *self.balances.entry(to).or_insert(0) += amount;
            TransferStatus::Applied
        } else {
            TransferStatus::Rejected
        };
        self.log.push(LogEntry::Transfer {
            height: self.next_height(),
            memo: memo.to_string(),
            from,
            to,
            amount,
            status,
        });
        result
    }

    pub fn emit(&mut self, name: &str, data: serde_json::Value) {
        self.log.push(LogEntry::Event { height: self.next_height(), name: name.to_string(), data });
    }

    /// Applies `pending` in order, then seals everything logged since the
    /// previous block. Rejected transfers are recorded, not fatal.
    pub fn mine_block(&mut self, pending: Vec<Pending>) -> Block {
        for p in pending {
            match p {
                Pending::Transfer(t) => {
                    let _ = self.transfer(t.from, t.to, t.amount, &t.memo);
                }
                Pending::Event { name, data } => self.emit(&name, data),
            }
        }
        let height = self.next_height();
        let parent = self.blocks.last().expect("genesis exists").hash;
        let tx_digest = digest_entries(&self.log[self.sealed..]);
        let block = Block { height, parent, tx_digest, hash: Block::compute_hash(height, &parent, &tx_digest) };
        self.sealed = self.log.len();
        self.blocks.push(block.clone());
        block
    }

    pub fn mine_empty(&mut self, count: u64) {
        for _ in 0..count {
            self.mine_block(Vec::new());
        }
    }

    pub fn seed_at(&self, height: u64) -> Result<Digest, LedgerError> {
        self.blocks.get(height as usize).map(|b| b.hash).ok_or(LedgerError::NotFound(height))
    }

    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.log {
            out.push_str(&serde_json::to_string(e).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }
}

/// Default number of pieces a seller must expose: `max(1, ⌈log₂ n⌉)`.
pub fn exposure_count(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let ceil_log2 = (usize::BITS - (n - 1).leading_zeros()) as usize;
    ceil_log2.max(1)
}

/// `k` distinct indices in `[0, n)`, sorted, drawn from `seed` by hashing
/// `seed ‖ counter` and rejection sampling.
pub fn rand_indices(seed: &Digest, n: usize, k: usize) -> Result<Vec<usize>, LedgerError> {
    if n == 0 || k == 0 {
        return Err(LedgerError::InvalidInput("need 1 <= k <= n"));
    }
    if k > n {
        return Err(LedgerError::InvalidInput("cannot draw more indices than shards"));
    }
    let n64 = n as u64;
    // Largest multiple of n that fits in u64; draws at or above it are rejected.
    let zone = u64::MAX - (u64::MAX % n64 + 1) % n64;
    let mut chosen = vec![false; n];
    let mut out = Vec::with_capacity(k);
    let mut counter: u64 = 0;
    while out.len() < k {
        let block = Digest::of_parts(&[seed.as_bytes(), &counter.to_be_bytes()]);
        counter += 1;
        for word in block.as_bytes().chunks_exact(8) {
            let v = u64::from_be_bytes(word.try_into().unwrap());
            if v > zone {
                continue;
            }
            let idx = (v % n64) as usize;
            if !chosen[idx] {
                chosen[idx] = true;
                out.push(idx);
                if out.len() == k {
                    break;
                }
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}
