use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::PublicKey;
use crate::ledger::{Address, Amount, LedgerError};
use crate::merkle::{Digest, MerkleProof};

pub type DataId = u64;
pub type OrderId = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContractError {
    #[error("unknown data id {0}")]
    UnknownData(DataId),
    #[error("unknown order id {0}")]
    UnknownOrder(OrderId),
    #[error("a listed record already has this plaintext root")]
    DuplicateRoot,
    #[error("deposit {offered} below the required {required}")]
    InsufficientDeposit { required: Amount, offered: Amount },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("operation not allowed while {0}")]
    WrongStatus(String),
    #[error("exposed indices differ from the sampled ones")]
    WrongIndices,
    #[error("exposure seed block not mined yet")]
    SeedNotReady,
    #[error("caller is not the seller of this record")]
    NotSeller,
    #[error("provider is not registered for this record")]
    UnknownProvider,
    #[error("provider {0} is not confirmed for this record")]
    UnconfirmedProvider(Address),
    #[error("shard {0} is not assigned to any provider")]
    IncompleteCover(usize),
    #[error("escrow {offered} below the required {required}")]
    InsufficientTokens { required: Amount, offered: Amount },
    #[error("provider {0} has not posted a serving root")]
    MissingServingRoot(Address),
    #[error("no consumer public key posted")]
    NoPubKey,
    #[error("public key was already used for another order")]
    PubKeyReused,
    #[error("already posted")]
    DoublePost,
    #[error("key posting deadline has passed")]
    KeyDeadlinePassed,
    #[error("no tranche for this payee")]
    UnknownPayee,
    #[error("private key does not match the posted public key")]
    PrivKeyMismatch,
    #[error("appeal window has closed")]
    LateAppeal,
    #[error("tranche already arbitrated or disbursed")]
    AlreadyAppealed,
    #[error("payee has not posted a key")]
    KeyNotPosted,
    #[error("a tranche is still inside its key or appeal window")]
    AppealWindowOpen,
    #[error("order already closed")]
    AlreadyClosed,
    #[error("deposit is locked by an open order or already released")]
    DepositLocked,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordMode {
    /// Case-insensitive substring match.
    Substring,
    /// Exact description equality.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketConfig {
    /// Blocks a payee has to post its key, and the consumer to appeal.
    pub appeal_window: u64,
    /// Overrides the default `max(1, ⌈log₂ n⌉)` pieces to expose.
    pub exposure_count: Option<usize>,
    pub keyword_mode: KeywordMode,
    /// Keep an underfunded order's tokens instead of refunding them.
    pub strict_forfeit: bool,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            appeal_window: 10,
            exposure_count: None,
            keyword_mode: KeywordMode::Substring,
            strict_forfeit: false,
        }
    }
}

impl MarketConfig {
    pub fn min_deposit(price: Amount) -> Amount {
        price.div_ceil(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Registered,
    Exposed,
    Live,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ProofFailure,
    DuplicatePiece,
    DuplicateRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum ExposeVerdict {
    Accepted,
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpRecord {
    pub provider: Address,
    pub endpoint: String,
    pub data_id: DataId,
    pub confirmed: bool,
}

/// One exposed shard as submitted and stored on chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposedPiece {
    pub index: usize,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
    pub proof_plain: MerkleProof,
    #[serde(with = "hex_bytes")]
    pub enc: Vec<u8>,
    pub proof_enc: MerkleProof,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SellerListing {
    pub seller: Address,
    pub endpoint: String,
    pub description: String,
    pub size: u64,
    pub n: usize,
    pub r_d: Digest,
    pub r_ed: Digest,
    pub price: Amount,
    pub unit_price: Amount,
    pub deposit: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataRecord {
    pub data_id: DataId,
    pub seller: Address,
    pub endpoint: String,
    pub description: String,
    pub size: u64,
    pub n: usize,
    pub r_d: Digest,
    pub r_ed: Digest,
    pub price: Amount,
    pub unit_price: Amount,
    pub deposit: Amount,
    /// Whether SSMC still holds the deposit on the seller's behalf.
    pub deposit_held: bool,
    pub registered_at: u64,
    pub exposed_indices: Vec<usize>,
    pub exposed: Vec<ExposedPiece>,
    pub exposed_ok: bool,
    pub providers: Vec<SpRecord>,
    pub status: RecordStatus,
}

impl DataRecord {
    pub fn provider(&self, who: &Address) -> Option<&SpRecord> {
        self.providers.iter().find(|p| &p.provider == who)
    }

    pub fn download_fee(&self) -> Amount {
        self.unit_price * self.n as Amount
    }

    pub fn total_cost(&self) -> Amount {
        self.price + self.download_fee()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Listing {
    pub data_id: DataId,
    pub description: String,
    pub price: Amount,
    pub unit_price: Amount,
    pub size: u64,
    pub n: usize,
    pub r_d: Digest,
    pub providers: Vec<(Address, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderStatus {
    Placed,
    Funded,
    Downloading,
    Settling,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub provider: Address,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub order_id: OrderId,
    pub consumer: Address,
    pub data_id: DataId,
    pub escrowed: Amount,
    pub assignments: Vec<Assignment>,
    pub serving_roots: Vec<(Address, Digest)>,
    pub status: OrderStatus,
}

impl Order {
    pub fn serving_root(&self, provider: &Address) -> Option<Digest> {
        self.serving_roots.iter().find(|(a, _)| a == provider).map(|(_, r)| *r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "role", content = "address", rename_all = "snake_case")]
pub enum Payee {
    Seller,
    Provider(Address),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The payee cheated; its tranche goes back to the consumer.
    Upheld,
    /// The claim failed; the payee is paid.
    Denied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disbursement {
    Paid,
    Refunded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tranche {
    pub payee: Payee,
    pub recipient: Address,
    pub amount: Amount,
    #[serde(with = "hex_bytes_opt")]
    pub sealed_key: Option<Vec<u8>>,
    pub appeal_deadline: Option<u64>,
    pub verdict: Option<Verdict>,
    pub disbursed: Option<Disbursement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Escrow {
    pub order_id: OrderId,
    pub pubkey: Option<PublicKey>,
    pub opened_at: u64,
    pub key_deadline: u64,
    pub tranches: Vec<Tranche>,
    pub escrowed: Amount,
    pub disbursed: Amount,
}

impl Escrow {
    pub fn tranche(&self, payee: &Payee) -> Option<&Tranche> {
        self.tranches.iter().find(|t| &t.payee == payee)
    }
}

/// What the consumer submits to back an appeal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppealEvidence {
    pub index: usize,
    /// `D_i` for a seller appeal, the provider-encrypted shard for a provider appeal.
    #[serde(with = "hex_bytes")]
    pub shard: Vec<u8>,
    /// Proves `shard` against `r_ed` (seller) or the provider's serving root.
    pub shard_proof: MerkleProof,
    /// Proof the decrypted shard should satisfy against `r_d` (seller) or `r_ed` (provider).
    pub content_proof: MerkleProof,
}

pub(crate) mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod hex_bytes_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match bytes {
            Some(b) => s.serialize_some(&hex::encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(d)?.map(|s| hex::decode(s).map_err(serde::de::Error::custom)).transpose()
    }
}
