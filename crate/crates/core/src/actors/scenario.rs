use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::strategy::{ConsumerStrategy, StrategyProfile};
use crate::contracts::{
    AppealEvidence, Assignment, ContractError, DataId, ExposeVerdict, ExposedPiece, Market, MarketConfig, OrderId,
    Payee, SellerListing, Verdict,
};
use crate::crypto::{self, pk_keygen, CryptoError, SymKey};
use crate::ledger::{tokens, Address, Amount, LogEntry, CENTS_PER_TOKEN};
use crate::merkle::{mtree, mvrfy, MerkleError, MerkleProof, MerkleTree};
use crate::meter::{Meter, Op, Phase, PhaseCounters};
use crate::sharding::{self, ShardError, ShardSet, DEFAULT_SLOT};

/// Total download fee, in whole tokens, the default parameters spread over the shards.
pub const DEFAULT_FEE_TOKENS: u64 = 4;
const DESCRIPTION: &str = "Synthetic sensor archive";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Shard(#[from] ShardError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Merkle(#[from] MerkleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Seller,
    Consumer,
    Provider,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Seller, Role::Consumer, Role::Provider];

    pub fn address(self) -> Address {
        Address::from_label(match self {
            Role::Seller => "seller",
            Role::Consumer => "consumer",
            Role::Provider => "provider",
        })
    }

    fn allocation(self) -> Amount {
        match self {
            Role::Seller => tokens(100),
            Role::Consumer => tokens(100),
            Role::Provider => tokens(20),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    /// What an `f`/`h` consumer pays the seller, in whole tokens.
    pub x: u64,
    /// What a `g`/`h` consumer pays the providers, in whole tokens.
    pub y: u64,
    pub n: usize,
    pub slot: usize,
    /// Base units.
    pub price: Amount,
    /// Base units per shard; defaults to the default fee spread over `n` shards.
    pub unit_price: Option<Amount>,
    pub seed: u64,
    pub strict_forfeit: bool,
    pub appeal_window: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            x: 10,
            y: 2,
            n: 8,
            slot: DEFAULT_SLOT,
            price: tokens(20),
            unit_price: None,
            seed: 7,
            strict_forfeit: true,
            appeal_window: 10,
        }
    }
}

impl ScenarioParams {
    /// Default terms with `n` shards of `slot` bytes and the fee spread evenly.
    pub fn sized(n: usize, slot: usize) -> Self {
        ScenarioParams { n, slot, ..ScenarioParams::default() }
    }

    pub fn unit_price(&self) -> Amount {
        self.unit_price.unwrap_or(tokens(DEFAULT_FEE_TOKENS) / self.n.max(1) as Amount)
    }

    pub fn fee(&self) -> Amount {
        self.unit_price() * self.n as Amount
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidParams(m.to_string()));
        if self.n == 0 || self.slot == 0 {
            return bad("n and slot must be positive");
        }
        if tokens(self.x) >= self.price {
            return bad("x must be below the price");
        }
        if tokens(self.y) >= self.fee() {
            return bad("y must be below the total download fee");
        }
        if self.appeal_window == 0 {
            return bad("appeal window must be at least one block");
        }
        if self.price + self.fee() > Role::Consumer.allocation() {
            return bad("consumer allocation cannot cover the price");
        }
        Ok(())
    }

    /// Tokens the consumer escrows under `strategy`.
    pub fn payment(&self, strategy: ConsumerStrategy) -> Amount {
        let to_seller = if strategy.pays_seller_fully() { self.price } else { tokens(self.x) };
        let to_provider = if strategy.pays_provider_fully() { self.fee() } else { tokens(self.y) };
        to_seller + to_provider
    }
}

/// A scenario file: profile letters plus parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub profile: StrategyProfile,
    #[serde(flatten)]
    pub params: ScenarioParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTranscript {
    pub profile: StrategyProfile,
    pub params: ScenarioParams,
    pub data_id: Option<DataId>,
    pub order_id: Option<OrderId>,
    pub exposure: Option<ExposeVerdict>,
    pub exposed_count: usize,
    pub funded: bool,
    /// The consumer received at least one sealed key.
    pub keys_released: bool,
    pub recovered: bool,
    pub seller_verdict: Option<Verdict>,
    pub provider_verdict: Option<Verdict>,
    pub initial_balances: BTreeMap<Role, Amount>,
    pub final_balances: BTreeMap<Role, Amount>,
    pub counters: PhaseCounters,
    pub events: Vec<LogEntry>,
}

impl RunTranscript {
    /// Balance change over the run, in base units.
    pub fn delta(&self, role: Role) -> i64 {
        self.final_balances[&role] as i64 - self.initial_balances[&role] as i64
    }

    /// Token delta plus strategy cost (payees) or data utility (consumer), in base units.
    pub fn net_gain(&self, role: Role) -> i64 {
        let cents = CENTS_PER_TOKEN as i64;
        match role {
            Role::Seller => self.delta(role) + self.profile.seller.cost() * cents,
            Role::Provider => self.delta(role) + self.profile.provider.cost() * cents,
            Role::Consumer => self.delta(role) + if self.recovered { self.params.price as i64 } else { 0 },
        }
    }

    /// One header object followed by the ledger log, one JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let header = serde_json::json!({
            "kind": "transcript",
            "profile": self.profile,
            "params": self.params,
            "data_id": self.data_id,
            "order_id": self.order_id,
            "exposure": self.exposure,
            "funded": self.funded,
            "keys_released": self.keys_released,
            "recovered": self.recovered,
            "seller_verdict": self.seller_verdict,
            "provider_verdict": self.provider_verdict,
            "initial_balances": self.initial_balances,
            "final_balances": self.final_balances,
            "counters": self.counters,
        });
        let mut out = header.to_string();
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }
}

/// What the provider hands the consumer for shard `index`.
struct Served {
    eed: Vec<u8>,
    proof_eed: MerkleProof,
    proof_ed: MerkleProof,
    proof_d: MerkleProof,
}

fn child_rng(master: &mut ChaCha20Rng) -> ChaCha20Rng {
    let mut seed = [0u8; 32];
    master.fill_bytes(&mut seed);
    ChaCha20Rng::from_seed(seed)
}

fn random_bytes(rng: &mut ChaCha20Rng, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

/// Seller goods. With non-matched data the encrypted side commits to
/// garbage while `r_d` still covers the real data; the two roots cannot be
/// linked on chain, so exposure passes and only an appeal reveals it.
fn seller_goods(
    profile: &StrategyProfile,
    master: &SymKey,
    data: &[u8],
    slot: usize,
    rng: &mut ChaCha20Rng,
    meter: &Meter,
) -> Result<ShardSet, ScenarioError> {
    if profile.seller.matched_data() {
        return Ok(sharding::shard_encrypt_metered(master, data, slot, meter)?);
    }
    let plain_shards = sharding::split(data, slot)?;
    let enc_shards: Vec<Vec<u8>> = plain_shards
        .iter()
        .enumerate()
        .map(|(i, p)| sharding::encrypt_shard(master, i, &random_bytes(rng, p.len())))
        .collect();
    meter.record_n(Op::SymEncrypt, enc_shards.len() as u64);
    let tree_plain: MerkleTree = mtree(&plain_shards)?;
    let tree_enc = mtree(&enc_shards)?;
    meter.record_n(Op::TreeBuild, 2);
    Ok(ShardSet { n: plain_shards.len(), slot, data_len: data.len(), plain_shards, enc_shards, tree_plain, tree_enc })
}

/// Runs one full trade with every party following `profile`.
pub fn run_scenario(profile: StrategyProfile, params: &ScenarioParams) -> Result<RunTranscript, ScenarioError> {
    params.validate()?;
    let meter = Meter::new();
    let config = MarketConfig {
        appeal_window: params.appeal_window,
        strict_forfeit: params.strict_forfeit,
        ..MarketConfig::default()
    };
    let allocations: Vec<(Address, Amount)> = Role::ALL.iter().map(|r| (r.address(), r.allocation())).collect();
    let mut market = Market::new(config, &allocations).with_meter(meter.clone());
    let initial_balances: BTreeMap<Role, Amount> =
        Role::ALL.iter().map(|&r| (r, market.balance(&r.address()))).collect();

    let mut root_rng = ChaCha20Rng::seed_from_u64(params.seed);
    let mut seller_rng = child_rng(&mut root_rng);
    let mut provider_rng = child_rng(&mut root_rng);
    let mut consumer_rng = child_rng(&mut root_rng);
    let (seller, provider, consumer) = (Role::Seller.address(), Role::Provider.address(), Role::Consumer.address());

    let mut t = RunTranscript {
        profile,
        params: params.clone(),
        data_id: None,
        order_id: None,
        exposure: None,
        exposed_count: 0,
        funded: false,
        keys_released: false,
        recovered: false,
        seller_verdict: None,
        provider_verdict: None,
        initial_balances,
        final_balances: BTreeMap::new(),
        counters: PhaseCounters::default(),
        events: Vec::new(),
    };

    // Upload.
    meter.set_phase(Phase::Upload);
    let data = random_bytes(&mut seller_rng, params.n * params.slot);
    let master = SymKey::random(&mut seller_rng);
    let goods = seller_goods(&profile, &master, &data, params.slot, &mut seller_rng, &meter)?;
    let data_id = market.ssmc_register_seller(SellerListing {
        seller,
        endpoint: "seller.local:7000".into(),
        description: DESCRIPTION.into(),
        size: data.len() as u64,
        n: goods.n,
        r_d: goods.r_d(),
        r_ed: goods.r_ed(),
        price: params.price,
        unit_price: params.unit_price(),
        deposit: MarketConfig::min_deposit(params.price),
    })?;
    t.data_id = Some(data_id);
    market.mine_n(2);
    let pieces = market
        .exposure_indices(data_id)?
        .into_iter()
        .map(|i| {
            Ok(ExposedPiece {
                index: i,
                data: goods.plain_shards[i].clone(),
                proof_plain: goods.proof_plain(i)?,
                enc: goods.enc_shards[i].clone(),
                proof_enc: goods.proof_enc(i)?,
            })
        })
        .collect::<Result<Vec<_>, MerkleError>>()?;
    t.exposed_count = pieces.len();
    let verdict = market.ssmc_expose(data_id, pieces)?;
    t.exposure = Some(verdict);
    if verdict != ExposeVerdict::Accepted {
        return Ok(finish(t, market, &meter));
    }
    market.ssmc_register_provider(provider, "provider.local:7100", data_id)?;
    market.ssmc_confirm_provider(seller, provider, data_id)?;
    market.mine();

    // Matching and download.
    meter.set_phase(Phase::Download);
    let listing = market
        .match_products("sensor")
        .into_iter()
        .find(|l| l.data_id == data_id)
        .ok_or(ContractError::UnknownData(data_id))?;
    let payment = params.payment(profile.consumer);
    let order_id = match market.scmc_place_order(consumer, listing.data_id, payment) {
        Ok(id) => id,
        Err(ContractError::InsufficientTokens { .. }) => {
            market.mine();
            settle_deposit(&mut market, seller, data_id)?;
            return Ok(finish(t, market, &meter));
        }
        Err(e) => return Err(e.into()),
    };
    t.funded = true;
    t.order_id = Some(order_id);
    market.scmc_select(order_id, vec![Assignment { provider, indices: (0..listing.n).collect() }])?;

    let mut sp_seed = [0u8; 32];
    provider_rng.fill_bytes(&mut sp_seed);
    let k_sp = sharding::provider_key(&sp_seed);
    let package = if profile.provider.authentic_data() {
        sharding::provider_wrap(&goods.enc_shards, k_sp, &meter)?
    } else {
        let fake: Vec<Vec<u8>> = goods.enc_shards.iter().map(|d| random_bytes(&mut provider_rng, d.len())).collect();
        sharding::provider_wrap(&fake, k_sp, &meter)?
    };
    let r_eed = package.r_eed();
    market.scmc_post_serving_root(order_id, provider, r_eed)?;

    let mut served = Vec::with_capacity(goods.n);
    for i in 0..goods.n {
        let s = Served {
            eed: package.eed_shards[i].clone(),
            proof_eed: package.proof(i)?,
            proof_ed: goods.proof_enc(i)?,
            proof_d: goods.proof_plain(i)?,
        };
        meter.record(Op::ProofVerify);
        if !mvrfy(i, &r_eed, &s.eed, &s.proof_eed) {
            return Err(ScenarioError::InvalidParams(format!("served shard {i} fails its own root")));
        }
        served.push(s);
    }
    market.cpc_open(order_id)?;
    let mut kp_seed = [0u8; 32];
    consumer_rng.fill_bytes(&mut kp_seed);
    let pair = pk_keygen(&kp_seed);
    market.cpc_post_pubkey(order_id, pair.public)?;
    market.mine();

    // Provider payment leg.
    meter.set_phase(Phase::PayProvider);
    let provider_key = if profile.provider.matched_key() { package.key } else { SymKey::random(&mut provider_rng) };
    meter.record(Op::AsymEncrypt);
    let sealed = crypto::pk_encrypt(&pair.public, provider_key.as_bytes(), &mut provider_rng)?;
    market.cpc_post_key(order_id, Payee::Provider(provider), sealed.clone())?;
    t.keys_released = true;
    meter.record(Op::AsymDecrypt);
    let received_sp = crypto::pk_decrypt(&pair.private, &sealed).ok().and_then(|k| SymKey::from_slice(&k));
    let r_ed = market.record(data_id)?.r_ed;
    let mut enc_shards: Vec<Option<Vec<u8>>> = vec![None; goods.n];
    let mut provider_bad: Option<usize> = None;
    for (i, s) in served.iter().enumerate() {
        let d = received_sp.as_ref().and_then(|k| {
            meter.record(Op::SymDecrypt);
            crypto::sym_decrypt_bytes(k, &s.eed).ok()
        });
        let ok = match &d {
            Some(d) => {
                meter.record(Op::ProofVerify);
                mvrfy(i, &r_ed, d, &s.proof_ed)
            }
            None => false,
        };
        if ok {
            enc_shards[i] = d;
        } else if provider_bad.is_none() {
            provider_bad = Some(i);
        }
    }
    if let Some(i) = provider_bad {
        meter.set_phase(Phase::Appeal);
        let evidence = AppealEvidence {
            index: i,
            shard: served[i].eed.clone(),
            shard_proof: served[i].proof_eed.clone(),
            content_proof: served[i].proof_ed.clone(),
        };
        t.provider_verdict = Some(market.cpc_appeal(order_id, Payee::Provider(provider), &pair.private, &evidence)?);
    }
    market.mine();

    // Seller payment leg.
    meter.set_phase(Phase::PaySeller);
    let seller_key = if profile.seller.matched_key() { master } else { SymKey::random(&mut seller_rng) };
    meter.record(Op::AsymEncrypt);
    let sealed = crypto::pk_encrypt(&pair.public, seller_key.as_bytes(), &mut seller_rng)?;
    market.cpc_post_key(order_id, Payee::Seller, sealed.clone())?;
    meter.record(Op::AsymDecrypt);
    let received_master = crypto::pk_decrypt(&pair.private, &sealed).ok().and_then(|k| SymKey::from_slice(&k));

    // Without the provider's shards the consumer checks the seller against
    // the pieces exposed on chain.
    let candidates: Vec<(usize, Vec<u8>, MerkleProof, MerkleProof)> = if provider_bad.is_none() {
        enc_shards
            .iter()
            .enumerate()
            .map(|(i, d)| {
                (i, d.clone().expect("verified above"), served[i].proof_ed.clone(), served[i].proof_d.clone())
            })
            .collect()
    } else {
        market
            .record(data_id)?
            .exposed
            .iter()
            .map(|p| (p.index, p.enc.clone(), p.proof_enc.clone(), p.proof_plain.clone()))
            .collect()
    };
    let r_d = market.record(data_id)?.r_d;
    let mut plain: Vec<Vec<u8>> = Vec::with_capacity(candidates.len());
    let mut seller_bad: Option<usize> = None;
    for (pos, (i, d, _, proof_d)) in candidates.iter().enumerate() {
        let p = received_master.as_ref().and_then(|k| {
            meter.record(Op::SymDecrypt);
            sharding::decrypt_shard(k, *i, d).ok()
        });
        let ok = match &p {
            Some(p) => {
                meter.record(Op::ProofVerify);
                mvrfy(*i, &r_d, p, proof_d)
            }
            None => false,
        };
        match (ok, p) {
            (true, Some(p)) => plain.push(p),
            _ => {
                if seller_bad.is_none() {
                    seller_bad = Some(pos);
                }
            }
        }
    }
    if let Some(pos) = seller_bad {
        meter.set_phase(Phase::Appeal);
        let (i, d, proof_ed, proof_d) = &candidates[pos];
        let evidence = AppealEvidence {
            index: *i,
            shard: d.clone(),
            shard_proof: proof_ed.clone(),
            content_proof: proof_d.clone(),
        };
        t.seller_verdict = Some(market.cpc_appeal(order_id, Payee::Seller, &pair.private, &evidence)?);
    }
    t.recovered = provider_bad.is_none()
        && seller_bad.is_none()
        && plain.len() == goods.n
        && sharding::reassemble(&plain) == data;

    market.mine_n(params.appeal_window + 1);
    market.cpc_settle(order_id)?;
    settle_deposit(&mut market, seller, data_id)?;
    Ok(finish(t, market, &meter))
}

fn settle_deposit(market: &mut Market, seller: Address, data_id: DataId) -> Result<(), ScenarioError> {
    if market.record(data_id)?.deposit_held {
        market.ssmc_withdraw(seller, data_id)?;
    }
    market.mine();
    Ok(())
}

fn finish(mut t: RunTranscript, market: Market, meter: &Meter) -> RunTranscript {
    t.final_balances = Role::ALL.iter().map(|&r| (r, market.balance(&r.address()))).collect();
    t.counters = meter.snapshot();
    t.events = market.ledger.log().to_vec();
    t
}
