//! A persistent market driven one contract call at a time.
//!
//! Every secret (seller master keys, provider keys, consumer key pairs) is
//! derived from the session seed and the object's id, so the state file only
//! holds the market and where each dataset's bytes come from.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::synth::synthesize;
use super::{DataType, HarnessError};
use crate::contracts::{
    AppealEvidence, Assignment, ContractError, DataId, Disbursement, ExposeVerdict, ExposedPiece, Listing, Market,
    MarketConfig, OrderId, Payee, SellerListing, Verdict,
};
use crate::crypto::{pk_decrypt, pk_encrypt, pk_keygen, sym_decrypt_bytes, KeyPair, SymKey};
use crate::ledger::{tokens, Address, Amount};
use crate::merkle::{mvrfy, MerkleError};
use crate::meter::Meter;
use crate::sharding::{self, ProviderPackage, ShardSet};

/// Accounts funded at genesis, 100 tokens each.
pub const ACCOUNTS: [&str; 7] =
    ["seller", "seller-2", "consumer", "consumer-2", "provider", "provider-2", "provider-3"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic { data_type: DataType, size: u64, seed: u64 },
    File { path: PathBuf },
}

impl DataSource {
    pub fn load(&self) -> Result<Vec<u8>, HarnessError> {
        match self {
            DataSource::Synthetic { data_type, size, seed } => Ok(synthesize(*data_type, *size as usize, *seed)),
            DataSource::File { path } => Ok(std::fs::read(path)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub seller: String,
    pub source: DataSource,
    pub slot: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Session {
    pub seed: u64,
    pub market: Market,
    pub datasets: BTreeMap<DataId, Dataset>,
}

/// What a registration needs beyond the data itself.
#[derive(Debug, Clone)]
pub struct Terms {
    pub description: String,
    /// Base units.
    pub price: Amount,
    /// Base units per shard.
    pub unit_price: Amount,
}

fn account(label: &str) -> Result<Address, HarnessError> {
    if ACCOUNTS.contains(&label) {
        Ok(Address::from_label(label))
    } else {
        Err(HarnessError::InvalidConfig(format!("unknown account {label:?}; known: {}", ACCOUNTS.join(", "))))
    }
}

fn label_of(addr: &Address) -> String {
    ACCOUNTS.iter().find(|l| Address::from_label(l) == *addr).map(|l| l.to_string()).unwrap_or_else(|| addr.to_hex())
}

/// Parses `seller` or `provider:<account>`.
pub fn parse_payee(s: &str) -> Result<Payee, HarnessError> {
    match s.split_once(':') {
        None if s == "seller" => Ok(Payee::Seller),
        Some(("provider", who)) => Ok(Payee::Provider(account(who)?)),
        _ => Err(HarnessError::InvalidConfig(format!("payee must be `seller` or `provider:<account>`, got {s:?}"))),
    }
}

impl Session {
    pub fn new(seed: u64, config: MarketConfig) -> Session {
        let allocations: Vec<(Address, Amount)> =
            ACCOUNTS.iter().map(|l| (Address::from_label(l), tokens(100))).collect();
        Session { seed, market: Market::new(config, &allocations), datasets: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> Result<Session, HarnessError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Loads `path`, or starts a fresh session if it does not exist yet.
    pub fn open(path: &Path, seed: u64) -> Result<Session, HarnessError> {
        if path.exists() {
            Session::load(path)
        } else {
            Ok(Session::new(seed, MarketConfig::default()))
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    fn secret(&self, tag: &str, id: u64, label: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"fairtrade/session/");
        h.update(tag.as_bytes());
        h.update(self.seed.to_be_bytes());
        h.update(id.to_be_bytes());
        h.update(label.as_bytes());
        h.finalize().into()
    }

    fn master(&self, data_id: DataId) -> SymKey {
        SymKey(self.secret("master", data_id, ""))
    }

    fn provider_key(&self, data_id: DataId, provider: &Address) -> SymKey {
        sharding::provider_key(&self.secret("provider", data_id, &provider.to_hex()))
    }

    fn consumer_pair(&self, order_id: OrderId) -> KeyPair {
        pk_keygen(&self.secret("consumer", order_id, ""))
    }

    fn rng(&self, tag: &str, id: u64) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.secret(tag, id, "rng"))
    }

    fn dataset(&self, data_id: DataId) -> Result<&Dataset, HarnessError> {
        self.datasets.get(&data_id).ok_or(HarnessError::Contract(ContractError::UnknownData(data_id)))
    }

    fn goods(&self, data_id: DataId) -> Result<ShardSet, HarnessError> {
        let ds = self.dataset(data_id)?;
        Ok(sharding::shard_encrypt(&self.master(data_id), &ds.source.load()?, ds.slot)?)
    }

    fn package(&self, data_id: DataId, provider: &Address, goods: &ShardSet) -> Result<ProviderPackage, HarnessError> {
        Ok(sharding::provider_wrap(&goods.enc_shards, self.provider_key(data_id, provider), &Meter::disabled())?)
    }

    /// Lists a dataset. Two blocks are mined so the exposure seed exists.
    pub fn register(
        &mut self,
        seller: &str,
        source: DataSource,
        slot: usize,
        terms: Terms,
    ) -> Result<DataId, HarnessError> {
        let addr = account(seller)?;
        let data = source.load()?;
        // The master key depends on the id the record is about to get.
        let provisional = self.market.records().map(|r| r.data_id).max().unwrap_or(0) + 1;
        let goods = sharding::shard_encrypt(&self.master(provisional), &data, slot)?;
        let data_id = self.market.ssmc_register_seller(SellerListing {
            seller: addr,
            endpoint: format!("{seller}.local:7000"),
            description: terms.description,
            size: data.len() as u64,
            n: goods.n,
            r_d: goods.r_d(),
            r_ed: goods.r_ed(),
            price: terms.price,
            unit_price: terms.unit_price,
            deposit: MarketConfig::min_deposit(terms.price),
        })?;
        if data_id != provisional {
            return Err(HarnessError::Protocol(format!("expected data id {provisional}, got {data_id}")));
        }
        self.datasets.insert(data_id, Dataset { seller: seller.to_string(), source, slot });
        self.market.mine_n(2);
        Ok(data_id)
    }

    pub fn expose(&mut self, data_id: DataId) -> Result<ExposeVerdict, HarnessError> {
        let goods = self.goods(data_id)?;
        let pieces = self
            .market
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
        let verdict = self.market.ssmc_expose(data_id, pieces)?;
        self.market.mine();
        Ok(verdict)
    }

    /// Registers `provider` for the dataset and has the seller confirm it.
    pub fn provide(&mut self, data_id: DataId, provider: &str) -> Result<(), HarnessError> {
        let addr = account(provider)?;
        let seller = account(&self.dataset(data_id)?.seller)?;
        self.market.ssmc_register_provider(addr, &format!("{provider}.local:7100"), data_id)?;
        self.market.ssmc_confirm_provider(seller, addr, data_id)?;
        self.market.mine();
        Ok(())
    }

    pub fn search(&self, keyword: &str) -> Vec<Listing> {
        self.market.match_products(keyword)
    }

    /// Places and funds an order; `payment` defaults to the full price plus fees.
    pub fn order(&mut self, consumer: &str, data_id: DataId, payment: Option<Amount>) -> Result<OrderId, HarnessError> {
        let addr = account(consumer)?;
        let payment = match payment {
            Some(p) => p,
            None => self.market.record(data_id)?.total_cost(),
        };
        let id = self.market.scmc_place_order(addr, data_id, payment)?;
        self.market.mine();
        Ok(id)
    }

    /// Spreads the shards over every confirmed provider, posts their serving
    /// roots, opens escrow and has every payee post its sealed key.
    pub fn select(&mut self, order_id: OrderId) -> Result<Vec<Assignment>, HarnessError> {
        let data_id = self.market.order(order_id)?.data_id;
        let record = self.market.record(data_id)?.clone();
        let providers: Vec<Address> = record.providers.iter().filter(|p| p.confirmed).map(|p| p.provider).collect();
        if providers.is_empty() {
            return Err(HarnessError::InvalidConfig(format!("data {data_id} has no confirmed provider")));
        }
        let assignments: Vec<Assignment> = super::bench::ranges(record.n, providers.len().min(record.n))
            .into_iter()
            .zip(&providers)
            .map(|(indices, p)| Assignment { provider: *p, indices })
            .collect();
        self.market.scmc_select(order_id, assignments.clone())?;
        let goods = self.goods(data_id)?;
        for a in &assignments {
            let pkg = self.package(data_id, &a.provider, &goods)?;
            self.market.scmc_post_serving_root(order_id, a.provider, pkg.r_eed())?;
        }
        self.market.cpc_open(order_id)?;
        let pair = self.consumer_pair(order_id);
        self.market.cpc_post_pubkey(order_id, pair.public)?;
        let mut rng = self.rng("seal", order_id);
        for a in &assignments {
            let key = self.provider_key(data_id, &a.provider);
            let sealed = pk_encrypt(&pair.public, key.as_bytes(), &mut rng)?;
            self.market.cpc_post_key(order_id, Payee::Provider(a.provider), sealed)?;
        }
        let sealed = pk_encrypt(&pair.public, self.master(data_id).as_bytes(), &mut rng)?;
        self.market.cpc_post_key(order_id, Payee::Seller, sealed)?;
        self.market.mine();
        Ok(assignments)
    }

    /// The consumer appeals against `payee` using shard `index` as evidence.
    pub fn appeal(&mut self, order_id: OrderId, payee: Payee, index: usize) -> Result<Verdict, HarnessError> {
        let order = self.market.order(order_id)?.clone();
        let goods = self.goods(order.data_id)?;
        if index >= goods.n {
            return Err(HarnessError::InvalidConfig(format!("shard {index} out of range 0..{}", goods.n)));
        }
        let evidence = match payee {
            Payee::Seller => AppealEvidence {
                index,
                shard: goods.enc_shards[index].clone(),
                shard_proof: goods.proof_enc(index)?,
                content_proof: goods.proof_plain(index)?,
            },
            Payee::Provider(p) => {
                let pkg = self.package(order.data_id, &p, &goods)?;
                AppealEvidence {
                    index,
                    shard: pkg.eed_shards[index].clone(),
                    shard_proof: pkg.proof(index)?,
                    content_proof: goods.proof_enc(index)?,
                }
            }
        };
        let pair = self.consumer_pair(order_id);
        let verdict = self.market.cpc_appeal(order_id, payee, &pair.private, &evidence)?;
        self.market.mine();
        Ok(verdict)
    }

    /// The consumer's side of the download: opens every sealed key, peels both
    /// layers and checks each shard against the roots on chain.
    pub fn recover(&self, order_id: OrderId) -> Result<Vec<u8>, HarnessError> {
        let order = self.market.order(order_id)?;
        let escrow = self.market.escrow(order_id)?;
        let record = self.market.record(order.data_id)?;
        let pair = self.consumer_pair(order_id);
        let open = |payee: &Payee| -> Result<SymKey, HarnessError> {
            let sealed = escrow
                .tranche(payee)
                .and_then(|t| t.sealed_key.as_ref())
                .ok_or_else(|| HarnessError::Protocol(format!("no key posted for {payee:?}")))?;
            SymKey::from_slice(&pk_decrypt(&pair.private, sealed)?)
                .ok_or_else(|| HarnessError::Protocol("sealed key has the wrong length".into()))
        };
        let master = open(&Payee::Seller)?;
        let goods = self.goods(order.data_id)?;
        let mut plain = vec![Vec::new(); record.n];
        for a in &order.assignments {
            let root = order
                .serving_root(&a.provider)
                .ok_or_else(|| HarnessError::Protocol(format!("no serving root for {}", label_of(&a.provider))))?;
            let pkg = self.package(order.data_id, &a.provider, &goods)?;
            let k_sp = open(&Payee::Provider(a.provider))?;
            for &i in &a.indices {
                let eed = &pkg.eed_shards[i];
                if !mvrfy(i, &root, eed, &pkg.proof(i)?) {
                    return Err(HarnessError::Protocol(format!("shard {i} fails its serving root")));
                }
                let ed = sym_decrypt_bytes(&k_sp, eed)?;
                if !mvrfy(i, &record.r_ed, &ed, &goods.proof_enc(i)?) {
                    return Err(HarnessError::Protocol(format!("shard {i} fails r_ed")));
                }
                let d = sharding::decrypt_shard(&master, i, &ed)?;
                if !mvrfy(i, &record.r_d, &d, &goods.proof_plain(i)?) {
                    return Err(HarnessError::Protocol(format!("shard {i} fails r_d")));
                }
                plain[i] = d;
            }
        }
        Ok(sharding::reassemble(&plain))
    }

    /// Waits out the appeal window and pays out every tranche.
    pub fn settle(&mut self, order_id: OrderId) -> Result<Vec<(String, Disbursement, Amount)>, HarnessError> {
        let window = self.market.config.appeal_window;
        self.market.mine_n(window + 1);
        let out = self.market.cpc_settle(order_id)?;
        self.market.mine();
        Ok(out
            .into_iter()
            .map(|(payee, d, amount)| {
                let who = match payee {
                    Payee::Seller => "seller".to_string(),
                    Payee::Provider(p) => format!("provider:{}", label_of(&p)),
                };
                (who, d, amount)
            })
            .collect())
    }

    /// Returns the seller's deposit once no order is open.
    pub fn withdraw(&mut self, data_id: DataId) -> Result<Amount, HarnessError> {
        let seller = account(&self.dataset(data_id)?.seller)?;
        let deposit = self.market.record(data_id)?.deposit;
        self.market.ssmc_withdraw(seller, data_id)?;
        self.market.mine();
        Ok(deposit)
    }

    pub fn balances(&self) -> BTreeMap<String, Amount> {
        ACCOUNTS.iter().map(|l| (l.to_string(), self.market.balance(&Address::from_label(l)))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms() -> Terms {
        Terms { description: "Weather logs 2024".into(), price: tokens(20), unit_price: 50 }
    }

    fn synthetic(size: u64) -> DataSource {
        DataSource::Synthetic { data_type: DataType::Text, size, seed: 5 }
    }

    fn listed(s: &mut Session) -> DataId {
        let id = s.register("seller", synthetic(3000), 256, terms()).unwrap();
        assert_eq!(s.expose(id).unwrap(), ExposeVerdict::Accepted);
        s.provide(id, "provider").unwrap();
        s.provide(id, "provider-2").unwrap();
        id
    }

    #[test]
    fn full_trade_through_the_session() {
        let mut s = Session::new(1, MarketConfig::default());
        let id = listed(&mut s);
        assert_eq!(s.search("weather").len(), 1);
        let order = s.order("consumer", id, None).unwrap();
        let assignments = s.select(order).unwrap();
        assert_eq!(assignments.len(), 2);
        assert_eq!(s.recover(order).unwrap(), synthetic(3000).load().unwrap());
        let paid = s.settle(order).unwrap();
        assert!(paid.iter().all(|(_, d, _)| *d == Disbursement::Paid));
        let fee = 50 * 12;
        assert_eq!(s.balances()["consumer"], tokens(100) - tokens(20) - fee);
        assert_eq!(s.withdraw(id).unwrap(), tokens(10));
        assert_eq!(s.balances()["seller"], tokens(120));
        assert!(s.withdraw(id).is_err());
    }

    #[test]
    fn honest_payee_wins_appeal() {
        let mut s = Session::new(2, MarketConfig::default());
        let id = listed(&mut s);
        let order = s.order("consumer", id, None).unwrap();
        s.select(order).unwrap();
        assert_eq!(s.appeal(order, Payee::Seller, 3).unwrap(), Verdict::Denied);
        assert_eq!(s.appeal(order, parse_payee("provider:provider-2").unwrap(), 7).unwrap(), Verdict::Denied);
        assert!(s.appeal(order, Payee::Seller, 99).is_err());
    }

    #[test]
    fn state_survives_a_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        let mut s = Session::open(&path, 3).unwrap();
        let id = listed(&mut s);
        s.save(&path).unwrap();
        let mut back = Session::open(&path, 999).unwrap();
        assert_eq!(back.seed, 3);
        let order = back.order("consumer-2", id, None).unwrap();
        back.select(order).unwrap();
        assert!(back.recover(order).is_ok());
    }

    #[test]
    fn bad_names_are_rejected() {
        assert!(parse_payee("provider:nobody").is_err());
        assert!(parse_payee("buyer").is_err());
        let mut s = Session::new(4, MarketConfig::default());
        assert!(s.register("mallory", synthetic(10), 4, terms()).is_err());
    }
}
