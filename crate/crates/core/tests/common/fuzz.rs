//! Random operation sequences against a [`Market`], with the token
//! accounting checked after every step.

use std::collections::BTreeMap;

use fairtrade_core::contracts::{
    cpc_address, ssmc_address, AppealEvidence, Assignment, DataId, ExposedPiece, Market, MarketConfig, OrderId,
    OrderStatus, Payee, RecordStatus, SellerListing,
};
use fairtrade_core::crypto::{pk_encrypt, pk_keygen, KeyPair, SymKey};
use fairtrade_core::ledger::{tokens, Address, Amount, LogEntry, TransferStatus};
use fairtrade_core::meter::Meter;
use fairtrade_core::sharding::{provider_wrap, shard_encrypt, ProviderPackage, ShardSet};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const SEQUENCE_LEN: usize = 120;

#[derive(Debug, Default, Clone, Copy)]
pub struct FuzzStats {
    pub ops: usize,
    pub accepted: usize,
    pub closed_orders: usize,
    pub appeals: usize,
}

fn seller(i: usize) -> Address {
    Address::from_label(&format!("fuzz-seller-{i}"))
}
fn provider(i: usize) -> Address {
    Address::from_label(&format!("fuzz-provider-{i}"))
}
fn consumer(i: usize) -> Address {
    Address::from_label(&format!("fuzz-consumer-{i}"))
}
fn master(s: usize) -> SymKey {
    SymKey([s as u8 + 1; 32])
}

struct OrderCtx {
    id: OrderId,
    pair: KeyPair,
    set: usize,
    packages: BTreeMap<Address, ProviderPackage>,
}

struct World {
    m: Market,
    rng: ChaCha20Rng,
    /// Datasets per seller: (seller index, shard set).
    sets: Vec<(usize, ShardSet)>,
    records: Vec<(DataId, usize)>,
    orders: Vec<OrderCtx>,
    supply: Amount,
    stats: FuzzStats,
}

impl World {
    fn new(seed: u64) -> World {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut alloc = Vec::new();
        for i in 0..2 {
            alloc.push((seller(i), tokens(100)));
            alloc.push((provider(i), tokens(20)));
            alloc.push((consumer(i), tokens(60)));
        }
        let config =
            MarketConfig { appeal_window: rng.gen_range(1..6), strict_forfeit: rng.gen(), ..MarketConfig::default() };
        let m = Market::new(config, &alloc);
        let supply = m.ledger.total_supply();
        let mut sets = Vec::new();
        for s in 0..2 {
            for n in [1usize, 3, 4] {
                let mut data = vec![0u8; n * 32 - rng.gen_range(0..8)];
                rng.fill_bytes(&mut data);
                sets.push((s, shard_encrypt(&master(s), &data, 32).unwrap()));
            }
        }
        World { m, rng, sets, records: Vec::new(), orders: Vec::new(), supply, stats: FuzzStats::default() }
    }

    fn pick(&mut self, len: usize) -> Option<usize> {
        (len > 0).then(|| self.rng.gen_range(0..len))
    }

    fn step(&mut self) -> bool {
        let op = self.rng.gen_range(0..20);
        match op {
            14.. => self.advance(),
            0 => self.register(),
            1 => self.expose(),
            2 => self.register_provider(),
            3 => self.place_order(),
            4 => self.select(),
            5 => self.post_root(),
            6 => self.open(),
            7 => self.post_pubkey(),
            8 | 9 => self.post_key(),
            10 => self.appeal(),
            11 => {
                let k = self.rng.gen_range(1..8);
                self.m.mine_n(k);
                true
            }
            12 => self.settle(),
            _ => self.withdraw(),
        }
    }

    fn expose(&mut self) -> bool {
        self.pick(self.records.len()).is_some_and(|r| self.expose_at(r))
    }

    fn register_provider(&mut self) -> bool {
        self.pick(self.records.len()).is_some_and(|r| self.register_provider_at(r))
    }

    fn place_order(&mut self) -> bool {
        self.pick(self.records.len()).is_some_and(|r| self.place_order_at(r))
    }

    fn select(&mut self) -> bool {
        self.pick(self.orders.len()).is_some_and(|o| self.select_at(o))
    }

    fn post_root(&mut self) -> bool {
        self.pick(self.orders.len()).is_some_and(|o| self.post_root_at(o))
    }

    fn open(&mut self) -> bool {
        self.pick(self.orders.len()).is_some_and(|o| self.open_at(o))
    }

    fn post_pubkey(&mut self) -> bool {
        self.pick(self.orders.len()).is_some_and(|o| self.post_pubkey_at(o))
    }

    fn post_key(&mut self) -> bool {
        self.pick(self.orders.len()).is_some_and(|o| self.post_key_at(o))
    }

    fn appeal(&mut self) -> bool {
        self.pick(self.orders.len()).is_some_and(|o| self.appeal_at(o))
    }

    fn settle(&mut self) -> bool {
        self.pick(self.orders.len()).is_some_and(|o| self.settle_at(o))
    }

    /// Moves a random record or order one step along the honest path, so
    /// that sequences regularly reach settlement.
    fn advance(&mut self) -> bool {
        if self.rng.gen_bool(0.3) || self.orders.is_empty() {
            let Some(r) = self.pick(self.records.len()) else { return self.register() };
            let id = self.records[r].0;
            let Ok(status) = self.m.record(id).map(|rec| rec.status) else { return false };
            return match status {
                RecordStatus::Registered => {
                    self.m.mine_n(2);
                    self.expose_at(r)
                }
                RecordStatus::Exposed => self.register_provider_at(r),
                RecordStatus::Live => self.place_order_at(r),
                RecordStatus::Rejected => self.register(),
            };
        }
        let o = self.rng.gen_range(0..self.orders.len());
        let id = self.orders[o].id;
        let Ok(order) = self.m.order(id).cloned() else { return false };
        match order.status {
            OrderStatus::Funded | OrderStatus::Placed => self.select_at(o),
            OrderStatus::Downloading if order.serving_roots.len() < order.assignments.len() => self.post_root_at(o),
            _ => match self.m.escrow(id).cloned() {
                Err(_) => self.open_at(o),
                Ok(e) if e.pubkey.is_none() => self.post_pubkey_at(o),
                Ok(e) if e.tranches.iter().any(|t| t.sealed_key.is_none()) && self.rng.gen_bool(0.8) => {
                    self.post_key_at(o)
                }
                Ok(_) if self.rng.gen_bool(0.3) => self.appeal_at(o),
                Ok(_) => {
                    let w = self.m.config.appeal_window;
                    self.m.mine_n(w + 1);
                    self.m.cpc_settle(id).is_ok()
                }
            },
        }
    }

    fn register(&mut self) -> bool {
        let Some(j) = self.pick(self.sets.len()) else { return false };
        let (s, set) = &self.sets[j];
        let price = self.rng.gen_range(1..30) * 50;
        let short = self.rng.gen_bool(0.1);
        let deposit = MarketConfig::min_deposit(price) - short as Amount;
        let listing = SellerListing {
            seller: seller(*s),
            endpoint: "fuzz".into(),
            description: format!("fuzz set {j}"),
            size: set.data_len as u64,
            n: set.n,
            r_d: set.r_d(),
            r_ed: set.r_ed(),
            price,
            unit_price: self.rng.gen_range(0..3) * 25,
            deposit,
        };
        match self.m.ssmc_register_seller(listing) {
            Ok(id) => {
                self.records.push((id, j));
                true
            }
            Err(_) => false,
        }
    }

    fn expose_at(&mut self, r: usize) -> bool {
        let (id, j) = self.records[r];
        let Ok(indices) = self.m.exposure_indices(id) else { return false };
        let set = &self.sets[j].1;
        let mut pieces: Vec<ExposedPiece> = indices
            .into_iter()
            .map(|i| ExposedPiece {
                index: i,
                data: set.plain_shards[i].clone(),
                proof_plain: set.proof_plain(i).unwrap(),
                enc: set.enc_shards[i].clone(),
                proof_enc: set.proof_enc(i).unwrap(),
            })
            .collect();
        if self.rng.gen_bool(0.15) {
            pieces[0].data.push(0xff);
        }
        self.m.ssmc_expose(id, pieces).is_ok()
    }

    fn register_provider_at(&mut self, r: usize) -> bool {
        let (id, j) = self.records[r];
        let p = provider(self.rng.gen_range(0..2));
        let owner = if self.rng.gen_bool(0.9) { seller(self.sets[j].0) } else { seller(1 - self.sets[j].0) };
        self.m.ssmc_register_provider(p, "fuzz-sp", id).is_ok() && self.m.ssmc_confirm_provider(owner, p, id).is_ok()
    }

    fn place_order_at(&mut self, r: usize) -> bool {
        let (id, j) = self.records[r];
        let Ok(rec) = self.m.record(id) else { return false };
        let cost = rec.total_cost() as i64;
        let offered = (cost + self.rng.gen_range(-60..60)).max(1) as Amount;
        let c = self.rng.gen_range(0..2);
        match self.m.scmc_place_order(consumer(c), id, offered) {
            Ok(oid) => {
                let mut seed = [0u8; 32];
                self.rng.fill_bytes(&mut seed);
                self.orders.push(OrderCtx { id: oid, pair: pk_keygen(&seed), set: j, packages: BTreeMap::new() });
                true
            }
            Err(_) => false,
        }
    }

    fn select_at(&mut self, o: usize) -> bool {
        let id = self.orders[o].id;
        let n = self.sets[self.orders[o].set].1.n;
        let assignments = if n > 1 && self.rng.gen_bool(0.5) {
            let cut = self.rng.gen_range(1..n);
            vec![
                Assignment { provider: provider(0), indices: (0..cut).collect() },
                Assignment { provider: provider(1), indices: (cut..n).collect() },
            ]
        } else {
            let cover = if self.rng.gen_bool(0.9) { n } else { n - 1 };
            vec![Assignment { provider: provider(self.rng.gen_range(0..2)), indices: (0..cover).collect() }]
        };
        self.m.scmc_select(id, assignments).is_ok()
    }

    fn post_root_at(&mut self, o: usize) -> bool {
        let p = provider(self.rng.gen_range(0..2));
        let fake = self.rng.gen_bool(0.2);
        let set = &self.sets[self.orders[o].set].1;
        let shards: Vec<Vec<u8>> =
            if fake { set.enc_shards.iter().map(|s| vec![0xab; s.len()]).collect() } else { set.enc_shards.clone() };
        let mut k = [0u8; 32];
        self.rng.fill_bytes(&mut k);
        let pkg = provider_wrap(&shards, SymKey(k), &Meter::disabled()).unwrap();
        let ok = self.m.scmc_post_serving_root(self.orders[o].id, p, pkg.r_eed()).is_ok();
        if ok {
            self.orders[o].packages.insert(p, pkg);
        }
        ok
    }

    fn open_at(&mut self, o: usize) -> bool {
        self.m.cpc_open(self.orders[o].id).is_ok()
    }

    fn post_pubkey_at(&mut self, o: usize) -> bool {
        let pk = self.orders[o].pair.public;
        self.m.cpc_post_pubkey(self.orders[o].id, pk).is_ok()
    }

    fn payee(&mut self, o: usize) -> Payee {
        let assigned: Vec<Address> = self
            .m
            .order(self.orders[o].id)
            .map(|ord| ord.assignments.iter().map(|a| a.provider).collect())
            .unwrap_or_default();
        match self.rng.gen_range(0..=assigned.len()) {
            0 => Payee::Seller,
            i => Payee::Provider(assigned[i - 1]),
        }
    }

    fn post_key_at(&mut self, o: usize) -> bool {
        let payee = self.payee(o);
        let good = self.rng.gen_bool(0.7);
        let key = match payee {
            _ if !good => {
                let mut k = [0u8; 32];
                self.rng.fill_bytes(&mut k);
                SymKey(k)
            }
            Payee::Seller => master(self.sets[self.orders[o].set].0),
            Payee::Provider(p) => match self.orders[o].packages.get(&p) {
                Some(pkg) => pkg.key,
                None => return false,
            },
        };
        let sealed = pk_encrypt(&self.orders[o].pair.public, key.as_bytes(), &mut self.rng).unwrap();
        self.m.cpc_post_key(self.orders[o].id, payee, sealed).is_ok()
    }

    fn appeal_at(&mut self, o: usize) -> bool {
        let payee = self.payee(o);
        let set = &self.sets[self.orders[o].set].1;
        let i = self.rng.gen_range(0..set.n);
        let evidence = match payee {
            Payee::Seller => AppealEvidence {
                index: i,
                shard: set.enc_shards[i].clone(),
                shard_proof: set.proof_enc(i).unwrap(),
                content_proof: set.proof_plain(i).unwrap(),
            },
            Payee::Provider(p) => match self.orders[o].packages.get(&p) {
                Some(pkg) => AppealEvidence {
                    index: i,
                    shard: pkg.eed_shards[i].clone(),
                    shard_proof: pkg.proof(i).unwrap(),
                    content_proof: set.proof_enc(i).unwrap(),
                },
                None => return false,
            },
        };
        let private = if self.rng.gen_bool(0.9) { self.orders[o].pair.private } else { pk_keygen(&[9; 32]).private };
        let ok = self.m.cpc_appeal(self.orders[o].id, payee, &private, &evidence).is_ok();
        self.stats.appeals += ok as usize;
        ok
    }

    fn settle_at(&mut self, o: usize) -> bool {
        self.m.cpc_settle(self.orders[o].id).is_ok()
    }

    fn withdraw(&mut self) -> bool {
        let Some(r) = self.pick(self.records.len()) else { return false };
        let (id, j) = self.records[r];
        self.m.ssmc_withdraw(seller(self.sets[j].0), id).is_ok()
    }

    /// Every accounting identity that must hold between steps.
    fn check(&self) -> Result<(), String> {
        let ledger = &self.m.ledger;
        if ledger.total_supply() != self.supply || ledger.total_balances() != self.supply {
            return Err(format!(
                "supply drifted: {} / {} vs {}",
                ledger.total_supply(),
                ledger.total_balances(),
                self.supply
            ));
        }
        let contracts = [ssmc_address(), cpc_address(), fairtrade_core::contracts::scmc_address()];
        for e in ledger.log() {
            if let LogEntry::Transfer { from, status: TransferStatus::Rejected, memo, amount, .. } = e {
                if contracts.contains(from) {
                    return Err(format!("contract overdraft: {memo} for {amount}"));
                }
            }
        }
        let mut held = 0;
        for escrow in self.m.escrows() {
            let order = self.m.order(escrow.order_id).map_err(|e| e.to_string())?;
            let tranche_sum: Amount = escrow.tranches.iter().map(|t| t.amount).sum();
            if tranche_sum != escrow.escrowed || escrow.escrowed != order.escrowed {
                return Err(format!("order {}: tranches {tranche_sum} vs escrow {}", order.order_id, escrow.escrowed));
            }
            let paid_out: Amount = escrow.tranches.iter().filter(|t| t.disbursed.is_some()).map(|t| t.amount).sum();
            if paid_out != escrow.disbursed || escrow.disbursed > escrow.escrowed {
                return Err(format!("order {}: disbursed {} of {}", order.order_id, escrow.disbursed, escrow.escrowed));
            }
            if order.status == OrderStatus::Closed && escrow.disbursed != escrow.escrowed {
                return Err(format!(
                    "closed order {}: in {} != out {}",
                    order.order_id, escrow.escrowed, escrow.disbursed
                ));
            }
            held += escrow.escrowed - escrow.disbursed;
        }
        if ledger.balance(&cpc_address()) != held {
            return Err(format!("CPC holds {} but open escrows total {held}", ledger.balance(&cpc_address())));
        }
        Ok(())
    }
}

/// Runs one random sequence; the error names the first broken identity.
pub fn run_sequence(seed: u64, len: usize) -> Result<FuzzStats, String> {
    let mut w = World::new(seed);
    for step in 0..len {
        let ok = w.step();
        w.stats.ops += 1;
        w.stats.accepted += ok as usize;
        w.check().map_err(|e| format!("seed {seed}, step {step}: {e}"))?;
    }
    w.stats.closed_orders = w.m.orders().filter(|o| o.status == OrderStatus::Closed).count();
    Ok(w.stats)
}
