use std::sync::Arc;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::synth::synthesize;
use super::transport::{fetch, ProviderServer, ShardFrame};
use super::{mean, median, stddev, BenchConfig, HarnessError, MIB};
use crate::contracts::{Assignment, ExposeVerdict, ExposedPiece, Market, MarketConfig, OrderId, Payee, SellerListing};
use crate::crypto::{self, pk_keygen, KeyPair, SymKey};
use crate::ledger::{tokens, Address, Amount};
use crate::merkle::{mproof, mvrfy, Digest};
use crate::meter::{Meter, Op, Phase, PhaseCounters};
use crate::sharding::{self, ProviderPackage, ShardSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    /// Concurrent fetch plus proof checks, seconds.
    pub wall_secs: f64,
    /// Data size over wall time, MiB/s.
    pub throughput_mib_s: f64,
    /// Both decryption layers and the final comparison, seconds.
    pub decrypt_secs: f64,
    pub recovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub shards: usize,
    pub samples: Vec<BenchSample>,
    pub median_secs: f64,
    pub mean_secs: f64,
    pub stddev_secs: f64,
    /// Size over the median wall time, MiB/s.
    pub throughput_mib_s: f64,
    /// Operations of the first repetition, including setup.
    pub counters: PhaseCounters,
    /// Every repetition recovered the original data.
    pub recovered: bool,
    /// Base units paid out by CPC at settlement.
    pub settled: Amount,
}

struct Provider {
    address: Address,
    key: SymKey,
    r_eed: Digest,
    shards: Arc<Vec<Vec<u8>>>,
    proofs: Arc<Vec<Vec<u8>>>,
    indices: Vec<usize>,
}

/// Splits `0..n` into `k` contiguous ranges whose sizes differ by at most one.
pub(super) fn ranges(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..k).map(|p| (p * n / k..(p + 1) * n / k).collect()).collect()
}

/// Runs one honest trade and times the parallel download `repetitions` times.
///
/// Every provider stores a full copy wrapped under its own key and serves a
/// disjoint range. The timed part is fetching all ranges concurrently and
/// checking each shard against its provider's serving root.
pub fn bench_download(config: &BenchConfig) -> Result<BenchReport, HarnessError> {
    config.validate()?;
    let meter = Meter::new();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let data = synthesize(config.data_type, config.size as usize, config.seed);
    let seller = Address::from_label("seller");
    let consumer = Address::from_label("consumer");
    let provider_addrs: Vec<Address> =
        (0..config.providers).map(|p| Address::from_label(&format!("provider-{p}"))).collect();

    // Upload.
    meter.set_phase(Phase::Upload);
    let master = SymKey::random(&mut rng);
    let goods = sharding::shard_encrypt_metered(&master, &data, config.slot, &meter)?;
    let n = goods.n;
    let price = tokens(20);
    let unit_price = (tokens(4) / n as Amount).max(1);
    let mut allocations = vec![(seller, tokens(100)), (consumer, price + unit_price * n as Amount)];
    allocations.extend(provider_addrs.iter().map(|a| (*a, tokens(20))));
    let mut market = Market::new(MarketConfig::default(), &allocations).with_meter(meter.clone());
    let data_id = market.ssmc_register_seller(SellerListing {
        seller,
        endpoint: "seller.local:7000".into(),
        description: format!("Synthetic {} payload", config.data_type),
        size: data.len() as u64,
        n,
        r_d: goods.r_d(),
        r_ed: goods.r_ed(),
        price,
        unit_price,
        deposit: MarketConfig::min_deposit(price),
    })?;
    market.mine_n(2);
    let pieces = expose(&market, data_id, &goods)?;
    if market.ssmc_expose(data_id, pieces)? != ExposeVerdict::Accepted {
        return Err(HarnessError::Protocol("honest exposure rejected".into()));
    }
    for (p, addr) in provider_addrs.iter().enumerate() {
        market.ssmc_register_provider(*addr, &format!("provider.local:{}", 7100 + p), data_id)?;
        market.ssmc_confirm_provider(seller, *addr, data_id)?;
    }
    market.mine();

    // Order and serving setup.
    meter.set_phase(Phase::Download);
    let order_id = market.scmc_place_order(consumer, data_id, price + unit_price * n as Amount)?;
    let mut providers = Vec::with_capacity(config.providers);
    for (addr, indices) in provider_addrs.iter().zip(ranges(n, config.providers)) {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let ProviderPackage { eed_shards, tree_eed, key } =
            sharding::provider_wrap(&goods.enc_shards, sharding::provider_key(&seed), &meter)?;
        let proofs = (0..n).map(|i| mproof(&tree_eed, i).map(|p| p.to_bytes())).collect::<Result<Vec<_>, _>>()?;
        providers.push(Provider {
            address: *addr,
            key,
            r_eed: tree_eed.root(),
            shards: Arc::new(eed_shards),
            proofs: Arc::new(proofs),
            indices,
        });
    }
    market.scmc_select(
        order_id,
        providers.iter().map(|p| Assignment { provider: p.address, indices: p.indices.clone() }).collect(),
    )?;
    for p in &providers {
        market.scmc_post_serving_root(order_id, p.address, p.r_eed)?;
    }
    market.cpc_open(order_id)?;
    let mut kp_seed = [0u8; 32];
    rng.fill_bytes(&mut kp_seed);
    let pair = pk_keygen(&kp_seed);
    market.cpc_post_pubkey(order_id, pair.public)?;
    market.mine();

    let servers = providers
        .iter()
        .map(|p| ProviderServer::spawn(p.shards.clone(), p.proofs.clone(), config.bandwidth))
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let quiet = Meter::disabled();
    let mut samples = Vec::with_capacity(config.repetitions);
    let mut keys: Option<(Vec<SymKey>, SymKey)> = None;
    for rep in 0..config.repetitions {
        let m = if rep == 0 { &meter } else { &quiet };
        m.set_phase(Phase::Download);
        let t0 = Instant::now();
        let fetched = download(&servers, &providers, n)?;
        let wall_secs = t0.elapsed().as_secs_f64();
        m.record_n(Op::ProofVerify, n as u64);

        let (sp_keys, seller_key) = match &keys {
            Some(k) => k.clone(),
            None => {
                let k = release_keys(&mut market, order_id, &providers, &master, &pair, &mut rng, m)?;
                keys = Some(k.clone());
                k
            }
        };
        let t1 = Instant::now();
        let recovered = decrypt(&fetched, &providers, &sp_keys, &seller_key, &goods, &data, m)?;
        let decrypt_secs = t1.elapsed().as_secs_f64();
        samples.push(BenchSample {
            wall_secs,
            throughput_mib_s: config.size as f64 / MIB as f64 / wall_secs,
            decrypt_secs,
            recovered,
        });
    }
    for s in servers {
        s.shutdown();
    }

    market.mine_n(market.config.appeal_window + 1);
    let settled = market.cpc_settle(order_id)?.iter().map(|(_, _, a)| *a).sum();
    market.ssmc_withdraw(seller, data_id)?;

    let walls: Vec<f64> = samples.iter().map(|s| s.wall_secs).collect();
    let median_secs = median(&walls);
    Ok(BenchReport {
        config: config.clone(),
        shards: n,
        recovered: samples.iter().all(|s| s.recovered),
        median_secs,
        mean_secs: mean(&walls),
        stddev_secs: stddev(&walls),
        throughput_mib_s: config.size as f64 / MIB as f64 / median_secs,
        counters: meter.snapshot(),
        samples,
        settled,
    })
}

fn expose(
    market: &Market,
    data_id: crate::contracts::DataId,
    goods: &ShardSet,
) -> Result<Vec<ExposedPiece>, HarnessError> {
    market
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
        .collect()
}

/// Fetches every provider's range at once and checks each frame. The result
/// is indexed by shard.
fn download(servers: &[ProviderServer], providers: &[Provider], n: usize) -> Result<Vec<Vec<u8>>, HarnessError> {
    let results: Vec<Result<Vec<ShardFrame>, HarnessError>> = std::thread::scope(|s| {
        let handles: Vec<_> = servers
            .iter()
            .zip(providers)
            .map(|(server, p)| {
                let root = p.r_eed;
                s.spawn(move || {
                    let frames = fetch(server.addr(), &p.indices)?;
                    match frames.iter().find(|f| !mvrfy(f.index, &root, &f.shard, &f.proof)) {
                        Some(bad) => Err(HarnessError::Protocol(format!("shard {} fails its serving root", bad.index))),
                        None => Ok(frames),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("fetch thread panicked")).collect()
    });
    let mut out: Vec<Option<Vec<u8>>> = vec![None; n];
    for r in results {
        for f in r? {
            out[f.index] = Some(f.shard);
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| HarnessError::Protocol(format!("shard {i} missing"))))
        .collect()
}

/// Payees seal their keys to the consumer's public key through CPC.
fn release_keys(
    market: &mut Market,
    order_id: OrderId,
    providers: &[Provider],
    master: &SymKey,
    pair: &KeyPair,
    rng: &mut ChaCha20Rng,
    meter: &Meter,
) -> Result<(Vec<SymKey>, SymKey), HarnessError> {
    let open =
        |payee: Payee, key: &SymKey, rng: &mut ChaCha20Rng, market: &mut Market| -> Result<SymKey, HarnessError> {
            meter.record(Op::AsymEncrypt);
            let sealed = crypto::pk_encrypt(&pair.public, key.as_bytes(), rng)?;
            market.cpc_post_key(order_id, payee, sealed.clone())?;
            meter.record(Op::AsymDecrypt);
            let raw = crypto::pk_decrypt(&pair.private, &sealed)?;
            SymKey::from_slice(&raw).ok_or_else(|| HarnessError::Protocol("sealed key has wrong length".into()))
        };
    meter.set_phase(Phase::PayProvider);
    let mut sp_keys = Vec::with_capacity(providers.len());
    for p in providers {
        sp_keys.push(open(Payee::Provider(p.address), &p.key, rng, market)?);
    }
    meter.set_phase(Phase::PaySeller);
    let seller_key = open(Payee::Seller, master, rng, market)?;
    Ok((sp_keys, seller_key))
}

/// Removes both layers, checking each against its root.
fn decrypt(
    fetched: &[Vec<u8>],
    providers: &[Provider],
    sp_keys: &[SymKey],
    seller_key: &SymKey,
    goods: &ShardSet,
    data: &[u8],
    meter: &Meter,
) -> Result<bool, HarnessError> {
    let (r_ed, r_d): (Digest, Digest) = (goods.r_ed(), goods.r_d());
    let mut enc = vec![Vec::new(); fetched.len()];
    meter.set_phase(Phase::PayProvider);
    for (p, key) in providers.iter().zip(sp_keys) {
        for &i in &p.indices {
            meter.record(Op::SymDecrypt);
            let d = crypto::sym_decrypt_bytes(key, &fetched[i])?;
            meter.record(Op::ProofVerify);
            if !mvrfy(i, &r_ed, &d, &goods.proof_enc(i)?) {
                return Ok(false);
            }
            enc[i] = d;
        }
    }
    meter.set_phase(Phase::PaySeller);
    let mut plain = Vec::with_capacity(enc.len());
    for (i, d) in enc.iter().enumerate() {
        meter.record(Op::SymDecrypt);
        let p = sharding::decrypt_shard(seller_key, i, d)?;
        meter.record(Op::ProofVerify);
        if !mvrfy(i, &r_d, &p, &goods.proof_plain(i)?) {
            return Ok(false);
        }
        plain.push(p);
    }
    Ok(sharding::reassemble(&plain) == data)
}
