//! The three contract state machines running on the simulated ledger.
//!
//! - SSMC lists data, checks exposure proofs and matches sellers with providers.
//! - SCMC takes consumer orders and records which provider serves which shard.
//! - CPC escrows payment, relays sealed keys and arbitrates appeals.
//!
//! Every operation is a synchronous transition on [`Market`]; tokens only move
//! through [`Ledger::transfer`], so the ledger log is a full audit trail.

mod cpc;
mod scmc;
mod ssmc;
mod types;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::crypto::PublicKey;
use crate::ledger::{Address, Amount, Ledger};
use crate::merkle::Digest;
use crate::meter::Meter;

pub use types::*;

pub const SSMC_LABEL: &str = "contract:ssmc";
pub const SCMC_LABEL: &str = "contract:scmc";
pub const CPC_LABEL: &str = "contract:cpc";

pub fn ssmc_address() -> Address {
    Address::from_label(SSMC_LABEL)
}

pub fn scmc_address() -> Address {
    Address::from_label(SCMC_LABEL)
}

pub fn cpc_address() -> Address {
    Address::from_label(CPC_LABEL)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Market {
    pub ledger: Ledger,
    pub config: MarketConfig,
    records: BTreeMap<DataId, DataRecord>,
    orders: BTreeMap<OrderId, Order>,
    escrows: BTreeMap<OrderId, Escrow>,
    /// Hash of every accepted exposed plaintext piece, for duplicate detection.
    piece_index: BTreeMap<Digest, DataId>,
    used_pubkeys: BTreeSet<PublicKey>,
    next_data_id: DataId,
    next_order_id: OrderId,
    #[serde(skip)]
    meter: Meter,
}

impl Market {
    pub fn new(config: MarketConfig, allocations: &[(Address, Amount)]) -> Market {
        Market {
            ledger: Ledger::genesis(allocations),
            config,
            records: BTreeMap::new(),
            orders: BTreeMap::new(),
            escrows: BTreeMap::new(),
            piece_index: BTreeMap::new(),
            used_pubkeys: BTreeSet::new(),
            next_data_id: 1,
            next_order_id: 1,
            meter: Meter::disabled(),
        }
    }

    pub fn with_meter(mut self, meter: Meter) -> Market {
        self.meter = meter;
        self
    }

    pub fn set_meter(&mut self, meter: Meter) {
        self.meter = meter;
    }

    pub fn meter(&self) -> &Meter {
        &self.meter
    }

    pub fn record(&self, id: DataId) -> Result<&DataRecord, ContractError> {
        self.records.get(&id).ok_or(ContractError::UnknownData(id))
    }

    pub fn records(&self) -> impl Iterator<Item = &DataRecord> {
        self.records.values()
    }

    pub fn order(&self, id: OrderId) -> Result<&Order, ContractError> {
        self.orders.get(&id).ok_or(ContractError::UnknownOrder(id))
    }

    pub fn orders(&self) -> impl Iterator<Item = &Order> {
        self.orders.values()
    }

    pub fn escrow(&self, id: OrderId) -> Result<&Escrow, ContractError> {
        self.escrows.get(&id).ok_or(ContractError::UnknownOrder(id))
    }

    pub fn escrows(&self) -> impl Iterator<Item = &Escrow> {
        self.escrows.values()
    }

    pub fn balance(&self, who: &Address) -> Amount {
        self.ledger.balance(who)
    }

    pub fn mine(&mut self) -> u64 {
        self.ledger.mine_block(Vec::new()).height
    }

    pub fn mine_n(&mut self, count: u64) -> u64 {
        self.ledger.mine_empty(count);
        self.ledger.height()
    }

    fn record_mut(&mut self, id: DataId) -> Result<&mut DataRecord, ContractError> {
        self.records.get_mut(&id).ok_or(ContractError::UnknownData(id))
    }

    fn order_mut(&mut self, id: OrderId) -> Result<&mut Order, ContractError> {
        self.orders.get_mut(&id).ok_or(ContractError::UnknownOrder(id))
    }

    fn escrow_mut(&mut self, id: OrderId) -> Result<&mut Escrow, ContractError> {
        self.escrows.get_mut(&id).ok_or(ContractError::UnknownOrder(id))
    }
}

fn status_name<T: Serialize>(status: &T) -> String {
    serde_json::to_value(status).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_else(|| "unknown".into())
}
