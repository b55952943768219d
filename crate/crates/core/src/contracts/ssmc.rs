use serde_json::json;

use super::{
    ssmc_address, status_name, ContractError, DataId, DataRecord, ExposeVerdict, ExposedPiece, KeywordMode, Listing,
    Market, MarketConfig, OrderStatus, RecordStatus, RejectReason, SellerListing, SpRecord,
};
use crate::ledger::{exposure_count, rand_indices, Address};
use crate::merkle::{mvrfy, Digest};
use crate::meter::Op;

impl Market {
    pub fn ssmc_register_seller(&mut self, listing: SellerListing) -> Result<DataId, ContractError> {
        if listing.n == 0 || listing.size == 0 {
            return Err(ContractError::InvalidInput("size and shard count must be positive"));
        }
        let required = MarketConfig::min_deposit(listing.price);
        if listing.deposit < required {
            return Err(ContractError::InsufficientDeposit { required, offered: listing.deposit });
        }
        if self.root_taken(&listing.r_d) {
            self.ledger.emit("ssmc.register_rejected", json!({ "r_d": listing.r_d, "reason": "duplicate_root" }));
            return Err(ContractError::DuplicateRoot);
        }
        if listing.deposit > 0 {
            self.ledger.transfer(listing.seller, ssmc_address(), listing.deposit, "ssmc.deposit")?;
        }
        let data_id = self.next_data_id;
        self.next_data_id += 1;
        let record = DataRecord {
            data_id,
            seller: listing.seller,
            endpoint: listing.endpoint,
            description: listing.description,
            size: listing.size,
            n: listing.n,
            r_d: listing.r_d,
            r_ed: listing.r_ed,
            price: listing.price,
            unit_price: listing.unit_price,
            deposit: listing.deposit,
            deposit_held: listing.deposit > 0,
            registered_at: self.ledger.next_height(),
            exposed_indices: Vec::new(),
            exposed: Vec::new(),
            exposed_ok: false,
            providers: Vec::new(),
            status: RecordStatus::Registered,
        };
        self.ledger.emit(
            "ssmc.register",
            json!({
                "data_id": data_id,
                "seller": record.seller,
                "r_d": record.r_d,
                "r_ed": record.r_ed,
                "n": record.n,
                "price": record.price,
                "unit_price": record.unit_price,
                "deposit": record.deposit,
            }),
        );
        self.records.insert(data_id, record);
        Ok(data_id)
    }

    fn root_taken(&self, r_d: &Digest) -> bool {
        self.records.values().any(|r| &r.r_d == r_d && matches!(r.status, RecordStatus::Exposed | RecordStatus::Live))
    }

    /// Number of pieces a record with `n` shards must expose.
    pub fn exposure_count_for(&self, n: usize) -> usize {
        self.config.exposure_count.unwrap_or_else(|| exposure_count(n)).clamp(1, n)
    }

    /// Indices the seller must expose, fixed by the block after registration.
    pub fn exposure_indices(&self, data_id: DataId) -> Result<Vec<usize>, ContractError> {
        let record = self.record(data_id)?;
        let seed = self.ledger.seed_at(record.registered_at + 1).map_err(|_| ContractError::SeedNotReady)?;
        Ok(rand_indices(&seed, record.n, self.exposure_count_for(record.n))?)
    }

    pub fn ssmc_expose(&mut self, data_id: DataId, pieces: Vec<ExposedPiece>) -> Result<ExposeVerdict, ContractError> {
        let record = self.record(data_id)?;
        if record.status != RecordStatus::Registered {
            return Err(ContractError::WrongStatus(format!("record {}", status_name(&record.status))));
        }
        let expected = self.exposure_indices(data_id)?;
        let submitted: Vec<usize> = pieces.iter().map(|p| p.index).collect();
        if submitted != expected {
            return Err(ContractError::WrongIndices);
        }

        let verdict = self.judge_exposure(record, &pieces);
        let record = self.records.get_mut(&data_id).expect("checked above");
        record.exposed_indices = expected;
        match verdict {
            ExposeVerdict::Accepted => {
                for p in &pieces {
                    self.piece_index.insert(Digest::of(&p.data), data_id);
                }
                record.exposed = pieces;
                record.exposed_ok = true;
                record.status = RecordStatus::Exposed;
            }
            ExposeVerdict::Rejected(_) => {
                // The deposit stays with SSMC.
                record.deposit_held = false;
                record.status = RecordStatus::Rejected;
            }
        }
        self.ledger.emit("ssmc.expose", json!({ "data_id": data_id, "verdict": verdict }));
        Ok(verdict)
    }

    fn judge_exposure(&self, record: &DataRecord, pieces: &[ExposedPiece]) -> ExposeVerdict {
        if self.root_taken(&record.r_d) {
            return ExposeVerdict::Rejected(RejectReason::DuplicateRoot);
        }
        for p in pieces {
            self.meter.record(Op::ProofVerify);
            if !mvrfy(p.index, &record.r_d, &p.data, &p.proof_plain) {
                return ExposeVerdict::Rejected(RejectReason::ProofFailure);
            }
            self.meter.record(Op::ProofVerify);
            if !mvrfy(p.index, &record.r_ed, &p.enc, &p.proof_enc) {
                return ExposeVerdict::Rejected(RejectReason::ProofFailure);
            }
        }
        let collides = pieces
            .iter()
            .any(|p| matches!(self.piece_index.get(&Digest::of(&p.data)), Some(&other) if other != record.data_id));
        if collides {
            return ExposeVerdict::Rejected(RejectReason::DuplicatePiece);
        }
        ExposeVerdict::Accepted
    }

    /// Registers `provider` as a server for `data_id`. Repeating it is a no-op.
    pub fn ssmc_register_provider(
        &mut self,
        provider: Address,
        endpoint: &str,
        data_id: DataId,
    ) -> Result<(), ContractError> {
        let record = self.record_mut(data_id)?;
        if !matches!(record.status, RecordStatus::Exposed | RecordStatus::Live) {
            return Err(ContractError::WrongStatus(format!("record {}", status_name(&record.status))));
        }
        if record.provider(&provider).is_some() {
            return Ok(());
        }
        record.providers.push(SpRecord { provider, endpoint: endpoint.to_string(), data_id, confirmed: false });
        self.ledger.emit(
            "ssmc.provider_registered",
            json!({ "data_id": data_id, "provider": provider, "endpoint": endpoint }),
        );
        Ok(())
    }

    pub fn ssmc_confirm_provider(
        &mut self,
        seller: Address,
        provider: Address,
        data_id: DataId,
    ) -> Result<(), ContractError> {
        let record = self.record_mut(data_id)?;
        if record.seller != seller {
            return Err(ContractError::NotSeller);
        }
        if !matches!(record.status, RecordStatus::Exposed | RecordStatus::Live) {
            return Err(ContractError::WrongStatus(format!("record {}", status_name(&record.status))));
        }
        let sp = record.providers.iter_mut().find(|p| p.provider == provider).ok_or(ContractError::UnknownProvider)?;
        sp.confirmed = true;
        record.status = RecordStatus::Live;
        self.ledger.emit("ssmc.provider_confirmed", json!({ "data_id": data_id, "provider": provider }));
        Ok(())
    }

    /// Live records whose description matches `keyword`.
    pub fn match_products(&self, keyword: &str) -> Vec<Listing> {
        let needle = keyword.to_lowercase();
        self.records
            .values()
            .filter(|r| r.status == RecordStatus::Live)
            .filter(|r| match self.config.keyword_mode {
                KeywordMode::Substring => r.description.to_lowercase().contains(&needle),
                KeywordMode::Exact => r.description == keyword,
            })
            .map(|r| Listing {
                data_id: r.data_id,
                description: r.description.clone(),
                price: r.price,
                unit_price: r.unit_price,
                size: r.size,
                n: r.n,
                r_d: r.r_d,
                providers: r
                    .providers
                    .iter()
                    .filter(|p| p.confirmed)
                    .map(|p| (p.provider, p.endpoint.clone()))
                    .collect(),
            })
            .collect()
    }

    /// Returns the deposit to the seller once no order on the record is open.
    pub fn ssmc_withdraw(&mut self, seller: Address, data_id: DataId) -> Result<(), ContractError> {
        let record = self.record(data_id)?;
        if record.seller != seller {
            return Err(ContractError::NotSeller);
        }
        let busy = self.orders.values().any(|o| o.data_id == data_id && o.status != OrderStatus::Closed);
        if !record.deposit_held || busy {
            return Err(ContractError::DepositLocked);
        }
        let amount = record.deposit;
        self.ledger.transfer(ssmc_address(), seller, amount, "ssmc.deposit_return")?;
        self.record_mut(data_id)?.deposit_held = false;
        self.ledger.emit("ssmc.withdraw", json!({ "data_id": data_id, "amount": amount }));
        Ok(())
    }
}
