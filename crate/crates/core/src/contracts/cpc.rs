use serde_json::json;

use super::{
    cpc_address, scmc_address, status_name, AppealEvidence, ContractError, Disbursement, Escrow, Market, OrderId,
    OrderStatus, Payee, Tranche, Verdict,
};
use crate::crypto::{self, PrivateKey, PublicKey, SymKey};
use crate::ledger::Amount;
use crate::merkle::{mvrfy, Digest};
use crate::meter::Op;
use crate::sharding;

impl Market {
    /// Moves the order's escrow into CPC and splits it into per-payee tranches.
    pub fn cpc_open(&mut self, order_id: OrderId) -> Result<&Escrow, ContractError> {
        let order = self.order(order_id)?;
        if order.status != OrderStatus::Downloading {
            return Err(ContractError::WrongStatus(format!("order {}", status_name(&order.status))));
        }
        if self.escrows.contains_key(&order_id) {
            return Err(ContractError::DoublePost);
        }
        if let Some(a) = order.assignments.iter().find(|a| order.serving_root(&a.provider).is_none()) {
            return Err(ContractError::MissingServingRoot(a.provider));
        }
        let record = self.record(order.data_id)?;
        let mut tranches = vec![Tranche {
            payee: Payee::Seller,
            recipient: record.seller,
            amount: record.price,
            sealed_key: None,
            appeal_deadline: None,
            verdict: None,
            disbursed: None,
        }];
        for a in &order.assignments {
            tranches.push(Tranche {
                payee: Payee::Provider(a.provider),
                recipient: a.provider,
                amount: record.unit_price * a.indices.len() as Amount,
                sealed_key: None,
                appeal_deadline: None,
                verdict: None,
                disbursed: None,
            });
        }
        let escrowed = order.escrowed;
        debug_assert_eq!(escrowed, tranches.iter().map(|t| t.amount).sum::<Amount>());
        if escrowed > 0 {
            self.ledger.transfer(scmc_address(), cpc_address(), escrowed, "cpc.open")?;
        }
        let now = self.ledger.height();
        let escrow = Escrow {
            order_id,
            pubkey: None,
            opened_at: now,
            key_deadline: now + self.config.appeal_window,
            tranches,
            escrowed,
            disbursed: 0,
        };
        self.ledger.emit(
            "cpc.open",
            json!({ "order_id": order_id, "escrowed": escrowed, "key_deadline": escrow.key_deadline }),
        );
        Ok(self.escrows.entry(order_id).or_insert(escrow))
    }

    pub fn cpc_post_pubkey(&mut self, order_id: OrderId, pubkey: PublicKey) -> Result<(), ContractError> {
        let status = self.order(order_id)?.status;
        if status != OrderStatus::Downloading {
            return Err(ContractError::WrongStatus(format!("order {}", status_name(&status))));
        }
        if self.used_pubkeys.contains(&pubkey) {
            return Err(ContractError::PubKeyReused);
        }
        let escrow = self.escrow_mut(order_id)?;
        if escrow.pubkey.is_some() {
            return Err(ContractError::DoublePost);
        }
        escrow.pubkey = Some(pubkey);
        self.used_pubkeys.insert(pubkey);
        self.ledger.emit("cpc.pubkey", json!({ "order_id": order_id, "pubkey": pubkey }));
        Ok(())
    }

    /// A payee posts its decryption key sealed to the consumer's public key.
    pub fn cpc_post_key(&mut self, order_id: OrderId, payee: Payee, sealed: Vec<u8>) -> Result<(), ContractError> {
        let status = self.order(order_id)?.status;
        if status == OrderStatus::Closed {
            return Err(ContractError::AlreadyClosed);
        }
        let now = self.ledger.height();
        let window = self.config.appeal_window;
        let escrow = self.escrow_mut(order_id)?;
        if escrow.pubkey.is_none() {
            return Err(ContractError::NoPubKey);
        }
        let key_deadline = escrow.key_deadline;
        let tranche = escrow.tranches.iter_mut().find(|t| t.payee == payee).ok_or(ContractError::UnknownPayee)?;
        if tranche.sealed_key.is_some() || tranche.disbursed.is_some() {
            return Err(ContractError::DoublePost);
        }
        if now > key_deadline {
            return Err(ContractError::KeyDeadlinePassed);
        }
        tranche.sealed_key = Some(sealed);
        tranche.appeal_deadline = Some(now + window);
        let all_posted = escrow.tranches.iter().all(|t| t.sealed_key.is_some());
        self.ledger.emit("cpc.key", json!({ "order_id": order_id, "payee": payee, "appeal_deadline": now + window }));
        if all_posted {
            self.order_mut(order_id)?.status = OrderStatus::Settling;
        }
        Ok(())
    }

    /// Arbitrates one appeal and disburses the tranche at once: refunded to
    /// the consumer if upheld, paid to the payee if denied.
    pub fn cpc_appeal(
        &mut self,
        order_id: OrderId,
        payee: Payee,
        private_key: &PrivateKey,
        evidence: &AppealEvidence,
    ) -> Result<Verdict, ContractError> {
        let order = self.order(order_id)?;
        if order.status == OrderStatus::Closed {
            return Err(ContractError::AlreadyClosed);
        }
        let record = self.record(order.data_id)?;
        // Odd layers duplicate their last node, so a proof for index `n` can
        // hash up to the root; only indices of real shards count.
        if evidence.index >= record.n {
            return Err(ContractError::InvalidInput("evidence index out of range"));
        }
        let escrow = self.escrow(order_id)?;
        let idx = escrow.tranches.iter().position(|t| t.payee == payee).ok_or(ContractError::UnknownPayee)?;
        let tranche = &escrow.tranches[idx];
        if tranche.verdict.is_some() || tranche.disbursed.is_some() {
            return Err(ContractError::AlreadyAppealed);
        }
        let (Some(sealed), Some(deadline)) = (&tranche.sealed_key, tranche.appeal_deadline) else {
            return Err(ContractError::KeyNotPosted);
        };
        if self.ledger.height() > deadline {
            return Err(ContractError::LateAppeal);
        }
        if escrow.pubkey != Some(private_key.public()) {
            return Err(ContractError::PrivKeyMismatch);
        }
        let (auth_root, content_root) = match payee {
            Payee::Seller => (record.r_ed, record.r_d),
            Payee::Provider(p) => (order.serving_root(&p).ok_or(ContractError::UnknownPayee)?, record.r_ed),
        };
        let verdict = self.arbitrate(payee, sealed, private_key, evidence, &auth_root, &content_root);

        let escrow = self.escrow_mut(order_id)?;
        escrow.tranches[idx].verdict = Some(verdict);
        self.ledger.emit(
            "cpc.appeal",
            json!({ "order_id": order_id, "payee": payee, "index": evidence.index, "verdict": verdict }),
        );
        let outcome = match verdict {
            Verdict::Upheld => Disbursement::Refunded,
            Verdict::Denied => Disbursement::Paid,
        };
        self.disburse(order_id, idx, outcome)?;
        Ok(verdict)
    }

    fn arbitrate(
        &self,
        payee: Payee,
        sealed: &[u8],
        private_key: &PrivateKey,
        ev: &AppealEvidence,
        auth_root: &Digest,
        content_root: &Digest,
    ) -> Verdict {
        // Evidence that is not what the payee committed to proves nothing.
        self.meter.record(Op::ProofVerify);
        if !mvrfy(ev.index, auth_root, &ev.shard, &ev.shard_proof) {
            return Verdict::Denied;
        }
        self.meter.record(Op::AsymDecrypt);
        let key = match crypto::pk_decrypt(private_key, sealed).ok().and_then(|k| SymKey::from_slice(&k)) {
            Some(k) => k,
            None => return Verdict::Upheld,
        };
        self.meter.record(Op::SymDecrypt);
        let plain = match payee {
            Payee::Seller => sharding::decrypt_shard(&key, ev.index, &ev.shard),
            Payee::Provider(_) => crypto::sym_decrypt_bytes(&key, &ev.shard),
        };
        let Ok(plain) = plain else {
            return Verdict::Upheld;
        };
        self.meter.record(Op::ProofVerify);
        if mvrfy(ev.index, content_root, &plain, &ev.content_proof) {
            Verdict::Denied
        } else {
            Verdict::Upheld
        }
    }

    fn disburse(&mut self, order_id: OrderId, idx: usize, outcome: Disbursement) -> Result<(), ContractError> {
        let consumer = self.order(order_id)?.consumer;
        let escrow = self.escrow(order_id)?;
        let t = &escrow.tranches[idx];
        let (to, amount) = match outcome {
            Disbursement::Paid => (t.recipient, t.amount),
            Disbursement::Refunded => (consumer, t.amount),
        };
        let memo = match outcome {
            Disbursement::Paid => "cpc.pay",
            Disbursement::Refunded => "cpc.refund",
        };
        if amount > 0 {
            self.ledger.transfer(cpc_address(), to, amount, memo)?;
        }
        let escrow = self.escrow_mut(order_id)?;
        escrow.tranches[idx].disbursed = Some(outcome);
        escrow.disbursed += amount;
        Ok(())
    }

    /// Pays out or refunds every tranche whose window has elapsed and closes
    /// the order. Fails without side effects while any window is still open.
    pub fn cpc_settle(&mut self, order_id: OrderId) -> Result<Vec<(Payee, Disbursement, Amount)>, ContractError> {
        let status = self.order(order_id)?.status;
        if status == OrderStatus::Closed {
            return Err(ContractError::AlreadyClosed);
        }
        let now = self.ledger.height();
        let escrow = self
            .escrows
            .get(&order_id)
            .ok_or_else(|| ContractError::WrongStatus(format!("order {} without escrow", status_name(&status))))?;
        let mut plan = Vec::new();
        for (idx, t) in escrow.tranches.iter().enumerate() {
            if t.disbursed.is_some() {
                continue;
            }
            let outcome = match (t.sealed_key.is_some(), t.appeal_deadline) {
                (false, _) if now > escrow.key_deadline => Disbursement::Refunded,
                (true, Some(d)) if now > d => Disbursement::Paid,
                _ => return Err(ContractError::AppealWindowOpen),
            };
            plan.push((idx, t.payee, outcome, t.amount));
        }
        for &(idx, _, outcome, _) in &plan {
            self.disburse(order_id, idx, outcome)?;
        }
        self.order_mut(order_id)?.status = OrderStatus::Closed;
        let escrow = self.escrow(order_id)?;
        debug_assert_eq!(escrow.escrowed, escrow.disbursed);
        let summary: Vec<(Payee, Disbursement, Amount)> = plan.into_iter().map(|(_, p, o, a)| (p, o, a)).collect();
        self.ledger.emit(
            "cpc.settle",
            json!({
                "order_id": order_id,
                "disbursed": escrow.disbursed,
                "transfers": summary.iter().map(|(p, o, a)| json!({ "payee": p, "outcome": o, "amount": a })).collect::<Vec<_>>(),
            }),
        );
        Ok(summary)
    }
}
