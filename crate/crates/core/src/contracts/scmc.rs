use serde_json::json;

use super::{
    scmc_address, status_name, Assignment, ContractError, DataId, Market, Order, OrderId, OrderStatus, RecordStatus,
};
use crate::ledger::{Address, Amount};
use crate::merkle::Digest;

impl Market {
    /// Escrows `tokens` for `data_id`. An order short of
    /// `price + n·unit_price` is discarded: its tokens are refunded, or kept
    /// by SCMC when `strict_forfeit` is set.
    pub fn scmc_place_order(
        &mut self,
        consumer: Address,
        data_id: DataId,
        tokens: Amount,
    ) -> Result<OrderId, ContractError> {
        let record = self.record(data_id)?;
        if record.status != RecordStatus::Live {
            return Err(ContractError::WrongStatus(format!("record {}", status_name(&record.status))));
        }
        let required = record.total_cost();
        if tokens > 0 {
            self.ledger.transfer(consumer, scmc_address(), tokens, "scmc.escrow")?;
        }
        if tokens < required {
            let forfeited = self.config.strict_forfeit;
            if !forfeited && tokens > 0 {
                self.ledger.transfer(scmc_address(), consumer, tokens, "scmc.refund")?;
            }
            self.ledger.emit(
                "scmc.order_discarded",
                json!({
                    "consumer": consumer,
                    "data_id": data_id,
                    "offered": tokens,
                    "required": required,
                    "forfeited": forfeited,
                }),
            );
            return Err(ContractError::InsufficientTokens { required, offered: tokens });
        }
        if tokens > required {
            self.ledger.transfer(scmc_address(), consumer, tokens - required, "scmc.change")?;
        }
        let order_id = self.next_order_id;
        self.next_order_id += 1;
        self.orders.insert(
            order_id,
            Order {
                order_id,
                consumer,
                data_id,
                escrowed: required,
                assignments: Vec::new(),
                serving_roots: Vec::new(),
                status: OrderStatus::Funded,
            },
        );
        self.ledger.emit(
            "scmc.order_funded",
            json!({ "order_id": order_id, "consumer": consumer, "data_id": data_id, "escrowed": required }),
        );
        Ok(order_id)
    }

    /// Records which provider serves which shards. Indices listed by more
    /// than one provider stay with the first one listed.
    pub fn scmc_select(&mut self, order_id: OrderId, assignments: Vec<Assignment>) -> Result<(), ContractError> {
        let order = self.order(order_id)?;
        if order.status != OrderStatus::Funded {
            return Err(ContractError::WrongStatus(format!("order {}", status_name(&order.status))));
        }
        let record = self.record(order.data_id)?;
        let n = record.n;
        for a in &assignments {
            match record.provider(&a.provider) {
                Some(sp) if sp.confirmed => {}
                _ => return Err(ContractError::UnconfirmedProvider(a.provider)),
            }
            if a.indices.iter().any(|&i| i >= n) {
                return Err(ContractError::InvalidInput("shard index out of range"));
            }
        }
        let mut taken = vec![false; n];
        let mut deduped: Vec<Assignment> = Vec::new();
        for a in assignments {
            let mut indices: Vec<usize> = Vec::new();
            for i in a.indices {
                if !taken[i] {
                    taken[i] = true;
                    indices.push(i);
                }
            }
            indices.sort_unstable();
            match deduped.iter_mut().find(|d| d.provider == a.provider) {
                Some(existing) => {
                    existing.indices.extend(indices);
                    existing.indices.sort_unstable();
                }
                None => deduped.push(Assignment { provider: a.provider, indices }),
            }
        }
        if let Some(missing) = taken.iter().position(|t| !t) {
            return Err(ContractError::IncompleteCover(missing));
        }
        deduped.retain(|a| !a.indices.is_empty());
        self.ledger.emit(
            "scmc.select",
            json!({
                "order_id": order_id,
                "assignments": deduped.iter().map(|a| json!({ "provider": a.provider, "indices": a.indices })).collect::<Vec<_>>(),
            }),
        );
        let order = self.order_mut(order_id)?;
        order.assignments = deduped;
        order.status = OrderStatus::Downloading;
        Ok(())
    }

    /// A selected provider commits to the root of what it serves for this order.
    pub fn scmc_post_serving_root(
        &mut self,
        order_id: OrderId,
        provider: Address,
        r_eed: Digest,
    ) -> Result<(), ContractError> {
        let order = self.order_mut(order_id)?;
        if order.status != OrderStatus::Downloading {
            return Err(ContractError::WrongStatus(format!("order {}", status_name(&order.status))));
        }
        if !order.assignments.iter().any(|a| a.provider == provider) {
            return Err(ContractError::UnknownProvider);
        }
        if order.serving_root(&provider).is_some() {
            return Err(ContractError::DoublePost);
        }
        order.serving_roots.push((provider, r_eed));
        self.ledger.emit("scmc.serving_root", json!({ "order_id": order_id, "provider": provider, "r_eed": r_eed }));
        Ok(())
    }
}
