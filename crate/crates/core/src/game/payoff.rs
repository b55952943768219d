use serde::{Deserialize, Serialize};

use super::table::{parse_table, Lin, SymbolicPayoff, REFERENCE_TABLE};
use super::{check_admissible, GameError, PayoffVector};
use crate::actors::{ConsumerStrategy, ProviderStrategy, SellerStrategy, StrategyProfile};

/// Strategy costs and trade terms, in whole tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    pub price: i64,
    pub fee: i64,
    /// What complete, usable data is worth to the consumer.
    pub utility: i64,
}

impl CostTable {
    pub const STANDARD: CostTable = CostTable { price: 20, fee: 4, utility: 20 };

    pub fn seller_cost(&self, s: SellerStrategy) -> i64 {
        s.cost()
    }

    pub fn provider_cost(&self, p: ProviderStrategy) -> i64 {
        p.cost()
    }

    /// Amount the consumer pays, symbolic in `x` and `y`.
    pub fn consumer_payment(&self, c: ConsumerStrategy) -> Lin {
        let to_seller = if c.pays_seller_fully() { Lin::c(self.price) } else { Lin::x() };
        let to_provider = if c.pays_provider_fully() { Lin::c(self.fee) } else { Lin::y() };
        to_seller + to_provider
    }

    /// Utility the consumer books in the raw table. A consumer who pays
    /// neither side in full is modelled as never using the data.
    fn raw_utility(&self, c: ConsumerStrategy) -> i64 {
        if c == ConsumerStrategy::H {
            0
        } else {
            self.utility
        }
    }
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable::STANDARD
    }
}

/// Raw payoffs: each payee keeps whatever it is paid, the consumer only
/// gains when both payees are honest.
pub fn raw_payoff_symbolic(profile: StrategyProfile) -> SymbolicPayoff {
    let t = CostTable::STANDARD;
    let StrategyProfile { seller, consumer, provider } = profile;
    let seller_paid = if consumer.pays_seller_fully() { Lin::c(t.price) } else { Lin::x() };
    let provider_paid = if consumer.pays_provider_fully() { Lin::c(t.fee) } else { Lin::y() };
    let consumer_u = if seller.honest() && provider.honest() {
        Lin::c(t.raw_utility(consumer)) - t.consumer_payment(consumer)
    } else {
        -Lin::c(t.price + t.fee)
    };
    SymbolicPayoff {
        seller: Lin::c(t.seller_cost(seller)) + seller_paid,
        consumer: consumer_u,
        provider: Lin::c(t.provider_cost(provider)) + provider_paid,
    }
}

pub fn raw_payoff(profile: StrategyProfile, x: i64, y: i64) -> PayoffVector {
    raw_payoff_symbolic(profile).eval(x, y)
}

/// Enforced payoff split into token flows, strategy costs and data utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnforcedPayoff {
    /// Net token movement per player once the order is closed.
    pub flows: PayoffVector,
    /// Strategy costs (the consumer's entry is always zero).
    pub costs: PayoffVector,
    /// Consumer's data utility, zero unless the data was recovered.
    pub utility: i64,
}

impl EnforcedPayoff {
    pub fn total(&self) -> PayoffVector {
        self.flows + self.costs + PayoffVector::new(0, self.utility, 0)
    }
}

/// Applies contract enforcement to a profile.
///
/// An underpaying consumer never funds the order: nothing is served, no
/// costs are incurred and the partial payment is forfeited. A funding
/// consumer appeals every bad tranche and gets it back, so a payee is paid
/// only when it played honestly, and the data is usable only when both did.
pub fn enforced_breakdown(profile: StrategyProfile, x: i64, y: i64) -> EnforcedPayoff {
    let t = CostTable::STANDARD;
    let StrategyProfile { seller, consumer, provider } = profile;
    if consumer != ConsumerStrategy::E {
        let paid = t.consumer_payment(consumer).eval(x, y);
        return EnforcedPayoff { flows: PayoffVector::new(0, -paid, 0), costs: PayoffVector::default(), utility: 0 };
    }
    let seller_paid = if seller.honest() { t.price } else { 0 };
    let provider_paid = if provider.honest() { t.fee } else { 0 };
    EnforcedPayoff {
        flows: PayoffVector::new(seller_paid, -(seller_paid + provider_paid), provider_paid),
        costs: PayoffVector::new(t.seller_cost(seller), 0, t.provider_cost(provider)),
        utility: if seller.honest() && provider.honest() { t.utility } else { 0 },
    }
}

pub fn enforced_payoff(profile: StrategyProfile, x: i64, y: i64) -> PayoffVector {
    enforced_breakdown(profile, x, y).total()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellMismatch {
    pub profile: StrategyProfile,
    pub expected: PayoffVector,
    pub actual: PayoffVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableReport {
    pub x: i64,
    pub y: i64,
    pub checked: usize,
    pub mismatches: Vec<CellMismatch>,
}

impl TableReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty() && self.checked == 64
    }
}

/// Compares [`raw_payoff`] with the transcribed table at `(x, y)`.
pub fn verify_table(x: i64, y: i64) -> Result<TableReport, GameError> {
    verify_table_against(&REFERENCE_TABLE, x, y)
}

pub fn verify_table_against(cells: &[(&str, &str)], x: i64, y: i64) -> Result<TableReport, GameError> {
    check_admissible(x, y)?;
    let parsed = parse_table(cells)?;
    let mismatches = parsed
        .iter()
        .filter_map(|(profile, cell)| {
            let expected = cell.eval(x, y);
            let actual = raw_payoff(*profile, x, y);
            (expected != actual).then_some(CellMismatch { profile: *profile, expected, actual })
        })
        .collect();
    Ok(TableReport { x, y, checked: parsed.len(), mismatches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::sample_grid;

    fn p(code: &str) -> StrategyProfile {
        code.parse().unwrap()
    }

    #[test]
    fn table_examples() {
        assert_eq!(raw_payoff(p("aei"), 10, 2), PayoffVector::new(9, -4, 2));
        assert_eq!(raw_payoff(p("aei"), 0, 0), PayoffVector::new(9, -4, 2));
        assert_eq!(raw_payoff_symbolic(p("afi")).to_string(), "(x-11,-x+16,2)");
        assert_eq!(raw_payoff(p("dei"), 5, 1), PayoffVector::new(20, -24, 2));
        assert_eq!(raw_payoff_symbolic(p("ahi")).to_string(), "(x-11,-x-y,y-2)");
    }

    #[test]
    fn table_matches_on_grid() {
        for (x, y) in sample_grid() {
            let r = verify_table(x, y).unwrap();
            assert!(r.is_clean(), "({x},{y}): {:?}", r.mismatches);
        }
        // Off-grid points too.
        for (x, y) in [(3, 2), (17, 0), (19, 3), (1, 1)] {
            assert!(verify_table(x, y).unwrap().is_clean());
        }
    }

    #[test]
    fn table_matches_symbolically() {
        for (profile, cell) in parse_table(&REFERENCE_TABLE).unwrap() {
            assert_eq!(raw_payoff_symbolic(profile), cell, "{profile}");
        }
    }

    #[test]
    fn corrupted_cell_is_flagged() {
        let mut cells = REFERENCE_TABLE;
        cells[17] = ("bfi", "(x-2,-24,2)");
        let r = verify_table_against(&cells, 10, 2).unwrap();
        assert_eq!(r.mismatches.len(), 1);
        assert_eq!(r.mismatches[0].profile, p("bfi"));
        assert_eq!(r.mismatches[0].expected, PayoffVector::new(8, -24, 2));
        assert_eq!(r.mismatches[0].actual, PayoffVector::new(9, -24, 2));
    }

    #[test]
    fn inadmissible_rejected() {
        assert!(matches!(verify_table(20, 0), Err(GameError::InvalidParams { .. })));
    }

    /// Hand-derived enforced cells.
    #[test]
    fn enforced_fixture() {
        let cases = [
            // Everyone honest: nothing to enforce.
            ("aei", 10, 2, (9, -4, 2)),
            // Wrong seller key: seller tranche of 20 comes back on appeal,
            // seller keeps its -10 cost, consumer ends at -24 + 20 with no data.
            ("cei", 10, 2, (-10, -4, 2)),
            // Garbage data under a good key: same refund, cost -1.
            ("bei", 10, 2, (-1, -4, 2)),
            // Seller does nothing and is refunded away.
            ("dei", 10, 2, (0, -4, 2)),
            // Provider with the wrong key: fee of 4 refunded, cost -1 stays.
            // Consumer gets back 4 of 24 and has no data.
            ("aej", 10, 2, (9, -20, -1)),
            ("ael", 10, 2, (9, -20, 0)),
            // Both cheat: everything refunded.
            ("dhl", 10, 2, (0, -12, 0)),
            ("del", 10, 2, (0, 0, 0)),
            // Underpayment: the order never funds, x + 4 is forfeited.
            ("afi", 10, 2, (0, -14, 0)),
            ("agi", 10, 2, (0, -22, 0)),
            ("ahi", 10, 2, (0, -12, 0)),
            ("ahi", 0, 3, (0, -3, 0)),
        ];
        for (code, x, y, (s, c, pr)) in cases {
            assert_eq!(enforced_payoff(p(code), x, y), PayoffVector::new(s, c, pr), "{code} at ({x},{y})");
        }
    }

    #[test]
    fn enforced_flows_conserve_tokens() {
        for profile in StrategyProfile::all() {
            for (x, y) in sample_grid() {
                let b = enforced_breakdown(profile, x, y);
                let forfeited = if profile.consumer == ConsumerStrategy::E {
                    0
                } else {
                    CostTable::STANDARD.consumer_payment(profile.consumer).eval(x, y)
                };
                assert_eq!(b.flows.total() + forfeited, 0, "{profile}");
            }
        }
    }
}
