use serde::{Deserialize, Serialize};

use super::PayoffVector;
use crate::actors::{ConsumerStrategy, ProviderStrategy, SellerStrategy, StrategyProfile};

fn index(p: &StrategyProfile) -> usize {
    p.seller as usize * 16 + p.consumer as usize * 4 + p.provider as usize
}

/// A payoff function evaluated once over all 64 profiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayoffGrid {
    cells: Vec<PayoffVector>,
}

impl PayoffGrid {
    pub fn build(f: impl Fn(StrategyProfile, i64, i64) -> PayoffVector, x: i64, y: i64) -> PayoffGrid {
        PayoffGrid { cells: StrategyProfile::all().into_iter().map(|p| f(p, x, y)).collect() }
    }

    pub fn get(&self, p: StrategyProfile) -> PayoffVector {
        self.cells[index(&p)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (StrategyProfile, PayoffVector)> + '_ {
        StrategyProfile::all().into_iter().zip(self.cells.iter().copied())
    }
}

/// Profiles where no player gains strictly by deviating alone.
pub fn nash_equilibria(f: impl Fn(StrategyProfile, i64, i64) -> PayoffVector, x: i64, y: i64) -> Vec<StrategyProfile> {
    let g = PayoffGrid::build(f, x, y);
    StrategyProfile::all()
        .into_iter()
        .filter(|&p| {
            let u = g.get(p);
            let seller_ok =
                SellerStrategy::ALL.iter().all(|&s| g.get(StrategyProfile { seller: s, ..p }).seller <= u.seller);
            let consumer_ok = ConsumerStrategy::ALL
                .iter()
                .all(|&c| g.get(StrategyProfile { consumer: c, ..p }).consumer <= u.consumer);
            let provider_ok = ProviderStrategy::ALL
                .iter()
                .all(|&q| g.get(StrategyProfile { provider: q, ..p }).provider <= u.provider);
            seller_ok && consumer_ok && provider_ok
        })
        .collect()
}

/// Result of backward induction, with the full policies of the later movers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgamePerfect {
    pub outcome: StrategyProfile,
    pub payoff: PayoffVector,
    /// Consumer reply to each seller move, indexed by seller strategy.
    pub consumer_policy: [ConsumerStrategy; 4],
    /// Provider reply to each (seller, consumer) history.
    pub provider_policy: [[ProviderStrategy; 4]; 4],
}

/// First maximiser by `key`; ties go to the earliest candidate.
fn argmax<T: Copy>(candidates: &[T], key: impl Fn(T) -> i64) -> T {
    let mut best = candidates[0];
    let mut best_v = key(best);
    for &c in &candidates[1..] {
        let v = key(c);
        if v > best_v {
            best = c;
            best_v = v;
        }
    }
    best
}

/// Solves the game with the seller moving first, then the consumer, then the
/// provider. Each mover picks its best reply; ties go to the earlier letter.
pub fn backward_induction(f: impl Fn(StrategyProfile, i64, i64) -> PayoffVector, x: i64, y: i64) -> SubgamePerfect {
    let g = PayoffGrid::build(f, x, y);
    let mut provider_policy = [[ProviderStrategy::I; 4]; 4];
    for s in SellerStrategy::ALL {
        for c in ConsumerStrategy::ALL {
            provider_policy[s as usize][c as usize] =
                argmax(&ProviderStrategy::ALL, |q| g.get(StrategyProfile::new(s, c, q)).provider);
        }
    }
    let reply =
        |s: SellerStrategy, c: ConsumerStrategy| StrategyProfile::new(s, c, provider_policy[s as usize][c as usize]);
    let mut consumer_policy = [ConsumerStrategy::E; 4];
    for s in SellerStrategy::ALL {
        consumer_policy[s as usize] = argmax(&ConsumerStrategy::ALL, |c| g.get(reply(s, c)).consumer);
    }
    let seller = argmax(&SellerStrategy::ALL, |s| g.get(reply(s, consumer_policy[s as usize])).seller);
    let outcome = reply(seller, consumer_policy[seller as usize]);
    SubgamePerfect { outcome, payoff: g.get(outcome), consumer_policy, provider_policy }
}

/// Sum of all three payoffs for every profile, in enumeration order.
pub fn system_totals(
    f: impl Fn(StrategyProfile, i64, i64) -> PayoffVector,
    x: i64,
    y: i64,
) -> Vec<(StrategyProfile, i64)> {
    PayoffGrid::build(f, x, y).iter().map(|(p, u)| (p, u.total())).collect()
}

/// The profiles attaining the largest system total, and that total.
pub fn max_total_profiles(
    f: impl Fn(StrategyProfile, i64, i64) -> PayoffVector,
    x: i64,
    y: i64,
) -> (i64, Vec<StrategyProfile>) {
    let totals = system_totals(f, x, y);
    let best = totals.iter().map(|(_, t)| *t).max().expect("64 profiles");
    (best, totals.into_iter().filter(|(_, t)| *t == best).map(|(p, _)| p).collect())
}
