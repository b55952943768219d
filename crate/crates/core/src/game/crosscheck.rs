use serde::{Deserialize, Serialize};

use super::{check_admissible, enforced_breakdown, CostTable, GameError, PayoffVector};
use crate::actors::{run_scenario, Role, RunTranscript, ScenarioParams, StrategyProfile};
use crate::ledger::{tokens, CENTS_PER_TOKEN};

/// Scenario terms matching [`CostTable::STANDARD`], small enough to run all
/// 64 profiles quickly.
pub fn crosscheck_params(x: i64, y: i64) -> ScenarioParams {
    let t = CostTable::STANDARD;
    let n = 4;
    ScenarioParams {
        x: x as u64,
        y: y as u64,
        n,
        slot: 512,
        price: tokens(t.price as u64),
        unit_price: Some(tokens(t.fee as u64) / n as u64),
        seed: 11,
        strict_forfeit: true,
        appeal_window: 10,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub profile: StrategyProfile,
    /// Model token flows, base units.
    pub expected: PayoffVector,
    /// Balance deltas from the run, base units.
    pub actual: PayoffVector,
}

impl CrosscheckReport {
    pub fn agrees(&self) -> bool {
        self.expected == self.actual
    }
}

fn deltas(t: &RunTranscript) -> PayoffVector {
    PayoffVector::new(t.delta(Role::Seller), t.delta(Role::Consumer), t.delta(Role::Provider))
}

/// Runs `profile` through the contracts and compares every balance change
/// with the token flows of the enforced model.
pub fn crosscheck_simulation(profile: StrategyProfile, x: i64, y: i64) -> Result<CrosscheckReport, GameError> {
    check_admissible(x, y)?;
    crosscheck_with(profile, &crosscheck_params(x, y))
}

pub fn crosscheck_with(profile: StrategyProfile, params: &ScenarioParams) -> Result<CrosscheckReport, GameError> {
    let t = run_scenario(profile, params)?;
    let expected = enforced_breakdown(profile, params.x as i64, params.y as i64).flows.scaled(CENTS_PER_TOKEN as i64);
    let report = CrosscheckReport { profile, expected, actual: deltas(&t) };
    if report.agrees() {
        Ok(report)
    } else {
        Err(GameError::Mismatch { profile, expected: report.expected, actual: report.actual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_and_catalog_cases_agree() {
        for code in ["aei", "cei", "aej", "afi", "dhl"] {
            let r = crosscheck_simulation(code.parse().unwrap(), 10, 2).unwrap();
            assert!(r.agrees());
        }
    }

    #[test]
    fn mismatch_is_reported() {
        // A lenient market refunds the underpayment the model forfeits.
        let params = ScenarioParams { strict_forfeit: false, ..crosscheck_params(10, 2) };
        let err = crosscheck_with("afi".parse().unwrap(), &params).unwrap_err();
        assert!(matches!(err, GameError::Mismatch { .. }), "{err}");
    }
}
