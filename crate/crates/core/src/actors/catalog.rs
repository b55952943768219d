use serde::{Deserialize, Serialize};

use super::scenario::{Role, RunTranscript};
use super::strategy::StrategyProfile;
use crate::contracts::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    Honest,
    SellerCheat,
    ProviderCheat,
    Underpay,
}

/// One expected qualitative outcome against an honest, appealing counterpart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheatCase {
    pub profile: StrategyProfile,
    pub class: OutcomeClass,
    pub funded: bool,
    pub recovered: bool,
    pub seller_verdict: Option<Verdict>,
    pub provider_verdict: Option<Verdict>,
    /// The party whose deviation is under test.
    pub cheater: Option<Role>,
}

impl CheatCase {
    fn new(code: &str, class: OutcomeClass) -> CheatCase {
        let profile: StrategyProfile = code.parse().expect("catalog codes are valid");
        let (funded, recovered, seller_verdict, provider_verdict, cheater) = match class {
            OutcomeClass::Honest => (true, true, None, None, None),
            OutcomeClass::SellerCheat => (true, false, Some(Verdict::Upheld), None, Some(Role::Seller)),
            OutcomeClass::ProviderCheat => (true, false, None, Some(Verdict::Upheld), Some(Role::Provider)),
            OutcomeClass::Underpay => (false, false, None, None, Some(Role::Consumer)),
        };
        CheatCase { profile, class, funded, recovered, seller_verdict, provider_verdict, cheater }
    }

    /// Compares a transcript against this case; the error lists every difference.
    pub fn check(&self, t: &RunTranscript) -> Result<(), String> {
        let mut problems = Vec::new();
        if t.profile != self.profile {
            problems.push(format!("profile {} != {}", t.profile, self.profile));
        }
        if t.funded != self.funded {
            problems.push(format!("funded {} != {}", t.funded, self.funded));
        }
        if t.recovered != self.recovered {
            problems.push(format!("recovered {} != {}", t.recovered, self.recovered));
        }
        if t.seller_verdict != self.seller_verdict {
            problems.push(format!("seller verdict {:?} != {:?}", t.seller_verdict, self.seller_verdict));
        }
        if t.provider_verdict != self.provider_verdict {
            problems.push(format!("provider verdict {:?} != {:?}", t.provider_verdict, self.provider_verdict));
        }
        if !self.funded && t.keys_released {
            problems.push("keys released to an unfunded order".into());
        }
        if let Some(role) = self.cheater {
            if t.net_gain(role) > 0 {
                problems.push(format!("cheating {:?} gained {}", role, t.net_gain(role)));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join("; "))
        }
    }
}

/// The ten outcome classes: honest play, three seller deviations, three
/// provider deviations and three kinds of underpayment.
pub fn cheat_catalog() -> Vec<CheatCase> {
    use OutcomeClass::*;
    vec![
        CheatCase::new("aei", Honest),
        CheatCase::new("bei", SellerCheat),
        CheatCase::new("cei", SellerCheat),
        CheatCase::new("dei", SellerCheat),
        CheatCase::new("aej", ProviderCheat),
        CheatCase::new("aek", ProviderCheat),
        CheatCase::new("ael", ProviderCheat),
        CheatCase::new("afi", Underpay),
        CheatCase::new("agi", Underpay),
        CheatCase::new("ahi", Underpay),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actors::{run_scenario, ScenarioParams};

    #[test]
    fn catalog_shape() {
        let cat = cheat_catalog();
        assert_eq!(cat.len(), 10);
        assert_eq!(cat.iter().filter(|c| c.class == OutcomeClass::SellerCheat).count(), 3);
        assert_eq!(cat.iter().filter(|c| c.class == OutcomeClass::ProviderCheat).count(), 3);
        assert_eq!(cat.iter().filter(|c| c.class == OutcomeClass::Underpay).count(), 3);
    }

    #[test]
    fn catalog_holds_on_small_runs() {
        let params = ScenarioParams::sized(8, 128);
        for case in cheat_catalog() {
            let t = run_scenario(case.profile, &params).unwrap();
            case.check(&t).unwrap_or_else(|e| panic!("{}: {e}", case.profile));
        }
    }
}
