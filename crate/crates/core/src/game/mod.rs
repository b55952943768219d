//! The three-player trading game: strategy costs, the raw payoff table, the
//! contract-enforced payoffs and equilibrium search over the 64 profiles.
//!
//! Players move in the order seller, consumer, provider. All amounts are in
//! whole tokens; `x` and `y` are the consumer's partial payments.

mod crosscheck;
mod payoff;
mod solve;
mod table;

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actors::{ScenarioError, StrategyProfile};

pub use crosscheck::{crosscheck_params, crosscheck_simulation, crosscheck_with, CrosscheckReport};
pub use payoff::{
    enforced_breakdown, enforced_payoff, raw_payoff, raw_payoff_symbolic, verify_table, verify_table_against,
    CellMismatch, CostTable, EnforcedPayoff, TableReport,
};
pub use solve::{backward_induction, max_total_profiles, nash_equilibria, system_totals, PayoffGrid, SubgamePerfect};
pub use table::{parse_table, Lin, SymbolicPayoff, REFERENCE_TABLE};

/// Sample points for `x`.
pub const SAMPLE_X: [i64; 4] = [0, 5, 10, 19];
/// Sample points for `y`.
pub const SAMPLE_Y: [i64; 4] = [0, 1, 2, 3];

#[derive(Debug, Error)]
pub enum GameError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{profile}: model says {expected}, execution gave {actual}")]
    Mismatch { profile: StrategyProfile, expected: PayoffVector, actual: PayoffVector },
    #[error("inadmissible parameters x={x}, y={y}")]
    InvalidParams { x: i64, y: i64 },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Payoffs in (seller, consumer, provider) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PayoffVector {
    pub seller: i64,
    pub consumer: i64,
    pub provider: i64,
}

impl PayoffVector {
    pub const fn new(seller: i64, consumer: i64, provider: i64) -> PayoffVector {
        PayoffVector { seller, consumer, provider }
    }

    pub fn total(&self) -> i64 {
        self.seller + self.consumer + self.provider
    }

    pub fn scaled(&self, k: i64) -> PayoffVector {
        PayoffVector::new(self.seller * k, self.consumer * k, self.provider * k)
    }
}

impl Add for PayoffVector {
    type Output = PayoffVector;
    fn add(self, o: PayoffVector) -> PayoffVector {
        PayoffVector::new(self.seller + o.seller, self.consumer + o.consumer, self.provider + o.provider)
    }
}

impl fmt::Display for PayoffVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.seller, self.consumer, self.provider)
    }
}

/// Which payoff function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffMode {
    /// Table values: every payee collects whatever the consumer pays.
    Raw,
    /// Values after the contracts refund cheated tranches.
    #[default]
    Enforced,
}

impl PayoffMode {
    pub fn payoff(self, profile: StrategyProfile, x: i64, y: i64) -> PayoffVector {
        match self {
            PayoffMode::Raw => raw_payoff(profile, x, y),
            PayoffMode::Enforced => enforced_payoff(profile, x, y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PayoffMode::Raw => "raw",
            PayoffMode::Enforced => "enforced",
        }
    }
}

impl FromStr for PayoffMode {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(PayoffMode::Raw),
            "enforced" => Ok(PayoffMode::Enforced),
            _ => Err(GameError::Parse(format!("unknown payoff mode {s:?}"))),
        }
    }
}

/// `0 <= x < 20`, `0 <= y < 4`, `x + y < 24`.
pub fn admissible(x: i64, y: i64) -> bool {
    (0..20).contains(&x) && (0..4).contains(&y) && x + y < 24
}

pub fn check_admissible(x: i64, y: i64) -> Result<(), GameError> {
    if admissible(x, y) {
        Ok(())
    } else {
        Err(GameError::InvalidParams { x, y })
    }
}

/// The sampled `(x, y)` grid, skipping inadmissible points.
pub fn sample_grid() -> Vec<(i64, i64)> {
    SAMPLE_X.iter().flat_map(|&x| SAMPLE_Y.iter().map(move |&y| (x, y))).filter(|&(x, y)| admissible(x, y)).collect()
}
