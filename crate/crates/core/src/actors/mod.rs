//! Strategy-driven seller, consumer and provider agents that run whole trades
//! against the contracts.

mod catalog;
mod scenario;
mod strategy;

pub use catalog::{cheat_catalog, CheatCase, OutcomeClass};
pub use scenario::{
    run_scenario, Role, RunTranscript, ScenarioError, ScenarioParams, ScenarioSpec, DEFAULT_FEE_TOKENS,
};
pub use strategy::{ConsumerStrategy, ProfileParseError, ProviderStrategy, SellerStrategy, StrategyProfile};
