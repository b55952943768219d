//! Fair-exchange data trading between sellers, storage providers and consumers.
//!
//! A seller splits its data into shards, encrypts each under a derived key and
//! commits to both the plaintext and ciphertext with Merkle roots. Providers
//! store the ciphertext under a second layer of encryption and serve it.
//! Consumers escrow payment in a contract before any key is released, and can
//! appeal to the contract with a Merkle-proved shard if a key turns out wrong.
//!
//! Layout:
//!
//! - [`merkle`], [`crypto`], [`sharding`]: commitments and the two encryption layers.
//! - [`ledger`]: a deterministic single-node chain with an event log.
//! - [`contracts`]: the listing, matching and payment state machines on [`contracts::Market`].
//! - [`actors`]: scripted parties playing any of the 64 strategy profiles.
//! - [`game`]: the payoff model, its equilibria and a cross-check against [`actors`].
//! - [`harness`]: benchmarks over throttled loopback TCP, operation counters, reports
//!   and a persistent [`harness::Session`] for the CLI.
//!
//! ```
//! use fairtrade_core::actors::{run_scenario, Role, ScenarioParams, StrategyProfile};
//!
//! let t = run_scenario(StrategyProfile::HONEST, &ScenarioParams::sized(4, 256)).unwrap();
//! assert!(t.recovered);
//! assert_eq!(t.delta(Role::Seller), 2000);
//! ```

pub mod actors;
pub mod contracts;
pub mod crypto;
pub mod game;
pub mod harness;
pub mod ledger;
pub mod merkle;
pub mod meter;
pub mod sharding;
