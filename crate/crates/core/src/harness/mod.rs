//! Benchmark and reporting plumbing.
//!
//! [`bench_download`] runs an honest trade end to end and times the
//! multi-provider download over throttled loopback TCP. [`count_phase_ops`]
//! and [`honest_trace`] expose the per-phase operation counts, and the
//! `report` functions render results as JSON, CSV or text.

mod bench;
mod counters;
mod report;
mod session;
mod synth;
mod transport;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actors::ScenarioError;
use crate::contracts::ContractError;
use crate::crypto::CryptoError;
use crate::merkle::MerkleError;
use crate::sharding::{ShardError, DEFAULT_SLOT};

pub use bench::{bench_download, BenchReport, BenchSample};
pub use counters::{appeal_overhead, count_phase_ops, honest_trace};
pub use report::{
    matrix_rows, render_bench, render_counters, render_matrix, MatrixRow, ReportFormat, BENCH_CSV_HEADER,
    COUNTERS_CSV_HEADER, MATRIX_CSV_HEADER,
};
pub use session::{parse_payee, DataSource, Dataset, Session, Terms, ACCOUNTS};
pub use synth::synthesize;
pub use transport::{fetch, ProviderServer, ShardFrame, Throttle};

pub const MIB: u64 = 1 << 20;
pub const DEFAULT_SEED: u64 = 7;
/// Environment variable that overrides [`DEFAULT_SEED`].
pub const SEED_ENV: &str = "BDTS_SEED";
/// Per-connection cap, bytes per second.
pub const DEFAULT_BANDWIDTH: u64 = 60 * MIB;
pub const MAX_PROVIDERS: usize = 6;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid bench config: {0}")]
    InvalidConfig(String),
    #[error("transport: {0}")]
    Protocol(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Shard(#[from] ShardError),
    #[error(transparent)]
    Merkle(#[from] MerkleError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// The seed from `BDTS_SEED`, or [`DEFAULT_SEED`].
pub fn env_seed() -> u64 {
    std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}

/// Content family of the synthetic data. Only the generator looks at it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    #[default]
    Text,
    Image,
    Video,
}

impl DataType {
    pub const ALL: [DataType; 3] = [DataType::Text, DataType::Image, DataType::Video];

    pub fn name(self) -> &'static str {
        match self {
            DataType::Text => "text",
            DataType::Image => "image",
            DataType::Video => "video",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DataType {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataType::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| HarnessError::InvalidConfig(format!("unknown data type {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub data_type: DataType,
    /// Bytes.
    pub size: u64,
    pub providers: usize,
    /// Shard size in bytes.
    pub slot: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Per-connection bytes per second; 0 disables throttling.
    pub bandwidth: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            data_type: DataType::Text,
            size: 10 * MIB,
            providers: 1,
            slot: DEFAULT_SLOT,
            repetitions: 5,
            seed: env_seed(),
            bandwidth: DEFAULT_BANDWIDTH,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.size == 0 {
            return bad("size must be at least one byte".into());
        }
        if !(1..=MAX_PROVIDERS).contains(&self.providers) {
            return bad(format!("providers must be in 1..={MAX_PROVIDERS}, got {}", self.providers));
        }
        if self.slot == 0 || self.slot > u32::MAX as usize / 2 {
            return bad(format!("slot {} out of range", self.slot));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be positive".into());
        }
        if self.shard_count() < self.providers {
            return bad(format!("{} shards cannot be spread over {} providers", self.shard_count(), self.providers));
        }
        Ok(())
    }

    pub fn shard_count(&self) -> usize {
        (self.size as usize).div_ceil(self.slot)
    }

    /// Reads a JSON config; missing fields take their defaults.
    pub fn from_json_file(path: &Path) -> Result<BenchConfig, HarnessError> {
        let cfg: BenchConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Median of a non-empty sample.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two points.
pub fn stddev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
