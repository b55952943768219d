//! Per-phase counters for the cryptographic work a protocol run performs.
//!
//! A [`Meter`] is a cheap cloneable handle. Components record operations
//! against whatever phase is current; the disabled meter records nothing.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Seller sharding, encryption, tree building and on-chain exposure checks.
    Upload,
    /// Provider re-encryption and the consumer's per-shard checks against r_eed.
    Download,
    /// Paying the provider: key delivery and removal of the provider layer.
    PayProvider,
    /// Paying the seller: key delivery and removal of the seller layer.
    PaySeller,
    /// On-chain arbitration.
    Appeal,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Upload, Phase::Download, Phase::PayProvider, Phase::PaySeller, Phase::Appeal];

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    SymEncrypt,
    AsymEncrypt,
    SymDecrypt,
    AsymDecrypt,
    TreeBuild,
    ProofVerify,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub sym_encryptions: u64,
    pub asym_encryptions: u64,
    pub sym_decryptions: u64,
    pub asym_decryptions: u64,
    pub tree_builds: u64,
    pub proof_verifications: u64,
}

impl OpCounters {
    pub fn new(
        sym_encryptions: u64,
        asym_encryptions: u64,
        sym_decryptions: u64,
        asym_decryptions: u64,
        tree_builds: u64,
        proof_verifications: u64,
    ) -> Self {
        OpCounters {
            sym_encryptions,
            asym_encryptions,
            sym_decryptions,
            asym_decryptions,
            tree_builds,
            proof_verifications,
        }
    }

    fn bump(&mut self, op: Op, n: u64) {
        let field = match op {
            Op::SymEncrypt => &mut self.sym_encryptions,
            Op::AsymEncrypt => &mut self.asym_encryptions,
            Op::SymDecrypt => &mut self.sym_decryptions,
            Op::AsymDecrypt => &mut self.asym_decryptions,
            Op::TreeBuild => &mut self.tree_builds,
            Op::ProofVerify => &mut self.proof_verifications,
        };
        *field += n;
    }

    pub fn as_tuple(&self) -> (u64, u64, u64, u64, u64, u64) {
        (
            self.sym_encryptions,
            self.asym_encryptions,
            self.sym_decryptions,
            self.asym_decryptions,
            self.tree_builds,
            self.proof_verifications,
        )
    }
}

impl std::ops::Add for OpCounters {
    type Output = OpCounters;

    fn add(self, rhs: OpCounters) -> OpCounters {
        OpCounters {
            sym_encryptions: self.sym_encryptions + rhs.sym_encryptions,
            asym_encryptions: self.asym_encryptions + rhs.asym_encryptions,
            sym_decryptions: self.sym_decryptions + rhs.sym_decryptions,
            asym_decryptions: self.asym_decryptions + rhs.asym_decryptions,
            tree_builds: self.tree_builds + rhs.tree_builds,
            proof_verifications: self.proof_verifications + rhs.proof_verifications,
        }
    }
}

/// Counters for every phase of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounters {
    pub upload: OpCounters,
    pub download: OpCounters,
    pub pay_provider: OpCounters,
    pub pay_seller: OpCounters,
    pub appeal: OpCounters,
}

impl PhaseCounters {
    pub fn get(&self, phase: Phase) -> OpCounters {
        match phase {
            Phase::Upload => self.upload,
            Phase::Download => self.download,
            Phase::PayProvider => self.pay_provider,
            Phase::PaySeller => self.pay_seller,
            Phase::Appeal => self.appeal,
        }
    }

    /// The "decryption and appealing" row: both payment legs plus arbitration.
    pub fn decryption_and_appeal(&self) -> OpCounters {
        self.pay_provider + self.pay_seller + self.appeal
    }

    pub fn total(&self) -> OpCounters {
        self.upload + self.download + self.decryption_and_appeal()
    }
}

#[derive(Debug)]
struct MeterState {
    phase: Phase,
    counts: [OpCounters; 5],
}

#[derive(Debug, Clone, Default)]
pub struct Meter {
    state: Option<Arc<Mutex<MeterState>>>,
}

impl Meter {
    pub fn new() -> Meter {
        Meter {
            state: Some(Arc::new(Mutex::new(MeterState { phase: Phase::Upload, counts: [OpCounters::default(); 5] }))),
        }
    }

    pub fn disabled() -> Meter {
        Meter { state: None }
    }

    pub fn set_phase(&self, phase: Phase) {
        if let Some(state) = &self.state {
            state.lock().unwrap().phase = phase;
        }
    }

    pub fn phase(&self) -> Option<Phase> {
        self.state.as_ref().map(|s| s.lock().unwrap().phase)
    }

    pub fn record(&self, op: Op) {
        self.record_n(op, 1);
    }

    pub fn record_n(&self, op: Op, n: u64) {
        if let Some(state) = &self.state {
            let mut state = state.lock().unwrap();
            let slot = state.phase.slot();
            state.counts[slot].bump(op, n);
        }
    }

    /// Records against `phase` without disturbing the current phase.
    pub fn record_in(&self, phase: Phase, op: Op) {
        if let Some(state) = &self.state {
            state.lock().unwrap().counts[phase.slot()].bump(op, 1);
        }
    }

    pub fn snapshot(&self) -> PhaseCounters {
        let Some(state) = &self.state else {
            return PhaseCounters::default();
        };
        let c = state.lock().unwrap().counts;
        PhaseCounters { upload: c[0], download: c[1], pay_provider: c[2], pay_seller: c[3], appeal: c[4] }
    }
}
