use crate::actors::RunTranscript;
use crate::ledger::exposure_count;
use crate::meter::{OpCounters, PhaseCounters};

/// Per-phase operation counts recorded during a run.
pub fn count_phase_ops(t: &RunTranscript) -> PhaseCounters {
    t.counters
}

/// Expected counts for an honest single-provider trade over `n` shards.
///
/// Upload encrypts every shard, builds the plaintext and ciphertext trees and
/// checks two proofs per exposed piece. Download is the provider's layer and
/// one serving-root check per shard. Each payment leg opens one sealed key and
/// decrypts and checks all `n` shards.
pub fn honest_trace(n: usize) -> PhaseCounters {
    let n64 = n as u64;
    let k = exposure_count(n) as u64;
    PhaseCounters {
        upload: OpCounters::new(n64, 0, 0, 0, 2, 2 * k),
        download: OpCounters::new(n64, 0, 0, 0, 1, n64),
        pay_provider: OpCounters::new(0, 1, n64, 1, 0, n64),
        pay_seller: OpCounters::new(0, 1, n64, 1, 0, n64),
        appeal: OpCounters::default(),
    }
}

/// What CPC spends arbitrating an appeal where the posted key is wrong: one
/// check of the evidence shard, one key unsealing, one failed decryption.
pub fn appeal_overhead() -> OpCounters {
    OpCounters::new(0, 0, 1, 1, 0, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actors::{run_scenario, ScenarioParams, StrategyProfile};

    #[test]
    fn honest_runs_match_trace() {
        for n in [1, 4, 16] {
            let t = run_scenario(StrategyProfile::HONEST, &ScenarioParams::sized(n, 64)).unwrap();
            assert_eq!(count_phase_ops(&t), honest_trace(n), "n={n}");
        }
    }

    #[test]
    fn wrong_key_appeal_adds_overhead() {
        let t = run_scenario("cei".parse().unwrap(), &ScenarioParams::sized(4, 64)).unwrap();
        assert_eq!(count_phase_ops(&t).appeal, appeal_overhead());
    }
}
